//! Non-blocking loss: inside every 4x4 window, no peripheral pixel should
//! land inside the quadrilateral the four middle pixels form after moving.

use crate::error::{Error, Result};
use crate::field::{FlowField, OcclusionMask};
use crate::geometry::{in_quadrilateral, segment_distance, SegmentDistance, Vec2};

/// Lower bound on the intrusion depth before the `exp(-1/d)` penalty.
pub const DEPTH_FLOOR: f64 = 1e-9;

/// Middle pixels `A, B, C, D` relative to the anchor, cyclic from top-left.
pub const MIDDLE_OFFSETS: [(usize, usize); 4] = [(1, 1), (1, 2), (2, 2), (2, 1)];

/// Peripheral ring relative to the anchor, clockwise from the top-left.
pub const RING_OFFSETS: [(usize, usize); 12] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 3), (2, 3), (3, 3), (3, 2), (3, 1), (3, 0), (2, 0), (1, 0)];

/// A 4x4 window identified by its top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockUnit {
    pub row: usize,
    pub col: usize,
}

impl BlockUnit {
    pub fn new(row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row + 4 > height || col + 4 > width {
            return Err(Error::InvalidValue(format!(
                "unit anchor ({row}, {col}) does not fit a 4x4 window in {height}x{width}"
            )));
        }
        Ok(Self { row, col })
    }

    pub fn middle(&self) -> [(usize, usize); 4] {
        MIDDLE_OFFSETS.map(|(dr, dc)| (self.row + dr, self.col + dc))
    }

    pub fn ring(&self) -> [(usize, usize); 12] {
        RING_OFFSETS.map(|(dr, dc)| (self.row + dr, self.col + dc))
    }
}

#[inline]
fn moved(flow: &FlowField, (r, c): (usize, usize)) -> Vec2 {
    let [u, v] = flow.get(r, c);
    [c as f64 + u, r as f64 + v]
}

/// The side of the quad nearest to an intruding point.
struct Intrusion {
    peripheral: (usize, usize),
    side: usize,
    nearest: SegmentDistance,
}

/// Penalized intrusions of one unit: gated, inside the moved quad.
fn unit_intrusions(unit: BlockUnit, flow: &FlowField, occ: &OcclusionMask) -> Vec<Intrusion> {
    let middle = unit.middle();
    if middle.iter().any(|&(r, c)| occ.is_occluded(r, c)) {
        return Vec::new();
    }
    let quad = middle.map(|p| moved(flow, p));
    let [a, b, c, d] = quad;
    let mut out = Vec::new();
    for peripheral in unit.ring() {
        if occ.is_occluded(peripheral.0, peripheral.1) {
            continue;
        }
        let p = moved(flow, peripheral);
        if !in_quadrilateral(p, a, b, c, d).in_quad {
            continue;
        }
        let (side, nearest) = nearest_side(p, &quad);
        out.push(Intrusion { peripheral, side, nearest });
    }
    out
}

/// Nearest of the sides AB, BC, CD, DA; ties go to the earliest side.
fn nearest_side(p: Vec2, quad: &[Vec2; 4]) -> (usize, SegmentDistance) {
    let mut best = (0, segment_distance(p, quad[0], quad[1]));
    for side in 1..4 {
        let d = segment_distance(p, quad[side], quad[(side + 1) % 4]);
        if d.distance < best.1.distance {
            best = (side, d);
        }
    }
    best
}

#[inline]
fn depth_penalty(distance: f64) -> f64 {
    (-1.0 / distance.max(DEPTH_FLOOR)).exp()
}

/// Mean intrusion penalty over the unit's twelve peripheral pixels.
pub fn unit_blocking_loss(unit: BlockUnit, flow: &FlowField, occ: &OcclusionMask) -> f64 {
    unit_intrusions(unit, flow, occ).iter().map(|i| depth_penalty(i.nearest.distance)).sum::<f64>() / 12.0
}

#[derive(Debug, Clone)]
pub struct NonBlockingLoss {
    pub value: f64,
    pub grad: FlowField,
}

fn units(height: usize, width: usize) -> impl Iterator<Item = BlockUnit> {
    (0..=height - 4).flat_map(move |row| (0..=width - 4).map(move |col| BlockUnit { row, col }))
}

fn check_inputs(flow: &FlowField, occ: &OcclusionMask, context: &'static str) -> Result<()> {
    Error::check_dims(context, flow.dims(), occ.dims())?;
    let (h, w) = flow.dims();
    if h < 4 || w < 4 {
        return Err(Error::TooSmall { context, min_h: 4, min_w: 4, h, w });
    }
    Ok(())
}

/// Mean unit loss over all `(H-3)(W-3)` windows, with the gradient through
/// each intrusion depth. Membership and masks are held constant.
pub fn non_blocking_loss(flow: &FlowField, occ: &OcclusionMask) -> Result<NonBlockingLoss> {
    check_inputs(flow, occ, "non_blocking_loss")?;
    let (h, w) = flow.dims();
    let norm = 1.0 / ((h - 3) * (w - 3)) as f64;
    let mut grad = vec![[0.0; 2]; h * w];
    let mut total = 0.0;
    for unit in units(h, w) {
        let middle = unit.middle();
        let mut unit_total = 0.0;
        for hit in unit_intrusions(unit, flow, occ) {
            let d = hit.nearest.distance;
            unit_total += depth_penalty(d);
            if d < DEPTH_FLOOR {
                continue;
            }
            let p = moved(flow, hit.peripheral);
            let n = [(p[0] - hit.nearest.closest[0]) / d, (p[1] - hit.nearest.closest[1]) / d];
            let scale = norm / 12.0 * depth_penalty(d) / (d * d);
            let t = hit.nearest.t;
            let s1 = middle[hit.side];
            let s2 = middle[(hit.side + 1) % 4];
            for ((r, c), k) in [(hit.peripheral, 1.0), (s1, -(1.0 - t)), (s2, -t)] {
                let g = &mut grad[r * w + c];
                g[0] += scale * k * n[0];
                g[1] += scale * k * n[1];
            }
        }
        total += unit_total / 12.0;
    }
    Ok(NonBlockingLoss { value: total * norm, grad: FlowField::new(h, w, grad)? })
}

/// Number of gated peripheral pixels that land inside their unit's quad.
pub fn blocked_count(flow: &FlowField, occ: &OcclusionMask) -> Result<usize> {
    check_inputs(flow, occ, "blocked_count")?;
    let (h, w) = flow.dims();
    Ok(units(h, w).map(|u| unit_intrusions(u, flow, occ).len()).sum())
}

/// Per (unit, peripheral) branch state: membership, nearest side, whether the
/// closest point is an endpoint, and the depth clamp. A change between two
/// flows means a branch of the loss was switched.
pub fn branch_signature(flow: &FlowField, occ: &OcclusionMask) -> Vec<u8> {
    let (h, w) = flow.dims();
    let mut out = Vec::new();
    if h < 4 || w < 4 {
        return out;
    }
    for unit in units(h, w) {
        let hits = unit_intrusions(unit, flow, occ);
        for peripheral in unit.ring() {
            let code = match hits.iter().find(|i| i.peripheral == peripheral) {
                None => 0,
                Some(i) => {
                    let t_state = if i.nearest.t <= 0.0 {
                        0
                    } else if i.nearest.t >= 1.0 {
                        2
                    } else {
                        1
                    };
                    let clamped = (i.nearest.distance < DEPTH_FLOOR) as u8;
                    1 + i.side as u8 * 8 + t_state * 2 + clamped
                }
            };
            out.push(code);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 4x4 field with a static middle square and ring pixel (0,0) moved to
    /// the square's center.
    fn insertion() -> FlowField {
        let mut f = FlowField::zeros(4, 4);
        f.set(0, 0, [1.5, 1.5]);
        f
    }

    #[test]
    fn unit_layout() {
        let u = BlockUnit::new(2, 3, 6, 7).unwrap();
        let mid = u.middle();
        assert_eq!(mid, [(3, 4), (3, 5), (4, 5), (4, 4)]);
        let ring = u.ring();
        assert_eq!(ring.len(), 12);
        for p in ring {
            assert!(!mid.contains(&p));
        }
        assert!(BlockUnit::new(3, 0, 6, 7).is_err());
    }

    #[test]
    fn translation_has_no_intrusion() {
        let f = FlowField::constant(4, 4, [2.3, -0.7]);
        let u = BlockUnit::new(0, 0, 4, 4).unwrap();
        assert_eq!(unit_blocking_loss(u, &f, &OcclusionMask::none(4, 4)), 0.0);
    }

    #[test]
    fn insertion_value() {
        let f = insertion();
        let u = BlockUnit::new(0, 0, 4, 4).unwrap();
        let l = unit_blocking_loss(u, &f, &OcclusionMask::none(4, 4));
        assert!((l - (-2.0f64).exp() / 12.0).abs() < 1e-15);
        assert!((l - 0.011278).abs() < 1e-6);
        let whole = non_blocking_loss(&f, &OcclusionMask::none(4, 4)).unwrap();
        assert_eq!(whole.value, l);
        assert_eq!(blocked_count(&f, &OcclusionMask::none(4, 4)).unwrap(), 1);

        let mut occ = OcclusionMask::none(4, 4);
        occ.set(1, 1, true);
        assert_eq!(unit_blocking_loss(u, &f, &occ), 0.0);
    }

    #[test]
    fn fully_occluded_is_zero() {
        let out = non_blocking_loss(&insertion(), &OcclusionMask::all(4, 4)).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.grad.max_abs(), 0.0);
    }

    #[test]
    fn too_small() {
        let f = FlowField::zeros(3, 8);
        assert!(matches!(non_blocking_loss(&f, &OcclusionMask::none(3, 8)), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn collapsed_quad_is_total() {
        // Middle pixels all sent to one point; a ring pixel on that point
        // hits the depth floor.
        let mut f = FlowField::zeros(4, 4);
        for (r, c) in MIDDLE_OFFSETS {
            f.set(r, c, [1.5 - c as f64, 1.5 - r as f64]);
        }
        f.set(0, 0, [1.5, 1.5]);
        let out = non_blocking_loss(&f, &OcclusionMask::none(4, 4)).unwrap();
        assert!(out.value.is_finite());
        assert!(out.grad.is_finite());
    }

    #[test]
    fn penalty_monotone_in_depth() {
        let mut prev = 0.0;
        for k in 1..100 {
            let v = depth_penalty(k as f64 * 0.05);
            assert!(v > prev && v < 1.0);
            prev = v;
        }
    }
}
