//! Non-intersection loss: inside every 3x3 window, the displacement segment
//! of the center pixel should not cross those of its eight neighbors unless
//! occlusion explains it.

use crate::error::{Error, Result};
use crate::field::{FlowField, Image, OcclusionMask};
use crate::geometry::{intersection_coeff_grads, intersection_coeffs, IntersectCoeffs, Vec2};
use crate::photometric::{robust_sigma, robust_sigma_deriv_nonneg, RobustLossParams};

/// Neighbor offsets `(d_row, d_col)` in row-major order around the center.
pub const NEIGHBOR_OFFSETS: [(isize, isize); 8] =
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// A 3x3 window identified by its center pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntersectUnit {
    pub row: usize,
    pub col: usize,
}

impl IntersectUnit {
    pub fn new(row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row == 0 || col == 0 || row + 1 >= height || col + 1 >= width {
            return Err(Error::InvalidValue(format!(
                "unit center ({row}, {col}) does not fit a 3x3 window in {height}x{width}"
            )));
        }
        Ok(Self { row, col })
    }

    pub fn neighbors(&self) -> [(usize, usize); 8] {
        NEIGHBOR_OFFSETS.map(|(dr, dc)| ((self.row as isize + dr) as usize, (self.col as isize + dc) as usize))
    }
}

/// Color-similarity weight in `(e^-1, 1]`.
pub fn color_weight(center: [f64; 3], neighbor: [f64; 3]) -> f64 {
    let diff: f64 = center.iter().zip(&neighbor).map(|(a, b)| (a - b).abs()).sum();
    (-diff / 3.0).exp()
}

#[inline]
fn position(row: usize, col: usize) -> Vec2 {
    [col as f64, row as f64]
}

/// One center/neighbor pair of a unit, with its gating already applied.
struct PairTerm {
    neighbor: (usize, usize),
    coeffs: IntersectCoeffs,
    weight: f64,
}

fn unit_pairs<'a>(
    unit: IntersectUnit,
    flow: &'a FlowField,
    image: &'a Image,
    occ: &'a OcclusionMask,
) -> impl Iterator<Item = PairTerm> + 'a {
    let (r, c) = (unit.row, unit.col);
    let center_blocked = occ.is_occluded(r, c);
    let p_mid = position(r, c);
    let d_mid = flow.get(r, c);
    let center_color = image.get(r, c);
    unit.neighbors().into_iter().filter_map(move |(nr, nc)| {
        if center_blocked || occ.is_occluded(nr, nc) {
            return None;
        }
        let coeffs = intersection_coeffs(p_mid, d_mid, position(nr, nc), flow.get(nr, nc));
        if !coeffs.intersects() {
            return None;
        }
        Some(PairTerm { neighbor: (nr, nc), coeffs, weight: color_weight(center_color, image.get(nr, nc)) })
    })
}

#[inline]
fn pair_penalty(coeffs: &IntersectCoeffs, robust: &RobustLossParams) -> f64 {
    let delta = coeffs.lambda - coeffs.mu;
    robust_sigma((-delta * delta).exp(), robust)
}

/// Mean penalty of the unit's crossing, non-occluded center/neighbor pairs
/// (divided by all eight neighbors).
pub fn unit_loss(
    unit: IntersectUnit,
    flow: &FlowField,
    image: &Image,
    occ: &OcclusionMask,
    robust: &RobustLossParams,
) -> f64 {
    unit_pairs(unit, flow, image, occ).map(|t| t.weight * pair_penalty(&t.coeffs, robust)).sum::<f64>() / 8.0
}

#[derive(Debug, Clone)]
pub struct NonIntersectionLoss {
    pub value: f64,
    pub grad: FlowField,
}

fn check_inputs(image: &Image, flow: &FlowField, occ: &OcclusionMask) -> Result<()> {
    Error::check_dims("non_intersection image", flow.dims(), image.dims())?;
    Error::check_dims("non_intersection mask", flow.dims(), occ.dims())?;
    let (h, w) = flow.dims();
    if h < 3 || w < 3 {
        return Err(Error::TooSmall { context: "non_intersection_loss", min_h: 3, min_w: 3, h, w });
    }
    Ok(())
}

fn units(height: usize, width: usize) -> impl Iterator<Item = IntersectUnit> {
    (1..height - 1).flat_map(move |row| (1..width - 1).map(move |col| IntersectUnit { row, col }))
}

/// Mean unit loss over all `(H-2)(W-2)` windows, with the gradient through
/// the crossing fractions. Crossing indicators, masks and color weights are
/// held constant.
pub fn non_intersection_loss(
    image: &Image,
    flow: &FlowField,
    occ: &OcclusionMask,
    robust: &RobustLossParams,
) -> Result<NonIntersectionLoss> {
    check_inputs(image, flow, occ)?;
    robust.validate()?;
    let (h, w) = flow.dims();
    let norm = 1.0 / ((h - 2) * (w - 2)) as f64;
    let mut grad = vec![[0.0; 2]; h * w];
    let mut total = 0.0;
    for unit in units(h, w) {
        let p_mid = position(unit.row, unit.col);
        let d_mid = flow.get(unit.row, unit.col);
        let mut unit_total = 0.0;
        for term in unit_pairs(unit, flow, image, occ) {
            let k = &term.coeffs;
            let delta = k.lambda - k.mu;
            let e = (-delta * delta).exp();
            unit_total += term.weight * robust_sigma(e, robust);

            let (nr, nc) = term.neighbor;
            let p_i = position(nr, nc);
            let d_i = flow.get(nr, nc);
            let (d_lambda, d_mu) = intersection_coeff_grads(p_mid, d_mid, p_i, d_i, k);
            // d/d delta of w * sigma(exp(-delta^2)) / 8, scaled by the unit mean
            let outer = norm * term.weight / 8.0 * robust_sigma_deriv_nonneg(e, robust) * e * (-2.0 * delta);
            let g: [f64; 4] = std::array::from_fn(|j| outer * (d_lambda[j] - d_mu[j]));
            let mid = unit.row * w + unit.col;
            let nb = nr * w + nc;
            grad[mid][0] += g[0];
            grad[mid][1] += g[1];
            grad[nb][0] += g[2];
            grad[nb][1] += g[3];
        }
        total += unit_total / 8.0;
    }
    Ok(NonIntersectionLoss { value: total * norm, grad: FlowField::new(h, w, grad)? })
}

/// Number of (unit, neighbor) pairs whose displacement segments cross with
/// both pixels non-occluded.
pub fn crossing_count(flow: &FlowField, occ: &OcclusionMask) -> Result<usize> {
    Error::check_dims("crossing_count", flow.dims(), occ.dims())?;
    let (h, w) = flow.dims();
    if h < 3 || w < 3 {
        return Err(Error::TooSmall { context: "crossing_count", min_h: 3, min_w: 3, h, w });
    }
    let mut count = 0;
    for unit in units(h, w) {
        if occ.is_occluded(unit.row, unit.col) {
            continue;
        }
        let p_mid = position(unit.row, unit.col);
        let d_mid = flow.get(unit.row, unit.col);
        for (nr, nc) in unit.neighbors() {
            if !occ.is_occluded(nr, nc)
                && intersection_coeffs(p_mid, d_mid, position(nr, nc), flow.get(nr, nc)).intersects()
            {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Crossing indicator of every (unit, neighbor) pair; a change between two
/// flows means a branch of the loss was switched.
pub fn branch_signature(flow: &FlowField, occ: &OcclusionMask) -> Vec<bool> {
    let (h, w) = flow.dims();
    let mut out = Vec::new();
    if h < 3 || w < 3 {
        return out;
    }
    for unit in units(h, w) {
        let p_mid = position(unit.row, unit.col);
        let d_mid = flow.get(unit.row, unit.col);
        for (nr, nc) in unit.neighbors() {
            let gated = occ.is_occluded(unit.row, unit.col) || occ.is_occluded(nr, nc);
            out.push(!gated && intersection_coeffs(p_mid, d_mid, position(nr, nc), flow.get(nr, nc)).intersects());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma1() -> f64 {
        1.01f64.powf(0.4)
    }

    /// 3x3 field whose center crosses only its right neighbor at the
    /// midpoints of both segments.
    fn single_crossing() -> FlowField {
        let mut f = FlowField::constant(3, 3, [1.0, 1.0]);
        f.set(1, 2, [-1.0, 1.0]);
        f
    }

    #[test]
    fn color_weights() {
        assert_eq!(color_weight([0.2, 0.4, 0.6], [0.2, 0.4, 0.6]), 1.0);
        assert!((color_weight([0.0; 3], [0.3; 3]) - 0.740818).abs() < 1e-6);
        assert!((color_weight([1.0; 3], [0.0; 3]) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn unit_validation() {
        assert!(IntersectUnit::new(0, 1, 3, 3).is_err());
        assert!(IntersectUnit::new(1, 2, 3, 3).is_err());
        let u = IntersectUnit::new(1, 1, 3, 3).unwrap();
        for (r, c) in u.neighbors() {
            assert_eq!((r as isize - 1).abs().max((c as isize - 1).abs()), 1);
        }
    }

    #[test]
    fn constant_flow_unit_is_zero() {
        let img = Image::constant(3, 3, [0.5; 3]).unwrap();
        let f = FlowField::constant(3, 3, [2.0, -1.0]);
        let u = IntersectUnit::new(1, 1, 3, 3).unwrap();
        assert_eq!(unit_loss(u, &f, &img, &OcclusionMask::none(3, 3), &RobustLossParams::default()), 0.0);
    }

    #[test]
    fn single_crossing_value() {
        let img = Image::constant(3, 3, [0.5; 3]).unwrap();
        let f = single_crossing();
        let u = IntersectUnit::new(1, 1, 3, 3).unwrap();
        let p = RobustLossParams::default();
        let l = unit_loss(u, &f, &img, &OcclusionMask::none(3, 3), &p);
        assert!((l - sigma1() / 8.0).abs() < 1e-15);
        assert!((l - 0.125498).abs() < 1e-6);

        let whole = non_intersection_loss(&img, &f, &OcclusionMask::none(3, 3), &p).unwrap();
        assert!((whole.value - l).abs() < 1e-15);

        let mut occ = OcclusionMask::none(3, 3);
        occ.set(1, 2, true);
        assert_eq!(unit_loss(u, &f, &img, &occ, &p), 0.0);
    }

    #[test]
    fn constant_field_whole_image() {
        let img = Image::from_gray_fn(6, 7, |r, c| ((r * 7 + c) % 5) as f64 / 5.0).unwrap();
        let f = FlowField::constant(6, 7, [0.4, 3.0]);
        let out = non_intersection_loss(&img, &f, &OcclusionMask::none(6, 7), &RobustLossParams::default()).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.grad.max_abs(), 0.0);
        assert_eq!(crossing_count(&f, &OcclusionMask::none(6, 7)).unwrap(), 0);
    }

    #[test]
    fn too_small_is_rejected() {
        let img = Image::constant(2, 5, [0.0; 3]).unwrap();
        let f = FlowField::zeros(2, 5);
        assert!(matches!(
            non_intersection_loss(&img, &f, &OcclusionMask::none(2, 5), &RobustLossParams::default()),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn fully_occluded_count_is_zero() {
        let f = single_crossing();
        assert_eq!(crossing_count(&f, &OcclusionMask::none(3, 3)).unwrap(), 1);
        assert_eq!(crossing_count(&f, &OcclusionMask::all(3, 3)).unwrap(), 0);
    }

    #[test]
    fn loss_is_bounded() {
        let img = Image::constant(3, 3, [0.5; 3]).unwrap();
        // Center crossing every neighbor is impossible; still, value stays <= sigma(1).
        let f = FlowField::from_fn(3, 3, |r, c| [2.0 * (1.0 - c as f64), 2.0 * (1.0 - r as f64)]).unwrap();
        let l =
            non_intersection_loss(&img, &f, &OcclusionMask::none(3, 3), &RobustLossParams::default()).unwrap().value;
        assert!((0.0..=sigma1()).contains(&l));
    }
}
