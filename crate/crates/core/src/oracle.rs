//! Reference predicates built on a different construction than the loss
//! code (orientation signs and winding numbers), plus seeded suites that
//! compare the two on random inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{in_quadrilateral, intersection_coeffs, Vec2};

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Proper crossing of segments `p1 p2` and `q1 q2` by orientation signs;
/// `None` when any orientation vanishes (touching or collinear).
pub fn segments_cross(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> Option<bool> {
    let o = [orient(p1, p2, q1), orient(p1, p2, q2), orient(q1, q2, p1), orient(q1, q2, p2)];
    if o.contains(&0.0) {
        return None;
    }
    Some(o[0].signum() != o[1].signum() && o[2].signum() != o[3].signum())
}

/// Winding number of a closed polygon around `p`.
pub fn winding_number(p: Vec2, poly: &[Vec2]) -> i32 {
    let mut wn = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if a[1] <= p[1] {
            if b[1] > p[1] && orient(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && orient(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Even-odd ray-casting membership.
pub fn even_odd(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn edge_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

/// A quadrilateral is simple when its two pairs of opposite sides do not
/// meet and no vertices coincide.
pub fn is_simple_quad(q: &[Vec2; 4]) -> bool {
    for i in 0..4 {
        for j in i + 1..4 {
            if q[i] == q[j] {
                return false;
            }
        }
    }
    let meets = |a: Vec2, b: Vec2, c: Vec2, d: Vec2| segments_cross(a, b, c, d).unwrap_or(true);
    !meets(q[0], q[1], q[2], q[3]) && !meets(q[1], q[2], q[3], q[0])
}

pub fn is_convex_quad(q: &[Vec2; 4]) -> bool {
    let s: Vec<f64> = (0..4).map(|i| orient(q[i], q[(i + 1) % 4], q[(i + 2) % 4])).collect();
    s.iter().all(|&v| v > 0.0) || s.iter().all(|&v| v < 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleReport {
    pub checked: usize,
    /// Samples discarded as too close to a degenerate configuration.
    pub skipped: usize,
    pub disagreements: usize,
    /// Cases where the reference predicate reported a hit (crossing or
    /// containment).
    pub positives: usize,
    /// Concave shapes among the samples (membership suite only).
    pub concave: usize,
}

/// Compares the crossing declaration from the intersection coefficients with
/// orientation-sign segment crossing on random pairs: positions in
/// `[0, 10]^2`, displacements in `[-5, 5]^2`. Pairs within `margin` of a
/// degeneracy (`|det|`, or either fraction near 0 or 1) are skipped.
pub fn check_intersection_predicate(samples: usize, seed: u64, margin: f64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport::default();
    for _ in 0..samples {
        let mut pt = || [rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)];
        let (p_mid, p_i) = (pt(), pt());
        let mut disp = || [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let (d_mid, d_i) = (disp(), disp());
        let k = intersection_coeffs(p_mid, d_mid, p_i, d_i);
        let near = |v: f64| v.abs() < margin || (v - 1.0).abs() < margin;
        if k.parallel || k.determinant.abs() <= margin || near(k.lambda) || near(k.mu) {
            report.skipped += 1;
            continue;
        }
        let end_mid = [p_mid[0] + d_mid[0], p_mid[1] + d_mid[1]];
        let end_i = [p_i[0] + d_i[0], p_i[1] + d_i[1]];
        let Some(reference) = segments_cross(p_mid, end_mid, p_i, end_i) else {
            report.skipped += 1;
            continue;
        };
        report.checked += 1;
        report.positives += reference as usize;
        if reference != k.intersects() {
            report.disagreements += 1;
        }
    }
    report
}

/// Compares double-division quadrilateral membership with winding-number
/// and even-odd containment on random simple quads (unit square corners
/// jittered in `[-2, 2]^2`) and `queries` points each, skipping points
/// within `margin` of an edge.
pub fn check_quad_membership(quads: usize, queries: usize, seed: u64, margin: f64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport::default();
    let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let mut built = 0;
    while built < quads {
        let quad: [Vec2; 4] = corners.map(|c: Vec2| [c[0] + rng.gen_range(-2.0..2.0), c[1] + rng.gen_range(-2.0..2.0)]);
        if !is_simple_quad(&quad) {
            continue;
        }
        built += 1;
        report.concave += !is_convex_quad(&quad) as usize;
        let lo = [
            quad.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) - 0.5,
            quad.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min) - 0.5,
        ];
        let hi = [
            quad.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) + 0.5,
            quad.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max) + 0.5,
        ];
        for _ in 0..queries {
            let p = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
            let clearance = (0..4).map(|i| edge_distance(p, quad[i], quad[(i + 1) % 4])).fold(f64::INFINITY, f64::min);
            if clearance < margin {
                report.skipped += 1;
                continue;
            }
            let wn = winding_number(p, &quad) != 0;
            let eo = even_odd(p, &quad);
            if wn != eo {
                // The references disagree only on a degenerate query.
                report.skipped += 1;
                continue;
            }
            report.checked += 1;
            report.positives += wn as usize;
            let m = in_quadrilateral(p, quad[0], quad[1], quad[2], quad[3]);
            if m.in_quad != wn {
                report.disagreements += 1;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_crossing() {
        assert_eq!(segments_cross([0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]), Some(true));
        assert_eq!(segments_cross([0.0, 0.0], [1.0, 0.0], [0.5, 3.0], [0.5, 2.0]), Some(false));
        assert_eq!(segments_cross([0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]), None);
    }

    #[test]
    fn reference_containment() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(winding_number([0.5, 0.5], &sq), 1);
        assert!(even_odd([0.5, 0.5], &sq));
        assert_eq!(winding_number([1.5, 0.5], &sq), 0);
        assert!(!even_odd([1.5, 0.5], &sq));
        let notch = [[0.0, 4.0], [1.0, 1.0], [4.0, 0.0], [0.0, 0.0]];
        assert!(!even_odd([2.0, 1.5], &notch));
        assert!(is_simple_quad(&notch));
        assert!(!is_convex_quad(&notch));
        assert!(!is_simple_quad(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]));
    }

    #[test]
    fn small_suites_agree() {
        let r = check_intersection_predicate(2000, 1, 1e-9);
        assert_eq!(r.disagreements, 0);
        assert!(r.positives > 0);
        let r = check_quad_membership(300, 10, 2, 1e-6);
        assert_eq!(r.disagreements, 0);
        assert!(r.concave > 0 && r.positives > 0);
    }
}
