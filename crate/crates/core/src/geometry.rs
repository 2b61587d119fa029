//! Planar predicates used by the geometric flow losses: displacement-segment
//! intersection coefficients, triangle and quadrilateral membership, and
//! point-to-segment distance.

/// A position or displacement `[x, y]` in pixels.
pub type Vec2 = [f64; 2];

/// Below this magnitude the two displacements are treated as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-12;

#[inline]
pub fn cross2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// Crossing parameters of two displacement segments `p_mid -> p_mid + d_mid`
/// and `p_i -> p_i + d_i`.
///
/// `lambda` is the fraction along the middle segment and `mu` the fraction
/// along the neighbor segment at which their supporting lines meet;
/// `determinant` is the 2x2 system determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectCoeffs {
    pub lambda: f64,
    pub mu: f64,
    pub determinant: f64,
    pub parallel: bool,
}

impl IntersectCoeffs {
    /// Crossing requires both fractions strictly inside `(0, 1)`.
    pub fn intersects(&self) -> bool {
        !self.parallel && self.lambda > 0.0 && self.lambda < 1.0 && self.mu > 0.0 && self.mu < 1.0
    }
}

pub fn intersection_coeffs(p_mid: Vec2, d_mid: Vec2, p_i: Vec2, d_i: Vec2) -> IntersectCoeffs {
    let determinant = -d_mid[0] * d_i[1] + d_i[0] * d_mid[1];
    if determinant.abs() <= PARALLEL_TOLERANCE {
        return IntersectCoeffs { lambda: f64::NAN, mu: f64::NAN, determinant, parallel: true };
    }
    let delta = sub(p_i, p_mid);
    let lambda = (-delta[0] * d_i[1] + d_i[0] * delta[1]) / determinant;
    let mu = (d_mid[0] * delta[1] - d_mid[1] * delta[0]) / determinant;
    IntersectCoeffs { lambda, mu, determinant, parallel: false }
}

/// Partial derivatives of `lambda` and `mu` with respect to
/// `(d_mid.x, d_mid.y, d_i.x, d_i.y)`, for a non-parallel pair.
pub(crate) fn intersection_coeff_grads(
    p_mid: Vec2,
    d_mid: Vec2,
    p_i: Vec2,
    d_i: Vec2,
    coeffs: &IntersectCoeffs,
) -> ([f64; 4], [f64; 4]) {
    let delta = sub(p_i, p_mid);
    let det = coeffs.determinant;
    let d_det = [-d_i[1], d_i[0], d_mid[1], -d_mid[0]];
    let d_num_lambda = [0.0, 0.0, delta[1], -delta[0]];
    let d_num_mu = [delta[1], -delta[0], 0.0, 0.0];
    let mut d_lambda = [0.0; 4];
    let mut d_mu = [0.0; 4];
    for k in 0..4 {
        d_lambda[k] = (d_num_lambda[k] - coeffs.lambda * d_det[k]) / det;
        d_mu[k] = (d_num_mu[k] - coeffs.mu * d_det[k]) / det;
    }
    (d_lambda, d_mu)
}

/// Same-direction test of three edge cross products; zero counts as either
/// sign so boundary points are inside and either orientation is accepted.
#[inline]
fn same_direction(c: [f64; 3]) -> bool {
    (c[0] >= 0.0 && c[1] >= 0.0 && c[2] >= 0.0) || (c[0] <= 0.0 && c[1] <= 0.0 && c[2] <= 0.0)
}

/// Triangle membership from the edge cycle `B -> A -> C -> B`, closed
/// (boundary points are inside). A zero-area triangle only contains points
/// of the segments spanning its vertices.
pub fn in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    let crosses = [cross2(sub(a, b), sub(p, b)), cross2(sub(c, a), sub(p, a)), cross2(sub(b, c), sub(p, c))];
    if !same_direction(crosses) {
        return false;
    }
    if cross2(sub(b, a), sub(c, a)) == 0.0 {
        // All three crosses vanish for any point on the supporting line.
        let lo = [a[0].min(b[0]).min(c[0]), a[1].min(b[1]).min(c[1])];
        let hi = [a[0].max(b[0]).max(c[0]), a[1].max(b[1]).max(c[1])];
        return p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1];
    }
    true
}

/// Membership of one point in the four triangles of the two diagonal
/// divisions of a quadrilateral `ABCD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadMembership {
    pub in_abc: bool,
    pub in_acd: bool,
    pub in_abd: bool,
    pub in_bcd: bool,
    pub in_quad: bool,
}

/// Double-division test: the point must fall in a triangle of the `AC`
/// split and in a triangle of the `BD` split, which rejects points that only
/// the outer diagonal's triangles cover when the quad is concave.
pub fn in_quadrilateral(p: Vec2, a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> QuadMembership {
    let in_abc = in_triangle(p, a, b, c);
    let in_acd = in_triangle(p, a, c, d);
    let in_abd = in_triangle(p, a, b, d);
    let in_bcd = in_triangle(p, b, c, d);
    QuadMembership { in_abc, in_acd, in_abd, in_bcd, in_quad: (in_abc || in_acd) && (in_abd || in_bcd) }
}

/// Distance from `p` to the closed segment `s1 s2`, with the segment
/// parameter of the closest point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentDistance {
    pub distance: f64,
    /// Position of the closest point along the segment, in `[0, 1]`.
    pub t: f64,
    /// Closest point on the segment.
    pub closest: Vec2,
}

pub fn segment_distance(p: Vec2, s1: Vec2, s2: Vec2) -> SegmentDistance {
    let dir = sub(s2, s1);
    let len2 = dir[0] * dir[0] + dir[1] * dir[1];
    let t = if len2 > 0.0 {
        let rel = sub(p, s1);
        ((rel[0] * dir[0] + rel[1] * dir[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let closest = [s1[0] + t * dir[0], s1[1] + t * dir[1]];
    let off = sub(p, closest);
    SegmentDistance { distance: off[0].hypot(off[1]), t, closest }
}

pub fn point_segment_distance(p: Vec2, s1: Vec2, s2: Vec2) -> f64 {
    segment_distance(p, s1, s2).distance
}
