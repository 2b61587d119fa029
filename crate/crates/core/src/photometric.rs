//! Census photometric loss and edge-aware smoothness loss.

use crate::error::{Error, Result};
use crate::field::{FlowField, Image, OcclusionMask};
use crate::warp::warp_with_derivatives;

/// Parameters of the robust penalty `(|x| + epsilon)^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustLossParams {
    pub epsilon: f64,
    pub q: f64,
}

impl Default for RobustLossParams {
    fn default() -> Self {
        Self { epsilon: 0.01, q: 0.4 }
    }
}

impl RobustLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::InvalidValue(format!(
                "robust loss needs epsilon > 0 and 0 < q <= 1, got epsilon={} q={}",
                self.epsilon, self.q
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn robust_sigma(x: f64, params: &RobustLossParams) -> f64 {
    (x.abs() + params.epsilon).powf(params.q)
}

/// Derivative of [`robust_sigma`] for non-negative arguments, taking the
/// right-hand derivative at 0.
#[inline]
pub(crate) fn robust_sigma_deriv_nonneg(x: f64, params: &RobustLossParams) -> f64 {
    params.q * (x + params.epsilon).powf(params.q - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothnessOrder {
    First,
    Second,
}

impl SmoothnessOrder {
    pub fn from_k(k: u32) -> Result<Self> {
        match k {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            other => Err(Error::InvalidValue(format!("smoothness order must be 1 or 2, got {other}"))),
        }
    }

    pub fn k(self) -> usize {
        match self {
            Self::First => 1,
            Self::Second => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessParams {
    /// Edge sensitivity of the image-gradient weight.
    pub mu: f64,
    pub order: SmoothnessOrder,
}

impl Default for SmoothnessParams {
    fn default() -> Self {
        Self { mu: 150.0, order: SmoothnessOrder::First }
    }
}

/// Soft-binarization constant of the census signature.
pub const CENSUS_SOFTNESS: f64 = 0.0081;
/// Denominator constant of the soft Hamming distance between signatures.
pub const HAMMING_SOFTNESS: f64 = 0.1;
pub const DEFAULT_CENSUS_RADIUS: usize = 1;

/// Per-pixel soft census signatures over a `(2r+1)^2` patch, center excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusField {
    height: usize,
    width: usize,
    radius: usize,
    entries: Vec<f64>,
}

impl CensusField {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn entries_per_pixel(&self) -> usize {
        patch_len(self.radius)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn signature(&self, row: usize, col: usize) -> &[f64] {
        let n = self.entries_per_pixel();
        let start = (row * self.width + col) * n;
        &self.entries[start..start + n]
    }
}

fn patch_len(radius: usize) -> usize {
    (2 * radius + 1) * (2 * radius + 1) - 1
}

fn patch_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::with_capacity(patch_len(radius));
    for dr in -r..=r {
        for dc in -r..=r {
            if dr != 0 || dc != 0 {
                out.push((dr, dc));
            }
        }
    }
    out
}

#[inline]
fn clamp_index(i: usize, d: isize, len: usize) -> usize {
    (i as isize + d).clamp(0, len as isize - 1) as usize
}

#[inline]
fn soft_sign(d: f64) -> f64 {
    d / (CENSUS_SOFTNESS + d * d).sqrt()
}

#[inline]
fn soft_sign_deriv(d: f64) -> f64 {
    CENSUS_SOFTNESS / (CENSUS_SOFTNESS + d * d).powf(1.5)
}

#[inline]
fn soft_hamming_term(t: f64) -> f64 {
    let t2 = t * t;
    t2 / (HAMMING_SOFTNESS + t2)
}

#[inline]
fn soft_hamming_deriv(t: f64) -> f64 {
    let den = HAMMING_SOFTNESS + t * t;
    2.0 * HAMMING_SOFTNESS * t / (den * den)
}

fn census_of_gray(gray: &[f64], height: usize, width: usize, radius: usize) -> CensusField {
    let offsets = patch_offsets(radius);
    let mut entries = Vec::with_capacity(height * width * offsets.len());
    for r in 0..height {
        for c in 0..width {
            let g = gray[r * width + c];
            for &(dr, dc) in &offsets {
                let q = clamp_index(r, dr, height) * width + clamp_index(c, dc, width);
                entries.push(soft_sign(gray[q] - g));
            }
        }
    }
    CensusField { height, width, radius, entries }
}

fn gray_of(image: &Image) -> Vec<f64> {
    image.pixels().iter().map(|p| (p[0] + p[1] + p[2]) / 3.0).collect()
}

/// Soft census transform of the channel-mean intensity with border
/// replication.
pub fn census_transform(image: &Image, radius: usize) -> Result<CensusField> {
    if radius == 0 {
        return Err(Error::InvalidValue("census radius must be at least 1".into()));
    }
    Ok(census_of_gray(&gray_of(image), image.height(), image.width(), radius))
}

/// Per-pixel soft Hamming distance between two census fields.
pub fn soft_hamming(a: &CensusField, b: &CensusField, row: usize, col: usize) -> f64 {
    a.signature(row, col).iter().zip(b.signature(row, col)).map(|(x, y)| soft_hamming_term(x - y)).sum()
}

/// Value and gradients of the bidirectional census loss.
#[derive(Debug, Clone)]
pub struct CensusLoss {
    pub value: f64,
    pub grad_forward: FlowField,
    pub grad_backward: FlowField,
}

/// Bidirectional census loss: frame `t` against `t+1` warped by `forward`,
/// and frame `t+1` against `t` warped by `backward`. Each direction is the
/// mean penalty over its non-occluded pixels.
#[allow(clippy::too_many_arguments)]
pub fn census_loss(
    frame_t: &Image,
    frame_t1: &Image,
    forward: &FlowField,
    backward: &FlowField,
    occ_t: &OcclusionMask,
    occ_t1: &OcclusionMask,
    params: &RobustLossParams,
) -> Result<CensusLoss> {
    let dims = frame_t.dims();
    Error::check_dims("census_loss frame t+1", dims, frame_t1.dims())?;
    Error::check_dims("census_loss forward flow", dims, forward.dims())?;
    Error::check_dims("census_loss backward flow", dims, backward.dims())?;
    Error::check_dims("census_loss forward mask", dims, occ_t.dims())?;
    Error::check_dims("census_loss backward mask", dims, occ_t1.dims())?;
    params.validate()?;
    let (fwd, grad_forward) = census_direction(frame_t, frame_t1, forward, occ_t, params, DEFAULT_CENSUS_RADIUS)?;
    let (bwd, grad_backward) = census_direction(frame_t1, frame_t, backward, occ_t1, params, DEFAULT_CENSUS_RADIUS)?;
    Ok(CensusLoss { value: fwd + bwd, grad_forward, grad_backward })
}

/// One direction of the census loss with its flow gradient.
pub fn census_direction(
    reference: &Image,
    target: &Image,
    flow: &FlowField,
    occ: &OcclusionMask,
    params: &RobustLossParams,
    radius: usize,
) -> Result<(f64, FlowField)> {
    let (h, w) = reference.dims();
    let reference_census = census_transform(reference, radius)?;
    let (warped, samples) = warp_with_derivatives(target, flow)?;
    let gray = gray_of(&warped);
    let offsets = patch_offsets(radius);

    let active = h * w - occ.occluded_count();
    let norm = 1.0 / active.max(1) as f64;

    // d loss / d warped gray intensity
    let mut d_gray = vec![0.0; h * w];
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            if occ.is_occluded(r, c) {
                continue;
            }
            let p = r * w + c;
            let sig_ref = reference_census.signature(r, c);
            let mut rho = 0.0;
            for (k, &(dr, dc)) in offsets.iter().enumerate() {
                let q = clamp_index(r, dr, h) * w + clamp_index(c, dc, w);
                rho += soft_hamming_term(sig_ref[k] - soft_sign(gray[q] - gray[p]));
            }
            total += robust_sigma(rho, params);
            let coef = norm * robust_sigma_deriv_nonneg(rho, params);
            for (k, &(dr, dc)) in offsets.iter().enumerate() {
                let q = clamp_index(r, dr, h) * w + clamp_index(c, dc, w);
                let d = gray[q] - gray[p];
                let t = sig_ref[k] - soft_sign(d);
                let g = -coef * soft_hamming_deriv(t) * soft_sign_deriv(d);
                d_gray[q] += g;
                d_gray[p] -= g;
            }
        }
    }

    let grad = samples
        .iter()
        .zip(&d_gray)
        .map(|(s, &g)| {
            let dx = (s.d_dx[0] + s.d_dx[1] + s.d_dx[2]) / 3.0;
            let dy = (s.d_dy[0] + s.d_dy[1] + s.d_dy[2]) / 3.0;
            [g * dx, g * dy]
        })
        .collect();
    Ok((total * norm, FlowField::new(h, w, grad)?))
}

/// Edge-aware smoothness of `flow` guided by `image`, with its exact
/// subgradient (`sign(0) = 0`).
pub fn smoothness_loss(flow: &FlowField, image: &Image, params: &SmoothnessParams) -> Result<(f64, FlowField)> {
    Error::check_dims("smoothness_loss", image.dims(), flow.dims())?;
    if params.mu.is_nan() || params.mu < 0.0 {
        return Err(Error::InvalidValue(format!("smoothness mu must be >= 0, got {}", params.mu)));
    }
    let (h, w) = flow.dims();
    let k = params.order.k();
    let stencil: &[f64] = match params.order {
        SmoothnessOrder::First => &[-1.0, 1.0],
        SmoothnessOrder::Second => &[1.0, -2.0, 1.0],
    };
    let sites = h * w.saturating_sub(k) + h.saturating_sub(k) * w;
    let mut grad = vec![[0.0; 2]; h * w];
    if sites == 0 {
        return Ok((0.0, FlowField::new(h, w, grad)?));
    }
    let norm = 1.0 / sites as f64;
    let flow_data = flow.as_slice();
    let mut total = 0.0;

    // (row step, col step) for the horizontal then vertical direction.
    for (dr, dc) in [(0usize, 1usize), (1, 0)] {
        let rows = h - dr * k.min(h);
        let cols = w - dc * k.min(w);
        for r in 0..rows {
            for c in 0..cols {
                let p = r * w + c;
                let step = dr * w + dc;
                let a = image.get(r, c);
                let b = image.get(r + dr, c + dc);
                let edge = (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs();
                let weight = (-params.mu / 3.0 * edge).exp();
                for ch in 0..2 {
                    let diff: f64 = stencil.iter().enumerate().map(|(t, s)| s * flow_data[p + t * step][ch]).sum();
                    total += weight * diff.abs();
                    if diff != 0.0 {
                        let g = norm * weight * diff.signum();
                        for (t, s) in stencil.iter().enumerate() {
                            grad[p + t * step][ch] += g * s;
                        }
                    }
                }
            }
        }
    }
    Ok((total * norm, FlowField::new(h, w, grad)?))
}
