//! Forward-backward consistency occlusion estimation.

use crate::error::{Error, Result};
use crate::field::{FlowField, OcclusionMask};
use crate::warp::sample_flow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionParams {
    /// Relative tolerance on the round-trip residual.
    pub alpha_consistency: f64,
    /// Absolute tolerance in squared pixels.
    pub beta_offset: f64,
}

impl Default for OcclusionParams {
    fn default() -> Self {
        Self { alpha_consistency: 0.01, beta_offset: 0.5 }
    }
}

impl OcclusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_consistency >= 0.0 && self.beta_offset >= 0.0) {
            return Err(Error::InvalidValue(format!(
                "occlusion parameters must be non-negative, got alpha={} beta={}",
                self.alpha_consistency, self.beta_offset
            )));
        }
        Ok(())
    }
}

/// Marks pixels of the forward frame whose round trip `forward` then
/// `backward` does not return home, and pixels whose target leaves the frame.
pub fn occlusion_mask(forward: &FlowField, backward: &FlowField, params: &OcclusionParams) -> Result<OcclusionMask> {
    Error::check_dims("occlusion_mask", forward.dims(), backward.dims())?;
    params.validate()?;
    let (h, w) = forward.dims();
    let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let f = forward.get(r, c);
            let x = c as f64 + f[0];
            let y = r as f64 + f[1];
            if !(0.0..=max_x).contains(&x) || !(0.0..=max_y).contains(&y) {
                data.push(true);
                continue;
            }
            let b = sample_flow(backward, x, y).value;
            let sum = [f[0] + b[0], f[1] + b[1]];
            let residual = sum[0] * sum[0] + sum[1] * sum[1];
            let scale = f[0] * f[0] + f[1] * f[1] + b[0] * b[0] + b[1] * b[1];
            data.push(residual > params.alpha_consistency * scale + params.beta_offset);
        }
    }
    OcclusionMask::new(h, w, data)
}
