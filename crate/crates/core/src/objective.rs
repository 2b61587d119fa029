//! Weighted total objective over a forward/backward flow pair.

use crate::blocking::non_blocking_loss;
use crate::error::{Error, Result};
use crate::field::{FlowField, Image, OcclusionMask};
use crate::intersection::non_intersection_loss;
use crate::occlusion::{occlusion_mask, OcclusionParams};
use crate::photometric::{census_loss, smoothness_loss, RobustLossParams, SmoothnessParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub census_weight: f64,
    pub smoothness_weight: f64,
    pub non_intersection_weight: f64,
    pub non_blocking_weight: f64,
    pub smoothness: SmoothnessParams,
    pub robust: RobustLossParams,
    pub occlusion: OcclusionParams,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            census_weight: 1.0,
            smoothness_weight: 4.0,
            non_intersection_weight: 0.01,
            non_blocking_weight: 0.01,
            smoothness: SmoothnessParams::default(),
            robust: RobustLossParams::default(),
            occlusion: OcclusionParams::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let alphas =
            [self.census_weight, self.smoothness_weight, self.non_intersection_weight, self.non_blocking_weight];
        if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidValue(format!("loss weights must be finite and >= 0, got {alphas:?}")));
        }
        if !(self.smoothness.mu.is_finite() && self.smoothness.mu >= 0.0) {
            return Err(Error::InvalidValue(format!("mu must be >= 0, got {}", self.smoothness.mu)));
        }
        self.robust.validate()?;
        self.occlusion.validate()
    }

    /// Same configuration without the geometric terms.
    pub fn without_geometric_terms(mut self) -> Self {
        self.non_intersection_weight = 0.0;
        self.non_blocking_weight = 0.0;
        self
    }
}

/// Unweighted term values and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub census: f64,
    pub smoothness: f64,
    pub non_intersection: f64,
    pub non_blocking: f64,
    pub total: f64,
}

impl LossTerms {
    pub fn is_finite(&self) -> bool {
        [self.census, self.smoothness, self.non_intersection, self.non_blocking, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub terms: LossTerms,
    pub grad_forward: FlowField,
    pub grad_backward: FlowField,
    pub occ_forward: OcclusionMask,
    pub occ_backward: OcclusionMask,
}

/// Estimates both occlusion masks from the flow pair and evaluates the
/// weighted objective.
pub fn total_loss(
    frame_t: &Image,
    frame_t1: &Image,
    forward: &FlowField,
    backward: &FlowField,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    Error::check_dims("total_loss forward flow", frame_t.dims(), forward.dims())?;
    Error::check_dims("total_loss backward flow", frame_t.dims(), backward.dims())?;
    let occ_forward = occlusion_mask(forward, backward, &cfg.occlusion)?;
    let occ_backward = occlusion_mask(backward, forward, &cfg.occlusion)?;
    total_loss_with_masks(frame_t, frame_t1, forward, backward, occ_forward, occ_backward, cfg)
}

/// Evaluates the weighted objective with fixed occlusion masks.
pub fn total_loss_with_masks(
    frame_t: &Image,
    frame_t1: &Image,
    forward: &FlowField,
    backward: &FlowField,
    occ_forward: OcclusionMask,
    occ_backward: OcclusionMask,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    let census = census_loss(frame_t, frame_t1, forward, backward, &occ_forward, &occ_backward, &cfg.robust)?;
    let (smooth_f, smooth_gf) = smoothness_loss(forward, frame_t, &cfg.smoothness)?;
    let (smooth_b, smooth_gb) = smoothness_loss(backward, frame_t1, &cfg.smoothness)?;
    let inter_f = non_intersection_loss(frame_t, forward, &occ_forward, &cfg.robust)?;
    let inter_b = non_intersection_loss(frame_t1, backward, &occ_backward, &cfg.robust)?;
    let block_f = non_blocking_loss(forward, &occ_forward)?;
    let block_b = non_blocking_loss(backward, &occ_backward)?;

    let smoothness = smooth_f + smooth_b;
    let non_intersection = inter_f.value + inter_b.value;
    let non_blocking = block_f.value + block_b.value;
    let total = cfg.census_weight * census.value
        + cfg.smoothness_weight * smoothness
        + cfg.non_intersection_weight * non_intersection
        + cfg.non_blocking_weight * non_blocking;

    let mut grad_forward = census.grad_forward;
    grad_forward.as_mut_slice().iter_mut().for_each(|g| {
        g[0] *= cfg.census_weight;
        g[1] *= cfg.census_weight;
    });
    let mut grad_backward = census.grad_backward;
    grad_backward.as_mut_slice().iter_mut().for_each(|g| {
        g[0] *= cfg.census_weight;
        g[1] *= cfg.census_weight;
    });
    grad_forward.add_scaled(&smooth_gf, cfg.smoothness_weight);
    grad_forward.add_scaled(&inter_f.grad, cfg.non_intersection_weight);
    grad_forward.add_scaled(&block_f.grad, cfg.non_blocking_weight);
    grad_backward.add_scaled(&smooth_gb, cfg.smoothness_weight);
    grad_backward.add_scaled(&inter_b.grad, cfg.non_intersection_weight);
    grad_backward.add_scaled(&block_b.grad, cfg.non_blocking_weight);

    Ok(LossBreakdown {
        terms: LossTerms { census: census.value, smoothness, non_intersection, non_blocking, total },
        grad_forward,
        grad_backward,
        occ_forward,
        occ_backward,
    })
}
