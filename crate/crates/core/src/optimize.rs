//! Direct coarse-to-fine minimization of the total objective over a
//! forward/backward flow pair with bias-corrected Adam.

use crate::error::{Error, Result};
use crate::field::{FlowField, Image, OcclusionMask};
use crate::objective::{total_loss_with_masks, LossConfig, LossTerms};
use crate::occlusion::occlusion_mask;
use crate::pyramid::{downsample_image, upsample_flow_to};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub learning_rate: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, learning_rate: 0.05, epsilon: 1e-8 }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::InvalidValue(format!("invalid Adam parameters {self:?}")));
        }
        Ok(())
    }
}

/// Moment estimates for a forward/backward flow pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: [Vec<[f64; 2]>; 2],
    second: [Vec<[f64; 2]>; 2],
    step: u64,
}

impl AdamState {
    pub fn new(height: usize, width: usize) -> Self {
        let z = vec![[0.0; 2]; height * width];
        Self { first: [z.clone(), z.clone()], second: [z.clone(), z], step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, field: usize) -> &[[f64; 2]] {
        &self.first[field]
    }

    pub fn second_moment(&self, field: usize) -> &[[f64; 2]] {
        &self.second[field]
    }
}

/// One Adam update of both flows in place.
pub fn adam_step(
    forward: &mut FlowField,
    backward: &mut FlowField,
    grad_forward: &FlowField,
    grad_backward: &FlowField,
    state: &mut AdamState,
    params: &AdamParams,
) -> Result<()> {
    let dims = forward.dims();
    Error::check_dims("adam_step backward", dims, backward.dims())?;
    Error::check_dims("adam_step forward gradient", dims, grad_forward.dims())?;
    Error::check_dims("adam_step backward gradient", dims, grad_backward.dims())?;
    if state.first[0].len() != dims.0 * dims.1 {
        return Err(Error::InvalidValue("Adam state does not match the flow size".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - params.beta1.powi(t);
    let bias2 = 1.0 - params.beta2.powi(t);
    let fields = [(forward, grad_forward), (backward, grad_backward)];
    for (k, (param, grad)) in fields.into_iter().enumerate() {
        let values = param.as_mut_slice();
        for (i, g) in grad.as_slice().iter().enumerate() {
            for ch in 0..2 {
                let m = &mut state.first[k][i][ch];
                let v = &mut state.second[k][i][ch];
                *m = params.beta1 * *m + (1.0 - params.beta1) * g[ch];
                *v = params.beta2 * *v + (1.0 - params.beta2) * g[ch] * g[ch];
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                values[i][ch] -= params.learning_rate * m_hat / (v_hat.sqrt() + params.epsilon);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeConfig {
    pub adam: AdamParams,
    pub iterations_per_level: usize,
    pub levels: usize,
    /// Steps between occlusion-mask re-estimations.
    pub occlusion_refresh: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { adam: AdamParams::default(), iterations_per_level: 500, levels: 3, occlusion_refresh: 25 }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.levels == 0 || self.occlusion_refresh == 0 {
            return Err(Error::InvalidValue("levels and refresh period must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// Pyramid level, 0 = full resolution.
    pub level: usize,
    /// Step counter across all levels.
    pub step: usize,
    pub terms: LossTerms,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub forward: FlowField,
    pub backward: FlowField,
    pub occ_forward: OcclusionMask,
    pub occ_backward: OcclusionMask,
    pub trace: Vec<TraceEntry>,
}

/// Smallest side allowed at the coarsest level (the 4x4 blocking window).
const MIN_LEVEL_SIDE: usize = 4;

fn build_pyramid(frame: &Image, levels: usize) -> Result<Vec<Image>> {
    let mut out = vec![frame.clone()];
    while out.len() < levels {
        let last = out.last().expect("non-empty");
        let (h, w) = last.dims();
        if h.div_ceil(2) < MIN_LEVEL_SIDE || w.div_ceil(2) < MIN_LEVEL_SIDE {
            break;
        }
        out.push(downsample_image(last)?);
    }
    Ok(out)
}

/// Estimates forward and backward flow between two frames from zero
/// initialization at the coarsest pyramid level. Occlusion masks are
/// re-estimated every `occlusion_refresh` steps and held fixed in between.
pub fn optimize_flow_pair(
    frame_t: &Image,
    frame_t1: &Image,
    loss_cfg: &LossConfig,
    opt_cfg: &OptimizeConfig,
) -> Result<OptimizeResult> {
    Error::check_dims("optimize_flow_pair", frame_t.dims(), frame_t1.dims())?;
    let (h, w) = frame_t.dims();
    if h < MIN_LEVEL_SIDE || w < MIN_LEVEL_SIDE {
        return Err(Error::TooSmall { context: "optimize_flow_pair", min_h: 4, min_w: 4, h, w });
    }
    loss_cfg.validate()?;
    opt_cfg.validate()?;

    let pyramid_t = build_pyramid(frame_t, opt_cfg.levels)?;
    let pyramid_t1 = build_pyramid(frame_t1, opt_cfg.levels)?;
    let coarsest = pyramid_t.len() - 1;
    let (ch, cw) = pyramid_t[coarsest].dims();
    let mut forward = FlowField::zeros(ch, cw);
    let mut backward = FlowField::zeros(ch, cw);
    let mut trace = Vec::new();
    let mut global_step = 0;

    for level in (0..=coarsest).rev() {
        let (img_t, img_t1) = (&pyramid_t[level], &pyramid_t1[level]);
        let (lh, lw) = img_t.dims();
        if forward.dims() != (lh, lw) {
            forward = upsample_flow_to(&forward, lh, lw);
            backward = upsample_flow_to(&backward, lh, lw);
        }
        let mut state = AdamState::new(lh, lw);
        let mut masks = None;
        for step in 0..opt_cfg.iterations_per_level {
            if step % opt_cfg.occlusion_refresh == 0 || masks.is_none() {
                masks = Some((
                    occlusion_mask(&forward, &backward, &loss_cfg.occlusion)?,
                    occlusion_mask(&backward, &forward, &loss_cfg.occlusion)?,
                ));
            }
            let (occ_f, occ_b) = masks.clone().expect("set above");
            let eval = total_loss_with_masks(img_t, img_t1, &forward, &backward, occ_f, occ_b, loss_cfg)?;
            if !eval.terms.is_finite() || !eval.grad_forward.is_finite() || !eval.grad_backward.is_finite() {
                return Err(Error::NonFiniteLoss { level, step: global_step });
            }
            trace.push(TraceEntry { level, step: global_step, terms: eval.terms });
            adam_step(&mut forward, &mut backward, &eval.grad_forward, &eval.grad_backward, &mut state, &opt_cfg.adam)?;
            if !forward.is_finite() || !backward.is_finite() {
                return Err(Error::NonFiniteLoss { level, step: global_step });
            }
            global_step += 1;
        }
    }

    let occ_forward = occlusion_mask(&forward, &backward, &loss_cfg.occlusion)?;
    let occ_backward = occlusion_mask(&backward, &forward, &loss_cfg.occlusion)?;
    Ok(OptimizeResult { forward, backward, occ_forward, occ_backward, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut f = FlowField::constant(4, 4, [1.0, -1.0]);
        let mut b = FlowField::constant(4, 4, [0.5, 0.5]);
        let g = FlowField::constant(4, 4, [0.3, -0.2]);
        let z = FlowField::zeros(4, 4);
        let mut state = AdamState::new(4, 4);
        let p = AdamParams::default();
        adam_step(&mut f, &mut b, &g, &g, &mut state, &p).unwrap();
        let (f1, b1) = (f.clone(), b.clone());
        let m_before = state.first_moment(0)[0];
        adam_step(&mut f, &mut b, &z, &z, &mut state, &p).unwrap();
        let m_after = state.first_moment(0)[0];
        assert!(m_after[0].abs() < m_before[0].abs());
        // Zero gradient from a fresh state is a no-op.
        let mut fresh = AdamState::new(4, 4);
        let (mut f2, mut b2) = (f1.clone(), b1.clone());
        adam_step(&mut f2, &mut b2, &z, &z, &mut fresh, &p).unwrap();
        assert_eq!(f2, f1);
        assert_eq!(b2, b1);
    }

    #[test]
    fn constant_gradient_moves_at_learning_rate() {
        let p = AdamParams::default();
        let mut f = FlowField::zeros(4, 4);
        let mut b = FlowField::zeros(4, 4);
        let g = FlowField::constant(4, 4, [2.5, -0.01]);
        let mut state = AdamState::new(4, 4);
        for _ in 0..200 {
            let before = f.get(0, 0);
            adam_step(&mut f, &mut b, &g, &g, &mut state, &p).unwrap();
            let after = f.get(0, 0);
            // With a constant gradient, bias correction gives exactly lr per step
            // up to epsilon.
            assert!(((before[0] - after[0]) - p.learning_rate).abs() < 1e-8);
            assert!(((after[1] - before[1]) - p.learning_rate).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_updates() {
        let g = FlowField::from_fn(5, 5, |r, c| [(r as f64).sin(), (c as f64 * 0.3).cos()]).unwrap();
        let run = || {
            let mut f = FlowField::zeros(5, 5);
            let mut b = FlowField::zeros(5, 5);
            let mut s = AdamState::new(5, 5);
            for _ in 0..10 {
                adam_step(&mut f, &mut b, &g, &g, &mut s, &AdamParams::default()).unwrap();
            }
            (f, b, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn pyramid_stops_at_minimum_side() {
        let img = Image::constant(20, 40, [0.5; 3]).unwrap();
        let p = build_pyramid(&img, 5).unwrap();
        assert_eq!(p.iter().map(|i| i.dims()).collect::<Vec<_>>(), vec![(20, 40), (10, 20), (5, 10)]);
    }

    #[test]
    fn rejects_tiny_images() {
        let img = Image::constant(3, 8, [0.5; 3]).unwrap();
        assert!(optimize_flow_pair(&img, &img, &LossConfig::default(), &OptimizeConfig::default()).is_err());
    }

    #[test]
    fn identical_small_frames_stay_near_zero() {
        let img = Image::from_fn(12, 12, |r, c| {
            let v = ((r * 7 + c * 3) % 11) as f64 / 10.0;
            [v, 1.0 - v, 0.5]
        })
        .unwrap();
        let cfg = OptimizeConfig { iterations_per_level: 30, levels: 2, ..OptimizeConfig::default() };
        let out = optimize_flow_pair(&img, &img, &LossConfig::default(), &cfg).unwrap();
        assert_eq!(out.trace.len(), 60);
        assert!(out.forward.max_abs() < 0.1);
    }
}
