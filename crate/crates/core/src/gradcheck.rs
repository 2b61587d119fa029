//! Central-difference verification of the analytic loss gradients.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blocking::{self, non_blocking_loss};
use crate::error::{Error, Result};
use crate::field::{FlowField, Image, OcclusionMask};
use crate::intersection::{self, non_intersection_loss};
use crate::objective::LossConfig;
use crate::occlusion::occlusion_mask;
use crate::photometric::{census_loss, smoothness_loss};
use crate::warp::BilinearTaps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossSelector {
    Census,
    Smoothness,
    NonIntersection,
    NonBlocking,
}

impl LossSelector {
    pub const ALL: [LossSelector; 4] = [Self::Census, Self::Smoothness, Self::NonIntersection, Self::NonBlocking];

    /// Largest accepted relative error for this loss.
    pub fn tolerance(self) -> f64 {
        match self {
            Self::Census => 1e-3,
            Self::Smoothness => 1e-6,
            Self::NonIntersection | Self::NonBlocking => 1e-4,
        }
    }

    /// Central-difference step in pixels.
    pub fn default_step(self) -> f64 {
        match self {
            Self::Census => 1e-3,
            _ => 1e-4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Census => "census",
            Self::Smoothness => "smooth",
            Self::NonIntersection => "inter",
            Self::NonBlocking => "block",
        }
    }
}

impl fmt::Display for LossSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "census" => Ok(Self::Census),
            "smooth" | "smoothness" => Ok(Self::Smoothness),
            "inter" | "non_intersection" => Ok(Self::NonIntersection),
            "block" | "non_blocking" => Ok(Self::NonBlocking),
            other => Err(Error::InvalidValue(format!("unknown loss {other:?}"))),
        }
    }
}

/// Inputs of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckScene {
    pub frame_t: Image,
    pub frame_t1: Image,
    pub forward: FlowField,
    pub backward: FlowField,
    pub cfg: LossConfig,
}

/// Location of a probed flow component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    /// 0 = forward flow, 1 = backward flow.
    pub field: usize,
    pub row: usize,
    pub col: usize,
    pub channel: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub loss: LossSelector,
    pub probes: usize,
    /// Candidates skipped because the central difference switched a branch.
    pub skipped: usize,
    pub max_relative_error: f64,
    pub worst: Option<Probe>,
    /// Largest analytic gradient magnitude over both fields.
    pub largest_gradient: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.probes > 0 && self.max_relative_error < tolerance
    }
}

/// Loss value with both flow gradients; masks are fixed inputs.
fn evaluate(
    loss: LossSelector,
    scene: &GradCheckScene,
    forward: &FlowField,
    backward: &FlowField,
    masks: &(OcclusionMask, OcclusionMask),
) -> Result<(f64, FlowField, FlowField)> {
    let (xt, xt1, cfg) = (&scene.frame_t, &scene.frame_t1, &scene.cfg);
    Ok(match loss {
        LossSelector::Census => {
            let c = census_loss(xt, xt1, forward, backward, &masks.0, &masks.1, &cfg.robust)?;
            (c.value, c.grad_forward, c.grad_backward)
        }
        LossSelector::Smoothness => {
            let (a, ga) = smoothness_loss(forward, xt, &cfg.smoothness)?;
            let (b, gb) = smoothness_loss(backward, xt1, &cfg.smoothness)?;
            (a + b, ga, gb)
        }
        LossSelector::NonIntersection => {
            let a = non_intersection_loss(xt, forward, &masks.0, &cfg.robust)?;
            let b = non_intersection_loss(xt1, backward, &masks.1, &cfg.robust)?;
            (a.value + b.value, a.grad, b.grad)
        }
        LossSelector::NonBlocking => {
            let a = non_blocking_loss(forward, &masks.0)?;
            let b = non_blocking_loss(backward, &masks.1)?;
            (a.value + b.value, a.grad, b.grad)
        }
    })
}

/// Discrete state of every piecewise branch the loss passes through.
fn branch_state(
    loss: LossSelector,
    forward: &FlowField,
    backward: &FlowField,
    masks: &(OcclusionMask, OcclusionMask),
) -> Vec<i64> {
    let mut out = Vec::new();
    for (flow, mask) in [(forward, &masks.0), (backward, &masks.1)] {
        match loss {
            LossSelector::Census => {
                let (h, w) = flow.dims();
                for r in 0..h {
                    for c in 0..w {
                        let [u, v] = flow.get(r, c);
                        let t = BilinearTaps::new(h, w, c as f64 + u, r as f64 + v);
                        out.extend([t.x0 as i64, t.y0 as i64, t.inside_x as i64, t.inside_y as i64]);
                    }
                }
            }
            LossSelector::Smoothness => out.extend(smoothness_signs(flow)),
            LossSelector::NonIntersection => {
                out.extend(intersection::branch_signature(flow, mask).into_iter().map(i64::from))
            }
            LossSelector::NonBlocking => out.extend(blocking::branch_signature(flow, mask).into_iter().map(i64::from)),
        }
    }
    out
}

fn smoothness_signs(flow: &FlowField) -> Vec<i64> {
    let (h, w) = flow.dims();
    let mut out = Vec::new();
    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    for r in 0..h {
        for c in 0..w {
            let p = flow.get(r, c);
            for (dr, dc) in [(0, 1), (1, 0)] {
                for k in 1..=2 {
                    let (r2, c2) = (r + dr * k, c + dc * k);
                    if r2 >= h || c2 >= w {
                        continue;
                    }
                    let q1 = flow.get(r + dr, c + dc);
                    let q2 = flow.get(r2, c2);
                    for ch in 0..2 {
                        let d = if k == 1 { q1[ch] - p[ch] } else { q2[ch] - 2.0 * q1[ch] + p[ch] };
                        out.push(sign(d));
                    }
                }
            }
        }
    }
    out
}

/// Probed components must carry at least this fraction of the largest
/// gradient magnitude. Below it the central difference's own truncation
/// and rounding error, which scale with the largest terms, dominate.
pub const PROBE_FLOOR: f64 = 1e-2;

/// Compares analytic gradient components against central differences.
///
/// Occlusion masks are estimated once from the unperturbed flows and held
/// fixed. Probes are drawn from components above [`PROBE_FLOOR`] of the
/// largest; a probe whose perturbation switches any branch of the loss is
/// skipped and another drawn.
pub fn finite_diff_check(
    loss: LossSelector,
    scene: &GradCheckScene,
    probe_count: usize,
    step: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidValue(format!("finite-difference step must be > 0, got {step}")));
    }
    let masks = (
        occlusion_mask(&scene.forward, &scene.backward, &scene.cfg.occlusion)?,
        occlusion_mask(&scene.backward, &scene.forward, &scene.cfg.occlusion)?,
    );
    let (_, grad_f, grad_b) = evaluate(loss, scene, &scene.forward, &scene.backward, &masks)?;
    let base_state = branch_state(loss, &scene.forward, &scene.backward, &masks);

    let largest = grad_f.max_abs().max(grad_b.max_abs());
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (field, grad) in [&grad_f, &grad_b].into_iter().enumerate() {
        for idx in 0..grad.component_count() {
            if grad.component(idx).abs() >= PROBE_FLOOR * largest && largest > 0.0 {
                candidates.push((field, idx));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);

    let width = scene.forward.width();
    let mut report = GradCheckReport {
        loss,
        probes: 0,
        skipped: 0,
        max_relative_error: 0.0,
        worst: None,
        largest_gradient: largest,
    };
    for (field, idx) in candidates {
        if report.probes >= probe_count {
            break;
        }
        let mut flows = [scene.forward.clone(), scene.backward.clone()];
        let x0 = flows[field].component(idx);
        flows[field].set_component(idx, x0 + step);
        if branch_state(loss, &flows[0], &flows[1], &masks) != base_state {
            report.skipped += 1;
            continue;
        }
        let plus = evaluate(loss, scene, &flows[0], &flows[1], &masks)?.0;
        flows[field].set_component(idx, x0 - step);
        if branch_state(loss, &flows[0], &flows[1], &masks) != base_state {
            report.skipped += 1;
            continue;
        }
        let minus = evaluate(loss, scene, &flows[0], &flows[1], &masks)?.0;

        let numeric = (plus - minus) / (2.0 * step);
        let analytic = if field == 0 { grad_f.component(idx) } else { grad_b.component(idx) };
        let relative_error = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        report.probes += 1;
        if report.worst.is_none() || relative_error > report.max_relative_error {
            report.max_relative_error = relative_error;
            let pixel = idx / 2;
            report.worst = Some(Probe {
                field,
                row: pixel / width,
                col: pixel % width,
                channel: idx % 2,
                analytic,
                numeric,
                relative_error,
            });
        }
    }
    Ok(report)
}

fn smooth_texture(h: usize, w: usize, rng: &mut ChaCha8Rng, amplitude: f64) -> Image {
    let waves: Vec<[f64; 4]> = (0..6)
        .map(|_| {
            [
                rng.gen_range(0.2..1.1),
                rng.gen_range(0.2..1.1),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    Image::from_fn(h, w, |r, c| {
        std::array::from_fn(|ch| {
            let s: f64 = waves
                .iter()
                .enumerate()
                .map(|(k, wv)| {
                    let phase = wv[2] + ch as f64 * wv[3] * (k as f64 + 1.0) / 6.0;
                    (wv[0] * r as f64 + wv[1] * c as f64 + phase).sin()
                })
                .sum::<f64>()
                / waves.len() as f64;
            (0.5 + amplitude * s).clamp(0.0, 1.0)
        })
    })
    .expect("values clamped into range")
}

fn random_flow(h: usize, w: usize, rng: &mut ChaCha8Rng, range: f64) -> FlowField {
    FlowField::from_fn(h, w, |_, _| [rng.gen_range(-range..range), rng.gen_range(-range..range)]).expect("finite")
}

/// Seeded configuration exercising the given loss away from its degenerate
/// cases: textured frames with sub-pixel flows for the census term,
/// low-contrast guidance for smoothness, dense random crossings for
/// non-intersection, and deep intrusions for non-blocking.
pub fn gradcheck_scene(loss: LossSelector, seed: u64) -> GradCheckScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut cfg = LossConfig::default();
    // Keep every pixel active so the masks do not hide gradient terms.
    cfg.occlusion.beta_offset = 1e6;
    let (h, w) = (14, 15);
    let (frame_t, frame_t1, forward, backward) = match loss {
        LossSelector::Census => {
            let a = smooth_texture(h, w, &mut rng, 0.45);
            let b = smooth_texture(h, w, &mut rng, 0.45);
            let f = random_flow(h, w, &mut rng, 1.5);
            let g = random_flow(h, w, &mut rng, 1.5);
            (a, b, f, g)
        }
        LossSelector::Smoothness => {
            let a = smooth_texture(h, w, &mut rng, 0.01);
            let b = smooth_texture(h, w, &mut rng, 0.01);
            let f = random_flow(h, w, &mut rng, 2.0);
            let g = random_flow(h, w, &mut rng, 2.0);
            (a, b, f, g)
        }
        LossSelector::NonIntersection => {
            let a = smooth_texture(h, w, &mut rng, 0.3);
            let b = smooth_texture(h, w, &mut rng, 0.3);
            let f = crossing_flow(h, w, &mut rng);
            let g = crossing_flow(h, w, &mut rng);
            (a, b, f, g)
        }
        LossSelector::NonBlocking => {
            let a = smooth_texture(h, w, &mut rng, 0.3);
            let b = smooth_texture(h, w, &mut rng, 0.3);
            let f = intrusion_flow(h, w, &mut rng);
            let g = intrusion_flow(h, w, &mut rng);
            (a, b, f, g)
        }
    };
    GradCheckScene { frame_t, frame_t1, forward, backward, cfg }
}

/// Random flow whose crossing pairs are all far from parallel, so that no
/// single pair's `1 / det` dominates the gradient.
fn crossing_flow(h: usize, w: usize, rng: &mut ChaCha8Rng) -> FlowField {
    const MIN_DET: f64 = 0.5;
    let mut flow = random_flow(h, w, rng, 2.5);
    for _ in 0..50 {
        let mut clean = true;
        for r in 1..h - 1 {
            for c in 1..w - 1 {
                let unit = intersection::IntersectUnit { row: r, col: c };
                let p_mid = [c as f64, r as f64];
                for (nr, nc) in unit.neighbors() {
                    let k = crate::geometry::intersection_coeffs(
                        p_mid,
                        flow.get(r, c),
                        [nc as f64, nr as f64],
                        flow.get(nr, nc),
                    );
                    if k.intersects() && k.determinant.abs() < MIN_DET {
                        clean = false;
                        flow.set(nr, nc, [rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)]);
                    }
                }
            }
        }
        if clean {
            break;
        }
    }
    flow
}

/// Jittered identity flow with ring pixels pushed deep into neighboring
/// middle squares. Insertions that would create shallow intrusions are
/// rolled back.
fn intrusion_flow(h: usize, w: usize, rng: &mut ChaCha8Rng) -> FlowField {
    const MIN_DEPTH: f64 = 0.2;
    let mut flow = random_flow(h, w, rng, 0.08);
    let none = OcclusionMask::none(h, w);
    for _ in 0..(h * w) {
        let ar = rng.gen_range(0..=h - 4);
        let ac = rng.gen_range(0..=w - 4);
        let (dr, dc) = blocking::RING_OFFSETS[rng.gen_range(0..12)];
        let (pr, pc) = (ar + dr, ac + dc);
        let center = [ac as f64 + 1.5, ar as f64 + 1.5];
        let target = [center[0] + rng.gen_range(-0.15..0.15), center[1] + rng.gen_range(-0.15..0.15)];
        let previous = flow.get(pr, pc);
        flow.set(pr, pc, [target[0] - pc as f64, target[1] - pr as f64]);
        if min_intrusion_depth(&flow, &none) < MIN_DEPTH {
            flow.set(pr, pc, previous);
        }
    }
    flow
}

fn min_intrusion_depth(flow: &FlowField, occ: &OcclusionMask) -> f64 {
    let (h, w) = flow.dims();
    let mut min = f64::INFINITY;
    for ar in 0..=h - 4 {
        for ac in 0..=w - 4 {
            let unit = blocking::BlockUnit { row: ar, col: ac };
            let quad = unit.middle().map(|(r, c)| {
                let [u, v] = flow.get(r, c);
                [c as f64 + u, r as f64 + v]
            });
            for (r, c) in unit.ring() {
                if occ.is_occluded(r, c) {
                    continue;
                }
                let [u, v] = flow.get(r, c);
                let p = [c as f64 + u, r as f64 + v];
                if crate::geometry::in_quadrilateral(p, quad[0], quad[1], quad[2], quad[3]).in_quad {
                    let d = (0..4)
                        .map(|s| crate::geometry::point_segment_distance(p, quad[s], quad[(s + 1) % 4]))
                        .fold(f64::INFINITY, f64::min);
                    min = min.min(d);
                }
            }
        }
    }
    min
}
