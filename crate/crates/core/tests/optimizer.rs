mod common;

use geoflow::{
    adam_step, crossing_count, occlusion_mask, optimize_flow_pair, total_loss_with_masks, AdamParams, AdamState,
    FlowField, Image, LossConfig, OptimizeConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn textured(n: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::new(n, n, common::value_noise(n, n, 6, 0.25, &mut rng)).unwrap()
}

#[test]
fn identical_frames_stay_still() {
    let img = textured(32, 1);
    let out = optimize_flow_pair(&img, &img, &LossConfig::default(), &OptimizeConfig::default()).unwrap();
    let mean: f64 = out.forward.as_slice().iter().map(|v| v[0].hypot(v[1])).sum::<f64>() / (32.0 * 32.0);
    assert!(mean < 0.1, "mean |V| = {mean}");
    assert_eq!(out.trace.len(), 3 * OptimizeConfig::default().iterations_per_level);
    for e in &out.trace {
        let t = e.terms;
        assert!(t.census >= 0.0 && t.smoothness >= 0.0 && t.non_intersection >= 0.0 && t.non_blocking >= 0.0);
    }
}

#[test]
fn swirl_crossings_untangle() {
    let n = 16;
    let img = textured(n, 2);
    let center = (n as f64 - 1.0) / 2.0;
    // Vortex: rotation angle decays with radius, so neighboring
    // trajectories cross.
    let swirl = FlowField::from_fn(n, n, |r, c| {
        let (x, y) = (c as f64 - center, r as f64 - center);
        let theta = 2.5 * (-(x * x + y * y) / 20.0).exp();
        let (s, co) = theta.sin_cos();
        [co * x - s * y - x, s * x + co * y - y]
    })
    .unwrap();
    let mut cfg = LossConfig { non_intersection_weight: 0.01, non_blocking_weight: 0.01, ..LossConfig::default() };
    // Only out-of-frame targets count as occluded.
    cfg.occlusion.beta_offset = 1e6;
    let mut fwd = swirl.clone();
    let mut bwd = FlowField::from_fn(n, n, |r, c| swirl.get(r, c).map(|v| -v)).unwrap();
    let occ0 = occlusion_mask(&fwd, &bwd, &cfg.occlusion).unwrap();
    let before = crossing_count(&fwd, &occ0).unwrap();
    assert!(before > 0);
    let mut state = AdamState::new(n, n);
    for _ in 0..200 {
        let of = occlusion_mask(&fwd, &bwd, &cfg.occlusion).unwrap();
        let ob = occlusion_mask(&bwd, &fwd, &cfg.occlusion).unwrap();
        let e = total_loss_with_masks(&img, &img, &fwd, &bwd, of, ob, &cfg).unwrap();
        adam_step(&mut fwd, &mut bwd, &e.grad_forward, &e.grad_backward, &mut state, &AdamParams::default()).unwrap();
    }
    let after = crossing_count(&fwd, &occlusion_mask(&fwd, &bwd, &cfg.occlusion).unwrap()).unwrap();
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn runs_are_bit_identical() {
    let scene = common::translating_square(24, 10, 7, (2, 1), 2, 5);
    let opt = OptimizeConfig { iterations_per_level: 40, levels: 2, ..OptimizeConfig::default() };
    let a = optimize_flow_pair(&scene.frame_t, &scene.frame_t1, &LossConfig::default(), &opt).unwrap();
    let b = optimize_flow_pair(&scene.frame_t, &scene.frame_t1, &LossConfig::default(), &opt).unwrap();
    assert_eq!(a.forward, b.forward);
    assert_eq!(a.backward, b.backward);
    assert_eq!(a.occ_forward, b.occ_forward);
    assert_eq!(a.trace, b.trace);
}
