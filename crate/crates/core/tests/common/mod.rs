#![allow(dead_code)]

use geoflow::{FlowField, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bilinearly interpolated random lattice with `cell`-pixel spacing, values
/// squeezed to `0.5 ± contrast / 2`.
pub fn value_noise(h: usize, w: usize, cell: usize, contrast: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let (gh, gw) = (h / cell + 2, w / cell + 2);
    let lattice: Vec<[f64; 3]> = (0..gh * gw).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let (y, x) = (r as f64 / cell as f64, c as f64 / cell as f64);
            let (y0, x0) = (y.floor() as usize, x.floor() as usize);
            let (fy, fx) = (y - y0 as f64, x - x0 as f64);
            let at = |a: usize, b: usize| lattice[a * gw + b];
            out.push(std::array::from_fn(|k| {
                let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0)[k] + fx * at(y0, x0 + 1)[k])
                    + fy * ((1.0 - fx) * at(y0 + 1, x0)[k] + fx * at(y0 + 1, x0 + 1)[k]);
                0.5 + contrast * (v - 0.5)
            }));
        }
    }
    out
}

pub struct SquareScene {
    pub frame_t: Image,
    pub frame_t1: Image,
    pub truth: FlowField,
    /// Square pixels at least `margin` from its border.
    pub interior: Vec<(usize, usize)>,
}

/// A textured square over a textured static background, moved by
/// `(dx, dy)` pixels between the frames.
pub fn translating_square(
    n: usize,
    side: usize,
    origin: usize,
    shift: (usize, usize),
    margin: usize,
    seed: u64,
) -> SquareScene {
    let (dx, dy) = shift;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = value_noise(n, n, 6, 0.25, &mut rng);
    let square = value_noise(side, side, 6, 0.25, &mut rng);
    let inside = |r: usize, c: usize| (origin..origin + side).contains(&r) && (origin..origin + side).contains(&c);
    let frame_t = Image::from_fn(n, n, |r, c| {
        if inside(r, c) {
            square[(r - origin) * side + c - origin]
        } else {
            background[r * n + c]
        }
    })
    .unwrap();
    let frame_t1 = Image::from_fn(n, n, |r, c| {
        if r >= dy && c >= dx && inside(r - dy, c - dx) {
            square[(r - dy - origin) * side + c - dx - origin]
        } else {
            background[r * n + c]
        }
    })
    .unwrap();
    let truth =
        FlowField::from_fn(n, n, |r, c| if inside(r, c) { [dx as f64, dy as f64] } else { [0.0, 0.0] }).unwrap();
    let lo = origin + margin;
    let hi = origin + side - margin;
    let interior = (lo..hi).flat_map(|r| (lo..hi).map(move |c| (r, c))).collect();
    SquareScene { frame_t, frame_t1, truth, interior }
}

pub fn random_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Image {
    Image::from_fn(h, w, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap()
}
