//! Coordinate displacement and differentiable bilinear sampling.

use crate::error::{Error, Result};
use crate::field::{CoordField, FlowField, Image};

/// Target positions `p + flow(p)` for every pixel, as `[x, y]`.
pub fn displace(flow: &FlowField) -> CoordField {
    let (h, w) = flow.dims();
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let [u, v] = flow.get(r, c);
            data.push([c as f64 + u, r as f64 + v]);
        }
    }
    CoordField::new(h, w, data).expect("shape preserved")
}

/// The four interpolation taps of one continuous position after border
/// clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearTaps {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
    /// Fractional offsets from `(x0, y0)`.
    pub fx: f64,
    pub fy: f64,
    /// Whether the position was inside the frame along each axis; a clamped
    /// axis has zero derivative.
    pub inside_x: bool,
    pub inside_y: bool,
}

impl BilinearTaps {
    pub fn new(height: usize, width: usize, x: f64, y: f64) -> Self {
        let (x0, x1, fx, inside_x) = axis_taps(width, x);
        let (y0, y1, fy, inside_y) = axis_taps(height, y);
        Self { x0, x1, y0, y1, fx, fy, inside_x, inside_y }
    }

    /// Weights for `(y0,x0), (y0,x1), (y1,x0), (y1,x1)`.
    pub fn weights(&self) -> [f64; 4] {
        let (fx, fy) = (self.fx, self.fy);
        [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy]
    }
}

fn axis_taps(len: usize, coord: f64) -> (usize, usize, f64, bool) {
    let max = (len - 1) as f64;
    let inside = (0.0..=max).contains(&coord);
    let clamped = coord.clamp(0.0, max);
    if len == 1 {
        return (0, 0, 0.0, inside);
    }
    let i0 = (clamped.floor() as usize).min(len - 2);
    (i0, i0 + 1, clamped - i0 as f64, inside)
}

/// A sampled value with its partial derivatives along `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampled<const N: usize> {
    pub value: [f64; N],
    pub d_dx: [f64; N],
    pub d_dy: [f64; N],
}

pub(crate) fn sample_raster<const N: usize>(
    data: &[[f64; N]],
    height: usize,
    width: usize,
    x: f64,
    y: f64,
) -> Sampled<N> {
    let t = BilinearTaps::new(height, width, x, y);
    let p00 = data[t.y0 * width + t.x0];
    let p01 = data[t.y0 * width + t.x1];
    let p10 = data[t.y1 * width + t.x0];
    let p11 = data[t.y1 * width + t.x1];
    let [w00, w01, w10, w11] = t.weights();
    let mut out = Sampled { value: [0.0; N], d_dx: [0.0; N], d_dy: [0.0; N] };
    for k in 0..N {
        out.value[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
        if t.inside_x {
            out.d_dx[k] = (1.0 - t.fy) * (p01[k] - p00[k]) + t.fy * (p11[k] - p10[k]);
        }
        if t.inside_y {
            out.d_dy[k] = (1.0 - t.fx) * (p10[k] - p00[k]) + t.fx * (p11[k] - p01[k]);
        }
    }
    out
}

/// Samples one position of an image, with derivatives.
pub fn sample_image(source: &Image, x: f64, y: f64) -> Sampled<3> {
    sample_raster(source.pixels(), source.height(), source.width(), x, y)
}

/// Samples one position of a flow field, with derivatives.
pub fn sample_flow(source: &FlowField, x: f64, y: f64) -> Sampled<2> {
    sample_raster(source.as_slice(), source.height(), source.width(), x, y)
}

/// Bilinear resampling of `source` at `coords`, clamping positions to the
/// frame first.
pub fn bilinear_sample(source: &Image, coords: &CoordField) -> Result<Image> {
    Ok(bilinear_sample_with_derivatives(source, coords)?.0)
}

/// Like [`bilinear_sample`], also returning per-pixel derivatives of the
/// output with respect to the `x` and `y` of each coordinate.
pub fn bilinear_sample_with_derivatives(source: &Image, coords: &CoordField) -> Result<(Image, Vec<Sampled<3>>)> {
    Error::check_dims("bilinear_sample", source.dims(), coords.dims())?;
    let (h, w) = source.dims();
    let samples: Vec<Sampled<3>> =
        coords.as_slice().iter().map(|&[x, y]| sample_raster(source.pixels(), h, w, x, y)).collect();
    let data = samples.iter().map(|s| s.value).collect();
    Ok((Image::from_raw(h, w, data), samples))
}

/// Reconstructs frame `t` by sampling `next` (frame `t+1`) at the positions
/// `flow` assigns to each pixel of frame `t`.
pub fn warp(next: &Image, flow: &FlowField) -> Result<Image> {
    Error::check_dims("warp", next.dims(), flow.dims())?;
    bilinear_sample(next, &displace(flow))
}

pub(crate) fn warp_with_derivatives(next: &Image, flow: &FlowField) -> Result<(Image, Vec<Sampled<3>>)> {
    Error::check_dims("warp", next.dims(), flow.dims())?;
    bilinear_sample_with_derivatives(next, &displace(flow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap()
    }

    #[test]
    fn displace_zero_is_grid() {
        let c = displace(&FlowField::zeros(3, 4));
        for r in 0..3 {
            for col in 0..4 {
                assert_eq!(c.get(r, col), [col as f64, r as f64]);
            }
        }
    }

    #[test]
    fn displace_constant_and_single() {
        let c = displace(&FlowField::constant(5, 5, [3.0, 2.0]));
        assert_eq!(c.get(4, 1), [4.0, 6.0]);
        let mut f = FlowField::zeros(5, 5);
        f.set(1, 1, [-0.5, 2.25]);
        assert_eq!(displace(&f).get(1, 1), [0.5, 3.25]);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Image::constant(5, 6, [0.2, 0.4, 0.6]).unwrap();
        let flow = FlowField::from_fn(5, 6, |r, c| [r as f64 * 0.37 - 2.0, c as f64 * -0.71]).unwrap();
        let out = warp(&img, &flow).unwrap();
        for p in out.pixels() {
            for (a, b) in p.iter().zip([0.2, 0.4, 0.6]) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn integer_grid_is_identity() {
        let img = textured(6, 7, 1);
        assert_eq!(warp(&img, &FlowField::zeros(6, 7)).unwrap(), img);
    }

    #[test]
    fn column_ramp_half_step() {
        let w = 8;
        let img = Image::from_gray_fn(5, w, |_, c| c as f64 / w as f64).unwrap();
        let s = sample_image(&img, 3.5, 2.0);
        assert!((s.value[0] - 3.5 / w as f64).abs() < 1e-15);
        assert!((s.d_dx[0] - 1.0 / w as f64).abs() < 1e-15);
        assert_eq!(s.d_dy[0], 0.0);
    }

    #[test]
    fn translation_is_recovered_in_interior() {
        let (h, w) = (10, 12);
        let base = textured(h, w + 3, 2);
        let xt = Image::from_fn(h, w, |r, c| base.get(r, c)).unwrap();
        // Content moves right by 3 pixels.
        let xt1 = Image::from_fn(h, w, |r, c| if c >= 3 { base.get(r, c - 3) } else { [0.0; 3] }).unwrap();
        let out = warp(&xt1, &FlowField::constant(h, w, [3.0, 0.0])).unwrap();
        for r in 0..h {
            for c in 0..w - 3 {
                assert_eq!(out.get(r, c), xt.get(r, c));
            }
        }
    }

    #[test]
    fn out_of_frame_is_clamped() {
        let img = textured(4, 5, 3);
        let out = warp(&img, &FlowField::constant(4, 5, [100.0, -100.0])).unwrap();
        for r in 0..4 {
            for c in 0..5 {
                assert_eq!(out.get(r, c), img.get(0, 4));
            }
        }
        let s = sample_image(&img, 100.0, -100.0);
        assert_eq!(s.d_dx, [0.0; 3]);
        assert_eq!(s.d_dy, [0.0; 3]);
    }

    #[test]
    fn dimension_mismatch() {
        let img = textured(4, 5, 4);
        assert!(matches!(warp(&img, &FlowField::zeros(5, 5)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn weights_are_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let x = rng.gen_range(-3.0..12.0);
            let y = rng.gen_range(-3.0..12.0);
            let t = BilinearTaps::new(9, 10, x, y);
            let wts = t.weights();
            assert!(wts.iter().all(|&v| v >= 0.0));
            assert!((wts.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let img = textured(9, 9, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = 1e-4;
        let mut checked = 0;
        while checked < 500 {
            let x: f64 = rng.gen_range(0.0..8.0);
            let y: f64 = rng.gen_range(0.0..8.0);
            let near = |v: f64| (v - v.round()).abs() < 0.01;
            if near(x) || near(y) {
                continue;
            }
            checked += 1;
            let s = sample_image(&img, x, y);
            for k in 0..3 {
                let fdx = (sample_image(&img, x + step, y).value[k] - sample_image(&img, x - step, y).value[k])
                    / (2.0 * step);
                let fdy = (sample_image(&img, x, y + step).value[k] - sample_image(&img, x, y - step).value[k])
                    / (2.0 * step);
                for (a, n) in [(s.d_dx[k], fdx), (s.d_dy[k], fdy)] {
                    let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-12);
                    assert!(rel < 1e-5 || (a - n).abs() < 1e-11, "a={a} n={n}");
                }
            }
        }
    }
}
