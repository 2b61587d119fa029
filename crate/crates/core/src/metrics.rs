//! Endpoint error and outlier rate against ground truth.

use crate::error::{Error, Result};
use crate::field::{FlowField, OcclusionMask};

/// Outlier thresholds: absolute pixels and fraction of ground-truth magnitude.
pub const OUTLIER_ABS_PX: f64 = 3.0;
pub const OUTLIER_REL: f64 = 0.05;

/// Pixels carrying ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl ValidityMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidValue(format!(
                "validity mask of {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn all(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![true; height * width] }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, valid: bool) {
        self.data[row * self.width + col] = valid;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEvalResult {
    pub epe_mean: f64,
    /// Mean over valid, non-occluded pixels; `None` without a mask or when
    /// no such pixel exists.
    pub epe_mean_noc: Option<f64>,
    /// Percent of valid pixels that are outliers.
    pub error_rate: f64,
    pub valid_count: usize,
}

/// Endpoint error statistics of `flow` against `gt` over `valid` pixels.
/// A pixel is an outlier when its error exceeds both 3 px and 5% of the
/// ground-truth magnitude.
pub fn epe(
    flow: &FlowField,
    gt: &FlowField,
    valid: &ValidityMask,
    occluded: Option<&OcclusionMask>,
) -> Result<FlowEvalResult> {
    Error::check_dims("epe ground truth", flow.dims(), gt.dims())?;
    Error::check_dims("epe validity mask", flow.dims(), valid.dims())?;
    if let Some(m) = occluded {
        Error::check_dims("epe occlusion mask", flow.dims(), m.dims())?;
    }
    let (h, w) = flow.dims();
    let (mut sum, mut count, mut outliers) = (0.0, 0usize, 0usize);
    let (mut noc_sum, mut noc_count) = (0.0, 0usize);
    for r in 0..h {
        for c in 0..w {
            if !valid.is_valid(r, c) {
                continue;
            }
            let f = flow.get(r, c);
            let g = gt.get(r, c);
            let err = (f[0] - g[0]).hypot(f[1] - g[1]);
            sum += err;
            count += 1;
            if err > OUTLIER_ABS_PX && err > OUTLIER_REL * g[0].hypot(g[1]) {
                outliers += 1;
            }
            if let Some(m) = occluded {
                if !m.is_occluded(r, c) {
                    noc_sum += err;
                    noc_count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(FlowEvalResult {
        epe_mean: sum / count as f64,
        epe_mean_noc: (noc_count > 0).then(|| noc_sum / noc_count as f64),
        error_rate: 100.0 * outliers as f64 / count as f64,
        valid_count: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_valid(h: usize, w: usize) -> ValidityMask {
        let mut m = ValidityMask::new(h, w, vec![false; h * w]).unwrap();
        m.set(1, 1, true);
        m
    }

    #[test]
    fn perfect_flow() {
        let f = FlowField::from_fn(4, 4, |r, c| [r as f64, -(c as f64)]).unwrap();
        let out = epe(&f, &f, &ValidityMask::all(4, 4), None).unwrap();
        assert_eq!(out.epe_mean, 0.0);
        assert_eq!(out.error_rate, 0.0);
        assert_eq!(out.valid_count, 16);
        assert_eq!(out.epe_mean_noc, None);
    }

    #[test]
    fn three_four_five() {
        let f = FlowField::constant(3, 3, [3.0, 4.0]);
        let g = FlowField::zeros(3, 3);
        let out = epe(&f, &g, &single_valid(3, 3), None).unwrap();
        assert_eq!(out.epe_mean, 5.0);
        assert_eq!(out.valid_count, 1);
    }

    #[test]
    fn outlier_rate_uses_gt_magnitude() {
        let f = FlowField::zeros(3, 3);
        let g = FlowField::constant(3, 3, [100.0, 0.0]);
        let valid = single_valid(3, 3);
        assert_eq!(epe(&f, &g, &valid, None).unwrap().error_rate, 100.0);
        // Error 4 > 3 px but below 5% of |gt| = 100.
        let f = FlowField::constant(3, 3, [96.0, 0.0]);
        assert_eq!(epe(&f, &g, &valid, None).unwrap().error_rate, 0.0);
        // Swapping roles changes the reference magnitude.
        let big = FlowField::constant(3, 3, [100.0, 0.0]);
        let small = FlowField::constant(3, 3, [96.0, 0.0]);
        let a = epe(&big, &small, &valid, None).unwrap();
        let b = epe(&small, &big, &valid, None).unwrap();
        assert_eq!(a.epe_mean, b.epe_mean);
        assert_eq!(a.error_rate, 0.0);
        assert_eq!(b.error_rate, 0.0);
        let tiny = FlowField::constant(3, 3, [4.0, 0.0]);
        let zero = FlowField::zeros(3, 3);
        assert_eq!(epe(&tiny, &zero, &valid, None).unwrap().error_rate, 100.0);
        let flipped = FlowField::constant(3, 3, [-70.0, 0.0]);
        assert_eq!(epe(&flipped, &big, &valid, None).unwrap().error_rate, 100.0);
    }

    #[test]
    fn non_occluded_subset() {
        let f = FlowField::zeros(2, 2);
        let g = FlowField::from_fn(2, 2, |r, _| if r == 0 { [1.0, 0.0] } else { [3.0, 0.0] }).unwrap();
        let occ = OcclusionMask::new(2, 2, vec![false, false, true, true]).unwrap();
        let out = epe(&f, &g, &ValidityMask::all(2, 2), Some(&occ)).unwrap();
        assert_eq!(out.epe_mean, 2.0);
        assert_eq!(out.epe_mean_noc, Some(1.0));
    }

    #[test]
    fn no_valid_pixels() {
        let f = FlowField::zeros(2, 2);
        let none = ValidityMask::new(2, 2, vec![false; 4]).unwrap();
        assert!(matches!(epe(&f, &f, &none, None), Err(Error::NoValidPixels)));
    }
}
