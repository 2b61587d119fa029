//! Dense rasters shared by every loss: color images, flow fields, target
//! coordinates and occlusion masks.
//!
//! All rasters are row-major. A pixel is addressed as `(row, col)`; continuous
//! positions are `[x, y] = [col, row]`, and a flow vector `[u, v]` displaces
//! columns by `u` and rows by `v`.

use crate::error::{Error, Result};

/// Three-channel color raster with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        check_shape("image", height, width, data.len())?;
        for (idx, px) in data.iter().enumerate() {
            for &c in px {
                if !c.is_finite() || !(0.0..=1.0).contains(&c) {
                    return Err(Error::InvalidValue(format!(
                        "image channel {c} at pixel ({}, {}) is outside [0, 1]",
                        idx / width,
                        idx % width
                    )));
                }
            }
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    /// Single-channel intensity replicated into all three channels.
    pub fn from_gray_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_fn(height, width, |r, c| {
            let g = f(r, c);
            [g, g, g]
        })
    }

    pub fn constant(height: usize, width: usize, color: [f64; 3]) -> Result<Self> {
        Self::new(height, width, vec![color; height * width])
    }

    /// Convex combinations of valid pixels stay in range, so samplers may
    /// skip validation.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<[f64; 3]>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [f64; 3] {
        self.data[row * self.width + col]
    }

    /// Mean of the three channels.
    #[inline]
    pub fn gray(&self, row: usize, col: usize) -> f64 {
        let p = self.get(row, col);
        (p[0] + p[1] + p[2]) / 3.0
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }
}

/// Per-pixel displacement `[u, v]` in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    data: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, data: Vec<[f64; 2]>) -> Result<Self> {
        check_shape("flow", height, width, data.len())?;
        if let Some(idx) = data.iter().position(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::InvalidValue(format!(
                "flow component at pixel ({}, {}) is not finite",
                idx / width,
                idx % width
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::constant(height, width, [0.0, 0.0])
    }

    pub fn constant(height: usize, width: usize, uv: [f64; 2]) -> Self {
        assert!(uv[0].is_finite() && uv[1].is_finite());
        Self { height, width, data: vec![uv; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 2]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [f64; 2] {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, uv: [f64; 2]) {
        self.data[row * self.width + col] = uv;
    }

    pub fn as_slice(&self) -> &[[f64; 2]] {
        &self.data
    }

    /// Mutable access for optimizers. Callers must keep every component finite.
    pub fn as_mut_slice(&mut self) -> &mut [[f64; 2]] {
        &mut self.data
    }

    /// Number of scalar components (`2 * height * width`).
    pub fn component_count(&self) -> usize {
        self.data.len() * 2
    }

    /// Component by flat index `2 * (row * width + col) + channel`.
    #[inline]
    pub fn component(&self, index: usize) -> f64 {
        self.data[index / 2][index % 2]
    }

    #[inline]
    pub fn set_component(&mut self, index: usize, value: f64) {
        self.data[index / 2][index % 2] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v[0].is_finite() && v[1].is_finite())
    }

    /// Adds `scale * other` component-wise.
    pub fn add_scaled(&mut self, other: &FlowField, scale: f64) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            a[0] += scale * b[0];
            a[1] += scale * b[1];
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()))
    }
}

/// Continuous target positions `[x, y]`; may lie outside the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordField {
    height: usize,
    width: usize,
    data: Vec<[f64; 2]>,
}

impl CoordField {
    pub fn new(height: usize, width: usize, data: Vec<[f64; 2]>) -> Result<Self> {
        check_shape("coordinates", height, width, data.len())?;
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [f64; 2] {
        self.data[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[[f64; 2]] {
        &self.data
    }
}

/// Binary occlusion raster, `true` = occluded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OcclusionMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl OcclusionMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        check_shape("occlusion mask", height, width, data.len())?;
        Ok(Self { height, width, data })
    }

    /// Builds a mask from 0/1 values, rejecting anything else.
    pub fn from_binary(height: usize, width: usize, values: &[u8]) -> Result<Self> {
        let data = values
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidValue(format!("occlusion value {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(height, width, data)
    }

    pub fn none(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![false; height * width] }
    }

    pub fn all(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![true; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn is_occluded(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, occluded: bool) {
        self.data[row * self.width + col] = occluded;
    }

    pub fn occluded_count(&self) -> usize {
        self.data.iter().filter(|&&o| o).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn to_binary(&self) -> Vec<u8> {
        self.data.iter().map(|&o| o as u8).collect()
    }
}

fn check_shape(what: &str, height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidValue(format!("{what} must be non-empty, got {height}x{width}")));
    }
    if len != height * width {
        return Err(Error::InvalidValue(format!(
            "{what} of {height}x{width} needs {} pixels, got {len}",
            height * width
        )));
    }
    Ok(())
}
