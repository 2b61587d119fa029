//! Factor-two image reduction and flow expansion for coarse-to-fine solving.

use crate::error::{Error, Result};
use crate::field::{FlowField, Image};
use crate::warp::sample_flow;

/// 2x2 box average. Odd sizes round up, replicating the last row/column.
pub fn downsample_image(image: &Image) -> Result<Image> {
    let (h, w) = image.dims();
    if h < 2 || w < 2 {
        return Err(Error::TooSmall { context: "downsample_image", min_h: 2, min_w: 2, h, w });
    }
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut data = Vec::with_capacity(oh * ow);
    for r in 0..oh {
        let (r0, r1) = (2 * r, (2 * r + 1).min(h - 1));
        for c in 0..ow {
            let (c0, c1) = (2 * c, (2 * c + 1).min(w - 1));
            let taps = [image.get(r0, c0), image.get(r0, c1), image.get(r1, c0), image.get(r1, c1)];
            data.push(std::array::from_fn(|k| taps.iter().map(|t| t[k]).sum::<f64>() / 4.0));
        }
    }
    Ok(Image::from_raw(oh, ow, data))
}

/// Bilinear 2x expansion with displacements doubled.
pub fn upsample_flow(flow: &FlowField) -> FlowField {
    let (h, w) = flow.dims();
    upsample_flow_to(flow, 2 * h, 2 * w)
}

/// Bilinear expansion to `height x width` (pixel-center aligned, border
/// clamped) with displacements doubled; sizes are expected to be about
/// twice the source, as produced by [`downsample_image`].
pub fn upsample_flow_to(flow: &FlowField, height: usize, width: usize) -> FlowField {
    let (h, w) = flow.dims();
    let sy = h as f64 / height as f64;
    let sx = w as f64 / width as f64;
    let mut data = Vec::with_capacity(height * width);
    for r in 0..height {
        let y = (r as f64 + 0.5) * sy - 0.5;
        for c in 0..width {
            let x = (c as f64 + 0.5) * sx - 0.5;
            let v = sample_flow(flow, x, y).value;
            data.push([2.0 * v[0], 2.0 * v[1]]);
        }
    }
    FlowField::new(height, width, data).expect("bilinear combination of finite values")
}
