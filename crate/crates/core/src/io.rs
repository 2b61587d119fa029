//! Middlebury `.flo` files and 8-bit raster images.

use std::fs;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader, RgbImage};

use crate::error::{Error, FloError, Result};
use crate::field::{FlowField, Image};

const FLO_MAGIC: [u8; 4] = *b"PIEH";
const FLO_HEADER_LEN: usize = 12;

/// Encodes a flow field as Middlebury `.flo` bytes: magic, little-endian
/// `i32` width and height, then row-major interleaved little-endian `f32`
/// `(u, v)`.
pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let (h, w) = flow.dims();
    let mut out = Vec::with_capacity(FLO_HEADER_LEN + h * w * 8);
    out.extend_from_slice(&FLO_MAGIC);
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for [u, v] in flow.as_slice() {
        out.extend_from_slice(&(*u as f32).to_le_bytes());
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> std::result::Result<FlowField, FloError> {
    if bytes.len() < 4 {
        return Err(FloError::TruncatedHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != FLO_MAGIC {
        return Err(FloError::BadMagic(magic));
    }
    if bytes.len() < FLO_HEADER_LEN {
        return Err(FloError::TruncatedHeader(bytes.len()));
    }
    let width = i32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let height = i32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if width <= 0 || height <= 0 {
        return Err(FloError::InvalidDimensions { width, height });
    }
    let (w, h) = (width as usize, height as usize);
    let expected =
        w.checked_mul(h).and_then(|n| n.checked_mul(8)).ok_or(FloError::InvalidDimensions { width, height })?;
    let payload = &bytes[FLO_HEADER_LEN..];
    if payload.len() < expected {
        return Err(FloError::Truncated { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(FloError::TrailingData(payload.len() - expected));
    }
    let mut data = Vec::with_capacity(w * h);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let u = f32::from_le_bytes(chunk[0..4].try_into().expect("4 bytes")) as f64;
        let v = f32::from_le_bytes(chunk[4..8].try_into().expect("4 bytes")) as f64;
        if !u.is_finite() || !v.is_finite() {
            return Err(FloError::NonFinite { row: i / w, col: i % w });
        }
        data.push([u, v]);
    }
    Ok(FlowField::new(h, w, data).expect("validated above"))
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    Ok(decode_flo(&fs::read(path)?)?)
}

pub fn write_flo(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    fs::write(path, encode_flo(flow))?;
    Ok(())
}

fn image_error(path: &Path, reason: impl ToString) -> Error {
    Error::Image { path: path.to_path_buf(), reason: reason.to_string() }
}

fn decode_dynamic(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)?.with_guessed_format().map_err(|e| image_error(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => return Err(image_error(path, format!("unsupported format {other:?}"))),
        None => return Err(image_error(path, "unrecognized image format")),
    }
    reader.decode().map_err(|e| image_error(path, e))
}

/// Reads an 8-bit PNG or binary PPM/PGM as a `[0, 1]` color image.
/// Grayscale is replicated into three channels and alpha is dropped.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = decode_dynamic(path)?;
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => {}
        other => {
            return Err(image_error(
                path,
                format!("unsupported bit depth/color type {other:?}, expected 8-bit channels"),
            ))
        }
    }
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.pixels().map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]).collect();
    Image::new(h, w, data)
}

/// Reads an 8-bit single-channel (or color, via channel mean) image and
/// thresholds it: nonzero pixels are `true`.
pub fn read_binary_mask(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<bool>)> {
    let path = path.as_ref();
    let img = decode_dynamic(path)?;
    if !matches!(img.color(), ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8) {
        return Err(image_error(path, format!("unsupported mask color type {:?}", img.color())));
    }
    let gray = img.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    Ok((h, w, gray.pixels().map(|p| p[0] != 0).collect()))
}

/// Writes a `[0, 1]` image as 8-bit RGB; the format follows the extension.
pub fn write_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = image.dims();
    let mut out = RgbImage::new(w as u32, h as u32);
    for (dst, src) in out.pixels_mut().zip(image.pixels()) {
        dst.0 = src.map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    out.save(path).map_err(|e| image_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let f = FlowField::constant(2, 3, [1.0, -2.0]);
        let bytes = encode_flo(&f);
        assert_eq!(&bytes[0..4], b"PIEH");
        assert_eq!(i32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(i32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(f32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1.0);
        assert_eq!(f32::from_le_bytes(bytes[16..20].try_into().unwrap()), -2.0);
        assert_eq!(bytes.len(), 12 + 6 * 8);
    }

    #[test]
    fn malformed_files() {
        let mut bad = encode_flo(&FlowField::zeros(2, 2));
        bad[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_flo(&bad), Err(FloError::BadMagic(m)) if &m == b"XXXX"));

        let mut short = Vec::from(*b"PIEH");
        short.extend_from_slice(&10i32.to_le_bytes());
        short.extend_from_slice(&10i32.to_le_bytes());
        short.extend(std::iter::repeat_n(0u8, 50 * 4));
        assert!(matches!(decode_flo(&short), Err(FloError::Truncated { expected: 800, found: 200 })));

        let mut neg = Vec::from(*b"PIEH");
        neg.extend_from_slice(&0i32.to_le_bytes());
        neg.extend_from_slice(&5i32.to_le_bytes());
        assert!(matches!(decode_flo(&neg), Err(FloError::InvalidDimensions { .. })));

        assert!(matches!(decode_flo(b"PIE"), Err(FloError::TruncatedHeader(3))));
    }

    #[test]
    fn ppm_and_png() {
        let dir = tempfile::tempdir().unwrap();
        let ppm = dir.path().join("white.ppm");
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(255u8, 12));
        fs::write(&ppm, bytes).unwrap();
        let img = read_image(&ppm).unwrap();
        assert_eq!(img.dims(), (2, 2));
        assert!(img.pixels().iter().all(|p| *p == [1.0; 3]));

        let gray = dir.path().join("gray.png");
        image::GrayImage::from_fn(3, 2, |x, y| image::Luma([(x * 40 + y * 7) as u8])).save(&gray).unwrap();
        let img = read_image(&gray).unwrap();
        assert_eq!(img.dims(), (2, 3));
        for p in img.pixels() {
            assert_eq!(p[0], p[1]);
            assert_eq!(p[1], p[2]);
        }
        assert_eq!(img.get(1, 2), [87.0 / 255.0; 3]);

        let deep = dir.path().join("deep.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_pixel(2, 2, image::Luma([1000u16])).save(&deep).unwrap();
        let err = read_image(&deep).unwrap_err();
        assert!(err.to_string().contains("bit depth"), "{err}");

        let junk = dir.path().join("junk.png");
        fs::write(&junk, b"not an image").unwrap();
        assert!(read_image(&junk).is_err());
    }

    #[test]
    fn image_write_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.png");
        let img = Image::from_fn(3, 4, |r, c| [r as f64 / 2.0, c as f64 / 3.0, 1.0]).unwrap();
        write_image(&path, &img).unwrap();
        let back = read_image(&path).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }
}
