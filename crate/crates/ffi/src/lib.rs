//! C ABI over `geoflow`.
//!
//! Every fallible call returns a [`GfStatus`]; on failure a message is
//! available from [`gf_last_error_message`] on the same thread. Objects are
//! opaque handles created by `gf_*_new`/`gf_*_read` and released with the
//! matching `gf_*_free`. Panics never cross the boundary: they are reported
//! as `GF_STATUS_PANIC`.
//!
//! Raster layouts are row-major: images carry `height * width * 3` doubles
//! in `[0, 1]` (RGB interleaved), flows `height * width * 2` doubles
//! (`u`, `v` interleaved), masks `height * width` bytes.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use geoflow::photometric::SmoothnessOrder;
use geoflow::{Error, FlowField, Image, LossConfig, OcclusionMask, OcclusionParams, OptimizeConfig, ValidityMask};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Parse = 5,
    NonFinite = 6,
    Panic = 7,
}

/// Opaque color image.
pub struct GfImage(Image);

/// Opaque flow field.
pub struct GfFlow(FlowField);

/// Opaque occlusion mask.
pub struct GfMask(OcclusionMask);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfLossTerms {
    pub census: f64,
    pub smoothness: f64,
    pub non_intersection: f64,
    pub non_blocking: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfLossConfig {
    pub census_weight: f64,
    pub smoothness_weight: f64,
    pub non_intersection_weight: f64,
    pub non_blocking_weight: f64,
    /// 1 or 2.
    pub smoothness_order: u32,
    pub smoothness_mu: f64,
    pub robust_epsilon: f64,
    pub robust_q: f64,
    pub occlusion_alpha: f64,
    pub occlusion_beta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfOptimizeConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub iterations_per_level: usize,
    pub levels: usize,
    pub occlusion_refresh: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfEvalResult {
    pub epe_mean: f64,
    /// NaN when no non-occlusion mask was given or it selects no pixel.
    pub epe_mean_noc: f64,
    pub error_rate: f64,
    pub valid_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(GfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } | Error::TooSmall { .. } => GfStatus::DimensionMismatch,
            Error::InvalidValue(_) | Error::NoValidPixels => GfStatus::InvalidArgument,
            Error::NonFiniteLoss { .. } => GfStatus::NonFinite,
            Error::Flo(_) | Error::Image { .. } | Error::Config { .. } => GfStatus::Parse,
            Error::Io(_) => GfStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            GfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            GfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GfStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slot<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<std::path::PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(std::path::PathBuf::from)
        .map_err(|_| Failure(GfStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn raster<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn pixel_count(height: usize, width: usize) -> Result<usize, Failure> {
    height
        .checked_mul(width)
        .filter(|n| *n > 0 && n.checked_mul(3).is_some())
        .ok_or_else(|| Failure(GfStatus::InvalidArgument, format!("invalid size {height}x{width}")))
}

fn mask_or_none(mask: Option<&GfMask>, dims: (usize, usize)) -> OcclusionMask {
    mask.map_or_else(|| OcclusionMask::none(dims.0, dims.1), |m| m.0.clone())
}

impl From<LossConfig> for GfLossConfig {
    fn from(c: LossConfig) -> Self {
        Self {
            census_weight: c.census_weight,
            smoothness_weight: c.smoothness_weight,
            non_intersection_weight: c.non_intersection_weight,
            non_blocking_weight: c.non_blocking_weight,
            smoothness_order: c.smoothness.order.k() as u32,
            smoothness_mu: c.smoothness.mu,
            robust_epsilon: c.robust.epsilon,
            robust_q: c.robust.q,
            occlusion_alpha: c.occlusion.alpha_consistency,
            occlusion_beta: c.occlusion.beta_offset,
        }
    }
}

fn loss_config(c: Option<&GfLossConfig>) -> Result<LossConfig, Failure> {
    let Some(c) = c else {
        return Ok(LossConfig::default());
    };
    let mut cfg = LossConfig {
        census_weight: c.census_weight,
        smoothness_weight: c.smoothness_weight,
        non_intersection_weight: c.non_intersection_weight,
        non_blocking_weight: c.non_blocking_weight,
        ..LossConfig::default()
    };
    cfg.smoothness.order = SmoothnessOrder::from_k(c.smoothness_order)?;
    cfg.smoothness.mu = c.smoothness_mu;
    cfg.robust.epsilon = c.robust_epsilon;
    cfg.robust.q = c.robust_q;
    cfg.occlusion.alpha_consistency = c.occlusion_alpha;
    cfg.occlusion.beta_offset = c.occlusion_beta;
    cfg.validate()?;
    Ok(cfg)
}

impl From<OptimizeConfig> for GfOptimizeConfig {
    fn from(c: OptimizeConfig) -> Self {
        Self {
            learning_rate: c.adam.learning_rate,
            beta1: c.adam.beta1,
            beta2: c.adam.beta2,
            adam_epsilon: c.adam.epsilon,
            iterations_per_level: c.iterations_per_level,
            levels: c.levels,
            occlusion_refresh: c.occlusion_refresh,
        }
    }
}

fn optimize_config(c: Option<&GfOptimizeConfig>) -> Result<OptimizeConfig, Failure> {
    let Some(c) = c else {
        return Ok(OptimizeConfig::default());
    };
    let mut cfg = OptimizeConfig {
        iterations_per_level: c.iterations_per_level,
        levels: c.levels,
        occlusion_refresh: c.occlusion_refresh,
        ..OptimizeConfig::default()
    };
    cfg.adam.learning_rate = c.learning_rate;
    cfg.adam.beta1 = c.beta1;
    cfg.adam.beta2 = c.beta2;
    cfg.adam.epsilon = c.adam_epsilon;
    cfg.validate()?;
    Ok(cfg)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `gf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn gf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn gf_loss_config_default() -> GfLossConfig {
    LossConfig::default().into()
}

#[no_mangle]
pub extern "C" fn gf_optimize_config_default() -> GfOptimizeConfig {
    OptimizeConfig::default().into()
}

/// Creates an image from `height * width * 3` RGB doubles in `[0, 1]`.
///
/// # Safety
/// `rgb` must point to `height * width * 3` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gf_image_new(
    height: usize,
    width: usize,
    rgb: *const f64,
    out: *mut *mut GfImage,
) -> GfStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        let n = pixel_count(height, width)?;
        let data = raster(rgb, n * 3, "rgb")?;
        let pixels = data.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect();
        *out = Box::into_raw(Box::new(GfImage(Image::new(height, width, pixels)?)));
        Ok(())
    })
}

/// Reads an 8-bit PNG or PPM/PGM file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gf_image_read(path: *const c_char, out: *mut *mut GfImage) -> GfStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        let img = geoflow::read_image(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(GfImage(img)));
        Ok(())
    })
}

/// # Safety
/// `image` must be NULL or a handle from this library that is not used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn gf_image_free(image: *mut GfImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// # Safety
/// `image` must be a live handle; `height` and `width` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_image_dims(image: *const GfImage, height: *mut usize, width: *mut usize) -> GfStatus {
    guard(|| {
        let (h, w) = borrow(image, "image")?.0.dims();
        *out_slot(height, "height")? = h;
        *out_slot(width, "width")? = w;
        Ok(())
    })
}

/// Creates a flow field from `height * width * 2` doubles.
///
/// # Safety
/// `uv` must point to `height * width * 2` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gf_flow_new(height: usize, width: usize, uv: *const f64, out: *mut *mut GfFlow) -> GfStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        let n = pixel_count(height, width)?;
        let data = raster(uv, n * 2, "uv")?;
        let vectors = data.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
        *out = Box::into_raw(Box::new(GfFlow(FlowField::new(height, width, vectors)?)));
        Ok(())
    })
}

/// # Safety
/// `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gf_flow_zeros(height: usize, width: usize, out: *mut *mut GfFlow) -> GfStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        pixel_count(height, width)?;
        *out = Box::into_raw(Box::new(GfFlow(FlowField::zeros(height, width))));
        Ok(())
    })
}

/// Reads a Middlebury `.flo` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gf_flow_read(path: *const c_char, out: *mut *mut GfFlow) -> GfStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        let flow = geoflow::read_flo(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(GfFlow(flow)));
        Ok(())
    })
}

/// Writes a Middlebury `.flo` file.
///
/// # Safety
/// `flow` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gf_flow_write(flow: *const GfFlow, path: *const c_char) -> GfStatus {
    guard(|| {
        let flow = borrow(flow, "flow")?;
        geoflow::write_flo(path_arg(path)?, &flow.0)?;
        Ok(())
    })
}

/// # Safety
/// `flow` must be NULL or a handle from this library that is not used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn gf_flow_free(flow: *mut GfFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// # Safety
/// `flow` must be a live handle; `height` and `width` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_flow_dims(flow: *const GfFlow, height: *mut usize, width: *mut usize) -> GfStatus {
    guard(|| {
        let (h, w) = borrow(flow, "flow")?.0.dims();
        *out_slot(height, "height")? = h;
        *out_slot(width, "width")? = w;
        Ok(())
    })
}

/// Copies the flow into `uv`, which holds `len` doubles; `len` must equal
/// `height * width * 2`.
///
/// # Safety
/// `flow` must be a live handle and `uv` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gf_flow_copy(flow: *const GfFlow, uv: *mut f64, len: usize) -> GfStatus {
    guard(|| {
        let flow = &borrow(flow, "flow")?.0;
        let need = flow.component_count();
        if len != need {
            return Err(Failure(GfStatus::DimensionMismatch, format!("buffer holds {len} doubles, flow has {need}")));
        }
        if uv.is_null() {
            return Err(null("uv"));
        }
        let dst = std::slice::from_raw_parts_mut(uv, len);
        for (d, s) in dst.chunks_exact_mut(2).zip(flow.as_slice()) {
            d.copy_from_slice(s);
        }
        Ok(())
    })
}

/// Forward-backward consistency occlusion mask of `forward` given
/// `backward`, using `alpha` (relative) and `beta` (px²) tolerances.
///
/// # Safety
/// Flow handles must be live; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gf_occlusion_mask(
    forward: *const GfFlow,
    backward: *const GfFlow,
    alpha: f64,
    beta: f64,
    out: *mut *mut GfMask,
) -> GfStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        let params = OcclusionParams { alpha_consistency: alpha, beta_offset: beta };
        let mask = geoflow::occlusion_mask(&borrow(forward, "forward")?.0, &borrow(backward, "backward")?.0, &params)?;
        *out = Box::into_raw(Box::new(GfMask(mask)));
        Ok(())
    })
}

/// Mask from `height * width` bytes; nonzero marks an occluded pixel.
///
/// # Safety
/// `occluded` must point to `height * width` readable bytes and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn gf_mask_new(
    height: usize,
    width: usize,
    occluded: *const u8,
    out: *mut *mut GfMask,
) -> GfStatus {
    guard(|| {
        let out = out_slot(out, "out")?;
        let n = pixel_count(height, width)?;
        let bits = raster(occluded, n, "occluded")?;
        *out =
            Box::into_raw(Box::new(GfMask(OcclusionMask::new(height, width, bits.iter().map(|b| *b != 0).collect())?)));
        Ok(())
    })
}

/// # Safety
/// `mask` must be NULL or a handle from this library that is not used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn gf_mask_free(mask: *mut GfMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// # Safety
/// `mask` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_mask_occluded_count(mask: *const GfMask, count: *mut usize) -> GfStatus {
    guard(|| {
        *out_slot(count, "count")? = borrow(mask, "mask")?.0.occluded_count();
        Ok(())
    })
}

/// Non-intersection loss of `flow` guided by `image`. `mask` may be NULL
/// (nothing occluded) and `grad` may be NULL when the gradient is not
/// wanted; otherwise it receives a new flow handle.
///
/// # Safety
/// Handles must be live; `value` writable; `grad` NULL or a writable slot.
#[no_mangle]
pub unsafe extern "C" fn gf_non_intersection_loss(
    image: *const GfImage,
    flow: *const GfFlow,
    mask: *const GfMask,
    value: *mut f64,
    grad: *mut *mut GfFlow,
) -> GfStatus {
    guard(|| {
        let flow = &borrow(flow, "flow")?.0;
        let occ = mask_or_none(mask.as_ref(), flow.dims());
        let value = out_slot(value, "value")?;
        let out = geoflow::non_intersection_loss(&borrow(image, "image")?.0, flow, &occ, &Default::default())?;
        *value = out.value;
        if let Some(slot) = grad.as_mut() {
            *slot = Box::into_raw(Box::new(GfFlow(out.grad)));
        }
        Ok(())
    })
}

/// Non-blocking loss of `flow`; `mask` and `grad` as for
/// [`gf_non_intersection_loss`].
///
/// # Safety
/// Handles must be live; `value` writable; `grad` NULL or a writable slot.
#[no_mangle]
pub unsafe extern "C" fn gf_non_blocking_loss(
    flow: *const GfFlow,
    mask: *const GfMask,
    value: *mut f64,
    grad: *mut *mut GfFlow,
) -> GfStatus {
    guard(|| {
        let flow = &borrow(flow, "flow")?.0;
        let occ = mask_or_none(mask.as_ref(), flow.dims());
        let value = out_slot(value, "value")?;
        let out = geoflow::non_blocking_loss(flow, &occ)?;
        *value = out.value;
        if let Some(slot) = grad.as_mut() {
            *slot = Box::into_raw(Box::new(GfFlow(out.grad)));
        }
        Ok(())
    })
}

/// Number of crossing neighbor pairs among non-occluded pixels; `mask` may
/// be NULL.
///
/// # Safety
/// Handles must be live and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_crossing_count(flow: *const GfFlow, mask: *const GfMask, count: *mut usize) -> GfStatus {
    guard(|| {
        let flow = &borrow(flow, "flow")?.0;
        let occ = mask_or_none(mask.as_ref(), flow.dims());
        *out_slot(count, "count")? = geoflow::crossing_count(flow, &occ)?;
        Ok(())
    })
}

/// Weighted sum of all loss terms for a forward/backward flow pair, with
/// occlusion estimated from the flows. `config` may be NULL for defaults.
///
/// # Safety
/// Handles must be live; `config` NULL or readable; `terms` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_total_loss(
    frame_t: *const GfImage,
    frame_t1: *const GfImage,
    forward: *const GfFlow,
    backward: *const GfFlow,
    config: *const GfLossConfig,
    terms: *mut GfLossTerms,
) -> GfStatus {
    guard(|| {
        let cfg = loss_config(config.as_ref())?;
        let terms = out_slot(terms, "terms")?;
        let out = geoflow::total_loss(
            &borrow(frame_t, "frame_t")?.0,
            &borrow(frame_t1, "frame_t1")?.0,
            &borrow(forward, "forward")?.0,
            &borrow(backward, "backward")?.0,
            &cfg,
        )?;
        let t = out.terms;
        *terms = GfLossTerms {
            census: t.census,
            smoothness: t.smoothness,
            non_intersection: t.non_intersection,
            non_blocking: t.non_blocking,
            total: t.total,
        };
        Ok(())
    })
}

/// Coarse-to-fine flow estimation between two frames. Either config may be
/// NULL for defaults. On success both output slots receive new handles.
///
/// # Safety
/// Handles must be live; configs NULL or readable; output slots writable.
#[no_mangle]
pub unsafe extern "C" fn gf_optimize(
    frame_t: *const GfImage,
    frame_t1: *const GfImage,
    loss_config: *const GfLossConfig,
    optimize_config: *const GfOptimizeConfig,
    forward_out: *mut *mut GfFlow,
    backward_out: *mut *mut GfFlow,
) -> GfStatus {
    guard(|| {
        let loss_cfg = self::loss_config(loss_config.as_ref())?;
        let opt_cfg = self::optimize_config(optimize_config.as_ref())?;
        let fwd_slot = out_slot(forward_out, "forward_out")?;
        let bwd_slot = out_slot(backward_out, "backward_out")?;
        let out = geoflow::optimize_flow_pair(
            &borrow(frame_t, "frame_t")?.0,
            &borrow(frame_t1, "frame_t1")?.0,
            &loss_cfg,
            &opt_cfg,
        )?;
        *fwd_slot = Box::into_raw(Box::new(GfFlow(out.forward)));
        *bwd_slot = Box::into_raw(Box::new(GfFlow(out.backward)));
        Ok(())
    })
}

/// Endpoint error of `flow` against `gt`. `valid` (nonzero = ground truth
/// present) and `noc` (nonzero = non-occluded) are optional
/// `height * width` byte masks.
///
/// # Safety
/// Handles must be live; masks NULL or `height * width` readable bytes;
/// `result` writable.
#[no_mangle]
pub unsafe extern "C" fn gf_epe(
    flow: *const GfFlow,
    gt: *const GfFlow,
    valid: *const u8,
    noc: *const u8,
    result: *mut GfEvalResult,
) -> GfStatus {
    guard(|| {
        let flow = &borrow(flow, "flow")?.0;
        let gt = &borrow(gt, "gt")?.0;
        let result = out_slot(result, "result")?;
        let (h, w) = flow.dims();
        let validity = if valid.is_null() {
            ValidityMask::all(h, w)
        } else {
            ValidityMask::new(h, w, raster(valid, h * w, "valid")?.iter().map(|b| *b != 0).collect())?
        };
        let occluded = if noc.is_null() {
            None
        } else {
            Some(OcclusionMask::new(h, w, raster(noc, h * w, "noc")?.iter().map(|b| *b == 0).collect())?)
        };
        let r = geoflow::epe(flow, gt, &validity, occluded.as_ref())?;
        *result = GfEvalResult {
            epe_mean: r.epe_mean,
            epe_mean_noc: r.epe_mean_noc.unwrap_or(f64::NAN),
            error_rate: r.error_rate,
            valid_count: r.valid_count,
        };
        Ok(())
    })
}
