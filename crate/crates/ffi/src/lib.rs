//! C ABI over checkpoint loading, embedding extraction, Laplacian pyramids
//! and pyramid-level corruption.
//!
//! Every fallible call returns a [`LapdaeStatus`]. On failure the message is
//! kept per thread and can be read with [`lapdae_last_error`]. Images cross
//! the boundary as planar `f32` buffers in `[0, 1]`, samples laid out
//! `N×C×H×W`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lapdae::checkpoint::Checkpoint;
use lapdae::model::{extract_embedding, EmbeddingLayer, ModelParams};
use lapdae::pyramid::{self, CorruptionSpec, LevelChoice, Pyramid};
use lapdae::{Error, ErrorClass, Tensor};

/// Result codes. Values 2 to 7 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LapdaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Io = 5,
    Numeric = 6,
    Format = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

impl From<&Error> for LapdaeStatus {
    fn from(e: &Error) -> Self {
        match e.class() {
            ErrorClass::Usage => LapdaeStatus::InvalidArgument,
            ErrorClass::Config => LapdaeStatus::Config,
            ErrorClass::Data => LapdaeStatus::Data,
            ErrorClass::Io => LapdaeStatus::Io,
            ErrorClass::Numeric => LapdaeStatus::Numeric,
            ErrorClass::Format => LapdaeStatus::Format,
        }
    }
}

/// A loaded checkpoint.
pub struct LapdaeModel {
    params: ModelParams,
    fingerprint: CString,
}

/// A Laplacian pyramid of one image.
pub struct LapdaePyramid {
    inner: Pyramid,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LapdaeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(LapdaeStatus::from(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult) -> LapdaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LapdaeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LapdaeStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(LapdaeStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: String) -> Failure {
    Failure(LapdaeStatus::InvalidArgument, msg)
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn read_images(data: *const f32, n: usize, c: usize, h: usize, w: usize) -> Result<Tensor, Failure> {
    if data.is_null() {
        return Err(null("images"));
    }
    let len = n
        .checked_mul(c)
        .and_then(|v| v.checked_mul(h))
        .and_then(|v| v.checked_mul(w))
        .filter(|&v| v > 0)
        .ok_or_else(|| invalid(format!("bad image shape {n}x{c}x{h}x{w}")))?;
    let slice = std::slice::from_raw_parts(data, len);
    Ok(Tensor::new(vec![n, c, h, w], slice.to_vec())?)
}

unsafe fn write_out(src: &[f32], out: *mut f32, out_len: usize) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    if out_len < src.len() {
        return Err(Failure(
            LapdaeStatus::BufferTooSmall,
            format!("output holds {out_len} floats, {} needed", src.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

unsafe fn model_ref<'a>(m: *const LapdaeModel) -> Result<&'a LapdaeModel, Failure> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn pyramid_ref<'a>(p: *const LapdaePyramid) -> Result<&'a LapdaePyramid, Failure> {
    p.as_ref().ok_or_else(|| null("pyramid"))
}

fn layer_arg(s: &str) -> Result<EmbeddingLayer, Failure> {
    Ok(s.parse::<EmbeddingLayer>()?)
}

fn budget_arg(budget: usize) -> Option<usize> {
    (budget > 0).then_some(budget)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lapdae_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn lapdae_status_name(status: LapdaeStatus) -> *const c_char {
    let s: &'static CStr = match status {
        LapdaeStatus::Ok => c"ok",
        LapdaeStatus::NullPointer => c"null pointer",
        LapdaeStatus::InvalidArgument => c"invalid argument",
        LapdaeStatus::Config => c"config error",
        LapdaeStatus::Data => c"data error",
        LapdaeStatus::Io => c"i/o error",
        LapdaeStatus::Numeric => c"numeric error",
        LapdaeStatus::Format => c"format error",
        LapdaeStatus::BufferTooSmall => c"buffer too small",
        LapdaeStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Load a checkpoint file into a new model handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lapdae_model_load(path: *const c_char, out: *mut *mut LapdaeModel) -> LapdaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let ck = Checkpoint::load(Path::new(path))?;
        let fingerprint = CString::new(ck.fingerprint()).unwrap_or_default();
        *out = Box::into_raw(Box::new(LapdaeModel {
            params: ck.params,
            fingerprint,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`lapdae_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lapdae_model_free(model: *mut LapdaeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Checkpoint content hash, owned by the model handle.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lapdae_model_fingerprint(model: *const LapdaeModel) -> *const c_char {
    model.as_ref().map_or(std::ptr::null(), |m| m.fingerprint.as_ptr())
}

/// Number of input channels the model expects.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lapdae_model_channels(model: *const LapdaeModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.arch().in_channels)
}

/// Per-sample embedding length at `layer` for `height × width` inputs.
/// A zero `budget` keeps the full feature map.
///
/// # Safety
/// `model` must be a live handle, `layer` a NUL-terminated string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lapdae_model_embedding_dim(
    model: *const LapdaeModel,
    layer: *const c_char,
    height: usize,
    width: usize,
    budget: usize,
    out: *mut usize,
) -> LapdaeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let layer = layer_arg(str_arg(layer, "layer")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let probe = Tensor::zeros(&[1, m.params.arch().in_channels, height, width]);
        *out = extract_embedding(&m.params, &probe, layer, budget_arg(budget))?.dim;
        Ok(())
    })
}

/// Embed `n` images, writing `n × dim` floats row-major into `out`.
///
/// # Safety
/// `images` must hold `n·c·h·w` floats and `out` `out_len` floats.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn lapdae_model_embed(
    model: *const LapdaeModel,
    images: *const f32,
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    layer: *const c_char,
    budget: usize,
    out: *mut f32,
    out_len: usize,
) -> LapdaeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let layer = layer_arg(str_arg(layer, "layer")?)?;
        let x = read_images(images, n, c, h, w)?;
        let emb = extract_embedding(&m.params, &x, layer, budget_arg(budget))?;
        write_out(&emb.data, out, out_len)
    })
}

/// Run the full autoencoder; `out` receives `n·c·h·w` floats.
///
/// # Safety
/// `images` must hold `n·c·h·w` floats and `out` `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn lapdae_model_reconstruct(
    model: *const LapdaeModel,
    images: *const f32,
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    out: *mut f32,
    out_len: usize,
) -> LapdaeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = read_images(images, n, c, h, w)?;
        let z = lapdae::model::reconstruct(&m.params, &x)?;
        write_out(z.data(), out, out_len)
    })
}

/// Deepest pyramid a `height × width` image supports.
#[no_mangle]
pub extern "C" fn lapdae_max_levels(height: usize, width: usize) -> usize {
    pyramid::max_levels(height, width)
}

/// Decompose one `c × h × w` image into `levels` Laplacian bands.
///
/// # Safety
/// `image` must hold `c·h·w` floats and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lapdae_pyramid_build(
    image: *const f32,
    c: usize,
    h: usize,
    w: usize,
    levels: usize,
    out: *mut *mut LapdaePyramid,
) -> LapdaeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let x = read_images(image, 1, c, h, w)?;
        let inner = pyramid::laplacian_pyramid(&x, levels)?;
        *out = Box::into_raw(Box::new(LapdaePyramid { inner }));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`lapdae_pyramid_build`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lapdae_pyramid_free(p: *mut LapdaePyramid) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lapdae_pyramid_num_levels(p: *const LapdaePyramid) -> usize {
    p.as_ref().map_or(0, |p| p.inner.num_levels())
}

/// Height and width of band `level`.
///
/// # Safety
/// `p` must be a live handle; `height` and `width` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lapdae_pyramid_level_shape(
    p: *const LapdaePyramid,
    level: usize,
    height: *mut usize,
    width: *mut usize,
) -> LapdaeStatus {
    guard(|| {
        let p = pyramid_ref(p)?;
        if height.is_null() || width.is_null() {
            return Err(null("height or width"));
        }
        let band = band(p, level)?;
        *height = band.shape()[2];
        *width = band.shape()[3];
        Ok(())
    })
}

fn band(p: &LapdaePyramid, level: usize) -> Result<&Tensor, Failure> {
    let n = p.inner.num_levels();
    (level < n)
        .then(|| p.inner.level(level))
        .ok_or_else(|| invalid(format!("level {level} outside 0..{n}")))
}

/// Copy band `level` into `out`.
///
/// # Safety
/// `p` must be a live handle and `out` hold `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn lapdae_pyramid_level(
    p: *const LapdaePyramid,
    level: usize,
    out: *mut f32,
    out_len: usize,
) -> LapdaeStatus {
    guard(|| write_out(band(pyramid_ref(p)?, level)?.data(), out, out_len))
}

/// Overwrite band `level` with `len` floats from `data`.
///
/// # Safety
/// `p` must be a live handle and `data` hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn lapdae_pyramid_set_level(
    p: *mut LapdaePyramid,
    level: usize,
    data: *const f32,
    len: usize,
) -> LapdaeStatus {
    guard(|| {
        let p = p.as_mut().ok_or_else(|| null("pyramid"))?;
        if data.is_null() {
            return Err(null("data"));
        }
        let expected = band(p, level)?.len();
        if len != expected {
            return Err(invalid(format!("level {level} holds {expected} floats, got {len}")));
        }
        let src = std::slice::from_raw_parts(data, len);
        p.inner.levels_mut()[level].data_mut().copy_from_slice(src);
        Ok(())
    })
}

/// Collapse the pyramid back to a `c·h·w` image.
///
/// # Safety
/// `p` must be a live handle and `out` hold `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn lapdae_pyramid_reconstruct(p: *const LapdaePyramid, out: *mut f32, out_len: usize) -> LapdaeStatus {
    guard(|| {
        let x = pyramid::reconstruct(&pyramid_ref(p)?.inner)?;
        write_out(x.data(), out, out_len)
    })
}

/// Add Gaussian noise of standard deviation `sigma` (0-255 scale) to one
/// Laplacian band and collapse. A negative `level` draws the band from
/// `seed`; the band used is written to `realized_level` when non-null.
///
/// # Safety
/// `image` must hold `c·h·w` floats and `out` `out_len` floats.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn lapdae_lap_corrupt(
    image: *const f32,
    c: usize,
    h: usize,
    w: usize,
    levels: usize,
    sigma: f32,
    level: i32,
    seed: u64,
    out: *mut f32,
    out_len: usize,
    realized_level: *mut usize,
) -> LapdaeStatus {
    guard(|| {
        let x = read_images(image, 1, c, h, w)?;
        let choice = match usize::try_from(level) {
            Ok(l) => LevelChoice::Fixed(l),
            Err(_) => LevelChoice::Random,
        };
        let (y, used) = pyramid::lap_corrupt(&x, &CorruptionSpec::gaussian(sigma, choice, seed), levels)?;
        write_out(y.data(), out, out_len)?;
        if !realized_level.is_null() {
            *realized_level = used;
        }
        Ok(())
    })
}
