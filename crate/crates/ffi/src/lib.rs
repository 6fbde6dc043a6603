//! C ABI over the `equisym` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! and released by the matching `*_free`. Every fallible call returns an
//! [`EquisymStatus`]; the message of the last failure on the calling thread
//! is available from [`equisym_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use equisym::adaptive::{fit_w, FitConfig};
use equisym::grid::{GridSpec, Image};
use equisym::symmetry::{feature_response, run_scenario, Aggregation, RegularizerSpec, Scenario};
use equisym::transforms::{AffineParams, Transform};
use equisym::Error;

/// Result codes of the C interface.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquisymStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Io = 4,
    Format = 5,
    IllConditioned = 6,
    NonFinite = 7,
    Diverged = 8,
    Panic = 9,
}

/// Per-pixel combination of stencil responses.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquisymAggregation {
    Magnitude = 0,
    Directional = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquisymScenario {
    SampleStrict = 0,
    DatasetStrict = 1,
    DatasetAdaptive = 2,
}

/// Opaque grayscale image.
pub struct EquisymImage(Image);

/// Opaque regularizer with its steerable stencils.
pub struct EquisymRegularizer(RegularizerSpec);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> EquisymStatus {
    match e {
        Error::Domain(_) => EquisymStatus::Domain,
        Error::IllConditioned { .. } => EquisymStatus::IllConditioned,
        Error::NonFinite(_) => EquisymStatus::NonFinite,
        Error::Diverged { .. } => EquisymStatus::Diverged,
        Error::Format(_) => EquisymStatus::Format,
        Error::Io { .. } => EquisymStatus::Io,
        Error::Item { source, .. } => status_of(source),
        Error::Usage(_) => EquisymStatus::InvalidArgument,
        _ => EquisymStatus::Domain,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, records any failure and converts it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EquisymStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EquisymStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("{what} is null"));
            EquisymStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(&msg);
            EquisymStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            EquisymStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn equisym_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn equisym_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `side × side` row-major values into a new image with mesh size `mesh`.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn equisym_image_new(
    side: usize,
    mesh: f64,
    values: *const f64,
    len: usize,
    out: *mut *mut EquisymImage,
) -> EquisymStatus {
    guard(|| {
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        if len != side.saturating_mul(side) {
            return Err(Failure::Invalid(format!("expected {} values, got {len}", side * side)));
        }
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let img = Image::new(GridSpec::new(mesh, side)?, data)?;
        write_out(out, Box::into_raw(Box::new(EquisymImage(img))), "out")
    })
}

/// Loads a PGM or PNG file onto the unit-extent grid.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn equisym_image_load(path: *const c_char, out: *mut *mut EquisymImage) -> EquisymStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let img = equisym::io::load_image(path)?;
        write_out(out, Box::into_raw(Box::new(EquisymImage(img))), "out")
    })
}

/// Writes an 8-bit binary PGM.
///
/// # Safety
/// `image` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn equisym_image_save(image: *const EquisymImage, path: *const c_char) -> EquisymStatus {
    guard(|| {
        let img = deref(image, "image")?;
        let path = c_str(path, "path")?;
        equisym::io::save_image(&img.0, path)?;
        Ok(())
    })
}

/// Side length of the image, or 0 for a null handle.
///
/// # Safety
/// `image` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn equisym_image_side(image: *const EquisymImage) -> usize {
    image.as_ref().map_or(0, |i| i.0.side())
}

/// Copies the row-major values into `buf`, which must hold `side²` doubles.
///
/// # Safety
/// `image` must come from this library and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn equisym_image_values(image: *const EquisymImage, buf: *mut f64, len: usize) -> EquisymStatus {
    guard(|| {
        let img = deref(image, "image")?;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let v = img.0.values();
        if len < v.len() {
            return Err(Failure::Invalid(format!("buffer holds {len} values, need {}", v.len())));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// Releases an image; null is ignored.
///
/// # Safety
/// `image` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn equisym_image_free(image: *mut EquisymImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Builds one of `tv`, `tv2`, `sobel`, `laplacian`, `prewitt`.
///
/// # Safety
/// `name` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn equisym_regularizer_new(
    name: *const c_char,
    aggregation: EquisymAggregation,
    out: *mut *mut EquisymRegularizer,
) -> EquisymStatus {
    guard(|| {
        let name = c_str(name, "name")?;
        let reg = name.parse().map_err(|e: Error| Failure::Invalid(e.to_string()))?;
        let agg = match aggregation {
            EquisymAggregation::Magnitude => Aggregation::Magnitude,
            EquisymAggregation::Directional => Aggregation::Directional,
        };
        let spec = RegularizerSpec::new(reg)?.with_aggregation(agg);
        write_out(out, Box::into_raw(Box::new(EquisymRegularizer(spec))), "out")
    })
}

/// Releases a regularizer; null is ignored.
///
/// # Safety
/// `reg` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn equisym_regularizer_free(reg: *mut EquisymRegularizer) {
    if !reg.is_null() {
        drop(Box::from_raw(reg));
    }
}

/// Mean interior response with the stencils steered by the row-major 2×2 `matrix`.
///
/// # Safety
/// Handles must come from this library, `matrix` must hold 4 doubles and
/// `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn equisym_feature_response(
    image: *const EquisymImage,
    reg: *const EquisymRegularizer,
    matrix: *const f64,
    out: *mut f64,
) -> EquisymStatus {
    guard(|| {
        let img = deref(image, "image")?;
        let reg = deref(reg, "reg")?;
        if matrix.is_null() {
            return Err(Failure::Null("matrix"));
        }
        let m = std::slice::from_raw_parts(matrix, 4);
        let a = Transform::new([[m[0], m[1]], [m[2], m[3]]])?;
        write_out(out, feature_response(&img.0, &reg.0, &a)?, "out")
    })
}

/// Symmetry error `ε_G` of `count` images. For the adaptive scenario,
/// `weights` holds `count` triples `[α, s_x, s_y]`; it is ignored otherwise.
///
/// # Safety
/// `images` must hold `count` valid handles, `weights` (when used) `3·count`
/// doubles, and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn equisym_epsilon(
    images: *const *const EquisymImage,
    count: usize,
    reg: *const EquisymRegularizer,
    scenario: EquisymScenario,
    angles: usize,
    weights: *const f64,
    out: *mut f64,
) -> EquisymStatus {
    guard(|| {
        let reg = deref(reg, "reg")?;
        if images.is_null() {
            return Err(Failure::Null("images"));
        }
        let data = std::slice::from_raw_parts(images, count)
            .iter()
            .map(|&p| deref(p, "image").map(|i| i.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let scenario = match scenario {
            EquisymScenario::SampleStrict => Scenario::SampleStrict,
            EquisymScenario::DatasetStrict => Scenario::DatasetStrict,
            EquisymScenario::DatasetAdaptive => Scenario::DatasetAdaptive,
        };
        let w = if scenario == Scenario::DatasetAdaptive {
            if weights.is_null() {
                return Err(Failure::Null("weights"));
            }
            let raw = std::slice::from_raw_parts(weights, 3 * count);
            Some(
                raw.chunks(3)
                    .map(|c| AffineParams::new(c[0], c[1], c[2]))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        let report = run_scenario(&data, &reg.0, scenario, angles, w.as_deref())?;
        write_out(out, report.epsilon, "out")
    })
}

/// Fits `w = [α, s_x, s_y]` for one image with default descent settings
/// apart from `angles`, `max_iters` and `multi_start`.
///
/// # Safety
/// Handles must come from this library, `w_out` must hold 3 doubles and
/// `objective_out` be writable.
#[no_mangle]
pub unsafe extern "C" fn equisym_fit_w(
    image: *const EquisymImage,
    reg: *const EquisymRegularizer,
    angles: usize,
    max_iters: usize,
    multi_start: bool,
    w_out: *mut f64,
    objective_out: *mut f64,
) -> EquisymStatus {
    guard(|| {
        let img = deref(image, "image")?;
        let reg = deref(reg, "reg")?;
        if w_out.is_null() {
            return Err(Failure::Null("w_out"));
        }
        let config = FitConfig {
            angles,
            max_iters,
            multi_start,
            ..FitConfig::default()
        };
        let fit = fit_w(&img.0, &reg.0, &config)?;
        ptr::copy_nonoverlapping(fit.w.to_array().as_ptr(), w_out, 3);
        write_out(objective_out, fit.objective_final, "objective_out")
    })
}

/// Runs a bench suite (or `all`) and returns its results as a JSON array in
/// a string to be released with [`equisym_string_free`]. `passed` receives
/// whether every bench passed.
///
/// # Safety
/// `name` must be NUL-terminated; `json_out` and `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn equisym_run_suite(
    name: *const c_char,
    json_out: *mut *mut c_char,
    passed: *mut bool,
) -> EquisymStatus {
    guard(|| {
        let name = c_str(name, "name")?;
        if json_out.is_null() || passed.is_null() {
            return Err(Failure::Null("output pointer"));
        }
        let results = equisym::suite::run_suite(name).map_err(|e| match e {
            Error::Usage(m) => Failure::Invalid(m),
            other => Failure::Lib(other),
        })?;
        let json = serde_json::to_string(&results).map_err(|e| Failure::Lib(e.into()))?;
        passed.write(results.iter().all(|r| r.pass));
        json_out.write(CString::new(json).map_err(|e| Failure::Invalid(e.to_string()))?.into_raw());
        Ok(())
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn equisym_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
