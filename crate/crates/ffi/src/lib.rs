//! C ABI for `fano-ep`.
//!
//! Every fallible function returns a [`FanoStatus`]; on failure the message
//! is available from [`fano_last_error_message`] on the same thread.
//! Curves and fits are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fano_ep::ep::{analytic_ep, numeric_ep, EpGuess, ExceptionalPoint};
use fano_ep::fit::{fit_multistart, FanoParams, FitOptions, FitResult, ModelKind};
use fano_ep::io;
use fano_ep::model::{
    cross_section, sample_curve, Channel, Coupling, OscillatorParams, SpectralCurve,
};
use fano_ep::spectral::resonance_poles;
use fano_ep::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FanoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SingularMatrix = 3,
    NoConvergence = 4,
    JacobianSingular = 5,
    PoleTooClose = 6,
    DegenerateInit = 7,
    InsufficientData = 8,
    NonFinite = 9,
    EmptyCurve = 10,
    Io = 11,
    Format = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FanoChannel {
    G11 = 0,
    G22 = 1,
    G12 = 2,
    G21 = 3,
    Anti = 4,
    Effective = 5,
}

impl From<FanoChannel> for Channel {
    fn from(c: FanoChannel) -> Self {
        match c {
            FanoChannel::G11 => Channel::G11,
            FanoChannel::G22 => Channel::G22,
            FanoChannel::G12 => Channel::G12,
            FanoChannel::G21 => Channel::G21,
            FanoChannel::Anti => Channel::Anti,
            FanoChannel::Effective => Channel::Effective,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FanoModel {
    Single = 0,
    Double = 1,
    EnergyDep = 2,
    Simplified = 3,
}

impl From<FanoModel> for ModelKind {
    fn from(m: FanoModel) -> Self {
        match m {
            FanoModel::Single => ModelKind::Single,
            FanoModel::Double => ModelKind::Double,
            FanoModel::EnergyDep => ModelKind::EnergyDep,
            FanoModel::Simplified => ModelKind::Simplified,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FanoComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for FanoComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<FanoComplex> for Complex64 {
    fn from(z: FanoComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanoOscillator {
    pub omega1: f64,
    pub omega2: f64,
    pub k1: f64,
    pub k2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanoCoupling {
    pub f: f64,
    pub g: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FanoExceptionalPoint {
    pub omega: FanoComplex,
    pub f: f64,
    pub g: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl From<&ExceptionalPoint> for FanoExceptionalPoint {
    fn from(ep: &ExceptionalPoint) -> Self {
        Self {
            omega: ep.omega.into(),
            f: ep.f,
            g: ep.g,
            residual: ep.residual,
            iterations: ep.iterations,
        }
    }
}

/// Sampled cross section.
pub struct FanoCurve(SpectralCurve);

/// Result of a least-squares fit.
pub struct FanoFit(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FanoStatus {
    match e {
        Error::InvalidParameter(_) | Error::InvalidWindow { .. } | Error::InvalidCurve(_) => {
            FanoStatus::InvalidArgument
        }
        Error::SingularMatrix { .. } => FanoStatus::SingularMatrix,
        Error::NoConvergence { .. } => FanoStatus::NoConvergence,
        Error::JacobianSingular => FanoStatus::JacobianSingular,
        Error::PoleTooClose { .. } => FanoStatus::PoleTooClose,
        Error::DegenerateInit => FanoStatus::DegenerateInit,
        Error::InsufficientData { .. } => FanoStatus::InsufficientData,
        Error::NonFinite => FanoStatus::NonFinite,
        Error::EmptyCurve => FanoStatus::EmptyCurve,
        Error::Io(_) => FanoStatus::Io,
        Error::Format(_) => FanoStatus::Format,
        Error::Case { source, .. } => status_of(source),
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), FanoStatus>>(f: F) -> FanoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FanoStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            FanoStatus::Panic
        }
    }
}

fn fail(e: Error) -> FanoStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

fn null(what: &str) -> FanoStatus {
    set_error(format!("{what} is null"));
    FanoStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, FanoStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, FanoStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

fn oscillator(o: &FanoOscillator) -> Result<OscillatorParams, FanoStatus> {
    OscillatorParams::new(o.omega1, o.omega2, o.k1, o.k2).map_err(fail)
}

fn coupling(c: &FanoCoupling) -> Result<Coupling, FanoStatus> {
    Coupling::new(c.f, c.g).map_err(fail)
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, FanoStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map(Path::new).map_err(|_| {
        set_error("path is not valid UTF-8".into());
        FanoStatus::InvalidArgument
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fano_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn fano_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Closed-form exceptional point of two undamped oscillators.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fano_analytic_ep(
    omega1: f64,
    omega2: f64,
    out_ep: *mut FanoExceptionalPoint,
) -> FanoStatus {
    guard(|| {
        let dst = out(out_ep, "out")?;
        OscillatorParams::undamped(omega1, omega2).map_err(fail)?;
        *dst = (&analytic_ep(omega1, omega2)).into();
        Ok(())
    })
}

/// Newton refinement of an exceptional point from `guess` (its `omega`, `f`
/// and `g` are used).
///
/// # Safety
/// Pointers must be valid; `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn fano_numeric_ep(
    osc: *const FanoOscillator,
    guess: *const FanoExceptionalPoint,
    out_ep: *mut FanoExceptionalPoint,
) -> FanoStatus {
    guard(|| {
        let p = oscillator(deref(osc, "osc")?)?;
        let g = deref(guess, "guess")?;
        let dst = out(out_ep, "out")?;
        let ep = numeric_ep(
            &p,
            EpGuess {
                f: g.f,
                g: g.g,
                omega: g.omega.into(),
            },
        )
        .map_err(fail)?;
        *dst = (&ep).into();
        Ok(())
    })
}

/// Cross section `|T|^2` at a real frequency.
///
/// # Safety
/// Pointers must be valid; `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn fano_cross_section(
    osc: *const FanoOscillator,
    coup: *const FanoCoupling,
    omega: f64,
    channel: FanoChannel,
    out_value: *mut f64,
) -> FanoStatus {
    guard(|| {
        let p = oscillator(deref(osc, "osc")?)?;
        let c = coupling(deref(coup, "coupling")?)?;
        let dst = out(out_value, "out")?;
        *dst = cross_section(&p, &c, omega, channel.into()).map_err(fail)?;
        Ok(())
    })
}

/// The four roots of `det D`, sorted by real then imaginary part.
///
/// # Safety
/// `out_poles` must point to space for four values.
#[no_mangle]
pub unsafe extern "C" fn fano_resonance_poles(
    osc: *const FanoOscillator,
    coup: *const FanoCoupling,
    out_poles: *mut FanoComplex,
) -> FanoStatus {
    guard(|| {
        let p = oscillator(deref(osc, "osc")?)?;
        let c = coupling(deref(coup, "coupling")?)?;
        if out_poles.is_null() {
            return Err(null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out_poles, 4);
        for (d, r) in dst.iter_mut().zip(resonance_poles(&p, &c)) {
            *d = r.into();
        }
        Ok(())
    })
}

/// Samples a cross section on `points` uniform frequencies in `[lo, hi]`.
///
/// # Safety
/// Pointers must be valid; `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn fano_curve_sample(
    osc: *const FanoOscillator,
    coup: *const FanoCoupling,
    lo: f64,
    hi: f64,
    points: usize,
    channel: FanoChannel,
    out_curve: *mut *mut FanoCurve,
) -> FanoStatus {
    guard(|| {
        let p = oscillator(deref(osc, "osc")?)?;
        let c = coupling(deref(coup, "coupling")?)?;
        let dst = out(out_curve, "out")?;
        let curve = sample_curve(&p, &c, (lo, hi), points, channel.into()).map_err(fail)?;
        *dst = Box::into_raw(Box::new(FanoCurve(curve)));
        Ok(())
    })
}

/// Builds a curve from `len` samples, copying the data.
///
/// # Safety
/// `energies` and `values` must each hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn fano_curve_from_arrays(
    energies: *const f64,
    values: *const f64,
    len: usize,
    out_curve: *mut *mut FanoCurve,
) -> FanoStatus {
    guard(|| {
        if energies.is_null() || values.is_null() {
            return Err(null("data"));
        }
        let dst = out(out_curve, "out")?;
        let e = std::slice::from_raw_parts(energies, len).to_vec();
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let curve = SpectralCurve::new(e, v, Channel::default()).map_err(fail)?;
        *dst = Box::into_raw(Box::new(FanoCurve(curve)));
        Ok(())
    })
}

/// Reads an `omega,sigma` CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fano_curve_read_csv(
    path: *const c_char,
    out_curve: *mut *mut FanoCurve,
) -> FanoStatus {
    guard(|| {
        let path = path_arg(path)?;
        let dst = out(out_curve, "out")?;
        let curve = io::read_curve_file(path, Channel::default()).map_err(fail)?;
        *dst = Box::into_raw(Box::new(FanoCurve(curve)));
        Ok(())
    })
}

/// Writes the curve as `omega,sigma` CSV.
///
/// # Safety
/// `curve` must come from this library; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fano_curve_write_csv(
    curve: *const FanoCurve,
    path: *const c_char,
) -> FanoStatus {
    guard(|| {
        let curve = deref(curve, "curve")?;
        let path = path_arg(path)?;
        io::write_curve_file(path, &curve.0, None).map_err(fail)
    })
}

/// Number of samples; 0 for NULL.
///
/// # Safety
/// `curve` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn fano_curve_len(curve: *const FanoCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.len())
}

/// Copies up to `capacity` samples into the output arrays.
///
/// # Safety
/// Output arrays must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn fano_curve_copy(
    curve: *const FanoCurve,
    energies: *mut f64,
    values: *mut f64,
    capacity: usize,
) -> FanoStatus {
    guard(|| {
        let c = &deref(curve, "curve")?.0;
        if energies.is_null() || values.is_null() {
            return Err(null("output array"));
        }
        if capacity < c.len() {
            set_error(format!(
                "capacity {capacity} is below the curve length {}",
                c.len()
            ));
            return Err(FanoStatus::InvalidArgument);
        }
        std::slice::from_raw_parts_mut(energies, c.len()).copy_from_slice(c.energies());
        std::slice::from_raw_parts_mut(values, c.len()).copy_from_slice(c.values());
        Ok(())
    })
}

/// # Safety
/// `curve` must be NULL or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn fano_curve_free(curve: *mut FanoCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Multistart Levenberg-Marquardt fit. `poles` (may be NULL when
/// `n_poles` is 0) seed the resonance energies and widths.
///
/// # Safety
/// `curve` must come from this library; `poles` must hold `n_poles` values.
#[no_mangle]
pub unsafe extern "C" fn fano_fit(
    curve: *const FanoCurve,
    model: FanoModel,
    poles: *const FanoComplex,
    n_poles: usize,
    seed: u64,
    multistart: usize,
    out_fit: *mut *mut FanoFit,
) -> FanoStatus {
    guard(|| {
        let c = &deref(curve, "curve")?.0;
        let dst = out(out_fit, "out")?;
        if n_poles > 0 && poles.is_null() {
            return Err(null("poles"));
        }
        if multistart == 0 {
            set_error("multistart must be at least 1".into());
            return Err(FanoStatus::InvalidArgument);
        }
        let seeds: Vec<Complex64> = if n_poles == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(poles, n_poles)
                .iter()
                .map(|&z| z.into())
                .collect()
        };
        let opts = FitOptions {
            seed,
            multistart,
            ..FitOptions::default()
        };
        let res = fit_multistart(
            model.into(),
            c,
            (!seeds.is_empty()).then_some(seeds.as_slice()),
            &opts,
        )
        .map_err(fail)?;
        *dst = Box::into_raw(Box::new(FanoFit(res)));
        Ok(())
    })
}

/// Root mean square residual; NaN for NULL.
///
/// # Safety
/// `fit` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn fano_fit_rms(fit: *const FanoFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.rms)
}

/// # Safety
/// `fit` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn fano_fit_iterations(fit: *const FanoFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.iterations)
}

/// # Safety
/// `fit` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn fano_fit_converged(fit: *const FanoFit) -> bool {
    fit.as_ref().is_some_and(|f| f.0.converged)
}

/// Number of parameters reported by [`fano_fit_params`]: 5 (single),
/// 9 (double), 6 (energy-dep) or 5 (simplified); 0 for NULL.
///
/// # Safety
/// `fit` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn fano_fit_param_count(fit: *const FanoFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.params.to_vec().len())
}

/// Copies the fitted parameters in family order:
/// single `e_r, gamma, q, scale, offset`;
/// double `e1, gamma1, q1, scale1, e2, gamma2, q2, scale2, offset`;
/// energy-dep `e1, gamma1, e2, gamma2, delta, scale`;
/// simplified `e1, gamma1, e2, gamma2, scale`.
///
/// # Safety
/// `out_params` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn fano_fit_params(
    fit: *const FanoFit,
    out_params: *mut f64,
    capacity: usize,
) -> FanoStatus {
    guard(|| {
        let v = deref(fit, "fit")?.0.params.to_vec();
        if out_params.is_null() {
            return Err(null("out"));
        }
        if capacity < v.len() {
            set_error(format!(
                "capacity {capacity} is below the parameter count {}",
                v.len()
            ));
            return Err(FanoStatus::InvalidArgument);
        }
        std::slice::from_raw_parts_mut(out_params, v.len()).copy_from_slice(&v);
        Ok(())
    })
}

/// Fitted model at `energy`; NaN for NULL.
///
/// # Safety
/// `fit` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn fano_fit_eval(fit: *const FanoFit, energy: f64) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.params.eval(energy))
}

/// Model family of the fit.
///
/// # Safety
/// `fit` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn fano_fit_model(
    fit: *const FanoFit,
    out_model: *mut FanoModel,
) -> FanoStatus {
    guard(|| {
        let f = deref(fit, "fit")?;
        let dst = out(out_model, "out")?;
        *dst = match f.0.params {
            FanoParams::Single(_) => FanoModel::Single,
            FanoParams::Double(_) => FanoModel::Double,
            FanoParams::EnergyDep(_) => FanoModel::EnergyDep,
            FanoParams::Simplified(_) => FanoModel::Simplified,
        };
        Ok(())
    })
}

/// # Safety
/// `fit` must be NULL or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn fano_fit_free(fit: *mut FanoFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
