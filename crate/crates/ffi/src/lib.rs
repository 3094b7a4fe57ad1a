//! C ABI over `chi2path`.
//!
//! Every function returns a [`Chi2Status`]; results go through out-pointers.
//! On failure the message is kept per thread and can be copied out with
//! [`chi2_last_error_message`]. Handles are opaque and released with their
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;

use chi2path::constants::SPEED_OF_LIGHT;
use chi2path::diagrams::{enumerate_diagrams, enumerate_order, symmetry_factor};
use chi2path::greens::{DressedPropagator, Grid};
use chi2path::media::{
    effective_epsilon, HuttnerBarnettModel, MediumProfile, Permittivity, Region, SpectralCoupling,
};
use chi2path::nonlinear::{
    biphoton_1d_analytic, spdc_probability, Chi2Medium, PumpField, ThreeWaveKinematics,
};
use chi2path::squeezing::squeezing_1d_closed_form;
use chi2path::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chi2Status {
    Ok = 0,
    NullPointer = 1,
    /// Invalid input: domain, range or order errors.
    Validation = 2,
    /// Numerical breakdown: quadrature, singularities, forbidden kinematics.
    Numerical = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
    /// The caller's buffer is too small.
    BufferTooSmall = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Chi2Complex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Chi2Complex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Homogeneous three-wave configuration. Wave numbers follow from `index`;
/// the pump wave number is chosen so that `k_p + k_s + k_i = delta_k`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Setup {
    /// chi(2), m/V.
    pub chi2: f64,
    pub crystal_start: f64,
    pub crystal_length: f64,
    pub index: f64,
    /// rad/s.
    pub omega_s: f64,
    pub omega_i: f64,
    /// V/m.
    pub pump_amplitude: f64,
    pub pump_phase: f64,
    /// 1/m.
    pub delta_k: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Chi2Squeezing {
    pub s: f64,
    pub theta: f64,
}

/// Opaque oscillator-reservoir permittivity model.
pub struct Chi2HbModel(HuttnerBarnettModel);

/// Opaque dressed propagator.
pub struct Chi2Propagator(DressedPropagator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> Chi2Status {
    if e.is_validation() {
        Chi2Status::Validation
    } else {
        Chi2Status::Numerical
    }
}

/// Runs `f` behind a panic guard and records any error message.
fn guard(f: impl FnOnce() -> Result<(), (Chi2Status, String)>) -> Chi2Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => Chi2Status::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            Chi2Status::Panic
        }
    }
}

fn lib<T>(r: chi2path::Result<T>) -> Result<T, (Chi2Status, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, (Chi2Status, String)> {
    // SAFETY: callers pass pointers that are null or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| (Chi2Status::NullPointer, format!("`{name}` is NULL")))
}

fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), (Chi2Status, String)> {
    if p.is_null() {
        return Err((Chi2Status::NullPointer, format!("`{name}` is NULL")));
    }
    // SAFETY: non-null and, per the API contract, valid for writes.
    unsafe { p.write(value) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chi2_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated).
/// `*len` receives the length without the terminator. An empty string means
/// no error has been recorded.
///
/// # Safety
/// `buf` must be valid for `cap` bytes; `len` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn chi2_last_error_message(
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> Chi2Status {
    let msg = LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map(|c| c.as_bytes().to_vec())
            .unwrap_or_default()
    });
    if !len.is_null() {
        *len = msg.len();
    }
    if buf.is_null() {
        return Chi2Status::NullPointer;
    }
    if cap < msg.len() + 1 {
        return Chi2Status::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), msg.len());
    *buf.add(msg.len()) = 0;
    Chi2Status::Ok
}

/// `L^2 sinc^2(L dk / 2)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chi2_spdc_probability(
    length: f64,
    delta_k: f64,
    out: *mut f64,
) -> Chi2Status {
    guard(|| write_out(out, spdc_probability(length, delta_k), "out"))
}

/// Creates an oscillator-reservoir model with constant coupling `f`
/// (`f = 0` gives the lossless Lorentz limit).
///
/// # Safety
/// `out` must be valid for writes. Release the handle with [`chi2_hb_model_free`].
#[no_mangle]
pub unsafe extern "C" fn chi2_hb_model_new(
    omega0: f64,
    beta: f64,
    rho: f64,
    coupling: f64,
    cutoff: f64,
    out: *mut *mut Chi2HbModel,
) -> Chi2Status {
    guard(|| {
        let f = if coupling == 0.0 {
            SpectralCoupling::Zero
        } else {
            SpectralCoupling::Constant(coupling)
        };
        let model = lib(HuttnerBarnettModel::new(omega0, beta, rho, f, cutoff))?;
        write_out(out, Box::into_raw(Box::new(Chi2HbModel(model))), "out")
    })
}

/// # Safety
/// `model` must come from [`chi2_hb_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn chi2_hb_model_free(model: *mut Chi2HbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Effective permittivity at `omega` for geometry factor `g`.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chi2_effective_epsilon(
    model: *const Chi2HbModel,
    g: f64,
    omega: f64,
    out: *mut Chi2Complex,
) -> Chi2Status {
    guard(|| {
        let m = non_null(model, "model")?;
        let eps = lib(effective_epsilon(&m.0, g, omega))?;
        write_out(out, eps.into(), "out")
    })
}

/// Analytic propagator in a homogeneous medium with `eps = index^2 + i loss`.
///
/// # Safety
/// `out` must be valid for writes. Release with [`chi2_propagator_free`].
#[no_mangle]
pub unsafe extern "C" fn chi2_propagator_new_homogeneous(
    index: f64,
    loss: f64,
    out: *mut *mut Chi2Propagator,
) -> Chi2Status {
    guard(|| {
        let eps = Permittivity::Constant(Complex64::new(index * index, loss));
        let prop = lib(DressedPropagator::analytic(MediumProfile::homogeneous(
            "ffi", eps,
        )))?;
        write_out(out, Box::into_raw(Box::new(Chi2Propagator(prop))), "out")
    })
}

/// Numeric propagator for `n_regions` slabs `[x_start[k], x_end[k])` of
/// index `index[k]` in a background of index `background_index`, validated
/// on a uniform grid of `grid_points` over `[grid_min, grid_max]`.
///
/// # Safety
/// The three arrays must hold `n_regions` values each; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chi2_propagator_new_layered(
    background_index: f64,
    n_regions: usize,
    x_start: *const f64,
    x_end: *const f64,
    index: *const f64,
    grid_min: f64,
    grid_max: f64,
    grid_points: usize,
    out: *mut *mut Chi2Propagator,
) -> Chi2Status {
    guard(|| {
        let slice = |p: *const f64, name: &str| -> Result<&[f64], (Chi2Status, String)> {
            if n_regions == 0 {
                return Ok(&[]);
            }
            non_null(p, name)?;
            // SAFETY: non-null and holds n_regions values per the contract.
            Ok(unsafe { std::slice::from_raw_parts(p, n_regions) })
        };
        let (a, b, n) = (
            slice(x_start, "x_start")?,
            slice(x_end, "x_end")?,
            slice(index, "index")?,
        );
        let regions = (0..n_regions)
            .map(|k| Region::new(a[k], b[k], Permittivity::from_index(n[k])))
            .collect();
        let medium = lib(MediumProfile::with_background(
            "ffi",
            regions,
            Permittivity::from_index(background_index),
        ))?;
        let grid = lib(Grid::uniform(grid_min, grid_max, grid_points))?;
        let prop = lib(DressedPropagator::numeric(medium, grid))?;
        write_out(out, Box::into_raw(Box::new(Chi2Propagator(prop))), "out")
    })
}

/// # Safety
/// `prop` must come from a `chi2_propagator_new_*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn chi2_propagator_free(prop: *mut Chi2Propagator) {
    if !prop.is_null() {
        drop(Box::from_raw(prop));
    }
}

/// `G(x, y; omega)`.
///
/// # Safety
/// `prop` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chi2_propagator_evaluate(
    prop: *const Chi2Propagator,
    omega: f64,
    x: f64,
    y: f64,
    out: *mut Chi2Complex,
) -> Chi2Status {
    guard(|| {
        let p = non_null(prop, "prop")?;
        let g = lib(p.0.evaluate(omega, x, y))?;
        write_out(out, g.into(), "out")
    })
}

fn build(setup: &Chi2Setup) -> Result<(Chi2Medium, ThreeWaveKinematics), (Chi2Status, String)> {
    let k = |omega: f64| Complex64::new(setup.index * omega / SPEED_OF_LIGHT, 0.0);
    let (k_s, k_i) = (k(setup.omega_s), k(setup.omega_i));
    let k_p = Complex64::new(setup.delta_k, 0.0) - k_s - k_i;
    let pump = lib(PumpField::new(
        setup.pump_amplitude,
        setup.pump_phase,
        setup.omega_s + setup.omega_i,
        k_p,
    ))?;
    let kin = lib(ThreeWaveKinematics::new(
        setup.omega_s,
        setup.omega_i,
        k_s,
        k_i,
        pump,
    ))?;
    let linear = MediumProfile::homogeneous("ffi", Permittivity::from_index(setup.index));
    let medium = lib(Chi2Medium::new(
        setup.chi2,
        setup.crystal_start,
        setup.crystal_start + setup.crystal_length,
        linear,
    ))?;
    Ok((medium, kin))
}

/// Closed-form 1D biphoton amplitude at `(x, y)`.
///
/// # Safety
/// `setup` must be readable; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chi2_biphoton_1d_analytic(
    setup: *const Chi2Setup,
    x: f64,
    y: f64,
    out: *mut Chi2Complex,
) -> Chi2Status {
    guard(|| {
        let (medium, kin) = build(non_null(setup, "setup")?)?;
        let phi = lib(biphoton_1d_analytic(&medium, &kin, x, y))?;
        write_out(out, phi.into(), "out")
    })
}

/// Closed-form squeezing parameter; needs `delta_k = 0`.
///
/// # Safety
/// `setup` must be readable; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chi2_squeezing_closed_form(
    setup: *const Chi2Setup,
    x: f64,
    y: f64,
    out: *mut Chi2Squeezing,
) -> Chi2Status {
    guard(|| {
        let s = non_null(setup, "setup")?;
        let (_, kin) = build(s)?;
        let p = lib(squeezing_1d_closed_form(
            s.chi2,
            &kin.pump,
            s.crystal_length,
            &kin,
            x,
            y,
        ))?;
        write_out(
            out,
            Chi2Squeezing {
                s: p.s,
                theta: p.theta,
            },
            "out",
        )
    })
}

/// Number of catalogued diagrams with `vertices` vertices and `propagators` lines.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chi2_diagram_count(
    vertices: usize,
    propagators: usize,
    out: *mut usize,
) -> Chi2Status {
    guard(|| {
        let n = lib(enumerate_diagrams(vertices, propagators))?.len();
        write_out(out, n, "out")
    })
}

/// Symmetry factor of the `position`-th diagram of order `vertices`, in
/// canonical order.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chi2_diagram_symmetry_factor(
    vertices: usize,
    position: usize,
    out: *mut u64,
) -> Chi2Status {
    guard(|| {
        let all = lib(enumerate_order(vertices))?;
        let d = all.get(position).ok_or_else(|| {
            (
                Chi2Status::Validation,
                format!(
                    "position {position} out of range for {} diagrams",
                    all.len()
                ),
            )
        })?;
        write_out(out, symmetry_factor(d), "out")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(
            status_of(&Error::Domain("x".into())),
            Chi2Status::Validation
        );
        assert_eq!(
            status_of(&Error::KinematicSingularity),
            Chi2Status::Numerical
        );
    }

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, Chi2Status::Panic);
        let mut buf = [0 as c_char; 64];
        let mut len = 0;
        unsafe { chi2_last_error_message(buf.as_mut_ptr(), buf.len(), &mut len) };
        let msg = unsafe { std::ffi::CStr::from_ptr(buf.as_ptr()) }
            .to_str()
            .unwrap();
        assert!(msg.contains("boom"));
    }
}
