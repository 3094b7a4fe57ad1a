//! Effective chi(2) coupling in the undepleted-pump approximation and the
//! biphoton propagator built from it.
//!
//! The pump is a classical plane wave `A_p e^{i(k_p x - omega_p t)}`. After the
//! energy constraint `omega_p = omega_s + omega_i` removes the time and
//! frequency integrals, the biphoton propagator is the single spatial integral
//!
//! ```text
//! X(x, y) = int dz G_s(omega_s; x, z) lambda(z) G_i(omega_i; z, y)
//! ```
//!
//! over the nonlinear region, with `lambda(z) = chi |A_p| e^{i phi_p} e^{i k_p z}`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::DressedPropagator;
use crate::media::MediumProfile;
use crate::quad::{integrate_with_breakpoints, QuadOptions};

/// Relative tolerance of the energy filter, in units of `omega_p`.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

/// Recorded alongside numeric biphoton results.
pub const BIPHOTON_REDUCTION_NOTE: &str =
    "vertex integral reduced from d4z to dz: the energy constraint fixes the frequencies";

/// Classical plane-wave pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpField {
    pub amplitude: f64,
    pub phase: f64,
    pub omega_p: f64,
    pub k_p: Complex64,
}

impl PumpField {
    pub fn new(amplitude: f64, phase: f64, omega_p: f64, k_p: Complex64) -> Result<Self> {
        if !(omega_p > 0.0) {
            return Err(Error::Domain(format!(
                "pump frequency must be positive, got {omega_p}"
            )));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::Domain(format!(
                "pump amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        Ok(Self {
            amplitude,
            phase,
            omega_p,
            k_p,
        })
    }

    /// `|A_p| e^{i phi_p}`.
    pub fn complex_amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }
}

/// Second-order susceptibility, in m/V.
#[derive(Clone)]
pub enum Susceptibility {
    Constant(f64),
    /// `chi(omega, x)`.
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Susceptibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// A chi(2) slab `[x_start, x_end]` embedded in a linear medium.
#[derive(Debug, Clone)]
pub struct Chi2Medium {
    chi: Susceptibility,
    x_start: f64,
    x_end: f64,
    linear: MediumProfile,
}

impl Chi2Medium {
    pub fn new(chi: f64, x_start: f64, x_end: f64, linear: MediumProfile) -> Result<Self> {
        if !chi.is_finite() {
            return Err(Error::Domain(format!("chi2 must be finite, got {chi}")));
        }
        Self::build(Susceptibility::Constant(chi), x_start, x_end, linear)
    }

    pub fn with_function(
        chi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        x_start: f64,
        x_end: f64,
        linear: MediumProfile,
    ) -> Result<Self> {
        Self::build(
            Susceptibility::Function(Arc::new(chi)),
            x_start,
            x_end,
            linear,
        )
    }

    fn build(chi: Susceptibility, x_start: f64, x_end: f64, linear: MediumProfile) -> Result<Self> {
        if !(x_start.is_finite() && x_end.is_finite() && x_end > x_start) {
            return Err(Error::Domain(format!(
                "nonlinear extent needs finite x_start < x_end, got [{x_start}, {x_end}]"
            )));
        }
        Ok(Self {
            chi,
            x_start,
            x_end,
            linear,
        })
    }

    /// Same susceptibility and linear medium on a different extent.
    pub fn with_extent(&self, x_start: f64, x_end: f64) -> Result<Self> {
        Self::build(self.chi.clone(), x_start, x_end, self.linear.clone())
    }

    pub fn length(&self) -> f64 {
        self.x_end - self.x_start
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.x_start, self.x_end)
    }

    pub fn linear(&self) -> &MediumProfile {
        &self.linear
    }

    pub fn susceptibility(&self) -> &Susceptibility {
        &self.chi
    }

    /// `chi(omega, x)`, zero outside the extent.
    pub fn chi(&self, omega: f64, x: f64) -> f64 {
        if x < self.x_start || x > self.x_end {
            return 0.0;
        }
        match &self.chi {
            Susceptibility::Constant(c) => *c,
            Susceptibility::Function(f) => f(omega, x),
        }
    }

    fn constant_chi(&self) -> Result<f64> {
        match self.chi {
            Susceptibility::Constant(c) => Ok(c),
            Susceptibility::Function(_) => Err(Error::NotHomogeneous(
                "closed-form biphoton needs a constant susceptibility".into(),
            )),
        }
    }
}

/// Sign convention of the phase mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchConvention {
    /// `k_p + k_s + k_i`: signal and idler counter-propagate to the pump.
    #[default]
    CounterPropagating,
    /// `k_p - k_s - k_i`.
    CoPropagating,
}

/// Signal and idler frequencies and wave numbers for a given pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeWaveKinematics {
    pub omega_s: f64,
    pub omega_i: f64,
    pub k_s: Complex64,
    pub k_i: Complex64,
    pub pump: PumpField,
}

impl ThreeWaveKinematics {
    pub fn new(
        omega_s: f64,
        omega_i: f64,
        k_s: Complex64,
        k_i: Complex64,
        pump: PumpField,
    ) -> Result<Self> {
        if !(omega_s > 0.0 && omega_i > 0.0) {
            return Err(Error::Domain(format!(
                "signal and idler frequencies must be positive (got {omega_s}, {omega_i})"
            )));
        }
        Ok(Self {
            omega_s,
            omega_i,
            k_s,
            k_i,
            pump,
        })
    }

    /// Signal and idler exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            omega_s: self.omega_i,
            omega_i: self.omega_s,
            k_s: self.k_i,
            k_i: self.k_s,
            pump: self.pump,
        }
    }
}

/// `lambda(x) = chi(x) |A_p| e^{i phi_p} e^{i k_p x}`; zero outside the medium.
pub fn effective_coupling(medium: &Chi2Medium, pump: &PumpField, x: f64) -> Complex64 {
    let chi = medium.chi(pump.omega_p, x);
    if chi == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    pump.complex_amplitude() * chi * (Complex64::i() * pump.k_p * x).exp()
}

/// `omega_p - omega_s - omega_i`.
pub fn frequency_mismatch(kin: &ThreeWaveKinematics) -> f64 {
    kin.pump.omega_p - kin.omega_s - kin.omega_i
}

/// Rejects kinematics that violate energy conservation beyond [`ENERGY_TOLERANCE`].
pub fn check_energy(kin: &ThreeWaveKinematics) -> Result<()> {
    let delta = frequency_mismatch(kin);
    let tolerance = ENERGY_TOLERANCE * kin.pump.omega_p;
    if delta.abs() > tolerance {
        return Err(Error::ForbiddenProcess {
            delta_omega: delta,
            tolerance,
        });
    }
    Ok(())
}

/// `k_p + k_s + k_i`.
pub fn phase_mismatch(kin: &ThreeWaveKinematics) -> Complex64 {
    phase_mismatch_with(kin, MismatchConvention::CounterPropagating)
}

pub fn phase_mismatch_with(kin: &ThreeWaveKinematics, convention: MismatchConvention) -> Complex64 {
    match convention {
        MismatchConvention::CounterPropagating => kin.pump.k_p + kin.k_s + kin.k_i,
        MismatchConvention::CoPropagating => kin.pump.k_p - kin.k_s - kin.k_i,
    }
}

/// Unnormalised `sin(u) / u`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 * (1.0 - u2 / 20.0)
    } else {
        u.sin() / u
    }
}

/// `sin(u) / u` for complex arguments.
pub fn sinc_complex(u: Complex64) -> Complex64 {
    if u.norm() < 1e-4 {
        let u2 = u * u;
        Complex64::new(1.0, 0.0) - u2 / 6.0 * (Complex64::new(1.0, 0.0) - u2 / 20.0)
    } else {
        u.sin() / u
    }
}

/// Closed-form biphoton propagator of a homogeneous slab:
/// `Theta(x - y) chi |A_p| e^{i phi_p} / (4 k_s k_i) e^{-i(k_s x + k_i y)} L sinc(L dk / 2)`.
pub fn biphoton_1d_analytic(
    medium: &Chi2Medium,
    kin: &ThreeWaveKinematics,
    x: f64,
    y: f64,
) -> Result<Complex64> {
    check_energy(kin)?;
    let chi = medium.constant_chi()?;
    let kk = kin.k_s * kin.k_i;
    if kk.norm() == 0.0 {
        return Err(Error::KinematicSingularity);
    }
    let step = if x > y {
        1.0
    } else if x < y {
        return Ok(Complex64::new(0.0, 0.0));
    } else {
        0.5
    };
    let length = medium.length();
    let dk = phase_mismatch(kin);
    let envelope = kin.pump.complex_amplitude() * chi / (4.0 * kk)
        * (-Complex64::i() * (kin.k_s * x + kin.k_i * y)).exp();
    Ok(envelope * sinc_complex(dk * (length / 2.0)) * (length * step))
}

/// Biphoton propagator by quadrature over the nonlinear extent, with default tolerances.
pub fn biphoton_numeric(
    medium: &Chi2Medium,
    kin: &ThreeWaveKinematics,
    g_s: &DressedPropagator,
    g_i: &DressedPropagator,
    x: f64,
    y: f64,
) -> Result<Complex64> {
    biphoton_numeric_with(
        medium,
        kin,
        g_s,
        g_i,
        x,
        y,
        &QuadOptions::default().with_rel_tol(1e-10),
    )
}

pub fn biphoton_numeric_with(
    medium: &Chi2Medium,
    kin: &ThreeWaveKinematics,
    g_s: &DressedPropagator,
    g_i: &DressedPropagator,
    x: f64,
    y: f64,
    opts: &QuadOptions,
) -> Result<Complex64> {
    check_energy(kin)?;
    let signal = g_s.at_frequency(kin.omega_s)?;
    let idler = g_i.at_frequency(kin.omega_i)?;
    let (a, b) = medium.extent();
    let mut breaks = vec![x, y];
    breaks.extend(g_s.medium().interfaces());
    breaks.extend(g_i.medium().interfaces());
    let pump = kin.pump;
    let r = integrate_with_breakpoints(
        |z| signal.green(x, z) * effective_coupling(medium, &pump, z) * idler.green(z, y),
        a,
        b,
        &breaks,
        opts,
    )?;
    Ok(r.value)
}

/// `L^2 sinc^2(L dk / 2)`.
pub fn spdc_probability(length: f64, delta_k: f64) -> f64 {
    let s = sinc(0.5 * length * delta_k);
    length * length * s * s
}
