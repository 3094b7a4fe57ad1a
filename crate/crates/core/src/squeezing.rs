//! Squeezed vacuum from cascaded down-conversion.
//!
//! Repeated pair creation populates only even photon numbers. Matching the
//! amplitude of the `n`-th pair to `sigma^n` reproduces the single-mode
//! squeezed vacuum with `tanh s = |sigma|` and `theta = arg sigma`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::nonlinear::{PumpField, ThreeWaveKinematics};

/// Largest supported photon-number truncation.
pub const MAX_PHOTON_NUMBER: usize = 300;

/// Wraps a phase into `(-pi, pi]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let wrapped = theta - 2.0 * PI * ((theta - PI) / (2.0 * PI)).ceil();
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Normalised state in the Fock basis, truncated at `kmax` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonNumberState {
    coefficients: Vec<Complex64>,
}

impl PhotonNumberState {
    /// Normalises `coefficients` (index = photon number).
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        let norm = coefficients
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("state has zero or non-finite norm".into()));
        }
        Ok(Self {
            coefficients: coefficients.into_iter().map(|c| c / norm).collect(),
        })
    }

    pub fn vacuum(kmax: usize) -> Self {
        let mut coefficients = vec![Complex64::new(0.0, 0.0); kmax + 1];
        coefficients[0] = Complex64::new(1.0, 0.0);
        Self { coefficients }
    }

    pub fn kmax(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Amplitude of `|k>`; zero beyond the truncation.
    pub fn coefficient(&self, k: usize) -> Complex64 {
        self.coefficients.get(k).copied().unwrap_or_default()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn norm(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Probability weight on odd photon numbers.
    pub fn odd_weight(&self) -> f64 {
        self.coefficients
            .iter()
            .skip(1)
            .step_by(2)
            .map(|c| c.norm_sqr())
            .sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| k as f64 * c.norm_sqr())
            .sum()
    }
}

/// `xi = s e^{i theta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingParameter {
    pub s: f64,
    pub theta: f64,
}

impl SqueezingParameter {
    pub fn new(s: f64, theta: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!(
                "squeezing magnitude must be finite and >= 0, got {s}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::Domain(format!(
                "squeezing phase must be finite, got {theta}"
            )));
        }
        Ok(Self {
            s,
            theta: wrap_phase(theta),
        })
    }

    pub fn xi(&self) -> Complex64 {
        Complex64::from_polar(self.s, self.theta)
    }
}

fn check_truncation(kmax: usize) -> Result<()> {
    if kmax > MAX_PHOTON_NUMBER {
        return Err(Error::Truncation {
            kmax,
            max: MAX_PHOTON_NUMBER,
        });
    }
    if kmax < 2 || !kmax.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "truncation must be even and >= 2, got {kmax}"
        )));
    }
    Ok(())
}

/// `c_{2n} = sqrt(sech s) sqrt((2n)!) / n! (-e^{i theta} tanh(s) / 2)^n`,
/// normalised over `0..=kmax`.
pub fn squeezed_vacuum_coefficients(
    param: SqueezingParameter,
    kmax: usize,
) -> Result<PhotonNumberState> {
    check_truncation(kmax)?;
    let t = param.s.tanh();
    if t == 0.0 {
        return Ok(PhotonNumberState::vacuum(kmax));
    }
    // Magnitudes accumulate in the log domain; the ratio of consecutive terms
    // is sqrt((2n+1)(2n+2)) / (n+1) * tanh(s) / 2.
    let log_step = (0.5 * t).ln();
    let mut log_mag = -0.5 * param.s.cosh().ln();
    let mut coefficients = vec![Complex64::new(0.0, 0.0); kmax + 1];
    for n in 0..=kmax / 2 {
        let phase = n as f64 * (param.theta + PI);
        coefficients[2 * n] = Complex64::from_polar(log_mag.exp(), phase);
        let nf = n as f64;
        log_mag += 0.5 * ((2.0 * nf + 1.0) * (2.0 * nf + 2.0)).ln() - (nf + 1.0).ln() + log_step;
    }
    PhotonNumberState::new(coefficients)
}

/// State after repeated pair creation: amplitude `psi_n sigma^n` on `|2n>`,
/// `psi_n = sqrt(sech(s) (2n)!) / n! (-1/2)^n` with `tanh s = |sigma|`, up to `n_max` photons.
pub fn cascaded_state(sigma: Complex64, n_max: usize) -> Result<PhotonNumberState> {
    let modulus = sigma.norm();
    if !(modulus < 1.0) {
        return Err(Error::Divergence { modulus });
    }
    check_truncation(n_max)?;
    let sech = 1.0 / modulus.atanh().cosh();
    let mut coefficients = vec![Complex64::new(0.0, 0.0); n_max + 1];
    let mut amp = Complex64::new(sech.sqrt(), 0.0);
    for n in 0..=n_max / 2 {
        coefficients[2 * n] = amp;
        let nf = n as f64;
        amp *= sigma * (-0.5 * ((2.0 * nf + 1.0) * (2.0 * nf + 2.0)).sqrt() / (nf + 1.0));
    }
    PhotonNumberState::new(coefficients)
}

/// `s = atanh |sigma|`, `theta = arg sigma`.
pub fn squeezing_from_sigma(sigma: Complex64) -> Result<SqueezingParameter> {
    let modulus = sigma.norm();
    if !(modulus < 1.0) {
        return Err(Error::OutOfRange(format!(
            "|sigma| = {modulus} must lie in [0, 1) for tanh s = |sigma| to have a solution"
        )));
    }
    let theta = if modulus == 0.0 { 0.0 } else { sigma.arg() };
    SqueezingParameter::new(modulus.atanh(), theta)
}

/// Closed form for a homogeneous phase-matched slab of length `length`:
/// `s = ln sqrt((4 k_s k_i + u) / (4 k_s k_i - u))` with `u = chi |A_p| L`,
/// `theta = phi_p - (k_s x + k_i y)`.
pub fn squeezing_1d_closed_form(
    chi: f64,
    pump: &PumpField,
    length: f64,
    kin: &ThreeWaveKinematics,
    x: f64,
    y: f64,
) -> Result<SqueezingParameter> {
    if !(length >= 0.0) || !length.is_finite() {
        return Err(Error::Domain(format!(
            "length must be finite and >= 0, got {length}"
        )));
    }
    let k_s = kin.k_s;
    let k_i = kin.k_i;
    let scale = k_s.norm().max(k_i.norm()).max(pump.k_p.norm());
    if k_s.im.abs() > 1e-12 * scale || k_i.im.abs() > 1e-12 * scale {
        return Err(Error::Domain(
            "closed form needs real signal and idler wave numbers".into(),
        ));
    }
    let dk = pump.k_p + k_s + k_i;
    if dk.norm() * length > 1e-9 * (1.0 + scale * length) {
        return Err(Error::Domain(format!(
            "closed form needs perfect phase matching, got dk = {dk}"
        )));
    }
    let kk4 = 4.0 * k_s.re * k_i.re;
    if kk4 == 0.0 {
        return Err(Error::KinematicSingularity);
    }
    let step = if x > y {
        1.0
    } else if x < y {
        0.0
    } else {
        0.5
    };
    let u = chi * pump.amplitude * length * step / (HBAR * HBAR);
    let ratio = u / kk4;
    if !(ratio.abs() < 1.0) {
        return Err(Error::OutOfRange(format!(
            "chi |A_p| L / (4 k_s k_i) = {ratio} must lie in (-1, 1)"
        )));
    }
    if ratio == 0.0 {
        return SqueezingParameter::new(0.0, 0.0);
    }
    let s = 0.5 * ((kk4.abs() + u.abs()) / (kk4.abs() - u.abs())).ln();
    let sign_flip = if ratio < 0.0 { PI } else { 0.0 };
    SqueezingParameter::new(s, pump.phase - (k_s.re * x + k_i.re * y) + sign_flip)
}
