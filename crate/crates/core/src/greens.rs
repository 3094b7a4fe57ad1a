//! Dressed photon propagators in one dimension.
//!
//! All propagators here are frequency-domain Green functions of
//! `[d^2/dx^2 + k0^2 n^2(x)] G = delta(x - y)` with outgoing radiation
//! conditions. The harmonic `exp(-i omega t)` factor is not part of `G`.
//!
//! * [`analytic_1d_propagator`]: closed form for a homogeneous medium.
//! * [`numeric_1d_propagator`]: layered media, built from the left- and
//!   right-outgoing homogeneous solutions and their Wronskian.
//! * [`helmholtz_residual`]: finite-difference check of a sampled propagator.
//! * [`feynman_propagator`]: the regulated oscillator propagator `D_F(tau, omega)`.

use std::sync::Arc;

use log::warn;
use num_complex::Complex64;

use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::media::{MediumProfile, Permittivity};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Minimum grid density (points per local wavelength) for numeric propagators.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 20.0;

/// Allowed relative drift of the Wronskian along the validation grid.
pub const WRONSKIAN_TOLERANCE: f64 = 1e-8;

/// Dispersion relation `k(omega) = (omega / c) n(omega)` with `Re n >= 0`.
#[derive(Clone)]
pub struct WaveVectorModel {
    dispersion: Arc<dyn Fn(f64) -> Result<Complex64> + Send + Sync>,
}

impl std::fmt::Debug for WaveVectorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("WaveVectorModel(..)")
    }
}

impl WaveVectorModel {
    pub fn from_permittivity(epsilon: Permittivity) -> Self {
        Self {
            dispersion: Arc::new(move |omega| {
                let n = epsilon.index(omega)?;
                Ok(n * (omega / SPEED_OF_LIGHT))
            }),
        }
    }

    pub fn vacuum() -> Self {
        Self::from_permittivity(Permittivity::vacuum())
    }

    /// Constant real refractive index.
    pub fn from_index(n: f64) -> Self {
        Self::from_permittivity(Permittivity::from_index(n))
    }

    /// Arbitrary dispersion, given directly as `omega -> k`.
    pub fn from_fn(f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self {
            dispersion: Arc::new(move |omega| Ok(f(omega))),
        }
    }

    pub fn k(&self, omega: f64) -> Result<Complex64> {
        let k = (self.dispersion)(omega)?;
        if k.im < 0.0 {
            warn!("Im k = {:e} < 0 at omega = {omega:e}: active medium", k.im);
        }
        Ok(k)
    }
}

fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Homogeneous-medium propagator for a given wave number.
pub fn homogeneous_green(k: Complex64, x: f64, y: f64) -> Result<Complex64> {
    if k.norm() < 1e-30 {
        return Err(Error::DegenerateWavenumber { k_abs: k.norm() });
    }
    let d = x - y;
    let forward = (I * k * d).exp() * heaviside(d);
    let backward = (-I * k * d).exp() * heaviside(-d);
    Ok((forward + backward) / (2.0 * I * k))
}

/// `(1 / 2ik) [Theta(x-y) e^{ik(x-y)} + Theta(y-x) e^{-ik(x-y)}]`, `Theta(0) = 1/2`.
pub fn analytic_1d_propagator(
    omega: f64,
    x: f64,
    y: f64,
    k_model: &WaveVectorModel,
) -> Result<Complex64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "omega must be positive, got {omega}"
        )));
    }
    homogeneous_green(k_model.k(omega)?, x, y)
}

/// Sorted sample positions for numeric propagators and residual checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("grid needs at least two points".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("grid points must be finite".into()));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        if points.len() < 2 {
            return Err(Error::Domain(
                "grid needs at least two distinct points".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn uniform(xmin: f64, xmax: f64, points: usize) -> Result<Self> {
        if points < 2 || !(xmax > xmin) {
            return Err(Error::Domain(format!(
                "uniform grid needs xmin < xmax and >= 2 points (got [{xmin}, {xmax}], {points})"
            )));
        }
        let h = (xmax - xmin) / (points - 1) as f64;
        let mut pts: Vec<f64> = (0..points).map(|i| xmin + h * i as f64).collect();
        pts[points - 1] = xmax;
        Ok(Self { points: pts })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.min() && x <= self.max()
    }
}

/// Homogeneous slab of the layered decomposition. The field inside is
/// `a e^{ik(x-r)} + b e^{-ik(x-r)}` with reference point `r`.
#[derive(Debug, Clone, Copy)]
struct Zone {
    k: Complex64,
    reference: f64,
}

#[derive(Debug, Clone, Copy)]
struct Amplitudes {
    a: Complex64,
    b: Complex64,
}

impl Zone {
    fn value(&self, amp: Amplitudes, x: f64) -> (Complex64, Complex64) {
        let phase = (I * self.k * (x - self.reference)).exp();
        let fwd = amp.a * phase;
        let bwd = amp.b / phase;
        (fwd + bwd, I * self.k * (fwd - bwd))
    }

    /// Amplitudes matching value `u` and derivative `du` at `x`.
    fn match_at(&self, x: f64, u: Complex64, du: Complex64) -> Amplitudes {
        let phase = (I * self.k * (x - self.reference)).exp();
        let ratio = du / (I * self.k);
        Amplitudes {
            a: (u + ratio) / (2.0 * phase),
            b: (u - ratio) * phase / 2.0,
        }
    }
}

/// Outgoing homogeneous solutions of a layered medium at one frequency.
///
/// `u_minus` radiates to the left (`~ e^{-ikx}` as x -> -inf), `u_plus` to the
/// right (`~ e^{ikx}` as x -> +inf). Their Wronskian is constant in x.
#[derive(Debug, Clone)]
pub struct LayeredSolution {
    omega: f64,
    interfaces: Vec<f64>,
    zones: Vec<Zone>,
    minus: Vec<Amplitudes>,
    plus: Vec<Amplitudes>,
    wronskian: Complex64,
}

impl LayeredSolution {
    pub fn new(medium: &MediumProfile, omega: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::Domain(format!(
                "omega must be positive, got {omega}"
            )));
        }
        let interfaces = medium.interfaces();
        let k0 = omega / SPEED_OF_LIGHT;
        let wave_number = |eps: Complex64| -> Result<Complex64> {
            let mut n = eps.sqrt();
            if n.re < 0.0 {
                n = -n;
            }
            let k = n * k0;
            if k.norm() < 1e-30 {
                return Err(Error::DegenerateWavenumber { k_abs: k.norm() });
            }
            if k.im < 0.0 {
                warn!("Im k = {:e} < 0 at omega = {omega:e}: active layer", k.im);
            }
            Ok(k)
        };

        let m = interfaces.len();
        let mut zones = Vec::with_capacity(m + 1);
        for j in 0..=m {
            // Probe the permittivity at a point strictly inside the zone.
            let probe = match (j, m) {
                (_, 0) => 0.0,
                (0, _) => interfaces[0] - 1.0,
                (j, m) if j == m => interfaces[m - 1] + 1.0,
                (j, _) => 0.5 * (interfaces[j - 1] + interfaces[j]),
            };
            let reference = match (j, m) {
                (_, 0) => 0.0,
                (0, _) => interfaces[0],
                (j, _) => interfaces[j - 1],
            };
            zones.push(Zone {
                k: wave_number(medium.epsilon(omega, probe)?)?,
                reference,
            });
        }

        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);

        let mut minus = vec![Amplitudes { a: zero, b: zero }; m + 1];
        minus[0] = Amplitudes { a: zero, b: one };
        for j in 0..m {
            let (u, du) = zones[j].value(minus[j], interfaces[j]);
            minus[j + 1] = zones[j + 1].match_at(interfaces[j], u, du);
        }

        let mut plus = vec![Amplitudes { a: zero, b: zero }; m + 1];
        plus[m] = Amplitudes { a: one, b: zero };
        for j in (0..m).rev() {
            let (u, du) = zones[j + 1].value(plus[j + 1], interfaces[j]);
            plus[j] = zones[j].match_at(interfaces[j], u, du);
        }

        let mut sol = Self {
            omega,
            interfaces,
            zones,
            minus,
            plus,
            wronskian: zero,
        };
        let x_ref = sol.interfaces.first().copied().unwrap_or(0.0);
        let (w, scale) = sol.wronskian_parts(x_ref);
        if w.norm() < 1e-12 * scale {
            return Err(Error::DegenerateWronskian {
                omega,
                wronskian: w.norm(),
            });
        }
        sol.wronskian = w;
        Ok(sol)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    fn zone_index(&self, x: f64) -> usize {
        self.interfaces.partition_point(|&b| b <= x)
    }

    pub fn u_minus(&self, x: f64) -> (Complex64, Complex64) {
        let j = self.zone_index(x);
        self.zones[j].value(self.minus[j], x)
    }

    pub fn u_plus(&self, x: f64) -> (Complex64, Complex64) {
        let j = self.zone_index(x);
        self.zones[j].value(self.plus[j], x)
    }

    fn wronskian_parts(&self, x: f64) -> (Complex64, f64) {
        let (um, dum) = self.u_minus(x);
        let (up, dup) = self.u_plus(x);
        let lhs = um * dup;
        let rhs = dum * up;
        (lhs - rhs, lhs.norm() + rhs.norm())
    }

    /// `u_- u_+' - u_-' u_+` evaluated at `x`.
    pub fn wronskian_at(&self, x: f64) -> Complex64 {
        self.wronskian_parts(x).0
    }

    pub fn wronskian(&self) -> Complex64 {
        self.wronskian
    }

    /// Local wave number at `x`.
    pub fn k_at(&self, x: f64) -> Complex64 {
        self.zones[self.zone_index(x)].k
    }

    /// `G(x, y) = u_-(min) u_+(max) / W`.
    pub fn green(&self, x: f64, y: f64) -> Complex64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        self.u_minus(lo).0 * self.u_plus(hi).0 / self.wronskian
    }

    /// Maximum relative deviation of the Wronskian over `grid`.
    pub fn wronskian_drift(&self, grid: &Grid) -> f64 {
        let w0 = self.wronskian;
        grid.points()
            .iter()
            .map(|&x| (self.wronskian_at(x) - w0).norm() / w0.norm())
            .fold(0.0, f64::max)
    }

    /// Checks grid coverage, sampling density and Wronskian constancy.
    pub fn validate_grid(&self, grid: &Grid) -> Result<()> {
        if let (Some(&first), Some(&last)) = (self.interfaces.first(), self.interfaces.last()) {
            if !(grid.min() < first && grid.max() > last) {
                return Err(Error::Domain(format!(
                    "grid [{}, {}] must extend past the medium [{first}, {last}] on both sides",
                    grid.min(),
                    grid.max()
                )));
            }
        }
        let mut worst = f64::INFINITY;
        for w in grid.points().windows(2) {
            let h = w[1] - w[0];
            let k = self
                .k_at(0.5 * (w[0] + w[1]))
                .norm()
                .max(self.k_at(w[0]).norm());
            let wavelength = 2.0 * std::f64::consts::PI / k;
            worst = worst.min(wavelength / h);
        }
        if worst < MIN_POINTS_PER_WAVELENGTH {
            return Err(Error::Discretisation {
                points_per_wavelength: worst,
                required: MIN_POINTS_PER_WAVELENGTH,
            });
        }
        let drift = self.wronskian_drift(grid);
        if !(drift <= WRONSKIAN_TOLERANCE) {
            return Err(Error::WronskianDrift { drift });
        }
        Ok(())
    }
}

/// Outgoing-wave propagator of a layered medium, validated on `grid`.
pub fn numeric_1d_propagator(
    omega: f64,
    x: f64,
    y: f64,
    medium: &MediumProfile,
    grid: &Grid,
) -> Result<Complex64> {
    if !grid.contains(x) || !grid.contains(y) {
        return Err(Error::Domain(format!(
            "points ({x}, {y}) lie outside the grid [{}, {}]",
            grid.min(),
            grid.max()
        )));
    }
    let sol = LayeredSolution::new(medium, omega)?;
    sol.validate_grid(grid)?;
    Ok(sol.green(x, y))
}

/// How a [`DressedPropagator`] evaluates `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PropagatorMode {
    #[serde(rename = "analytic", alias = "Analytic1D")]
    Analytic1D,
    #[serde(rename = "numeric", alias = "Numeric1D")]
    Numeric1D,
}

/// Tensor component carried as metadata; only the scalar diagonal is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorIndices {
    pub mu: u8,
    pub nu: u8,
}

impl Default for TensorIndices {
    fn default() -> Self {
        Self { mu: 2, nu: 2 }
    }
}

/// Propagator of a medium in either evaluation mode.
#[derive(Debug, Clone)]
pub struct DressedPropagator {
    medium: MediumProfile,
    mode: PropagatorMode,
    grid: Option<Grid>,
    indices: TensorIndices,
}

impl DressedPropagator {
    /// Closed form; the medium must be homogeneous.
    pub fn analytic(medium: MediumProfile) -> Result<Self> {
        if !medium.is_homogeneous() {
            return Err(Error::NotHomogeneous(format!(
                "`{}` has {} regions; use the numeric mode",
                medium.label(),
                medium.regions().len()
            )));
        }
        Ok(Self {
            medium,
            mode: PropagatorMode::Analytic1D,
            grid: None,
            indices: TensorIndices::default(),
        })
    }

    pub fn numeric(medium: MediumProfile, grid: Grid) -> Result<Self> {
        if let (Some(first), Some(last)) = (medium.interfaces().first(), medium.interfaces().last())
        {
            if !(grid.min() < *first && grid.max() > *last) {
                return Err(Error::Domain(format!(
                    "grid [{}, {}] must pad the medium [{first}, {last}] on both sides",
                    grid.min(),
                    grid.max()
                )));
            }
        }
        Ok(Self {
            medium,
            mode: PropagatorMode::Numeric1D,
            grid: Some(grid),
            indices: TensorIndices::default(),
        })
    }

    pub fn with_indices(mut self, indices: TensorIndices) -> Self {
        self.indices = indices;
        self
    }

    pub fn mode(&self) -> PropagatorMode {
        self.mode
    }

    pub fn medium(&self) -> &MediumProfile {
        &self.medium
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn indices(&self) -> TensorIndices {
        self.indices
    }

    /// Fixes the frequency, precomputing whatever the mode needs.
    pub fn at_frequency(&self, omega: f64) -> Result<FrequencyPropagator> {
        match self.mode {
            PropagatorMode::Analytic1D => {
                let k = WaveVectorModel::from_permittivity(self.medium.background().clone())
                    .k(omega)?;
                if !(omega > 0.0) {
                    return Err(Error::Domain(format!(
                        "omega must be positive, got {omega}"
                    )));
                }
                if k.norm() < 1e-30 {
                    return Err(Error::DegenerateWavenumber { k_abs: k.norm() });
                }
                Ok(FrequencyPropagator::Homogeneous { k })
            }
            PropagatorMode::Numeric1D => {
                let sol = LayeredSolution::new(&self.medium, omega)?;
                if let Some(grid) = &self.grid {
                    sol.validate_grid(grid)?;
                }
                Ok(FrequencyPropagator::Layered(Box::new(sol)))
            }
        }
    }

    pub fn evaluate(&self, omega: f64, x: f64, y: f64) -> Result<Complex64> {
        if let Some(grid) = &self.grid {
            if !grid.contains(x) || !grid.contains(y) {
                return Err(Error::Domain(format!(
                    "points ({x}, {y}) lie outside the grid [{}, {}]",
                    grid.min(),
                    grid.max()
                )));
            }
        }
        Ok(self.at_frequency(omega)?.green(x, y))
    }
}

/// A propagator at fixed frequency; cheap to evaluate repeatedly.
#[derive(Debug, Clone)]
pub enum FrequencyPropagator {
    Homogeneous { k: Complex64 },
    Layered(Box<LayeredSolution>),
}

impl FrequencyPropagator {
    pub fn green(&self, x: f64, y: f64) -> Complex64 {
        match self {
            Self::Homogeneous { k } => {
                let d = x - y;
                let forward = (I * k * d).exp() * heaviside(d);
                let backward = (-I * k * d).exp() * heaviside(-d);
                (forward + backward) / (2.0 * I * k)
            }
            Self::Layered(sol) => sol.green(x, y),
        }
    }
}

/// Propagator values on a grid at fixed source position.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGreen {
    pub xs: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl SampledGreen {
    pub fn sample(propagator: &FrequencyPropagator, grid: &Grid, y: f64) -> Self {
        let xs = grid.points().to_vec();
        let values = xs.iter().map(|&x| propagator.green(x, y)).collect();
        Self { xs, values }
    }
}

/// Result of [`helmholtz_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// `max |G'' + k^2 G| / max |k^2 G|` over interior points.
    pub residual: f64,
    /// `G'(y+) - G'(y-)`, when the grid brackets `y` with three points per side.
    pub derivative_jump: Option<f64>,
}

impl ResidualReport {
    pub fn jump_ok(&self) -> bool {
        self.derivative_jump.is_some_and(|j| (j - 1.0).abs() < 1e-3)
    }
}

fn quadratic_slope(xs: [f64; 3], ys: [Complex64; 3], at: f64) -> Complex64 {
    // Derivative of the Lagrange interpolant through three points.
    let [x0, x1, x2] = xs;
    let [y0, y1, y2] = ys;
    y0 * ((2.0 * at - x1 - x2) / ((x0 - x1) * (x0 - x2)))
        + y1 * ((2.0 * at - x0 - x2) / ((x1 - x0) * (x1 - x2)))
        + y2 * ((2.0 * at - x0 - x1) / ((x2 - x0) * (x2 - x1)))
}

/// Finite-difference residual of a sampled Green function against the 1D
/// Helmholtz operator, excluding the source neighbourhood and stencils that
/// straddle a material interface.
pub fn helmholtz_residual(
    green: &SampledGreen,
    medium: &MediumProfile,
    omega: f64,
    y: f64,
) -> Result<ResidualReport> {
    let xs = &green.xs;
    let g = &green.values;
    if xs.len() != g.len() || xs.len() < 3 {
        return Err(Error::Domain(
            "sampled Green function needs >= 3 matching points".into(),
        ));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "sample positions must be strictly increasing".into(),
        ));
    }
    let k0 = omega / SPEED_OF_LIGHT;
    let interfaces = medium.interfaces();
    let mut worst = 0.0_f64;
    let mut norm = 0.0_f64;
    for i in 1..xs.len() - 1 {
        let (hm, hp) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
        if (xs[i] - y).abs() < 2.0 * hm.max(hp) {
            continue;
        }
        if interfaces.iter().any(|&b| b >= xs[i - 1] && b <= xs[i + 1]) {
            continue;
        }
        let d2 = ((g[i + 1] - g[i]) / hp - (g[i] - g[i - 1]) / hm) * (2.0 / (hp + hm));
        let k2g = g[i] * (medium.epsilon(omega, xs[i])? * (k0 * k0));
        worst = worst.max((d2 + k2g).norm());
        norm = norm.max(k2g.norm());
    }
    let residual = if norm > 0.0 {
        worst / norm
    } else {
        f64::INFINITY
    };

    let right = xs.partition_point(|&x| x < y);
    let left_end = xs.partition_point(|&x| x <= y);
    let derivative_jump = if right + 3 <= xs.len() && left_end >= 3 {
        let r = [right, right + 1, right + 2];
        let l = [left_end - 3, left_end - 2, left_end - 1];
        let slope = |idx: [usize; 3]| {
            quadratic_slope(
                [xs[idx[0]], xs[idx[1]], xs[idx[2]]],
                [g[idx[0]], g[idx[1]], g[idx[2]]],
                y,
            )
        };
        Some((slope(r) - slope(l)).re)
    } else {
        None
    };
    Ok(ResidualReport {
        residual,
        derivative_jump,
    })
}

/// `D_F(tau, omega) = int dOmega/2pi e^{i Omega tau} / (omega^2 - Omega^2 - i eta)`
/// in closed form: `(i / 2 Omega0) e^{-i Omega0 |tau|}`, `Omega0 = sqrt(omega^2 - i eta)`.
pub fn feynman_propagator(tau: f64, omega: f64, eta: f64) -> Result<Complex64> {
    if !(omega > 0.0) || !(eta > 0.0) {
        return Err(Error::Domain(format!(
            "need omega > 0 and eta > 0 (got omega = {omega}, eta = {eta})"
        )));
    }
    let pole = Complex64::new(omega * omega, -eta).sqrt();
    Ok(I / (2.0 * pole) * (-I * pole * tau.abs()).exp())
}
