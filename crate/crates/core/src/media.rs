//! Medium descriptions and the microscopic-to-macroscopic dielectric pipeline.
//!
//! A [`HuttnerBarnettModel`] couples a polarisation oscillator (resonance
//! `omega0`, static polarisability `beta`) to a continuum of reservoir
//! oscillators through the spectral coupling `f(omega)`. Eliminating matter and
//! reservoir yields the response kernel [`gamma_tilde`] and from it the
//! positive-frequency dielectric function [`effective_epsilon`].
//!
//! [`MediumProfile`] places dielectric regions on a 1D axis. Outside every
//! region the geometry factor `g(x)` vanishes and the background permittivity
//! applies (vacuum by default).

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::constants::EPSILON_0;
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_with_breakpoints, QuadOptions};

/// Piecewise-linear table `x -> y` with strictly increasing abscissae.
/// Evaluates to zero outside the tabulated range.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTable<T> {
    xs: Vec<f64>,
    ys: Vec<T>,
}

impl<T> LinearTable<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    pub fn new(xs: Vec<f64>, ys: Vec<T>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Table(format!(
                "{} abscissae but {} ordinates",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::Table("need at least two rows".into()));
        }
        if let Some(w) = xs.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Table(format!(
                "omega must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        Ok(Self { xs, ys })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn eval(&self, x: f64) -> T {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return T::default();
        }
        let idx = self.xs.partition_point(|&v| v <= x);
        if idx >= self.xs.len() {
            return self.ys[self.xs.len() - 1];
        }
        let i = idx - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] * (1.0 - t) + self.ys[i + 1] * t
    }
}

/// Parses a two- or three-column CSV (`omega, re[, im]`); `#` starts a comment.
pub fn parse_spectrum_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 && cols.len() != 3 {
            return Err(Error::Table(format!(
                "line {}: expected 2 or 3 columns, found {}",
                lineno + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Table(format!("line {}: `{s}`: {e}", lineno + 1)))
        };
        let omega = parse(cols[0])?;
        let re = parse(cols[1])?;
        let im = if cols.len() == 3 {
            parse(cols[2])?
        } else {
            0.0
        };
        rows.push((omega, re, im));
    }
    Ok(rows)
}

/// The reservoir coupling `f(omega)`.
#[derive(Clone)]
pub enum SpectralCoupling {
    Zero,
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Table(LinearTable<f64>),
}

impl SpectralCoupling {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_spectrum_csv(text)?;
        let xs = rows.iter().map(|r| r.0).collect();
        let ys = rows.iter().map(|r| r.1).collect();
        Ok(Self::Table(LinearTable::new(xs, ys)?))
    }

    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::Function(f) => f(omega),
            Self::Table(t) => t.eval(omega),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant(c) => *c == 0.0,
            _ => false,
        }
    }

    fn breakpoints(&self) -> &[f64] {
        match self {
            Self::Table(t) => t.nodes(),
            _ => &[],
        }
    }

    /// Returns the coupling multiplied pointwise by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Self::Zero => Self::Zero,
            Self::Constant(c) => Self::Constant(c * factor),
            Self::Function(f) => {
                let f = Arc::clone(f);
                Self::Function(Arc::new(move |w| factor * f(w)))
            }
            Self::Table(t) => Self::Table(LinearTable {
                xs: t.xs.clone(),
                ys: t.ys.iter().map(|y| y * factor).collect(),
            }),
        }
    }
}

impl fmt::Debug for SpectralCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Function(_) => write!(f, "Function(..)"),
            Self::Table(t) => write!(f, "Table({} rows)", t.xs.len()),
        }
    }
}

/// Microscopic oscillator + reservoir parameters.
#[derive(Debug, Clone)]
pub struct HuttnerBarnettModel {
    omega0: f64,
    beta: f64,
    rho: f64,
    coupling_f: SpectralCoupling,
    omega_cutoff: f64,
    eta: f64,
    quad: QuadOptions,
}

impl HuttnerBarnettModel {
    /// `eta` defaults to `1e-6 * omega0^2` (the regulator has units of frequency squared).
    pub fn new(
        omega0: f64,
        beta: f64,
        rho: f64,
        coupling_f: SpectralCoupling,
        omega_cutoff: f64,
    ) -> Result<Self> {
        Self::with_eta(
            omega0,
            beta,
            rho,
            coupling_f,
            omega_cutoff,
            1e-6 * omega0 * omega0,
        )
    }

    pub fn with_eta(
        omega0: f64,
        beta: f64,
        rho: f64,
        coupling_f: SpectralCoupling,
        omega_cutoff: f64,
        eta: f64,
    ) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("omega0", omega0)?;
        positive("beta", beta)?;
        positive("rho", rho)?;
        positive("eta", eta)?;
        if !(omega_cutoff > omega0) || !omega_cutoff.is_finite() {
            return Err(Error::Domain(format!(
                "omega_cutoff ({omega_cutoff}) must exceed omega0 ({omega0})"
            )));
        }
        // Probe f on the integration range; a non-finite value poisons every integral.
        let probes = 257;
        for i in 0..probes {
            let w = omega_cutoff * i as f64 / (probes - 1) as f64;
            if !coupling_f.eval(w).is_finite() {
                return Err(Error::Domain(format!(
                    "coupling f is not finite at omega = {w}"
                )));
            }
        }
        Ok(Self {
            omega0,
            beta,
            rho,
            coupling_f,
            omega_cutoff,
            eta,
            quad: QuadOptions::default(),
        })
    }

    pub fn with_quad_options(mut self, quad: QuadOptions) -> Self {
        self.quad = quad;
        self
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn coupling(&self) -> &SpectralCoupling {
        &self.coupling_f
    }
    pub fn omega_cutoff(&self) -> f64 {
        self.omega_cutoff
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `eps0 * omega0^2 * beta`, the oscillator strength appearing in every formula.
    fn strength(&self) -> f64 {
        EPSILON_0 * self.omega0 * self.omega0 * self.beta
    }
}

/// Scaled resonance `omega0~^2 = omega0^2 + int_0^cutoff |v|^2 / rho^2`, with
/// `v = f * sqrt(eps0 omega0^2 beta rho)`.
pub fn scaled_resonance(model: &HuttnerBarnettModel) -> Result<f64> {
    let w0sq = model.omega0 * model.omega0;
    if model.coupling_f.is_zero() {
        return Ok(w0sq);
    }
    let v_sq_over_f_sq = model.strength() * model.rho;
    let rho_sq = model.rho * model.rho;
    let integral = integrate_with_breakpoints(
        |w| {
            let v = model.coupling_f.eval(w);
            v * v * v_sq_over_f_sq / rho_sq
        },
        0.0,
        model.omega_cutoff,
        model.coupling_f.breakpoints(),
        &model.quad,
    )?;
    Ok(w0sq + integral.value)
}

/// Frequency-domain reservoir kernel
/// `G^(Omega) = int_0^cutoff w^2 f(w)^2 / (w^2 - Omega^2 - i eta) dw`.
pub fn reservoir_kernel(model: &HuttnerBarnettModel, omega: f64) -> Result<Complex64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!(
            "Omega must be non-negative, got {omega}"
        )));
    }
    if model.coupling_f.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let cutoff = model.omega_cutoff;
    let eta = model.eta;
    if (omega * omega - cutoff * cutoff).abs() <= eta {
        warn!(
            "reservoir pole at Omega = {omega:e} sits within eta of the cutoff {cutoff:e}; \
             the truncated spectrum distorts the kernel"
        );
    }
    let shift = Complex64::new(omega * omega, eta);
    let integrand = |w: f64| {
        let f = model.coupling_f.eval(w);
        Complex64::new(w * w * f * f, 0.0) / (Complex64::new(w * w, 0.0) - shift)
    };
    let opts = &model.quad;
    let bps = model.coupling_f.breakpoints();
    if omega > 0.0 && omega < cutoff {
        // Fold a symmetric window around the near-pole so the odd (principal
        // value) part cancels before it reaches the quadrature.
        let half = 0.5 * omega.min(cutoff - omega);
        let left = integrate_with_breakpoints(integrand, 0.0, omega - half, bps, opts)?;
        let folded = integrate(
            |t: f64| integrand(omega + t) + integrand(omega - t),
            0.0,
            half,
            opts,
        )?;
        let right = integrate_with_breakpoints(integrand, omega + half, cutoff, bps, opts)?;
        Ok(left.value + folded.value + right.value)
    } else {
        let mut cuts = bps.to_vec();
        cuts.push(omega);
        Ok(integrate_with_breakpoints(integrand, 0.0, cutoff, &cuts, opts)?.value)
    }
}

/// Response kernel `Gamma~(Omega) = [(w0~^2 - Omega^2)/(eps0 w0^2 beta) - G^(Omega)/rho]^-1`.
pub fn gamma_tilde(model: &HuttnerBarnettModel, omega: f64) -> Result<Complex64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!(
            "Omega must be non-negative, got {omega}"
        )));
    }
    let w0t_sq = scaled_resonance(model)?;
    let kernel = reservoir_kernel(model, omega)?;
    let strength = model.strength();
    let oscillator = (w0t_sq - omega * omega) / strength;
    let denom = Complex64::new(oscillator, 0.0) - kernel / model.rho;
    let scale = (w0t_sq + omega * omega) / strength + kernel.norm() / model.rho;
    if denom.norm() < 1e-14 * scale {
        return Err(Error::ResonanceSingularity { omega });
    }
    Ok(denom.inv())
}

/// Positive-frequency effective permittivity `1 + (g / eps0) Gamma~(Omega)`.
pub fn effective_epsilon(
    model: &HuttnerBarnettModel,
    g_value: f64,
    omega: f64,
) -> Result<Complex64> {
    if !(g_value >= 0.0) || !g_value.is_finite() {
        return Err(Error::Domain(format!(
            "g must be a finite non-negative value, got {g_value}"
        )));
    }
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!(
            "Omega must be non-negative, got {omega}"
        )));
    }
    if g_value == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(1.0 + gamma_tilde(model, omega)? * (g_value / EPSILON_0))
}

/// Negative-frequency branch, `eps_-(Omega) = conj(eps_+(Omega))`.
pub fn effective_epsilon_negative(
    model: &HuttnerBarnettModel,
    g_value: f64,
    omega: f64,
) -> Result<Complex64> {
    effective_epsilon(model, g_value, omega).map(|e| e.conj())
}

/// A complex permittivity as a function of angular frequency.
#[derive(Clone)]
pub enum Permittivity {
    Constant(Complex64),
    Function(Arc<dyn Fn(f64) -> Complex64 + Send + Sync>),
    Table(LinearTable<Complex64>),
    HuttnerBarnett {
        model: Arc<HuttnerBarnettModel>,
        g: f64,
    },
}

impl Permittivity {
    pub fn vacuum() -> Self {
        Self::Constant(Complex64::new(1.0, 0.0))
    }

    /// Real refractive index `n`, i.e. `eps = n^2`.
    pub fn from_index(n: f64) -> Self {
        Self::Constant(Complex64::new(n * n, 0.0))
    }

    pub fn function(f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_spectrum_csv(text)?;
        let xs = rows.iter().map(|r| r.0).collect();
        let ys = rows.iter().map(|r| Complex64::new(r.1, r.2)).collect();
        Ok(Self::Table(LinearTable::new(xs, ys)?))
    }

    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        let eps = match self {
            Self::Constant(e) => *e,
            Self::Function(f) => f(omega),
            Self::Table(t) => t.eval(omega),
            Self::HuttnerBarnett { model, g } => effective_epsilon(model, *g, omega)?,
        };
        if eps.im < 0.0 && omega > 0.0 {
            warn!(
                "Im eps = {:e} < 0 at omega = {omega:e}: medium shows gain",
                eps.im
            );
        }
        Ok(eps)
    }

    /// Refractive index on the branch `Re n >= 0`.
    pub fn index(&self, omega: f64) -> Result<Complex64> {
        let n = self.eval(omega)?.sqrt();
        Ok(if n.re < 0.0 { -n } else { n })
    }
}

impl fmt::Debug for Permittivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(e) => write!(f, "Constant({e})"),
            Self::Function(_) => write!(f, "Function(..)"),
            Self::Table(t) => write!(f, "Table({} rows)", t.xs.len()),
            Self::HuttnerBarnett { g, .. } => write!(f, "HuttnerBarnett {{ g: {g} }}"),
        }
    }
}

/// One dielectric slab `[x_start, x_end)`.
#[derive(Debug, Clone)]
pub struct Region {
    pub x_start: f64,
    pub x_end: f64,
    pub epsilon: Permittivity,
    /// Geometry factor `g` inside the slab.
    pub coupling: f64,
}

impl Region {
    pub fn new(x_start: f64, x_end: f64, epsilon: Permittivity) -> Self {
        Self {
            x_start,
            x_end,
            epsilon,
            coupling: 1.0,
        }
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.coupling = g;
        self
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_start && x < self.x_end
    }
}

/// Layered medium on a 1D axis.
#[derive(Debug, Clone)]
pub struct MediumProfile {
    regions: Vec<Region>,
    background: Permittivity,
    label: String,
}

impl MediumProfile {
    pub fn new(label: impl Into<String>, regions: Vec<Region>) -> Result<Self> {
        Self::with_background(label, regions, Permittivity::vacuum())
    }

    pub fn with_background(
        label: impl Into<String>,
        mut regions: Vec<Region>,
        background: Permittivity,
    ) -> Result<Self> {
        for r in &regions {
            if !(r.x_start < r.x_end) || !r.x_start.is_finite() || !r.x_end.is_finite() {
                return Err(Error::Domain(format!(
                    "region [{}, {}) must have finite x_start < x_end",
                    r.x_start, r.x_end
                )));
            }
            if !(r.coupling >= 0.0) {
                return Err(Error::Domain(format!(
                    "geometry factor must be >= 0, got {}",
                    r.coupling
                )));
            }
        }
        regions.sort_by(|a, b| a.x_start.total_cmp(&b.x_start));
        if let Some(w) = regions.windows(2).find(|w| w[1].x_start < w[0].x_end) {
            return Err(Error::Domain(format!(
                "regions [{}, {}) and [{}, {}) overlap",
                w[0].x_start, w[0].x_end, w[1].x_start, w[1].x_end
            )));
        }
        Ok(Self {
            regions,
            background,
            label: label.into(),
        })
    }

    /// A medium filling the whole axis with a single permittivity.
    pub fn homogeneous(label: impl Into<String>, epsilon: Permittivity) -> Self {
        Self {
            regions: Vec::new(),
            background: epsilon,
            label: label.into(),
        }
    }

    pub fn vacuum() -> Self {
        Self::homogeneous("vacuum", Permittivity::vacuum())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn background(&self) -> &Permittivity {
        &self.background
    }

    pub fn is_homogeneous(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region_at(&self, x: f64) -> Option<&Region> {
        self.regions.iter().find(|r| r.contains(x))
    }

    /// Geometry factor `g(x)`: zero outside every region.
    pub fn g(&self, x: f64) -> f64 {
        self.region_at(x).map_or(0.0, |r| r.coupling)
    }

    pub fn epsilon(&self, omega: f64, x: f64) -> Result<Complex64> {
        match self.region_at(x) {
            Some(r) => r.epsilon.eval(omega),
            None => self.background.eval(omega),
        }
    }

    /// Sorted, de-duplicated interface positions.
    pub fn interfaces(&self) -> Vec<f64> {
        let mut cuts: Vec<f64> = self
            .regions
            .iter()
            .flat_map(|r| [r.x_start, r.x_end])
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts
    }

    /// Indices of regions with `Im eps < 0` at `omega` (gain).
    pub fn gain_regions(&self, omega: f64) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (i, r) in self.regions.iter().enumerate() {
            if r.epsilon.eval(omega)?.im < 0.0 {
                out.push(i);
            }
        }
        Ok(out)
    }
}

/// Outcome of one Gaussian-integral comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCheck {
    pub quadrature: f64,
    pub closed_form: f64,
    pub relative_error: f64,
}

const GAUSSIAN_TOLERANCE: f64 = 1e-6;

/// Integrates `exp(-x.A.x/2 - b.x)` numerically over a +-10 sigma box and
/// compares with `sqrt((2 pi)^n / det A) exp(b.A^-1.b / 2)`.
pub fn gaussian_identity_check(matrix: &[Vec<f64>], shift: &[f64]) -> Result<GaussianCheck> {
    let n = matrix.len();
    if !(1..=3).contains(&n) {
        return Err(Error::Domain(format!("dimension must be 1..=3, got {n}")));
    }
    if shift.len() != n || matrix.iter().any(|row| row.len() != n) {
        return Err(Error::Domain("matrix and shift dimensions disagree".into()));
    }
    let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
    let asym = (&a - a.transpose()).abs().max();
    if asym > 1e-12 * a.abs().max() {
        return Err(Error::Domain("matrix is not symmetric".into()));
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    let inv = chol.inverse();
    let det = chol.determinant();
    let b = DVector::from_column_slice(shift);
    let mean = -(&inv * &b);
    let exponent = 0.5 * b.dot(&(&inv * &b));
    let closed_form = ((2.0 * std::f64::consts::PI).powi(n as i32) / det).sqrt() * exponent.exp();

    let bounds: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let sigma = inv[(i, i)].sqrt();
            (mean[i] - 10.0 * sigma, mean[i] + 10.0 * sigma)
        })
        .collect();
    let opts = QuadOptions::default().with_rel_tol(1e-9).with_abs_tol(0.0);
    let failure: Cell<Option<Error>> = Cell::new(None);
    let mut point = vec![0.0; n];
    let quadrature = nested_gaussian(&a, &b, &bounds, &mut point, 0, &opts, &failure)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(GaussianCheck {
        quadrature,
        closed_form,
        relative_error: (quadrature - closed_form).abs() / closed_form.abs(),
    })
}

fn nested_gaussian(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    bounds: &[(f64, f64)],
    point: &mut Vec<f64>,
    depth: usize,
    opts: &QuadOptions,
    failure: &Cell<Option<Error>>,
) -> Result<f64> {
    let n = bounds.len();
    let (lo, hi) = bounds[depth];
    let result = integrate(
        |x: f64| {
            point[depth] = x;
            if depth + 1 == n {
                let mut quad = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        quad += point[i] * a[(i, j)] * point[j];
                    }
                }
                let lin: f64 = (0..n).map(|i| b[i] * point[i]).sum();
                (-0.5 * quad - lin).exp()
            } else {
                match nested_gaussian(a, b, bounds, point, depth + 1, opts, failure) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.set(Some(e));
                        0.0
                    }
                }
            }
        },
        lo,
        hi,
        opts,
    )?;
    Ok(result.value)
}

/// `true` when the quadrature reproduces the closed form to 1e-6 relative.
pub fn gaussian_identity_selftest(matrix: &[Vec<f64>], shift: &[f64]) -> Result<bool> {
    Ok(gaussian_identity_check(matrix, shift)?.relative_error < GAUSSIAN_TOLERANCE)
}
