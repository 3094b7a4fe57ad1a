//! Scenario documents: TOML in, validated parameter sets out.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::greens::{DressedPropagator, Grid, PropagatorMode, MIN_POINTS_PER_WAVELENGTH};
use crate::media::{HuttnerBarnettModel, MediumProfile, Permittivity, Region, SpectralCoupling};
use crate::nonlinear::{Chi2Medium, MismatchConvention, PumpField, ThreeWaveKinematics};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub x_start: f64,
    pub x_end: f64,
    #[serde(default = "one")]
    pub index: f64,
    /// Imaginary part of the permittivity.
    #[serde(default)]
    pub loss: f64,
    #[serde(default = "one")]
    pub g: f64,
}

/// Linear background and optional layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    #[serde(default = "MediumSpec::default_index")]
    pub index: f64,
    /// CSV table `omega, Re eps, Im eps` for the background; replaces `index`.
    #[serde(default)]
    pub epsilon_file: Option<PathBuf>,
    #[serde(default)]
    pub regions: Vec<RegionSpec>,
}

impl MediumSpec {
    fn default_index() -> f64 {
        1.5
    }
}

impl Default for MediumSpec {
    fn default() -> Self {
        Self {
            index: Self::default_index(),
            epsilon_file: None,
            regions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
    /// Angular frequency, rad/s.
    #[serde(default = "PumpSpec::default_omega")]
    pub omega: f64,
}

impl PumpSpec {
    fn default_omega() -> f64 {
        4.65e15
    }
}

impl Default for PumpSpec {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            phase: 0.0,
            omega: Self::default_omega(),
        }
    }
}

/// Signal frequency; the idler takes the rest of the pump energy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    /// Defaults to half the pump frequency.
    #[serde(default)]
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSpec {
    /// chi(2), m/V.
    #[serde(default = "CrystalSpec::default_chi2")]
    pub chi2: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "CrystalSpec::default_length")]
    pub length: f64,
    /// Phase mismatch, 1/m. The pump wave number is chosen to produce it.
    #[serde(default)]
    pub dk: f64,
    #[serde(default)]
    pub convention: MismatchConvention,
}

impl CrystalSpec {
    fn default_chi2() -> f64 {
        1e-12
    }
    fn default_length() -> f64 {
        1e-3
    }
}

impl Default for CrystalSpec {
    fn default() -> Self {
        Self {
            chi2: Self::default_chi2(),
            start: 0.0,
            length: Self::default_length(),
            dk: 0.0,
            convention: MismatchConvention::default(),
        }
    }
}

/// Observation points; both default to just before the crystal with `x > y`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSpec {
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub y: Option<f64>,
}

/// Microscopic oscillator model for the `epsilon` quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub omega0: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default)]
    pub coupling: f64,
    /// Reservoir cutoff; 0 selects `10 omega0`.
    #[serde(default)]
    pub cutoff: f64,
    #[serde(default = "one")]
    pub g: f64,
    /// Probe frequency, rad/s.
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    return self.stop;
                }
                match self.scale {
                    Scale::Linear => self.start + t * (self.stop - self.start),
                    Scale::Log => (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    SpdcProbability,
    Biphoton,
    Squeezing,
    Epsilon,
    Propagator,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::SpdcProbability => "spdc_probability",
            Quantity::Biphoton => "biphoton",
            Quantity::Squeezing => "squeezing",
            Quantity::Epsilon => "epsilon",
            Quantity::Propagator => "propagator",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub quantity: Quantity,
    #[serde(default)]
    pub format: Format,
    pub path: PathBuf,
    #[serde(default)]
    pub method: Method,
}

/// A validated scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub medium: MediumSpec,
    #[serde(default)]
    pub pump: PumpSpec,
    #[serde(default)]
    pub signal: SignalSpec,
    #[serde(default)]
    pub crystal: CrystalSpec,
    #[serde(default)]
    pub observation: ObservationSpec,
    #[serde(default)]
    pub material: Option<MaterialSpec>,
    /// Propagators for `biphoton` and `propagator` outputs.
    #[serde(default)]
    pub propagator: Option<PropagatorMode>,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub output: Vec<OutputSpec>,
    /// Manifest location; defaults to `manifest.json` in the output directory.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
}

/// Parameter paths accepted in `[[sweep]]`.
pub const SWEEPABLE: &[&str] = &[
    "medium.index",
    "pump.amplitude",
    "pump.phase",
    "pump.omega",
    "signal.omega",
    "crystal.chi2",
    "crystal.start",
    "crystal.length",
    "crystal.dk",
    "observation.x",
    "observation.y",
    "material.omega",
    "material.omega0",
    "material.beta",
    "material.coupling",
];

/// Parses and validates a scenario document.
pub fn parse_scenario(document: &str) -> Result<Scenario, CliError> {
    let scenario: Scenario =
        toml::from_str(document).map_err(|e| CliError::Syntax(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("{path}: {msg}"))
}

impl Scenario {
    pub fn validate(&self) -> Result<(), CliError> {
        for (k, axis) in self.sweep.iter().enumerate() {
            let path = format!("sweep[{k}]");
            if axis.points < 2 {
                return Err(invalid(
                    &format!("{path}.points"),
                    format!("need >= 2, got {}", axis.points),
                ));
            }
            if !(axis.start.is_finite() && axis.stop.is_finite()) {
                return Err(invalid(&path, "start and stop must be finite"));
            }
            if axis.scale == Scale::Log && !(axis.start > 0.0 && axis.stop > 0.0) {
                return Err(invalid(&path, "log sweeps need positive start and stop"));
            }
            let mut probe = self.clone();
            probe
                .set(&axis.parameter, axis.start)
                .map_err(|e| invalid(&format!("{path}.parameter"), e))?;
        }
        for (k, out) in self.output.iter().enumerate() {
            if out.quantity == Quantity::Epsilon && self.material.is_none() {
                return Err(invalid(
                    &format!("output[{k}]"),
                    "the epsilon quantity needs a [material] table",
                ));
            }
            if out.path.as_os_str().is_empty() {
                return Err(invalid(&format!("output[{k}].path"), "must not be empty"));
            }
        }
        if !(self.crystal.length > 0.0) {
            return Err(invalid("crystal.length", "must be positive"));
        }
        if !(self.pump.omega > 0.0) {
            return Err(invalid("pump.omega", "must be positive"));
        }
        if let Some(w) = self.signal.omega {
            if !(w > 0.0 && w < self.pump.omega) {
                return Err(invalid(
                    "signal.omega",
                    "must lie strictly between 0 and pump.omega",
                ));
            }
        }
        for (k, r) in self.medium.regions.iter().enumerate() {
            if !(r.x_end > r.x_start) {
                return Err(invalid(
                    &format!("medium.regions[{k}]"),
                    "x_end must exceed x_start",
                ));
            }
        }
        Ok(())
    }

    /// Sets the numeric field named by a dotted path.
    pub fn set(&mut self, path: &str, value: f64) -> Result<(), String> {
        fn material<'a>(s: &'a mut Scenario, path: &str) -> Result<&'a mut MaterialSpec, String> {
            s.material
                .as_mut()
                .ok_or_else(|| format!("`{path}` needs a [material] table"))
        }
        match path {
            "medium.index" => self.medium.index = value,
            "pump.amplitude" => self.pump.amplitude = value,
            "pump.phase" => self.pump.phase = value,
            "pump.omega" => self.pump.omega = value,
            "signal.omega" => self.signal.omega = Some(value),
            "crystal.chi2" => self.crystal.chi2 = value,
            "crystal.start" => self.crystal.start = value,
            "crystal.length" => self.crystal.length = value,
            "crystal.dk" => self.crystal.dk = value,
            "observation.x" => self.observation.x = Some(value),
            "observation.y" => self.observation.y = Some(value),
            "material.omega" => material(self, path)?.omega = value,
            "material.omega0" => material(self, path)?.omega0 = value,
            "material.beta" => material(self, path)?.beta = value,
            "material.coupling" => material(self, path)?.coupling = value,
            other => {
                return Err(format!(
                    "unknown parameter `{other}` (sweepable: {})",
                    SWEEPABLE.join(", ")
                ))
            }
        }
        Ok(())
    }

    /// Points of the cartesian product of all sweep axes, first axis slowest.
    pub fn sweep_points(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::new()];
        for axis in &self.sweep {
            let values = axis.values();
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// The scenario with one sweep point applied.
    pub fn at(&self, point: &[f64]) -> Result<Scenario, CliError> {
        let mut s = self.clone();
        for (axis, &v) in self.sweep.iter().zip(point) {
            s.set(&axis.parameter, v).map_err(|e| invalid("sweep", e))?;
        }
        Ok(s)
    }

    pub fn omega_s(&self) -> f64 {
        self.signal.omega.unwrap_or(0.5 * self.pump.omega)
    }

    pub fn omega_i(&self) -> f64 {
        self.pump.omega - self.omega_s()
    }

    pub fn observation(&self) -> (f64, f64) {
        let start = self.crystal.start;
        let len = self.crystal.length;
        (
            self.observation.x.unwrap_or(start - 0.1 * len),
            self.observation.y.unwrap_or(start - 0.2 * len),
        )
    }

    /// Builds the linear medium, resolving a table file against `base`.
    pub fn linear_medium(&self, base: &Path) -> Result<MediumProfile, CliError> {
        let background = match &self.medium.epsilon_file {
            Some(file) => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                Permittivity::from_csv(&text)?
            }
            None => Permittivity::from_index(self.medium.index),
        };
        let regions = self
            .medium
            .regions
            .iter()
            .map(|r| {
                Region::new(
                    r.x_start,
                    r.x_end,
                    Permittivity::Constant(Complex64::new(r.index * r.index, r.loss)),
                )
                .with_coupling(r.g)
            })
            .collect();
        let label = if self.label.is_empty() {
            "scenario"
        } else {
            &self.label
        };
        Ok(MediumProfile::with_background(label, regions, background)?)
    }

    pub fn material_model(&self) -> Result<Option<(HuttnerBarnettModel, f64, f64)>, CliError> {
        let Some(m) = &self.material else {
            return Ok(None);
        };
        let coupling = if m.coupling == 0.0 {
            SpectralCoupling::Zero
        } else {
            SpectralCoupling::Constant(m.coupling)
        };
        let cutoff = if m.cutoff == 0.0 {
            10.0 * m.omega0
        } else {
            m.cutoff
        };
        let model = HuttnerBarnettModel::new(m.omega0, m.beta, m.rho, coupling, cutoff)?;
        Ok(Some((model, m.g, m.omega)))
    }
}

/// Physics objects for one scenario point.
#[derive(Debug, Clone)]
pub struct Setup {
    pub medium: Chi2Medium,
    pub kin: ThreeWaveKinematics,
    pub x: f64,
    pub y: f64,
}

impl Setup {
    pub fn new(s: &Scenario, base: &Path) -> Result<Self, CliError> {
        let linear = s.linear_medium(base)?;
        let (omega_s, omega_i) = (s.omega_s(), s.omega_i());
        let mid = s.crystal.start + 0.5 * s.crystal.length;
        let wave_number = |omega: f64| -> Result<Complex64, CliError> {
            let eps = linear.epsilon(omega, mid)?;
            let mut n = eps.sqrt();
            if n.re < 0.0 {
                n = -n;
            }
            Ok(n * (omega / crate::constants::SPEED_OF_LIGHT))
        };
        let k_s = wave_number(omega_s)?;
        let k_i = wave_number(omega_i)?;
        let dk = Complex64::new(s.crystal.dk, 0.0);
        let k_p = match s.crystal.convention {
            MismatchConvention::CounterPropagating => dk - k_s - k_i,
            MismatchConvention::CoPropagating => dk + k_s + k_i,
        };
        let pump = PumpField::new(s.pump.amplitude, s.pump.phase, s.pump.omega, k_p)?;
        let kin = ThreeWaveKinematics::new(omega_s, omega_i, k_s, k_i, pump)?;
        let medium = Chi2Medium::new(
            s.crystal.chi2,
            s.crystal.start,
            s.crystal.start + s.crystal.length,
            linear,
        )?;
        let (x, y) = s.observation();
        Ok(Self { medium, kin, x, y })
    }

    /// Propagator for the linear medium in the requested mode. The numeric
    /// grid covers the medium, the crystal and both observation points.
    pub fn propagator(&self, mode: PropagatorMode) -> Result<DressedPropagator, CliError> {
        let linear = self.medium.linear().clone();
        match mode {
            PropagatorMode::Analytic1D => Ok(DressedPropagator::analytic(linear)?),
            PropagatorMode::Numeric1D => {
                let (a, b) = self.medium.extent();
                let mut lo = a.min(self.x).min(self.y);
                let mut hi = b.max(self.x).max(self.y);
                for cut in linear.interfaces() {
                    lo = lo.min(cut);
                    hi = hi.max(cut);
                }
                let pad = 0.05 * (hi - lo).max(f64::EPSILON);
                let (lo, hi) = (lo - pad, hi + pad);
                let omega = self.kin.omega_s.max(self.kin.omega_i);
                let mut k_max = 0.0f64;
                for x in std::iter::once(lo)
                    .chain(linear.interfaces())
                    .chain(std::iter::once(hi))
                {
                    let eps = linear.epsilon(omega, x)?;
                    k_max = k_max.max(eps.sqrt().norm() * omega / crate::constants::SPEED_OF_LIGHT);
                }
                for r in linear.regions() {
                    let eps = r.epsilon.eval(omega)?;
                    k_max = k_max.max(eps.sqrt().norm() * omega / crate::constants::SPEED_OF_LIGHT);
                }
                let wavelength = 2.0 * std::f64::consts::PI / k_max.max(f64::MIN_POSITIVE);
                let h = wavelength / (2.0 * MIN_POINTS_PER_WAVELENGTH);
                let points = (((hi - lo) / h).ceil() as usize + 1).max(2);
                if points > 50_000_000 {
                    return Err(CliError::Invalid(format!(
                        "numeric propagator grid would need {points} points; shrink the geometry"
                    )));
                }
                Ok(DressedPropagator::numeric(
                    linear,
                    Grid::uniform(lo, hi, points)?,
                )?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_fills_defaults() {
        let s = parse_scenario(
            r#"
            [medium]
            index = 1.6
            [pump]
            omega = 3e15
            [[sweep]]
            parameter = "crystal.dk"
            start = -100.0
            stop = 100.0
            points = 5
            "#,
        )
        .unwrap();
        assert_eq!(s.crystal.length, 1e-3);
        assert_eq!(s.omega_s(), 1.5e15);
        assert_eq!(s.sweep_points().len(), 5);
    }

    #[test]
    fn misspelled_key_is_rejected() {
        let err = parse_scenario("[crystal]\nchii2 = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("chii2"), "{err}");
    }

    #[test]
    fn single_point_sweep_is_rejected() {
        let err = parse_scenario(
            "[[sweep]]\nparameter = \"crystal.length\"\nstart = 1.0\nstop = 2.0\npoints = 1\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("sweep[0].points"), "{err}");
    }

    #[test]
    fn unknown_sweep_parameter_is_rejected() {
        let err = parse_scenario(
            "[[sweep]]\nparameter = \"crystal.width\"\nstart = 1.0\nstop = 2.0\npoints = 3\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("crystal.width"));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_scenario("[pump\nomega = 1").unwrap_err();
        assert!(matches!(err, CliError::Syntax(_)));
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn cartesian_product_order() {
        let s = parse_scenario(
            r#"
            [[sweep]]
            parameter = "crystal.length"
            start = 1.0
            stop = 2.0
            points = 2
            [[sweep]]
            parameter = "crystal.dk"
            start = 0.0
            stop = 1.0
            points = 3
            "#,
        )
        .unwrap();
        let pts = s.sweep_points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![1.0, 0.0]);
        assert_eq!(pts[1], vec![1.0, 0.5]);
        assert_eq!(pts[3], vec![2.0, 0.0]);
    }

    #[test]
    fn log_axis_is_geometric() {
        let axis = SweepAxis {
            parameter: "crystal.length".into(),
            start: 1e-4,
            stop: 1e-2,
            points: 3,
            scale: Scale::Log,
        };
        let v = axis.values();
        assert!((v[1] - 1e-3).abs() < 1e-15);
        assert_eq!(v[2], 1e-2);
    }

    #[test]
    fn setup_respects_phase_mismatch() {
        let mut s = parse_scenario("").unwrap();
        s.crystal.dk = 123.0;
        let setup = Setup::new(&s, Path::new(".")).unwrap();
        let dk = crate::nonlinear::phase_mismatch(&setup.kin);
        assert!((dk.re - 123.0).abs() < 1e-6 * setup.kin.k_s.norm());
    }
}
