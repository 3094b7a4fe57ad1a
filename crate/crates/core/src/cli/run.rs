use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::scenario::{Format, Method, Quantity, Scenario, Setup};
use super::CliError;
use crate::constants::UNITS_CONVENTION;
use crate::diagrams::{
    enumerate_order, evaluate_amplitude, symmetry_factor, Coordinate, Diagram, Endpoint,
    EvaluationContext, Mode, Process,
};
use crate::greens::{DressedPropagator, PropagatorMode};
use crate::media::{effective_epsilon, HuttnerBarnettModel};
use crate::nonlinear::{
    biphoton_1d_analytic, biphoton_numeric, spdc_probability, BIPHOTON_REDUCTION_NOTE,
};
use crate::squeezing::squeezing_1d_closed_form;

/// Rectangular numeric output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub quantity: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    #[serde(skip)]
    pub notes: Vec<String>,
}

impl Table {
    fn new(quantity: &str, columns: Vec<String>) -> Self {
        Self {
            quantity: quantity.to_string(),
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# chi2path {}\n# quantity: {}\n# units: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.quantity,
            UNITS_CONVENTION
        );
        for note in &self.notes {
            out.push_str(&format!("# {note}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "quantity": self.quantity,
            "units": UNITS_CONVENTION,
            "notes": self.notes,
            "columns": self.columns,
            "rows": self.rows,
        })
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// `P = L^2 sinc^2(L dk / 2)` over an `L x dk` grid; `P_normalised = P / L^2`.
pub fn spdc_table(lengths: &[f64], mismatches: &[f64]) -> Table {
    let mut t = Table::new("spdc_probability", cols(&["L", "dk", "P", "P_normalised"]));
    t.notes.push("P_normalised = P / L^2".into());
    for &l in lengths {
        for &dk in mismatches {
            let p = spdc_probability(l, dk);
            let norm = if l == 0.0 { 1.0 } else { p / (l * l) };
            t.rows.push(vec![l, dk, p, norm]);
        }
    }
    t
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Peak and first minima either side of it along `dk` at the peak length.
pub fn spdc_summary(t: &Table) -> serde_json::Value {
    let (Some(ls), Some(dks), Some(ps)) = (t.column("L"), t.column("dk"), t.column("P")) else {
        return serde_json::Value::Null;
    };
    let Some(peak) = (0..ps.len()).max_by(|&a, &b| ps[a].total_cmp(&ps[b])) else {
        return serde_json::Value::Null;
    };
    let row: Vec<usize> = (0..ls.len()).filter(|&j| ls[j] == ls[peak]).collect();
    let pos = row.iter().position(|&j| j == peak).unwrap_or(0);
    let is_min = |k: usize| {
        let p = ps[row[k]];
        k > 0 && k + 1 < row.len() && p <= ps[row[k - 1]] && p <= ps[row[k + 1]]
    };
    let left = (1..pos).rev().find(|&k| is_min(k)).map(|k| dks[row[k]]);
    let right = (pos + 1..row.len())
        .find(|&k| is_min(k))
        .map(|k| dks[row[k]]);
    serde_json::json!({
        "peak": { "L": ls[peak], "dk": dks[peak], "P": ps[peak] },
        "first_zeros_dk": [left, right],
    })
}

/// `epsilon(omega)` of the oscillator model; rows evaluated in parallel.
pub fn epsilon_table(
    model: &HuttnerBarnettModel,
    g: f64,
    omegas: &[f64],
) -> Result<Table, CliError> {
    let mut t = Table::new("epsilon", cols(&["omega", "eps_re", "eps_im"]));
    t.rows = omegas
        .par_iter()
        .map(|&w| effective_epsilon(model, g, w).map(|e| vec![w, e.re, e.im]))
        .collect::<Result<_, _>>()?;
    Ok(t)
}

/// `G(x, y; omega)` along a line of `x` values.
pub fn propagator_table(
    prop: &DressedPropagator,
    omega: f64,
    xs: &[f64],
    y: f64,
) -> Result<Table, CliError> {
    let fp = prop.at_frequency(omega)?;
    let mut t = Table::new("propagator", cols(&["x", "G_re", "G_im", "G_abs"]));
    t.notes
        .push(format!("omega = {omega:e} rad/s, y = {y:e} m"));
    t.rows = xs
        .iter()
        .map(|&x| {
            let g = fp.green(x, y);
            vec![x, g.re, g.im, g.norm()]
        })
        .collect();
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezeReport {
    pub s: f64,
    pub theta: f64,
    /// `1 - |chi A L / (4 k_s k_i)|`; the closed form needs it positive.
    pub validity_margin: f64,
}

pub fn squeeze_report(s: &Scenario, base: &Path) -> Result<SqueezeReport, CliError> {
    let setup = Setup::new(s, base)?;
    squeeze_at(s, &setup)
}

fn squeeze_at(s: &Scenario, setup: &Setup) -> Result<SqueezeReport, CliError> {
    let kin = &setup.kin;
    let ratio =
        s.crystal.chi2 * kin.pump.amplitude * s.crystal.length / (4.0 * kin.k_s.re * kin.k_i.re);
    let p = squeezing_1d_closed_form(
        s.crystal.chi2,
        &kin.pump,
        s.crystal.length,
        kin,
        setup.x,
        setup.y,
    )?;
    Ok(SqueezeReport {
        s: p.s,
        theta: p.theta,
        validity_margin: 1.0 - ratio.abs(),
    })
}

fn default_mode(s: &Scenario) -> PropagatorMode {
    s.propagator.unwrap_or(if s.medium.regions.is_empty() {
        PropagatorMode::Analytic1D
    } else {
        PropagatorMode::Numeric1D
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramEntry {
    pub topology: &'static str,
    pub swapped: bool,
    pub process: Process,
    pub vertices: usize,
    pub propagators: usize,
    pub sources: Vec<String>,
    pub symmetry_factor: u64,
    pub amplitude_re: Option<f64>,
    pub amplitude_im: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Catalogue of order `vertices`, evaluated against a scenario when given.
/// Sources attach at the observation points, alternating `x` and `y`, with
/// the frequency of the line they terminate.
pub fn diagram_report(
    vertices: usize,
    scenario: Option<(&Scenario, &Path)>,
) -> Result<Vec<DiagramEntry>, CliError> {
    let diagrams = enumerate_order(vertices)?;
    let ctx = match scenario {
        Some((s, base)) => {
            let setup = Setup::new(s, base)?;
            let prop = setup.propagator(default_mode(s))?;
            Some((
                EvaluationContext::with_propagator(setup.medium.clone(), setup.kin, prop),
                setup,
            ))
        }
        None => None,
    };
    diagrams
        .par_iter()
        .map(|d| {
            let mut entry = DiagramEntry {
                topology: d.topology(),
                swapped: d.is_swapped(),
                process: d.process(),
                vertices: d.vertex_count(),
                propagators: d.propagator_count(),
                sources: d.sources().to_vec(),
                symmetry_factor: symmetry_factor(d),
                amplitude_re: None,
                amplitude_im: None,
                note: None,
            };
            if let Some((ctx, setup)) = &ctx {
                if d.is_vacuum_loop() {
                    entry.note = Some("vacuum loop: excluded from evaluation".into());
                } else {
                    let mut ctx = ctx.clone();
                    bind_default_sources(d, &mut ctx, setup);
                    let a = evaluate_amplitude(d, &ctx)?;
                    entry.amplitude_re = Some(a.re);
                    entry.amplitude_im = Some(a.im);
                }
            }
            Ok(entry)
        })
        .collect()
}

fn bind_default_sources(d: &Diagram, ctx: &mut EvaluationContext, setup: &Setup) {
    for (k, label) in d.sources().iter().enumerate() {
        let mode = d
            .edges()
            .iter()
            .find(|e| e.from == Endpoint::Source(k) || e.to == Endpoint::Source(k))
            .map(|e| e.mode)
            .unwrap_or(Mode::Signal);
        let omega = match mode {
            Mode::Signal => setup.kin.omega_s,
            Mode::Idler => setup.kin.omega_i,
        };
        let x = if k % 2 == 0 { setup.x } else { setup.y };
        ctx.set_coordinate(label.clone(), Coordinate::new(omega, x));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub quantity: Quantity,
    pub format: Format,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub outputs: Vec<OutputRecord>,
    pub manifest: PathBuf,
}

const SPDC_OWN_COLUMNS: [&str; 2] = ["crystal.length", "crystal.dk"];

fn quantity_columns(q: Quantity) -> Vec<String> {
    cols(match q {
        Quantity::SpdcProbability => &["L", "dk", "P", "P_normalised"],
        Quantity::Biphoton => &["phi_re", "phi_im", "phi_abs"],
        Quantity::Squeezing => &["s", "theta", "validity_margin"],
        Quantity::Epsilon => &["omega", "eps_re", "eps_im"],
        Quantity::Propagator => &["G_re", "G_im", "G_abs"],
    })
}

fn quantity_row(
    q: Quantity,
    method: Method,
    s: &Scenario,
    base: &Path,
) -> Result<Vec<f64>, CliError> {
    let complex = |z: Complex64| vec![z.re, z.im, z.norm()];
    Ok(match q {
        Quantity::SpdcProbability => {
            let (l, dk) = (s.crystal.length, s.crystal.dk);
            let p = spdc_probability(l, dk);
            vec![l, dk, p, if l == 0.0 { 1.0 } else { p / (l * l) }]
        }
        Quantity::Biphoton => {
            let setup = Setup::new(s, base)?;
            complex(match method {
                Method::Analytic => {
                    biphoton_1d_analytic(&setup.medium, &setup.kin, setup.x, setup.y)?
                }
                Method::Numeric => {
                    let prop = setup.propagator(default_mode(s))?;
                    biphoton_numeric(&setup.medium, &setup.kin, &prop, &prop, setup.x, setup.y)?
                }
            })
        }
        Quantity::Squeezing => {
            let setup = Setup::new(s, base)?;
            let r = squeeze_at(s, &setup)?;
            vec![r.s, r.theta, r.validity_margin]
        }
        Quantity::Epsilon => {
            let (model, g, omega) = s.material_model()?.ok_or_else(|| {
                CliError::Invalid("epsilon output needs a [material] table".into())
            })?;
            let e = effective_epsilon(&model, g, omega)?;
            vec![omega, e.re, e.im]
        }
        Quantity::Propagator => {
            let setup = Setup::new(s, base)?;
            let prop = setup.propagator(default_mode(s))?;
            complex(prop.evaluate(setup.kin.omega_s, setup.x, setup.y)?)
        }
    })
}

pub fn scenario_table(
    q: Quantity,
    method: Method,
    s: &Scenario,
    base: &Path,
) -> Result<Table, CliError> {
    let keep: Vec<usize> = (0..s.sweep.len())
        .filter(|&k| {
            !(q == Quantity::SpdcProbability
                && SPDC_OWN_COLUMNS.contains(&s.sweep[k].parameter.as_str()))
        })
        .collect();
    let mut columns: Vec<String> = keep.iter().map(|&k| s.sweep[k].parameter.clone()).collect();
    columns.extend(quantity_columns(q));
    let mut t = Table::new(q.name(), columns);
    if !s.label.is_empty() {
        t.notes.push(format!("scenario: {}", s.label));
    }
    match q {
        Quantity::SpdcProbability => t.notes.push("P_normalised = P / L^2".into()),
        Quantity::Biphoton => t.notes.push(BIPHOTON_REDUCTION_NOTE.into()),
        _ => {}
    }
    t.rows = s
        .sweep_points()
        .par_iter()
        .map(|point| {
            let at = s.at(point)?;
            let mut row: Vec<f64> = keep.iter().map(|&k| point[k]).collect();
            row.extend(quantity_row(q, method, &at, base)?);
            Ok(row)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(t)
}

/// Evaluates every output of a scenario and writes them with a manifest.
/// Relative table paths in the scenario resolve against `base`; outputs
/// resolve against `out_dir`.
pub fn run_scenario(
    s: &Scenario,
    document: &str,
    base: &Path,
    out_dir: &Path,
) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for out in &s.output {
        let table = scenario_table(out.quantity, out.method, s, base)?;
        log::info!("{}: {} rows", out.quantity.name(), table.rows.len());
        let path = out_dir.join(&out.path);
        let bytes = match out.format {
            Format::Csv => table.to_csv(),
            Format::Json => {
                let mut v = table.to_json();
                if out.quantity == Quantity::SpdcProbability {
                    v["summary"] = spdc_summary(&table);
                }
                serde_json::to_string_pretty(&v).expect("table serialises") + "\n"
            }
        };
        write_atomic(&path, bytes.as_bytes())?;
        if out.quantity == Quantity::SpdcProbability {
            summaries.push(spdc_summary(&table));
        }
        records.push(OutputRecord {
            path,
            quantity: out.quantity,
            format: out.format,
            rows: table.rows.len(),
        });
    }
    let manifest_path = out_dir.join(
        s.manifest
            .clone()
            .unwrap_or_else(|| PathBuf::from("manifest.json")),
    );
    let manifest = serde_json::json!({
        "tool": "chi2path",
        "version": env!("CARGO_PKG_VERSION"),
        "label": s.label,
        "input_sha256": format!("{:x}", Sha256::digest(document.as_bytes())),
        "units": UNITS_CONVENTION,
        "started_unix": started_unix,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
        "sweep": s.sweep,
        "outputs": records,
        "spdc_summaries": summaries,
        "notes": [BIPHOTON_REDUCTION_NOTE],
    });
    write_atomic(
        &manifest_path,
        (serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n").as_bytes(),
    )?;
    Ok(RunReport {
        outputs: records,
        manifest: manifest_path,
    })
}
