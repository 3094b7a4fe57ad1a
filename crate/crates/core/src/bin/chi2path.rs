use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chi2path::cli::{
    self, diagram_report, epsilon_table, parse_scenario, propagator_table, run_scenario,
    scenario_table, spdc_summary, spdc_table, squeeze_report, CliError, Method, Quantity, Table,
};
use chi2path::constants::SPEED_OF_LIGHT;
use chi2path::greens::{DressedPropagator, Grid, MIN_POINTS_PER_WAVELENGTH};
use chi2path::media::{HuttnerBarnettModel, MediumProfile, Permittivity, SpectralCoupling};

const UNITS_HELP: &str = "\
Units: SI throughout. Angular frequencies in rad/s, positions and lengths in m,
wave numbers and phase mismatch in 1/m, chi(2) in m/V, pump amplitude in V/m.
Cross sections use hbar = 1. Propagators are frequency-domain kernels with the
exp(-i omega t) factor removed, normalised to a unit delta source.
Ranges are written START:STOP, or a single value for a fixed parameter.
Exit status: 0 success, 1 invalid input, 2 numerical or i/o failure.";

#[derive(Parser)]
#[command(name = "chi2path", version, about = "Path-integral toolkit for chi(2) processes in dispersive media", after_help = UNITS_HELP)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Effective permittivity of the oscillator-reservoir model over a frequency range.
    #[command(after_help = UNITS_HELP)]
    Epsilon {
        /// Oscillator resonance, rad/s.
        #[arg(long)]
        omega0: f64,
        /// Polarisation coupling beta.
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Constant reservoir coupling f (0 for a lossless medium).
        #[arg(long, default_value_t = 0.0)]
        coupling: f64,
        /// Reservoir cutoff frequency, rad/s (default 10 omega0).
        #[arg(long)]
        cutoff: Option<f64>,
        /// Geometry factor g.
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        #[arg(long = "omega-range", value_parser = parse_range, allow_hyphen_values = true)]
        omega_range: (f64, f64),
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dressed 1D propagator G(x, y; omega) in a homogeneous medium.
    #[command(after_help = UNITS_HELP)]
    Propagator {
        #[arg(long, default_value_t = 1.0)]
        index: f64,
        /// Imaginary part of the permittivity.
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        #[arg(long)]
        omega: f64,
        #[arg(long = "x-range", value_parser = parse_range, allow_hyphen_values = true)]
        x_range: (f64, f64),
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SPDC probability L^2 sinc^2(L dk / 2) on an (L, dk) grid.
    #[command(after_help = UNITS_HELP)]
    Spdc {
        #[arg(long = "L-range", value_parser = parse_range, allow_hyphen_values = true)]
        l_range: (f64, f64),
        #[arg(long = "dk-range", value_parser = parse_range, allow_hyphen_values = true)]
        dk_range: (f64, f64),
        /// Points per swept axis (a fixed axis uses one).
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Emit the table as JSON with a peak and first-zero summary.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List or evaluate the diagram catalogue at a given order.
    #[command(after_help = UNITS_HELP)]
    Diagrams {
        /// Number of vertices V.
        #[arg(long)]
        order: usize,
        /// Print one line per diagram.
        #[arg(long)]
        list: bool,
        /// Evaluate amplitudes against this scenario and print JSON.
        #[arg(long)]
        evaluate: Option<PathBuf>,
    },
    /// Squeezing parameter of a perfectly phase-matched scenario.
    #[command(after_help = UNITS_HELP)]
    Squeeze {
        scenario: PathBuf,
        /// Also write s over the scenario sweep as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate every output of a scenario and write a manifest.
    #[command(after_help = UNITS_HELP)]
    Run {
        scenario: PathBuf,
        /// Directory for outputs and manifest.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Numeric,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    match s.split_once(':') {
        Some((a, b)) => Ok((num(a)?, num(b)?)),
        None => num(s).map(|v| (v, v)),
    }
}

fn linspace((a, b): (f64, f64), n: usize) -> Result<Vec<f64>, CliError> {
    if a == b {
        return Ok(vec![a]);
    }
    if n < 2 {
        return Err(CliError::Invalid(format!(
            "points: need >= 2 for a range, got {n}"
        )));
    }
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect())
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => cli::write_atomic(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            }),
    }
}

fn emit_table(t: &Table, out: Option<&Path>) -> Result<(), CliError> {
    emit(&t.to_csv(), out)
}

fn read_scenario(path: &Path) -> Result<(cli::Scenario, String, PathBuf), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let scenario = parse_scenario(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((scenario, text, base))
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Epsilon {
            omega0,
            beta,
            rho,
            coupling,
            cutoff,
            g,
            omega_range,
            points,
            out,
        } => {
            let f = if coupling == 0.0 {
                SpectralCoupling::Zero
            } else {
                SpectralCoupling::Constant(coupling)
            };
            let model =
                HuttnerBarnettModel::new(omega0, beta, rho, f, cutoff.unwrap_or(10.0 * omega0))?;
            let t = epsilon_table(&model, g, &linspace(omega_range, points)?)?;
            emit_table(&t, out.as_deref())
        }
        Command::Propagator {
            index,
            loss,
            omega,
            x_range,
            y,
            points,
            mode,
            out,
        } => {
            let eps = Permittivity::Constant(num_complex::Complex64::new(index * index, loss));
            let medium = MediumProfile::homogeneous("cli", eps);
            let xs = linspace(x_range, points)?;
            let prop = match mode {
                ModeArg::Analytic => DressedPropagator::analytic(medium)?,
                ModeArg::Numeric => {
                    let lo = x_range.0.min(x_range.1).min(y);
                    let hi = x_range.0.max(x_range.1).max(y);
                    let pad = 0.05 * (hi - lo).max(1e-12);
                    let k = num_complex::Complex64::new(index * index, loss)
                        .sqrt()
                        .norm()
                        * omega
                        / SPEED_OF_LIGHT;
                    let h = 2.0 * std::f64::consts::PI / k / (2.0 * MIN_POINTS_PER_WAVELENGTH);
                    let n = (((hi - lo + 2.0 * pad) / h).ceil() as usize + 1).max(2);
                    DressedPropagator::numeric(medium, Grid::uniform(lo - pad, hi + pad, n)?)?
                }
            };
            emit_table(&propagator_table(&prop, omega, &xs, y)?, out.as_deref())
        }
        Command::Spdc {
            l_range,
            dk_range,
            points,
            json,
            out,
        } => {
            let t = spdc_table(&linspace(l_range, points)?, &linspace(dk_range, points)?);
            if json {
                let mut v = t.to_json();
                v["summary"] = spdc_summary(&t);
                emit(&pretty(&v), out.as_deref())
            } else {
                emit_table(&t, out.as_deref())
            }
        }
        Command::Diagrams {
            order,
            list,
            evaluate,
        } => {
            let loaded = evaluate.as_deref().map(read_scenario).transpose()?;
            let entries = diagram_report(order, loaded.as_ref().map(|(s, _, b)| (s, b.as_path())))?;
            if list || loaded.is_none() {
                for d in chi2path::diagrams::enumerate_order(order)? {
                    println!("{d}");
                }
            }
            if loaded.is_some() {
                emit(&pretty(&entries), None)?;
            }
            Ok(())
        }
        Command::Squeeze { scenario, csv } => {
            let (s, _, base) = read_scenario(&scenario)?;
            emit(&pretty(&squeeze_report(&s, &base)?), None)?;
            if let Some(path) = csv {
                let t = scenario_table(Quantity::Squeezing, Method::Analytic, &s, &base)?;
                cli::write_atomic(&path, t.to_csv().as_bytes())?;
            }
            Ok(())
        }
        Command::Run { scenario, out_dir } => {
            let (s, text, base) = read_scenario(&scenario)?;
            let report = run_scenario(&s, &text, &base, &out_dir)?;
            emit(&pretty(&report), None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                cli::EXIT_VALIDATION
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
