use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the numerical modules can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integration failed to converge after {subdivisions} subdivisions (error estimate {estimate:e}, requested {requested:e})")]
    IntegrationFailure {
        estimate: f64,
        requested: f64,
        subdivisions: usize,
    },

    #[error("resonance singularity at omega = {omega:e} rad/s")]
    ResonanceSingularity { omega: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate wave number |k| = {k_abs:e} 1/m")]
    DegenerateWavenumber { k_abs: f64 },

    #[error("vanishing Wronskian at omega = {omega:e} rad/s (|W| = {wronskian:e})")]
    DegenerateWronskian { omega: f64, wronskian: f64 },

    #[error("Wronskian not constant along grid: relative drift {drift:e}")]
    WronskianDrift { drift: f64 },

    #[error(
        "grid too coarse: {points_per_wavelength:.2} points per local wavelength (need {required})"
    )]
    Discretisation {
        points_per_wavelength: f64,
        required: f64,
    },

    #[error("energy-forbidden process: delta omega = {delta_omega:e} rad/s exceeds {tolerance:e}")]
    ForbiddenProcess { delta_omega: f64, tolerance: f64 },

    #[error("kinematic singularity: k_s * k_i = 0")]
    KinematicSingularity,

    #[error("unsupported diagram order V = {vertices}, P = {propagators}")]
    UnsupportedOrder { vertices: usize, propagators: usize },

    #[error("source label `{0}` has no bound coordinate")]
    UnboundCoordinate(String),

    #[error(
        "vacuum-loop diagrams are dropped by the renormalisation policy and cannot be evaluated"
    )]
    VacuumLoop,

    #[error("expected {expected} coordinates, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("series diverges: |sigma| = {modulus} must be < 1")]
    Divergence { modulus: f64 },

    #[error("truncation order {kmax} exceeds the supported maximum {max}")]
    Truncation { kmax: usize, max: usize },

    #[error("medium is not homogeneous: {0}")]
    NotHomogeneous(String),

    #[error("table error: {0}")]
    Table(String),
}

impl Error {
    /// Errors caused by invalid input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::UnsupportedOrder { .. }
                | Error::UnboundCoordinate(_)
                | Error::Arity { .. }
                | Error::OutOfRange(_)
                | Error::Truncation { .. }
                | Error::NotHomogeneous(_)
                | Error::Table(_)
                | Error::Discretisation { .. }
                | Error::VacuumLoop
        )
    }
}
