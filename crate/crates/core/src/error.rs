use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("ground state leaks through the grid boundary: |psi| = {magnitude:e} > {threshold:e}")]
    BoundaryLeakage { magnitude: f64, threshold: f64 },

    #[error("eigensolver did not converge: {0}")]
    EigenSolver(String),

    #[error("non-positive amplitude {value:e} at node {node}")]
    NonPositiveAmplitude { node: usize, value: f64 },

    #[error("point {0:?} is not a grid node")]
    OffGrid(Vec<f64>),

    #[error("trajectory solver did not converge after {iterations} iterations (residual {residual:e})")]
    BvpNonConvergence { iterations: usize, residual: f64 },

    #[error("conjugate point: second variation of the action is not positive definite")]
    ConjugatePoint,

    #[error("line integral not stable in T: change {delta:e} at T = {t_large}")]
    Unstable { delta: f64, t_large: f64 },

    #[error("fit did not converge after {iterations} iterations")]
    FitNonConvergence { iterations: usize },

    #[error("fitted action left the confining domain: {0}")]
    NotConfining(String),

    #[error("trajectory failed for record {record}: {source}")]
    Record {
        record: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite phase-space state at t = {0}")]
    BlowUp(f64),

    #[error("energy drift {drift:e} exceeds bound {bound:e}")]
    EnergyDrift { drift: f64, bound: f64 },

    #[error("seed off the energy shell by {deficit:e}")]
    OffShell { deficit: f64 },

    #[error("incompatible inputs: {0}")]
    Mismatch(String),

    #[error("singular point: |x| = {0} inside the exclusion radius")]
    Singular(f64),

    #[error("negative radicand {value:e} at x = {x}")]
    NegativeRadicand { x: f64, value: f64 },
}

impl Error {
    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Config(_) => "config_invalid",
            Error::BoundaryLeakage { .. } => "boundary_leakage",
            Error::EigenSolver(_) => "eigensolver",
            Error::NonPositiveAmplitude { .. } => "non_positive_amplitude",
            Error::OffGrid(_) => "off_grid",
            Error::BvpNonConvergence { .. } => "bvp_non_convergence",
            Error::ConjugatePoint => "conjugate_point",
            Error::Unstable { .. } => "unstable",
            Error::FitNonConvergence { .. } => "fit_non_convergence",
            Error::NotConfining(_) => "not_confining",
            Error::Record { .. } => "record_failure",
            Error::InsufficientData(_) => "insufficient_data",
            Error::BlowUp(_) => "blow_up",
            Error::EnergyDrift { .. } => "energy_drift",
            Error::OffShell { .. } => "off_shell",
            Error::Mismatch(_) => "mismatch",
            Error::Singular(_) => "singular",
            Error::NegativeRadicand { .. } => "negative_radicand",
        }
    }

    /// Usage/config errors map to exit code 2, everything else is numerical.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Config(_) | Error::OffGrid(_) | Error::Mismatch(_))
    }
}
