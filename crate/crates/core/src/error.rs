use thiserror::Error;

use crate::lattice::LatticePoint;

/// Everything the solver can refuse to do, or fail at.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid of {grid} points per axis aliases a lattice of bound {bound} (need at least {needed})")]
    Aliasing { grid: usize, bound: u32, needed: usize },

    #[error("resonant frequency: omega . q = 0 at q = {0}")]
    ResonantFrequency(LatticePoint),

    #[error("value overflowed the representable range: {0}")]
    Overflow(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no convergence after {iterations} Newton steps (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("contraction failure at scale {scale}: Picard factor {factor:.3e} and Newton stalled")]
    ContractionFailure { scale: usize, factor: f64 },

    #[error("scale sequence is not Cauchy at stage {stage}: |z_n - z_(n-1)| grew for 3 consecutive scales")]
    NonCauchy { stage: usize },

    #[error("resonance matrix (1 - Dw Gamma) is singular at scale {scale}")]
    SingularResonanceMatrix { scale: usize },

    #[error("oracle Newton diverged (residual {residual:.3e} after {iterations} steps)")]
    DivergedOracle { iterations: usize, residual: f64 },

    #[error("problem too large for the dense oracle ({unknowns} unknowns, limit {limit})")]
    OracleTooLarge { unknowns: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{}: {source}", path.display())]
    File { path: std::path::PathBuf, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
