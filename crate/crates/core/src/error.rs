use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("composite dimension {dim} exceeds the configured maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("invalid factor index {index}: object has {count} tensor factors")]
    InvalidFactor { index: usize, count: usize },

    #[error("invalid Hilbert dimensions: {0}")]
    InvalidDims(String),

    #[error("matrix is not Hermitian (max |A - A\u{2020}| element = {0:.3e})")]
    NotHermitian(f64),

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("state vector is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error(
        "Fock cutoff {cutoff} too small for |alpha| = {alpha_abs:.3}: \
         truncated norm deficit {deficit:.3e} exceeds {tol:.1e}"
    )]
    CutoffTooSmall {
        cutoff: usize,
        alpha_abs: f64,
        deficit: f64,
        tol: f64,
    },

    #[error("cutoff search exhausted: no cutoff up to {max} met the occupation threshold")]
    CutoffSearchExhausted { max: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("model requires exact resonance omega_s = omega_o, got detuning {0}")]
    NotResonant(f64),

    #[error("operation requires kappa = 0 (pure sigma_z coupling), got kappa = {0}")]
    KappaNotZero(f64),

    #[error("operation assumes real alpha, got alpha = {0}")]
    ComplexAlpha(num_complex::Complex64),

    #[error("coupling has no sigma_z component; cannot reach the canonical form")]
    NoLongitudinalCoupling,

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error(
        "integration step rejected at t = {t}: local error estimate {estimate:.3e} \
         exceeds tolerance {tol:.1e}"
    )]
    StepRejected { t: f64, estimate: f64, tol: f64 },

    #[error(
        "trajectory tainted from t = {t}: top two Fock levels hold {population:.3e} \
         (threshold {threshold:.1e})"
    )]
    TaintedRange {
        t: f64,
        population: f64,
        threshold: f64,
    },

    #[error("flux trace has imaginary residue {residue:.3e} above {tol:.1e}; \
             an upstream operator lost Hermiticity")]
    ImaginaryResidue { residue: f64, tol: f64 },

    #[error("no energy exchange over the window: W + Q = 0, ratio undefined")]
    NoEnergyExchange,

    #[error("requested window [{t0}, {t1}] does not lie on the sampled grid")]
    WindowOffGrid { t0: f64, t1: f64 },
}
