//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    // --- contact matrices ---
    #[error("group {group:?} has no survey participants")]
    EmptyGroup { group: String },
    #[error("label sets do not match: {detail}")]
    LabelMismatch { detail: String },
    #[error("row sum for group {group:?} is zero, cannot normalize")]
    ZeroRow { group: String },
    #[error("matrix power needs a row-normalized matrix (row {row} sums to {sum})")]
    NotRowNormalized { row: usize, sum: f64 },
    #[error("matrix power exponent must be nonnegative, got {kappa}")]
    NegativeKappa { kappa: f64 },
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("eigenvector matrix is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("matrix power has imaginary residue {residue:.3e} above tolerance 1e-9")]
    ComplexResidue { residue: f64 },
    #[error("coarse group {group:?} has zero total population")]
    ZeroCoarsePopulation { group: String },

    // --- region graphs and weights ---
    #[error("region graph is disconnected; components: {components:?}")]
    Disconnected { components: Vec<Vec<String>> },
    #[error("self-loop on region {region:?}")]
    SelfLoop { region: String },
    #[error("unknown region label {label:?}")]
    UnknownRegion { label: String },
    #[error("power-law decay must be positive, got rho = {rho}")]
    NonPositiveRho { rho: f64 },
    #[error("joint weight row (group {group}, region {region}) has zero total outflow")]
    ZeroJointRow { group: usize, region: usize },

    // --- count lattices ---
    #[error("invalid ISO week {text:?}")]
    BadWeek { text: String },
    #[error("weeks are not consecutive: {prev} is followed by {next}")]
    NonContiguousWeeks { prev: String, next: String },
    #[error("duplicate cell (week {week}, group {group:?}, region {region:?})")]
    DuplicateCell {
        week: String,
        group: String,
        region: String,
    },
    #[error("missing cell (week {week}, group {group:?}, region {region:?})")]
    MissingCell {
        week: String,
        group: String,
        region: String,
    },

    // --- model evaluation ---
    #[error("parameter vector has length {got}, expected {expected}")]
    ParameterLength { expected: usize, got: usize },
    #[error("non-finite mean at (week index {t}, group {group:?}, region {region:?})")]
    NonFiniteMean {
        t: usize,
        group: String,
        region: String,
    },
    #[error("non-finite log-likelihood at (week index {t}, group {group:?}, region {region:?})")]
    NonFiniteLogLik {
        t: usize,
        group: String,
        region: String,
    },
    #[error("epidemic coefficient matrix is undefined for a time-varying epidemic predictor")]
    TimeVaryingEpidemic,
    #[error("model has no seasonal harmonics")]
    NoHarmonics,
    #[error("unknown parameter {name:?}")]
    UnknownParameter { name: String },

    // --- inference ---
    #[error("optimizer did not converge in {iterations} iterations (gradient max-norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        trace: Vec<f64>,
    },
    #[error("objective is not finite at the initial point")]
    BadInitialPoint,
    #[error("spec does not profile kappa; use a contact structure with a profiled power")]
    NotProfiled,
    #[error("fitting a spec with profiled kappa directly is not supported; use profile_kappa")]
    ProfiledKappaInFit,
    #[error(
        "profile maximum at the search boundary (kappa = {kappa}); widen the range [{lo}, {hi}]"
    )]
    ProfileBoundary { kappa: f64, lo: f64, hi: f64 },
    #[error("profile confidence limit not bracketed inside [{lo}, {hi}]; widen the range")]
    ProfileCiNotBracketed { lo: f64, hi: f64 },
    #[error("covariance matrix unavailable (singular Hessian)")]
    CovarianceUnavailable,
    #[error("fits were made on different datasets: {a} vs {b}")]
    FingerprintMismatch { a: String, b: String },

    // --- simulation ---
    #[error("epidemic coefficient matrix has spectral radius {spectral_radius:.4} >= 1; set allow_explosive to simulate anyway")]
    ExplosiveProcess { spectral_radius: f64 },
    #[error(
        "simulated count exceeded cap {cap} at (step {t}, group {group:?}, region {region:?})"
    )]
    CountOverflow {
        t: usize,
        group: String,
        region: String,
        cap: u64,
    },

    // --- generic precondition failures ---
    #[error("invalid input: {0}")]
    Invalid(String),
}
