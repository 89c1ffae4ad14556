//! Endemic-epidemic models for infectious disease count time series that are
//! stratified by age group and region.
//!
//! Weekly case counts `Y[t, g, r]` are modelled conditionally on the previous
//! week as negative binomial (or Poisson) with a mean that decomposes into an
//! endemic component (seasonality, calendar effects, population offset) and an
//! epidemic component driven by last week's counts. Transmission between age
//! groups follows a social contact matrix, optionally adjusted by a fractional
//! matrix power, and transmission between regions follows a power law in the
//! adjacency order of the region graph.
//!
//! The crate provides
//! * contact-matrix estimation from survey data under population reciprocity,
//!   aggregation, row normalization and the eigendecomposition-based power
//!   transform ([`contact`]),
//! * region-graph adjacency orders and parametric spatial weights ([`spatial`]),
//! * declarative model specification and mean evaluation ([`model`]),
//! * maximum likelihood inference with analytic scores, Wald and profile
//!   likelihood confidence intervals and AIC comparison ([`inference`]),
//! * stochastic forward simulation and fitted-mean diagnostics ([`simulation`]).

pub mod contact;
pub mod data;
pub mod error;
pub mod fingerprint;
pub mod inference;
pub mod model;
pub(crate) mod optim;
pub mod simulation;
pub mod spatial;
pub mod synthetic;
pub mod week;

pub use contact::{
    aggregate_contact_matrix, estimate_contact_matrix, matrix_power, matrix_power_detailed,
    row_normalize, ContactMatrix, SurveyRecords, TruncationEvent,
};
pub use data::{CountCell, PopulationCell, StratifiedCounts};
pub use error::{Error, Result};
pub use inference::{
    compare_models, fit, log_likelihood, profile_kappa, score, wald_ci, ComparisonRow, Convergence,
    EstimateCi, FitOptions, FitResult, ProfileResult, ProfileSearch,
};
pub use model::{
    compute_means, epidemic_coefficient_matrix, parameter_count, seasonal_peak_week, ArComponent,
    ContactStructure, EndemicSpec, EpidemicComponent, EpidemicSpec, EpidemicStructure, ModelSpec,
    ParamDef, ParameterLayout, Seasonality, Transform, VarianceSpec,
};
pub use simulation::{
    epidemic_proportion, mean_decomposition, simulate, Aggregation, Decomposition, SimulationConfig,
};
pub use spatial::{
    adjacency_orders, free_order_weights, joint_normalize, power_law_weights, OrderMatrix,
    RegionGraph, WeightConfig,
};
pub use week::IsoWeek;
