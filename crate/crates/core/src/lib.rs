//! Empirical-likelihood tests and confidence regions for the difference
//! between the two phase parameters of a two-phase nonlinear regression
//! model, with complete responses or responses missing at random
//! (complete-case, inverse-probability-weighted and imputed statistics),
//! plus a seeded Monte Carlo harness for coverage studies.

pub mod complete;
pub mod data;
pub mod error;
pub mod fit;
pub mod inference;
pub mod missing;
pub mod model;
pub mod numerics;
pub mod sim;

pub use complete::{
    assemble, el_statistic, g_first, g_second, gdot, lambda_score, profile_beta, psi_vector,
    s_matrix, solve_lambda, solve_lambda_from, ELAssembly, Hypothesis, ProfileOptions,
    ProfileOutcome,
};
pub use data::{Dataset, Phase, Row};
pub use error::{Error, Result};
pub use fit::{estimate_sigmas, fit_nls, fit_nls_pooled, grid_search_init, PhaseFit};
pub use inference::{
    el_test, el_test_missing, el_test_missing_opts, el_test_opts, region_summary,
    region_summary_missing, Diagnostics, ELTestResult, PiSource, PreparedTest, RegionSummary,
    TestOptions,
};
pub use missing::{
    assemble_missing, estimate_pi, g_missing, impute_responses, known_pi, ImputedResponses,
    Kernel, MissingInputs, MissingMethod, PiEstimate, PiOrigin,
};
pub use model::{builtin_model, paper_ratio, DerivativeReport, RegressionModel};
pub use numerics::{
    chi2_cdf, chi2_quantile, damped_newton_root, principal_sqrt_psd, solve_linear, sym_eigen,
    NewtonOptions, SymEig,
};
pub use sim::{
    gen_dataset, run_replication, run_study, ErrorCase, Method, ModelId, PiMode, RepOutcome,
    Scenario, SimulationReport, Study,
};
