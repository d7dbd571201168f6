//! Local likelihood regression with a circular covariate.

pub mod bands;
pub mod bias_variance;
pub mod error;
pub mod cli;
pub mod family;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod local_fit;
pub mod partial_linear;
pub mod quadrature;
pub mod sample;
pub mod selection;
pub mod sim;
pub mod special;

pub use error::{CircError, Result};
pub use family::{Family, ScoreVariance};
pub use kernel::{moment_pack, xi_factor, Kernel, KernelMoments};
pub use sample::CircularSample;
pub use local_fit::{build_design, fisher_scoring_fit, fit_curve, weighted_moments, wls_fit, CurveFit, LocalDesign, LocalFit};
pub use bias_variance::{estimate_bias, estimate_mse, estimate_variance, pilot_fit, BiasVariance, PilotFit, VarianceCase};
pub use selection::{
    crsc, crsc_transformed, cv_kappa, ecrsc, kappa0, optimal_kappa_global, optimal_kappa_reference,
    pilot_kappa, refined_kappa, select_kappa, KappaGrid, OptimalKappa, SelectionOptions,
    SelectionResult, Selector,
};
pub use bands::{confidence_band, confidence_band_with, kernel_smooth, smoothed_bias_variance, BandOptions, ConfidenceBand};
pub use sim::{approx_ise, monte_carlo, simulate_model, ModelId, ModelSpec, MonteCarloOptions, MonteCarloReport};
pub use partial_linear::{backfit, KappaSelector, PartialLinearData, PartialLinearFit};
pub use io::{read_table, to_json, write_atomic, AngleUnit, Table};
