//! Parameter estimation for one- and multi-component 2-D chirp signals.
//!
//! A 2-D chirp observes `y(m,n) = sum_k [A_k cos(phi_k) + B_k sin(phi_k)] +
//! noise` with quadratic phases `phi_k = alpha_k m + beta_k m^2 + gamma_k n +
//! delta_k n^2`. Fitting all six parameters of a component at once is a 4-D
//! nonlinear search; this crate instead reduces the problem to two 2-D
//! searches by projecting grid columns (rows) onto a shared 1-D chirp basis
//! and minimizing the summed projection residual, then recovers the
//! amplitudes by linear regression. Multiple components are extracted
//! sequentially from the residual.
//!
//! Modules:
//! - [`signal`]: model types and synthesis of noisy observation grids.
//! - [`criteria`]: chirp bases, projection residuals, the reduced criteria
//!   and their periodogram-type counterparts.
//! - [`optim`]: coarse grid search plus simplex refinement over `(0, pi)^2`.
//! - [`estimator`]: one-component and sequential fits, model-order detection
//!   and closed-form asymptotic covariances.
//! - [`montecarlo`]: replicated-experiment runner with bias/MSE/Avar tables.
//! - [`image`] and [`gridfile`]: grayscale texture I/O.

pub mod criteria;
pub mod error;
pub mod estimator;
pub mod gridfile;
pub mod image;
pub mod montecarlo;
pub mod optim;
pub mod signal;

pub use criteria::{
    basis, column_amplitudes, periodogram_cols, periodogram_rows, projection_residual,
    reduced_criterion_cols, reduced_criterion_rows, Axis, AxisEvaluator, BasisMatrix,
    NonlinearPair,
};
pub use error::{Error, Result};
pub use estimator::{
    asymptotic_covariance, detect_order, estimate_linear, estimate_one, sequential_estimate,
    sigma2_hat, AsymptoticCovariance, ComponentEstimate, EstimatorConfig, EstimatorKind,
    FitResult, StageDiagnostics, StandardErrors,
};
pub use image::{grid_to_image, image_to_grid, pgm_read, pgm_write, ImageBuffer, PgmError, RenderedImage, ScaleMap};
pub use montecarlo::{parse_csv, render, run, McFormat, McPlan, McReport, McRow, Parameter};
pub use optim::{
    coarse_grid_search, refine, solve_pair, GridPlan, OptimumReport, RefineSettings, SearchSense,
};
pub use signal::{
    add_noise, phase, split_seed, synthesize, ChirpComponent, ModelSpec, ModelWarning, NoiseSpec,
    SignalGrid,
};
