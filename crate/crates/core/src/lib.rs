//! Estimation of credit rating transition generators from censored rating
//! histories: cohort, continuous-time and time-weighted maximum likelihood,
//! and a parametric smoother built on a tri-diagonal hidden process.

pub use nalgebra;

pub mod analytics;
pub mod error;
pub mod estimation;
pub mod events;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod optim;
pub mod scale;
pub mod simulation;
pub mod smoothing;

pub use analytics::{
    coarse_grain, default_curve, downgrade_generator, first_passage, warf, CoarseMap, DefaultCurve,
};
pub use error::{Error, Result};
pub use estimation::{
    cohort_estimate, log_likelihood, mle_stationary, mle_weighted, roll_estimates, EstimateReport,
    HalfLife, Method, Weighting,
};
pub use events::{parse_events, write_events, EventTable, ObservationWindow, TransitionEvent};
pub use matrix::{
    compose, mexp, mlog, regularize, validate_generator, validate_transition, GeneratorMatrix,
    TransitionMatrix,
};
pub use scale::{RatingScale, ScaleConfig, StateRef};
pub use simulation::{sample_path, simulate_events, GeneratorSchedule, RatingPath};
pub use smoothing::{
    build_gengen, fit_smoothed, gengen_to_generator, smoothed_log_likelihood, FitOptions,
    FitReport, GengenParams,
};
