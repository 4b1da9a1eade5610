//! Estimation of the total series impedance of a distribution-feeder branch
//! from voltage and current magnitudes measured only at its two ends.
//!
//! The branch is a chain of `K` segments with `K - 1` unmeasured loads in
//! between. Each time step yields a participation factor `f = i_out / i_in`
//! and a pair of bounds `Δv / i_in ≤ z_tot ≤ Δv / i_out`; regressing the
//! lower bound on `f` and reading the line at `f = 1` gives the estimate.
//!
//! Modules:
//! * [`model`]: shared domain types
//! * [`simulator`]: DC and AC (backward/forward sweep) ground-truth solver
//! * [`profiles`]: load profiles, assignment to nodes, interval averaging
//! * [`bounds`]: participation factor and per-step bounds
//! * [`estimators`]: `lin`, `lin_w`, `lin_w2`, `mean_lb_ub`, `k2_exact`
//! * [`montecarlo`]: seeded studies and error statistics
//! * [`io`]: measurement CSV and ground-truth sidecar formats

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod profiles;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    build_branch, BranchSpec, CableParams, DerivedSample, EstimationResult, MeasurementSample,
    MeasurementSeries, Method, Mode, RegressionFit, SegmentSpec, WeightMode,
};
