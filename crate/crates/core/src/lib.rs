//! Kinetic (piecewise-deterministic) samplers with exactness-preserving
//! numerics: bounce and coordinate-flip dynamics simulated through a locally
//! adaptive rate surrogate, corrected by a Metropolis step on whole
//! trajectories, with No-U-Turn path-length adaptation on top. Includes an
//! HMC baseline and effective-sample-size diagnostics for benchmarking.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod hmc;
pub mod metrics;
pub mod metropolis;
pub mod nuts;
pub mod path;
pub mod rate;
pub mod target;

pub use diagnostics::{ess, EssEstimate};
pub use dynamics::{
    event_rate, flip_conjugate, flow, jump, refresh_velocity, signed_event_rates, DynamicsKind,
    KineticState,
};
pub use error::{Error, Result};
pub use hmc::{hmc_step, leapfrog, HMCConfig, LeapfrogResult};
pub use metrics::{EvalPoint, RunMetrics};
pub use metropolis::{mh_pdmp_step, MHConfig};
pub use nuts::{
    criterion_valid, doubly_adaptive_step, grow_stopped_path, nuts_step_exact, sample_index_time,
    CriterionEvent, NutsConfig, StopSide, StoppedPath,
};
pub use path::{
    path_log_density, reverse_path, simulate, skeleton_to_string, skew_reversibility_residual,
    LogPathDensity, PathEvent, PathSkeleton,
};
pub use rate::{
    adapt_step, parse_order, parse_step_policy, sample_event_time, ApproxOrder, ApproxScheme,
    RateSegment, StepPolicy,
};
pub use target::{parse_target, Target};
