//! Sum-capacity and power allocation for two-user ergodic fading Gaussian
//! interference channels.
//!
//! A channel is a finite collection of fading states ([`FadingProcess`]); every
//! rate below is a fading average over those states, in bits per channel use.
//!
//! * [`classify`] labels states as strong/weak/mixed and the channel as a whole.
//! * [`allocate`] holds the power optimizers: waterfilling, opportunistic MAC
//!   waterfilling and a maximizer for minima of concave rate functions.
//! * [`cmac`] computes compound-MAC rate bounds and the case-based sum-capacity.
//! * [`ifc`] holds the per-subclass sum-capacities, outer bounds and the
//!   rate-splitting scheme for one-sided channels.
//! * [`figures`] produces the sweep datasets exposed by the CLI.

pub mod allocate;
pub mod channel;
pub mod classify;
pub mod cmac;
pub mod error;
pub mod figures;
pub mod ifc;

pub use allocate::rate::{capacity, RateFunction};
pub use allocate::{
    kkt_residual, mac_opportunistic_waterfill, maximize_min_concave, waterfill,
    OptimizerReport, SolverOptions, WaterfillResult,
};
pub use channel::{
    make_discrete_channel, sample_rayleigh_channel, validate_policy, FadingProcess, FadingState,
    PowerBudget, PowerPolicy, Receiver,
};
pub use classify::{classify_channel, classify_state, ClassificationReport, StateLabel, Subclass};
pub use error::{Error, Result};
