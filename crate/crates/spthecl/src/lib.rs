//! Switched prescribed-time and hyperexponential concurrent learning (SPTHE-CL).
//!
//! Parameter estimation that combines a real-time gradient term with batch terms
//! built from recorded datasets, driven by a dynamic gain that ranges from
//! exponentially growing (`ell = 1`, hyperexponential convergence) to finite-time
//! blow-up (`ell > 1`, convergence by a user-prescribed deadline). The estimator
//! switches between datasets of varying richness — including uninformative and
//! corrupted ones — under dilated average dwell-time (D-ADT) and activation-time
//! (D-AAT) constraints, and the whole closed loop is simulated as a hybrid
//! dynamical system with flow/jump semantics.
//!
//! Module map:
//! - [`gain`]: dynamic-gain laws, their closed-form solutions and blow-up times,
//!   and the dilation/contraction diffeomorphisms between real and dilated time.
//! - [`signal`]: the measured signal, regressor, disturbance, and the real-time
//!   learning signal.
//! - [`dataset`]: recorded datasets, their data matrices/vectors, SR/IR/corrupted
//!   classification, and registry persistence.
//! - [`switching`]: the data-querying automaton, admissible switching-signal
//!   generation, and D-ADT/D-AAT verification.
//! - [`hybrid`]: generic hybrid-system integration with jump localization,
//!   hybrid arcs, and time-scale mapping of arcs.
//! - [`estimator`]: the closed loop, its dilated-time target system, convergence
//!   certificates, and Lyapunov diagnostics.
//! - [`example`]: the built-in three-parameter benchmark used by the CLI.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod estimator;
pub mod example;
pub mod gain;
pub mod hybrid;
pub mod linalg;
pub mod signal;
pub mod switching;

pub use dataset::{Classification, Dataset, DatasetRegistry, ModePartition, Sample};
pub use estimator::{EstimatorConfig, RunMode, RunResult, TheoremConstants};
pub use gain::{GainExponent, GainLaw, GainState};
pub use hybrid::{HybridArc, HybridSystem, HybridTime, Termination};
pub use signal::{RegressorModel, TrueSystem};
pub use switching::{AutomatonParams, SwitchReport, SwitchingPolicy, SwitchingSignal};
