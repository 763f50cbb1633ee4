//! Conservative contextual combinatorial cascading bandits.
//!
//! The crate is organised bottom-up:
//!
//! - [`linear_model`]: ridge estimate of the attraction parameter with its
//!   confidence ellipsoid and per-item upper/lower confidence bounds.
//! - [`reward`]: super arms, position discounts, the disjunctive reward and
//!   the selection oracles.
//! - [`environment`]: the synthetic world (hidden parameter, contexts,
//!   Bernoulli cascading feedback, baseline reward samples).
//! - [`policies`]: C³-UCB and the two conservative C⁴-UCB variants together
//!   with the conservative budget ledger.
//! - [`harness`], [`bound`], [`io`]: seeded experiment runs, regret-bound
//!   calculator and CSV logging/summaries.

pub mod bound;
pub mod environment;
pub mod error;
pub mod harness;
pub mod io;
pub mod linear_model;
pub mod policies;
pub mod reward;

pub use bound::{empirical_pstar_delta, theoretical_bound, BaselineKnowledge, BoundParams, BoundValue};
pub use environment::{CascadeFeedback, RoundContexts, World, WorldConfig};
pub use error::{Error, Result};
pub use harness::{run_experiment, run_single, ExperimentConfig, RoundRecord, RunOutcome, RunSummary};
pub use linear_model::{ArmBounds, EllipsoidState, Observation};
pub use policies::{
    c3_select, c4_known_step, c4_unknown_step, Agent, BaselineEstimator, ConservativeLedger, Decision,
    LedgerMode, PolicyKind, RefreshMode, StepType,
};
pub use reward::{brute_force_oracle, greedy_oracle, DiscountProfile, RewardSpec, SuperArm};
