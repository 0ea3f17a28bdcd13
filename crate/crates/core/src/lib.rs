//! Peer-prediction payments that make buyer feedback truthful in a
//! sanctioning reputation mechanism.
//!
//! A long-run seller faces two buyers per Feedback Game. The seller is either
//! a commitment type that always exerts top effort or a strategic type with
//! known effort distributions. Each buyer observes a noisy binary signal of
//! the effort and is paid according to her report and her peer's report.
//!
//! * [`model`]: validated game configuration.
//! * [`beliefs`]: the Bayesian belief cascade behind the peer-signal
//!   posterior `g(s_k | s_j)`.
//! * [`payments`]: the budget-minimizing payment LP, its feasibility test,
//!   an exhaustive vertex oracle and a hand-built feasible scheme.
//! * [`verify`]: best-response certificates for truthful reporting.
//! * [`sim`]: seeded simulation of repeated Feedback Games with the type
//!   belief carried from game to game.
//! * [`sweep`]: one-parameter sweeps reporting feasibility and budgets.
//! * [`lp`]: the small dense LP solvers used by [`payments`].

pub mod beliefs;
pub mod lp;
pub mod model;
pub mod payments;
pub mod sim;
pub mod sweep;
pub mod verify;

pub use beliefs::{belief_set, BeliefError, BeliefSet};
pub use model::{
    validate, Buyer, GameConfig, RawConfig, ReasonCode, SellerType, Signal, ValidationError,
};
pub use payments::{
    build_lp, check_feasibility, constructive_scheme, solve_both, solve_for_buyer, solve_lp,
    vertex_enumeration_oracle, FeasibilityReason, FeasibilityReport, PaymentError, PaymentScheme,
};
pub use sim::{run_sequence, summarize, SimConfig, SimError, SimTrace};
pub use verify::{best_response_check, equilibrium_condition_report, TruthfulnessCertificate};
