//! Numerical toolkit for a stochastic game of variable contributions to a
//! common goodwill stock.
//!
//! The state `Z` depreciates on average and any player can push it up at a
//! linear cost while everyone enjoys its flow profit. The crate solves and
//! cross-checks the equilibrium structure of that game:
//!
//! - [`model`]: problem instances, validation of the standing assumptions,
//!   and the closed-form fundamental solutions and resolvent of the
//!   constant-coefficient family;
//! - [`single_control`]: the single-controller benchmark: reflecting
//!   threshold, smooth-pasting coefficient, value function, and a numeric
//!   optimality certifier;
//! - [`mpe`]: Markov perfect equilibria: the symmetric regular-control
//!   equilibrium (gradual contributions below the benchmark threshold), its
//!   N-player form and deterministic steady state, and asymmetric profiles
//!   with one reflecting player, including the critical-cost search;
//! - [`simulate`]: seeded Euler-Maruyama simulation of the controlled state
//!   with reflection, jumps, and discounted-payoff estimation;
//! - [`rdgame`]: a companion R&D race with spillover whose equilibrium is a
//!   one-shot effort boost, for contrast with the gradualism above.

pub mod error;
pub mod model;
pub mod mpe;
pub mod rdgame;
pub mod report;
pub mod simulate;
pub mod single_control;

pub use error::{Error, Result};
pub use model::{
    apply_generator, fundamental_solutions, q_function, resolvent, validate_scenario, x_star,
    ClosedForms, Diffusion, PlayerParams, ProfitCutoff, ProfitSpec, Scenario, ValidationReport,
};
pub use mpe::{critical_k2, critical_k2_traced, AsymmetricMpe, ConditionReport, SymmetricMpe};
pub use report::{grid_range, CheckReport, ConditionStat};
pub use simulate::{
    estimate_payoff, estimate_payoffs, simulate_path, ControlPolicy, PathRecord, PayoffEstimate,
    SimConfig,
};
pub use single_control::{
    coefficient_a, solve_threshold, threshold_root, OptimalityReport, SingleSolution,
};
