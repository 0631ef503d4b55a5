//! R&D race with full spillover: two firms pick Poisson completion rates.
//!
//! Each firm holds an irreversible effort level; raising it by `d lambda`
//! costs `k d lambda`, maintaining it costs `c lambda^2 / 2` per unit time,
//! and the first completion (arriving at rate `lambda_1 + lambda_2`) pays
//! both firms `R`. Against an opponent frozen at `lambda_2`, a firm's payoff
//! from boosting once to `lambda` at time zero is
//!
//! ```text
//! V(lambda) = -(c/2r) lambda^2
//!           + (R + (c/2r) lambda^2) (lambda + lambda_2) / (r + lambda + lambda_2)
//!           - k (lambda - lambda_0)
//! ```
//!
//! whose first-order condition has the concave quadratic numerator
//!
//! ```text
//! -(c/2 + k) lambda^2 - (c r + c lambda_2 + 2 k (r + lambda_2)) lambda
//!   + R r - k (r + lambda_2)^2 .
//! ```
//!
//! Imposing symmetry `lambda = lambda_2` gives
//! `(8k + 3c) lambda^2 + 2(c + 4k) r lambda - 2(R - k r) r = 0`, whose
//! positive root is the symmetric equilibrium effort
//! `lambda* = r [-(4k + c) + sqrt((4k + c)^2 + 2(R/r - k)(8k + 3c))] / (8k + 3c)`.

use crate::error::{Error, Result};

/// Parameters of the R&D game.
#[derive(Debug, Clone, Copy)]
pub struct RdParams {
    /// Reward to each firm from the first completion.
    pub reward: f64,
    /// Discount rate.
    pub r: f64,
    /// Cost per unit of effort boost.
    pub k: f64,
    /// Quadratic flow-cost coefficient.
    pub c: f64,
    /// Initial effort pair.
    pub lambda0: (f64, f64),
}

impl RdParams {
    pub fn new(reward: f64, r: f64, k: f64, c: f64, lambda0: (f64, f64)) -> Result<Self> {
        for (name, v) in [
            ("reward", reward),
            ("r", r),
            ("k", k),
            ("c", c),
            ("lambda0.0", lambda0.0),
            ("lambda0.1", lambda0.1),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} is not finite")));
            }
        }
        for (name, v) in [("reward", reward), ("r", r), ("k", k), ("c", c)] {
            if v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive (got {v})"
                )));
            }
        }
        if lambda0.0 < 0.0 || lambda0.1 < 0.0 {
            return Err(Error::InvalidInput(
                "initial efforts must be nonnegative".into(),
            ));
        }
        let gap = (4.0 * k + c).powi(2) + 2.0 * (reward / r - k) * (8.0 * k + 3.0 * c);
        if gap <= 0.0 {
            return Err(Error::AssumptionFailed {
                check: "reward_large_enough".into(),
                detail: format!("(4k+c)^2 + 2(R/r - k)(8k+3c) = {gap} must be positive"),
            });
        }
        Ok(RdParams { reward, r, k, c, lambda0 })
    }
}

/// Symmetric equilibrium effort.
#[derive(Debug, Clone, Copy)]
pub struct RdSolution {
    pub lambda_star: f64,
    /// False when the reward cannot justify any effort (`R <= k r`), in
    /// which case `lambda_star` is zero.
    pub positive_effort: bool,
}

/// Symmetric equilibrium effort: the positive root of the symmetric
/// first-order condition, or zero when no positive effort is justified.
pub fn symmetric_effort(p: &RdParams) -> RdSolution {
    if p.reward <= p.k * p.r {
        return RdSolution { lambda_star: 0.0, positive_effort: false };
    }
    let a = 8.0 * p.k + 3.0 * p.c;
    let b = 2.0 * (p.c + 4.0 * p.k) * p.r;
    let c0 = -2.0 * (p.reward - p.k * p.r) * p.r;
    let disc = b * b - 4.0 * a * c0;
    // c0 < 0 here, so the root pair straddles zero; this form avoids the
    // subtraction of nearly equal terms.
    let lambda_star = -2.0 * c0 / (b + disc.sqrt());
    RdSolution { lambda_star, positive_effort: true }
}

/// Firm payoff from boosting once to `lambda` against an opponent frozen at
/// `lambda_opp`, starting from `lambda_init`.
pub fn payoff(p: &RdParams, lambda: f64, lambda_opp: f64, lambda_init: f64) -> Result<f64> {
    if lambda < lambda_init {
        return Err(Error::Precondition(format!(
            "effort is irreversible: lambda = {lambda} below the initial level {lambda_init}"
        )));
    }
    let hold = p.c / (2.0 * p.r) * lambda * lambda;
    let total = lambda + lambda_opp;
    Ok(-hold + (p.reward + hold) * total / (p.r + total) - p.k * (lambda - lambda_init))
}

/// Best response to an opponent frozen at `lambda_opp`: the descending root
/// of the concave first-order condition, clamped at `lambda_init`
/// (irreversibility).
pub fn best_response(p: &RdParams, lambda_opp: f64, lambda_init: f64) -> f64 {
    let a = -(0.5 * p.c + p.k);
    let b = -(p.c * p.r + p.c * lambda_opp + 2.0 * p.k * (p.r + lambda_opp));
    let c0 = p.reward * p.r - p.k * (p.r + lambda_opp).powi(2);
    debug_assert!(a < 0.0, "the first-order numerator must be concave");
    let disc = b * b - 4.0 * a * c0;
    if disc < 0.0 {
        // No stationary point: the payoff is decreasing everywhere.
        return lambda_init;
    }
    // Larger root of the concave quadratic via Vieta; -b > 0 so no
    // cancellation.
    let interior = 2.0 * c0 / (-b + disc.sqrt());
    interior.max(lambda_init)
}
