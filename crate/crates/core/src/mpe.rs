//! Equilibrium constructors for the contribution game.
//!
//! Symmetric players admit a Markov perfect equilibrium in which everyone
//! contributes at the absolutely continuous rate
//!
//! ```text
//! u(x) = -(A V(x) + pi(x)) / (k (N - 1))    for x < theta,   0 otherwise,
//! ```
//!
//! where `V` is the single-controller value: gradual contributions below the
//! same threshold a lone controller would enforce instantly. Asymmetric
//! players (unequal thresholds) admit no such equilibrium; the builder
//! refuses them. What survives asymmetry is a family of profiles in which
//! player 1 reflects the state at their own threshold `theta_1` while both
//! players contribute at regular rates below a lower boundary `theta_prime`;
//! feasibility of that profile reduces to two one-sided conditions on player
//! 2's payoff, checked on a grid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::report::{grid_range, max_over, CheckReport};
use crate::single_control::SingleSolution;

/// Violation report for the asymmetric-equilibrium conditions; serializes
/// like the optimality report.
pub type ConditionReport = CheckReport;

/// Players' thresholds must agree to this width for the symmetric builder;
/// equal thresholds under asymmetric primitives still qualify.
const THRESHOLD_MATCH_TOL: f64 = 1e-9;

/// A condition fails when its worst violation exceeds this.
pub const CONDITION_TOL: f64 = 1e-8;

/// Symmetric regular-control equilibrium shared by `n_players` identical
/// players.
#[derive(Debug, Clone)]
pub struct SymmetricMpe {
    /// Single-controller solution; every player earns exactly this value in
    /// equilibrium.
    pub single: SingleSolution,
    pub n_players: usize,
}

impl SymmetricMpe {
    /// Builds the equilibrium, refusing scenarios whose players have
    /// different thresholds (no regular-control equilibrium exists there).
    pub fn build(s: &Scenario, n_players: usize) -> Result<Self> {
        s.ensure_valid()?;
        if n_players < 2 {
            return Err(Error::Precondition(format!(
                "a game needs at least two players (got {n_players})"
            )));
        }
        let theta_0 = crate::single_control::solve_threshold(s, 0)?;
        for i in 1..s.players.len() {
            let theta_i = crate::single_control::solve_threshold(s, i)?;
            if (theta_i - theta_0).abs() > THRESHOLD_MATCH_TOL {
                return Err(Error::AsymmetricPlayers {
                    theta_i: theta_0,
                    theta_j: theta_i,
                });
            }
        }
        Ok(SymmetricMpe {
            single: SingleSolution::solve(s, 0)?,
            n_players,
        })
    }

    pub fn theta(&self) -> f64 {
        self.single.theta
    }

    /// Equilibrium contribution rate at `x`: zero at and above the
    /// threshold, and below it
    /// `(-mu + r V(theta)/k + r (x - theta) - pi(x)/k) / (N - 1)`,
    /// the closed form of `-(A V + pi) / (k (N - 1))` on the linear branch.
    pub fn rate(&self, x: f64) -> f64 {
        let sol = &self.single;
        if x >= sol.theta {
            return 0.0;
        }
        let forms = sol.forms();
        let d = forms.diffusion();
        let r = forms.r();
        let pair_rate =
            -d.mu + r * sol.v_theta / sol.k + r * (x - sol.theta) - forms.pi(x) / sol.k;
        pair_rate / (self.n_players - 1) as f64
    }

    /// Steady state of the deterministic equilibrium flow: the root of
    /// `mu + N u(eta) = 0` below the threshold.
    pub fn steady_state(&self) -> Result<f64> {
        let d = self.single.forms().diffusion();
        if d.sigma != 0.0 {
            return Err(Error::Precondition(format!(
                "steady state requires the deterministic limit (sigma = 0, got {})",
                d.sigma
            )));
        }
        let n = self.n_players as f64;
        let g = |x: f64| d.mu + n * self.rate(x);
        let theta = self.theta();
        let (mut lo, mut hi) = (theta - 40.0, theta);
        let g_lo = g(lo);
        // g(theta) = mu < 0 since the rate vanishes at the threshold.
        if g_lo <= 0.0 {
            return Err(Error::Bracket(format!(
                "mu + N u does not change sign on [{lo}, {hi}]: g({lo}) = {g_lo}, g({hi}) = {}",
                g(hi)
            )));
        }
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Asymmetric equilibrium profile: player 1 reflects the state at
/// `theta_1`, both players contribute at regular rates below `theta_prime`,
/// and the state jumps from the band `[theta_prime, theta_1)` to `theta_1`
/// under player 1's lump-sum contribution.
#[derive(Debug, Clone)]
pub struct AsymmetricMpe {
    /// Boundary between the common regular-control region and player 1's
    /// lump-sum region.
    pub theta_prime: f64,
    /// Player 1's reflection threshold (their single-controller threshold).
    pub theta_1: f64,
    /// Coefficient of `phi` in player 2's continuation payoff,
    /// `B = -(R pi)'(theta_1) / phi'(theta_1)`.
    pub b_coef: f64,
    /// Player 2's payoff on the band, `B phi(theta_1) + (R pi)(theta_1)`.
    pub u2_at_theta1: f64,
    /// Player 2's unit cost.
    pub k2: f64,
    single1: SingleSolution,
}

impl AsymmetricMpe {
    /// Builds the profile for a given band boundary `theta_prime`; player 1
    /// takes the lump-sum role (swap player order in the scenario to explore
    /// the alternative).
    pub fn build(s: &Scenario, theta_prime: f64) -> Result<Self> {
        s.ensure_valid()?;
        if s.players.len() < 2 {
            return Err(Error::Precondition(
                "asymmetric equilibrium needs two players".into(),
            ));
        }
        let single1 = SingleSolution::solve(s, 0)?;
        let theta_1 = single1.theta;
        if theta_prime >= theta_1 || !theta_prime.is_finite() {
            return Err(Error::Precondition(format!(
                "theta_prime = {theta_prime} must lie below player 1's threshold {theta_1}"
            )));
        }
        let forms = single1.forms();
        let b_coef = -forms.resolvent_d1(theta_1) / forms.phi_d1(theta_1);
        let u2_at_theta1 = b_coef * forms.phi(theta_1) + forms.resolvent(theta_1);
        Ok(AsymmetricMpe {
            theta_prime,
            theta_1,
            b_coef,
            u2_at_theta1,
            k2: s.players[1].k,
            single1,
        })
    }

    /// Player 1's payoff function (their single-controller value).
    pub fn payoff1(&self, x: f64) -> f64 {
        self.single1.value(x)
    }

    pub fn single1(&self) -> &SingleSolution {
        &self.single1
    }

    /// Player 2's payoff: continuation above `theta_1`, flat on the band,
    /// linear with slope `k2` below `theta_prime`.
    pub fn payoff2(&self, x: f64) -> f64 {
        let forms = self.single1.forms();
        if x >= self.theta_1 {
            self.b_coef * forms.phi(x) + forms.resolvent(x)
        } else if x > self.theta_prime {
            self.u2_at_theta1
        } else {
            self.u2_at_theta1 + (x - self.theta_prime) * self.k2
        }
    }

    /// First derivative of player 2's payoff (undefined at `theta_prime`;
    /// callers evaluate one-sided around the kinks).
    pub fn payoff2_d1(&self, x: f64) -> f64 {
        let forms = self.single1.forms();
        if x >= self.theta_1 {
            self.b_coef * forms.phi_d1(x) + forms.resolvent_d1(x)
        } else if x > self.theta_prime {
            0.0
        } else {
            self.k2
        }
    }

    /// `A U_2(x) + pi(x)`, piecewise.
    pub fn generator_residual2(&self, x: f64) -> f64 {
        let forms = self.single1.forms();
        let d = forms.diffusion();
        let r = forms.r();
        if x >= self.theta_1 {
            let v = self.b_coef * forms.phi(x) + forms.resolvent(x);
            let v1 = self.b_coef * forms.phi_d1(x) + forms.resolvent_d1(x);
            let v2 = self.b_coef * forms.phi_d2(x) + forms.resolvent_d2(x);
            0.5 * d.sigma * d.sigma * v2 + d.mu * v1 - r * v + forms.pi(x)
        } else if x > self.theta_prime {
            -r * self.u2_at_theta1 + forms.pi(x)
        } else {
            d.mu * self.k2 - r * (self.u2_at_theta1 + (x - self.theta_prime) * self.k2)
                + forms.pi(x)
        }
    }

    /// Player 1's regular rate: active below `theta_prime`, where it keeps
    /// player 2 indifferent.
    pub fn rate1(&self, x: f64) -> f64 {
        if x < self.theta_prime {
            -self.generator_residual2(x) / self.k2
        } else {
            0.0
        }
    }

    /// Player 2's regular rate: active below `theta_prime`, where it keeps
    /// player 1 indifferent.
    pub fn rate2(&self, x: f64) -> f64 {
        if x < self.theta_prime {
            -self.single1.generator_residual(x) / self.single1.k
        } else {
            0.0
        }
    }

    /// Grid for the feasibility conditions: `[theta_prime - 10, theta_1 + 15]`
    /// in steps of 0.01, with one-sided offsets replacing the kinks.
    pub fn default_condition_grid(&self) -> Vec<f64> {
        let mut grid: Vec<f64> =
            grid_range(self.theta_prime - 10.0, self.theta_1 + 15.0, 0.01)
                .into_iter()
                .filter(|&x| {
                    (x - self.theta_prime).abs() > 1e-6 && (x - self.theta_1).abs() > 1e-6
                })
                .collect();
        for kink in [self.theta_prime, self.theta_1] {
            grid.push(kink - 1e-6);
            grid.push(kink + 1e-6);
        }
        grid.sort_by(f64::total_cmp);
        grid
    }

    /// Checks the feasibility conditions over a grid (which must avoid the
    /// two kinks): `U_2' <= k_2`, `A U_2 + pi <= 0`, and nonnegativity of
    /// both regular rates. Violations are data, not errors.
    pub fn check_conditions(&self, grid: &[f64]) -> ConditionReport {
        let mut report = CheckReport::new();

        let (slope, slope_at) =
            max_over(grid.iter().map(|&x| (x, self.payoff2_d1(x) - self.k2)));
        report.push("u2_slope", slope, slope_at);

        let (gen, gen_at) = max_over(grid.iter().map(|&x| (x, self.generator_residual2(x))));
        report.push("generator_u2", gen, gen_at);

        let below: Vec<f64> = grid
            .iter()
            .copied()
            .filter(|&x| x < self.theta_prime)
            .collect();
        for (name, rate) in [
            ("rate1_nonneg", &(|x| self.rate1(x)) as &dyn Fn(f64) -> f64),
            ("rate2_nonneg", &(|x| self.rate2(x)) as &dyn Fn(f64) -> f64),
        ] {
            if below.is_empty() {
                report.push(name, 0.0, self.theta_prime);
            } else {
                let (v, at) = max_over(below.iter().map(|&x| (x, -rate(x))));
                report.push(name, v, at);
            }
        }

        report
    }

    /// Fitted linear-growth constant `max |u_i(x)| / (1 + |x|)` over the
    /// grid, a finite-resolution proxy for admissibility of the rates.
    pub fn growth_constant(&self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&x| {
                let bound = 1.0 + x.abs();
                (self.rate1(x).abs() / bound).max(self.rate2(x).abs() / bound)
            })
            .fold(0.0, f64::max)
    }
}

/// One probe of the critical-cost bisection.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct K2Probe {
    pub k2: f64,
    pub passed: bool,
    pub max_violation_u2prime: f64,
    pub max_violation_au2: f64,
}

/// Smallest player-2 cost at which the asymmetric profile remains an
/// equilibrium, bisected to width `tol`; the conditions must fail at `lo`
/// and pass at `hi`.
pub fn critical_k2(s: &Scenario, theta_prime: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    critical_k2_traced(s, theta_prime, lo, hi, tol).map(|(k2, _)| k2)
}

/// As [`critical_k2`], also returning every probed cost for reporting.
pub fn critical_k2_traced(
    s: &Scenario,
    theta_prime: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, Vec<K2Probe>)> {
    let well_formed = lo < hi && tol > 0.0 && lo.is_finite() && hi.is_finite() && tol.is_finite();
    if !well_formed {
        return Err(Error::Precondition(format!(
            "need lo < hi and tol > 0 (got lo = {lo}, hi = {hi}, tol = {tol})"
        )));
    }
    if s.players.len() < 2 {
        return Err(Error::Precondition(
            "critical cost search needs two players".into(),
        ));
    }

    let mut probes = Vec::new();
    let mut probe = |k2: f64| -> Result<bool> {
        let mut varied = s.clone();
        varied.players[1].k = k2;
        let m = AsymmetricMpe::build(&varied, theta_prime)?;
        let report = m.check_conditions(&m.default_condition_grid());
        let passed = report.passed(CONDITION_TOL);
        probes.push(K2Probe {
            k2,
            passed,
            max_violation_u2prime: report.get("u2_slope").map_or(f64::NAN, |s| s.max_violation),
            max_violation_au2: report.get("generator_u2").map_or(f64::NAN, |s| s.max_violation),
        });
        Ok(passed)
    };

    if probe(lo)? {
        return Err(Error::Precondition(format!(
            "conditions already pass at lo = {lo}; the bracket must fail at lo and pass at hi"
        )));
    }
    if !probe(hi)? {
        return Err(Error::Precondition(format!(
            "conditions still fail at hi = {hi}; the bracket must fail at lo and pass at hi"
        )));
    }

    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi), probes))
}
