//! Controlled-SDE Monte Carlo.
//!
//! Euler-Maruyama steps `Z+ = Z + (mu + sum u_i(Z)) dt + sigma sqrt(dt) N(0,1)`
//! with the control mechanism of the active policy layered on top:
//!
//! - `Singular(theta)`: clamp-and-credit reflection at `theta`, plus an
//!   initial jump when the path starts below the threshold;
//! - `SymmetricRegular`: both players contribute at the equilibrium rate,
//!   no reflection: the state fluctuates freely below the threshold;
//! - `Asymmetric`: regular rates below `theta_prime`, player 1 lifts the
//!   state from the band `[theta_prime, theta_1)` to `theta_1` and reflects
//!   it there.
//!
//! Paths are reproducible per `(seed, path_index)`: every path draws from
//! its own ChaCha stream, so estimates do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::mpe::{AsymmetricMpe, SymmetricMpe};

/// Strategy profile driving the simulated state.
#[derive(Debug, Clone)]
pub enum ControlPolicy {
    /// Uncontrolled diffusion.
    None,
    /// Lump-sum policy reflecting the state at `theta`. With one player the
    /// whole cost is theirs; with two, pushes are split equally (a
    /// diagnostic mode - the symmetric equilibrium itself uses rates).
    Singular { theta: f64 },
    /// Symmetric regular-control equilibrium (two players).
    SymmetricRegular(SymmetricMpe),
    /// Asymmetric profile: player 1 owns the reflecting boundary.
    Asymmetric(AsymmetricMpe),
}

impl ControlPolicy {
    /// Instantaneous regular rates `(u1, u2)` at `x`; zero when inactive.
    pub fn rates(&self, x: f64) -> (f64, f64) {
        match self {
            ControlPolicy::None | ControlPolicy::Singular { .. } => (0.0, 0.0),
            ControlPolicy::SymmetricRegular(m) => (m.rate(x), m.rate(x)),
            ControlPolicy::Asymmetric(m) => (m.rate1(x), m.rate2(x)),
        }
    }
}

/// Discretization and sampling plan.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub z0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        // NaN fails the finite check, so the sign comparisons stay simple.
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(Error::InvalidInput(format!("dt must be positive (got {})", self.dt)));
        }
        if self.horizon <= 0.0 || !self.horizon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive (got {})",
                self.horizon
            )));
        }
        if self.dt > self.horizon {
            return Err(Error::InvalidInput(format!(
                "dt = {} exceeds the horizon {}",
                self.dt, self.horizon
            )));
        }
        if !self.z0.is_finite() {
            return Err(Error::InvalidInput("z0 must be finite".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidInput("n_paths must be at least 1".into()));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

/// A lump-sum contribution event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jump {
    pub time: f64,
    /// Contributing player, 0-based.
    pub player: usize,
    /// This player's share of the state jump.
    pub size: f64,
}

/// Sampled trajectory of the state and the cumulative contributions.
///
/// `z[0]` is the initial condition before any time-zero jump; all later
/// samples are the settled (post-control) states on the `dt` grid, so under
/// `Singular(theta)` every sample after time zero sits at or above the
/// threshold. Reflection pushes accumulate into the `xi` series without jump
/// entries; lump-sum boosts are listed in `jumps`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub jumps: Vec<Jump>,
}

/// Monte Carlo payoff estimate for one player.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PayoffEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Discount-tail bound on the ignored profit beyond the horizon:
    /// `pi_M e^{-r T} / r` with `pi_M = 1` for this profit family.
    pub truncation_bound: f64,
}

trait StepObserver {
    fn init(&mut self, z0: f64);
    fn jump(&mut self, time: f64, player: usize, size: f64);
    fn sample(&mut self, t: f64, z: f64, xi: [f64; 2]);
}

struct NoObserver;

impl StepObserver for NoObserver {
    fn init(&mut self, _z0: f64) {}
    fn jump(&mut self, _time: f64, _player: usize, _size: f64) {}
    fn sample(&mut self, _t: f64, _z: f64, _xi: [f64; 2]) {}
}

impl StepObserver for PathRecord {
    fn init(&mut self, z0: f64) {
        self.times.push(0.0);
        self.z.push(z0);
        self.xi1.push(0.0);
        self.xi2.push(0.0);
    }

    fn jump(&mut self, time: f64, player: usize, size: f64) {
        self.jumps.push(Jump { time, player, size });
    }

    fn sample(&mut self, t: f64, z: f64, xi: [f64; 2]) {
        self.times.push(t);
        self.z.push(z);
        self.xi1.push(xi[0]);
        self.xi2.push(xi[1]);
    }
}

/// Per-player unit costs; a missing second player only matters for policies
/// that would credit them.
fn player_costs(s: &Scenario, p: &ControlPolicy) -> Result<[f64; 2]> {
    let needs_two = matches!(
        p,
        ControlPolicy::SymmetricRegular(_) | ControlPolicy::Asymmetric(_)
    ) || (matches!(p, ControlPolicy::Singular { .. }) && s.players.len() >= 2);
    if needs_two && s.players.len() < 2 {
        return Err(Error::Precondition(
            "this policy credits two players but the scenario lists fewer".into(),
        ));
    }
    Ok([
        s.players[0].k,
        s.players.get(1).map_or(0.0, |p| p.k),
    ])
}

/// Runs one path, returning the discounted payoff of each player.
fn run_path<O: StepObserver>(
    s: &Scenario,
    policy: &ControlPolicy,
    c: &SimConfig,
    disc: &[f64],
    path_index: u64,
    ks: [f64; 2],
    obs: &mut O,
) -> Result<[f64; 2]> {
    let mu = s.diffusion.mu;
    let sigma = s.diffusion.sigma;
    let dt = c.dt;
    let sig_sqrt_dt = sigma * dt.sqrt();
    let profit = s.profit;
    let n_steps = c.n_steps();

    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    rng.set_stream(path_index);

    let mut z = c.z0;
    let mut xi = [0.0_f64; 2];
    let mut cost = [0.0_f64; 2];
    obs.init(z);

    // Time-zero lump sum when the start lies in a singular region.
    match policy {
        ControlPolicy::Singular { theta } if z < *theta => {
            let size = *theta - z;
            let shares: &[(usize, f64)] = if s.players.len() >= 2 {
                &[(0, 0.5), (1, 0.5)]
            } else {
                &[(0, 1.0)]
            };
            for &(i, w) in shares {
                let part = size * w;
                xi[i] += part;
                cost[i] += ks[i] * part; // disc[0] = 1
                obs.jump(0.0, i, part);
            }
            z = *theta;
        }
        ControlPolicy::Asymmetric(m) if z >= m.theta_prime && z < m.theta_1 => {
            let size = m.theta_1 - z;
            xi[0] += size;
            cost[0] += ks[0] * size;
            obs.jump(0.0, 0, size);
            z = m.theta_1;
        }
        _ => {}
    }

    let mut discounted_profit = 0.0;
    let mut pi_curr = profit.value(z);

    for n in 0..n_steps {
        let (u1, u2) = policy.rates(z);
        if u1 > 0.0 || u2 > 0.0 {
            cost[0] += disc[n] * ks[0] * u1 * dt;
            cost[1] += disc[n] * ks[1] * u2 * dt;
            xi[0] += u1 * dt;
            xi[1] += u2 * dt;
        }

        let mut z_next = z + (mu + u1 + u2) * dt;
        if sigma > 0.0 {
            let draw: f64 = StandardNormal.sample(&mut rng);
            z_next += sig_sqrt_dt * draw;
        }

        let t_next = (n + 1) as f64 * dt;
        match policy {
            ControlPolicy::Singular { theta } => {
                if z_next < *theta {
                    // Reflection push, credited as local time.
                    let push = *theta - z_next;
                    if s.players.len() >= 2 {
                        for i in 0..2 {
                            xi[i] += 0.5 * push;
                            cost[i] += disc[n + 1] * ks[i] * 0.5 * push;
                        }
                    } else {
                        xi[0] += push;
                        cost[0] += disc[n + 1] * ks[0] * push;
                    }
                    z_next = *theta;
                }
            }
            ControlPolicy::Asymmetric(m) => {
                if z >= m.theta_1 && z_next < m.theta_1 {
                    // Down-moves off the reflecting boundary are clamped.
                    let push = m.theta_1 - z_next;
                    xi[0] += push;
                    cost[0] += disc[n + 1] * ks[0] * push;
                    z_next = m.theta_1;
                } else if z < m.theta_prime && z_next >= m.theta_prime && z_next < m.theta_1 {
                    // Entering the band from below triggers player 1's boost.
                    let size = m.theta_1 - z_next;
                    xi[0] += size;
                    cost[0] += disc[n + 1] * ks[0] * size;
                    obs.jump(t_next, 0, size);
                    z_next = m.theta_1;
                }
            }
            _ => {}
        }

        if !z_next.is_finite() {
            return Err(Error::Simulation {
                step: n,
                detail: format!("state became non-finite ({z_next}) from z = {z}"),
            });
        }

        let pi_next = profit.value(z_next);
        discounted_profit += 0.5 * (disc[n] * pi_curr + disc[n + 1] * pi_next) * dt;
        pi_curr = pi_next;
        z = z_next;
        obs.sample(t_next, z, xi);
    }

    Ok([
        discounted_profit - cost[0],
        discounted_profit - cost[1],
    ])
}

fn discount_table(r: f64, dt: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps).map(|n| (-r * n as f64 * dt).exp()).collect()
}

fn check_policy(p: &ControlPolicy) -> Result<()> {
    if let ControlPolicy::SymmetricRegular(m) = p {
        if m.n_players != 2 {
            return Err(Error::Precondition(format!(
                "simulation supports the two-player game (policy has {} players)",
                m.n_players
            )));
        }
    }
    Ok(())
}

/// Simulates a single path (path index 0 of the seed's ensemble).
pub fn simulate_path(s: &Scenario, p: &ControlPolicy, c: &SimConfig) -> Result<PathRecord> {
    s.ensure_valid()?;
    c.validate()?;
    check_policy(p)?;
    let ks = player_costs(s, p)?;
    let disc = discount_table(s.r, c.dt, c.n_steps());
    let mut record = PathRecord::default();
    run_path(s, p, c, &disc, 0, ks, &mut record)?;
    Ok(record)
}

/// Estimates both players' discounted payoffs over `n_paths` independent
/// paths. Paths fan out across workers; the reduction is a fixed-order sum
/// over the path index, so results are identical for any worker count.
pub fn estimate_payoffs(
    s: &Scenario,
    p: &ControlPolicy,
    c: &SimConfig,
) -> Result<[PayoffEstimate; 2]> {
    s.ensure_valid()?;
    c.validate()?;
    check_policy(p)?;
    if c.n_paths < 2 {
        return Err(Error::Precondition(
            "standard errors need n_paths >= 2".into(),
        ));
    }
    let ks = player_costs(s, p)?;
    let disc = discount_table(s.r, c.dt, c.n_steps());

    let payoffs: Vec<[f64; 2]> = (0..c.n_paths as u64)
        .into_par_iter()
        .map(|idx| run_path(s, p, c, &disc, idx, ks, &mut NoObserver))
        .collect::<Result<_>>()?;

    let n = c.n_paths as f64;
    let truncation_bound = (-s.r * c.horizon).exp() / s.r;
    let mut out = [PayoffEstimate {
        mean: 0.0,
        std_error: 0.0,
        n_paths: c.n_paths,
        dt: c.dt,
        horizon: c.horizon,
        truncation_bound,
    }; 2];
    for player in 0..2 {
        let mean = payoffs.iter().map(|p| p[player]).sum::<f64>() / n;
        let var = payoffs
            .iter()
            .map(|p| (p[player] - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        out[player].mean = mean;
        out[player].std_error = (var / n).sqrt();
    }
    Ok(out)
}

/// Estimates one player's discounted payoff.
pub fn estimate_payoff(
    s: &Scenario,
    p: &ControlPolicy,
    c: &SimConfig,
    player: usize,
) -> Result<PayoffEstimate> {
    s.player(player)?;
    Ok(estimate_payoffs(s, p, c)?[player.min(1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Diffusion, ProfitSpec};
    use crate::single_control::SingleSolution;

    fn example1() -> Scenario {
        Scenario::new(
            Diffusion { mu: -1.0, sigma: 1.0 },
            1.0,
            ProfitSpec::exponential(-0.3),
            &[1.0],
        )
    }

    fn example1_two_players() -> Scenario {
        Scenario::new(
            Diffusion { mu: -1.0, sigma: 1.0 },
            1.0,
            ProfitSpec::exponential(-0.3),
            &[1.0, 1.0],
        )
    }

    fn example2() -> Scenario {
        Scenario::new(
            Diffusion { mu: -1.0, sigma: 1.0 },
            1.0,
            ProfitSpec::piecewise(-0.3, 2.0, -10.0),
            &[1.0, 1.0],
        )
    }

    fn deterministic(s: &Scenario) -> Scenario {
        let mut d = s.clone();
        d.diffusion.sigma = 0.0;
        d
    }

    #[test]
    fn uncontrolled_deterministic_flow() {
        let s = deterministic(&example1());
        let c = SimConfig { z0: 0.0, dt: 1e-3, horizon: 5.0, n_paths: 1, seed: 7 };
        let rec = simulate_path(&s, &ControlPolicy::None, &c).unwrap();
        for (t, z) in rec.times.iter().zip(&rec.z) {
            assert!((z + t).abs() <= 1e-9, "z({t}) = {z}");
        }
        assert!(rec.jumps.is_empty());
        assert!(rec.xi1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singular_deterministic_holds_at_boundary() {
        let s = deterministic(&example1());
        let theta = crate::single_control::solve_threshold(&s, 0).unwrap();
        let c = SimConfig { z0: 0.0, dt: 1e-3, horizon: 10.0, n_paths: 1, seed: 7 };
        let rec = simulate_path(&s, &ControlPolicy::Singular { theta }, &c).unwrap();
        for (t, z) in rec.times.iter().zip(&rec.z) {
            assert!((z - (-t).max(theta)).abs() <= 1e-9, "z({t}) = {z}");
        }
        // Contribution balances drift once the boundary binds.
        let expected = (10.0 - theta.abs()).max(0.0);
        let total = rec.xi1.last().unwrap() + rec.xi2.last().unwrap();
        assert!((total - expected).abs() <= 1e-9, "xi total {total} vs {expected}");
        // Single player carries the whole contribution.
        assert_eq!(*rec.xi2.last().unwrap(), 0.0);
    }

    #[test]
    fn start_below_threshold_jumps_at_time_zero() {
        let s = example1();
        let theta = crate::single_control::solve_threshold(&s, 0).unwrap();
        let c = SimConfig { z0: theta - 1.0, dt: 1e-3, horizon: 1.0, n_paths: 1, seed: 3 };
        let rec = simulate_path(&s, &ControlPolicy::Singular { theta }, &c).unwrap();
        assert_eq!(rec.jumps.len(), 1);
        let j = rec.jumps[0];
        assert_eq!((j.time, j.player), (0.0, 0));
        assert!((j.size - 1.0).abs() <= 1e-12);
        // Pre-jump start is recorded; everything after sits at or above theta.
        assert_eq!(rec.z[0], theta - 1.0);
        for &z in &rec.z[1..] {
            assert!(z >= theta - 1e-12);
        }
        // Two players split the initial jump in the diagnostic mode.
        let s2 = example1_two_players();
        let rec2 = simulate_path(&s2, &ControlPolicy::Singular { theta }, &c).unwrap();
        assert_eq!(rec2.jumps.len(), 2);
        assert!((rec2.jumps[0].size - 0.5).abs() <= 1e-12);
        assert_eq!(rec2.jumps[1].player, 1);
    }

    #[test]
    fn regular_equilibrium_lets_the_state_cross_the_threshold() {
        let s = example2();
        let m = SymmetricMpe::build(&s, 2).unwrap();
        let theta = m.theta();
        let policy = ControlPolicy::SymmetricRegular(m);
        let mut crossed = 0;
        for seed in 0..100 {
            let c = SimConfig { z0: 0.0, dt: 0.01, horizon: 10.0, n_paths: 1, seed };
            let rec = simulate_path(&s, &policy, &c).unwrap();
            if rec.z.iter().any(|&z| z < theta) {
                crossed += 1;
            }
        }
        assert!(crossed >= 1, "no path ever crossed below the threshold");
    }

    #[test]
    fn contributions_never_decrease() {
        let s = example2();
        let theta = crate::single_control::solve_threshold(&s, 0).unwrap();
        let policies = [
            ControlPolicy::Singular { theta },
            ControlPolicy::SymmetricRegular(SymmetricMpe::build(&s, 2).unwrap()),
            ControlPolicy::Asymmetric(AsymmetricMpe::build(&s, -6.0).unwrap()),
        ];
        for (i, p) in policies.iter().enumerate() {
            let c = SimConfig { z0: -7.0, dt: 0.005, horizon: 8.0, n_paths: 1, seed: 11 + i as u64 };
            let rec = simulate_path(&s, p, &c).unwrap();
            for xi in [&rec.xi1, &rec.xi2] {
                for w in xi.windows(2) {
                    assert!(w[1] >= w[0] - 1e-15, "xi decreased: {} -> {}", w[0], w[1]);
                }
            }
        }
    }

    #[test]
    fn asymmetric_band_start_boosts_to_theta1() {
        let s = example2();
        let m = AsymmetricMpe::build(&s, -6.0).unwrap();
        let theta_1 = m.theta_1;
        let c = SimConfig { z0: -5.0, dt: 1e-3, horizon: 1.0, n_paths: 1, seed: 5 };
        let rec = simulate_path(&s, &ControlPolicy::Asymmetric(m), &c).unwrap();
        assert_eq!(rec.jumps.len(), 1);
        assert_eq!(rec.jumps[0].player, 0);
        assert!((rec.jumps[0].size - (theta_1 + 5.0)).abs() <= 1e-12);
        for &z in &rec.z[1..] {
            assert!(z >= theta_1 - 1e-12);
        }
    }

    #[test]
    fn steady_state_is_a_fixed_point_of_the_deterministic_flow() {
        let s = deterministic(&example2());
        let m = SymmetricMpe::build(&s, 2).unwrap();
        let eta = m.steady_state().unwrap();
        let c = SimConfig { z0: eta, dt: 1e-3, horizon: 50.0, n_paths: 1, seed: 0 };
        let rec = simulate_path(&s, &ControlPolicy::SymmetricRegular(m), &c).unwrap();
        for (t, z) in rec.times.iter().zip(&rec.z) {
            assert!((z - eta).abs() <= 1e-6, "drifted to {z} at t = {t}");
        }
    }

    #[test]
    fn asymmetric_path_from_below_boosts_on_reaching_the_band() {
        // Deterministic flow: the regular rates push the state up to
        // theta_prime, player 1 lifts it to theta_1, and the boundary holds.
        let s = deterministic(&example2());
        let m = AsymmetricMpe::build(&s, -6.0).unwrap();
        let theta_1 = m.theta_1;
        let c = SimConfig { z0: -7.0, dt: 1e-3, horizon: 2.0, n_paths: 1, seed: 0 };
        let rec = simulate_path(&s, &ControlPolicy::Asymmetric(m), &c).unwrap();
        assert_eq!(rec.jumps.len(), 1);
        let j = rec.jumps[0];
        assert!(j.time > 0.0 && j.player == 0);
        // The crossing step overshoots theta_prime by at most one drift
        // increment before the boost fires.
        assert!(j.size >= theta_1 - (-6.0) - 0.01, "boost {} too small", j.size);
        assert!((rec.z.last().unwrap() - theta_1).abs() <= 1e-9);
        // Player 2 contributed only through the regular rate before the boost.
        assert!(*rec.xi2.last().unwrap() > 0.0);
        assert_eq!(rec.xi2.last(), rec.xi2.get(rec.xi2.len() - 500));
    }

    #[test]
    fn same_seed_reproduces_paths_and_estimates() {
        let s = example2();
        let m = SymmetricMpe::build(&s, 2).unwrap();
        let policy = ControlPolicy::SymmetricRegular(m);
        let c = SimConfig { z0: 0.0, dt: 0.01, horizon: 5.0, n_paths: 64, seed: 123 };
        let a = simulate_path(&s, &policy, &c).unwrap();
        let b = simulate_path(&s, &policy, &c).unwrap();
        assert_eq!(a, b);
        let e1 = estimate_payoffs(&s, &policy, &c).unwrap();
        let e2 = estimate_payoffs(&s, &policy, &c).unwrap();
        assert_eq!(e1[0].mean.to_bits(), e2[0].mean.to_bits());
        assert_eq!(e1[1].std_error.to_bits(), e2[1].std_error.to_bits());
    }

    #[test]
    fn estimator_needs_two_paths() {
        let s = example1();
        let c = SimConfig { z0: 0.0, dt: 0.01, horizon: 1.0, n_paths: 1, seed: 1 };
        assert!(matches!(
            estimate_payoffs(&s, &ControlPolicy::None, &c),
            Err(Error::Precondition(_))
        ));
        let bad = SimConfig { z0: 0.0, dt: 0.0, horizon: 1.0, n_paths: 2, seed: 1 };
        assert!(matches!(
            estimate_payoffs(&s, &ControlPolicy::None, &bad),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn uncontrolled_estimate_matches_resolvent() {
        let s = example1();
        let forms = crate::model::fundamental_solutions(&s).unwrap();
        let c = SimConfig { z0: 0.0, dt: 0.01, horizon: 25.0, n_paths: 4000, seed: 2024 };
        let est = estimate_payoff(&s, &ControlPolicy::None, &c, 0).unwrap();
        let oracle = forms.resolvent(0.0);
        assert!(
            (est.mean - oracle).abs() <= 3.0 * est.std_error + 5e-3,
            "mean {} vs resolvent {} (se {})",
            est.mean,
            oracle,
            est.std_error
        );
        assert!((est.truncation_bound - (-25.0f64).exp()).abs() <= 1e-12);
    }

    #[test]
    fn singular_estimate_matches_value_function() {
        let s = example1();
        let sol = SingleSolution::solve(&s, 0).unwrap();
        let c = SimConfig { z0: 0.0, dt: 0.005, horizon: 25.0, n_paths: 4000, seed: 41 };
        let est =
            estimate_payoff(&s, &ControlPolicy::Singular { theta: sol.theta }, &c, 0).unwrap();
        let oracle = sol.value(0.0);
        assert!(
            (est.mean - oracle).abs() <= 3.0 * est.std_error + 5e-3,
            "mean {} vs V(0) {} (se {})",
            est.mean,
            oracle,
            est.std_error
        );
    }

    #[test]
    fn halving_dt_moves_the_estimate_within_noise() {
        let s = example1();
        let sol = SingleSolution::solve(&s, 0).unwrap();
        let policy = ControlPolicy::Singular { theta: sol.theta };
        let coarse = SimConfig { z0: 0.0, dt: 0.004, horizon: 25.0, n_paths: 1500, seed: 99 };
        let fine = SimConfig { dt: 0.002, ..coarse };
        let a = estimate_payoff(&s, &policy, &coarse, 0).unwrap();
        let b = estimate_payoff(&s, &policy, &fine, 0).unwrap();
        let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!(
            (a.mean - b.mean).abs() <= 3.0 * combined,
            "dt refinement moved the estimate by {} vs noise {}",
            (a.mean - b.mean).abs(),
            combined
        );
    }

    #[test]
    fn discounted_negative_part_decays() {
        // Spot check of the uncontrolled limit E[e^{-rt} X_t^-] -> 0 using a
        // test-local Euler scheme, independent of the engine.
        use rand::Rng;
        let (mu, sigma, r) = (-1.0, 1.0, 1.0);
        let mut means = Vec::new();
        for &t_end in &[5.0, 10.0, 20.0] {
            let dt: f64 = 0.01;
            let steps = (t_end / dt) as usize;
            let mut acc = 0.0;
            for path in 0..3000u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(555);
                rng.set_stream(path);
                let mut x: f64 = 0.0;
                for _ in 0..steps {
                    let draw: f64 = rng.sample(StandardNormal);
                    x += mu * dt + sigma * dt.sqrt() * draw;
                }
                acc += (-r * t_end).exp() * (-x).max(0.0);
            }
            means.push(acc / 3000.0);
        }
        assert!(
            means[0] > means[1] && means[1] > means[2],
            "discounted negative part not decaying: {means:?}"
        );
        assert!(means[2] <= 1e-6);
    }
}
