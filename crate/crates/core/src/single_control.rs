//! Single-controller benchmark: the optimal lump-sum contribution policy.
//!
//! The optimal policy keeps the state at or above a threshold `theta`: boost
//! to `theta` immediately when below, do nothing above. The value function is
//!
//! ```text
//! V(x) = k (x - theta) + V(theta)        for x < theta
//!      = (R pi)(x) + A phi(x)            for x >= theta
//! ```
//!
//! with `(theta, A)` pinned jointly by smooth pasting: `V'(theta) = k` and
//! `V''(theta) = 0`.

use crate::error::{Error, Result};
use crate::model::{self, ClosedForms, Scenario};
use crate::report::{grid_range, max_over, CheckReport};

/// Violation report of the optimality conditions; serializes to
/// `{condition_name: {max_violation, at_x}}`.
pub type OptimalityReport = CheckReport;

/// Solved single-controller policy: threshold, pasting coefficient, and the
/// value at the threshold, plus the closed forms needed to evaluate `V`.
#[derive(Debug, Clone)]
pub struct SingleSolution {
    /// Boundary of the contribution region.
    pub theta: f64,
    /// Coefficient of `phi` in the continuation branch.
    pub a_coef: f64,
    /// Value at the threshold.
    pub v_theta: f64,
    /// Unit contribution cost of the solved player.
    pub k: f64,
    forms: ClosedForms,
}

/// Threshold of the contribution region, from the closed form
/// `theta = ln(k beta gamma_minus / (nu (nu - gamma_minus))) / nu`
/// (the deterministic limit substitutes `gamma_minus = r/mu`).
pub fn solve_threshold(s: &Scenario, player: usize) -> Result<f64> {
    s.ensure_valid()?;
    let k = s.player(player)?.k;
    let forms = ClosedForms::assemble(s);
    Ok(closed_form_threshold(&forms, k))
}

fn closed_form_threshold(forms: &ClosedForms, k: f64) -> f64 {
    let nu = forms.profit().nu;
    let gm = forms.gamma_minus;
    // Admissibility (beta > 0) places nu strictly between the exponents, so
    // the argument of the logarithm is positive.
    (k * forms.beta * gm / (nu * (nu - gm))).ln() / nu
}

/// Threshold by the independent route: bracketed bisection on the
/// cross-multiplied smooth-pasting condition
/// `N(x) = (k - (R pi)'(x)) phi''(x) + (R pi)''(x) phi'(x)`,
/// which is negative left of the root and positive right of it.
pub fn threshold_root(s: &Scenario, player: usize) -> Result<f64> {
    s.ensure_valid()?;
    let k = s.player(player)?.k;
    let forms = ClosedForms::assemble(s);
    let x_star = model::q_peak_scan(s, k).map_err(|detail| Error::AssumptionFailed {
        check: "q_single_peak".into(),
        detail,
    })?;

    let n = |x: f64| {
        (k - forms.resolvent_d1(x)) * forms.phi_d2(x) + forms.resolvent_d2(x) * forms.phi_d1(x)
    };

    // The root lies left of the peak of q (coinciding with it only in the
    // deterministic limit), so anchor the bracket just right of the peak and
    // expand leftward.
    let hi = x_star + 1.0;
    let n_hi = n(hi);
    if n_hi == 0.0 {
        return Ok(hi);
    }
    let mut width = 1.0;
    let mut lo = x_star - width;
    let mut n_lo = n(lo);
    let mut expansions = 0;
    while n_lo.signum() == n_hi.signum() {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::ThresholdNotBracketed { lo, hi, n_lo, n_hi });
        }
        width *= 2.0;
        lo = x_star - width;
        n_lo = n(lo);
    }
    if n_lo == 0.0 {
        return Ok(lo);
    }

    let (mut a, mut b) = (lo, hi);
    let mut n_a = n_lo;
    while b - a > 1e-10 {
        let mid = 0.5 * (a + b);
        let n_mid = n(mid);
        if n_mid == 0.0 {
            return Ok(mid);
        }
        if n_mid.signum() == n_a.signum() {
            a = mid;
            n_a = n_mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Pasting coefficient `A = (k - (R pi)'(theta)) / phi'(theta)`.
pub fn coefficient_a(s: &Scenario, player: usize, theta: f64) -> Result<f64> {
    s.ensure_valid()?;
    let k = s.player(player)?.k;
    let forms = ClosedForms::assemble(s);
    coefficient_from_forms(&forms, k, theta)
}

fn coefficient_from_forms(forms: &ClosedForms, k: f64, theta: f64) -> Result<f64> {
    let slope = forms.phi_d1(theta);
    if slope.abs() < 1e-300 {
        return Err(Error::Precondition(format!(
            "phi'({theta}) vanishes; cannot form the pasting coefficient"
        )));
    }
    Ok((k - forms.resolvent_d1(theta)) / slope)
}

impl SingleSolution {
    /// Solves the benchmark for one player.
    pub fn solve(s: &Scenario, player: usize) -> Result<Self> {
        let theta = solve_threshold(s, player)?;
        Self::with_parameters(s, player, theta, None)
    }

    /// Assembles a solution at an explicit threshold (and optionally an
    /// explicit coefficient), re-fitting `A` to the threshold when not
    /// given. Used for perturbation studies; the unperturbed constructor is
    /// [`SingleSolution::solve`].
    pub fn with_parameters(
        s: &Scenario,
        player: usize,
        theta: f64,
        a_coef: Option<f64>,
    ) -> Result<Self> {
        s.ensure_valid()?;
        let k = s.player(player)?.k;
        let forms = ClosedForms::assemble(s);
        if let Some(cut) = s.profit.cutoff {
            if cut.x_c >= theta {
                return Err(Error::AssumptionFailed {
                    check: "cutoff_below_threshold".into(),
                    detail: format!(
                        "the profit cutoff x_c = {} must lie below the threshold {theta}",
                        cut.x_c
                    ),
                });
            }
        }
        let a_coef = match a_coef {
            Some(a) => a,
            None => coefficient_from_forms(&forms, k, theta)?,
        };
        let v_theta = forms.resolvent(theta) + a_coef * forms.phi(theta);
        Ok(SingleSolution {
            theta,
            a_coef,
            v_theta,
            k,
            forms,
        })
    }

    pub fn forms(&self) -> &ClosedForms {
        &self.forms
    }

    /// Value function, piecewise across the threshold.
    pub fn value(&self, x: f64) -> f64 {
        if x < self.theta {
            self.k * (x - self.theta) + self.v_theta
        } else {
            self.forms.resolvent(x) + self.a_coef * self.forms.phi(x)
        }
    }

    pub fn value_d1(&self, x: f64) -> f64 {
        if x < self.theta {
            self.k
        } else {
            self.forms.resolvent_d1(x) + self.a_coef * self.forms.phi_d1(x)
        }
    }

    pub fn value_d2(&self, x: f64) -> f64 {
        if x < self.theta {
            0.0
        } else {
            self.forms.resolvent_d2(x) + self.a_coef * self.forms.phi_d2(x)
        }
    }

    /// `A V(x) + pi(x)` from the analytic derivatives.
    pub fn generator_residual(&self, x: f64) -> f64 {
        let d = self.forms.diffusion();
        0.5 * d.sigma * d.sigma * self.value_d2(x) + d.mu * self.value_d1(x)
            - self.forms.r() * self.value(x)
            + self.forms.pi(x)
    }

    /// Default verification grid `[theta - 15, theta + 15]` in steps of 0.01.
    pub fn default_grid(&self) -> Vec<f64> {
        grid_range(self.theta - 15.0, self.theta + 15.0, 0.01)
    }

    /// Checks the optimality conditions over a grid and the smooth-pasting
    /// residuals at the threshold. Violations are reported, never raised.
    ///
    /// Conditions (one-sided unless noted):
    /// - `hjb`: `A V + pi <= 0`
    /// - `gradient`: `V' - k <= 0`
    /// - `complementarity`: `|(A V + pi)(V' - k)| = 0`
    /// - smooth pasting at `theta`, analytic and central-difference.
    pub fn verify_optimality(&self, grid: &[f64]) -> OptimalityReport {
        let mut report = CheckReport::new();

        let (hjb, hjb_at) = max_over(grid.iter().map(|&x| (x, self.generator_residual(x))));
        report.push("hjb", hjb, hjb_at);

        let (grad, grad_at) = max_over(grid.iter().map(|&x| (x, self.value_d1(x) - self.k)));
        report.push("gradient", grad, grad_at);

        let (comp, comp_at) = max_over(
            grid.iter()
                .map(|&x| (x, (self.generator_residual(x) * (self.value_d1(x) - self.k)).abs())),
        );
        report.push("complementarity", comp, comp_at);

        // Analytic residuals from the continuation branch at the boundary.
        let slope = self.forms.resolvent_d1(self.theta) + self.a_coef * self.forms.phi_d1(self.theta);
        report.push("smooth_pasting_slope", (slope - self.k).abs(), self.theta);
        let curv = self.forms.resolvent_d2(self.theta) + self.a_coef * self.forms.phi_d2(self.theta);
        report.push("smooth_pasting_curvature", curv.abs(), self.theta);

        // Central-difference counterparts straddling the boundary.
        let h = 1e-4;
        let (vm, v0, vp) = (
            self.value(self.theta - h),
            self.value(self.theta),
            self.value(self.theta + h),
        );
        report.push(
            "smooth_pasting_slope_fd",
            ((vp - vm) / (2.0 * h) - self.k).abs(),
            self.theta,
        );
        report.push(
            "smooth_pasting_curvature_fd",
            ((vp - 2.0 * v0 + vm) / (h * h)).abs(),
            self.theta,
        );

        report
    }
}
