//! Problem instances and the closed-form machinery they admit.
//!
//! The state follows `dZ = mu dt + sigma dW + d(xi_1) + d(xi_2)` with
//! constant drift `mu < 0` and volatility `sigma >= 0`, flow profit
//!
//! ```text
//! pi(x) = 1 - exp(nu x)            for x >= x_c
//!       = pi(x_c) + rho (x - x_c)  for x <  x_c
//! ```
//!
//! (`nu < 0`; the linear extension keeps the equilibrium rates inside the
//! linear-growth class, and `x_c` absent recovers the pure exponential form),
//! per-player unit contribution cost `k > 0`, and discount rate `r > 0`.
//!
//! For this constant-coefficient family the fundamental solutions of the
//! characteristic operator `A = (sigma^2/2) d^2 + mu d - r` are exponentials
//! `phi(x) = exp(gamma_minus x)`, `psi(x) = exp(gamma_plus x)`, and the
//! resolvent (expected discounted profit of the uncontrolled process) is
//! available in closed form, piecewise across the profit cutoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drift and volatility of the uncontrolled state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diffusion {
    /// Constant drift; negative (the stock deteriorates without contributions).
    pub mu: f64,
    /// Constant volatility; zero selects the deterministic limit.
    pub sigma: f64,
}

/// Linear extension of the profit below a cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitCutoff {
    /// Cutoff location; profit is linear below it.
    pub x_c: f64,
    /// Slope of the linear branch; must exceed `r k` for every player.
    pub rho: f64,
}

/// Flow-profit specification `pi(x) = 1 - exp(nu x)` with an optional
/// piecewise-linear branch below `x_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitSpec {
    /// Exponent of the saturating branch; negative.
    pub nu: f64,
    /// Optional linear branch; `None` means the exponential form everywhere.
    pub cutoff: Option<ProfitCutoff>,
}

impl ProfitSpec {
    pub fn exponential(nu: f64) -> Self {
        ProfitSpec { nu, cutoff: None }
    }

    pub fn piecewise(nu: f64, rho: f64, x_c: f64) -> Self {
        ProfitSpec {
            nu,
            cutoff: Some(ProfitCutoff { x_c, rho }),
        }
    }

    /// Flow profit at `x`.
    pub fn value(&self, x: f64) -> f64 {
        match self.cutoff {
            Some(c) if x < c.x_c => 1.0 - (self.nu * c.x_c).exp() + (x - c.x_c) * c.rho,
            _ => 1.0 - (self.nu * x).exp(),
        }
    }

    /// First derivative of the flow profit (right derivative at the cutoff).
    pub fn slope(&self, x: f64) -> f64 {
        match self.cutoff {
            Some(c) if x < c.x_c => c.rho,
            _ => -self.nu * (self.nu * x).exp(),
        }
    }
}

/// Per-player parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerParams {
    /// Cost of one unit of cumulative contribution.
    pub k: f64,
}

/// A full problem instance.
///
/// One player gives the single-controller benchmark; two (or more) the
/// contribution game. The profit specification is shared by all players,
/// matching the scenario file schema; asymmetry enters through the costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub diffusion: Diffusion,
    /// Discount rate, common to all players.
    pub r: f64,
    pub profit: ProfitSpec,
    pub players: Vec<PlayerParams>,
}

/// Flat scenario-file schema:
/// `{"r", "mu", "sigma", "nu", "rho"?, "x_c"?, "players": [{"k"}, ...]}`.
/// Absent `x_c` means no cutoff; `rho` is required when `x_c` is present.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    r: f64,
    mu: f64,
    sigma: f64,
    nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_c: Option<f64>,
    players: Vec<PlayerJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlayerJson {
    k: f64,
}

impl Scenario {
    pub fn new(diffusion: Diffusion, r: f64, profit: ProfitSpec, ks: &[f64]) -> Self {
        Scenario {
            diffusion,
            r,
            profit,
            players: ks.iter().map(|&k| PlayerParams { k }).collect(),
        }
    }

    /// Parses the scenario-file JSON schema.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ScenarioJson =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let cutoff = match raw.x_c {
            Some(x_c) => {
                let rho = raw.rho.ok_or_else(|| {
                    Error::InvalidInput("field `rho` is required when `x_c` is present".into())
                })?;
                Some(ProfitCutoff { x_c, rho })
            }
            None => None,
        };
        Ok(Scenario {
            diffusion: Diffusion {
                mu: raw.mu,
                sigma: raw.sigma,
            },
            r: raw.r,
            profit: ProfitSpec {
                nu: raw.nu,
                cutoff,
            },
            players: raw.players.iter().map(|p| PlayerParams { k: p.k }).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        let raw = ScenarioJson {
            r: self.r,
            mu: self.diffusion.mu,
            sigma: self.diffusion.sigma,
            nu: self.profit.nu,
            rho: self.profit.cutoff.map(|c| c.rho),
            x_c: self.profit.cutoff.map(|c| c.x_c),
            players: self.players.iter().map(|p| PlayerJson { k: p.k }).collect(),
        };
        serde_json::to_string(&raw).expect("scenario serializes")
    }

    pub fn player(&self, index: usize) -> Result<PlayerParams> {
        self.players.get(index).copied().ok_or_else(|| {
            Error::InvalidInput(format!(
                "player index {} out of range (scenario has {} players)",
                index,
                self.players.len()
            ))
        })
    }

    /// Runs the validation checks; `Err` only for malformed input, which is
    /// distinct from a recorded assumption failure.
    pub fn validate(&self) -> Result<ValidationReport> {
        validate_scenario(self)
    }

    /// Gate used by every solver: malformed input or the first failed
    /// assumption check becomes an error naming the check.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate()?;
        match report.first_failure() {
            None => Ok(()),
            Some(check) => Err(Error::AssumptionFailed {
                check: check.name.clone(),
                detail: check.detail.clone(),
            }),
        }
    }
}

/// One named validation check with the quantity it inspected.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

/// Ordered assumption checks; stops at the first failure.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    fn record(&mut self, name: &str, passed: bool, value: f64, detail: String) -> bool {
        self.checks.push(CheckOutcome {
            name: name.to_owned(),
            passed,
            value,
            detail,
        });
        passed
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }

    /// Located profit-vs-cost peak of `q` for a player, when the scan ran.
    pub fn x_star(&self, player: usize) -> Option<f64> {
        self.checks
            .iter()
            .find(|c| c.name == format!("q_single_peak_p{}", player + 1))
            .filter(|c| c.passed)
            .map(|c| c.value)
    }
}

fn require_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("field `{name}` is not finite")))
    }
}

/// Validates a scenario: structural sanity first (input errors), then the
/// standing assumptions in order, stopping at the first violation.
pub fn validate_scenario(s: &Scenario) -> Result<ValidationReport> {
    // Structural sanity: these are input errors, not assumption failures.
    require_finite("mu", s.diffusion.mu)?;
    require_finite("sigma", s.diffusion.sigma)?;
    require_finite("r", s.r)?;
    require_finite("nu", s.profit.nu)?;
    if let Some(c) = s.profit.cutoff {
        require_finite("x_c", c.x_c)?;
        require_finite("rho", c.rho)?;
    }
    if s.players.is_empty() {
        return Err(Error::InvalidInput("scenario has no players".into()));
    }
    for (i, p) in s.players.iter().enumerate() {
        require_finite(&format!("players[{i}].k"), p.k)?;
        if p.k <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "players[{i}].k must be positive (got {})",
                p.k
            )));
        }
    }
    if s.diffusion.sigma < 0.0 {
        return Err(Error::InvalidInput(format!(
            "sigma must be nonnegative (got {})",
            s.diffusion.sigma
        )));
    }
    if s.r <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "r must be positive (got {})",
            s.r
        )));
    }
    if s.profit.nu >= 0.0 {
        return Err(Error::InvalidInput(format!(
            "nu must be negative (got {})",
            s.profit.nu
        )));
    }

    let mut report = ValidationReport::default();
    let (mu, sigma, r, nu) = (s.diffusion.mu, s.diffusion.sigma, s.r, s.profit.nu);

    if !report.record(
        "mu_negative",
        mu < 0.0,
        mu,
        format!("drift mu = {mu} must be negative"),
    ) {
        return Ok(report);
    }

    let beta = r - mu * nu - 0.5 * sigma * sigma * nu * nu;
    if !report.record(
        "beta_positive",
        beta > 0.0,
        beta,
        format!("admissibility requires sigma^2 nu^2 / 2 + mu nu - r < 0; beta = {beta}"),
    ) {
        return Ok(report);
    }

    if let Some(c) = s.profit.cutoff {
        let k_max = s.players.iter().map(|p| p.k).fold(0.0, f64::max);
        if !report.record(
            "rho_exceeds_rk",
            c.rho > r * k_max,
            c.rho - r * k_max,
            format!("rho = {} must exceed r*k = {} for every player", c.rho, r * k_max),
        ) {
            return Ok(report);
        }
    }

    for (i, p) in s.players.iter().enumerate() {
        let name = format!("q_single_peak_p{}", i + 1);
        match q_peak_scan(s, p.k) {
            Ok(x_star) => {
                report.record(&name, true, x_star, format!("q peaks at x* = {x_star}"));
            }
            Err(detail) => {
                report.record(&name, false, f64::NAN, detail);
                return Ok(report);
            }
        }
    }

    // Diagnostic for the almost-everywhere condition mu' + pi' - r k != 0:
    // flags stretches where the quantity is numerically constant at zero.
    // A grid scan cannot certify an a.e. statement; this only surfaces
    // obvious violations.
    let k_min = s.players.iter().map(|p| p.k).fold(f64::INFINITY, f64::min);
    let center = exp_peak_candidate(s, k_min);
    let mut consecutive = 0usize;
    let mut worst = f64::INFINITY;
    let mut flagged = false;
    for i in 0..=800 {
        let x = center - 20.0 + 0.05 * i as f64;
        let v = (s.profit.slope(x) - r * k_min).abs();
        worst = worst.min(v);
        if v < 1e-12 {
            consecutive += 1;
            if consecutive >= 2 {
                flagged = true;
            }
        } else {
            consecutive = 0;
        }
    }
    report.record(
        "assumption4_diagnostic",
        !flagged,
        worst,
        "pi'(x) - r k is not numerically constant at zero on the scan grid".into(),
    );

    Ok(report)
}

/// Where the exponential branch alone would peak: solves `pi'(x) = r k`.
fn exp_peak_candidate(s: &Scenario, k: f64) -> f64 {
    let nu = s.profit.nu;
    let candidate = (s.r * k / -nu).ln() / nu;
    match s.profit.cutoff {
        Some(c) if candidate < c.x_c => c.x_c,
        _ => candidate,
    }
}

/// Scans `q(x) = pi(x) + (mu - r x) k` for the single-peak shape and
/// returns the refined peak, or a description of the failure.
pub(crate) fn q_peak_scan(s: &Scenario, k: f64) -> std::result::Result<f64, String> {
    let center = exp_peak_candidate(s, k);
    let lo = center - 10.0;
    let step = 0.05;
    let n = 400usize;
    let q = |x: f64| s.profit.value(x) + (s.diffusion.mu - s.r * x) * k;

    let mut rises = 0usize;
    let mut falls = 0usize;
    let mut last_sign = 0i8;
    let mut changes = 0usize;
    let mut prev = q(lo);
    for i in 1..=n {
        let x = lo + step * i as f64;
        let next = q(x);
        let sign = if next > prev {
            1
        } else if next < prev {
            -1
        } else {
            0
        };
        if sign > 0 {
            rises += 1;
        } else if sign < 0 {
            falls += 1;
        }
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                changes += 1;
            }
            last_sign = sign;
        }
        prev = next;
    }
    if rises == 0 || falls == 0 || changes != 1 {
        return Err(format!(
            "q is not single-peaked on [{lo}, {}]: {rises} rising cells, {falls} falling cells, {changes} slope sign changes",
            lo + step * n as f64
        ));
    }

    // Refine the peak: bisection on q'(x) = pi'(x) - r k, which crosses from
    // positive to negative exactly once (possibly at the profit kink).
    let slope = |x: f64| s.profit.slope(x) - s.r * k;
    let (mut a, mut b) = (center - 10.0, center + 10.0);
    if slope(a) <= 0.0 || slope(b) >= 0.0 {
        return Err(format!(
            "q'(x) does not change sign on [{a}, {b}]: q'({a}) = {}, q'({b}) = {}",
            slope(a),
            slope(b)
        ));
    }
    for _ in 0..120 {
        let mid = 0.5 * (a + b);
        if slope(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Closed forms attached to a validated scenario: exponents of the
/// fundamental solutions, the resolvent denominator, and the piecewise
/// matching coefficients.
#[derive(Debug, Clone, Copy)]
pub struct ClosedForms {
    /// Exponent of the increasing solution `psi`; `None` in the
    /// deterministic limit, which has no increasing solution.
    pub gamma_plus: Option<f64>,
    /// Exponent of the decreasing solution `phi`; equals `r/mu` when
    /// `sigma = 0`.
    pub gamma_minus: f64,
    /// Resolvent denominator `r - mu nu - sigma^2 nu^2 / 2`; positive on
    /// every validated scenario.
    pub beta: f64,
    /// Coefficient of `phi` on the resolvent branch at and above the cutoff.
    pub c1: f64,
    /// Below-cutoff resolvent correction, stored as its value at the cutoff;
    /// the correction at `x` is `c2 * exp(gamma_plus (x - x_c))`. Zero when
    /// there is no cutoff and in the deterministic limit.
    pub c2: f64,
    diffusion: Diffusion,
    r: f64,
    profit: ProfitSpec,
}

/// Builds the closed forms for a validated scenario.
pub fn fundamental_solutions(s: &Scenario) -> Result<ClosedForms> {
    s.ensure_valid()?;
    Ok(ClosedForms::assemble(s))
}

impl ClosedForms {
    /// Assembles the closed forms without re-validating; callers hold a
    /// validated scenario.
    pub(crate) fn assemble(s: &Scenario) -> ClosedForms {
        let Diffusion { mu, sigma } = s.diffusion;
        let (r, nu) = (s.r, s.profit.nu);
        let beta = r - mu * nu - 0.5 * sigma * sigma * nu * nu;
        let (gamma_plus, gamma_minus) = if sigma > 0.0 {
            let disc = (mu * mu + 2.0 * r * sigma * sigma).sqrt();
            (
                Some((-mu + disc) / (sigma * sigma)),
                (-mu - disc) / (sigma * sigma),
            )
        } else {
            (None, r / mu)
        };

        let mut forms = ClosedForms {
            gamma_plus,
            gamma_minus,
            beta,
            c1: 0.0,
            c2: 0.0,
            diffusion: s.diffusion,
            r,
            profit: s.profit,
        };

        if let Some(cut) = s.profit.cutoff {
            // Match value and first derivative of the two resolvent branches
            // at the cutoff; these two conditions define c1 and c2.
            let df0 = forms.f2(cut.x_c) - forms.f1(cut.x_c);
            let df1 = cut.rho / r - forms.f1_d1(cut.x_c);
            match gamma_plus {
                Some(gp) => {
                    let gm = gamma_minus;
                    forms.c1 = (df1 - gp * df0) / (forms.phi(cut.x_c) * (gm - gp));
                    forms.c2 = (df1 - gm * df0) / (gm - gp);
                }
                None => {
                    // First-order operator: continuity pins c1 and the
                    // derivative match follows from the resolvent ODE.
                    forms.c1 = df0 / forms.phi(cut.x_c);
                    forms.c2 = 0.0;
                }
            }
        }
        forms
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn diffusion(&self) -> Diffusion {
        self.diffusion
    }

    pub fn profit(&self) -> ProfitSpec {
        self.profit
    }

    /// Decreasing fundamental solution `phi(x) = exp(gamma_minus x)`.
    pub fn phi(&self, x: f64) -> f64 {
        (self.gamma_minus * x).exp()
    }

    pub fn phi_d1(&self, x: f64) -> f64 {
        self.gamma_minus * self.phi(x)
    }

    pub fn phi_d2(&self, x: f64) -> f64 {
        self.gamma_minus * self.gamma_minus * self.phi(x)
    }

    /// Increasing fundamental solution `psi(x) = exp(gamma_plus x)`; absent
    /// in the deterministic limit.
    pub fn psi(&self, x: f64) -> Result<f64> {
        match self.gamma_plus {
            Some(gp) => Ok((gp * x).exp()),
            None => Err(Error::NoIncreasingSolution),
        }
    }

    // Particular solution above the cutoff: A f1 + pi = 0 there.
    fn f1(&self, x: f64) -> f64 {
        1.0 / self.r - (self.profit.nu * x).exp() / self.beta
    }

    fn f1_d1(&self, x: f64) -> f64 {
        -self.profit.nu * (self.profit.nu * x).exp() / self.beta
    }

    fn f1_d2(&self, x: f64) -> f64 {
        let nu = self.profit.nu;
        -nu * nu * (nu * x).exp() / self.beta
    }

    // Particular solution below the cutoff (profit linear there).
    fn f2(&self, x: f64) -> f64 {
        let c = self.profit.cutoff.expect("f2 requires a cutoff");
        let pi_xc = 1.0 - (self.profit.nu * c.x_c).exp();
        c.rho * self.diffusion.mu / (self.r * self.r) + pi_xc / self.r
            + c.rho / self.r * (x - c.x_c)
    }

    /// Upper resolvent branch `f1 + c1 phi`, valid for `x >= x_c`.
    pub(crate) fn resolvent_upper(&self, x: f64) -> f64 {
        self.f1(x) + self.c1 * self.phi(x)
    }

    pub(crate) fn resolvent_upper_d1(&self, x: f64) -> f64 {
        self.f1_d1(x) + self.c1 * self.phi_d1(x)
    }

    /// Lower resolvent branch `f2 + c2 exp(gamma_plus (x - x_c))`, valid for
    /// `x < x_c`.
    pub(crate) fn resolvent_lower(&self, x: f64) -> f64 {
        let c = self.profit.cutoff.expect("lower branch requires a cutoff");
        self.f2(x) + self.lower_correction(x, c.x_c)
    }

    pub(crate) fn resolvent_lower_d1(&self, x: f64) -> f64 {
        let c = self.profit.cutoff.expect("lower branch requires a cutoff");
        c.rho / self.r + self.gamma_plus.unwrap_or(0.0) * self.lower_correction(x, c.x_c)
    }

    fn lower_correction(&self, x: f64, x_c: f64) -> f64 {
        match self.gamma_plus {
            Some(gp) => self.c2 * (gp * (x - x_c)).exp(),
            None => 0.0,
        }
    }

    /// Expected discounted profit of the uncontrolled process started at `x`.
    pub fn resolvent(&self, x: f64) -> f64 {
        match self.profit.cutoff {
            Some(c) if x < c.x_c => self.resolvent_lower(x),
            _ => self.resolvent_upper(x),
        }
    }

    pub fn resolvent_d1(&self, x: f64) -> f64 {
        match self.profit.cutoff {
            Some(c) if x < c.x_c => self.resolvent_lower_d1(x),
            _ => self.resolvent_upper_d1(x),
        }
    }

    pub fn resolvent_d2(&self, x: f64) -> f64 {
        match self.profit.cutoff {
            Some(c) if x < c.x_c => {
                let gp = self.gamma_plus.unwrap_or(0.0);
                gp * gp * self.lower_correction(x, c.x_c)
            }
            _ => self.f1_d2(x) + self.c1 * self.phi_d2(x),
        }
    }

    /// Flow profit.
    pub fn pi(&self, x: f64) -> f64 {
        self.profit.value(x)
    }
}

/// Expected discounted profit of the uncontrolled process: `(R pi)(x)`.
pub fn resolvent(s: &Scenario, x: f64) -> Result<f64> {
    Ok(fundamental_solutions(s)?.resolvent(x))
}

/// Net marginal-value flow `q(x) = pi(x) + (mu - r x) k` for one player.
pub fn q_function(s: &Scenario, player: usize, x: f64) -> Result<f64> {
    s.ensure_valid()?;
    let k = s.player(player)?.k;
    Ok(s.profit.value(x) + (s.diffusion.mu - s.r * x) * k)
}

/// Peak of `q` for one player, located by scan and bisection refinement.
pub fn x_star(s: &Scenario, player: usize) -> Result<f64> {
    s.ensure_valid()?;
    let k = s.player(player)?.k;
    q_peak_scan(s, k).map_err(|detail| Error::AssumptionFailed {
        check: format!("q_single_peak_p{}", player + 1),
        detail,
    })
}

/// Applies the characteristic operator `A f = (sigma^2/2) f'' + mu f' - r f`
/// at `x` using central finite differences.
///
/// The step `h = max(1e-4, 1e-6 |x|)` balances truncation against f64
/// cancellation (the second difference loses roughly `4 eps |f| / h^2`).
pub fn apply_generator<F: Fn(f64) -> f64>(s: &Scenario, x: f64, f: F) -> Result<f64> {
    let h = 1e-4_f64.max(1e-6 * x.abs());
    let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
    if !(fm.is_finite() && f0.is_finite() && fp.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "function not finite near x = {x}: f(x-h) = {fm}, f(x) = {f0}, f(x+h) = {fp}"
        )));
    }
    let d1 = (fp - fm) / (2.0 * h);
    let d2 = (fp - 2.0 * f0 + fm) / (h * h);
    Ok(0.5 * s.diffusion.sigma * s.diffusion.sigma * d2 + s.diffusion.mu * d1 - s.r * f0)
}
