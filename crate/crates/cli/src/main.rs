//! Command-line front end: scenario ingestion, solver dispatch, and CSV/JSON
//! emission.
//!
//! Exit codes: 0 success, 1 validation/assumption/solver failure (the message
//! names the failed check), 2 usage error (bad flags, unreadable scenario
//! file, malformed grid).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use goodwill::mpe::{critical_k2_traced, AsymmetricMpe, SymmetricMpe};
use goodwill::rdgame::{self, RdParams};
use goodwill::report::grid_range;
use goodwill::simulate::{estimate_payoff, simulate_path, ControlPolicy, PathRecord, SimConfig};
use goodwill::single_control::SingleSolution;
use goodwill::Scenario;

#[derive(Parser)]
#[command(name = "goodwill", version, about = "Contribution-game solvers and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    None,
    Singular,
    Regular,
    Asymmetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum MpeMode {
    Symmetric,
    Asymmetric,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the single-controller benchmark: threshold, pasting
    /// coefficient, and the value at the threshold.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        /// Player to solve for (1-based).
        #[arg(long, default_value_t = 1)]
        player: usize,
        /// Replace the scenario's volatility (0 selects the deterministic limit).
        #[arg(long, allow_negative_numbers = true)]
        sigma_override: Option<f64>,
    },
    /// Build an equilibrium: the symmetric regular-control one, or an
    /// asymmetric profile at a given band boundary.
    Mpe {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: MpeMode,
        /// Number of players in the symmetric game.
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Band boundary for the asymmetric profile (required there).
        #[arg(long, allow_negative_numbers = true)]
        theta_prime: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        sigma_override: Option<f64>,
    },
    /// Simulate one controlled path and emit it as CSV
    /// (t,z,xi1,xi2,u1,u2,jump_player).
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        policy: PolicyKind,
        #[arg(long, allow_negative_numbers = true)]
        z0: f64,
        #[arg(long)]
        dt: f64,
        /// Time horizon.
        #[arg(long)]
        t: f64,
        #[arg(long)]
        seed: u64,
        /// Band boundary, used by the asymmetric policy.
        #[arg(long, allow_negative_numbers = true)]
        theta_prime: Option<f64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        sigma_override: Option<f64>,
    },
    /// Monte Carlo estimate of one player's discounted payoff.
    Payoff {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        policy: PolicyKind,
        #[arg(long, allow_negative_numbers = true)]
        z0: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        paths: usize,
        /// Player whose payoff to estimate (1-based).
        #[arg(long, default_value_t = 1)]
        player: usize,
        #[arg(long, allow_negative_numbers = true)]
        theta_prime: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        sigma_override: Option<f64>,
    },
    /// Certify the optimality conditions of the benchmark solution on a grid.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        /// Grid as LO:HI:STEP, endpoints inclusive.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 1)]
        player: usize,
        #[arg(long, allow_negative_numbers = true)]
        sigma_override: Option<f64>,
    },
    /// Bisect the critical player-2 cost below which the asymmetric profile
    /// stops being an equilibrium.
    SweepK2 {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        theta_prime: f64,
        #[arg(long, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long)]
        tol: f64,
        /// Write every probed cost here as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        sigma_override: Option<f64>,
    },
    /// Solve the R&D spillover game.
    Rd {
        #[arg(long)]
        reward: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        c: f64,
        /// Initial effort pair as "a,b".
        #[arg(long)]
        lambda0: Option<String>,
    },
}

/// Failures carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<goodwill::Error> for Failure {
    fn from(e: goodwill::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_scenario(path: &Path, sigma_override: Option<f64>) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read scenario file {}: {e}", path.display())))?;
    let mut s = Scenario::from_json(&text)?;
    if let Some(sigma) = sigma_override {
        s.diffusion.sigma = sigma;
    }
    Ok(s)
}

fn player_index(player: usize, s: &Scenario) -> Result<usize, Failure> {
    if player == 0 || player > s.players.len() {
        return Err(Failure::usage(format!(
            "--player must be between 1 and {} (got {player})",
            s.players.len()
        )));
    }
    Ok(player - 1)
}

fn build_policy(
    s: &Scenario,
    kind: PolicyKind,
    theta_prime: Option<f64>,
) -> Result<ControlPolicy, Failure> {
    Ok(match kind {
        PolicyKind::None => ControlPolicy::None,
        PolicyKind::Singular => ControlPolicy::Singular {
            theta: goodwill::solve_threshold(s, 0)?,
        },
        PolicyKind::Regular => ControlPolicy::SymmetricRegular(SymmetricMpe::build(s, 2)?),
        PolicyKind::Asymmetric => {
            let tp = theta_prime.ok_or_else(|| {
                Failure::usage("--theta-prime is required for the asymmetric policy")
            })?;
            ControlPolicy::Asymmetric(AsymmetricMpe::build(s, tp)?)
        }
    })
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::usage(format!("--grid must be LO:HI:STEP (got `{spec}`)"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || !step.is_finite() || hi < lo || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok(grid_range(lo, hi, step))
}

/// Seventeen significant digits: round-trip exact for f64.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}


/// Writes to stdout, exiting quietly when the consumer closed the pipe.
fn print_out(text: &str) -> Result<(), Failure> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let done = out.write_all(text.as_bytes()).and_then(|_| out.flush());
    match done {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(Failure { code: 1, message: format!("cannot write to stdout: {e}") }),
    }
}

fn emit(path: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, contents)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        None => print_out(contents),
    }
}

/// One row per grid time with the settled state; a row where a lump-sum
/// contribution landed carries the contributing player in `jump_player`
/// (0 = none). The time-zero row shows the pre-jump initial condition, and
/// any time-zero jumps follow it as extra flagged rows.
fn path_csv(policy: &ControlPolicy, rec: &PathRecord) -> String {
    let mut out = String::with_capacity(rec.times.len() * 64);
    out.push_str("t,z,xi1,xi2,u1,u2,jump_player\n");
    let mut row = |t: f64, z: f64, xi1: f64, xi2: f64, jump_player: usize| {
        let (u1, u2) = policy.rates(z);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt(t),
            fmt(z),
            fmt(xi1),
            fmt(xi2),
            fmt(u1),
            fmt(u2),
            jump_player
        );
    };

    // Pre-jump initial condition.
    row(rec.times[0], rec.z[0], rec.xi1[0], rec.xi2[0], 0);
    // Time-zero jumps settle the start progressively.
    let mut z0 = rec.z[0];
    let mut xi0 = [rec.xi1[0], rec.xi2[0]];
    let mut next_jump = 0;
    while next_jump < rec.jumps.len() && rec.jumps[next_jump].time == 0.0 {
        let j = rec.jumps[next_jump];
        z0 += j.size;
        xi0[j.player] += j.size;
        row(0.0, z0, xi0[0], xi0[1], j.player + 1);
        next_jump += 1;
    }

    for i in 1..rec.times.len() {
        let t = rec.times[i];
        let mut jump_player = 0;
        if next_jump < rec.jumps.len() && rec.jumps[next_jump].time == t {
            jump_player = rec.jumps[next_jump].player + 1;
            next_jump += 1;
        }
        row(t, rec.z[i], rec.xi1[i], rec.xi2[i], jump_player);
    }
    out
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Solve { scenario, player, sigma_override } => {
            let s = load_scenario(&scenario, sigma_override)?;
            let idx = player_index(player, &s)?;
            let sol = SingleSolution::solve(&s, idx)?;
            print_out(&format!(
                "{}\n",
                json!({"theta": sol.theta, "A": sol.a_coef, "V_theta": sol.v_theta})
            ))
        }

        Command::Mpe { scenario, mode, n, theta_prime, sigma_override } => {
            let s = load_scenario(&scenario, sigma_override)?;
            match mode {
                MpeMode::Symmetric => {
                    let m = SymmetricMpe::build(&s, n)?;
                    let mut payload = json!({
                        "mode": "symmetric",
                        "n_players": m.n_players,
                        "theta": m.theta(),
                        "a_coef": m.single.a_coef,
                        "v_theta": m.single.v_theta,
                    });
                    if s.diffusion.sigma == 0.0 {
                        payload["eta"] = json!(m.steady_state()?);
                    }
                    print_out(&format!("{payload}\n"))?;
                }
                MpeMode::Asymmetric => {
                    let tp = theta_prime.ok_or_else(|| {
                        Failure::usage("--theta-prime is required for --mode asymmetric")
                    })?;
                    let m = AsymmetricMpe::build(&s, tp)?;
                    let report = m.check_conditions(&m.default_condition_grid());
                    print_out(&format!(
                        "{}\n",
                        json!({
                            "mode": "asymmetric",
                            "theta_prime": m.theta_prime,
                            "theta_1": m.theta_1,
                            "b_coef": m.b_coef,
                            "u2_at_theta1": m.u2_at_theta1,
                            "conditions": report,
                        })
                    ))?;
                }
            }
            Ok(())
        }

        Command::Simulate {
            scenario,
            policy,
            z0,
            dt,
            t,
            seed,
            theta_prime,
            out,
            sigma_override,
        } => {
            let s = load_scenario(&scenario, sigma_override)?;
            let policy = build_policy(&s, policy, theta_prime)?;
            let cfg = SimConfig { z0, dt, horizon: t, n_paths: 1, seed };
            let rec = simulate_path(&s, &policy, &cfg)?;
            emit(out.as_deref(), &path_csv(&policy, &rec))
        }

        Command::Payoff {
            scenario,
            policy,
            z0,
            dt,
            t,
            seed,
            paths,
            player,
            theta_prime,
            sigma_override,
        } => {
            let s = load_scenario(&scenario, sigma_override)?;
            let idx = player_index(player, &s)?;
            let policy = build_policy(&s, policy, theta_prime)?;
            let cfg = SimConfig { z0, dt, horizon: t, n_paths: paths, seed };
            let est = estimate_payoff(&s, &policy, &cfg, idx)?;
            print_out(&format!(
                "{}\n",
                serde_json::to_string(&est).expect("estimate serializes")
            ))
        }

        Command::Verify { scenario, grid, player, sigma_override } => {
            let s = load_scenario(&scenario, sigma_override)?;
            let idx = player_index(player, &s)?;
            let grid = parse_grid(&grid)?;
            let sol = SingleSolution::solve(&s, idx)?;
            let report = sol.verify_optimality(&grid);
            print_out(&format!(
                "{}\n",
                serde_json::to_string(&report).expect("report serializes")
            ))
        }

        Command::SweepK2 { scenario, theta_prime, lo, hi, tol, out, sigma_override } => {
            let s = load_scenario(&scenario, sigma_override)?;
            let (critical, probes) = critical_k2_traced(&s, theta_prime, lo, hi, tol)?;
            if let Some(path) = out {
                let mut csv = String::from("k2,passed,max_violation_U2prime,max_violation_AU2\n");
                for p in &probes {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        fmt(p.k2),
                        p.passed,
                        fmt(p.max_violation_u2prime),
                        fmt(p.max_violation_au2)
                    );
                }
                emit(Some(&path), &csv)?;
            }
            print_out(&format!(
                "{}\n",
                json!({
                    "critical_k2": critical,
                    "theta_prime": theta_prime,
                    "lo": lo,
                    "hi": hi,
                    "tol": tol,
                    "probes": probes.len(),
                })
            ))
        }

        Command::Rd { reward, r, k, c, lambda0 } => {
            let lambda0 = match lambda0 {
                None => (0.0, 0.0),
                Some(text) => {
                    let parts: Vec<&str> = text.split(',').collect();
                    let bad =
                        || Failure::usage(format!("--lambda0 must be two numbers `a,b` (got `{text}`)"));
                    if parts.len() != 2 {
                        return Err(bad());
                    }
                    (
                        parts[0].trim().parse().map_err(|_| bad())?,
                        parts[1].trim().parse().map_err(|_| bad())?,
                    )
                }
            };
            let params = RdParams::new(reward, r, k, c, lambda0)?;
            let sol = rdgame::symmetric_effort(&params);
            let payoff_at_eq =
                rdgame::payoff(&params, sol.lambda_star, sol.lambda_star, lambda0.0)?;
            let br_residual =
                (rdgame::best_response(&params, sol.lambda_star, lambda0.0) - sol.lambda_star).abs();
            print_out(&format!(
                "{}\n",
                json!({
                    "lambda_star": sol.lambda_star,
                    "payoff_at_eq": payoff_at_eq,
                    "br_check_residual": br_residual,
                    "positive_effort": sol.positive_effort,
                })
            ))
        }
    }
}
