//! `maxgame`: solve, sweep, verify, refute and simulate the fixed-mean
//! highest-realization game from the command line.
//!
//! Payloads go to stdout (or `--out`); log lines go to stderr.
//! Exit codes: 0 success, 1 negative verdict, 2 usage error, 3 numeric failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use maxgame_core::error::GameError;
use maxgame_core::format::fmt_g17;
use maxgame_core::montecarlo::{run_tournament, PlayerStrategy, DEFAULT_TRIALS};
use maxgame_core::oracle::{
    refute_profile, refute_shifted, verify_equilibrium, BestResponseReport, ShiftedCandidate,
    DEFAULT_GRID, DEFAULT_SLACK, MIN_GRID,
};
use maxgame_core::payoff::win_curve_vs_equilibrium;
use maxgame_core::solver::{solve, sweep, write_sweep_csv, Regime};
use maxgame_core::types::{validate_config, DiscreteDistribution, GameConfig};
use serde::Serialize;

const THREADS_ENV: &str = "MAXGAME_THREADS";

#[derive(Parser)]
#[command(name = "maxgame", version, about = "Symmetric equilibria of the fixed-mean highest-realization game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the symmetric equilibrium (a, s).
    Solve {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        json: bool,
    },
    /// Tabulate (a, s) over a range of player counts as CSV.
    Sweep {
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long = "n-min")]
        n_min: i64,
        #[arg(long = "n-max")]
        n_max: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the equilibrium win curve with the indifference line as CSV.
    Curve {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 1000)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that no deviation beats 1/n by more than the slack.
    Verify {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
    },
    /// Find a profitable deviation against a non-equilibrium profile.
    Refute {
        #[command(flatten)]
        game: GameArgs,
        /// JSON file `{"points": [[x, p], ...]}` played by every opponent.
        #[arg(long, conflicts_with = "shifted", required_unless_present = "shifted")]
        profile: Option<PathBuf>,
        /// Shifted-support candidate: `t` or `t,a,s`.
        #[arg(long)]
        shifted: Option<String>,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
    },
    /// Run a seeded tournament and report win statistics.
    Simulate {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Player 0 plays this distribution instead of the equilibrium.
        #[arg(long)]
        deviation: Option<PathBuf>,
        /// Emit one CSV row per player instead of JSON.
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GameArgs {
    #[arg(long, allow_negative_numbers = true)]
    n: i64,
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
}

impl GameArgs {
    fn config(&self) -> Result<GameConfig, Failure> {
        Ok(validate_config(self.n, self.mu)?)
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(String),
    /// Negative verdict; the payload has already been written.
    Negative,
}

impl From<GameError> for Failure {
    fn from(e: GameError) -> Self {
        match e {
            GameError::ConvergenceFailure { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl Failure {
    fn io(e: io::Error) -> Self {
        Failure::Numeric(format!("write failed: {e}"))
    }
}

#[derive(Serialize)]
struct SolveOutput {
    n: usize,
    mu: f64,
    regime: Regime,
    a: f64,
    s: f64,
}

fn emit(out: Option<&Path>, payload: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, payload).map_err(Failure::io),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(payload).map_err(Failure::io)?;
            stdout.flush().map_err(Failure::io)
        }
    }
}

fn json_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string(value).expect("serializable payload");
    s.push('\n');
    s.into_bytes()
}

fn read_distribution(path: &Path) -> Result<DiscreteDistribution, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("malformed distribution in {}: {e}", path.display())))
}

fn check_grid(grid: usize, min: usize) -> Result<(), Failure> {
    if grid < min {
        return Err(Failure::Usage(format!("--grid must be at least {min}, got {grid}")));
    }
    Ok(())
}

fn check_slack(slack: f64) -> Result<(), Failure> {
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Failure::Usage(format!("--slack must be a finite non-negative number, got {slack}")));
    }
    Ok(())
}

fn cmd_solve(game: &GameArgs, json: bool) -> Result<(), Failure> {
    let cfg = game.config()?;
    let eq = solve(&cfg)?;
    info!("solved n={} mu={}: {:?} regime", cfg.n, cfg.mu, eq.regime);
    let payload = if json {
        json_line(&SolveOutput {
            n: cfg.n,
            mu: cfg.mu,
            regime: eq.regime,
            a: eq.a,
            s: eq.s,
        })
    } else {
        format!(
            "n = {}\nmu = {}\nregime = {}\na = {}\ns = {}\n",
            cfg.n,
            fmt_g17(cfg.mu),
            eq.regime.as_str(),
            fmt_g17(eq.a),
            fmt_g17(eq.s)
        )
        .into_bytes()
    };
    emit(None, &payload)
}

fn cmd_sweep(mu: f64, n_min: i64, n_max: i64, out: Option<&Path>) -> Result<(), Failure> {
    validate_config(n_min, mu)?;
    if n_max < n_min {
        return Err(Failure::Usage(format!("--n-max {n_max} is below --n-min {n_min}")));
    }
    let rows = sweep(mu, n_min as usize, n_max as usize)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).map_err(Failure::io)?;
    emit(out, &buf)
}

fn cmd_curve(game: &GameArgs, grid: usize, out: Option<&Path>) -> Result<(), Failure> {
    check_grid(grid, 2)?;
    let cfg = game.config()?;
    let eq = solve(&cfg)?;
    let curve = win_curve_vs_equilibrium(&eq);
    let mut xs: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    xs.extend([eq.s, cfg.mu]);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let scale = cfg.n as f64 * cfg.mu;
    let mut buf = String::from("x,w,line\n");
    for x in xs {
        buf.push_str(&format!(
            "{},{},{}\n",
            fmt_g17(x),
            fmt_g17(curve.eval(x)),
            fmt_g17(x / scale)
        ));
    }
    emit(out, buf.as_bytes())
}

fn cmd_verify(game: &GameArgs, grid: usize, slack: f64) -> Result<(), Failure> {
    check_grid(grid, MIN_GRID)?;
    check_slack(slack)?;
    let cfg = game.config()?;
    let v = verify_equilibrium(&cfg, grid, slack)?;
    emit(None, &json_line(&v.report))?;
    if v.passed {
        info!("no deviation beats 1/n by more than {slack} (margin {:e})", v.report.margin);
        Ok(())
    } else {
        warn!("profitable deviation: margin {:e} exceeds slack {slack}", v.report.margin);
        Err(Failure::Negative)
    }
}

fn parse_shifted(spec: &str, cfg: &GameConfig) -> Result<ShiftedCandidate, Failure> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Usage(format!("--shifted expects t or t,a,s: {e}")))?;
    let candidate = match parts.as_slice() {
        [t] => ShiftedCandidate::from_t(cfg, *t)?,
        [t, a, s] => ShiftedCandidate::new(cfg, *t, *a, *s)?,
        _ => return Err(Failure::Usage("--shifted expects t or t,a,s".into())),
    };
    Ok(candidate)
}

fn cmd_refute(
    game: &GameArgs,
    profile: Option<&Path>,
    shifted: Option<&str>,
    grid: usize,
    slack: f64,
) -> Result<(), Failure> {
    check_grid(grid, MIN_GRID)?;
    check_slack(slack)?;
    let cfg = game.config()?;
    let result = match (profile, shifted) {
        (Some(path), None) => {
            let d = read_distribution(path)?;
            d.check_mean(cfg.mu)?;
            refute_profile(&d, &cfg, grid, slack)
        }
        (None, Some(spec)) => {
            let candidate = parse_shifted(spec, &cfg)?;
            info!(
                "shifted candidate t={} a={} s={}",
                candidate.t, candidate.a, candidate.s
            );
            refute_shifted(&candidate, grid, slack)
        }
        _ => return Err(Failure::Usage("give exactly one of --profile or --shifted".into())),
    };
    match result {
        Ok(report) => {
            info!("profitable deviation found, margin {:e}", report.margin);
            emit(None, &json_line(&report))
        }
        Err(GameError::NoDeviationFound(report)) => {
            let report: BestResponseReport = *report;
            warn!("no deviation beats 1/n by more than {slack} (margin {:e})", report.margin);
            emit(None, &json_line(&report))?;
            Err(Failure::Negative)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_simulate(
    game: &GameArgs,
    trials: u64,
    seed: Option<u64>,
    deviation: Option<&Path>,
    csv: bool,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let seed = seed.ok_or_else(|| Failure::Usage("simulate requires --seed".into()))?;
    if trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let cfg = game.config()?;
    let eq = solve(&cfg)?;
    let mut players = vec![PlayerStrategy::Equilibrium(eq); cfg.n];
    if let Some(path) = deviation {
        let d = read_distribution(path)?;
        d.check_mean(cfg.mu)?;
        players[0] = PlayerStrategy::Discrete(d);
    }
    let report = run_tournament(&players, trials, seed)?;
    info!("simulated {trials} trials, {} ties", report.tie_events);
    if csv {
        let mut buf = Vec::new();
        report.write_csv(&mut buf).map_err(Failure::io)?;
        emit(out, &buf)
    } else {
        emit(out, &json_line(&report))
    }
}

fn configure_threads() -> Result<(), Failure> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Numeric(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Solve { game, json } => cmd_solve(game, *json),
        Command::Sweep {
            mu,
            n_min,
            n_max,
            out,
        } => cmd_sweep(*mu, *n_min, *n_max, out.as_deref()),
        Command::Curve { game, grid, out } => cmd_curve(game, *grid, out.as_deref()),
        Command::Verify { game, grid, slack } => cmd_verify(game, *grid, *slack),
        Command::Refute {
            game,
            profile,
            shifted,
            grid,
            slack,
        } => cmd_refute(game, profile.as_deref(), shifted.as_deref(), *grid, *slack),
        Command::Simulate {
            game,
            trials,
            seed,
            deviation,
            csv,
            out,
        } => cmd_simulate(game, *trials, *seed, deviation.as_deref(), *csv, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
