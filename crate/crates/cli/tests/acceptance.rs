//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! (with elapsed time against its budget), and exits non-zero if any fail.

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use maxgame_core::montecarlo::{
    empirical_deviation_payoff, empirical_mean_check, run_tournament, PlayerStrategy,
};
use maxgame_core::oracle::{
    best_response, refute_profile, refute_shifted, verify_equilibrium, ShiftedCandidate,
};
use maxgame_core::payoff::{
    deviation_payoff, tie_split_closed, tie_split_sum, win_curve_vs_equilibrium,
};
use maxgame_core::solver::{solve, sweep, write_sweep_csv, Regime};
use maxgame_core::types::{DiscreteDistribution, GameConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SLACK: f64 = 1e-3;
const GRID: usize = 10_000;
const MC_TRIALS: u64 = 1_000_000;
const MC_SEED: u64 = 20_240_601;

fn cfg(n: usize, mu: f64) -> GameConfig {
    GameConfig::new(n, mu).unwrap()
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(0xACCE_97A5);
    r.set_stream(stream);
    r
}

fn random_configs(count: usize, stream: u64) -> Vec<GameConfig> {
    let mut r = rng(stream);
    (0..count)
        .map(|_| cfg(r.random_range(2..=30), r.random_range(0.01..0.99)))
        .collect()
}

/// Fixed-point oracle independent of the solver: bisection on
/// `g(a) = mu (1 - (1-a)^n) - a`, bracketed away from the trivial root.
fn oracle_atom(n: usize, mu: f64) -> f64 {
    let g = |a: f64| mu * (1.0 - (1.0 - a).powi(n as i32)) - a;
    let mut lo = mu * 1e-9;
    while g(lo) <= 0.0 {
        lo *= 10.0;
    }
    let mut hi = mu;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c1_boundary() {
    for n in 2..=10 {
        let eq = solve(&cfg(n, 1.0 / n as f64)).unwrap();
        assert!(eq.a.abs() <= 1e-12, "n={n}: a={}", eq.a);
        assert!((eq.s - 1.0).abs() <= 1e-12, "n={n}: s={}", eq.s);
    }
}

fn c2_closed_form() {
    let eq = solve(&cfg(2, 0.75)).unwrap();
    assert!((eq.a - 2.0 / 3.0).abs() <= 1e-10);
    assert!((eq.s - 0.5).abs() <= 1e-10);
    let eq = solve(&cfg(3, 0.5)).unwrap();
    let a = (3.0 - 5f64.sqrt()) / 2.0;
    assert!((eq.a - a).abs() <= 1e-10);
    assert!((eq.s - 1.5 * (1.0 - a).powi(2)).abs() <= 1e-10);
}

fn c3_identities() {
    let mut count = 0;
    for n in [2, 3, 4, 5, 6, 8, 10, 12, 15, 18, 21, 24, 27, 30] {
        for k in 1..=15 {
            let c = cfg(n, k as f64 / 16.0);
            let eq = solve(&c).unwrap();
            let nf = n as f64;
            let b = 1.0 - eq.a;
            let residual = eq.a - c.mu * (1.0 - b.powi(n as i32));
            assert!(residual.abs() <= 1e-12, "{c:?} residual {residual:e}");
            let s_power = nf * c.mu * b.powi(n as i32 - 1);
            let s_mean = nf * (c.mu - eq.a) / b;
            assert!((s_power - s_mean).abs() <= 1e-10, "{c:?}");
            assert!((eq.s - s_power).abs() <= 1e-10, "{c:?}");
            assert!((eq.a + b * eq.s / nf - c.mu).abs() <= 1e-12, "{c:?}");
            count += 1;
        }
    }
    assert!(count >= 200, "grid has {count} points");
}

fn c4_binomial_identity() {
    let mut r = rng(4);
    for _ in 0..500 {
        let a: f64 = r.random_range(1e-9..=1.0);
        let n: usize = r.random_range(2..=30);
        let d = tie_split_sum(a, n).unwrap() - tie_split_closed(a, n).unwrap();
        assert!(d.abs() <= 1e-12, "a={a} n={n}: {d:e}");
    }
}

fn c5_indifference() {
    let mut r = rng(5);
    for c in random_configs(50, 50) {
        let eq = solve(&c).unwrap();
        let curve = win_curve_vs_equilibrium(&eq);
        let line = |x: f64| x / (c.n as f64 * c.mu);
        for i in 0..=200 {
            let x = eq.s * i as f64 / 200.0;
            assert!((curve.eval(x) - line(x)).abs() <= 1e-12, "{c:?} x={x}");
        }
        for _ in 0..200 {
            let x: f64 = r.random_range(0.0..=1.0);
            assert!(curve.eval(x) <= line(x) + 1e-12, "{c:?} x={x}");
        }
        assert!(curve.eval(1.0) <= line(1.0) + 1e-12);
        if eq.regime == Regime::Atom {
            assert!((curve.w_atom() - line(1.0)).abs() <= 1e-12, "{c:?}");
        }
    }
}

fn c6_no_profitable_deviation() {
    for c in random_configs(50, 60) {
        let v = verify_equilibrium(&c, GRID, SLACK).unwrap();
        assert!(v.passed && v.report.margin <= SLACK, "{c:?} margin {}", v.report.margin);
        assert!(v.report.deviation.len() <= 2);
        let recheck = deviation_payoff(&v.report.deviation, &win_curve_vs_equilibrium(&solve(&c).unwrap()));
        assert!((recheck - v.report.value).abs() <= 1e-12);

        let curve = win_curve_vs_equilibrium(&solve(&c).unwrap());
        let mut prev: Option<f64> = None;
        for m in [1_000, 2_000, 4_000, 8_000] {
            let margin = best_response(&curve, c.mu, m).unwrap().margin;
            assert!(margin >= -1e-12, "{c:?} m={m}");
            if let Some(p) = prev {
                // margins at round-off level (exact envelope) count as converged
                assert!(margin <= (p / 2.0).max(1e-12), "{c:?} m={m}: {margin:e} vs {p:e}");
            }
            prev = Some(margin);
        }
    }
}

fn c7_refutations() {
    let point = DiscreteDistribution::point_mass(0.5).unwrap();
    let r = refute_profile(&point, &cfg(2, 0.5), GRID, SLACK).unwrap();
    assert!(r.margin >= 0.4, "point mass margin {}", r.margin);

    // interior atom: 0.3 at 0.5, the rest spread evenly over [0, 3/7]
    let c = cfg(3, 0.3);
    let bins = 10_000;
    let width = 3.0 / 7.0;
    let mut pts: Vec<(f64, f64)> = (0..bins)
        .map(|k| (width * (k as f64 + 0.5) / bins as f64, 0.7 / bins as f64))
        .collect();
    pts.push((0.5, 0.3));
    let interior = DiscreteDistribution::with_mean(pts, c.mu).unwrap();
    let r = refute_profile(&interior, &c, GRID, SLACK).unwrap();
    assert!(r.margin > 10.0 * SLACK, "interior atom margin {}", r.margin);

    let shifted = ShiftedCandidate::from_t(&c, 0.1).unwrap();
    let r = refute_shifted(&shifted, GRID, SLACK).unwrap();
    assert!(r.margin > 10.0 * SLACK, "shifted margin {}", r.margin);
}

fn c8_statics() {
    let rows = sweep(0.5, 2, 25).unwrap();
    assert_eq!(rows.len(), 24);
    let atom: Vec<_> = rows.iter().filter(|r| r.regime == Regime::Atom).collect();
    assert_eq!(atom.len(), 23);
    for w in atom.windows(2) {
        assert!(w[1].a > w[0].a, "a not increasing at n={}", w[1].n);
        assert!(w[1].s < w[0].s, "s not decreasing at n={}", w[1].n);
    }
    let a20 = rows.iter().find(|r| r.n == 20).unwrap().a;
    assert!((a20 - 0.5).abs() <= 1e-5);
    assert!((a20 - oracle_atom(20, 0.5)).abs() <= 1e-12);

    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,mu,a,s,regime");
    assert_eq!(lines.len(), 25);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
}

fn c9_monte_carlo() {
    let c = cfg(3, 0.5);
    let eq = solve(&c).unwrap();
    let players = vec![PlayerStrategy::Equilibrium(eq); 3];
    let r = run_tournament(&players, MC_TRIALS, MC_SEED).unwrap();
    for f in &r.win_freq {
        assert!((f - 1.0 / 3.0).abs() <= 0.005, "win freq {f}");
    }
    let full_ties = r.full_tie_events as f64 / MC_TRIALS as f64;
    assert!((full_ties - eq.a.powi(3)).abs() <= 0.005, "all-atom ties {full_ties}");
    for m in &r.empirical_means {
        assert!((m - 0.5).abs() <= 0.002, "mean {m}");
    }

    let deviations: [(GameConfig, Vec<(f64, f64)>); 3] = [
        (cfg(2, 0.3), vec![(0.0, 0.7), (1.0, 0.3)]),
        (cfg(2, 0.75), vec![(0.0, 0.25), (1.0, 0.75)]),
        (cfg(3, 0.2), vec![(0.2, 1.0)]),
    ];
    for (i, (c, pts)) in deviations.into_iter().enumerate() {
        let dev = DiscreteDistribution::with_mean(pts, c.mu).unwrap();
        let analytic = deviation_payoff(&dev, &win_curve_vs_equilibrium(&solve(&c).unwrap()));
        let est = empirical_deviation_payoff(&dev, &c, MC_TRIALS, MC_SEED + 1 + i as u64).unwrap();
        assert!(
            (est.value - analytic).abs() <= 4.0 * est.std_error,
            "{c:?}: simulated {} analytic {analytic}",
            est.value
        );
    }
}

fn c10_determinism() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_maxgame"))
            .args(["simulate", "--n", "3", "--mu", "0.5", "--trials", "1000000", "--seed", "7"])
            .env("MAXGAME_THREADS", threads)
            .output()
            .expect("spawn maxgame");
        assert!(out.status.success());
        out.stdout
    };
    let reference = run("1");
    assert!(!reference.is_empty());
    for threads in ["1", "2", "4", "0"] {
        assert_eq!(run(threads), reference, "MAXGAME_THREADS={threads}");
    }
    let eq = solve(&cfg(2, 0.75)).unwrap();
    let a = empirical_mean_check(&eq, 100_000, 3).unwrap();
    let b = empirical_mean_check(&eq, 100_000, 3).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
}

fn c11_scaling() {
    let mut r = rng(11);
    for _ in 0..100 {
        let n: usize = r.random_range(2..=30);
        let mu = r.random_range(0.001..=1.0) / n as f64;
        let mu2 = r.random_range(0.001..=1.0) / n as f64;
        let (e1, e2) = (solve(&cfg(n, mu)).unwrap(), solve(&cfg(n, mu2)).unwrap());
        assert_eq!(e1.regime, Regime::Interior);
        assert_eq!(e2.regime, Regime::Interior);
        for k in 0..=50 {
            let x = n as f64 * mu * k as f64 / 50.0;
            let y = (x * mu2 / mu).min(1.0);
            let d = e1.cdf(x).unwrap() - e2.cdf(y).unwrap();
            assert!(d.abs() <= 1e-12, "n={n} mu={mu} mu'={mu2} x={x}: {d:e}");
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn(),
}

fn main() {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "boundary exactness", budget: secs(1), run: c1_boundary },
        Criterion { id: 2, name: "closed-form atom cases", budget: secs(1), run: c2_closed_form },
        Criterion { id: 3, name: "fixed point and identities", budget: secs(5), run: c3_identities },
        Criterion { id: 4, name: "binomial identity", budget: secs(1), run: c4_binomial_identity },
        Criterion { id: 5, name: "indifference and domination", budget: secs(5), run: c5_indifference },
        Criterion { id: 6, name: "no profitable deviation", budget: secs(30), run: c6_no_profitable_deviation },
        Criterion { id: 7, name: "refutations", budget: secs(10), run: c7_refutations },
        Criterion { id: 8, name: "comparative statics and limit", budget: secs(1), run: c8_statics },
        Criterion { id: 9, name: "Monte Carlo concordance", budget: secs(60), run: c9_monte_carlo },
        Criterion { id: 10, name: "determinism", budget: secs(60), run: c10_determinism },
        Criterion { id: 11, name: "scaling property", budget: secs(1), run: c11_scaling },
    ];

    panic::set_hook(Box::new(|info| eprintln!("    {info}")));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = start.elapsed();
        let ok = outcome.is_ok() && elapsed <= c.budget;
        if !ok {
            failed += 1;
        }
        let note = if outcome.is_ok() && elapsed > c.budget { " (over time budget)" } else { "" };
        println!(
            "[{}] criterion {:>2}: {:<30} {:>8.3}s / {}s{}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            note
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
