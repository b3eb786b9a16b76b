//! Seeded tournament simulation.
//!
//! Each player draws from its own ChaCha8 stream (`seed`, stream = player
//! key) and tie-breaks use a separate stream. Trial `t` always reads word
//! `2t` of every stream, so trials can be split into blocks and run on any
//! number of threads with bit-identical results. Sums of draws are
//! accumulated in 64-bit fixed point, which keeps the merge exact.

use std::io::{self, Write};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::format::fmt_g17;
use crate::solver::{solve, EquilibriumStrategy};
use crate::types::{DiscreteDistribution, GameConfig, Realization};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const MIN_MEAN_CHECK_TRIALS: u64 = 10_000;
/// Trials per work item. Results do not depend on it.
const BLOCK: u64 = 1 << 15;
const TIE_STREAM: u64 = u64::MAX;
/// 2^64, the fixed-point scale for accumulated draws.
const FIXED_SCALE: f64 = 18_446_744_073_709_551_616.0;

#[derive(Debug, Clone)]
pub enum PlayerStrategy {
    Equilibrium(EquilibriumStrategy),
    Discrete(DiscreteDistribution),
}

/// A strategy ready for inverse-transform sampling.
#[derive(Debug, Clone)]
enum Sampler {
    Equilibrium(EquilibriumStrategy),
    Discrete { xs: Vec<f64>, cum: Vec<f64> },
}

impl Sampler {
    fn new(strategy: &PlayerStrategy) -> Self {
        match strategy {
            PlayerStrategy::Equilibrium(eq) => Sampler::Equilibrium(*eq),
            PlayerStrategy::Discrete(d) => {
                let xs = d.points().iter().map(|p| p.0).collect();
                let mut acc = 0.0;
                let cum = d
                    .points()
                    .iter()
                    .map(|p| {
                        acc += p.1;
                        acc
                    })
                    .collect();
                Sampler::Discrete { xs, cum }
            }
        }
    }

    fn draw(&self, u: f64) -> Realization {
        match self {
            Sampler::Equilibrium(eq) => eq.quantile_unchecked(u),
            Sampler::Discrete { xs, cum } => {
                let idx = cum.partition_point(|&c| c <= u).min(xs.len() - 1);
                let x = xs[idx];
                if x == 1.0 {
                    Realization::AtomOne
                } else {
                    Realization::Continuous(x)
                }
            }
        }
    }
}

/// A player in the tournament. `key` selects the player's random stream;
/// tied players share the win in the order of their keys.
#[derive(Debug, Clone)]
pub struct Entrant {
    pub strategy: PlayerStrategy,
    pub key: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub seed: u64,
    pub wins: Vec<u64>,
    /// Trials where at least two players shared the maximum.
    pub tie_events: u64,
    /// Trials where every player shared the maximum.
    pub full_tie_events: u64,
    /// Draws that landed on the atom at 1.
    pub atom_draws: Vec<u64>,
    pub empirical_means: Vec<f64>,
    pub win_freq: Vec<f64>,
    /// `3 sqrt(p (1 - p) / trials)`.
    pub ci_radius: Vec<f64>,
}

pub const PLAYER_CSV_HEADER: &str = "player,wins,win_freq,ci_radius,empirical_mean,atom_draws";

impl SimulationReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{PLAYER_CSV_HEADER}")?;
        for i in 0..self.wins.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                i,
                self.wins[i],
                fmt_g17(self.win_freq[i]),
                fmt_g17(self.ci_radius[i]),
                fmt_g17(self.empirical_means[i]),
                self.atom_draws[i]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    wins: Vec<u64>,
    tie_events: u64,
    full_tie_events: u64,
    atom_draws: Vec<u64>,
    sum: Vec<u128>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            wins: vec![0; n],
            atom_draws: vec![0; n],
            sum: vec![0; n],
            ..Default::default()
        }
    }

    fn merge(mut self, other: &Tally) -> Self {
        for i in 0..self.wins.len() {
            self.wins[i] += other.wins[i];
            self.atom_draws[i] += other.atom_draws[i];
            self.sum[i] += other.sum[i];
        }
        self.tie_events += other.tie_events;
        self.full_tie_events += other.full_tie_events;
        self
    }
}

fn to_fixed(x: f64) -> u128 {
    (x * FIXED_SCALE) as u128
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..k` from 64 random bits.
fn pick(bits: u64, k: usize) -> usize {
    ((bits as u128 * k as u128) >> 64) as usize
}

fn stream_at(seed: u64, stream: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * trial as u128);
    rng
}

fn run_block(
    samplers: &[Sampler],
    keys: &[u64],
    tie_order: &[usize],
    seed: u64,
    start: u64,
    end: u64,
) -> Tally {
    let n = samplers.len();
    let mut rngs: Vec<ChaCha8Rng> = keys.iter().map(|&k| stream_at(seed, k, start)).collect();
    let mut tie_rng = stream_at(seed, TIE_STREAM, start);
    let mut tally = Tally::new(n);
    let mut draws = vec![Realization::AtomOne; n];
    let mut tied: Vec<usize> = Vec::with_capacity(n);

    for _ in start..end {
        for i in 0..n {
            let r = samplers[i].draw(unit_f64(rngs[i].next_u64()));
            if r.is_atom() {
                tally.atom_draws[i] += 1;
            }
            tally.sum[i] += to_fixed(r.value());
            draws[i] = r;
        }
        let tie_bits = tie_rng.next_u64();
        let best = *draws.iter().max().expect("n >= 2");
        tied.clear();
        tied.extend(tie_order.iter().copied().filter(|&i| draws[i] == best));
        let winner = if tied.len() == 1 {
            tied[0]
        } else {
            tally.tie_events += 1;
            if tied.len() == n {
                tally.full_tie_events += 1;
            }
            tied[pick(tie_bits, tied.len())]
        };
        tally.wins[winner] += 1;
    }
    tally
}

/// Simulate `trials` rounds. Entrants must have distinct keys.
pub fn run_tournament_keyed(entrants: &[Entrant], trials: u64, seed: u64) -> Result<SimulationReport> {
    let n = entrants.len();
    if n < 2 {
        return Err(GameError::NOutOfRange(n as i64));
    }
    if trials == 0 {
        return Err(GameError::DomainError("need at least one trial".into()));
    }
    let keys: Vec<u64> = entrants.iter().map(|e| e.key).collect();
    let mut tie_order: Vec<usize> = (0..n).collect();
    tie_order.sort_by_key(|&i| keys[i]);
    if tie_order.windows(2).any(|w| keys[w[0]] == keys[w[1]]) || keys.contains(&TIE_STREAM) {
        return Err(GameError::DomainError("entrant keys must be distinct and below u64::MAX".into()));
    }
    let samplers: Vec<Sampler> = entrants.iter().map(|e| Sampler::new(&e.strategy)).collect();

    let blocks = trials.div_ceil(BLOCK);
    let tallies: Vec<Tally> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(trials);
            run_block(&samplers, &keys, &tie_order, seed, start, end)
        })
        .collect();
    let total = tallies.iter().fold(Tally::new(n), |acc, t| acc.merge(t));

    let tf = trials as f64;
    let win_freq: Vec<f64> = total.wins.iter().map(|&w| w as f64 / tf).collect();
    let ci_radius = win_freq
        .iter()
        .map(|&p| 3.0 * (p * (1.0 - p) / tf).sqrt())
        .collect();
    let empirical_means = total
        .sum
        .iter()
        .map(|&s| s as f64 / FIXED_SCALE / tf)
        .collect();
    Ok(SimulationReport {
        trials,
        seed,
        wins: total.wins,
        tie_events: total.tie_events,
        full_tie_events: total.full_tie_events,
        atom_draws: total.atom_draws,
        empirical_means,
        win_freq,
        ci_radius,
    })
}

/// Simulate with player `i` on stream `i`.
pub fn run_tournament(strategies: &[PlayerStrategy], trials: u64, seed: u64) -> Result<SimulationReport> {
    let entrants: Vec<Entrant> = strategies
        .iter()
        .enumerate()
        .map(|(i, s)| Entrant {
            strategy: s.clone(),
            key: i as u64,
        })
        .collect();
    run_tournament_keyed(&entrants, trials, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCheck {
    pub trials: u64,
    pub mean: f64,
    pub stdev: f64,
}

impl MeanCheck {
    /// `4 stdev / sqrt(trials)`.
    pub fn tolerance(&self) -> f64 {
        4.0 * self.stdev / (self.trials as f64).sqrt()
    }

    pub fn consistent_with(&self, mu: f64) -> bool {
        (self.mean - mu).abs() <= self.tolerance()
    }
}

/// Sample mean and standard deviation of `trials` equilibrium draws.
pub fn empirical_mean_check(eq: &EquilibriumStrategy, trials: u64, seed: u64) -> Result<MeanCheck> {
    if trials < MIN_MEAN_CHECK_TRIALS {
        return Err(GameError::DomainError(format!(
            "mean check needs at least {MIN_MEAN_CHECK_TRIALS} trials, got {trials}"
        )));
    }
    let sampler = Sampler::Equilibrium(*eq);
    let blocks = trials.div_ceil(BLOCK);
    let (sum, sumsq) = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(trials);
            let mut rng = stream_at(seed, 0, start);
            let (mut s, mut ss) = (0u128, 0u128);
            for _ in start..end {
                let x = sampler.draw(unit_f64(rng.next_u64())).value();
                s += to_fixed(x);
                ss += to_fixed(x * x);
            }
            (s, ss)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let tf = trials as f64;
    let mean = sum as f64 / FIXED_SCALE / tf;
    let second = sumsq as f64 / FIXED_SCALE / tf;
    let var = ((second - mean * mean) * tf / (tf - 1.0)).max(0.0);
    Ok(MeanCheck {
        trials,
        mean,
        stdev: var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationEstimate {
    /// Observed win frequency of the deviator.
    pub value: f64,
    /// `sqrt(p (1 - p) / trials)`.
    pub std_error: f64,
}

/// Player 0 plays `dev`; the other `n - 1` play the equilibrium of `cfg`.
pub fn empirical_deviation_payoff(
    dev: &DiscreteDistribution,
    cfg: &GameConfig,
    trials: u64,
    seed: u64,
) -> Result<DeviationEstimate> {
    dev.check_mean(cfg.mu)?;
    let eq = solve(cfg)?;
    let mut strategies = vec![PlayerStrategy::Discrete(dev.clone())];
    strategies.extend((1..cfg.n).map(|_| PlayerStrategy::Equilibrium(eq)));
    let report = run_tournament(&strategies, trials, seed)?;
    let p = report.win_freq[0];
    Ok(DeviationEstimate {
        value: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(n: usize, mu: f64) -> EquilibriumStrategy {
        solve(&GameConfig::new(n, mu).unwrap()).unwrap()
    }

    #[test]
    fn point_masses_always_tie() {
        let pm = PlayerStrategy::Discrete(DiscreteDistribution::point_mass(0.5).unwrap());
        let r = run_tournament(&[pm.clone(), pm], 100_000, 1).unwrap();
        assert_eq!(r.tie_events, 100_000);
        assert_eq!(r.full_tie_events, 100_000);
        for f in &r.win_freq {
            assert!((f - 0.5).abs() < 0.005);
        }
        assert_eq!(r.wins.iter().sum::<u64>(), 100_000);
        assert!((r.empirical_means[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn block_boundaries_do_not_matter() {
        // a trial count that is not a multiple of the block size
        let e = PlayerStrategy::Equilibrium(eq(3, 0.6));
        let profile = vec![e.clone(), e.clone(), e];
        let a = run_tournament(&profile, BLOCK * 2 + 17, 9).unwrap();
        let b = run_tournament(&profile, BLOCK * 2 + 17, 9).unwrap();
        assert_eq!(a, b);
        // the first BLOCK trials of a longer run match a shorter run's blocks
        let short = run_tournament(&profile, BLOCK, 9).unwrap();
        assert!(short.wins.iter().zip(&a.wins).all(|(s, l)| s <= l));
    }

    #[test]
    fn atom_frequency_matches_weight() {
        let e = eq(2, 0.75);
        let p = PlayerStrategy::Equilibrium(e);
        let trials = 200_000;
        let r = run_tournament(&[p.clone(), p], trials, 3).unwrap();
        let sigma = (e.a * (1.0 - e.a) / trials as f64).sqrt();
        for &k in &r.atom_draws {
            assert!((k as f64 / trials as f64 - e.a).abs() <= 3.0 * sigma);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = PlayerStrategy::Equilibrium(eq(2, 0.3));
        assert!(run_tournament(std::slice::from_ref(&p), 10, 0).is_err());
        assert!(run_tournament(&[p.clone(), p.clone()], 0, 0).is_err());
        let dup = vec![
            Entrant { strategy: p.clone(), key: 4 },
            Entrant { strategy: p.clone(), key: 4 },
        ];
        assert!(run_tournament_keyed(&dup, 10, 0).is_err());
        assert!(empirical_mean_check(&eq(2, 0.3), 100, 0).is_err());
        let off = DiscreteDistribution::point_mass(0.4).unwrap();
        assert!(empirical_deviation_payoff(&off, &GameConfig::new(2, 0.3).unwrap(), 1000, 0).is_err());
    }

    #[test]
    fn csv_export() {
        let p = PlayerStrategy::Equilibrium(eq(2, 0.3));
        let r = run_tournament(&[p.clone(), p], 1000, 5).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some(PLAYER_CSV_HEADER));
        assert_eq!(text.lines().count(), 3);
    }
}
