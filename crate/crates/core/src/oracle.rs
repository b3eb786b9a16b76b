//! Global best response over all mean-`mu` distributions on [0, 1].
//!
//! A deviation's payoff is linear in its distribution, so the best payoff
//! at mean `mu` is the least concave majorant of the win curve evaluated at
//! `mu`. On a finite grid that majorant is the upper hull of the samples,
//! and an optimal deviation sits on the two hull vertices bracketing `mu`.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::payoff::{deviation_payoff, win_curve_vs_discrete, win_curve_vs_equilibrium, WinCurve};
use crate::solver::{power_law_profile, solve, EquilibriumStrategy};
use crate::types::{DiscreteDistribution, GameConfig};

pub const MIN_GRID: usize = 100;
pub const DEFAULT_GRID: usize = 10_000;
pub const DEFAULT_SLACK: f64 = 1e-3;
/// Cells used when a shifted-support candidate is discretized.
pub const SHIFTED_BINS: usize = 10_000;
/// Allowed violation of the shifted-support mean relation.
pub const SHIFTED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub x: f64,
    pub w: f64,
}

/// Vertices of the least concave majorant of `samples` (sorted by `x`).
/// Collinear interior points are dropped.
pub fn concave_envelope(samples: &[(f64, f64)]) -> Result<Vec<EnvelopePoint>> {
    if samples.len() < 2 {
        return Err(GameError::InsufficientPoints {
            needed: 2,
            got: samples.len(),
        });
    }
    if samples.windows(2).any(|w| w[0].0 > w[1].0) {
        return Err(GameError::DomainError("samples are not sorted by x".into()));
    }
    let mut hull: Vec<EnvelopePoint> = Vec::new();
    for &(x, w) in samples {
        if let Some(last) = hull.last_mut() {
            if last.x == x {
                last.w = last.w.max(w);
                // the raised vertex may now hide its predecessors
                let p = *last;
                hull.pop();
                pop_hidden(&mut hull, p);
                hull.push(p);
                continue;
            }
        }
        let p = EnvelopePoint { x, w };
        pop_hidden(&mut hull, p);
        hull.push(p);
    }
    if hull.len() < 2 {
        return Err(GameError::InsufficientPoints {
            needed: 2,
            got: hull.len(),
        });
    }
    Ok(hull)
}

fn pop_hidden(hull: &mut Vec<EnvelopePoint>, p: EnvelopePoint) {
    while hull.len() >= 2 {
        let a = hull[hull.len() - 2];
        let b = hull[hull.len() - 1];
        // b is on or below the chord a -> p
        let cross = (b.x - a.x) * (p.w - a.w) - (b.w - a.w) * (p.x - a.x);
        if cross >= 0.0 {
            hull.pop();
        } else {
            break;
        }
    }
}

/// Index `j` with `env[j].x <= x <= env[j + 1].x`.
fn bracket(env: &[EnvelopePoint], x: f64) -> Option<usize> {
    if env.len() < 2 || x < env[0].x || x > env[env.len() - 1].x {
        return None;
    }
    let j = env.partition_point(|p| p.x <= x);
    Some(j.saturating_sub(1).min(env.len() - 2))
}

pub fn envelope_value(env: &[EnvelopePoint], x: f64) -> Result<f64> {
    let j = bracket(env, x)
        .ok_or_else(|| GameError::DomainError(format!("x = {x} outside the envelope")))?;
    let (l, r) = (env[j], env[j + 1]);
    if x == l.x {
        return Ok(l.w);
    }
    if x == r.x {
        return Ok(r.w);
    }
    let lam = (x - l.x) / (r.x - l.x);
    Ok(l.w + lam * (r.w - l.w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseReport {
    /// Best achievable win probability at the required mean.
    pub value: f64,
    /// `value - 1/n`.
    pub margin: f64,
    /// Number of grid points sampled.
    pub grid_size: usize,
    /// A deviation achieving `value`, on at most two grid points.
    pub deviation: DiscreteDistribution,
}

pub fn best_response(curve: &WinCurve, mu: f64, m: usize) -> Result<BestResponseReport> {
    if m < MIN_GRID {
        return Err(GameError::InsufficientPoints {
            needed: MIN_GRID,
            got: m,
        });
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(GameError::MuOutOfRange(mu));
    }
    let grid = curve.grid(m, mu);
    let samples = curve.sample(&grid);
    let env = concave_envelope(&samples)?;
    let j = bracket(&env, mu).expect("grid spans [0, 1]");
    let (l, r) = (env[j], env[j + 1]);

    let points = if mu == l.x {
        vec![(l.x, 1.0)]
    } else if mu == r.x {
        vec![(r.x, 1.0)]
    } else {
        let p_right = (mu - l.x) / (r.x - l.x);
        vec![(l.x, 1.0 - p_right), (r.x, p_right)]
    };
    let deviation = DiscreteDistribution::new(points)?;
    let value = deviation_payoff(&deviation, curve);
    debug_assert!((value - envelope_value(&env, mu).unwrap()).abs() < 1e-12);
    Ok(BestResponseReport {
        value,
        margin: value - 1.0 / curve.n() as f64,
        grid_size: grid.len(),
        deviation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub passed: bool,
    pub report: BestResponseReport,
}

/// Solve `cfg` and check that no deviation beats `1/n` by more than `slack`.
pub fn verify_equilibrium(cfg: &GameConfig, m: usize, slack: f64) -> Result<Verification> {
    verify_strategy(&solve(cfg)?, m, slack)
}

/// Same check for an arbitrary strategy of the equilibrium shape.
pub fn verify_strategy(
    strategy: &EquilibriumStrategy,
    m: usize,
    slack: f64,
) -> Result<Verification> {
    let curve = win_curve_vs_equilibrium(strategy);
    let report = best_response(&curve, strategy.mu(), m)?;
    Ok(Verification {
        passed: report.margin <= slack,
        report,
    })
}

/// Candidate with a continuous part on `[t, s]`, `t > 0`, and mass `a` at 1,
/// tied together by the mean constraint
/// `a = (n mu - (s + (n-1) t)) / (n - (s + (n-1) t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedCandidate {
    pub config: GameConfig,
    pub t: f64,
    pub a: f64,
    pub s: f64,
}

/// Right-hand side of the shifted-support mean relation.
pub fn shifted_atom(cfg: &GameConfig, t: f64, s: f64) -> f64 {
    let n = cfg.n as f64;
    let spread = s + (n - 1.0) * t;
    (n * cfg.mu - spread) / (n - spread)
}

impl ShiftedCandidate {
    pub fn new(cfg: &GameConfig, t: f64, a: f64, s: f64) -> Result<Self> {
        if !(t > 0.0 && t < s && s <= 1.0) {
            return Err(GameError::InvalidCandidate(format!(
                "need 0 < t < s <= 1, got t = {t}, s = {s}"
            )));
        }
        if !(0.0..1.0).contains(&a) {
            return Err(GameError::InvalidCandidate(format!("atom {a} outside [0, 1)")));
        }
        let implied = shifted_atom(cfg, t, s);
        if (implied - a).abs() > SHIFTED_TOL {
            return Err(GameError::InvalidCandidate(format!(
                "a = {a} inconsistent with t = {t}, s = {s} (mean constraint gives {implied})"
            )));
        }
        Ok(Self {
            config: *cfg,
            t,
            a,
            s,
        })
    }

    /// The member of the family with lower bound `t`: no atom when the
    /// support `[t, n mu - (n-1) t]` fits in [0, 1], otherwise `s = 1` and
    /// the atom absorbs the remaining mean.
    pub fn from_t(cfg: &GameConfig, t: f64) -> Result<Self> {
        let n = cfg.n as f64;
        let s_free = n * cfg.mu - (n - 1.0) * t;
        if s_free <= 1.0 {
            Self::new(cfg, t, 0.0, s_free)
        } else {
            Self::new(cfg, t, shifted_atom(cfg, t, 1.0), 1.0)
        }
    }

    pub fn profile(&self, bins: usize) -> Result<DiscreteDistribution> {
        power_law_profile(self.config.n, self.a, self.t, self.s, bins)
    }
}

/// Search for a deviation beating `1/n` by more than `slack` against
/// opponents who all play `profile`.
pub fn refute_profile(
    profile: &DiscreteDistribution,
    cfg: &GameConfig,
    m: usize,
    slack: f64,
) -> Result<BestResponseReport> {
    profile.check_mean(cfg.mu)?;
    let curve = win_curve_vs_discrete(profile, cfg.n);
    let report = best_response(&curve, cfg.mu, m)?;
    if report.margin > slack {
        Ok(report)
    } else {
        Err(GameError::NoDeviationFound(Box::new(report)))
    }
}

pub fn refute_shifted(
    candidate: &ShiftedCandidate,
    m: usize,
    slack: f64,
) -> Result<BestResponseReport> {
    let profile = candidate.profile(SHIFTED_BINS)?;
    refute_profile(&profile, &candidate.config, m, slack)
}
