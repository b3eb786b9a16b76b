//! Symmetric equilibrium of the fixed-mean highest-realization game.
//!
//! Every player mixes a power-law continuous part on `[0, s]` with an
//! optional point mass `a` at 1:
//!
//! ```text
//! F(x) = (1 - a) (x / s)^(1/(n-1))   on [0, s]
//! F(x) = 1 - a                       on (s, 1)
//! F(1) = 1
//! ```
//!
//! When `n * mu <= 1` there is no atom and `s = n * mu`. Otherwise the atom
//! solves `a = mu (1 - (1 - a)^n)` and `s = n mu (1 - a)^(n-1)`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::format::fmt_g17;
use crate::types::{DiscreteDistribution, GameConfig, Realization};

/// Slack on the regime test `n * mu <= 1`.
pub const REGIME_SLACK: f64 = 1e-15;
/// Required `|phi|` at the returned atom weight.
pub const ROOT_TOL: f64 = 1e-14;
pub const MAX_BISECTION_ITERS: usize = 200;
/// Below this distance from `a = 0` the ratio `a / (1 - (1-a)^n)` takes its limit `1/n`.
const LIMIT_THRESHOLD: f64 = 1e-13;
/// Above this player count, powers are evaluated in the log domain.
const LOG_DOMAIN_N: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `mu <= 1/n`: no atom, support `[0, n mu]`.
    Interior,
    /// `mu > 1/n`: atom at 1 plus a continuous part on `[0, s]`, `s < 1`.
    Atom,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Interior => "Interior",
            Regime::Atom => "Atom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumStrategy {
    pub config: GameConfig,
    pub regime: Regime,
    /// Point mass at 1.
    pub a: f64,
    /// Upper end of the continuous support.
    pub s: f64,
    /// `1 / (n - 1)`.
    pub exponent: f64,
}

pub fn is_interior(cfg: &GameConfig) -> bool {
    cfg.n as f64 * cfg.mu <= 1.0 + REGIME_SLACK
}

/// `a / (1 - (1 - a)^n)`, i.e. `(1 - b) / (1 - b^n)` with `b = 1 - a`.
fn atom_ratio(a: f64, n: usize) -> f64 {
    if a < LIMIT_THRESHOLD {
        // first-order expansion around the 1/n limit
        let nf = n as f64;
        return 1.0 / nf + a * (nf - 1.0) / (2.0 * nf);
    }
    let one_minus_bn = -(nf_ln1p(n, a)).exp_m1();
    a / one_minus_bn
}

/// `n * ln(1 - a)`.
fn nf_ln1p(n: usize, a: f64) -> f64 {
    n as f64 * (-a).ln_1p()
}

/// `(1 - a)^k` evaluated as `exp(k ln(1 - a))`.
pub(crate) fn pow_one_minus(a: f64, k: usize) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    if a >= 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * (-a).ln_1p()).exp()
}

/// Weight of the atom at 1 in the symmetric equilibrium.
///
/// Zero when `n mu <= 1`. Otherwise the unique root in `(0, mu)` of
/// `phi(a) = a / (1 - (1-a)^n) - mu`, which is strictly increasing in `a`
/// with `phi(0+) = 1/n - mu < 0` and `phi(1) = 1 - mu > 0`. For large `n`
/// the root is within an ulp of `mu` and may round to it.
pub fn solve_atom(cfg: &GameConfig) -> Result<f64> {
    if is_interior(cfg) {
        return Ok(0.0);
    }
    let n = cfg.n;
    let mu = cfg.mu;
    let phi = |a: f64| atom_ratio(a, n) - mu;

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut iterations = 0;
    while iterations < MAX_BISECTION_ITERS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = phi(mid);
        if f == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (phi(lo), phi(hi));
    let (a, residual) = if flo.abs() <= fhi.abs() {
        (lo, flo)
    } else {
        (hi, fhi)
    };
    if residual.abs() > ROOT_TOL || !(a > 0.0 && a <= mu) {
        return Err(GameError::ConvergenceFailure {
            iterations,
            residual: residual.abs(),
        });
    }
    Ok(a)
}

pub fn solve(cfg: &GameConfig) -> Result<EquilibriumStrategy> {
    let exponent = 1.0 / (cfg.n as f64 - 1.0);
    if is_interior(cfg) {
        return Ok(EquilibriumStrategy {
            config: *cfg,
            regime: Regime::Interior,
            a: 0.0,
            s: (cfg.n as f64 * cfg.mu).min(1.0),
            exponent,
        });
    }
    let a = solve_atom(cfg)?;
    let s = cfg.n as f64 * cfg.mu * pow_one_minus(a, cfg.n - 1);
    Ok(EquilibriumStrategy {
        config: *cfg,
        regime: Regime::Atom,
        a,
        s,
        exponent,
    })
}

impl EquilibriumStrategy {
    /// A strategy of the equilibrium shape with an arbitrary atom `a`, the
    /// support bound chosen so that the mean is still `mu`:
    /// `s = n (mu - a) / (1 - a)`. Used to probe non-equilibrium candidates.
    pub fn candidate(cfg: &GameConfig, a: f64) -> Result<Self> {
        if !(0.0..cfg.mu).contains(&a) {
            return Err(GameError::InvalidCandidate(format!(
                "atom {a} must lie in [0, mu = {})",
                cfg.mu
            )));
        }
        let s = cfg.n as f64 * (cfg.mu - a) / (1.0 - a);
        Self::from_parts(cfg, a, s)
    }

    /// Rebuild a strategy from its `(a, s)` parameters.
    pub fn from_parts(cfg: &GameConfig, a: f64, s: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(GameError::InvalidCandidate(format!("atom {a} outside [0, 1)")));
        }
        if !(s > 0.0 && s <= 1.0) {
            return Err(GameError::InvalidCandidate(format!(
                "support bound {s} outside (0, 1]"
            )));
        }
        Ok(Self {
            config: *cfg,
            regime: if a > 0.0 { Regime::Atom } else { Regime::Interior },
            a,
            s,
            exponent: 1.0 / (cfg.n as f64 - 1.0),
        })
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn mu(&self) -> f64 {
        self.config.mu
    }

    /// `a + (1 - a) s / n`.
    pub fn mean(&self) -> f64 {
        self.a + (1.0 - self.a) * self.s / self.n() as f64
    }

    /// `(x / s)^(1/(n-1))` for `x` in `[0, s]`.
    fn root_ratio(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let r = x / self.s;
        if self.n() > LOG_DOMAIN_N {
            (r.ln() * self.exponent).exp()
        } else {
            r.powf(self.exponent)
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(GameError::DomainError(format!("cdf at x = {x}")));
        }
        if x == 1.0 {
            return Ok(1.0);
        }
        if x >= self.s {
            return Ok(1.0 - self.a);
        }
        Ok((1.0 - self.a) * self.root_ratio(x))
    }

    /// Inverse CDF; `u >= 1 - a` lands on the atom.
    pub fn quantile(&self, u: f64) -> Result<Realization> {
        if !(0.0..1.0).contains(&u) {
            return Err(GameError::DomainError(format!("quantile at u = {u}")));
        }
        Ok(self.quantile_unchecked(u))
    }

    pub(crate) fn quantile_unchecked(&self, u: f64) -> Realization {
        let cont = 1.0 - self.a;
        if u >= cont {
            return Realization::AtomOne;
        }
        let v = u / cont;
        let x = if v <= 0.0 {
            0.0
        } else if self.n() > LOG_DOMAIN_N {
            self.s * (v.ln() * (self.n() - 1) as f64).exp()
        } else {
            self.s * v.powi((self.n() - 1) as i32)
        };
        Realization::Continuous(x.min(self.s))
    }

    /// Discretize into `bins` equal-probability cells of the continuous part
    /// (each placed at its conditional mean, so the overall mean is preserved)
    /// plus the exact atom at 1.
    pub fn discretize(&self, bins: usize) -> Result<DiscreteDistribution> {
        power_law_profile(self.n(), self.a, 0.0, self.s, bins)
    }
}

/// Discrete approximation of the shape
/// `F(x) = (1 - a) ((x - t) / (s - t))^(1/(n-1))` on `[t, s]` with mass `a` at 1.
pub fn power_law_profile(
    n: usize,
    a: f64,
    t: f64,
    s: f64,
    bins: usize,
) -> Result<DiscreteDistribution> {
    if bins == 0 {
        return Err(GameError::InsufficientPoints { needed: 1, got: 0 });
    }
    if !(0.0 <= t && t < s && s <= 1.0) {
        return Err(GameError::InvalidCandidate(format!(
            "need 0 <= t < s <= 1, got t = {t}, s = {s}"
        )));
    }
    let nf = n as f64;
    let weight = (1.0 - a) / bins as f64;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(bins + 1);
    let mut prev_pow = 0.0f64;
    for k in 0..bins {
        let v_hi = (k + 1) as f64 / bins as f64;
        let hi_pow = v_hi.powi(n as i32);
        // E[V^(n-1) | V in bin] = (v_hi^n - v_lo^n) / (n (v_hi - v_lo))
        let x = t + (s - t) * (hi_pow - prev_pow) * bins as f64 / nf;
        prev_pow = hi_pow;
        match points.last_mut() {
            Some(last) if last.0 >= x => last.1 += weight,
            _ => points.push((x, weight)),
        }
    }
    if a > 0.0 {
        if points.last().is_some_and(|p| p.0 >= 1.0) {
            return Err(GameError::InvalidCandidate(
                "continuous part collides with the atom at 1".into(),
            ));
        }
        points.push((1.0, a));
    }
    DiscreteDistribution::new(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub mu: f64,
    pub a: f64,
    pub s: f64,
    pub regime: Regime,
}

/// Solve for every `n` in `n_min..=n_max` at fixed `mu`.
pub fn sweep(mu: f64, n_min: usize, n_max: usize) -> Result<Vec<SweepRow>> {
    if n_min < 2 {
        return Err(GameError::NOutOfRange(n_min as i64));
    }
    if n_min > n_max {
        return Err(GameError::DomainError(format!(
            "empty player range {n_min}..={n_max}"
        )));
    }
    (n_min..=n_max)
        .into_par_iter()
        .map(|n| {
            let cfg = GameConfig::new(n, mu)?;
            let eq = solve(&cfg)?;
            Ok(SweepRow {
                n,
                mu,
                a: eq.a,
                s: eq.s,
                regime: eq.regime,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "n,mu,a,s,regime";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            fmt_g17(r.mu),
            fmt_g17(r.a),
            fmt_g17(r.s),
            r.regime.as_str()
        )?;
    }
    Ok(())
}
