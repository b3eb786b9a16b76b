//! Expected payoffs: the probability that a single realization beats the
//! maximum of `n - 1` independent opponents, ties split fairly.
//!
//! Two tie-splitting indexings appear below. [`tie_split_sum`] counts the
//! opponents *not* at the top (`i` of them, the deviator shares with the
//! other `n - i`), giving the factor `1/(n - i)`. [`WinCurve`] counts the
//! opponents that *tie* (`i` of them, shared among `i + 1`), giving
//! `1/(i + 1)`. They are the same sum reindexed by `i -> n - 1 - i`.

use crate::error::{GameError, Result};
use crate::solver::{pow_one_minus, EquilibriumStrategy};
use crate::types::{compensated_sum, DiscreteDistribution, Realization};

/// `k ln(base)`, with `0 ln(0) = 0` so that `exp` of it yields `base^k`.
fn ln_pow(base: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * base.ln()
    }
}

/// Value per unit mass of playing 1 against opponents with an atom `a` at 1:
/// `(1 - (1 - a)^n) / (n a)`.
pub fn tie_split_closed(a: f64, n: usize) -> Result<f64> {
    check_tie_args(a, n)?;
    let one_minus_bn = -(n as f64 * (-a).ln_1p()).exp_m1();
    Ok(one_minus_bn / (n as f64 * a))
}

/// The same quantity as [`tie_split_closed`], summed term by term:
/// `sum_{i=0}^{n-1} C(n-1, i) (1/(n-i)) (1-a)^i a^(n-1-i)`.
pub fn tie_split_sum(a: f64, n: usize) -> Result<f64> {
    check_tie_args(a, n)?;
    let m = n - 1;
    let mut ln_binom = 0.0f64;
    let terms = (0..=m).map(|i| {
        if i > 0 {
            ln_binom += ((m - i + 1) as f64 / i as f64).ln();
        }
        let ln_term = ln_binom + ln_pow(1.0 - a, i) + ln_pow(a, m - i);
        ln_term.exp() / (n - i) as f64
    });
    Ok(compensated_sum(terms.collect::<Vec<_>>()))
}

fn check_tie_args(a: f64, n: usize) -> Result<()> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(GameError::DomainError(format!("atom weight {a} outside (0, 1]")));
    }
    if n < 2 {
        return Err(GameError::NOutOfRange(n as i64));
    }
    Ok(())
}

/// Win probability at a shared atom: `p` is the opponents' mass at the point,
/// `q` their mass strictly below it.
/// `sum_{i=0}^{n-1} C(n-1, i) p^i q^(n-1-i) / (i + 1)`.
pub fn tie_win_probability(p: f64, q: f64, n: usize) -> f64 {
    let m = n - 1;
    let mut ln_binom = 0.0f64;
    let mut terms = Vec::with_capacity(n);
    for i in 0..=m {
        if i > 0 {
            ln_binom += ((m - i + 1) as f64 / i as f64).ln();
        }
        let ln_term = ln_binom + ln_pow(p, i) + ln_pow(q, m - i);
        terms.push(ln_term.exp() / (i + 1) as f64);
    }
    compensated_sum(terms).clamp(0.0, 1.0)
}

/// `x -> P(x wins)` against `n - 1` independent copies of a fixed opponent strategy.
#[derive(Debug, Clone)]
pub enum WinCurve {
    Equilibrium {
        n: usize,
        a: f64,
        s: f64,
        /// `(1 - a)^(n-1)`: value on `(s, 1)`.
        plateau: f64,
        /// Value of the tagged atom at 1.
        atom_value: f64,
    },
    Discrete {
        n: usize,
        xs: Vec<f64>,
        ps: Vec<f64>,
        /// Opponent mass strictly below `xs[i]`.
        below: Vec<f64>,
    },
}

pub fn win_curve_vs_equilibrium(eq: &EquilibriumStrategy) -> WinCurve {
    let n = eq.n();
    let atom_value = if eq.a > 0.0 {
        tie_split_closed(eq.a, n).expect("atom weight in (0, 1)")
    } else {
        1.0
    };
    WinCurve::Equilibrium {
        n,
        a: eq.a,
        s: eq.s,
        plateau: pow_one_minus(eq.a, n - 1),
        atom_value,
    }
}

pub fn win_curve_vs_discrete(profile: &DiscreteDistribution, n: usize) -> WinCurve {
    let xs: Vec<f64> = profile.points().iter().map(|p| p.0).collect();
    let ps: Vec<f64> = profile.points().iter().map(|p| p.1).collect();
    let mut below = Vec::with_capacity(ps.len());
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &p in &ps {
        below.push((sum + comp).min(1.0));
        let t = sum + p;
        if sum.abs() >= p.abs() {
            comp += (sum - t) + p;
        } else {
            comp += (p - t) + sum;
        }
        sum = t;
    }
    WinCurve::Discrete { n, xs, ps, below }
}

impl WinCurve {
    pub fn n(&self) -> usize {
        match self {
            WinCurve::Equilibrium { n, .. } | WinCurve::Discrete { n, .. } => *n,
        }
    }

    /// `w(x)` for `x` in `[0, 1]`. `x == 1.0` is read as the top atom when
    /// the opponents carry one.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WinCurve::Equilibrium {
                s,
                plateau,
                atom_value,
                ..
            } => {
                if x >= 1.0 {
                    *atom_value
                } else if x >= *s {
                    *plateau
                } else if x <= 0.0 {
                    0.0
                } else {
                    plateau * x / s
                }
            }
            WinCurve::Discrete { n, xs, ps, below } => {
                let idx = xs.partition_point(|&v| v < x);
                if idx < xs.len() && xs[idx] == x {
                    tie_win_probability(ps[idx], below[idx], *n)
                } else {
                    let mass_below = if idx < xs.len() {
                        below[idx]
                    } else {
                        (below[idx - 1] + ps[idx - 1]).min(1.0)
                    };
                    mass_below.powi((*n - 1) as i32)
                }
            }
        }
    }

    pub fn eval_realization(&self, r: Realization) -> f64 {
        self.eval(r.value())
    }

    /// Value of playing exactly 1.
    pub fn w_atom(&self) -> f64 {
        self.eval(1.0)
    }

    /// Kinks and jumps of the curve (besides 0 and 1).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            WinCurve::Equilibrium { s, .. } => vec![*s],
            WinCurve::Discrete { xs, .. } => xs.clone(),
        }
    }

    /// Opponent atoms, where the curve jumps.
    pub fn atoms(&self) -> Vec<f64> {
        match self {
            WinCurve::Equilibrium { a, .. } => {
                if *a > 0.0 {
                    vec![1.0]
                } else {
                    Vec::new()
                }
            }
            WinCurve::Discrete { xs, .. } => xs.clone(),
        }
    }

    /// Sorted evaluation grid: `m` uniform points on [0, 1] together with
    /// 0, `mu`, 1, every breakpoint, and each atom offset by `±1/(10m)`.
    pub fn grid(&self, m: usize, mu: f64) -> Vec<f64> {
        let h = 1.0 / (10.0 * m as f64);
        let mut xs: Vec<f64> = (0..m)
            .map(|i| i as f64 / (m - 1).max(1) as f64)
            .collect();
        xs.extend([0.0, mu, 1.0]);
        xs.extend(self.breakpoints());
        for atom in self.atoms() {
            xs.extend([atom - h, atom, atom + h]);
        }
        xs.retain(|x| (0.0..=1.0).contains(x));
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<(f64, f64)> {
        grid.iter().map(|&x| (x, self.eval(x))).collect()
    }
}

/// Expected win probability of `dev` against the opponents behind `curve`.
/// The mean of `dev` is not checked here.
pub fn deviation_payoff(dev: &DiscreteDistribution, curve: &WinCurve) -> f64 {
    compensated_sum(dev.points().iter().map(|&(x, p)| p * curve.eval(x)))
}
