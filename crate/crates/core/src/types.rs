//! Value types shared by the solver, payoff engine, oracle and simulator.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Tolerance on the total probability of a discrete distribution.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Tolerance when a discrete distribution must hit a requested mean.
pub const MEAN_MATCH_TOL: f64 = 1e-9;

/// A game instance: `n` players, each constrained to mean `mu` on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n: usize,
    pub mu: f64,
}

impl GameConfig {
    pub fn new(n: usize, mu: f64) -> Result<Self> {
        validate_config(n as i64, mu)
    }

    /// The symmetric game value: every player wins with probability 1/n.
    pub fn game_value(&self) -> f64 {
        1.0 / self.n as f64
    }
}

pub fn validate_config(n: i64, mu: f64) -> Result<GameConfig> {
    if n < 2 {
        return Err(GameError::NOutOfRange(n));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(GameError::MuOutOfRange(mu));
    }
    Ok(GameConfig { n: n as usize, mu })
}

/// One draw from a strategy. The equilibrium point mass at 1 is kept as a
/// separate variant so that ties at the top are exact events.
#[derive(Debug, Clone, Copy)]
pub enum Realization {
    Continuous(f64),
    AtomOne,
}

impl Realization {
    pub fn value(&self) -> f64 {
        match *self {
            Realization::Continuous(x) => x,
            Realization::AtomOne => 1.0,
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Realization::AtomOne)
    }
}

impl PartialEq for Realization {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Realization {}

impl PartialOrd for Realization {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Realization {
    fn cmp(&self, other: &Self) -> Ordering {
        use Realization::*;
        match (self, other) {
            (AtomOne, AtomOne) => Ordering::Equal,
            (AtomOne, Continuous(_)) => Ordering::Greater,
            (Continuous(_), AtomOne) => Ordering::Less,
            (Continuous(x), Continuous(y)) => x.total_cmp(y),
        }
    }
}

/// Finite distribution on [0, 1]: strictly increasing support, positive
/// weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DiscreteDistribution {
    points: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    points: Vec<(f64, f64)>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = GameError;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        DiscreteDistribution::new(raw.points)
    }
}

impl From<DiscreteDistribution> for RawDistribution {
    fn from(d: DiscreteDistribution) -> Self {
        RawDistribution { points: d.points }
    }
}

impl DiscreteDistribution {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(GameError::InvalidDistribution("empty support".into()));
        }
        for (i, &(x, p)) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) {
                return Err(GameError::InvalidDistribution(format!(
                    "point {i}: x = {x} outside [0, 1]"
                )));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(GameError::InvalidDistribution(format!(
                    "point {i}: probability {p} outside (0, 1]"
                )));
            }
            if i > 0 && points[i - 1].0 >= x {
                return Err(GameError::InvalidDistribution(format!(
                    "point {i}: x = {x} does not strictly increase"
                )));
            }
        }
        let total = compensated_sum(points.iter().map(|&(_, p)| p));
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(GameError::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { points })
    }

    /// Like [`DiscreteDistribution::new`], additionally requiring the mean to match `mu`.
    pub fn with_mean(points: Vec<(f64, f64)>, mu: f64) -> Result<Self> {
        let d = Self::new(points)?;
        d.check_mean(mu)?;
        Ok(d)
    }

    pub fn check_mean(&self, mu: f64) -> Result<()> {
        let actual = self.mean();
        if (actual - mu).abs() > MEAN_MATCH_TOL {
            return Err(GameError::MeanMismatch {
                expected: mu,
                actual,
            });
        }
        Ok(())
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::new(vec![(x, 1.0)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> f64 {
        discrete_mean(self)
    }

    /// Weight placed exactly on x = 1, if any.
    pub fn top_atom(&self) -> f64 {
        match self.points.last() {
            Some(&(1.0, p)) => p,
            _ => 0.0,
        }
    }
}

pub fn discrete_mean(d: &DiscreteDistribution) -> f64 {
    compensated_sum(d.points.iter().map(|&(x, p)| x * p))
}

/// Neumaier-compensated summation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
