//! Strictly proper scoring rules.
//!
//! All rules are oriented so that larger is better:
//!
//! | rule        | score                      | range      |
//! |-------------|----------------------------|------------|
//! | Brier       | `-Σ_y' (p(y') - 1[y'=y])²` | `[-2, 0]`  |
//! | Logarithmic | `ln p(y)`                  | `(-∞, 0]`  |
//! | Spherical   | `p(y) / ‖p‖₂`              | `[0, 1]`   |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{OutcomeDistribution, OutcomeSpace};

/// Probability floor used by [`log_score_floored`].
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringRule {
    Brier,
    #[serde(rename = "log")]
    Logarithmic,
    Spherical,
}

impl ScoringRule {
    pub const ALL: [ScoringRule; 3] = [
        ScoringRule::Brier,
        ScoringRule::Logarithmic,
        ScoringRule::Spherical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoringRule::Brier => "brier",
            ScoringRule::Logarithmic => "log",
            ScoringRule::Spherical => "spherical",
        }
    }

    pub fn score(self, p: &OutcomeDistribution, y: &str) -> Result<f64> {
        match self {
            ScoringRule::Brier => brier_score(p, y),
            ScoringRule::Logarithmic => log_score(p, y),
            ScoringRule::Spherical => spherical_score(p, y),
        }
    }

    /// Closed range of attainable scores; the log rule is unbounded below.
    pub fn range(self) -> (f64, f64) {
        match self {
            ScoringRule::Brier => (-2.0, 0.0),
            ScoringRule::Logarithmic => (f64::NEG_INFINITY, 0.0),
            ScoringRule::Spherical => (0.0, 1.0),
        }
    }
}

impl fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoringRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brier" => Ok(ScoringRule::Brier),
            "log" => Ok(ScoringRule::Logarithmic),
            "spherical" => Ok(ScoringRule::Spherical),
            other => Err(Error::domain(format!(
                "unknown scoring rule `{other}` (expected brier, log or spherical)"
            ))),
        }
    }
}

pub fn brier_score(p: &OutcomeDistribution, y: &str) -> Result<f64> {
    let idx = p.space().require(y)?;
    Ok(brier_raw(p.probs(), idx))
}

pub fn log_score(p: &OutcomeDistribution, y: &str) -> Result<f64> {
    let idx = p.space().require(y)?;
    let py = p.probs()[idx];
    if py == 0.0 {
        return Err(Error::ZeroProbability {
            label: y.to_string(),
        });
    }
    Ok(py.ln())
}

/// Log score with `p(y)` floored at [`LOG_FLOOR`]; for exploration only.
pub fn log_score_floored(p: &OutcomeDistribution, y: &str) -> Result<f64> {
    let idx = p.space().require(y)?;
    Ok(p.probs()[idx].max(LOG_FLOOR).ln())
}

pub fn spherical_score(p: &OutcomeDistribution, y: &str) -> Result<f64> {
    let idx = p.space().require(y)?;
    Ok(spherical_raw(p.probs(), idx))
}

fn brier_raw(probs: &[f64], idx: usize) -> f64 {
    let sq: f64 = probs
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let d = q - if i == idx { 1.0 } else { 0.0 };
            d * d
        })
        .sum();
    -sq
}

fn spherical_raw(probs: &[f64], idx: usize) -> f64 {
    let norm = probs.iter().map(|q| q * q).sum::<f64>().sqrt();
    probs[idx] / norm
}

fn log_raw(probs: &[f64], idx: usize) -> f64 {
    probs[idx].ln()
}

/// Result of a brute-force propriety check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProprietyReport {
    pub is_proper: bool,
    /// Largest `E_q[s(p)] - E_q[s(q)]` over grid points `p ≠ q`.
    pub worst_violation: f64,
    pub grid_points: usize,
}

/// Margin below zero that every `p ≠ q` must clear for the argmax to count as unique.
pub const PROPRIETY_TOLERANCE: f64 = 1e-12;

/// Checks strict propriety of `rule` on the simplex grid of mesh `grid_step`.
///
/// The logarithmic rule is checked on interior grid points only.
pub fn check_strict_propriety(
    rule: ScoringRule,
    space: &OutcomeSpace,
    grid_step: f64,
) -> Result<ProprietyReport> {
    let interior = rule == ScoringRule::Logarithmic;
    let score: fn(&[f64], usize) -> f64 = match rule {
        ScoringRule::Brier => brier_raw,
        ScoringRule::Logarithmic => log_raw,
        ScoringRule::Spherical => spherical_raw,
    };
    check_strict_propriety_with(score, space, grid_step, interior)
}

/// Like [`check_strict_propriety`] for an arbitrary score function
/// `score(probs, outcome_index)`.
///
/// `q` ranges over the whole grid and so does `p`. For every `q` the expected
/// score `Σ_y q(y) s(p, y)` is evaluated at every `p`; the rule is strictly
/// proper on the grid when every `p ≠ q` falls short of `p = q` by more than
/// [`PROPRIETY_TOLERANCE`].
pub fn check_strict_propriety_with<F>(
    score: F,
    space: &OutcomeSpace,
    grid_step: f64,
    interior_only: bool,
) -> Result<ProprietyReport>
where
    F: Fn(&[f64], usize) -> f64,
{
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Error::domain(format!(
            "grid step {grid_step} outside (0, 0.1]"
        )));
    }
    let dim = space.len();
    if !(2..=3).contains(&dim) {
        return Err(Error::domain(format!(
            "propriety check supports 2 or 3 outcomes, got {dim}"
        )));
    }
    let steps = (1.0 / grid_step).round();
    if (steps * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "1 / grid step {grid_step} is not an integer"
        )));
    }
    let steps = steps as usize;

    let grid = simplex_lattice(dim, steps, interior_only);
    // scores[p][y]
    let scores: Vec<Vec<f64>> = grid
        .iter()
        .map(|p| (0..dim).map(|y| score(p, y)).collect())
        .collect();

    let mut worst = f64::NEG_INFINITY;
    for (qi, q) in grid.iter().enumerate() {
        let expected = |pi: usize| -> f64 {
            q.iter()
                .zip(&scores[pi])
                .filter(|(qy, _)| **qy > 0.0)
                .map(|(qy, s)| qy * s)
                .sum()
        };
        let honest = expected(qi);
        for pi in (0..grid.len()).filter(|&pi| pi != qi) {
            let excess = expected(pi) - honest;
            // NaN counts as a violation.
            worst = if excess.is_nan() {
                f64::INFINITY
            } else {
                worst.max(excess)
            };
        }
    }
    Ok(ProprietyReport {
        is_proper: worst < -PROPRIETY_TOLERANCE,
        worst_violation: worst,
        grid_points: grid.len(),
    })
}

/// Points `(i_1/n, ..., i_d/n)` with nonnegative integer `i` summing to `n`;
/// with `interior_only`, all `i_k ≥ 1`.
fn simplex_lattice(dim: usize, n: usize, interior_only: bool) -> Vec<Vec<f64>> {
    fn rec(
        dim: usize,
        remaining: usize,
        min: usize,
        n: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<f64>>,
    ) {
        if prefix.len() == dim - 1 {
            if remaining >= min {
                out.push(
                    prefix
                        .iter()
                        .chain(std::iter::once(&remaining))
                        .map(|&i| i as f64 / n as f64)
                        .collect(),
                );
            }
            return;
        }
        for i in min..=remaining {
            prefix.push(i);
            rec(dim, remaining - i, min, n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(
        dim,
        n,
        usize::from(interior_only),
        n,
        &mut Vec::new(),
        &mut out,
    );
    out
}
