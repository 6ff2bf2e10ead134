//! Estimation functions: reconstruct a predicted distribution per input from
//! what was recorded in a stream.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{OutcomeDistribution, OutcomeSpace, PredictionStream};

/// Predicted distribution per distinct input id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedModel {
    space: OutcomeSpace,
    predictions: BTreeMap<String, OutcomeDistribution>,
}

impl EstimatedModel {
    /// A directly specified model; every distribution must live on `space`.
    pub fn new(
        space: OutcomeSpace,
        predictions: BTreeMap<String, OutcomeDistribution>,
    ) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::domain("model has no inputs"));
        }
        if let Some((id, _)) = predictions.iter().find(|(_, d)| *d.space() != space) {
            return Err(Error::domain(format!(
                "prediction for `{id}` uses a different outcome space"
            )));
        }
        Ok(Self { space, predictions })
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn predictions(&self) -> &BTreeMap<String, OutcomeDistribution> {
        &self.predictions
    }

    pub fn prediction(&self, id: &str) -> Option<&OutcomeDistribution> {
        self.predictions.get(id)
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "mle")]
    EmpiricalMle,
    #[serde(rename = "compas-decile")]
    CompasDecile,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::EmpiricalMle => "mle",
            Estimator::CompasDecile => "compas-decile",
        }
    }

    pub fn estimate(self, stream: &PredictionStream) -> Result<EstimatedModel> {
        match self {
            Estimator::EmpiricalMle => empirical_mle_estimator(stream),
            Estimator::CompasDecile => compas_decile_estimator(stream),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Estimator::EmpiricalMle),
            "compas-decile" => Ok(Estimator::CompasDecile),
            other => Err(Error::domain(format!(
                "unknown estimator `{other}` (expected mle or compas-decile)"
            ))),
        }
    }
}

/// Relative frequency of each sampled output, per input id.
pub fn empirical_mle_estimator(stream: &PredictionStream) -> Result<EstimatedModel> {
    let space = stream.space();
    let mut counts: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for r in stream.records() {
        let out = r.sampled_output.as_deref().ok_or_else(|| {
            Error::domain(format!("record `{}` has no sampled output", r.input_id))
        })?;
        let idx = space.require(out)?;
        counts
            .entry(r.input_id.as_str())
            .or_insert_with(|| vec![0; space.len()])[idx] += 1;
    }
    let predictions = counts
        .into_iter()
        .map(|(id, c)| {
            let total: u64 = c.iter().sum();
            let probs = c.iter().map(|&k| k as f64 / total as f64).collect();
            Ok((
                id.to_string(),
                OutcomeDistribution::new(space.clone(), probs)?,
            ))
        })
        .collect::<Result<_>>()?;
    EstimatedModel::new(space.clone(), predictions)
}

/// Probability of the scored event for a COMPAS decile.
///
/// Deciles 0 and 10 are pulled in to 0.0001 and 0.9999 so no prediction is
/// certain; every other decile `d` maps to `d / 10`.
pub fn decile_probability(decile: u8) -> Result<f64> {
    match decile {
        0 => Ok(0.0001),
        10 => Ok(0.9999),
        1..=9 => Ok(f64::from(decile) / 10.0),
        _ => Err(Error::domain(format!("decile {decile} outside 0..=10"))),
    }
}

fn parse_decile(score: f64) -> Option<u8> {
    (score.fract() == 0.0 && (0.0..=10.0).contains(&score)).then_some(score as u8)
}

/// Turns each record's decile (`raw_score`) into a binary prediction.
///
/// The space must have exactly two labels; the decile scores the second
/// (`labels[1]`, e.g. `recid`), the first gets the complement. Records with
/// repeated ids are re-keyed as in [`PredictionStream::with_unique_ids`], so
/// callers should evaluate against that re-keyed stream.
pub fn compas_decile_estimator(stream: &PredictionStream) -> Result<EstimatedModel> {
    let space = stream.space();
    if space.len() != 2 {
        return Err(Error::domain(format!(
            "decile estimator needs a binary outcome space, got {} labels",
            space.len()
        )));
    }
    let keyed;
    let stream = if stream.has_duplicate_ids() {
        keyed = stream.with_unique_ids();
        &keyed
    } else {
        stream
    };
    let mut predictions = BTreeMap::new();
    for r in stream.records() {
        let score = r
            .raw_score
            .ok_or_else(|| Error::domain(format!("record `{}` has no decile score", r.input_id)))?;
        let decile = parse_decile(score).ok_or_else(|| {
            Error::domain(format!(
                "record `{}` has decile {score}, expected an integer in 0..=10",
                r.input_id
            ))
        })?;
        let p = decile_probability(decile)?;
        let dist = OutcomeDistribution::new(space.clone(), vec![1.0 - p, p])?;
        predictions.insert(r.input_id.clone(), dist);
    }
    EstimatedModel::new(space.clone(), predictions)
}
