//! Group-fairness measures.
//!
//! A fairness measure sees the estimated model, the ground truth, the input
//! weighting and a set of instructions telling it how to read the data. The
//! only instructions shipped are a [`GroupPartition`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::accuracy::check_domains;
use crate::error::{Error, Result};
use crate::estimation::EstimatedModel;
use crate::sum::CompensatedSum;
use crate::types::{GroupPartition, InputDistribution};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum FairnessKind {
    EqOpp,
    /// A measure name this build does not implement.
    Other(String),
}

impl From<String> for FairnessKind {
    fn from(s: String) -> Self {
        match s.as_str() {
            "eqopp" => FairnessKind::EqOpp,
            _ => FairnessKind::Other(s),
        }
    }
}

impl From<FairnessKind> for String {
    fn from(k: FairnessKind) -> Self {
        k.to_string()
    }
}

impl fmt::Display for FairnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FairnessKind::EqOpp => f.write_str("eqopp"),
            FairnessKind::Other(s) => f.write_str(s),
        }
    }
}

impl FromStr for FairnessKind {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(FairnessKind::from(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessMeasureSpec {
    pub kind: FairnessKind,
    pub instructions: GroupPartition,
    /// Reserved for measures configured by free-form instructions; unused by EqOpp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opaque_payload: Option<Vec<u8>>,
}

impl FairnessMeasureSpec {
    pub fn eq_opp(partition: GroupPartition) -> Self {
        Self {
            kind: FairnessKind::EqOpp,
            instructions: partition,
            opaque_payload: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub measure: FairnessKind,
    pub value: f64,
    pub fnr_by_group: BTreeMap<String, f64>,
}

/// Weighted average probability that a ground-truth positive in `group` is
/// assigned to a negative outcome.
///
/// "Negative" is every label other than the partition's positive label; each
/// input contributes the predicted mass on those labels.
pub fn group_fnr(
    model: &EstimatedModel,
    truth: &BTreeMap<String, String>,
    p: &InputDistribution,
    partition: &GroupPartition,
    group: &str,
) -> Result<f64> {
    check_domains(model, truth, p)?;
    check_instructions(model, partition)?;
    if !partition.groups().iter().any(|g| g == group) {
        return Err(Error::domain(format!(
            "`{group}` is not a distinguished group of the partition"
        )));
    }
    let positive = partition.positive_label();
    let positive_idx = model.space().require(positive)?;

    let mut mass = CompensatedSum::new();
    let mut weighted_miss = CompensatedSum::new();
    for (id, dist) in model.predictions() {
        if partition.group(id) != Some(group) || truth[id] != positive {
            continue;
        }
        let w = p.weights()[id];
        mass += w;
        let negative_mass: f64 = dist
            .probs()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != positive_idx)
            .map(|(_, q)| q)
            .sum();
        weighted_miss += w * negative_mass;
    }
    let mass = mass.value();
    if mass <= 0.0 {
        return Err(Error::EmptyPositiveClass {
            group: group.to_string(),
        });
    }
    Ok((weighted_miss.value() / mass).clamp(0.0, 1.0))
}

/// Negated absolute gap between the first two distinguished groups' false
/// negative rates. 0 is perfectly fair, -1 maximally unfair.
pub fn eq_opp(
    model: &EstimatedModel,
    truth: &BTreeMap<String, String>,
    p: &InputDistribution,
    partition: &GroupPartition,
) -> Result<f64> {
    let (a, b) = distinguished_pair(partition)?;
    let fa = group_fnr(model, truth, p, partition, a)?;
    let fb = group_fnr(model, truth, p, partition, b)?;
    Ok(-(fa - fb).abs())
}

pub fn evaluate_fairness(
    spec: &FairnessMeasureSpec,
    model: &EstimatedModel,
    truth: &BTreeMap<String, String>,
    p: &InputDistribution,
) -> Result<f64> {
    Ok(fairness_report(spec, model, truth, p)?.value)
}

/// Evaluates `spec` and also reports the per-group false negative rates.
pub fn fairness_report(
    spec: &FairnessMeasureSpec,
    model: &EstimatedModel,
    truth: &BTreeMap<String, String>,
    p: &InputDistribution,
) -> Result<FairnessReport> {
    match &spec.kind {
        FairnessKind::EqOpp => {
            let partition = &spec.instructions;
            let (a, b) = distinguished_pair(partition)?;
            let mut fnr_by_group = BTreeMap::new();
            for g in [a, b] {
                fnr_by_group.insert(g.to_string(), group_fnr(model, truth, p, partition, g)?);
            }
            let value = -(fnr_by_group[a] - fnr_by_group[b]).abs();
            Ok(FairnessReport {
                measure: FairnessKind::EqOpp,
                value,
                fnr_by_group,
            })
        }
        FairnessKind::Other(name) => Err(Error::UnsupportedMeasure(name.clone())),
    }
}

fn distinguished_pair(partition: &GroupPartition) -> Result<(&str, &str)> {
    match partition.groups() {
        [a, b] => Ok((a, b)),
        gs => Err(Error::domain(format!(
            "equal opportunity compares exactly two groups, the partition distinguishes {}",
            gs.len()
        ))),
    }
}

fn check_instructions(model: &EstimatedModel, partition: &GroupPartition) -> Result<()> {
    if !model.space().contains(partition.positive_label()) {
        return Err(Error::domain(format!(
            "positive label `{}` is not in the outcome space",
            partition.positive_label()
        )));
    }
    partition.check_covers(model.predictions().keys().map(String::as_str))
}
