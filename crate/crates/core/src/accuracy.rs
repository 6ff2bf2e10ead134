//! Estimated accuracy: the input-weighted expected score of a model.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::EstimatedModel;
use crate::scoring::ScoringRule;
use crate::sum::CompensatedSum;
use crate::types::InputDistribution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub rule: ScoringRule,
    pub value: f64,
    pub n_inputs: usize,
}

/// `Σ_x P(x) · s(model(x), truth(x))`, summed over inputs in id order.
///
/// `model`, `truth` and `p` must cover the same input ids.
pub fn estimated_accuracy(
    rule: ScoringRule,
    model: &EstimatedModel,
    truth: &BTreeMap<String, String>,
    p: &InputDistribution,
) -> Result<f64> {
    check_domains(model, truth, p)?;
    let mut acc = CompensatedSum::new();
    for ((id, dist), y) in model.predictions().iter().zip(truth.values()) {
        let weight = p.weights()[id];
        acc += weight * rule.score(dist, y)?;
    }
    Ok(acc.value())
}

pub fn accuracy_report(
    rule: ScoringRule,
    model: &EstimatedModel,
    truth: &BTreeMap<String, String>,
    p: &InputDistribution,
) -> Result<AccuracyReport> {
    Ok(AccuracyReport {
        rule,
        value: estimated_accuracy(rule, model, truth, p)?,
        n_inputs: model.len(),
    })
}

pub(crate) fn check_domains(
    model: &EstimatedModel,
    truth: &BTreeMap<String, String>,
    p: &InputDistribution,
) -> Result<()> {
    let model_ids = model.predictions().keys();
    if !model_ids.clone().eq(truth.keys()) {
        return Err(Error::domain(
            "model and ground truth cover different inputs",
        ));
    }
    if !model_ids.eq(p.weights().keys()) {
        return Err(Error::domain(
            "model and input distribution cover different inputs",
        ));
    }
    Ok(())
}
