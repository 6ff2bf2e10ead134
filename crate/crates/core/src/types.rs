//! Domain types shared across the crate.
//!
//! Every type validates its invariants on construction (including when it is
//! decoded from JSON) and is immutable afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::compensated_sum;

/// Absolute tolerance for "sums to one" checks.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

fn is_normalized(values: impl IntoIterator<Item = f64>) -> bool {
    (compensated_sum(values) - 1.0).abs() <= NORMALIZATION_TOLERANCE
}

// ---------------------------------------------------------------------------
// Outcomes

/// Finite, ordered set of distinct outcome labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "OutcomeSpaceRepr")]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

#[derive(Deserialize)]
struct OutcomeSpaceRepr {
    labels: Vec<String>,
}

impl TryFrom<OutcomeSpaceRepr> for OutcomeSpace {
    type Error = Error;
    fn try_from(r: OutcomeSpaceRepr) -> Result<Self> {
        OutcomeSpace::new(r.labels)
    }
}

impl OutcomeSpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::domain(format!(
                "outcome space needs at least 2 labels, got {}",
                labels.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::domain(format!("duplicate outcome label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    pub(crate) fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label).ok_or_else(|| {
            Error::domain(format!(
                "label `{label}` is not in the outcome space {:?}",
                self.labels
            ))
        })
    }
}

/// Probability distribution over a finite [`OutcomeSpace`].
///
/// `probs[i]` is the probability of `space.labels()[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OutcomeDistributionRepr")]
pub struct OutcomeDistribution {
    space: OutcomeSpace,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct OutcomeDistributionRepr {
    space: OutcomeSpace,
    probs: Vec<f64>,
}

impl TryFrom<OutcomeDistributionRepr> for OutcomeDistribution {
    type Error = Error;
    fn try_from(r: OutcomeDistributionRepr) -> Result<Self> {
        OutcomeDistribution::new(r.space, r.probs)
    }
}

impl OutcomeDistribution {
    pub fn new(space: OutcomeSpace, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.len() {
            return Err(Error::domain(format!(
                "{} probabilities for {} outcomes",
                probs.len(),
                space.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        if !is_normalized(probs.iter().copied()) {
            return Err(Error::domain(format!(
                "probabilities sum to {}, not 1",
                compensated_sum(probs.iter().copied())
            )));
        }
        Ok(Self { space, probs })
    }

    /// Builds a distribution from `(label, probability)` pairs; unlisted labels get 0.
    pub fn from_pairs<'a>(
        space: OutcomeSpace,
        pairs: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self> {
        let mut probs = vec![0.0; space.len()];
        for (label, p) in pairs {
            probs[space.require(label)?] = p;
        }
        Self::new(space, probs)
    }

    pub fn uniform(space: OutcomeSpace) -> Self {
        let n = space.len();
        Self {
            probs: vec![1.0 / n as f64; n],
            space,
        }
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: &str) -> Result<f64> {
        Ok(self.probs[self.space.require(label)?])
    }
}

/// Distribution that puts all mass on `label`.
pub fn point_mass(space: &OutcomeSpace, label: &str) -> Result<OutcomeDistribution> {
    let idx = space.require(label)?;
    let mut probs = vec![0.0; space.len()];
    probs[idx] = 1.0;
    Ok(OutcomeDistribution {
        space: space.clone(),
        probs,
    })
}

// ---------------------------------------------------------------------------
// Streams

/// One observed prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub input_id: String,
    #[serde(default)]
    pub sampled_output: Option<String>,
    #[serde(default)]
    pub raw_score: Option<f64>,
    pub ground_truth: String,
    #[serde(default)]
    pub group: Option<String>,
}

impl PredictionRecord {
    pub fn new(input_id: impl Into<String>, ground_truth: impl Into<String>) -> Self {
        Self {
            input_id: input_id.into(),
            sampled_output: None,
            raw_score: None,
            ground_truth: ground_truth.into(),
            group: None,
        }
    }

    pub fn with_output(mut self, output: impl Into<String>) -> Self {
        self.sampled_output = Some(output.into());
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.raw_score = Some(score);
        self
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }
}

/// Non-empty sequence of prediction records over one outcome space.
///
/// Input ids may repeat: the same input can be observed several times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PredictionStreamRepr")]
pub struct PredictionStream {
    space: OutcomeSpace,
    records: Vec<PredictionRecord>,
}

#[derive(Deserialize)]
struct PredictionStreamRepr {
    space: OutcomeSpace,
    records: Vec<PredictionRecord>,
}

impl TryFrom<PredictionStreamRepr> for PredictionStream {
    type Error = Error;
    fn try_from(r: PredictionStreamRepr) -> Result<Self> {
        PredictionStream::new(r.space, r.records)
    }
}

impl PredictionStream {
    pub fn new(space: OutcomeSpace, records: Vec<PredictionRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::domain("prediction stream is empty"));
        }
        for (i, r) in records.iter().enumerate() {
            if !space.contains(&r.ground_truth) {
                return Err(Error::domain(format!(
                    "record {i} (`{}`): ground truth `{}` is not in the outcome space",
                    r.input_id, r.ground_truth
                )));
            }
            if let Some(out) = &r.sampled_output {
                if !space.contains(out) {
                    return Err(Error::domain(format!(
                        "record {i} (`{}`): sampled output `{out}` is not in the outcome space",
                        r.input_id
                    )));
                }
            }
        }
        Ok(Self { space, records })
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn distinct_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.input_id.as_str()).collect()
    }

    pub fn has_duplicate_ids(&self) -> bool {
        self.distinct_ids().len() != self.records.len()
    }

    /// Ground truth per distinct input id.
    ///
    /// Fails if one id is recorded with two different truths.
    pub fn ground_truth(&self) -> Result<BTreeMap<String, String>> {
        let mut truth: BTreeMap<String, String> = BTreeMap::new();
        for r in &self.records {
            match truth.get(&r.input_id) {
                Some(t) if *t != r.ground_truth => {
                    return Err(Error::domain(format!(
                        "input `{}` has conflicting ground truths `{t}` and `{}`",
                        r.input_id, r.ground_truth
                    )))
                }
                Some(_) => {}
                None => {
                    truth.insert(r.input_id.clone(), r.ground_truth.clone());
                }
            }
        }
        Ok(truth)
    }

    /// Copy of the stream where every record is its own evaluation unit.
    ///
    /// Records whose id occurs more than once are renamed to `<id>#<index>`,
    /// `index` being the record's 0-based position. Unique ids are kept.
    pub fn with_unique_ids(&self) -> PredictionStream {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.input_id.as_str()).or_default() += 1;
        }
        let records = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut r = r.clone();
                if counts[r.input_id.as_str()] > 1 {
                    r.input_id = format!("{}#{i}", r.input_id);
                }
                r
            })
            .collect();
        PredictionStream {
            space: self.space.clone(),
            records,
        }
    }
}

// ---------------------------------------------------------------------------
// Input weighting

/// Probability distribution over distinct input ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InputDistributionRepr")]
pub struct InputDistribution {
    weights: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
struct InputDistributionRepr {
    weights: BTreeMap<String, f64>,
}

impl TryFrom<InputDistributionRepr> for InputDistribution {
    type Error = Error;
    fn try_from(r: InputDistributionRepr) -> Result<Self> {
        InputDistribution::new(r.weights)
    }
}

impl InputDistribution {
    pub fn new(weights: BTreeMap<String, f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("input distribution has no inputs"));
        }
        if let Some((id, w)) = weights.iter().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::domain(format!(
                "input `{id}` has invalid weight {w}"
            )));
        }
        if !is_normalized(weights.values().copied()) {
            return Err(Error::domain(format!(
                "input weights sum to {}, not 1",
                compensated_sum(weights.values().copied())
            )));
        }
        Ok(Self { weights })
    }

    /// Equal weight on each id; duplicates are collapsed.
    pub fn uniform_over<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let ids: BTreeSet<String> = ids.into_iter().map(Into::into).collect();
        if ids.is_empty() {
            return Err(Error::domain(
                "cannot build a uniform distribution over no inputs",
            ));
        }
        let w = 1.0 / ids.len() as f64;
        Ok(Self {
            weights: ids.into_iter().map(|id| (id, w)).collect(),
        })
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn weight(&self, id: &str) -> Option<f64> {
        self.weights.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Uniform weighting over the stream's distinct input ids.
pub fn uniform_input_distribution(stream: &PredictionStream) -> Result<InputDistribution> {
    InputDistribution::uniform_over(stream.distinct_ids())
}

// ---------------------------------------------------------------------------
// Groups

/// Assignment of inputs to groups, plus the label counted as the positive class.
///
/// `groups` lists the distinguished tags a measure compares; `group_of` may
/// use further tags for inputs outside every compared group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroupPartitionRepr")]
pub struct GroupPartition {
    group_of: BTreeMap<String, String>,
    groups: Vec<String>,
    positive_label: String,
}

#[derive(Deserialize)]
struct GroupPartitionRepr {
    group_of: BTreeMap<String, String>,
    groups: Vec<String>,
    positive_label: String,
}

impl TryFrom<GroupPartitionRepr> for GroupPartition {
    type Error = Error;
    fn try_from(r: GroupPartitionRepr) -> Result<Self> {
        GroupPartition::new(r.group_of, r.groups, r.positive_label)
    }
}

impl GroupPartition {
    pub fn new(
        group_of: BTreeMap<String, String>,
        groups: Vec<String>,
        positive_label: impl Into<String>,
    ) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::domain(format!(
                "a partition needs at least two distinguished groups, got {}",
                groups.len()
            )));
        }
        let distinct: BTreeSet<&String> = groups.iter().collect();
        if distinct.len() != groups.len() {
            return Err(Error::domain("distinguished group tags repeat"));
        }
        for g in &groups {
            if !group_of.values().any(|v| v == g) {
                return Err(Error::domain(format!("group `{g}` has no members")));
            }
        }
        Ok(Self {
            group_of,
            groups,
            positive_label: positive_label.into(),
        })
    }

    /// Partition read off the records' `group` tags.
    pub fn from_stream(
        stream: &PredictionStream,
        groups: Vec<String>,
        positive_label: impl Into<String>,
    ) -> Result<Self> {
        let positive_label = positive_label.into();
        stream.space().require(&positive_label)?;
        let mut group_of: BTreeMap<String, String> = BTreeMap::new();
        for r in stream.records() {
            let g = r.group.as_ref().ok_or_else(|| {
                Error::domain(format!("record `{}` has no group tag", r.input_id))
            })?;
            if let Some(prev) = group_of.insert(r.input_id.clone(), g.clone()) {
                if prev != *g {
                    return Err(Error::domain(format!(
                        "input `{}` is tagged with both `{prev}` and `{g}`",
                        r.input_id
                    )));
                }
            }
        }
        Self::new(group_of, groups, positive_label)
    }

    pub fn group_of(&self) -> &BTreeMap<String, String> {
        &self.group_of
    }

    pub fn group(&self, id: &str) -> Option<&str> {
        self.group_of.get(id).map(String::as_str)
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn positive_label(&self) -> &str {
        &self.positive_label
    }

    pub fn members<'a>(&'a self, group: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.group_of
            .iter()
            .filter(move |(_, g)| g.as_str() == group)
            .map(|(id, _)| id.as_str())
    }

    pub fn group_sizes(&self) -> BTreeMap<String, usize> {
        let mut sizes = BTreeMap::new();
        for g in self.group_of.values() {
            *sizes.entry(g.clone()).or_default() += 1;
        }
        sizes
    }

    /// Checks that every id in `ids` is assigned to a group.
    pub fn check_covers<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for id in ids {
            if !self.group_of.contains_key(id) {
                return Err(Error::domain(format!(
                    "input `{id}` is not assigned to a group"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Measures, utilities, aggregation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEntry {
    pub measure_id: String,
    pub value: f64,
}

/// Values of `accuracy_count` accuracy measures followed by
/// `fairness_count` fairness measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureVectorRepr")]
pub struct MeasureVector {
    entries: Vec<MeasureEntry>,
    accuracy_count: usize,
    fairness_count: usize,
}

#[derive(Deserialize)]
struct MeasureVectorRepr {
    entries: Vec<MeasureEntry>,
    accuracy_count: usize,
    fairness_count: usize,
}

impl TryFrom<MeasureVectorRepr> for MeasureVector {
    type Error = Error;
    fn try_from(r: MeasureVectorRepr) -> Result<Self> {
        MeasureVector::new(r.entries, r.accuracy_count, r.fairness_count)
    }
}

impl MeasureVector {
    pub fn new(
        entries: Vec<MeasureEntry>,
        accuracy_count: usize,
        fairness_count: usize,
    ) -> Result<Self> {
        if entries.len() != accuracy_count + fairness_count {
            return Err(Error::domain(format!(
                "{} entries but {accuracy_count} accuracy + {fairness_count} fairness measures declared",
                entries.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.measure_id.as_str()) {
                return Err(Error::domain(format!("measure `{}` repeats", e.measure_id)));
            }
        }
        Ok(Self {
            entries,
            accuracy_count,
            fairness_count,
        })
    }

    /// Convenience constructor from `(id, value)` pairs.
    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, f64)>,
        accuracy_count: usize,
        fairness_count: usize,
    ) -> Result<Self> {
        let entries = pairs
            .into_iter()
            .map(|(id, value)| MeasureEntry {
                measure_id: id.into(),
                value,
            })
            .collect();
        Self::new(entries, accuracy_count, fairness_count)
    }

    pub fn entries(&self) -> &[MeasureEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.measure_id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.measure_id == id)
            .map(|e| e.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn accuracy_count(&self) -> usize {
        self.accuracy_count
    }

    pub fn fairness_count(&self) -> usize {
        self.fairness_count
    }

    pub(crate) fn same_schema(&self, other: &MeasureVector) -> bool {
        self.accuracy_count == other.accuracy_count
            && self.fairness_count == other.fairness_count
            && self.ids().eq(other.ids())
    }
}

/// Utility function over a single measure value.
///
/// All kinds are non-decreasing on the negative reals, where every shipped
/// measure lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UtilitySpecRepr", tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    /// `u(r) = r`
    Linear,
    /// `u(r) = 1 / |r|`
    ReciprocalAbs,
    /// `u(r) = ln(1 / |r|)`
    LogReciprocalAbs,
    /// Linear interpolation through `(measure value, utility)` knots, held
    /// constant beyond the first and last knot.
    PiecewiseTable { points: Vec<(f64, f64)> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum UtilitySpecRepr {
    Linear,
    ReciprocalAbs,
    LogReciprocalAbs,
    PiecewiseTable { points: Vec<(f64, f64)> },
}

impl TryFrom<UtilitySpecRepr> for UtilitySpec {
    type Error = Error;
    fn try_from(r: UtilitySpecRepr) -> Result<Self> {
        Ok(match r {
            UtilitySpecRepr::Linear => UtilitySpec::Linear,
            UtilitySpecRepr::ReciprocalAbs => UtilitySpec::ReciprocalAbs,
            UtilitySpecRepr::LogReciprocalAbs => UtilitySpec::LogReciprocalAbs,
            UtilitySpecRepr::PiecewiseTable { points } => UtilitySpec::piecewise(points)?,
        })
    }
}

impl UtilitySpec {
    /// Validated piecewise-linear table: at least two knots, strictly
    /// increasing in the measure value, non-decreasing in utility.
    pub fn piecewise(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("a utility table needs at least two knots"));
        }
        if points.iter().any(|(x, u)| !x.is_finite() || !u.is_finite()) {
            return Err(Error::domain("utility table knots must be finite"));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::domain(
                    "utility table knots must strictly increase in value",
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::domain("utility table must be non-decreasing"));
            }
        }
        Ok(UtilitySpec::PiecewiseTable { points })
    }

    pub fn name(&self) -> &'static str {
        match self {
            UtilitySpec::Linear => "linear",
            UtilitySpec::ReciprocalAbs => "reciprocal-abs",
            UtilitySpec::LogReciprocalAbs => "log-reciprocal-abs",
            UtilitySpec::PiecewiseTable { .. } => "piecewise-table",
        }
    }

    /// True for kinds that have no value at a measure of exactly zero.
    pub fn is_reciprocal(&self) -> bool {
        matches!(
            self,
            UtilitySpec::ReciprocalAbs | UtilitySpec::LogReciprocalAbs
        )
    }
}

impl fmt::Display for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UtilitySpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(UtilitySpec::Linear),
            "reciprocal-abs" => Ok(UtilitySpec::ReciprocalAbs),
            "log-reciprocal-abs" => Ok(UtilitySpec::LogReciprocalAbs),
            other => Err(Error::domain(format!(
                "unknown utility `{other}` (expected linear, reciprocal-abs or log-reciprocal-abs)"
            ))),
        }
    }
}

/// Affine aggregate `alpha + Σ weight[m] · utility[m](v[m])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AggregationSpecRepr")]
pub struct AggregationSpec {
    alpha: f64,
    weights: BTreeMap<String, f64>,
    utilities: BTreeMap<String, UtilitySpec>,
    #[serde(default)]
    simplex: bool,
}

#[derive(Deserialize)]
struct AggregationSpecRepr {
    #[serde(default)]
    alpha: f64,
    weights: BTreeMap<String, f64>,
    utilities: BTreeMap<String, UtilitySpec>,
    #[serde(default)]
    simplex: bool,
}

impl TryFrom<AggregationSpecRepr> for AggregationSpec {
    type Error = Error;
    fn try_from(r: AggregationSpecRepr) -> Result<Self> {
        AggregationSpec::new(r.alpha, r.weights, r.utilities, r.simplex)
    }
}

impl AggregationSpec {
    /// With `simplex` set, weights must be strictly positive and sum to one.
    pub fn new(
        alpha: f64,
        weights: BTreeMap<String, f64>,
        utilities: BTreeMap<String, UtilitySpec>,
        simplex: bool,
    ) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::domain("alpha must be finite"));
        }
        if !weights.keys().eq(utilities.keys()) {
            return Err(Error::domain(
                "weights and utilities must name the same measures",
            ));
        }
        if let Some((id, w)) = weights.iter().find(|(_, w)| !w.is_finite()) {
            return Err(Error::domain(format!("weight for `{id}` is {w}")));
        }
        if simplex {
            if let Some((id, w)) = weights.iter().find(|(_, w)| **w <= 0.0) {
                return Err(Error::domain(format!(
                    "simplex weights must be positive; `{id}` has {w}"
                )));
            }
            if !is_normalized(weights.values().copied()) {
                return Err(Error::domain("simplex weights must sum to 1"));
            }
        }
        Ok(Self {
            alpha,
            weights,
            utilities,
            simplex,
        })
    }

    /// Zero `alpha`, weights on the simplex.
    pub fn simplex<S: Into<String>>(
        weights: impl IntoIterator<Item = (S, f64, UtilitySpec)>,
    ) -> Result<Self> {
        let mut w = BTreeMap::new();
        let mut u = BTreeMap::new();
        for (id, weight, utility) in weights {
            let id = id.into();
            w.insert(id.clone(), weight);
            u.insert(id, utility);
        }
        Self::new(0.0, w, u, true)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn utilities(&self) -> &BTreeMap<String, UtilitySpec> {
        &self.utilities
    }

    pub fn is_simplex(&self) -> bool {
        self.simplex
    }

    pub fn weight(&self, id: &str) -> Option<f64> {
        self.weights.get(id).copied()
    }

    pub fn utility(&self, id: &str) -> Option<&UtilitySpec> {
        self.utilities.get(id)
    }

    /// Checks that the spec names exactly the measures of `v`, and that no
    /// reciprocal utility is applied to a measure sitting at zero.
    pub fn check_covers(&self, v: &MeasureVector) -> Result<()> {
        let ids: BTreeSet<&str> = v.ids().collect();
        let ours: BTreeSet<&str> = self.weights.keys().map(String::as_str).collect();
        if ids != ours {
            return Err(Error::domain(format!(
                "aggregation covers {ours:?} but the measure vector has {ids:?}"
            )));
        }
        for e in v.entries() {
            let u = &self.utilities[&e.measure_id];
            if u.is_reciprocal() && e.value == 0.0 {
                return Err(Error::UtilityUndefinedAtOptimum {
                    kind: u.name(),
                    value: e.value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotteryOutcome {
    pub vector: MeasureVector,
    pub probability: f64,
}

/// Probability distribution with finite support over measure vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteLotteryRepr")]
pub struct FiniteLottery {
    support: Vec<LotteryOutcome>,
}

#[derive(Deserialize)]
struct FiniteLotteryRepr {
    support: Vec<LotteryOutcome>,
}

impl TryFrom<FiniteLotteryRepr> for FiniteLottery {
    type Error = Error;
    fn try_from(r: FiniteLotteryRepr) -> Result<Self> {
        FiniteLottery::new(r.support)
    }
}

impl FiniteLottery {
    pub fn new(support: Vec<LotteryOutcome>) -> Result<Self> {
        let first = support
            .first()
            .ok_or_else(|| Error::domain("lottery has empty support"))?;
        if let Some(o) = support
            .iter()
            .find(|o| !(o.probability >= 0.0 && o.probability.is_finite()))
        {
            return Err(Error::domain(format!(
                "lottery probability {} is invalid",
                o.probability
            )));
        }
        if !is_normalized(support.iter().map(|o| o.probability)) {
            return Err(Error::domain("lottery probabilities must sum to 1"));
        }
        if !support.iter().all(|o| o.vector.same_schema(&first.vector)) {
            return Err(Error::domain(
                "lottery outcomes use different measure schemas",
            ));
        }
        Ok(Self { support })
    }

    pub fn point_mass(vector: MeasureVector) -> Self {
        Self {
            support: vec![LotteryOutcome {
                vector,
                probability: 1.0,
            }],
        }
    }

    /// Builds from `(vector, probability)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (MeasureVector, f64)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(vector, probability)| LotteryOutcome {
                    vector,
                    probability,
                })
                .collect(),
        )
    }

    pub fn support(&self) -> &[LotteryOutcome] {
        &self.support
    }

    /// Measure schema shared by all outcomes.
    pub fn schema(&self) -> &MeasureVector {
        &self.support[0].vector
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary() -> OutcomeSpace {
        OutcomeSpace::new(["0", "1"]).unwrap()
    }

    #[test]
    fn outcome_space_rejects_duplicates_and_singletons() {
        assert!(OutcomeSpace::new(["a"]).is_err());
        assert!(OutcomeSpace::new(["a", "a"]).is_err());
        assert!(OutcomeSpace::new(["a", "b", "c"]).is_ok());
    }

    #[test]
    fn point_mass_examples() {
        let d = point_mass(&binary(), "1").unwrap();
        assert_eq!(d.probs(), &[0.0, 1.0]);

        let abc = OutcomeSpace::new(["a", "b", "c"]).unwrap();
        let d = point_mass(&abc, "b").unwrap();
        assert_eq!(d.probs(), &[0.0, 1.0, 0.0]);

        assert!(matches!(point_mass(&binary(), "2"), Err(Error::Domain(_))));
    }

    #[test]
    fn distribution_rejects_bad_vectors() {
        assert!(OutcomeDistribution::new(binary(), vec![0.5]).is_err());
        assert!(OutcomeDistribution::new(binary(), vec![1.2, -0.2]).is_err());
        assert!(OutcomeDistribution::new(binary(), vec![0.5, 0.6]).is_err());
        assert!(OutcomeDistribution::new(binary(), vec![f64::NAN, 1.0]).is_err());
        assert!(OutcomeDistribution::new(binary(), vec![0.3, 0.7 + 5e-10]).is_ok());
    }

    #[test]
    fn from_pairs_fills_missing_with_zero() {
        let d = OutcomeDistribution::from_pairs(binary(), [("1", 1.0)]).unwrap();
        assert_eq!(d.prob("0").unwrap(), 0.0);
        assert!(d.prob("x").is_err());
    }

    fn stream(ids: &[&str]) -> PredictionStream {
        let records = ids
            .iter()
            .map(|id| PredictionRecord::new(*id, "0").with_output("1"))
            .collect();
        PredictionStream::new(binary(), records).unwrap()
    }

    #[test]
    fn uniform_input_distribution_examples() {
        let p = uniform_input_distribution(&stream(&["a", "b", "c", "d"])).unwrap();
        assert!(p.weights().values().all(|w| *w == 0.25));

        let p = uniform_input_distribution(&stream(&["a"])).unwrap();
        assert_eq!(p.weight("a"), Some(1.0));

        let ids: Vec<String> = (0..7212).map(|i| i.to_string()).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let p = uniform_input_distribution(&stream(&refs)).unwrap();
        assert_eq!(p.len(), 7212);
        assert!(p.weights().values().all(|w| *w == 1.0 / 7212.0));
    }

    #[test]
    fn uniform_collapses_repeated_ids() {
        let p = uniform_input_distribution(&stream(&["a", "a", "b"])).unwrap();
        assert_eq!(p.weight("a"), Some(0.5));
    }

    #[test]
    fn empty_stream_is_rejected() {
        assert!(PredictionStream::new(binary(), vec![]).is_err());
        assert!(InputDistribution::uniform_over(Vec::<String>::new()).is_err());
    }

    #[test]
    fn stream_rejects_foreign_labels() {
        let r = PredictionRecord::new("a", "2");
        assert!(PredictionStream::new(binary(), vec![r]).is_err());
        let r = PredictionRecord::new("a", "0").with_output("x");
        assert!(PredictionStream::new(binary(), vec![r]).is_err());
    }

    #[test]
    fn unique_ids_rename_only_repeats() {
        let s = stream(&["a", "b", "a"]).with_unique_ids();
        let ids: Vec<&str> = s.records().iter().map(|r| r.input_id.as_str()).collect();
        assert_eq!(ids, ["a#0", "b", "a#2"]);
        assert!(!s.has_duplicate_ids());
    }

    #[test]
    fn conflicting_truth_is_an_error() {
        let records = vec![
            PredictionRecord::new("a", "0"),
            PredictionRecord::new("a", "1"),
        ];
        let s = PredictionStream::new(binary(), records).unwrap();
        assert!(s.ground_truth().is_err());
    }

    #[test]
    fn partition_needs_nonempty_distinguished_groups() {
        let group_of: BTreeMap<String, String> =
            [("a".into(), "x".into()), ("b".into(), "x".into())].into();
        assert!(GroupPartition::new(group_of.clone(), vec!["x".into(), "y".into()], "1").is_err());
        assert!(GroupPartition::new(group_of, vec!["x".into()], "1").is_err());
    }

    #[test]
    fn aggregation_spec_validation() {
        let u = UtilitySpec::Linear;
        assert!(AggregationSpec::simplex([("a", 0.5, u.clone()), ("b", 0.5, u.clone())]).is_ok());
        assert!(AggregationSpec::simplex([("a", 0.0, u.clone()), ("b", 1.0, u.clone())]).is_err());
        assert!(AggregationSpec::simplex([("a", 0.5, u.clone()), ("b", 0.6, u.clone())]).is_err());

        let w: BTreeMap<String, f64> = [("a".into(), 1.0)].into();
        let us: BTreeMap<String, UtilitySpec> = [("b".into(), u)].into();
        assert!(AggregationSpec::new(0.0, w, us, false).is_err());
    }

    #[test]
    fn reciprocal_utility_rejected_at_zero_measure() {
        let spec = AggregationSpec::simplex([("a", 1.0, UtilitySpec::ReciprocalAbs)]).unwrap();
        let v = MeasureVector::from_pairs([("a", 0.0)], 1, 0).unwrap();
        assert!(matches!(
            spec.check_covers(&v),
            Err(Error::UtilityUndefinedAtOptimum { .. })
        ));
    }

    #[test]
    fn measure_vector_validation() {
        assert!(MeasureVector::from_pairs([("a", 1.0), ("a", 2.0)], 2, 0).is_err());
        assert!(MeasureVector::from_pairs([("a", 1.0)], 1, 1).is_err());
    }

    #[test]
    fn piecewise_table_validation() {
        assert!(UtilitySpec::piecewise(vec![(0.0, 0.0)]).is_err());
        assert!(UtilitySpec::piecewise(vec![(0.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(UtilitySpec::piecewise(vec![(1.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(UtilitySpec::piecewise(vec![(-1.0, 0.0), (0.0, 1.0)]).is_ok());
    }

    #[test]
    fn json_encodings_use_listed_field_names() {
        let d = point_mass(&binary(), "1").unwrap();
        assert_eq!(
            serde_json::to_string(&d).unwrap(),
            r#"{"space":{"labels":["0","1"]},"probs":[0.0,1.0]}"#
        );
        let u = serde_json::to_string(&UtilitySpec::ReciprocalAbs).unwrap();
        assert_eq!(u, r#"{"kind":"reciprocal_abs"}"#);
        let bad = r#"{"space":{"labels":["0","1"]},"probs":[0.5,0.6]}"#;
        assert!(serde_json::from_str::<OutcomeDistribution>(bad).is_err());
        let bad = r#"{"kind":"piecewise_table","points":[[0.0,1.0],[1.0,0.0]]}"#;
        assert!(serde_json::from_str::<UtilitySpec>(bad).is_err());
    }

    fn arb_distribution(max_len: usize) -> impl Strategy<Value = (OutcomeSpace, Vec<f64>)> {
        proptest::collection::vec(0.0f64..1.0, 2..=max_len).prop_map(|raw| {
            let total: f64 = raw.iter().sum::<f64>().max(1e-12);
            let labels: Vec<String> = (0..raw.len()).map(|i| format!("y{i}")).collect();
            (
                OutcomeSpace::new(labels).unwrap(),
                raw.iter().map(|r| r / total).collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn construction_accepts_exactly_the_valid_vectors(
            raw in proptest::collection::vec(-0.5f64..1.5, 2..6)
        ) {
            let labels: Vec<String> = (0..raw.len()).map(|i| format!("y{i}")).collect();
            let space = OutcomeSpace::new(labels).unwrap();
            let valid = raw.iter().all(|p| (0.0..=1.0).contains(p))
                && (raw.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
            prop_assert_eq!(OutcomeDistribution::new(space, raw).is_ok(), valid);
        }

        #[test]
        fn normalized_random_vectors_are_accepted((space, probs) in arb_distribution(6)) {
            if probs.iter().sum::<f64>() > 0.5 {
                prop_assert!(OutcomeDistribution::new(space, probs).is_ok());
            }
        }

        #[test]
        fn uniform_is_always_a_valid_input_distribution(
            ids in proptest::collection::vec("[a-z]{1,3}", 1..300)
        ) {
            let records = ids.iter().map(|id| PredictionRecord::new(id.clone(), "0")).collect();
            let s = PredictionStream::new(binary(), records).unwrap();
            let p = uniform_input_distribution(&s).unwrap();
            prop_assert!(InputDistribution::new(p.weights().clone()).is_ok());
            let distinct: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
            prop_assert!(p.weights().keys().map(String::as_str).eq(distinct.into_iter()));
        }

        #[test]
        fn distribution_json_round_trip_is_bit_exact((space, probs) in arb_distribution(5)) {
            if let Ok(d) = OutcomeDistribution::new(space, probs) {
                let json = serde_json::to_string(&d).unwrap();
                let back: OutcomeDistribution = serde_json::from_str(&json).unwrap();
                prop_assert!(back.probs().iter().zip(d.probs()).all(|(a, b)| a.to_bits() == b.to_bits()));
                prop_assert_eq!(back, d);
            }
        }

        #[test]
        fn stream_json_round_trip(
            rows in proptest::collection::vec(("[a-z]{1,4}", any::<bool>(), proptest::option::of(-1e6f64..1e6), any::<bool>()), 1..20)
        ) {
            let records: Vec<PredictionRecord> = rows
                .into_iter()
                .map(|(id, t, score, g)| PredictionRecord {
                    input_id: id,
                    sampled_output: Some(if t { "1" } else { "0" }.into()),
                    raw_score: score,
                    ground_truth: if t { "0" } else { "1" }.into(),
                    group: g.then(|| "g".to_string()),
                })
                .collect();
            let s = PredictionStream::new(binary(), records).unwrap();
            let back: PredictionStream = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
