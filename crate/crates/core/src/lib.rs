//! Accuracy and group-fairness evaluation of probabilistic predictors.
//!
//! A recorded [`PredictionStream`] is turned into per-input predicted
//! distributions by an estimator, scored with strictly proper scoring rules
//! ([`accuracy`]) and group-fairness measures ([`fairness`]), and the
//! resulting measure values are combined into one overall value by a
//! weighted sum of per-measure utilities ([`aggregation`]). The [`compas`]
//! module runs the whole pipeline on the ProPublica COMPAS recidivism data.

pub mod accuracy;
pub mod aggregation;
pub mod compas;
pub mod error;
pub mod estimation;
pub mod fairness;
pub mod render;
pub mod scoring;
pub mod sum;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    point_mass, uniform_input_distribution, AggregationSpec, FiniteLottery, GroupPartition,
    InputDistribution, MeasureVector, OutcomeDistribution, OutcomeSpace, PredictionRecord,
    PredictionStream, UtilitySpec,
};
