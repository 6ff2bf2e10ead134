use std::path::PathBuf;

use accfair::compas::FilterSpec;
use accfair::estimation::Estimator;
use accfair::scoring::ScoringRule;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "accfair",
    version,
    about = "Accuracy, fairness and utility aggregation for probabilistic predictors"
)]
pub struct Cli {
    /// Input data: a COMPAS CSV, a generic stream CSV, or a stream JSON file.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,

    /// Directory for written artifacts.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Drop malformed rows instead of failing.
    #[arg(long, global = true)]
    pub skip_bad_rows: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimated accuracy of the predictor under a scoring rule.
    Score(ScoreArgs),
    /// Group fairness measure.
    Fairness(FairnessArgs),
    /// Overall utility of a measure vector.
    Aggregate(AggregateArgs),
    /// Overall utility over the positive weight simplex.
    Sweep(SweepArgs),
    /// Full COMPAS audit: measures, utilities and both sweeps.
    AuditCompas(AuditArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct EstimatorArgs {
    /// Defaults to compas-decile for COMPAS data and mle otherwise.
    #[arg(long, value_parser = parse_from_str::<Estimator>)]
    pub estimator: Option<Estimator>,

    /// Outcome labels of a generic stream, in order.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GroupArgs {
    /// Column holding the group attribute (COMPAS: race; generic: group).
    #[arg(long)]
    pub group_col: Option<String>,

    /// Value of the first compared group.
    #[arg(long)]
    pub group_a: Option<String>,

    /// Value of the second compared group; everything else if omitted.
    #[arg(long)]
    pub group_b: Option<String>,

    /// Label treated as the positive class.
    #[arg(long)]
    pub positive_label: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub estimator: EstimatorArgs,

    #[arg(long, value_parser = parse_from_str::<ScoringRule>)]
    pub rule: ScoringRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FairnessMeasure {
    Eqopp,
}

#[derive(Debug, Args)]
pub struct FairnessArgs {
    #[command(flatten)]
    pub estimator: EstimatorArgs,

    #[command(flatten)]
    pub groups: GroupArgs,

    #[arg(long, value_enum, default_value_t = FairnessMeasure::Eqopp)]
    pub measure: FairnessMeasure,
}

/// Where the measure vector comes from: explicit values or `--data`.
#[derive(Debug, Args)]
pub struct VectorArgs {
    /// Measure values, in the order of --measures.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,

    #[arg(long, value_delimiter = ',', default_value = "brier,log,eqopp")]
    pub measures: Vec<String>,

    /// One utility for every measure, or one per measure.
    #[arg(long, value_delimiter = ',', default_value = "linear")]
    pub utility: Vec<String>,

    #[command(flatten)]
    pub estimator: EstimatorArgs,

    #[command(flatten)]
    pub groups: GroupArgs,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[command(flatten)]
    pub vector: VectorArgs,

    /// Weights in the order of --measures; must sum to 1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Option<Vec<f64>>,

    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,

    /// Aggregation spec as JSON; replaces --weights, --utility and --alpha.
    #[arg(long, conflicts_with_all = ["weights", "alpha"])]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub vector: VectorArgs,

    #[arg(long, default_value_t = 100)]
    pub resolution: usize,

    /// Also write a ternary SVG (three measures only).
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// none, propublica, or a comma list of charge-window, recid-flag,
    /// traffic-offense, score-text.
    #[arg(long, default_value = "none", value_parser = parse_from_str::<FilterSpec>)]
    pub filter: FilterSpec,

    #[arg(long, default_value_t = 100)]
    pub resolution: usize,

    #[arg(long)]
    pub svg: bool,
}

fn parse_from_str<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}
