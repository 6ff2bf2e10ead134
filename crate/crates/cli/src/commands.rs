use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use accfair::accuracy::{accuracy_report, estimated_accuracy, AccuracyReport};
use accfair::aggregation::{measure_utilities, overall, simplex_sweep, SweepSummary};
use accfair::compas::{run_audit, AuditConfig, AuditReport, FilterSpec};
use accfair::estimation::EstimatedModel;
use accfair::fairness::{fairness_report, FairnessMeasureSpec, FairnessReport};
use accfair::render::ternary_svg;
use accfair::scoring::ScoringRule;
use accfair::{
    uniform_input_distribution, AggregationSpec, Error, InputDistribution, MeasureVector,
    PredictionStream, UtilitySpec,
};
use serde::Serialize;

use crate::args::{
    AggregateArgs, AuditArgs, Cli, EstimatorArgs, FairnessArgs, FairnessMeasure, Format, GroupArgs,
    ScoreArgs, SweepArgs, VectorArgs,
};
use crate::input::{DataSet, LoadRequest};
use crate::CliError;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Rendered command output for stdout.
pub struct Output(pub String);

fn json<T: Serialize>(value: &T) -> Output {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    Output(s)
}

fn csv_table(header: &[String], row: &[String]) -> Output {
    Output(format!("{}\n{}\n", header.join(","), row.join(",")))
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

fn require_data(cli: &Cli) -> Result<&Path, CliError> {
    cli.data
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --data".into()))
}

fn load(
    cli: &Cli,
    groups: &GroupArgs,
    est: &EstimatorArgs,
    filter: FilterSpec,
) -> Result<DataSet, CliError> {
    DataSet::load(
        require_data(cli)?,
        &LoadRequest {
            skip_bad_rows: cli.skip_bad_rows,
            filter,
            groups,
            labels: est.labels.as_deref(),
        },
    )
}

struct Evaluation {
    stream: PredictionStream,
    model: EstimatedModel,
    truth: BTreeMap<String, String>,
    p: InputDistribution,
}

fn evaluate(data: &DataSet, est: &EstimatorArgs) -> Result<Evaluation, CliError> {
    let estimator = est.estimator.unwrap_or_else(|| data.default_estimator());
    let stream = data.stream_for(estimator);
    let model = estimator.estimate(&stream)?;
    let truth = stream.ground_truth()?;
    let p = uniform_input_distribution(&stream)?;
    Ok(Evaluation {
        stream,
        model,
        truth,
        p,
    })
}

pub fn score(cli: &Cli, args: &ScoreArgs) -> Result<Output, CliError> {
    let data = load(
        cli,
        &GroupArgs::default(),
        &args.estimator,
        FilterSpec::none(),
    )?;
    let e = evaluate(&data, &args.estimator)?;
    let report: AccuracyReport = accuracy_report(args.rule, &e.model, &e.truth, &e.p)?;
    Ok(match cli.format {
        Format::Json => json(&report),
        Format::Csv => csv_table(
            &["rule".into(), "value".into(), "n_inputs".into()],
            &[
                report.rule.name().into(),
                fixed(report.value),
                report.n_inputs.to_string(),
            ],
        ),
    })
}

fn fairness_of(
    data: &DataSet,
    e: &Evaluation,
    groups: &GroupArgs,
) -> Result<FairnessReport, CliError> {
    let partition = data.partition(&e.stream, groups)?;
    Ok(fairness_report(
        &FairnessMeasureSpec::eq_opp(partition),
        &e.model,
        &e.truth,
        &e.p,
    )?)
}

pub fn fairness(cli: &Cli, args: &FairnessArgs) -> Result<Output, CliError> {
    let FairnessMeasure::Eqopp = args.measure;
    let data = load(cli, &args.groups, &args.estimator, FilterSpec::none())?;
    let e = evaluate(&data, &args.estimator)?;
    let report = fairness_of(&data, &e, &args.groups)?;
    Ok(match cli.format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut header = vec!["measure".to_string(), "value".to_string()];
            let mut row = vec!["eqopp".to_string(), fixed(report.value)];
            for (g, f) in &report.fnr_by_group {
                header.push(format!("fnr_{g}"));
                row.push(fixed(*f));
            }
            csv_table(&header, &row)
        }
    })
}

/// Measure vector from `--values` or computed from `--data`.
fn measure_vector(cli: &Cli, args: &VectorArgs) -> Result<MeasureVector, CliError> {
    let ids = &args.measures;
    let values = match (&args.values, &cli.data) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either --values or --data, not both".into(),
            ))
        }
        (None, None) => return Err(CliError::Usage("give --values or --data".into())),
        (Some(values), None) => {
            if values.len() != ids.len() {
                return Err(CliError::Usage(format!(
                    "{} values for {} measures",
                    values.len(),
                    ids.len()
                )));
            }
            values.clone()
        }
        (None, Some(_)) => {
            let data = load(cli, &args.groups, &args.estimator, FilterSpec::none())?;
            let e = evaluate(&data, &args.estimator)?;
            let mut out = Vec::with_capacity(ids.len());
            for id in ids {
                let value = match id.as_str() {
                    "eqopp" => fairness_of(&data, &e, &args.groups)?.value,
                    other => {
                        let rule: ScoringRule = other.parse().map_err(|_| {
                            CliError::Usage(format!(
                                "cannot compute measure `{other}` from data (expected brier, log, spherical or eqopp)"
                            ))
                        })?;
                        estimated_accuracy(rule, &e.model, &e.truth, &e.p)?
                    }
                };
                out.push(value);
            }
            out
        }
    };
    let fairness = ids.iter().filter(|id| *id == "eqopp").count();
    Ok(MeasureVector::from_pairs(
        ids.iter().cloned().zip(values),
        ids.len() - fairness,
        fairness,
    )?)
}

fn utilities(args: &VectorArgs) -> Result<BTreeMap<String, UtilitySpec>, CliError> {
    let parsed = args
        .utility
        .iter()
        .map(|u| {
            u.parse::<UtilitySpec>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let per_measure = match parsed.len() {
        1 => vec![parsed[0].clone(); args.measures.len()],
        n if n == args.measures.len() => parsed,
        n => {
            return Err(CliError::Usage(format!(
                "{n} utilities for {} measures",
                args.measures.len()
            )))
        }
    };
    Ok(args.measures.iter().cloned().zip(per_measure).collect())
}

/// Checks that typed weights sum to 1 within `1e-6`, then rescales them so
/// they do exactly.
fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>, CliError> {
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(CliError::Usage("weights must be finite".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(CliError::Usage(format!("weights sum to {sum}, expected 1")));
    }
    if sum == 1.0 {
        return Ok(weights.to_vec());
    }
    eprintln!("warning: weights sum to {sum}; rescaled to 1");
    Ok(weights.iter().map(|w| w / sum).collect())
}

#[derive(Serialize)]
struct MeasureLine {
    measure_id: String,
    value: f64,
    weight: f64,
    utility: &'static str,
    utility_value: f64,
}

#[derive(Serialize)]
struct AggregateReport {
    overall: f64,
    alpha: f64,
    measures: Vec<MeasureLine>,
}

pub fn aggregate(cli: &Cli, args: &AggregateArgs) -> Result<Output, CliError> {
    let v = measure_vector(cli, &args.vector)?;
    let spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str::<AggregationSpec>(&text).map_err(Error::from)?
        }
        None => {
            let weights = args
                .weights
                .as_deref()
                .ok_or_else(|| CliError::Usage("aggregate needs --weights or --spec".into()))?;
            let ids = &args.vector.measures;
            if weights.len() != ids.len() {
                return Err(CliError::Usage(format!(
                    "{} weights for {} measures",
                    weights.len(),
                    ids.len()
                )));
            }
            let weights = normalize_weights(weights)?;
            AggregationSpec::new(
                args.alpha,
                ids.iter().cloned().zip(weights).collect(),
                utilities(&args.vector)?,
                false,
            )?
        }
    };
    let total = overall(&spec, &v)?;
    let measures = measure_utilities(&spec, &v)?
        .into_iter()
        .map(|(id, u)| MeasureLine {
            value: v.get(&id).unwrap_or(f64::NAN),
            weight: spec.weights()[&id],
            utility: spec.utilities()[&id].name(),
            utility_value: u,
            measure_id: id,
        })
        .collect::<Vec<_>>();
    let report = AggregateReport {
        overall: total,
        alpha: spec.alpha(),
        measures,
    };
    Ok(match cli.format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut header = vec!["overall".to_string(), "alpha".to_string()];
            let mut row = vec![fixed(report.overall), fixed(report.alpha)];
            for m in &report.measures {
                header.push(format!("u_{}", m.measure_id));
                row.push(fixed(m.utility_value));
            }
            csv_table(&header, &row)
        }
    })
}

#[derive(Serialize)]
struct SweepReport {
    #[serde(flatten)]
    summary: SweepSummary,
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| {
        CliError::from(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| {
        CliError::from(Error::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

pub fn sweep(cli: &Cli, args: &SweepArgs) -> Result<Output, CliError> {
    let dim = args.vector.measures.len();
    if args.resolution < dim {
        return Err(CliError::Usage(format!(
            "--resolution must be at least the number of measures ({dim})"
        )));
    }
    if args.svg && dim != 3 {
        return Err(CliError::Usage("--svg needs exactly three measures".into()));
    }
    let v = measure_vector(cli, &args.vector)?;
    let result = simplex_sweep(&v, &utilities(&args.vector)?, args.resolution)?;
    let csv = result.to_csv_string();

    // CSV on stdout writes files only when asked; JSON always writes them.
    let out_dir = match (cli.format, &cli.out_dir) {
        (_, Some(dir)) => Some(dir.clone()),
        (Format::Json, None) => Some(PathBuf::from(".")),
        (Format::Csv, None) => None,
    };
    let mut report = SweepReport {
        summary: result.summary(),
        csv: None,
        svg: None,
    };
    if let Some(dir) = out_dir {
        ensure_dir(&dir)?;
        let path = dir.join("sweep.csv");
        write_file(&path, &csv)?;
        report.csv = Some(path);
        if args.svg {
            let path = dir.join("sweep.svg");
            write_file(&path, &ternary_svg(&result, "overall utility")?)?;
            report.svg = Some(path);
        }
    }
    Ok(match cli.format {
        Format::Json => json(&report),
        Format::Csv => Output(csv),
    })
}

pub fn audit_compas(cli: &Cli, args: &AuditArgs) -> Result<Output, CliError> {
    let data = load(
        cli,
        &GroupArgs::default(),
        &EstimatorArgs::default(),
        args.filter.clone(),
    )?;
    let DataSet::Compas(loaded) = data else {
        return Err(Error::Schema(
            "audit-compas needs the COMPAS two-year table (no decile_score column)".into(),
        )
        .into());
    };
    if let Some(dir) = &cli.out_dir {
        ensure_dir(dir)?;
    }
    let config = AuditConfig {
        resolution: args.resolution,
        out_dir: cli.out_dir.clone(),
        write_svg: args.svg,
        ..AuditConfig::default()
    };
    let report: AuditReport = run_audit(&loaded, &config)?;
    Ok(match cli.format {
        Format::Json => Output(report.to_json()),
        Format::Csv => {
            let mut out = String::from("measure,value\n");
            for (name, value) in [
                ("brier", report.brier),
                ("log", report.log),
                ("eqopp", report.eqopp),
                ("fnr_black", report.fnr_black),
                ("fnr_nonblack", report.fnr_nonblack),
            ] {
                out.push_str(&format!("{name},{}\n", fixed(value)));
            }
            Output(out)
        }
    })
}
