//! Reads the `--data` file into a prediction stream.
//!
//! Three layouts are accepted: the COMPAS two-year table (recognised by its
//! `decile_score` column), a generic stream CSV with one record per row, and
//! a stream JSON document `{"space": {...}, "records": [...]}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use accfair::compas::{load_compas_csv, FilterSpec, Grouping, LoadOptions, LoadedCompas};
use accfair::error::RowError;
use accfair::estimation::Estimator;
use accfair::{Error, GroupPartition, OutcomeSpace, PredictionRecord, PredictionStream};

use crate::args::GroupArgs;
use crate::CliError;

const GENERIC_GROUP_COLUMN: &str = "group";

pub enum DataSet {
    Compas(Box<LoadedCompas>),
    /// Records carry their raw group attribute, if any.
    Stream(PredictionStream),
}

pub struct LoadRequest<'a> {
    pub skip_bad_rows: bool,
    pub filter: FilterSpec,
    pub groups: &'a GroupArgs,
    pub labels: Option<&'a [String]>,
}

impl DataSet {
    pub fn load(path: &Path, req: &LoadRequest<'_>) -> Result<Self, CliError> {
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            let file = open(path)?;
            let stream: PredictionStream =
                serde_json::from_reader(std::io::BufReader::new(file)).map_err(Error::from)?;
            return Ok(DataSet::Stream(stream));
        }
        let headers = csv_headers(path)?;
        if headers.iter().any(|h| h == "decile_score") {
            let grouping = compas_grouping(req.groups)?;
            let options = LoadOptions {
                filter: req.filter.clone(),
                grouping,
                skip_bad_rows: req.skip_bad_rows,
            };
            return Ok(DataSet::Compas(Box::new(load_compas_csv(path, &options)?)));
        }
        let column = req
            .groups
            .group_col
            .as_deref()
            .unwrap_or(GENERIC_GROUP_COLUMN);
        Ok(DataSet::Stream(load_generic_csv(
            path,
            column,
            req.labels,
            req.skip_bad_rows,
        )?))
    }

    pub fn stream(&self) -> &PredictionStream {
        match self {
            DataSet::Compas(c) => &c.stream,
            DataSet::Stream(s) => s,
        }
    }

    pub fn default_estimator(&self) -> Estimator {
        match self {
            DataSet::Compas(_) => Estimator::CompasDecile,
            DataSet::Stream(_) => Estimator::EmpiricalMle,
        }
    }

    /// The stream an estimator should be evaluated on: the decile estimator
    /// treats repeated ids as separate units.
    pub fn stream_for(&self, estimator: Estimator) -> PredictionStream {
        let s = self.stream();
        if estimator == Estimator::CompasDecile && s.has_duplicate_ids() {
            s.with_unique_ids()
        } else {
            s.clone()
        }
    }

    /// Partition of `stream` (as returned by [`DataSet::stream_for`]).
    pub fn partition(
        &self,
        stream: &PredictionStream,
        groups: &GroupArgs,
    ) -> Result<GroupPartition, CliError> {
        match self {
            DataSet::Compas(c) => match &groups.positive_label {
                None => Ok(c.partition.clone()),
                Some(label) => Ok(GroupPartition::new(
                    c.partition.group_of().clone(),
                    c.partition.groups().to_vec(),
                    label.clone(),
                )?),
            },
            DataSet::Stream(_) => generic_partition(stream, groups),
        }
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
        .map_err(CliError::from)
}

fn csv_headers(path: &Path) -> Result<Vec<String>, CliError> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let headers = reader.headers().map_err(Error::from)?;
    Ok(headers.iter().map(str::to_string).collect())
}

fn compas_grouping(groups: &GroupArgs) -> Result<Grouping, CliError> {
    match (&groups.group_a, &groups.group_col) {
        (None, None) if groups.group_b.is_none() => Ok(Grouping::default()),
        (None, _) => Err(CliError::Usage(
            "--group-col and --group-b need --group-a".into(),
        )),
        (Some(a), col) => Ok(Grouping::by_value(
            col.as_deref().unwrap_or("race"),
            a,
            groups.group_b.as_deref(),
        )),
    }
}

fn generic_partition(
    stream: &PredictionStream,
    groups: &GroupArgs,
) -> Result<GroupPartition, CliError> {
    let a = groups
        .group_a
        .as_deref()
        .ok_or_else(|| CliError::Usage("fairness on a generic stream needs --group-a".into()))?;
    let grouping = Grouping::by_value(GENERIC_GROUP_COLUMN, a, groups.group_b.as_deref());
    let mut group_of = BTreeMap::new();
    for r in stream.records() {
        let raw = r
            .group
            .as_deref()
            .ok_or_else(|| Error::Domain(format!("record `{}` has no group value", r.input_id)))?;
        let tag = grouping.tag(raw).to_string();
        if let Some(prev) = group_of.insert(r.input_id.clone(), tag.clone()) {
            if prev != tag {
                return Err(Error::Domain(format!(
                    "input `{}` belongs to both `{prev}` and `{tag}`",
                    r.input_id
                ))
                .into());
            }
        }
    }
    let positive = groups
        .positive_label
        .clone()
        .unwrap_or_else(|| stream.space().labels()[0].clone());
    Ok(GroupPartition::new(
        group_of,
        vec![grouping.member_tag.clone(), grouping.comparison_tag.clone()],
        positive,
    )?)
}

/// Columns: `input_id`, `ground_truth`, optional `sampled_output`,
/// `raw_score` and a group column.
fn load_generic_csv(
    path: &Path,
    group_column: &str,
    labels: Option<&[String]>,
    skip_bad_rows: bool,
) -> Result<PredictionStream, CliError> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let headers = reader.headers().map_err(Error::from)?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(truth_col)) = (col("input_id"), col("ground_truth")) else {
        return Err(Error::Schema(
            "stream CSV needs `input_id` and `ground_truth` columns (or `decile_score` for COMPAS data)".into(),
        )
        .into());
    };
    let output_col = col("sampled_output");
    let score_col = col("raw_score");
    let group_col = col(group_column);

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(Error::from)?;
        let field = |c: Option<usize>| {
            c.and_then(|c| row.get(c))
                .map(str::trim)
                .filter(|v| !v.is_empty())
        };
        let (Some(id), Some(truth)) = (field(Some(id_col)), field(Some(truth_col))) else {
            errors.push(RowError {
                row: i + 1,
                message: "missing input_id or ground_truth".into(),
            });
            continue;
        };
        let mut record = PredictionRecord::new(id, truth);
        if let Some(out) = field(output_col) {
            record = record.with_output(out);
        }
        if let Some(score) = field(score_col) {
            match score.parse::<f64>() {
                Ok(s) if s.is_finite() => record = record.with_score(s),
                _ => {
                    errors.push(RowError {
                        row: i + 1,
                        message: format!("raw_score `{score}` is not a number"),
                    });
                    continue;
                }
            }
        }
        if let Some(g) = field(group_col) {
            record = record.with_group(g);
        }
        records.push(record);
    }
    if !errors.is_empty() && !skip_bad_rows {
        return Err(Error::BadRows { errors }.into());
    }
    if records.is_empty() {
        return Err(Error::Schema("stream CSV has no usable rows".into()).into());
    }
    let space = match labels {
        Some(l) => OutcomeSpace::new(l.to_vec())?,
        None => {
            let seen: BTreeSet<&str> = records
                .iter()
                .flat_map(|r| {
                    std::iter::once(r.ground_truth.as_str()).chain(r.sampled_output.as_deref())
                })
                .collect();
            OutcomeSpace::new(seen.into_iter().collect::<Vec<_>>())?
        }
    };
    Ok(PredictionStream::new(space, records)?)
}
