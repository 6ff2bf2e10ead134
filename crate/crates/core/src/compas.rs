//! COMPAS audit: ingest the ProPublica Broward County two-year recidivism
//! table, score the decile predictions for accuracy and equal opportunity,
//! and sweep the weight simplex under two utility configurations.
//!
//! Outcome space is `[no_recid, recid]`. The decile scores `recid`; the
//! positive class for fairness is `no_recid`, so a false negative is a
//! non-recidivist predicted to re-offend.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::accuracy::estimated_accuracy;
use crate::aggregation::{simplex_sweep, utility_eval, SweepSummary};
use crate::error::{Error, Result, RowError};
use crate::estimation::compas_decile_estimator;
use crate::fairness::{fairness_report, FairnessMeasureSpec};
use crate::render::ternary_svg;
use crate::scoring::ScoringRule;
use crate::types::{
    uniform_input_distribution, GroupPartition, MeasureVector, OutcomeSpace, PredictionRecord,
    PredictionStream, UtilitySpec,
};

pub const NO_RECID: &str = "no_recid";
pub const RECID: &str = "recid";

pub const MEASURE_BRIER: &str = "brier";
pub const MEASURE_LOG: &str = "log";
pub const MEASURE_EQOPP: &str = "eqopp";

pub fn outcome_space() -> OutcomeSpace {
    OutcomeSpace::new([NO_RECID, RECID]).expect("two distinct labels")
}

/// One parsed input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompasRow {
    pub row_id: String,
    pub decile_score: u8,
    pub race: String,
    pub two_year_recid: u8,
}

// ---------------------------------------------------------------------------
// Filtering

/// Row exclusion rules from the ProPublica two-year analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterRule {
    /// Keep rows with `days_b_screening_arrest` within ±30 days.
    ChargeWindow,
    /// Drop rows with `is_recid == -1`.
    RecidFlag,
    /// Drop ordinary traffic offenses (`c_charge_degree == "O"`).
    TrafficOffense,
    /// Drop rows with `score_text == "N/A"`.
    ScoreText,
}

impl FilterRule {
    pub const ALL: [FilterRule; 4] = [
        FilterRule::ChargeWindow,
        FilterRule::RecidFlag,
        FilterRule::TrafficOffense,
        FilterRule::ScoreText,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterRule::ChargeWindow => "charge-window",
            FilterRule::RecidFlag => "recid-flag",
            FilterRule::TrafficOffense => "traffic-offense",
            FilterRule::ScoreText => "score-text",
        }
    }

    fn column(self) -> &'static str {
        match self {
            FilterRule::ChargeWindow => "days_b_screening_arrest",
            FilterRule::RecidFlag => "is_recid",
            FilterRule::TrafficOffense => "c_charge_degree",
            FilterRule::ScoreText => "score_text",
        }
    }

    /// `Ok(true)` when the row survives the rule.
    fn keeps(self, cell: &str) -> std::result::Result<bool, String> {
        let cell = cell.trim();
        match self {
            FilterRule::ChargeWindow => {
                if cell.is_empty() {
                    return Ok(false);
                }
                let days: f64 = cell
                    .parse()
                    .map_err(|_| format!("days_b_screening_arrest `{cell}` is not a number"))?;
                Ok((-30.0..=30.0).contains(&days))
            }
            FilterRule::RecidFlag => Ok(cell != "-1"),
            FilterRule::TrafficOffense => Ok(cell != "O"),
            FilterRule::ScoreText => Ok(cell != "N/A"),
        }
    }
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FilterRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown filter rule `{s}`")))
    }
}

/// Set of enabled filter rules. The default enables none.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub rules: Vec<FilterRule>,
}

impl FilterSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// All four ProPublica rules.
    pub fn propublica() -> Self {
        Self {
            rules: FilterRule::ALL.to_vec(),
        }
    }

    pub fn with(mut self, rule: FilterRule) -> Self {
        if !self.rules.contains(&rule) {
            self.rules.push(rule);
            self.rules.sort();
        }
        self
    }
}

impl FromStr for FilterSpec {
    type Err = Error;
    /// `none`, `propublica`, or a comma-separated list of rule names.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "" | "none" => Ok(FilterSpec::none()),
            "propublica" => Ok(FilterSpec::propublica()),
            list => list
                .split(',')
                .map(|r| r.trim().parse::<FilterRule>())
                .try_fold(FilterSpec::none(), |spec, rule| Ok(spec.with(rule?))),
        }
    }
}

/// How rows are split into the two compared groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    pub column: String,
    /// Rows whose `column` equals this value form the first group.
    pub member_value: String,
    pub member_tag: String,
    /// With `Some`, only rows equal to this value form the second group and
    /// all remaining rows are tagged `other`; with `None` every non-member
    /// row is in the second group.
    pub comparison_value: Option<String>,
    pub comparison_tag: String,
}

impl Default for Grouping {
    fn default() -> Self {
        Self {
            column: "race".into(),
            member_value: "African-American".into(),
            member_tag: "Black".into(),
            comparison_value: None,
            comparison_tag: "non-Black".into(),
        }
    }
}

impl Grouping {
    /// Groups tagged by their raw column values.
    pub fn by_value(column: &str, a: &str, b: Option<&str>) -> Self {
        Self {
            column: column.into(),
            member_value: a.into(),
            member_tag: a.into(),
            comparison_value: b.map(Into::into),
            comparison_tag: b.map_or_else(|| format!("not {a}"), Into::into),
        }
    }

    /// Group tag for a raw column value.
    pub fn tag(&self, value: &str) -> &str {
        if value == self.member_value {
            &self.member_tag
        } else {
            match &self.comparison_value {
                Some(b) if b != value => "other",
                _ => &self.comparison_tag,
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub filter: FilterSpec,
    pub grouping: Grouping,
    /// Drop malformed rows instead of failing.
    pub skip_bad_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleCount {
    pub rule: FilterRule,
    pub removed: usize,
}

/// Reconciles raw rows to loaded records:
/// `raw_rows = bad_rows + Σ removed + n_records`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterAudit {
    pub raw_rows: usize,
    pub bad_rows: usize,
    pub removed_by_rule: Vec<RuleCount>,
    pub n_records: usize,
}

impl FilterAudit {
    pub fn reconciles(&self) -> bool {
        self.raw_rows
            == self.bad_rows
                + self
                    .removed_by_rule
                    .iter()
                    .map(|r| r.removed)
                    .sum::<usize>()
                + self.n_records
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCompas {
    pub rows: Vec<CompasRow>,
    pub stream: PredictionStream,
    pub partition: GroupPartition,
    pub filter_audit: FilterAudit,
    pub bad_rows: Vec<RowError>,
}

pub fn load_compas_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<LoadedCompas> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_compas_reader(file, options)
}

struct Columns {
    decile: usize,
    recid: usize,
    group: usize,
    race: Option<usize>,
    id: Option<usize>,
    rules: Vec<(FilterRule, usize)>,
}

enum RowOutcome {
    Keep(CompasRow, String),
    Filtered(FilterRule),
    Bad(String),
}

fn parse_row(
    record: &csv::StringRecord,
    row_no: usize,
    cols: &Columns,
    options: &LoadOptions,
) -> RowOutcome {
    let cell = record[cols.decile].trim();
    let decile: i64 = match cell.parse() {
        Ok(d) => d,
        Err(_) => return RowOutcome::Bad(format!("decile_score `{cell}` is not an integer")),
    };
    if !(0..=10).contains(&decile) {
        return RowOutcome::Bad(format!("decile_score {decile} outside 0..=10"));
    }
    let recid = match record[cols.recid].trim() {
        "0" => 0,
        "1" => 1,
        other => return RowOutcome::Bad(format!("two_year_recid `{other}` is not 0 or 1")),
    };
    for &(rule, col) in &cols.rules {
        match rule.keeps(&record[col]) {
            Ok(true) => {}
            Ok(false) => return RowOutcome::Filtered(rule),
            Err(message) => return RowOutcome::Bad(message),
        }
    }
    let row_id = cols
        .id
        .map(|c| record[c].trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| format!("row{row_no}"));
    let race = cols
        .race
        .map(|c| record[c].trim().to_string())
        .unwrap_or_default();
    let group = options.grouping.tag(record[cols.group].trim()).to_string();
    RowOutcome::Keep(
        CompasRow {
            row_id,
            decile_score: decile as u8,
            race,
            two_year_recid: recid,
        },
        group,
    )
}

pub fn load_compas_reader<R: Read>(reader: R, options: &LoadOptions) -> Result<LoadedCompas> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::Schema("input has no header row".into()));
    }
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| {
        column(name).ok_or_else(|| Error::Schema(format!("required column `{name}` is missing")))
    };
    let cols = Columns {
        decile: required("decile_score")?,
        recid: required("two_year_recid")?,
        group: required(&options.grouping.column)?,
        race: column("race"),
        id: column("id"),
        rules: options
            .filter
            .rules
            .iter()
            .map(|&rule| Ok((rule, required(rule.column())?)))
            .collect::<Result<_>>()?,
    };

    let mut removed: BTreeMap<FilterRule, usize> =
        options.filter.rules.iter().map(|r| (*r, 0)).collect();
    let mut raw_rows = 0;
    let mut bad_rows = Vec::new();
    let mut rows = Vec::new();
    let mut records = Vec::new();

    for (i, result) in csv.records().enumerate() {
        raw_rows += 1;
        let row_no = i + 1;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                bad_rows.push(RowError {
                    row: row_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match parse_row(&record, row_no, &cols, options) {
            RowOutcome::Keep(row, group) => {
                records.push(
                    PredictionRecord::new(
                        row.row_id.clone(),
                        if row.two_year_recid == 1 {
                            RECID
                        } else {
                            NO_RECID
                        },
                    )
                    .with_score(f64::from(row.decile_score))
                    .with_group(group),
                );
                rows.push(row);
            }
            RowOutcome::Filtered(rule) => {
                *removed.get_mut(&rule).expect("rule registered") += 1;
            }
            RowOutcome::Bad(message) => bad_rows.push(RowError {
                row: row_no,
                message,
            }),
        }
    }

    if raw_rows == 0 {
        return Err(Error::Schema("input has a header but no rows".into()));
    }
    if !bad_rows.is_empty() && !options.skip_bad_rows {
        return Err(Error::BadRows { errors: bad_rows });
    }
    if records.is_empty() {
        return Err(Error::domain("no rows left after filtering"));
    }

    let stream = PredictionStream::new(outcome_space(), records)?;
    let stream = if stream.has_duplicate_ids() {
        stream.with_unique_ids()
    } else {
        stream
    };
    let g = &options.grouping;
    let partition = GroupPartition::from_stream(
        &stream,
        vec![g.member_tag.clone(), g.comparison_tag.clone()],
        NO_RECID,
    )?;
    let filter_audit = FilterAudit {
        raw_rows,
        bad_rows: bad_rows.len(),
        removed_by_rule: removed
            .into_iter()
            .map(|(rule, removed)| RuleCount { rule, removed })
            .collect(),
        n_records: stream.len(),
    };
    Ok(LoadedCompas {
        rows,
        stream,
        partition,
        filter_audit,
        bad_rows,
    })
}

// ---------------------------------------------------------------------------
// Audit

/// A named assignment of utilities to the three audit measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityConfig {
    pub name: String,
    pub utilities: BTreeMap<String, UtilitySpec>,
}

impl UtilityConfig {
    pub fn new(name: &str, brier: UtilitySpec, log: UtilitySpec, eqopp: UtilitySpec) -> Self {
        Self {
            name: name.into(),
            utilities: [
                (MEASURE_BRIER.to_string(), brier),
                (MEASURE_LOG.to_string(), log),
                (MEASURE_EQOPP.to_string(), eqopp),
            ]
            .into(),
        }
    }

    /// `1/|r|` on every measure.
    pub fn reciprocal() -> Self {
        Self::new(
            "reciprocal",
            UtilitySpec::ReciprocalAbs,
            UtilitySpec::ReciprocalAbs,
            UtilitySpec::ReciprocalAbs,
        )
    }

    /// `1/|r|` on the accuracy measures, `ln(1/|r|)` on equal opportunity.
    pub fn log_eqopp() -> Self {
        Self::new(
            "log-eqopp",
            UtilitySpec::ReciprocalAbs,
            UtilitySpec::ReciprocalAbs,
            UtilitySpec::LogReciprocalAbs,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub resolution: usize,
    pub utility_configs: Vec<UtilityConfig>,
    /// Where sweep CSVs (and SVGs) are written; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    pub write_svg: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            resolution: 100,
            utility_configs: vec![UtilityConfig::reciprocal(), UtilityConfig::log_eqopp()],
            out_dir: None,
            write_svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepArtifact {
    pub config: String,
    pub summary: SweepSummary,
    /// File names relative to the output directory.
    pub csv: Option<String>,
    pub svg: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub n_records: usize,
    pub filter: FilterAudit,
    pub group_sizes: BTreeMap<String, usize>,
    pub brier: f64,
    pub log: f64,
    pub eqopp: f64,
    /// FNR of the first group of the grouping (Black defendants by default).
    pub fnr_black: f64,
    /// FNR of the second group.
    pub fnr_nonblack: f64,
    /// Utility of each measure, per utility configuration.
    pub utilities: BTreeMap<String, BTreeMap<String, f64>>,
    pub sweeps: Vec<SweepArtifact>,
}

impl AuditReport {
    /// Pretty JSON with a trailing newline; key order is fixed.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn measure_vector(&self) -> MeasureVector {
        MeasureVector::from_pairs(
            [
                (MEASURE_BRIER, self.brier),
                (MEASURE_LOG, self.log),
                (MEASURE_EQOPP, self.eqopp),
            ],
            2,
            1,
        )
        .expect("fixed schema")
    }
}

/// Measure values of the audit, without utilities or sweeps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompasMeasures {
    pub brier: f64,
    pub log: f64,
    pub eqopp: f64,
    pub fnr_by_group: BTreeMap<String, f64>,
}

pub fn compute_measures(
    stream: &PredictionStream,
    partition: &GroupPartition,
) -> Result<CompasMeasures> {
    let model = compas_decile_estimator(stream).map_err(|e| e.at_stage("estimation"))?;
    let truth = stream
        .ground_truth()
        .map_err(|e| e.at_stage("ground truth"))?;
    let p = uniform_input_distribution(stream).map_err(|e| e.at_stage("input distribution"))?;
    let brier = estimated_accuracy(ScoringRule::Brier, &model, &truth, &p)
        .map_err(|e| e.at_stage("brier accuracy"))?;
    let log = estimated_accuracy(ScoringRule::Logarithmic, &model, &truth, &p)
        .map_err(|e| e.at_stage("log accuracy"))?;
    let fairness = fairness_report(
        &FairnessMeasureSpec::eq_opp(partition.clone()),
        &model,
        &truth,
        &p,
    )
    .map_err(|e| e.at_stage("equal opportunity"))?;
    Ok(CompasMeasures {
        brier,
        log,
        eqopp: fairness.value,
        fnr_by_group: fairness.fnr_by_group,
    })
}

pub fn run_audit(loaded: &LoadedCompas, config: &AuditConfig) -> Result<AuditReport> {
    let measures = compute_measures(&loaded.stream, &loaded.partition)?;
    let groups = loaded.partition.groups();
    let mut report = AuditReport {
        n_records: loaded.stream.len(),
        filter: loaded.filter_audit.clone(),
        group_sizes: loaded.partition.group_sizes(),
        brier: measures.brier,
        log: measures.log,
        eqopp: measures.eqopp,
        fnr_black: measures.fnr_by_group[&groups[0]],
        fnr_nonblack: measures.fnr_by_group[&groups[1]],
        utilities: BTreeMap::new(),
        sweeps: Vec::new(),
    };
    let v = report.measure_vector();

    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
    }
    for uc in &config.utility_configs {
        let values = v
            .entries()
            .iter()
            .map(|e| {
                Ok((
                    e.measure_id.clone(),
                    utility_eval(&uc.utilities[&e.measure_id], e.value)?,
                ))
            })
            .collect::<Result<BTreeMap<_, _>>>()
            .map_err(|e| e.at_stage("utilities"))?;
        report.utilities.insert(uc.name.clone(), values);

        let sweep = simplex_sweep(&v, &uc.utilities, config.resolution)
            .map_err(|e| e.at_stage("simplex sweep"))?;
        let mut artifact = SweepArtifact {
            config: uc.name.clone(),
            summary: sweep.summary(),
            csv: None,
            svg: None,
        };
        if let Some(dir) = &config.out_dir {
            let csv_name = format!("sweep_{}.csv", uc.name);
            write_file(&dir.join(&csv_name), sweep.to_csv_string().as_bytes())?;
            artifact.csv = Some(csv_name);
            if config.write_svg {
                let svg_name = format!("sweep_{}.svg", uc.name);
                let title = format!("Overall value, utilities: {}", uc.name);
                write_file(
                    &dir.join(&svg_name),
                    ternary_svg(&sweep, &title)?.as_bytes(),
                )?;
                artifact.svg = Some(svg_name);
            }
        }
        report.sweeps.push(artifact);
    }

    if let Some(dir) = &config.out_dir {
        write_file(&dir.join("audit_report.json"), report.to_json().as_bytes())?;
    }
    Ok(report)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
