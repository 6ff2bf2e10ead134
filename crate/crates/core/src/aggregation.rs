//! Utilities over measure values and their affine aggregate.
//!
//! The overall value of a model with measure vector `v` is
//! `alpha + Σ_m w_m · u_m(v_m)`. Lotteries over measure vectors are compared
//! by expected utility, measure by measure or in aggregate, and
//! [`simplex_sweep`] evaluates the aggregate over a lattice of positive
//! weight vectors summing to one.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sum::{compensated_sum, CompensatedSum};
use crate::types::{AggregationSpec, FiniteLottery, MeasureVector, UtilitySpec};

/// Evaluates `spec` at measure value `r`.
pub fn utility_eval(spec: &UtilitySpec, r: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::domain(format!("measure value {r} is not finite")));
    }
    match spec {
        UtilitySpec::Linear => Ok(r),
        UtilitySpec::ReciprocalAbs | UtilitySpec::LogReciprocalAbs if r == 0.0 => {
            Err(Error::UtilityUndefinedAtOptimum {
                kind: spec.name(),
                value: r,
            })
        }
        UtilitySpec::ReciprocalAbs => Ok(1.0 / r.abs()),
        UtilitySpec::LogReciprocalAbs => Ok((1.0 / r.abs()).ln()),
        UtilitySpec::PiecewiseTable { points } => Ok(interpolate(points, r)),
    }
}

fn interpolate(points: &[(f64, f64)], r: f64) -> f64 {
    let (x0, u0) = points[0];
    let (xn, un) = points[points.len() - 1];
    if r <= x0 {
        return u0;
    }
    if r >= xn {
        return un;
    }
    let i = points.partition_point(|(x, _)| *x <= r);
    let (xa, ua) = points[i - 1];
    let (xb, ub) = points[i];
    ua + (ub - ua) * (r - xa) / (xb - xa)
}

/// Per-measure utilities of `v` under `spec`, in `v`'s order.
pub fn measure_utilities(spec: &AggregationSpec, v: &MeasureVector) -> Result<Vec<(String, f64)>> {
    spec.check_covers(v)?;
    v.entries()
        .iter()
        .map(|e| {
            let u = utility_eval(&spec.utilities()[&e.measure_id], e.value)?;
            Ok((e.measure_id.clone(), u))
        })
        .collect()
}

/// `alpha + Σ_m w_m · u_m(v_m)`, summed in `v`'s measure order.
pub fn overall(spec: &AggregationSpec, v: &MeasureVector) -> Result<f64> {
    let utilities = measure_utilities(spec, v)?;
    Ok(combine(
        spec.alpha(),
        utilities.iter().map(|(id, u)| (spec.weights()[id], *u)),
    ))
}

fn combine(alpha: f64, terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut acc = CompensatedSum::new();
    acc += alpha;
    for (w, u) in terms {
        acc += w * u;
    }
    acc.value()
}

/// What [`expected_utility`] takes the expectation of.
#[derive(Debug, Clone, Copy)]
pub enum UtilityTarget<'a> {
    /// One measure's utility.
    Measure {
        measure_id: &'a str,
        utility: &'a UtilitySpec,
    },
    /// The aggregate.
    Overall(&'a AggregationSpec),
}

pub fn expected_utility(lottery: &FiniteLottery, target: UtilityTarget<'_>) -> Result<f64> {
    let values = lottery
        .support()
        .iter()
        .map(|o| {
            let value = match target {
                UtilityTarget::Measure {
                    measure_id,
                    utility,
                } => {
                    let r = o.vector.get(measure_id).ok_or_else(|| {
                        Error::domain(format!("lottery has no measure `{measure_id}`"))
                    })?;
                    utility_eval(utility, r)?
                }
                UtilityTarget::Overall(spec) => overall(spec, &o.vector)?,
            };
            Ok(o.probability * value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndifferenceReport {
    /// Every per-measure expected utility agrees within `tol`.
    pub premise_holds: bool,
    /// The aggregate expected utilities agree within `(Σ|w| + 1) · tol`.
    pub conclusion_holds: bool,
}

/// Tests the ex ante Pareto indifference condition for one pair of lotteries.
pub fn check_pareto_indifference(
    mu: &FiniteLottery,
    nu: &FiniteLottery,
    spec: &AggregationSpec,
    tol: f64,
) -> Result<IndifferenceReport> {
    if !mu.schema().same_schema(nu.schema()) {
        return Err(Error::domain("lotteries use different measure schemas"));
    }
    spec.check_covers(mu.schema())?;

    let mut premise_holds = true;
    for id in mu.schema().ids() {
        let target = UtilityTarget::Measure {
            measure_id: id,
            utility: &spec.utilities()[id],
        };
        let gap = expected_utility(mu, target)? - expected_utility(nu, target)?;
        premise_holds &= gap.abs() <= tol;
    }
    let gap = expected_utility(mu, UtilityTarget::Overall(spec))?
        - expected_utility(nu, UtilityTarget::Overall(spec))?;
    let weight_mass: f64 = spec.weights().values().map(|w| w.abs()).sum();
    Ok(IndifferenceReport {
        premise_holds,
        conclusion_holds: gap.abs() <= weight_mass * tol + tol,
    })
}

// ---------------------------------------------------------------------------
// Simplex sweep

/// Lattice of weight vectors `(i_1, ..., i_d) / k` with every `i ≥ 1`,
/// in lexicographic order of the `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    dim: usize,
    resolution: usize,
    counts: Vec<Vec<usize>>,
}

impl SimplexGrid {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::domain(
                "a weight simplex needs at least two measures",
            ));
        }
        if resolution < dim {
            return Err(Error::domain(format!(
                "resolution {resolution} leaves no strictly positive weights for {dim} measures"
            )));
        }
        let mut counts = Vec::new();
        let mut prefix = Vec::with_capacity(dim);
        compositions(dim, resolution, &mut prefix, &mut counts);
        Ok(Self {
            dim,
            resolution,
            counts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Integer lattice coordinates; weights are these divided by the resolution.
    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let k = self.resolution as f64;
        self.counts
            .iter()
            .map(move |c| c.iter().map(|&i| i as f64 / k).collect())
    }
}

fn compositions(dim: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let slots_left = dim - prefix.len();
    if slots_left == 1 {
        let mut c = prefix.clone();
        c.push(remaining);
        out.push(c);
        return;
    }
    // leave at least one unit for each later slot
    for i in 1..=remaining - (slots_left - 1) {
        prefix.push(i);
        compositions(dim, remaining - i, prefix, out);
        prefix.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub weights: Vec<f64>,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerLimit {
    pub measure_id: String,
    /// Limit of the overall value as this measure's weight goes to 1.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub measure_ids: Vec<String>,
    pub resolution: usize,
    pub points: Vec<SweepPoint>,
    pub argmax: SweepPoint,
    pub corner_limits: Vec<CornerLimit>,
}

/// Compact view of a sweep, without the per-point values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub measure_ids: Vec<String>,
    pub resolution: usize,
    pub n_points: usize,
    pub argmax: SweepPoint,
    pub min_overall: f64,
    pub corner_limits: Vec<CornerLimit>,
}

impl SweepResult {
    pub fn summary(&self) -> SweepSummary {
        SweepSummary {
            measure_ids: self.measure_ids.clone(),
            resolution: self.resolution,
            n_points: self.points.len(),
            argmax: self.argmax.clone(),
            min_overall: self.min_overall(),
            corner_limits: self.corner_limits.clone(),
        }
    }

    pub fn min_overall(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.overall)
            .fold(f64::INFINITY, f64::min)
    }

    /// Corner with the largest limit value; `None` when the largest is shared.
    pub fn dominant_corner(&self) -> Option<&CornerLimit> {
        let best = self
            .corner_limits
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))?;
        let ties = self
            .corner_limits
            .iter()
            .filter(|c| c.value == best.value)
            .count();
        (ties == 1).then_some(best)
    }

    /// Writes `w_<id>,...,overall` with six decimals per cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = self
            .measure_ids
            .iter()
            .map(|id| format!("w_{id}"))
            .chain(std::iter::once("overall".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            let mut line = String::new();
            for w in &p.weights {
                line.push_str(&format!("{w:.6},"));
            }
            line.push_str(&format!("{:.6}", p.overall));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }
}

/// Evaluates the aggregate (alpha = 0) of `v` at every point of the
/// positive weight lattice of resolution `resolution`.
///
/// Ties for the maximum go to the lexicographically smallest weight vector.
pub fn simplex_sweep(
    v: &MeasureVector,
    utilities: &BTreeMap<String, UtilitySpec>,
    resolution: usize,
) -> Result<SweepResult> {
    let ids: Vec<String> = v.ids().map(str::to_string).collect();
    let sorted: std::collections::BTreeSet<&String> = ids.iter().collect();
    if !sorted.into_iter().eq(utilities.keys()) {
        return Err(Error::domain(
            "utilities must cover exactly the measures of the vector",
        ));
    }
    let grid = SimplexGrid::new(v.len(), resolution)?;
    let us: Vec<f64> = v
        .entries()
        .iter()
        .map(|e| utility_eval(&utilities[&e.measure_id], e.value))
        .collect::<Result<_>>()?;

    let mut points: Vec<SweepPoint> = Vec::with_capacity(grid.len());
    let mut best = 0;
    for weights in grid.points() {
        let value = combine(0.0, weights.iter().copied().zip(us.iter().copied()));
        if points.is_empty() || value > points[best].overall {
            best = points.len();
        }
        points.push(SweepPoint {
            weights,
            overall: value,
        });
    }
    let argmax = points[best].clone();
    let corner_limits = ids
        .iter()
        .zip(&us)
        .map(|(id, u)| CornerLimit {
            measure_id: id.clone(),
            value: *u,
        })
        .collect();
    Ok(SweepResult {
        measure_ids: ids,
        resolution,
        points,
        argmax,
        corner_limits,
    })
}
