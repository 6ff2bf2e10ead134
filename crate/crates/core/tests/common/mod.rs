#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use accfair::aggregation::utility_eval;
use accfair::types::{LotteryOutcome, MeasureEntry};
use accfair::{
    AggregationSpec, FiniteLottery, GroupPartition, InputDistribution, MeasureVector, OutcomeSpace,
    PredictionRecord, PredictionStream, UtilitySpec,
};
use rand::Rng;

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Path of the COMPAS table; `COMPAS_CSV` overrides the vendored extract.
pub fn compas_csv() -> PathBuf {
    std::env::var_os("COMPAS_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| manifest_dir().join("../../data/compas-scores-two-years.min.csv"))
}

pub fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(name)
}

// ---------------------------------------------------------------------------
// Random small streams

pub struct RandomCase {
    pub stream: PredictionStream,
    pub weights: InputDistribution,
    pub partition: GroupPartition,
}

/// Stream over at most 10 distinct inputs, each observed 1..=4 times, with
/// two groups that both contain a ground-truth positive.
pub fn random_case<R: Rng>(rng: &mut R) -> RandomCase {
    loop {
        let n_labels = rng.random_range(2..=3);
        let labels: Vec<String> = (0..n_labels).map(|i| format!("y{i}")).collect();
        let space = OutcomeSpace::new(labels.clone()).unwrap();
        let n_inputs = rng.random_range(2..=10);
        let mut records = Vec::new();
        let mut group_of = BTreeMap::new();
        let mut raw_weights = BTreeMap::new();
        for i in 0..n_inputs {
            let id = format!("in{i}");
            let truth = labels[rng.random_range(0..n_labels)].clone();
            let group = if rng.random_bool(0.5) { "g1" } else { "g2" };
            group_of.insert(id.clone(), group.to_string());
            raw_weights.insert(id.clone(), rng.random_range(0.05..1.0));
            for _ in 0..rng.random_range(1..=4) {
                let out = labels[rng.random_range(0..n_labels)].clone();
                records.push(
                    PredictionRecord::new(id.clone(), truth.clone())
                        .with_output(out)
                        .with_group(group),
                );
            }
        }
        let positive = labels[0].clone();
        let has_pos = |g: &str| {
            records
                .iter()
                .any(|r| r.group.as_deref() == Some(g) && r.ground_truth == positive)
        };
        if !(has_pos("g1") && has_pos("g2")) {
            continue;
        }
        let total: f64 = raw_weights.values().sum();
        let weights = InputDistribution::new(
            raw_weights
                .into_iter()
                .map(|(k, w)| (k, w / total))
                .collect(),
        )
        .unwrap();
        let stream = PredictionStream::new(space, records).unwrap();
        let partition =
            GroupPartition::new(group_of, vec!["g1".into(), "g2".into()], positive).unwrap();
        return RandomCase {
            stream,
            weights,
            partition,
        };
    }
}

// ---------------------------------------------------------------------------
// Naive oracles: straight loops over raw records, no shared code paths.

/// Empirical frequency of `label` among the outputs recorded for `id`.
fn naive_freq(stream: &PredictionStream, id: &str, label: &str) -> f64 {
    let mut seen = 0.0;
    let mut hits = 0.0;
    for r in stream.records() {
        if r.input_id == id {
            seen += 1.0;
            if r.sampled_output.as_deref() == Some(label) {
                hits += 1.0;
            }
        }
    }
    hits / seen
}

fn naive_truth(stream: &PredictionStream, id: &str) -> String {
    stream
        .records()
        .iter()
        .find(|r| r.input_id == id)
        .unwrap()
        .ground_truth
        .clone()
}

/// Σ_x P(x) s(freq(x), truth(x)); `rule` is "brier" | "log" | "spherical".
pub fn naive_accuracy(stream: &PredictionStream, weights: &InputDistribution, rule: &str) -> f64 {
    let labels = stream.space().labels();
    let mut total = 0.0;
    for (id, w) in weights.weights() {
        let y = naive_truth(stream, id);
        let score = match rule {
            "brier" => {
                let mut s = 0.0;
                for l in labels {
                    let ind = if *l == y { 1.0 } else { 0.0 };
                    s -= (naive_freq(stream, id, l) - ind).powi(2);
                }
                s
            }
            "log" => naive_freq(stream, id, &y).ln(),
            "spherical" => {
                let mut norm = 0.0;
                for l in labels {
                    norm += naive_freq(stream, id, l).powi(2);
                }
                naive_freq(stream, id, &y) / norm.sqrt()
            }
            _ => unreachable!(),
        };
        total += w * score;
    }
    total
}

/// Double loop: over inputs in the group with positive truth, then over their records.
pub fn naive_fnr(
    stream: &PredictionStream,
    weights: &InputDistribution,
    partition: &GroupPartition,
    group: &str,
) -> f64 {
    let positive = partition.positive_label();
    let mut mass = 0.0;
    let mut miss = 0.0;
    for (id, w) in weights.weights() {
        if partition.group(id) != Some(group) || naive_truth(stream, id) != positive {
            continue;
        }
        mass += w;
        miss += w * (1.0 - naive_freq(stream, id, positive));
    }
    miss / mass
}

// ---------------------------------------------------------------------------
// Lottery pairs satisfying per-measure indifference by construction

pub fn random_utility<R: Rng>(rng: &mut R) -> UtilitySpec {
    match rng.random_range(0..4) {
        0 => UtilitySpec::Linear,
        1 => UtilitySpec::ReciprocalAbs,
        2 => UtilitySpec::LogReciprocalAbs,
        _ => {
            let mut x = -2.0;
            let mut u = rng.random_range(-1.0..1.0);
            let mut pts = vec![(x, u)];
            for _ in 0..rng.random_range(1..4) {
                x += rng.random_range(0.2..0.8);
                u += rng.random_range(0.1..1.0);
                pts.push((x, u));
            }
            UtilitySpec::piecewise(pts).unwrap()
        }
    }
}

/// Range of utility values that [`invert_utility`] can hit.
fn utility_range(u: &UtilitySpec) -> (f64, f64) {
    match u {
        UtilitySpec::Linear => (-3.0, 0.0),
        UtilitySpec::ReciprocalAbs => (0.5, 20.0),
        UtilitySpec::LogReciprocalAbs => (-1.0, 5.0),
        UtilitySpec::PiecewiseTable { points } => (points[0].1, points[points.len() - 1].1),
    }
}

/// A negative measure value whose utility is `target`.
fn invert_utility(u: &UtilitySpec, target: f64) -> f64 {
    match u {
        UtilitySpec::Linear => target,
        UtilitySpec::ReciprocalAbs => -1.0 / target,
        UtilitySpec::LogReciprocalAbs => -(-target).exp(),
        UtilitySpec::PiecewiseTable { points } => {
            let i = points
                .windows(2)
                .position(|w| target <= w[1].1)
                .unwrap_or(points.len() - 2);
            let ((xa, ua), (xb, ub)) = (points[i], points[i + 1]);
            xa + (xb - xa) * (target - ua) / (ub - ua)
        }
    }
}

fn random_probs<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let head: f64 = p[..n - 1].iter().sum();
    p[n - 1] = 1.0 - head;
    p
}

pub struct LotteryPair {
    pub spec: AggregationSpec,
    pub mu: FiniteLottery,
    pub nu: FiniteLottery,
}

/// Random aggregate plus two lotteries with equal expected utility on every
/// measure but different supports.
pub fn indifferent_pair<R: Rng>(rng: &mut R) -> LotteryPair {
    let dim = rng.random_range(2..=5);
    let ids: Vec<String> = (0..dim).map(|i| format!("m{i}")).collect();
    let utilities: Vec<UtilitySpec> = (0..dim).map(|_| random_utility(rng)).collect();
    let spec = AggregationSpec::new(
        rng.random_range(-1.0..1.0),
        ids.iter()
            .cloned()
            .map(|id| (id, rng.random_range(-2.0..2.0)))
            .collect(),
        ids.iter().cloned().zip(utilities.iter().cloned()).collect(),
        false,
    )
    .unwrap();

    let n_mu = rng.random_range(1..=4);
    let n_nu = rng.random_range(2..=5);
    let p_mu = random_probs(rng, n_mu);
    let p_nu = random_probs(rng, n_nu);

    // utility values per (support point, measure)
    let mut u_mu = vec![vec![0.0; dim]; n_mu];
    let mut u_nu = vec![vec![0.0; dim]; n_nu];
    for m in 0..dim {
        let (lo, hi) = utility_range(&utilities[m]);
        'retry: loop {
            for row in u_mu.iter_mut() {
                row[m] = rng.random_range(lo..hi);
            }
            let mean: f64 = (0..n_mu).map(|i| p_mu[i] * u_mu[i][m]).sum();
            for row in u_nu.iter_mut().take(n_nu - 1) {
                row[m] = rng.random_range(lo..hi);
            }
            let head: f64 = (0..n_nu - 1).map(|j| p_nu[j] * u_nu[j][m]).sum();
            let last = (mean - head) / p_nu[n_nu - 1];
            if last > lo && last < hi {
                u_nu[n_nu - 1][m] = last;
                break 'retry;
            }
        }
    }
    let to_lottery = |us: &[Vec<f64>], ps: &[f64]| {
        let support = us
            .iter()
            .zip(ps)
            .map(|(row, p)| LotteryOutcome {
                vector: MeasureVector::new(
                    row.iter()
                        .enumerate()
                        .map(|(m, u)| MeasureEntry {
                            measure_id: ids[m].clone(),
                            value: invert_utility(&utilities[m], *u),
                        })
                        .collect(),
                    dim - 1,
                    1,
                )
                .unwrap(),
                probability: *p,
            })
            .collect();
        FiniteLottery::new(support).unwrap()
    };
    let mu = to_lottery(&u_mu, &p_mu);
    let nu = to_lottery(&u_nu, &p_nu);
    LotteryPair { spec, mu, nu }
}

/// Direct expectation of one measure's utility, for cross-checking.
pub fn direct_expectation(lottery: &FiniteLottery, id: &str, u: &UtilitySpec) -> f64 {
    lottery
        .support()
        .iter()
        .map(|o| o.probability * utility_eval(u, o.vector.get(id).unwrap()).unwrap())
        .sum()
}
