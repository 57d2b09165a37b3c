//! Network inference from first-step cascade statistics.
//!
//! Only `S_0` and `S_1` of each cascade are used. Under IC the edge
//! probability satisfies `p_uv = (ap(v) - ap(v|ū)) / (q_u (1 - ap(v|ū)))`,
//! under LT `w_uv = (ap(v) - ap(v|ū)) / (q_u (1 - q_v))`; plugging in
//! empirical frequencies gives the estimators.

use std::fmt::Write as _;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CascadeDataset, DatasetReader};
use crate::diffusion::Cascade;
use crate::error::{Error, Result};
use crate::graph::{AssumptionParams, Graph, Model, SeedDistribution, NORMALIZATION_TOLERANCE};
use crate::oracle;

/// Empirical counts over `t` cascades.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneStepStats {
    pub n: usize,
    pub t: u64,
    /// `u ∈ S_0`
    pub t_u: Vec<u64>,
    /// `u ∉ S_0`
    pub t_ubar: Vec<u64>,
    /// `v ∈ S_1`
    pub t_v: Vec<u64>,
    /// `u ∉ S_0 ∧ v ∈ S_1`, row-major by `u`
    pub t_ubar_v: Vec<u64>,
}

const CHUNK: usize = 4096;

impl OneStepStats {
    pub fn empty(n: usize) -> Self {
        OneStepStats {
            n,
            t: 0,
            t_u: vec![0; n],
            t_ubar: vec![0; n],
            t_v: vec![0; n],
            t_ubar_v: vec![0; n * n],
        }
    }

    pub fn add(&mut self, cascade: &Cascade) {
        let n = self.n;
        debug_assert_eq!(cascade.n(), n);
        let mut seeded = vec![false; n];
        for &u in cascade.seeds() {
            seeded[u] = true;
        }
        self.t += 1;
        for (u, &s) in seeded.iter().enumerate() {
            if s {
                self.t_u[u] += 1;
            } else {
                self.t_ubar[u] += 1;
            }
        }
        for &v in cascade.seeds().iter().chain(cascade.step_one_delta()) {
            self.t_v[v] += 1;
            for u in (0..n).filter(|&u| !seeded[u]) {
                self.t_ubar_v[u * n + v] += 1;
            }
        }
    }

    /// Counts are additive, so shards can be collected independently.
    pub fn merge(mut self, other: &OneStepStats) -> Self {
        assert_eq!(self.n, other.n, "merging statistics over different node sets");
        self.t += other.t;
        let add = |a: &mut Vec<u64>, b: &[u64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.t_u, &other.t_u);
        add(&mut self.t_ubar, &other.t_ubar);
        add(&mut self.t_v, &other.t_v);
        add(&mut self.t_ubar_v, &other.t_ubar_v);
        self
    }

    pub fn t_ubar_v(&self, u: usize, v: usize) -> u64 {
        self.t_ubar_v[u * self.n + v]
    }

    fn ratio(num: u64, den: u64) -> f64 {
        num as f64 / den as f64
    }

    pub fn q_hat(&self, u: usize) -> f64 {
        Self::ratio(self.t_u[u], self.t)
    }

    pub fn ap_hat(&self, v: usize) -> f64 {
        Self::ratio(self.t_v[v], self.t)
    }

    /// `None` when `u` was seeded in every cascade.
    pub fn ap_hat_given_not(&self, u: usize, v: usize) -> Option<f64> {
        (self.t_ubar[u] > 0).then(|| Self::ratio(self.t_ubar_v(u, v), self.t_ubar[u]))
    }
}

fn collect_slice(n: usize, cascades: &[Cascade]) -> OneStepStats {
    cascades
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = OneStepStats::empty(n);
            chunk.iter().for_each(|c| s.add(c));
            s
        })
        .reduce(|| OneStepStats::empty(n), |a, b| a.merge(&b))
}

pub fn collect_stats(dataset: &CascadeDataset) -> Result<OneStepStats> {
    collect_stats_slice(dataset.n(), &dataset.cascades)
}

/// Statistics of an arbitrary run of cascades, e.g. a prefix of a dataset.
pub fn collect_stats_slice(n: usize, cascades: &[Cascade]) -> Result<OneStepStats> {
    if cascades.is_empty() {
        return Err(Error::InvalidArgument("need at least one cascade".into()));
    }
    if let Some(c) = cascades.iter().find(|c| c.n() != n) {
        return Err(Error::InvalidArgument(format!("cascade over {} nodes, expected {n}", c.n())));
    }
    Ok(collect_slice(n, cascades))
}

/// Streams a dataset file in bounded batches; memory stays `O(n²)` plus one
/// batch.
pub fn collect_stats_streaming<R: BufRead>(reader: DatasetReader<R>) -> Result<OneStepStats> {
    const BATCH: usize = 1 << 16;
    let n = reader.header().n;
    let mut total = OneStepStats::empty(n);
    let mut batch = Vec::with_capacity(BATCH);
    for cascade in reader {
        batch.push(cascade?);
        if batch.len() == BATCH {
            total = total.merge(&collect_slice(n, &batch));
            batch.clear();
        }
    }
    if !batch.is_empty() {
        total = total.merge(&collect_slice(n, &batch));
    }
    if total.t == 0 {
        return Err(Error::InvalidArgument("need at least one cascade".into()));
    }
    Ok(total)
}

/// The three first-step quantities the estimators consume.
pub trait Marginals {
    fn n(&self) -> usize;
    fn q(&self, u: usize) -> f64;
    fn ap(&self, v: usize) -> f64;
    fn ap_given_not(&self, u: usize, v: usize) -> Option<f64>;
}

impl Marginals for OneStepStats {
    fn n(&self) -> usize {
        self.n
    }
    fn q(&self, u: usize) -> f64 {
        self.q_hat(u)
    }
    fn ap(&self, v: usize) -> f64 {
        self.ap_hat(v)
    }
    fn ap_given_not(&self, u: usize, v: usize) -> Option<f64> {
        self.ap_hat_given_not(u, v)
    }
}

/// Exact `q`, `ap(v)` and `ap(v|ū)` of a known instance: the limit of
/// [`OneStepStats`] as `t → ∞`.
#[derive(Debug, Clone)]
pub struct PopulationMarginals {
    n: usize,
    q: Vec<f64>,
    ap: Vec<f64>,
    ap_not: Vec<f64>,
}

impl PopulationMarginals {
    pub fn exact(graph: &Graph, dist: &SeedDistribution) -> Result<Self> {
        let n = graph.n();
        let ap = (0..n).map(|v| oracle::exact_ap(graph, dist, v)).collect::<Result<Vec<_>>>()?;
        let mut ap_not = vec![0.0; n * n];
        for u in 0..n {
            for v in (0..n).filter(|&v| v != u) {
                ap_not[u * n + v] = oracle::exact_ap_given(graph, dist, v, u, false)?;
            }
        }
        Ok(PopulationMarginals { n, q: dist.probs().to_vec(), ap, ap_not })
    }
}

impl Marginals for PopulationMarginals {
    fn n(&self) -> usize {
        self.n
    }
    fn q(&self, u: usize) -> f64 {
        self.q[u]
    }
    fn ap(&self, v: usize) -> f64 {
        self.ap[v]
    }
    fn ap_given_not(&self, u: usize, v: usize) -> Option<f64> {
        Some(self.ap_not[u * self.n + v])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Flag {
    Ok,
    ClampedLow,
    ClampedHigh,
    UndefinedDenominator,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Ok => "OK",
            Flag::ClampedLow => "CLAMPED_LOW",
            Flag::ClampedHigh => "CLAMPED_HIGH",
            Flag::UndefinedDenominator => "UNDEFINED_DENOMINATOR",
        }
    }
}

/// Estimated parameter matrix with one flag per ordered pair; diagonal flags
/// are `None` since self-loops are never estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub model: Model,
    pub n: usize,
    pub param_hat: Vec<f64>,
    pub flags: Vec<Option<Flag>>,
}

fn clamp(raw: f64) -> (f64, Flag) {
    if raw < 0.0 {
        (0.0, Flag::ClampedLow)
    } else if raw > 1.0 {
        (1.0, Flag::ClampedHigh)
    } else {
        (raw, Flag::Ok)
    }
}

fn estimate_pair(model: Model, m: &impl Marginals, u: usize, v: usize) -> (f64, Flag) {
    let undefined = (0.0, Flag::UndefinedDenominator);
    let qu = m.q(u);
    let Some(apn) = m.ap_given_not(u, v) else {
        return undefined;
    };
    let den = match model {
        Model::Ic if qu > 0.0 && apn < 1.0 => qu * (1.0 - apn),
        Model::Lt if qu > 0.0 && m.q(v) < 1.0 => qu * (1.0 - m.q(v)),
        _ => return undefined,
    };
    clamp((m.ap(v) - apn) / den)
}

/// Applies the closed-form estimator of `model` to every ordered pair `u ≠ v`.
pub fn estimate_from(model: Model, m: &impl Marginals) -> Estimate {
    let n = m.n();
    let mut param_hat = vec![0.0; n * n];
    let mut flags = vec![None; n * n];
    for u in 0..n {
        for v in (0..n).filter(|&v| v != u) {
            let (p, f) = estimate_pair(model, m, u, v);
            param_hat[u * n + v] = p;
            flags[u * n + v] = Some(f);
        }
    }
    Estimate { model, n, param_hat, flags }
}

impl Estimate {
    pub fn param(&self, u: usize, v: usize) -> f64 {
        self.param_hat[u * self.n + v]
    }

    pub fn flag(&self, u: usize, v: usize) -> Option<Flag> {
        self.flags[u * self.n + v]
    }

    /// Largest `|p̂_uv - p_uv|` over all ordered pairs.
    pub fn max_error(&self, truth: &Graph) -> f64 {
        self.errors(truth).fold(0.0, f64::max)
    }

    pub fn l1_error(&self, truth: &Graph) -> f64 {
        self.errors(truth).sum()
    }

    fn errors<'a>(&'a self, truth: &'a Graph) -> impl Iterator<Item = f64> + 'a {
        assert_eq!(truth.n(), self.n, "comparing estimates over different node sets");
        self.param_hat.iter().zip(truth.param_matrix()).map(|(a, b)| (a - b).abs())
    }

    pub fn count(&self, flag: Flag) -> usize {
        self.flags.iter().filter(|f| **f == Some(flag)).count()
    }
}

/// Output of the edge estimators: the estimate plus the statistics it came
/// from and the accuracy the caller was aiming for.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub estimate: Estimate,
    pub stats: OneStepStats,
    pub target_accuracy: Option<f64>,
}

pub fn estimate_edge_probabilities_ic(
    stats: &OneStepStats,
    target_accuracy: Option<f64>,
) -> EstimationReport {
    EstimationReport {
        estimate: estimate_from(Model::Ic, stats),
        stats: stats.clone(),
        target_accuracy,
    }
}

pub fn estimate_edge_weights_lt(stats: &OneStepStats, target_accuracy: Option<f64>) -> EstimationReport {
    EstimationReport {
        estimate: estimate_from(Model::Lt, stats),
        stats: stats.clone(),
        target_accuracy,
    }
}

pub fn estimate(model: Model, stats: &OneStepStats, target_accuracy: Option<f64>) -> EstimationReport {
    match model {
        Model::Ic => estimate_edge_probabilities_ic(stats, target_accuracy),
        Model::Lt => estimate_edge_weights_lt(stats, target_accuracy),
    }
}

#[derive(Serialize)]
struct ReportJson<'a> {
    model: Model,
    n: usize,
    t: u64,
    target_accuracy: Option<f64>,
    param_hat: Vec<&'a [f64]>,
    flags: Vec<&'a [Option<Flag>]>,
    stats: &'a OneStepStats,
    flag_counts: FlagCounts,
}

#[derive(Serialize)]
struct FlagCounts {
    clamped_low: usize,
    clamped_high: usize,
    undefined_denominator: usize,
}

impl EstimationReport {
    pub fn model(&self) -> Model {
        self.estimate.model
    }

    pub fn n(&self) -> usize {
        self.estimate.n
    }

    pub fn param(&self, u: usize, v: usize) -> f64 {
        self.estimate.param(u, v)
    }

    pub fn flag(&self, u: usize, v: usize) -> Option<Flag> {
        self.estimate.flag(u, v)
    }

    pub fn to_json(&self) -> String {
        let n = self.n().max(1);
        let e = &self.estimate;
        let doc = ReportJson {
            model: e.model,
            n: e.n,
            t: self.stats.t,
            target_accuracy: self.target_accuracy,
            param_hat: e.param_hat.chunks(n).collect(),
            flags: e.flags.chunks(n).collect(),
            stats: &self.stats,
            flag_counts: FlagCounts {
                clamped_low: e.count(Flag::ClampedLow),
                clamped_high: e.count(Flag::ClampedHigh),
                undefined_denominator: e.count(Flag::UndefinedDenominator),
            },
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    /// One `u,v,param_hat,flag` row per ordered pair `u ≠ v`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,v,param_hat,flag\n");
        let n = self.n();
        for u in 0..n {
            for v in (0..n).filter(|&v| v != u) {
                let flag = self.flag(u, v).map_or("", Flag::as_str);
                let _ = writeln!(out, "{u},{v},{},{flag}", self.param(u, v));
            }
        }
        out
    }

    /// Surrogate graph on every pair with a nonzero estimate. Fails for LT
    /// when estimates break normalization; rescale first.
    pub fn to_graph(&self) -> Result<Graph> {
        Graph::from_matrix(self.n(), self.model(), &self.estimate.param_hat)
    }
}

/// `Ê = {(u,v) : p̂_uv > β/2}`.
pub fn recover_structure(report: &EstimationReport, beta: f64) -> Result<Vec<(usize, usize)>> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("beta = {beta} outside (0,1)")));
    }
    match report.target_accuracy {
        None => {
            return Err(Error::InvalidArgument(
                "structure recovery needs a report with a target accuracy".into(),
            ))
        }
        Some(acc) if acc > beta / 2.0 => {
            return Err(Error::InvalidArgument(format!(
                "target accuracy {acc} exceeds beta/2 = {}",
                beta / 2.0
            )))
        }
        Some(_) => {}
    }
    let n = report.n();
    Ok((0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v && report.param(u, v) > beta / 2.0)
        .collect())
}

/// LT weights divided by `1 + ε/2`, with the normalization check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledWeights {
    pub n: usize,
    pub epsilon: f64,
    pub max_in_degree_bound: usize,
    pub weights: Vec<f64>,
    /// `Σ_u w'_uv` per node.
    pub in_sums: Vec<f64>,
    /// Nodes whose incoming weights exceed one.
    pub violations: Vec<usize>,
    /// The report's accuracy target was at most `ε/(2D)`, which guarantees
    /// normalization whenever that accuracy was actually achieved.
    pub guaranteed: bool,
}

impl RescaledWeights {
    pub fn to_graph(&self) -> Result<Graph> {
        if !self.violations.is_empty() {
            return Err(Error::Normalization(self.violations.clone()));
        }
        Graph::from_matrix(self.n, Model::Lt, &self.weights)
    }
}

/// `w'_uv = ŵ_uv / (1 + ε/2)`. `d` bounds the true maximum in-degree. Since the
/// true in-neighbors are unknown, sums run over every `u`.
pub fn rescale_lt(report: &EstimationReport, epsilon: f64, d: usize) -> Result<RescaledWeights> {
    if report.model() != Model::Lt {
        return Err(Error::ModelMismatch { expected: Model::Lt, found: report.model() });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
    }
    let n = report.n();
    let scale = 1.0 + epsilon / 2.0;
    let weights: Vec<f64> = report.estimate.param_hat.iter().map(|w| w / scale).collect();
    let in_sums: Vec<f64> = (0..n).map(|v| (0..n).map(|u| weights[u * n + v]).sum()).collect();
    let violations = (0..n).filter(|&v| in_sums[v] > 1.0 + NORMALIZATION_TOLERANCE).collect();
    let guaranteed = report
        .target_accuracy
        .is_some_and(|a| d > 0 && a <= epsilon / (2.0 * d as f64));
    Ok(RescaledWeights { n, epsilon, max_in_degree_bound: d, weights, in_sums, violations, guaranteed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionSet {
    /// `ap(v) ≤ 1-α` and `γ ≤ q_u ≤ 1-γ`.
    IcEstimation,
    /// `Σ q_u ≤ ck` and `γ ≤ q_u ≤ 1-γ`.
    IcSeedBudget,
    /// `γ ≤ q_u ≤ 1-γ`.
    LtEstimation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeCheck {
    pub node: usize,
    pub q_hat: f64,
    pub q_se: f64,
    pub q_ok: bool,
    pub ap_hat: f64,
    pub ap_se: f64,
    /// Present only when the assumption set constrains `ap`.
    pub ap_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub which: AssumptionSet,
    pub slack_se: f64,
    pub nodes: Vec<NodeCheck>,
    pub sum_q_hat: f64,
    pub sum_q_se: f64,
    pub sum_ok: Option<bool>,
    /// Largest `α` not rejected by the data.
    pub alpha_max: f64,
    /// Largest `γ` not rejected by the data.
    pub gamma_max: f64,
    /// Smallest `c` not rejected by the data.
    pub c_min: f64,
    pub passed: bool,
}

pub const ASSUMPTION_SLACK_SE: f64 = 3.0;

fn binomial_se(p: f64, t: u64) -> f64 {
    (p * (1.0 - p) / t as f64).sqrt()
}

/// Tests the chosen assumption set against empirical frequencies. A condition
/// fails only when it is violated by more than three standard errors.
pub fn check_assumptions(
    stats: &OneStepStats,
    params: &AssumptionParams,
    which: AssumptionSet,
) -> Result<AssumptionReport> {
    if stats.t == 0 {
        return Err(Error::InvalidArgument("statistics hold no cascades".into()));
    }
    let z = ASSUMPTION_SLACK_SE;
    let n = stats.n;
    let mut nodes = Vec::with_capacity(n);
    let (mut alpha_max, mut gamma_max) = (1.0f64, 0.5f64);
    for u in 0..n {
        let (q, ap) = (stats.q_hat(u), stats.ap_hat(u));
        let (q_se, ap_se) = (binomial_se(q, stats.t), binomial_se(ap, stats.t));
        let q_ok = q + z * q_se >= params.gamma && q - z * q_se <= 1.0 - params.gamma;
        let ap_ok = (which == AssumptionSet::IcEstimation).then_some(ap - z * ap_se <= 1.0 - params.alpha);
        alpha_max = alpha_max.min(1.0 - (ap - z * ap_se).max(0.0));
        gamma_max = gamma_max.min((q + z * q_se).min(1.0 - q + z * q_se));
        nodes.push(NodeCheck { node: u, q_hat: q, q_se, q_ok, ap_hat: ap, ap_se, ap_ok });
    }
    let sum_q_hat: f64 = (0..n).map(|u| stats.q_hat(u)).sum();
    let sum_q_se = nodes.iter().map(|c| c.q_se * c.q_se).sum::<f64>().sqrt();
    let sum_ok = (which == AssumptionSet::IcSeedBudget)
        .then_some(sum_q_hat - z * sum_q_se <= params.c * params.k as f64);
    let c_min = ((sum_q_hat - z * sum_q_se).max(0.0)) / params.k.max(1) as f64;
    let passed = nodes.iter().all(|c| c.q_ok && c.ap_ok != Some(false)) && sum_ok != Some(false);
    Ok(AssumptionReport {
        which,
        slack_se: z,
        nodes,
        sum_q_hat,
        sum_q_se,
        sum_ok,
        alpha_max,
        gamma_max: gamma_max.max(0.0),
        c_min,
        passed,
    })
}

/// The sample-size bounds that come with each guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSizeTask {
    /// IC edge probabilities to accuracy `ε`.
    IcEstimation,
    /// IC structure recovery at threshold `β`.
    IcStructure,
    /// IC influence maximization with estimation accuracy `εk/(2n³)`.
    ImsIcA1,
    /// IC influence maximization with the seed-budget assumption (both the
    /// coin-flip and the union variant).
    ImsIcA2,
    /// LT edge weights to accuracy `ε`.
    LtEstimation,
    /// LT weights accurate enough for the rescaled normalization guarantee.
    LtRescaled,
    /// LT influence maximization.
    ImsLt,
}

impl SampleSizeTask {
    pub const ALL: [SampleSizeTask; 7] = [
        SampleSizeTask::IcEstimation,
        SampleSizeTask::IcStructure,
        SampleSizeTask::ImsIcA1,
        SampleSizeTask::ImsIcA2,
        SampleSizeTask::LtEstimation,
        SampleSizeTask::LtRescaled,
        SampleSizeTask::ImsLt,
    ];
}

impl std::str::FromStr for SampleSizeTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown sample-size task '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSize {
    pub task: SampleSizeTask,
    /// Unrounded bound.
    pub value: f64,
    /// `ceil(value)`, saturating at `u64::MAX`.
    pub count: u64,
    /// Accuracy of the intermediate estimates of `q`, `ap` and `ap(·|ū)`.
    pub eta: f64,
}

/// Evaluates the bound without range checks, so formal plug-ins such as
/// `ε = δ = α = γ = 1` are allowed.
pub fn theorem_sample_size(task: SampleSizeTask, p: &AssumptionParams, n: usize, d: usize) -> SampleSize {
    let (eps, delta, alpha, gamma, beta) = (p.epsilon, p.delta, p.alpha, p.gamma, p.beta);
    let k = p.k as f64;
    let nf = n as f64;
    let df = d as f64;
    let ln = |x: f64| x.ln();
    let (value, eta) = match task {
        SampleSizeTask::IcEstimation => (
            256.0 / (eps.powi(2) * alpha.powi(2) * gamma.powi(3)) * ln(12.0 * nf / delta),
            eps * alpha * gamma / 4.0,
        ),
        SampleSizeTask::IcStructure => (
            1024.0 / (alpha.powi(2) * beta.powi(2) * gamma.powi(3)) * ln(4.0 * nf / delta),
            (beta / 2.0) * alpha * gamma / 4.0,
        ),
        SampleSizeTask::ImsIcA1 => (
            1024.0 / (eps.powi(2) * alpha.powi(2) * gamma.powi(3)) * nf.powi(6) / k.powi(2)
                * ln(12.0 * nf / delta),
            (eps * k / (2.0 * nf.powi(3))) * alpha * gamma / 4.0,
        ),
        SampleSizeTask::ImsIcA2 => (
            36864.0 / (eps.powi(2) * delta.powi(2) * gamma.powi(3)) * nf.powi(8) / k.powi(2)
                * ln(36.0 * nf / delta)
                + 72.0 * nf.powi(2) / delta.powi(2) * ln(12.0 * nf / delta),
            (eps * k / (2.0 * nf.powi(3))) * (delta / (6.0 * nf)) * gamma / 4.0,
        ),
        SampleSizeTask::LtEstimation => (
            256.0 / (eps.powi(2) * gamma.powi(6)) * ln(12.0 * nf / delta),
            eps * gamma.powi(2) / 4.0,
        ),
        SampleSizeTask::LtRescaled => (
            1024.0 / (eps.powi(2) * gamma.powi(6)) * df.powi(2) * ln(12.0 * nf / delta),
            (eps / (2.0 * df)) * gamma.powi(2) / 4.0,
        ),
        SampleSizeTask::ImsLt => (
            4096.0 / (eps.powi(2) * gamma.powi(3)) * df.powi(2) * nf.powi(6) / k.powi(2)
                * ln(12.0 * nf / delta),
            (eps * k / (2.0 * df * nf.powi(3))) * gamma.powi(2) / 4.0,
        ),
    };
    let ceil = value.ceil();
    let count = if ceil >= u64::MAX as f64 { u64::MAX } else { ceil.max(0.0) as u64 };
    SampleSize { task, value, count, eta }
}

/// [`theorem_sample_size`] with every parameter range checked.
pub fn sample_size(task: SampleSizeTask, p: &AssumptionParams, n: usize, d: usize) -> Result<SampleSize> {
    p.validate(Some(n))?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let needs_d = matches!(task, SampleSizeTask::LtRescaled | SampleSizeTask::ImsLt);
    if needs_d && (d == 0 || d >= n.max(2)) {
        return Err(Error::InvalidArgument(format!("in-degree bound D = {d} must lie in [1, n-1]")));
    }
    Ok(theorem_sample_size(task, p, n, d))
}

/// Two-step deltas `t' = ⌈72n²/δ² · ln(12n/δ)⌉` used to estimate `ap(v)` before
/// partitioning.
pub fn partition_sample_size(n: usize, delta: f64) -> u64 {
    let nf = n as f64;
    (72.0 * nf * nf / (delta * delta) * (12.0 * nf / delta).ln()).ceil() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_dataset;
    use crate::graph::random_graph;

    fn cascade(n: usize, seeds: Vec<usize>, step1: Vec<usize>) -> Cascade {
        let mut deltas = vec![seeds];
        if !step1.is_empty() {
            deltas.push(step1);
        }
        let len = deltas.len();
        Cascade::from_deltas(n, deltas, len).unwrap()
    }

    #[test]
    fn counting() {
        let cs = vec![
            cascade(3, vec![0], vec![1]),
            cascade(3, vec![0], vec![1]),
            cascade(3, vec![0, 2], vec![]),
            cascade(3, vec![0], vec![2]),
        ];
        let s = collect_stats_slice(3, &cs).unwrap();
        assert_eq!(s.t, 4);
        assert_eq!(s.q_hat(0), 1.0);
        assert_eq!(s.t_ubar[0], 0);
        assert_eq!(s.ap_hat(1), 0.5);
        assert_eq!(s.ap_hat(0), 1.0);
        assert_eq!(s.ap_hat_given_not(0, 1), None);
        assert_eq!(s.t_ubar_v(2, 1), 2);
        assert_eq!(s.ap_hat_given_not(2, 1), Some(2.0 / 3.0));
        let cs = [cascade(2, vec![], vec![]), cascade(2, vec![1], vec![]), cascade(2, vec![1], vec![]), cascade(2, vec![1], vec![])];
        assert_eq!(collect_stats_slice(2, &cs).unwrap().ap_hat(1), 0.75);
        assert!(collect_stats_slice(2, &[]).is_err());
    }

    #[test]
    fn invariants_and_sharding() {
        let g = random_graph(7, 0.4, (0.2, 0.9), Model::Ic, 3).unwrap();
        let d = SeedDistribution::uniform(7, 0.3).unwrap();
        let ds = generate_dataset(&g, &d, 10_000, 5).unwrap();
        let s = collect_stats(&ds).unwrap();
        let mut seq = OneStepStats::empty(7);
        ds.cascades.iter().for_each(|c| seq.add(c));
        assert_eq!(s, seq);
        let streamed = collect_stats_streaming(DatasetReader::new(&ds.to_bytes()[..]).unwrap()).unwrap();
        assert_eq!(s, streamed);
        for u in 0..7 {
            assert_eq!(s.t_u[u] + s.t_ubar[u], s.t);
            for v in 0..7 {
                assert!(s.t_ubar_v(u, v) <= s.t_ubar[u].min(s.t_v[v]));
            }
        }
    }

    #[test]
    fn q_hat_concentrates() {
        // Three binomial standard errors.
        let g = Graph::new(4, Model::Ic, &[]).unwrap();
        let d = SeedDistribution::new(vec![0.1, 0.3, 0.5, 0.9]).unwrap();
        let s = collect_stats(&generate_dataset(&g, &d, 20_000, 2).unwrap()).unwrap();
        for u in 0..4 {
            let q = d.q(u);
            assert!((s.q_hat(u) - q).abs() <= 3.0 * (q * (1.0 - q) / 2e4).sqrt());
        }
    }

    #[test]
    fn closed_form_examples() {
        let g = Graph::new(2, Model::Ic, &[(0, 1, 0.5)]).unwrap();
        let d = SeedDistribution::new(vec![0.5, 0.0]).unwrap();
        let m = PopulationMarginals::exact(&g, &d).unwrap();
        assert_eq!(m.ap(1), 0.25);
        assert_eq!(m.ap_given_not(0, 1), Some(0.0));
        let e = estimate_from(Model::Ic, &m);
        assert_eq!(e.param(0, 1), 0.5);
        assert_eq!(e.flag(0, 0), None);

        let g = Graph::new(2, Model::Lt, &[(0, 1, 0.4)]).unwrap();
        let d = SeedDistribution::new(vec![0.5, 0.2]).unwrap();
        let e = estimate_from(Model::Lt, &PopulationMarginals::exact(&g, &d).unwrap());
        assert!((e.param(0, 1) - 0.4).abs() < 1e-15);
    }

    struct Fixed {
        q: f64,
        qv: f64,
        ap: f64,
        apn: Option<f64>,
    }

    impl Marginals for Fixed {
        fn n(&self) -> usize {
            2
        }
        fn q(&self, u: usize) -> f64 {
            if u == 0 {
                self.q
            } else {
                self.qv
            }
        }
        fn ap(&self, _: usize) -> f64 {
            self.ap
        }
        fn ap_given_not(&self, _: usize, _: usize) -> Option<f64> {
            self.apn
        }
    }

    #[test]
    fn flags() {
        let f = |q, qv, ap, apn, model| {
            let e = estimate_from(model, &Fixed { q, qv, ap, apn });
            (e.param(0, 1), e.flag(0, 1).unwrap())
        };
        assert_eq!(f(0.5, 0.2, 0.3, Some(0.3), Model::Ic), (0.0, Flag::Ok));
        assert_eq!(f(0.5, 0.2, 0.3, Some(0.3), Model::Lt), (0.0, Flag::Ok));
        assert_eq!(f(0.5, 0.2, 0.2, Some(0.3), Model::Ic), (0.0, Flag::ClampedLow));
        assert_eq!(f(0.1, 0.2, 0.9, Some(0.1), Model::Ic), (1.0, Flag::ClampedHigh));
        assert_eq!(f(0.0, 0.2, 0.9, Some(0.1), Model::Ic), (0.0, Flag::UndefinedDenominator));
        assert_eq!(f(0.5, 0.2, 0.9, None, Model::Ic), (0.0, Flag::UndefinedDenominator));
        assert_eq!(f(0.5, 0.2, 1.0, Some(1.0), Model::Ic), (0.0, Flag::UndefinedDenominator));
        assert_eq!(f(0.5, 1.0, 1.0, Some(1.0), Model::Lt), (0.0, Flag::UndefinedDenominator));
        assert_eq!(f(0.5, 0.9, 0.97, Some(0.9), Model::Lt), (1.0, Flag::ClampedHigh));
    }

    fn report_with(params: Vec<f64>, model: Model, acc: Option<f64>) -> EstimationReport {
        let n = (params.len() as f64).sqrt() as usize;
        let flags = (0..n * n).map(|i| (i / n != i % n).then_some(Flag::Ok)).collect();
        EstimationReport {
            estimate: Estimate { model, n, param_hat: params, flags },
            stats: OneStepStats::empty(n),
            target_accuracy: acc,
        }
    }

    #[test]
    fn structure_thresholds() {
        let r = report_with(vec![0.0; 4], Model::Ic, Some(0.1));
        assert!(recover_structure(&r, 0.3).unwrap().is_empty());
        let r = report_with(vec![0.0, 0.3, 0.15, 0.0], Model::Ic, Some(0.15));
        assert_eq!(recover_structure(&r, 0.3).unwrap(), vec![(0, 1)]);
        assert!(recover_structure(&r, 0.2).is_err());
        let r = report_with(vec![0.0; 4], Model::Ic, None);
        assert!(recover_structure(&r, 0.3).is_err());
    }

    #[test]
    fn rescaling() {
        let r = report_with(vec![0.0; 4], Model::Lt, Some(0.01));
        assert!(rescale_lt(&r, 0.02, 1).unwrap().weights.iter().all(|&w| w == 0.0));
        let r = report_with(vec![0.0, 0.505, 0.0, 0.0], Model::Lt, Some(0.01));
        let w = rescale_lt(&r, 0.02, 1).unwrap();
        assert!((w.weights[1] - 0.5).abs() < 1e-15);
        assert!(w.guaranteed && w.violations.is_empty());
        let r = report_with(vec![0.0, 1.0, 1.0, 0.0], Model::Lt, None);
        assert!(rescale_lt(&r, 0.0, 1).is_err());
        let r = report_with(vec![0.0, 0.1, 0.0, 0.0], Model::Ic, None);
        assert!(matches!(rescale_lt(&r, 0.1, 1), Err(Error::ModelMismatch { .. })));
    }

    #[test]
    fn exact_lt_report_rescales_within_epsilon() {
        for seed in 0..30 {
            let g = random_graph(6, 0.5, (0.05, 1.0), Model::Lt, seed).unwrap();
            let d = SeedDistribution::uniform(6, 0.4).unwrap();
            let mut r = report_with(vec![0.0; 36], Model::Lt, Some(0.0));
            r.estimate = estimate_from(Model::Lt, &PopulationMarginals::exact(&g, &d).unwrap());
            let eps = 0.1;
            let w = rescale_lt(&r, eps, 5).unwrap();
            assert!(w.violations.is_empty());
            for (a, b) in w.weights.iter().zip(g.param_matrix()) {
                assert!((a - b).abs() <= eps);
            }
        }
    }

    #[test]
    fn assumption_examples() {
        let mut s = OneStepStats::empty(2);
        s.t = 100;
        s.t_u = vec![50, 50];
        s.t_ubar = vec![50, 50];
        s.t_v = vec![100, 60];
        let p = AssumptionParams { gamma: 0.3, alpha: 0.1, ..Default::default() };
        let r = check_assumptions(&s, &p, AssumptionSet::LtEstimation).unwrap();
        assert!(r.passed && r.nodes.iter().all(|c| c.q_ok));
        let r = check_assumptions(&s, &p, AssumptionSet::IcEstimation).unwrap();
        assert_eq!(r.nodes[0].ap_ok, Some(false));
        assert_eq!(r.nodes[1].ap_ok, Some(true));
        assert!(!r.passed);
        assert_eq!(r.alpha_max, 0.0);
        let p = AssumptionParams { c: 0.5, k: 1, ..p };
        let r = check_assumptions(&s, &p, AssumptionSet::IcSeedBudget).unwrap();
        assert_eq!(r.sum_ok, Some(false));
    }

    #[test]
    fn sample_size_examples() {
        let one = AssumptionParams { epsilon: 1.0, delta: 1.0, alpha: 1.0, gamma: 1.0, ..Default::default() };
        let s = theorem_sample_size(SampleSizeTask::IcEstimation, &one, 6, 5);
        assert_eq!(s.count, (256.0 * 72f64.ln()).ceil() as u64);
        assert!(sample_size(SampleSizeTask::IcEstimation, &one, 6, 5).is_err());

        let p = AssumptionParams { epsilon: 0.5, alpha: 0.25, gamma: 0.3, delta: 0.1, ..Default::default() };
        let a = theorem_sample_size(SampleSizeTask::IcEstimation, &p, 6, 5);
        let b = theorem_sample_size(SampleSizeTask::IcEstimation, &AssumptionParams { epsilon: 0.25, ..p }, 6, 5);
        assert!((b.value / a.value - 4.0).abs() < 1e-9);
        assert!((a.eta - 0.5 * 0.25 * 0.3 / 4.0).abs() < 1e-15);
        assert!(sample_size(SampleSizeTask::ImsLt, &p, 6, 0).is_err());
        assert_eq!("ims-lt".parse::<SampleSizeTask>().unwrap(), SampleSizeTask::ImsLt);
    }

    #[test]
    fn report_serializations() {
        let r = report_with(vec![0.0, 0.25, 0.5, 0.0], Model::Ic, Some(0.1));
        let csv = r.to_csv();
        assert_eq!(csv, "u,v,param_hat,flag\n0,1,0.25,OK\n1,0,0.5,OK\n");
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["param_hat"][1][0], 0.5);
        assert_eq!(json["flags"][0][0], serde_json::Value::Null);
        assert_eq!(json["flags"][0][1], "OK");
    }
}
