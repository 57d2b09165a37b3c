//! End-to-end influence maximization from cascade samples.
//!
//! Each pipeline learns a surrogate graph from the cascades and hands it to an
//! [`ImAlgorithm`]. The IC variants that need no assumption on the network
//! first split nodes by how often they are active at step one: nodes that are
//! almost always active get every incoming edge forced to probability one, and
//! the first cascade's seed set competes with the algorithm's answer.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::CascadeDataset;
use crate::error::{Error, Result};
use crate::graph::{AssumptionParams, Graph, Model};
use crate::inference::{
    self, collect_stats_slice, estimate_edge_probabilities_ic, estimate_edge_weights_lt, rescale_lt,
    EstimationReport, Flag, SampleSizeTask,
};
use crate::influence::{ImAlgorithm, SeedSet};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    #[serde(rename = "IC_A1")]
    IcA1,
    #[serde(rename = "IC_A2")]
    IcA2,
    #[serde(rename = "IC_A2_EPS")]
    IcA2Eps,
    #[serde(rename = "LT")]
    Lt,
}

impl Pipeline {
    pub fn model(self) -> Model {
        match self {
            Pipeline::Lt => Model::Lt,
            _ => Model::Ic,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::IcA1 => "IC_A1",
            Pipeline::IcA2 => "IC_A2",
            Pipeline::IcA2Eps => "IC_A2_EPS",
            Pipeline::Lt => "LT",
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "IC_A1" => Ok(Pipeline::IcA1),
            "IC_A2" => Ok(Pipeline::IcA2),
            "IC_A2_EPS" => Ok(Pipeline::IcA2Eps),
            "LT" => Ok(Pipeline::Lt),
            _ => Err(Error::InvalidArgument(format!("unknown pipeline '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    T1,
    T2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImsOptions {
    /// Largest tolerated fraction of estimated pairs with an undefined
    /// denominator.
    pub degeneracy_limit: f64,
    /// When given, diagnostics report `t` against the matching sample-size
    /// bound.
    pub assumptions: Option<AssumptionParams>,
}

impl Default for ImsOptions {
    fn default() -> Self {
        ImsOptions { degeneracy_limit: 0.5, assumptions: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub algorithm: String,
    pub t: usize,
    /// Cascades the edge estimator actually used.
    pub t_estimation: usize,
    pub accuracy_target: f64,
    pub undefined_pairs: usize,
    pub clamped_pairs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_prime: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v1_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v2_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v2: Option<Vec<usize>>,
    /// `δ/(6n)`, the `α` the estimator is implicitly asked to work with.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implied_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1_budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsampled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub union_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_budget: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rescale_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_degree_bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theoretical_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImsResult {
    pub chosen: SeedSet,
    pub surrogate_graph_digest: String,
    pub pipeline: Pipeline,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub surrogate: Graph,
}

impl ImsResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

fn check_model(dataset: &CascadeDataset, expected: Model) -> Result<()> {
    if dataset.model() != expected {
        return Err(Error::ModelMismatch { expected, found: dataset.model() });
    }
    Ok(())
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside [1, {n}]")));
    }
    Ok(())
}

fn check_open(name: &str, x: f64, hi: f64) -> Result<()> {
    if !(x > 0.0 && x < hi) {
        return Err(Error::InvalidArgument(format!("{name} = {x} outside (0,{hi})")));
    }
    Ok(())
}

/// Counts undefined and clamped pairs `(u,v)` with `v` in `targets`, and
/// fails when undefined ones exceed the configured fraction.
fn degeneracy(report: &EstimationReport, targets: &[usize], opts: &ImsOptions, diag: &mut Diagnostics) -> Result<()> {
    let n = report.n();
    let (mut undefined, mut clamped, mut total) = (0, 0, 0);
    for &v in targets {
        for u in (0..n).filter(|&u| u != v) {
            total += 1;
            match report.flag(u, v) {
                Some(Flag::UndefinedDenominator) => undefined += 1,
                Some(Flag::ClampedLow | Flag::ClampedHigh) => clamped += 1,
                _ => {}
            }
        }
    }
    diag.undefined_pairs = undefined;
    diag.clamped_pairs = clamped;
    if total > 0 && undefined as f64 > opts.degeneracy_limit * total as f64 {
        return Err(Error::Degenerate { undefined, total, limit: opts.degeneracy_limit });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn with_bound(diag: &mut Diagnostics, opts: &ImsOptions, task: SampleSizeTask, n: usize, d: usize, eps: f64, delta: Option<f64>, k: usize) {
    if let Some(p) = opts.assumptions {
        let p = AssumptionParams { epsilon: eps, delta: delta.unwrap_or(p.delta), k, ..p };
        let bound = inference::theorem_sample_size(task, &p, n, d).value;
        diag.theoretical_t = Some(bound);
        diag.t_ratio = Some(diag.t as f64 / bound);
    }
}

/// IC pipeline under the assumption `ap(v) ≤ 1-α`: estimate every edge to
/// accuracy `εk/(2n³)` and optimize on the estimate.
pub fn ims_ic_a1(
    dataset: &CascadeDataset,
    k: usize,
    epsilon: f64,
    algorithm: &dyn ImAlgorithm,
    opts: &ImsOptions,
) -> Result<ImsResult> {
    check_model(dataset, Model::Ic)?;
    let n = dataset.n();
    check_k(n, k)?;
    check_open("epsilon", epsilon, 1.0)?;
    let accuracy = epsilon * k as f64 / (2.0 * (n as f64).powi(3));
    let stats = collect_stats_slice(n, &dataset.cascades)?;
    let report = estimate_edge_probabilities_ic(&stats, Some(accuracy));
    let mut diag = Diagnostics {
        algorithm: algorithm.name().into(),
        t: dataset.t(),
        t_estimation: dataset.t(),
        accuracy_target: accuracy,
        ..Default::default()
    };
    degeneracy(&report, &(0..n).collect::<Vec<_>>(), opts, &mut diag)?;
    with_bound(&mut diag, opts, SampleSizeTask::ImsIcA1, n, 0, epsilon, None, k);
    let surrogate = report.to_graph()?;
    let chosen = algorithm.select(&surrogate, k)?;
    Ok(ImsResult {
        chosen,
        surrogate_graph_digest: surrogate.digest(),
        pipeline: Pipeline::IcA1,
        diagnostics: diag,
        surrogate,
    })
}

/// Steps shared by both seed-budget pipelines: partition on the first `t'`
/// cascades, force edges into `V2`, estimate the rest from the remaining
/// cascades.
fn partitioned_surrogate(
    dataset: &CascadeDataset,
    k: usize,
    epsilon: f64,
    delta: f64,
    t_prime: usize,
    algorithm: &dyn ImAlgorithm,
    opts: &ImsOptions,
) -> Result<(Graph, Diagnostics)> {
    check_model(dataset, Model::Ic)?;
    let n = dataset.n();
    check_k(n, k)?;
    check_open("delta", delta, 1.0)?;
    let t = dataset.t();
    if t_prime == 0 || t_prime >= t {
        return Err(Error::InvalidArgument(format!("t' = {t_prime} must lie in [1, t) with t = {t}")));
    }
    let threshold = 1.0 - delta / (4.0 * n as f64);
    let prefix = collect_stats_slice(n, &dataset.cascades[..t_prime])?;
    let v2: Vec<usize> = (0..n).filter(|&v| prefix.ap_hat(v) >= threshold).collect();
    let v1: Vec<usize> = (0..n).filter(|v| !v2.contains(v)).collect();

    let accuracy = epsilon * k as f64 / (2.0 * (n as f64).powi(3));
    let rest = collect_stats_slice(n, &dataset.cascades[t_prime..])?;
    let report = estimate_edge_probabilities_ic(&rest, Some(accuracy));
    let mut diag = Diagnostics {
        algorithm: algorithm.name().into(),
        t,
        t_estimation: t - t_prime,
        accuracy_target: accuracy,
        t_prime: Some(t_prime),
        partition_threshold: Some(threshold),
        v1_size: Some(v1.len()),
        v2_size: Some(v2.len()),
        implied_alpha: Some(delta / (6.0 * n as f64)),
        ..Default::default()
    };
    degeneracy(&report, &v1, opts, &mut diag)?;
    with_bound(&mut diag, opts, SampleSizeTask::ImsIcA2, n, 0, epsilon, Some(delta), k);

    let mut params = report.estimate.param_hat.clone();
    for &v in &v2 {
        for u in (0..n).filter(|&u| u != v) {
            params[u * n + v] = 1.0;
        }
    }
    diag.v2 = Some(v2);
    Ok((Graph::from_matrix(n, Model::Ic, &params)?, diag))
}

/// IC pipeline under `Σ q_u ≤ ck`: a fair coin chooses between the
/// algorithm's answer on the surrogate and the first cascade's seed set,
/// subsampled to `k` nodes if needed.
#[allow(clippy::too_many_arguments)]
pub fn ims_ic_a2(
    dataset: &CascadeDataset,
    k: usize,
    epsilon: f64,
    delta: f64,
    t_prime: usize,
    algorithm: &dyn ImAlgorithm,
    rng_seed: u64,
    opts: &ImsOptions,
) -> Result<ImsResult> {
    check_open("epsilon", epsilon, 1.0)?;
    let (surrogate, mut diag) = partitioned_surrogate(dataset, k, epsilon, delta, t_prime, algorithm, opts)?;
    let t1 = algorithm.select(&surrogate, k)?.nodes;
    let t2 = dataset.cascades[0].seeds().to_vec();
    let mut rng = rng::stream(rng_seed, Domain::Coin, 0);
    let branch = if rng.random_bool(0.5) { Branch::T1 } else { Branch::T2 };
    let picked = match branch {
        Branch::T1 => &t1,
        Branch::T2 => &t2,
    };
    let subsampled = picked.len() > k;
    let nodes = if subsampled {
        index::sample(&mut rng, picked.len(), k).into_iter().map(|i| picked[i]).collect()
    } else {
        picked.clone()
    };
    diag.t2_size = Some(t2.len());
    diag.t1 = Some(t1);
    diag.t2 = Some(t2);
    diag.branch = Some(branch);
    diag.subsampled = Some(subsampled);
    Ok(ImsResult {
        chosen: SeedSet::new(nodes, k),
        surrogate_graph_digest: surrogate.digest(),
        pipeline: Pipeline::IcA2,
        diagnostics: diag,
        surrogate,
    })
}

/// Budget left for the algorithm in the union variant: `⌊(1-2ε)k⌋`.
pub fn union_budget(k: usize, epsilon: f64) -> usize {
    // The small offset keeps exact products such as 0.6·10 from rounding down.
    ((1.0 - 2.0 * epsilon) * k as f64 + 1e-9).floor().max(0.0) as usize
}

/// IC pipeline under `Σ q_u ≤ εk`: returns the algorithm's answer for budget
/// `⌊(1-2ε)k⌋` together with the first cascade's seed set.
pub fn ims_ic_a2_eps(
    dataset: &CascadeDataset,
    k: usize,
    epsilon: f64,
    delta: f64,
    t_prime: usize,
    algorithm: &dyn ImAlgorithm,
    opts: &ImsOptions,
) -> Result<ImsResult> {
    check_open("epsilon", epsilon, 1.0 / 3.0)?;
    let (surrogate, mut diag) = partitioned_surrogate(dataset, k, epsilon, delta, t_prime, algorithm, opts)?;
    let budget = union_budget(k, epsilon);
    let t1 = if budget == 0 { Vec::new() } else { algorithm.select(&surrogate, budget)?.nodes };
    let t2 = dataset.cascades[0].seeds().to_vec();
    let chosen = SeedSet::new(t1.iter().chain(&t2).copied().collect(), k);
    diag.t1_budget = Some(budget);
    diag.t2_size = Some(t2.len());
    diag.union_size = Some(chosen.len());
    diag.within_budget = Some(chosen.within_budget());
    diag.t1 = Some(t1);
    diag.t2 = Some(t2);
    Ok(ImsResult {
        chosen,
        surrogate_graph_digest: surrogate.digest(),
        pipeline: Pipeline::IcA2Eps,
        diagnostics: diag,
        surrogate,
    })
}

/// LT pipeline: estimate weights to accuracy `εk/(2Dn³)`, shrink them by
/// `1 + ε/2` so the surrogate is a valid LT graph, then optimize. `d` bounds
/// the maximum in-degree and defaults to `n - 1`.
pub fn ims_lt(
    dataset: &CascadeDataset,
    k: usize,
    epsilon: f64,
    d: Option<usize>,
    algorithm: &dyn ImAlgorithm,
    opts: &ImsOptions,
) -> Result<ImsResult> {
    check_model(dataset, Model::Lt)?;
    let n = dataset.n();
    check_k(n, k)?;
    check_open("epsilon", epsilon, 1.0)?;
    let d = d.unwrap_or(n.saturating_sub(1)).max(1);
    let accuracy = epsilon * k as f64 / (2.0 * d as f64 * (n as f64).powi(3));
    let stats = collect_stats_slice(n, &dataset.cascades)?;
    let report = estimate_edge_weights_lt(&stats, Some(accuracy));
    let mut diag = Diagnostics {
        algorithm: algorithm.name().into(),
        t: dataset.t(),
        t_estimation: dataset.t(),
        accuracy_target: accuracy,
        rescale_epsilon: Some(epsilon),
        in_degree_bound: Some(d),
        ..Default::default()
    };
    degeneracy(&report, &(0..n).collect::<Vec<_>>(), opts, &mut diag)?;
    with_bound(&mut diag, opts, SampleSizeTask::ImsLt, n, d, epsilon, None, k);
    let rescaled = rescale_lt(&report, epsilon, d)?;
    let surrogate = rescaled.to_graph()?;
    let chosen = algorithm.select(&surrogate, k)?;
    Ok(ImsResult {
        chosen,
        surrogate_graph_digest: surrogate.digest(),
        pipeline: Pipeline::Lt,
        diagnostics: diag,
        surrogate,
    })
}

/// Everything needed to run one pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImsRequest {
    pub pipeline: Pipeline,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Prefix length for the partition step; defaults to half the dataset.
    pub t_prime: Option<usize>,
    pub in_degree_bound: Option<usize>,
    pub rng_seed: u64,
}

pub fn run(
    dataset: &CascadeDataset,
    request: &ImsRequest,
    algorithm: &dyn ImAlgorithm,
    opts: &ImsOptions,
) -> Result<ImsResult> {
    let t_prime = request.t_prime.unwrap_or(dataset.t() / 2);
    match request.pipeline {
        Pipeline::IcA1 => ims_ic_a1(dataset, request.k, request.epsilon, algorithm, opts),
        Pipeline::IcA2 => ims_ic_a2(
            dataset,
            request.k,
            request.epsilon,
            request.delta,
            t_prime,
            algorithm,
            request.rng_seed,
            opts,
        ),
        Pipeline::IcA2Eps => {
            ims_ic_a2_eps(dataset, request.k, request.epsilon, request.delta, t_prime, algorithm, opts)
        }
        Pipeline::Lt => ims_lt(dataset, request.k, request.epsilon, request.in_degree_bound, algorithm, opts),
    }
}
