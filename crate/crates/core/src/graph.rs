//! Directed diffusion graphs, seed distributions and assumption parameters.
//!
//! Nodes are dense indices `0..n`. A [`Graph`] is validated at construction
//! and immutable afterwards; [`RawGraph`] is the unchecked form used to report
//! every rule a candidate graph breaks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Slack allowed on the LT normalization sum for floating-point rounding.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ic,
    Lt,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Ic => "ic",
            Model::Lt => "lt",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ic" => Ok(Model::Ic),
            "lt" => Ok(Model::Lt),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

/// One broken graph rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    SelfLoop { node: usize },
    NodeOutOfRange { u: usize, v: usize },
    DuplicateEdge { u: usize, v: usize },
    ParamOutOfRange { u: usize, v: usize, value: f64 },
    ZeroParamOnEdge { u: usize, v: usize },
    ParamWithoutEdge { u: usize, v: usize, value: f64 },
    Normalization { node: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::SelfLoop { node } => write!(f, "self-loop at {node}"),
            Violation::NodeOutOfRange { u, v } => write!(f, "edge ({u},{v}) references a missing node"),
            Violation::DuplicateEdge { u, v } => write!(f, "edge ({u},{v}) listed twice"),
            Violation::ParamOutOfRange { u, v, value } => {
                write!(f, "param of ({u},{v}) is {value}, outside (0,1]")
            }
            Violation::ZeroParamOnEdge { u, v } => write!(f, "edge ({u},{v}) has zero param"),
            Violation::ParamWithoutEdge { u, v, value } => {
                write!(f, "param {value} set on ({u},{v}) which is not an edge")
            }
            Violation::Normalization { node, sum } => {
                write!(f, "normalization at {node}: incoming weights sum to {sum}")
            }
        }
    }
}

/// Unchecked graph description.
///
/// `params` may name pairs that are not in `edges` and vice versa; [`validate`]
/// reports each such mismatch.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGraph {
    pub n: usize,
    pub model: Model,
    pub edges: Vec<(usize, usize)>,
    pub params: BTreeMap<(usize, usize), f64>,
}

impl RawGraph {
    pub fn from_triples(n: usize, model: Model, triples: &[(usize, usize, f64)]) -> Self {
        RawGraph {
            n,
            model,
            edges: triples.iter().map(|&(u, v, _)| (u, v)).collect(),
            params: triples.iter().map(|&(u, v, p)| ((u, v), p)).collect(),
        }
    }
}

/// Every invariant violation of `raw`; empty iff it describes a valid graph.
pub fn validate(raw: &RawGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut in_sum = vec![0.0f64; raw.n];
    for &(u, v) in &raw.edges {
        if u >= raw.n || v >= raw.n {
            out.push(Violation::NodeOutOfRange { u, v });
            continue;
        }
        if u == v {
            out.push(Violation::SelfLoop { node: u });
            continue;
        }
        if !seen.insert((u, v)) {
            out.push(Violation::DuplicateEdge { u, v });
            continue;
        }
        match raw.params.get(&(u, v)).copied().unwrap_or(0.0) {
            0.0 => out.push(Violation::ZeroParamOnEdge { u, v }),
            p if !(p > 0.0 && p <= 1.0) => out.push(Violation::ParamOutOfRange { u, v, value: p }),
            p => in_sum[v] += p,
        }
    }
    let listed: BTreeSet<_> = raw.edges.iter().copied().collect();
    for (&(u, v), &p) in &raw.params {
        if p != 0.0 && !listed.contains(&(u, v)) {
            out.push(Violation::ParamWithoutEdge { u, v, value: p });
        }
    }
    if raw.model == Model::Lt {
        for (node, &sum) in in_sum.iter().enumerate() {
            if sum > 1.0 + NORMALIZATION_TOLERANCE {
                out.push(Violation::Normalization { node, sum });
            }
        }
    }
    out
}

/// A validated directed graph with one parameter per edge: the activation
/// probability under IC, the influence weight under LT.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    model: Model,
    params: Vec<f64>,
    in_adj: Vec<Vec<(usize, f64)>>,
    out_adj: Vec<Vec<(usize, f64)>>,
    edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    pub fn new(n: usize, model: Model, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_raw(&RawGraph::from_triples(n, model, edges))
    }

    pub fn from_raw(raw: &RawGraph) -> Result<Self> {
        let violations = validate(raw);
        if !violations.is_empty() {
            return Err(Error::InvalidGraph(violations));
        }
        let mut edges: Vec<(usize, usize, f64)> =
            raw.edges.iter().map(|&(u, v)| (u, v, raw.params[&(u, v)])).collect();
        edges.sort_by_key(|&(u, v, _)| (u, v));
        let n = raw.n;
        let mut params = vec![0.0; n * n];
        let mut in_adj = vec![Vec::new(); n];
        let mut out_adj = vec![Vec::new(); n];
        for &(u, v, p) in &edges {
            params[u * n + v] = p;
            out_adj[u].push((v, p));
            in_adj[v].push((u, p));
        }
        Ok(Graph { n, model: raw.model, params, in_adj, out_adj, edges })
    }

    /// Builds a graph from a dense row-major `n × n` matrix; every strictly
    /// positive off-diagonal entry becomes an edge.
    pub fn from_matrix(n: usize, model: Model, matrix: &[f64]) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "matrix has {} entries, expected {}",
                matrix.len(),
                n * n
            )));
        }
        let mut triples = Vec::new();
        for u in 0..n {
            for v in 0..n {
                let p = matrix[u * n + v];
                if u != v && p != 0.0 {
                    triples.push((u, v, p));
                }
            }
        }
        Self::new(n, model, &triples)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn param(&self, u: usize, v: usize) -> f64 {
        self.params[u * self.n + v]
    }

    /// Dense row-major parameter matrix.
    pub fn param_matrix(&self) -> &[f64] {
        &self.params
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn in_edges(&self, v: usize) -> &[(usize, f64)] {
        &self.in_adj[v]
    }

    pub fn out_edges(&self, u: usize) -> &[(usize, f64)] {
        &self.out_adj[u]
    }

    pub fn to_raw(&self) -> RawGraph {
        RawGraph::from_triples(self.n, self.model, &self.edges)
    }

    /// Always empty for a constructed graph.
    pub fn validate(&self) -> Vec<Violation> {
        validate(&self.to_raw())
    }

    pub fn max_in_degree(&self) -> usize {
        self.in_adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Same edges with parameters replaced by `f(u, v, param)`.
    pub fn map_params(&self, f: impl Fn(usize, usize, f64) -> f64) -> Result<Self> {
        let triples: Vec<_> = self.edges.iter().map(|&(u, v, p)| (u, v, f(u, v, p))).collect();
        Self::new(self.n, self.model, &triples)
    }

    /// Copy with every edge entering a node of `targets` set to parameter 1.
    pub fn with_forced_in_edges(&self, targets: &[usize]) -> Result<Self> {
        let mut forced = vec![false; self.n];
        for &r in targets {
            if r >= self.n {
                return Err(Error::InvalidArgument(format!("node {r} out of range")));
            }
            forced[r] = true;
        }
        let triples: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v, p)| (u, v, if forced[v] { 1.0 } else { p }))
            .collect();
        // Under LT this fails whenever a forced node has two in-edges.
        Self::new(self.n, self.model, &triples)
    }

    pub fn digest(&self) -> String {
        digest_text(&self.to_json())
    }

    pub fn to_json(&self) -> String {
        let mut s = format!("{{\"n\":{},\"model\":\"{}\",\"edges\":[", self.n, self.model);
        for (i, &(u, v, p)) in self.edges.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&format!("[{u},{v},{}]", fmt_real(p)));
        }
        s.push_str("]}");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        if let Some(names) = &file.names {
            if names.len() != file.n {
                return Err(Error::Format(format!(
                    "{} node names for {} nodes",
                    names.len(),
                    file.n
                )));
            }
        }
        Self::new(file.n, file.model, &file.edges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk graph. `names` optionally labels the dense node indices.
#[derive(Debug, Deserialize)]
struct GraphFile {
    n: usize,
    model: Model,
    edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    names: Option<Vec<String>>,
}

/// Real number with 17 significant digits, which round-trips every `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn digest_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Per-node independent seed probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedDistribution {
    q: Vec<f64>,
}

#[derive(Deserialize)]
struct SeedFile {
    q: Vec<f64>,
}

impl SeedDistribution {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if let Some((u, &x)) = q.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidSeedDistribution(format!("q[{u}] = {x} outside [0,1]")));
        }
        Ok(SeedDistribution { q })
    }

    pub fn uniform(n: usize, q: f64) -> Result<Self> {
        Self::new(vec![q; n])
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self, u: usize) -> f64 {
        self.q[u]
    }

    pub fn probs(&self) -> &[f64] {
        &self.q
    }

    pub fn expected_size(&self) -> f64 {
        self.q.iter().sum()
    }

    /// Copy with `q[u]` replaced.
    pub fn with(&self, u: usize, value: f64) -> Result<Self> {
        let mut q = self.q.clone();
        q[u] = value;
        Self::new(q)
    }

    pub fn to_json(&self) -> String {
        let items: Vec<String> = self.q.iter().map(|&x| fmt_real(x)).collect();
        format!("{{\"q\":[{}]}}", items.join(","))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SeedFile = serde_json::from_str(text)?;
        Self::new(file.q)
    }

    pub fn digest(&self) -> String {
        digest_text(&self.to_json())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Constants of the three seed/activation assumptions plus accuracy targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionParams {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub kappa: f64,
}

impl Default for AssumptionParams {
    fn default() -> Self {
        AssumptionParams {
            alpha: 0.1,
            gamma: 0.1,
            beta: 0.3,
            c: 1.0,
            epsilon: 0.1,
            delta: 0.1,
            k: 1,
            kappa: 1.0 - (-1.0f64).exp(),
        }
    }
}

impl AssumptionParams {
    /// Checks every range; `n` additionally bounds `k`.
    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        let open01 = |x: f64| x > 0.0 && x < 1.0;
        let checks = [
            (self.alpha > 0.0 && self.alpha <= 1.0, "alpha must lie in (0,1]"),
            (self.gamma > 0.0 && self.gamma <= 0.5, "gamma must lie in (0,1/2]"),
            (open01(self.beta), "beta must lie in (0,1)"),
            (self.c > 0.0 && self.c.is_finite(), "c must be positive"),
            (open01(self.epsilon), "epsilon must lie in (0,1)"),
            (open01(self.delta), "delta must lie in (0,1)"),
            (self.k >= 1, "k must be positive"),
            (self.kappa > 0.0 && self.kappa <= 1.0, "kappa must lie in (0,1]"),
        ];
        if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(Error::InvalidArgument((*msg).into()));
        }
        if let Some(n) = n {
            if self.k > n {
                return Err(Error::InvalidArgument(format!("k = {} exceeds n = {n}", self.k)));
            }
        }
        Ok(())
    }
}

/// Random test graph: each ordered pair is an edge with probability
/// `density`, parameters uniform in `param_range`. LT weights are rescaled per
/// node so incoming weights sum to at most one.
pub fn random_graph(
    n: usize,
    density: f64,
    param_range: (f64, f64),
    model: Model,
    rng_seed: u64,
) -> Result<Graph> {
    let (lo, hi) = param_range;
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("density {density} outside [0,1]")));
    }
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "param range [{lo},{hi}] is not inside (0,1]"
        )));
    }
    let mut rng = rng::stream(rng_seed, Domain::Graph, 0);
    let mut triples = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v || !rng.random_bool(density) {
                continue;
            }
            let p = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            triples.push((u, v, p));
        }
    }
    if model == Model::Lt {
        normalize_in_weights(n, &mut triples);
    }
    Graph::new(n, model, &triples)
}

fn normalize_in_weights(n: usize, triples: &mut [(usize, usize, f64)]) {
    let mut sums = vec![0.0; n];
    for &(_, v, w) in triples.iter() {
        sums[v] += w;
    }
    for t in triples.iter_mut() {
        let s = sums[t.1];
        if s > 1.0 {
            t.2 /= s;
        }
    }
}
