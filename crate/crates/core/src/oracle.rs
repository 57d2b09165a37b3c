//! Brute-force exact quantities for small instances: one-step activation
//! probabilities, influence spread and optimal seed sets.
//!
//! Spread is computed by enumerating every live-edge graph. Under IC each edge
//! is live independently with its probability; under LT each node keeps at
//! most one incoming edge, edge `(u,v)` with probability `w_uv` and none with
//! the remaining mass. Worlds with identical reachability are merged, so one
//! [`LiveEdgeTable`] answers many seed-set queries cheaply.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{Graph, Model, SeedDistribution};

/// Hard caps on enumeration size. Exceeding one is an error, never a silent
/// approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLimits {
    /// IC enumerates `2^edges` worlds.
    pub max_ic_edges: usize,
    /// LT enumerates `∏_v (in_degree(v) + 1)` worlds.
    pub max_lt_worlds: u64,
    /// Seed-state enumeration for [`enumerated_ap`] covers `2^(free nodes)`.
    pub max_ap_nodes: usize,
    /// Candidate sets examined by [`exact_optimal_seeds`].
    pub max_seed_sets: u64,
    /// Node cap for the cascade-process recursion.
    pub max_dp_nodes: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_ic_edges: 22,
            max_lt_worlds: 1 << 20,
            max_ap_nodes: 22,
            max_seed_sets: 1_000_000,
            max_dp_nodes: 14,
        }
    }
}

fn check_node(graph: &Graph, v: usize) -> Result<()> {
    if v >= graph.n() {
        return Err(Error::InvalidArgument(format!("node {v} out of range for n = {}", graph.n())));
    }
    Ok(())
}

fn check_dist(graph: &Graph, dist: &SeedDistribution) -> Result<()> {
    if dist.n() != graph.n() {
        return Err(Error::InvalidArgument(format!(
            "seed distribution has {} nodes, graph has {}",
            dist.n(),
            graph.n()
        )));
    }
    Ok(())
}

/// `ap(v) = Pr[v ∈ S_1]` in closed form.
pub fn exact_ap(graph: &Graph, dist: &SeedDistribution, v: usize) -> Result<f64> {
    check_node(graph, v)?;
    check_dist(graph, dist)?;
    let qv = dist.q(v);
    Ok(match graph.model() {
        Model::Ic => {
            let miss: f64 = graph.in_edges(v).iter().map(|&(u, p)| 1.0 - dist.q(u) * p).product();
            1.0 - (1.0 - qv) * miss
        }
        Model::Lt => {
            let mass: f64 = graph.in_edges(v).iter().map(|&(u, w)| dist.q(u) * w).sum();
            qv + (1.0 - qv) * mass
        }
    })
}

/// `ap(v | u)` or `ap(v | ū)`: the one-step probability with `u`'s seed state
/// fixed. Seeds are independent, so this is `ap(v)` with `q_u` set to 1 or 0.
pub fn exact_ap_given(
    graph: &Graph,
    dist: &SeedDistribution,
    v: usize,
    u: usize,
    u_seeded: bool,
) -> Result<f64> {
    check_node(graph, u)?;
    check_dist(graph, dist)?;
    if u == v {
        return Err(Error::InvalidArgument("conditioning node must differ from v".into()));
    }
    exact_ap(graph, &dist.with(u, if u_seeded { 1.0 } else { 0.0 })?, v)
}

/// `ap(v)` by summing over every seed state of `{v} ∪ N(v)` and applying the
/// first diffusion step directly. `condition` pins one node's seed state.
pub fn enumerated_ap(
    graph: &Graph,
    dist: &SeedDistribution,
    v: usize,
    condition: Option<(usize, bool)>,
    limits: &OracleLimits,
) -> Result<f64> {
    check_node(graph, v)?;
    check_dist(graph, dist)?;
    if let Some((u, _)) = condition {
        check_node(graph, u)?;
        if u == v {
            return Err(Error::InvalidArgument("conditioning node must differ from v".into()));
        }
    }
    let seed_prob = |x: usize| match condition {
        Some((u, s)) if u == x => {
            if s {
                1.0
            } else {
                0.0
            }
        }
        _ => dist.q(x),
    };
    let in_edges = graph.in_edges(v);
    let free = in_edges.len() + 1;
    if free > limits.max_ap_nodes {
        return Err(Error::TooLarge(format!("{free} nodes in the seed-state enumeration")));
    }
    let mut total = 0.0;
    for mask in 0u64..(1u64 << free) {
        // bit 0 is v itself, bit i+1 is the i-th in-neighbor
        let mut prob = 1.0;
        for bit in 0..free {
            let node = if bit == 0 { v } else { in_edges[bit - 1].0 };
            let q = seed_prob(node);
            prob *= if mask >> bit & 1 == 1 { q } else { 1.0 - q };
        }
        if prob == 0.0 {
            continue;
        }
        let active_in = || in_edges.iter().enumerate().filter(|(i, _)| mask >> (i + 1) & 1 == 1);
        let hit = if mask & 1 == 1 {
            1.0
        } else {
            match graph.model() {
                Model::Ic => 1.0 - active_in().map(|(_, e)| 1.0 - e.1).product::<f64>(),
                Model::Lt => active_in().map(|(_, e)| e.1).sum::<f64>().min(1.0),
            }
        };
        total += prob * hit;
    }
    Ok(total)
}

/// Live-edge worlds grouped by the reachability they induce.
#[derive(Debug, Clone)]
pub struct LiveEdgeTable {
    n: usize,
    worlds: u64,
    /// `(reach, probability)`: `reach[x]` is the bitmask of nodes reachable
    /// from `x` in that world.
    entries: Vec<(Vec<u64>, f64)>,
}

fn closure(n: usize, adj: &[u64]) -> Vec<u64> {
    let mut reach: Vec<u64> = (0..n).map(|x| adj[x] | 1u64 << x).collect();
    for k in 0..n {
        let rk = reach[k];
        for r in reach.iter_mut() {
            if *r >> k & 1 == 1 {
                *r |= rk;
            }
        }
    }
    reach
}

impl LiveEdgeTable {
    pub fn build(graph: &Graph, limits: &OracleLimits) -> Result<Self> {
        let n = graph.n();
        if n > 64 {
            return Err(Error::TooLarge(format!("{n} nodes (at most 64 supported)")));
        }
        let mut grouped: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        let mut worlds = 0u64;
        match graph.model() {
            Model::Ic => {
                let edges = graph.edges();
                let m = edges.len();
                if m > limits.max_ic_edges {
                    return Err(Error::TooLarge(format!(
                        "{m} edges, cap is {}",
                        limits.max_ic_edges
                    )));
                }
                let mut adj = vec![0u64; n];
                for mask in 0u64..(1u64 << m) {
                    let mut prob = 1.0;
                    adj.iter_mut().for_each(|a| *a = 0);
                    for (i, &(u, v, p)) in edges.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            prob *= p;
                            adj[u] |= 1 << v;
                        } else {
                            prob *= 1.0 - p;
                        }
                    }
                    worlds += 1;
                    if prob > 0.0 {
                        *grouped.entry(closure(n, &adj)).or_insert(0.0) += prob;
                    }
                }
            }
            Model::Lt => {
                // choice[b] = 0 means no live in-edge, i+1 picks the i-th
                let radix: Vec<usize> = (0..n).map(|b| graph.in_edges(b).len() + 1).collect();
                let total = radix
                    .iter()
                    .try_fold(1u64, |acc, &r| acc.checked_mul(r as u64))
                    .filter(|&t| t <= limits.max_lt_worlds)
                    .ok_or_else(|| {
                        Error::TooLarge(format!("LT world count exceeds {}", limits.max_lt_worlds))
                    })?;
                let none: Vec<f64> = (0..n)
                    .map(|b| (1.0 - graph.in_edges(b).iter().map(|e| e.1).sum::<f64>()).max(0.0))
                    .collect();
                let mut choice = vec![0usize; n];
                let mut adj = vec![0u64; n];
                for _ in 0..total {
                    let mut prob = 1.0;
                    adj.iter_mut().for_each(|a| *a = 0);
                    for b in 0..n {
                        if choice[b] == 0 {
                            prob *= none[b];
                        } else {
                            let (u, w) = graph.in_edges(b)[choice[b] - 1];
                            prob *= w;
                            adj[u] |= 1 << b;
                        }
                    }
                    worlds += 1;
                    if prob > 0.0 {
                        *grouped.entry(closure(n, &adj)).or_insert(0.0) += prob;
                    }
                    for b in 0..n {
                        choice[b] += 1;
                        if choice[b] < radix[b] {
                            break;
                        }
                        choice[b] = 0;
                    }
                }
            }
        }
        Ok(LiveEdgeTable { n, worlds, entries: grouped.into_iter().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of live-edge graphs enumerated.
    pub fn world_count(&self) -> u64 {
        self.worlds
    }

    /// Number of distinct reachability patterns.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn sigma(&self, seeds: &[usize]) -> f64 {
        self.sigma_mask(mask_of(seeds))
    }

    pub fn sigma_mask(&self, seeds: u64) -> f64 {
        if seeds == 0 {
            return 0.0;
        }
        self.entries
            .iter()
            .map(|(reach, p)| {
                let covered = (0..self.n)
                    .filter(|&x| seeds >> x & 1 == 1)
                    .fold(0u64, |acc, x| acc | reach[x]);
                p * covered.count_ones() as f64
            })
            .sum()
    }

    /// Exact spread of every subset, indexed by its bitmask. Needs `n ≤ 20`.
    pub fn sigma_all(&self) -> Result<Vec<f64>> {
        if self.n > 20 {
            return Err(Error::TooLarge(format!("2^{} subsets", self.n)));
        }
        Ok((0u64..1 << self.n).map(|m| self.sigma_mask(m)).collect())
    }
}

pub fn mask_of(nodes: &[usize]) -> u64 {
    nodes.iter().fold(0u64, |m, &x| m | 1u64 << x)
}

pub fn nodes_of(mask: u64) -> Vec<usize> {
    (0..64).filter(|&x| mask >> x & 1 == 1).collect()
}

fn check_seeds(graph: &Graph, seeds: &[usize]) -> Result<()> {
    seeds.iter().try_for_each(|&s| check_node(graph, s))
}

/// `σ(S) = E|Φ(S)|` by full live-edge enumeration.
pub fn exact_sigma(graph: &Graph, seeds: &[usize]) -> Result<f64> {
    exact_sigma_with(graph, seeds, &OracleLimits::default())
}

pub fn exact_sigma_with(graph: &Graph, seeds: &[usize], limits: &OracleLimits) -> Result<f64> {
    check_seeds(graph, seeds)?;
    Ok(LiveEdgeTable::build(graph, limits)?.sigma(seeds))
}

/// `σ^{p'}(S)` where `p'` sets every edge entering `forced` to 1.
pub fn exact_sigma_with_forced_in_edges(
    graph: &Graph,
    forced: &[usize],
    seeds: &[usize],
) -> Result<f64> {
    check_seeds(graph, seeds)?;
    exact_sigma(&graph.with_forced_in_edges(forced)?, seeds)
}

/// Exhaustive optimum over seed sets of size `min(k, n)`; σ is monotone so no
/// smaller set does better. Ties go to the lexicographically smallest set.
pub fn exact_optimal_seeds(graph: &Graph, k: usize) -> Result<(Vec<usize>, f64)> {
    exact_optimal_seeds_with(graph, k, &OracleLimits::default())
}

pub fn exact_optimal_seeds_with(
    graph: &Graph,
    k: usize,
    limits: &OracleLimits,
) -> Result<(Vec<usize>, f64)> {
    let n = graph.n();
    let k = k.min(n);
    let count = binomial(n as u64, k as u64);
    if count > limits.max_seed_sets {
        return Err(Error::TooLarge(format!("C({n},{k}) = {count} candidate sets")));
    }
    let table = LiveEdgeTable::build(graph, limits)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for set in Combinations::new(n, k) {
        let s = table.sigma(&set);
        if best.as_ref().is_none_or(|(_, b)| s > b + 1e-12) {
            best = Some((set, s));
        }
    }
    Ok(best.unwrap_or((Vec::new(), 0.0)))
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Size-`k` subsets of `0..n` in lexicographic order.
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations { n, current: (k <= n).then(|| (0..k).collect()) }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        let k = next.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// `σ(S)` by exact recursion over the diffusion process itself rather than
/// live-edge graphs: the state is `(S_{τ-2}, S_{τ-1})` and inactive nodes
/// activate independently at each step. Serves as a second route for checking
/// [`exact_sigma`].
pub fn exact_sigma_by_process(graph: &Graph, seeds: &[usize], limits: &OracleLimits) -> Result<f64> {
    check_seeds(graph, seeds)?;
    let n = graph.n();
    if n > limits.max_dp_nodes {
        return Err(Error::TooLarge(format!("{n} nodes, cap is {}", limits.max_dp_nodes)));
    }
    let start = mask_of(seeds);
    if start == 0 {
        return Ok(0.0);
    }
    let weight_from = |set: u64, v: usize| -> f64 {
        graph.in_edges(v).iter().filter(|e| set >> e.0 & 1 == 1).map(|e| e.1).sum()
    };
    let mut layer: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    layer.insert((0, start), 1.0);
    let mut expected = 0.0;
    while !layer.is_empty() {
        let mut next: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (&(prev, cur), &prob) in &layer {
            let fresh = cur & !prev;
            let mut cand: Vec<(usize, f64)> = Vec::new();
            for v in (0..n).filter(|&v| cur >> v & 1 == 0) {
                let x = match graph.model() {
                    Model::Ic => {
                        1.0 - graph
                            .in_edges(v)
                            .iter()
                            .filter(|e| fresh >> e.0 & 1 == 1)
                            .map(|e| 1.0 - e.1)
                            .product::<f64>()
                    }
                    Model::Lt => {
                        let before = weight_from(prev, v);
                        let now = weight_from(cur, v);
                        if 1.0 - before <= 0.0 {
                            0.0
                        } else {
                            ((now - before) / (1.0 - before)).clamp(0.0, 1.0)
                        }
                    }
                };
                if x > 0.0 {
                    cand.push((v, x));
                }
            }
            for sub in 0u64..(1u64 << cand.len()) {
                let mut p = prob;
                let mut add = 0u64;
                for (i, &(v, x)) in cand.iter().enumerate() {
                    if sub >> i & 1 == 1 {
                        p *= x;
                        add |= 1 << v;
                    } else {
                        p *= 1.0 - x;
                    }
                }
                if p == 0.0 {
                    continue;
                }
                if add == 0 {
                    expected += p * cur.count_ones() as f64;
                } else {
                    *next.entry((cur, cur | add)).or_insert(0.0) += p;
                }
            }
        }
        layer = next;
    }
    Ok(expected)
}
