//! Influence maximization on a known graph: Monte-Carlo spread estimation and
//! lazy greedy selection over a shared pool of live-edge worlds.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::simulate;
use crate::error::{Error, Result};
use crate::graph::{Graph, Model};
use crate::oracle::{self, OracleLimits};
use crate::rng::{self, Domain};

pub const DEFAULT_NUM_SIMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub num_simulations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    /// Sorted, no duplicates.
    pub nodes: Vec<usize>,
    pub budget_k: usize,
}

impl SeedSet {
    pub fn new(mut nodes: Vec<usize>, budget_k: usize) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        SeedSet { nodes, budget_k }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn within_budget(&self) -> bool {
        self.nodes.len() <= self.budget_k
    }
}

fn check_seeds(graph: &Graph, seeds: &[usize]) -> Result<Vec<usize>> {
    if let Some(&s) = seeds.iter().find(|&&s| s >= graph.n()) {
        return Err(Error::InvalidArgument(format!("seed {s} out of range for n = {}", graph.n())));
    }
    let mut s = seeds.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// Mean final cascade size over `num_sims` independent runs from `seeds`.
/// Simulation `i` uses its own stream, so the result does not depend on the
/// thread count.
pub fn estimate_sigma(graph: &Graph, seeds: &[usize], num_sims: usize, rng_seed: u64) -> Result<SpreadEstimate> {
    if num_sims == 0 {
        return Err(Error::InvalidArgument("num_sims must be at least 1".into()));
    }
    let seeds = check_seeds(graph, seeds)?;
    let (sum, sum_sq) = (0..num_sims as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(rng_seed, Domain::Spread, i);
            simulate(graph, &seeds, &mut rng).map(|c| c.final_size() as u64)
        })
        .try_fold(|| (0u64, 0u64), |(s, q), x| x.map(|x| (s + x, q + x * x)))
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let m = num_sims as f64;
    let mean = sum as f64 / m;
    let std_error = if num_sims > 1 {
        let var = (sum_sq as f64 - m * mean * mean) / (m - 1.0);
        (var.max(0.0) / m).sqrt()
    } else {
        0.0
    };
    Ok(SpreadEstimate { mean, std_error, num_simulations: num_sims })
}

/// One live-edge graph in compressed adjacency form.
#[derive(Debug, Clone)]
struct World {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl World {
    fn sample<R: Rng>(graph: &Graph, rng: &mut R) -> World {
        let n = graph.n();
        let mut live: Vec<(usize, usize)> = Vec::new();
        match graph.model() {
            Model::Ic => {
                for &(u, v, p) in graph.edges() {
                    if rng.random::<f64>() < p {
                        live.push((u, v));
                    }
                }
            }
            Model::Lt => {
                for v in 0..n {
                    let r: f64 = rng.random();
                    let mut acc = 0.0;
                    for &(u, w) in graph.in_edges(v) {
                        acc += w;
                        if r < acc {
                            live.push((u, v));
                            break;
                        }
                    }
                }
            }
        }
        live.sort_unstable();
        let mut offsets = vec![0u32; n + 1];
        for &(u, _) in &live {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        World { offsets, targets: live.into_iter().map(|(_, v)| v as u32).collect() }
    }

    fn out(&self, u: usize) -> &[u32] {
        &self.targets[self.offsets[u] as usize..self.offsets[u + 1] as usize]
    }

    /// Nodes reachable from `start` that are not yet covered; marks them when
    /// `mark` is set.
    fn spread_from(&self, start: usize, covered: &mut [bool], mark: bool, stack: &mut Vec<usize>) -> u64 {
        if covered[start] {
            return 0;
        }
        let mut visited = Vec::new();
        covered[start] = true;
        visited.push(start);
        stack.clear();
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &v in self.out(u) {
                let v = v as usize;
                if !covered[v] {
                    covered[v] = true;
                    visited.push(v);
                    stack.push(v);
                }
            }
        }
        if !mark {
            for &v in &visited {
                covered[v] = false;
            }
        }
        visited.len() as u64
    }
}

/// A fixed sample of live-edge worlds shared by every spread evaluation, so
/// that marginal gains are compared under common randomness.
#[derive(Debug, Clone)]
pub struct WorldPool {
    n: usize,
    worlds: Vec<World>,
}

impl WorldPool {
    pub fn sample(graph: &Graph, num_worlds: usize, rng_seed: u64) -> Result<Self> {
        if num_worlds == 0 {
            return Err(Error::InvalidArgument("need at least one world".into()));
        }
        let worlds = (0..num_worlds as u64)
            .into_par_iter()
            .map(|j| World::sample(graph, &mut rng::stream(rng_seed, Domain::Worlds, j)))
            .collect();
        Ok(WorldPool { n: graph.n(), worlds })
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    /// Average number of nodes reached from `seeds` across the pool.
    pub fn spread(&self, seeds: &[usize]) -> f64 {
        let total: u64 = self
            .worlds
            .par_iter()
            .map(|w| {
                let mut covered = vec![false; self.n];
                let mut stack = Vec::new();
                seeds.iter().map(|&s| w.spread_from(s, &mut covered, true, &mut stack)).sum::<u64>()
            })
            .sum();
        total as f64 / self.worlds.len() as f64
    }
}

/// Greedy selection with its per-step marginal gains (as pool averages).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyTrace {
    pub seeds: SeedSet,
    pub order: Vec<usize>,
    pub marginal_gains: Vec<f64>,
    pub estimated_spread: f64,
}

struct Coverage<'a> {
    pool: &'a WorldPool,
    covered: Vec<bool>,
}

impl Coverage<'_> {
    fn gain(&mut self, v: usize) -> u64 {
        let n = self.pool.n;
        self.pool
            .worlds
            .par_iter()
            .zip(self.covered.par_chunks_mut(n))
            .map_init(Vec::new, |stack, (w, cov)| w.spread_from(v, cov, false, stack))
            .sum()
    }

    fn commit(&mut self, v: usize) -> u64 {
        let n = self.pool.n;
        self.pool
            .worlds
            .par_iter()
            .zip(self.covered.par_chunks_mut(n))
            .map_init(Vec::new, |stack, (w, cov)| w.spread_from(v, cov, true, stack))
            .sum()
    }
}

/// Lazy greedy on a pre-drawn pool. Gains are integer totals over the pool,
/// so evaluation order and thread count never change the outcome; ties go to
/// the smallest node index.
pub fn greedy_on_pool(pool: &WorldPool, k: usize) -> Result<GreedyTrace> {
    let n = pool.n;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside [1, {n}]")));
    }
    let mut cov = Coverage { pool, covered: vec![false; pool.worlds.len() * n] };
    let mut heap: BinaryHeap<(u64, Reverse<usize>, usize)> =
        (0..n).map(|v| (cov.gain(v), Reverse(v), 0)).collect();
    let mut order = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    let mut total = 0u64;
    while order.len() < k {
        let (g, Reverse(v), round) = heap.pop().expect("heap holds every unselected node");
        if round == order.len() {
            let added = cov.commit(v);
            debug_assert_eq!(added, g);
            total += added;
            order.push(v);
            gains.push(added as f64 / pool.len() as f64);
        } else {
            heap.push((cov.gain(v), Reverse(v), order.len()));
        }
    }
    Ok(GreedyTrace {
        seeds: SeedSet::new(order.clone(), k),
        order,
        marginal_gains: gains,
        estimated_spread: total as f64 / pool.len() as f64,
    })
}

pub fn greedy_im_traced(graph: &Graph, k: usize, num_sims: usize, rng_seed: u64) -> Result<GreedyTrace> {
    if k == 0 || k > graph.n() {
        return Err(Error::InvalidArgument(format!("k = {k} outside [1, {}]", graph.n())));
    }
    greedy_on_pool(&WorldPool::sample(graph, num_sims, rng_seed)?, k)
}

pub fn greedy_im(graph: &Graph, k: usize, num_sims: usize, rng_seed: u64) -> Result<SeedSet> {
    Ok(greedy_im_traced(graph, k, num_sims, rng_seed)?.seeds)
}

/// The influence-maximization routine handed to the sample-based pipelines.
pub trait ImAlgorithm: Sync {
    fn name(&self) -> &'static str;
    fn select(&self, graph: &Graph, k: usize) -> Result<SeedSet>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyIm {
    pub num_sims: usize,
    pub rng_seed: u64,
}

impl Default for GreedyIm {
    fn default() -> Self {
        GreedyIm { num_sims: DEFAULT_NUM_SIMS, rng_seed: 0 }
    }
}

impl ImAlgorithm for GreedyIm {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn select(&self, graph: &Graph, k: usize) -> Result<SeedSet> {
        greedy_im(graph, k, self.num_sims, self.rng_seed)
    }
}

/// Exhaustive search with exact spreads; only for small graphs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExactIm {
    pub limits: OracleLimits,
}

impl ImAlgorithm for ExactIm {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn select(&self, graph: &Graph, k: usize) -> Result<SeedSet> {
        if k == 0 || k > graph.n() {
            return Err(Error::InvalidArgument(format!("k = {k} outside [1, {}]", graph.n())));
        }
        let (nodes, _) = oracle::exact_optimal_seeds_with(graph, k, &self.limits)?;
        Ok(SeedSet::new(nodes, k))
    }
}
