//! IC and LT cascade simulation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Model, SeedDistribution};

/// One observed diffusion `(S_0, S_1, …, S_{n-1})`, stored as the nodes newly
/// activated at each step up to stabilization.
///
/// `deltas[0]` is the seed set; `deltas[τ]` for `τ ≥ 1` is non-empty and
/// disjoint from every earlier delta. `S_τ` for `τ ≥ stable_at()` equals the
/// final active set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cascade {
    n: usize,
    deltas: Vec<Vec<usize>>,
}

/// Wire form of one cascade line; the node count lives in the dataset header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeRecord {
    pub steps: Vec<Vec<usize>>,
    pub stable_at: usize,
}

impl Cascade {
    /// Checks every cascade invariant on the stored deltas.
    pub fn from_deltas(n: usize, deltas: Vec<Vec<usize>>, stable_at: usize) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::Format("cascade has no seed step".into()));
        }
        if stable_at != deltas.len() {
            return Err(Error::Format(format!(
                "stable_at = {stable_at} but {} steps stored",
                deltas.len()
            )));
        }
        if stable_at > n.max(1) {
            return Err(Error::Format(format!("stable_at = {stable_at} exceeds n = {n}")));
        }
        let mut seen = vec![false; n];
        for (tau, delta) in deltas.iter().enumerate() {
            if tau > 0 && delta.is_empty() {
                return Err(Error::Format(format!("empty delta at step {tau} before stabilization")));
            }
            if delta.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!("delta at step {tau} is not strictly increasing")));
            }
            for &x in delta {
                if x >= n {
                    return Err(Error::Format(format!("node {x} out of range")));
                }
                if std::mem::replace(&mut seen[x], true) {
                    return Err(Error::Format(format!("node {x} activated twice")));
                }
            }
        }
        Ok(Cascade { n, deltas })
    }

    pub fn from_record(n: usize, record: CascadeRecord) -> Result<Self> {
        Self::from_deltas(n, record.steps, record.stable_at)
    }

    pub fn to_record(&self) -> CascadeRecord {
        CascadeRecord { steps: self.deltas.clone(), stable_at: self.stable_at() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Logical length of the observed sequence.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// First step τ with `S_τ = S_{τ-1}` (no further activations).
    pub fn stable_at(&self) -> usize {
        self.deltas.len()
    }

    pub fn deltas(&self) -> &[Vec<usize>] {
        &self.deltas
    }

    pub fn seeds(&self) -> &[usize] {
        &self.deltas[0]
    }

    /// Nodes newly active at step 1 (empty when stabilized at step 1).
    pub fn step_one_delta(&self) -> &[usize] {
        self.deltas.get(1).map_or(&[], Vec::as_slice)
    }

    /// `S_τ` as a sorted node list.
    pub fn set_at(&self, tau: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.deltas.iter().take(tau + 1).flatten().copied().collect();
        s.sort_unstable();
        s
    }

    /// `Φ(S_0) = S_{n-1}`.
    pub fn final_set(&self) -> Vec<usize> {
        self.set_at(usize::MAX - 1)
    }

    pub fn final_size(&self) -> usize {
        self.deltas.iter().map(Vec::len).sum()
    }
}

fn check_seeds(n: usize, seeds: &[usize]) -> Result<Vec<usize>> {
    let mut s = seeds.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&bad) = s.iter().find(|&&x| x >= n) {
        return Err(Error::InvalidArgument(format!("seed {bad} out of range for n = {n}")));
    }
    Ok(s)
}

/// Each node is included independently with its probability `q[u]`.
pub fn sample_seed_set<R: Rng + ?Sized>(dist: &SeedDistribution, rng: &mut R) -> Vec<usize> {
    (0..dist.n())
        .filter(|&u| rng.random::<f64>() < dist.q(u))
        .collect()
}

/// Runs the IC process: nodes activated at step τ-1 each get one independent
/// attempt, with probability `p_uv`, on every still-inactive out-neighbor.
pub fn simulate_ic<R: Rng + ?Sized>(graph: &Graph, seeds: &[usize], rng: &mut R) -> Result<Cascade> {
    if graph.model() != Model::Ic {
        return Err(Error::ModelMismatch { expected: Model::Ic, found: graph.model() });
    }
    let n = graph.n();
    let mut frontier = check_seeds(n, seeds)?;
    let mut active = vec![false; n];
    for &s in &frontier {
        active[s] = true;
    }
    let mut deltas = vec![frontier.clone()];
    loop {
        let mut fresh = Vec::new();
        for &u in &frontier {
            for &(v, p) in graph.out_edges(u) {
                if !active[v] && rng.random::<f64>() < p {
                    active[v] = true;
                    fresh.push(v);
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        fresh.sort_unstable();
        deltas.push(fresh.clone());
        frontier = fresh;
    }
    Ok(Cascade { n, deltas })
}

/// Runs the LT process with thresholds drawn uniformly from `[0,1)` before
/// diffusion; an inactive node activates once the summed weight of its active
/// in-neighbors reaches its threshold.
pub fn simulate_lt<R: Rng + ?Sized>(graph: &Graph, seeds: &[usize], rng: &mut R) -> Result<Cascade> {
    if graph.model() != Model::Lt {
        return Err(Error::ModelMismatch { expected: Model::Lt, found: graph.model() });
    }
    let n = graph.n();
    let mut frontier = check_seeds(n, seeds)?;
    let thresholds: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut active = vec![false; n];
    for &s in &frontier {
        active[s] = true;
    }
    let mut weight_in = vec![0.0f64; n];
    let mut touched = vec![false; n];
    let mut deltas = vec![frontier.clone()];
    loop {
        let mut candidates = Vec::new();
        for &u in &frontier {
            for &(v, w) in graph.out_edges(u) {
                if !active[v] {
                    weight_in[v] += w;
                    if !std::mem::replace(&mut touched[v], true) {
                        candidates.push(v);
                    }
                }
            }
        }
        let mut fresh: Vec<usize> = Vec::new();
        for v in candidates {
            touched[v] = false;
            if weight_in[v] >= thresholds[v] {
                fresh.push(v);
            }
        }
        if fresh.is_empty() {
            break;
        }
        fresh.sort_unstable();
        for &v in &fresh {
            active[v] = true;
        }
        deltas.push(fresh.clone());
        frontier = fresh;
    }
    Ok(Cascade { n, deltas })
}

/// Dispatches on the graph's model.
pub fn simulate<R: Rng + ?Sized>(graph: &Graph, seeds: &[usize], rng: &mut R) -> Result<Cascade> {
    match graph.model() {
        Model::Ic => simulate_ic(graph, seeds, rng),
        Model::Lt => simulate_lt(graph, seeds, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_graph;
    use crate::rng::{stream, Domain};

    fn rng() -> crate::rng::StreamRng {
        stream(11, Domain::Cascade, 0)
    }

    #[test]
    fn seed_sampling_extremes() {
        let mut r = rng();
        assert!(sample_seed_set(&SeedDistribution::uniform(6, 0.0).unwrap(), &mut r).is_empty());
        assert_eq!(
            sample_seed_set(&SeedDistribution::uniform(6, 1.0).unwrap(), &mut r),
            (0..6).collect::<Vec<_>>()
        );
    }

    #[test]
    fn seed_sampling_rate() {
        // Binomial(1e5, 0.5) has sd 0.0016 in rate; 0.01 is over six sd.
        let dist = SeedDistribution::uniform(10, 0.5).unwrap();
        let mut r = rng();
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            for u in sample_seed_set(&dist, &mut r) {
                counts[u] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.5).abs() <= 0.01);
        }
    }

    #[test]
    fn empty_seeds_give_empty_cascade() {
        let ic = Graph::new(3, Model::Ic, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let lt = Graph::new(3, Model::Lt, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let c = simulate_ic(&ic, &[], &mut rng()).unwrap();
        assert_eq!(c.final_size(), 0);
        assert_eq!(c.stable_at(), 1);
        assert_eq!(c.len(), 3);
        assert_eq!(simulate_lt(&lt, &[], &mut rng()).unwrap().final_size(), 0);
    }

    #[test]
    fn certain_edge_activates_at_step_one() {
        let g = Graph::new(2, Model::Ic, &[(0, 1, 1.0)]).unwrap();
        let c = simulate_ic(&g, &[0], &mut rng()).unwrap();
        assert_eq!(c.set_at(1), vec![0, 1]);
        assert_eq!(c.stable_at(), 2);
        assert_eq!(c.set_at(5), vec![0, 1]);

        let g = Graph::new(2, Model::Lt, &[(0, 1, 1.0)]).unwrap();
        let mut r = rng();
        for _ in 0..1000 {
            assert_eq!(simulate_lt(&g, &[0], &mut r).unwrap().set_at(1), vec![0, 1]);
        }
    }

    #[test]
    fn single_edge_rates() {
        // Bernoulli(0.5) and Bernoulli(0.4) over 1e5 runs: sd ≈ 0.0016.
        let runs = 100_000;
        let g = Graph::new(2, Model::Ic, &[(0, 1, 0.5)]).unwrap();
        let mut r = rng();
        let hits = (0..runs)
            .filter(|_| simulate_ic(&g, &[0], &mut r).unwrap().set_at(1).contains(&1))
            .count();
        assert!((hits as f64 / runs as f64 - 0.5).abs() <= 0.01);

        let g = Graph::new(2, Model::Lt, &[(0, 1, 0.4)]).unwrap();
        let hits = (0..runs)
            .filter(|_| simulate_lt(&g, &[0], &mut r).unwrap().final_set().contains(&1))
            .count();
        assert!((hits as f64 / runs as f64 - 0.4).abs() <= 0.01);
    }

    #[test]
    fn model_mismatch() {
        let g = Graph::new(2, Model::Ic, &[(0, 1, 0.5)]).unwrap();
        assert!(matches!(simulate_lt(&g, &[0], &mut rng()), Err(Error::ModelMismatch { .. })));
        assert!(simulate_ic(&g, &[2], &mut rng()).is_err());
    }

    #[test]
    fn cascades_satisfy_invariants() {
        for seed in 0..50u64 {
            for model in [Model::Ic, Model::Lt] {
                let g = random_graph(9, 0.35, (0.2, 1.0), model, seed).unwrap();
                let mut r = stream(seed, Domain::Cascade, 1);
                let s = sample_seed_set(&SeedDistribution::uniform(9, 0.2).unwrap(), &mut r);
                let c = simulate(&g, &s, &mut r).unwrap();
                let again =
                    Cascade::from_deltas(c.n(), c.deltas().to_vec(), c.stable_at()).unwrap();
                assert_eq!(again, c);
                for tau in 1..9 {
                    let prev = c.set_at(tau - 1);
                    let cur = c.set_at(tau);
                    assert!(prev.iter().all(|x| cur.contains(x)));
                    if tau >= c.stable_at() {
                        assert_eq!(prev, cur);
                    }
                }
            }
        }
    }

    #[test]
    fn from_deltas_rejects_malformed() {
        assert!(Cascade::from_deltas(3, vec![vec![0], vec![]], 2).is_err());
        assert!(Cascade::from_deltas(3, vec![vec![0], vec![0]], 2).is_err());
        assert!(Cascade::from_deltas(3, vec![vec![1, 0]], 1).is_err());
        assert!(Cascade::from_deltas(3, vec![vec![0], vec![1]], 1).is_err());
        assert!(Cascade::from_deltas(3, vec![vec![5]], 1).is_err());
    }
}
