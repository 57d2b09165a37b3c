//! Experiment configuration, repeated trials and per-trial metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::generate_dataset;
use crate::error::{Error, Result};
use crate::graph::{random_graph, AssumptionParams, Graph, Model, SeedDistribution};
use crate::ims::{self, ImsOptions, ImsRequest, Pipeline};
use crate::inference::{collect_stats, estimate};
use crate::influence::{estimate_sigma, GreedyIm, DEFAULT_NUM_SIMS};
use crate::oracle::{exact_optimal_seeds, LiveEdgeTable, OracleLimits};
use crate::rng::{self, Domain};

pub const METRICS_SCHEMA: &str = "# ims-metrics v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct RandomGraphSpec {
    pub n: usize,
    pub density: f64,
    pub param_range: (f64, f64),
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    File(PathBuf),
    Random(RandomGraphSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    File(PathBuf),
    Uniform(f64),
    Q(Vec<f64>),
}

/// Settings shared by the CLI subcommands. Every field is optional in the file
/// so that command-line flags can fill or override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: Option<GraphSource>,
    pub seed_distribution: Option<SeedSource>,
    pub model: Option<Model>,
    pub t: Option<usize>,
    pub rng_seed: Option<u64>,
    pub pipeline: Option<Pipeline>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub t_prime: Option<usize>,
    pub in_degree_bound: Option<usize>,
    pub num_sims: Option<usize>,
    pub assumptions: Option<AssumptionParams>,
    pub output_dir: Option<PathBuf>,
    pub trials: Option<usize>,
}

impl ExperimentConfig {
    /// Loads a config and resolves relative file references against the
    /// config's directory. Referenced files must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(GraphSource::File(p)) = &mut cfg.graph {
            fix(p);
        }
        if let Some(SeedSource::File(p)) = &mut cfg.seed_distribution {
            fix(p);
        }
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn check_files(&self) -> Result<()> {
        let missing = |p: &Path| Error::InvalidArgument(format!("file {} does not exist", p.display()));
        if let Some(GraphSource::File(p)) = &self.graph {
            if !p.exists() {
                return Err(missing(p));
            }
        }
        if let Some(SeedSource::File(p)) = &self.seed_distribution {
            if !p.exists() {
                return Err(missing(p));
            }
        }
        Ok(())
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overridden_by(self, over: ExperimentConfig) -> ExperimentConfig {
        macro_rules! pick {
            ($($f:ident),*) => { ExperimentConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            graph, seed_distribution, model, t, rng_seed, pipeline, k, epsilon, delta, t_prime,
            in_degree_bound, num_sims, assumptions, output_dir, trials
        )
    }

    pub fn require<T: Clone>(field: &Option<T>, name: &str) -> Result<T> {
        field.clone().ok_or_else(|| Error::InvalidArgument(format!("missing required setting '{name}'")))
    }

    pub fn rng_seed(&self) -> Result<u64> {
        Self::require(&self.rng_seed, "rng_seed")
    }

    pub fn build_graph(&self) -> Result<Graph> {
        match Self::require(&self.graph, "graph")? {
            GraphSource::File(p) => {
                let g = Graph::load(p)?;
                if let Some(m) = self.model {
                    if m != g.model() {
                        return Err(Error::ModelMismatch { expected: m, found: g.model() });
                    }
                }
                Ok(g)
            }
            GraphSource::Random(spec) => {
                let model = Self::require(&self.model, "model")?;
                random_graph(spec.n, spec.density, spec.param_range, model, spec.rng_seed)
            }
        }
    }

    pub fn build_seed_distribution(&self, n: usize) -> Result<SeedDistribution> {
        let d = match Self::require(&self.seed_distribution, "seed_distribution")? {
            SeedSource::File(p) => SeedDistribution::load(p)?,
            SeedSource::Uniform(q) => SeedDistribution::uniform(n, q)?,
            SeedSource::Q(q) => SeedDistribution::new(q)?,
        };
        if d.n() != n {
            return Err(Error::InvalidArgument(format!(
                "seed distribution has {} nodes, graph has {n}",
                d.n()
            )));
        }
        Ok(d)
    }

    pub fn request(&self) -> Result<ImsRequest> {
        Ok(ImsRequest {
            pipeline: Self::require(&self.pipeline, "pipeline")?,
            k: Self::require(&self.k, "k")?,
            epsilon: self.epsilon.unwrap_or(0.1),
            delta: self.delta.unwrap_or(0.1),
            t_prime: self.t_prime,
            in_degree_bound: self.in_degree_bound,
            rng_seed: self.rng_seed()?,
        })
    }
}

/// One row of the metrics table. Fields that cannot be computed for a run
/// are left empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub trial: usize,
    pub max_param_error: Option<f64>,
    pub l1_param_error: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub seed_count: Option<usize>,
    pub sigma_sa: Option<f64>,
    /// `exact` or `monte_carlo`.
    pub sigma_method: Option<&'static str>,
    pub sigma_opt: Option<f64>,
    pub ratio: Option<f64>,
    pub wall_time_ms: Option<f64>,
}

const COLUMNS: &str = "trial,max_param_error,l1_param_error,precision,recall,seed_count,sigma_sa,sigma_method,sigma_opt,ratio,wall_time_ms";

fn cell<T: std::fmt::Display>(x: &Option<T>) -> String {
    x.as_ref().map_or(String::new(), |v| v.to_string())
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = format!("{METRICS_SCHEMA}\n{COLUMNS}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            cell(&r.max_param_error),
            cell(&r.l1_param_error),
            cell(&r.precision),
            cell(&r.recall),
            cell(&r.seed_count),
            cell(&r.sigma_sa),
            cell(&r.sigma_method),
            cell(&r.sigma_opt),
            cell(&r.ratio),
            cell(&r.wall_time_ms),
        );
    }
    out
}

/// Entrywise errors against the true parameters and precision/recall of the
/// support thresholded at `β/2`.
pub fn parameter_metrics(estimate: &[f64], truth: &Graph, beta: f64, record: &mut MetricsRecord) {
    let n = truth.n();
    assert_eq!(estimate.len(), n * n, "estimate must be an n×n matrix");
    let mut max = 0.0f64;
    let mut l1 = 0.0;
    let (mut tp, mut found, mut real) = (0usize, 0usize, 0usize);
    for u in 0..n {
        for v in (0..n).filter(|&v| v != u) {
            let (e, p) = (estimate[u * n + v], truth.param(u, v));
            max = max.max((e - p).abs());
            l1 += (e - p).abs();
            let hit = e > beta / 2.0;
            found += hit as usize;
            real += (p > 0.0) as usize;
            tp += (hit && p > 0.0) as usize;
        }
    }
    record.max_param_error = Some(max);
    record.l1_param_error = Some(l1);
    record.precision = Some(if found == 0 { 1.0 } else { tp as f64 / found as f64 });
    record.recall = Some(if real == 0 { 1.0 } else { tp as f64 / real as f64 });
}

/// Spread of `seeds` on the true graph, exact when the oracle can handle the
/// graph and Monte-Carlo otherwise; the optimum is reported only when exact.
pub fn spread_metrics(
    truth: &Graph,
    seeds: &[usize],
    k: usize,
    num_sims: usize,
    rng_seed: u64,
    record: &mut MetricsRecord,
) -> Result<()> {
    record.seed_count = Some(seeds.len());
    match LiveEdgeTable::build(truth, &OracleLimits::default()) {
        Ok(table) => {
            let s = table.sigma(seeds);
            record.sigma_sa = Some(s);
            record.sigma_method = Some("exact");
            if let Ok((_, opt)) = exact_optimal_seeds(truth, k) {
                record.sigma_opt = Some(opt);
                record.ratio = Some(if opt > 0.0 { s / opt } else { 1.0 });
            }
        }
        Err(Error::TooLarge(_)) => {
            record.sigma_sa = Some(estimate_sigma(truth, seeds, num_sims, rng_seed)?.mean);
            record.sigma_method = Some("monte_carlo");
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Seed of trial `i`, derived so trials are independent and reproducible.
pub fn trial_seed(rng_seed: u64, trial: usize) -> u64 {
    rng::stream(rng_seed, Domain::Trial, trial as u64).random()
}

/// Repeats generate → pipeline → evaluate `trials` times on the configured
/// graph. Trials run in parallel; rows come back in trial order.
pub fn run_trials(cfg: &ExperimentConfig, timing: bool) -> Result<Vec<MetricsRecord>> {
    let graph = cfg.build_graph()?;
    let dist = cfg.build_seed_distribution(graph.n())?;
    let t = ExperimentConfig::require(&cfg.t, "t")?;
    let trials = cfg.trials.unwrap_or(1);
    let base = cfg.request()?;
    if base.pipeline.model() != graph.model() {
        return Err(Error::ModelMismatch { expected: base.pipeline.model(), found: graph.model() });
    }
    let num_sims = cfg.num_sims.unwrap_or(DEFAULT_NUM_SIMS);
    let beta = cfg.assumptions.map_or(AssumptionParams::default().beta, |a| a.beta);
    let opts = ImsOptions { assumptions: cfg.assumptions, ..Default::default() };
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let start = Instant::now();
            let seed = trial_seed(base.rng_seed, i);
            let ds = generate_dataset(&graph, &dist, t, seed)?;
            let request = ImsRequest { rng_seed: seed, ..base };
            let algo = GreedyIm { num_sims, rng_seed: seed };
            let result = ims::run(&ds, &request, &algo, &opts)?;
            let report = estimate(graph.model(), &collect_stats(&ds)?, None);
            let mut rec = MetricsRecord { trial: i, ..Default::default() };
            parameter_metrics(&report.estimate.param_hat, &graph, beta, &mut rec);
            spread_metrics(&graph, &result.chosen.nodes, base.k, num_sims, seed, &mut rec)?;
            if timing {
                rec.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            Ok(rec)
        })
        .collect()
}

/// Nearest-rank quantiles of the present values of one metric.
pub fn quantiles(values: impl IntoIterator<Item = f64>, qs: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Vec::new();
    }
    v.sort_by(f64::total_cmp);
    qs.iter()
        .map(|q| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_estimate_metrics() {
        let g = Graph::new(3, Model::Ic, &[(0, 1, 0.5), (1, 2, 0.4)]).unwrap();
        let mut r = MetricsRecord::default();
        parameter_metrics(g.param_matrix(), &g, 0.3, &mut r);
        assert_eq!(r.max_param_error, Some(0.0));
        assert_eq!((r.precision, r.recall), (Some(1.0), Some(1.0)));
        let (best, _) = exact_optimal_seeds(&g, 1).unwrap();
        spread_metrics(&g, &best, 1, 10, 0, &mut r).unwrap();
        assert_eq!(r.ratio, Some(1.0));
    }

    #[test]
    fn csv_has_versioned_header() {
        let csv = metrics_csv(&[MetricsRecord { trial: 3, ratio: Some(0.5), ..Default::default() }]);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_SCHEMA);
        assert_eq!(lines[1].split(',').count(), lines[2].split(',').count());
        assert!(lines[2].starts_with("3,"));
    }

    #[test]
    fn flags_override_file_values() {
        let file = ExperimentConfig { t: Some(10), k: Some(2), ..Default::default() };
        let flags = ExperimentConfig { t: Some(20), ..Default::default() };
        let merged = file.overridden_by(flags);
        assert_eq!((merged.t, merged.k), (Some(20), Some(2)));
        assert!(merged.rng_seed().is_err());
    }

    #[test]
    fn quantile_ranks() {
        assert_eq!(quantiles([3.0, 1.0, 2.0, 4.0], &[0.0, 0.5, 1.0]), vec![1.0, 2.0, 4.0]);
        assert!(quantiles([], &[0.5]).is_empty());
    }

    #[test]
    fn trials_are_ordered_and_reproducible() {
        let cfg = ExperimentConfig {
            graph: Some(GraphSource::Random(RandomGraphSpec { n: 5, density: 0.3, param_range: (0.3, 0.8), rng_seed: 1 })),
            seed_distribution: Some(SeedSource::Uniform(0.3)),
            model: Some(Model::Ic),
            t: Some(2000),
            rng_seed: Some(5),
            pipeline: Some(Pipeline::IcA1),
            k: Some(1),
            num_sims: Some(500),
            trials: Some(3),
            ..Default::default()
        };
        let a = run_trials(&cfg, false).unwrap();
        assert_eq!(a.iter().map(|r| r.trial).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(a, run_trials(&cfg, false).unwrap());
    }
}
