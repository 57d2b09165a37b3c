use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ims_core::dataset::{generate_dataset, CascadeDataset, DatasetReader};
use ims_core::experiment::{
    self, metrics_csv, parameter_metrics, quantiles, spread_metrics, ExperimentConfig, GraphSource,
    MetricsRecord, RandomGraphSpec, SeedSource,
};
use ims_core::graph::fmt_real;
use ims_core::ims::{self, ImsOptions, Pipeline};
use ims_core::inference::{
    check_assumptions, collect_stats_streaming, estimate, recover_structure, sample_size,
    theorem_sample_size, AssumptionSet, SampleSizeTask,
};
use ims_core::influence::{GreedyIm, DEFAULT_NUM_SIMS};
use ims_core::oracle;
use ims_core::{AssumptionParams, Graph, Model, SeedDistribution};

/// Influence maximization from diffusion cascades.
#[derive(Parser)]
#[command(name = "ims", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a graph, a seed distribution and a cascade dataset.
    Generate(GenerateArgs),
    /// Estimate edge parameters from a dataset.
    Infer(InferArgs),
    /// Recover the edge set by thresholding estimates at beta/2.
    Recover(RecoverArgs),
    /// Run a sample-based influence-maximization pipeline.
    Ims(ImsArgs),
    /// Exact quantities on a small graph.
    Oracle(OracleArgs),
    /// Score pipeline results against the true graph.
    Evaluate(EvaluateArgs),
    /// Evaluate a sample-size bound.
    SampleSize(SampleSizeArgs),
    /// Check the seed-distribution assumptions against a dataset.
    Assumptions(AssumptionArgs),
}

#[derive(Args, Default)]
struct SourceArgs {
    /// JSON experiment config; flags take precedence over its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph file.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Random graph as N,DENSITY,LO,HI,SEED.
    #[arg(long, value_name = "SPEC")]
    random: Option<String>,
    #[arg(long)]
    model: Option<Model>,
    /// Seed-distribution file.
    #[arg(long)]
    seed_dist: Option<PathBuf>,
    /// Uniform seed probability.
    #[arg(long)]
    q: Option<f64>,
    /// Number of cascades.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl SourceArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        let graph = match (&self.graph, &self.random) {
            (Some(_), Some(_)) => bail!("--graph and --random are mutually exclusive"),
            (Some(p), None) => Some(GraphSource::File(p.clone())),
            (None, Some(spec)) => Some(GraphSource::Random(parse_random(spec)?)),
            (None, None) => None,
        };
        let seed_distribution = match (&self.seed_dist, self.q) {
            (Some(_), Some(_)) => bail!("--seed-dist and --q are mutually exclusive"),
            (Some(p), None) => Some(SeedSource::File(p.clone())),
            (None, Some(q)) => Some(SeedSource::Uniform(q)),
            (None, None) => None,
        };
        let flags = ExperimentConfig {
            graph,
            seed_distribution,
            model: self.model,
            t: self.t,
            rng_seed: self.rng_seed,
            output_dir: self.out_dir.clone(),
            ..Default::default()
        };
        flags.check_files()?;
        Ok(file.overridden_by(flags))
    }
}

fn parse_random(spec: &str) -> anyhow::Result<RandomGraphSpec> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let [n, density, lo, hi, seed] = parts[..] else {
        bail!("--random expects N,DENSITY,LO,HI,SEED");
    };
    Ok(RandomGraphSpec {
        n: n.parse()?,
        density: density.parse()?,
        param_range: (lo.parse()?, hi.parse()?),
        rng_seed: seed.parse()?,
    })
}

fn parse_nodes(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().with_context(|| format!("bad node '{x}'")))
        .collect()
}

fn output_dir(cfg: &ExperimentConfig) -> anyhow::Result<PathBuf> {
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    source: SourceArgs,
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let cfg = args.source.config()?;
    let seed = cfg.rng_seed()?;
    let t = ExperimentConfig::require(&cfg.t, "t")?;
    let graph = cfg.build_graph()?;
    let dist = cfg.build_seed_distribution(graph.n())?;
    let ds = generate_dataset(&graph, &dist, t, seed)?;
    let dir = output_dir(&cfg)?;
    graph.save(dir.join("graph.json"))?;
    dist.save(dir.join("seed_dist.json"))?;
    ds.save(dir.join("dataset.jsonl"))?;
    eprintln!("graph digest:     {}", ds.header.graph_digest);
    eprintln!("seed dist digest: {}", ds.header.seed_dist_digest);
    eprintln!("wrote {} cascades to {}", t, dir.join("dataset.jsonl").display());
    Ok(())
}

fn load_stats(path: &Path, model: Model) -> anyhow::Result<ims_core::inference::OneStepStats> {
    let reader = DatasetReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    if reader.header().model != model {
        return Err(ims_core::Error::ModelMismatch { expected: model, found: reader.header().model }.into());
    }
    Ok(collect_stats_streaming(reader)?)
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    model: Model,
    /// Accuracy the estimate is meant to achieve; recorded in the report.
    #[arg(long)]
    accuracy: Option<f64>,
    /// Also write the edges with estimates above beta/2.
    #[arg(long)]
    beta: Option<f64>,
    /// True graph; prints the largest entrywise error.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn edges_csv(edges: &[(usize, usize)]) -> String {
    let mut s = String::from("u,v\n");
    for (u, v) in edges {
        s.push_str(&format!("{u},{v}\n"));
    }
    s
}

fn cmd_infer(args: InferArgs) -> anyhow::Result<()> {
    let stats = load_stats(&args.dataset, args.model)?;
    let accuracy = args.accuracy.or(args.beta.map(|b| b / 2.0));
    let report = estimate(args.model, &stats, accuracy);
    fs::create_dir_all(&args.out_dir)?;
    write(&args.out_dir.join("report.json"), report.to_json())?;
    write(&args.out_dir.join("report.csv"), report.to_csv())?;
    if let Some(beta) = args.beta {
        let edges = recover_structure(&report, beta)?;
        write(&args.out_dir.join("edges.csv"), edges_csv(&edges))?;
        eprintln!("recovered {} edges", edges.len());
    }
    if let Some(p) = args.truth {
        let truth = Graph::load(&p)?;
        eprintln!("max entrywise error: {}", report.estimate.max_error(&truth));
    }
    eprintln!("estimated {} pairs from {} cascades", stats.n * stats.n.saturating_sub(1), stats.t);
    Ok(())
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "ic")]
    model: Model,
    #[arg(long)]
    beta: f64,
    /// Defaults to beta/2.
    #[arg(long)]
    accuracy: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_recover(args: RecoverArgs) -> anyhow::Result<()> {
    let stats = load_stats(&args.dataset, args.model)?;
    let report = estimate(args.model, &stats, Some(args.accuracy.unwrap_or(args.beta / 2.0)));
    let edges = recover_structure(&report, args.beta)?;
    write(&args.out, edges_csv(&edges))?;
    eprintln!("recovered {} edges", edges.len());
    Ok(())
}

#[derive(Args)]
struct ImsArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Dataset file; omit to run repeated trials on generated data.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    pipeline: Option<Pipeline>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    t_prime: Option<usize>,
    /// Upper bound on the maximum in-degree (LT).
    #[arg(long = "max-in-degree")]
    in_degree_bound: Option<usize>,
    /// Live-edge worlds for the greedy algorithm.
    #[arg(long)]
    num_sims: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Largest tolerated fraction of undefined estimates.
    #[arg(long, default_value_t = 0.5)]
    degeneracy_limit: f64,
    /// Record wall time per trial (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Result file for a single run.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_ims(args: ImsArgs) -> anyhow::Result<()> {
    let flags = ExperimentConfig {
        pipeline: args.pipeline,
        k: args.k,
        epsilon: args.epsilon,
        delta: args.delta,
        t_prime: args.t_prime,
        in_degree_bound: args.in_degree_bound,
        num_sims: args.num_sims,
        trials: args.trials,
        ..Default::default()
    };
    let cfg = args.source.config()?.overridden_by(flags);
    match args.dataset {
        Some(path) => {
            let request = cfg.request()?;
            let ds = CascadeDataset::load(&path).with_context(|| format!("loading {}", path.display()))?;
            let algo = GreedyIm { num_sims: cfg.num_sims.unwrap_or(DEFAULT_NUM_SIMS), rng_seed: request.rng_seed };
            let opts = ImsOptions { degeneracy_limit: args.degeneracy_limit, assumptions: cfg.assumptions };
            let result = ims::run(&ds, &request, &algo, &opts)?;
            let out = args.out.unwrap_or_else(|| PathBuf::from("ims_result.json"));
            write(&out, result.to_json())?;
            eprintln!("{}: chose {:?}", result.pipeline, result.chosen.nodes);
        }
        None => {
            let records = experiment::run_trials(&cfg, args.timing)?;
            let dir = output_dir(&cfg)?;
            write(&dir.join("metrics.csv"), metrics_csv(&records))?;
            summarize(&records);
        }
    }
    Ok(())
}

fn summarize(records: &[MetricsRecord]) {
    let qs = [0.0, 0.1, 0.5, 0.9, 1.0];
    eprintln!("{} rows; quantiles at {qs:?}", records.len());
    let show = |name: &str, values: Vec<f64>| {
        let q = quantiles(values, &qs);
        if !q.is_empty() {
            eprintln!("  {name}: {q:?}");
        }
    };
    show("max_param_error", records.iter().filter_map(|r| r.max_param_error).collect());
    show("sigma_sa", records.iter().filter_map(|r| r.sigma_sa).collect());
    show("ratio", records.iter().filter_map(|r| r.ratio).collect());
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(subcommand)]
    query: OracleQuery,
}

#[derive(Subcommand)]
enum OracleQuery {
    /// One-step activation probability of a node.
    Ap {
        #[arg(long)]
        node: usize,
        #[arg(long)]
        seed_dist: Option<PathBuf>,
        #[arg(long)]
        q: Option<f64>,
        /// Condition on this node's seed state.
        #[arg(long)]
        given: Option<usize>,
        /// With --given: whether that node is a seed.
        #[arg(long, default_value_t = false)]
        seeded: bool,
    },
    /// Expected final cascade size from a seed set.
    Sigma {
        /// Comma-separated node list.
        #[arg(long, default_value = "")]
        seeds: String,
    },
    /// Best seed set of size k.
    Optimal {
        #[arg(long)]
        k: usize,
    },
}

fn cmd_oracle(args: OracleArgs) -> anyhow::Result<()> {
    let graph = Graph::load(&args.graph).with_context(|| format!("loading {}", args.graph.display()))?;
    match args.query {
        OracleQuery::Ap { node, seed_dist, q, given, seeded } => {
            let dist = match (seed_dist, q) {
                (Some(p), None) => SeedDistribution::load(p)?,
                (None, Some(q)) => SeedDistribution::uniform(graph.n(), q)?,
                _ => bail!("give exactly one of --seed-dist and --q"),
            };
            let ap = match given {
                Some(u) => oracle::exact_ap_given(&graph, &dist, node, u, seeded)?,
                None => oracle::exact_ap(&graph, &dist, node)?,
            };
            println!("{ap}");
        }
        OracleQuery::Sigma { seeds } => {
            println!("{}", oracle::exact_sigma(&graph, &parse_nodes(&seeds)?)?);
        }
        OracleQuery::Optimal { k } => {
            let (seeds, sigma) = oracle::exact_optimal_seeds(&graph, k)?;
            println!("{}", json!({ "seeds": seeds, "sigma": sigma }));
        }
    }
    Ok(())
}

#[derive(Args)]
struct EvaluateArgs {
    /// True graph.
    #[arg(long)]
    graph: PathBuf,
    /// Pipeline result files, one row each.
    #[arg(long = "result")]
    results: Vec<PathBuf>,
    /// Estimation report files, paired with results by position.
    #[arg(long = "report")]
    reports: Vec<PathBuf>,
    #[arg(long, default_value_t = AssumptionParams::default().beta)]
    beta: f64,
    /// Simulations when the graph is too large for exact spread.
    #[arg(long, default_value_t = DEFAULT_NUM_SIMS)]
    num_sims: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn read_json(path: &Path) -> anyhow::Result<serde_json::Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    if args.results.is_empty() && args.reports.is_empty() {
        bail!("nothing to evaluate: pass --result and/or --report");
    }
    let truth = Graph::load(&args.graph).with_context(|| format!("loading {}", args.graph.display()))?;
    let n = truth.n();
    let rows = args.results.len().max(args.reports.len());
    let mut records = Vec::with_capacity(rows);
    let mut optimum_missing = false;
    for i in 0..rows {
        let mut rec = MetricsRecord { trial: i, ..Default::default() };
        if let Some(p) = args.reports.get(i) {
            let doc = read_json(p)?;
            let matrix: Vec<Vec<f64>> = serde_json::from_value(doc["param_hat"].clone())
                .with_context(|| format!("{}: missing param_hat", p.display()))?;
            let flat: Vec<f64> = matrix.concat();
            if flat.len() != n * n {
                bail!("{}: estimate is not {n}×{n}", p.display());
            }
            parameter_metrics(&flat, &truth, args.beta, &mut rec);
        }
        if let Some(p) = args.results.get(i) {
            let doc = read_json(p)?;
            let seeds: Vec<usize> = serde_json::from_value(doc["chosen"]["nodes"].clone())
                .with_context(|| format!("{}: missing chosen.nodes", p.display()))?;
            let k: usize = serde_json::from_value(doc["chosen"]["budget_k"].clone())
                .with_context(|| format!("{}: missing chosen.budget_k", p.display()))?;
            spread_metrics(&truth, &seeds, k, args.num_sims, args.rng_seed, &mut rec)?;
            optimum_missing |= rec.sigma_opt.is_none();
        }
        records.push(rec);
    }
    write(&args.out, metrics_csv(&records))?;
    if optimum_missing {
        eprintln!("note: optimal spread omitted, graph exceeds the exact-oracle limits");
    }
    summarize(&records);
    Ok(())
}

#[derive(Args)]
struct SampleSizeArgs {
    #[arg(long)]
    task: SampleSizeTask,
    #[arg(long)]
    n: usize,
    /// Maximum in-degree bound, used by the LT bounds.
    #[arg(long, default_value_t = 0)]
    d: usize,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Skip range checks, e.g. for plugging in 1 everywhere.
    #[arg(long)]
    formal: bool,
}

fn cmd_sample_size(args: SampleSizeArgs) -> anyhow::Result<()> {
    let d = AssumptionParams::default();
    let p = AssumptionParams {
        epsilon: args.epsilon.unwrap_or(d.epsilon),
        delta: args.delta.unwrap_or(d.delta),
        alpha: args.alpha.unwrap_or(d.alpha),
        gamma: args.gamma.unwrap_or(d.gamma),
        beta: args.beta.unwrap_or(d.beta),
        k: args.k.unwrap_or(d.k),
        ..d
    };
    let s = if args.formal {
        theorem_sample_size(args.task, &p, args.n, args.d)
    } else {
        sample_size(args.task, &p, args.n, args.d)?
    };
    println!(
        "{}",
        json!({ "task": s.task, "t": s.count, "value": fmt_real(s.value), "eta": fmt_real(s.eta) })
    );
    Ok(())
}

#[derive(Args)]
struct AssumptionArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    which: Which,
    #[arg(long, default_value_t = AssumptionParams::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = AssumptionParams::default().gamma)]
    gamma: f64,
    #[arg(long, default_value_t = AssumptionParams::default().c)]
    c: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Which {
    IcEstimation,
    IcSeedBudget,
    LtEstimation,
}

fn cmd_assumptions(args: AssumptionArgs) -> anyhow::Result<()> {
    let reader = DatasetReader::open(&args.dataset)?;
    let stats = collect_stats_streaming(reader)?;
    let which = match args.which {
        Which::IcEstimation => AssumptionSet::IcEstimation,
        Which::IcSeedBudget => AssumptionSet::IcSeedBudget,
        Which::LtEstimation => AssumptionSet::LtEstimation,
    };
    let p = AssumptionParams { alpha: args.alpha, gamma: args.gamma, c: args.c, k: args.k, ..Default::default() };
    let report = check_assumptions(&stats, &p, which)?;
    write(&args.out, serde_json::to_string_pretty(&report)?)?;
    eprintln!(
        "{}: alpha <= {:.4}, gamma <= {:.4}, c >= {:.4}",
        if report.passed { "passed" } else { "failed" },
        report.alpha_max,
        report.gamma_max,
        report.c_min
    );
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("IMS_THREADS") {
        let threads: usize = v.parse().with_context(|| format!("IMS_THREADS='{v}' is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Ims(a) => cmd_ims(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::SampleSize(a) => cmd_sample_size(a),
        Command::Assumptions(a) => cmd_assumptions(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
