use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use simsel::harness::{
    emit_plot_data, generate, penalty_matrix, read_records, run_al_experiment, traces_from_records,
    write_records, DataSource, ExperimentConfig, ScenarioKind, ScenarioSpec,
};
use simsel::kernel::assemble_joint_kernel;
use simsel::optimizer::{maximize, DEFAULT_EPSILON};
use simsel::sim::SimParams;
use simsel::strategies::DEFAULT_RIDGE;
use simsel::{
    AcquisitionObjective, EmbeddingMatrix, GreedyOptions, OptimizerKind, Region, SimVariant,
    SimilarityKernel, StrategyKind, StrategySpec, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "simsel",
    version,
    about = "OOD-aware subset selection and active learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic ID/OOD dataset.
    GenScenario(GenArgs),
    /// Run active learning experiments and write one JSON record per method and seed.
    Run(RunArgs),
    /// Pairwise significance counts from a results directory.
    PenaltyMatrix(PenaltyArgs),
    /// Per-round accuracy and cumulative ID tables from a results directory.
    PlotData(PlotArgs),
    /// One-shot subset selection from a kernel cache or an embedding file.
    Select(SelectArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario kind: A, B, C or D.
    #[arg(long, default_value = "A")]
    kind: ScenarioKind,
    /// Divide every preset split size by this factor.
    #[arg(long, default_value_t = 1)]
    scale: usize,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long, default_value_t = 0)]
    scenario_seed: u64,
}

impl ScenarioArgs {
    fn spec(&self) -> ScenarioSpec {
        let mut spec = ScenarioSpec::preset(self.kind).scaled(self.scale);
        if let Some(s) = self.separation {
            spec.separation = s;
        }
        spec.seed = self.scenario_seed;
        spec
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the binary companion (`.f32` plus `.json` manifest) next to the CSV.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset CSV or binary manifest; a generated scenario is used when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated strategy names, or `all`.
    #[arg(long, default_value = "flcmi,random")]
    strategy: String,
    #[arg(long, default_value_t = 30)]
    budget: usize,
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    /// A count `N` (seeds 0..N) or a comma-separated list.
    #[arg(long, default_value = "5")]
    seeds: String,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value = "lazy")]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PenaltyArgs {
    /// Directory of result JSONs.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    results: PathBuf,
    /// Directory receiving accuracy.csv and cumulative_id.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    /// Kernel cache file.
    #[arg(
        long,
        conflicts_with = "features",
        required_unless_present = "features"
    )]
    kernel: Option<PathBuf>,
    /// Embedding CSV, one row per item.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Information measure.
    #[arg(long, default_value = "flcmi")]
    measure: SimVariant,
    /// Comma-separated row indices of the query set.
    #[arg(long, default_value = "")]
    query: String,
    /// Comma-separated row indices of the private set.
    #[arg(long, default_value = "")]
    private: String,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value = "lazy")]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Diagonal ridge for log-determinant measures.
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_indices(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().with_context(|| format!("bad index '{t}'")))
        .collect()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if s.contains(',') {
        return s
            .split(',')
            .map(|t| t.trim().parse().with_context(|| format!("bad seed '{t}'")))
            .collect();
    }
    let n: u64 = s
        .trim()
        .parse()
        .with_context(|| format!("bad seed count '{s}'"))?;
    Ok((0..n).collect())
}

fn parse_strategies(s: &str) -> Result<Vec<StrategyKind>> {
    if s.trim() == "all" {
        return Ok(StrategyKind::ALL.to_vec());
    }
    s.split(',')
        .map(|t| t.trim().parse::<StrategyKind>().map_err(Into::into))
        .collect()
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_scenario(a: GenArgs) -> Result<()> {
    let data = generate(&a.scenario.spec())?;
    if a.binary {
        let dir = a.out.parent().map(PathBuf::from).unwrap_or_default();
        let stem = a
            .out
            .file_stem()
            .and_then(|s| s.to_str())
            .context("output path needs a file name")?;
        let manifest = data.write_binary(&dir, stem)?;
        info!("wrote {} rows and {}", data.len(), manifest.display());
    } else {
        data.write_csv(&a.out)?;
        info!("wrote {} rows to {}", data.len(), a.out.display());
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let source = match &a.data {
        Some(p) => DataSource::File(p.clone()),
        None => DataSource::Scenario(a.scenario.spec()),
    };
    let template = StrategySpec {
        optimizer: a.optimizer,
        epsilon: a.epsilon,
        ridge: a.ridge,
        eta: a.eta,
        ..StrategySpec::new(StrategyKind::Random)
    };
    let strategies = parse_strategies(&a.strategy)?
        .into_iter()
        .map(|kind| StrategySpec { kind, ..template })
        .collect();
    let mut cfg = ExperimentConfig::new(source, strategies);
    cfg.budget = a.budget;
    cfg.rounds = a.rounds;
    cfg.seeds = parse_seeds(&a.seeds)?;
    if let Some(e) = a.max_epochs {
        cfg.train = TrainConfig {
            max_epochs: e,
            ..cfg.train
        };
    }
    let records = run_al_experiment(&cfg)?;
    fs::create_dir_all(&a.out)?;
    fs::write(
        a.out.join("config.json"),
        serde_json::to_string_pretty(&cfg)?,
    )?;
    let paths = write_records(&records, &a.out)?;
    info!("wrote {} records to {}", paths.len(), a.out.display());
    for r in &records {
        println!(
            "{:<10} seed {:<3} final accuracy {:.4}  ID picked {}",
            r.method,
            r.seed,
            r.final_test_accuracy,
            r.rounds.last().map_or(0, |m| m.cumulative_id)
        );
    }
    Ok(())
}

fn penalty(a: PenaltyArgs) -> Result<()> {
    let records = read_records(&a.results)?;
    if records.is_empty() {
        bail!("no result records in {}", a.results.display());
    }
    let m = penalty_matrix(&traces_from_records(&records), a.alpha)?;
    let mut buf = Vec::new();
    m.write_csv_to(&mut buf)?;
    write_or_print(a.out.as_ref(), &String::from_utf8(buf)?)
}

fn plot(a: PlotArgs) -> Result<()> {
    let records = read_records(&a.results)?;
    for p in emit_plot_data(&records, &a.out)? {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn select(a: SelectArgs) -> Result<()> {
    let query = parse_indices(&a.query)?;
    let private = parse_indices(&a.private)?;
    let base = match (&a.kernel, &a.features) {
        (Some(p), _) => SimilarityKernel::read_cache(p)
            .with_context(|| format!("reading kernel {}", p.display()))?,
        (None, Some(p)) => {
            let e = EmbeddingMatrix::read_csv(p)
                .with_context(|| format!("reading embeddings {}", p.display()))?;
            let none = EmbeddingMatrix::empty(e.dim())?;
            assemble_joint_kernel(&e, &none, &none, a.measure.is_facility_location(), 0.0)?
        }
        (None, None) => bail!("either --kernel or --features is required"),
    };
    let n = base.size();
    let mut regions = vec![Region::Unlabeled; n];
    for (set, region, what) in [
        (&query, Region::Query, "query"),
        (&private, Region::Private, "private"),
    ] {
        for &i in set {
            if i >= n {
                bail!("{what} index {i} is out of range for {n} items");
            }
            if regions[i] != Region::Unlabeled {
                bail!("index {i} is listed in both the query and the private set");
            }
            regions[i] = region;
        }
    }
    let kernel = base.with_regions(regions)?;
    let params = SimParams {
        eta: a.eta,
        ridge: if a.measure.is_facility_location() {
            0.0
        } else {
            a.ridge
        },
    };
    let mut obj = AcquisitionObjective::new(a.measure, &kernel, query, private, params)?;
    let candidates = obj.candidates().to_vec();
    let result = maximize(
        &mut obj,
        &candidates,
        a.budget,
        a.optimizer,
        a.epsilon,
        a.seed,
        &GreedyOptions::default(),
    )?;
    let text = serde_json::to_string_pretty(&result)? + "\n";
    write_or_print(a.out.as_ref(), &text)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Ok(v) = std::env::var("SIMSEL_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("SIMSEL_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            bail!("SIMSEL_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match Cli::parse().command {
        Command::GenScenario(a) => gen_scenario(a),
        Command::Run(a) => run(a),
        Command::PenaltyMatrix(a) => penalty(a),
        Command::PlotData(a) => plot(a),
        Command::Select(a) => select(a),
    }
}
