use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use stpkit::dataset::{GridSpec, Split, DENSE_FRACTIONS, SPARSE_FRACTIONS};
use stpkit::exact::DEFAULT_TERMINAL_CAP;
use stpkit::generators::Family;
use stpkit::harness::{distribution_stats, evaluate, histograms_csv, Method};
use stpkit::models::{load_model, predict_scores, save_model, train, TrainConfig, Variant};
use stpkit::steinlib::parse_stp;
use stpkit::{dataset::Dataset, Execution, StpInstance};

#[derive(Parser)]
#[command(
    name = "stpkit",
    version,
    about = "Steiner tree instances, solvers and learned heuristics"
)]
struct Cli {
    /// Run per-instance work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory over a grid of generator settings.
    Generate(GenerateArgs),
    /// Label a dataset with exact solutions.
    Label(LabelArgs),
    /// Train a node scorer on the training split.
    Train(TrainArgs),
    /// Print node scores for one instance.
    Score(ScoreArgs),
    /// Solve one instance.
    Solve(SolveArgs),
    /// Approximation-ratio report over a labeled dataset.
    Eval(EvalArgs),
    /// Density and radius histograms per family, as CSV.
    Stats(StatsArgs),
    /// Validate an STP file.
    Parse(ParseArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_delimiter = ',', default_value = "er,ws,ba,ge")]
    families: Vec<Family>,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60")]
    sizes: Vec<usize>,
    /// Terminal fractions; defaults to both the sparse and dense sweeps.
    #[arg(long, value_delimiter = ',')]
    fractions: Vec<f64>,
    /// Instances per grid cell.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Integer weights uniform in 1..=10 instead of unit weights.
    #[arg(long)]
    weighted: bool,
    #[arg(long)]
    er_p: Option<f64>,
    #[arg(long)]
    ws_k: Option<usize>,
    #[arg(long)]
    ws_p: Option<f64>,
    #[arg(long)]
    ba_m: Option<usize>,
    #[arg(long)]
    ge_eps: Option<f64>,
    /// Also label instances with at most this many terminals.
    #[arg(long)]
    exact_cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TERMINAL_CAP)]
    exact_cap: usize,
    /// Reassign the train/test split with this seed.
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    variant: Variant,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the per-epoch loss as CSV.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    Exact,
    #[value(name = "2approx")]
    TwoApprox,
    H1,
    H2,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    method: SolveMethod,
    #[arg(long)]
    instance: PathBuf,
    /// Scorer for h1 and h2.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "exact,2approx"
    )]
    methods: Vec<SolveMethod>,
    /// Scorers for h1 and h2; each one yields its own rows.
    #[arg(long)]
    model: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Directory for report.json, rows.csv and summary.csv.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    file: PathBuf,
}

fn read_instance(path: &Path) -> Result<StpInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_stp(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn generate(args: GenerateArgs, exec: Execution) -> Result<()> {
    let fractions = if args.fractions.is_empty() {
        SPARSE_FRACTIONS
            .iter()
            .chain(&DENSE_FRACTIONS)
            .copied()
            .collect()
    } else {
        args.fractions
    };
    let grid = GridSpec {
        families: args.families,
        sizes: args.sizes,
        fractions,
        seeds_per_cell: args.seeds,
        weighted: args.weighted,
        base_seed: args.seed,
    };
    let mut configs = grid.configs();
    for c in &mut configs {
        if args.er_p.is_some() {
            c.er_p = args.er_p;
        }
        c.ws_k = args.ws_k.unwrap_or(c.ws_k);
        c.ws_p = args.ws_p.unwrap_or(c.ws_p);
        c.ba_m = args.ba_m.unwrap_or(c.ba_m);
        c.ge_eps = args.ge_eps.unwrap_or(c.ge_eps);
        c.validate()?;
    }
    let mut ds = stpkit::dataset::generate_dataset(&configs, exec);
    if let Some(cap) = args.exact_cap {
        ds.label(cap, exec);
    }
    ds.assign_split(args.split_seed);
    ds.save(&args.out)?;
    println!(
        "wrote {} instances ({} labeled) to {}",
        ds.len(),
        ds.labeled().count(),
        args.out.display()
    );
    Ok(())
}

fn label(args: LabelArgs, exec: Execution) -> Result<()> {
    let mut ds = load_dataset(&args.dataset)?;
    ds.label(args.exact_cap, exec);
    if let Some(seed) = args.split_seed {
        ds.assign_split(seed);
    }
    ds.save(&args.dataset)?;
    println!("{} of {} instances labeled", ds.labeled().count(), ds.len());
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let ds = load_dataset(&args.dataset)?;
    let config = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let out = train(args.variant, &ds, &config)?;
    save_model(&out.params, &args.out)?;
    if let Some(path) = args.loss_csv {
        let mut csv = String::from("epoch,loss\n");
        for (i, l) in out.loss_curve.iter().enumerate() {
            csv.push_str(&format!("{i},{l}\n"));
        }
        fs::write(path, csv)?;
    }
    println!(
        "{} trained: eval loss {:.6} -> {:.6}",
        args.variant, out.initial_loss, out.final_loss
    );
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let inst = read_instance(&args.instance)?;
    let scores = predict_scores(&model, &inst)?;
    println!(
        "{}",
        json!({ "id": inst.id, "variant": model.variant, "scores": scores.0 })
    );
    Ok(())
}

fn method_for(m: SolveMethod, model: Option<&Arc<stpkit::models::ModelParams>>) -> Result<Method> {
    let need = |name: &str| {
        model
            .cloned()
            .with_context(|| format!("method {name} needs --model"))
    };
    Ok(match m {
        SolveMethod::Exact => Method::Exact,
        SolveMethod::TwoApprox => Method::TwoApprox,
        SolveMethod::H1 => Method::H1(need("h1")?),
        SolveMethod::H2 => Method::H2(need("h2")?),
    })
}

fn solve(args: SolveArgs) -> Result<()> {
    let inst = read_instance(&args.instance)?;
    let model = args
        .model
        .as_deref()
        .map(load_model)
        .transpose()?
        .map(Arc::new);
    let method = method_for(args.method, model.as_ref())?;
    let tree = method.run(&inst)?;
    let g = inst.graph();
    println!(
        "{}",
        json!({
            "id": inst.id,
            "method": method.name(),
            "cost": g.real(tree.cost()),
            "edges": tree.edge_pairs(),
        })
    );
    Ok(())
}

fn eval(args: EvalArgs, exec: Execution) -> Result<()> {
    let ds = load_dataset(&args.dataset)?;
    let models = args
        .model
        .iter()
        .map(|p| load_model(p).map(Arc::new))
        .collect::<stpkit::Result<Vec<_>>>()?;
    let mut methods = Vec::new();
    for &m in &args.methods {
        match m {
            SolveMethod::Exact | SolveMethod::TwoApprox => methods.push(method_for(m, None)?),
            SolveMethod::H1 | SolveMethod::H2 => {
                if models.is_empty() {
                    bail!("methods h1 and h2 need at least one --model");
                }
                for model in &models {
                    methods.push(method_for(m, Some(model))?);
                }
            }
        }
    }
    let split = match args.split {
        SplitArg::Train => Some(Split::Train),
        SplitArg::Test => Some(Split::Test),
        SplitArg::All => None,
    };
    let report = evaluate(&methods, &ds, split, exec)?;
    if let Some(dir) = &args.report {
        report.write(dir)?;
    }
    print!("{}", report.summary_csv());
    if report.unlabeled > 0 {
        eprintln!("{} unlabeled instances skipped", report.unlabeled);
    }
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let ds = load_dataset(&args.dataset)?;
    let csv = histograms_csv(&distribution_stats(&ds)?);
    match args.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn parse(args: ParseArgs) -> Result<()> {
    let inst = read_instance(&args.file)?;
    println!(
        "ok {}: {} nodes, {} edges, {} terminals",
        inst.id,
        inst.n(),
        inst.graph().m(),
        inst.terminals().len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Generate(a) => generate(a, exec),
        Command::Label(a) => label(a, exec),
        Command::Train(a) => train_cmd(a),
        Command::Score(a) => score(a),
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a, exec),
        Command::Stats(a) => stats(a),
        Command::Parse(a) => parse(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
