//! `mixbo`: benchmark runs, baselines, service and plot-data export.

mod plot;

use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mixbo::acquisition::{Criterion, Regularization};
use mixbo::bench::{builtin_problems, problem, BenchmarkProblem};
use mixbo::driver::{read_history, run, write_artifacts, write_history, EvalStatus, Phase, Run, RunConfig, RunOutputs};
use mixbo::moea::Nsga2Config;
use mixbo::surrogate::KernelFamily;

use crate::plot::FrontSelection;

#[derive(Debug, Parser)]
#[command(name = "mixbo", version, about = "Mixed-variable multi-objective Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// DOE, enrichment to the budget, then both fronts.
    Run {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Initial LHS size.
        #[arg(long, default_value_t = 13)]
        doe: usize,
        /// Total evaluations, DOE included.
        #[arg(long, default_value_t = 81)]
        budget: usize,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate an LHS design only (history, no fronts).
    Doe {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 13)]
        doe: usize,
    },
    /// Baseline: LHS of the whole budget, then NSGA-II on surrogates of it.
    OfflineSbo {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 81)]
        budget: usize,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Start the HTTP ask-tell service.
    Serve {
        #[arg(long, env = mixbo_service::PORT_ENV, default_value_t = mixbo_service::DEFAULT_PORT)]
        port: u16,
        #[arg(long, env = mixbo_service::DATA_DIR_ENV, default_value = mixbo_service::DEFAULT_DATA_DIR)]
        data_dir: PathBuf,
    },
    /// Recompute fronts and proximity from a (possibly truncated) history.
    Report {
        #[arg(long)]
        history: PathBuf,
        /// Run config; defaults to config.json next to the history.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to `report/` next to the history.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        nsga: NsgaArgs,
    },
    /// One CSV per objective pair from an artifact directory.
    PlotData {
        /// Directory holding config.json, pf_database.csv and predicted_pf.csv.
        #[arg(long)]
        dir: PathBuf,
        /// Defaults to `plot/` inside `--dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Which fronts to export.
        #[arg(long, value_enum, default_value_t = FrontSelection::Both)]
        mode: FrontSelection,
    },
    /// List the benchmark catalog.
    List,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Catalog problem (see `mixbo list`).
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Artifact directory; defaults to `mixbo-runs/<command>-<problem>-s<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Infill criterion: ehvi, pi or mpi.
    #[arg(long, default_value = "ehvi")]
    acq: Criterion,
    /// Regularization: none, max or sum.
    #[arg(long, default_value = "sum")]
    reg: Regularization,
    /// Weight of the criterion in the regularized acquisition.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Correlation family: squared-exponential or matern52.
    #[arg(long, default_value = "squared-exponential")]
    kernel: KernelFamily,
    /// PLS components (0: one length scale per relaxed coordinate).
    #[arg(long, default_value_t = 2)]
    pls: usize,
    #[command(flatten)]
    nsga: NsgaArgs,
}

#[derive(Debug, Args)]
struct NsgaArgs {
    /// NSGA-II population for the predicted front.
    #[arg(long)]
    pop_size: Option<usize>,
    /// NSGA-II generations for the predicted front.
    #[arg(long)]
    generations: Option<usize>,
}

impl NsgaArgs {
    fn apply(&self, base: Nsga2Config) -> Nsga2Config {
        Nsga2Config {
            pop_size: self.pop_size.unwrap_or(base.pop_size),
            generations: self.generations.unwrap_or(base.generations),
            ..base
        }
    }
}

/// Problem lookup failure: exit code 2 with the catalog.
#[derive(Debug)]
struct UnknownProblem(String);

impl std::fmt::Display for UnknownProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown problem `{}`", self.0)
    }
}

impl std::error::Error for UnknownProblem {}

fn catalog() -> String {
    let mut s = String::from("available problems:\n");
    for p in builtin_problems() {
        s.push_str(&format!(
            "  {:<28} d'={:<4} {} objectives, {} constraints: {}\n",
            p.name,
            p.space.relaxed_dimension(),
            p.objective_names.len(),
            p.constraint_names.len(),
            p.description
        ));
    }
    s
}

fn lookup(name: &str) -> Result<BenchmarkProblem> {
    problem(name).ok_or_else(|| UnknownProblem(name.to_string()).into())
}

fn config_for(p: &BenchmarkProblem, doe: usize, budget: usize, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(p.space.clone(), p.objective_names.len(), p.constraint_names.len(), doe, budget);
    cfg.objective_names = p.objective_names.clone();
    cfg.constraint_names = p.constraint_names.clone();
    cfg.maximize = p.maximize.clone();
    cfg.seed = seed;
    cfg
}

fn apply_model(cfg: &mut RunConfig, m: &ModelArgs) {
    cfg.acquisition.criterion = m.acq;
    cfg.acquisition.reg = m.reg;
    cfg.acquisition.gamma = m.gamma;
    cfg.kernel.family = m.kernel;
    cfg.kernel.n_pls = m.pls;
    cfg.nsga2 = m.nsga.apply(cfg.nsga2);
}

fn out_dir(args: &ProblemArgs, command: &str) -> PathBuf {
    args.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("mixbo-runs/{command}-{}-s{}", args.problem, args.seed)))
}

fn summarize(run: &Run, out: &RunOutputs, dir: &Path) {
    let failed = run.history().iter().filter(|r| r.status == EvalStatus::Failed).count();
    println!("evaluations: {} ({} failed)", run.history().len(), failed);
    println!("pf_database: {} points", out.pf_database.len());
    println!("predicted_pf: {} points", out.predicted_pf.len());
    println!("{}", out.proximity.summary());
    for w in &out.warnings {
        println!("warning: {w}");
    }
    println!("artifacts: {}", dir.display());
}

fn optimize(args: &ProblemArgs, command: &str, doe: usize, budget: usize, model: &ModelArgs) -> Result<()> {
    let p = lookup(&args.problem)?;
    let mut cfg = config_for(&p, doe, budget, args.seed);
    apply_model(&mut cfg, model);
    cfg.validate().map_err(anyhow::Error::msg)?;
    let (state, outputs) = run(cfg, |q| Ok(p.evaluate(q)))?;
    let dir = out_dir(args, command);
    write_artifacts(&dir, &state, &outputs)?;
    summarize(&state, &outputs, &dir);
    Ok(())
}

fn doe_only(args: &ProblemArgs, doe: usize) -> Result<()> {
    let p = lookup(&args.problem)?;
    let cfg = config_for(&p, doe, doe, args.seed);
    cfg.validate().map_err(anyhow::Error::msg)?;
    let mut state = Run::new(cfg)?;
    while state.phase() != Phase::Done {
        let q = state.ask()?;
        let (f, g) = p.evaluate(&q);
        state.tell(&q, f, g, EvalStatus::Ok)?;
    }
    let dir = out_dir(args, "doe");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.json"), state.config().to_json())?;
    write_history(&state, std::fs::File::create(dir.join("history.csv"))?)?;
    println!("evaluations: {}", state.history().len());
    println!("feasible: {}", state.history().iter().filter(|r| r.feasible).count());
    println!("nondominated feasible: {}", state.archive().nondominated().len());
    println!("artifacts: {}", dir.display());
    Ok(())
}

fn report(history: &Path, config: Option<&Path>, out: Option<&Path>, nsga: &NsgaArgs) -> Result<()> {
    let base = history.parent().unwrap_or(Path::new("."));
    let config_path = config.map_or_else(|| base.join("config.json"), Path::to_path_buf);
    let text = std::fs::read_to_string(&config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let mut cfg = RunConfig::from_json(&text).with_context(|| format!("parsing {}", config_path.display()))?;
    cfg.nsga2 = nsga.apply(cfg.nsga2);
    let file = std::fs::File::open(history).with_context(|| format!("reading {}", history.display()))?;
    let records = read_history(&cfg, file).with_context(|| format!("parsing {}", history.display()))?;
    let state = Run::with_history(cfg, records)?;
    let outputs = state.finalize(&state.config().nsga2);
    let dir = out.map_or_else(|| base.join("report"), Path::to_path_buf);
    write_artifacts(&dir, &state, &outputs)?;
    if state.phase() != Phase::Done {
        println!(
            "note: history has {} of {} budgeted evaluations",
            state.history().len(),
            state.config().budget
        );
    }
    summarize(&state, &outputs, &dir);
    Ok(())
}

fn serve(port: u16, data_dir: PathBuf) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(mixbo_service::serve(SocketAddr::from((Ipv4Addr::UNSPECIFIED, port)), data_dir))?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { problem, doe, budget, model } => optimize(&problem, "run", doe, budget, &model),
        Command::Doe { problem, doe } => doe_only(&problem, doe),
        Command::OfflineSbo { problem, budget, model } => optimize(&problem, "offline-sbo", budget, budget, &model),
        Command::Serve { port, data_dir } => serve(port, data_dir),
        Command::Report {
            history,
            config,
            out,
            nsga,
        } => report(&history, config.as_deref(), out.as_deref(), &nsga),
        Command::PlotData { dir, out, mode } => {
            let out = out.unwrap_or_else(|| dir.join("plot"));
            let files = plot::write_pairs(&dir, &out, mode)?;
            for f in &files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::List => {
            print!("{}", catalog());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UnknownProblem>() => {
            eprintln!("error: {e}");
            eprint!("{}", catalog());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
