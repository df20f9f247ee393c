//! `thermolag` command-line runner.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 configuration or input
//! error, 3 reference solver failure, 4 nonfinite training loss, 5 Newton
//! divergence during simulation.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use thermolag::integrators::{rollout, IntegratorOptions, Trajectory};
use thermolag::nets::ModelFile;
use thermolag::parallel::Execution;
use thermolag::state::TrajectoryDataset;
use thermolag::systems::{System, Tolerance};
use thermolag::training::{
    compare_tables, generate_dataset, reconstruction, reference_trajectory, train_from, Models, Preset, Regime, Table,
    TrainConfig, TrainState,
};
use thermolag::Error;

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "thermolag", version, about = "Learn and simulate thermodynamically consistent dynamics")]
struct Cli {
    /// Worker threads; 1 runs everything serially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample trajectories with the reference solver and write observable pairs.
    GenData(RunArgs),
    /// Fit the unknown side of (G, F) to a dataset.
    Train(TrainArgs),
    /// Roll the variational integrator from an initial observable state.
    Simulate(SimulateArgs),
    /// Compare a trajectory CSV with a reference CSV.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RegimeArg {
    #[value(name = "learn_G")]
    LearnG,
    #[value(name = "learn_F")]
    LearnF,
    #[value(name = "learn_both")]
    LearnBoth,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration, used when no config file is given.
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
    /// System for a preset: piston or rigid_body.
    #[arg(long, default_value = "piston")]
    system: String,
    /// Regime for a preset; defaults to learn_F for the piston and learn_G for the rigid body.
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Dataset CSV; generated from the configuration when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Override the number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Configuration supplying the system and integrator options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "piston")]
    system: String,
    /// Learned G model file; the exact G is used otherwise.
    #[arg(long)]
    g_model: Option<PathBuf>,
    /// Learned force model file, one per entropy channel in order.
    #[arg(long = "f-model")]
    f_models: Vec<PathBuf>,
    /// Initial observable state, comma separated; defaults to the system's validation state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    /// Also write the reference solution on the same grid.
    #[arg(long)]
    reference: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::NewtonDiverged { .. } => 5,
        Error::NonfiniteLoss { .. } => 4,
        Error::StepSizeUnderflow { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = error.downcast_ref::<Error>().map_or(1, exit_code);
        Failure { code, error }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, error: e.into() }
    }
}

fn config_error(msg: impl std::fmt::Display) -> Failure {
    Failure { code: 2, error: anyhow::anyhow!("configuration error: {msg}") }
}

fn default_regime(system: &str) -> Regime {
    if system == "rigid_body" {
        Regime::LearnG
    } else {
        Regime::LearnF
    }
}

fn load_config(args: &RunArgs) -> Result<TrainConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<TrainConfig>(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        None => {
            let regime = match args.regime {
                Some(RegimeArg::LearnG) => Regime::LearnG,
                Some(RegimeArg::LearnF) => Regime::LearnF,
                Some(RegimeArg::LearnBoth) => Regime::LearnBoth,
                None => default_regime(&args.system),
            };
            let preset = match args.preset {
                PresetArg::Paper => Preset::Paper,
                PresetArg::Desk => Preset::Desk,
            };
            TrainConfig::preset(&args.system, regime, preset).map_err(config_error)?
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn gen_data(args: &RunArgs, exec: Execution, m: &mut RunManifest) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    m.set_config(&cfg, cfg.seed);
    if let Some(c) = &args.config {
        m.input(c)?;
    }
    let system = cfg.system()?;
    let data = generate_dataset(&system, &cfg.dataset, cfg.seed, exec)
        .map_err(|e| Failure { code: 3, error: anyhow::anyhow!("reference solver failed: {e}") })?;
    create_out(&args.out)?;
    let path = args.out.join("dataset.csv");
    data.write_csv(&path)?;
    m.output(&path)?;
    m.output(&thermolag::state::meta_path(&path))?;
    eprintln!("wrote {} pairs to {}", data.len(), path.display());
    Ok(())
}

fn write_loss_csv(path: &Path, state: &TrainState) -> Result<(), Failure> {
    let mut text = String::from("epoch,loss,lr\n");
    for r in &state.history {
        text.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.lr));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn save_models(out: &Path, models: &Models, m: &mut RunManifest) -> Result<(), Failure> {
    if let Some(g) = models.g_file() {
        let p = out.join("G.json");
        g.save(&p)?;
        m.output(&p)?;
    }
    for (i, f) in models.f_files().iter().enumerate() {
        let p = out.join(format!("F_{i}.json"));
        f.save(&p)?;
        m.output(&p)?;
    }
    Ok(())
}

fn train(args: &TrainArgs, exec: Execution, m: &mut RunManifest) -> Result<(), Failure> {
    let mut cfg = load_config(&args.run)?;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    m.set_config(&cfg, cfg.seed);
    if let Some(c) = &args.run.config {
        m.input(c)?;
    }
    let system = cfg.system()?;
    let out = &args.run.out;
    create_out(out)?;
    let data = match &args.dataset {
        Some(p) => {
            m.input(p)?;
            let d = TrajectoryDataset::read_csv(p)?;
            if d.meta.system != system.name() || d.layout != system.layout() {
                return Err(config_error(format!(
                    "dataset holds `{}` data but the configuration trains `{}`",
                    d.meta.system,
                    system.name()
                )));
            }
            d
        }
        None => {
            let d = generate_dataset(&system, &cfg.dataset, cfg.seed, exec)
                .map_err(|e| Failure { code: 3, error: anyhow::anyhow!("reference solver failed: {e}") })?;
            let p = out.join("dataset.csv");
            d.write_csv(&p)?;
            m.output(&p)?;
            m.output(&thermolag::state::meta_path(&p))?;
            d
        }
    };
    let mut models = Models::for_config(&cfg)?;
    let state = match &args.resume {
        Some(p) => {
            m.input(p)?;
            TrainState::load(p)?
        }
        None => TrainState::new(models.theta()),
    };
    let ckpt = out.join("checkpoint.json");
    let loss_csv = out.join("loss.csv");
    let mut last = state.clone();
    let result = train_from(&cfg, &data, exec, &mut models, state, &mut |s| {
        s.save(&ckpt)?;
        last = s.clone();
        Ok(())
    });
    write_loss_csv(&loss_csv, &last)?;
    m.output(&loss_csv)?;
    m.output(&ckpt)?;
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            save_models(out, &models, m)?;
            return Err(e.into());
        }
    };
    save_models(out, &models, m)?;
    let recon = if cfg.eval_steps > 0 {
        match reconstruction(&models, cfg.dataset.h, cfg.eval_steps, &cfg.integrator_options(), Tolerance::default()) {
            Ok(metrics) => Some(serde_json::to_value(metrics).context("serialising metrics")?),
            Err(e) => Some(serde_json::json!({ "error": e.to_string() })),
        }
    } else {
        None
    };
    let mut summary = serde_json::to_value(&report).context("serialising report")?;
    summary["orders_of_reduction"] = serde_json::json!(report.orders_of_reduction());
    summary["reconstruction"] = recon.unwrap_or(serde_json::Value::Null);
    // the history is already in loss.csv
    summary.as_object_mut().unwrap().remove("history");
    let rp = out.join("report.json");
    std::fs::write(&rp, serde_json::to_string_pretty(&summary).context("serialising report")?)?;
    m.output(&rp)?;
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "loss {:.3e} -> {:.3e} ({:.2} orders) in {:.1} s",
        report.initial_loss,
        report.best_loss,
        report.orders_of_reduction(),
        report.wall_time_s
    );
    Ok(())
}

fn simulate(args: &SimulateArgs, m: &mut RunManifest) -> Result<(), Failure> {
    let (system, opts) = match &args.config {
        Some(p) => {
            m.input(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| config_error(format!("{}: {e}", p.display())))?;
            let cfg: TrainConfig = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", p.display())))?;
            m.set_config(&cfg, args.seed.unwrap_or(cfg.seed));
            (cfg.system().map_err(config_error)?, cfg.integrator_options())
        }
        None => {
            m.set_value(serde_json::json!({ "system": args.system, "steps": args.steps, "h": args.h }), args.seed.unwrap_or(0));
            (System::by_name(&args.system).map_err(config_error)?, IntegratorOptions::default())
        }
    };
    if !(args.h > 0.0) {
        return Err(config_error("h must be positive"));
    }
    let g = match &args.g_model {
        Some(p) => {
            m.input(p)?;
            Some(ModelFile::load(p)?)
        }
        None => None,
    };
    let mut fs = Vec::new();
    for p in &args.f_models {
        m.input(p)?;
        fs.push(ModelFile::load(p)?);
    }
    let models = Models::from_files(&system, g.as_ref(), &fs).map_err(config_error)?;
    let layout = system.layout();
    let (x0, phase0) = match &args.x0 {
        Some(x) => {
            if x.len() != layout.dim() {
                return Err(config_error(format!("x0 needs {} entries, got {}", layout.dim(), x.len())));
            }
            (x.clone(), system.observable_to_phase(x).ok())
        }
        None => {
            let y0 = system.validation_phase();
            (system.phase_to_observable(&y0)?, Some(y0))
        }
    };
    create_out(&args.out)?;
    let traj: Trajectory =
        rollout(models.g(), models.f(), &layout, &x0, args.h, args.steps, &opts, phase0.as_deref()).map_err(|e| {
            let code = exit_code(&e);
            let msg = match &e {
                Error::StepFailed { step, source } => format!("simulation failed at step {step}: {source}"),
                other => format!("simulation failed: {other}"),
            };
            Failure { code, error: anyhow::anyhow!(msg) }
        })?;
    let path = args.out.join("trajectory.csv");
    traj.write_csv(&path)?;
    m.output(&path)?;
    if args.reference {
        let y0 = phase0.ok_or_else(|| config_error("initial state has no phase-space preimage"))?;
        let r = reference_trajectory(&system, &y0, args.h, args.steps, Tolerance::default())
            .map_err(|e| Failure { code: 3, error: anyhow::anyhow!("reference solver failed: {e}") })?;
        let rp = args.out.join("reference.csv");
        r.write_csv(&rp)?;
        m.output(&rp)?;
    }
    eprintln!("energy band {:.3e}, min entropy increment {:.3e}", traj.energy_band(), traj.min_entropy_increment());
    Ok(())
}

fn evaluate(args: &EvaluateArgs, m: &mut RunManifest) -> Result<(), Failure> {
    m.input(&args.trajectory)?;
    m.input(&args.reference)?;
    m.set_value(serde_json::json!({}), 0);
    let a = Table::read_csv(&args.trajectory)?;
    let b = Table::read_csv(&args.reference)?;
    let metrics = compare_tables(&a, &b)?;
    create_out(&args.out)?;
    let path = args.out.join("metrics.json");
    let text = serde_json::to_string_pretty(&metrics).context("serialising metrics")?;
    std::fs::write(&path, &text)?;
    m.output(&path)?;
    println!("{text}");
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let exec = match cli.threads {
        Some(0) => return Err(config_error("--threads must be at least 1")),
        Some(1) => Execution::Serial,
        _ => Execution::Parallel,
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let (name, out) = match &cli.command {
        Command::GenData(a) => ("gen-data", &a.out),
        Command::Train(a) => ("train", &a.run.out),
        Command::Simulate(a) => ("simulate", &a.out),
        Command::Evaluate(a) => ("evaluate", &a.out),
    };
    let mut m = RunManifest::start(name);
    match &cli.command {
        Command::GenData(a) => gen_data(a, exec, &mut m)?,
        Command::Train(a) => train(a, exec, &mut m)?,
        Command::Simulate(a) => simulate(a, &mut m)?,
        Command::Evaluate(a) => evaluate(a, &mut m)?,
    }
    m.finish(&out.join("manifest.json"))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
