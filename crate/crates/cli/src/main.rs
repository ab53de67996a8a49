use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use prc_core::harness::{
    export_csv, optimal_config_matrix, run_plan, summarize, ConfigEntry, ExperimentPlan, Report,
    ResultTable, TaskKind,
};
use prc_core::substrate::{build_chain, simulate_from, DriveMode, InitialState};
use prc_core::tasks::{pwm3, single_harmonic, triple_harmonic};

#[derive(Parser)]
#[command(name = "prc", version, about = "Reservoir computing experiments on a simulated module chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one chain and write its trajectory.
    Simulate(SimulateArgs),
    /// Run a NARMA sweep (built-in grid unless --plan is given).
    Narma(RunArgs),
    /// Run a payload-estimation sweep.
    Payload(RunArgs),
    /// Run the actuation, reconstruction and classification sweep.
    Multitask(RunArgs),
    /// Run whatever task the plan file names.
    Sweep(SweepArgs),
    /// Rebuild summary tables from an existing results CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML plan file.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Overrides the plan seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the plan repetition count.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Configuration used as the reference in optimal.csv.
    #[arg(long, default_value = "C5")]
    baseline: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, default_value = "C5")]
    baseline: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// Substrate overrides and observation settings are taken from this plan.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Preset label (C1..C8).
    #[arg(long, default_value = "C5")]
    config: String,
    /// Base amplitude in metres, or the command level for actuated presets.
    #[arg(long, default_value_t = 0.006)]
    amplitude: f64,
    /// Single harmonic drive frequency; the triple harmonic is used when absent.
    #[arg(long)]
    frequency: Option<f64>,
    /// Seconds of simulated time.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Perturbs the initial state; the chain starts at equilibrium when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// results.csv written by a previous run.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, default_value = "C5")]
    baseline: String,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Narma(a) => task_cmd(TaskKind::NarmaSweep, a),
        Command::Payload(a) => task_cmd(TaskKind::PayloadSweep, a),
        Command::Multitask(a) => task_cmd(TaskKind::MultiTask, a),
        Command::Sweep(a) => {
            let plan = ExperimentPlan::load(&a.plan)
                .with_context(|| format!("reading plan {}", a.plan.display()))?;
            execute(plan, a.seed, a.repetitions, &a.out_dir, &a.baseline)
        }
        Command::Report(a) => {
            let table = ResultTable::load(&a.input)
                .with_context(|| format!("reading {}", a.input.display()))?;
            fs::create_dir_all(&a.out_dir)?;
            write_reports(&table, &a.out_dir, &a.baseline)?;
            Ok(failure_exit(&table))
        }
    }
}

fn task_cmd(task: TaskKind, a: RunArgs) -> Result<ExitCode> {
    let plan = match &a.plan {
        Some(path) => {
            let plan = ExperimentPlan::load(path)
                .with_context(|| format!("reading plan {}", path.display()))?;
            if plan.task != task {
                bail!(
                    "plan {} is a `{}` plan, not `{}`",
                    path.display(),
                    plan.task.name(),
                    task.name()
                );
            }
            plan
        }
        None => ExperimentPlan::default_for(task),
    };
    execute(plan, a.seed, a.repetitions, &a.out_dir, &a.baseline)
}

fn execute(
    mut plan: ExperimentPlan,
    seed: Option<u64>,
    repetitions: Option<usize>,
    out_dir: &Path,
    baseline: &str,
) -> Result<ExitCode> {
    if let Some(s) = seed {
        plan.seed = s;
    }
    if let Some(r) = repetitions {
        plan.repetitions = r;
    }
    plan.validate()?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join("plan.toml"), plan.to_toml_string())?;
    let table = run_plan::<f64>(&plan)?;
    export_csv(&Report::Table(&table), out_dir.join("results.csv"))?;
    write_reports(&table, out_dir, baseline)?;
    println!(
        "{} rows, {} failed -> {}",
        table.len(),
        table.failures().len(),
        out_dir.display()
    );
    Ok(failure_exit(&table))
}

fn write_reports(table: &ResultTable, out_dir: &Path, baseline: &str) -> Result<()> {
    let summary = summarize(table);
    export_csv(&Report::Summary(&summary), out_dir.join("summary.csv"))?;
    let narma = table.rows.iter().any(|r| r.order.is_some());
    let has_baseline = table.rows.iter().any(|r| r.config == baseline);
    if narma && has_baseline {
        match optimal_config_matrix(table, baseline) {
            Ok(cells) => export_csv(&Report::Optimal(&cells), out_dir.join("optimal.csv"))?,
            Err(e) => eprintln!("warning: optimal.csv skipped: {e}"),
        }
    }
    Ok(())
}

fn failure_exit(table: &ResultTable) -> ExitCode {
    let failed = table.failures();
    if failed.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("{} failed cells:", failed.len());
    for r in failed {
        eprintln!("  {}: {}", r.run_id, r.status);
    }
    ExitCode::from(2)
}

fn simulate_cmd(a: SimulateArgs) -> Result<ExitCode> {
    let plan = match &a.plan {
        Some(p) => ExperimentPlan::load(p).with_context(|| format!("reading plan {}", p.display()))?,
        None => ExperimentPlan::default_narma(),
    };
    let config = plan.chain_config::<f64>(&ConfigEntry::preset(&a.config))?;
    let rate = plan.observation.drive_rate;
    let drive = match (config.drive, a.frequency) {
        (DriveMode::Actuation, _) => {
            let w = &plan.multitask.patterns[0];
            pwm3(w.on, w.off, a.amplitude, a.duration, rate)?
        }
        (DriveMode::BaseExcitation, Some(f)) => single_harmonic(a.amplitude, f, a.duration, rate)?,
        (DriveMode::BaseExcitation, None) => triple_harmonic(a.amplitude, a.duration, rate)?,
    };
    let model = build_chain(config)?;
    let initial = match a.seed {
        Some(s) => InitialState::perturbed(&model, plan.observation.perturbation, s),
        None => InitialState::equilibrium(&model),
    };
    let outcome = simulate_from(&model, &drive, a.duration, &initial)?;
    fs::create_dir_all(&a.out_dir)?;
    let path = a.out_dir.join("trajectory.csv");
    outcome.trajectory.export(&path)?;
    println!(
        "{} nodes x {} samples -> {} (max |x| {:.3e} m)",
        outcome.trajectory.n_nodes(),
        outcome.trajectory.n_samples(),
        path.display(),
        outcome.max_displacement
    );
    Ok(ExitCode::SUCCESS)
}
