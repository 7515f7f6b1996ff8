use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ucmec::env::Env;
use ucmec::harness::{self, emit_plots, write_metrics_csv, ExperimentSpec, RunMode, Sweep, SweepAxis};
use ucmec::marl::checkpoint::Checkpoint;
use ucmec::marl::evaluate;

#[derive(Parser, Debug)]
#[command(name = "ucmec", version, about = "User-centric MEC simulator, trainers, and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a scheme for every seed and evaluate the result.
    Train(RunArgs),
    /// Evaluate a checkpoint, or an untrained baseline, for every seed.
    Evaluate(EvalArgs),
    /// Train/evaluate across the values of one network parameter.
    Sweep(SweepArgs),
    /// Turn finished results into plot-data CSVs and a plotting script.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment file (TOML); omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ippo, mappo, cbo, mpo, random, or local_only.
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output root directory.
    #[arg(long, env = "UCMEC_OUT", default_value = "results")]
    out: PathBuf,
    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Override the number of training episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Override the number of evaluation episodes.
    #[arg(long)]
    eval_episodes: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Checkpoint written by `train` (checkpoint.json).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// users, aps, max_power, or cluster_size.
    #[arg(long)]
    sweep_axis: Option<String>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    sweep_values: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Results root to scan.
    #[arg(long, env = "UCMEC_OUT", default_value = "results")]
    out: PathBuf,
}

fn build_spec(c: &Common) -> Result<ExperimentSpec> {
    let mut spec = match &c.config {
        Some(p) => ExperimentSpec::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentSpec::default(),
    };
    if let Some(m) = &c.mode {
        spec.mode = RunMode::parse(m)?;
    }
    if let Some(s) = &c.seeds {
        spec.seeds = s.clone();
    }
    if let Some(e) = c.episodes {
        spec.train.episodes = e;
    }
    if let Some(e) = c.eval_episodes {
        spec.eval_episodes = e;
    }
    Ok(spec)
}

fn execute(spec: &ExperimentSpec, dir: &Path, workers: usize) -> Result<()> {
    spec.validate()?;
    let report = harness::run(spec, dir, workers)?;
    for p in &report.aggregate.points {
        let get = |k: &str| p.metrics.get(k).map_or(f64::NAN, |s| s.mean);
        println!(
            "{} {}: mean delay {:.6} s, drop rate {:.4}, mean reward {:.6}, mean rate {:.4e} bit/s",
            report.aggregate.series,
            p.label,
            get("mean_delay"),
            get("drop_rate"),
            get("mean_reward"),
            get("mean_rate"),
        );
        let violations = p.audit.violations();
        if violations > 0 {
            bail!("{} constraint violations at {}", violations, p.label);
        }
    }
    println!("results in {}", dir.display());
    Ok(())
}

fn train(a: RunArgs) -> Result<()> {
    let spec = build_spec(&a.common)?;
    if !spec.mode.is_trained() {
        bail!("mode {} does not train; use `evaluate`", spec.mode.name());
    }
    if spec.sweep.is_some() {
        bail!("the experiment file defines a sweep; use `sweep`");
    }
    let dir = a.common.out.join(spec.series());
    execute(&spec, &dir, a.common.workers)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut spec = build_spec(&a.common)?;
    match (&a.sweep_axis, &a.sweep_values) {
        (Some(axis), Some(values)) => {
            spec.sweep = Some(Sweep {
                axis: SweepAxis::parse(axis)?,
                values: values.clone(),
            })
        }
        (None, None) => {}
        _ => bail!("--sweep-axis and --sweep-values go together"),
    }
    let Some(s) = &spec.sweep else {
        bail!("no sweep given (--sweep-axis/--sweep-values or [sweep] in the config)");
    };
    let dir = a.common.out.join(format!("{}_{}", spec.series(), s.axis.name()));
    execute(&spec, &dir, a.common.workers)
}

fn evaluate_cmd(a: EvalArgs) -> Result<()> {
    let Some(path) = &a.checkpoint else {
        let spec = build_spec(&a.common)?;
        if spec.mode.is_trained() {
            bail!("mode {} needs --checkpoint", spec.mode.name());
        }
        let dir = a.common.out.join(spec.series());
        return execute(&spec, &dir, a.common.workers);
    };
    let ck = Checkpoint::load(path)?;
    let seeds = a.common.seeds.clone().unwrap_or_else(|| vec![ck.seed]);
    let episodes = a.common.eval_episodes.unwrap_or(ExperimentSpec::default().eval_episodes);
    let start = ck.train.episodes;
    let dir = a.common.out.join(format!("{}_eval", path.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint")));
    for seed in seeds {
        let mut env = Env::new(ck.network.clone(), ck.scheme.env_mode(), seed)?;
        let mut policy = ck.policy.clone();
        let e = evaluate(&mut policy, &mut env, seed, start..start + episodes)?;
        let run_dir = dir.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&run_dir)?;
        write_metrics_csv(&run_dir.join("metrics.csv"), &e.records)?;
        std::fs::write(run_dir.join("summary.json"), serde_json::to_string_pretty(&e.summary)? + "\n")?;
        println!(
            "seed {seed}: mean delay {:.6} s, drop rate {:.4}, mean reward {:.6}",
            e.summary.mean_delay, e.summary.drop_rate, e.summary.mean_reward
        );
        if e.audit.violations() > 0 {
            bail!("{} constraint violations", e.audit.violations());
        }
    }
    println!("results in {}", dir.display());
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let report = emit_plots(&a.out)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    }
}
