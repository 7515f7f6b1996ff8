use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::aggregate::{Aggregate, PointAggregate, RunSummary, FINAL_WINDOW, SCHEMA_VERSION};
use super::{ExperimentSpec, RunMode};
use crate::baselines::{cbo_network, mpo_train_config, LocalOnlyPolicy, RandomPolicy};
use crate::env::{Env, Mode};
use crate::error::Result;
use crate::marl::checkpoint::Checkpoint;
use crate::marl::{evaluate, train, CurvePoint, Evaluation, Scheme, SlotRecord, TrainConfig, TrainOutcome};
use crate::{par, NetworkConfig};

/// One finished (point, seed) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub dir: PathBuf,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub aggregate: Aggregate,
    pub runs: Vec<RunResult>,
}

/// Everything one run produces before anything touches the disk.
pub struct RunOutput {
    pub summary: RunSummary,
    pub evaluation: Evaluation,
    pub training: Option<(TrainOutcome, NetworkConfig, TrainConfig)>,
}

fn final_means(curve: &[CurvePoint]) -> (f64, f64) {
    let tail = &curve[curve.len().saturating_sub(FINAL_WINDOW)..];
    let n = tail.len() as f64;
    (
        tail.iter().map(|p| p.mean_reward).sum::<f64>() / n,
        tail.iter().map(|p| p.mean_delay).sum::<f64>() / n,
    )
}

/// Train (if the mode learns) and evaluate one seed on one network.
pub fn run_single(mode: RunMode, network: &NetworkConfig, train_cfg: &TrainConfig, eval_episodes: usize, x: Option<f64>, seed: u64) -> Result<RunOutput> {
    let eval_range = train_cfg.episodes..train_cfg.episodes + eval_episodes;
    let (net, tcfg, scheme) = match mode {
        RunMode::Ippo => (network.clone(), train_cfg.clone(), Some(Scheme::Ippo)),
        RunMode::Mappo => (network.clone(), train_cfg.clone(), Some(Scheme::Mappo)),
        RunMode::Cbo => (cbo_network(network), train_cfg.clone(), Some(Scheme::Ippo)),
        RunMode::Mpo => (network.clone(), mpo_train_config(network, train_cfg), Some(Scheme::Ippo)),
        RunMode::Random | RunMode::LocalOnly => (network.clone(), train_cfg.clone(), None),
    };
    let env_mode = scheme.map_or(Mode::NonCooperative, Scheme::env_mode);
    let mut env = Env::new(net.clone(), env_mode, seed)?;
    let training = match scheme {
        Some(s) => Some(train(&mut env, s, &tcfg, seed)?),
        None => None,
    };
    let evaluation = match (&training, mode) {
        (Some(t), _) => evaluate(&mut t.policy.clone(), &mut env, seed, eval_range)?,
        (None, RunMode::Random) => evaluate(&mut RandomPolicy::new(&net, seed), &mut env, seed, eval_range)?,
        (None, _) => evaluate(&mut LocalOnlyPolicy, &mut env, seed, eval_range)?,
    };
    let mut audit = evaluation.audit;
    let (final_train_reward, final_train_delay) = match &training {
        Some(t) => {
            audit.merge(&t.audit);
            let (r, d) = final_means(&t.curve);
            (Some(r), Some(d))
        }
        None => (None, None),
    };
    Ok(RunOutput {
        summary: RunSummary {
            schema_version: SCHEMA_VERSION,
            mode,
            seed,
            x,
            summary: evaluation.summary,
            audit,
            final_train_reward,
            final_train_delay,
        },
        evaluation,
        training: training.map(|t| (t, net, tcfg)),
    })
}

pub fn write_metrics_csv(path: &Path, records: &[SlotRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<SlotRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

fn point_label(spec: &ExperimentSpec, x: Option<f64>) -> String {
    match (&spec.sweep, x) {
        (Some(s), Some(v)) => format!("{}_{v}", s.axis.name()),
        _ => "base".into(),
    }
}

fn provenance_line(snapshot: &str, mode: RunMode, seed: u64) -> String {
    let digest = Sha256::digest(snapshot.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!(
        "{} {} config-sha256:{hex} mode={} seed={seed}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        mode.name()
    )
}

fn persist(dir: &Path, spec: &ExperimentSpec, network: &NetworkConfig, seed: u64, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let snapshot = ExperimentSpec {
        seeds: vec![seed],
        sweep: None,
        network: network.clone(),
        ..spec.clone()
    }
    .to_toml_string()?;
    fs::write(dir.join("config.toml"), &snapshot)?;
    fs::write(dir.join("provenance.txt"), provenance_line(&snapshot, spec.mode, seed))?;
    write_metrics_csv(&dir.join("metrics.csv"), &out.evaluation.records)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)? + "\n")?;
    if let Some((t, net, tcfg)) = &out.training {
        write_curve_csv(&dir.join("training_curve.csv"), &t.curve)?;
        Checkpoint::new(t, seed, net, tcfg).save(&dir.join("checkpoint.json"))?;
    }
    Ok(())
}

/// Run every (sweep point, seed) pair of `spec` with up to `workers`
/// threads, writing per-run directories under `out/runs` and
/// `out/aggregate.json`.
pub fn run(spec: &ExperimentSpec, out: &Path, workers: usize) -> Result<RunReport> {
    spec.validate()?;
    let points = spec.points()?;
    let jobs: Vec<(Option<f64>, &NetworkConfig, u64)> = points
        .iter()
        .flat_map(|(x, net)| spec.seeds.iter().map(move |&s| (*x, net, s)))
        .collect();
    fs::create_dir_all(out)?;
    let results = par::with_workers(workers, || {
        par::map(&jobs, |&(x, net, seed)| -> Result<RunResult> {
            let dir = out.join("runs").join(point_label(spec, x)).join(format!("seed_{seed}"));
            log::info!("{} {}: seed {seed}", spec.series(), point_label(spec, x));
            let o = run_single(spec.mode, net, &spec.train, spec.eval_episodes, x, seed)?;
            persist(&dir, spec, net, seed, &o)?;
            Ok(RunResult { dir, summary: o.summary })
        })
    });
    let runs: Vec<RunResult> = results.into_iter().collect::<Result<_>>()?;
    let aggregate = Aggregate {
        schema_version: SCHEMA_VERSION,
        series: spec.series().to_string(),
        mode: spec.mode,
        axis: spec.sweep.as_ref().map(|s| s.axis.name().to_string()),
        seeds: spec.seeds.clone(),
        points: points
            .iter()
            .map(|(x, _)| {
                let members: Vec<RunSummary> = runs.iter().filter(|r| r.summary.x == *x).map(|r| r.summary.clone()).collect();
                PointAggregate::from_runs(*x, point_label(spec, *x), &members)
            })
            .collect(),
    };
    fs::write(out.join("aggregate.json"), serde_json::to_string_pretty(&aggregate)? + "\n")?;
    Ok(RunReport { aggregate, runs })
}
