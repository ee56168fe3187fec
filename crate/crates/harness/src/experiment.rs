//! Batches of runs from random initial points and their output directory.

use std::fs;
use std::path::{Path, PathBuf};

use fixsub_core::metrics::{lemma_failures, mean_over_seeds};
use fixsub_core::rng::{derive_seed, sample_ball, stream};
use fixsub_core::{run, MonitorConfig, Point, ProblemInstance, ReferenceSolution, RunOptions, RunTrace, SetKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ReferenceMode};
use crate::error::{HarnessError, Result};
use crate::generate::{generate_instance, InstanceFile};
use crate::output::{lemma_verdicts, plot_script, write_aggregate, write_trace, write_verdicts};
use crate::reference::{analytic, grid_oracle, reference_solve, OracleOptions};

const INITIAL_TAG: u64 = 0x494e_4954;
const RUN_TAG: u64 = 0x5255_4e53;

/// Initial points drawn uniformly from the instance domain ball, one child stream per point.
pub fn initial_points(inst: &ProblemInstance, seed: u64, count: usize) -> Result<Vec<Point>> {
    let Some(SetKind::Ball { center, radius }) = inst.domain.as_ref().map(|y| &y.kind) else {
        return Err(HarnessError::Config("initial points need a ball-shaped domain".into()));
    };
    Ok((0..count)
        .map(|s| sample_ball(&mut stream(seed, &[INITIAL_TAG, s as u64]), center, *radius))
        .collect())
}

pub fn run_options(cfg: &ExperimentConfig, index: usize) -> RunOptions {
    let mut opts = RunOptions::new(cfg.method, cfg.schedule, cfg.n_iters);
    opts.projected = cfg.projected;
    opts.tie_rule = cfg.tie_rule;
    opts.seed = derive_seed(cfg.seed, &[RUN_TAG, index as u64]);
    opts.monitors = MonitorConfig {
        lemma: cfg.lemma_monitors,
        timing: cfg.timing,
        ..MonitorConfig::default()
    };
    opts
}

/// All runs of one experiment plus the seed-averaged series.
#[derive(Debug, Clone)]
pub struct Batch {
    pub config: ExperimentConfig,
    pub instance: InstanceFile,
    pub initial_points: Vec<Point>,
    pub traces: Vec<RunTrace>,
    /// Number of iterations every run completed; the averages cover `0..common_len`.
    pub common_len: usize,
    pub d: Vec<f64>,
    pub f: Vec<f64>,
    pub elapsed_mean: Vec<f64>,
}

impl Batch {
    pub fn partial(&self) -> bool {
        self.traces.iter().any(|t| !t.completed())
    }

    pub fn lemma_failures(&self) -> usize {
        self.traces.iter().map(|t| lemma_failures(&t.rows).len()).sum()
    }
}

fn averaged(traces: &[RunTrace], len: usize, pick: fn(&fixsub_core::MetricRow) -> f64) -> Result<Vec<f64>> {
    let series: Vec<Vec<f64>> = traces.iter().map(|t| t.rows[..len].iter().map(pick).collect()).collect();
    Ok(mean_over_seeds(&series)?)
}

pub fn run_batch_on(cfg: &ExperimentConfig, instance: InstanceFile) -> Result<Batch> {
    cfg.validate()?;
    let inst = &instance.instance;
    let x0s = initial_points(inst, cfg.seed, cfg.n_initial_points)?;
    let traces: Vec<RunTrace> = x0s
        .par_iter()
        .enumerate()
        .map(|(s, x0)| run(inst, &run_options(cfg, s), x0))
        .collect::<std::result::Result<_, _>>()?;
    let common_len = traces.iter().map(|t| t.rows.len()).min().unwrap_or(0);
    let d = averaged(&traces, common_len, |r| r.d_contrib)?;
    let f = averaged(&traces, common_len, |r| r.f_contrib)?;
    let elapsed_mean = averaged(&traces, common_len, |r| r.elapsed_ns as f64)?;
    Ok(Batch {
        config: cfg.clone(),
        instance,
        initial_points: x0s,
        traces,
        common_len,
        d,
        f,
        elapsed_mean,
    })
}

/// Generates the instance for `cfg` and runs every initial point.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<Batch> {
    run_batch_on(cfg, generate_instance(cfg)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunEntry {
    pub index: usize,
    pub dir: String,
    pub completed: bool,
    pub failure: Option<String>,
    pub lemma_failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub instance_attempt: u64,
    pub reference: Option<ReferenceSolution>,
    pub iterations_aggregated: usize,
    pub partial: bool,
    pub runs: Vec<RunEntry>,
    pub files: Vec<String>,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

fn reference_for(inst: &ProblemInstance, mode: ReferenceMode) -> Result<Option<ReferenceSolution>> {
    let opts = OracleOptions::default();
    match mode {
        ReferenceMode::None => Ok(None),
        ReferenceMode::Full => Ok(Some(reference_solve(inst, &opts)?)),
        ReferenceMode::Auto => match analytic(inst)? {
            Some(r) => Ok(Some(r)),
            None => grid_oracle(inst, &opts),
        },
    }
}

/// Writes a batch under `dir`:
///
/// ```text
/// manifest.json  config.toml  instance.json  aggregate.csv  plot.gp
/// runs/sNNN/trace.csv  runs/sNNN/verdicts.csv
/// ```
pub fn write_batch(batch: &Batch, dir: &Path) -> Result<Manifest> {
    create_dir(&dir.join("runs"))?;
    let mut instance = batch.instance.clone();
    let reference = reference_for(&instance.instance, batch.config.reference)?;
    instance.instance.reference = reference.clone();

    let users = instance.instance.num_users();
    let mut runs = Vec::with_capacity(batch.traces.len());
    for (s, t) in batch.traces.iter().enumerate() {
        let rel = format!("runs/s{s:03}");
        let run_dir = dir.join(&rel);
        create_dir(&run_dir)?;
        write_trace(&run_dir.join("trace.csv"), users, &t.rows)?;
        write_verdicts(&run_dir.join("verdicts.csv"), &lemma_verdicts(&t.rows))?;
        runs.push(RunEntry {
            index: s,
            dir: rel,
            completed: t.completed(),
            failure: t.failure.clone(),
            lemma_failures: lemma_failures(&t.rows).len(),
        });
    }

    write_file(&dir.join("config.toml"), &batch.config.to_toml())?;
    write_file(&dir.join("instance.json"), &serde_json::to_string_pretty(&instance)?)?;
    write_aggregate(&dir.join("aggregate.csv"), &batch.elapsed_mean, &batch.d, &batch.f)?;
    let label = format!("{} I={}", batch.config.method.name(), users);
    write_file(
        &dir.join("plot.gp"),
        &plot_script(&[(label, "aggregate.csv".into())], "plot.png"),
    )?;

    let manifest = Manifest {
        config: batch.config.clone(),
        instance_attempt: instance.attempt,
        reference,
        iterations_aggregated: batch.common_len,
        partial: batch.partial(),
        runs,
        files: ["config.toml", "instance.json", "aggregate.csv", "plot.gp"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    write_file(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Runs `cfg` and writes its outputs to `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Batch, PathBuf)> {
    let batch = run_batch(cfg)?;
    let dir = cfg.output_dir.clone();
    write_batch(&batch, &dir)?;
    Ok((batch, dir))
}
