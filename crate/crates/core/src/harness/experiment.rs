use rayon::prelude::*;

use super::config::{ConfigError, ExperimentConfig};
use crate::dynamics::{run_method, ParticleSystem};
use crate::noise::NoiseStream;

/// Uniform initial positions for run `run`, drawn from the run's init lane.
/// Homogenized methods start with `Y = X`.
pub fn init_particles(cfg: &ExperimentConfig, run: usize) -> Result<ParticleSystem, ConfigError> {
    let bounds = cfg.init_box()?;
    let mut noise = NoiseStream::for_init(cfg.seed, run as u64);
    let mut positions = Vec::with_capacity(cfg.agents * cfg.dim);
    for _ in 0..cfg.agents {
        for &(lo, hi) in &bounds {
            positions.push(noise.uniform(lo, hi));
        }
    }
    let sys = ParticleSystem::from_flat(cfg.dim, positions);
    Ok(if cfg.method.is_homogenized() {
        sys.with_fast_from_positions()
    } else {
        sys
    })
}

/// `(best, worst)` over agents of the distance to the nearest minimizer.
pub fn distance_metrics(sys: &ParticleSystem, minimizers: &[Vec<f64>]) -> (f64, f64) {
    assert!(!minimizers.is_empty(), "need at least one minimizer");
    sys.rows()
        .map(|x| {
            minimizers
                .iter()
                .map(|m| x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(b, w), d| (b.min(d), w.max(d)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub iter: usize,
    pub best: f64,
    pub worst: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub iter: usize,
    pub median_best: f64,
    pub median_worst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub iteration: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    /// One row per completed iteration, starting at 1.
    pub metrics: Vec<MetricRow>,
    /// `(iteration, flat positions)` snapshots from iteration 0, if recorded.
    pub traces: Vec<(usize, Vec<f64>)>,
    pub failure: Option<RunFailure>,
    /// Final state of a completed run.
    pub last: Option<ParticleSystem>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

impl RunArtifacts {
    pub fn failures(&self) -> impl Iterator<Item = (usize, &RunFailure)> {
        self.runs.iter().filter_map(|r| r.failure.as_ref().map(|f| (r.run, f)))
    }
}

/// Median with the even-count convention `(a + b) / 2`; NaN when empty.
pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-iteration medians over the runs that reached that iteration. Runs
/// aborted earlier drop out; an iteration no run reached gets NaN.
pub fn summarize(runs: &[Vec<MetricRow>], n_max: usize) -> Vec<SummaryRow> {
    (1..=n_max)
        .map(|iter| {
            let (mut best, mut worst): (Vec<f64>, Vec<f64>) = runs
                .iter()
                .filter_map(|rows| rows.get(iter - 1))
                .map(|r| {
                    debug_assert_eq!(r.iter, iter);
                    (r.best, r.worst)
                })
                .unzip();
            SummaryRow {
                iter,
                median_best: median(&mut best),
                median_worst: median(&mut worst),
            }
        })
        .collect()
}

fn run_one(cfg: &ExperimentConfig, run: usize) -> Result<RunResult, ConfigError> {
    let hp = cfg.hyper_params()?;
    let obj = cfg.build_objective()?;
    let minimizers = obj.known_minimizers();
    let sys = init_particles(cfg, run)?;
    let record_traces = cfg.traces_enabled();
    let mut metrics = Vec::with_capacity(cfg.iters);
    let mut traces = Vec::new();
    let mut sink = |s: &ParticleSystem| {
        if record_traces {
            traces.push((s.iter, s.positions().to_vec()));
        }
        if s.iter > 0 {
            let (best, worst) = distance_metrics(s, &minimizers);
            metrics.push(MetricRow {
                iter: s.iter,
                best,
                worst,
            });
        }
    };
    let mut noise = NoiseStream::agents(cfg.seed, run as u64, cfg.agents);
    let outcome = run_method(cfg.method, obj.as_ref(), &hp, sys, &mut noise, &mut sink);
    let (failure, last) = match outcome {
        Ok(sys) => (None, Some(sys)),
        Err(e) => (
            Some(RunFailure {
                iteration: e.iteration,
                message: e.source.to_string(),
            }),
            None,
        ),
    };
    Ok(RunResult {
        run,
        metrics,
        traces,
        failure,
        last,
    })
}

/// Runs all replicas on a pool of `workers` threads. The artifacts do not
/// depend on `workers`: every run owns its noise lanes and results are
/// gathered in run order.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<RunArtifacts, ConfigError> {
    cfg.validate()?;
    if cfg.build_objective()?.known_minimizers().is_empty() {
        return Err(ConfigError::Invalid {
            key: "objective",
            reason: "objective has no known minimizer to measure distances against".into(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let runs = pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| run_one(cfg, r))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let metrics: Vec<Vec<MetricRow>> = runs.iter().map(|r| r.metrics.clone()).collect();
    Ok(RunArtifacts {
        config: cfg.clone(),
        summary: summarize(&metrics, cfg.iters),
        runs,
    })
}
