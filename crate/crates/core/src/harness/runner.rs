//! Jobs, ensembles and sweep summaries.
//!
//! A sweep expands into independent `(grid point, seed)` jobs. Jobs share
//! only the immutable configuration, so a worker pool can consume them in
//! any order; results come back in job order, which is sorted by grid point
//! and then seed.

use super::config::{Method, SweepConfig};
use crate::error::{Error, Result};
use crate::models::{build_model, Objective};
use crate::response::{run_full_s3, run_reduced_s3, S3Settings};
use crate::stepping::{StepMap, Trajectory};
use crate::tangent::lyapunov_spectrum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub grid: Option<f64>,
    pub grid2: Option<f64>,
    pub seed: u64,
}

/// One row of the per-run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub model: String,
    pub objective: String,
    /// All model parameters at this grid point.
    pub params: Vec<(String, f64)>,
    pub grid: Option<f64>,
    pub grid2: Option<f64>,
    pub seed: u64,
    pub steps: usize,
    pub stable: Option<f64>,
    pub neutral: Option<f64>,
    pub unstable: Option<f64>,
    /// Total sensitivity, or `⟨J⟩` for statistics runs.
    pub total: Option<f64>,
    pub les: Vec<f64>,
    pub diverged: bool,
    pub failure: Option<String>,
}

impl RunRecord {
    /// The value summarized across an ensemble.
    pub fn value(&self) -> Option<f64> {
        self.total
    }
}

/// Errors that mark a single run as diverged instead of aborting the sweep.
fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::NonFinite { .. } | Error::RankDeficient { .. } | Error::FixedPoint | Error::Tangency(_) | Error::NoSamples
    )
}

/// `⟨J⟩` over the states `x_T … x_{N−1}` of a seeded trajectory.
pub fn time_average(map: &StepMap, objective: &Objective, steps: usize, spinup: usize, seed: u64) -> Result<f64> {
    if steps <= spinup {
        return Err(Error::Config(format!("steps ({steps}) must exceed spinup ({spinup})")));
    }
    objective.check_dim(map.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traj = Trajectory::new(map, map.model().initial_state(&mut rng));
    traj.run(map, spinup)?;
    let mut sum = 0.0;
    for _ in spinup..steps {
        sum += objective.eval(traj.state());
        traj.advance(map)?;
    }
    Ok(sum / (steps - spinup) as f64)
}

pub fn jobs(config: &SweepConfig) -> Vec<Job> {
    let r = config.ensemble as u64;
    config
        .points()
        .into_iter()
        .flat_map(|(grid, grid2)| (0..r).map(move |i| (grid, grid2, i)))
        .map(|(grid, grid2, i)| Job { grid, grid2, seed: config.seed_base + i })
        .collect()
}

pub fn step_map_at(config: &SweepConfig, params: &[(String, f64)]) -> Result<StepMap> {
    let model = build_model(&config.model, &config.shape, params)?;
    StepMap::from_model(model, config.scheme, config.dt, &config.active)
}

/// Run one job. Configuration errors propagate; numerical breakdowns come
/// back as a diverged record.
pub fn run_job(config: &SweepConfig, job: Job) -> Result<RunRecord> {
    let params = config.params_at((job.grid, job.grid2));
    let map = step_map_at(config, &params)?;
    let objective = Objective::parse(&config.objective)?;
    let mut record = RunRecord {
        method: config.method,
        model: config.model.clone(),
        objective: config.objective.clone(),
        params: map.model().params().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        grid: job.grid,
        grid2: job.grid2,
        seed: job.seed,
        steps: config.steps,
        stable: None,
        neutral: None,
        unstable: None,
        total: None,
        les: Vec::new(),
        diverged: false,
        failure: None,
    };
    let settings = S3Settings { steps: config.steps, spinup: config.spinup, corr: config.corr, seed: job.seed };
    let fail = |mut record: RunRecord, e: Error| -> Result<RunRecord> {
        if is_numerical(&e) {
            record.diverged = true;
            record.failure = Some(e.to_string());
            Ok(record)
        } else {
            Err(e)
        }
    };
    match config.method {
        Method::Stats => match time_average(&map, &objective, config.steps, config.spinup, job.seed) {
            Ok(mean) => record.total = Some(mean),
            Err(e) => return fail(record, e),
        },
        Method::Les => match lyapunov_spectrum(&map, config.mext, config.steps, config.spinup, job.seed) {
            Ok(est) => record.les = est.lambdas,
            Err(e) => return fail(record, e),
        },
        Method::Full | Method::Reduced => {
            let out = if config.method == Method::Full {
                run_full_s3(&map, &objective, config.m, settings)?
            } else {
                run_reduced_s3(&map, &objective, config.mext, settings)?
            };
            record.stable = Some(out.stable);
            if config.method == Method::Full {
                record.neutral = Some(out.neutral);
                record.unstable = Some(out.unstable);
            }
            record.total = Some(out.total);
            record.les = out.les.map(|l| l.lambdas).unwrap_or_default();
            record.diverged = out.diverged;
            record.failure = out.failure;
        }
    }
    Ok(record)
}

/// Run every job of the configuration on `config.workers` threads. Rows come
/// back sorted by `(grid, grid2, seed)` whatever the worker count.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<RunRecord>> {
    let jobs = jobs(config);
    if config.workers <= 1 {
        return jobs.into_iter().map(|j| run_job(config, j)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| jobs.into_par_iter().map(|j| run_job(config, j)).collect())
}

/// Long-time averages of the objective over the grid.
pub fn sweep_statistics(config: &SweepConfig) -> Result<(Vec<RunRecord>, Vec<SweepRecord>)> {
    if config.method != Method::Stats {
        return Err(Error::Config(format!("statistics sweeps need method stats, got {}", config.method.name())));
    }
    let runs = run_sweep(config)?;
    let summary = summarize(&runs);
    Ok((runs, summary))
}

/// Sensitivity ensembles over the grid.
pub fn run_ensemble(config: &SweepConfig) -> Result<(Vec<RunRecord>, Vec<SweepRecord>)> {
    if !matches!(config.method, Method::Full | Method::Reduced) {
        return Err(Error::Config(format!("ensembles need method full or reduced, got {}", config.method.name())));
    }
    let runs = run_sweep(config)?;
    let summary = summarize(&runs);
    Ok((runs, summary))
}

/// Mean and sample standard deviation; `σ = 0` for a single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-grid-point summary over the non-diverged runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub grid: Option<f64>,
    pub grid2: Option<f64>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub diverged: usize,
    /// Mean and σ of the stable, neutral and unstable parts (full method).
    pub parts: Option<[(f64, f64); 3]>,
    /// Mean of each Lyapunov exponent.
    pub les: Vec<f64>,
    /// Finite-difference reference slope, when requested.
    pub fd_slope: Option<f64>,
}

fn same_point(a: &RunRecord, b: &RunRecord) -> bool {
    a.grid.map(f64::to_bits) == b.grid.map(f64::to_bits) && a.grid2.map(f64::to_bits) == b.grid2.map(f64::to_bits)
}

pub fn summarize(runs: &[RunRecord]) -> Vec<SweepRecord> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < runs.len() {
        let mut end = start + 1;
        while end < runs.len() && same_point(&runs[start], &runs[end]) {
            end += 1;
        }
        let group = &runs[start..end];
        let ok: Vec<&RunRecord> = group.iter().filter(|r| !r.diverged).collect();
        let values: Vec<f64> = ok.iter().filter_map(|r| r.value()).collect();
        let (mean, std) = mean_std(&values);
        let part = |get: fn(&RunRecord) -> Option<f64>| mean_std(&ok.iter().filter_map(|r| get(r)).collect::<Vec<_>>());
        let parts = (group[0].method == Method::Full)
            .then(|| [part(|r| r.stable), part(|r| r.neutral), part(|r| r.unstable)]);
        let width = ok.iter().map(|r| r.les.len()).max().unwrap_or(0);
        let les = (0..width)
            .map(|i| mean_std(&ok.iter().filter_map(|r| r.les.get(i).copied()).collect::<Vec<_>>()).0)
            .collect();
        out.push(SweepRecord {
            grid: group[0].grid,
            grid2: group[0].grid2,
            values,
            mean,
            std,
            diverged: group.len() - ok.len(),
            parts,
            les,
            fd_slope: None,
        });
        start = end;
    }
    out
}

/// Attach finite-difference slopes of a one-dimensional statistics table.
/// Points outside `window` get no slope.
pub fn attach_fd_reference(summary: &mut [SweepRecord], degree: usize, window: Option<(f64, f64)>) -> Result<()> {
    let points: Vec<(f64, f64)> = summary.iter().filter_map(|s| s.grid.map(|g| (g, s.mean))).collect();
    let at: Vec<f64> = points
        .iter()
        .map(|p| p.0)
        .filter(|x| window.is_none_or(|(a, b)| (a..=b).contains(x)))
        .collect();
    let slopes = super::fit::fd_reference(&points, degree, window, &at)?;
    for s in summary.iter_mut() {
        if let Some(i) = s.grid.and_then(|g| at.iter().position(|x| *x == g)) {
            s.fd_slope = Some(slopes[i]);
        }
    }
    Ok(())
}
