//! `chaos-response` command line.
//!
//! Exit codes: 0 on success, 2 on usage or configuration errors, 3 when
//! every run diverged, 1 on I/O failures.

use super::config::{Method, RawConfig, SweepConfig};
use super::output::{fmt_float, write_runs, write_summary, GStream};
use super::runner::{attach_fd_reference, run_sweep, step_map_at, summarize, RunRecord, SweepRecord};
use crate::error::{Error, Result};
use crate::srb::run_density_gradient;
use clap::{Args, CommandFactory, Parser, Subcommand};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "chaos-response", version, about = "Linear response of chaotic systems by space-split sensitivity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sensitivity runs at one parameter point (method full by default).
    Run(Options),
    /// Sensitivity ensembles over a parameter grid.
    Sweep(Options),
    /// Long-time averages of the objective, optionally with an FD reference.
    Stats(Options),
    /// Lyapunov exponents from the QR iteration.
    Les(Options),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// TOML file with [model], [integrator], [method], [sweep], [output] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// lorenz63, lorenz96, sawtooth or ks.
    #[arg(long)]
    pub model: Option<String>,
    /// State dimension (lorenz96, sawtooth).
    #[arg(long)]
    pub n: Option<usize>,
    /// Domain length (ks).
    #[arg(long)]
    pub length: Option<f64>,
    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Parameter the sensitivity is taken with respect to.
    #[arg(long)]
    pub active: Option<String>,
    /// rk2, rk4 or discrete.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// full, reduced, stats or les (run and sweep only).
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub objective: Option<String>,
    /// Unstable dimension for the full method.
    #[arg(long)]
    pub m: Option<usize>,
    /// Basis size for the reduced method and Lyapunov runs.
    #[arg(long)]
    pub mext: Option<usize>,
    /// Total steps N.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Discarded steps T.
    #[arg(long)]
    pub spinup: Option<usize>,
    /// Correlation window K in steps.
    #[arg(long)]
    pub corr: Option<usize>,
    /// Grid over one parameter.
    #[arg(long, value_name = "NAME=START:STOP:COUNT", value_parser = parse_grid)]
    pub grid: Option<GridArg>,
    /// Second grid axis (two-dimensional statistics).
    #[arg(long, value_name = "NAME=START:STOP:COUNT", value_parser = parse_grid)]
    pub grid2: Option<GridArg>,
    /// Runs per grid point, seeded seed, seed+1, ...
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Degree of the polynomial fit for the FD reference (stats).
    #[arg(long)]
    pub fit_degree: Option<usize>,
    #[arg(long, value_name = "LO:HI", value_parser = parse_window)]
    pub fit_window: Option<[f64; 2]>,
    /// Per-run CSV; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-grid-point summary CSV; defaults to `<out>.summary.csv`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Stream (step, x, g) rows of the SRB density gradient (stats).
    #[arg(long)]
    pub emit_g: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridArg {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_grid(s: &str) -> std::result::Result<GridArg, String> {
    let (name, range) = s.split_once('=').ok_or_else(|| format!("expected NAME=START:STOP:COUNT, got `{s}`"))?;
    let parts: Vec<&str> = range.split(':').collect();
    let bad = || format!("expected NAME=START:STOP:COUNT, got `{s}`");
    match parts.as_slice() {
        [a] => {
            let a = a.parse().map_err(|_| bad())?;
            Ok(GridArg { param: name.into(), start: a, stop: a, count: 1 })
        }
        [a, b, c] => Ok(GridArg {
            param: name.into(),
            start: a.parse().map_err(|_| bad())?,
            stop: b.parse().map_err(|_| bad())?,
            count: c.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn parse_window(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
    let num = |x: &str| x.parse::<f64>().map_err(|_| format!("`{x}` is not a number"));
    Ok([num(a)?, num(b)?])
}

impl Options {
    fn to_raw(&self) -> RawConfig {
        let mut raw = RawConfig::default();
        raw.model.id = self.model.clone();
        raw.model.n = self.n;
        raw.model.length = self.length;
        raw.model.params = self.params.iter().cloned().collect();
        raw.model.active = self.active.clone();
        raw.integrator.scheme = self.scheme.clone();
        raw.integrator.dt = self.dt;
        raw.method.kind = self.method.clone();
        raw.method.objective = self.objective.clone();
        raw.method.m = self.m;
        raw.method.mext = self.mext;
        raw.method.steps = self.steps;
        raw.method.spinup = self.spinup;
        raw.method.corr = self.corr;
        if let Some(g) = &self.grid {
            raw.sweep.param = Some(g.param.clone());
            raw.sweep.start = Some(g.start);
            raw.sweep.stop = Some(g.stop);
            raw.sweep.count = Some(g.count);
        }
        if let Some(g) = &self.grid2 {
            raw.sweep.param2 = Some(g.param.clone());
            raw.sweep.start2 = Some(g.start);
            raw.sweep.stop2 = Some(g.stop);
            raw.sweep.count2 = Some(g.count);
        }
        raw.sweep.ensemble = self.ensemble;
        raw.sweep.seed = self.seed;
        raw.sweep.workers = self.workers;
        raw.sweep.fit_degree = self.fit_degree;
        raw.sweep.fit_window = self.fit_window;
        raw.output.path = self.out.clone();
        raw.output.summary = self.summary.clone();
        raw.output.g_path = self.emit_g.clone();
        raw
    }

    /// File values overlaid by flags.
    pub fn resolve(&self, forced: Option<Method>) -> Result<SweepConfig> {
        let base = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        base.overlay(self.to_raw()).resolve(forced)
    }
}

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub config: SweepConfig,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SweepRecord>,
    pub g_norms: Option<Vec<f64>>,
    pub line: String,
}

impl Outcome {
    pub fn all_diverged(&self) -> bool {
        !self.runs.is_empty() && self.runs.iter().all(|r| r.diverged)
    }
}

fn default_summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn summary_line(config: &SweepConfig, runs: &[RunRecord], summary: &[SweepRecord], g_norms: Option<&[f64]>) -> String {
    let diverged = runs.iter().filter(|r| r.diverged).count();
    let mut line = format!(
        "{} {}: {} point(s) x {} run(s), {} diverged",
        config.method.name(),
        config.model,
        summary.len(),
        config.ensemble,
        diverged
    );
    if let [only] = summary {
        match config.method {
            Method::Les => {
                let les: Vec<String> = only.les.iter().map(|l| format!("{l:.6}")).collect();
                line += &format!("; LEs [{}], sum {:.6}", les.join(", "), only.les.iter().sum::<f64>());
            }
            Method::Stats => line += &format!("; <{}> = {} (sigma {})", config.objective, fmt_float(only.mean), fmt_float(only.std)),
            Method::Full | Method::Reduced => {
                line += &format!("; d<{}>/d{} = {} (sigma {})", config.objective, config.active, fmt_float(only.mean), fmt_float(only.std));
                if let Some([s, n, u]) = only.parts {
                    line += &format!(" = stable {:.6} + neutral {:.6} + unstable {:.6}", s.0, n.0, u.0);
                }
            }
        }
    }
    if let Some(g) = g_norms {
        let g: Vec<String> = g.iter().map(|v| format!("{v:.6e}")).collect();
        line += &format!("; |g| [{}]", g.join(", "));
    }
    line
}

/// Run one subcommand and write its CSVs.
pub fn execute(command: &Command) -> Result<Outcome> {
    let (opts, forced) = match command {
        Command::Run(o) | Command::Sweep(o) => (o, None),
        Command::Stats(o) => (o, Some(Method::Stats)),
        Command::Les(o) => (o, Some(Method::Les)),
    };
    let config = opts.resolve(forced)?;
    if config.g_path.is_some() && config.method != Method::Stats {
        return Err(Error::Config("--emit-g belongs to the stats subcommand".into()));
    }
    let runs = run_sweep(&config)?;
    let mut summary = summarize(&runs);
    if let (Method::Stats, Some(degree)) = (config.method, config.fit_degree) {
        if config.grid2.is_some() {
            return Err(Error::Config("finite-difference references need a one-dimensional grid".into()));
        }
        attach_fd_reference(&mut summary, degree, config.fit_window)?;
    }
    let g_norms = match &config.g_path {
        Some(path) => Some(emit_g(&config, path)?),
        None => None,
    };
    match &config.output {
        Some(path) => {
            let mut w = create(path)?;
            write_runs(&mut w, &runs)?;
            w.flush()?;
            let summary_path = config.summary.clone().unwrap_or_else(|| default_summary_path(path));
            let mut w = create(&summary_path)?;
            write_summary(&mut w, &summary)?;
            w.flush()?;
        }
        None => {
            write_runs(std::io::stdout().lock(), &runs)?;
            if let Some(p) = &config.summary {
                let mut w = create(p)?;
                write_summary(&mut w, &summary)?;
                w.flush()?;
            }
        }
    }
    let line = summary_line(&config, &runs, &summary, g_norms.as_deref());
    Ok(Outcome { config, runs, summary, g_norms, line })
}

fn emit_g(config: &SweepConfig, path: &Path) -> Result<Vec<f64>> {
    let points = config.points();
    if points.len() != 1 || config.ensemble != 1 {
        return Err(Error::Config("--emit-g streams a single run: drop the grid and ensemble".into()));
    }
    let map = step_map_at(config, &config.params_at(points[0]))?;
    let mut stream = GStream::new(create(path)?, map.dim(), config.m)?;
    let mut status = Ok(());
    let norms = run_density_gradient(&map, config.m, config.steps, config.spinup, config.seed_base, |k, x, g| {
        if status.is_ok() {
            status = stream.push(k, x, g);
        }
    })?;
    status?;
    stream.finish()?;
    Ok(norms)
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.all_diverged() => 3,
        Ok(_) => 0,
        Err(Error::Io(_)) | Err(Error::Csv(_)) => 1,
        Err(_) => 2,
    }
}

/// Parse `args`, run, report, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = execute(&cli.command);
    match &result {
        Ok(outcome) => {
            if outcome.config.output.is_some() {
                println!("{}", outcome.line);
            } else {
                eprintln!("{}", outcome.line);
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if exit_code(&result) == 2 {
                let mut cmd = Cli::command();
                eprintln!("{}", cmd.render_usage());
            }
        }
    }
    exit_code(&result)
}
