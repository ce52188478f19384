//! Experiment configuration: a sectioned TOML file overlaid by CLI flags and
//! resolved against per-model defaults.

use crate::error::{Error, Result};
use crate::models::{build_model, Shape};
use crate::stepping::Scheme;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub id: Option<String>,
    pub n: Option<usize>,
    pub length: Option<f64>,
    pub params: BTreeMap<String, f64>,
    /// Parameter the sensitivities are taken with respect to.
    pub active: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub scheme: Option<String>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MethodSection {
    pub kind: Option<String>,
    pub objective: Option<String>,
    pub m: Option<usize>,
    pub mext: Option<usize>,
    pub steps: Option<usize>,
    pub spinup: Option<usize>,
    pub corr: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub param: Option<String>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
    pub param2: Option<String>,
    pub start2: Option<f64>,
    pub stop2: Option<f64>,
    pub count2: Option<usize>,
    pub ensemble: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// Polynomial degree of the finite-difference reference (stats sweeps).
    pub fit_degree: Option<usize>,
    pub fit_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub g_path: Option<PathBuf>,
}

/// Unresolved configuration as read from a file or collected from flags.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub model: ModelSection,
    pub integrator: IntegratorSection,
    pub method: MethodSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

fn pick<T>(over: Option<T>, base: Option<T>) -> Option<T> {
    over.or(base)
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Values set in `over` win; parameter maps are merged key by key.
    pub fn overlay(self, over: RawConfig) -> RawConfig {
        let mut params = self.model.params;
        params.extend(over.model.params);
        RawConfig {
            model: ModelSection {
                id: pick(over.model.id, self.model.id),
                n: pick(over.model.n, self.model.n),
                length: pick(over.model.length, self.model.length),
                params,
                active: pick(over.model.active, self.model.active),
            },
            integrator: IntegratorSection {
                scheme: pick(over.integrator.scheme, self.integrator.scheme),
                dt: pick(over.integrator.dt, self.integrator.dt),
            },
            method: MethodSection {
                kind: pick(over.method.kind, self.method.kind),
                objective: pick(over.method.objective, self.method.objective),
                m: pick(over.method.m, self.method.m),
                mext: pick(over.method.mext, self.method.mext),
                steps: pick(over.method.steps, self.method.steps),
                spinup: pick(over.method.spinup, self.method.spinup),
                corr: pick(over.method.corr, self.method.corr),
            },
            sweep: SweepSection {
                param: pick(over.sweep.param, self.sweep.param),
                start: pick(over.sweep.start, self.sweep.start),
                stop: pick(over.sweep.stop, self.sweep.stop),
                count: pick(over.sweep.count, self.sweep.count),
                param2: pick(over.sweep.param2, self.sweep.param2),
                start2: pick(over.sweep.start2, self.sweep.start2),
                stop2: pick(over.sweep.stop2, self.sweep.stop2),
                count2: pick(over.sweep.count2, self.sweep.count2),
                ensemble: pick(over.sweep.ensemble, self.sweep.ensemble),
                seed: pick(over.sweep.seed, self.sweep.seed),
                workers: pick(over.sweep.workers, self.sweep.workers),
                fit_degree: pick(over.sweep.fit_degree, self.sweep.fit_degree),
                fit_window: pick(over.sweep.fit_window, self.sweep.fit_window),
            },
            output: OutputSection {
                path: pick(over.output.path, self.output.path),
                summary: pick(over.output.summary, self.output.summary),
                g_path: pick(over.output.g_path, self.output.g_path),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Long-time average of the objective.
    Stats,
    Full,
    Reduced,
    /// Lyapunov exponents only.
    Les,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stats" => Ok(Method::Stats),
            "full" => Ok(Method::Full),
            "reduced" => Ok(Method::Reduced),
            "les" => Ok(Method::Les),
            other => Err(Error::Config(format!("unknown method `{other}` (expected stats, full, reduced or les)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Stats => "stats",
            Method::Full => "full",
            Method::Reduced => "reduced",
            Method::Les => "les",
        }
    }
}

/// One swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// `count` uniform points from `start` to `stop` inclusive.
    pub fn uniform(param: &str, start: f64, stop: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config(format!("grid over {param} needs at least one point")));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(Error::Config(format!("grid over {param} has non-finite bounds")));
        }
        if count > 1 && stop <= start {
            return Err(Error::Config(format!("grid over {param} must be strictly increasing ({start} to {stop})")));
        }
        let values = if count == 1 {
            vec![start]
        } else {
            let step = (stop - start) / (count - 1) as f64;
            (0..count).map(|i| if i + 1 == count { stop } else { start + step * i as f64 }).collect()
        };
        Ok(Axis { param: param.to_string(), values })
    }
}

/// Fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: String,
    pub shape: Shape,
    /// Fixed parameter overrides, sorted by name.
    pub params: Vec<(String, f64)>,
    pub active: String,
    pub scheme: Scheme,
    pub dt: f64,
    pub method: Method,
    pub objective: String,
    /// Unstable dimension for the full method and the SRB stream.
    pub m: usize,
    /// Basis size for the reduced method and Lyapunov runs.
    pub mext: usize,
    pub steps: usize,
    pub spinup: usize,
    pub corr: usize,
    pub grid: Option<Axis>,
    pub grid2: Option<Axis>,
    pub ensemble: usize,
    pub seed_base: u64,
    pub workers: usize,
    pub fit_degree: Option<usize>,
    pub fit_window: Option<(f64, f64)>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub g_path: Option<PathBuf>,
}

struct ModelDefaults {
    scheme: Scheme,
    dt: f64,
    active: &'static str,
    objective: &'static str,
    /// Averaging window, spinup and correlation window in time units.
    window: f64,
    spinup: f64,
    corr: f64,
}

fn model_defaults(id: &str) -> Result<ModelDefaults> {
    let flow = |scheme, dt, active, objective| ModelDefaults {
        scheme,
        dt,
        active,
        objective,
        window: 1000.0,
        spinup: 100.0,
        corr: 50.0,
    };
    match id {
        "lorenz63" => Ok(flow(Scheme::Rk2, 0.005, "rho", "z")),
        "lorenz96" => Ok(flow(Scheme::Rk4, 0.005, "F", "energy")),
        "ks" => Ok(ModelDefaults { window: 500.0, ..flow(Scheme::Rk4, 0.0006, "c", "mean") }),
        "sawtooth" => Ok(ModelDefaults {
            scheme: Scheme::Discrete,
            dt: 1.0,
            active: "s",
            objective: "wave-sum",
            window: 300_000.0,
            spinup: 100.0,
            corr: 20.0,
        }),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

fn axis(param: Option<String>, start: Option<f64>, stop: Option<f64>, count: Option<usize>) -> Result<Option<Axis>> {
    match (param, start) {
        (None, None) => Ok(None),
        (Some(p), Some(a)) => {
            let count = count.unwrap_or(1);
            let b = stop.unwrap_or(a);
            Axis::uniform(&p, a, b, count).map(Some)
        }
        (Some(p), None) => Err(Error::Config(format!("grid over {p} has no start value"))),
        (None, Some(_)) => Err(Error::Config("grid start given without a parameter name".into())),
    }
}

impl RawConfig {
    /// Apply defaults and validate. `method` overrides the `[method] kind` entry.
    pub fn resolve(self, method: Option<Method>) -> Result<SweepConfig> {
        let id = self.model.id.ok_or_else(|| Error::Config("no model given (set [model] id or --model)".into()))?;
        let defaults = model_defaults(&id)?;
        let shape = Shape { n: self.model.n, length: self.model.length };
        let params: Vec<(String, f64)> = self.model.params.into_iter().collect();
        // validates names and builds once to learn n and the default m
        let probe = build_model(&id, &shape, &params)?;
        let method = match (method, self.method.kind) {
            (Some(m), _) => m,
            (None, Some(k)) => Method::parse(&k)?,
            (None, None) => Method::Full,
        };
        let scheme = match self.integrator.scheme {
            Some(s) => Scheme::parse(&s)?,
            None => defaults.scheme,
        };
        let dt = if scheme == Scheme::Discrete { 1.0 } else { self.integrator.dt.unwrap_or(defaults.dt) };
        let steps_of = |t: f64| (t / dt).round() as usize;
        let active = self.model.active.or_else(|| self.sweep.param.clone()).unwrap_or_else(|| defaults.active.into());
        probe.param_index(&active)?;
        let m = self.method.m.unwrap_or_else(|| probe.default_m());
        let n = probe.dim();
        let mext = self.method.mext.unwrap_or((m + 2).min(n));
        let grid = axis(self.sweep.param, self.sweep.start, self.sweep.stop, self.sweep.count)?;
        let grid2 = axis(self.sweep.param2, self.sweep.start2, self.sweep.stop2, self.sweep.count2)?;
        if grid.is_none() && grid2.is_some() {
            return Err(Error::Config("a second grid axis needs a first one".into()));
        }
        for g in grid.iter().chain(grid2.iter()) {
            probe.param_index(&g.param)?;
        }
        let ensemble = self.sweep.ensemble.unwrap_or(1);
        if ensemble == 0 {
            return Err(Error::Config("ensemble size must be at least 1".into()));
        }
        let workers = self.sweep.workers.unwrap_or(1);
        if workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let fit_window = self.sweep.fit_window.map(|[a, b]| (a, b));
        if let Some((a, b)) = fit_window {
            if !(b > a) {
                return Err(Error::Config(format!("fit window must be increasing, got [{a}, {b}]")));
            }
        }
        let objective = self.method.objective.unwrap_or_else(|| defaults.objective.into());
        crate::models::Objective::parse(&objective)?.check_dim(n)?;
        let config = SweepConfig {
            model: id,
            shape,
            params,
            active,
            scheme,
            dt,
            method,
            objective,
            m,
            mext,
            steps: self.method.steps.unwrap_or_else(|| steps_of(defaults.window)),
            spinup: self.method.spinup.unwrap_or_else(|| steps_of(defaults.spinup)),
            corr: self.method.corr.unwrap_or_else(|| steps_of(defaults.corr)),
            grid,
            grid2,
            ensemble,
            seed_base: self.sweep.seed.unwrap_or(0),
            workers,
            fit_degree: self.sweep.fit_degree,
            fit_window,
            output: self.output.path,
            summary: self.output.summary,
            g_path: self.output.g_path,
        };
        config.validate()?;
        Ok(config)
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.steps <= self.spinup {
            return Err(Error::Config(format!("steps ({}) must exceed spinup ({})", self.steps, self.spinup)));
        }
        if self.method == Method::Full && self.steps <= self.spinup + self.corr {
            return Err(Error::Config(format!(
                "steps ({}) must exceed spinup + correlation window ({})",
                self.steps,
                self.spinup + self.corr
            )));
        }
        if self.m == 0 {
            return Err(Error::Config("unstable dimension must be at least 1".into()));
        }
        if self.mext == 0 {
            return Err(Error::Config("basis size must be at least 1".into()));
        }
        Ok(())
    }

    /// Grid points in row-major order; a single unnamed point without a grid.
    pub fn points(&self) -> Vec<(Option<f64>, Option<f64>)> {
        match (&self.grid, &self.grid2) {
            (None, _) => vec![(None, None)],
            (Some(g), None) => g.values.iter().map(|v| (Some(*v), None)).collect(),
            (Some(g), Some(h)) => {
                g.values.iter().flat_map(|a| h.values.iter().map(move |b| (Some(*a), Some(*b)))).collect()
            }
        }
    }

    /// Parameter overrides at one grid point.
    pub fn params_at(&self, point: (Option<f64>, Option<f64>)) -> Vec<(String, f64)> {
        let mut params: BTreeMap<String, f64> = self.params.iter().cloned().collect();
        if let (Some(g), Some(v)) = (&self.grid, point.0) {
            params.insert(g.param.clone(), v);
        }
        if let (Some(g), Some(v)) = (&self.grid2, point.1) {
            params.insert(g.param.clone(), v);
        }
        params.into_iter().collect()
    }
}
