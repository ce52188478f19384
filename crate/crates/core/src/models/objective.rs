use crate::error::{Error, Result};

/// Scalar observables `J(x)` with analytic gradients.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `J = x^i`
    Component(usize),
    /// `J = exp(rate · x^i) / divisor`
    Exponential { index: usize, rate: f64, divisor: f64 },
    /// `J = exp(sin z) sin z` with `z = Σ w_k x^{i_k}`
    Wave(Vec<(usize, f64)>),
    /// Spatial average `J = (1/n) Σ (x^i)^p`
    Moment(u32),
}

impl Objective {
    /// Parse an objective id: `x`, `y`, `z`, `component:<i>`, `exp-x4`,
    /// `wave-sum`, `wave-diff`, `wave-x1`, `mean`, `energy`, `moment:<p>`.
    pub fn parse(id: &str) -> Result<Self> {
        let bad = || Error::UnknownObjective(id.to_string());
        Ok(match id {
            "x" => Objective::Component(0),
            "y" => Objective::Component(1),
            "z" => Objective::Component(2),
            "exp-x4" => Objective::Exponential { index: 0, rate: 0.25, divisor: 1e4 },
            "wave-sum" => Objective::Wave(vec![(0, 1.0), (1, 1.0)]),
            "wave-diff" => Objective::Wave(vec![(0, 1.0), (1, -1.0)]),
            "wave-x1" => Objective::Wave(vec![(0, 1.0)]),
            "mean" => Objective::Moment(1),
            "energy" => Objective::Moment(2),
            _ => {
                if let Some(i) = id.strip_prefix("component:") {
                    Objective::Component(i.parse().map_err(|_| bad())?)
                } else if let Some(p) = id.strip_prefix("moment:") {
                    match p.parse() {
                        Ok(p) if p >= 1 => Objective::Moment(p),
                        _ => return Err(bad()),
                    }
                } else {
                    return Err(bad());
                }
            }
        })
    }

    /// Largest state index the objective reads, if any.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            Objective::Component(i) | Objective::Exponential { index: i, .. } => Some(*i),
            Objective::Wave(w) => w.iter().map(|(i, _)| *i).max(),
            Objective::Moment(_) => None,
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self.max_index() {
            Some(i) if i >= n => Err(Error::DimensionMismatch { expected: i + 1, got: n }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Component(i) => x[*i],
            Objective::Exponential { index, rate, divisor } => (rate * x[*index]).exp() / divisor,
            Objective::Wave(w) => {
                let z: f64 = w.iter().map(|(i, c)| c * x[*i]).sum();
                z.sin().exp() * z.sin()
            }
            Objective::Moment(p) => x.iter().map(|xi| xi.powi(*p as i32)).sum::<f64>() / x.len() as f64,
        }
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Objective::Component(i) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                out[*i] = 1.0;
            }
            Objective::Exponential { index, rate, divisor } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                out[*index] = rate * (rate * x[*index]).exp() / divisor;
            }
            Objective::Wave(w) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let z: f64 = w.iter().map(|(i, c)| c * x[*i]).sum();
                let dj = z.cos() * z.sin().exp() * (1.0 + z.sin());
                for (i, c) in w {
                    out[*i] += c * dj;
                }
            }
            Objective::Moment(p) => {
                let scale = *p as f64 / x.len() as f64;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = scale * xi.powi(*p as i32 - 1);
                }
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.grad_into(x, &mut g);
        g
    }

    /// `DJ(x)·v` without forming the gradient.
    pub fn directional(&self, x: &[f64], v: &[f64]) -> f64 {
        match self {
            Objective::Component(i) => v[*i],
            Objective::Exponential { index, rate, divisor } => rate * (rate * x[*index]).exp() / divisor * v[*index],
            Objective::Wave(w) => {
                let z: f64 = w.iter().map(|(i, c)| c * x[*i]).sum();
                let dj = z.cos() * z.sin().exp() * (1.0 + z.sin());
                w.iter().map(|(i, c)| c * dj * v[*i]).sum()
            }
            Objective::Moment(p) => {
                let scale = *p as f64 / x.len() as f64;
                x.iter().zip(v).map(|(xi, vi)| scale * xi.powi(*p as i32 - 1) * vi).sum()
            }
        }
    }
}
