//! Benchmark systems and the derivative-contraction interface.
//!
//! Every system provides its right-hand side (or map) together with the
//! contractions `Df·v`, `D²f(a,b)`, `∂s f` and `D∂s f·v`, all hand-derived.
//! The trait methods are the unchecked fast path used inside the solvers;
//! the free functions at the bottom of this module validate dimensions.

mod ks;
mod lorenz63;
mod lorenz96;
mod objective;
mod sawtooth;
mod toy;

pub use ks::KuramotoSivashinsky;
pub use lorenz63::Lorenz63;
pub use lorenz96::Lorenz96;
pub use objective::Objective;
pub use sawtooth::CoupledSawtooth;
pub use toy::LinearFlow;

use crate::error::{Error, Result};
use rand::RngCore;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Flow,
    DiscreteMap,
}

pub trait Model: Send + Sync + std::fmt::Debug {
    fn id(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn kind(&self) -> Kind;
    fn param_names(&self) -> &'static [&'static str];
    fn param(&self, index: usize) -> f64;
    fn set_param(&mut self, index: usize, value: f64);
    /// Expected number of positive Lyapunov exponents at the default parameters.
    fn default_m(&self) -> usize;

    /// `f(x)` for flows, `φ(x)` (before any wrapping) for maps.
    fn rhs(&self, x: &[f64], out: &mut [f64]);
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]);
    fn hvp(&self, x: &[f64], a: &[f64], b: &[f64], out: &mut [f64]);
    fn param_derivative(&self, x: &[f64], index: usize, out: &mut [f64]);
    fn mixed(&self, x: &[f64], index: usize, v: &[f64], out: &mut [f64]);

    /// Reduce a state back to its fundamental domain (torus maps).
    fn wrap(&self, _x: &mut [f64]) {}

    /// A random initial state; the solvers' spinup takes it onto the attractor.
    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn clone_model(&self) -> Box<dyn Model>;

    fn param_index(&self, name: &str) -> Result<usize> {
        self.param_names()
            .iter()
            .position(|p| *p == name)
            .ok_or_else(|| Error::UnknownParameter { model: self.id().to_string(), name: name.to_string() })
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        self.param_names().iter().enumerate().map(|(i, n)| (*n, self.param(i))).collect()
    }
}

impl Clone for Box<dyn Model> {
    fn clone(&self) -> Self {
        self.clone_model()
    }
}

/// Structural options that are not real-valued parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Shape {
    /// State dimension for lorenz96 and sawtooth.
    pub n: Option<usize>,
    /// Domain length for ks.
    pub length: Option<f64>,
}

/// Build a model by string id and apply `name=value` parameter overrides.
pub fn build_model(id: &str, shape: &Shape, params: &[(String, f64)]) -> Result<Box<dyn Model>> {
    let mut model: Box<dyn Model> = match id {
        "lorenz63" => {
            if let Some(n) = shape.n.filter(|&n| n != 3) {
                return Err(Error::Config(format!("lorenz63 has n = 3, got n = {n}")));
            }
            Box::new(Lorenz63::default())
        }
        "lorenz96" => Box::new(Lorenz96::new(shape.n.unwrap_or(40), 8.0)?),
        "sawtooth" => Box::new(CoupledSawtooth::new(shape.n.unwrap_or(2), 0.0, 0.0)?),
        "ks" => Box::new(KuramotoSivashinsky::new(
            shape.length.unwrap_or(KuramotoSivashinsky::DEFAULT_LENGTH),
            KuramotoSivashinsky::DEFAULT_DX,
            0.0,
        )?),
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    for (name, value) in params {
        let i = model.param_index(name)?;
        model.set_param(i, *value);
    }
    Ok(model)
}

pub type SharedModel = Arc<dyn Model>;

fn check(model: &dyn Model, v: &[f64]) -> Result<()> {
    if v.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: v.len() });
    }
    Ok(())
}

pub fn eval_f(model: &dyn Model, x: &[f64]) -> Result<Vec<f64>> {
    check(model, x)?;
    let mut out = vec![0.0; x.len()];
    model.rhs(x, &mut out);
    Ok(out)
}

pub fn contract_first(model: &dyn Model, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check(model, x)?;
    check(model, v)?;
    let mut out = vec![0.0; x.len()];
    model.jvp(x, v, &mut out);
    Ok(out)
}

pub fn contract_second(model: &dyn Model, x: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check(model, x)?;
    check(model, a)?;
    check(model, b)?;
    let mut out = vec![0.0; x.len()];
    model.hvp(x, a, b, &mut out);
    Ok(out)
}

pub fn param_derivative(model: &dyn Model, x: &[f64], target: &str) -> Result<Vec<f64>> {
    check(model, x)?;
    let i = model.param_index(target)?;
    let mut out = vec![0.0; x.len()];
    model.param_derivative(x, i, &mut out);
    Ok(out)
}

pub fn contract_mixed(model: &dyn Model, x: &[f64], target: &str, v: &[f64]) -> Result<Vec<f64>> {
    check(model, x)?;
    check(model, v)?;
    let i = model.param_index(target)?;
    let mut out = vec![0.0; x.len()];
    model.mixed(x, i, v, &mut out);
    Ok(out)
}
