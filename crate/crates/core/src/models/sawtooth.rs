use super::{Kind, Model};
use crate::error::{Error, Result};
use rand::{Rng, RngCore};
use std::f64::consts::TAU;

/// Coupled sawtooth map on the n-torus:
/// `x^i ← 2x^i + s·sin(x^{i+1} − x^i) + t·sin(x^i) mod 2π`, with `x^{n+1} = x^1`.
#[derive(Debug, Clone)]
pub struct CoupledSawtooth {
    n: usize,
    pub coupling: f64,
    pub distortion: f64,
}

impl CoupledSawtooth {
    pub fn new(n: usize, coupling: f64, distortion: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("sawtooth needs n >= 1".into()));
        }
        Ok(CoupledSawtooth { n, coupling, distortion })
    }

    #[inline(always)]
    fn next(&self, i: usize) -> usize {
        if i + 1 == self.n {
            0
        } else {
            i + 1
        }
    }
}

impl Model for CoupledSawtooth {
    fn id(&self) -> &'static str {
        "sawtooth"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> Kind {
        Kind::DiscreteMap
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["s", "t"]
    }

    fn param(&self, index: usize) -> f64 {
        [self.coupling, self.distortion][index]
    }

    fn set_param(&mut self, index: usize, value: f64) {
        match index {
            0 => self.coupling = value,
            1 => self.distortion = value,
            _ => panic!("sawtooth has two parameters"),
        }
    }

    fn default_m(&self) -> usize {
        self.n
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let theta = x[self.next(i)] - x[i];
            out[i] = 2.0 * x[i] + self.coupling * theta.sin() + self.distortion * x[i].sin();
        }
    }

    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let j = self.next(i);
            let theta = x[j] - x[i];
            out[i] = self.coupling * theta.cos() * (v[j] - v[i]) + (2.0 + self.distortion * x[i].cos()) * v[i];
        }
    }

    fn hvp(&self, x: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let j = self.next(i);
            let theta = x[j] - x[i];
            out[i] = -self.coupling * theta.sin() * (a[j] - a[i]) * (b[j] - b[i])
                - self.distortion * x[i].sin() * a[i] * b[i];
        }
    }

    fn param_derivative(&self, x: &[f64], index: usize, out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = match index {
                0 => (x[self.next(i)] - x[i]).sin(),
                1 => x[i].sin(),
                _ => panic!("sawtooth has two parameters"),
            };
        }
    }

    fn mixed(&self, x: &[f64], index: usize, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let j = self.next(i);
            out[i] = match index {
                0 => (x[j] - x[i]).cos() * (v[j] - v[i]),
                1 => x[i].cos() * v[i],
                _ => panic!("sawtooth has two parameters"),
            };
        }
    }

    fn wrap(&self, x: &mut [f64]) {
        for xi in x.iter_mut() {
            let r = xi.rem_euclid(TAU);
            // rem_euclid can round up to exactly 2π for tiny negative inputs
            *xi = if r >= TAU { 0.0 } else { r };
        }
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.n).map(|_| rng.random::<f64>() * TAU).collect()
    }

    fn clone_model(&self) -> Box<dyn Model> {
        Box::new(self.clone())
    }
}
