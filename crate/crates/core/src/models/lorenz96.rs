use super::{Kind, Model};
use crate::error::{Error, Result};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

/// `dx^i/dt = (x^{i+1} − x^{i−2}) x^{i−1} − x^i + F` on a periodic ring.
#[derive(Debug, Clone)]
pub struct Lorenz96 {
    n: usize,
    pub forcing: f64,
}

impl Lorenz96 {
    pub fn new(n: usize, forcing: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::Config(format!("lorenz96 needs n >= 4, got {n}")));
        }
        Ok(Lorenz96 { n, forcing })
    }

    /// Ring neighbours `(i+1, i−1, i−2)`.
    #[inline(always)]
    fn neighbours(&self, i: usize) -> (usize, usize, usize) {
        let n = self.n;
        let p1 = if i + 1 == n { 0 } else { i + 1 };
        let m1 = if i == 0 { n - 1 } else { i - 1 };
        let m2 = if i >= 2 { i - 2 } else { i + n - 2 };
        (p1, m1, m2)
    }
}

impl Model for Lorenz96 {
    fn id(&self) -> &'static str {
        "lorenz96"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> Kind {
        Kind::Flow
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["F"]
    }

    fn param(&self, index: usize) -> f64 {
        assert_eq!(index, 0, "lorenz96 has one parameter");
        self.forcing
    }

    fn set_param(&mut self, index: usize, value: f64) {
        assert_eq!(index, 0, "lorenz96 has one parameter");
        self.forcing = value;
    }

    fn default_m(&self) -> usize {
        // Positive exponents at F = 8 grow roughly like n/3.
        (self.n + 1) / 3
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let (p1, m1, m2) = self.neighbours(i);
            out[i] = (x[p1] - x[m2]) * x[m1] - x[i] + self.forcing;
        }
    }

    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let (p1, m1, m2) = self.neighbours(i);
            out[i] = (v[p1] - v[m2]) * x[m1] + (x[p1] - x[m2]) * v[m1] - v[i];
        }
    }

    fn hvp(&self, _x: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let (p1, m1, m2) = self.neighbours(i);
            out[i] = (a[p1] - a[m2]) * b[m1] + (b[p1] - b[m2]) * a[m1];
        }
    }

    fn param_derivative(&self, _x: &[f64], index: usize, out: &mut [f64]) {
        assert_eq!(index, 0, "lorenz96 has one parameter");
        out.iter_mut().for_each(|o| *o = 1.0);
    }

    fn mixed(&self, _x: &[f64], index: usize, _v: &[f64], out: &mut [f64]) {
        assert_eq!(index, 0, "lorenz96 has one parameter");
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.n).map(|_| self.forcing + rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn clone_model(&self) -> Box<dyn Model> {
        Box::new(self.clone())
    }
}
