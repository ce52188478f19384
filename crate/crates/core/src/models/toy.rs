use super::{Kind, Model};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

/// `dx/dt = A x + s·1`: a linear flow with a uniform forcing parameter `s`.
/// With `A = 0` and `s = 0` it is the zero vector field.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    n: usize,
    /// Row-major n x n.
    matrix: Vec<f64>,
    pub forcing: f64,
}

impl LinearFlow {
    pub fn new(n: usize, matrix: Vec<f64>, forcing: f64) -> Self {
        assert_eq!(matrix.len(), n * n, "matrix must be n x n");
        LinearFlow { n, matrix, forcing }
    }

    pub fn zero(n: usize) -> Self {
        LinearFlow::new(n, vec![0.0; n * n], 0.0)
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.matrix[i * self.n..(i + 1) * self.n].iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

impl Model for LinearFlow {
    fn id(&self) -> &'static str {
        "linear"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> Kind {
        Kind::Flow
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["s"]
    }

    fn param(&self, _index: usize) -> f64 {
        self.forcing
    }

    fn set_param(&mut self, _index: usize, value: f64) {
        self.forcing = value;
    }

    fn default_m(&self) -> usize {
        1
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
        out.iter_mut().for_each(|o| *o += self.forcing);
    }

    fn jvp(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        self.apply(v, out);
    }

    fn hvp(&self, _x: &[f64], _a: &[f64], _b: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn param_derivative(&self, _x: &[f64], _index: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 1.0);
    }

    fn mixed(&self, _x: &[f64], _index: usize, _v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn clone_model(&self) -> Box<dyn Model> {
        Box::new(self.clone())
    }
}
