use super::{Kind, Model};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

/// `dx/dt = σ(y−x)`, `dy/dt = x(ρ−z) − y`, `dz/dt = xy − βz`.
#[derive(Debug, Clone)]
pub struct Lorenz63 {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for Lorenz63 {
    fn default() -> Self {
        Lorenz63 { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0 }
    }
}

impl Model for Lorenz63 {
    fn id(&self) -> &'static str {
        "lorenz63"
    }

    fn dim(&self) -> usize {
        3
    }

    fn kind(&self) -> Kind {
        Kind::Flow
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["sigma", "rho", "beta"]
    }

    fn param(&self, index: usize) -> f64 {
        [self.sigma, self.rho, self.beta][index]
    }

    fn set_param(&mut self, index: usize, value: f64) {
        match index {
            0 => self.sigma = value,
            1 => self.rho = value,
            2 => self.beta = value,
            _ => panic!("lorenz63 has three parameters"),
        }
    }

    fn default_m(&self) -> usize {
        1
    }

    #[inline]
    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * (x[1] - x[0]);
        out[1] = x[0] * (self.rho - x[2]) - x[1];
        out[2] = x[0] * x[1] - self.beta * x[2];
    }

    #[inline]
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * (v[1] - v[0]);
        out[1] = v[0] * (self.rho - x[2]) - x[0] * v[2] - v[1];
        out[2] = v[0] * x[1] + x[0] * v[1] - self.beta * v[2];
    }

    #[inline]
    fn hvp(&self, _x: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = -(a[0] * b[2] + a[2] * b[0]);
        out[2] = a[0] * b[1] + a[1] * b[0];
    }

    fn param_derivative(&self, x: &[f64], index: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match index {
            0 => out[0] = x[1] - x[0],
            1 => out[1] = x[0],
            2 => out[2] = -x[2],
            _ => panic!("lorenz63 has three parameters"),
        }
    }

    fn mixed(&self, _x: &[f64], index: usize, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match index {
            0 => out[0] = v[1] - v[0],
            1 => out[1] = v[0],
            2 => out[2] = -v[2],
            _ => panic!("lorenz63 has three parameters"),
        }
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut x: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        x[2] += self.rho - 1.0;
        x
    }

    fn clone_model(&self) -> Box<dyn Model> {
        Box::new(self.clone())
    }
}
