use super::{Kind, Model};
use crate::error::{Error, Result};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

/// Kuramoto-Sivashinsky with an advection shift,
/// `u_t = −(u + c) u_x − u_xx − u_xxxx` on `[0, L]` with `u = u_x = 0` at both walls.
///
/// Second-order central differences on a uniform grid of `L/dx + 1` nodes.
/// The Dirichlet nodes are dropped and the Neumann conditions are imposed with
/// mirrored ghost nodes (`u_{-1} = u_1`, `u_{M+1} = u_{M-1}`), which leaves
/// `n = L/dx − 1` unknowns and a 5-point stencil for every one of them.
#[derive(Debug, Clone)]
pub struct KuramotoSivashinsky {
    n: usize,
    dx: f64,
    pub advection: f64,
}

impl KuramotoSivashinsky {
    pub const DEFAULT_LENGTH: f64 = 128.0;
    pub const DEFAULT_DX: f64 = 0.25;

    pub fn new(length: f64, dx: f64, advection: f64) -> Result<Self> {
        let cells = length / dx;
        if !(cells.is_finite() && cells >= 6.0 && (cells - cells.round()).abs() < 1e-9) {
            return Err(Error::Config(format!("ks length {length} must be a multiple of dx = {dx} with at least 6 cells")));
        }
        Ok(KuramotoSivashinsky { n: cells.round() as usize - 1, dx, advection })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        (self.n + 1) as f64 * self.dx
    }

    /// Value at state offset `k` (node `k+1`), resolving walls and ghosts.
    #[inline(always)]
    fn at(&self, u: &[f64], k: isize) -> f64 {
        let n = self.n as isize;
        if k == -1 || k == n {
            0.0
        } else if k == -2 {
            u[0]
        } else if k == n + 1 {
            u[self.n - 1]
        } else {
            u[k as usize]
        }
    }

    /// `(u_x, u_xx, u_xxxx)` at unknown `i`.
    #[inline(always)]
    fn derivatives(&self, u: &[f64], i: usize) -> (f64, f64, f64) {
        let (m2, m1, c, p1, p2) = if i >= 2 && i + 2 < self.n {
            (u[i - 2], u[i - 1], u[i], u[i + 1], u[i + 2])
        } else {
            let k = i as isize;
            (self.at(u, k - 2), self.at(u, k - 1), u[i], self.at(u, k + 1), self.at(u, k + 2))
        };
        let h = self.dx;
        let ux = (p1 - m1) / (2.0 * h);
        let uxx = (p1 - 2.0 * c + m1) / (h * h);
        let uxxxx = (p2 - 4.0 * p1 + 6.0 * c - 4.0 * m1 + m2) / (h * h * h * h);
        (ux, uxx, uxxxx)
    }

    #[inline(always)]
    fn first_derivative(&self, u: &[f64], i: usize) -> f64 {
        let k = i as isize;
        (self.at(u, k + 1) - self.at(u, k - 1)) / (2.0 * self.dx)
    }
}

impl Model for KuramotoSivashinsky {
    fn id(&self) -> &'static str {
        "ks"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn kind(&self) -> Kind {
        Kind::Flow
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["c"]
    }

    fn param(&self, index: usize) -> f64 {
        assert_eq!(index, 0, "ks has one parameter");
        self.advection
    }

    fn set_param(&mut self, index: usize, value: f64) {
        assert_eq!(index, 0, "ks has one parameter");
        self.advection = value;
    }

    fn default_m(&self) -> usize {
        // Roughly one unstable mode per 10 length units in the turbulent regime.
        ((self.length() / 10.0).round() as usize).max(1)
    }

    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let (ux, uxx, uxxxx) = self.derivatives(u, i);
            out[i] = -(u[i] + self.advection) * ux - uxx - uxxxx;
        }
    }

    fn jvp(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let ux = self.first_derivative(u, i);
            let (vx, vxx, vxxxx) = self.derivatives(v, i);
            out[i] = -v[i] * ux - (u[i] + self.advection) * vx - vxx - vxxxx;
        }
    }

    fn hvp(&self, _u: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = -(a[i] * self.first_derivative(b, i) + b[i] * self.first_derivative(a, i));
        }
    }

    fn param_derivative(&self, u: &[f64], index: usize, out: &mut [f64]) {
        assert_eq!(index, 0, "ks has one parameter");
        for i in 0..self.n {
            out[i] = -self.first_derivative(u, i);
        }
    }

    fn mixed(&self, _u: &[f64], index: usize, v: &[f64], out: &mut [f64]) {
        assert_eq!(index, 0, "ks has one parameter");
        for i in 0..self.n {
            out[i] = -self.first_derivative(v, i);
        }
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.n).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn clone_model(&self) -> Box<dyn Model> {
        Box::new(self.clone())
    }
}
