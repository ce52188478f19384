//! Orthonormal tangent basis, Lyapunov exponents and the regularized tangent.
//!
//! The basis `Q` is pushed forward by `Dφ` and re-orthonormalized every step
//! (Benettin's QR iteration). The regularized tangent `v` solves the
//! inhomogeneous tangent equation `r = Dφ v + χ` and then has its
//! unstable-center component removed, either against `(Q, f)` through the
//! Schur complement (full mode) or against the columns of an extended basis
//! (reduced mode).

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, qr_in_place, upper_triangular_inverse};
use crate::response::SchurFactor;
use crate::stepping::{StageTangent, Stages, StepMap, Workspace};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

/// Columns with `R_ii` below this are treated as collapsed.
pub const RANK_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    /// Per-direction exponents: 1/time for flows, 1/step for maps.
    pub lambdas: Vec<f64>,
    /// Number of accumulated steps.
    pub window: usize,
    pub spinup: usize,
}

#[derive(Debug, Clone)]
pub struct TangentFrame {
    q: Vec<Vec<f64>>,
    r: Vec<f64>,
    r_inv: Vec<f64>,
    q_stages: Vec<StageTangent>,
    v: Vec<f64>,
    v_stage: StageTangent,
    chi: Vec<f64>,
    chi_stage: StageTangent,
    residual: Vec<f64>,
    c: Vec<f64>,
    c0: f64,
    z: Vec<f64>,
    le_acc: Vec<f64>,
    le_steps: usize,
    pushed: Vec<f64>,
}

impl TangentFrame {
    /// Random orthonormal basis of `cols` columns and `v = 0`.
    pub fn new(map: &StepMap, cols: usize, rng: &mut dyn RngCore) -> Result<Self> {
        let n = map.dim();
        if cols == 0 || cols > n {
            return Err(Error::Config(format!("basis size must be in 1..={n}, got {cols}")));
        }
        let q = (0..cols).map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect()).collect();
        Self::from_basis(map, q)
    }

    /// Start from the given columns (orthonormalized here).
    pub fn from_basis(map: &StepMap, mut q: Vec<Vec<f64>>) -> Result<Self> {
        let n = map.dim();
        let m = q.len();
        if let Some(bad) = q.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        let mut r = vec![0.0; m * m];
        qr_in_place(&mut q, &mut r, RANK_TOLERANCE).map_err(|column| Error::RankDeficient { step: 0, column })?;
        Ok(TangentFrame {
            q,
            r_inv: upper_triangular_inverse(&r, m),
            r,
            q_stages: (0..m).map(|_| map.stage_tangent()).collect(),
            v: vec![0.0; n],
            v_stage: map.stage_tangent(),
            chi: vec![0.0; n],
            chi_stage: map.stage_tangent(),
            residual: vec![0.0; n],
            c: vec![0.0; m],
            c0: 0.0,
            z: vec![0.0; m],
            le_acc: vec![0.0; m],
            le_steps: 0,
            pushed: vec![0.0; n],
        })
    }

    pub fn cols(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[Vec<f64>] {
        &self.q
    }

    /// Row-major upper-triangular factor of the latest QR.
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn r_inv(&self) -> &[f64] {
        &self.r_inv
    }

    /// Stage inputs of the columns of the previous basis, for second-order products.
    pub fn q_stages(&self) -> &[StageTangent] {
        &self.q_stages
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn set_v(&mut self, v: &[f64]) {
        self.v.copy_from_slice(v);
    }

    pub fn v_stage(&self) -> &StageTangent {
        &self.v_stage
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn chi_stage(&self) -> &StageTangent {
        &self.chi_stage
    }

    /// `r_{k+1} = Dφ v_k + χ_{k+1}` from the latest push.
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `Q ← qr(Dφ Q)`. `step` only labels the error.
    pub fn push_basis(&mut self, map: &StepMap, st: &Stages, ws: &mut Workspace, step: usize) -> Result<()> {
        for (col, stage) in self.q.iter_mut().zip(self.q_stages.iter_mut()) {
            map.tangent(st, col, stage, &mut self.pushed, ws);
            col.copy_from_slice(&self.pushed);
        }
        let m = self.q.len();
        qr_in_place(&mut self.q, &mut self.r, RANK_TOLERANCE)
            .map_err(|column| Error::RankDeficient { step, column })?;
        self.r_inv = upper_triangular_inverse(&self.r, m);
        Ok(())
    }

    /// `r = Dφ v + χ`.
    pub fn push_tangent(&mut self, map: &StepMap, st: &Stages, ws: &mut Workspace) {
        map.tangent(st, &self.v, &mut self.v_stage, &mut self.residual, ws);
        map.param_tangent(st, &mut self.chi_stage, &mut self.chi, ws);
        axpy(1.0, &self.chi, &mut self.residual);
    }

    /// `v = r − Σ cⁱ qⁱ − c⁰ f` with `v ⟂ span(Q)` and `v ⟂ f`.
    pub fn project_full(&mut self, f: &[f64], schur: &SchurFactor) {
        let ff = schur.ff();
        let fr = dot(f, &self.residual) / ff;
        for (zi, qi) in self.z.iter_mut().zip(&self.q) {
            *zi = dot(qi, &self.residual) - fr * dot(qi, f);
        }
        schur.solve(&self.z, &mut self.c);
        self.v.copy_from_slice(&self.residual);
        for (ci, qi) in self.c.iter().zip(&self.q) {
            axpy(-ci, qi, &mut self.v);
        }
        self.c0 = dot(f, &self.v) / ff;
        axpy(-self.c0, f, &mut self.v);
    }

    /// `c = Qᵀ r`, `v = r − Q c`.
    pub fn project_reduced(&mut self) {
        self.v.copy_from_slice(&self.residual);
        for (ci, qi) in self.c.iter_mut().zip(&self.q) {
            *ci = dot(qi, &self.residual);
            axpy(-*ci, qi, &mut self.v);
        }
        // one more sweep keeps v orthogonal to working precision
        for (ci, qi) in self.c.iter_mut().zip(&self.q) {
            let h = dot(qi, &self.v);
            *ci += h;
            axpy(-h, qi, &mut self.v);
        }
    }

    /// `le += log diag R` of the latest QR.
    pub fn accumulate_les(&mut self) {
        let m = self.q.len();
        for (i, acc) in self.le_acc.iter_mut().enumerate() {
            *acc += self.r[i * m + i].ln();
        }
        self.le_steps += 1;
    }

    pub fn lyapunov(&self, dt: f64, spinup: usize) -> Result<LyapunovEstimate> {
        if self.le_steps == 0 {
            return Err(Error::NoSamples);
        }
        let span = self.le_steps as f64 * dt;
        Ok(LyapunovEstimate {
            lambdas: self.le_acc.iter().map(|s| s / span).collect(),
            window: self.le_steps,
            spinup,
        })
    }
}

/// Benettin iteration alone: `cols` exponents from a seeded trajectory,
/// averaged over the steps after `spinup`.
pub fn lyapunov_spectrum(map: &StepMap, cols: usize, steps: usize, spinup: usize, seed: u64) -> Result<LyapunovEstimate> {
    use rand::SeedableRng;
    if steps <= spinup {
        return Err(Error::Config(format!("steps ({steps}) must exceed spinup ({spinup})")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let x0 = map.model().initial_state(&mut rng);
    let mut frame = TangentFrame::new(map, cols, &mut rng)?;
    let mut traj = crate::stepping::Trajectory::new(map, x0);
    let mut ws = map.workspace();
    for k in 0..steps {
        traj.advance(map)?;
        frame.push_basis(map, traj.stages(), &mut ws, k + 1)?;
        if k >= spinup {
            frame.accumulate_les();
        }
    }
    frame.lyapunov(map.dt(), spinup)
}
