//! The one-step map `φ` and its derivative contractions.
//!
//! Flows are advanced by an explicit Runge-Kutta scheme. All contractions of
//! `φ` are obtained by pushing the corresponding perturbation through the
//! stages, so they only ever call the contractions of `f`:
//!
//! ```text
//! y_i = x + h Σ_j a_ij k_j,     k_i = f(y_i),     φ(x) = x + h Σ_i b_i k_i
//! ```
//!
//! * tangent      `δy_i = v + h Σ a_ij δk_j`,  `δk_i = Df(y_i) δy_i`
//! * second order `εy_i = h Σ a_ij εk_j`,      `εk_i = D²f(y_i)(δy_i, αy_i) + Df(y_i) εy_i`
//! * parametric   `σy_i = h Σ a_ij σk_j`,      `σk_i = Df(y_i) σy_i + ∂s f(y_i)`
//! * mixed        `μy_i = h Σ a_ij μk_j`,      `μk_i = D²f(y_i)(σy_i, δy_i) + Df(y_i) μy_i + D∂s f(y_i) δy_i`
//!
//! For the midpoint rule these expand to the familiar closed forms, e.g.
//! `Dφ v = v + h Df_p v + (h²/2) Df_p Df_k v`.
//!
//! Implicit schemes are not provided. Adding one only changes how the
//! contractions are evaluated: differentiating `h(x_k, x_{k+1}) = 0` gives the
//! linear system `∂h/∂x_{k+1} · Dφ v = −∂h/∂x_k · v` for the tangent, and
//! further differentiation yields analogous systems for the other products.

use crate::error::{Error, Result};
use crate::linalg::{axpy, norm_inf};
use crate::models::{Kind, Model, SharedModel};
use std::sync::Arc;

/// States whose sup-norm exceeds this are treated as a blow-up.
pub const OVERFLOW_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk2,
    Rk4,
    Discrete,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rk2" => Ok(Scheme::Rk2),
            "rk4" => Ok(Scheme::Rk4),
            "discrete" => Ok(Scheme::Discrete),
            other => Err(Error::Config(format!("unknown scheme `{other}` (rk2, rk4, discrete)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Rk2 => "rk2",
            Scheme::Rk4 => "rk4",
            Scheme::Discrete => "discrete",
        }
    }

    fn tableau(&self) -> (&'static [&'static [f64]], &'static [f64]) {
        const RK2_A: &[&[f64]] = &[&[], &[0.5]];
        const RK2_B: &[f64] = &[0.0, 1.0];
        const RK4_A: &[&[f64]] = &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]];
        const RK4_B: &[f64] = &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
        match self {
            Scheme::Rk2 => (RK2_A, RK2_B),
            Scheme::Rk4 => (RK4_A, RK4_B),
            Scheme::Discrete => (&[&[]], &[1.0]),
        }
    }
}

/// Stage states `y_i` and slopes `k_i` of one step from `x`.
#[derive(Debug, Clone)]
pub struct Stages {
    x: Vec<f64>,
    y: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
}

impl Stages {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `f(x)`; only meaningful for flows.
    pub fn flow(&self) -> &[f64] {
        &self.k[0]
    }
}

/// Per-stage inputs `δy_i` of a pushed perturbation, kept so that second-order
/// and mixed contractions can reuse them.
#[derive(Debug, Clone)]
pub struct StageTangent {
    dy: Vec<Vec<f64>>,
}

/// Scratch buffers for the contractions; one per solver.
#[derive(Debug, Clone)]
pub struct Workspace {
    dk: Vec<Vec<f64>>,
    ey: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    tmp2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepMap {
    scheme: Scheme,
    dt: f64,
    model: SharedModel,
    active: usize,
}

impl StepMap {
    pub fn new(model: SharedModel, scheme: Scheme, dt: f64, active_param: &str) -> Result<Self> {
        let active = model.param_index(active_param)?;
        match (model.kind(), scheme) {
            (Kind::Flow, Scheme::Discrete) => {
                return Err(Error::Config(format!("{} is a flow and needs rk2 or rk4", model.id())))
            }
            (Kind::DiscreteMap, Scheme::Rk2 | Scheme::Rk4) => {
                return Err(Error::Config(format!("{} is a map and needs the discrete scheme", model.id())))
            }
            _ => {}
        }
        if scheme != Scheme::Discrete && !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let dt = if scheme == Scheme::Discrete { 1.0 } else { dt };
        Ok(StepMap { scheme, dt, model, active })
    }

    pub fn from_model(model: Box<dyn Model>, scheme: Scheme, dt: f64, active_param: &str) -> Result<Self> {
        StepMap::new(Arc::from(model), scheme, dt, active_param)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Time per step; 1 for discrete maps.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn model(&self) -> &dyn Model {
        self.model.as_ref()
    }

    pub fn shared_model(&self) -> SharedModel {
        self.model.clone()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn active_param(&self) -> usize {
        self.active
    }

    pub fn active_name(&self) -> &'static str {
        self.model.param_names()[self.active]
    }

    pub fn is_flow(&self) -> bool {
        self.scheme != Scheme::Discrete
    }

    /// Same map with the active parameter set to `value`.
    pub fn with_param(&self, value: f64) -> StepMap {
        let mut m = self.model.clone_model();
        m.set_param(self.active, value);
        StepMap { model: Arc::from(m), ..self.clone() }
    }

    fn stage_count(&self) -> usize {
        self.scheme.tableau().1.len()
    }

    pub fn stages(&self) -> Stages {
        let n = self.dim();
        let s = self.stage_count();
        Stages { x: vec![0.0; n], y: vec![vec![0.0; n]; s], k: vec![vec![0.0; n]; s] }
    }

    pub fn stage_tangent(&self) -> StageTangent {
        StageTangent { dy: vec![vec![0.0; self.dim()]; self.stage_count()] }
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.dim();
        let s = self.stage_count();
        Workspace { dk: vec![vec![0.0; n]; s], ey: vec![vec![0.0; n]; s], tmp: vec![0.0; n], tmp2: vec![0.0; n] }
    }

    /// Evaluate all stages from `x`. For maps only `x` is recorded.
    pub fn eval_stages(&self, x: &[f64], st: &mut Stages) {
        st.x.copy_from_slice(x);
        if self.scheme == Scheme::Discrete {
            st.y[0].copy_from_slice(x);
            return;
        }
        let (a, _) = self.scheme.tableau();
        let h = self.dt;
        for i in 0..a.len() {
            let (done, rest) = st.k.split_at_mut(i);
            let yi = &mut st.y[i];
            yi.copy_from_slice(x);
            for (j, aij) in a[i].iter().enumerate() {
                if *aij != 0.0 {
                    axpy(h * aij, &done[j], yi);
                }
            }
            self.model.rhs(yi, &mut rest[0]);
        }
    }

    /// `φ(x)` from evaluated stages.
    pub fn advance(&self, st: &Stages, out: &mut [f64]) {
        if self.scheme == Scheme::Discrete {
            self.model.rhs(&st.x, out);
            self.model.wrap(out);
            return;
        }
        let (_, b) = self.scheme.tableau();
        out.copy_from_slice(&st.x);
        for (bi, ki) in b.iter().zip(&st.k) {
            if *bi != 0.0 {
                axpy(self.dt * bi, ki, out);
            }
        }
    }

    /// `Dφ·v`; the stage inputs are written to `store`.
    pub fn tangent(&self, st: &Stages, v: &[f64], store: &mut StageTangent, out: &mut [f64], ws: &mut Workspace) {
        if self.scheme == Scheme::Discrete {
            store.dy[0].copy_from_slice(v);
            self.model.jvp(&st.x, v, out);
            return;
        }
        let (a, b) = self.scheme.tableau();
        let h = self.dt;
        for i in 0..a.len() {
            let dyi = &mut store.dy[i];
            dyi.copy_from_slice(v);
            for (j, aij) in a[i].iter().enumerate() {
                if *aij != 0.0 {
                    axpy(h * aij, &ws.dk[j], dyi);
                }
            }
            self.model.jvp(&st.y[i], dyi, &mut ws.dk[i]);
        }
        out.copy_from_slice(v);
        for (bi, dki) in b.iter().zip(&ws.dk) {
            if *bi != 0.0 {
                axpy(h * bi, dki, out);
            }
        }
    }

    /// `D²φ(v, a)` from the stage inputs of both directions.
    pub fn second(&self, st: &Stages, tv: &StageTangent, ta: &StageTangent, out: &mut [f64], ws: &mut Workspace) {
        if self.scheme == Scheme::Discrete {
            self.model.hvp(&st.x, &tv.dy[0], &ta.dy[0], out);
            return;
        }
        let (a, b) = self.scheme.tableau();
        let h = self.dt;
        for i in 0..a.len() {
            // ek_i = D²f(y_i)(δy_i, αy_i) + Df(y_i) εy_i, with εy_0 = 0
            self.model.hvp(&st.y[i], &tv.dy[i], &ta.dy[i], &mut ws.dk[i]);
            if i > 0 {
                let (done, rest) = ws.dk.split_at_mut(i);
                let ey = &mut ws.ey[i];
                ey.iter_mut().for_each(|e| *e = 0.0);
                for (j, aij) in a[i].iter().enumerate() {
                    if *aij != 0.0 {
                        axpy(h * aij, &done[j], ey);
                    }
                }
                self.model.jvp(&st.y[i], ey, &mut ws.tmp);
                axpy(1.0, &ws.tmp, &mut rest[0]);
            }
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (bi, eki) in b.iter().zip(&ws.dk) {
            if *bi != 0.0 {
                axpy(h * bi, eki, out);
            }
        }
    }

    /// `χ = ∂s φ` for the active parameter; stage inputs go to `store`.
    pub fn param_tangent(&self, st: &Stages, store: &mut StageTangent, out: &mut [f64], ws: &mut Workspace) {
        if self.scheme == Scheme::Discrete {
            store.dy[0].iter_mut().for_each(|e| *e = 0.0);
            self.model.param_derivative(&st.x, self.active, out);
            return;
        }
        let (a, b) = self.scheme.tableau();
        let h = self.dt;
        for i in 0..a.len() {
            let (done, rest) = ws.dk.split_at_mut(i);
            let sy = &mut store.dy[i];
            sy.iter_mut().for_each(|e| *e = 0.0);
            for (j, aij) in a[i].iter().enumerate() {
                if *aij != 0.0 {
                    axpy(h * aij, &done[j], sy);
                }
            }
            let sk = &mut rest[0];
            self.model.param_derivative(&st.y[i], self.active, sk);
            if i > 0 {
                self.model.jvp(&st.y[i], sy, &mut ws.tmp);
                axpy(1.0, &ws.tmp, sk);
            }
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (bi, ski) in b.iter().zip(&ws.dk) {
            if *bi != 0.0 {
                axpy(h * bi, ski, out);
            }
        }
    }

    /// `D∂s φ·v` given the parametric stage inputs and those of `v`.
    pub fn mixed(&self, st: &Stages, sigma: &StageTangent, tv: &StageTangent, out: &mut [f64], ws: &mut Workspace) {
        if self.scheme == Scheme::Discrete {
            self.model.mixed(&st.x, self.active, &tv.dy[0], out);
            return;
        }
        let (a, b) = self.scheme.tableau();
        let h = self.dt;
        for i in 0..a.len() {
            let (done, rest) = ws.dk.split_at_mut(i);
            let mk = &mut rest[0];
            self.model.mixed(&st.y[i], self.active, &tv.dy[i], mk);
            if i > 0 {
                self.model.hvp(&st.y[i], &sigma.dy[i], &tv.dy[i], &mut ws.tmp);
                axpy(1.0, &ws.tmp, mk);
                let my = &mut ws.ey[i];
                my.iter_mut().for_each(|e| *e = 0.0);
                for (j, aij) in a[i].iter().enumerate() {
                    if *aij != 0.0 {
                        axpy(h * aij, &done[j], my);
                    }
                }
                self.model.jvp(&st.y[i], my, &mut ws.tmp2);
                axpy(1.0, &ws.tmp2, mk);
            }
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (bi, mki) in b.iter().zip(&ws.dk) {
            if *bi != 0.0 {
                axpy(h * bi, mki, out);
            }
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    fn prepared(&self, x: &[f64]) -> Result<(Stages, Workspace)> {
        self.check_len(x)?;
        let mut st = self.stages();
        self.eval_stages(x, &mut st);
        Ok((st, self.workspace()))
    }

    /// One step from `x`, failing on overflow.
    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (st, _) = self.prepared(x)?;
        let mut out = vec![0.0; x.len()];
        self.advance(&st, &mut out);
        check_state(&out, 1)?;
        Ok(out)
    }

    pub fn step_jvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let (st, mut ws) = self.prepared(x)?;
        let mut store = self.stage_tangent();
        let mut out = vec![0.0; x.len()];
        self.tangent(&st, v, &mut store, &mut out, &mut ws);
        Ok(out)
    }

    pub fn step_hvp(&self, x: &[f64], v: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        self.check_len(a)?;
        let (st, mut ws) = self.prepared(x)?;
        let (mut tv, mut ta) = (self.stage_tangent(), self.stage_tangent());
        let mut out = vec![0.0; x.len()];
        self.tangent(&st, v, &mut tv, &mut out, &mut ws);
        self.tangent(&st, a, &mut ta, &mut out, &mut ws);
        self.second(&st, &tv, &ta, &mut out, &mut ws);
        Ok(out)
    }

    pub fn step_param(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (st, mut ws) = self.prepared(x)?;
        let mut sigma = self.stage_tangent();
        let mut out = vec![0.0; x.len()];
        self.param_tangent(&st, &mut sigma, &mut out, &mut ws);
        Ok(out)
    }

    pub fn step_mixed(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let (st, mut ws) = self.prepared(x)?;
        let (mut sigma, mut tv) = (self.stage_tangent(), self.stage_tangent());
        let mut out = vec![0.0; x.len()];
        self.param_tangent(&st, &mut sigma, &mut out, &mut ws);
        self.tangent(&st, v, &mut tv, &mut out, &mut ws);
        self.mixed(&st, &sigma, &tv, &mut out, &mut ws);
        Ok(out)
    }
}

/// Overflow guard: non-finite or huge states abort with the step index.
#[inline]
pub fn check_state(x: &[f64], step: usize) -> Result<()> {
    let m = norm_inf(x);
    if m.is_finite() && m <= OVERFLOW_LIMIT {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// Primal trajectory driver that reuses its stage buffers.
#[derive(Debug, Clone)]
pub struct Trajectory {
    x: Vec<f64>,
    next: Vec<f64>,
    stages: Stages,
    step: usize,
}

impl Trajectory {
    pub fn new(map: &StepMap, x0: Vec<f64>) -> Self {
        Trajectory { next: vec![0.0; x0.len()], stages: map.stages(), x: x0, step: 0 }
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Stages of the latest step, evaluated at the previous state.
    pub fn stages(&self) -> &Stages {
        &self.stages
    }

    pub fn advance(&mut self, map: &StepMap) -> Result<()> {
        map.eval_stages(&self.x, &mut self.stages);
        map.advance(&self.stages, &mut self.next);
        std::mem::swap(&mut self.x, &mut self.next);
        self.step += 1;
        check_state(&self.x, self.step)
    }

    pub fn run(&mut self, map: &StepMap, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.advance(map)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
