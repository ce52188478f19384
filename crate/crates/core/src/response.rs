//! Linear response `d⟨J⟩/ds` by space-split sensitivity.
//!
//! The full pipeline splits Ruelle's response into a stable part
//! (`⟨DJ·v⟩`), a neutral part (correlations of `c⁰` with `DJ·f`) and an
//! unstable part (correlations of `J` with `u = Σ bⁱⁱ + cⁱgⁱ`). The reduced
//! pipeline keeps only the stable part and projects `v` against an extended
//! orthonormal basis instead of `(Q, f)`.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::models::Objective;
use crate::srb::{GNorms, SecondOrderFrame};
use crate::stepping::{check_state, Stages, StageTangent, StepMap, Workspace};
use crate::tangent::{LyapunovEstimate, TangentFrame};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `‖f‖` below this means the trajectory sits on a fixed point.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-14;
/// `1 − |Qᵀf|²/|f|²` below this means `f` lies in `span(Q)`.
pub const TANGENCY_TOLERANCE: f64 = 1e-12;

/// `S = I − qf qfᵀ / ff` with `qf = Qᵀf`, `ff = f·f`.
#[derive(Debug, Clone)]
pub struct SchurFactor {
    m: usize,
    s: Vec<f64>,
    s_inv: Vec<f64>,
    qf: Vec<f64>,
    ff: f64,
}

impl SchurFactor {
    pub fn new(q: &[Vec<f64>], f: &[f64]) -> Result<Self> {
        let m = q.len();
        let mut out = SchurFactor { m, s: vec![0.0; m * m], s_inv: vec![0.0; m * m], qf: vec![0.0; m], ff: 0.0 };
        out.update(q, f)?;
        Ok(out)
    }

    /// `S = I` for `f ⟂ span(Q)` with `|f| = 1`.
    pub fn identity(m: usize) -> Self {
        let mut s = vec![0.0; m * m];
        for i in 0..m {
            s[i * m + i] = 1.0;
        }
        SchurFactor { m, s_inv: s.clone(), s, qf: vec![0.0; m], ff: 1.0 }
    }

    /// Refactor for a new basis and flow vector.
    pub fn update(&mut self, q: &[Vec<f64>], f: &[f64]) -> Result<()> {
        let m = self.m;
        self.ff = dot(f, f);
        if !(self.ff.sqrt() >= FIXED_POINT_TOLERANCE) {
            return Err(Error::FixedPoint);
        }
        for (qf, qi) in self.qf.iter_mut().zip(q) {
            *qf = dot(qi, f);
        }
        // S has eigenvalue 1 − |qf|²/ff along qf and 1 elsewhere
        let gap = 1.0 - dot(&self.qf, &self.qf) / self.ff;
        if !(gap >= TANGENCY_TOLERANCE) {
            return Err(Error::Tangency(gap));
        }
        for i in 0..m {
            for j in 0..m {
                let delta = if i == j { 1.0 } else { 0.0 };
                self.s[i * m + j] = delta - self.qf[i] * self.qf[j] / self.ff;
            }
        }
        let chol = DMatrix::from_row_slice(m, m, &self.s).cholesky().ok_or(Error::Tangency(gap))?;
        let inv = chol.inverse();
        for i in 0..m {
            for j in 0..m {
                self.s_inv[i * m + j] = inv[(i, j)];
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Row-major `S`.
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn s_inv(&self) -> &[f64] {
        &self.s_inv
    }

    pub fn qf(&self) -> &[f64] {
        &self.qf
    }

    pub fn ff(&self) -> f64 {
        self.ff
    }

    /// `out = S⁻¹ z`.
    pub fn solve(&self, z: &[f64], out: &mut [f64]) {
        let m = self.m;
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.s_inv[i * m..(i + 1) * m], z);
        }
    }
}

/// Derivatives of `v` and of its projection coefficients along the chart
/// coordinates of the unstable manifold.
#[derive(Debug, Clone)]
pub struct UnstableFrame {
    m: usize,
    /// `wʲ = ∂_{ξʲ} v`.
    w: Vec<Vec<f64>>,
    /// `∂_{ξʲ} r`, first in old then in new chart coordinates.
    dr_old: Vec<Vec<f64>>,
    dr: Vec<Vec<f64>>,
    /// `Df_{k+1} qʲ`.
    dfq: Vec<Vec<f64>>,
    d0: Vec<f64>,
    /// `d^{i,j}` at `i·m + j`.
    d: Vec<f64>,
    b0: Vec<f64>,
    /// `b^{i,j}` at `i·m + j`.
    b: Vec<f64>,
    u: f64,
    rhs: Vec<f64>,
    col: Vec<f64>,
    scratch: StageTangent,
    tmp: Vec<f64>,
    tmp2: Vec<f64>,
}

impl UnstableFrame {
    /// `w ≡ 0`.
    pub fn new(map: &StepMap, m: usize) -> Self {
        let n = map.dim();
        UnstableFrame {
            m,
            w: vec![vec![0.0; n]; m],
            dr_old: vec![vec![0.0; n]; m],
            dr: vec![vec![0.0; n]; m],
            dfq: vec![vec![0.0; n]; m],
            d0: vec![0.0; m],
            d: vec![0.0; m * m],
            b0: vec![0.0; m],
            b: vec![0.0; m * m],
            u: 0.0,
            rhs: vec![0.0; m],
            col: vec![0.0; m],
            scratch: map.stage_tangent(),
            tmp: vec![0.0; n],
            tmp2: vec![0.0; n],
        }
    }

    pub fn w(&self, j: usize) -> &[f64] {
        &self.w[j]
    }

    pub fn set_w(&mut self, j: usize, value: &[f64]) {
        self.w[j].copy_from_slice(value);
    }

    /// `∂_{ξʲ} r_{k+1}` in the new chart coordinates.
    pub fn dr(&self, j: usize) -> &[f64] {
        &self.dr[j]
    }

    pub fn d0(&self) -> &[f64] {
        &self.d0
    }

    /// Row-major `d^{i,j}`.
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn b0(&self) -> &[f64] {
        &self.b0
    }

    /// Row-major `b^{i,j}`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `Σ bⁱⁱ + cⁱgⁱ` of the latest step.
    pub fn u(&self) -> f64 {
        self.u
    }

    /// `∂_{ξ_kʲ} r_{k+1} = D²φ(v_k, q_kʲ) + Dφ w_kʲ + D∂sφ q_kʲ`, rescaled by `R⁻¹`.
    /// Must run before `v` and `w` are overwritten.
    pub fn push_residual_derivative(
        &mut self,
        map: &StepMap,
        st: &Stages,
        frame: &TangentFrame,
        ws: &mut Workspace,
    ) {
        let m = self.m;
        for j in 0..m {
            let qs = &frame.q_stages()[j];
            let out = &mut self.dr_old[j];
            map.second(st, frame.v_stage(), qs, out, ws);
            map.tangent(st, &self.w[j], &mut self.scratch, &mut self.tmp, ws);
            axpy(1.0, &self.tmp, out);
            map.mixed(st, frame.chi_stage(), qs, &mut self.tmp, ws);
            axpy(1.0, &self.tmp, out);
        }
        let r_inv = frame.r_inv();
        for j in 0..m {
            let out = &mut self.dr[j];
            out.iter_mut().for_each(|e| *e = 0.0);
            for i in 0..=j {
                axpy(r_inv[i * m + j], &self.dr_old[i], out);
            }
        }
    }

    /// Right-hand sides `d`, coefficients `b`, derivative tangents `w` and `u`
    /// at step `k+1`, once `v`, `c`, `c⁰`, `Q`, `g`, `p` are current.
    pub fn solve(
        &mut self,
        map: &StepMap,
        x_next: &[f64],
        f: &[f64],
        frame: &TangentFrame,
        srb: &SecondOrderFrame,
        schur: &SchurFactor,
    ) {
        let m = self.m;
        let q = frame.q();
        let (c, c0, v, r) = (frame.c(), frame.c0(), frame.v(), frame.residual());
        let ff = schur.ff();
        let qf = schur.qf();
        for (dfq, qi) in self.dfq.iter_mut().zip(q) {
            map.model().jvp(x_next, qi, dfq);
        }
        // r − c⁰ f
        self.tmp2.copy_from_slice(r);
        axpy(-c0, f, &mut self.tmp2);
        for i in 0..m {
            let dfq_f = dot(&self.dfq[i], f);
            let cp_f: f64 = (0..m).map(|l| c[l] * dot(srb.p(l, i), f)).sum();
            self.d0[i] = dot(v, &self.dfq[i]) + dot(&self.dr[i], f) - cp_f - c0 * dfq_f;
        }
        for i in 0..m {
            for j in 0..m {
                self.d[i * m + j] = dot(srb.p(i, j), &self.tmp2) + dot(&q[i], &self.dr[j]) - c0 * dot(&q[i], &self.dfq[j]);
            }
        }
        for j in 0..m {
            for (l, rhs) in self.rhs.iter_mut().enumerate() {
                *rhs = self.d[l * m + j] - self.d0[j] / ff * qf[l];
            }
            schur.solve(&self.rhs, &mut self.col);
            for i in 0..m {
                self.b[i * m + j] = self.col[i];
            }
        }
        for i in 0..m {
            let qb: f64 = (0..m).map(|l| qf[l] * self.b[l * m + i]).sum();
            self.b0[i] = (self.d0[i] - qb) / ff;
        }
        let g = srb.g();
        for i in 0..m {
            let w = &mut self.w[i];
            w.copy_from_slice(&self.dr[i]);
            for l in 0..m {
                axpy(-self.b[l * m + i], &q[l], w);
                axpy(-c[l], srb.p(l, i), w);
            }
            axpy(-self.b0[i], f, w);
            axpy(-c0, &self.dfq[i], w);
        }
        self.u = (0..m).map(|i| self.b[i * m + i] + c[i] * g[i]).sum();
    }

    fn is_finite(&self) -> bool {
        self.u.is_finite() && self.b0.iter().all(|b| b.is_finite())
    }
}

/// Last `K` values of a scalar with their running sum.
#[derive(Debug, Clone)]
pub struct CorrelationBuffer {
    values: Vec<f64>,
    head: usize,
    len: usize,
    sum: f64,
    since_resum: usize,
}

impl CorrelationBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "correlation window must hold at least one value");
        CorrelationBuffer { values: vec![0.0; capacity], head: 0, len: 0, sum: 0.0, since_resum: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.values.len()
    }

    pub fn is_full(&self) -> bool {
        self.len == self.values.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, value: f64) {
        let old = self.values[self.head];
        self.values[self.head] = value;
        self.head = (self.head + 1) % self.values.len();
        if self.len < self.values.len() {
            self.len += 1;
            self.sum += value;
        } else {
            self.sum += value - old;
        }
        // exact re-summation once per window bounds the drift
        self.since_resum += 1;
        if self.since_resum >= self.values.len() {
            self.sum = self.values.iter().sum();
            self.since_resum = 0;
        }
    }

    /// Sum of the stored values.
    pub fn sum(&self) -> f64 {
        self.sum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityBreakdown {
    pub stable: f64,
    pub neutral: f64,
    pub unstable: f64,
    pub total: f64,
    pub samples: usize,
    pub les: Option<LyapunovEstimate>,
    pub diverged: bool,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S3Settings {
    /// Total steps `N`.
    pub steps: usize,
    /// Discarded steps `T`.
    pub spinup: usize,
    /// Correlation window `K` in steps (full method only).
    pub corr: usize,
    pub seed: u64,
}

impl S3Settings {
    fn validate(&self, full: bool) -> Result<()> {
        if self.spinup < 1 {
            return Err(Error::Config("spinup must be at least one step".into()));
        }
        if full && self.corr < 1 {
            return Err(Error::Config("correlation window must be at least one step".into()));
        }
        let needed = if full { self.spinup + self.corr } else { self.spinup };
        if self.steps <= needed {
            return Err(Error::Config(format!("steps ({}) must exceed spinup + window ({needed})", self.steps)));
        }
        Ok(())
    }
}

/// Numerical breakdowns that mark a run as diverged instead of failing it.
fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite { .. } | Error::RankDeficient { .. } | Error::FixedPoint | Error::Tangency(_))
}

/// Algorithm state of the full pipeline, advanced one step at a time.
#[derive(Debug, Clone)]
pub struct FullS3 {
    map: StepMap,
    objective: Objective,
    settings: S3Settings,
    x: Vec<f64>,
    x_next: Vec<f64>,
    f: Vec<f64>,
    f_next: Vec<f64>,
    grad: Vec<f64>,
    stages: Stages,
    ws: Workspace,
    frame: TangentFrame,
    srb: SecondOrderFrame,
    unstable: UnstableFrame,
    schur: SchurFactor,
    u_buf: CorrelationBuffer,
    c0_buf: CorrelationBuffer,
    g_norms: GNorms,
    step: usize,
    stable_sum: f64,
    neutral_sum: f64,
    unstable_sum: f64,
    samples: usize,
}

impl FullS3 {
    /// Seeded random `x₀` and `Q₀`; `v₀`, `w₀`, `a₀` are zero.
    pub fn new(map: &StepMap, objective: &Objective, m: usize, settings: S3Settings) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let x0 = map.model().initial_state(&mut rng);
        let frame = TangentFrame::new(map, m, &mut rng)?;
        Self::from_parts(map, objective, settings, x0, frame)
    }

    pub fn from_parts(
        map: &StepMap,
        objective: &Objective,
        settings: S3Settings,
        x0: Vec<f64>,
        frame: TangentFrame,
    ) -> Result<Self> {
        if !map.is_flow() {
            return Err(Error::Config("the full method needs a flow; use the SRB recursion for maps".into()));
        }
        settings.validate(true)?;
        let n = map.dim();
        objective.check_dim(n)?;
        if x0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
        }
        let m = frame.cols();
        if m + 1 > n {
            return Err(Error::Config(format!("unstable dimension {m} leaves no room for the flow direction")));
        }
        let mut f = vec![0.0; n];
        map.model().rhs(&x0, &mut f);
        Ok(FullS3 {
            map: map.clone(),
            objective: objective.clone(),
            settings,
            x_next: vec![0.0; n],
            f_next: vec![0.0; n],
            grad: vec![0.0; n],
            stages: map.stages(),
            ws: map.workspace(),
            srb: SecondOrderFrame::new(map, m),
            unstable: UnstableFrame::new(map, m),
            schur: SchurFactor::identity(m),
            u_buf: CorrelationBuffer::new(settings.corr),
            c0_buf: CorrelationBuffer::new(settings.corr),
            g_norms: GNorms::new(m),
            step: 0,
            stable_sum: 0.0,
            neutral_sum: 0.0,
            unstable_sum: 0.0,
            samples: 0,
            x: x0,
            f,
            frame,
        })
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn flow(&self) -> &[f64] {
        &self.f
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }

    pub fn frame_mut(&mut self) -> &mut TangentFrame {
        &mut self.frame
    }

    pub fn srb(&self) -> &SecondOrderFrame {
        &self.srb
    }

    pub fn srb_mut(&mut self) -> &mut SecondOrderFrame {
        &mut self.srb
    }

    pub fn unstable(&self) -> &UnstableFrame {
        &self.unstable
    }

    pub fn unstable_mut(&mut self) -> &mut UnstableFrame {
        &mut self.unstable
    }

    pub fn schur(&self) -> &SchurFactor {
        &self.schur
    }

    pub fn g_norms(&self) -> &GNorms {
        &self.g_norms
    }

    /// One pass of the main loop: accumulate at `x_k`, then advance every
    /// recursion to `k+1`.
    pub fn advance(&mut self) -> Result<()> {
        let k = self.step;
        let map = &self.map;
        if k >= self.settings.spinup && self.u_buf.is_full() {
            let j = self.objective.eval(&self.x);
            self.objective.grad_into(&self.x, &mut self.grad);
            self.stable_sum += dot(&self.grad, self.frame.v());
            self.unstable_sum -= j * self.u_buf.sum();
            self.neutral_sum += dot(&self.grad, &self.f) * self.c0_buf.sum();
            self.samples += 1;
        }
        map.eval_stages(&self.x, &mut self.stages);
        self.frame.push_basis(map, &self.stages, &mut self.ws, k + 1)?;
        if k >= self.settings.spinup {
            self.frame.accumulate_les();
        }
        self.srb.advance(map, &self.stages, self.frame.q_stages(), self.frame.r_inv(), self.frame.q(), &mut self.ws);
        self.frame.push_tangent(map, &self.stages, &mut self.ws);
        self.unstable.push_residual_derivative(map, &self.stages, &self.frame, &mut self.ws);

        map.advance(&self.stages, &mut self.x_next);
        check_state(&self.x_next, k + 1)?;
        map.model().rhs(&self.x_next, &mut self.f_next);
        self.schur.update(self.frame.q(), &self.f_next)?;
        self.frame.project_full(&self.f_next, &self.schur);
        self.unstable.solve(map, &self.x_next, &self.f_next, &self.frame, &self.srb, &self.schur);

        let g_ok = self.srb.g().iter().all(|g| g.is_finite());
        if !(g_ok && self.unstable.is_finite() && self.frame.c0().is_finite() && norm(self.frame.v()).is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        self.u_buf.push(self.unstable.u());
        self.c0_buf.push(self.frame.c0());
        if k >= self.settings.spinup {
            self.g_norms.push(self.srb.g());
        }
        std::mem::swap(&mut self.x, &mut self.x_next);
        std::mem::swap(&mut self.f, &mut self.f_next);
        self.step += 1;
        Ok(())
    }

    /// Current averages; `diverged` and `failure` are left unset.
    pub fn breakdown(&self) -> SensitivityBreakdown {
        let count = self.samples.max(1) as f64;
        let stable = self.stable_sum / count;
        let neutral = self.neutral_sum / count;
        let unstable = self.unstable_sum / count;
        SensitivityBreakdown {
            stable,
            neutral,
            unstable,
            total: stable + neutral + unstable,
            samples: self.samples,
            les: self.frame.lyapunov(self.map.dt(), self.settings.spinup).ok(),
            diverged: false,
            failure: None,
        }
    }

    /// Run to `N` steps. Numerical breakdowns end the run early with the
    /// divergence flag set.
    pub fn run(mut self) -> SensitivityBreakdown {
        while self.step < self.settings.steps {
            if let Err(e) = self.advance() {
                let mut out = self.breakdown();
                out.diverged = true;
                out.failure = Some(e.to_string());
                return out;
            }
        }
        let mut out = self.breakdown();
        out.diverged = self.samples == 0 || ![out.stable, out.neutral, out.unstable].iter().all(|v| v.is_finite());
        out
    }
}

/// Full S3 with `m` unstable directions.
pub fn run_full_s3(map: &StepMap, objective: &Objective, m: usize, settings: S3Settings) -> Result<SensitivityBreakdown> {
    match FullS3::new(map, objective, m, settings) {
        Ok(solver) => Ok(solver.run()),
        Err(e) if is_divergence(&e) => Ok(SensitivityBreakdown {
            stable: f64::NAN,
            neutral: f64::NAN,
            unstable: f64::NAN,
            total: f64::NAN,
            samples: 0,
            les: None,
            diverged: true,
            failure: Some(e.to_string()),
        }),
        Err(e) => Err(e),
    }
}

/// Algorithm state of the reduced (stable-only) pipeline.
#[derive(Debug, Clone)]
pub struct ReducedS3 {
    map: StepMap,
    objective: Objective,
    settings: S3Settings,
    x: Vec<f64>,
    x_next: Vec<f64>,
    stages: Stages,
    ws: Workspace,
    frame: TangentFrame,
    step: usize,
    stable_sum: f64,
    samples: usize,
    c_sq: Vec<f64>,
    track_alignment: bool,
    f: Vec<f64>,
    aligned: usize,
    alignment_checks: usize,
    worst_alignment: f64,
}

impl ReducedS3 {
    pub fn new(map: &StepMap, objective: &Objective, m_ext: usize, settings: S3Settings) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let x0 = map.model().initial_state(&mut rng);
        let frame = TangentFrame::new(map, m_ext, &mut rng)?;
        Self::from_parts(map, objective, settings, x0, frame)
    }

    pub fn from_parts(
        map: &StepMap,
        objective: &Objective,
        settings: S3Settings,
        x0: Vec<f64>,
        frame: TangentFrame,
    ) -> Result<Self> {
        settings.validate(false)?;
        let n = map.dim();
        objective.check_dim(n)?;
        if x0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
        }
        let m = frame.cols();
        Ok(ReducedS3 {
            map: map.clone(),
            objective: objective.clone(),
            settings,
            x_next: vec![0.0; n],
            stages: map.stages(),
            ws: map.workspace(),
            step: 0,
            stable_sum: 0.0,
            samples: 0,
            c_sq: vec![0.0; m],
            track_alignment: false,
            f: vec![0.0; n],
            aligned: 0,
            alignment_checks: 0,
            worst_alignment: 0.0,
            x: x0,
            frame,
        })
    }

    /// Also record `‖(I − QQᵀ)f‖/‖f‖` after spinup (one extra `f` evaluation per step).
    pub fn track_flow_alignment(mut self, on: bool) -> Self {
        self.track_alignment = on;
        self
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }

    pub fn frame_mut(&mut self) -> &mut TangentFrame {
        &mut self.frame
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn advance(&mut self) -> Result<()> {
        let k = self.step;
        let map = &self.map;
        let past_spinup = k >= self.settings.spinup;
        if past_spinup {
            self.stable_sum += self.objective.directional(&self.x, self.frame.v());
            self.samples += 1;
        }
        map.eval_stages(&self.x, &mut self.stages);
        self.frame.push_basis(map, &self.stages, &mut self.ws, k + 1)?;
        if past_spinup {
            self.frame.accumulate_les();
        }
        self.frame.push_tangent(map, &self.stages, &mut self.ws);
        self.frame.project_reduced();
        map.advance(&self.stages, &mut self.x_next);
        check_state(&self.x_next, k + 1)?;
        if !norm(self.frame.v()).is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
        if past_spinup {
            for (s, c) in self.c_sq.iter_mut().zip(self.frame.c()) {
                *s += c * c;
            }
            if self.track_alignment && map.is_flow() {
                map.model().rhs(&self.x_next, &mut self.f);
                let ratio = flow_misalignment(self.frame.q(), &self.f);
                self.worst_alignment = self.worst_alignment.max(ratio);
                self.alignment_checks += 1;
                if ratio < 1e-3 {
                    self.aligned += 1;
                }
            }
        }
        std::mem::swap(&mut self.x, &mut self.x_next);
        self.step += 1;
        Ok(())
    }

    /// Fraction of checked steps with `‖(I − QQᵀ)f‖/‖f‖ < 1e−3`, and the worst ratio.
    pub fn flow_alignment(&self) -> Option<(f64, f64)> {
        (self.alignment_checks > 0)
            .then(|| (self.aligned as f64 / self.alignment_checks as f64, self.worst_alignment))
    }

    /// `(⟨(cⁱ)²⟩)^{1/2}` per basis column.
    pub fn c_norms(&self) -> Vec<f64> {
        let count = self.samples.max(1) as f64;
        self.c_sq.iter().map(|s| (s / count).sqrt()).collect()
    }

    pub fn breakdown(&self) -> SensitivityBreakdown {
        let stable = self.stable_sum / self.samples.max(1) as f64;
        SensitivityBreakdown {
            stable,
            neutral: 0.0,
            unstable: 0.0,
            total: stable,
            samples: self.samples,
            les: self.frame.lyapunov(self.map.dt(), self.settings.spinup).ok(),
            diverged: false,
            failure: None,
        }
    }

    pub fn run_to_end(&mut self) -> SensitivityBreakdown {
        while self.step < self.settings.steps {
            if let Err(e) = self.advance() {
                let mut out = self.breakdown();
                out.diverged = true;
                out.failure = Some(e.to_string());
                return out;
            }
        }
        let mut out = self.breakdown();
        out.diverged = self.samples == 0 || !out.total.is_finite();
        out
    }
}

/// `‖(I − QQᵀ) f‖ / ‖f‖`.
pub fn flow_misalignment(q: &[Vec<f64>], f: &[f64]) -> f64 {
    let mut rest = f.to_vec();
    for _ in 0..2 {
        for qi in q {
            let h = dot(qi, &rest);
            axpy(-h, qi, &mut rest);
        }
    }
    norm(&rest) / norm(f)
}

/// Reduced S3 with an `m_ext`-column basis.
pub fn run_reduced_s3(
    map: &StepMap,
    objective: &Objective,
    m_ext: usize,
    settings: S3Settings,
) -> Result<SensitivityBreakdown> {
    Ok(ReducedS3::new(map, objective, m_ext, settings)?.run_to_end())
}

#[cfg(test)]
mod tests;
