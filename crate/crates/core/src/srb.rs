//! SRB density gradient along the unstable basis.
//!
//! Second-order tangents `a^{i,j}` track the curvature of the unstable
//! manifold in orthonormal chart coordinates. From them follow the
//! derivatives of `R` along each chart direction, the density gradient
//! `gⁱ = −tr ∂_{ξⁱ}R` and the derivatives `p^{i,j} = ∂_{ξʲ} qⁱ` of the basis.
//!
//! Work per step is `m(m+1)/2` second-order contractions of `φ` plus
//! `O(n m³)` for the rescaling and the `∂R` tensors.

use crate::linalg::{axpy, dot};
use crate::stepping::{StageTangent, Stages, StepMap, Workspace};

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

#[derive(Debug, Clone)]
pub struct SecondOrderFrame {
    m: usize,
    /// `a^{i,j}` for `j ≤ i`, packed row by row.
    a: Vec<Vec<f64>>,
    a_tilde: Vec<Vec<f64>>,
    /// Half-contracted `Σ_q ã^{pq} R⁻¹^{qj}`, indexed `p·m + j`.
    half: Vec<Vec<f64>>,
    /// `(∂_{ξⁱ}R)^{pq}` at `(i·m + p)·m + q`.
    dr: Vec<f64>,
    g: Vec<f64>,
    /// `p^{i,j}` at `i·m + j`.
    p: Vec<Vec<f64>>,
    scratch: StageTangent,
    tmp: Vec<f64>,
}

impl SecondOrderFrame {
    /// `a ≡ 0`.
    pub fn new(map: &StepMap, m: usize) -> Self {
        let n = map.dim();
        let pairs = m * (m + 1) / 2;
        SecondOrderFrame {
            m,
            a: vec![vec![0.0; n]; pairs],
            a_tilde: vec![vec![0.0; n]; pairs],
            half: vec![vec![0.0; n]; m * m],
            dr: vec![0.0; m * m * m],
            g: vec![0.0; m],
            p: vec![vec![0.0; n]; m * m],
            scratch: map.stage_tangent(),
            tmp: vec![0.0; n],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self, i: usize, j: usize) -> &[f64] {
        &self.a[packed(i, j)]
    }

    pub fn set_a(&mut self, i: usize, j: usize, value: &[f64]) {
        self.a[packed(i, j)].copy_from_slice(value);
    }

    /// `(∂_{ξⁱ}R)^{pq}`.
    pub fn dr(&self, i: usize, p: usize, q: usize) -> f64 {
        self.dr[(i * self.m + p) * self.m + q]
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// `p^{i,j} = ∂_{ξʲ} qⁱ`.
    pub fn p(&self, i: usize, j: usize) -> &[f64] {
        &self.p[i * self.m + j]
    }

    /// `ã^{i,j} = D²φ(qⁱ, qʲ) + Dφ a^{i,j}`, then `a^{i,j} = ã^{p,q} R⁻¹^{pi} R⁻¹^{qj}`.
    ///
    /// `q_stages` are the stage inputs of the previous basis and `r_inv` the
    /// inverse factor of the QR that produced the new one.
    pub fn push_second_order(
        &mut self,
        map: &StepMap,
        st: &Stages,
        q_stages: &[StageTangent],
        r_inv: &[f64],
        ws: &mut Workspace,
    ) {
        let m = self.m;
        for i in 0..m {
            for j in 0..=i {
                let k = packed(i, j);
                map.second(st, &q_stages[i], &q_stages[j], &mut self.a_tilde[k], ws);
                map.tangent(st, &self.a[k], &mut self.scratch, &mut self.tmp, ws);
                axpy(1.0, &self.tmp, &mut self.a_tilde[k]);
            }
        }
        // R⁻¹ is upper triangular: only p ≤ i and q ≤ j contribute
        for p in 0..m {
            for j in 0..m {
                let h = &mut self.half[p * m + j];
                h.iter_mut().for_each(|e| *e = 0.0);
                for q in 0..=j {
                    axpy(r_inv[q * m + j], &self.a_tilde[packed(p, q)], h);
                }
            }
        }
        for i in 0..m {
            for j in 0..=i {
                let a = &mut self.a[packed(i, j)];
                a.iter_mut().for_each(|e| *e = 0.0);
                for p in 0..=i {
                    axpy(r_inv[p * m + i], &self.half[p * m + j], a);
                }
            }
        }
    }

    /// Three-case `∂_{ξⁱ}R` from the new basis, then `gⁱ = −tr ∂_{ξⁱ}R`.
    pub fn compute_dr_and_g(&mut self, q: &[Vec<f64>]) {
        let m = self.m;
        for i in 0..m {
            let mut trace = 0.0;
            for p in 0..m {
                for qq in 0..m {
                    let value = if p == qq {
                        dot(&q[p], self.a(p, i))
                    } else if p < qq {
                        dot(&q[p], self.a(qq, i)) + dot(&q[qq], self.a(p, i))
                    } else {
                        0.0
                    };
                    self.dr[(i * m + p) * m + qq] = value;
                    if p == qq {
                        trace += value;
                    }
                }
            }
            self.g[i] = -trace;
        }
    }

    /// `p^{i,j} = a^{i,j} − q^l (∂_{ξʲ}R)^{li}`.
    pub fn basis_derivatives(&mut self, q: &[Vec<f64>]) {
        let m = self.m;
        for i in 0..m {
            for j in 0..m {
                let k = packed(i, j);
                let out = &mut self.p[i * m + j];
                out.copy_from_slice(&self.a[k]);
                for (l, ql) in q.iter().enumerate() {
                    let coef = self.dr[(j * m + l) * m + i];
                    if coef != 0.0 {
                        axpy(-coef, ql, out);
                    }
                }
            }
        }
    }

    /// All three updates of one step.
    pub fn advance(
        &mut self,
        map: &StepMap,
        st: &Stages,
        q_stages: &[StageTangent],
        r_inv: &[f64],
        q_new: &[Vec<f64>],
        ws: &mut Workspace,
    ) {
        self.push_second_order(map, st, q_stages, r_inv, ws);
        self.compute_dr_and_g(q_new);
        self.basis_derivatives(q_new);
    }
}

/// Running `(⟨(gⁱ)²⟩)^{1/2}` per component.
#[derive(Debug, Clone)]
pub struct GNorms {
    sums: Vec<f64>,
    samples: usize,
}

impl GNorms {
    pub fn new(m: usize) -> Self {
        GNorms { sums: vec![0.0; m], samples: 0 }
    }

    pub fn push(&mut self, g: &[f64]) {
        for (s, gi) in self.sums.iter_mut().zip(g) {
            *s += gi * gi;
        }
        self.samples += 1;
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn norms(&self) -> crate::Result<Vec<f64>> {
        if self.samples == 0 {
            return Err(crate::Error::NoSamples);
        }
        Ok(self.sums.iter().map(|s| (s / self.samples as f64).sqrt()).collect())
    }
}

/// Drive the SRB recursion alone along a seeded trajectory with an
/// `m`-column basis and return `‖gⁱ‖₂` over the steps after `spinup`.
/// `emit` sees `(step, x, g)` for every post-spinup step.
pub fn run_density_gradient(
    map: &StepMap,
    m: usize,
    steps: usize,
    spinup: usize,
    seed: u64,
    mut emit: impl FnMut(usize, &[f64], &[f64]),
) -> crate::Result<Vec<f64>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let x0 = map.model().initial_state(&mut rng);
    let mut frame = crate::tangent::TangentFrame::new(map, m, &mut rng)?;
    let mut srb = SecondOrderFrame::new(map, m);
    let mut traj = crate::stepping::Trajectory::new(map, x0);
    let mut ws = map.workspace();
    let mut norms = GNorms::new(m);
    for k in 0..steps {
        traj.advance(map)?;
        let st = traj.stages();
        frame.push_basis(map, st, &mut ws, k + 1)?;
        srb.advance(map, st, frame.q_stages(), frame.r_inv(), frame.q(), &mut ws);
        if !srb.g().iter().all(|g| g.is_finite()) {
            return Err(crate::Error::NonFinite { step: k + 1 });
        }
        if k >= spinup {
            norms.push(srb.g());
            emit(k + 1, traj.state(), srb.g());
        }
    }
    norms.norms()
}
