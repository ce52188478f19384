use super::*;
use crate::models::{Kind, Lorenz63, Lorenz96, Model};
use crate::stepping::Scheme;
use nalgebra::{DMatrix, DVector};
use rand::RngCore;

fn lorenz63(scheme: Scheme) -> StepMap {
    StepMap::from_model(Box::new(Lorenz63::default()), scheme, 0.005, "rho").unwrap()
}

fn settings(steps: usize, spinup: usize, corr: usize, seed: u64) -> S3Settings {
    S3Settings { steps, spinup, corr, seed }
}

/// Lorenz 63 with the parameter removed from the dynamics.
#[derive(Debug, Clone)]
struct Unforced(Lorenz63);

impl Model for Unforced {
    fn id(&self) -> &'static str {
        "unforced"
    }
    fn dim(&self) -> usize {
        3
    }
    fn kind(&self) -> Kind {
        Kind::Flow
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["dummy"]
    }
    fn param(&self, _index: usize) -> f64 {
        0.0
    }
    fn set_param(&mut self, _index: usize, _value: f64) {}
    fn default_m(&self) -> usize {
        1
    }
    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        self.0.rhs(x, out)
    }
    fn jvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        self.0.jvp(x, v, out)
    }
    fn hvp(&self, x: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        self.0.hvp(x, a, b, out)
    }
    fn param_derivative(&self, _x: &[f64], _index: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn mixed(&self, _x: &[f64], _index: usize, _v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.0.initial_state(rng)
    }
    fn clone_model(&self) -> Box<dyn Model> {
        Box::new(self.clone())
    }
}

#[test]
fn schur_factor_examples() {
    let q = vec![vec![1.0, 0.0, 0.0]];
    let s = SchurFactor::new(&q, &[0.0, 0.0, 2.0]).unwrap();
    assert_eq!(s.s(), &[1.0]);
    assert_eq!(s.s_inv(), &[1.0]);

    let s = SchurFactor::new(&q, &[1.0, 1.0, 0.0]).unwrap();
    assert!((s.s()[0] - 0.5).abs() < 1e-15);
    assert!((s.s_inv()[0] - 2.0).abs() < 1e-14);

    assert!(matches!(SchurFactor::new(&q, &[3.0, 0.0, 0.0]), Err(Error::Tangency(_))));
    assert!(matches!(SchurFactor::new(&q, &[0.0, 0.0, 0.0]), Err(Error::FixedPoint)));
}

#[test]
fn schur_inverse_matches_sherman_morrison() {
    let s2 = 0.5_f64.sqrt();
    let q = vec![vec![s2, s2, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]];
    let f = [0.3, -1.1, 0.7, 2.0];
    let s = SchurFactor::new(&q, &f).unwrap();
    let ff = dot(&f, &f);
    let qf = s.qf().to_vec();
    let denom = ff - dot(&qf, &qf);
    for i in 0..2 {
        for j in 0..2 {
            let delta = if i == j { 1.0 } else { 0.0 };
            let expected = delta + qf[i] * qf[j] / denom;
            assert!((s.s_inv()[i * 2 + j] - expected).abs() < 1e-13);
        }
    }
    let mut out = [0.0; 2];
    s.solve(&[1.0, 2.0], &mut out);
    for i in 0..2 {
        let back: f64 = (0..2).map(|j| s.s()[i * 2 + j] * out[j]).sum();
        assert!((back - [1.0, 2.0][i]).abs() < 1e-13);
    }
}

#[test]
fn correlation_buffer_keeps_the_last_window() {
    let mut buf = CorrelationBuffer::new(3);
    assert!(buf.is_empty());
    for v in [1.0, 2.0, 3.0] {
        buf.push(v);
    }
    assert!(buf.is_full());
    assert_eq!(buf.sum(), 6.0);
    buf.push(10.0);
    assert_eq!(buf.len(), 3);
    assert_eq!(buf.sum(), 15.0);
    for i in 0..1000 {
        buf.push(0.1 * i as f64);
    }
    let expected = 0.1 * (997.0 + 998.0 + 999.0);
    assert!((buf.sum() - expected).abs() < 1e-12);
}

/// Assemble the `(m+1)` square system of every column `j` with the
/// right-hand sides rebuilt from the frame, solve it densely and compare.
fn check_b_system(solver: &FullS3, tol: f64) {
    let frame = solver.frame();
    let srb = solver.srb();
    let un = solver.unstable();
    let (q, f, v) = (frame.q(), solver.flow(), frame.v());
    let (c, c0, r) = (frame.c(), frame.c0(), frame.residual());
    let m = q.len();
    let n = f.len();
    let model = solver.map.model();
    let dfq: Vec<Vec<f64>> = q
        .iter()
        .map(|qj| {
            let mut out = vec![0.0; n];
            model.jvp(solver.state(), qj, &mut out);
            out
        })
        .collect();
    let ff = dot(f, f);
    for j in 0..m {
        let dr = un.dr(j);
        let mut d0 = dot(v, &dfq[j]) + dot(dr, f) - c0 * dot(&dfq[j], f);
        for l in 0..m {
            d0 -= c[l] * dot(srb.p(l, j), f);
        }
        let mut mat = DMatrix::<f64>::zeros(m + 1, m + 1);
        let mut rhs = DVector::<f64>::zeros(m + 1);
        mat[(0, 0)] = ff;
        rhs[0] = d0;
        for i in 0..m {
            let qf = dot(&q[i], f);
            mat[(0, i + 1)] = qf;
            mat[(i + 1, 0)] = qf;
            mat[(i + 1, i + 1)] = 1.0;
            let shifted: Vec<f64> = r.iter().zip(f).map(|(ri, fi)| ri - c0 * fi).collect();
            rhs[i + 1] = dot(srb.p(i, j), &shifted) + dot(&q[i], dr) - c0 * dot(&q[i], &dfq[j]);
        }
        let sol = mat.lu().solve(&rhs).unwrap();
        let scale = sol.amax().max(1.0);
        assert!((sol[0] - un.b0()[j]).abs() < tol * scale, "b0 {} vs {}", sol[0], un.b0()[j]);
        for i in 0..m {
            assert!((sol[i + 1] - un.b()[i * m + j]).abs() < tol * scale);
        }
    }
}

#[test]
fn b_coefficients_match_a_dense_solve() {
    let map = lorenz63(Scheme::Rk2);
    let obj = Objective::parse("z").unwrap();
    let mut solver = FullS3::new(&map, &obj, 1, settings(3000, 200, 100, 2)).unwrap();
    for k in 0..2000 {
        solver.advance().unwrap();
        if k >= 1000 && k % 10 == 0 {
            check_b_system(&solver, 1e-10);
        }
    }

    let map = StepMap::from_model(Box::new(Lorenz96::new(8, 8.0).unwrap()), Scheme::Rk4, 0.01, "F").unwrap();
    let obj = Objective::parse("energy").unwrap();
    let mut solver = FullS3::new(&map, &obj, 3, settings(3000, 200, 100, 5)).unwrap();
    for k in 0..1000 {
        solver.advance().unwrap();
        if k >= 500 && k % 10 == 0 {
            check_b_system(&solver, 1e-10);
        }
    }
}

#[test]
fn derivative_tangents_respect_the_differentiated_constraints() {
    let map = StepMap::from_model(Box::new(Lorenz96::new(8, 8.0).unwrap()), Scheme::Rk4, 0.01, "F").unwrap();
    let obj = Objective::parse("mean").unwrap();
    let mut solver = FullS3::new(&map, &obj, 2, settings(3000, 200, 100, 9)).unwrap();
    let n = 8;
    for k in 0..800 {
        solver.advance().unwrap();
        if k < 400 {
            continue;
        }
        let (frame, srb, un) = (solver.frame(), solver.srb(), solver.unstable());
        let (q, f, v) = (frame.q(), solver.flow(), frame.v());
        let scale = 1.0 + norm(v) + (0..2).map(|j| norm(un.w(j))).sum::<f64>();
        for j in 0..2 {
            let mut dfq = vec![0.0; n];
            map.model().jvp(solver.state(), &q[j], &mut dfq);
            // ∂(v·f) = 0
            assert!((dot(un.w(j), f) + dot(v, &dfq)).abs() < 1e-9 * scale * norm(f));
            // ∂(v·qⁱ) = 0
            for i in 0..2 {
                assert!((dot(&q[i], un.w(j)) + dot(srb.p(i, j), v)).abs() < 1e-9 * scale);
            }
        }
    }
}

#[test]
fn projected_tangent_is_orthogonal_to_basis_and_flow() {
    let map = lorenz63(Scheme::Rk4);
    let obj = Objective::parse("z").unwrap();
    let mut solver = FullS3::new(&map, &obj, 1, settings(2000, 100, 50, 3)).unwrap();
    for _ in 0..1000 {
        solver.advance().unwrap();
        let (v, f) = (solver.frame().v(), solver.flow());
        assert!(dot(v, f).abs() < 1e-10 * norm(v).max(1.0) * norm(f));
        assert!(dot(v, &solver.frame().q()[0]).abs() < 1e-10 * norm(v).max(1.0));
    }
}

#[test]
fn parameter_free_dynamics_give_zero_response() {
    let map = StepMap::from_model(Box::new(Unforced(Lorenz63::default())), Scheme::Rk2, 0.005, "dummy").unwrap();
    let obj = Objective::parse("z").unwrap();
    let out = run_full_s3(&map, &obj, 1, settings(6000, 1000, 500, 1)).unwrap();
    assert!(!out.diverged);
    assert_eq!((out.stable, out.neutral, out.unstable), (0.0, 0.0, 0.0));
    let out = run_reduced_s3(&map, &obj, 2, settings(3000, 1000, 0, 1)).unwrap();
    assert_eq!(out.total, 0.0);
}

#[test]
fn total_is_the_sum_of_parts_and_runs_are_deterministic() {
    let map = lorenz63(Scheme::Rk2);
    let obj = Objective::parse("z").unwrap();
    let s = settings(20_000, 2000, 2000, 4);
    let a = run_full_s3(&map, &obj, 1, s).unwrap();
    let b = run_full_s3(&map, &obj, 1, s).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.total, a.stable + a.neutral + a.unstable);
    // the correlation buffers fill during spinup
    assert_eq!(a.samples, 20_000 - 2000);
    assert!(!a.diverged);
    let lambda = a.les.as_ref().unwrap().lambdas[0];
    assert!((0.6..1.2).contains(&lambda), "{lambda}");
}

#[test]
fn full_rank_extended_basis_leaves_no_stable_part() {
    let map = lorenz63(Scheme::Rk2);
    let obj = Objective::parse("z").unwrap();
    let out = run_reduced_s3(&map, &obj, 3, settings(3000, 100, 0, 7)).unwrap();
    assert!(out.total.abs() < 1e-12);
}

#[test]
fn settings_are_validated() {
    let map = lorenz63(Scheme::Rk2);
    let obj = Objective::parse("z").unwrap();
    assert!(matches!(run_full_s3(&map, &obj, 1, settings(100, 0, 10, 0)), Err(Error::Config(_))));
    assert!(matches!(run_full_s3(&map, &obj, 1, settings(100, 50, 50, 0)), Err(Error::Config(_))));
    assert!(matches!(run_full_s3(&map, &obj, 3, settings(1000, 50, 50, 0)), Err(Error::Config(_))));
    assert!(run_reduced_s3(&map, &obj, 1, settings(100, 100, 0, 0)).is_err());
    let wrong = Objective::parse("exp-x4").unwrap();
    assert!(run_full_s3(&map, &wrong, 1, settings(1000, 50, 50, 0)).is_ok());
}

#[test]
fn fixed_point_start_is_reported_as_divergence() {
    let map = lorenz63(Scheme::Rk2);
    let obj = Objective::parse("z").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let frame = TangentFrame::new(&map, 1, &mut rng).unwrap();
    let solver = FullS3::from_parts(&map, &obj, settings(1000, 10, 10, 0), vec![0.0; 3], frame).unwrap();
    let out = solver.run();
    assert!(out.diverged);
    assert!(out.failure.unwrap().contains("fixed point"));
}

#[test]
fn reduced_tracking_reports_alignment() {
    let map = lorenz63(Scheme::Rk4);
    let obj = Objective::parse("z").unwrap();
    let mut solver = ReducedS3::new(&map, &obj, 2, settings(20_000, 2000, 0, 3)).unwrap().track_flow_alignment(true);
    let out = solver.run_to_end();
    assert!(!out.diverged);
    let (fraction, _) = solver.flow_alignment().unwrap();
    assert!(fraction > 0.99, "{fraction}");
    assert_eq!(solver.c_norms().len(), 2);
}
