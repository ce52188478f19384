use super::*;
use crate::linalg::{norm, norm_inf, relative_error};
use crate::models::{CoupledSawtooth, KuramotoSivashinsky, LinearFlow, Lorenz63, Lorenz96};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
}

fn combo(x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + h * b).collect()
}

fn central(p: &[f64], m: &[f64], h: f64) -> Vec<f64> {
    p.iter().zip(m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

fn maps(scheme: Scheme) -> Vec<StepMap> {
    let dt = 0.005;
    let mut out = vec![
        StepMap::from_model(Box::new(Lorenz63::default()), scheme, dt, "rho").unwrap(),
        StepMap::from_model(Box::new(Lorenz96::new(12, 8.0).unwrap()), scheme, dt, "F").unwrap(),
        StepMap::from_model(Box::new(KuramotoSivashinsky::new(16.0, 0.25, 0.5).unwrap()), scheme, ks_dt(scheme), "c")
            .unwrap(),
    ];
    if scheme == Scheme::Rk2 {
        out.push(StepMap::from_model(Box::new(Lorenz63::default()), scheme, dt, "sigma").unwrap());
    }
    out
}

fn attractor_points(map: &StepMap, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
    let mut traj = Trajectory::new(map, map.model().initial_state(rng));
    let spin = if map.is_flow() { (5.0 / map.dt()) as usize } else { 100 };
    traj.run(map, spin).unwrap();
    let gap = if map.is_flow() { (0.5 / map.dt()) as usize } else { 7 };
    (0..count)
        .map(|_| {
            traj.run(map, gap).unwrap();
            traj.state().to_vec()
        })
        .collect()
}

fn check_contractions(map: &StepMap, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = map.dim();
    let name = format!("{}/{}/{}", map.model().id(), map.scheme().name(), map.active_name());
    for x in attractor_points(map, &mut rng, 20) {
        let v = random_vec(&mut rng, n);
        let a = random_vec(&mut rng, n);
        let h = 1e-5 * (1.0 + norm_inf(&x));
        let hs = 1e-5 * (1.0 + map.model().param(map.active_param()).abs());
        let s0 = map.model().param(map.active_param());
        let (up, dn) = (map.with_param(s0 + hs), map.with_param(s0 - hs));

        let jv = map.step_jvp(&x, &v).unwrap();
        let fd = central(&map.step(&combo(&x, &v, h)).unwrap(), &map.step(&combo(&x, &v, -h)).unwrap(), h);
        assert!(relative_error(&jv, &fd) < 1e-6, "{name} jvp {}", relative_error(&jv, &fd));

        let hv = map.step_hvp(&x, &v, &a).unwrap();
        let fd = central(&map.step_jvp(&combo(&x, &a, h), &v).unwrap(), &map.step_jvp(&combo(&x, &a, -h), &v).unwrap(), h);
        assert!(relative_error(&hv, &fd) < 1e-5, "{name} hvp {}", relative_error(&hv, &fd));
        let ha = map.step_hvp(&x, &a, &v).unwrap();
        assert!(hv.iter().zip(&ha).all(|(p, q)| (p - q).abs() <= 1e-12 * (1.0 + p.abs())), "{name} symmetry");

        let chi = map.step_param(&x).unwrap();
        let fd = central(&up.step(&x).unwrap(), &dn.step(&x).unwrap(), hs);
        assert!(relative_error(&chi, &fd) < 1e-6, "{name} param {}", relative_error(&chi, &fd));

        let mv = map.step_mixed(&x, &v).unwrap();
        let fd = central(&map.step_param(&combo(&x, &v, h)).unwrap(), &map.step_param(&combo(&x, &v, -h)).unwrap(), h);
        assert!(relative_error(&mv, &fd) < 1e-5, "{name} mixed {}", relative_error(&mv, &fd));
    }
}

#[test]
fn rk2_contractions_match_finite_differences() {
    for map in maps(Scheme::Rk2) {
        check_contractions(&map, 1);
    }
}

#[test]
fn rk4_contractions_match_finite_differences() {
    for map in maps(Scheme::Rk4) {
        check_contractions(&map, 2);
    }
}

#[test]
fn sawtooth_contractions_match_finite_differences() {
    for target in ["s", "t"] {
        let map =
            StepMap::from_model(Box::new(CoupledSawtooth::new(3, -0.75, 0.4).unwrap()), Scheme::Discrete, 1.0, target)
                .unwrap();
        // away from the wrap seam the map is smooth
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| 1.0 + 4.0 * rng.random::<f64>()).collect();
            let v = random_vec(&mut rng, 3);
            let a = random_vec(&mut rng, 3);
            let h = 1e-6;
            let raw = |y: &[f64]| crate::models::eval_f(map.model(), y).unwrap();
            let jv = map.step_jvp(&x, &v).unwrap();
            assert!(relative_error(&jv, &central(&raw(&combo(&x, &v, h)), &raw(&combo(&x, &v, -h)), h)) < 1e-6);
            let hv = map.step_hvp(&x, &v, &a).unwrap();
            let fd = central(&map.step_jvp(&combo(&x, &a, h), &v).unwrap(), &map.step_jvp(&combo(&x, &a, -h), &v).unwrap(), h);
            assert!(relative_error(&hv, &fd) < 1e-5);
            let mv = map.step_mixed(&x, &v).unwrap();
            let fd =
                central(&map.step_param(&combo(&x, &v, h)).unwrap(), &map.step_param(&combo(&x, &v, -h)).unwrap(), h);
            assert!(relative_error(&mv, &fd) < 1e-5);
        }
    }
}

#[test]
fn zero_field_is_identity() {
    for scheme in [Scheme::Rk2, Scheme::Rk4] {
        let map = StepMap::from_model(Box::new(LinearFlow::zero(4)), scheme, 0.1, "s").unwrap();
        let x = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(map.step(&x).unwrap(), x);
    }
}

fn matvec(a: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum()).collect()
}

#[test]
fn linear_flow_reproduces_truncated_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 4;
    let a: Vec<f64> = random_vec(&mut rng, n * n);
    let h = 0.05;
    for (scheme, order) in [(Scheme::Rk2, 2), (Scheme::Rk4, 4)] {
        let map = StepMap::from_model(Box::new(LinearFlow::new(n, a.clone(), 0.0)), scheme, h, "s").unwrap();
        let x = random_vec(&mut rng, n);
        let v = random_vec(&mut rng, n);
        // Σ_{p ≤ order} (hA)^p / p! applied to x
        let series = |y: &[f64]| {
            let mut term = y.to_vec();
            let mut acc = y.to_vec();
            for p in 1..=order {
                term = matvec(&a, &term).iter().map(|t| t * h / p as f64).collect();
                axpy(1.0, &term, &mut acc);
            }
            acc
        };
        assert!(relative_error(&map.step(&x).unwrap(), &series(&x)) < 1e-14);
        assert!(relative_error(&map.step_jvp(&x, &v).unwrap(), &series(&v)) < 1e-14);
        assert!(norm(&map.step_hvp(&x, &v, &x).unwrap()) == 0.0);
        assert!(norm(&map.step_mixed(&x, &v).unwrap()) == 0.0);
    }
}

#[test]
fn rk2_local_error_is_third_order() {
    let x0 = vec![1.0, 1.0, 1.0];
    let reference = |dt: f64| {
        let map = StepMap::from_model(Box::new(Lorenz63::default()), Scheme::Rk4, dt / 64.0, "rho").unwrap();
        let mut traj = Trajectory::new(&map, x0.clone());
        traj.run(&map, 64).unwrap();
        traj.state().to_vec()
    };
    let err = |dt: f64| {
        let map = StepMap::from_model(Box::new(Lorenz63::default()), Scheme::Rk2, dt, "rho").unwrap();
        let y = map.step(&x0).unwrap();
        let r = reference(dt);
        norm(&y.iter().zip(&r).map(|(p, q)| p - q).collect::<Vec<_>>())
    };
    let ratio = err(0.01) / err(0.005);
    assert!((6.0..10.0).contains(&ratio), "local error ratio {ratio}");
}

#[test]
fn lorenz96_parametric_step_matches_midpoint_formula() {
    let dt = 0.005;
    let model = Lorenz96::new(10, 8.0).unwrap();
    let map = StepMap::from_model(Box::new(model.clone()), Scheme::Rk2, dt, "F").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..10).map(|_| 8.0 + rng.random::<f64>()).collect();
    let mut fx = vec![0.0; 10];
    model.rhs(&x, &mut fx);
    let xp = combo(&x, &fx, dt / 2.0);
    let mut j1 = vec![0.0; 10];
    model.jvp(&xp, &vec![1.0; 10], &mut j1);
    let expected: Vec<f64> = j1.iter().map(|j| dt + dt * dt / 2.0 * j).collect();
    assert!(relative_error(&map.step_param(&x).unwrap(), &expected) < 1e-14);
}

#[test]
fn covariance_defect_is_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let base = StepMap::from_model(Box::new(Lorenz63::default()), Scheme::Rk2, 0.005, "rho").unwrap();
    for x in attractor_points(&base, &mut rng, 10) {
        let defect = |dt: f64| {
            let map = StepMap::from_model(Box::new(Lorenz63::default()), Scheme::Rk2, dt, "rho").unwrap();
            let model = map.model();
            let mut f0 = vec![0.0; 3];
            model.rhs(&x, &mut f0);
            let mut f1 = vec![0.0; 3];
            model.rhs(&map.step(&x).unwrap(), &mut f1);
            let pushed = map.step_jvp(&x, &f0).unwrap();
            norm(&f1.iter().zip(&pushed).map(|(p, q)| p - q).collect::<Vec<_>>())
        };
        assert!(defect(0.0025) / defect(0.005) <= 0.3);
    }
}

#[test]
fn constructor_validation() {
    assert!(StepMap::from_model(Box::new(Lorenz63::default()), Scheme::Discrete, 0.1, "rho").is_err());
    assert!(StepMap::from_model(Box::new(Lorenz63::default()), Scheme::Rk2, 0.0, "rho").is_err());
    assert!(StepMap::from_model(Box::new(Lorenz63::default()), Scheme::Rk2, 0.1, "F").is_err());
    assert!(
        StepMap::from_model(Box::new(CoupledSawtooth::new(2, 0.0, 0.0).unwrap()), Scheme::Rk4, 0.1, "s").is_err()
    );
    assert!(Scheme::parse("euler").is_err());
}

#[test]
fn overflow_aborts_with_step_index() {
    let map = StepMap::from_model(Box::new(LinearFlow::new(1, vec![100.0], 0.0)), Scheme::Rk4, 0.1, "s").unwrap();
    let mut traj = Trajectory::new(&map, vec![1.0]);
    match traj.run(&map, 1000) {
        Err(Error::NonFinite { step }) => assert!(step > 1 && step < 1000),
        other => panic!("expected overflow, got {other:?}"),
    }
}

proptest! {
    #[test]
    fn sawtooth_steps_stay_on_torus(x in proptest::collection::vec(-50.0f64..50.0, 4), s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let map = StepMap::from_model(Box::new(CoupledSawtooth::new(4, s, t).unwrap()), Scheme::Discrete, 1.0, "s").unwrap();
        let y = map.step(&x).unwrap();
        prop_assert!(y.iter().all(|v| (0.0..std::f64::consts::TAU).contains(v)));
    }

    #[test]
    fn rk4_second_contraction_is_symmetric_and_bilinear(
        x in proptest::collection::vec(-15.0f64..15.0, 3),
        v in proptest::collection::vec(-1.0f64..1.0, 3),
        a in proptest::collection::vec(-1.0f64..1.0, 3),
        k in -3.0f64..3.0,
    ) {
        let map = StepMap::from_model(Box::new(Lorenz63::default()), Scheme::Rk4, 0.01, "rho").unwrap();
        let hva = map.step_hvp(&x, &v, &a).unwrap();
        let hav = map.step_hvp(&x, &a, &v).unwrap();
        let kv: Vec<f64> = v.iter().map(|e| k * e).collect();
        let hkva = map.step_hvp(&x, &kv, &a).unwrap();
        for i in 0..3 {
            prop_assert!((hva[i] - hav[i]).abs() <= 1e-12 * (1.0 + hva[i].abs()));
            prop_assert!((hkva[i] - k * hva[i]).abs() <= 1e-12 * (1.0 + hkva[i].abs()));
        }
    }
}

// midpoint rule is stable only up to h·λ = 2 on the hyperdiffusive modes
fn ks_dt(scheme: Scheme) -> f64 {
    if scheme == Scheme::Rk2 {
        0.0004
    } else {
        0.0006
    }
}
