mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use thrustlayout::dynamics::{
    feedforward_hover, linearize_at_hover, nonlinear_derivative, wrench_map, DisturbanceWrench, State,
};
use thrustlayout::model::compose_mass_properties;
use thrustlayout::*;

const H: f64 = 1e-6;

/// Central differences of the nonlinear model at hover: (A, B, Bd).
fn fd_jacobians(mp: &MassProperties64, u_bar: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let x0 = State::zeros();
    let u0: Vec<f64> = u_bar.iter().copied().collect();
    let d0 = [0.0; 6];
    let f = |x: &State<f64>, u: &[f64], d: &[f64]| {
        nonlinear_derivative(x, u, &DisturbanceWrench::from_slice(d), mp).unwrap()
    };
    let mut a = DMatrix::zeros(12, 12);
    for j in 0..12 {
        let (mut xp, mut xm) = (x0, x0);
        xp[j] += H;
        xm[j] -= H;
        a.set_column(j, &((f(&xp, &u0, &d0) - f(&xm, &u0, &d0)) / (2.0 * H)));
    }
    let mut b = DMatrix::zeros(12, u0.len());
    for j in 0..u0.len() {
        let (mut up, mut um) = (u0.clone(), u0.clone());
        up[j] += H;
        um[j] -= H;
        b.set_column(j, &((f(&x0, &up, &d0) - f(&x0, &um, &d0)) / (2.0 * H)));
    }
    let mut bd = DMatrix::zeros(12, 6);
    for j in 0..6 {
        let (mut dp, mut dm) = (d0, d0);
        dp[j] += H;
        dm[j] -= H;
        bd.set_column(j, &((f(&x0, &u0, &dp) - f(&x0, &u0, &dm)) / (2.0 * H)));
    }
    (a, b, bd)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn analytic_jacobians_match_finite_differences(which in 0usize..6, seed in 0u64..1_000_000) {
        let problem = &problem_zoo()[which];
        let theta = random_feasible(problem, &mut rng(seed));
        let mp = compose_mass_properties(&problem.payload, &problem.quad, &problem.layout(&theta), problem.d_min).unwrap();
        let model = linearize_at_hover(&mp, &problem.quad).unwrap();
        let (a, b, bd) = fd_jacobians(&mp, &model.u_bar);
        prop_assert!(max_abs(&(&a - &model.a)) <= 1e-6);
        prop_assert!(max_abs(&(&b - &model.b)) <= 1e-6);
        prop_assert!(max_abs(&(&bd - &model.bd)) <= 1e-6);
    }

    #[test]
    fn hover_is_equilibrium_for_every_feasible_layout(which in 0usize..6, seed in 0u64..1_000_000) {
        let problem = &problem_zoo()[which];
        let theta = random_feasible(problem, &mut rng(seed));
        let mp = compose_mass_properties(&problem.payload, &problem.quad, &problem.layout(&theta), problem.d_min).unwrap();
        let u = feedforward_hover(&mp, &problem.quad).unwrap();
        let dx = nonlinear_derivative(&State::zeros(), u.as_slice(), &DisturbanceWrench::zero(), &mp).unwrap();
        prop_assert!(dx.amax() <= 1e-9);
        prop_assert!((u.sum() - mp.total_mass * 9.81).abs() <= 1e-9);
    }
}

#[test]
fn state_matrix_identical_across_layouts() {
    let problem = Problem::new(panel_a(), QuadSpec::reference(), 4).unwrap();
    let mut r = rng(11);
    let first = problem.evaluate(&random_feasible(&problem, &mut r)).unwrap().model.a;
    for _ in 0..10 {
        let a = problem.evaluate(&random_feasible(&problem, &mut r)).unwrap().model.a;
        assert_eq!(a, first);
    }
}

#[test]
fn asymmetric_feedforward_is_minimum_norm() {
    let problem = Problem::new(panel_b(), QuadSpec::reference(), 3).unwrap();
    let layout = problem.layout(&deg(&[20.0, 150.0, 250.0]));
    let mp = compose_mass_properties(&problem.payload, &problem.quad, &layout, problem.d_min).unwrap();
    let u = feedforward_hover(&mp, &problem.quad).unwrap();
    let w = wrench_map(&mp);
    let target = DVector::from_vec(vec![mp.total_mass * 9.81, 0.0, 0.0, 0.0]);
    assert!((&w * &u - &target).amax() <= 1e-10);

    // other exact solutions: u + (I − W⁺W) z for random z, kept within the box
    let svd = w.clone().svd(true, true);
    let pinv = svd.pseudo_inverse(1e-12).unwrap();
    let proj = DMatrix::identity(12, 12) - &pinv * &w;
    let mut r = rng(5);
    let mut tried = 0;
    while tried < 2000 {
        let z = DVector::from_fn(12, |_, _| r.random_range(-1.0..1.0));
        let alt = &u + &proj * z;
        if alt.iter().any(|&v| !(0.0..=6.0).contains(&v)) {
            continue;
        }
        tried += 1;
        assert!((&w * &alt - &target).amax() <= 1e-9);
        assert!(alt.norm() >= u.norm() - 1e-12);
    }
}

#[test]
fn input_matrix_varies_smoothly_away_from_vertices() {
    // square corners are at 45° + k·90°; stay on one edge
    let problem = Problem::new(panel_a(), QuadSpec::reference(), 3).unwrap();
    let base = deg(&[-10.0, 120.0, 240.0]);
    let b_at = |dth: f64| {
        let mut t = base.clone();
        t[0] += dth;
        let layout = problem.layout(&t);
        let mp = compose_mass_properties(&problem.payload, &problem.quad, &layout, problem.d_min).unwrap();
        linearize_at_hover(&mp, &problem.quad).unwrap()
    };
    let h = 1e-5;
    let mut prev: Option<DMatrix<f64>> = None;
    for k in 0..20 {
        let th = (k as f64) * 1.0f64.to_radians();
        let (p, m) = (b_at(th + h), b_at(th - h));
        let db = (&p.b - &m.b) / (2.0 * h);
        let dbd = (&p.bd - &m.bd) / (2.0 * h);
        assert!(db.amax() < 50.0 && dbd.amax() < 50.0);
        if let Some(q) = &prev {
            // derivative changes gradually over one degree
            assert!((&db - q).amax() < 0.5, "jump at {k}°");
        }
        prev = Some(db);
    }
}
