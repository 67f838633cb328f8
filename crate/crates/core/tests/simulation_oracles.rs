mod common;

use common::*;
use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rayon::prelude::*;
use thrustlayout::control::steady_state_covariance;
use thrustlayout::dynamics::State;
use thrustlayout::optimizer::Evaluation;
use thrustlayout::sim::*;
use thrustlayout::*;

fn evaluate(payload: PayloadSpec64, n: usize, degrees: &[f64]) -> Evaluation<f64> {
    Problem::new(payload, QuadSpec::reference(), n).unwrap().evaluate(&deg(degrees)).unwrap()
}

fn run(e: &Evaluation<f64>, sc: &Scenario) -> SimReport {
    simulate(&e.layout, &e.controller, &e.model, sc).unwrap()
}

#[test]
fn free_fall_matches_closed_form() {
    let e = evaluate(panel_a(), 4, &CORNERS);
    let mut x0 = State::zeros();
    x0[2] = 10.0;
    x0[6] = 0.3; // attitude does not matter without thrust
    let x = integrate_open_loop(&e.model.mass_props, &x0, &[0.0; 16], 1e-3, 1000).unwrap();
    assert!((x[2] - (10.0 - 4.905)).abs() <= 1e-6);
    assert!(x[0].abs() <= 1e-12 && x[1].abs() <= 1e-12);
}

#[test]
fn rk4_error_drops_sixteenfold_per_halving() {
    let e = evaluate(panel_b(), 3, &[40.0, 170.0, 265.0]);
    let mp = &e.model.mass_props;
    let mut x0 = State::zeros();
    x0[6] = 0.2;
    x0[7] = -0.15;
    x0[9] = 0.5;
    x0[10] = -0.4;
    x0[11] = 0.3;
    let u: Vec<f64> = e.model.u_bar.iter().map(|v| v * 1.05).collect();
    let reference = integrate_open_loop(mp, &x0, &u, 1e-5, 100_000).unwrap();
    let err = |dt: f64| {
        let x = integrate_open_loop(mp, &x0, &u, dt, (1.0 / dt).round() as usize).unwrap();
        (x - reference).norm()
    };
    let (coarse, fine) = (err(0.04), err(0.02));
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "error ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn small_noise_covariance_matches_lyapunov_prediction() {
    // low intensity keeps the nonlinear vehicle in its linear regime
    let e = evaluate(panel_b(), 3, &[40.0, 170.0, 265.0]);
    let std = DEFAULT_NOISE_STD.map(|s| s * 0.2);
    let g = DMatrix::from_diagonal(&DVector::from_row_slice(&std));
    let predicted = steady_state_covariance(&e.controller.a_f, &(&e.model.bd * g)).unwrap();

    let burn_in = 2000; // 2 s of samples
    let covs: Vec<(DMatrix<f64>, usize)> = (0..4u64)
        .into_par_iter()
        .map(|seed| {
            let sc = Scenario { noise_std: std, ..Scenario::hover_noise(150.0) }.with_seed(seed);
            let r = run(&e, &sc);
            assert!(!r.diverged);
            assert_eq!(r.saturation_events, 0);
            let mut c = DMatrix::zeros(12, 12);
            for x in &r.states[burn_in..] {
                let v = DVector::from_column_slice(x.as_slice());
                c += &v * v.transpose();
            }
            (c, r.states.len() - burn_in)
        })
        .collect();
    let n: usize = covs.iter().map(|c| c.1).sum();
    let empirical = covs.into_iter().fold(DMatrix::zeros(12, 12), |acc, c| acc + c.0) / n as f64;
    let rel = (&empirical - &predicted).norm() / predicted.norm();
    assert!(rel <= 0.15, "relative Frobenius error {rel:.3}");
}

#[test]
fn lateral_wind_saturates_symmetric_layout_first() {
    let opt = evaluate(panel_b(), 3, &[42.362, 172.357, 268.447]);
    let sub = evaluate(panel_b(), 3, &[0.0, 120.0, 240.0]);
    // sweep the crosswind until the symmetric layout clamps persistently
    for w in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        let sc = Scenario { wind_force: Vector3::new(0.0, w, 0.0), ..Scenario::wind(20.0) };
        let (a, b) = (run(&opt, &sc), run(&sub, &sc));
        let periods = (sc.duration * sc.control_rate) as usize;
        if b.saturation_events * 100 >= periods {
            assert!(!a.diverged);
            assert!(a.saturation_events * 10 <= b.saturation_events, "wind {w}: {} vs {}", a.saturation_events, b.saturation_events);
            return;
        }
    }
    panic!("symmetric layout never saturated persistently");
}

#[test]
fn added_mass_is_absorbed_in_both_modes() {
    let opt = evaluate(panel_a(), 4, &CORNERS);
    let sub = evaluate(panel_a(), 4, &[45.0, 135.0, 225.0, 300.0]);
    for mode in [MassEventMode::Wrench, MassEventMode::FullDynamics] {
        let mut sc = Scenario::added_mass(10.0, 2.0, 0.5, Vector2::new(0.225, -0.225));
        sc.mass_event.as_mut().unwrap().mode = mode;
        let (a, b) = (run(&opt, &sc), run(&sub, &sc));
        for r in [&a, &b] {
            assert!(!r.diverged, "{mode:?}");
            // back near level flight with small body rates by the end
            let last = r.states.last().unwrap();
            assert!(last[6].abs() < 0.05 && last[7].abs() < 0.05, "{mode:?} {last:?}");
            assert!(last.fixed_rows::<3>(9).norm() < 0.05);
        }
        assert!(a.peak_attitude < b.peak_attitude, "{mode:?}: {} vs {}", a.peak_attitude, b.peak_attitude);
    }
}

#[test]
fn matched_seeds_give_identical_reports() {
    let e = evaluate(panel_b(), 3, &[40.0, 170.0, 265.0]);
    let sc = Scenario::hover_noise(2.0).with_seed(12);
    assert_eq!(run(&e, &sc), run(&e, &sc));
    let other = run(&e, &sc.clone().with_seed(13));
    assert_ne!(run(&e, &sc).states, other.states);
}
