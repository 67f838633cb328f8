mod common;

use common::*;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thrustlayout::robustness::{hyperplane_distance, regularize, saturation_margin, REGULARIZATION};
use thrustlayout::*;

/// Dense grid over the free coordinate of a 2D hyperplane problem (400 points per axis, refined).
fn grid_distance(u_bar: Vector2<f64>, sigma: Matrix2<f64>, k: usize, value: f64, lo: f64, hi: f64) -> f64 {
    let inv = sigma.try_inverse().unwrap();
    let q = |u: Vector2<f64>| (u - u_bar).dot(&(inv * (u - u_bar)));
    let mut best = f64::INFINITY;
    let n = 400;
    for i in 0..n {
        for j in 0..n {
            let mut u = Vector2::new(
                lo + (hi - lo) * i as f64 / (n - 1) as f64,
                lo + (hi - lo) * j as f64 / (n - 1) as f64,
            );
            // project onto the hyperplane
            u[k] = value;
            best = best.min(q(u));
        }
    }
    best.sqrt()
}

fn spd2(r: &mut impl Rng) -> Matrix2<f64> {
    let a = Matrix2::from_fn(|_, _| r.random_range(-1.0..1.0));
    a * a.transpose() + Matrix2::identity() * 0.05
}

#[test]
fn two_dimensional_qps_match_grid_search() {
    let mut cases = vec![(Vector2::new(1.0, 1.0), Matrix2::new(1.0, 0.8, 0.8, 1.0))];
    let mut r = rng(17);
    for _ in 0..20 {
        let u = Vector2::new(r.random_range(0.2..1.8), r.random_range(0.2..1.8));
        cases.push((u, spd2(&mut r)));
    }
    for (u_bar, sigma) in cases {
        for k in 0..2 {
            for value in [0.0, 2.0] {
                let got = hyperplane_distance(
                    &DVector::from_column_slice(u_bar.as_slice()),
                    &DMatrix::from_column_slice(2, 2, sigma.as_slice()),
                    k,
                    value,
                    0.0,
                    2.0,
                )
                .unwrap();
                let oracle = grid_distance(u_bar, sigma, k, value, 0.0, 2.0);
                assert!(
                    (got.distance - oracle).abs() <= 1e-3,
                    "u={u_bar:?} k={k} value={value}: {} vs {oracle}",
                    got.distance
                );
                // the grid can only overestimate the exact minimum
                assert!(got.distance <= oracle + 1e-12);
            }
        }
    }
}

#[test]
fn three_dimensional_qps_are_not_beaten_by_sampling() {
    let mut r = rng(23);
    for _ in 0..20 {
        let a = DMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0));
        let sigma = &a * a.transpose() + DMatrix::identity(3, 3) * 0.05;
        let inv = sigma.clone().try_inverse().unwrap();
        let u_bar = DVector::from_fn(3, |_, _| r.random_range(0.3..1.7));
        let k = r.random_range(0..3);
        let got = hyperplane_distance(&u_bar, &sigma, k, 2.0, 0.0, 2.0).unwrap();
        let n = 120;
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let free: Vec<usize> = (0..3).filter(|&c| c != k).collect();
                let mut u = DVector::from_element(3, 2.0);
                u[free[0]] = 2.0 * i as f64 / (n - 1) as f64;
                u[free[1]] = 2.0 * j as f64 / (n - 1) as f64;
                let d = &u - &u_bar;
                best = best.min(d.dot(&(&inv * &d)));
            }
        }
        assert!(got.distance <= best.sqrt() + 1e-12);
        assert!(best.sqrt() - got.distance <= 1e-2);
    }
}

fn panel_a_sigma() -> (Evaluation, DMatrix<f64>) {
    let problem = Problem::new(panel_a(), QuadSpec::reference(), 4).unwrap();
    let e = problem.evaluate(&deg(&[40.0, 130.0, 230.0, 320.0])).unwrap();
    let sigma = regularize(&e.controller.sigma_u, REGULARIZATION);
    (e, sigma)
}

type Evaluation = thrustlayout::optimizer::Evaluation<f64>;

#[test]
fn panel_a_hyperplanes_satisfy_kkt() {
    let (e, sigma) = panel_a_sigma();
    let (lo, hi) = (e.model.thrust_min, e.model.thrust_max);
    let score = saturation_margin(&e.model.u_bar, &sigma, lo, hi).unwrap();
    assert_eq!(score.per_hyperplane.len(), 32);
    assert!(score.max_kkt_residual <= 1e-8);
    assert_eq!(score.d_min, score.per_hyperplane.iter().cloned().fold(f64::INFINITY, f64::min));
    let u = &score.minimizer;
    assert!(u.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    let target = match score.active_bound {
        Bound::Lower => lo,
        Bound::Upper => hi,
    };
    assert!((u[score.active_component] - target).abs() <= 1e-9);
}

#[test]
fn distances_scale_inversely_with_sigma() {
    let (e, sigma) = panel_a_sigma();
    let (lo, hi) = (e.model.thrust_min, e.model.thrust_max);
    let base = saturation_margin(&e.model.u_bar, &sigma, lo, hi).unwrap();
    for alpha in [0.3, 2.0, 7.5] {
        let scaled = saturation_margin(&e.model.u_bar, &(&sigma * (alpha * alpha)), lo, hi).unwrap();
        for (a, b) in base.per_hyperplane.iter().zip(&scaled.per_hyperplane) {
            assert!((b * alpha - a).abs() <= 1e-9 * a.abs().max(1e-12), "alpha {alpha}: {a} vs {b}");
        }
    }
}

#[test]
fn enlarging_the_box_never_shrinks_upper_distances() {
    let (e, sigma) = panel_a_sigma();
    let lo = e.model.thrust_min;
    let mut prev = None::<Vec<f64>>;
    for delta in [0.0, 0.1, 0.5, 2.0] {
        let hi = e.model.thrust_max + delta;
        let d: Vec<f64> = (0..16)
            .map(|k| hyperplane_distance(&e.model.u_bar, &sigma, k, hi, lo, hi).unwrap().distance)
            .collect();
        if let Some(p) = &prev {
            for (a, b) in p.iter().zip(&d) {
                assert!(b >= a);
            }
        }
        prev = Some(d);
    }
}

#[test]
fn margin_is_insensitive_to_regularization() {
    let (e, _) = panel_a_sigma();
    let (lo, hi) = (e.model.thrust_min, e.model.thrust_max);
    let at = |rel: f64| {
        saturation_margin(&e.model.u_bar, &regularize(&e.controller.sigma_u, rel), lo, hi)
            .unwrap()
            .d_min
    };
    let d0 = at(REGULARIZATION);
    for rel in [REGULARIZATION / 10.0, REGULARIZATION * 10.0] {
        assert!((at(rel) - d0).abs() / d0 < 1e-3);
    }
}

#[test]
fn permuted_angles_give_the_same_cost() {
    let problem = Problem::new(panel_a(), QuadSpec::reference(), 4).unwrap();
    let mut r = rng(29);
    let theta = random_feasible(&problem, &mut r);
    let base = problem.evaluate(&theta).unwrap().score.d_min;
    for _ in 0..100 {
        let mut p = theta.clone();
        p.shuffle(&mut r);
        let d = problem.evaluate(&p).unwrap().score.d_min;
        assert!((d - base).abs() <= 1e-9 * base);
    }
}

/// Independent sampler for `P(lo ≤ u ≤ hi)`, `u ~ N(ū, Σ)`.
fn box_probability(u_bar: &DVector<f64>, sigma: &DMatrix<f64>, lo: f64, hi: f64, n: usize, seed: u64) -> f64 {
    let l = sigma.clone().cholesky().unwrap().l();
    let mut r = rng(seed);
    let mut inside = 0;
    for _ in 0..n {
        let z = DVector::from_fn(u_bar.len(), |_, _| StandardNormal.sample(&mut r));
        let u = u_bar + &l * z;
        if u.iter().all(|&v| (lo..=hi).contains(&v)) {
            inside += 1;
        }
    }
    inside as f64 / n as f64
}

#[test]
fn probability_ranking_agrees_with_margin_ranking() {
    use rayon::prelude::*;
    const SAMPLES: usize = 200_000;
    let problem = Problem::new(panel_a(), QuadSpec::reference(), 4).unwrap();
    let mut r = rng(31);
    let thetas: Vec<Vec<f64>> = (0..40).map(|_| random_feasible(&problem, &mut r)).collect();
    let scored: Vec<(f64, f64)> = thetas
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let e = problem.evaluate(theta).unwrap();
            let sigma = regularize(&e.controller.sigma_u, REGULARIZATION);
            let p = box_probability(&e.model.u_bar, &sigma, e.model.thrust_min, e.model.thrust_max, SAMPLES, i as u64);
            (e.score.d_min, p)
        })
        .collect();
    let (mut agree, mut total) = (0, 0);
    for i in 0..scored.len() {
        for j in (i + 1)..scored.len() {
            let (a, b) = (scored[i], scored[j]);
            // pairs closer than three standard errors of the difference are unresolved
            let se = ((a.1 * (1.0 - a.1) + b.1 * (1.0 - b.1)) / SAMPLES as f64).sqrt();
            if (a.1 - b.1).abs() < 3.0 * se {
                continue;
            }
            total += 1;
            if (a.0 > b.0) == (a.1 > b.1) {
                agree += 1;
            }
        }
    }
    let frac = agree as f64 / total as f64;
    assert!(total > 300, "only {total} resolved pairs");
    assert!(frac >= 0.9, "ranking agreement {agree}/{total} = {frac:.3}");
}
