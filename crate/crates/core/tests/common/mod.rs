#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thrustlayout::model::compose_mass_properties;
use thrustlayout::*;

pub fn panel_a() -> PayloadSpec64 {
    PayloadSpec::named("square", 1.02, 0.005).unwrap()
}

pub fn panel_b() -> PayloadSpec64 {
    PayloadSpec::named("concave_square", 0.71, 0.005).unwrap()
}

pub fn panel_c() -> PayloadSpec64 {
    PayloadSpec::named("L_panel", 0.76, 0.005).unwrap()
}

pub fn deg(d: &[f64]) -> Vec<f64> {
    d.iter().map(|v| v.to_radians()).collect()
}

pub const CORNERS: [f64; 4] = [45.0, 135.0, 225.0, 315.0];

/// Random layouts that pass separation and feedforward checks.
pub fn random_feasible(problem: &Problem64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    for _ in 0..100_000 {
        let theta: Vec<f64> = (0..problem.n_modules).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let layout = problem.layout(&theta);
        if let Ok(mp) = compose_mass_properties(&problem.payload, &problem.quad, &layout, problem.d_min) {
            if dynamics::feedforward_hover(&mp, &problem.quad).is_ok() {
                return theta;
            }
        }
    }
    panic!("no feasible layout for {} with N = {}", problem.payload.name, problem.n_modules);
}

/// Small light disk that a single module can carry from any angle.
pub fn small_disk() -> PayloadSpec64 {
    PayloadSpec::new("small_disk", &geometry::shapes::circle(0.1, 720), 0.1, 0.005, None).unwrap()
}

/// A mix of payload shapes and module counts.
pub fn problem_zoo() -> Vec<Problem64> {
    let q = QuadSpec::reference();
    vec![
        Problem::new(panel_a(), q.clone(), 4).unwrap(),
        Problem::new(panel_a(), q.clone(), 3).unwrap(),
        Problem::new(panel_b(), q.clone(), 3).unwrap(),
        Problem::new(panel_c(), q.clone(), 3).unwrap(),
        Problem::new(PayloadSpec::named("circle", 0.8, 0.005).unwrap(), q.clone(), 2).unwrap(),
        Problem::new(panel_b(), q, 4).unwrap(),
    ]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
