//! Outer layout search: multi-start Nelder–Mead over the placement angles,
//! with the LQR controller and saturation margin re-derived at every
//! evaluation.

pub mod nelder_mead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{synthesize, ControlSolution, WeightConfig};
use crate::dynamics::{linearize_at_hover, LinearModel};
use crate::error::{Error, Result};
use crate::model::{compose_mass_properties, wrap_angle, Layout, PayloadSpec, QuadSpec};
use crate::robustness::{layout_cost, RobustnessScore};
use crate::scalar::{lit, to_f64, Real};

pub use nelder_mead::{minimize, NelderMeadOptions, NelderMeadResult};

/// Everything that stays fixed while the placement angles vary.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<T: Real> {
    pub payload: PayloadSpec<T>,
    pub quad: QuadSpec<T>,
    pub n_modules: usize,
    pub weights: WeightConfig<T>,
    pub rod_length: T,
    /// Minimum center-to-center module spacing.
    pub d_min: T,
}

/// A fully evaluated layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T: Real> {
    pub layout: Layout<T>,
    pub model: LinearModel<T>,
    pub controller: ControlSolution<T>,
    pub score: RobustnessScore<T>,
}

impl<T: Real> Problem<T> {
    /// Reference problem: default vehicles and weights, 0.1 m rods.
    pub fn new(payload: PayloadSpec<T>, quad: QuadSpec<T>, n_modules: usize) -> Result<Self> {
        if n_modules == 0 {
            return Err(Error::Config("N must be ≥ 1".into()));
        }
        quad.validate()?;
        let d_min = quad.default_separation();
        Ok(Self {
            payload,
            quad,
            n_modules,
            weights: WeightConfig::reference(n_modules),
            rod_length: lit(0.1),
            d_min,
        })
    }

    pub fn layout(&self, theta: &[T]) -> Layout<T> {
        Layout::new(theta.iter().map(|&a| wrap_angle(a)).collect(), self.rod_length)
    }

    /// Mass properties → linearization → synthesis → saturation margin.
    pub fn evaluate(&self, theta: &[T]) -> Result<Evaluation<T>> {
        if theta.len() != self.n_modules {
            return Err(Error::InvalidLayout(format!(
                "expected {} angles, got {}",
                self.n_modules,
                theta.len()
            )));
        }
        let layout = self.layout(theta);
        let mp = compose_mass_properties(&self.payload, &self.quad, &layout, self.d_min)?;
        let model = linearize_at_hover(&mp, &self.quad)?;
        let controller = synthesize(&model, &self.weights)?;
        let score = layout_cost(&model, &controller)?;
        Ok(Evaluation { layout, model, controller, score })
    }
}

/// Layout cost, with every failure mapped to `−∞`.
pub fn evaluate_candidate<T: Real>(theta: &[T], problem: &Problem<T>) -> T {
    match problem.evaluate(theta) {
        Ok(e) => e.score.d_min,
        Err(_) => -T::infinity(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    pub n_restarts: usize,
    pub initial_simplex_scale: f64,
    pub max_iters: usize,
    pub xtol: f64,
    pub ftol: f64,
    pub seed: u64,
    /// Random probes allowed per restart when looking for a feasible start.
    pub max_probes: usize,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            n_restarts: 8,
            initial_simplex_scale: 0.3,
            max_iters: 2000,
            xtol: 1e-4,
            ftol: 1e-6,
            seed: 0,
            max_probes: 1000,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 || self.max_iters == 0 || self.max_probes == 0 {
            return Err(Error::Config("restart, iteration and probe counts must be ≥ 1".into()));
        }
        if !(self.initial_simplex_scale > 0.0 && self.xtol > 0.0 && self.ftol > 0.0) {
            return Err(Error::Config("simplex scale and tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartRecord<T> {
    pub restart: usize,
    pub initial_theta: Vec<T>,
    pub final_theta: Vec<T>,
    pub initial_cost: T,
    pub final_cost: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best cost over restarts `0..=restart`.
    pub best_so_far: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<T: Real> {
    pub best_layout: Layout<T>,
    pub best_score: RobustnessScore<T>,
    pub controller: ControlSolution<T>,
    pub model: LinearModel<T>,
    pub restart_history: Vec<RestartRecord<T>>,
    pub total_cost_evaluations: usize,
}

fn is_feasible<T: Real>(cost: T) -> bool {
    cost.is_finite()
}

struct RestartOutcome<T> {
    record: Option<RestartRecord<T>>,
    probes: usize,
}

fn run_restart<T: Real>(problem: &Problem<T>, cfg: &OptimizationConfig, restart: usize) -> RestartOutcome<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let tau = std::f64::consts::TAU;

    let mut probes = 0;
    let mut start = None;
    while probes < cfg.max_probes {
        probes += 1;
        let theta: Vec<T> = (0..problem.n_modules).map(|_| lit(rng.random::<f64>() * tau)).collect();
        let c = evaluate_candidate(&theta, problem);
        if is_feasible(c) {
            start = Some((theta, c));
            break;
        }
    }
    let Some((x0, c0)) = start else {
        return RestartOutcome { record: None, probes };
    };

    let opts = NelderMeadOptions {
        max_iters: cfg.max_iters,
        xtol: lit(cfg.xtol),
        ftol: lit(cfg.ftol),
        ..Default::default()
    };
    let result = minimize(
        |x: &[T]| {
            let c = evaluate_candidate(x, problem);
            if is_feasible(c) {
                -c
            } else {
                T::infinity()
            }
        },
        &x0,
        lit(cfg.initial_simplex_scale),
        &opts,
        |iter, best| {
            if iter % 50 == 0 {
                log::debug!("restart={restart} iter={iter} best_cost={:.9}", -to_f64(best));
            }
        },
    );
    let final_theta = problem.layout(&result.x).canonical().theta;
    let final_cost = evaluate_candidate(&final_theta, problem);
    log::info!(
        "restart={restart} iter={} best_cost={:.9} converged={}",
        result.iterations,
        to_f64(final_cost),
        result.converged
    );
    RestartOutcome {
        record: Some(RestartRecord {
            restart,
            initial_theta: x0,
            final_theta,
            initial_cost: c0,
            final_cost,
            iterations: result.iterations,
            evaluations: result.evaluations + 1,
            converged: result.converged,
            best_so_far: final_cost,
        }),
        probes,
    }
}

fn sorted<T: Real>(theta: &[T]) -> Vec<T> {
    let mut s = theta.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// `true` when `a` beats `b`: higher cost, ties broken by the
/// lexicographically smaller sorted angle vector.
fn better<T: Real>(a: &RestartRecord<T>, b: &RestartRecord<T>) -> bool {
    if a.final_cost != b.final_cost {
        return a.final_cost > b.final_cost;
    }
    let (sa, sb) = (sorted(&a.final_theta), sorted(&b.final_theta));
    sa.partial_cmp(&sb) == Some(std::cmp::Ordering::Less)
}

/// Multi-start Nelder–Mead; restarts run in parallel and are merged in
/// restart order, so the result depends only on the seed.
pub fn optimize<T: Real>(problem: &Problem<T>, cfg: &OptimizationConfig) -> Result<OptimizationResult<T>> {
    cfg.validate()?;
    let outcomes: Vec<RestartOutcome<T>> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|r| run_restart(problem, cfg, r))
        .collect();

    let total_probes: usize = outcomes.iter().map(|o| o.probes).sum();
    let mut history: Vec<RestartRecord<T>> = Vec::new();
    let mut best: Option<RestartRecord<T>> = None;
    let mut evaluations = 0;
    for o in outcomes {
        evaluations += o.probes;
        let Some(mut rec) = o.record else { continue };
        evaluations += rec.evaluations;
        if best.as_ref().is_none_or(|b| better(&rec, b)) {
            best = Some(rec.clone());
        }
        rec.best_so_far = best.as_ref().map(|b| b.final_cost).unwrap_or(rec.final_cost);
        history.push(rec);
    }
    let best = best.ok_or(Error::NoFeasibleLayout { probes: total_probes })?;
    let eval = problem.evaluate(&best.final_theta)?;
    let best_layout = eval.layout.canonical();
    Ok(OptimizationResult {
        best_layout,
        best_score: eval.score,
        controller: eval.controller,
        model: eval.model,
        restart_history: history,
        total_cost_evaluations: evaluations,
    })
}
