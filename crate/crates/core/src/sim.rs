//! Closed-loop simulation of the nonlinear assembly under the experiment
//! scenarios, plus a linear stochastic simulation of the synthesis model.
//!
//! The simulator works in `f64`. Integration is fixed-step RK4; the feedback
//! `u = clamp(ū − K (x − x_ref))` is evaluated at the control rate and held
//! between control instants, as is the sampled disturbance noise.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::control::ControlSolution;
use crate::dynamics::{nonlinear_derivative, rotation_rpy, DisturbanceWrench, LinearModel, State, PITCH_LIMIT, STATE_DIM};
use crate::error::{Error, Result};
use crate::model::{Layout, MassProperties};
use crate::robustness::{regularize, saturation_margin, REGULARIZATION};
use crate::scalar::GRAVITY;

/// Position magnitude treated as divergence, m.
pub const DIVERGENCE_RADIUS: f64 = 50.0;
/// Settling band as a fraction of the step size.
pub const SETTLING_BAND: f64 = 0.05;

pub const DEFAULT_NOISE_STD: [f64; 6] = [0.5, 0.5, 0.5, 0.05, 0.05, 0.05];
pub const DEFAULT_WIND_FORCE: f64 = 1.5;
pub const DEFAULT_CONTROL_RATE: f64 = 500.0;
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    HoverNoise,
    Wind,
    RefStep,
    AddedMass,
    TrajectoryCircle,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::HoverNoise => "hover_noise",
            ScenarioKind::Wind => "wind",
            ScenarioKind::RefStep => "ref_step",
            ScenarioKind::AddedMass => "added_mass",
            ScenarioKind::TrajectoryCircle => "trajectory_circle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassEventMode {
    /// Step force `−Δm g` at the attach point; mass and inertia unchanged.
    Wrench,
    /// Mass, CoM and inertia recomputed at the event.
    FullDynamics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassEvent {
    pub time: f64,
    pub mass: f64,
    /// Attach point relative to the payload centroid, body axes.
    pub attach_point: Vector2<f64>,
    pub mode: MassEventMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReference {
    pub offset: Vector3<f64>,
    pub time: f64,
}

/// Horizontal circle around `(0, 0, height)`, starting at `(diameter/2, 0, height)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleReference {
    pub diameter: f64,
    pub height: f64,
    pub speed: f64,
}

impl Default for CircleReference {
    fn default() -> Self {
        Self { diameter: 2.0, height: 2.0, speed: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub duration: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Control (and noise sampling) rate, Hz.
    pub control_rate: f64,
    /// Per-channel standard deviation `[fx, fy, fz, tx, ty, tz]`.
    pub noise_std: [f64; 6],
    /// Constant world-frame force at the centroid, N.
    pub wind_force: Vector3<f64>,
    pub step: Option<StepReference>,
    pub mass_event: Option<MassEvent>,
    pub circle: Option<CircleReference>,
    pub seed: u64,
}

impl Scenario {
    fn base(kind: ScenarioKind, duration: f64) -> Self {
        Self {
            name: kind.as_str().to_string(),
            kind,
            duration,
            dt: DEFAULT_DT,
            control_rate: DEFAULT_CONTROL_RATE,
            noise_std: [0.0; 6],
            wind_force: Vector3::zeros(),
            step: None,
            mass_event: None,
            circle: None,
            seed: 0,
        }
    }

    pub fn hover_noise(duration: f64) -> Self {
        Self { noise_std: DEFAULT_NOISE_STD, ..Self::base(ScenarioKind::HoverNoise, duration) }
    }

    pub fn wind(duration: f64) -> Self {
        Self {
            noise_std: DEFAULT_NOISE_STD,
            wind_force: Vector3::new(DEFAULT_WIND_FORCE, 0.0, 0.0),
            ..Self::base(ScenarioKind::Wind, duration)
        }
    }

    /// Noise-free position step applied at `time`.
    pub fn ref_step(duration: f64, offset: Vector3<f64>, time: f64) -> Self {
        Self { step: Some(StepReference { offset, time }), ..Self::base(ScenarioKind::RefStep, duration) }
    }

    /// Noise-free mass attachment in [`MassEventMode::Wrench`] mode.
    pub fn added_mass(duration: f64, time: f64, mass: f64, attach_point: Vector2<f64>) -> Self {
        Self {
            mass_event: Some(MassEvent { time, mass, attach_point, mode: MassEventMode::Wrench }),
            ..Self::base(ScenarioKind::AddedMass, duration)
        }
    }

    pub fn trajectory_circle(duration: f64, circle: CircleReference) -> Self {
        Self { circle: Some(circle), ..Self::base(ScenarioKind::TrajectoryCircle, duration) }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Integration steps per control period.
    pub fn steps_per_control(&self) -> usize {
        (1.0 / (self.control_rate * self.dt)).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("scenario '{}': {msg}", self.name)));
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return bad(format!("dt must lie in (0, 0.01], got {}", self.dt));
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!("dt {} does not divide duration {}", self.dt, self.duration));
        }
        if !(self.control_rate > 0.0) || !self.control_rate.is_finite() {
            return bad(format!("control_rate must be > 0, got {}", self.control_rate));
        }
        let per = 1.0 / (self.control_rate * self.dt);
        if per < 1.0 - 1e-9 || (per - per.round()).abs() > 1e-9 * per {
            return bad(format!(
                "control period 1/{} must be a whole number of dt = {} steps",
                self.control_rate, self.dt
            ));
        }
        if self.noise_std.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("noise_std entries must be finite and >= 0".into());
        }
        if self.wind_force.iter().any(|f| !f.is_finite()) {
            return bad("wind_force must be finite".into());
        }
        if let Some(s) = &self.step {
            if s.offset.iter().any(|f| !f.is_finite()) || !(s.time >= 0.0) {
                return bad("step needs a finite offset and time >= 0".into());
            }
        }
        if let Some(e) = &self.mass_event {
            if !(e.mass > 0.0) || !(e.time >= 0.0) || !e.attach_point.iter().all(|v| v.is_finite()) {
                return bad("mass_event needs mass > 0, time >= 0 and a finite attach point".into());
            }
        }
        if let Some(c) = &self.circle {
            if !(c.diameter > 0.0) || !(c.speed > 0.0) || !c.height.is_finite() {
                return bad("circle needs diameter > 0 and speed > 0".into());
            }
        }
        let needs = match self.kind {
            ScenarioKind::RefStep => self.step.is_none().then_some("step"),
            ScenarioKind::AddedMass => self.mass_event.is_none().then_some("mass_event"),
            ScenarioKind::TrajectoryCircle => self.circle.is_none().then_some("circle"),
            _ => None,
        };
        if let Some(field) = needs {
            return bad(format!("kind {} requires '{field}'", self.kind.as_str()));
        }
        Ok(())
    }

    /// Reference state at time `t` (position and velocity; attitude and rates zero).
    pub fn reference(&self, t: f64) -> State<f64> {
        let mut x = State::zeros();
        if let Some(s) = &self.step {
            if t >= s.time {
                x.fixed_rows_mut::<3>(0).copy_from(&s.offset);
            }
        }
        if let Some(c) = &self.circle {
            let r = c.diameter / 2.0;
            let w = c.speed / r;
            let (s, co) = (w * t).sin_cos();
            x[0] += r * co;
            x[1] += r * s;
            x[2] += c.height;
            x[3] += -r * w * s;
            x[4] += r * w * co;
        }
        x
    }
}

/// Classic fourth-order Runge–Kutta step.
pub fn rk4_step<F>(f: &mut F, x: &State<f64>, dt: f64) -> Result<State<f64>>
where
    F: FnMut(&State<f64>) -> Result<State<f64>>,
{
    let k1 = f(x)?;
    let k2 = f(&(x + k1 * (dt / 2.0)))?;
    let k3 = f(&(x + k2 * (dt / 2.0)))?;
    let k4 = f(&(x + k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Fixed-thrust, disturbance-free integration; returns the state after `steps`.
pub fn integrate_open_loop(
    mp: &MassProperties<f64>,
    x0: &State<f64>,
    thrust: &[f64],
    dt: f64,
    steps: usize,
) -> Result<State<f64>> {
    let d = DisturbanceWrench::zero();
    let mut f = |x: &State<f64>| nonlinear_derivative(x, thrust, &d, mp);
    let mut x = *x0;
    for _ in 0..steps {
        x = rk4_step(&mut f, &x, dt)?;
    }
    Ok(x)
}

/// Root-mean-square tracking errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rmse {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Rmse {
    pub const NAMES: [&'static str; 6] = ["x", "y", "z", "yaw", "pitch", "roll"];

    pub fn values(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.yaw, self.pitch, self.roll]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub scenario: String,
    pub kind: ScenarioKind,
    pub layout: Layout<f64>,
    /// Sample times; one row per integration step including `t = 0`.
    pub time: Vec<f64>,
    pub states: Vec<State<f64>>,
    /// Commanded thrusts before saturation.
    pub thrust_cmd: Vec<DVector<f64>>,
    /// Applied thrusts after saturation.
    pub thrust_sat: Vec<DVector<f64>>,
    /// Minimum Mahalanobis distance of the commanded thrust to the saturation
    /// hyperplanes under the design covariance; 0 outside the thrust box.
    pub mahalanobis: Vec<f64>,
    pub rmse: Rmse,
    /// Control periods with at least one clamped motor.
    pub saturation_events: usize,
    pub diverged: bool,
    /// Largest excursion past the step target along the step direction, m.
    pub overshoot: Option<f64>,
    /// Time after the step until the response stays within the settling band, s.
    pub settling_time: Option<f64>,
    /// Largest `max(|roll|, |pitch|)` over the run, rad.
    pub peak_attitude: f64,
    pub mean_mahalanobis: f64,
}

impl SimReport {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

/// Instantaneous saturation distance: [`saturation_margin`] evaluated at `u`.
fn instantaneous_distance(u: &DVector<f64>, sigma: &DMatrix<f64>, lower: f64, upper: f64) -> f64 {
    if u.iter().any(|&v| v <= lower || v >= upper) {
        return 0.0;
    }
    saturation_margin(u, sigma, lower, upper).map(|s| s.d_min).unwrap_or(0.0)
}

/// Runs `scenario` on the nonlinear model of `model` under the feedback of `controller`.
pub fn simulate(
    layout: &Layout<f64>,
    controller: &ControlSolution<f64>,
    model: &LinearModel<f64>,
    scenario: &Scenario,
) -> Result<SimReport> {
    scenario.validate()?;
    let n_in = model.n_inputs();
    if layout.len() * 4 != n_in || controller.k_star.shape() != (n_in, STATE_DIM) {
        return Err(Error::Dimension(format!(
            "layout has {} modules, model {} inputs, gain {:?}",
            layout.len(),
            n_in,
            controller.k_star.shape()
        )));
    }

    let dt = scenario.dt;
    let n_steps = scenario.n_steps();
    let per_ctrl = scenario.steps_per_control();
    let h_ctrl = per_ctrl as f64 * dt;
    let (lo, hi) = (model.thrust_min, model.thrust_max);
    let sigma = regularize(&controller.sigma_u, REGULARIZATION);
    let noisy = scenario.noise_std.iter().any(|&s| s > 0.0);
    let noise_scale: Vec<f64> = scenario.noise_std.iter().map(|s| s / h_ctrl.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut mp = model.mass_props.clone();
    let mut x = scenario.reference(0.0);
    let mut extra_force = Vector3::zeros();
    let mut extra_point: Option<Vector3<f64>> = None;
    let mut event_pending = scenario.mass_event.is_some();

    let cap = n_steps + 1;
    let mut report = SimReport {
        scenario: scenario.name.clone(),
        kind: scenario.kind,
        layout: layout.clone(),
        time: Vec::with_capacity(cap),
        states: Vec::with_capacity(cap),
        thrust_cmd: Vec::with_capacity(cap),
        thrust_sat: Vec::with_capacity(cap),
        mahalanobis: Vec::with_capacity(cap),
        rmse: Rmse::default(),
        saturation_events: 0,
        diverged: false,
        overshoot: None,
        settling_time: None,
        peak_attitude: 0.0,
        mean_mahalanobis: 0.0,
    };

    let mut u_cmd = model.u_bar.clone();
    let mut u_sat = model.u_bar.clone();
    let mut d_m = 0.0;
    let mut noise = DisturbanceWrench::zero();

    for step in 0..=n_steps {
        let t = step as f64 * dt;

        if event_pending {
            let ev = scenario.mass_event.as_ref().expect("pending event");
            if t >= ev.time - 1e-12 {
                event_pending = false;
                match ev.mode {
                    MassEventMode::Wrench => {
                        extra_force = Vector3::new(0.0, 0.0, -ev.mass * GRAVITY);
                        extra_point = Some(Vector3::new(ev.attach_point.x, ev.attach_point.y, 0.0));
                    }
                    MassEventMode::FullDynamics => {
                        let heavier = mp.with_point_mass(ev.mass, &ev.attach_point)?;
                        let shift = heavier.com_offset - mp.com_offset;
                        let rot = rotation_rpy(&x.fixed_rows::<3>(6).into_owned());
                        let dp = rot * Vector3::new(shift.x, shift.y, 0.0);
                        let ratio = mp.total_mass / heavier.total_mass;
                        for i in 0..3 {
                            x[i] += dp[i];
                            x[3 + i] *= ratio;
                        }
                        mp = heavier;
                    }
                }
            }
        }

        if step % per_ctrl == 0 {
            let err = x - scenario.reference(t);
            let err = DVector::from_column_slice(err.as_slice());
            u_cmd = &model.u_bar - &controller.k_star * err;
            u_sat = u_cmd.map(|v| v.clamp(lo, hi));
            if u_cmd != u_sat {
                report.saturation_events += 1;
            }
            d_m = instantaneous_distance(&u_cmd, &sigma, lo, hi);
            if noisy {
                let mut w = [0.0; 6];
                for (wi, s) in w.iter_mut().zip(&noise_scale) {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    *wi = s * xi;
                }
                noise = DisturbanceWrench::from_slice(&w);
            }
        }

        report.time.push(t);
        report.states.push(x);
        report.thrust_cmd.push(u_cmd.clone());
        report.thrust_sat.push(u_sat.clone());
        report.mahalanobis.push(d_m);

        let p_norm = x.fixed_rows::<3>(0).norm();
        if !(p_norm <= DIVERGENCE_RADIUS) || !(x[7].abs() < PITCH_LIMIT) || x.iter().any(|v| !v.is_finite()) {
            report.diverged = true;
            break;
        }
        if step == n_steps {
            break;
        }

        let thrust = u_sat.as_slice();
        let base = DisturbanceWrench {
            force: noise.force + scenario.wind_force,
            torque: noise.torque,
        };
        let mp_ref = &mp;
        let mut f = |s: &State<f64>| {
            let mut d = base;
            if let Some(r) = extra_point {
                // world force at the attach point: centroid force plus body moment about the centroid
                let rot = rotation_rpy(&s.fixed_rows::<3>(6).into_owned());
                d.force += extra_force;
                d.torque += r.cross(&(rot.transpose() * extra_force));
            }
            nonlinear_derivative(s, thrust, &d, mp_ref)
        };
        match rk4_step(&mut f, &x, dt) {
            Ok(next) => x = next,
            Err(Error::GimbalLock { .. }) => {
                report.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }

    summarize(&mut report, scenario);
    Ok(report)
}

fn summarize(report: &mut SimReport, scenario: &Scenario) {
    let n = report.len().max(1) as f64;
    let mut sq = [0.0; 6];
    let mut peak: f64 = 0.0;
    for (t, x) in report.time.iter().zip(&report.states) {
        let r = scenario.reference(*t);
        let e = [x[0] - r[0], x[1] - r[1], x[2] - r[2], x[8], x[7], x[6]];
        for (acc, v) in sq.iter_mut().zip(e) {
            *acc += v * v;
        }
        peak = peak.max(x[6].abs()).max(x[7].abs());
    }
    let r: Vec<f64> = sq.iter().map(|s| (s / n).sqrt()).collect();
    report.rmse = Rmse { x: r[0], y: r[1], z: r[2], yaw: r[3], pitch: r[4], roll: r[5] };
    report.peak_attitude = peak;
    report.mean_mahalanobis = report.mahalanobis.iter().sum::<f64>() / n;

    if let Some(s) = &scenario.step {
        let size = s.offset.norm();
        if size > 0.0 && !report.diverged {
            let dir = s.offset / size;
            let mut over: f64 = 0.0;
            let mut last_out = s.time;
            for (t, x) in report.time.iter().zip(&report.states) {
                if *t < s.time {
                    continue;
                }
                let along = x.fixed_rows::<3>(0).dot(&dir);
                over = over.max(along - size);
                if (along - size).abs() > SETTLING_BAND * size {
                    last_out = *t;
                }
            }
            report.overshoot = Some(over);
            let end = *report.time.last().unwrap_or(&0.0);
            // never entered the band for good: leave unset
            report.settling_time = (last_out < end).then_some(last_out - s.time);
        }
    }
}

/// A controlled vehicle ready for simulation.
#[derive(Debug, Clone)]
pub struct Vehicle<'a> {
    pub layout: &'a Layout<f64>,
    pub controller: &'a ControlSolution<f64>,
    pub model: &'a LinearModel<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scenario: String,
    pub metric: String,
    pub suboptimal: f64,
    pub optimal: f64,
    /// Relative improvement of the optimal layout, percent; positive is better.
    pub improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub optimal: Vec<SimReport>,
    pub suboptimal: Vec<SimReport>,
}

/// Percent by which `optimal` improves on `suboptimal`.
pub fn improvement(suboptimal: f64, optimal: f64, higher_is_better: bool) -> f64 {
    if suboptimal == optimal {
        return 0.0;
    }
    if suboptimal == 0.0 {
        return if (optimal > 0.0) == higher_is_better { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    let gain = if higher_is_better { optimal - suboptimal } else { suboptimal - optimal };
    100.0 * gain / suboptimal.abs()
}

/// Runs every scenario on both vehicles with matched seeds and tabulates
/// RMSE, saturation count and mean Mahalanobis distance.
pub fn compare_layouts(optimal: &Vehicle, suboptimal: &Vehicle, scenarios: &[Scenario]) -> Result<Comparison> {
    let runs: Vec<Result<(SimReport, SimReport)>> = scenarios
        .par_iter()
        .map(|sc| {
            let o = simulate(optimal.layout, optimal.controller, optimal.model, sc)?;
            let s = simulate(suboptimal.layout, suboptimal.controller, suboptimal.model, sc)?;
            Ok((o, s))
        })
        .collect();
    let mut out = Comparison { rows: Vec::new(), optimal: Vec::new(), suboptimal: Vec::new() };
    for run in runs {
        let (o, s) = run?;
        let mut push = |metric: &str, sv: f64, ov: f64, higher: bool| {
            out.rows.push(ComparisonRow {
                scenario: o.scenario.clone(),
                metric: metric.to_string(),
                suboptimal: sv,
                optimal: ov,
                improvement_pct: improvement(sv, ov, higher),
            });
        };
        for ((name, sv), ov) in Rmse::NAMES.iter().zip(s.rmse.values()).zip(o.rmse.values()) {
            push(&format!("rmse_{name}"), sv, ov, false);
        }
        push("saturation_events", s.saturation_events as f64, o.saturation_events as f64, false);
        push("peak_attitude", s.peak_attitude, o.peak_attitude, false);
        push("mean_mahalanobis", s.mean_mahalanobis, o.mean_mahalanobis, true);
        out.optimal.push(o);
        out.suboptimal.push(s);
    }
    Ok(out)
}

/// Exact zero-order discretization of `ẋ = A x + G w` under unit white noise:
/// returns `(Φ, Q)` with `x_{k+1} = Φ x_k + q_k`, `q_k ~ N(0, Q)` (Van Loan).
pub fn discretize_stochastic(a: &DMatrix<f64>, g: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    m.view_mut((0, n), (n, n)).copy_from(&(g * g.transpose() * dt));
    m.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * dt));
    let e = m.exp();
    let phi = e.view((n, n), (n, n)).transpose();
    let q = &phi * e.view((0, n), (n, n));
    let q = (&q + q.transpose()) * 0.5;
    (phi, q)
}

/// Sample statistics of a linear stochastic simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStats {
    /// Time average of `zᵀz`.
    pub mean_zz: f64,
    /// Sample state covariance.
    pub covariance: DMatrix<f64>,
    pub samples: usize,
}

/// Simulates `ẋ = A_f x + Bd w` under unit-intensity white noise `w` and
/// returns time averages of `zᵀz` (`z = Cz x`) and `x xᵀ` after `burn_in`.
pub fn simulate_linear(
    a_f: &DMatrix<f64>,
    bd: &DMatrix<f64>,
    cz: &DMatrix<f64>,
    dt: f64,
    duration: f64,
    burn_in: f64,
    seed: u64,
) -> Result<LinearStats> {
    let n = a_f.nrows();
    if a_f.ncols() != n || bd.nrows() != n || cz.ncols() != n {
        return Err(Error::Dimension("linear simulation: inconsistent matrix shapes".into()));
    }
    if !(dt > 0.0) || !(duration > burn_in) || !(burn_in >= 0.0) {
        return Err(Error::Config("linear simulation: need dt > 0 and duration > burn_in >= 0".into()));
    }
    let (phi, q) = discretize_stochastic(a_f, bd, dt);
    let l = q
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NumericalFailure("process noise covariance not positive definite".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = (duration / dt).round() as usize;
    let skip = (burn_in / dt).round() as usize;
    let mut x = DVector::zeros(n);
    let mut xi = DVector::zeros(n);
    let mut zz = 0.0;
    let mut cov = DMatrix::zeros(n, n);
    let mut count = 0usize;
    for k in 0..steps {
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        x = &phi * &x + &l * &xi;
        if k >= skip {
            let z = cz * &x;
            zz += z.norm_squared();
            cov.ger(1.0, &x, &x, 1.0);
            count += 1;
        }
    }
    let c = count as f64;
    Ok(LinearStats { mean_zz: zz / c, covariance: cov / c, samples: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{synthesize, WeightConfig};
    use crate::dynamics::linearize_at_hover;
    use crate::model::{compose_mass_properties, PayloadSpec, QuadSpec};
    use approx::assert_relative_eq;

    fn panel_a_corners() -> (Layout<f64>, LinearModel<f64>, ControlSolution<f64>) {
        let p = PayloadSpec::named("square", 1.02, 0.005).unwrap();
        let q = QuadSpec::reference();
        let layout = Layout::from_degrees(&[45.0, 135.0, 225.0, 315.0], 0.1);
        let mp = compose_mass_properties(&p, &q, &layout, q.default_separation()).unwrap();
        let model = linearize_at_hover(&mp, &q).unwrap();
        let sol = synthesize(&model, &WeightConfig::reference(4)).unwrap();
        (layout, model, sol)
    }

    #[test]
    fn zero_noise_hover_stays_put() {
        let (l, m, c) = panel_a_corners();
        let mut sc = Scenario::hover_noise(10.0);
        sc.noise_std = [0.0; 6];
        let r = simulate(&l, &c, &m, &sc).unwrap();
        assert_eq!(r.len(), 10_001);
        let worst = r.states.iter().map(|x| x.fixed_rows::<3>(0).norm()).fold(0.0, f64::max);
        assert!(worst <= 1e-9, "drift {worst}");
        assert!(!r.diverged);
        assert_eq!(r.saturation_events, 0);
    }

    #[test]
    fn clamp_respected_and_seed_reproducible() {
        let (l, m, c) = panel_a_corners();
        let mut sc = Scenario::hover_noise(2.0).with_seed(3);
        sc.noise_std = [3.0, 3.0, 3.0, 0.3, 0.3, 0.3];
        let a = simulate(&l, &c, &m, &sc).unwrap();
        let b = simulate(&l, &c, &m, &sc).unwrap();
        assert_eq!(a, b);
        assert!(a.saturation_events > 0);
        for u in &a.thrust_sat {
            assert!(u.iter().all(|&v| (0.0..=6.0).contains(&v)));
        }
        assert!(a.mahalanobis.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::hover_noise(0.0).validate().is_err());
        let mut s = Scenario::hover_noise(1.0);
        s.dt = 0.02;
        assert!(s.validate().is_err());
        s.dt = 0.003;
        assert!(s.validate().is_err());
        let mut s = Scenario::hover_noise(1.0);
        s.control_rate = 300.0;
        assert!(s.validate().is_err());
        let mut s = Scenario::hover_noise(1.0);
        s.kind = ScenarioKind::RefStep;
        assert!(s.validate().is_err());
    }

    #[test]
    fn circle_reference_is_consistent() {
        let sc = Scenario::trajectory_circle(10.0, CircleReference::default());
        let h = 1e-6;
        for t in [0.0, 1.3, 7.7] {
            let a = sc.reference(t);
            let b = sc.reference(t + h);
            assert_relative_eq!((b[0] - a[0]) / h, a[3], epsilon = 1e-5);
            assert_relative_eq!((b[1] - a[1]) / h, a[4], epsilon = 1e-5);
            assert_relative_eq!(a.fixed_rows::<2>(0).norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(a.fixed_rows::<2>(3).norm(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn step_metrics_present() {
        let (l, m, c) = panel_a_corners();
        let sc = Scenario::ref_step(8.0, Vector3::new(1.0, 0.0, 0.0), 0.5);
        let r = simulate(&l, &c, &m, &sc).unwrap();
        assert!(r.overshoot.unwrap() >= 0.0);
        assert!(r.settling_time.unwrap() > 0.0);
        let last = r.states.last().unwrap();
        assert!((last[0] - 1.0).abs() < 0.05);
    }

    #[test]
    fn identical_layouts_compare_to_zero() {
        let (l, m, c) = panel_a_corners();
        let v = Vehicle { layout: &l, controller: &c, model: &m };
        let cmp = compare_layouts(&v, &v, &[Scenario::hover_noise(1.0)]).unwrap();
        assert!(cmp.rows.iter().all(|r| r.improvement_pct == 0.0));
    }

    #[test]
    fn van_loan_scalar() {
        // ẋ = −a x + w: Φ = e^{−a h}, Q = (1 − e^{−2 a h}) / (2a)
        let a = DMatrix::from_element(1, 1, -2.0);
        let g = DMatrix::from_element(1, 1, 1.0);
        let (phi, q) = discretize_stochastic(&a, &g, 0.1);
        assert_relative_eq!(phi[(0, 0)], (-0.2f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(q[(0, 0)], (1.0 - (-0.4f64).exp()) / 4.0, max_relative = 1e-12);
    }
}
