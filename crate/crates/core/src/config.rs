//! JSON problem configuration. Units are SI; angles are degrees.
//!
//! Parsing is strict: unknown keys are rejected and errors carry the JSON
//! path and line/column of the offending value.

use std::path::PathBuf;

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::WeightConfig;
use crate::dynamics::{DISTURBANCE_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::model::{ModuleMount, PayloadSpec, QuadSpec};
use crate::optimizer::{OptimizationConfig, Problem};
use crate::sim::{CircleReference, MassEvent, MassEventMode, Scenario, ScenarioKind, StepReference};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Built-in cross-section; exclusive with `vertices`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
    pub mass: f64,
    #[serde(default = "default_thickness")]
    pub thickness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia_zz_override: Option<f64>,
}

fn default_thickness() -> f64 {
    0.005
}

impl PayloadConfig {
    pub fn label(&self) -> String {
        self.name
            .clone()
            .or_else(|| self.shape.clone())
            .unwrap_or_else(|| "polygon".to_string())
    }

    pub fn resolve(&self) -> Result<PayloadSpec<f64>> {
        let ctx = |e: Error| Error::Config(format!("payload: {e}"));
        let verts: Vec<Vector2<f64>> = match (&self.shape, &self.vertices) {
            (Some(shape), None) => crate::geometry::shapes::named(shape)
                .ok_or_else(|| Error::Config(format!("payload.shape: unknown shape '{shape}'")))?,
            (None, Some(v)) => v.iter().map(|p| Vector2::new(p[0], p[1])).collect(),
            _ => return Err(Error::Config("payload: give exactly one of 'shape' or 'vertices'".into())),
        };
        PayloadSpec::new(self.label(), &verts, self.mass, self.thickness, self.inertia_zz_override).map_err(ctx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MountConfig {
    BodyAligned,
    Radial,
}

/// Overrides applied on top of the reference vehicle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor_to_motor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prop_diameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thrust_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thrust_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Diagonal of the module's own inertia; defaults to a flat disk.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_inertia_diag: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<[i8; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mount: Option<MountConfig>,
}

impl QuadConfig {
    pub fn resolve(&self) -> Result<QuadSpec<f64>> {
        let mut q = QuadSpec::<f64>::reference();
        let mass_changed = self.frame_mass.is_some() || self.battery_mass.is_some() || self.motor_to_motor.is_some();
        if let Some(v) = self.frame_mass {
            q.frame_mass = v;
        }
        if let Some(v) = self.battery_mass {
            q.battery_mass = v;
        }
        if let Some(v) = self.motor_to_motor {
            q.motor_to_motor = v;
        }
        if let Some(v) = self.prop_diameter {
            q.prop_diameter = v;
        }
        if let Some(v) = self.thrust_min {
            q.thrust_min = v;
        }
        if let Some(v) = self.thrust_max {
            q.thrust_max = v;
        }
        if let Some(v) = self.kappa {
            q.kappa = v;
        }
        if let Some(s) = self.spin {
            q.spin = s;
        }
        if let Some(m) = self.mount {
            q.mount = match m {
                MountConfig::BodyAligned => ModuleMount::BodyAligned,
                MountConfig::Radial => ModuleMount::Radial,
            };
        }
        q.local_inertia = match self.local_inertia_diag {
            Some(d) => Matrix3::from_diagonal(&Vector3::new(d[0], d[1], d[2])),
            None if mass_changed => QuadSpec::disk_inertia(q.mass(), q.motor_to_motor),
            None => q.local_inertia,
        };
        q.validate().map_err(|e| Error::Config(format!("quad: {e}")))?;
        Ok(q)
    }
}

/// Sparse matrix entry `[row, col, value]`.
pub type Triplet = (usize, usize, f64);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    /// Replaces the state block of the performance output (first rows of `C`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_state: Option<Vec<Triplet>>,
    /// Scalar weight on every thrust deviation (`D = [0; w I]`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thrust_weight: Option<f64>,
    /// Fixed 12×6 disturbance input instead of the model's wrench Jacobian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bd: Option<Vec<Triplet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bd_gain: Option<[f64; DISTURBANCE_DIM]>,
}

impl WeightsConfig {
    pub fn resolve(&self, n_modules: usize) -> Result<WeightConfig<f64>> {
        let mut w = WeightConfig::<f64>::reference(n_modules);
        if let Some(entries) = &self.c_state {
            let rows = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
            let n_in = 4 * n_modules;
            let mut c = DMatrix::zeros(rows + n_in, STATE_DIM);
            for &(i, j, v) in entries {
                if j >= STATE_DIM {
                    return Err(Error::Config(format!("weights.c_state: column {j} out of range")));
                }
                c[(i, j)] = v;
            }
            let mut d = DMatrix::zeros(rows + n_in, n_in);
            for k in 0..n_in {
                d[(rows + k, k)] = 1.0;
            }
            w.c = c;
            w.d = d;
        }
        if let Some(s) = self.thrust_weight {
            if !(s > 0.0) {
                return Err(Error::Config("weights.thrust_weight must be > 0".into()));
            }
            w.d *= s;
        }
        if let Some(entries) = &self.bd {
            let mut bd = DMatrix::zeros(STATE_DIM, DISTURBANCE_DIM);
            for &(i, j, v) in entries {
                if i >= STATE_DIM || j >= DISTURBANCE_DIM {
                    return Err(Error::Config(format!("weights.bd: entry ({i}, {j}) out of range")));
                }
                bd[(i, j)] = v;
            }
            w.bd_override = Some(bd);
        }
        if let Some(g) = self.bd_gain {
            w.bd_gain = g;
        }
        w.validate(4 * n_modules).map_err(|e| Error::Config(format!("weights: {e}")))?;
        Ok(w)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_simplex_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ftol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_probes: Option<usize>,
}

impl OptimizationSection {
    pub fn resolve(&self, seed: u64) -> Result<OptimizationConfig> {
        let d = OptimizationConfig::default();
        let cfg = OptimizationConfig {
            n_restarts: self.n_restarts.unwrap_or(d.n_restarts),
            initial_simplex_scale: self.initial_simplex_scale.unwrap_or(d.initial_simplex_scale),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            xtol: self.xtol.unwrap_or(d.xtol),
            ftol: self.ftol.unwrap_or(d.ftol),
            seed,
            max_probes: self.max_probes.unwrap_or(d.max_probes),
        };
        cfg.validate().map_err(|e| Error::Config(format!("optimization: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKindConfig {
    HoverNoise,
    Wind,
    RefStep,
    AddedMass,
    TrajectoryCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassModeConfig {
    #[default]
    Wrench,
    FullDynamics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassEventConfig {
    pub time: f64,
    pub mass: f64,
    pub attach_point: [f64; 2],
    #[serde(default)]
    pub mode: MassModeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleConfig {
    #[serde(default = "default_diameter")]
    pub diameter: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
}

fn default_diameter() -> f64 {
    CircleReference::default().diameter
}
fn default_height() -> f64 {
    CircleReference::default().height
}
fn default_speed() -> f64 {
    CircleReference::default().speed
}

/// One simulation scenario. Omitted fields take the kind's defaults:
/// noise only for `hover_noise` and `wind`, a 1 m x step at 1 s for
/// `ref_step`, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: ScenarioKindConfig,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<[f64; 6]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind_force: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_offset: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_event: Option<MassEventConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle: Option<CircleConfig>,
    /// Offset added to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn resolve(&self, index: usize, run_seed: u64) -> Result<Scenario> {
        let mut sc = match self.kind {
            ScenarioKindConfig::HoverNoise => Scenario::hover_noise(self.duration),
            ScenarioKindConfig::Wind => Scenario::wind(self.duration),
            ScenarioKindConfig::RefStep => {
                let off = self.step_offset.unwrap_or([1.0, 0.0, 0.0]);
                Scenario::ref_step(self.duration, Vector3::from(off), self.step_time.unwrap_or(1.0))
            }
            ScenarioKindConfig::AddedMass => {
                let ev = self
                    .mass_event
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("scenarios[{index}]: added_mass requires 'mass_event'")))?;
                Scenario::added_mass(self.duration, ev.time, ev.mass, Vector2::from(ev.attach_point))
            }
            ScenarioKindConfig::TrajectoryCircle => Scenario::trajectory_circle(self.duration, CircleReference::default()),
        };
        if let Some(name) = &self.name {
            sc.name = name.clone();
        }
        if let Some(v) = self.dt {
            sc.dt = v;
        }
        if let Some(v) = self.control_rate {
            sc.control_rate = v;
        }
        if let Some(v) = self.noise_std {
            sc.noise_std = v;
        }
        if let Some(v) = self.wind_force {
            sc.wind_force = Vector3::from(v);
        }
        if self.kind != ScenarioKindConfig::RefStep && (self.step_offset.is_some() || self.step_time.is_some()) {
            sc.step = Some(StepReference {
                offset: Vector3::from(self.step_offset.unwrap_or([0.0; 3])),
                time: self.step_time.unwrap_or(0.0),
            });
        }
        if let Some(ev) = &self.mass_event {
            sc.mass_event = Some(MassEvent {
                time: ev.time,
                mass: ev.mass,
                attach_point: Vector2::from(ev.attach_point),
                mode: match ev.mode {
                    MassModeConfig::Wrench => MassEventMode::Wrench,
                    MassModeConfig::FullDynamics => MassEventMode::FullDynamics,
                },
            });
        }
        if let Some(c) = &self.circle {
            sc.circle = Some(CircleReference { diameter: c.diameter, height: c.height, speed: c.speed });
        }
        sc.kind = match self.kind {
            ScenarioKindConfig::HoverNoise => ScenarioKind::HoverNoise,
            ScenarioKindConfig::Wind => ScenarioKind::Wind,
            ScenarioKindConfig::RefStep => ScenarioKind::RefStep,
            ScenarioKindConfig::AddedMass => ScenarioKind::AddedMass,
            ScenarioKindConfig::TrajectoryCircle => ScenarioKind::TrajectoryCircle,
        };
        sc.seed = run_seed.wrapping_add(self.seed.unwrap_or(0));
        sc.validate().map_err(|e| Error::Config(format!("scenarios[{index}]: {e}")))?;
        Ok(sc)
    }
}

/// Layouts to simulate when none is given on the command line, degrees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Vec<f64>>,
}

/// One case of a sweep; unset fields inherit from the top-level config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCase {
    pub name: String,
    pub payload: PayloadConfig,
    #[serde(rename = "N")]
    pub n_modules: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<QuadConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub payload: PayloadConfig,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(rename = "N")]
    pub n_modules: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rod_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_min: Option<f64>,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub optimization: OptimizationSection,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default)]
    pub layouts: LayoutsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepCase>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ProblemConfig {
    /// Strict parse; the error names the JSON path and position.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!(
                "at '{path}' (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn problem(&self) -> Result<Problem<f64>> {
        build_problem(&self.payload, self.quad_for(None), self.n_modules, self)
    }

    fn quad_for<'a>(&'a self, case: Option<&'a SweepCase>) -> &'a QuadConfig {
        case.and_then(|c| c.quad.as_ref()).unwrap_or(&self.quad)
    }

    pub fn case_problem(&self, case: &SweepCase) -> Result<Problem<f64>> {
        build_problem(&case.payload, self.quad_for(Some(case)), case.n_modules, self)
    }

    pub fn optimization_config(&self) -> Result<OptimizationConfig> {
        self.optimization.resolve(self.seed)
    }

    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let list: Vec<Scenario> = self
            .scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| s.resolve(i, self.seed))
            .collect::<Result<_>>()?;
        for (i, a) in list.iter().enumerate() {
            if a.name.is_empty() || a.name.contains(['/', '\\']) || a.name.starts_with('.') {
                return Err(Error::Config(format!("scenarios[{i}]: invalid name '{}'", a.name)));
            }
            if list[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Config(format!("scenarios: duplicate name '{}'", a.name)));
            }
        }
        Ok(list)
    }
}

fn build_problem(payload: &PayloadConfig, quad: &QuadConfig, n: usize, cfg: &ProblemConfig) -> Result<Problem<f64>> {
    if n == 0 {
        return Err(Error::Config("N must be ≥ 1".into()));
    }
    let payload = payload.resolve()?;
    let quad = quad.resolve()?;
    let mut problem = Problem::new(payload, quad, n).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(r) = cfg.rod_length {
        if !(r >= 0.0) {
            return Err(Error::Config("rod_length must be ≥ 0".into()));
        }
        problem.rod_length = r;
    }
    if let Some(d) = cfg.d_min {
        if !(d >= 0.0) {
            return Err(Error::Config("d_min must be ≥ 0".into()));
        }
        problem.d_min = d;
    }
    problem.weights = cfg.weights.resolve(n)?;
    Ok(problem)
}
