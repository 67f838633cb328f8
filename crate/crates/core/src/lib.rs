//! Co-design of rigidly attached quadcopter thrust modules around a payload.
//!
//! Given a prismatic payload and `N` identical quadcopters, the crate finds
//! the placement angles that maximize the Mahalanobis margin between the
//! hover feedforward thrust and the actuator limits under the H2-optimal
//! (LQR) closed loop, and simulates the resulting vehicles.
//!
//! Numerical code is generic over [`Real`] (`f32`/`f64`); the `*64` aliases
//! below fix the scalar to `f64`, which is what the CLI and simulator use.
// comparisons like `!(a < b)` are written that way on purpose so NaN falls through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod model;
pub mod optimizer;
pub mod robustness;
pub mod scalar;
pub mod sim;

pub use nalgebra;

pub use control::{ControlSolution, WeightConfig};
pub use dynamics::{DisturbanceWrench, LinearModel, StateVector};
pub use error::{Error, Result};
pub use model::{Layout, MassProperties, ModuleMount, PayloadSpec, QuadSpec};
pub use optimizer::{OptimizationConfig, OptimizationResult, Problem};
pub use robustness::{Bound, RobustnessScore};
pub use scalar::Real;

pub type PayloadSpec64 = PayloadSpec<f64>;
pub type QuadSpec64 = QuadSpec<f64>;
pub type Layout64 = Layout<f64>;
pub type MassProperties64 = MassProperties<f64>;
pub type LinearModel64 = LinearModel<f64>;
pub type WeightConfig64 = WeightConfig<f64>;
pub type ControlSolution64 = ControlSolution<f64>;
pub type RobustnessScore64 = RobustnessScore<f64>;
pub type Problem64 = Problem<f64>;
pub type OptimizationResult64 = OptimizationResult<f64>;

pub type PayloadSpec32 = PayloadSpec<f32>;
pub type QuadSpec32 = QuadSpec<f32>;
pub type Layout32 = Layout<f32>;
pub type LinearModel32 = LinearModel<f32>;
pub type WeightConfig32 = WeightConfig<f32>;
pub type ControlSolution32 = ControlSolution<f32>;
pub type Problem32 = Problem<f32>;
