//! H2-optimal (LQR) state feedback, closed-loop covariance and H2 cost.

pub mod care;
pub mod lyapunov;

use nalgebra::DMatrix;

use crate::dynamics::{LinearModel, DISTURBANCE_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

pub use care::{care_residual, solve_care};
pub use lyapunov::{lyapunov_residual, solve_lyapunov, spectral_abscissa, steady_state_covariance};

/// Performance output `z = C x' + D u'` and the disturbance weighting used for synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightConfig<T: Real> {
    /// (4 + 4N) × 12
    pub c: DMatrix<T>,
    /// (4 + 4N) × 4N
    pub d: DMatrix<T>,
    /// Fixed 12 × 6 disturbance input replacing the model's wrench Jacobian.
    pub bd_override: Option<DMatrix<T>>,
    /// Per-channel disturbance gains `[fx, fy, fz, tx, ty, tz]`.
    pub bd_gain: [T; DISTURBANCE_DIM],
}

impl<T: Real> WeightConfig<T> {
    /// Default weighting for `n_modules` vehicles: horizontal position 0.5,
    /// altitude 10, yaw 50, identity on every thrust, and the six wrench
    /// disturbance channels weighted equally.
    pub fn reference(n_modules: usize) -> Self {
        let n_in = 4 * n_modules;
        let mut c = DMatrix::zeros(4 + n_in, STATE_DIM);
        c[(0, 0)] = lit(0.5);
        c[(1, 1)] = lit(0.5);
        c[(2, 2)] = lit(10.0);
        c[(3, 8)] = lit(50.0);
        let mut d = DMatrix::zeros(4 + n_in, n_in);
        for k in 0..n_in {
            d[(4 + k, k)] = T::one();
        }
        Self { c, d, bd_override: None, bd_gain: [T::one(); DISTURBANCE_DIM] }
    }

    /// Unit entries on the velocity and angular-rate rows: each disturbance
    /// channel acts directly as an acceleration.
    pub fn unit_disturbance_pattern() -> DMatrix<T> {
        let mut bd = DMatrix::zeros(STATE_DIM, DISTURBANCE_DIM);
        for (row, col) in [(3, 0), (4, 1), (5, 2), (9, 3), (10, 4), (11, 5)] {
            bd[(row, col)] = T::one();
        }
        bd
    }

    pub fn n_inputs(&self) -> usize {
        self.d.ncols()
    }

    /// Effective disturbance input `Bd · diag(gain)`, where `Bd` is the
    /// override if set and the model's wrench Jacobian otherwise.
    pub fn disturbance_input(&self, model_bd: &DMatrix<T>) -> DMatrix<T> {
        let mut bd = self.bd_override.clone().unwrap_or_else(|| model_bd.clone());
        for (j, &g) in self.bd_gain.iter().enumerate() {
            bd.column_mut(j).scale_mut(g);
        }
        bd
    }

    pub fn validate(&self, n_inputs: usize) -> Result<()> {
        let rows = self.c.nrows();
        if self.c.ncols() != STATE_DIM || self.d.shape() != (rows, n_inputs) {
            return Err(Error::Dimension(format!(
                "weights C{:?} D{:?} incompatible with {} inputs",
                self.c.shape(),
                self.d.shape(),
                n_inputs
            )));
        }
        if let Some(bd) = &self.bd_override {
            if bd.shape() != (STATE_DIM, DISTURBANCE_DIM) {
                return Err(Error::Dimension(format!("Bd must be 12x6, got {:?}", bd.shape())));
            }
        }
        if self.bd_gain.iter().any(|g| !(*g > T::zero())) {
            return Err(Error::Config("disturbance gains must be positive".into()));
        }
        let dtd = self.d.transpose() * &self.d;
        if dtd.cholesky().is_none() {
            return Err(Error::Config("DᵀD must be invertible".into()));
        }
        let cross = self.c.transpose() * &self.d;
        if cross.amax() > T::eps() * (self.c.norm() * self.d.norm()) {
            return Err(Error::Config(
                "C and D must act on disjoint output rows (CᵀD = 0)".into(),
            ));
        }
        Ok(())
    }
}

/// Everything the co-design loop needs from one synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution<T: Real> {
    pub s1: DMatrix<T>,
    pub k_star: DMatrix<T>,
    pub s2: DMatrix<T>,
    pub sigma_u: DMatrix<T>,
    pub j_star: T,
    pub a_f: DMatrix<T>,
}

/// Optimal gain `K* = (DᵀD)⁻¹ Bᵀ S1` and the Riccati solution `S1`.
pub fn lqr_gain<T: Real>(model: &LinearModel<T>, w: &WeightConfig<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    w.validate(model.n_inputs())?;
    let q = w.c.transpose() * &w.c;
    let r = w.d.transpose() * &w.d;
    let s1 = solve_care(&model.a, &model.b, &q, &r)?;
    let k = r
        .cholesky()
        .ok_or_else(|| Error::Config("DᵀD must be invertible".into()))?
        .solve(&(model.b.transpose() * &s1));
    Ok((k, s1))
}

/// Solves `A_f S2 + S2 A_fᵀ + Bd Bdᵀ = 0` for `A_f = A − B K`.
pub fn closed_loop_covariance<T: Real>(
    model: &LinearModel<T>,
    k_star: &DMatrix<T>,
    bd: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let a_f = &model.a - &model.b * k_star;
    steady_state_covariance(&a_f, bd)
}

/// `J* = trace(Bdᵀ S1 Bd)`.
pub fn h2_cost<T: Real>(bd: &DMatrix<T>, s1: &DMatrix<T>) -> T {
    (bd.transpose() * s1 * bd).trace()
}

/// Covariance of `u' = −K* x'`: `K* S2 K*ᵀ`.
pub fn input_covariance<T: Real>(k_star: &DMatrix<T>, s2: &DMatrix<T>) -> DMatrix<T> {
    let s = k_star * s2 * k_star.transpose();
    (&s + s.transpose()) * lit::<T>(0.5)
}

/// Full synthesis: gain, closed loop, state/input covariance and H2 cost.
pub fn synthesize<T: Real>(model: &LinearModel<T>, w: &WeightConfig<T>) -> Result<ControlSolution<T>> {
    let (k_star, s1) = lqr_gain(model, w)?;
    let a_f = &model.a - &model.b * &k_star;
    let abscissa = spectral_abscissa(&a_f)?;
    if !(abscissa < T::zero()) {
        return Err(Error::NotHurwitz { abscissa: to_f64(abscissa) });
    }
    let bd = w.disturbance_input(&model.bd);
    let s2 = solve_lyapunov(&a_f, &(&bd * bd.transpose()))?;
    let sigma_u = input_covariance(&k_star, &s2);
    let j_star = h2_cost(&bd, &s1);
    Ok(ControlSolution { s1, k_star, s2, sigma_u, j_star, a_f })
}

/// Relative residuals `(Riccati, Lyapunov)` of a solution, for certification.
pub fn solution_residuals<T: Real>(
    model: &LinearModel<T>,
    w: &WeightConfig<T>,
    sol: &ControlSolution<T>,
) -> (T, T) {
    let q = w.c.transpose() * &w.c;
    let r = w.d.transpose() * &w.d;
    let ric = care_residual(&model.a, &model.b, &q, &r, &sol.s1);
    let bd = w.disturbance_input(&model.bd);
    let bbt = &bd * bd.transpose();
    let lyap = lyapunov_residual(&sol.a_f, &sol.s2, &bbt) / bbt.norm();
    (ric, lyap)
}
