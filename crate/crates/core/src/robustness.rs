//! Saturation margin of the closed-loop thrust distribution: the minimum
//! Mahalanobis distance from the feedforward thrust to each of the 8N
//! saturation hyperplanes, each found by a small box-constrained QP.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::control::ControlSolution;
use crate::dynamics::LinearModel;
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Relative size of the diagonal loading added to a (possibly singular) input covariance.
pub const REGULARIZATION: f64 = 1e-8;

/// Largest KKT residual accepted from the hyperplane QP.
pub const KKT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bound {
    Lower,
    Upper,
}

impl Bound {
    pub fn as_str(self) -> &'static str {
        match self {
            Bound::Lower => "lower",
            Bound::Upper => "upper",
        }
    }
}

/// `Σ + ε I` with `ε = rel · trace(Σ) / n`, floored away from zero.
pub fn regularize<T: Real>(sigma: &DMatrix<T>, rel: T) -> DMatrix<T> {
    let n = sigma.nrows();
    let eps = (rel * sigma.trace() / lit(n as f64)).max(T::eps() * T::eps());
    let mut out = (sigma + sigma.transpose()) * lit::<T>(0.5);
    for i in 0..n {
        out[(i, i)] += eps;
    }
    out
}

/// Minimizer of one hyperplane problem.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplanePoint<T: Real> {
    pub distance: T,
    pub minimizer: DVector<T>,
    pub kkt_residual: T,
    pub iterations: usize,
}

fn select<T: Real>(m: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// `min_u (u − ū)ᵀ Σ⁻¹ (u − ū)` subject to `lower ≤ u ≤ upper` and `u_k = value`,
/// returned as a distance (square root of the optimum).
///
/// Primal active-set iteration in covariance form: with the fixed set `S`
/// pinned, the optimum over the free coordinates is the conditional mean
/// `ū_F + Σ_FS Σ_SS⁻¹ (u_S − ū_S)`, and `Σ_SS⁻¹ (u_S − ū_S)` are the bound
/// multipliers. Only `Σ_SS` is ever factored, so `Σ⁻¹` is never formed.
pub fn hyperplane_distance<T: Real>(
    u_bar: &DVector<T>,
    sigma: &DMatrix<T>,
    k: usize,
    value: T,
    lower: T,
    upper: T,
) -> Result<HyperplanePoint<T>> {
    let n = u_bar.len();
    if sigma.shape() != (n, n) || k >= n {
        return Err(Error::Dimension(format!(
            "hyperplane QP: ū has {n} entries, Σ is {:?}, k = {k}",
            sigma.shape()
        )));
    }
    if value < lower || value > upper {
        return Err(Error::InfeasibleConstraint { bound: to_f64(value) });
    }
    if u_bar.iter().any(|&u| u < lower || u > upper) {
        return Err(Error::InfeasibleConstraint { bound: to_f64(value) });
    }

    let mut x = u_bar.clone();
    x[k] = value;
    // fixed coordinates; index 0 is always the hyperplane coordinate
    let mut fixed: Vec<usize> = vec![k];
    let mut at_upper: Vec<bool> = vec![false];
    let max_iter = 20 * n + 20;

    for iter in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|i| !fixed.contains(i)).collect();
        let delta = DVector::from_iterator(fixed.len(), fixed.iter().map(|&i| x[i] - u_bar[i]));
        let s_ss = select(sigma, &fixed, &fixed);
        let chol = s_ss
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("covariance block not positive definite".into()))?;
        let y = chol.solve(&delta);
        let s_fs = select(sigma, &free, &fixed);
        let target = &s_fs * &y;

        // line search toward the conditional mean, stopping at the first bound hit
        let mut alpha = T::one();
        let mut blocking: Option<(usize, bool)> = None;
        for (j, &i) in free.iter().enumerate() {
            let goal = u_bar[i] + target[j];
            let step = goal - x[i];
            if goal > upper && step > T::zero() {
                let a = (upper - x[i]) / step;
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, true));
                }
            } else if goal < lower && step < T::zero() {
                let a = (lower - x[i]) / step;
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, false));
                }
            }
        }
        for (j, &i) in free.iter().enumerate() {
            let goal = u_bar[i] + target[j];
            let cur = x[i];
            x[i] = cur + alpha * (goal - cur);
        }
        if let Some((i, up)) = blocking {
            x[i] = if up { upper } else { lower };
            fixed.push(i);
            at_upper.push(up);
            continue;
        }

        // at the subproblem optimum: release the worst wrong-signed multiplier
        let scale = y.amax();
        let tol = scale * lit(1e-12);
        let mut worst: Option<(usize, T)> = None;
        for j in 1..fixed.len() {
            let violation = if at_upper[j] { y[j] } else { -y[j] };
            if violation > tol && worst.is_none_or(|(_, w)| violation > w) {
                worst = Some((j, violation));
            }
        }
        if let Some((j, _)) = worst {
            fixed.remove(j);
            at_upper.remove(j);
            continue;
        }

        let distance = delta.dot(&y).max(T::zero()).sqrt();
        let kkt_residual = kkt_residual(u_bar, sigma, &x, &fixed, &at_upper, &y, lower, upper);
        return Ok(HyperplanePoint { distance, minimizer: x, kkt_residual, iterations: iter + 1 });
    }
    Err(Error::NumericalFailure(format!(
        "hyperplane QP did not terminate in {max_iter} iterations"
    )))
}

/// Scaled KKT violation: stationarity `Σ g = u − ū` (g supported on the fixed
/// set), multiplier signs, and primal feasibility.
#[allow(clippy::too_many_arguments)]
fn kkt_residual<T: Real>(
    u_bar: &DVector<T>,
    sigma: &DMatrix<T>,
    x: &DVector<T>,
    fixed: &[usize],
    at_upper: &[bool],
    y: &DVector<T>,
    lower: T,
    upper: T,
) -> T {
    let n = u_bar.len();
    let mut g = DVector::zeros(n);
    for (j, &i) in fixed.iter().enumerate() {
        g[i] = y[j];
    }
    let dev = x - u_bar;
    let dev_scale = dev.amax().max(T::eps() * (upper - lower));
    let stationarity = (sigma * &g - &dev).amax() / dev_scale;

    let y_scale = y.amax().max(T::eps() * T::eps());
    let mut dual = T::zero();
    for j in 1..fixed.len() {
        let v = if at_upper[j] { y[j] } else { -y[j] };
        dual = dual.max(v / y_scale);
    }
    let width = upper - lower;
    let primal = x
        .iter()
        .map(|&v| (lower - v).max(v - upper).max(T::zero()))
        .fold(T::zero(), |a, b| a.max(b))
        / width;
    stationarity.max(dual).max(primal)
}

/// Saturation margin of one thrust distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessScore<T: Real> {
    pub d_min: T,
    pub active_component: usize,
    pub active_bound: Bound,
    pub minimizer: DVector<T>,
    /// Distances ordered `[k=0 lower, k=0 upper, k=1 lower, ...]`.
    pub per_hyperplane: Vec<T>,
    pub max_kkt_residual: T,
}

/// Minimum over all `2·len(ū)` saturation hyperplanes. `sigma` is used as given.
pub fn saturation_margin<T: Real>(
    u_bar: &DVector<T>,
    sigma: &DMatrix<T>,
    lower: T,
    upper: T,
) -> Result<RobustnessScore<T>> {
    let n = u_bar.len();
    let mut per = Vec::with_capacity(2 * n);
    let mut best: Option<(T, usize, Bound, DVector<T>)> = None;
    let mut max_kkt = T::zero();
    for k in 0..n {
        for (bound, value) in [(Bound::Lower, lower), (Bound::Upper, upper)] {
            let pt = hyperplane_distance(u_bar, sigma, k, value, lower, upper)?;
            if !(pt.kkt_residual <= lit(KKT_TOLERANCE)) {
                return Err(Error::NumericalFailure(format!(
                    "hyperplane QP KKT residual {:e} (k = {k}, {})",
                    to_f64(pt.kkt_residual),
                    bound.as_str()
                )));
            }
            max_kkt = max_kkt.max(pt.kkt_residual);
            per.push(pt.distance);
            if best.as_ref().is_none_or(|b| pt.distance < b.0) {
                best = Some((pt.distance, k, bound, pt.minimizer));
            }
        }
    }
    let (d_min, active_component, active_bound, minimizer) =
        best.ok_or_else(|| Error::Dimension("no thrust inputs".into()))?;
    Ok(RobustnessScore {
        d_min,
        active_component,
        active_bound,
        minimizer,
        per_hyperplane: per,
        max_kkt_residual: max_kkt,
    })
}

/// Layout cost: saturation margin of `N(ū, K* S2 K*ᵀ + εI)` against the thrust box.
pub fn layout_cost<T: Real>(model: &LinearModel<T>, sol: &ControlSolution<T>) -> Result<RobustnessScore<T>> {
    let sigma = regularize(&sol.sigma_u, lit(REGULARIZATION));
    saturation_margin(&model.u_bar, &sigma, model.thrust_min, model.thrust_max)
}

/// Monte-Carlo estimate of `P(lower ≤ u ≤ upper)` for `u ~ N(ū, Σ + εI)`.
pub fn feasibility_probability_oracle<T: Real>(
    u_bar: &DVector<T>,
    sigma: &DMatrix<T>,
    lower: T,
    upper: T,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be >= 1".into()));
    }
    let n = u_bar.len();
    let l = regularize(sigma, lit(REGULARIZATION))
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("covariance not positive definite".into()))?
        .l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inside = 0usize;
    let mut z = DVector::<T>::zeros(n);
    for _ in 0..n_samples {
        for zi in z.iter_mut() {
            let s: f64 = StandardNormal.sample(&mut rng);
            *zi = lit(s);
        }
        let u = u_bar + &l * &z;
        if u.iter().all(|&v| v >= lower && v <= upper) {
            inside += 1;
        }
    }
    Ok(inside as f64 / n_samples as f64)
}
