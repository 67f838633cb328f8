//! Continuous algebraic Riccati equation
//! `Aᵀ S + S A − S B R⁻¹ Bᵀ S + Q = 0`.
//!
//! The stabilizing solution spans the stable invariant subspace of the
//! Hamiltonian `H = [A, −G; −Q, −Aᵀ]`, `G = B R⁻¹ Bᵀ`. That subspace is
//! extracted from the matrix sign function of `H` (scaled Newton iteration),
//! then polished with Newton–Kleinman steps until the residual stops
//! improving.

use nalgebra::DMatrix;

use super::lyapunov::{solve_lyapunov, spectral_abscissa};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Relative residual `‖Aᵀ S + S A − S G S + Q‖_F / ‖Q‖_F` (absolute if `Q = 0`).
pub fn care_residual<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    s: &DMatrix<T>,
) -> T {
    let g = match r.clone().cholesky() {
        Some(ch) => b * ch.solve(&b.transpose()),
        None => return T::max_value().unwrap(),
    };
    let res = a.transpose() * s + s * a - s * g * s + q;
    let qn = q.norm();
    if qn > T::zero() {
        res.norm() / qn
    } else {
        res.norm()
    }
}

/// Certification threshold on the relative residual.
pub fn certification_tolerance<T: Real>() -> T {
    lit::<T>(1e-8).max(T::eps() * lit(1e3))
}

fn sign_function<T: Real>(h: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = h.nrows();
    let tol = T::eps() * lit(100.0) * lit(n as f64);
    let mut z = h.clone();
    let mut converged_once = false;
    for _ in 0..100 {
        let lu = z.clone().lu();
        // determinant scaling |det Z|^(-1/n), via the log of the LU diagonal
        let log_det: T = lu.u().diagonal().iter().map(|d| d.abs().ln()).fold(T::zero(), |a, b| a + b);
        let inv = lu.try_inverse().ok_or_else(|| {
            Error::NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis".into())
        })?;
        let c = (-log_det / lit(n as f64)).exp();
        let c = if c.is_finite() && c > T::zero() { c } else { T::one() };
        let next = (&z * c + inv / c) * lit::<T>(0.5);
        let delta = (&next - &z).norm() / next.norm();
        z = next;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NotStabilizable("sign iteration diverged".into()));
        }
        if delta <= tol.sqrt() {
            // quadratic convergence: one more step lands at machine precision
            if converged_once || delta <= tol {
                return Ok(z);
            }
            converged_once = true;
        }
    }
    Err(Error::NotStabilizable("sign iteration did not converge".into()))
}

fn kleinman_step<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    r_inv_bt: &DMatrix<T>,
    s: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let k = r_inv_bt * s;
    let af = a - b * &k;
    let rhs = q + k.transpose() * r * &k;
    solve_lyapunov(&af.transpose(), &rhs)
}

/// Stabilizing solution of the CARE.
pub fn solve_care<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "CARE shapes A{:?} B{:?} Q{:?} R{:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Dimension("R must be symmetric positive definite".into()))?;
    let r_inv_bt = r_chol.solve(&b.transpose());
    let g = b * &r_inv_bt;

    let mut h = DMatrix::<T>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let w = sign_function(&h)?;
    // (W + I) annihilates the stable subspace span[I; S]:
    // [W12; W22 + I] S = −[W11 + I; W21]
    let mut lhs = DMatrix::<T>::zeros(2 * n, n);
    let mut rhs = DMatrix::<T>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + DMatrix::<T>::identity(n, n)));
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + DMatrix::<T>::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));

    let qr = lhs.qr();
    let qt_rhs = qr.q().transpose() * rhs;
    let mut s = qr
        .r()
        .solve_upper_triangular(&qt_rhs)
        .ok_or_else(|| Error::NotStabilizable("stable subspace is not a graph over the state".into()))?;
    s = (&s + s.transpose()) * lit::<T>(0.5);

    let closed = a - &g * &s;
    let abscissa = spectral_abscissa(&closed)?;
    if !(abscissa < T::zero()) {
        return Err(Error::NotStabilizable(format!(
            "closed-loop spectral abscissa {:e}",
            to_f64(abscissa)
        )));
    }

    let mut best_res = care_residual(a, b, q, r, &s);
    for _ in 0..3 {
        let Ok(next) = kleinman_step(a, b, q, r, &r_inv_bt, &s) else {
            break;
        };
        let res = care_residual(a, b, q, r, &next);
        if res < best_res {
            s = next;
            best_res = res;
        } else {
            break;
        }
    }

    if !(best_res <= certification_tolerance()) {
        return Err(Error::IllConditioned { residual: to_f64(best_res) });
    }
    Ok(s)
}
