//! Continuous Lyapunov equation `A X + X Aᵀ + Q = 0`.

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Spectral abscissa (largest real part of the eigenvalues).
pub fn spectral_abscissa<T: Real>(a: &DMatrix<T>) -> Result<T> {
    let schur = Schur::try_new(a.clone(), T::eps(), 0)
        .ok_or_else(|| Error::NumericalFailure("Schur decomposition did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(T::min_value().unwrap(), |acc, r| acc.max(r)))
}

/// Frobenius norm of `A X + X Aᵀ + Q`.
pub fn lyapunov_residual<T: Real>(a: &DMatrix<T>, x: &DMatrix<T>, q: &DMatrix<T>) -> T {
    (a * x + x * a.transpose() + q).norm()
}

/// Bartels–Stewart: reduce `A` to real Schur form `U T Uᵀ`, then solve the
/// quasi-triangular equation one column block at a time.
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Lyapunov needs square A and Q of equal size, got {:?} and {:?}",
            a.shape(),
            q.shape()
        )));
    }
    let Some(schur) = Schur::try_new(a.clone(), T::eps(), 10_000) else {
        log::debug!("Schur failed to converge; using Kronecker Lyapunov solve");
        return solve_lyapunov_kronecker(a, q);
    };
    let (u, t) = schur.unpack();
    let f = u.transpose() * q * &u;

    let scale = t.norm();
    let is_block_start = |j: usize| j + 1 < n && t[(j + 1, j)].abs() > T::eps() * scale;

    // block boundaries of the quasi-triangular factor
    let mut blocks = Vec::new();
    let mut j = 0;
    while j < n {
        if is_block_start(j) {
            blocks.push((j, 2));
            j += 2;
        } else {
            blocks.push((j, 1));
            j += 1;
        }
    }

    let mut y = DMatrix::<T>::zeros(n, n);
    for &(j0, size) in blocks.iter().rev() {
        // rhs[:, a] = -F[:, j0+a] - Σ_{k ≥ j0+size} Y[:, k] T[j0+a, k]
        let mut rhs = DMatrix::<T>::zeros(n * size, 1);
        for a_ in 0..size {
            let col = j0 + a_;
            for i in 0..n {
                let mut acc = -f[(i, col)];
                for k in (j0 + size)..n {
                    acc -= y[(i, k)] * t[(col, k)];
                }
                rhs[(a_ * n + i, 0)] = acc;
            }
        }
        let mut m = DMatrix::<T>::zeros(n * size, n * size);
        for a_ in 0..size {
            for b_ in 0..size {
                let coeff = t[(j0 + a_, j0 + b_)];
                for i in 0..n {
                    m[(a_ * n + i, b_ * n + i)] += coeff;
                    if a_ == b_ {
                        for k in 0..n {
                            m[(a_ * n + i, b_ * n + k)] += t[(i, k)];
                        }
                    }
                }
            }
        }
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or(Error::NotHurwitz { abscissa: f64::NAN })?;
        for a_ in 0..size {
            for i in 0..n {
                y[(i, j0 + a_)] = sol[(a_ * n + i, 0)];
            }
        }
    }

    let x = &u * y * u.transpose();
    Ok((&x + x.transpose()) * lit::<T>(0.5))
}

/// Vectorized solve `(I ⊗ A + A ⊗ I) vec(X) = −vec(Q)`; O(n⁶), fine for n ≤ 12.
pub fn solve_lyapunov_kronecker<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let nn = n * n;
    let mut k = DMatrix::<T>::zeros(nn, nn);
    // column-major vec: X[i, j] -> i + n j
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for l in 0..n {
                // (A X)[i, j] = Σ_l A[i, l] X[l, j]
                k[(row, l + n * j)] += a[(i, l)];
                // (X Aᵀ)[i, j] = Σ_l X[i, l] A[j, l]
                k[(row, i + n * l)] += a[(j, l)];
            }
        }
    }
    let rhs = DMatrix::from_iterator(nn, 1, q.iter().map(|&v| -v));
    let sol = k.lu().solve(&rhs).ok_or_else(|| {
        Error::NumericalFailure("singular Lyapunov operator (eigenvalues sum to zero)".into())
    })?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * lit::<T>(0.5))
}

/// Steady-state covariance of `ẋ = A x + Bd w` for unit white noise `w`.
pub fn steady_state_covariance<T: Real>(a: &DMatrix<T>, bd: &DMatrix<T>) -> Result<DMatrix<T>> {
    let abscissa = spectral_abscissa(a)?;
    if !(abscissa < T::zero()) {
        return Err(Error::NotHurwitz { abscissa: to_f64(abscissa) });
    }
    solve_lyapunov(a, &(bd * bd.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn negative_identity() {
        let a = -DMatrix::<f64>::identity(12, 12);
        let x = solve_lyapunov(&a, &DMatrix::identity(12, 12)).unwrap();
        assert_relative_eq!(x, DMatrix::identity(12, 12) * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_case() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let x = solve_lyapunov(&a, &DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(x, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]), epsilon = 1e-12);
    }

    #[test]
    fn complex_pair_matches_kronecker() {
        // damped oscillator blocks produce 2x2 Schur blocks
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[-0.5, 3.0, 0.2, 0.0, -3.0, -0.5, 0.0, 1.0, 0.0, 0.0, -1.0, 2.0, 0.1, 0.0, -2.0, -0.7],
        );
        let q = DMatrix::from_row_slice(4, 4, &[2.0, 0.3, 0.0, 0.1, 0.3, 1.0, 0.2, 0.0, 0.0, 0.2, 1.5, 0.0, 0.1, 0.0, 0.0, 1.0]);
        let x = solve_lyapunov(&a, &q).unwrap();
        let xk = solve_lyapunov_kronecker(&a, &q).unwrap();
        assert_relative_eq!(x, xk, epsilon = 1e-11);
        assert!(lyapunov_residual(&a, &x, &q) < 1e-12);
    }

    #[test]
    fn unstable_matrix_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        assert!(matches!(
            steady_state_covariance(&a, &DMatrix::identity(2, 2)),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn single_precision_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0f32, -2.0]));
        let x = solve_lyapunov(&a, &DMatrix::identity(2, 2)).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-6 && (x[(1, 1)] - 0.25).abs() < 1e-6);
    }
}
