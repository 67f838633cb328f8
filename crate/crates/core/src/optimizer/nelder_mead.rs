//! Nelder–Mead simplex minimizer (Lagarias et al. variant).
//!
//! Objective values of `+∞` are allowed and simply rank worst, so callers
//! can encode infeasibility without penalty terms.

use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions<T> {
    pub reflection: T,
    pub expansion: T,
    pub contraction: T,
    pub shrink: T,
    pub max_iters: usize,
    /// Simplex diameter (∞-norm distance of every vertex to the best one).
    pub xtol: T,
    /// Spread of objective values across the simplex.
    pub ftol: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            reflection: T::one(),
            expansion: lit(2.0),
            contraction: lit(0.5),
            shrink: lit(0.5),
            max_iters: 2000,
            xtol: lit(1e-4),
            ftol: lit(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult<T> {
    pub x: Vec<T>,
    pub f: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from the axis-aligned simplex `x0 + step·eᵢ`.
/// `on_iter` receives `(iteration, best value)` after every iteration.
pub fn minimize<T, F, C>(
    mut f: F,
    x0: &[T],
    step: T,
    opts: &NelderMeadOptions<T>,
    mut on_iter: C,
) -> NelderMeadResult<T>
where
    T: Real,
    F: FnMut(&[T]) -> T,
    C: FnMut(usize, T),
{
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[T], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.partial_cmp(&v).is_none() {
            T::max_value().unwrap()
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<T> = simplex.iter().map(|x| eval(x, &mut evaluations)).collect();

    let order = |values: &[T]| {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        idx
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let idx = order(&values);
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let best = &simplex[0];
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(best).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), |a, b| a.max(b));
        let spread = (values[n] - values[0]).abs();
        if diameter <= opts.xtol && spread <= opts.ftol {
            converged = true;
            break;
        }
        iterations += 1;

        let inv_n = T::one() / lit(n as f64);
        let centroid: Vec<T> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).fold(T::zero(), |a, b| a + b) * inv_n)
            .collect();
        let along = |t: T, from: &[T]| -> Vec<T> {
            centroid.iter().zip(from).map(|(&c, &w)| c + t * (c - w)).collect()
        };

        let worst = simplex[n].clone();
        let reflected = along(opts.reflection, &worst);
        let fr = eval(&reflected, &mut evaluations);

        if fr < values[0] {
            let expanded = along(opts.reflection * opts.expansion, &worst);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (candidate, fc, accept) = if fr < values[n] {
                let outside = along(opts.reflection * opts.contraction, &worst);
                let fc = eval(&outside, &mut evaluations);
                let ok = fc <= fr;
                (outside, fc, ok)
            } else {
                let inside = along(-opts.contraction, &worst);
                let fc = eval(&inside, &mut evaluations);
                let ok = fc < values[n];
                (inside, fc, ok)
            };
            if accept {
                simplex[n] = candidate;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    let shrunk: Vec<T> = simplex[i]
                        .iter()
                        .zip(&best)
                        .map(|(&x, &b)| b + opts.shrink * (x - b))
                        .collect();
                    values[i] = eval(&shrunk, &mut evaluations);
                    simplex[i] = shrunk;
                }
            }
        }
        let best_now = values.iter().cloned().fold(values[0], |a, b| a.min(b));
        on_iter(iterations, best_now);
    }

    let idx = order(&values);
    NelderMeadResult {
        x: simplex[idx[0]].clone(),
        f: values[idx[0]],
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions { max_iters: 5000, xtol: 1e-8, ftol: 1e-12, ..Default::default() };
        let r = minimize(f, &[-1.2, 1.0], 0.5, &opts, |_, _| {});
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::INFINITY } else { (x[0] - 0.3).powi(2) + x[1] * x[1] };
        let r = minimize(f, &[1.0, 1.0], 0.5, &NelderMeadOptions::default(), |_, _| {});
        assert!((r.x[0] - 0.3).abs() < 1e-3);
    }

    #[test]
    fn best_value_never_increases() {
        let f = |x: &[f64]| x.iter().map(|v| (v.sin() + 0.1 * v).abs()).sum::<f64>();
        let mut trace = Vec::new();
        minimize(f, &[2.0, -1.0, 0.5], 0.3, &NelderMeadOptions::default(), |_, b| trace.push(b));
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
