//! Levenberg-Marquardt on an unconstrained parameter vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when `max |J^T r|` falls below this.
    pub gradient_tol: f64,
    /// Stop when an accepted step changes the SSE by less than this fraction.
    pub relative_sse_tol: f64,
    /// Central-difference step relative to `max(|u|, 1)`.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 500,
            gradient_tol: 1e-10,
            relative_sse_tol: 1e-12,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    SseChange,
    /// No damping level produced a decrease; the SSE change is zero.
    Stalled,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub u: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub termination: Termination,
}

const MU_START: f64 = 1e-3;
const MU_MAX: f64 = 1e16;
const DIAG_FLOOR: f64 = 1e-30;

fn sse(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Central-difference Jacobian, one column per parameter, falling back to
/// a one-sided difference where the residuals cannot be evaluated.
pub(crate) fn jacobian<F>(f: &F, u: &[f64], r0: &[f64], step: f64) -> Result<Matrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let m = r0.len();
    let cols: Vec<Vec<f64>> = (0..u.len())
        .into_par_iter()
        .map(|j| {
            let h = step * u[j].abs().max(1.0);
            let shifted = |d: f64| {
                let mut v = u.to_vec();
                v[j] += d;
                f(&v)
            };
            match (shifted(h), shifted(-h)) {
                (Ok(p), Ok(q)) => Ok(p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * h)).collect()),
                (Ok(p), Err(_)) => Ok(p.iter().zip(r0).map(|(a, b)| (a - b) / h).collect()),
                (Err(_), Ok(q)) => Ok(r0.iter().zip(&q).map(|(a, b)| (a - b) / h).collect()),
                (Err(e), Err(_)) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_fn(m, u.len(), |i, j| cols[j][i]))
}

/// Minimizes `|f(u)|^2` from `u0`. Only strictly decreasing steps are
/// accepted, so the final SSE never exceeds the initial one.
pub(crate) fn minimize<F>(f: F, u0: Vec<f64>, opts: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let p = u0.len();
    let mut u = u0;
    let mut r = f(&u)?;
    let mut cost = sse(&r);
    let mut mu = MU_START;
    let done = |u: Vec<f64>, sse: f64, iterations: usize, termination| LmOutcome {
        u,
        sse,
        iterations,
        termination,
    };
    if p == 0 || cost == 0.0 {
        return Ok(done(u, cost, 0, Termination::Gradient));
    }
    for iter in 0..opts.max_iterations {
        let j = jacobian(&f, &u, &r, opts.fd_step)?;
        let jt = j.transpose();
        let a = jt.matmul(&j)?;
        let g = jt.mul_vec(&r)?;
        if g.iter().all(|x| x.abs() < opts.gradient_tol) {
            return Ok(done(u, cost, iter, Termination::Gradient));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularNormalEquations);
        }
        let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
        let mut solved = false;
        loop {
            if mu > MU_MAX {
                if !solved {
                    return Err(Error::SingularNormalEquations);
                }
                return Ok(done(u, cost, iter + 1, Termination::Stalled));
            }
            let mut damped = a.clone();
            for k in 0..p {
                damped[(k, k)] += mu * a[(k, k)].max(DIAG_FLOOR);
            }
            let Some(delta) = damped.solve_spd(&neg_g)? else {
                mu *= 10.0;
                continue;
            };
            solved = true;
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let accepted = match f(&trial) {
                Ok(rt) => {
                    let ct = sse(&rt);
                    (ct.is_finite() && ct < cost).then_some((rt, ct))
                }
                Err(_) => None,
            };
            match accepted {
                Some((rt, ct)) => {
                    let change = (cost - ct) / cost;
                    u = trial;
                    r = rt;
                    cost = ct;
                    mu = (mu / 10.0).max(1e-15);
                    if cost == 0.0 || change < opts.relative_sse_tol {
                        return Ok(done(u, cost, iter + 1, Termination::SseChange));
                    }
                    break;
                }
                None => mu *= 10.0,
            }
        }
    }
    Ok(done(u, cost, opts.max_iterations, Termination::MaxIterations))
}

/// `s^2 (J^T J)^{-1}` with `s^2 = sse / (m - p)`; `None` when the normal
/// matrix is singular or there are no spare degrees of freedom.
pub(crate) fn gauss_newton_covariance(j: &Matrix<f64>, sse: f64) -> Result<Option<Matrix<f64>>> {
    let (m, p) = (j.rows(), j.cols());
    if m <= p || p == 0 {
        return Ok(None);
    }
    let jt = j.transpose();
    let Some(inv) = jt.matmul(j)?.inverse()? else {
        return Ok(None);
    };
    let s2 = sse / (m - p) as f64;
    Ok(Some(Matrix::from_fn(p, p, |a, b| s2 * inv[(a, b)])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_an_exponential_decay() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let obs: Vec<f64> = t.iter().map(|x| 2.0 * (-1.5 * x).exp()).collect();
        let f = |u: &[f64]| Ok(t.iter().zip(&obs).map(|(x, o)| u[0] * (-u[1] * x).exp() - o).collect());
        let out = minimize(f, vec![1.0, 0.5], &LmOptions::default()).unwrap();
        assert!(out.termination.converged());
        assert!(
            (out.u[0] - 2.0).abs() < 1e-8 && (out.u[1] - 1.5).abs() < 1e-8,
            "{:?}",
            out.u
        );
    }

    #[test]
    fn rosenbrock_as_least_squares() {
        let f = |u: &[f64]| Ok(vec![10.0 * (u[1] - u[0] * u[0]), 1.0 - u[0]]);
        let out = minimize(f, vec![-1.2, 1.0], &LmOptions::default()).unwrap();
        assert!((out.u[0] - 1.0).abs() < 1e-6 && (out.u[1] - 1.0).abs() < 1e-6);
        assert!(out.sse < 1e-12);
    }

    #[test]
    fn iteration_budget_is_reported() {
        let f = |u: &[f64]| Ok(vec![10.0 * (u[1] - u[0] * u[0]), 1.0 - u[0]]);
        let opts = LmOptions {
            max_iterations: 2,
            ..LmOptions::default()
        };
        let out = minimize(f, vec![-1.2, 1.0], &opts).unwrap();
        assert_eq!(out.termination, Termination::MaxIterations);
        assert!(out.sse < 24.2 * 1.0001);
    }

    #[test]
    fn covariance_of_a_line_fit() {
        // y = a + b x at x = 0, 1, 2 with unit residual variance.
        let j = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let c = gauss_newton_covariance(&j, 1.0).unwrap().unwrap();
        // (J^T J)^{-1} = [[5, -3], [-3, 3]] / 6.
        assert!((c[(0, 0)] - 5.0 / 6.0).abs() < 1e-14);
        assert!((c[(0, 1)] + 0.5).abs() < 1e-14);
        assert!(gauss_newton_covariance(&Matrix::from_rows(&[vec![1.0]]).unwrap(), 1.0)
            .unwrap()
            .is_none());
    }
}
