//! Levenberg–Marquardt nonlinear least squares with a finite-difference
//! Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative reduction of the sum of squares treated as convergence.
    pub ftol: f64,
    /// Relative parameter step treated as convergence.
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            ftol: 1e-14,
            xtol: 1e-12,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// s²·(JᵀJ)⁻¹ with s² = cost/(m − n); `None` when m ≤ n or JᵀJ is
    /// singular.
    pub covariance: Option<DMatrix<f64>>,
}

impl LmReport {
    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.covariance
            .as_ref()
            .map(|c| (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect())
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], m: usize) -> DMatrix<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; m];
    let mut rm = vec![0.0; m];
    for j in 0..n {
        let h = 1e-6 * x[j].abs().max(1e-3);
        xp[j] = x[j] + h;
        f(&xp, &mut rp);
        xp[j] = x[j] - h;
        f(&xp, &mut rm);
        xp[j] = x[j];
        let ok = rp.iter().chain(&rm).all(|v| v.is_finite());
        for i in 0..m {
            jac[(i, j)] = if ok {
                (rp[i] - rm[i]) / (2.0 * h)
            } else {
                (rp[i] - r0[i]) / h
            };
        }
    }
    jac
}

/// Minimises Σ rᵢ(x)² where `f(x, r)` fills the `m` residuals.
///
/// Steps are accepted only when they lower the cost, so the final cost never
/// exceeds the cost at `x0`.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], m: usize, opts: LmOptions) -> LmReport
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    f(&x, &mut r);
    let mut cost = sum_sq(&r);
    let initial_cost = cost;
    let mut lambda = opts.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;
    let mut trial_r = vec![0.0; m];

    if !cost.is_finite() {
        return LmReport { params: x, cost, initial_cost, iterations, converged, covariance: None };
    }

    while iterations < opts.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian(&f, &x, &r, m);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            f(&trial, &mut trial_r);
            let trial_cost = sum_sq(&trial_r);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel_drop = (cost - trial_cost) / cost;
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let small_step = step.norm() <= opts.xtol * (xnorm + opts.xtol);
                x = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_drop < opts.ftol || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step exists at any damping: a stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let covariance = if m > n {
        let jac = jacobian(&f, &x, &r, m);
        (jac.transpose() * &jac)
            .try_inverse()
            .map(|inv| inv * (cost / (m - n) as f64))
    } else {
        None
    };
    LmReport { params: x, cost, initial_cost, iterations, converged, covariance }
}
