use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-9;
pub const GRADIENT_TOLERANCE: f64 = 1e-12;

/// Raw optimiser output in the internal parameterisation.
#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    /// s²(JᵀJ)⁻¹ with s² = RSS/(m − n); `None` when JᵀJ is singular.
    pub covariance: Option<DMatrix<f64>>,
    pub rss: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

/// Damped Gauss–Newton (Levenberg–Marquardt with Marquardt scaling).
///
/// `eval` returns the residual vector and its Jacobian at a parameter vector.
/// Non-finite residuals reject a step. Converges when the relative step falls
/// below 1e-9 or the gradient norm ‖Jᵀr‖ below 1e-12.
pub fn levenberg_marquardt<F>(mut eval: F, p0: DVector<f64>) -> LmOutcome
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let n = p0.len();
    let mut p = p0;
    let (mut r, mut j) = eval(&p);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut message = format!("reached {MAX_ITERATIONS} iterations");
    let mut iterations = 0;

    if !cost.is_finite() {
        return LmOutcome {
            covariance: None,
            rss: cost,
            gradient_norm: f64::NAN,
            iterations: 0,
            converged: false,
            message: "residuals not finite at the starting point".into(),
            params: p,
        };
    }

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.norm() < GRADIENT_TOLERANCE {
            converged = true;
            message = "gradient norm below tolerance".into();
            break;
        }
        let diag = DVector::from_fn(n, |i, _| jtj[(i, i)].max(1e-300));
        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e30 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &p + &delta;
            small_step = delta.norm() < STEP_TOLERANCE * (p.norm() + STEP_TOLERANCE);
            let (r_new, j_new) = eval(&trial);
            let new_cost = r_new.norm_squared();
            if new_cost.is_finite() && new_cost <= cost {
                p = trial;
                r = r_new;
                j = j_new;
                cost = new_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            if small_step {
                break;
            }
            lambda *= 4.0;
        }
        if small_step {
            converged = true;
            message = "relative step below tolerance".into();
            break;
        }
        if !accepted {
            message = "damping exhausted without reducing the cost".into();
            break;
        }
    }

    let jtj = j.transpose() * &j;
    let gradient_norm = (j.transpose() * &r).norm();
    let m = r.len();
    let dof = if m > n { (m - n) as f64 } else { 1.0 };
    let covariance = jtj.try_inverse().map(|inv| inv * (cost / dof));
    LmOutcome {
        params: p,
        covariance,
        rss: cost,
        gradient_norm,
        iterations,
        converged,
        message,
    }
}

/// One fitted parameter in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub unit: String,
    pub estimate: f64,
    /// Asymptotic standard error; `None` when not identifiable.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    pub residual_sum_of_squares: f64,
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub message: String,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Estimate of `name`; panics on an unknown name.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("fit has no parameter `{name}`"))
            .estimate
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serialises")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

/// How an internal parameter maps to its reported value.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Transform {
    Identity,
    /// Internal value is ln(estimate).
    Log,
    /// Reported value is |internal|.
    Abs,
}

pub(crate) fn build_result(outcome: &LmOutcome, spec: &[(String, &str, Transform)]) -> FitResult {
    let parameters = spec
        .iter()
        .enumerate()
        .map(|(i, (name, unit, tr))| {
            let x = outcome.params[i];
            let var = outcome
                .covariance
                .as_ref()
                .map(|c| c[(i, i)])
                .filter(|v| v.is_finite() && *v >= 0.0);
            let (estimate, se) = match tr {
                Transform::Identity => (x, var.map(f64::sqrt)),
                Transform::Abs => (x.abs(), var.map(f64::sqrt)),
                Transform::Log => (x.exp(), var.map(|v| x.exp() * v.sqrt())),
            };
            FitParameter {
                name: name.clone(),
                unit: unit.to_string(),
                estimate,
                std_error: se,
            }
        })
        .collect();
    FitResult {
        parameters,
        residual_sum_of_squares: outcome.rss,
        residual_norm: outcome.rss.sqrt(),
        gradient_norm: outcome.gradient_norm,
        converged: outcome.converged,
        iterations: outcome.iterations,
        message: outcome.message.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_as_least_squares() {
        let out = levenberg_marquardt(
            |p| {
                let r = DVector::from_vec(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]);
                let j = DMatrix::from_row_slice(2, 2, &[-20.0 * p[0], 10.0, -1.0, 0.0]);
                (r, j)
            },
            DVector::from_vec(vec![-1.2, 1.0]),
        );
        assert!(out.converged, "{}", out.message);
        assert!((out.params[0] - 1.0).abs() < 1e-9);
        assert!((out.params[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn linear_regression_standard_errors() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let noise = [0.1, -0.2, 0.05, 0.0, 0.3, -0.1, -0.25, 0.15, 0.2, -0.05];
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 2.0 + 0.5 * x + noise[i % 10]).collect();
        let out = levenberg_marquardt(
            |p| {
                let r = DVector::from_fn(xs.len(), |i, _| p[0] + p[1] * xs[i] - ys[i]);
                let j = DMatrix::from_fn(xs.len(), 2, |i, k| if k == 0 { 1.0 } else { xs[i] });
                (r, j)
            },
            DVector::from_vec(vec![0.0, 0.0]),
        );
        assert!(out.converged);
        let cov = out.covariance.unwrap();
        // closed form: se(slope)² = s² / Σ(x − x̄)²
        let mean = xs.iter().sum::<f64>() / 20.0;
        let sxx: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let s2 = out.rss / 18.0;
        assert!((cov[(1, 1)] - s2 / sxx).abs() < 1e-12 * cov[(1, 1)].max(1.0));
    }
}
