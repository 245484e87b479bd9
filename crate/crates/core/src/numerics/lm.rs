//! Levenberg-Marquardt nonlinear least squares with a derivative-free
//! interface: the Jacobian is taken by forward differences, bounds are
//! enforced by clamping, and damping follows the classic accept/reject
//! schedule.

use super::models::ModelSpec;
use super::NumericsError;

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e14;
const COST_RTOL: f64 = 1e-10;
const GRAD_TOL: f64 = 1e-12;
const MAX_ITER: usize = 400;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Parameter standard errors from the scaled inverse normal matrix;
    /// infinite when the normal equations are singular.
    pub stderr: Vec<f64>,
    /// Final sum of squared residuals.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Accepted cost after each iteration, monotone non-increasing.
    pub cost_trace: Vec<f64>,
    /// Diagnostic set when the fit stopped without converging.
    pub message: Option<String>,
}

pub fn levenberg_marquardt(
    model: &ModelSpec,
    x0: &[f64],
    xs: &[f64],
    ys: &[f64],
) -> Result<FitResult, NumericsError> {
    let m = model.n_params;
    if x0.len() != m {
        return Err(NumericsError::Precondition(format!(
            "x0 has {} entries, model has {m} parameters",
            x0.len()
        )));
    }
    if xs.len() != ys.len() {
        return Err(NumericsError::Precondition(format!(
            "x and y lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < m {
        return Err(NumericsError::TooFewPoints { needed: m, got: n });
    }

    let clamp = |p: &mut [f64]| {
        if let Some(bounds) = &model.bounds {
            for (v, (lo, hi)) in p.iter_mut().zip(bounds) {
                *v = v.clamp(*lo, *hi);
            }
        }
    };

    let mut params = x0.to_vec();
    clamp(&mut params);
    let mut residuals = model.residuals(&params, xs, ys);
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(NumericsError::NonFiniteResidual);
    }
    let mut cost: f64 = residuals.iter().map(|r| r * r).sum();
    let mut cost_trace = vec![cost];

    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut message = None;
    let mut iterations = 0;

    for _ in 0..MAX_ITER {
        iterations += 1;
        let jac = jacobian(model, &params, xs, ys, &residuals);
        let grad = mat_t_vec(&jac, &residuals, m);
        let grad_norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < GRAD_TOL {
            converged = true;
            break;
        }
        let jtj = normal_matrix(&jac, m);

        // Damping escalation: retry with larger lambda until a step is
        // accepted or the damping budget is exhausted.
        let mut accepted = false;
        loop {
            let mut damped = jtj.clone();
            for j in 0..m {
                let d = jtj[j * m + j];
                damped[j * m + j] = d + lambda * if d > 0.0 { d } else { 1.0 };
            }
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            match solve(&damped, &rhs, m) {
                Some(step) => {
                    let mut trial: Vec<f64> =
                        params.iter().zip(&step).map(|(p, s)| p + s).collect();
                    clamp(&mut trial);
                    let trial_res = model.residuals(&trial, xs, ys);
                    let trial_cost: f64 = trial_res.iter().map(|r| r * r).sum();
                    if trial_cost.is_finite() && trial_cost < cost {
                        let rel_decrease = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                        params = trial;
                        residuals = trial_res;
                        cost = trial_cost;
                        cost_trace.push(cost);
                        lambda = (lambda / 10.0).max(1e-15);
                        accepted = true;
                        if rel_decrease < COST_RTOL {
                            converged = true;
                        }
                        break;
                    }
                    lambda *= 10.0;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        message =
                            Some("singular normal equations persisted after damping".into());
                        break;
                    }
                    continue;
                }
            }
            if lambda > LAMBDA_MAX {
                // No step improves the cost: the relative decrease is zero,
                // which satisfies the convergence criterion.
                converged = true;
                break;
            }
        }
        if message.is_some() {
            break;
        }
        if converged || !accepted {
            break;
        }
    }

    let jac = jacobian(model, &params, xs, ys, &residuals);
    let stderr = standard_errors(&jac, m, n, cost);
    Ok(FitResult {
        params,
        stderr,
        cost,
        converged: converged && message.is_none(),
        iterations,
        cost_trace,
        message,
    })
}

/// Forward-difference Jacobian with step `1e-6 * max(|p|, 1)`; the step
/// flips to a backward difference when it would leave the bound box.
fn jacobian(
    model: &ModelSpec,
    params: &[f64],
    xs: &[f64],
    ys: &[f64],
    residuals: &[f64],
) -> Vec<f64> {
    let m = model.n_params;
    let n = xs.len();
    let mut jac = vec![0.0; n * m];
    let mut perturbed = params.to_vec();
    for j in 0..m {
        let mut h = 1e-6 * params[j].abs().max(1.0);
        if let Some(bounds) = &model.bounds {
            let (lo, hi) = bounds[j];
            if params[j] + h > hi && params[j] - h >= lo {
                h = -h;
            }
        }
        perturbed[j] = params[j] + h;
        for i in 0..n {
            let r = model.eval(&perturbed, xs[i]) - ys[i];
            jac[i * m + j] = (r - residuals[i]) / h;
        }
        perturbed[j] = params[j];
    }
    jac
}

fn mat_t_vec(jac: &[f64], v: &[f64], m: usize) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            out[j] += jac[i * m + j] * v[i];
        }
    }
    out
}

fn normal_matrix(jac: &[f64], m: usize) -> Vec<f64> {
    let n = jac.len() / m;
    let mut jtj = vec![0.0; m * m];
    for i in 0..n {
        for a in 0..m {
            let ja = jac[i * m + a];
            for b in a..m {
                jtj[a * m + b] += ja * jac[i * m + b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            jtj[a * m + b] = jtj[b * m + a];
        }
    }
    jtj
}

/// Gaussian elimination with partial pivoting; `None` on a singular system.
fn solve(matrix: &[f64], rhs: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut a = matrix.to_vec();
    let mut b = rhs.to_vec();
    for col in 0..m {
        let mut pivot = col;
        let mut best = a[col * m + col].abs();
        for row in (col + 1)..m {
            let v = a[row * m + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if !best.is_finite() || best < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..m {
                a.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * m + col];
        for row in (col + 1)..m {
            let factor = a[row * m + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..m {
                a[row * m + k] -= factor * a[col * m + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for col in (0..m).rev() {
        let mut sum = b[col];
        for k in (col + 1)..m {
            sum -= a[col * m + k] * x[k];
        }
        x[col] = sum / a[col * m + col];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Invert via Gauss-Jordan; `None` on a singular matrix.
fn invert(matrix: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; m * m];
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        let col = solve(matrix, &e, m)?;
        for i in 0..m {
            inv[i * m + j] = col[i];
        }
    }
    Some(inv)
}

fn standard_errors(jac: &[f64], m: usize, n: usize, cost: f64) -> Vec<f64> {
    let jtj = normal_matrix(jac, m);
    let variance = if n > m { cost / (n - m) as f64 } else { 0.0 };
    match invert(&jtj, m) {
        Some(inv) => (0..m)
            .map(|j| {
                let v = inv[j * m + j] * variance;
                if v.is_finite() && v >= 0.0 {
                    v.sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
        None => vec![f64::INFINITY; m],
    }
}
