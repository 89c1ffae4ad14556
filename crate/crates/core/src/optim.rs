//! Quasi-Newton minimization (BFGS with a backtracking Armijo line search).
//!
//! The objective may declare a trial point infeasible by returning `None`;
//! the line search then backtracks. Only the starting point has to be
//! feasible. Everything is deterministic.

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsOptions {
    pub max_iterations: usize,
    /// Converged when the gradient max-norm drops below this.
    pub gradient_tol: f64,
    /// ... or when the relative objective change drops below this.
    pub relative_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iterations: 500,
            gradient_tol: 1e-6,
            relative_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub n_evaluations: usize,
    pub converged: bool,
    /// Objective value after each accepted iteration.
    pub trace: Vec<f64>,
}

pub(crate) enum StartError {
    Infeasible,
}

/// Minimize `f` starting from `x0`. `f` returns the value and gradient, or
/// `None` where the objective is undefined.
pub(crate) fn minimize<F>(
    mut f: F,
    x0: &[f64],
    options: &BfgsOptions,
) -> Result<BfgsOutcome, StartError>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut n_evaluations = 0usize;
    let mut eval = |x: &[f64], n_evaluations: &mut usize| -> Option<(f64, Vec<f64>)> {
        *n_evaluations += 1;
        let (v, g) = f(x)?;
        if !v.is_finite() || g.iter().any(|gi| !gi.is_finite()) {
            return None;
        }
        Some((v, g))
    };

    let mut x = x0.to_vec();
    let (mut value, mut gradient) = eval(&x, &mut n_evaluations).ok_or(StartError::Infeasible)?;

    // Inverse Hessian approximation, row-major n x n, starting at identity.
    let mut h = identity(n);
    let mut fresh_h = true;
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    // The relative-change stop needs two stalled iterations in a row; a
    // single stiff step can stall the objective while the gradient is still
    // settling.
    let mut stalled = 0usize;

    for iter in 0..options.max_iterations {
        iterations = iter + 1;
        if max_abs(&gradient) < options.gradient_tol {
            converged = true;
            iterations = iter;
            break;
        }

        let mut direction = neg_matvec(&h, &gradient);
        let mut descent = dot(&direction, &gradient);
        if descent >= 0.0 || descent.is_nan() {
            // Curvature information went bad; restart from steepest descent.
            h = identity(n);
            fresh_h = true;
            direction = gradient.iter().map(|g| -g).collect();
            descent = dot(&direction, &gradient);
        }

        // Backtracking Armijo line search.
        let c1 = 1e-4;
        let mut step = 1.0;
        let mut accepted: Option<(Vec<f64>, f64, Vec<f64>)> = None;
        for _ in 0..60 {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&direction)
                .map(|(xi, di)| xi + step * di)
                .collect();
            if let Some((v, g)) = eval(&candidate, &mut n_evaluations) {
                if v <= value + c1 * step * descent {
                    accepted = Some((candidate, v, g));
                    break;
                }
            }
            step *= 0.5;
        }

        let (new_x, new_value, new_gradient) = match accepted {
            Some(t) => t,
            None => {
                // No acceptable step along this direction; if we were already
                // on steepest descent there is nothing more to try.
                let was_steepest = direction
                    .iter()
                    .zip(&gradient)
                    .all(|(d, g)| (d + g).abs() <= 1e-12 * (1.0 + g.abs()));
                if was_steepest {
                    break;
                }
                h = identity(n);
                fresh_h = true;
                continue;
            }
        };

        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = new_gradient
            .iter()
            .zip(&gradient)
            .map(|(a, b)| a - b)
            .collect();
        let sy = dot(&s, &yv);
        let value_change = (value - new_value).abs();

        x = new_x;
        value = new_value;
        gradient = new_gradient;
        trace.push(value);

        if value_change <= options.relative_tol * (value.abs() + 1.0) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if max_abs(&gradient) < options.gradient_tol || stalled >= 2 {
            converged = true;
            break;
        }

        // BFGS update of the inverse Hessian; skipped when curvature is not
        // positive enough to keep H positive definite.
        if sy > 1e-10 * norm(&s) * norm(&yv) {
            if fresh_h {
                // Shanno-Phua scaling of the initial matrix
                let yy = dot(&yv, &yv);
                if yy > 0.0 {
                    let scale = sy / yy;
                    for v in h.iter_mut() {
                        *v *= scale;
                    }
                }
                fresh_h = false;
            }
            bfgs_update(&mut h, &s, &yv, sy);
        }
    }

    Ok(BfgsOutcome {
        x,
        value,
        gradient,
        iterations,
        n_evaluations,
        converged,
        trace,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn neg_matvec(h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let row = &h[i * n..(i + 1) * n];
        out[i] = -dot(row, g);
    }
    out
}

/// H <- (I - r s y^T) H (I - r y s^T) + r s s^T with r = 1 / (s^T y).
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    // hy = H y, yhy = y^T H y
    let mut hy = vec![0.0; n];
    for i in 0..n {
        hy[i] = dot(&h[i * n..(i + 1) * n], y);
    }
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
}
