//! Likelihood inference: negative-binomial log-likelihood with analytic
//! score, quasi-Newton maximization, Wald intervals, profile likelihood for
//! the contact power, and AIC model comparison.

mod compare;
mod profile;

pub use compare::{compare_models, ComparisonRow, EstimateCi};
pub use profile::{profile_kappa, ProfileResult, ProfileSearch};

use ndarray::Array2;
use statrs::distribution::ContinuousCDF;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::data::StratifiedCounts;
use crate::error::{Error, Result};
use crate::model::layout::SeasonalIdx;
use crate::model::{Engine, ModelSpec, ParameterLayout, VarianceSpec};
use crate::optim::{minimize, BfgsOptions, StartError};

/// Options of a single maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when the score max-norm drops below this.
    pub gradient_tol: f64,
    /// ... or when the relative log-likelihood change drops below this.
    pub relative_tol: f64,
    /// Estimate the covariance from the inverse numerical Hessian.
    pub compute_covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            gradient_tol: 1e-6,
            relative_tol: 1e-10,
            compute_covariance: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub gradient_max_norm: f64,
    pub n_evaluations: usize,
}

/// A maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub layout: ParameterLayout,
    /// Estimates on the transformed (unconstrained) scale, in layout order.
    pub estimates: Vec<f64>,
    /// Covariance of the transformed estimates; `None` if the Hessian was
    /// singular.
    pub covariance: Option<Array2<f64>>,
    pub loglik: f64,
    pub aic: f64,
    pub convergence: Convergence,
    /// The contact power used, for power-adjusted contact structures.
    pub fixed_kappa: Option<f64>,
    /// Whether `fixed_kappa` was found by profile likelihood (and is counted
    /// as an extra parameter in the AIC).
    pub kappa_profiled: bool,
    /// Profile confidence interval for the contact power.
    pub kappa_ci: Option<(f64, f64)>,
    pub data_fingerprint: String,
}

impl FitResult {
    /// Free parameters including a profiled contact power.
    pub fn parameter_count(&self) -> usize {
        self.layout.len() + usize::from(self.kappa_profiled)
    }

    pub fn std_error(&self, index: usize) -> Option<f64> {
        self.covariance
            .as_ref()
            .map(|c| c[(index, index)].max(0.0).sqrt())
    }

    /// Estimate on the natural scale (log-scale parameters exponentiated).
    pub fn natural_estimate(&self, name: &str) -> Result<f64> {
        let ix = self.layout.index_of(name)?;
        Ok(self.layout.defs()[ix]
            .transform
            .to_natural(self.estimates[ix]))
    }

    pub fn wald_ci(&self, name: &str, level: f64) -> Result<(f64, f64)> {
        wald_ci(self, name, level)
    }
}

/// Normal quantile for a central interval of the given level.
pub(crate) fn z_quantile(level: f64) -> Result<f64> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Invalid(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Wald confidence interval on the natural scale: estimate +- z se on the
/// transformed scale, endpoints back-transformed.
pub fn wald_ci(fit: &FitResult, name: &str, level: f64) -> Result<(f64, f64)> {
    let ix = fit.layout.index_of(name)?;
    let se = fit.std_error(ix).ok_or(Error::CovarianceUnavailable)?;
    let z = z_quantile(level)?;
    let transform = fit.layout.defs()[ix].transform;
    let est = fit.estimates[ix];
    Ok((
        transform.to_natural(est - z * se),
        transform.to_natural(est + z * se),
    ))
}

/// Sum of the conditional log-densities over all cells from the second week
/// on, given the parameter vector on the transformed scale.
pub fn log_likelihood(spec: &ModelSpec, params: &[f64], data: &StratifiedCounts) -> Result<f64> {
    let objective = Objective::new(spec, data)?;
    Ok(objective.eval(params, false)?.0)
}

/// Analytic gradient of [`log_likelihood`] with respect to the transformed
/// parameters.
pub fn score(spec: &ModelSpec, params: &[f64], data: &StratifiedCounts) -> Result<Vec<f64>> {
    let objective = Objective::new(spec, data)?;
    Ok(objective.eval(params, true)?.1.expect("gradient requested"))
}

/// Maximize the log-likelihood by BFGS from `init` (or the documented default
/// start). Deterministic given data, start and options.
pub fn fit(
    spec: &ModelSpec,
    data: &StratifiedCounts,
    init: Option<&[f64]>,
    options: &FitOptions,
) -> Result<FitResult> {
    if spec.profiles_kappa() {
        return Err(Error::ProfiledKappaInFit);
    }
    let objective = Objective::new(spec, data)?;
    let layout = objective.engine.layout.clone();
    let x0 = match init {
        Some(v) => {
            layout.check_len(v)?;
            v.to_vec()
        }
        None => layout.default_init(spec, data),
    };
    // Surface a real diagnostic if the starting point is infeasible.
    objective.eval(&x0, false)?;

    let bfgs = BfgsOptions {
        max_iterations: options.max_iterations,
        gradient_tol: options.gradient_tol,
        relative_tol: options.relative_tol,
    };
    let outcome = minimize(
        |x| {
            objective.eval(x, true).ok().map(|(value, grad)| {
                let grad = grad.expect("gradient requested");
                (-value, grad.iter().map(|g| -g).collect())
            })
        },
        &x0,
        &bfgs,
    )
    .map_err(|StartError::Infeasible| Error::BadInitialPoint)?;

    let gradient_max_norm = outcome.gradient.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
    if !outcome.converged {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            gradient_norm: gradient_max_norm,
            trace: outcome.trace.iter().map(|v| -v).collect(),
        });
    }

    let mut estimates = outcome.x;
    let mut loglik = -outcome.value;
    let mut gradient_max_norm = gradient_max_norm;
    // BFGS may stop on a stalled objective while the score still sits above
    // the gradient tolerance in stiff directions; a couple of Newton steps
    // using the exact (finite-difference) Hessian settle it.
    if gradient_max_norm > options.gradient_tol {
        newton_polish(
            &objective,
            &mut estimates,
            &mut loglik,
            &mut gradient_max_norm,
            options.gradient_tol,
        );
    }
    let covariance = if options.compute_covariance {
        hessian_covariance(&objective, &estimates)
    } else {
        None
    };
    let aic = -2.0 * loglik + 2.0 * layout.len() as f64;
    let fixed_kappa = spec.epidemic.as_ref().and_then(|e| {
        e.components().find_map(|c| match &c.contact {
            crate::model::ContactStructure::PowerFixed { kappa, .. } => Some(*kappa),
            _ => None,
        })
    });

    Ok(FitResult {
        spec: spec.clone(),
        layout,
        estimates,
        covariance,
        loglik,
        aic,
        convergence: Convergence {
            converged: true,
            iterations: outcome.iterations,
            gradient_max_norm,
            n_evaluations: outcome.n_evaluations,
        },
        fixed_kappa,
        kappa_profiled: false,
        kappa_ci: None,
        data_fingerprint: data.fingerprint(),
    })
}

/// Numerical Hessian of the negative log-likelihood: central differences on
/// the analytic score, symmetrized.
fn neg_loglik_hessian(objective: &Objective<'_>, x: &[f64]) -> Option<Array2<f64>> {
    let p = x.len();
    let mut hessian = Array2::zeros((p, p));
    let mut point = x.to_vec();
    for j in 0..p {
        let h = 1e-5 * (1.0 + x[j].abs());
        point[j] = x[j] + h;
        let up = objective.eval(&point, true).ok()?.1?;
        point[j] = x[j] - h;
        let down = objective.eval(&point, true).ok()?.1?;
        point[j] = x[j];
        for i in 0..p {
            // minus: Hessian of the negative log-likelihood
            hessian[(i, j)] = -(up[i] - down[i]) / (2.0 * h);
        }
    }
    Some(0.5 * (&hessian + &hessian.t()))
}

/// Covariance as the inverse numerical Hessian of the negative log-likelihood.
/// `None` when singular.
fn hessian_covariance(objective: &Objective<'_>, x: &[f64]) -> Option<Array2<f64>> {
    use ndarray_linalg::Inverse;
    let cov = neg_loglik_hessian(objective, x)?.inv().ok()?;
    if cov.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(cov)
}

/// Damped Newton steps on the exact curvature, keeping the log-likelihood
/// non-decreasing while the score shrinks.
fn newton_polish(
    objective: &Objective<'_>,
    estimates: &mut Vec<f64>,
    loglik: &mut f64,
    gradient_max_norm: &mut f64,
    gradient_tol: f64,
) {
    use ndarray_linalg::Solve;
    for _ in 0..5 {
        if *gradient_max_norm <= gradient_tol {
            return;
        }
        let Some(hessian) = neg_loglik_hessian(objective, estimates) else {
            return;
        };
        let Ok(score) = objective
            .eval(estimates, true)
            .map(|(_, g)| g.expect("grad"))
        else {
            return;
        };
        let Ok(step) = hessian.solve(&ndarray::Array1::from(score)) else {
            return;
        };
        let mut improved = false;
        let mut damping = 1.0;
        for _ in 0..8 {
            let candidate: Vec<f64> = estimates
                .iter()
                .zip(step.iter())
                .map(|(x, d)| x + damping * d)
                .collect();
            if let Ok((value, Some(grad))) = objective.eval(&candidate, true) {
                let gmax = grad.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
                if value >= *loglik - 1e-10 * (loglik.abs() + 1.0) && gmax < *gradient_max_norm {
                    *estimates = candidate;
                    *loglik = value;
                    *gradient_max_norm = gmax;
                    improved = true;
                    break;
                }
            }
            damping *= 0.5;
        }
        if !improved {
            return;
        }
    }
}

/// Shared state for likelihood and score evaluation on one dataset.
pub(crate) struct Objective<'a> {
    pub engine: Engine,
    data: &'a StratifiedCounts,
    ystack: Array2<f64>,
    lnfact: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(spec: &ModelSpec, data: &'a StratifiedCounts) -> Result<Self> {
        let layout = ParameterLayout::build(spec, data.groups(), data.regions())?;
        let engine = Engine::for_data(spec, &layout, data)?;
        let max_count = data.counts().iter().copied().max().unwrap_or(0) as usize;
        let mut lnfact = vec![0.0; max_count + 1];
        for y in 1..=max_count {
            lnfact[y] = lnfact[y - 1] + (y as f64).ln();
        }
        Ok(Objective {
            engine,
            data,
            ystack: data.stacked(),
            lnfact,
        })
    }

    /// Overdispersion parameter index for a cell, if not Poisson.
    fn dispersion_index(&self, g: usize, r: usize) -> Option<usize> {
        let (start, _) = self.engine.layout.dispersion?;
        match self.engine.spec.variance {
            VarianceSpec::Poisson => None,
            VarianceSpec::SharedOverdispersion => Some(start),
            VarianceSpec::PerGroupOverdispersion => Some(start + g),
            VarianceSpec::PerRegionOverdispersion => Some(start + r),
        }
    }

    /// Log-likelihood and optional analytic gradient on the transformed scale.
    pub fn eval(&self, params: &[f64], want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
        let engine = &self.engine;
        let layout = &engine.layout;
        layout.check_len(params)?;
        let realized = engine.realize(params, want_grad)?;

        let t_n = engine.n_weeks;
        let (g_n, r_n) = (engine.n_groups, engine.n_regions);
        // Weighted lag sums and their weight-parameter derivatives.
        let lagged = self.ystack.slice(ndarray::s![..t_n - 1, ..]);
        let s = realized.weights.as_ref().map(|m| lagged.dot(m));
        let ds: Vec<Array2<f64>> = if want_grad {
            realized
                .weight_grads
                .iter()
                .map(|dm| lagged.dot(dm))
                .collect()
        } else {
            Vec::new()
        };

        // compensated summation: central finite differences of the
        // log-likelihood (the gradient contract, Hessians) need the sum to be
        // accurate to machine precision, not to the naive accumulation error
        let mut ll = 0.0;
        let mut ll_carry = 0.0;
        let add_ll = |sum: &mut f64, carry: &mut f64, term: f64| {
            let y = term - *carry;
            let t = *sum + y;
            *carry = (t - *sum) - y;
            *sum = t;
        };
        let mut grad = if want_grad {
            vec![0.0; layout.len()]
        } else {
            Vec::new()
        };

        for t in 1..t_n {
            for g in 0..g_n {
                for r in 0..r_n {
                    let cell = g * r_n + r;
                    let y = self.data.counts()[(t, g, r)];
                    let mut mu = realized.nu[(t, cell)];
                    if let Some(ar) = &realized.ar_coef {
                        mu += ar[cell] * self.ystack[(t - 1, cell)];
                    }
                    if let Some(s) = &s {
                        mu += engine.epi_coef_at(&realized, t, cell) * s[(t - 1, cell)];
                    }
                    if !mu.is_finite() || mu <= 0.0 {
                        return Err(Error::NonFiniteMean {
                            t,
                            group: self.data.groups()[g].clone(),
                            region: self.data.regions()[r].clone(),
                        });
                    }
                    let psi_ix = self.dispersion_index(g, r);

                    let (term, dldmu, dldlogpsi) = match psi_ix {
                        None => {
                            let yf = y as f64;
                            let term = yf * mu.ln() - mu - self.lnfact[y as usize];
                            let dldmu = if want_grad { yf / mu - 1.0 } else { 0.0 };
                            (term, dldmu, 0.0)
                        }
                        Some(ix) => {
                            let size = (-params[ix]).exp(); // 1 / psi
                            nb_cell(y, mu, size, &self.lnfact, want_grad)
                        }
                    };
                    if !term.is_finite() {
                        return Err(Error::NonFiniteLogLik {
                            t,
                            group: self.data.groups()[g].clone(),
                            region: self.data.regions()[r].clone(),
                        });
                    }
                    add_ll(&mut ll, &mut ll_carry, term);
                    if !want_grad {
                        continue;
                    }

                    // chain rule through the mean components
                    let nu = realized.nu[(t, cell)];
                    grad[layout.endemic_intercept] += dldmu * nu;
                    if let Some(start) = layout.endemic_group {
                        if g > 0 {
                            grad[start + g - 1] += dldmu * nu;
                        }
                    }
                    if let Some(start) = layout.endemic_region {
                        if r > 0 {
                            grad[start + r - 1] += dldmu * nu;
                        }
                    }
                    if let Some(ix) = layout.christmas {
                        grad[ix] += dldmu * nu * engine.xmas[t];
                    }
                    match layout.seasonal {
                        SeasonalIdx::None => {}
                        SeasonalIdx::Shared { start } => {
                            grad[start] += dldmu * nu * engine.sin_t[t];
                            grad[start + 1] += dldmu * nu * engine.cos_t[t];
                        }
                        SeasonalIdx::PerGroup { start } => {
                            grad[start + 2 * g] += dldmu * nu * engine.sin_t[t];
                            grad[start + 2 * g + 1] += dldmu * nu * engine.cos_t[t];
                        }
                    }

                    if let (Some(block), Some(ar)) = (layout.ar, &realized.ar_coef) {
                        let part = ar[cell] * self.ystack[(t - 1, cell)];
                        grad[block.intercept] += dldmu * part;
                        if let Some(start) = block.group {
                            if g > 0 {
                                grad[start + g - 1] += dldmu * part;
                            }
                        }
                        if let Some(start) = block.region {
                            if r > 0 {
                                grad[start + r - 1] += dldmu * part;
                            }
                        }
                    }

                    if let (Some(block), Some(s)) = (layout.epi, &s) {
                        let coef = engine.epi_coef_at(&realized, t, cell);
                        let part = coef * s[(t - 1, cell)];
                        grad[block.intercept] += dldmu * part;
                        if let Some(start) = block.group {
                            if g > 0 {
                                grad[start + g - 1] += dldmu * part;
                            }
                        }
                        if let Some(start) = block.region {
                            if r > 0 {
                                grad[start + r - 1] += dldmu * part;
                            }
                        }
                        if let Some(tau_ix) = block.tau {
                            let log_e = match &engine.offset_t {
                                Some(ot) if engine.time_varying_epidemic() => ot[(t, g, r)].ln(),
                                _ => engine.log_offset[(g, r)],
                            };
                            grad[tau_ix] += dldmu * part * log_e;
                        }
                        if let Some((wstart, _)) = layout.weights {
                            for (k, dsk) in ds.iter().enumerate() {
                                grad[wstart + k] += dldmu * coef * dsk[(t - 1, cell)];
                            }
                        }
                    }

                    if let Some(ix) = psi_ix {
                        grad[ix] += dldlogpsi;
                    }
                }
            }
        }

        Ok((ll, want_grad.then_some(grad)))
    }
}

/// Negative binomial log-pmf with mean `mu` and size `size = 1/psi`
/// (variance `mu (1 + psi mu)`), plus the derivatives needed for the score:
/// returns `(log pmf, d/dmu, d/d(log psi))`.
///
/// `ln Gamma(y + size) - ln Gamma(size)` and the matching digamma difference
/// are computed as explicit sums for moderate counts; this stays exact even
/// for huge `size` (tiny `psi`), where the direct gamma difference loses all
/// precision.
fn nb_cell(y: u64, mu: f64, size: f64, lnfact: &[f64], want_grad: bool) -> (f64, f64, f64) {
    let yf = y as f64;
    let ln_ratio = if y == 0 {
        0.0
    } else if y <= 512 {
        (0..y).map(|j| (size + j as f64).ln()).sum()
    } else {
        ln_gamma(yf + size) - ln_gamma(size)
    };
    let denom = size + mu;
    // size * ln(size / (size + mu)) written as -size ln(1 + mu/size): the
    // direct log difference cancels catastrophically for tiny psi.
    let term =
        ln_ratio - lnfact[y as usize] - size * (mu / size).ln_1p() + yf * (mu.ln() - denom.ln());
    if !want_grad {
        return (term, 0.0, 0.0);
    }
    let dldmu = yf / mu - (yf + size) / denom;
    let digamma_diff = if y == 0 {
        0.0
    } else if y <= 512 {
        (0..y).map(|j| 1.0 / (size + j as f64)).sum()
    } else {
        digamma(yf + size) - digamma(size)
    };
    let dldsize = digamma_diff - (mu / size).ln_1p() + (mu - yf) / denom;
    // d size / d log psi = -size
    (term, dldmu, -size * dldsize)
}
