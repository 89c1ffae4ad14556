//! Profile likelihood for the contact power.
//!
//! The exponent of the power-adjusted contact matrix does not enter the
//! parameter vector; instead the full model is refitted with `C^kappa` held
//! fixed at each evaluated exponent, warm-starting every inner fit from the
//! neighbouring optimum. The confidence interval collects all exponents whose
//! profile log-likelihood stays within half a chi-squared quantile of the
//! maximum, so it reflects the uncertainty of all other parameters as well.

use std::collections::BTreeMap;

use crate::data::StratifiedCounts;
use crate::error::{Error, Result};
use crate::inference::{fit, z_quantile, FitOptions, FitResult};
use crate::model::ModelSpec;

/// How to scan the profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileSearch {
    /// Evaluate an even grid, then refine around the best point.
    Grid { lo: f64, hi: f64, points: usize },
    /// Golden-section search on the bracket.
    GoldenSection { lo: f64, hi: f64, tol: f64 },
}

impl ProfileSearch {
    fn bounds(&self) -> (f64, f64) {
        match self {
            ProfileSearch::Grid { lo, hi, .. } => (*lo, *hi),
            ProfileSearch::GoldenSection { lo, hi, .. } => (*lo, *hi),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProfileResult {
    /// All evaluated (kappa, profile log-likelihood) pairs, sorted by kappa.
    pub trace: Vec<(f64, f64)>,
    pub kappa_hat: f64,
    /// Profile likelihood confidence interval at `level`.
    pub ci: (f64, f64),
    pub level: f64,
    /// Full inner fit at the profile maximizer, with the profiled exponent
    /// counted as one extra parameter in the AIC.
    pub best_fit: FitResult,
}

const CI_BISECTION_TOL: f64 = 1e-3;

/// Profile the contact power of a spec whose contact structure is a profiled
/// matrix power, maximizing the inner log-likelihood at each exponent.
pub fn profile_kappa(
    spec: &ModelSpec,
    data: &StratifiedCounts,
    search: ProfileSearch,
    level: f64,
    options: &FitOptions,
) -> Result<ProfileResult> {
    if !spec.profiles_kappa() {
        return Err(Error::NotProfiled);
    }
    let (lo, hi) = search.bounds();
    if lo.is_nan() || hi.is_nan() || lo < 0.0 || hi <= lo {
        return Err(Error::Invalid(format!(
            "kappa search range [{lo}, {hi}] must satisfy 0 <= lo < hi"
        )));
    }

    let mut evaluator = Evaluator {
        spec,
        data,
        options,
        warm: None,
        cache: BTreeMap::new(),
    };

    let kappa_hat = match search {
        ProfileSearch::Grid { lo, hi, points } => {
            if points < 3 {
                return Err(Error::Invalid("grid search needs at least 3 points".into()));
            }
            let step = (hi - lo) / (points - 1) as f64;
            let mut best = (lo, f64::NEG_INFINITY);
            for i in 0..points {
                let k = lo + step * i as f64;
                let ll = evaluator.eval(k)?;
                if ll > best.1 {
                    best = (k, ll);
                }
            }
            let best_ix = ((best.0 - lo) / step).round() as usize;
            if best_ix == 0 || best_ix == points - 1 {
                return Err(Error::ProfileBoundary {
                    kappa: best.0,
                    lo,
                    hi,
                });
            }
            let bracket_lo = lo + step * (best_ix - 1) as f64;
            let bracket_hi = lo + step * (best_ix + 1) as f64;
            golden_max(&mut evaluator, bracket_lo, bracket_hi, CI_BISECTION_TOL)?
        }
        ProfileSearch::GoldenSection { lo, hi, tol } => {
            evaluator.eval(lo)?;
            evaluator.eval(hi)?;
            let khat = golden_max(&mut evaluator, lo, hi, tol.max(1e-6))?;
            let edge = (hi - lo) * 1e-3;
            if khat <= lo + edge || khat >= hi - edge {
                return Err(Error::ProfileBoundary {
                    kappa: khat,
                    lo,
                    hi,
                });
            }
            khat
        }
    };

    // Best over everything evaluated, so the reported maximum provably
    // dominates the trace.
    let (kappa_hat, ll_max) = evaluator
        .cache
        .iter()
        .map(|(bits, ll)| (f64::from_bits(*bits), *ll))
        .fold((kappa_hat, f64::NEG_INFINITY), |best, (k, ll)| {
            if ll > best.1 {
                (k, ll)
            } else {
                best
            }
        });
    if kappa_hat <= lo || kappa_hat >= hi {
        return Err(Error::ProfileBoundary {
            kappa: kappa_hat,
            lo,
            hi,
        });
    }

    // chi-squared(1) quantile = z^2
    let z = z_quantile(level)?;
    let target = ll_max - z * z / 2.0;
    let ci_lo = bisect_ci(&mut evaluator, lo, kappa_hat, target, true)?;
    let ci_hi = bisect_ci(&mut evaluator, kappa_hat, hi, target, false)?;

    // Full refit at the maximizer with covariance, counted against the
    // original profiled spec.
    let inner = spec.with_fixed_kappa(kappa_hat);
    let warm = evaluator.warm.clone();
    let mut best_fit = match fit(&inner, data, warm.as_deref(), options) {
        Ok(f) => f,
        Err(_) if warm.is_some() => fit(&inner, data, None, options)?,
        Err(e) => return Err(e),
    };
    best_fit.spec = spec.clone();
    best_fit.fixed_kappa = Some(kappa_hat);
    best_fit.kappa_profiled = true;
    best_fit.kappa_ci = Some((ci_lo, ci_hi));
    best_fit.aic = -2.0 * best_fit.loglik + 2.0 * (best_fit.layout.len() + 1) as f64;

    let mut trace: Vec<(f64, f64)> = evaluator
        .cache
        .iter()
        .map(|(bits, ll)| (f64::from_bits(*bits), *ll))
        .collect();
    trace.sort_by(|a, b| a.0.total_cmp(&b.0));

    Ok(ProfileResult {
        trace,
        kappa_hat,
        ci: (ci_lo, ci_hi),
        level,
        best_fit,
    })
}

struct Evaluator<'a> {
    spec: &'a ModelSpec,
    data: &'a StratifiedCounts,
    options: &'a FitOptions,
    warm: Option<Vec<f64>>,
    cache: BTreeMap<u64, f64>,
}

impl Evaluator<'_> {
    fn eval(&mut self, kappa: f64) -> Result<f64> {
        if let Some(ll) = self.cache.get(&kappa.to_bits()) {
            return Ok(*ll);
        }
        let inner = self.spec.with_fixed_kappa(kappa);
        let mut opts = self.options.clone();
        opts.compute_covariance = false;
        let warm = self.warm.clone();
        let result = match fit(&inner, self.data, warm.as_deref(), &opts) {
            Ok(f) => f,
            // Warm starts degrade gracefully to the default initialization.
            Err(_) if warm.is_some() => fit(&inner, self.data, None, &opts)?,
            Err(e) => return Err(e),
        };
        self.warm = Some(result.estimates.clone());
        self.cache.insert(kappa.to_bits(), result.loglik);
        Ok(result.loglik)
    }
}

/// Golden-section maximization; returns the best evaluated point.
fn golden_max(ev: &mut Evaluator<'_>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    const PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - PHI * (b - a);
    let mut d = a + PHI * (b - a);
    let mut fc = ev.eval(c)?;
    let mut fd = ev.eval(d)?;
    while (b - a) > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - PHI * (b - a);
            fc = ev.eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + PHI * (b - a);
            fd = ev.eval(d)?;
        }
    }
    Ok(if fc > fd { c } else { d })
}

/// Locate the profile CI endpoint where the log-likelihood crosses `target`
/// between `outer` and the maximizer, by bisection.
fn bisect_ci(
    ev: &mut Evaluator<'_>,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    left_side: bool,
) -> Result<f64> {
    let (outer, bounds) = if left_side {
        (lo, (lo, hi))
    } else {
        (hi, (lo, hi))
    };
    let ll_outer = ev.eval(outer)?;
    if ll_outer >= target {
        // Zero is a structural boundary of the power, not a search artifact:
        // an interval reaching it is reported as starting at zero.
        if left_side && outer == 0.0 {
            return Ok(0.0);
        }
        // Otherwise the interval extends past the search range.
        return Err(Error::ProfileCiNotBracketed {
            lo: bounds.0,
            hi: bounds.1,
        });
    }
    while (hi - lo) > CI_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let ll = ev.eval(mid)?;
        let below = ll < target;
        // On the left side the likelihood rises towards the maximizer (at
        // `hi`); on the right side it falls away from it (at `lo`).
        if left_side == below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
