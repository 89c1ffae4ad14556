//! AIC comparison of fits on the same dataset.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::FitResult;

/// A point estimate with an optional 95% confidence interval, on the natural
/// scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateCi {
    pub estimate: f64,
    pub ci: Option<(f64, f64)>,
}

/// One row of the model comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    /// Number of free parameters (a profiled contact power counts as one).
    pub dim: usize,
    pub loglik: f64,
    pub aic: f64,
    /// AIC difference to the first (reference) fit.
    pub delta_aic: f64,
    pub tau: Option<EstimateCi>,
    pub rho: Option<EstimateCi>,
    pub kappa: Option<EstimateCi>,
}

const CI_LEVEL: f64 = 0.95;

/// Tabulate fits against the first one as the reference: parameter counts,
/// AIC differences, and the population scaling, spatial decay and contact
/// power estimates with 95% intervals where available.
///
/// All fits must stem from the identical dataset (checked by fingerprint).
pub fn compare_models(fits: &[&FitResult]) -> Result<Vec<ComparisonRow>> {
    let reference = fits
        .first()
        .ok_or_else(|| Error::Invalid("compare_models needs at least one fit".into()))?;
    for other in fits.iter().skip(1) {
        if other.data_fingerprint != reference.data_fingerprint {
            return Err(Error::FingerprintMismatch {
                a: reference.data_fingerprint.clone(),
                b: other.data_fingerprint.clone(),
            });
        }
    }

    Ok(fits
        .iter()
        .map(|fit| {
            let wald = |name: &str| -> Option<EstimateCi> {
                let estimate = fit.natural_estimate(name).ok()?;
                let ci = fit.wald_ci(name, CI_LEVEL).ok();
                Some(EstimateCi { estimate, ci })
            };
            let kappa = fit.fixed_kappa.map(|value| EstimateCi {
                estimate: value,
                ci: fit.kappa_ci,
            });
            ComparisonRow {
                label: fit.spec.describe(),
                dim: fit.parameter_count(),
                loglik: fit.loglik,
                aic: fit.aic,
                delta_aic: fit.aic - reference.aic,
                tau: wald("epidemic.tau"),
                rho: wald("spatial.rho"),
                kappa,
            }
        })
        .collect())
}
