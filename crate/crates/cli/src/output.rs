//! Machine-readable result documents. Every JSON document embeds the data
//! fingerprint and the fully resolved spec, so a run can be reproduced from
//! its outputs alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use epifit_core::fingerprint::Fnv1a;
use epifit_core::{ComparisonRow, Decomposition, FitResult, ModelSpec, ProfileResult, Transform};

use crate::errors::{CliError, CliResult};

pub const FIT_SCHEMA: &str = "epifit/fit/v1";
pub const PROFILE_SCHEMA: &str = "epifit/profile/v1";
pub const COMPARE_SCHEMA: &str = "epifit/compare/v1";

#[derive(Debug, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema: String,
    pub timestamp_unix: u64,
    pub data_fingerprint: String,
    pub spec_fingerprint: String,
    /// Resolved spec: a profiled contact power is recorded at its estimate,
    /// so the document alone reproduces the fitted model.
    pub spec: ModelSpec,
    pub dim: usize,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_max_norm: f64,
    pub parameters: Vec<ParameterDocument>,
    pub kappa: Option<KappaDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ParameterDocument {
    pub name: String,
    pub transform: Transform,
    /// Estimate on the transformed (unconstrained) scale.
    pub value: f64,
    pub se: Option<f64>,
    /// Estimate on the natural scale.
    pub natural: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KappaDocument {
    pub value: f64,
    pub profiled: bool,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

pub fn spec_fingerprint(spec: &ModelSpec) -> CliResult<String> {
    let bytes = serde_json::to_vec(spec)?;
    let mut h = Fnv1a::new();
    h.write(&bytes);
    Ok(h.hex())
}

fn timestamp_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn fit_document(fit: &FitResult, level: f64) -> CliResult<FitDocument> {
    let resolved = fit.spec.with_fixed_kappa(fit.fixed_kappa.unwrap_or(1.0));
    let parameters = fit
        .layout
        .defs()
        .iter()
        .enumerate()
        .map(|(i, def)| {
            let se = fit.std_error(i);
            let ci = fit.wald_ci(&def.name, level).ok();
            ParameterDocument {
                name: def.name.clone(),
                transform: def.transform,
                value: fit.estimates[i],
                se,
                natural: def.transform.to_natural(fit.estimates[i]),
                ci_lo: ci.map(|c| c.0),
                ci_hi: ci.map(|c| c.1),
            }
        })
        .collect();
    Ok(FitDocument {
        schema: FIT_SCHEMA.to_string(),
        timestamp_unix: timestamp_unix(),
        data_fingerprint: fit.data_fingerprint.clone(),
        spec_fingerprint: spec_fingerprint(&resolved)?,
        spec: resolved,
        dim: fit.parameter_count(),
        loglik: fit.loglik,
        aic: fit.aic,
        converged: fit.convergence.converged,
        iterations: fit.convergence.iterations,
        gradient_max_norm: fit.convergence.gradient_max_norm,
        parameters,
        kappa: fit.fixed_kappa.map(|value| KappaDocument {
            value,
            profiled: fit.kappa_profiled,
            ci_lo: fit.kappa_ci.map(|c| c.0),
            ci_hi: fit.kappa_ci.map(|c| c.1),
        }),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub schema: String,
    pub timestamp_unix: u64,
    pub data_fingerprint: String,
    pub spec_fingerprint: String,
    pub spec: ModelSpec,
    pub kappa_hat: f64,
    pub level: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub loglik_at_maximum: f64,
    pub evaluations: usize,
}

pub fn profile_document(profile: &ProfileResult) -> CliResult<ProfileDocument> {
    let resolved = profile.best_fit.spec.with_fixed_kappa(profile.kappa_hat);
    Ok(ProfileDocument {
        schema: PROFILE_SCHEMA.to_string(),
        timestamp_unix: timestamp_unix(),
        data_fingerprint: profile.best_fit.data_fingerprint.clone(),
        spec_fingerprint: spec_fingerprint(&resolved)?,
        spec: resolved,
        kappa_hat: profile.kappa_hat,
        level: profile.level,
        ci_lo: profile.ci.0,
        ci_hi: profile.ci.1,
        loglik_at_maximum: profile.best_fit.loglik,
        evaluations: profile.trace.len(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompareDocument {
    pub schema: String,
    pub timestamp_unix: u64,
    pub data_fingerprint: String,
    pub reference: String,
    pub rows: Vec<CompareRowDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompareRowDocument {
    pub label: String,
    pub dim: usize,
    pub loglik: f64,
    pub aic: f64,
    pub delta_aic: f64,
    pub tau: Option<f64>,
    pub tau_lo: Option<f64>,
    pub tau_hi: Option<f64>,
    pub rho: Option<f64>,
    pub rho_lo: Option<f64>,
    pub rho_hi: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_lo: Option<f64>,
    pub kappa_hi: Option<f64>,
    pub spec_fingerprint: String,
    pub spec: ModelSpec,
}

pub fn compare_document(
    rows: &[ComparisonRow],
    fits: &[FitResult],
    labels: &[String],
    data_fingerprint: &str,
) -> CliResult<CompareDocument> {
    let rows: Vec<CompareRowDocument> = rows
        .iter()
        .zip(fits)
        .zip(labels)
        .map(|((row, fit), label)| {
            let resolved = fit.spec.with_fixed_kappa(fit.fixed_kappa.unwrap_or(1.0));
            Ok(CompareRowDocument {
                label: label.clone(),
                dim: row.dim,
                loglik: row.loglik,
                aic: row.aic,
                delta_aic: row.delta_aic,
                tau: row.tau.map(|e| e.estimate),
                tau_lo: row.tau.and_then(|e| e.ci).map(|c| c.0),
                tau_hi: row.tau.and_then(|e| e.ci).map(|c| c.1),
                rho: row.rho.map(|e| e.estimate),
                rho_lo: row.rho.and_then(|e| e.ci).map(|c| c.0),
                rho_hi: row.rho.and_then(|e| e.ci).map(|c| c.1),
                kappa: row.kappa.map(|e| e.estimate),
                kappa_lo: row.kappa.and_then(|e| e.ci).map(|c| c.0),
                kappa_hi: row.kappa.and_then(|e| e.ci).map(|c| c.1),
                spec_fingerprint: spec_fingerprint(&resolved)?,
                spec: resolved,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(CompareDocument {
        schema: COMPARE_SCHEMA.to_string(),
        timestamp_unix: timestamp_unix(),
        data_fingerprint: data_fingerprint.to_string(),
        reference: labels.first().cloned().unwrap_or_default(),
        rows,
    })
}

pub fn write_json<T: Serialize>(path: &Path, document: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(document)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_fit_document(path: &Path) -> CliResult<FitDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new("E_IO", format!("{}: {e}", path.display())))?;
    let document: FitDocument = serde_json::from_str(&text)?;
    if document.schema != FIT_SCHEMA {
        return Err(CliError::parse(format!(
            "{}: schema {:?} is not {FIT_SCHEMA:?}",
            path.display(),
            document.schema
        )));
    }
    Ok(document)
}

/// Tidy decomposition: `t,cell,component,value`.
pub fn write_decomposition_csv(path: &Path, decomposition: &Decomposition) -> CliResult<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["t", "cell", "component", "value"])?;
    let parts: [(&str, &ndarray::Array2<f64>); 3] = [
        ("endemic", &decomposition.endemic),
        ("within_group", &decomposition.within_group),
        ("between_group", &decomposition.between_group),
    ];
    for (t, week) in decomposition.weeks.iter().enumerate() {
        for (c, cell) in decomposition.labels.iter().enumerate() {
            for (component, values) in &parts {
                wtr.write_record([
                    week.to_string(),
                    cell.clone(),
                    component.to_string(),
                    format!("{}", values[(t, c)]),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Profile trace: `kappa,loglik`.
pub fn write_profile_trace_csv(path: &Path, profile: &ProfileResult) -> CliResult<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["kappa", "loglik"])?;
    for (kappa, loglik) in &profile.trace {
        wtr.write_record([format!("{kappa}"), format!("{loglik}")])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Comparison table mirroring the document columns.
pub fn write_compare_csv(path: &Path, document: &CompareDocument) -> CliResult<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "label",
        "dim",
        "loglik",
        "aic",
        "delta_aic",
        "tau",
        "tau_lo",
        "tau_hi",
        "rho",
        "rho_lo",
        "rho_hi",
        "kappa",
        "kappa_lo",
        "kappa_hi",
    ])?;
    let fmt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
    for row in &document.rows {
        wtr.write_record([
            row.label.clone(),
            row.dim.to_string(),
            format!("{}", row.loglik),
            format!("{}", row.aic),
            format!("{}", row.delta_aic),
            fmt(row.tau),
            fmt(row.tau_lo),
            fmt(row.tau_hi),
            fmt(row.rho),
            fmt(row.rho_lo),
            fmt(row.rho_hi),
            fmt(row.kappa),
            fmt(row.kappa_lo),
            fmt(row.kappa_hi),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
