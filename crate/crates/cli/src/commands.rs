//! The five subcommands.

use std::path::Path;

use epifit_core as core;
use epifit_core::{
    estimate_contact_matrix, matrix_power_detailed, row_normalize, Aggregation, ContactMatrix,
    FitOptions, FitResult, ModelSpec, ParameterLayout, ProfileSearch, SimulationConfig,
    SurveyRecords,
};

use crate::config::{apply_compare_entry, build_spec, parse_kappa_range, ProfileConfig, RunConfig};
use crate::errors::{CliError, CliResult};
use crate::io::{self, Dataset};
use crate::output;
use crate::{ContactsArgs, RunArgs};

fn ensure_out_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn load_scaled_dataset(args: &RunArgs, config: &RunConfig, base: &Path) -> CliResult<Dataset> {
    let mut dataset = io::load_dataset(config.data()?, base)?;
    if let Some(text) = &args.scale_factors {
        let factors = io::parse_scale_factors(text, dataset.counts.groups())?;
        dataset.counts = dataset.counts.scale_by_group(&factors)?;
        println!(
            "scaled counts by group factors {:?}; new total {}",
            factors,
            dataset.counts.total_cases()
        );
    }
    println!("loaded {}", dataset.summary());
    Ok(dataset)
}

/// Contact matrix as the model uses it (optionally row-normalized).
fn model_contacts(config: &RunConfig, dataset: &Dataset) -> CliResult<Option<ContactMatrix>> {
    let Some(contacts) = &dataset.contacts else {
        return Ok(None);
    };
    let normalize = config
        .model
        .as_ref()
        .and_then(|m| m.epidemic.as_ref())
        .map(|e| e.normalize_contacts)
        .unwrap_or(true);
    if normalize {
        Ok(Some(row_normalize(contacts)?))
    } else {
        Ok(Some(contacts.clone()))
    }
}

fn profile_search(args: &RunArgs, profile: &ProfileConfig) -> CliResult<ProfileSearch> {
    let (lo, hi) = match &args.kappa_range {
        Some(text) => parse_kappa_range(text)?,
        None => (profile.lo, profile.hi),
    };
    match profile.search.as_str() {
        "golden" => Ok(ProfileSearch::GoldenSection {
            lo,
            hi,
            tol: profile.tol,
        }),
        "grid" => Ok(ProfileSearch::Grid {
            lo,
            hi,
            points: profile.points,
        }),
        other => Err(CliError::config(format!(
            "unknown profile search {other:?} (golden | grid)"
        ))),
    }
}

/// Fit the spec, profiling the contact power when the spec asks for it.
fn fit_any(
    spec: &ModelSpec,
    dataset: &Dataset,
    args: &RunArgs,
    config: &RunConfig,
) -> CliResult<FitResult> {
    let options = FitOptions {
        max_iterations: config.fit.max_iterations,
        ..FitOptions::default()
    };
    if spec.profiles_kappa() {
        let search = profile_search(args, &config.profile)?;
        let profile = core::profile_kappa(
            spec,
            &dataset.counts,
            search,
            config.profile.level,
            &options,
        )?;
        Ok(profile.best_fit)
    } else {
        Ok(core::fit(spec, &dataset.counts, None, &options)?)
    }
}

fn print_fit_summary(fit: &FitResult) {
    println!(
        "fit: loglik {:.4}, aic {:.4}, dim {}, {} iterations, gradient {:.2e}",
        fit.loglik,
        fit.aic,
        fit.parameter_count(),
        fit.convergence.iterations,
        fit.convergence.gradient_max_norm
    );
    if let Some(kappa) = fit.fixed_kappa {
        match fit.kappa_ci {
            Some((lo, hi)) if fit.kappa_profiled => {
                println!("contact power kappa {kappa:.4} (profile CI {lo:.4}..{hi:.4})")
            }
            _ => println!("contact power kappa {kappa:.4} (fixed)"),
        }
    }
}

pub fn fit(args: &RunArgs) -> CliResult<()> {
    let (config, base) = RunConfig::load(&args.config)?;
    ensure_out_dir(&args.out)?;
    let dataset = load_scaled_dataset(args, &config, &base)?;
    let contacts = model_contacts(&config, &dataset)?;
    let spec = build_spec(config.model()?, &dataset.orders, contacts.as_ref())?;

    let result = fit_any(&spec, &dataset, args, &config)?;
    print_fit_summary(&result);

    let document = output::fit_document(&result, config.profile.level)?;
    output::write_json(&args.out.join("fit.json"), &document)?;
    let decomposition = core::mean_decomposition(&result, &dataset.counts, Aggregation::ByGroup)?;
    output::write_decomposition_csv(&args.out.join("decomposition.csv"), &decomposition)?;
    println!(
        "wrote {} and {}",
        args.out.join("fit.json").display(),
        args.out.join("decomposition.csv").display()
    );
    Ok(())
}

pub fn profile(args: &RunArgs) -> CliResult<()> {
    let (config, base) = RunConfig::load(&args.config)?;
    ensure_out_dir(&args.out)?;
    let dataset = load_scaled_dataset(args, &config, &base)?;
    let contacts = model_contacts(&config, &dataset)?;
    let spec = build_spec(config.model()?, &dataset.orders, contacts.as_ref())?;
    if !spec.profiles_kappa() {
        return Err(CliError::config(
            "profile needs [model.epidemic] contact = \"power-profiled\"",
        ));
    }

    let options = FitOptions {
        max_iterations: config.fit.max_iterations,
        ..FitOptions::default()
    };
    let search = profile_search(args, &config.profile)?;
    let result = core::profile_kappa(
        &spec,
        &dataset.counts,
        search,
        config.profile.level,
        &options,
    )?;
    println!(
        "profile: kappa {:.4} ({}% CI {:.4}..{:.4}), {} evaluations",
        result.kappa_hat,
        (result.level * 100.0).round(),
        result.ci.0,
        result.ci.1,
        result.trace.len()
    );
    print_fit_summary(&result.best_fit);

    output::write_json(
        &args.out.join("profile.json"),
        &output::profile_document(&result)?,
    )?;
    output::write_profile_trace_csv(&args.out.join("profile_trace.csv"), &result)?;
    println!(
        "wrote {} and {}",
        args.out.join("profile.json").display(),
        args.out.join("profile_trace.csv").display()
    );
    Ok(())
}

pub fn simulate(args: &RunArgs) -> CliResult<()> {
    let (config, base) = RunConfig::load(&args.config)?;
    ensure_out_dir(&args.out)?;
    let simulate_config = config
        .simulate
        .clone()
        .ok_or_else(|| CliError::config("missing [simulate] section"))?;
    let dataset = load_scaled_dataset(args, &config, &base)?;

    // parameters either from a previous fit document or from a fresh fit
    let (spec, params) = match &simulate_config.fit {
        Some(path) => {
            let document = output::read_fit_document(&if path.is_absolute() {
                path.clone()
            } else {
                base.join(path)
            })?;
            if document.data_fingerprint != dataset.counts.fingerprint() {
                return Err(CliError::new(
                    "E_DATA_MISMATCH",
                    format!(
                        "fit document was produced from different data ({} vs {})",
                        document.data_fingerprint,
                        dataset.counts.fingerprint()
                    ),
                ));
            }
            let layout = ParameterLayout::build(
                &document.spec,
                dataset.counts.groups(),
                dataset.counts.regions(),
            )?;
            let mut params = vec![0.0; layout.len()];
            for p in &document.parameters {
                params[layout.index_of(&p.name)?] = p.value;
            }
            (document.spec, params)
        }
        None => {
            let contacts = model_contacts(&config, &dataset)?;
            let spec = build_spec(config.model()?, &dataset.orders, contacts.as_ref())?;
            let fit = fit_any(&spec, &dataset, args, &config)?;
            print_fit_summary(&fit);
            let resolved = fit.spec.with_fixed_kappa(fit.fixed_kappa.unwrap_or(1.0));
            (resolved, fit.estimates)
        }
    };

    let threads = std::env::var("EPIFIT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1usize)
        .max(1);
    let last = dataset.counts.n_weeks() - 1;
    let sim_config = SimulationConfig {
        spec,
        params,
        groups: dataset.counts.groups().to_vec(),
        regions: dataset.counts.regions().to_vec(),
        population: dataset.counts.population().clone(),
        initial: dataset.counts.slice(last).to_owned(),
        start_week: dataset.counts.weeks()[last],
        horizon: simulate_config.horizon,
        replicates: simulate_config.replicates,
        seed: args.seed.unwrap_or(0),
        count_cap: simulate_config.count_cap,
        allow_explosive: simulate_config.allow_explosive,
        threads,
    };
    let radius = core::epidemic_proportion(&sim_config.spec, &sim_config.params, &dataset.counts)?;
    println!(
        "simulating {} replicates over {} weeks (epidemic proportion {:.3}, seed {})",
        sim_config.replicates, sim_config.horizon, radius, sim_config.seed
    );
    let sims = core::simulate(&sim_config)?;
    io::write_simulations_csv(&args.out.join("simulations.csv"), &sims)?;
    println!("wrote {}", args.out.join("simulations.csv").display());
    Ok(())
}

pub fn compare(args: &RunArgs) -> CliResult<()> {
    let (config, base) = RunConfig::load(&args.config)?;
    ensure_out_dir(&args.out)?;
    let entries = config
        .compare
        .as_ref()
        .ok_or_else(|| CliError::config("missing [[compare.models]] entries"))?
        .models
        .clone();
    if entries.is_empty() {
        return Err(CliError::config("missing [[compare.models]] entries"));
    }
    let dataset = load_scaled_dataset(args, &config, &base)?;
    let contacts = model_contacts(&config, &dataset)?;
    let base_model = config.model()?;

    let mut fits = Vec::new();
    let mut labels = Vec::new();
    for entry in &entries {
        let model = apply_compare_entry(base_model, entry)?;
        let spec = build_spec(&model, &dataset.orders, contacts.as_ref())?;
        println!("fitting {:?} ...", entry.label);
        let fit = fit_any(&spec, &dataset, args, &config)?;
        print_fit_summary(&fit);
        labels.push(entry.label.clone());
        fits.push(fit);
    }

    let refs: Vec<&FitResult> = fits.iter().collect();
    let rows = core::compare_models(&refs)?;
    let document = output::compare_document(&rows, &fits, &labels, &fits[0].data_fingerprint)?;
    output::write_json(&args.out.join("compare.json"), &document)?;
    output::write_compare_csv(&args.out.join("compare.csv"), &document)?;

    println!("label | dim | dAIC | tau | rho | kappa");
    for row in &document.rows {
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        println!(
            "{} | {} | {:.1} | {} | {} | {}",
            row.label,
            row.dim,
            row.delta_aic,
            fmt(row.tau),
            fmt(row.rho),
            fmt(row.kappa)
        );
    }
    println!(
        "wrote {} and {}",
        args.out.join("compare.json").display(),
        args.out.join("compare.csv").display()
    );
    Ok(())
}

pub fn contacts(args: &ContactsArgs) -> CliResult<()> {
    let (config, base) = RunConfig::load(&args.run.config)?;
    ensure_out_dir(&args.run.out)?;
    let section = config
        .contacts
        .as_ref()
        .ok_or_else(|| CliError::config("missing [contacts] section"))?;
    let resolve = |p: &std::path::PathBuf| {
        if p.is_absolute() {
            p.clone()
        } else {
            base.join(p)
        }
    };

    let population: Option<Vec<(String, f64)>> = section
        .population
        .as_ref()
        .map(|p| io::read_group_population_csv(&resolve(p)))
        .transpose()?;

    // source: survey estimation or a ready-made matrix
    let mut matrix: ContactMatrix = match (&section.survey, &section.matrix) {
        (Some(survey), None) => {
            let roster_path = section
                .roster
                .as_ref()
                .ok_or_else(|| CliError::config("[contacts] survey input needs a roster file"))?;
            let rows = io::read_survey_csv(&resolve(survey))?;
            let roster = io::read_roster_csv(&resolve(roster_path))?;
            let records = SurveyRecords::from_rows(&rows, &roster)?;
            let population = population.as_ref().ok_or_else(|| {
                CliError::config("[contacts] survey estimation needs a population file")
            })?;
            let aligned = align_population(records.groups(), population)?;
            estimate_contact_matrix(&records, &aligned)?
        }
        (None, Some(path)) => {
            let (labels, values) = io::read_matrix_csv(&resolve(path))?;
            let pop = match &population {
                Some(p) => align_population(&labels, p)?,
                None => vec![1.0; labels.len()],
            };
            ContactMatrix::new(values, labels, pop)?
        }
        _ => {
            return Err(CliError::config(
                "[contacts] needs exactly one of survey or matrix",
            ))
        }
    };
    println!(
        "contact matrix over {} groups (reciprocity error {:.2e})",
        matrix.n_groups(),
        matrix.reciprocity_error()
    );

    if let Some(grouping) = &section.grouping {
        let map = io::read_grouping_csv(&resolve(grouping))?;
        let fine_population = matrix.population().to_vec();
        matrix = core::aggregate_contact_matrix(&matrix, &map, &fine_population)?;
        println!("aggregated to {} coarse groups", matrix.n_groups());
    }

    let kappa = args.kappa.or(section.kappa);
    if section.normalize || kappa.is_some() {
        matrix = row_normalize(&matrix)?;
    }
    if let Some(kappa) = kappa {
        let (powered, events) = matrix_power_detailed(&matrix, kappa)?;
        for event in &events {
            eprintln!(
                "warning: C^{kappa} entry ({}, {}) = {:.3e} truncated to 0",
                matrix.groups()[event.row],
                matrix.groups()[event.col],
                event.value
            );
        }
        matrix = powered;
        println!("applied power transform with kappa {kappa}");
    }

    let out = args.run.out.join("contacts.csv");
    io::write_matrix_csv(&out, matrix.groups(), matrix.matrix())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn align_population(groups: &[String], entries: &[(String, f64)]) -> CliResult<Vec<f64>> {
    groups
        .iter()
        .map(|g| {
            entries
                .iter()
                .find(|(label, _)| label == g)
                .map(|(_, p)| *p)
                .ok_or_else(|| {
                    CliError::new(
                        "E_LABEL_MISMATCH",
                        format!("no population entry for group {g:?}"),
                    )
                })
        })
        .collect()
}
