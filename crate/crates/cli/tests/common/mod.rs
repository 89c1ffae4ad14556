//! Helpers shared by the CLI test suites: synthetic dataset generation and
//! on-disk fixtures for driving the binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use epifit_core::*;
use ndarray::Array2;

pub fn epifit_bin() -> &'static str {
    env!("CARGO_BIN_EXE_epifit")
}

pub fn run_epifit(dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(epifit_bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

/// First stderr line of a failed run, which carries the machine-parsable code.
pub fn error_line(output: &Output) -> String {
    assert!(!output.status.success(), "expected a failing run");
    String::from_utf8_lossy(&output.stderr)
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

pub fn path_orders(n: usize) -> OrderMatrix {
    adjacency_orders(&path_graph(n)).unwrap()
}

pub fn path_graph(n: usize) -> RegionGraph {
    let regions: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
    let edges: Vec<(String, String)> = (0..n - 1)
        .map(|i| (format!("r{i}"), format!("r{}", i + 1)))
        .collect();
    RegionGraph::new(regions, &edges).unwrap()
}

pub fn path_edges(n: usize) -> Vec<(String, String)> {
    (0..n - 1)
        .map(|i| (format!("r{i}"), format!("r{}", i + 1)))
        .collect()
}

/// Row-normalized assortative contact matrix for `g` groups.
pub fn small_contact(g: usize) -> ContactMatrix {
    let mut values = Array2::from_elem((g, g), 0.3);
    for i in 0..g {
        values[(i, i)] = 1.2;
        if i + 1 < g {
            values[(i, i + 1)] = 0.6;
            values[(i + 1, i)] = 0.5;
        }
    }
    let groups = (0..g).map(|i| format!("g{i}")).collect();
    let c = ContactMatrix::new(values, groups, vec![1000.0; g]).unwrap();
    row_normalize(&c).unwrap()
}

pub fn population(g: usize, r: usize) -> Array2<f64> {
    Array2::from_shape_fn((g, r), |(gi, ri)| {
        30_000.0 + 12_000.0 * gi as f64 + 5_000.0 * ((gi + 2 * ri) % 5) as f64
    })
}

/// Populations with a wide spread across cells; the stronger offset contrast
/// pins down the gravity exponent in recovery studies.
pub fn wide_population(g: usize, r: usize) -> Array2<f64> {
    Array2::from_shape_fn((g, r), |(gi, ri)| {
        20_000.0 + 18_000.0 * gi as f64 + 9_000.0 * ((gi + 2 * ri) % 5) as f64
    })
}

/// The simulation-recovery model: merged epidemic with power-adjusted
/// contacts on a path graph.
pub fn recovery_spec(contact: ContactStructure, n_regions: usize) -> ModelSpec {
    ModelSpec {
        endemic: EndemicSpec {
            group_intercepts: true,
            region_intercepts: true,
            christmas: false,
            seasonality: Seasonality::Shared,
            period: 52,
            population_offset: true,
        },
        epidemic: Some(EpidemicSpec {
            structure: EpidemicStructure::Merged {
                component: EpidemicComponent {
                    group_effects: false,
                    region_effects: false,
                    population_scaling: true,
                    contact,
                    spatial: WeightConfig::PowerLawWithSelf {
                        group_specific: false,
                    },
                },
            },
            orders: path_orders(n_regions),
        }),
        variance: VarianceSpec::SharedOverdispersion,
    }
}

pub fn set_params(spec: &ModelSpec, g: usize, r: usize, entries: &[(&str, f64)]) -> Vec<f64> {
    let groups: Vec<String> = (0..g).map(|i| format!("g{i}")).collect();
    let regions: Vec<String> = (0..r).map(|i| format!("r{i}")).collect();
    let layout = ParameterLayout::build(spec, &groups, &regions).unwrap();
    let mut params = vec![0.0; layout.len()];
    for (name, value) in entries {
        params[layout.index_of(name).unwrap()] = *value;
    }
    params
}

pub fn simulate_replicates(
    spec: &ModelSpec,
    params: &[f64],
    g: usize,
    r: usize,
    weeks: usize,
    replicates: usize,
    seed: u64,
) -> Vec<StratifiedCounts> {
    simulate_with_population(spec, params, population(g, r), weeks, replicates, seed)
}

pub fn simulate_with_population(
    spec: &ModelSpec,
    params: &[f64],
    population: Array2<f64>,
    weeks: usize,
    replicates: usize,
    seed: u64,
) -> Vec<StratifiedCounts> {
    let (g, r) = population.dim();
    let config = SimulationConfig {
        spec: spec.clone(),
        params: params.to_vec(),
        groups: (0..g).map(|i| format!("g{i}")).collect(),
        regions: (0..r).map(|i| format!("r{i}")).collect(),
        population,
        initial: Array2::from_elem((g, r), 3),
        start_week: IsoWeek::new(2011, 27).unwrap(),
        horizon: weeks - 1,
        replicates,
        seed,
        count_cap: 1_000_000_000,
        allow_explosive: false,
        threads: 1,
    };
    simulate(&config).unwrap()
}

/// Write a dataset (and optionally a contact matrix) as the CSV files the
/// CLI ingests; returns the data file names used in configs.
pub fn write_dataset_files(
    dir: &Path,
    data: &StratifiedCounts,
    edges: &[(String, String)],
    contacts: Option<&ContactMatrix>,
) {
    epifit_cli::io::write_counts_csv(&dir.join("counts.csv"), data).unwrap();
    epifit_cli::io::write_population_csv(&dir.join("population.csv"), data).unwrap();
    let mut wtr = csv::Writer::from_path(dir.join("adjacency.csv")).unwrap();
    wtr.write_record(["region_a", "region_b"]).unwrap();
    for (a, b) in edges {
        wtr.write_record([a, b]).unwrap();
    }
    wtr.flush().unwrap();
    if let Some(c) = contacts {
        epifit_cli::io::write_matrix_csv(&dir.join("contacts.csv"), c.groups(), c.matrix())
            .unwrap();
    }
}

pub fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}
