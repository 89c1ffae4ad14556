//! Shared fixtures for the integration test suites.
#![allow(dead_code)]

use epifit_core::*;
use ndarray::Array2;

pub fn path_graph(n: usize) -> RegionGraph {
    let regions: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
    let edges: Vec<(String, String)> = (0..n - 1)
        .map(|i| (format!("r{i}"), format!("r{}", i + 1)))
        .collect();
    RegionGraph::new(regions, &edges).unwrap()
}

pub fn path_orders(n: usize) -> OrderMatrix {
    adjacency_orders(&path_graph(n)).unwrap()
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

pub fn endemic_spec() -> EndemicSpec {
    EndemicSpec {
        group_intercepts: true,
        region_intercepts: true,
        christmas: false,
        seasonality: Seasonality::Shared,
        period: 52,
        population_offset: true,
    }
}

/// Merged-epidemic model on a path graph of `n_regions` regions.
pub fn merged_spec(contact: ContactStructure, n_regions: usize) -> ModelSpec {
    ModelSpec {
        endemic: endemic_spec(),
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

pub fn endemic_only_spec() -> ModelSpec {
    ModelSpec {
        endemic: endemic_spec(),
        epidemic: None,
        variance: VarianceSpec::SharedOverdispersion,
    }
}

/// Population surface with mild variation across cells.
pub fn population(g: usize, r: usize) -> Array2<f64> {
    Array2::from_shape_fn((g, r), |(gi, ri)| {
        30_000.0 + 12_000.0 * gi as f64 + 5_000.0 * ((gi + 2 * ri) % 5) as f64
    })
}

/// Simulate one dataset from the model; panics on failure.
pub fn simulate_dataset(
    spec: &ModelSpec,
    params: &[f64],
    g: usize,
    r: usize,
    weeks: usize,
    seed: u64,
) -> StratifiedCounts {
    let groups: Vec<String> = (0..g).map(|i| format!("g{i}")).collect();
    let regions: Vec<String> = (0..r).map(|i| format!("r{i}")).collect();
    let pop = population(g, r);
    let config = SimulationConfig {
        spec: spec.clone(),
        params: params.to_vec(),
        groups,
        regions,
        population: pop,
        initial: Array2::from_elem((g, r), 3),
        start_week: IsoWeek::new(2011, 27).unwrap(),
        horizon: weeks - 1,
        replicates: 1,
        seed,
        count_cap: 1_000_000_000,
        allow_explosive: false,
        threads: 1,
    };
    simulate(&config).unwrap().remove(0)
}

/// Named parameter setter on top of the layout.
pub fn set_params(spec: &ModelSpec, data: &StratifiedCounts, entries: &[(&str, f64)]) -> Vec<f64> {
    let layout = ParameterLayout::build(spec, data.groups(), data.regions()).unwrap();
    let mut params = vec![0.0; layout.len()];
    for (name, value) in entries {
        params[layout.index_of(name).unwrap()] = *value;
    }
    params
}
