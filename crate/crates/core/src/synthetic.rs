//! Ready-made fixtures: a Berlin-like study region with six age groups and
//! twelve districts. Used by the test suites and benchmarks, and handy for
//! trying the API without real data.

use ndarray::{Array2, Array3};

use crate::contact::{row_normalize, ContactMatrix};
use crate::data::StratifiedCounts;
use crate::model::{
    ContactStructure, EndemicSpec, EpidemicComponent, EpidemicSpec, EpidemicStructure, ModelSpec,
    Seasonality, VarianceSpec,
};
use crate::spatial::{adjacency_orders, OrderMatrix, RegionGraph, WeightConfig};
use crate::week::IsoWeek;

pub const AGE_GROUPS: [&str; 6] = ["00-04", "05-14", "15-24", "25-44", "45-64", "65+"];

/// Rough Berlin age-group populations (persons).
pub const GROUP_POPULATION: [f64; 6] = [
    170_000.0,
    270_000.0,
    370_000.0,
    1_090_000.0,
    930_000.0,
    670_000.0,
];

pub const DISTRICTS: [&str; 12] = [
    "Charlottenburg-Wilmersdorf",
    "Friedrichshain-Kreuzberg",
    "Lichtenberg",
    "Marzahn-Hellersdorf",
    "Mitte",
    "Neukoelln",
    "Pankow",
    "Reinickendorf",
    "Spandau",
    "Steglitz-Zehlendorf",
    "Tempelhof-Schoeneberg",
    "Treptow-Koepenick",
];

/// First-order neighbour pairs of the twelve Berlin districts. The breadth
/// first orders on this graph reach a maximum of four hops.
pub fn district_edges() -> Vec<(String, String)> {
    [
        ("Mitte", "Friedrichshain-Kreuzberg"),
        ("Mitte", "Pankow"),
        ("Mitte", "Reinickendorf"),
        ("Mitte", "Charlottenburg-Wilmersdorf"),
        ("Mitte", "Tempelhof-Schoeneberg"),
        ("Friedrichshain-Kreuzberg", "Pankow"),
        ("Friedrichshain-Kreuzberg", "Lichtenberg"),
        ("Friedrichshain-Kreuzberg", "Treptow-Koepenick"),
        ("Friedrichshain-Kreuzberg", "Neukoelln"),
        ("Friedrichshain-Kreuzberg", "Tempelhof-Schoeneberg"),
        ("Pankow", "Reinickendorf"),
        ("Pankow", "Lichtenberg"),
        ("Charlottenburg-Wilmersdorf", "Spandau"),
        ("Charlottenburg-Wilmersdorf", "Steglitz-Zehlendorf"),
        ("Charlottenburg-Wilmersdorf", "Tempelhof-Schoeneberg"),
        ("Charlottenburg-Wilmersdorf", "Reinickendorf"),
        ("Spandau", "Steglitz-Zehlendorf"),
        ("Spandau", "Reinickendorf"),
        ("Steglitz-Zehlendorf", "Tempelhof-Schoeneberg"),
        ("Tempelhof-Schoeneberg", "Neukoelln"),
        ("Neukoelln", "Treptow-Koepenick"),
        ("Treptow-Koepenick", "Lichtenberg"),
        ("Treptow-Koepenick", "Marzahn-Hellersdorf"),
        ("Lichtenberg", "Marzahn-Hellersdorf"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

pub fn district_graph() -> RegionGraph {
    RegionGraph::new(
        DISTRICTS.iter().map(|s| s.to_string()).collect(),
        &district_edges(),
    )
    .expect("fixture graph is valid")
}

pub fn district_orders() -> OrderMatrix {
    adjacency_orders(&district_graph()).expect("fixture graph is connected")
}

/// A plausible six-group daily contact matrix: strongly assortative with a
/// parent-child band, in mean contact persons per participant and day.
pub fn contact_matrix() -> ContactMatrix {
    let values = Array2::from_shape_vec(
        (6, 6),
        vec![
            1.7, 1.1, 0.7, 2.4, 0.9, 0.4, //
            0.9, 6.9, 1.0, 2.6, 1.1, 0.4, //
            0.5, 1.0, 5.0, 3.0, 1.4, 0.4, //
            1.0, 1.5, 1.7, 4.5, 2.0, 0.6, //
            0.4, 0.8, 1.0, 2.5, 3.2, 0.9, //
            0.3, 0.5, 0.4, 1.3, 1.4, 2.0,
        ],
    )
    .expect("shape");
    ContactMatrix::new(
        values,
        AGE_GROUPS.iter().map(|s| s.to_string()).collect(),
        GROUP_POPULATION.to_vec(),
    )
    .expect("fixture matrix is valid")
}

pub fn normalized_contact_matrix() -> ContactMatrix {
    row_normalize(&contact_matrix()).expect("no zero rows")
}

/// Contact structure selector for [`berlin_shaped_spec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BerlinContact {
    /// Endemic-only model, no epidemic component at all.
    None,
    Fixed,
    PowerFixed(f64),
    PowerProfiled,
    Identity,
    AllOnes,
}

/// The model family used for the Berlin norovirus analysis: endemic intercept
/// with group and region levels, a Christmas indicator and group-specific
/// yearly harmonics; an epidemic component with group and region effects,
/// population scaling and a spatial power law; group-specific overdispersion.
pub fn berlin_shaped_spec(contact: BerlinContact) -> ModelSpec {
    let endemic = EndemicSpec {
        group_intercepts: true,
        region_intercepts: true,
        christmas: true,
        seasonality: Seasonality::PerGroup,
        period: 52,
        population_offset: true,
    };
    let contact_structure = match contact {
        BerlinContact::None => None,
        BerlinContact::Fixed => Some(ContactStructure::Fixed {
            matrix: normalized_contact_matrix(),
        }),
        BerlinContact::PowerFixed(kappa) => Some(ContactStructure::PowerFixed {
            matrix: normalized_contact_matrix(),
            kappa,
        }),
        BerlinContact::PowerProfiled => Some(ContactStructure::PowerProfiled {
            matrix: normalized_contact_matrix(),
        }),
        BerlinContact::Identity => Some(ContactStructure::Identity),
        BerlinContact::AllOnes => Some(ContactStructure::AllOnes),
    };
    let epidemic = contact_structure.map(|contact| EpidemicSpec {
        structure: EpidemicStructure::Merged {
            component: EpidemicComponent {
                group_effects: true,
                region_effects: true,
                population_scaling: true,
                contact,
                spatial: WeightConfig::PowerLawWithSelf {
                    group_specific: false,
                },
            },
        },
        orders: district_orders(),
    });
    ModelSpec {
        endemic,
        epidemic,
        variance: VarianceSpec::PerGroupOverdispersion,
    }
}

/// A small dense lattice with deterministic pseudo-counts, for shape-level
/// tests that do not care about the data generating process.
pub fn toy_dataset(n_weeks: usize, n_groups: usize, n_regions: usize) -> StratifiedCounts {
    let weeks = IsoWeek::new(2011, 27).expect("valid").sequence(n_weeks);
    let groups: Vec<String> = (0..n_groups).map(|g| format!("g{g:02}")).collect();
    let regions: Vec<String> = (0..n_regions).map(|r| format!("r{r:02}")).collect();
    let mut counts = Array3::zeros((n_weeks, n_groups, n_regions));
    for ((t, g, r), y) in counts.indexed_iter_mut() {
        // arbitrary but deterministic positive pattern
        *y = ((3 + 5 * t + 7 * g + 11 * r) % 13) as u64;
    }
    let mut population = Array2::zeros((n_groups, n_regions));
    for ((g, r), p) in population.indexed_iter() {
        let _ = (g, r, p);
    }
    for g in 0..n_groups {
        for r in 0..n_regions {
            population[(g, r)] = 20_000.0 + 13_000.0 * g as f64 + 4_500.0 * r as f64;
        }
    }
    StratifiedCounts::new(weeks, groups, regions, counts, population).expect("valid fixture")
}

/// Populations for the full Berlin-shaped lattice, split across districts.
pub fn berlin_population() -> Array2<f64> {
    let mut population = Array2::zeros((6, 12));
    // Uneven district shares that sum to one.
    let shares = [
        0.094, 0.078, 0.072, 0.070, 0.096, 0.089, 0.104, 0.069, 0.064, 0.083, 0.095, 0.086,
    ];
    for g in 0..6 {
        for r in 0..12 {
            population[(g, r)] = GROUP_POPULATION[g] * shares[r];
        }
    }
    population
}

/// Check the fixtures stay consistent.
#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_is_connected_with_max_order_four() {
        let orders = district_orders();
        assert_eq!(orders.max_order(), 4);
    }

    #[test]
    fn district_share_sums() {
        let pop = berlin_population();
        for g in 0..6 {
            let total: f64 = (0..12).map(|r| pop[(g, r)]).sum();
            assert!((total / GROUP_POPULATION[g] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn contact_fixture_normalizes() {
        let c = normalized_contact_matrix();
        assert!(c.is_row_normalized());
    }
}
