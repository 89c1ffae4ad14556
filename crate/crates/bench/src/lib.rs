//! Shared fixtures for the benchmarks: a Berlin-sized synthetic dataset and
//! the model that generated it.

use epifit_core::synthetic::{berlin_population, berlin_shaped_spec, BerlinContact};
use epifit_core::*;
use ndarray::Array2;

pub fn berlin_sized_spec() -> ModelSpec {
    berlin_shaped_spec(BerlinContact::PowerFixed(0.5))
}

/// Plausible parameter values for the Berlin-shaped model.
pub fn berlin_sized_params(spec: &ModelSpec, data: &StratifiedCounts) -> Vec<f64> {
    let layout = ParameterLayout::build(spec, data.groups(), data.regions()).unwrap();
    let mut params = layout.default_init(spec, data);
    for (i, def) in layout.defs().iter().enumerate() {
        match def.name.as_str() {
            "endemic.intercept" => params[i] = -10.3,
            "epidemic.tau" => params[i] = 0.86,
            "spatial.rho" => params[i] = (2.27_f64).ln(),
            name if name.starts_with("endemic.sin") => params[i] = 0.5,
            name if name.starts_with("endemic.cos") => params[i] = 0.3,
            name if name.starts_with("dispersion") => params[i] = (0.3_f64).ln(),
            _ => {}
        }
    }
    // coefficient giving a subcritical epidemic part at Berlin populations
    let b0 = layout.index_of("epidemic.intercept").unwrap();
    params[b0] = (0.5_f64).ln() - 0.86 * data.population().mapv(f64::ln).mean().unwrap();
    params
}

/// One simulated season lattice at the Berlin dimensions (209 weeks, 6 age
/// groups, 12 districts).
pub fn berlin_sized_dataset() -> (ModelSpec, Vec<f64>, StratifiedCounts) {
    let spec = berlin_sized_spec();
    let seed_data = StratifiedCounts::new(
        IsoWeek::new(2011, 27).unwrap().sequence(2),
        epifit_core::synthetic::AGE_GROUPS
            .iter()
            .map(|s| s.to_string())
            .collect(),
        epifit_core::synthetic::DISTRICTS
            .iter()
            .map(|s| s.to_string())
            .collect(),
        ndarray::Array3::from_elem((2, 6, 12), 3u64),
        berlin_population(),
    )
    .unwrap();
    let params = berlin_sized_params(&spec, &seed_data);
    let config = SimulationConfig {
        spec: spec.clone(),
        params: params.clone(),
        groups: seed_data.groups().to_vec(),
        regions: seed_data.regions().to_vec(),
        population: berlin_population(),
        initial: Array2::from_elem((6, 12), 3),
        start_week: IsoWeek::new(2011, 27).unwrap(),
        horizon: 208,
        replicates: 1,
        seed: 11,
        count_cap: 1_000_000_000,
        allow_explosive: false,
        threads: 1,
    };
    let data = simulate(&config).unwrap().remove(0);
    (spec, params, data)
}
