//! Forward stochastic simulation of the fitted process, the epidemic
//! proportion, and the endemic/epidemic decomposition of fitted means.

use ndarray::{Array2, Array3};
use ndarray_linalg::EigVals;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::data::StratifiedCounts;
use crate::error::{Error, Result};
use crate::inference::FitResult;
use crate::model::means::coefficient_matrix;
use crate::model::{Engine, ModelSpec, ParameterLayout, VarianceSpec};
use crate::week::IsoWeek;

/// Everything needed to simulate forward from a model: the spec, a parameter
/// vector, populations, an initial count slice and the calendar position.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub spec: ModelSpec,
    /// Parameters on the transformed scale, in layout order.
    pub params: Vec<f64>,
    pub groups: Vec<String>,
    pub regions: Vec<String>,
    pub population: Array2<f64>,
    /// Fixed initial slice `Y[1, g, r]`; simulation starts one week after it.
    pub initial: Array2<u64>,
    /// Calendar week of the initial slice (drives seasonality).
    pub start_week: IsoWeek,
    /// Number of simulated weeks after the initial slice.
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Per-cell count cap; exceeding it aborts the replicate.
    pub count_cap: u64,
    /// Allow simulating a process with spectral radius >= 1.
    pub allow_explosive: bool,
    /// Worker threads for independent replicates (1 = sequential).
    pub threads: usize,
}

impl SimulationConfig {
    /// Forecast-style setup: continue a fit after the last observed week,
    /// seeding with the final data slice.
    pub fn from_fit(
        fit: &FitResult,
        data: &StratifiedCounts,
        horizon: usize,
        replicates: usize,
        seed: u64,
    ) -> SimulationConfig {
        let last = data.n_weeks() - 1;
        SimulationConfig {
            spec: fit.spec.with_fixed_kappa(fit.fixed_kappa.unwrap_or(1.0)),
            params: fit.estimates.clone(),
            groups: data.groups().to_vec(),
            regions: data.regions().to_vec(),
            population: data.population().clone(),
            initial: data.slice(last).to_owned(),
            start_week: data.weeks()[last],
            horizon,
            replicates,
            seed,
            count_cap: 1_000_000_000,
            allow_explosive: false,
            threads: 1,
        }
    }
}

/// Draw `replicates` independent trajectories of the process.
///
/// Counts follow the negative binomial (gamma-Poisson mixture) or Poisson
/// conditional law with the mean implied by the simulated past. Replicate `i`
/// uses RNG stream `i` of the seeded generator, so output is reproducible and
/// independent of the thread schedule. Each returned lattice includes the
/// initial slice followed by `horizon` simulated weeks.
pub fn simulate(config: &SimulationConfig) -> Result<Vec<StratifiedCounts>> {
    if config.horizon == 0 {
        return Err(Error::Invalid("simulation horizon must be >= 1".into()));
    }
    if config.initial.dim() != config.population.dim() {
        return Err(Error::Invalid(format!(
            "initial slice {:?} does not match population {:?}",
            config.initial.dim(),
            config.population.dim()
        )));
    }
    let layout = ParameterLayout::build(&config.spec, &config.groups, &config.regions)?;
    layout.check_len(&config.params)?;
    let weeks = config.start_week.sequence(config.horizon + 1);
    let engine = Engine::new(
        &config.spec,
        &layout,
        &weeks,
        config.population.clone(),
        None,
    )?;

    let radius = spectral_radius(&coefficient_matrix(&engine, &config.params)?)?;
    if radius >= 1.0 && !config.allow_explosive {
        return Err(Error::ExplosiveProcess {
            spectral_radius: radius,
        });
    }

    let realized = engine.realize(&config.params, false)?;
    let run_one = |replicate: usize| -> Result<StratifiedCounts> {
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(replicate as u64);
        simulate_one(config, &engine, &realized, &weeks, &mut rng)
    };

    if config.threads <= 1 || config.replicates <= 1 {
        (0..config.replicates).map(run_one).collect()
    } else {
        let mut results: Vec<Option<Result<StratifiedCounts>>> =
            (0..config.replicates).map(|_| None).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results_cell = std::sync::Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for _ in 0..config.threads.min(config.replicates) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= config.replicates {
                        break;
                    }
                    let out = run_one(i);
                    results_cell.lock().expect("no poisoned lock")[i] = Some(out);
                });
            }
        });
        results
            .into_iter()
            .map(|r| r.expect("every replicate filled"))
            .collect()
    }
}

fn simulate_one(
    config: &SimulationConfig,
    engine: &Engine,
    realized: &crate::model::means::Realized,
    weeks: &[IsoWeek],
    rng: &mut ChaCha12Rng,
) -> Result<StratifiedCounts> {
    let (g_n, r_n) = config.population.dim();
    let n = g_n * r_n;
    let t_n = config.horizon + 1;
    let mut counts: Array3<u64> = Array3::zeros((t_n, g_n, r_n));
    let mut prev = vec![0.0_f64; n];
    for g in 0..g_n {
        for r in 0..r_n {
            counts[(0, g, r)] = config.initial[(g, r)];
            prev[g * r_n + r] = config.initial[(g, r)] as f64;
        }
    }

    let mut weighted = vec![0.0_f64; n];
    for t in 1..t_n {
        if let Some(m) = &realized.weights {
            for cell in 0..n {
                weighted[cell] = (0..n).map(|src| m[(src, cell)] * prev[src]).sum();
            }
        }
        for g in 0..g_n {
            for r in 0..r_n {
                let cell = g * r_n + r;
                let mut mu = realized.nu[(t, cell)];
                if let Some(ar) = &realized.ar_coef {
                    mu += ar[cell] * prev[cell];
                }
                if realized.weights.is_some() {
                    mu += engine.epi_coef_at(realized, t, cell) * weighted[cell];
                }
                let psi = dispersion_of(&config.spec, &engine.layout, &config.params, g, r);
                let draw = draw_count(mu, psi, rng)?;
                if draw > config.count_cap as f64 {
                    return Err(Error::CountOverflow {
                        t,
                        group: config.groups[g].clone(),
                        region: config.regions[r].clone(),
                        cap: config.count_cap,
                    });
                }
                let y = draw as u64;
                counts[(t, g, r)] = y;
                prev[cell] = y as f64;
            }
        }
    }

    StratifiedCounts::new(
        weeks.to_vec(),
        config.groups.clone(),
        config.regions.clone(),
        counts,
        config.population.clone(),
    )
}

fn dispersion_of(
    spec: &ModelSpec,
    layout: &ParameterLayout,
    params: &[f64],
    g: usize,
    r: usize,
) -> Option<f64> {
    let (start, _) = layout.dispersion?;
    let ix = match spec.variance {
        VarianceSpec::Poisson => return None,
        VarianceSpec::SharedOverdispersion => start,
        VarianceSpec::PerGroupOverdispersion => start + g,
        VarianceSpec::PerRegionOverdispersion => start + r,
    };
    Some(params[ix].exp())
}

/// One negative binomial draw as a gamma-Poisson mixture: the gamma has shape
/// `1/psi` and scale `psi mu`, so the count has mean `mu` and variance
/// `mu (1 + psi mu)`. Poisson when `psi` is absent.
fn draw_count(mu: f64, psi: Option<f64>, rng: &mut ChaCha12Rng) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::Invalid("non-finite simulated mean".into()));
    }
    let lambda = match psi {
        None => mu,
        Some(psi) => {
            let shape = 1.0 / psi;
            let scale = psi * mu;
            let gamma = Gamma::new(shape, scale)
                .map_err(|e| Error::Invalid(format!("gamma mixing draw: {e}")))?;
            gamma.sample(rng)
        }
    };
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    let poisson = Poisson::new(lambda).map_err(|e| Error::Invalid(format!("poisson draw: {e}")))?;
    Ok(poisson.sample(rng))
}

/// Spectral radius (largest eigenvalue modulus) of the epidemic coefficient
/// matrix: the epidemic proportion of disease incidence when the process is
/// read as a multivariate branching process with immigration.
pub fn epidemic_proportion(
    spec: &ModelSpec,
    params: &[f64],
    data: &StratifiedCounts,
) -> Result<f64> {
    let b = crate::model::epidemic_coefficient_matrix(spec, params, data)?;
    spectral_radius(&b)
}

pub(crate) fn spectral_radius(matrix: &Array2<f64>) -> Result<f64> {
    if matrix.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let eigenvalues = matrix.eigvals().map_err(|e| Error::Eigen(e.to_string()))?;
    Ok(eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Aggregation level of the fitted-mean decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    ByGroup,
    ByRegion,
    Total,
}

/// Fitted means split into endemic, within-group epidemic (from the same age
/// group, any region) and between-group epidemic parts. The three components
/// stack exactly to the fitted mean.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Weeks 2..T of the data.
    pub weeks: Vec<IsoWeek>,
    pub labels: Vec<String>,
    /// (T-1, labels) arrays.
    pub endemic: Array2<f64>,
    pub within_group: Array2<f64>,
    pub between_group: Array2<f64>,
}

impl Decomposition {
    pub fn total(&self) -> Array2<f64> {
        &self.endemic + &self.within_group + &self.between_group
    }
}

/// Decompose the fitted mean of `fit` on its data, aggregated as requested.
pub fn mean_decomposition(
    fit: &FitResult,
    data: &StratifiedCounts,
    aggregate: Aggregation,
) -> Result<Decomposition> {
    let spec = fit.spec.with_fixed_kappa(fit.fixed_kappa.unwrap_or(1.0));
    let layout = ParameterLayout::build(&spec, data.groups(), data.regions())?;
    let engine = Engine::for_data(&spec, &layout, data)?;
    let realized = engine.realize(&fit.estimates, false)?;
    let ystack = data.stacked();

    let (t_n, g_n, r_n) = (data.n_weeks(), data.n_groups(), data.n_regions());
    let labels: Vec<String> = match aggregate {
        Aggregation::ByGroup => data.groups().to_vec(),
        Aggregation::ByRegion => data.regions().to_vec(),
        Aggregation::Total => vec!["total".to_string()],
    };
    let slot = |g: usize, r: usize| -> usize {
        match aggregate {
            Aggregation::ByGroup => g,
            Aggregation::ByRegion => r,
            Aggregation::Total => 0,
        }
    };

    let mut endemic = Array2::zeros((t_n - 1, labels.len()));
    let mut within = Array2::zeros((t_n - 1, labels.len()));
    let mut between = Array2::zeros((t_n - 1, labels.len()));

    for t in 1..t_n {
        for g in 0..g_n {
            for r in 0..r_n {
                let cell = g * r_n + r;
                let dest = slot(g, r);
                endemic[(t - 1, dest)] += realized.nu[(t, cell)];
                if let Some(ar) = &realized.ar_coef {
                    within[(t - 1, dest)] += ar[cell] * ystack[(t - 1, cell)];
                }
                if let Some(m) = &realized.weights {
                    let coef = engine.epi_coef_at(&realized, t, cell);
                    for gp in 0..g_n {
                        let mut sum = 0.0;
                        for rp in 0..r_n {
                            let src = gp * r_n + rp;
                            sum += m[(src, cell)] * ystack[(t - 1, src)];
                        }
                        if gp == g {
                            within[(t - 1, dest)] += coef * sum;
                        } else {
                            between[(t - 1, dest)] += coef * sum;
                        }
                    }
                }
            }
        }
    }

    Ok(Decomposition {
        weeks: data.weeks()[1..].to_vec(),
        labels,
        endemic,
        within_group: within,
        between_group: between,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EndemicSpec, Seasonality};
    use crate::synthetic::toy_dataset;

    fn poisson_endemic_spec() -> ModelSpec {
        ModelSpec {
            endemic: EndemicSpec {
                group_intercepts: false,
                region_intercepts: false,
                christmas: false,
                seasonality: Seasonality::None,
                period: 52,
                population_offset: false,
            },
            epidemic: None,
            variance: VarianceSpec::Poisson,
        }
    }

    fn base_config(spec: ModelSpec, params: Vec<f64>) -> SimulationConfig {
        SimulationConfig {
            spec,
            params,
            groups: vec!["g0".into(), "g1".into()],
            regions: vec!["r0".into(), "r1".into()],
            population: Array2::from_elem((2, 2), 1000.0),
            initial: Array2::zeros((2, 2)),
            start_week: IsoWeek::new(2011, 27).unwrap(),
            horizon: 10,
            replicates: 2,
            seed: 7,
            count_cap: 1_000_000_000,
            allow_explosive: false,
            threads: 1,
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let config = base_config(poisson_endemic_spec(), vec![1.5]);
        let a = simulate(&config).unwrap();
        let b = simulate(&config).unwrap();
        assert_eq!(a, b);
        // replicates differ from each other
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn threading_does_not_change_output() {
        let mut config = base_config(poisson_endemic_spec(), vec![1.5]);
        config.replicates = 6;
        let sequential = simulate(&config).unwrap();
        config.threads = 3;
        let parallel = simulate(&config).unwrap();
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn absorbing_zero_state() {
        // endemic intercept -> 0 via a huge negative coefficient is not
        // representable; instead drop the endemic mean to ~0 and verify the
        // epidemic-only process stays at zero from a zero initial slice.
        let spec = ModelSpec {
            endemic: EndemicSpec {
                population_offset: false,
                ..poisson_endemic_spec().endemic
            },
            epidemic: None,
            variance: VarianceSpec::Poisson,
        };
        let config = base_config(spec, vec![-60.0]);
        let out = simulate(&config).unwrap();
        assert_eq!(out[0].total_cases(), 0);
    }

    #[test]
    fn diagonal_spectrum() {
        let m = ndarray::array![[0.2, 0.0], [0.0, 0.5]];
        assert!((spectral_radius(&m).unwrap() - 0.5).abs() < 1e-12);
        let zero = Array2::<f64>::zeros((3, 3));
        assert_eq!(spectral_radius(&zero).unwrap(), 0.0);
    }

    #[test]
    fn endemic_only_epidemic_proportion_is_zero() {
        let data = toy_dataset(8, 2, 2);
        let spec = poisson_endemic_spec();
        let rho = epidemic_proportion(&spec, &[0.3], &data).unwrap();
        assert_eq!(rho, 0.0);
    }
}
