//! Mean evaluation: realizes a parameter vector into endemic means, epidemic
//! coefficients and normalized transmission weights.

use ndarray::{Array2, Array3};

use crate::contact::matrix_power;
use crate::data::StratifiedCounts;
use crate::error::{Error, Result};
use crate::model::layout::{ParameterLayout, SeasonalIdx};
use crate::model::{ContactStructure, EpidemicComponent, ModelSpec};
use crate::spatial::{OrderMatrix, WeightConfig};
use crate::week::IsoWeek;

/// Precomputed, parameter-independent context for evaluating one model on one
/// dataset shape (or on a simulation horizon).
#[derive(Debug, Clone)]
pub(crate) struct Engine {
    pub spec: ModelSpec,
    pub layout: ParameterLayout,
    pub n_groups: usize,
    pub n_regions: usize,
    pub n_cells: usize,
    pub n_weeks: usize,
    /// Time-constant population offsets e[g, r].
    pub offset: Array2<f64>,
    pub log_offset: Array2<f64>,
    /// Optional time-varying offsets e[t, g, r].
    pub offset_t: Option<Array3<f64>>,
    /// Seasonal angle terms and the Christmas indicator per week.
    pub sin_t: Vec<f64>,
    pub cos_t: Vec<f64>,
    pub xmas: Vec<f64>,
    /// Realized contact matrix of the weighted epidemic component.
    pub contact: Option<Array2<f64>>,
}

/// Parameter-dependent quantities shared by mean, likelihood and score
/// evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Realized {
    /// Endemic means, (T, N) with cell index `g * R + r`.
    pub nu: Array2<f64>,
    /// Coefficient of the weighted epidemic term per cell.
    pub epi_coef: Option<Vec<f64>>,
    /// Time-varying override when offsets have a time dimension.
    pub epi_coef_t: Option<Array2<f64>>,
    /// Within-cell autoregressive coefficient per cell.
    pub ar_coef: Option<Vec<f64>>,
    /// Jointly normalized contact x spatial weights, rows = source cells.
    pub weights: Option<Array2<f64>>,
    /// Derivative of `weights` with respect to each weight parameter.
    pub weight_grads: Vec<Array2<f64>>,
}

impl Engine {
    pub fn for_data(
        spec: &ModelSpec,
        layout: &ParameterLayout,
        data: &StratifiedCounts,
    ) -> Result<Engine> {
        Engine::new(
            spec,
            layout,
            data.weeks(),
            data.population().clone(),
            data.population_t().cloned(),
        )
    }

    pub fn new(
        spec: &ModelSpec,
        layout: &ParameterLayout,
        weeks: &[IsoWeek],
        offset: Array2<f64>,
        offset_t: Option<Array3<f64>>,
    ) -> Result<Engine> {
        let (n_groups, n_regions) = offset.dim();
        if n_groups != layout.n_groups || n_regions != layout.n_regions {
            return Err(Error::Invalid(format!(
                "offset shape {:?} does not match layout ({}, {})",
                offset.dim(),
                layout.n_groups,
                layout.n_regions
            )));
        }
        let period = spec.endemic.period as f64;
        let mut sin_t = Vec::with_capacity(weeks.len());
        let mut cos_t = Vec::with_capacity(weeks.len());
        let mut xmas = Vec::with_capacity(weeks.len());
        for w in weeks {
            // ISO week 53 shares the angle of week 52.
            let angle =
                2.0 * std::f64::consts::PI * (w.week.min(spec.endemic.period) as f64) / period;
            sin_t.push(angle.sin());
            cos_t.push(angle.cos());
            xmas.push(if w.week == 52 || w.week == 1 {
                1.0
            } else {
                0.0
            });
        }

        let contact = match spec.epidemic.as_ref().and_then(|e| e.weighted_component()) {
            None => None,
            Some(component) => Some(realize_contact(&component.contact, n_groups)?),
        };

        Ok(Engine {
            spec: spec.clone(),
            layout: layout.clone(),
            n_groups,
            n_regions,
            n_cells: n_groups * n_regions,
            log_offset: offset.mapv(f64::ln),
            offset,
            offset_t,
            sin_t,
            cos_t,
            xmas,
            n_weeks: weeks.len(),
            contact,
        })
    }

    /// Whether the epidemic predictor varies over time (population scaling on
    /// time-varying offsets).
    pub fn time_varying_epidemic(&self) -> bool {
        self.offset_t.is_some()
            && self
                .spec
                .epidemic
                .as_ref()
                .and_then(|e| e.weighted_component())
                .map(|c| c.population_scaling)
                .unwrap_or(false)
    }

    pub fn realize(&self, params: &[f64], with_grad: bool) -> Result<Realized> {
        self.layout.check_len(params)?;
        let (g_n, r_n, n) = (self.n_groups, self.n_regions, self.n_cells);
        let layout = &self.layout;

        // Endemic linear predictor and mean.
        let mut eta_base = Array2::zeros((g_n, r_n));
        for g in 0..g_n {
            for r in 0..r_n {
                let mut eta = params[layout.endemic_intercept];
                if let Some(start) = layout.endemic_group {
                    if g > 0 {
                        eta += params[start + g - 1];
                    }
                }
                if let Some(start) = layout.endemic_region {
                    if r > 0 {
                        eta += params[start + r - 1];
                    }
                }
                eta_base[(g, r)] = eta;
            }
        }
        let mut nu = Array2::zeros((self.n_weeks, n));
        for t in 0..self.n_weeks {
            for g in 0..g_n {
                let (sin_coef, cos_coef) = self.seasonal_coefs(params, g);
                for r in 0..r_n {
                    let mut eta =
                        eta_base[(g, r)] + sin_coef * self.sin_t[t] + cos_coef * self.cos_t[t];
                    if let Some(ix) = layout.christmas {
                        eta += params[ix] * self.xmas[t];
                    }
                    let offset = if self.spec.endemic.population_offset {
                        match &self.offset_t {
                            Some(ot) => ot[(t, g, r)],
                            None => self.offset[(g, r)],
                        }
                    } else {
                        1.0
                    };
                    nu[(t, g * r_n + r)] = offset * eta.exp();
                }
            }
        }

        // Autoregressive coefficients.
        let ar_coef = layout.ar.map(|block| {
            let mut coef = vec![0.0; n];
            for g in 0..g_n {
                for r in 0..r_n {
                    let mut eta = params[block.intercept];
                    if let Some(start) = block.group {
                        if g > 0 {
                            eta += params[start + g - 1];
                        }
                    }
                    if let Some(start) = block.region {
                        if r > 0 {
                            eta += params[start + r - 1];
                        }
                    }
                    coef[g * r_n + r] = eta.exp();
                }
            }
            coef
        });

        // Weighted epidemic component.
        let mut epi_coef = None;
        let mut epi_coef_t = None;
        let mut weights = None;
        let mut weight_grads = Vec::new();
        if let (Some(block), Some(component)) = (
            layout.epi,
            self.spec
                .epidemic
                .as_ref()
                .and_then(|e| e.weighted_component()),
        ) {
            let mut eta_gr = Array2::zeros((g_n, r_n));
            for g in 0..g_n {
                for r in 0..r_n {
                    let mut eta = params[block.intercept];
                    if let Some(start) = block.group {
                        if g > 0 {
                            eta += params[start + g - 1];
                        }
                    }
                    if let Some(start) = block.region {
                        if r > 0 {
                            eta += params[start + r - 1];
                        }
                    }
                    eta_gr[(g, r)] = eta;
                }
            }
            if self.time_varying_epidemic() {
                let tau_ix = block.tau.expect("time-varying implies scaling");
                let tau = params[tau_ix];
                let ot = self.offset_t.as_ref().expect("checked");
                let mut coef_t = Array2::zeros((self.n_weeks, n));
                for t in 0..self.n_weeks {
                    for g in 0..g_n {
                        for r in 0..r_n {
                            coef_t[(t, g * r_n + r)] =
                                (eta_gr[(g, r)] + tau * ot[(t, g, r)].ln()).exp();
                        }
                    }
                }
                epi_coef_t = Some(coef_t);
            }
            let mut coef = vec![0.0; n];
            for g in 0..g_n {
                for r in 0..r_n {
                    let mut eta = eta_gr[(g, r)];
                    if let Some(tau_ix) = block.tau {
                        eta += params[tau_ix] * self.log_offset[(g, r)];
                    }
                    coef[g * r_n + r] = eta.exp();
                }
            }
            epi_coef = Some(coef);

            let (start, len) = layout.weights.expect("weighted component has weights");
            let contact = self.contact.as_ref().expect("realized at build");
            let orders = &self.spec.epidemic.as_ref().expect("checked").orders;
            let (m, dm) = build_joint_weights(
                component,
                contact,
                orders,
                &params[start..start + len],
                g_n,
                with_grad,
            )?;
            weights = Some(m);
            weight_grads = dm;
        }

        Ok(Realized {
            nu,
            epi_coef,
            epi_coef_t,
            ar_coef,
            weights,
            weight_grads,
        })
    }

    /// Seasonal (sin, cos) coefficients for group `g`.
    pub fn seasonal_coefs(&self, params: &[f64], g: usize) -> (f64, f64) {
        match self.layout.seasonal {
            SeasonalIdx::None => (0.0, 0.0),
            SeasonalIdx::Shared { start } => (params[start], params[start + 1]),
            SeasonalIdx::PerGroup { start } => (params[start + 2 * g], params[start + 2 * g + 1]),
        }
    }

    /// The epidemic coefficient of cell `n` at time `t`.
    pub fn epi_coef_at(&self, realized: &Realized, t: usize, n: usize) -> f64 {
        match &realized.epi_coef_t {
            Some(ct) => ct[(t, n)],
            None => realized.epi_coef.as_ref().map(|c| c[n]).unwrap_or(0.0),
        }
    }
}

fn realize_contact(structure: &ContactStructure, n_groups: usize) -> Result<Array2<f64>> {
    let matrix = match structure {
        ContactStructure::Fixed { matrix } => matrix.matrix().clone(),
        ContactStructure::PowerFixed { matrix, kappa } => {
            matrix_power(matrix, *kappa)?.matrix().clone()
        }
        ContactStructure::PowerProfiled { .. } => return Err(Error::ProfiledKappaInFit),
        ContactStructure::Identity => Array2::eye(n_groups),
        ContactStructure::AllOnes => Array2::ones((n_groups, n_groups)),
    };
    if matrix.nrows() != n_groups {
        return Err(Error::Invalid(format!(
            "contact matrix covers {} groups, data has {n_groups}",
            matrix.nrows()
        )));
    }
    Ok(matrix)
}

/// Build the jointly normalized (N, N) weight matrix and, optionally, its
/// derivative with respect to each free weight parameter (stored on the log
/// scale).
fn build_joint_weights(
    component: &EpidemicComponent,
    contact: &Array2<f64>,
    orders: &OrderMatrix,
    wparams: &[f64],
    n_groups: usize,
    with_grad: bool,
) -> Result<(Array2<f64>, Vec<Array2<f64>>)> {
    let r_n = orders.n_regions();
    let n = n_groups * r_n;
    let n_params = wparams.len();

    // Spatial weight and its log-scale derivative for source group `gp`,
    // evaluated at adjacency order `o`. Derivatives are with respect to the
    // parameter index within the weight block.
    let include_self = component.spatial.include_self();
    let spatial = |gp: usize, o: u32| -> f64 {
        match &component.spatial {
            WeightConfig::PowerLawWithSelf { group_specific }
            | WeightConfig::PowerLawNoSelf { group_specific } => {
                let rho = if *group_specific {
                    wparams[gp].exp()
                } else {
                    wparams[0].exp()
                };
                if include_self {
                    (o as f64 + 1.0).powf(-rho)
                } else if o == 0 {
                    0.0
                } else {
                    (o as f64).powf(-rho)
                }
            }
            WeightConfig::FreeOrderWeights => {
                if o == 0 {
                    1.0
                } else {
                    wparams[o as usize - 1].exp()
                }
            }
        }
    };
    let spatial_grad = |gp: usize, o: u32, k: usize| -> f64 {
        match &component.spatial {
            WeightConfig::PowerLawWithSelf { group_specific }
            | WeightConfig::PowerLawNoSelf { group_specific } => {
                let owner = if *group_specific { gp } else { 0 };
                if k != owner {
                    return 0.0;
                }
                let rho = wparams[owner].exp();
                let base = if include_self {
                    o as f64 + 1.0
                } else if o == 0 {
                    return 0.0;
                } else {
                    o as f64
                };
                // d/d(log rho) of base^-rho = -rho ln(base) base^-rho
                -rho * base.ln() * base.powf(-rho)
            }
            WeightConfig::FreeOrderWeights => {
                if o as usize == k + 1 {
                    wparams[k].exp()
                } else {
                    0.0
                }
            }
        }
    };

    let mut m = Array2::zeros((n, n));
    let mut dm: Vec<Array2<f64>> = if with_grad {
        (0..n_params).map(|_| Array2::zeros((n, n))).collect()
    } else {
        Vec::new()
    };

    let mut row_u = vec![0.0; n];
    let mut row_du = vec![vec![0.0; n]; if with_grad { n_params } else { 0 }];
    for gp in 0..n_groups {
        for rp in 0..r_n {
            let row = gp * r_n + rp;
            let mut sum = 0.0;
            let mut dsum = vec![0.0; if with_grad { n_params } else { 0 }];
            for gg in 0..n_groups {
                let c = contact[(gp, gg)];
                for rr in 0..r_n {
                    let o = orders.get(rp, rr);
                    let col = gg * r_n + rr;
                    let u = c * spatial(gp, o);
                    row_u[col] = u;
                    sum += u;
                    if with_grad {
                        for k in 0..n_params {
                            let du = c * spatial_grad(gp, o, k);
                            row_du[k][col] = du;
                            dsum[k] += du;
                        }
                    }
                }
            }
            if sum <= 0.0 || sum.is_nan() {
                return Err(Error::ZeroJointRow {
                    group: gp,
                    region: rp,
                });
            }
            for col in 0..n {
                m[(row, col)] = row_u[col] / sum;
            }
            if with_grad {
                for k in 0..n_params {
                    for col in 0..n {
                        dm[k][(row, col)] =
                            row_du[k][col] / sum - row_u[col] * dsum[k] / (sum * sum);
                    }
                }
            }
        }
    }
    Ok((m, dm))
}

/// Conditional means for weeks 2..T given the observed counts.
///
/// Returns a (T-1, G, R) array; index `[s, g, r]` is the mean of week `s + 1`
/// of the data. The first week has no lag available and is treated as a fixed
/// initial condition.
pub fn compute_means(
    spec: &ModelSpec,
    params: &[f64],
    data: &StratifiedCounts,
) -> Result<Array3<f64>> {
    let layout = ParameterLayout::build(spec, data.groups(), data.regions())?;
    let engine = Engine::for_data(spec, &layout, data)?;
    let realized = engine.realize(params, false)?;
    let matrix = mean_matrix(&engine, &realized, &data.stacked())?;
    let (g_n, r_n) = (data.n_groups(), data.n_regions());
    let mut out = Array3::zeros((data.n_weeks() - 1, g_n, r_n));
    for t in 1..data.n_weeks() {
        for g in 0..g_n {
            for r in 0..r_n {
                out[(t - 1, g, r)] = matrix[(t - 1, g * r_n + r)];
            }
        }
    }
    Ok(out)
}

/// Means as a (T-1, N) matrix over stacked cells; row `s` is week `s + 1`.
pub(crate) fn mean_matrix(
    engine: &Engine,
    realized: &Realized,
    ystack: &Array2<f64>,
) -> Result<Array2<f64>> {
    let t_n = engine.n_weeks;
    let n = engine.n_cells;
    // Weighted sums of lagged counts: S[t-1] = y[t-1]^T M, all lags at once.
    let s = realized
        .weights
        .as_ref()
        .map(|m| ystack.slice(ndarray::s![..t_n - 1, ..]).dot(m));
    let mut out = Array2::zeros((t_n - 1, n));
    for t in 1..t_n {
        for cell in 0..n {
            let mut mu = realized.nu[(t, cell)];
            if let Some(ar) = &realized.ar_coef {
                mu += ar[cell] * ystack[(t - 1, cell)];
            }
            if let Some(s) = &s {
                mu += engine.epi_coef_at(realized, t, cell) * s[(t - 1, cell)];
            }
            if !mu.is_finite() || mu <= 0.0 {
                return Err(Error::NonFiniteMean {
                    t,
                    group: format!("index {}", cell / engine.n_regions),
                    region: format!("index {}", cell % engine.n_regions),
                });
            }
            out[(t - 1, cell)] = mu;
        }
    }
    Ok(out)
}

/// The matrix of the process read as a multivariate branching process with
/// immigration: entry `[(g,r), (g',r')]` multiplies `Y[g',r',t-1]` in the
/// epidemic part of the mean for cell `(g, r)`.
///
/// Multiplying it by the stacked lag-1 count vector reproduces the epidemic
/// part of [`compute_means`]. Endemic-only models give the zero matrix. Fails
/// if the epidemic predictor varies over time.
pub fn epidemic_coefficient_matrix(
    spec: &ModelSpec,
    params: &[f64],
    data: &StratifiedCounts,
) -> Result<Array2<f64>> {
    let layout = ParameterLayout::build(spec, data.groups(), data.regions())?;
    let engine = Engine::for_data(spec, &layout, data)?;
    coefficient_matrix(&engine, params)
}

pub(crate) fn coefficient_matrix(engine: &Engine, params: &[f64]) -> Result<Array2<f64>> {
    if engine.time_varying_epidemic() {
        return Err(Error::TimeVaryingEpidemic);
    }
    let realized = engine.realize(params, false)?;
    let n = engine.n_cells;
    let mut b = Array2::zeros((n, n));
    if let (Some(coef), Some(m)) = (&realized.epi_coef, &realized.weights) {
        for dest in 0..n {
            for src in 0..n {
                b[(dest, src)] = coef[dest] * m[(src, dest)];
            }
        }
    }
    if let Some(ar) = &realized.ar_coef {
        for cell in 0..n {
            b[(cell, cell)] += ar[cell];
        }
    }
    Ok(b)
}

/// Calendar week (1..=period) at which the endemic seasonal wave of `group`
/// peaks: the argmax of `gamma sin(omega w) + delta cos(omega w)` over whole
/// weeks. Ties resolve to the earliest week.
pub fn seasonal_peak_week(
    spec: &ModelSpec,
    params: &[f64],
    groups: &[String],
    regions: &[String],
    group: &str,
) -> Result<u32> {
    let layout = ParameterLayout::build(spec, groups, regions)?;
    layout.check_len(params)?;
    let g = groups
        .iter()
        .position(|x| x == group)
        .ok_or_else(|| Error::LabelMismatch {
            detail: format!("unknown group {group:?}"),
        })?;
    let (gamma, delta) = match layout.seasonal {
        SeasonalIdx::None => return Err(Error::NoHarmonics),
        SeasonalIdx::Shared { start } => (params[start], params[start + 1]),
        SeasonalIdx::PerGroup { start } => (params[start + 2 * g], params[start + 2 * g + 1]),
    };
    let period = spec.endemic.period;
    let omega = 2.0 * std::f64::consts::PI / period as f64;
    let mut best_week = 1;
    let mut best = f64::NEG_INFINITY;
    for w in 1..=period {
        let v = gamma * (omega * w as f64).sin() + delta * (omega * w as f64).cos();
        if v > best {
            best = v;
            best_week = w;
        }
    }
    Ok(best_week)
}
