//! Flat parameter vector layout with named entries.
//!
//! Free parameters are stored on an unconstrained scale: overdispersion,
//! spatial decay and free order weights as logs, regression coefficients as
//! is. The first group and region effects are fixed by identifiability
//! constraints and never appear in the vector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Seasonality, VarianceSpec};
use crate::spatial::WeightConfig;

/// How a stored value maps to the natural parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// Stored value is the natural logarithm of the parameter.
    Log,
}

impl Transform {
    pub fn to_natural(self, value: f64) -> f64 {
        match self {
            Transform::Identity => value,
            Transform::Log => value.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub transform: Transform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum SeasonalIdx {
    None,
    /// One (sin, cos) pair at `start`.
    Shared {
        start: usize,
    },
    /// G pairs, group g at `start + 2 g`.
    PerGroup {
        start: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BlockIdx {
    pub intercept: usize,
    pub group: Option<usize>,
    pub region: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EpiIdx {
    pub intercept: usize,
    pub group: Option<usize>,
    pub region: Option<usize>,
    pub tau: Option<usize>,
}

/// Named layout of the free parameter vector for one model and dataset shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    defs: Vec<ParamDef>,
    pub(crate) n_groups: usize,
    pub(crate) n_regions: usize,
    pub(crate) endemic_intercept: usize,
    pub(crate) endemic_group: Option<usize>,
    pub(crate) endemic_region: Option<usize>,
    pub(crate) christmas: Option<usize>,
    pub(crate) seasonal: SeasonalIdx,
    pub(crate) ar: Option<BlockIdx>,
    pub(crate) epi: Option<EpiIdx>,
    pub(crate) weights: Option<(usize, usize)>,
    pub(crate) dispersion: Option<(usize, usize)>,
}

impl ParameterLayout {
    /// Enumerate the free parameters of `spec` for the given group and region
    /// labels.
    pub fn build(spec: &ModelSpec, groups: &[String], regions: &[String]) -> Result<Self> {
        spec.validate()?;
        let (g, r) = (groups.len(), regions.len());
        if g == 0 || r == 0 {
            return Err(Error::Invalid("need at least one group and region".into()));
        }
        if let Some(epi) = &spec.epidemic {
            if epi.orders.n_regions() != r {
                return Err(Error::Invalid(format!(
                    "order matrix covers {} regions, data has {r}",
                    epi.orders.n_regions()
                )));
            }
            for component in epi.components() {
                use crate::model::ContactStructure::*;
                if let Fixed { matrix } | PowerFixed { matrix, .. } | PowerProfiled { matrix } =
                    &component.contact
                {
                    if matrix.n_groups() != g {
                        return Err(Error::Invalid(format!(
                            "contact matrix covers {} groups, data has {g}",
                            matrix.n_groups()
                        )));
                    }
                }
            }
        }

        let mut defs: Vec<ParamDef> = Vec::new();
        let push = |name: String, transform: Transform, defs: &mut Vec<ParamDef>| -> usize {
            defs.push(ParamDef { name, transform });
            defs.len() - 1
        };

        let endemic_intercept = push("endemic.intercept".into(), Transform::Identity, &mut defs);
        let endemic_group = spec.endemic.group_intercepts.then(|| {
            let start = defs.len();
            for label in &groups[1..] {
                push(
                    format!("endemic.group.{label}"),
                    Transform::Identity,
                    &mut defs,
                );
            }
            start
        });
        let endemic_region = spec.endemic.region_intercepts.then(|| {
            let start = defs.len();
            for label in &regions[1..] {
                push(
                    format!("endemic.region.{label}"),
                    Transform::Identity,
                    &mut defs,
                );
            }
            start
        });
        let christmas = spec
            .endemic
            .christmas
            .then(|| push("endemic.christmas".into(), Transform::Identity, &mut defs));
        let seasonal = match spec.endemic.seasonality {
            Seasonality::None => SeasonalIdx::None,
            Seasonality::Shared => {
                let start = defs.len();
                push("endemic.sin".into(), Transform::Identity, &mut defs);
                push("endemic.cos".into(), Transform::Identity, &mut defs);
                SeasonalIdx::Shared { start }
            }
            Seasonality::PerGroup => {
                let start = defs.len();
                for label in groups {
                    push(
                        format!("endemic.sin.{label}"),
                        Transform::Identity,
                        &mut defs,
                    );
                    push(
                        format!("endemic.cos.{label}"),
                        Transform::Identity,
                        &mut defs,
                    );
                }
                SeasonalIdx::PerGroup { start }
            }
        };

        let mut ar = None;
        let mut epi = None;
        let mut weights = None;
        if let Some(espec) = &spec.epidemic {
            if let Some(arc) = espec.autoregressive() {
                let intercept = push("ar.intercept".into(), Transform::Identity, &mut defs);
                let group = arc.group_effects.then(|| {
                    let start = defs.len();
                    for label in &groups[1..] {
                        push(format!("ar.group.{label}"), Transform::Identity, &mut defs);
                    }
                    start
                });
                let region = arc.region_effects.then(|| {
                    let start = defs.len();
                    for label in &regions[1..] {
                        push(format!("ar.region.{label}"), Transform::Identity, &mut defs);
                    }
                    start
                });
                ar = Some(BlockIdx {
                    intercept,
                    group,
                    region,
                });
            }
            if let Some(component) = espec.weighted_component() {
                let intercept = push("epidemic.intercept".into(), Transform::Identity, &mut defs);
                let group = component.group_effects.then(|| {
                    let start = defs.len();
                    for label in &groups[1..] {
                        push(
                            format!("epidemic.group.{label}"),
                            Transform::Identity,
                            &mut defs,
                        );
                    }
                    start
                });
                let region = component.region_effects.then(|| {
                    let start = defs.len();
                    for label in &regions[1..] {
                        push(
                            format!("epidemic.region.{label}"),
                            Transform::Identity,
                            &mut defs,
                        );
                    }
                    start
                });
                let tau = component
                    .population_scaling
                    .then(|| push("epidemic.tau".into(), Transform::Identity, &mut defs));
                epi = Some(EpiIdx {
                    intercept,
                    group,
                    region,
                    tau,
                });

                let start = defs.len();
                match &component.spatial {
                    WeightConfig::PowerLawWithSelf { group_specific }
                    | WeightConfig::PowerLawNoSelf { group_specific } => {
                        if *group_specific {
                            for label in groups {
                                push(format!("spatial.rho.{label}"), Transform::Log, &mut defs);
                            }
                        } else {
                            push("spatial.rho".into(), Transform::Log, &mut defs);
                        }
                    }
                    WeightConfig::FreeOrderWeights => {
                        for order in 1..=espec.orders.max_order() {
                            push(
                                format!("spatial.weight.order{order}"),
                                Transform::Log,
                                &mut defs,
                            );
                        }
                    }
                }
                weights = Some((start, defs.len() - start));
            }
        }

        let dispersion = match spec.variance {
            VarianceSpec::Poisson => None,
            VarianceSpec::SharedOverdispersion => {
                let start = defs.len();
                push("dispersion.psi".into(), Transform::Log, &mut defs);
                Some((start, 1))
            }
            VarianceSpec::PerGroupOverdispersion => {
                let start = defs.len();
                for label in groups {
                    push(format!("dispersion.psi.{label}"), Transform::Log, &mut defs);
                }
                Some((start, g))
            }
            VarianceSpec::PerRegionOverdispersion => {
                let start = defs.len();
                for label in regions {
                    push(format!("dispersion.psi.{label}"), Transform::Log, &mut defs);
                }
                Some((start, r))
            }
        };

        Ok(ParameterLayout {
            defs,
            n_groups: g,
            n_regions: r,
            endemic_intercept,
            endemic_group,
            endemic_region,
            christmas,
            seasonal,
            ar,
            epi,
            weights,
            dispersion,
        })
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn defs(&self) -> &[ParamDef] {
        &self.defs
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.iter().map(|d| d.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.defs
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UnknownParameter {
                name: name.to_string(),
            })
    }

    /// Map named values to a vector in layout order.
    pub fn pack(&self, named: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        if named.len() != self.defs.len() {
            return Err(Error::ParameterLength {
                expected: self.defs.len(),
                got: named.len(),
            });
        }
        self.defs
            .iter()
            .map(|d| {
                named
                    .get(&d.name)
                    .copied()
                    .ok_or_else(|| Error::UnknownParameter {
                        name: d.name.clone(),
                    })
            })
            .collect()
    }

    /// Map a vector in layout order to named values.
    pub fn unpack(&self, values: &[f64]) -> Result<BTreeMap<String, f64>> {
        self.check_len(values)?;
        Ok(self
            .defs
            .iter()
            .zip(values)
            .map(|(d, &v)| (d.name.clone(), v))
            .collect())
    }

    pub(crate) fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.defs.len() {
            return Err(Error::ParameterLength {
                expected: self.defs.len(),
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Deterministic, scale-aware starting point: the endemic intercept at
    /// the log of the mean count over the mean offset; `tau` at one with the
    /// epidemic intercept offsetting the population scale so the epidemic
    /// coefficient starts at 0.1 per cell; everything else at zero
    /// (multiplicative effects at one).
    ///
    /// Starting the epidemic intercept at zero alongside `tau = 1` would set
    /// the initial epidemic coefficient equal to the cell population, which
    /// reliably sends the optimizer into a degenerate endemic-only mode.
    pub fn default_init(&self, spec: &ModelSpec, data: &crate::data::StratifiedCounts) -> Vec<f64> {
        let mut x = vec![0.0; self.defs.len()];
        let mean_count =
            data.counts().iter().map(|&y| y as f64).sum::<f64>() / data.counts().len() as f64;
        let mean_offset = if spec.endemic.population_offset {
            data.population().mean().unwrap_or(1.0)
        } else {
            1.0
        };
        x[self.endemic_intercept] = (mean_count.max(1e-8) / mean_offset).ln();
        let start_coef = 0.1_f64.ln();
        if let Some(epi) = self.epi {
            match epi.tau {
                Some(tau) => {
                    x[tau] = 1.0;
                    let mean_log_offset = data.population().mapv(f64::ln).mean().unwrap_or(0.0);
                    x[epi.intercept] = start_coef - mean_log_offset;
                }
                None => x[epi.intercept] = start_coef,
            }
        }
        if let Some(ar) = self.ar {
            x[ar.intercept] = start_coef;
        }
        x
    }
}
