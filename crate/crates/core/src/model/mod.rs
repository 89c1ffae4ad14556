//! Declarative model specification and evaluation of the conditional mean.
//!
//! The observation at week `t`, group `g`, region `r` has conditional mean
//!
//! ```text
//! mu[g,r,t] = e[g,r] * exp(endemic predictor)
//!           + coef[g,r] * sum over (g',r') of nw[(g',r'),(g,r)] * Y[g',r',t-1]
//! ```
//!
//! where `nw` are the contact x spatial weights, jointly row-normalized over
//! all destination cells, and `coef` carries the epidemic intercept, group and
//! region effects and the population scaling `e^tau`. A three-component
//! variant splits the epidemic part into within-cell autoregression and a
//! neighbourhood term with zero-diagonal spatial weights.

pub(crate) mod layout;
pub(crate) mod means;

pub use layout::{ParamDef, ParameterLayout, Transform};
pub(crate) use means::Engine;
pub use means::{compute_means, epidemic_coefficient_matrix, seasonal_peak_week};

use serde::{Deserialize, Serialize};

use crate::contact::ContactMatrix;
use crate::error::{Error, Result};
use crate::spatial::{OrderMatrix, WeightConfig};

/// Endemic component: which terms enter the log-linear baseline predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndemicSpec {
    /// Group-specific intercepts (first group fixed to zero).
    pub group_intercepts: bool,
    /// Region-specific intercepts (first region fixed to zero).
    pub region_intercepts: bool,
    /// Calendar indicator for ISO weeks 52 and 1.
    pub christmas: bool,
    /// Sine-cosine pair of the yearly seasonal wave.
    pub seasonality: Seasonality,
    /// Seasonal period in weeks; week 53 maps onto the same angle as week 52.
    pub period: u32,
    /// Multiply the endemic mean by the population of the stratum.
    pub population_offset: bool,
}

impl Default for EndemicSpec {
    fn default() -> Self {
        EndemicSpec {
            group_intercepts: false,
            region_intercepts: false,
            christmas: false,
            seasonality: Seasonality::None,
            period: 52,
            population_offset: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seasonality {
    None,
    Shared,
    PerGroup,
}

/// Contact structure of the epidemic component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ContactStructure {
    /// A given contact matrix, used as is.
    Fixed { matrix: ContactMatrix },
    /// `C^kappa` with a known exponent.
    PowerFixed { matrix: ContactMatrix, kappa: f64 },
    /// `C^kappa` with the exponent estimated by profile likelihood.
    PowerProfiled { matrix: ContactMatrix },
    /// No mixing between groups.
    Identity,
    /// Homogeneous mixing (a matrix of ones).
    AllOnes,
}

impl ContactStructure {
    pub fn profiles_kappa(&self) -> bool {
        matches!(self, ContactStructure::PowerProfiled { .. })
    }
}

/// One observation-driven component: group/region effects, population
/// scaling, and the contact and spatial weight structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicComponent {
    pub group_effects: bool,
    pub region_effects: bool,
    /// Scale by the importing cell's population, `e[g,r]^tau`.
    pub population_scaling: bool,
    pub contact: ContactStructure,
    pub spatial: WeightConfig,
}

/// Within-cell autoregression of the three-component variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ArComponent {
    pub group_effects: bool,
    pub region_effects: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum EpidemicStructure {
    /// A single epidemic component over all cells (the default).
    Merged { component: EpidemicComponent },
    /// Separate within-cell autoregression and between-region neighbourhood
    /// effects; the neighbourhood spatial weights have a zero diagonal.
    ThreeComponent {
        autoregressive: Option<ArComponent>,
        neighbourhood: Option<EpidemicComponent>,
    },
}

/// Epidemic specification: the structure plus the adjacency orders of the
/// region graph it operates on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicSpec {
    pub structure: EpidemicStructure,
    pub orders: OrderMatrix,
}

/// Conditional variance structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSpec {
    /// Variance equals the mean.
    Poisson,
    /// One overdispersion parameter, `Var = mu (1 + psi mu)`.
    SharedOverdispersion,
    /// One overdispersion parameter per group.
    PerGroupOverdispersion,
    /// One overdispersion parameter per region.
    PerRegionOverdispersion,
}

/// Full declarative model for a stratified count lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub endemic: EndemicSpec,
    pub epidemic: Option<EpidemicSpec>,
    pub variance: VarianceSpec,
}

impl ModelSpec {
    /// Structural validation that does not need data.
    pub fn validate(&self) -> Result<()> {
        if self.endemic.period == 0 {
            return Err(Error::Invalid("seasonal period must be positive".into()));
        }
        if let Some(epi) = &self.epidemic {
            match &epi.structure {
                EpidemicStructure::Merged { .. } => {}
                EpidemicStructure::ThreeComponent {
                    autoregressive,
                    neighbourhood,
                } => {
                    if autoregressive.is_none() && neighbourhood.is_none() {
                        return Err(Error::Invalid(
                            "three-component model needs at least one epidemic term".into(),
                        ));
                    }
                    if let Some(ne) = neighbourhood {
                        if ne.spatial.include_self() {
                            return Err(Error::Invalid(
                                "neighbourhood component requires no-self spatial weights".into(),
                            ));
                        }
                    }
                }
            }
            for component in epi.components() {
                if let ContactStructure::Fixed { matrix }
                | ContactStructure::PowerFixed { matrix, .. }
                | ContactStructure::PowerProfiled { matrix } = &component.contact
                {
                    if matrix.matrix().nrows() == 0 {
                        return Err(Error::Invalid("empty contact matrix".into()));
                    }
                }
                if let ContactStructure::PowerFixed { kappa, .. } = component.contact {
                    if kappa.is_nan() || kappa < 0.0 {
                        return Err(Error::NegativeKappa { kappa });
                    }
                }
            }
        }
        Ok(())
    }

    /// Does any component profile the contact power?
    pub fn profiles_kappa(&self) -> bool {
        self.epidemic
            .as_ref()
            .map(|e| e.components().any(|c| c.contact.profiles_kappa()))
            .unwrap_or(false)
    }

    /// Replace a profiled contact power by a fixed exponent.
    pub fn with_fixed_kappa(&self, kappa: f64) -> ModelSpec {
        let mut spec = self.clone();
        if let Some(epi) = &mut spec.epidemic {
            for component in epi.components_mut() {
                if let ContactStructure::PowerProfiled { matrix } = &component.contact {
                    component.contact = ContactStructure::PowerFixed {
                        matrix: matrix.clone(),
                        kappa,
                    };
                }
            }
        }
        spec
    }

    /// A short human-readable tag for tables and file names.
    pub fn describe(&self) -> String {
        match &self.epidemic {
            None => "endemic-only".to_string(),
            Some(epi) => {
                let contact = |c: &ContactStructure| match c {
                    ContactStructure::Fixed { .. } => "C".to_string(),
                    ContactStructure::PowerFixed { kappa, .. } => format!("C^{kappa}"),
                    ContactStructure::PowerProfiled { .. } => "C^kappa".to_string(),
                    ContactStructure::Identity => "identity".to_string(),
                    ContactStructure::AllOnes => "ones".to_string(),
                };
                match &epi.structure {
                    EpidemicStructure::Merged { component } => {
                        format!("endemic + epidemic ({})", contact(&component.contact))
                    }
                    EpidemicStructure::ThreeComponent {
                        autoregressive,
                        neighbourhood,
                    } => {
                        let mut parts = vec!["endemic".to_string()];
                        if autoregressive.is_some() {
                            parts.push("ar".to_string());
                        }
                        if let Some(ne) = neighbourhood {
                            parts.push(format!("ne ({})", contact(&ne.contact)));
                        }
                        parts.join(" + ")
                    }
                }
            }
        }
    }
}

impl EpidemicSpec {
    /// The epidemic components present, in evaluation order.
    pub fn components(&self) -> impl Iterator<Item = &EpidemicComponent> {
        match &self.structure {
            EpidemicStructure::Merged { component } => vec![component].into_iter(),
            EpidemicStructure::ThreeComponent { neighbourhood, .. } => {
                neighbourhood.iter().collect::<Vec<_>>().into_iter()
            }
        }
    }

    fn components_mut(&mut self) -> impl Iterator<Item = &mut EpidemicComponent> {
        match &mut self.structure {
            EpidemicStructure::Merged { component } => vec![component].into_iter(),
            EpidemicStructure::ThreeComponent { neighbourhood, .. } => {
                neighbourhood.iter_mut().collect::<Vec<_>>().into_iter()
            }
        }
    }

    pub fn autoregressive(&self) -> Option<&ArComponent> {
        match &self.structure {
            EpidemicStructure::Merged { .. } => None,
            EpidemicStructure::ThreeComponent { autoregressive, .. } => autoregressive.as_ref(),
        }
    }

    pub fn weighted_component(&self) -> Option<&EpidemicComponent> {
        match &self.structure {
            EpidemicStructure::Merged { component } => Some(component),
            EpidemicStructure::ThreeComponent { neighbourhood, .. } => neighbourhood.as_ref(),
        }
    }
}

/// Number of free parameters of the model after identifiability constraints,
/// counting a profiled contact power as one parameter.
pub fn parameter_count(spec: &ModelSpec, n_groups: usize, n_regions: usize) -> Result<usize> {
    let groups: Vec<String> = (0..n_groups).map(|g| format!("g{g}")).collect();
    let regions: Vec<String> = (0..n_regions).map(|r| format!("r{r}")).collect();
    let layout = ParameterLayout::build(spec, &groups, &regions)?;
    Ok(layout.len() + if spec.profiles_kappa() { 1 } else { 0 })
}
