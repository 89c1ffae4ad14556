//! TOML run configuration and its translation into a model spec.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use epifit_core::{
    ArComponent, ContactMatrix, ContactStructure, EndemicSpec, EpidemicComponent, EpidemicSpec,
    EpidemicStructure, ModelSpec, OrderMatrix, Seasonality, VarianceSpec, WeightConfig,
};

use crate::errors::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<DataConfig>,
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    pub simulate: Option<SimulateConfig>,
    pub compare: Option<CompareConfig>,
    pub contacts: Option<ContactsConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<(RunConfig, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((config, base))
    }

    pub fn data(&self) -> CliResult<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| CliError::config("missing [data] section"))
    }

    pub fn model(&self) -> CliResult<&ModelConfig> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::config("missing [model] section"))
    }
}

/// Input file paths, relative to the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub counts: PathBuf,
    pub population: PathBuf,
    pub adjacency: PathBuf,
    pub contacts: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_variant")]
    pub variant: String,
    pub endemic: EndemicConfig,
    pub epidemic: Option<EpidemicConfig>,
    pub ar: Option<ArConfig>,
    pub variance: VarianceConfig,
}

fn default_variant() -> String {
    "merged".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndemicConfig {
    #[serde(default)]
    pub group_intercepts: bool,
    #[serde(default)]
    pub region_intercepts: bool,
    #[serde(default)]
    pub christmas: bool,
    #[serde(default = "default_seasonality")]
    pub seasonality: String,
    #[serde(default = "default_period")]
    pub period: u32,
    #[serde(default = "default_true")]
    pub population_offset: bool,
}

fn default_seasonality() -> String {
    "none".into()
}

fn default_period() -> u32 {
    52
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicConfig {
    #[serde(default)]
    pub group_effects: bool,
    #[serde(default)]
    pub region_effects: bool,
    #[serde(default = "default_true")]
    pub population_scaling: bool,
    pub contact: String,
    pub kappa: Option<f64>,
    /// Row-normalize the loaded contact matrix before use.
    #[serde(default = "default_true")]
    pub normalize_contacts: bool,
    #[serde(default)]
    pub spatial: SpatialConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialConfig {
    #[serde(default = "default_spatial_variant")]
    pub variant: String,
    #[serde(default)]
    pub group_specific: bool,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        SpatialConfig {
            variant: default_spatial_variant(),
            group_specific: false,
        }
    }
}

fn default_spatial_variant() -> String {
    "power-law".into()
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ArConfig {
    #[serde(default)]
    pub group_effects: bool,
    #[serde(default)]
    pub region_effects: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceConfig {
    pub structure: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: default_max_iterations(),
        }
    }
}

fn default_max_iterations() -> usize {
    500
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default)]
    pub lo: f64,
    #[serde(default = "default_profile_hi")]
    pub hi: f64,
    #[serde(default = "default_search")]
    pub search: String,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            lo: 0.0,
            hi: default_profile_hi(),
            search: default_search(),
            points: default_points(),
            tol: default_tol(),
            level: default_level(),
        }
    }
}

fn default_profile_hi() -> f64 {
    3.0
}

fn default_search() -> String {
    "golden".into()
}

fn default_points() -> usize {
    15
}

fn default_tol() -> f64 {
    1e-3
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Reuse a previous fit document instead of fitting first.
    pub fit: Option<PathBuf>,
    pub horizon: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub allow_explosive: bool,
    #[serde(default = "default_count_cap")]
    pub count_cap: u64,
}

fn default_replicates() -> usize {
    100
}

fn default_count_cap() -> u64 {
    1_000_000_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub models: Vec<CompareEntry>,
}

/// One row of a comparison: the base model with the contact structure (or
/// the whole epidemic component) swapped out.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareEntry {
    pub label: String,
    #[serde(default)]
    pub endemic_only: bool,
    pub contact: Option<String>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactsConfig {
    pub survey: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    /// Group populations (`group,population`); required for estimation and
    /// for aggregation weights.
    pub population: Option<PathBuf>,
    /// A ready-made matrix CSV instead of survey data.
    pub matrix: Option<PathBuf>,
    /// Fine-to-coarse group map (`fine,coarse`).
    pub grouping: Option<PathBuf>,
    #[serde(default)]
    pub normalize: bool,
    pub kappa: Option<f64>,
}

/// Assemble the model spec from the config, the region orders and the loaded
/// contact matrix (already normalized if requested).
pub fn build_spec(
    model: &ModelConfig,
    orders: &OrderMatrix,
    contacts: Option<&ContactMatrix>,
) -> CliResult<ModelSpec> {
    let endemic = EndemicSpec {
        group_intercepts: model.endemic.group_intercepts,
        region_intercepts: model.endemic.region_intercepts,
        christmas: model.endemic.christmas,
        seasonality: match model.endemic.seasonality.as_str() {
            "none" => Seasonality::None,
            "shared" => Seasonality::Shared,
            "per-group" => Seasonality::PerGroup,
            other => {
                return Err(CliError::config(format!(
                    "unknown seasonality {other:?} (none | shared | per-group)"
                )))
            }
        },
        period: model.endemic.period,
        population_offset: model.endemic.population_offset,
    };

    let variance = match model.variance.structure.as_str() {
        "poisson" => VarianceSpec::Poisson,
        "shared" => VarianceSpec::SharedOverdispersion,
        "per-group" => VarianceSpec::PerGroupOverdispersion,
        "per-region" => VarianceSpec::PerRegionOverdispersion,
        other => {
            return Err(CliError::config(format!(
                "unknown variance structure {other:?} (poisson | shared | per-group | per-region)"
            )))
        }
    };

    let epidemic = match (&model.epidemic, model.variant.as_str()) {
        (None, "merged") => None,
        (None, "three-component") if model.ar.is_some() => Some(EpidemicSpec {
            structure: EpidemicStructure::ThreeComponent {
                autoregressive: model.ar.map(|a| ArComponent {
                    group_effects: a.group_effects,
                    region_effects: a.region_effects,
                }),
                neighbourhood: None,
            },
            orders: orders.clone(),
        }),
        (None, "three-component") => {
            return Err(CliError::config(
                "three-component model needs [model.ar] and/or [model.epidemic]",
            ))
        }
        (Some(epi), variant) => {
            let component = build_component(epi, variant, contacts)?;
            let structure = match variant {
                "merged" => {
                    if model.ar.is_some() {
                        return Err(CliError::config(
                            "[model.ar] is only valid for variant = \"three-component\"",
                        ));
                    }
                    EpidemicStructure::Merged { component }
                }
                "three-component" => EpidemicStructure::ThreeComponent {
                    autoregressive: model.ar.map(|a| ArComponent {
                        group_effects: a.group_effects,
                        region_effects: a.region_effects,
                    }),
                    neighbourhood: Some(component),
                },
                other => {
                    return Err(CliError::config(format!(
                        "unknown model variant {other:?} (merged | three-component)"
                    )))
                }
            };
            Some(EpidemicSpec {
                structure,
                orders: orders.clone(),
            })
        }
        (None, other) => {
            return Err(CliError::config(format!(
                "unknown model variant {other:?} (merged | three-component)"
            )))
        }
    };

    let spec = ModelSpec {
        endemic,
        epidemic,
        variance,
    };
    spec.validate().map_err(CliError::from)?;
    Ok(spec)
}

fn build_component(
    epi: &EpidemicConfig,
    variant: &str,
    contacts: Option<&ContactMatrix>,
) -> CliResult<EpidemicComponent> {
    let need_matrix = || -> CliResult<ContactMatrix> {
        contacts
            .cloned()
            .ok_or_else(|| CliError::config("contact structure needs a contacts file in [data]"))
    };
    let contact = match epi.contact.as_str() {
        "fixed" => ContactStructure::Fixed {
            matrix: need_matrix()?,
        },
        "power-fixed" => ContactStructure::PowerFixed {
            matrix: need_matrix()?,
            kappa: epi.kappa.ok_or_else(|| {
                CliError::config("contact = \"power-fixed\" needs a kappa value")
            })?,
        },
        "power-profiled" => ContactStructure::PowerProfiled {
            matrix: need_matrix()?,
        },
        "identity" => ContactStructure::Identity,
        "ones" => ContactStructure::AllOnes,
        other => {
            return Err(CliError::config(format!(
                "unknown contact structure {other:?} (fixed | power-fixed | power-profiled | identity | ones)"
            )))
        }
    };

    // the neighbourhood component of a three-component model excludes local
    // transmission by construction
    let default_no_self = variant == "three-component";
    let spatial = match (epi.spatial.variant.as_str(), default_no_self) {
        ("power-law", false) => WeightConfig::PowerLawWithSelf {
            group_specific: epi.spatial.group_specific,
        },
        ("power-law", true) | ("power-law-no-self", _) => WeightConfig::PowerLawNoSelf {
            group_specific: epi.spatial.group_specific,
        },
        ("free", _) => WeightConfig::FreeOrderWeights,
        (other, _) => {
            return Err(CliError::config(format!(
                "unknown spatial variant {other:?} (power-law | power-law-no-self | free)"
            )))
        }
    };

    Ok(EpidemicComponent {
        group_effects: epi.group_effects,
        region_effects: epi.region_effects,
        population_scaling: epi.population_scaling,
        contact,
        spatial,
    })
}

/// Apply a compare entry to the base model config.
pub fn apply_compare_entry(base: &ModelConfig, entry: &CompareEntry) -> CliResult<ModelConfig> {
    let mut model = base.clone();
    if entry.endemic_only {
        if entry.contact.is_some() || entry.kappa.is_some() {
            return Err(CliError::config(format!(
                "compare entry {:?}: endemic_only excludes contact/kappa",
                entry.label
            )));
        }
        model.epidemic = None;
        model.ar = None;
        return Ok(model);
    }
    let epidemic = model.epidemic.as_mut().ok_or_else(|| {
        CliError::config(format!(
            "compare entry {:?} changes the contact structure, but the base [model] has no epidemic component",
            entry.label
        ))
    })?;
    if let Some(contact) = &entry.contact {
        epidemic.contact = contact.clone();
    }
    if let Some(kappa) = entry.kappa {
        epidemic.kappa = Some(kappa);
    }
    Ok(model)
}

/// Parse "lo,hi" into a range.
pub fn parse_kappa_range(text: &str) -> CliResult<(f64, f64)> {
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| CliError::args(format!("--kappa-range {text:?} is not \"lo,hi\"")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| CliError::args(format!("bad kappa range bound {lo:?}")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| CliError::args(format!("bad kappa range bound {hi:?}")))?;
    Ok((lo, hi))
}
