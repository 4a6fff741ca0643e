//! Run configuration: a single TOML (or JSON) document with `[cosmo]`,
//! `[csl]`, `[quad]` and `[units]` blocks. Every field has a fiducial
//! default, so the empty document is a valid configuration; unknown keys are
//! rejected so typos cannot silently fall back to defaults.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cslspec_core::{CoreError, CosmoParams, CslParams, PlanckConstants, QuadratureConfig};

/// How the three era-boundary conformal times are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimesSpec {
    /// η₀ = −1/k_*, η_e = η₀·e^{−N_*}, η_r from the radiation expansion.
    Derived,
    /// Same, but η_e rounded to −10³⁴ (and η_r re-derived from it).
    Rounded,
    /// Take η₀, η_e, η_r verbatim from the config (snapshot replay).
    Explicit,
}

/// Background block. Defaults are the fiducial parameter set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CosmoBlock {
    pub h_inf: f64,
    pub eps_inf: f64,
    pub eps2: f64,
    pub n_star: f64,
    pub k_star: f64,
    /// Total radiation-era expansion a(η_r)/a(η_e); only used when times
    /// are derived.
    pub radiation_expansion: f64,
    pub times: TimesSpec,
    pub eta0: Option<f64>,
    pub eta_e: Option<f64>,
    pub eta_r: Option<f64>,
}

impl Default for CosmoBlock {
    fn default() -> Self {
        let p = CosmoParams::fiducial_main();
        CosmoBlock {
            h_inf: p.h_inf,
            eps_inf: p.eps_inf,
            eps2: p.eps2,
            n_star: p.n_star,
            k_star: p.k_star,
            radiation_expansion: 3e26,
            times: TimesSpec::Derived,
            eta0: None,
            eta_e: None,
            eta_r: None,
        }
    }
}

impl CosmoBlock {
    pub fn build(&self) -> Result<CosmoParams, ConfigError> {
        let explicit = [self.eta0, self.eta_e, self.eta_r];
        if self.times != TimesSpec::Explicit && explicit.iter().any(Option::is_some) {
            return Err(ConfigError::Invalid(
                "cosmo: eta0/eta_e/eta_r are only read when times = \"explicit\"".into(),
            ));
        }
        let (eta0, eta_e, eta_r) = match self.times {
            TimesSpec::Explicit => match explicit {
                [Some(a), Some(b), Some(c)] => (a, b, c),
                _ => {
                    return Err(ConfigError::Invalid(
                        "cosmo: times = \"explicit\" needs eta0, eta_e and eta_r".into(),
                    ))
                }
            },
            TimesSpec::Derived | TimesSpec::Rounded => {
                let (eta0, mut eta_e, mut eta_r) = cslspec_core::derive_times(
                    self.n_star,
                    self.k_star,
                    self.h_inf,
                    self.radiation_expansion,
                )?;
                if self.times == TimesSpec::Rounded {
                    eta_e = -1e34;
                    eta_r = (2.0 - self.radiation_expansion) * eta_e;
                }
                (eta0, eta_e, eta_r)
            }
        };
        let params = CosmoParams {
            h_inf: self.h_inf,
            eps_inf: self.eps_inf,
            eps2: self.eps2,
            eta0,
            eta_e,
            eta_r,
            n_star: self.n_star,
            k_star: self.k_star,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Collapse-parameter block. The Planck-unit rate is always re-derived from
/// `lambda_si` through the unit constants, so a snapshot replays exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CslBlock {
    pub lambda_si: f64,
    pub r_c_planck: f64,
    pub m0_planck: f64,
}

impl Default for CslBlock {
    fn default() -> Self {
        let c = CslParams::fiducial(&PlanckConstants::default());
        CslBlock {
            lambda_si: c.lambda_si,
            r_c_planck: c.r_c_planck,
            m0_planck: c.m0_planck,
        }
    }
}

impl CslBlock {
    pub fn build(&self, consts: &PlanckConstants) -> Result<CslParams, ConfigError> {
        Ok(CslParams::new(
            self.lambda_si,
            self.r_c_planck,
            self.m0_planck,
            consts,
        )?)
    }
}

/// Which megaparsec↔Planck conversion the reports use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MpcConvention {
    /// Anchored round value 1 Mpc⁻¹ = 1e-58 M_P (pivot 0.05 Mpc⁻¹ ↔ 5e-60).
    #[default]
    Anchored,
    /// CODATA metre chain.
    Codata,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct UnitsBlock {
    pub mpc: MpcConvention,
}

impl UnitsBlock {
    pub fn build(&self) -> PlanckConstants {
        let mut c = PlanckConstants::default();
        if self.mpc == MpcConvention::Codata {
            c.mpc_in_planck_inverse_mass = cslspec_core::units::MPC_IN_PLANCK_CODATA;
        }
        c
    }
}

/// Full run configuration. The empty document is valid and equals the
/// fiducial setup.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub cosmo: CosmoBlock,
    pub csl: CslBlock,
    pub quad: QuadratureConfig,
    pub units: UnitsBlock,
}

/// Validated, ready-to-use parameter bundle built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct RunParams {
    pub cosmo: CosmoParams,
    pub csl: CslParams,
    pub quad: QuadratureConfig,
    pub consts: PlanckConstants,
}

impl RunConfig {
    pub fn build(&self) -> Result<RunParams, ConfigError> {
        let consts = self.units.build();
        let cosmo = self.cosmo.build()?;
        let csl = self.csl.build(&consts)?;
        self.quad.validate()?;
        Ok(RunParams {
            cosmo,
            csl,
            quad: self.quad,
            consts,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("{0}")]
    Invalid(String),
}

impl From<CoreError> for ConfigError {
    fn from(e: CoreError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

impl ConfigError {
    fn parse(path: &Path, detail: impl fmt::Display) -> ConfigError {
        ConfigError::Parse {
            path: path.display().to_string(),
            detail: detail.to_string(),
        }
    }
}

/// Load a configuration document. `.json` selects JSON, anything else is
/// parsed as TOML; both report line/column on failure. A missing `path`
/// (`None`) or an empty file yields the fiducial defaults.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(path, &text)
}

/// Parse a document already in memory (used for snapshot replays and tests).
pub fn parse_config(path: &Path, text: &str) -> Result<RunConfig, ConfigError> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(text).map_err(|e| {
            ConfigError::parse(path, format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    } else {
        // toml's error Display already carries the line/column span.
        toml::from_str(text).map_err(|e| ConfigError::parse(path, e))
    }
}
