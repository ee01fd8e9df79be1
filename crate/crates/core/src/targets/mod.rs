//! 2020/2030 target arithmetic, descriptive growth rates and named growth
//! scenarios.

mod growth_rates;
mod scenario;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use growth_rates::{average_growth_rates, Aggregate, GrowthMean, GrowthTable};
pub use scenario::{builtin_scenario, builtin_scenarios, Rate, Scenario};

const BUILTIN_TOML: &str = include_str!("../../data/cep_targets.toml");

pub const GHG: &str = "GHG";
pub const CONSM: &str = "CONSM";
pub const RES: &str = "RES";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("unknown country `{0}`")]
    UnknownCountry(String),
    #[error("no target rule for variable `{0}`")]
    UnknownVariable(String),
    #[error("unsupported horizon {0}; use 2020 or 2030")]
    UnknownHorizon(i32),
    #[error("invalid targets configuration: {0}")]
    Config(String),
    #[error("scenario A needs a growth-rate table fitted from data")]
    MissingGrowthTable,
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario `{scenario}`: growth rate {rate} for {variable} is not above -1")]
    InvalidRate { scenario: String, variable: String, rate: f64 },
    #[error("series `{variable}` is not strictly positive for {country} at {period}")]
    NonPositiveSeries { variable: String, country: String, period: String },
    #[error("missing cell {0}")]
    MissingCell(crate::panel::CellRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Horizon {
    #[serde(rename = "2020")]
    Y2020,
    #[serde(rename = "2030")]
    Y2030,
}

impl Horizon {
    pub const ALL: [Horizon; 2] = [Horizon::Y2020, Horizon::Y2030];

    pub fn year(self) -> i32 {
        match self {
            Horizon::Y2020 => 2020,
            Horizon::Y2030 => 2030,
        }
    }

    pub fn from_year(year: i32) -> Result<Self, TargetError> {
        match year {
            2020 => Ok(Horizon::Y2020),
            2030 => Ok(Horizon::Y2030),
            other => Err(TargetError::UnknownHorizon(other)),
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.year())
    }
}

/// Which side of the target counts as compliance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    pub ghg_2020: f64,
    pub ghg_2030: f64,
    pub demand_growth_2010_2020: f64,
    pub demand_growth_2020_2030: f64,
    pub consumption_2020: f64,
    pub consumption_2030: f64,
    pub res_floor_2030: f64,
}

impl Default for Factors {
    fn default() -> Self {
        Factors {
            ghg_2020: 0.8,
            ghg_2030: 0.6,
            demand_growth_2010_2020: 1.015,
            demand_growth_2020_2030: 1.008,
            consumption_2020: 0.8,
            consumption_2030: 0.73,
            res_floor_2030: 0.27,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryInputs {
    pub name: String,
    pub ghg_1990: f64,
    pub res_2020: f64,
    pub gic_2010: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetsConfig {
    pub version: u32,
    #[serde(default)]
    pub factors: Factors,
    pub countries: BTreeMap<String, CountryInputs>,
}

impl TargetsConfig {
    /// The configuration shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_TOML).expect("bundled targets config parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TargetError> {
        let cfg: TargetsConfig = toml::from_str(text).map_err(|e| TargetError::Config(e.to_string()))?;
        for (code, c) in &cfg.countries {
            if !(c.ghg_1990 > 0.0 && c.gic_2010 > 0.0 && c.res_2020 > 0.0 && c.res_2020 <= 1.0) {
                return Err(TargetError::Config(format!("country {code}: bases must be positive and shares in (0, 1]")));
            }
        }
        Ok(cfg)
    }

    pub fn country(&self, code: &str) -> Result<&CountryInputs, TargetError> {
        self.countries.get(code).ok_or_else(|| TargetError::UnknownCountry(code.to_string()))
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.countries.keys().map(|s| s.as_str())
    }
}

pub fn ghg_target_with(base_1990: f64, horizon: Horizon, f: &Factors) -> f64 {
    base_1990
        * match horizon {
            Horizon::Y2020 => f.ghg_2020,
            Horizon::Y2030 => f.ghg_2030,
        }
}

/// 20% (2020) or 40% (2030) below the 1990 level.
pub fn ghg_target(base_1990: f64, horizon: Horizon) -> f64 {
    ghg_target_with(base_1990, horizon, &Factors::default())
}

pub fn consumption_projection_and_target_with(gic_2010: f64, horizon: Horizon, f: &Factors) -> (f64, f64) {
    let p2020 = gic_2010 * f.demand_growth_2010_2020.powi(10);
    match horizon {
        Horizon::Y2020 => (p2020, p2020 * f.consumption_2020),
        Horizon::Y2030 => {
            let p2030 = p2020 * f.demand_growth_2020_2030.powi(10);
            (p2030, p2030 * f.consumption_2030)
        }
    }
}

/// Demand projected from 2010 at 1.5% a year to 2020 and 0.8% a year to
/// 2030, and the target 20% (2020) or 27% (2030) below the projection.
pub fn consumption_projection_and_target(gic_2010: f64, horizon: Horizon) -> (f64, f64) {
    consumption_projection_and_target_with(gic_2010, horizon, &Factors::default())
}

/// National 2020 share; for 2030 the larger of that and the EU-wide floor.
pub fn res_target(config: &TargetsConfig, country: &str, horizon: Horizon) -> Result<f64, TargetError> {
    let national = config.country(country)?.res_2020;
    Ok(match horizon {
        Horizon::Y2020 => national,
        Horizon::Y2030 => national.max(config.factors.res_floor_2030),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TargetDerivation {
    GhgCut { base_1990: f64, factor: f64 },
    ResShare { national_2020: f64, floor: Option<f64> },
    ConsumptionCut { gic_2010: f64, growth_2010_2020: f64, growth_2020_2030: Option<f64>, factor: f64 },
}

impl TargetDerivation {
    /// Recomputes the target from the recorded inputs.
    pub fn evaluate(&self) -> f64 {
        match *self {
            TargetDerivation::GhgCut { base_1990, factor } => base_1990 * factor,
            TargetDerivation::ResShare { national_2020, floor } => floor.map_or(national_2020, |f| national_2020.max(f)),
            TargetDerivation::ConsumptionCut { gic_2010, growth_2010_2020, growth_2020_2030, factor } => {
                let mut p = gic_2010 * growth_2010_2020.powi(10);
                if let Some(g) = growth_2020_2030 {
                    p *= g.powi(10);
                }
                p * factor
            }
        }
    }

    /// Projection the consumption target is cut from.
    pub fn projection(&self) -> Option<f64> {
        match *self {
            TargetDerivation::ConsumptionCut { gic_2010, growth_2010_2020, growth_2020_2030, .. } => {
                let p = gic_2010 * growth_2010_2020.powi(10);
                Some(growth_2020_2030.map_or(p, |g| p * g.powi(10)))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub country: String,
    pub variable: String,
    pub horizon: Horizon,
    pub target_value: f64,
    pub unit: String,
    pub direction: Direction,
    pub derivation: TargetDerivation,
}

impl TargetSet {
    pub fn rederive(&self) -> f64 {
        self.derivation.evaluate()
    }
}

/// The target for `variable` (GHG, CONSM or RES) of `country` at `horizon`.
pub fn target_set(config: &TargetsConfig, country: &str, variable: &str, horizon: Horizon) -> Result<TargetSet, TargetError> {
    let inputs = config.country(country)?;
    let f = &config.factors;
    let (derivation, unit, direction) = match variable {
        GHG => (
            TargetDerivation::GhgCut {
                base_1990: inputs.ghg_1990,
                factor: match horizon {
                    Horizon::Y2020 => f.ghg_2020,
                    Horizon::Y2030 => f.ghg_2030,
                },
            },
            "thousand tonnes",
            Direction::AtMost,
        ),
        RES => (
            TargetDerivation::ResShare {
                national_2020: inputs.res_2020,
                floor: (horizon == Horizon::Y2030).then_some(f.res_floor_2030),
            },
            "share",
            Direction::AtLeast,
        ),
        CONSM => (
            TargetDerivation::ConsumptionCut {
                gic_2010: inputs.gic_2010,
                growth_2010_2020: f.demand_growth_2010_2020,
                growth_2020_2030: (horizon == Horizon::Y2030).then_some(f.demand_growth_2020_2030),
                factor: match horizon {
                    Horizon::Y2020 => f.consumption_2020,
                    Horizon::Y2030 => f.consumption_2030,
                },
            },
            "GWh",
            Direction::AtMost,
        ),
        other => return Err(TargetError::UnknownVariable(other.to_string())),
    };
    Ok(TargetSet {
        country: country.to_string(),
        variable: variable.to_string(),
        horizon,
        target_value: derivation.evaluate(),
        unit: unit.to_string(),
        direction,
        derivation,
    })
}
