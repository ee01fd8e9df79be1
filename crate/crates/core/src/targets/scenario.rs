use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GrowthTable, TargetError, CONSM, RES};

/// An annual growth rate shared by all countries or given per country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rate {
    Global(f64),
    PerCountry(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Annual growth rate per variable.
    pub growth: BTreeMap<String, Rate>,
}

impl Scenario {
    pub fn rate(&self, variable: &str, country: &str) -> Option<f64> {
        match self.growth.get(variable)? {
            Rate::Global(r) => Some(*r),
            Rate::PerCountry(m) => m.get(country).copied(),
        }
    }

    pub fn validate(&self) -> Result<(), TargetError> {
        for (var, rate) in &self.growth {
            let values: Vec<f64> = match rate {
                Rate::Global(r) => vec![*r],
                Rate::PerCountry(m) => m.values().copied().collect(),
            };
            if let Some(&bad) = values.iter().find(|r| !(**r > -1.0) || !r.is_finite()) {
                return Err(TargetError::InvalidRate { scenario: self.name.clone(), variable: var.clone(), rate: bad });
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TargetError> {
        let s: Scenario = toml::from_str(text).map_err(|e| TargetError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    fn global(name: &str, description: &str, consm: f64, res: f64) -> Self {
        Scenario {
            name: name.to_string(),
            description: description.to_string(),
            growth: BTreeMap::from([(CONSM.to_string(), Rate::Global(consm)), (RES.to_string(), Rate::Global(res))]),
        }
    }
}

/// `A`: consumption and renewables keep their historical average rates
/// (needs `table`); `B`: consumption -2% and renewables +2% a year; `C`:
/// consumption -2% and renewables +6% a year.
pub fn builtin_scenario(name: &str, table: Option<&GrowthTable>) -> Result<Scenario, TargetError> {
    match name {
        "A" => {
            let table = table.ok_or(TargetError::MissingGrowthTable)?;
            let mut growth = BTreeMap::new();
            for var in [CONSM, RES] {
                let per: BTreeMap<String, f64> = table
                    .rates
                    .iter()
                    .filter_map(|(c, m)| m.get(var).map(|r| (c.clone(), *r)))
                    .collect();
                growth.insert(var.to_string(), Rate::PerCountry(per));
            }
            let s = Scenario {
                name: "A".into(),
                description: format!("historical average rates {}..{}", table.first_period, table.last_period),
                growth,
            };
            s.validate()?;
            Ok(s)
        }
        "B" => Ok(Scenario::global("B", "consumption -2%/yr, renewables +2%/yr", -0.02, 0.02)),
        "C" => Ok(Scenario::global("C", "consumption -2%/yr, renewables +6%/yr", -0.02, 0.06)),
        other => Err(TargetError::UnknownScenario(other.to_string())),
    }
}

pub fn builtin_scenarios(table: Option<&GrowthTable>) -> Result<Vec<Scenario>, TargetError> {
    ["A", "B", "C"].iter().map(|n| builtin_scenario(n, table)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_panels() {
        let b = builtin_scenario("B", None).unwrap();
        assert_eq!(b.rate(CONSM, "AU"), Some(-0.02));
        assert_eq!(b.rate(RES, "SE"), Some(0.02));
        let c = builtin_scenario("C", None).unwrap();
        assert_eq!(c.rate(RES, "AU"), Some(0.06));
        assert_eq!(builtin_scenario("A", None), Err(TargetError::MissingGrowthTable));
        assert!(builtin_scenarios(None).is_err());
    }

    #[test]
    fn toml_scenarios() {
        let s = Scenario::from_toml_str("name = \"D\"\n[growth]\nCONSM = -0.01\nRES = { AU = 0.05, DK = 0.03 }\n").unwrap();
        assert_eq!(s.rate("RES", "DK"), Some(0.03));
        assert_eq!(s.rate("RES", "FI"), None);
        assert!(Scenario::from_toml_str("name = \"E\"\n[growth]\nCONSM = -1.5\n").is_err());
    }
}
