//! Variable schema files.
//!
//! One definition per line, whitespace separated: `name unit construction`.
//! Construction is `raw` or `derived:<rule>(<args>)`, for example
//!
//! ```text
//! # name     unit      construction
//! PRICE      EUR/MWh   raw
//! RENEW      GWh       raw
//! GROSS      GWh       raw
//! RES        fraction  derived:res_share(RENEW,GROSS)
//! DUM_CWE    -         derived:step(2010-11)
//! ```

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::derive::Derivation;
use super::PanelError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construction {
    Raw,
    /// Expression text, e.g. `res_share(RENEW,GROSS)`.
    Derived(String),
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construction::Raw => f.write_str("raw"),
            Construction::Derived(expr) => write!(f, "derived:{expr}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDef {
    pub name: String,
    pub unit: String,
    pub construction: Construction,
}

impl VariableDef {
    pub fn raw(name: impl Into<String>, unit: impl Into<String>) -> Self {
        VariableDef { name: name.into(), unit: unit.into(), construction: Construction::Raw }
    }

    pub fn is_raw(&self) -> bool {
        self.construction == Construction::Raw
    }

    /// The derivation rule for a derived definition.
    pub fn derivation(&self) -> Option<Result<Derivation, PanelError>> {
        match &self.construction {
            Construction::Raw => None,
            Construction::Derived(expr) => Some(Derivation::parse(&self.name, expr)),
        }
    }
}

pub fn parse_schema(text: &str) -> Result<Vec<VariableDef>, PanelError> {
    let mut defs: Vec<VariableDef> = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| PanelError::Schema { line: line_no, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(format!("expected `name unit construction`, got {} field(s)", fields.len())));
        }
        let (name, unit, construction) = (fields[0], fields[1], fields[2]);
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(format!("invalid variable name `{name}`")));
        }
        if !seen.insert(name.to_string()) {
            return Err(err(format!("duplicate variable `{name}`")));
        }
        let construction = if construction == "raw" {
            Construction::Raw
        } else if let Some(expr) = construction.strip_prefix("derived:") {
            Construction::Derived(expr.to_string())
        } else {
            return Err(err(format!("construction must be `raw` or `derived:...`, got `{construction}`")));
        };
        let def = VariableDef { name: name.to_string(), unit: unit.to_string(), construction };
        if let Some(rule) = def.derivation() {
            let rule = rule.map_err(|e| err(e.to_string()))?;
            for input in rule.inputs() {
                if !defs.iter().any(|d| d.name == input) {
                    return Err(err(format!("`{name}` references `{input}` before it is defined")));
                }
            }
        }
        defs.push(def);
    }
    Ok(defs)
}
