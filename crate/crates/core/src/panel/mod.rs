//! Balanced country × period panels of named variables.
//!
//! A [`PanelDataset`] is immutable once built. Every cell is either a finite
//! value or an explicit `None` marking a missing observation; estimation code
//! decides what to do with missing cells, ingestion never drops them.

mod daily;
mod derive;
mod ingest;
mod schema;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use daily::{monthly_average, MonthlyMean};
pub use derive::{derive_variable, Derivation};
pub use ingest::{ingest_csv, write_csv};
pub use schema::{parse_schema, Construction, VariableDef};
pub use synth::{synthesize_dataset, ArmaProcess, Dgp, RegressorDgp, SyntheticPanel, SyntheticTruth};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("unbalanced panel ({summary}): {} missing cell(s){}", missing.len(), preview(missing))]
    UnbalancedPanel { missing: Vec<CellRef>, summary: String },
    #[error("line {line}: unknown variable `{name}`")]
    UnknownVariable { line: usize, name: String },
    #[error("invalid period label `{label}`: {reason}")]
    InvalidPeriod { label: String, reason: String },
    #[error("time index is not strictly increasing with uniform spacing at {at}")]
    NonUniformIndex { at: String },
    #[error("schema line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("variable `{0}` already exists")]
    DuplicateVariable(String),
    #[error("variable `{name}` has {got} cells, expected {expected}")]
    ShapeMismatch { name: String, got: usize, expected: usize },
    #[error("gross generation is zero for {country} at {period}")]
    DivisionByZeroGross { country: String, period: String },
    #[error("missing input variable `{variable}`")]
    MissingInput { variable: String },
    #[error("non-stationary ARMA error process: largest inverse root modulus {modulus:.6}")]
    NonStationaryDgp { modulus: f64 },
    #[error("invalid generating process: {0}")]
    InvalidDgp(String),
    #[error("i/o: {0}")]
    Io(String),
}

fn preview(missing: &[CellRef]) -> String {
    if missing.is_empty() {
        return String::new();
    }
    let shown: Vec<String> = missing.iter().take(5).map(|c| c.to_string()).collect();
    let more = if missing.len() > 5 { ", ..." } else { "" };
    format!(": {}{}", shown.join(", "), more)
}

/// A single (country, period, variable) coordinate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub country: String,
    pub period: String,
    pub variable: String,
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.country, self.period, self.variable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    Monthly,
    Biannual,
    Yearly,
}

impl Frequency {
    pub fn periods_per_year(self) -> u32 {
        match self {
            Frequency::Monthly => 12,
            Frequency::Biannual => 2,
            Frequency::Yearly => 1,
        }
    }

    /// Guesses the frequency from a period label's shape.
    pub fn infer(label: &str) -> Option<Frequency> {
        let label = label.trim();
        match label.len() {
            4 => Some(Frequency::Yearly),
            7 if label.as_bytes()[5] == b'H' => Some(Frequency::Biannual),
            7 => Some(Frequency::Monthly),
            _ => None,
        }
    }
}

impl FromStr for Frequency {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "monthly" | "m" => Ok(Frequency::Monthly),
            "biannual" | "semiannual" | "h" => Ok(Frequency::Biannual),
            "yearly" | "annual" | "y" => Ok(Frequency::Yearly),
            other => Err(format!("unknown frequency `{other}`")),
        }
    }
}

/// A calendar period at a given frequency. `sub` is the month (1..=12),
/// the half (1..=2), or 1 for yearly data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Period {
    pub year: i32,
    pub sub: u32,
    pub frequency: Frequency,
}

impl Period {
    pub fn new(frequency: Frequency, year: i32, sub: u32) -> Result<Self, PanelError> {
        if sub == 0 || sub > frequency.periods_per_year() {
            return Err(PanelError::InvalidPeriod {
                label: format!("{year}/{sub}"),
                reason: format!("sub-period must be in 1..={}", frequency.periods_per_year()),
            });
        }
        Ok(Period { year, sub, frequency })
    }

    pub fn yearly(year: i32) -> Self {
        Period { year, sub: 1, frequency: Frequency::Yearly }
    }

    pub fn monthly(year: i32, month: u32) -> Self {
        Period::new(Frequency::Monthly, year, month).expect("month in 1..=12")
    }

    /// Parses `YYYY-MM`, `YYYY-H1|H2` or `YYYY` according to `frequency`.
    pub fn parse(label: &str, frequency: Frequency) -> Result<Self, PanelError> {
        let bad = |reason: &str| PanelError::InvalidPeriod {
            label: label.to_string(),
            reason: reason.to_string(),
        };
        let label = label.trim();
        let year_of = |s: &str| -> Result<i32, PanelError> {
            if s.len() != 4 || !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad("year must be four digits"));
            }
            s.parse().map_err(|_| bad("year must be four digits"))
        };
        match frequency {
            Frequency::Yearly => Ok(Period::yearly(year_of(label)?)),
            Frequency::Monthly => {
                let (y, m) = label.split_once('-').ok_or_else(|| bad("expected YYYY-MM"))?;
                if m.len() != 2 {
                    return Err(bad("expected YYYY-MM"));
                }
                let month: u32 = m.parse().map_err(|_| bad("expected YYYY-MM"))?;
                Period::new(frequency, year_of(y)?, month).map_err(|_| bad("month out of range"))
            }
            Frequency::Biannual => {
                let (y, h) = label.split_once('-').ok_or_else(|| bad("expected YYYY-H1 or YYYY-H2"))?;
                let half = match h {
                    "H1" => 1,
                    "H2" => 2,
                    _ => return Err(bad("expected YYYY-H1 or YYYY-H2")),
                };
                Period::new(frequency, year_of(y)?, half)
            }
        }
    }

    pub fn label(&self) -> String {
        match self.frequency {
            Frequency::Yearly => format!("{:04}", self.year),
            Frequency::Monthly => format!("{:04}-{:02}", self.year, self.sub),
            Frequency::Biannual => format!("{:04}-H{}", self.year, self.sub),
        }
    }

    /// Sequential index; consecutive periods differ by exactly one.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * self.frequency.periods_per_year() as i64 + (self.sub as i64 - 1)
    }

    pub fn from_ordinal(frequency: Frequency, ordinal: i64) -> Self {
        let ppy = frequency.periods_per_year() as i64;
        Period {
            year: ordinal.div_euclid(ppy) as i32,
            sub: (ordinal.rem_euclid(ppy) + 1) as u32,
            frequency,
        }
    }

    pub fn succ(&self) -> Self {
        Period::from_ordinal(self.frequency, self.ordinal() + 1)
    }

    /// Inclusive run of consecutive periods.
    pub fn range(first: Period, last: Period) -> Vec<Period> {
        (first.ordinal()..=last.ordinal())
            .map(|o| Period::from_ordinal(first.frequency, o))
            .collect()
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub unit: String,
    pub construction: Construction,
    /// Country-major: `cells[country * n_periods + t]`.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    frequency: Frequency,
    countries: Vec<String>,
    periods: Vec<Period>,
    variables: BTreeMap<String, Variable>,
}

impl PanelDataset {
    pub fn new(frequency: Frequency, countries: Vec<String>, periods: Vec<Period>) -> Result<Self, PanelError> {
        for pair in periods.windows(2) {
            if pair[1].ordinal() != pair[0].ordinal() + 1 {
                return Err(PanelError::NonUniformIndex { at: pair[1].label() });
            }
        }
        if let Some(p) = periods.iter().find(|p| p.frequency != frequency) {
            return Err(PanelError::NonUniformIndex { at: p.label() });
        }
        Ok(PanelDataset { frequency, countries, periods, variables: BTreeMap::new() })
    }

    /// Builds a dataset spanning `n_periods` consecutive periods from `start`.
    pub fn with_span(countries: Vec<String>, start: Period, n_periods: usize) -> Self {
        let periods = (0..n_periods as i64)
            .map(|k| Period::from_ordinal(start.frequency, start.ordinal() + k))
            .collect();
        PanelDataset { frequency: start.frequency, countries, periods, variables: BTreeMap::new() }
    }

    pub fn with_variable(
        mut self,
        name: impl Into<String>,
        unit: impl Into<String>,
        construction: Construction,
        cells: Vec<Option<f64>>,
    ) -> Result<Self, PanelError> {
        let name = name.into();
        let expected = self.countries.len() * self.periods.len();
        if cells.len() != expected {
            return Err(PanelError::ShapeMismatch { name, got: cells.len(), expected });
        }
        if self.variables.contains_key(&name) {
            return Err(PanelError::DuplicateVariable(name));
        }
        self.variables.insert(name, Variable { unit: unit.into(), construction, cells });
        Ok(self)
    }

    /// Convenience for complete raw variables.
    pub fn with_values(self, name: impl Into<String>, unit: impl Into<String>, values: &[f64]) -> Result<Self, PanelError> {
        self.with_variable(name, unit, Construction::Raw, values.iter().map(|&v| Some(v)).collect())
    }

    /// The periods `range` (indices into `periods()`) of every variable.
    pub fn slice_periods(&self, range: std::ops::Range<usize>) -> Self {
        let n_t = self.periods.len();
        let range = range.start.min(n_t)..range.end.min(n_t);
        let variables = self
            .variables
            .iter()
            .map(|(name, v)| {
                let cells = (0..self.countries.len())
                    .flat_map(|c| v.cells[c * n_t + range.start..c * n_t + range.end].iter().copied())
                    .collect();
                (name.clone(), Variable { unit: v.unit.clone(), construction: v.construction.clone(), cells })
            })
            .collect();
        PanelDataset {
            frequency: self.frequency,
            countries: self.countries.clone(),
            periods: self.periods[range].to_vec(),
            variables,
        }
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn country_index(&self, code: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == code)
    }

    pub fn variable_names(&self) -> impl Iterator<Item = &str> {
        self.variables.keys().map(String::as_str)
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.get(name)
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.variables.contains_key(name)
    }

    pub fn unit(&self, name: &str) -> Option<&str> {
        self.variables.get(name).map(|v| v.unit.as_str())
    }

    pub fn series(&self, name: &str, country: usize) -> Option<&[Option<f64>]> {
        let t = self.periods.len();
        self.variables.get(name).map(|v| &v.cells[country * t..(country + 1) * t])
    }

    pub fn value(&self, name: &str, country: usize, t: usize) -> Option<f64> {
        self.series(name, country).and_then(|s| s[t])
    }

    /// Complete series for one country, or the list of missing cells.
    pub fn complete_series(&self, name: &str, country: usize) -> Result<Vec<f64>, PanelError> {
        let series = self
            .series(name, country)
            .ok_or_else(|| PanelError::MissingInput { variable: name.to_string() })?;
        let missing: Vec<CellRef> = series
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(t, _)| self.cell_ref(country, t, name))
            .collect();
        if !missing.is_empty() {
            return Err(PanelError::UnbalancedPanel { missing, summary: self.summary() });
        }
        Ok(series.iter().map(|v| v.unwrap()).collect())
    }

    pub fn cell_ref(&self, country: usize, t: usize, variable: &str) -> CellRef {
        CellRef {
            country: self.countries[country].clone(),
            period: self.periods[t].label(),
            variable: variable.to_string(),
        }
    }

    pub fn summary(&self) -> String {
        let span = match (self.periods.first(), self.periods.last()) {
            (Some(a), Some(b)) => format!(", {a}..{b}"),
            _ => String::new(),
        };
        format!(
            "{} countries x {} periods x {} variables{}",
            self.countries.len(),
            self.periods.len(),
            self.variables.len(),
            span
        )
    }
}
