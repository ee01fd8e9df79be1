//! Linear panel regressions with per-country or pooled slopes, country and
//! seasonal fixed effects, ARMA errors, cross-section SUR weighting and
//! panel-corrected standard errors.
//!
//! Observations are stacked country-major: row `j * T + t` is country `j`
//! at period `t` of the estimation window.

mod arma;
mod design;
mod fgls;
mod growth;
mod random_effects;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{CellRef, PanelDataset};

pub use arma::{fit_arma_errors, ArmaCoefficients, ArmaEstimate, ArmaTerm};
pub use fgls::{fit_fgls_sur, fit_ols};
pub use growth::{fit_pooled_growth, GrowthFit, GrowthVariables};
pub use random_effects::{fit_random_effects, VarianceComponents};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("{} missing cell(s) inside the estimation window{}", missing.len(), missing.first().map(|c| format!(", first {c}")).unwrap_or_default())]
    MissingCells { missing: Vec<CellRef> },
    #[error("rank-deficient design; collinear column(s): {}", columns.join(", "))]
    RankDeficientDesign { columns: Vec<String> },
    #[error("insufficient observations: {n} rows for {k} parameters")]
    InsufficientObservations { n: usize, k: usize },
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("cross-section covariance is singular ({detail}); SUR weighting needs more periods than countries")]
    SingularSigma { detail: String },
    #[error("no convergence after {iterations} iterations (last max change {last_change:.3e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("non-stationary AR estimate: largest inverse root modulus {modulus:.6}")]
    NonStationaryArEstimate { modulus: f64 },
    #[error("series `{variable}` is not strictly positive for {country} at {period}")]
    NonPositiveSeries { variable: String, country: String, period: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeScope {
    #[default]
    PerCountry,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedEffect {
    Country,
    Seasonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    None,
    CrossSectionSur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    #[default]
    Classical,
    Pcse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmaScope {
    #[default]
    Pooled,
    PerCountry,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmaLags {
    pub ar: BTreeSet<usize>,
    pub ma: BTreeSet<usize>,
    pub scope: ArmaScope,
}

impl ArmaLags {
    pub fn ar(lags: &[usize]) -> Self {
        ArmaLags { ar: lags.iter().copied().collect(), ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.ar.is_empty() && self.ma.is_empty()
    }

    pub fn max_ar(&self) -> usize {
        self.ar.iter().copied().max().unwrap_or(0)
    }

    pub fn max_lag(&self) -> usize {
        self.max_ar().max(self.ma.iter().copied().max().unwrap_or(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FglsConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Stop after a single weighted step.
    pub two_step: bool,
}

impl Default for FglsConfig {
    fn default() -> Self {
        FglsConfig { tol: 1e-8, max_iter: 50, two_step: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub name: String,
    #[serde(default)]
    pub scope: SlopeScope,
}

fn default_true() -> bool {
    true
}

/// Declarative description of a panel regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dependent: String,
    #[serde(default)]
    pub regressors: Vec<RegressorSpec>,
    /// Global constant. With country fixed effects the first country is the
    /// baseline; without a constant every country gets its own effect.
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default)]
    pub fixed_effects: BTreeSet<FixedEffect>,
    /// Pooled-scope indicator regressors.
    #[serde(default)]
    pub dummies: Vec<String>,
    #[serde(default)]
    pub arma: ArmaLags,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub covariance: CovarianceKind,
    #[serde(default)]
    pub fgls: FglsConfig,
}

impl ModelSpec {
    pub fn new(dependent: &str) -> Self {
        ModelSpec {
            dependent: dependent.to_string(),
            regressors: Vec::new(),
            intercept: true,
            fixed_effects: BTreeSet::new(),
            dummies: Vec::new(),
            arma: ArmaLags::default(),
            weighting: Weighting::None,
            covariance: CovarianceKind::Classical,
            fgls: FglsConfig::default(),
        }
    }

    pub fn regressor(mut self, name: &str, scope: SlopeScope) -> Self {
        self.regressors.push(RegressorSpec { name: name.to_string(), scope });
        self
    }

    pub fn fixed_effect(mut self, fe: FixedEffect) -> Self {
        self.fixed_effects.insert(fe);
        self
    }

    pub fn dummy(mut self, name: &str) -> Self {
        self.dummies.push(name.to_string());
        self
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    pub fn with_arma(mut self, arma: ArmaLags) -> Self {
        self.arma = arma;
        self
    }

    pub fn sur_pcse(mut self) -> Self {
        self.weighting = Weighting::CrossSectionSur;
        self.covariance = CovarianceKind::Pcse;
        self
    }

    pub fn scope_of(&self, name: &str) -> Option<SlopeScope> {
        self.regressors.iter().find(|r| r.name == name).map(|r| r.scope)
    }

    /// Fixed- and random-effects comparators for a Hausman test: every
    /// regressor pooled, no ARMA terms, unweighted with classical covariance.
    /// The fixed-effects variant adds country effects.
    pub fn hausman_pair(&self) -> (ModelSpec, ModelSpec) {
        let mut base = ModelSpec::new(&self.dependent);
        base.regressors = self
            .regressors
            .iter()
            .map(|r| RegressorSpec { name: r.name.clone(), scope: SlopeScope::Pooled })
            .collect();
        base.dummies = self.dummies.clone();
        if self.fixed_effects.contains(&FixedEffect::Seasonal) {
            base.fixed_effects.insert(FixedEffect::Seasonal);
        }
        let fe = base.clone().fixed_effect(FixedEffect::Country);
        (fe, base)
    }
}

/// Coefficient name: a model term, optionally specific to one country.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoefLabel {
    pub term: String,
    pub country: Option<String>,
}

impl CoefLabel {
    pub fn pooled(term: &str) -> Self {
        CoefLabel { term: term.to_string(), country: None }
    }

    pub fn country(term: &str, country: &str) -> Self {
        CoefLabel { term: term.to_string(), country: Some(country.to_string()) }
    }
}

impl fmt::Display for CoefLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.country {
            Some(c) => write!(f, "{}[{}]", self.term, c),
            None => f.write_str(&self.term),
        }
    }
}

pub const CONST_TERM: &str = "const";
pub const COUNTRY_EFFECT_TERM: &str = "country_effect";
pub const SEASON_PREFIX: &str = "season_";

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub method: String,
    pub dependent: String,
    pub countries: Vec<String>,
    /// Labels of the periods the residuals refer to.
    pub periods: Vec<String>,
    pub labels: Vec<CoefLabel>,
    pub coefficients: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub scopes: BTreeMap<String, SlopeScope>,
    pub arma: Option<ArmaEstimate>,
    /// `residuals[country][t]`; innovations when the model has ARMA errors.
    pub residuals: Vec<Vec<f64>>,
    pub sigma_cross: DMatrix<f64>,
    pub loglik: f64,
    pub r2: f64,
    pub r2_adjusted: f64,
    pub dw: f64,
    pub rss: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Max absolute coefficient change per weighted iteration.
    pub coefficient_changes: Vec<f64>,
    pub variance_components: Option<VarianceComponents>,
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn index_of(&self, label: &CoefLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn coef(&self, term: &str, country: Option<&str>) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l.term == term && l.country.as_deref() == country)
            .map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, idx: usize) -> f64 {
        self.covariance[(idx, idx)].max(0.0).sqrt()
    }

    pub fn coef_se(&self, term: &str, country: Option<&str>) -> Option<(f64, f64)> {
        self.labels
            .iter()
            .position(|l| l.term == term && l.country.as_deref() == country)
            .map(|i| (self.coefficients[i], self.std_error(i)))
    }

    /// Indices of every coefficient belonging to `term`.
    pub fn term_indices(&self, term: &str) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i].term == term).collect()
    }

    /// Fails when the weighted iteration stopped at `max_iter`.
    pub fn ensure_converged(&self) -> Result<&Self, RegressionError> {
        if self.converged {
            Ok(self)
        } else {
            Err(RegressionError::NoConvergence {
                iterations: self.iterations,
                last_change: self.coefficient_changes.last().copied().unwrap_or(f64::NAN),
            })
        }
    }

    /// Deterministic key-sorted JSON rendering.
    pub fn to_json(&self) -> String {
        crate::serialize::canonical_json(&self.view())
    }

    fn view(&self) -> serde_json::Value {
        let mut coefs = serde_json::Map::new();
        for (i, l) in self.labels.iter().enumerate() {
            coefs.insert(
                l.to_string(),
                serde_json::json!({ "estimate": self.coefficients[i], "std_error": self.std_error(i) }),
            );
        }
        let labels: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        let mut residuals = serde_json::Map::new();
        for (c, r) in self.countries.iter().zip(&self.residuals) {
            residuals.insert(c.clone(), serde_json::json!(r));
        }
        serde_json::json!({
            "method": self.method,
            "dependent": self.dependent,
            "countries": self.countries,
            "periods": self.periods,
            "coefficients": coefs,
            "covariance": { "labels": labels, "matrix": crate::serialize::matrix_rows(&self.covariance) },
            "sigma_cross": crate::serialize::matrix_rows(&self.sigma_cross),
            "arma": self.arma,
            "residuals": residuals,
            "loglik": self.loglik,
            "r2": self.r2,
            "r2_adjusted": self.r2_adjusted,
            "dw": self.dw,
            "rss": self.rss,
            "n_obs": self.n_obs,
            "n_params": self.n_params,
            "iterations": self.iterations,
            "converged": self.converged,
            "coefficient_changes": self.coefficient_changes,
            "variance_components": self.variance_components,
            "flags": self.flags,
        })
    }
}

/// Dispatches on the specification: ARMA errors, SUR weighting or plain OLS.
pub fn fit(ds: &PanelDataset, spec: &ModelSpec) -> Result<FitResult, RegressionError> {
    if !spec.arma.is_empty() {
        fit_arma_errors(ds, spec)
    } else if spec.weighting == Weighting::CrossSectionSur {
        fit_fgls_sur(ds, spec)
    } else {
        fit_ols(ds, spec)
    }
}
