//! Univariate yearly forecast models, the censored trend alternative for
//! shares, AIC-based selection and the pooled growth model container.

mod ar2;
mod select;
mod tobit;
mod trend;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ar2::{fit_ar2, Ar2Model};
pub use select::{select_model, AicRow, Selection};
pub use tobit::{fit_tobit, TobitModel};
pub use trend::{fit_trend, TrendModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("too few observations: {n} given, at least {min} needed")]
    TooFewObservations { n: usize, min: usize },
    #[error("years must be consecutive; {year} follows {previous}")]
    NonConsecutiveYears { previous: i32, year: i32 },
    #[error("value {value} at {year} is outside [0, 1]")]
    OutOfBounds { year: i32, value: f64 },
    #[error("non-finite value at {year}")]
    NonFinite { year: i32 },
    #[error("every observation sits on a censoring bound")]
    DegenerateAllCensored,
    #[error("interior observations lie exactly on a line; the latent variance is zero")]
    ZeroLatentVariance,
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

pub(crate) fn check_series(series: &[(i32, f64)], min: usize) -> Result<(), ForecastError> {
    if series.len() < min {
        return Err(ForecastError::TooFewObservations { n: series.len(), min });
    }
    for &(year, v) in series {
        if !v.is_finite() {
            return Err(ForecastError::NonFinite { year });
        }
    }
    Ok(())
}

pub(crate) fn check_consecutive(series: &[(i32, f64)]) -> Result<(), ForecastError> {
    for w in series.windows(2) {
        if w[1].0 != w[0].0 + 1 {
            return Err(ForecastError::NonConsecutiveYears { previous: w[0].0, year: w[1].0 });
        }
    }
    Ok(())
}

/// Gaussian log-likelihood with the variance at its ML value `rss / n`.
pub(crate) fn concentrated_loglik(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI * rss / n).ln() + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForecastModel {
    Trend(TrendModel),
    Ar2(Ar2Model),
    Tobit(TobitModel),
}

impl ForecastModel {
    pub fn name(&self) -> &'static str {
        match self {
            ForecastModel::Trend(_) => "trend",
            ForecastModel::Ar2(_) => "ar2",
            ForecastModel::Tobit(_) => "tobit",
        }
    }

    pub fn loglik(&self) -> f64 {
        match self {
            ForecastModel::Trend(m) => m.loglik,
            ForecastModel::Ar2(m) => m.loglik,
            ForecastModel::Tobit(m) => m.loglik,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            ForecastModel::Trend(_) => TrendModel::N_PARAMS,
            ForecastModel::Ar2(_) => Ar2Model::N_PARAMS,
            ForecastModel::Tobit(_) => TobitModel::N_PARAMS,
        }
    }

    /// Log-likelihood of `series[from..]`, conditioning on earlier values
    /// where the model has dynamics.
    pub fn loglik_on(&self, series: &[(i32, f64)], from: usize) -> f64 {
        match self {
            ForecastModel::Trend(m) => m.loglik_on(&series[from..]),
            ForecastModel::Ar2(m) => m.loglik_on(series, from),
            ForecastModel::Tobit(m) => m.loglik_on(&series[from..]),
        }
    }

    /// Earliest index whose likelihood the model can evaluate.
    pub fn min_conditioning(&self) -> usize {
        match self {
            ForecastModel::Ar2(_) => 2,
            _ => 0,
        }
    }

    pub fn last_year(&self) -> i32 {
        match self {
            ForecastModel::Trend(m) => m.last_obs.0,
            ForecastModel::Ar2(m) => m.last_two_obs[1].0,
            ForecastModel::Tobit(m) => m.last_obs.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCoefficients {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartLevel {
    pub year: i32,
    pub level: f64,
}

/// Per-country `dlog(GHG) = b0 + b1 log(1 + g_CONSM) + b2 log(1 + g_RES) + sigma eps`
/// plus the GHG level each simulation compounds from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PooledGrowthModel {
    pub coefficients: BTreeMap<String, GrowthCoefficients>,
    pub start_levels: BTreeMap<String, StartLevel>,
}

impl PooledGrowthModel {
    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.coefficients.keys().map(|s| s.as_str())
    }

    /// Replaces the start level of `country`, e.g. to launch from an earlier year.
    pub fn with_start(mut self, country: &str, year: i32, level: f64) -> Self {
        self.start_levels.insert(country.to_string(), StartLevel { year, level });
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_json_round_trips() {
        let m = fit_trend(&[(2008, 1.0), (2009, 2.5), (2010, 2.9), (2011, 4.2)]).unwrap();
        let fm = ForecastModel::Trend(m);
        let text = serde_json::to_string(&fm).unwrap();
        assert!(text.contains("\"kind\":\"trend\""));
        let back: ForecastModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fm);
    }
}
