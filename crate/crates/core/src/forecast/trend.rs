use serde::{Deserialize, Serialize};

use super::{check_series, concentrated_loglik, ForecastError};

/// `Y_t = beta0 + beta1 t + sigma eps_t`, `t` counted in years from `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendModel {
    pub beta0: f64,
    pub beta1: f64,
    /// Residual sd with `n - 2` degrees of freedom.
    pub sigma: f64,
    pub t0: i32,
    pub last_obs: (i32, f64),
    pub n_obs: usize,
    pub se_beta0: f64,
    pub se_beta1: f64,
    /// Evaluated at the ML variance `RSS / n`.
    pub loglik: f64,
}

impl TrendModel {
    /// Two coefficients and the variance.
    pub const N_PARAMS: usize = 3;

    pub fn mean_at(&self, year: i32) -> f64 {
        self.beta0 + self.beta1 * f64::from(year - self.t0)
    }

    /// ML estimate of the innovation sd (`RSS / n`).
    pub fn sigma_ml(&self) -> f64 {
        let n = self.n_obs as f64;
        self.sigma * ((n - 2.0) / n).sqrt()
    }

    pub fn loglik_on(&self, series: &[(i32, f64)]) -> f64 {
        let s = self.sigma_ml();
        let c = -0.5 * (2.0 * std::f64::consts::PI).ln();
        series
            .iter()
            .map(|&(y, v)| {
                let z = (v - self.mean_at(y)) / s;
                c - s.ln() - 0.5 * z * z
            })
            .sum()
    }
}

pub fn fit_trend(series: &[(i32, f64)]) -> Result<TrendModel, ForecastError> {
    check_series(series, 3)?;
    let t0 = series[0].0;
    let n = series.len();
    let nf = n as f64;
    let ts: Vec<f64> = series.iter().map(|&(y, _)| f64::from(y - t0)).collect();
    let tm = ts.iter().sum::<f64>() / nf;
    let ym = series.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ForecastError::TooFewObservations { n: 1, min: 3 });
    }
    let sxy: f64 = ts.iter().zip(series).map(|(t, p)| (t - tm) * (p.1 - ym)).sum();
    let beta1 = sxy / sxx;
    let beta0 = ym - beta1 * tm;
    let rss: f64 = ts.iter().zip(series).map(|(t, p)| (p.1 - beta0 - beta1 * t).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    Ok(TrendModel {
        beta0,
        beta1,
        sigma: s2.sqrt(),
        t0,
        last_obs: *series.last().unwrap(),
        n_obs: n,
        se_beta0: (s2 * (1.0 / nf + tm * tm / sxx)).sqrt(),
        se_beta1: (s2 / sxx).sqrt(),
        loglik: concentrated_loglik(rss, n),
    })
}
