use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_consecutive, check_series, concentrated_loglik, ForecastError};
use crate::linalg::{inverse_root_modulus, least_squares};

/// `(1 - rho1 B - rho2 B^2) Y_t = mu + sigma eps_t`, fitted conditionally on
/// the first two observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar2Model {
    pub mu: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// Residual sd with `n - 3` degrees of freedom, `n = T - 2`.
    pub sigma: f64,
    pub last_two_obs: [(i32, f64); 2],
    /// Roots of `1 - rho1 z - rho2 z^2` lie outside the unit circle.
    pub stationary: bool,
    pub n_obs: usize,
    /// Standard errors of `mu`, `rho1`, `rho2`.
    pub std_errors: [f64; 3],
    pub loglik: f64,
}

impl Ar2Model {
    /// Three coefficients and the variance.
    pub const N_PARAMS: usize = 4;

    pub fn sigma_ml(&self) -> f64 {
        let n = self.n_obs as f64;
        self.sigma * ((n - 3.0) / n).sqrt()
    }

    pub fn loglik_on(&self, series: &[(i32, f64)], from: usize) -> f64 {
        let s = self.sigma_ml();
        let c = -0.5 * (2.0 * std::f64::consts::PI).ln();
        (from.max(2)..series.len())
            .map(|t| {
                let pred = self.mu + self.rho1 * series[t - 1].1 + self.rho2 * series[t - 2].1;
                let z = (series[t].1 - pred) / s;
                c - s.ln() - 0.5 * z * z
            })
            .sum()
    }

    /// Variance of the stationary distribution; infinite when non-stationary.
    pub fn stationary_variance(&self) -> f64 {
        if !self.stationary {
            return f64::INFINITY;
        }
        let (r1, r2) = (self.rho1, self.rho2);
        self.sigma.powi(2) * (1.0 - r2) / ((1.0 + r2) * ((1.0 - r2).powi(2) - r1 * r1))
    }
}

pub fn fit_ar2(series: &[(i32, f64)]) -> Result<Ar2Model, ForecastError> {
    check_series(series, 5)?;
    check_consecutive(series)?;
    let n = series.len() - 2;
    let x = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => series[i + 1].1,
        _ => series[i].1,
    });
    let y = DVector::from_fn(n, |i, _| series[i + 2].1);
    let fit = least_squares(&x, &y).map_err(|_| ForecastError::TooFewObservations { n: series.len(), min: 5 })?;
    let s2 = fit.rss / (n - 3) as f64;
    let (mu, rho1, rho2) = (fit.beta[0], fit.beta[1], fit.beta[2]);
    let m = series.len();
    Ok(Ar2Model {
        mu,
        rho1,
        rho2,
        sigma: s2.sqrt(),
        last_two_obs: [series[m - 2], series[m - 1]],
        stationary: inverse_root_modulus(&[(1, rho1), (2, rho2)]) < 1.0,
        n_obs: n,
        std_errors: [0, 1, 2].map(|j| (s2 * fit.xtx_inv[(j, j)]).max(0.0).sqrt()),
        loglik: concentrated_loglik(fit.rss, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate(rho1: f64, rho2: f64, n: usize, seed: u64) -> Vec<(i32, f64)> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v = vec![0.0f64; n + 200];
        for t in 2..v.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            v[t] = 1.0 + rho1 * v[t - 1] + rho2 * v[t - 2] + e;
        }
        v[200..].iter().enumerate().map(|(i, &x)| (i as i32, x)).collect()
    }

    #[test]
    fn recovers_coefficients() {
        let m = fit_ar2(&simulate(0.5, 0.2, 5000, 3)).unwrap();
        assert!((m.rho1 - 0.5).abs() < 3.0 * m.std_errors[1]);
        assert!((m.rho2 - 0.2).abs() < 3.0 * m.std_errors[2]);
        assert!(m.stationary);
    }

    #[test]
    fn white_noise_and_reversal() {
        let s = simulate(0.0, 0.0, 3000, 4);
        let m = fit_ar2(&s).unwrap();
        assert!(m.rho1.abs() < 3.0 * m.std_errors[1] && m.rho2.abs() < 3.0 * m.std_errors[2]);
        let rev: Vec<_> = s.iter().rev().enumerate().map(|(i, &(_, v))| (i as i32, v)).collect();
        let r = fit_ar2(&rev).unwrap();
        assert!(r.rho1.abs() < 3.0 * r.std_errors[1] && r.rho2.abs() < 3.0 * r.std_errors[2]);
    }

    #[test]
    fn ar1_data_gives_null_second_lag() {
        let m = fit_ar2(&simulate(0.7, 0.0, 4000, 5)).unwrap();
        assert!(m.rho2.abs() < 3.0 * m.std_errors[2]);
    }

    #[test]
    fn flags_explosive_fit() {
        let s: Vec<(i32, f64)> = (0..8).map(|t| (2008 + t, 1.3f64.powi(t) + if t % 2 == 0 { 0.01 } else { 0.0 })).collect();
        assert!(!fit_ar2(&s).unwrap().stationary);
    }

    #[test]
    fn rejects_gaps() {
        let s = vec![(2008, 1.0), (2009, 2.0), (2011, 1.0), (2012, 3.0), (2013, 2.0)];
        assert!(matches!(fit_ar2(&s), Err(ForecastError::NonConsecutiveYears { .. })));
    }
}
