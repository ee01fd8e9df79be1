use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{check_series, ForecastError};

const CLAMP_TOL: f64 = 1e-12;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Linear latent trend observed through censoring at 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TobitModel {
    pub beta0: f64,
    pub beta1: f64,
    /// Latent sd (maximum likelihood).
    pub sigma: f64,
    pub t0: i32,
    pub bounds: (f64, f64),
    pub last_obs: (i32, f64),
    pub n_obs: usize,
    pub n_left: usize,
    pub n_right: usize,
    pub loglik: f64,
    pub iterations: usize,
}

impl TobitModel {
    /// Two coefficients and the variance.
    pub const N_PARAMS: usize = 3;

    pub fn latent_mean_at(&self, year: i32) -> f64 {
        self.beta0 + self.beta1 * f64::from(year - self.t0)
    }

    pub fn loglik_on(&self, series: &[(i32, f64)]) -> f64 {
        let Ok(obs) = clamp_all(series) else { return f64::NAN };
        let tau = 1.0 / self.sigma;
        let p = Vector3::new(self.beta0 * tau, self.beta1 * tau, tau);
        obs.iter().map(|&(y, v)| point(&p, f64::from(y - self.t0), v).0).sum()
    }
}

fn clamp(year: i32, v: f64) -> Result<f64, ForecastError> {
    if v.abs() <= CLAMP_TOL {
        Ok(0.0)
    } else if (v - 1.0).abs() <= CLAMP_TOL {
        Ok(1.0)
    } else if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ForecastError::OutOfBounds { year, value: v })
    }
}

fn clamp_all(series: &[(i32, f64)]) -> Result<Vec<(i32, f64)>, ForecastError> {
    series.iter().map(|&(y, v)| clamp(y, v).map(|c| (y, c))).collect()
}

/// `(ln Phi(a), phi(a) / Phi(a))` without underflow in the far left tail.
fn log_cdf_and_mills(a: f64) -> (f64, f64) {
    if a > -30.0 {
        let cdf = 0.5 * erfc(-a / std::f64::consts::SQRT_2);
        let pdf = (-0.5 * a * a - LN_SQRT_2PI).exp();
        (cdf.ln(), pdf / cdf)
    } else {
        let a2 = a * a;
        let series = 1.0 - 1.0 / a2 + 3.0 / (a2 * a2) - 15.0 / (a2 * a2 * a2);
        let ln_cdf = -0.5 * a2 - (-a).ln() - LN_SQRT_2PI + series.ln();
        (ln_cdf, (-0.5 * a2 - LN_SQRT_2PI - ln_cdf).exp())
    }
}

/// Contribution of one observation to the log-likelihood, its gradient and
/// Hessian in `(gamma0, gamma1, tau) = (beta0, beta1, 1) / sigma`.
fn point(p: &Vector3<f64>, t: f64, y: f64) -> (f64, Vector3<f64>, Matrix3<f64>) {
    let xg = p[0] + p[1] * t;
    let tau = p[2];
    if y == 0.0 {
        let a = -xg;
        let (ll, lam) = log_cdf_and_mills(a);
        let d = Vector3::new(-1.0, -t, 0.0);
        (ll, d * lam, d * d.transpose() * (-lam * (a + lam)))
    } else if y == 1.0 {
        let b = xg - tau;
        let (ll, lam) = log_cdf_and_mills(b);
        let d = Vector3::new(1.0, t, -1.0);
        (ll, d * lam, d * d.transpose() * (-lam * (b + lam)))
    } else {
        let z = tau * y - xg;
        let ll = tau.ln() - LN_SQRT_2PI - 0.5 * z * z;
        let x = Vector3::new(1.0, t, 0.0);
        let g = x * z + Vector3::new(0.0, 0.0, 1.0 / tau - z * y);
        let v = Vector3::new(-1.0, -t, y);
        let h = -(v * v.transpose()) - Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / (tau * tau));
        (ll, g, h)
    }
}

fn evaluate(obs: &[(f64, f64)], p: &Vector3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
    let mut ll = 0.0;
    let mut g = Vector3::zeros();
    let mut h = Matrix3::zeros();
    for &(t, y) in obs {
        let (l, gi, hi) = point(p, t, y);
        ll += l;
        g += gi;
        h += hi;
    }
    (ll, g, h)
}

/// Newton ascent in the Olsen parametrization, where the log-likelihood is
/// concave, until the log-likelihood changes by less than 1e-10.
pub fn fit_tobit(series: &[(i32, f64)]) -> Result<TobitModel, ForecastError> {
    check_series(series, 4)?;
    let obs_years = clamp_all(series)?;
    let t0 = obs_years[0].0;
    let obs: Vec<(f64, f64)> = obs_years.iter().map(|&(y, v)| (f64::from(y - t0), v)).collect();
    let n_left = obs.iter().filter(|o| o.1 == 0.0).count();
    let n_right = obs.iter().filter(|o| o.1 == 1.0).count();
    if n_left + n_right == obs.len() {
        return Err(ForecastError::DegenerateAllCensored);
    }

    let n = obs.len() as f64;
    let tm = obs.iter().map(|o| o.0).sum::<f64>() / n;
    let ym = obs.iter().map(|o| o.1).sum::<f64>() / n;
    let sxx: f64 = obs.iter().map(|o| (o.0 - tm).powi(2)).sum();
    let b1 = obs.iter().map(|o| (o.0 - tm) * (o.1 - ym)).sum::<f64>() / sxx;
    let b0 = ym - b1 * tm;
    let rss: f64 = obs.iter().map(|o| (o.1 - b0 - b1 * o.0).powi(2)).sum();
    let s0 = (rss / n).sqrt();
    if s0 == 0.0 && n_left + n_right == 0 {
        return Err(ForecastError::ZeroLatentVariance);
    }
    let s0 = s0.max(1e-3);
    let mut p = Vector3::new(b0 / s0, b1 / s0, 1.0 / s0);
    let (mut ll, mut g, mut h) = evaluate(&obs, &p);
    let max_iter = 500;
    for it in 1..=max_iter {
        let step = match (-h).cholesky() {
            Some(c) => c.solve(&g),
            None => g * 1e-3,
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let q = p + step * scale;
            if q[2] > 0.0 {
                let (lq, gq, hq) = evaluate(&obs, &q);
                if lq.is_finite() && lq >= ll - 1e-14 * ll.abs() {
                    accepted = Some((q, lq, gq, hq));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((q, lq, gq, hq)) = accepted else {
            return Err(ForecastError::NoConvergence { iterations: it });
        };
        let dl = (lq - ll).abs();
        let dp = (q - p).amax();
        p = q;
        ll = lq;
        g = gq;
        h = hq;
        if p[2] > 1e12 {
            return Err(ForecastError::ZeroLatentVariance);
        }
        if dl < 1e-10 && dp < 1e-8 * (1.0 + p.amax()) {
            let sigma = 1.0 / p[2];
            return Ok(TobitModel {
                beta0: p[0] * sigma,
                beta1: p[1] * sigma,
                sigma,
                t0,
                bounds: (0.0, 1.0),
                last_obs: *obs_years.last().unwrap(),
                n_obs: obs.len(),
                n_left,
                n_right,
                loglik: ll,
                iterations: it,
            });
        }
    }
    Err(ForecastError::NoConvergence { iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::fit_trend;

    fn years(values: &[f64]) -> Vec<(i32, f64)> {
        values.iter().enumerate().map(|(i, &v)| (2008 + i as i32, v)).collect()
    }

    #[test]
    fn uncensored_matches_trend() {
        let s = years(&[0.21, 0.25, 0.24, 0.30, 0.33, 0.31, 0.38, 0.40, 0.41]);
        let tob = fit_tobit(&s).unwrap();
        let tr = fit_trend(&s).unwrap();
        assert!((tob.beta0 - tr.beta0).abs() < 1e-6);
        assert!((tob.beta1 - tr.beta1).abs() < 1e-6);
        assert!((tob.sigma - tr.sigma_ml()).abs() < 1e-6);
        assert!((tob.loglik - tr.loglik).abs() < 1e-8);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let s = years(&[0.55, 0.62, 0.70, 0.81, 0.86, 0.97, 1.0, 1.0, 1.0]);
        let m = fit_tobit(&s).unwrap();
        assert_eq!(m.n_right, 3);
        let f = |b0: f64, b1: f64, sg: f64| {
            let probe = TobitModel { beta0: b0, beta1: b1, sigma: sg, ..m.clone() };
            probe.loglik_on(&s)
        };
        let h = 1e-6;
        let g = [
            (f(m.beta0 + h, m.beta1, m.sigma) - f(m.beta0 - h, m.beta1, m.sigma)) / (2.0 * h),
            (f(m.beta0, m.beta1 + h, m.sigma) - f(m.beta0, m.beta1 - h, m.sigma)) / (2.0 * h),
            (f(m.beta0, m.beta1, m.sigma + h) - f(m.beta0, m.beta1, m.sigma - h)) / (2.0 * h),
        ];
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-5, "gradient {g:?}");
        assert!((m.loglik - m.loglik_on(&s)).abs() < 1e-9);
    }

    #[test]
    fn censoring_steepens_latent_slope() {
        let s = years(&[0.55, 0.62, 0.70, 0.81, 0.86, 0.97, 1.0, 1.0, 1.0]);
        assert!(fit_tobit(&s).unwrap().beta1 > fit_trend(&s).unwrap().beta1);
    }

    #[test]
    fn boundary_handling() {
        assert!(matches!(fit_tobit(&years(&[0.0, 1.0, 1.0, 0.0])), Err(ForecastError::DegenerateAllCensored)));
        assert!(matches!(fit_tobit(&years(&[0.1, 1.2, 0.3, 0.4])), Err(ForecastError::OutOfBounds { .. })));
        let m = fit_tobit(&years(&[1e-13, 0.1, 0.15, 0.3, 0.35])).unwrap();
        assert_eq!(m.n_left, 1);
    }

    #[test]
    fn far_tail_is_finite() {
        let (l, lam) = log_cdf_and_mills(-40.0);
        assert!(l.is_finite() && (lam - 40.0).abs() < 0.1);
        let (l2, _) = log_cdf_and_mills(-29.999);
        let (l3, _) = log_cdf_and_mills(-30.001);
        assert!((l2 - l3).abs() < 0.1);
    }
}
