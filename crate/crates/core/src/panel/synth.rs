//! Synthetic panels drawn from a fully specified linear model with
//! cross-correlated ARMA errors. The true parameters travel with the data
//! so estimators can be checked against them.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schema::Construction;
use super::{PanelDataset, PanelError, Period};
use crate::linalg::{inverse_root_modulus, psd_sqrt};

/// `phi(B) eta_t = theta(B) eps_t` with `phi(B) = 1 - sum phi_l B^l` and
/// `theta(B) = 1 - sum theta_l B^l`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmaProcess {
    pub ar: Vec<(usize, f64)>,
    pub ma: Vec<(usize, f64)>,
}

impl ArmaProcess {
    pub fn white() -> Self {
        Self::default()
    }

    pub fn ar1(phi: f64) -> Self {
        ArmaProcess { ar: vec![(1, phi)], ma: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorDgp {
    pub name: String,
    pub unit: String,
    pub mean: f64,
    pub sd: f64,
    /// Within-country AR(1) persistence of the regressor itself.
    pub persistence: f64,
    /// True slope per country.
    pub slopes: Vec<f64>,
    /// Loading on the country effect; non-zero makes the regressor
    /// correlated with the effect (endogenous for random effects).
    pub effect_loading: f64,
    pub bounds: Option<(f64, f64)>,
}

impl RegressorDgp {
    pub fn new(name: &str, mean: f64, sd: f64, slopes: Vec<f64>) -> Self {
        RegressorDgp {
            name: name.to_string(),
            unit: String::new(),
            mean,
            sd,
            persistence: 0.0,
            slopes,
            effect_loading: 0.0,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dgp {
    pub countries: Vec<String>,
    pub start: Period,
    pub n_periods: usize,
    pub dependent: String,
    pub dependent_unit: String,
    pub intercepts: Vec<f64>,
    /// Standard deviation of a random country effect added to the dependent.
    pub country_effect_sd: f64,
    /// One additive effect per sub-period of the year (empty for none).
    pub seasonal: Vec<f64>,
    pub regressors: Vec<RegressorDgp>,
    /// Contemporaneous covariance of the innovations across countries.
    pub error_cov: DMatrix<f64>,
    pub arma: ArmaProcess,
    pub burn_in: usize,
}

impl Dgp {
    /// Spherical-error skeleton with no regressors.
    pub fn new(countries: &[&str], start: Period, n_periods: usize, error_sd: f64) -> Self {
        let j = countries.len();
        Dgp {
            countries: countries.iter().map(|c| c.to_string()).collect(),
            start,
            n_periods,
            dependent: "Y".to_string(),
            dependent_unit: String::new(),
            intercepts: vec![0.0; j],
            country_effect_sd: 0.0,
            seasonal: Vec::new(),
            regressors: Vec::new(),
            error_cov: DMatrix::identity(j, j) * (error_sd * error_sd),
            arma: ArmaProcess::white(),
            burn_in: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub slopes: Vec<(String, Vec<f64>)>,
    pub intercepts: Vec<f64>,
    pub country_effects: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub error_cov: DMatrix<f64>,
    pub arma: ArmaProcess,
    /// Realised errors `eta[country][t]`.
    pub errors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel {
    pub dataset: PanelDataset,
    pub truth: SyntheticTruth,
}

pub fn synthesize_dataset(dgp: &Dgp, seed: u64) -> Result<SyntheticPanel, PanelError> {
    let j_n = dgp.countries.len();
    let t_n = dgp.n_periods;
    if j_n == 0 || t_n == 0 {
        return Err(PanelError::InvalidDgp("need at least one country and one period".into()));
    }
    if dgp.intercepts.len() != j_n || dgp.error_cov.shape() != (j_n, j_n) {
        return Err(PanelError::InvalidDgp("intercepts and error covariance must match the country count".into()));
    }
    if let Some(r) = dgp.regressors.iter().find(|r| r.slopes.len() != j_n) {
        return Err(PanelError::InvalidDgp(format!("regressor `{}` needs one slope per country", r.name)));
    }
    let ppy = dgp.start.frequency.periods_per_year() as usize;
    if !dgp.seasonal.is_empty() && dgp.seasonal.len() != ppy {
        return Err(PanelError::InvalidDgp(format!("seasonal effects need {ppy} entries")));
    }
    let modulus = inverse_root_modulus(&dgp.arma.ar);
    if modulus >= 1.0 - 1e-12 {
        return Err(PanelError::NonStationaryDgp { modulus });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let effects: Vec<f64> = (0..j_n).map(|_| dgp.country_effect_sd * normal()).collect();

    let mut x_values: Vec<Vec<f64>> = Vec::with_capacity(dgp.regressors.len());
    for reg in &dgp.regressors {
        let rho = reg.persistence;
        let innov_sd = reg.sd * (1.0 - rho * rho).max(0.0).sqrt();
        let mut cells = Vec::with_capacity(j_n * t_n);
        for &u in effects.iter() {
            let mut dev = reg.sd * normal();
            for t in 0..t_n {
                if t > 0 {
                    dev = rho * dev + innov_sd * normal();
                }
                let mut v = reg.mean + reg.effect_loading * u + dev;
                if let Some((lo, hi)) = reg.bounds {
                    v = v.clamp(lo, hi);
                }
                cells.push(v);
            }
        }
        x_values.push(cells);
    }

    let root = psd_sqrt(&dgp.error_cov);
    let total = dgp.burn_in + t_n;
    let mut eps = vec![vec![0.0; total]; j_n];
    for t in 0..total {
        let z = DVector::from_fn(j_n, |_, _| normal());
        let e = &root * z;
        for j in 0..j_n {
            eps[j][t] = e[j];
        }
    }
    let errors: Vec<Vec<f64>> = eps
        .iter()
        .map(|e| {
            let mut eta = vec![0.0; total];
            for t in 0..total {
                let mut v = e[t];
                for &(lag, phi) in &dgp.arma.ar {
                    if t >= lag {
                        v += phi * eta[t - lag];
                    }
                }
                for &(lag, theta) in &dgp.arma.ma {
                    if t >= lag {
                        v -= theta * e[t - lag];
                    }
                }
                eta[t] = v;
            }
            eta[dgp.burn_in..].to_vec()
        })
        .collect();

    let mut ds = PanelDataset::with_span(dgp.countries.clone(), dgp.start, t_n);
    let periods = ds.periods().to_vec();
    let mut y = Vec::with_capacity(j_n * t_n);
    for j in 0..j_n {
        for (t, period) in periods.iter().enumerate() {
            let mut v = dgp.intercepts[j] + effects[j] + errors[j][t];
            if !dgp.seasonal.is_empty() {
                v += dgp.seasonal[period.sub as usize - 1];
            }
            for (reg, xs) in dgp.regressors.iter().zip(&x_values) {
                v += reg.slopes[j] * xs[j * t_n + t];
            }
            y.push(Some(v));
        }
    }
    ds = ds.with_variable(dgp.dependent.clone(), dgp.dependent_unit.clone(), Construction::Raw, y)?;
    for (reg, xs) in dgp.regressors.iter().zip(x_values) {
        ds = ds.with_variable(reg.name.clone(), reg.unit.clone(), Construction::Raw, xs.into_iter().map(Some).collect())?;
    }

    Ok(SyntheticPanel {
        dataset: ds,
        truth: SyntheticTruth {
            slopes: dgp.regressors.iter().map(|r| (r.name.clone(), r.slopes.clone())).collect(),
            intercepts: dgp.intercepts.clone(),
            country_effects: effects,
            seasonal: dgp.seasonal.clone(),
            error_cov: dgp.error_cov.clone(),
            arma: dgp.arma.clone(),
            errors,
        },
    })
}
