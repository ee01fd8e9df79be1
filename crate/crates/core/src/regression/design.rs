//! Design-matrix construction and the summary statistics shared by every
//! estimator.

use nalgebra::{DMatrix, DVector};

use super::{
    CoefLabel, FixedEffect, ModelSpec, RegressionError, SlopeScope, CONST_TERM, COUNTRY_EFFECT_TERM, SEASON_PREFIX,
};
use crate::linalg::{least_squares, LsError, LsFit};
use crate::panel::{Frequency, PanelDataset, Period};

#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub countries: Vec<String>,
    pub periods: Vec<Period>,
    pub t_len: usize,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub labels: Vec<CoefLabel>,
}

impl Design {
    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }
}

/// Variables the spec reads from the dataset.
pub(crate) fn used_variables(spec: &ModelSpec) -> Vec<String> {
    let mut vars = vec![spec.dependent.clone()];
    vars.extend(spec.regressors.iter().map(|r| r.name.clone()));
    vars.extend(spec.dummies.iter().cloned());
    vars
}

/// Builds the stacked design over the largest run of periods in which every
/// used variable is observed for every country. Missing cells strictly inside
/// that run are an error.
pub(crate) fn build_design(ds: &PanelDataset, spec: &ModelSpec) -> Result<Design, RegressionError> {
    let vars = used_variables(spec);
    for v in &vars {
        if !ds.has_variable(v) {
            return Err(RegressionError::UnknownVariable(v.clone()));
        }
    }
    let seasonal = spec.fixed_effects.contains(&FixedEffect::Seasonal);
    if seasonal && ds.frequency() == Frequency::Yearly {
        return Err(RegressionError::InvalidSpec("seasonal fixed effects need monthly or biannual data".into()));
    }
    let n_c = ds.n_countries();
    let n_t = ds.n_periods();
    if n_c == 0 || n_t == 0 {
        return Err(RegressionError::InsufficientObservations { n: 0, k: 1 });
    }

    let complete = |t: usize| (0..n_c).all(|c| vars.iter().all(|v| ds.value(v, c, t).is_some()));
    let first = (0..n_t).find(|&t| complete(t));
    let last = (0..n_t).rev().find(|&t| complete(t));
    let (first, last) = match (first, last) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let missing = missing_cells(ds, &vars, 0, n_t - 1);
            return Err(RegressionError::MissingCells { missing });
        }
    };
    let inner_missing = missing_cells(ds, &vars, first, last);
    if !inner_missing.is_empty() {
        return Err(RegressionError::MissingCells { missing: inner_missing });
    }
    let t_len = last - first + 1;
    if spec.arma.max_lag() >= t_len {
        return Err(RegressionError::InvalidSpec(format!(
            "ARMA lag {} needs more than {t_len} periods per country",
            spec.arma.max_lag()
        )));
    }
    let periods = ds.periods()[first..=last].to_vec();
    let countries = ds.countries().to_vec();
    let n = n_c * t_len;

    let mut labels = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let country_fe = spec.fixed_effects.contains(&FixedEffect::Country);

    if spec.intercept {
        labels.push(CoefLabel::pooled(CONST_TERM));
        columns.push(vec![1.0; n]);
    }
    if country_fe {
        let skip = usize::from(spec.intercept);
        for (c, code) in countries.iter().enumerate().skip(skip) {
            labels.push(CoefLabel::country(COUNTRY_EFFECT_TERM, code));
            columns.push((0..n).map(|i| if i / t_len == c { 1.0 } else { 0.0 }).collect());
        }
    }
    if seasonal {
        let ppy = ds.frequency().periods_per_year();
        let from = if spec.intercept || country_fe { 2 } else { 1 };
        for s in from..=ppy {
            labels.push(CoefLabel::pooled(&format!("{SEASON_PREFIX}{s:02}")));
            columns.push((0..n).map(|i| if periods[i % t_len].sub == s { 1.0 } else { 0.0 }).collect());
        }
    }
    let value = |var: &str, i: usize| ds.value(var, i / t_len, first + i % t_len).unwrap();
    for reg in &spec.regressors {
        match reg.scope {
            SlopeScope::Pooled => {
                labels.push(CoefLabel::pooled(&reg.name));
                columns.push((0..n).map(|i| value(&reg.name, i)).collect());
            }
            SlopeScope::PerCountry => {
                for (c, code) in countries.iter().enumerate() {
                    labels.push(CoefLabel::country(&reg.name, code));
                    columns.push((0..n).map(|i| if i / t_len == c { value(&reg.name, i) } else { 0.0 }).collect());
                }
            }
        }
    }
    for d in &spec.dummies {
        labels.push(CoefLabel::pooled(d));
        columns.push((0..n).map(|i| value(d, i)).collect());
    }
    if labels.is_empty() {
        return Err(RegressionError::InvalidSpec("model has no regressors".into()));
    }
    let k = labels.len();
    if n <= k {
        return Err(RegressionError::InsufficientObservations { n, k });
    }
    let x = DMatrix::from_fn(n, k, |i, j| columns[j][i]);
    let y = DVector::from_fn(n, |i, _| value(&spec.dependent, i));
    Ok(Design { countries, periods, t_len, y, x, labels })
}

fn missing_cells(ds: &PanelDataset, vars: &[String], from: usize, to: usize) -> Vec<crate::panel::CellRef> {
    let mut out = Vec::new();
    for c in 0..ds.n_countries() {
        for t in from..=to {
            for v in vars {
                if ds.value(v, c, t).is_none() {
                    out.push(ds.cell_ref(c, t, v));
                }
            }
        }
    }
    out
}

/// Least squares with rank problems reported by column label.
pub(crate) fn solve(x: &DMatrix<f64>, y: &DVector<f64>, labels: &[CoefLabel]) -> Result<LsFit, RegressionError> {
    least_squares(x, y).map_err(|e| match e {
        LsError::RankDeficient { columns } => RegressionError::RankDeficientDesign {
            columns: columns.iter().map(|&j| labels[j].to_string()).collect(),
        },
        LsError::Insufficient { n, k } => RegressionError::InsufficientObservations { n, k },
    })
}

/// Splits a stacked vector into per-country series of length `t_len`.
pub(crate) fn by_country(v: &DVector<f64>, n_countries: usize, t_len: usize) -> Vec<Vec<f64>> {
    (0..n_countries).map(|c| v.rows(c * t_len, t_len).iter().copied().collect()).collect()
}

/// Pooled Durbin–Watson: per-country sums of squared first differences over
/// per-country sums of squares. `NaN` when every residual is zero.
pub(crate) fn pooled_dw(residuals: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for e in residuals {
        num += e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
        den += e.iter().map(|v| v * v).sum::<f64>();
    }
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

pub(crate) struct FitStats {
    pub r2: f64,
    pub r2_adjusted: f64,
}

pub(crate) fn fit_stats(y: &[f64], rss: f64, k: usize) -> FitStats {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN };
    let r2_adjusted = if n > k { 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n - k) as f64 } else { f64::NAN };
    FitStats { r2, r2_adjusted }
}

/// Gaussian log-likelihood with the error variance concentrated out.
pub(crate) fn gaussian_loglik(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI * rss / n).ln() + 1.0)
}

/// Log-likelihood of `T` independent draws of a `J`-variate normal with the
/// covariance concentrated out.
pub(crate) fn sur_loglik(sigma: &DMatrix<f64>, t_len: usize) -> f64 {
    let j = sigma.nrows() as f64;
    let det = sigma.determinant();
    if det <= 0.0 {
        return f64::NAN;
    }
    -0.5 * t_len as f64 * (j * (2.0 * std::f64::consts::PI).ln() + det.ln() + j)
}
