//! Specification tests and information criteria.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::forecast::ForecastModel;
use crate::linalg::{least_squares, pinv_symmetric, LsError};
use crate::panel::{CellRef, PanelDataset};
use crate::regression::{CoefLabel, FitResult, SlopeScope, CONST_TERM, COUNTRY_EFFECT_TERM, SEASON_PREFIX};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("regressor `{0}` is not in the fit")]
    UnknownRegressor(String),
    #[error("slope equality needs at least two countries, found {0}")]
    TooFewCountries(usize),
    #[error("fits are not comparable: {0}")]
    IncompatibleFits(String),
    #[error("VIF needs at least two regressors")]
    TooFewRegressors,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("missing cell {0}")]
    MissingCell(CellRef),
    #[error("perfectly collinear regressors: {}", set.join(", "))]
    PerfectCollinearity { set: Vec<String>, vif: BTreeMap<String, f64> },
    #[error("residuals are identically zero; Durbin-Watson is undefined")]
    ZeroResiduals,
    #[error("Durbin-Watson needs series of length 2 or more")]
    ShortSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub note: String,
    pub flags: Vec<String>,
}

/// Upper tail of the chi-squared distribution.
pub fn chi2_sf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let d = ChiSquared::new(dof as f64).expect("dof >= 1");
    d.sf(x).clamp(0.0, 1.0)
}

fn quadratic_form(d: &DVector<f64>, v: &DMatrix<f64>, flag: &str) -> (f64, usize, Vec<String>) {
    if d.iter().all(|x| *x == 0.0) {
        return (0.0, d.len(), Vec::new());
    }
    match v.clone().cholesky() {
        Some(c) => {
            let s = d.dot(&c.solve(d));
            (s, d.len(), Vec::new())
        }
        None => {
            let (p, rank) = pinv_symmetric(v, 1e-10);
            ((d.transpose() * p * d)[(0, 0)], rank.max(1), vec![flag.to_string()])
        }
    }
}

/// Wald test that the per-country slopes of `regressor` are equal, using
/// the first country as reference. A pooled regressor has no contrasts and
/// yields a zero statistic.
pub fn wald_slope_equality(fit: &FitResult, regressor: &str) -> Result<TestReport, DiagnosticsError> {
    let j = fit.countries.len();
    if j < 2 {
        return Err(DiagnosticsError::TooFewCountries(j));
    }
    match fit.scopes.get(regressor) {
        None => Err(DiagnosticsError::UnknownRegressor(regressor.to_string())),
        Some(SlopeScope::Pooled) => Ok(TestReport {
            statistic: 0.0,
            dof: j - 1,
            p_value: 1.0,
            note: format!("`{regressor}` has one pooled slope; equality holds by construction"),
            flags: Vec::new(),
        }),
        Some(SlopeScope::PerCountry) => {
            let idx: Vec<usize> = fit
                .countries
                .iter()
                .map(|c| fit.index_of(&CoefLabel::country(regressor, c)))
                .collect::<Option<_>>()
                .ok_or_else(|| DiagnosticsError::UnknownRegressor(regressor.to_string()))?;
            let d = DVector::from_fn(j - 1, |r, _| fit.coefficients[idx[0]] - fit.coefficients[idx[r + 1]]);
            let v = &fit.covariance;
            let rv = DMatrix::from_fn(j - 1, j - 1, |a, b| {
                let (ia, ib) = (idx[a + 1], idx[b + 1]);
                v[(idx[0], idx[0])] - v[(idx[0], ib)] - v[(ia, idx[0])] + v[(ia, ib)]
            });
            let (statistic, dof, flags) = quadratic_form(&d, &rv, "singular_restriction_covariance");
            let p_value = chi2_sf(statistic, dof);
            Ok(TestReport {
                statistic,
                dof,
                p_value,
                note: format!("H0: equal `{regressor}` slopes across {j} countries"),
                flags,
            })
        }
    }
}

fn hausman_term(label: &CoefLabel) -> bool {
    label.term != CONST_TERM && label.term != COUNTRY_EFFECT_TERM && !label.term.starts_with(SEASON_PREFIX)
}

/// Hausman contrast over the time-varying coefficients common to both fits.
pub fn hausman(fe: &FitResult, re: &FitResult) -> Result<TestReport, DiagnosticsError> {
    let common: Vec<(usize, usize)> = fe
        .labels
        .iter()
        .enumerate()
        .filter(|(_, l)| hausman_term(l))
        .filter_map(|(i, l)| re.index_of(l).map(|r| (i, r)))
        .collect();
    if common.is_empty() {
        return Err(DiagnosticsError::IncompatibleFits("no common time-varying coefficients".into()));
    }
    let fe_terms = fe.labels.iter().filter(|l| hausman_term(l)).count();
    let re_terms = re.labels.iter().filter(|l| hausman_term(l)).count();
    if fe_terms != common.len() || re_terms != common.len() {
        return Err(DiagnosticsError::IncompatibleFits("the fits use different regressor sets".into()));
    }
    let k = common.len();
    let d = DVector::from_fn(k, |a, _| fe.coefficients[common[a].0] - re.coefficients[common[a].1]);
    let v = DMatrix::from_fn(k, k, |a, b| {
        fe.covariance[(common[a].0, common[b].0)] - re.covariance[(common[a].1, common[b].1)]
    });
    let (statistic, dof, flags) = quadratic_form(&d, &v, "covariance_difference_not_positive_definite");
    Ok(TestReport {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof),
        note: "H0: country effects uncorrelated with regressors (random effects consistent)".into(),
        flags,
    })
}

/// Variance inflation factors from pooled auxiliary regressions (with a
/// constant) of each regressor on the others.
pub fn vif(ds: &PanelDataset, regressors: &[&str]) -> Result<BTreeMap<String, f64>, DiagnosticsError> {
    if regressors.len() < 2 {
        return Err(DiagnosticsError::TooFewRegressors);
    }
    let n_c = ds.n_countries();
    let n_t = ds.n_periods();
    let mut cols = Vec::with_capacity(regressors.len());
    for name in regressors {
        if !ds.has_variable(name) {
            return Err(DiagnosticsError::UnknownVariable(name.to_string()));
        }
        let mut col = Vec::with_capacity(n_c * n_t);
        for c in 0..n_c {
            for t in 0..n_t {
                col.push(ds.value(name, c, t).ok_or_else(|| DiagnosticsError::MissingCell(ds.cell_ref(c, t, name)))?);
            }
        }
        cols.push(col);
    }
    let n = n_c * n_t;
    let mut out = BTreeMap::new();
    let mut collinear = Vec::new();
    for (k, name) in regressors.iter().enumerate() {
        let others: Vec<usize> = (0..regressors.len()).filter(|&j| j != k).collect();
        let x = DMatrix::from_fn(n, others.len() + 1, |i, j| if j == 0 { 1.0 } else { cols[others[j - 1]][i] });
        let y = DVector::from_column_slice(&cols[k]);
        let mean = y.mean();
        let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let value = match least_squares(&x, &y) {
            Ok(fit) if fit.rss > 1e-24 * tss && tss > 0.0 => tss / fit.rss,
            Ok(_) | Err(LsError::RankDeficient { .. }) => f64::INFINITY,
            Err(LsError::Insufficient { .. }) => return Err(DiagnosticsError::TooFewRegressors),
        };
        if value.is_infinite() {
            collinear.push(name.to_string());
        }
        out.insert(name.to_string(), value.max(1.0));
    }
    if collinear.is_empty() {
        Ok(out)
    } else {
        Err(DiagnosticsError::PerfectCollinearity { set: collinear, vif: out })
    }
}

/// Pooled Durbin–Watson: summed numerators over summed denominators.
pub fn durbin_watson(residuals: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    if residuals.is_empty() || residuals.iter().any(|e| e.len() < 2) {
        return Err(DiagnosticsError::ShortSeries);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for e in residuals {
        num += e.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
        den += e.iter().map(|v| v * v).sum::<f64>();
    }
    if den == 0.0 {
        return Err(DiagnosticsError::ZeroResiduals);
    }
    Ok(num / den)
}

/// Durbin–Watson per country; `NaN` for an all-zero series.
pub fn durbin_watson_by_country(residuals: &[Vec<f64>]) -> Vec<f64> {
    residuals.iter().map(|e| durbin_watson(std::slice::from_ref(e)).unwrap_or(f64::NAN)).collect()
}

pub fn aic(loglik: f64, n_params: usize) -> f64 {
    2.0 * n_params as f64 - 2.0 * loglik
}

/// Anything with a maximized log-likelihood and a parameter count.
pub trait Likelihood {
    fn loglik(&self) -> f64;
    fn n_params(&self) -> usize;

    fn aic(&self) -> f64 {
        aic(self.loglik(), self.n_params())
    }
}

impl Likelihood for FitResult {
    fn loglik(&self) -> f64 {
        self.loglik
    }

    fn n_params(&self) -> usize {
        self.n_params
    }
}

impl Likelihood for ForecastModel {
    fn loglik(&self) -> f64 {
        ForecastModel::loglik(self)
    }

    fn n_params(&self) -> usize {
        ForecastModel::n_params(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Period;

    #[test]
    fn chi2_tail_matches_closed_form() {
        for i in 0..=1000 {
            let x = i as f64 * 0.5;
            let exact = (-x / 2.0).exp();
            let got = chi2_sf(x, 2);
            assert!(((got - exact) / exact).abs() < 1e-10, "x {x}: {got} vs {exact}");
        }
    }

    #[test]
    fn aic_arithmetic() {
        assert_eq!(aic(0.0, 2), 4.0);
    }

    #[test]
    fn dw_closed_forms() {
        let t = 100;
        let alt: Vec<f64> = (0..t).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let dw = durbin_watson(&[alt]).unwrap();
        assert!((dw - 4.0 * (t as f64 - 1.0) / t as f64).abs() < 1e-12);
        assert_eq!(durbin_watson(&[vec![2.0; 10]]).unwrap(), 0.0);
        assert_eq!(durbin_watson(&[vec![0.0; 10]]), Err(DiagnosticsError::ZeroResiduals));
    }

    #[test]
    fn vif_orthogonal_is_one() {
        let a = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let ds = PanelDataset::with_span(vec!["A".into(), "B".into()], Period::yearly(2000), 4)
            .with_values("a", "", &a)
            .unwrap()
            .with_values("b", "", &b)
            .unwrap();
        let v = vif(&ds, &["a", "b"]).unwrap();
        assert!((v["a"] - 1.0).abs() < 1e-12 && (v["b"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vif_perfect_collinearity() {
        let a: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 3.0 * v - 1.0).collect();
        let ds = PanelDataset::with_span(vec!["A".into()], Period::yearly(2000), 8)
            .with_values("a", "", &a)
            .unwrap()
            .with_values("b", "", &b)
            .unwrap();
        match vif(&ds, &["a", "b"]) {
            Err(DiagnosticsError::PerfectCollinearity { set, vif }) => {
                assert_eq!(set.len(), 2);
                assert!(vif.values().all(|v| v.is_infinite()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
