//! OLS and iterated cross-section SUR (feasible GLS) with classical or
//! panel-corrected covariance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::design::{build_design, by_country, fit_stats, gaussian_loglik, pooled_dw, solve, sur_loglik, Design};
use super::{ArmaEstimate, CovarianceKind, FitResult, ModelSpec, RegressionError, VarianceComponents};
use crate::linalg::cross_covariance;
use crate::panel::PanelDataset;

/// Pre-multiplies the stacked system by `P ⊗ I_T` where `P'P = Σ^{-1}`
/// (`P` is the inverse Cholesky factor of `Σ`), so OLS on the result is GLS
/// with weight `Σ^{-1} ⊗ I_T`.
pub(crate) fn sur_transform(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma: &DMatrix<f64>,
    t_len: usize,
) -> Result<(DMatrix<f64>, DVector<f64>), RegressionError> {
    let n_c = sigma.nrows();
    let chol = sigma.clone().cholesky().ok_or_else(|| RegressionError::SingularSigma {
        detail: format!("{n_c}x{n_c} estimate from {t_len} periods is not positive definite"),
    })?;
    let p = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n_c, n_c))
        .ok_or_else(|| RegressionError::SingularSigma { detail: "Cholesky factor not invertible".into() })?;
    let k = x.ncols();
    let mut xw = DMatrix::zeros(x.nrows(), k);
    let mut yw = DVector::zeros(y.len());
    for t in 0..t_len {
        for j in 0..n_c {
            let row = j * t_len + t;
            for m in 0..=j {
                let w = p[(j, m)];
                if w == 0.0 {
                    continue;
                }
                let src = m * t_len + t;
                yw[row] += w * y[src];
                for col in 0..k {
                    xw[(row, col)] += w * x[(src, col)];
                }
            }
        }
    }
    Ok((xw, yw))
}

/// Beck–Katz sandwich `(X'X)^{-1} [Σ_t X_t' Ω X_t] (X'X)^{-1}` with `Ω` the
/// contemporaneous covariance of `resid`.
pub(crate) fn pcse_covariance(
    x: &DMatrix<f64>,
    resid: &DVector<f64>,
    xtx_inv: &DMatrix<f64>,
    n_c: usize,
    t_len: usize,
) -> DMatrix<f64> {
    let omega = cross_covariance(&by_country(resid, n_c, t_len));
    let k = x.ncols();
    let mut meat = DMatrix::zeros(k, k);
    let mut xt = DMatrix::zeros(n_c, k);
    for t in 0..t_len {
        for j in 0..n_c {
            xt.row_mut(j).copy_from(&x.row(j * t_len + t));
        }
        let oxt = &omega * &xt;
        meat += xt.transpose() * oxt;
    }
    let v = xtx_inv * meat * xtx_inv;
    (&v + v.transpose()) * 0.5
}

pub(crate) struct Assembly<'a> {
    pub method: &'a str,
    pub spec: &'a ModelSpec,
    pub design: &'a Design,
    pub period_labels: Vec<String>,
    pub y_used: Vec<f64>,
    pub beta: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub residuals: Vec<Vec<f64>>,
    pub loglik: f64,
    pub n_params: usize,
    pub iterations: usize,
    pub converged: bool,
    pub changes: Vec<f64>,
    pub arma: Option<ArmaEstimate>,
    pub variance_components: Option<VarianceComponents>,
    pub flags: Vec<String>,
}

pub(crate) fn assemble(a: Assembly<'_>) -> FitResult {
    let rss: f64 = a.residuals.iter().flatten().map(|e| e * e).sum();
    let n_obs = a.y_used.len();
    let stats = fit_stats(&a.y_used, rss, a.n_params);
    let mut flags = a.flags;
    if !a.converged {
        flags.push("no_convergence".into());
    }
    if a.changes.windows(2).skip(1).any(|w| w[1] > w[0]) {
        flags.push("non_monotone_contraction".into());
    }
    let covariance = (&a.covariance + a.covariance.transpose()) * 0.5;
    let scopes: BTreeMap<_, _> = a.spec.regressors.iter().map(|r| (r.name.clone(), r.scope)).collect();
    FitResult {
        method: a.method.to_string(),
        dependent: a.spec.dependent.clone(),
        countries: a.design.countries.clone(),
        periods: a.period_labels,
        labels: a.design.labels.clone(),
        coefficients: a.beta.iter().copied().collect(),
        covariance,
        scopes,
        arma: a.arma,
        sigma_cross: cross_covariance(&a.residuals),
        dw: pooled_dw(&a.residuals),
        residuals: a.residuals,
        loglik: a.loglik,
        r2: stats.r2,
        r2_adjusted: stats.r2_adjusted,
        rss,
        n_obs,
        n_params: a.n_params,
        iterations: a.iterations,
        converged: a.converged,
        coefficient_changes: a.changes,
        variance_components: a.variance_components,
        flags,
    }
}

/// Least squares ignoring any weighting in `spec`. Covariance is
/// `s^2 (X'X)^{-1}` with `s^2 = RSS / (n - k)`, or Beck–Katz PCSE.
pub fn fit_ols(ds: &PanelDataset, spec: &ModelSpec) -> Result<FitResult, RegressionError> {
    let design = build_design(ds, spec)?;
    ols_on_design(&design, spec, Vec::new())
}

fn ols_on_design(design: &Design, spec: &ModelSpec, flags: Vec<String>) -> Result<FitResult, RegressionError> {
    let fit = solve(&design.x, &design.y, &design.labels)?;
    let (n, k) = design.x.shape();
    let n_c = design.n_countries();
    let covariance = match spec.covariance {
        CovarianceKind::Classical => &fit.xtx_inv * (fit.rss / (n - k) as f64),
        CovarianceKind::Pcse => pcse_covariance(&design.x, &fit.resid, &fit.xtx_inv, n_c, design.t_len),
    };
    Ok(assemble(Assembly {
        method: "ols",
        spec,
        design,
        period_labels: design.periods.iter().map(|p| p.label()).collect(),
        y_used: design.y.iter().copied().collect(),
        beta: fit.beta,
        covariance,
        residuals: by_country(&fit.resid, n_c, design.t_len),
        loglik: gaussian_loglik(fit.rss, n),
        n_params: k,
        iterations: 0,
        converged: true,
        changes: Vec::new(),
        arma: None,
        variance_components: None,
        flags,
    }))
}

/// Iterated feasible GLS with weight `Σ̂^{-1} ⊗ I_T`: OLS first, then
/// re-estimate `Σ̂` from the residuals and re-weight until the largest
/// coefficient change drops below `spec.fgls.tol`. A run that exhausts
/// `max_iter` returns the last iterate with `converged == false`.
pub fn fit_fgls_sur(ds: &PanelDataset, spec: &ModelSpec) -> Result<FitResult, RegressionError> {
    let design = build_design(ds, spec)?;
    let n_c = design.n_countries();
    let t_len = design.t_len;
    if t_len <= n_c {
        return Err(RegressionError::SingularSigma {
            detail: format!("T = {t_len} periods is not larger than J = {n_c} countries"),
        });
    }
    let first = solve(&design.x, &design.y, &design.labels)?;
    let tss: f64 = {
        let m = design.y.mean();
        design.y.iter().map(|v| (v - m).powi(2)).sum()
    };
    if first.rss <= 1e-24 * tss.max(f64::MIN_POSITIVE) {
        return ols_on_design(&design, spec, vec!["perfect_fit_weighting_skipped".into()]);
    }

    let mut beta = first.beta.clone();
    let mut resid = first.resid.clone();
    let mut changes = Vec::new();
    let mut converged = false;
    let mut last = None;
    for _ in 0..spec.fgls.max_iter.max(1) {
        let sigma = cross_covariance(&by_country(&resid, n_c, t_len));
        let (xw, yw) = sur_transform(&design.x, &design.y, &sigma, t_len)?;
        let fit = solve(&xw, &yw, &design.labels)?;
        let change = (&fit.beta - &beta).amax();
        changes.push(change);
        beta = fit.beta.clone();
        resid = &design.y - &design.x * &beta;
        last = Some((xw, fit));
        if spec.fgls.two_step || change < spec.fgls.tol {
            converged = true;
            break;
        }
    }
    let (xw, fit) = last.expect("at least one weighted iteration");
    let covariance = match spec.covariance {
        CovarianceKind::Classical => fit.xtx_inv.clone(),
        CovarianceKind::Pcse => pcse_covariance(&xw, &fit.resid, &fit.xtx_inv, n_c, t_len),
    };
    let residuals = by_country(&resid, n_c, t_len);
    let loglik = sur_loglik(&cross_covariance(&residuals), t_len);
    Ok(assemble(Assembly {
        method: "fgls_sur",
        spec,
        design: &design,
        period_labels: design.periods.iter().map(|p| p.label()).collect(),
        y_used: design.y.iter().copied().collect(),
        beta,
        covariance,
        residuals,
        loglik,
        n_params: design.labels.len(),
        iterations: changes.len(),
        converged,
        changes,
        arma: None,
        variance_components: None,
        flags: Vec::new(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{synthesize_dataset, Dgp, Period, RegressorDgp};
    use crate::regression::{CoefLabel, FixedEffect, SlopeScope, Weighting};

    #[test]
    fn noiseless_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let ds = PanelDataset::with_span(vec!["AU".into()], Period::yearly(2000), 10)
            .with_values("Y", "", &y)
            .unwrap()
            .with_values("X", "", &x)
            .unwrap();
        let fit = fit_ols(&ds, &ModelSpec::new("Y").regressor("X", SlopeScope::Pooled)).unwrap();
        assert!((fit.coef("const", None).unwrap() - 2.0).abs() < 1e-9);
        assert!((fit.coef("X", None).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn per_country_slopes() {
        let x: Vec<f64> = (0..20).map(|i| ((i * 7) % 10) as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { x[i] } else { 2.0 * x[i] }).collect();
        let ds = PanelDataset::with_span(vec!["A".into(), "B".into()], Period::yearly(2000), 10)
            .with_values("Y", "", &y)
            .unwrap()
            .with_values("X", "", &x)
            .unwrap();
        let spec = ModelSpec::new("Y").fixed_effect(FixedEffect::Country).regressor("X", SlopeScope::PerCountry);
        let fit = fit_ols(&ds, &spec).unwrap();
        assert!((fit.coef("X", Some("A")).unwrap() - 1.0).abs() < 1e-9);
        assert!((fit.coef("X", Some("B")).unwrap() - 2.0).abs() < 1e-9);
        assert!(fit.index_of(&CoefLabel::country("country_effect", "B")).is_some());
        assert!(fit.index_of(&CoefLabel::country("country_effect", "A")).is_none());
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ds = PanelDataset::with_span(vec!["A".into()], Period::yearly(2000), 10)
            .with_values("Y", "", &x)
            .unwrap()
            .with_values("X1", "", &x)
            .unwrap()
            .with_values("X2", "", &x.iter().map(|v| 2.0 * v).collect::<Vec<_>>())
            .unwrap();
        let spec = ModelSpec::new("Y").regressor("X1", SlopeScope::Pooled).regressor("X2", SlopeScope::Pooled);
        match fit_ols(&ds, &spec) {
            Err(RegressionError::RankDeficientDesign { columns }) => assert_eq!(columns, vec!["X2".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sur_needs_more_periods_than_countries() {
        let mut dgp = Dgp::new(&["A", "B", "C", "D"], Period::yearly(2000), 4, 1.0);
        dgp.regressors.push(RegressorDgp::new("X", 0.0, 1.0, vec![1.0; 4]));
        let ds = synthesize_dataset(&dgp, 1).unwrap().dataset;
        let spec = ModelSpec::new("Y").regressor("X", SlopeScope::Pooled).sur_pcse();
        assert!(matches!(fit_fgls_sur(&ds, &spec), Err(RegressionError::SingularSigma { .. })));
    }

    #[test]
    fn covariance_symmetric_and_residual_means_zero() {
        let mut dgp = Dgp::new(&["A", "B", "C"], Period::monthly(2008, 1), 60, 1.0);
        dgp.intercepts = vec![5.0, -3.0, 10.0];
        dgp.regressors.push(RegressorDgp::new("X", 1.0, 2.0, vec![1.0, 2.0, 3.0]));
        dgp.error_cov[(0, 1)] = 0.5;
        dgp.error_cov[(1, 0)] = 0.5;
        let ds = synthesize_dataset(&dgp, 5).unwrap().dataset;
        let spec = ModelSpec::new("Y")
            .fixed_effect(FixedEffect::Country)
            .fixed_effect(FixedEffect::Seasonal)
            .regressor("X", SlopeScope::PerCountry)
            .sur_pcse();
        let fit = fit_fgls_sur(&ds, &spec).unwrap();
        assert!(fit.converged);
        assert_eq!(spec.weighting, Weighting::CrossSectionSur);
        let v = &fit.covariance;
        for i in 0..v.nrows() {
            assert!(v[(i, i)] >= 0.0);
            for j in 0..i {
                let scale = v[(i, j)].abs().max(v[(j, i)].abs()).max(1e-300);
                assert!((v[(i, j)] - v[(j, i)]).abs() / scale < 1e-10);
            }
        }
        for e in &fit.residuals {
            let mean = e.iter().sum::<f64>() / e.len() as f64;
            let sd = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / e.len() as f64).sqrt();
            assert!(mean.abs() < 1e-8 * sd.max(1.0), "mean {mean}");
        }
    }
}
