//! Swamy–Arora random-effects GLS.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::{build_design, by_country, gaussian_loglik, solve};
use super::fgls::{assemble, Assembly};
use super::{FitResult, FixedEffect, ModelSpec, RegressionError, SlopeScope, CONST_TERM};
use crate::panel::PanelDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// Idiosyncratic variance from the within regression.
    pub sigma2_e: f64,
    /// Country-effect variance; clamped at zero.
    pub sigma2_u: f64,
    /// Quasi-demeaning weight `1 - sqrt(s2_e / (T s2_u + s2_e))`.
    pub theta: f64,
    /// The raw between-based estimate of `sigma2_u` was negative.
    pub clamped: bool,
}

fn column_means(x: &DMatrix<f64>, n_c: usize, t_len: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_c, x.ncols(), |c, j| x.view((c * t_len, j), (t_len, 1)).sum() / t_len as f64)
}

/// Requires pooled slopes and no country fixed effects. Columns without
/// within-country variation are left out of the within regression, columns
/// without between-country variation out of the between regression.
pub fn fit_random_effects(ds: &PanelDataset, spec: &ModelSpec) -> Result<FitResult, RegressionError> {
    if spec.fixed_effects.contains(&FixedEffect::Country) {
        return Err(RegressionError::InvalidSpec("random effects replace country fixed effects".into()));
    }
    if spec.regressors.iter().any(|r| r.scope != SlopeScope::Pooled) {
        return Err(RegressionError::InvalidSpec("random effects need pooled slopes".into()));
    }
    if !spec.arma.is_empty() {
        return Err(RegressionError::InvalidSpec("random effects do not support ARMA errors".into()));
    }
    if !spec.intercept {
        return Err(RegressionError::InvalidSpec("random effects need an intercept".into()));
    }
    let design = build_design(ds, spec)?;
    let n_c = design.n_countries();
    let t_len = design.t_len;
    let n = n_c * t_len;
    let k = design.x.ncols();
    let xm = column_means(&design.x, n_c, t_len);
    let ym = DVector::from_fn(n_c, |c, _| design.y.rows(c * t_len, t_len).sum() / t_len as f64);

    let scale = |j: usize| design.x.column(j).amax().max(1.0);
    let within_cols: Vec<usize> = (0..k)
        .filter(|&j| (0..n).any(|i| (design.x[(i, j)] - xm[(i / t_len, j)]).abs() > 1e-12 * scale(j)))
        .collect();
    let xw = DMatrix::from_fn(n, within_cols.len(), |i, j| design.x[(i, within_cols[j])] - xm[(i / t_len, within_cols[j])]);
    let yw = DVector::from_fn(n, |i, _| design.y[i] - ym[i / t_len]);
    let within_labels: Vec<_> = within_cols.iter().map(|&j| design.labels[j].clone()).collect();
    let dof_w = n as i64 - n_c as i64 - within_cols.len() as i64;
    if dof_w <= 0 {
        return Err(RegressionError::InsufficientObservations { n, k: n_c + within_cols.len() });
    }
    let rss_w = if within_cols.is_empty() { yw.norm_squared() } else { solve(&xw, &yw, &within_labels)?.rss };
    let sigma2_e = rss_w / dof_w as f64;

    let between_cols: Vec<usize> = (0..k)
        .filter(|&j| {
            design.labels[j].term == CONST_TERM
                || (1..n_c).any(|c| (xm[(c, j)] - xm[(0, j)]).abs() > 1e-12 * scale(j))
        })
        .collect();
    if n_c <= between_cols.len() {
        return Err(RegressionError::InsufficientObservations { n: n_c, k: between_cols.len() });
    }
    let xb = DMatrix::from_fn(n_c, between_cols.len(), |c, j| xm[(c, between_cols[j])]);
    let between_labels: Vec<_> = between_cols.iter().map(|&j| design.labels[j].clone()).collect();
    let rss_b = solve(&xb, &ym, &between_labels)?.rss;
    let sigma2_b = rss_b / (n_c - between_cols.len()) as f64;
    let raw_u = sigma2_b - sigma2_e / t_len as f64;
    let clamped = raw_u < 0.0;
    let sigma2_u = raw_u.max(0.0);
    let denom = t_len as f64 * sigma2_u + sigma2_e;
    let theta = if denom > 0.0 { 1.0 - (sigma2_e / denom).sqrt() } else { 0.0 };

    let xs = DMatrix::from_fn(n, k, |i, j| design.x[(i, j)] - theta * xm[(i / t_len, j)]);
    let ys = DVector::from_fn(n, |i, _| design.y[i] - theta * ym[i / t_len]);
    let fit = solve(&xs, &ys, &design.labels)?;
    let covariance = &fit.xtx_inv * sigma2_e;
    let mut flags = Vec::new();
    if clamped {
        flags.push("negative_variance_component".into());
    }
    Ok(assemble(Assembly {
        method: "random_effects",
        spec,
        design: &design,
        period_labels: design.periods.iter().map(|p| p.label()).collect(),
        y_used: ys.iter().copied().collect(),
        beta: fit.beta,
        covariance,
        residuals: by_country(&fit.resid, n_c, t_len),
        loglik: gaussian_loglik(fit.rss, n),
        n_params: k,
        iterations: 0,
        converged: true,
        changes: Vec::new(),
        arma: None,
        variance_components: Some(VarianceComponents { sigma2_e, sigma2_u, theta, clamped }),
        flags,
    }))
}
