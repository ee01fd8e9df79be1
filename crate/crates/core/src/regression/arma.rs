//! Regression with ARMA errors by iterated filtering and conditional least
//! squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::{build_design, by_country, gaussian_loglik, solve, sur_loglik, Design};
use super::fgls::{assemble, pcse_covariance, sur_transform, Assembly};
use super::{ArmaLags, ArmaScope, CovarianceKind, FitResult, ModelSpec, RegressionError, Weighting};
use crate::linalg::{cross_covariance, inverse_root_modulus, least_squares, LsError};
use crate::panel::PanelDataset;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmaCoefficients {
    pub ar: Vec<(usize, f64)>,
    pub ma: Vec<(usize, f64)>,
}

impl ArmaCoefficients {
    fn zeros(lags: &ArmaLags) -> Self {
        ArmaCoefficients {
            ar: lags.ar.iter().map(|&l| (l, 0.0)).collect(),
            ma: lags.ma.iter().map(|&l| (l, 0.0)).collect(),
        }
    }

    fn from_params(lags: &ArmaLags, p: &[f64]) -> Self {
        let n_ar = lags.ar.len();
        ArmaCoefficients {
            ar: lags.ar.iter().zip(&p[..n_ar]).map(|(&l, &v)| (l, v)).collect(),
            ma: lags.ma.iter().zip(&p[n_ar..]).map(|(&l, &v)| (l, v)).collect(),
        }
    }

    fn params(&self) -> Vec<f64> {
        self.ar.iter().chain(&self.ma).map(|&(_, v)| v).collect()
    }

    /// Largest modulus of the inverse roots of `phi(B)`; below 1 means stationary.
    pub fn ar_root_modulus(&self) -> f64 {
        inverse_root_modulus(&self.ar)
    }

    /// Largest modulus of the inverse roots of `theta(B)`; below 1 means invertible.
    pub fn ma_root_modulus(&self) -> f64 {
        inverse_root_modulus(&self.ma)
    }

    /// `phi(B)/theta(B)` applied to `w` with zero pre-sample innovations.
    /// The first `skip` values are consumed as lags; the output has
    /// `w.len() - skip` entries.
    pub fn filter(&self, w: &[f64], skip: usize) -> Vec<f64> {
        let mut out = vec![0.0; w.len().saturating_sub(skip)];
        for t in skip..w.len() {
            let mut v = w[t];
            for &(lag, phi) in &self.ar {
                v -= phi * w[t - lag];
            }
            for &(lag, theta) in &self.ma {
                if t >= skip + lag {
                    v += theta * out[t - skip - lag];
                }
            }
            out[t - skip] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaTerm {
    /// `"ar"` or `"ma"`.
    pub kind: String,
    pub lag: usize,
    pub country: Option<String>,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaEstimate {
    pub scope: ArmaScope,
    pub terms: Vec<ArmaTerm>,
    /// Coefficients applied to each country, in panel order.
    pub per_country: Vec<ArmaCoefficients>,
    pub ar_root_modulus: f64,
    pub ma_root_modulus: f64,
    /// Leading periods per country consumed by the AR filter.
    pub dropped_periods: usize,
}

impl ArmaEstimate {
    pub fn term(&self, kind: &str, lag: usize, country: Option<&str>) -> Option<&ArmaTerm> {
        self.terms.iter().find(|t| t.kind == kind && t.lag == lag && t.country.as_deref() == country)
    }

    pub fn n_params(&self) -> usize {
        self.terms.len()
    }
}

struct ClsFit {
    coefs: ArmaCoefficients,
    std_errors: Vec<f64>,
}

fn stacked_innovations(series: &[Vec<f64>], coefs: &ArmaCoefficients, skip: usize) -> Vec<f64> {
    series.iter().flat_map(|s| coefs.filter(s, skip)).collect()
}

/// Conditional least squares for one set of ARMA coefficients shared by
/// `series`. Pure AR is a linear regression; MA terms use Levenberg–Marquardt
/// started from `start`.
fn fit_cls(series: &[Vec<f64>], lags: &ArmaLags, skip: usize, start: &ArmaCoefficients) -> Result<ClsFit, RegressionError> {
    let n_par = lags.ar.len() + lags.ma.len();
    let n: usize = series.iter().map(|s| s.len() - skip).sum();
    if n <= n_par {
        return Err(RegressionError::InsufficientObservations { n, k: n_par });
    }
    let energy: f64 = series.iter().flat_map(|s| s[skip..].iter()).map(|v| v * v).sum();
    if energy == 0.0 {
        return Ok(ClsFit { coefs: ArmaCoefficients::zeros(lags), std_errors: vec![f64::NAN; n_par] });
    }
    let names: Vec<String> =
        lags.ar.iter().map(|l| format!("ar({l})")).chain(lags.ma.iter().map(|l| format!("ma({l})"))).collect();
    let rank_err = |e: LsError| match e {
        LsError::RankDeficient { columns } => {
            RegressionError::RankDeficientDesign { columns: columns.iter().map(|&j| names[j].clone()).collect() }
        }
        LsError::Insufficient { n, k } => RegressionError::InsufficientObservations { n, k },
    };

    if lags.ma.is_empty() {
        let ar: Vec<usize> = lags.ar.iter().copied().collect();
        let mut z = DMatrix::zeros(n, ar.len());
        let mut y = DVector::zeros(n);
        let mut row = 0;
        for s in series {
            for t in skip..s.len() {
                y[row] = s[t];
                for (j, &l) in ar.iter().enumerate() {
                    z[(row, j)] = s[t - l];
                }
                row += 1;
            }
        }
        let fit = least_squares(&z, &y).map_err(rank_err)?;
        let s2 = fit.rss / (n - n_par) as f64;
        let std_errors = (0..n_par).map(|j| (s2 * fit.xtx_inv[(j, j)]).max(0.0).sqrt()).collect();
        return Ok(ClsFit { coefs: ArmaCoefficients::from_params(lags, fit.beta.as_slice()), std_errors });
    }

    let mut p = start.params();
    let resid = |p: &[f64]| stacked_innovations(series, &ArmaCoefficients::from_params(lags, p), skip);
    let jacobian = |p: &[f64], base: &[f64]| {
        let mut jac = DMatrix::zeros(n, n_par);
        for j in 0..n_par {
            let h = 1e-7 * p[j].abs().max(1.0);
            let mut q = p.to_vec();
            q[j] += h;
            let e = resid(&q);
            for i in 0..n {
                jac[(i, j)] = (e[i] - base[i]) / h;
            }
        }
        jac
    };
    let mut e = resid(&p);
    let mut rss: f64 = e.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let jac = jacobian(&p, &e);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * DVector::from_column_slice(&e);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..n_par {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let q: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let eq = resid(&q);
            let rq: f64 = eq.iter().map(|v| v * v).sum();
            if rq.is_finite() && rq <= rss {
                let small = step.amax() < 1e-10 * (1.0 + p.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                let flat = rss - rq <= 1e-14 * rss;
                p = q;
                e = eq;
                rss = rq;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !(small || flat);
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let jac = jacobian(&p, &e);
    let s2 = rss / (n - n_par) as f64;
    let cov = (jac.transpose() * &jac).try_inverse().unwrap_or_else(|| DMatrix::from_element(n_par, n_par, f64::NAN));
    let std_errors = (0..n_par).map(|j| (s2 * cov[(j, j)]).max(0.0).sqrt()).collect();
    Ok(ClsFit { coefs: ArmaCoefficients::from_params(lags, &p), std_errors })
}

fn fit_errors(
    residuals: &[Vec<f64>],
    countries: &[String],
    lags: &ArmaLags,
    previous: &[ArmaCoefficients],
) -> Result<(ArmaEstimate, Vec<f64>), RegressionError> {
    let skip = lags.max_ar();
    let mut terms = Vec::new();
    let mut per_country = Vec::new();
    let push_terms = |terms: &mut Vec<ArmaTerm>, fit: &ClsFit, country: Option<&String>| {
        let coefs = fit.coefs.ar.iter().map(|x| ("ar", x)).chain(fit.coefs.ma.iter().map(|x| ("ma", x)));
        for ((kind, &(lag, estimate)), &se) in coefs.zip(&fit.std_errors) {
            terms.push(ArmaTerm { kind: kind.into(), lag, country: country.cloned(), estimate, std_error: se });
        }
    };
    match lags.scope {
        ArmaScope::Pooled => {
            let fit = fit_cls(residuals, lags, skip, &previous[0])?;
            push_terms(&mut terms, &fit, None);
            per_country = vec![fit.coefs; residuals.len()];
        }
        ArmaScope::PerCountry => {
            for (c, series) in residuals.iter().enumerate() {
                let fit = fit_cls(std::slice::from_ref(series), lags, skip, &previous[c])?;
                push_terms(&mut terms, &fit, Some(&countries[c]));
                per_country.push(fit.coefs);
            }
        }
    }
    let params: Vec<f64> = terms.iter().map(|t| t.estimate).collect();
    let ar_root_modulus = per_country.iter().map(|c| c.ar_root_modulus()).fold(0.0, f64::max);
    let ma_root_modulus = per_country.iter().map(|c| c.ma_root_modulus()).fold(0.0, f64::max);
    Ok((
        ArmaEstimate { scope: lags.scope, terms, per_country, ar_root_modulus, ma_root_modulus, dropped_periods: skip },
        params,
    ))
}

fn filter_design(design: &Design, coefs: &[ArmaCoefficients], skip: usize) -> (DMatrix<f64>, DVector<f64>) {
    let t_len = design.t_len;
    let tf = t_len - skip;
    let n_c = design.n_countries();
    let k = design.x.ncols();
    let mut xf = DMatrix::zeros(n_c * tf, k);
    let mut yf = DVector::zeros(n_c * tf);
    for (c, cf) in coefs.iter().enumerate() {
        let rows = c * t_len..(c + 1) * t_len;
        let fy = cf.filter(&design.y.as_slice()[rows.clone()], skip);
        yf.rows_mut(c * tf, tf).copy_from_slice(&fy);
        for j in 0..k {
            let col: Vec<f64> = rows.clone().map(|i| design.x[(i, j)]).collect();
            let fx = cf.filter(&col, skip);
            for (t, v) in fx.into_iter().enumerate() {
                xf[(c * tf + t, j)] = v;
            }
        }
    }
    (xf, yf)
}

/// Each pass fits the ARMA coefficients to the current structural residuals,
/// filters the dependent and the regressors with `phi(B)/theta(B)` and takes
/// one (weighted, when SUR is requested) least-squares step. Iteration stops
/// when the largest change across mean and ARMA coefficients is below
/// `spec.fgls.tol`. Residuals, `dw` and the likelihood refer to the
/// innovations.
pub fn fit_arma_errors(ds: &PanelDataset, spec: &ModelSpec) -> Result<FitResult, RegressionError> {
    if spec.arma.ar.contains(&0) || spec.arma.ma.contains(&0) {
        return Err(RegressionError::InvalidSpec("ARMA lags must be positive".into()));
    }
    let design = build_design(ds, spec)?;
    let n_c = design.n_countries();
    let skip = spec.arma.max_ar();
    let tf = design.t_len - skip;
    let sur = spec.weighting == Weighting::CrossSectionSur;
    if sur && tf <= n_c {
        return Err(RegressionError::SingularSigma {
            detail: format!("T = {tf} filtered periods is not larger than J = {n_c} countries"),
        });
    }
    let n_groups = if spec.arma.scope == ArmaScope::Pooled { 1 } else { n_c };

    let mut beta = solve(&design.x, &design.y, &design.labels)?.beta;
    let mut previous = vec![ArmaCoefficients::zeros(&spec.arma); n_groups];
    let mut prev_params_all = vec![0.0; (spec.arma.ar.len() + spec.arma.ma.len()) * n_groups];
    let mut sigma: Option<DMatrix<f64>> = None;
    let mut changes = Vec::new();
    let mut converged = false;
    let mut flags = Vec::new();
    let mut last = None;

    for _ in 0..spec.fgls.max_iter.max(1) {
        let u = &design.y - &design.x * &beta;
        let (estimate, params) = fit_errors(&by_country(&u, n_c, design.t_len), &design.countries, &spec.arma, &previous)?;
        let (xf, yf) = filter_design(&design, &estimate.per_country, skip);
        if sur && sigma.is_none() {
            let e = &yf - &xf * &beta;
            let s = cross_covariance(&by_country(&e, n_c, tf));
            if s.iter().any(|v| *v != 0.0) {
                sigma = Some(s);
            }
        }
        let (xs, ys) = match &sigma {
            Some(s) if sur => sur_transform(&xf, &yf, s, tf)?,
            _ => (xf.clone(), yf.clone()),
        };
        let fit = solve(&xs, &ys, &design.labels)?;
        let mut change = (&fit.beta - &beta).amax();
        for (a, b) in params.iter().zip(&prev_params_all) {
            change = change.max((a - b).abs());
        }
        changes.push(change);
        beta = fit.beta.clone();
        previous = if n_groups == 1 {
            vec![estimate.per_country[0].clone()]
        } else {
            estimate.per_country.clone()
        };
        prev_params_all = params;
        let innov = &yf - &xf * &beta;
        if sur {
            let s = cross_covariance(&by_country(&innov, n_c, tf));
            if s.iter().any(|v| *v != 0.0) {
                sigma = Some(s);
            }
        }
        last = Some((xs, fit, innov, estimate));
        if spec.fgls.two_step || change < spec.fgls.tol {
            converged = true;
            break;
        }
    }
    let (xs, fit, innov, mut estimate) = last.expect("at least one pass");
    if sur && sigma.is_none() {
        flags.push("perfect_fit_weighting_skipped".into());
    }

    // Refit the error process at the final coefficients so the reported ARMA
    // estimate and the mean coefficients describe the same point.
    let u = &design.y - &design.x * &beta;
    let refit = fit_errors(&by_country(&u, n_c, design.t_len), &design.countries, &spec.arma, &previous)?.0;
    if refit.per_country.iter().zip(&estimate.per_country).all(|(a, b)| {
        a.params().iter().zip(b.params()).all(|(x, y)| (x - y).abs() <= spec.fgls.tol.max(1e-12) * 10.0)
    }) {
        estimate = refit;
    }
    if estimate.ar_root_modulus >= 1.0 {
        return Err(RegressionError::NonStationaryArEstimate { modulus: estimate.ar_root_modulus });
    }
    if estimate.ma_root_modulus >= 1.0 {
        flags.push("non_invertible_ma".into());
    }

    let n = n_c * tf;
    let k = design.labels.len();
    let k_total = k + estimate.n_params();
    if n <= k_total {
        return Err(RegressionError::InsufficientObservations { n, k: k_total });
    }
    let rss: f64 = innov.iter().map(|e| e * e).sum();
    let covariance = match (spec.covariance, sur) {
        (CovarianceKind::Classical, false) => &fit.xtx_inv * (rss / (n - k_total) as f64),
        (CovarianceKind::Classical, true) => fit.xtx_inv.clone(),
        (CovarianceKind::Pcse, _) => pcse_covariance(&xs, &fit.resid, &fit.xtx_inv, n_c, tf),
    };
    let residuals = by_country(&innov, n_c, tf);
    let loglik = if sur { sur_loglik(&cross_covariance(&residuals), tf) } else { gaussian_loglik(rss, n) };
    let y_used: Vec<f64> = (0..n_c).flat_map(|c| design.y.rows(c * design.t_len + skip, tf).iter().copied().collect::<Vec<_>>()).collect();
    Ok(assemble(Assembly {
        method: if sur { "arma_fgls_sur" } else { "arma_ols" },
        spec,
        design: &design,
        period_labels: design.periods[skip..].iter().map(|p| p.label()).collect(),
        y_used,
        beta,
        covariance,
        residuals,
        loglik,
        n_params: k_total,
        iterations: changes.len(),
        converged,
        changes,
        arma: Some(estimate),
        variance_components: None,
        flags,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_inverts_the_process() {
        let coefs = ArmaCoefficients { ar: vec![(1, 0.5), (3, -0.2)], ma: vec![(1, 0.3)] };
        let eps: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        // Build eta with eps zero before the filter's start so the inverse is exact.
        let mut eta = vec![0.0; 40];
        let mut e = eps.clone();
        for v in e.iter_mut().take(3) {
            *v = 0.0;
        }
        for t in 0..40 {
            let mut v = e[t];
            for &(l, p) in &coefs.ar {
                if t >= l {
                    v += p * eta[t - l];
                }
            }
            for &(l, th) in &coefs.ma {
                if t >= l {
                    v -= th * e[t - l];
                }
            }
            eta[t] = v;
        }
        let back = coefs.filter(&eta, 3);
        for (a, b) in back.iter().zip(&e[3..]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cls_recovers_ma_term() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let e: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w: Vec<f64> = (0..4000).map(|t| e[t] - if t > 0 { -0.4 * e[t - 1] } else { 0.0 }).collect();
        let lags = ArmaLags { ar: Default::default(), ma: [1].into_iter().collect(), scope: ArmaScope::Pooled };
        let fit = fit_cls(&[w], &lags, 0, &ArmaCoefficients::zeros(&lags)).unwrap();
        let theta = fit.coefs.ma[0].1;
        assert!((theta + 0.4).abs() < 3.0 * fit.std_errors[0], "theta {theta}");
    }
}
