//! Per-country regressions of GHG log-growth on consumption and renewables
//! log-growth, packaged for scenario simulation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{fit_fgls_sur, fit_ols, FitResult, FixedEffect, ModelSpec, RegressionError, SlopeScope, COUNTRY_EFFECT_TERM};
use crate::forecast::{GrowthCoefficients, PooledGrowthModel, StartLevel};
use crate::panel::{Construction, PanelDataset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthVariables {
    pub ghg: String,
    pub consm: String,
    pub res: String,
}

impl Default for GrowthVariables {
    fn default() -> Self {
        GrowthVariables { ghg: "GHG".into(), consm: "CONSM".into(), res: "RES".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub fit: FitResult,
    pub model: PooledGrowthModel,
}

pub const DLOG_PREFIX: &str = "dlog_";

/// `dlog(GHG) = b0_j + b1_j dlog(CONSM) + b2_j dlog(RES)` with SUR weighting
/// and PCSE when there are more growth periods than countries, plain OLS
/// (flagged) otherwise. Start levels are the last observed GHG values.
pub fn fit_pooled_growth(ds: &PanelDataset, vars: &GrowthVariables) -> Result<GrowthFit, RegressionError> {
    let n_c = ds.n_countries();
    let n_t = ds.n_periods();
    if n_t < 2 {
        return Err(RegressionError::InsufficientObservations { n: n_c * n_t.saturating_sub(1), k: 3 * n_c });
    }
    let names = [&vars.ghg, &vars.consm, &vars.res];
    let mut growth = PanelDataset::with_span(ds.countries().to_vec(), ds.periods()[1], n_t - 1);
    for name in names {
        if !ds.has_variable(name) {
            return Err(RegressionError::UnknownVariable(name.clone()));
        }
        let mut cells = Vec::with_capacity(n_c * (n_t - 1));
        for c in 0..n_c {
            let mut levels = Vec::with_capacity(n_t);
            for t in 0..n_t {
                let v = ds.value(name, c, t).ok_or_else(|| RegressionError::MissingCells { missing: vec![ds.cell_ref(c, t, name)] })?;
                if !(v > 0.0) {
                    return Err(RegressionError::NonPositiveSeries {
                        variable: name.clone(),
                        country: ds.countries()[c].clone(),
                        period: ds.periods()[t].label(),
                    });
                }
                levels.push(v);
            }
            cells.extend(levels.windows(2).map(|w| Some(w[1].ln() - w[0].ln())));
        }
        growth = growth
            .with_variable(format!("{DLOG_PREFIX}{name}"), "log change", Construction::Raw, cells)
            .map_err(|e| RegressionError::InvalidSpec(e.to_string()))?;
    }

    let mut spec = ModelSpec::new(&format!("{DLOG_PREFIX}{}", vars.ghg))
        .without_intercept()
        .fixed_effect(FixedEffect::Country)
        .regressor(&format!("{DLOG_PREFIX}{}", vars.consm), SlopeScope::PerCountry)
        .regressor(&format!("{DLOG_PREFIX}{}", vars.res), SlopeScope::PerCountry);
    let mut fit = if n_t - 1 > n_c {
        spec = spec.sur_pcse();
        fit_fgls_sur(&growth, &spec)?
    } else {
        let mut f = fit_ols(&growth, &spec)?;
        f.flags.push("sur_skipped_periods_not_above_countries".into());
        f
    };
    fit.method = format!("growth_{}", fit.method);

    let mut coefficients = BTreeMap::new();
    let mut start_levels = BTreeMap::new();
    let last_year = ds.periods()[n_t - 1].year;
    for (c, code) in ds.countries().iter().enumerate() {
        let get = |term: &str| fit.coef(term, Some(code)).unwrap_or(0.0);
        let rss: f64 = fit.residuals[c].iter().map(|e| e * e).sum();
        let dof = fit.residuals[c].len().saturating_sub(3).max(1);
        coefficients.insert(
            code.clone(),
            GrowthCoefficients {
                beta0: get(COUNTRY_EFFECT_TERM),
                beta1: get(&format!("{DLOG_PREFIX}{}", vars.consm)),
                beta2: get(&format!("{DLOG_PREFIX}{}", vars.res)),
                sigma: (rss / dof as f64).sqrt(),
            },
        );
        let level = ds.value(&vars.ghg, c, n_t - 1).expect("checked above");
        start_levels.insert(code.clone(), StartLevel { year: last_year, level });
    }
    Ok(GrowthFit { fit, model: PooledGrowthModel { coefficients, start_levels } })
}
