use serde::{Deserialize, Serialize};

use super::ForecastModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AicRow {
    pub model: String,
    pub n_params: usize,
    pub n_obs: usize,
    pub loglik: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: usize,
    pub model: ForecastModel,
    pub table: Vec<AicRow>,
}

/// Lowest AIC wins, ties going to the earlier candidate. Every candidate is
/// scored on the same observations: those after the longest conditioning
/// window among the candidates.
///
/// # Panics
/// When `candidates` is empty.
pub fn select_model(candidates: &[ForecastModel], series: &[(i32, f64)]) -> Selection {
    assert!(!candidates.is_empty(), "select_model needs at least one candidate");
    let from = candidates.iter().map(|m| m.min_conditioning()).max().unwrap_or(0);
    let table: Vec<AicRow> = candidates
        .iter()
        .map(|m| {
            let loglik = m.loglik_on(series, from);
            let k = m.n_params();
            AicRow {
                model: m.name().to_string(),
                n_params: k,
                n_obs: series.len().saturating_sub(from),
                loglik,
                aic: crate::diagnostics::aic(loglik, k),
            }
        })
        .collect();
    let mut chosen = 0;
    for (i, row) in table.iter().enumerate() {
        if row.aic < table[chosen].aic || (table[chosen].aic.is_nan() && !row.aic.is_nan()) {
            chosen = i;
        }
    }
    Selection { chosen, model: candidates[chosen].clone(), table }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{fit_ar2, fit_trend};

    #[test]
    fn single_candidate_passes_through() {
        let s: Vec<(i32, f64)> = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0].iter().enumerate().map(|(i, &v)| (i as i32, v)).collect();
        let m = ForecastModel::Trend(fit_trend(&s).unwrap());
        let sel = select_model(std::slice::from_ref(&m), &s);
        assert_eq!(sel.chosen, 0);
        assert_eq!(sel.model, m);
        assert_eq!(sel.table.len(), 1);
    }

    #[test]
    fn common_sample_is_used() {
        let s: Vec<(i32, f64)> =
            [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0].iter().enumerate().map(|(i, &v)| (2008 + i as i32, v)).collect();
        let cands = [ForecastModel::Trend(fit_trend(&s).unwrap()), ForecastModel::Ar2(fit_ar2(&s).unwrap())];
        let sel = select_model(&cands, &s);
        assert!(sel.table.iter().all(|r| r.n_obs == 7));
        assert_eq!(sel.table[1].loglik, match &cands[1] {
            ForecastModel::Ar2(m) => m.loglik_on(&s, 2),
            _ => unreachable!(),
        });
    }
}
