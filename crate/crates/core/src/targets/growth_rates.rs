use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TargetError;
use crate::panel::PanelDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMean {
    /// Mean of the simple year-over-year relative changes.
    #[default]
    Arithmetic,
    /// Constant rate linking the first and last levels.
    Geometric,
}

/// How the all-countries column is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    /// Mean of the per-country rates.
    #[default]
    MeanOfCountries,
    /// Rate of the series of levels summed over countries.
    SummedLevels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub mean: GrowthMean,
    pub aggregate: Aggregate,
    pub first_period: String,
    pub last_period: String,
    /// `rates[country][variable]`.
    pub rates: BTreeMap<String, BTreeMap<String, f64>>,
    pub total: BTreeMap<String, f64>,
    /// Country order of the source dataset.
    pub countries: Vec<String>,
}

impl GrowthTable {
    pub fn rate(&self, country: &str, variable: &str) -> Option<f64> {
        self.rates.get(country)?.get(variable).copied()
    }
}

fn rate_of(levels: &[f64], mean: GrowthMean) -> f64 {
    let n = levels.len();
    if n < 2 {
        return f64::NAN;
    }
    match mean {
        GrowthMean::Arithmetic => levels.windows(2).map(|w| w[1] / w[0] - 1.0).sum::<f64>() / (n - 1) as f64,
        GrowthMean::Geometric => (levels[n - 1] / levels[0]).powf(1.0 / (n - 1) as f64) - 1.0,
    }
}

/// Average yearly growth of each variable per country over the whole span
/// of `ds`, plus the all-countries aggregate.
pub fn average_growth_rates(
    ds: &PanelDataset,
    variables: &[&str],
    mean: GrowthMean,
    aggregate: Aggregate,
) -> Result<GrowthTable, TargetError> {
    let n_c = ds.n_countries();
    let n_t = ds.n_periods();
    let mut rates: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut total = BTreeMap::new();
    for &var in variables {
        if !ds.has_variable(var) {
            return Err(TargetError::UnknownVariable(var.to_string()));
        }
        let mut summed = vec![0.0; n_t];
        let mut country_rates = Vec::with_capacity(n_c);
        for (c, code) in ds.countries().iter().enumerate() {
            let mut levels = Vec::with_capacity(n_t);
            for (t, s) in summed.iter_mut().enumerate() {
                let v = ds.value(var, c, t).ok_or_else(|| TargetError::MissingCell(ds.cell_ref(c, t, var)))?;
                if !(v > 0.0) {
                    return Err(TargetError::NonPositiveSeries {
                        variable: var.to_string(),
                        country: code.clone(),
                        period: ds.periods()[t].label(),
                    });
                }
                *s += v;
                levels.push(v);
            }
            let r = rate_of(&levels, mean);
            country_rates.push(r);
            rates.entry(code.clone()).or_default().insert(var.to_string(), r);
        }
        let agg = match aggregate {
            Aggregate::MeanOfCountries => country_rates.iter().sum::<f64>() / n_c as f64,
            Aggregate::SummedLevels => rate_of(&summed, mean),
        };
        total.insert(var.to_string(), agg);
    }
    Ok(GrowthTable {
        mean,
        aggregate,
        first_period: ds.periods().first().map(|p| p.label()).unwrap_or_default(),
        last_period: ds.periods().last().map(|p| p.label()).unwrap_or_default(),
        rates,
        total,
        countries: ds.countries().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Period;

    fn panel(series: &[Vec<f64>]) -> PanelDataset {
        let codes = (0..series.len()).map(|i| format!("C{i}")).collect();
        let flat: Vec<f64> = series.iter().flatten().copied().collect();
        PanelDataset::with_span(codes, Period::yearly(2008), series[0].len()).with_values("X", "", &flat).unwrap()
    }

    #[test]
    fn constant_and_compound() {
        let ds = panel(&[vec![5.0; 9], (0..9).map(|t| 100.0 * 1.1f64.powi(t)).collect()]);
        for mean in [GrowthMean::Arithmetic, GrowthMean::Geometric] {
            let t = average_growth_rates(&ds, &["X"], mean, Aggregate::MeanOfCountries).unwrap();
            assert_eq!(t.rate("C0", "X").unwrap(), 0.0);
            assert!((t.rate("C1", "X").unwrap() - 0.10).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregates_differ() {
        let ds = panel(&[(0..9).map(|t| 1000.0 * 0.9f64.powi(t)).collect(), (0..9).map(|t| 10.0 * 1.2f64.powi(t)).collect()]);
        let mean = average_growth_rates(&ds, &["X"], GrowthMean::Arithmetic, Aggregate::MeanOfCountries).unwrap();
        let summed = average_growth_rates(&ds, &["X"], GrowthMean::Arithmetic, Aggregate::SummedLevels).unwrap();
        assert!((mean.total["X"] - 0.05).abs() < 1e-12);
        assert!(summed.total["X"] < 0.0);
    }

    #[test]
    fn rejects_non_positive() {
        let ds = panel(&[vec![1.0, 0.0, 2.0]]);
        assert!(matches!(
            average_growth_rates(&ds, &["X"], GrowthMean::Arithmetic, Aggregate::MeanOfCountries),
            Err(TargetError::NonPositiveSeries { .. })
        ));
    }
}
