use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};

use super::Period;

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyMean {
    pub period: Period,
    pub n_days: usize,
    /// `None` when the month had no observations.
    pub value: Option<f64>,
}

/// Arithmetic mean of daily values per calendar month, covering every month
/// from the first to the last observation. Values are summed in sorted order,
/// so the result does not depend on how days are ordered within a month.
pub fn monthly_average(daily: &[(NaiveDate, f64)]) -> Vec<MonthlyMean> {
    let mut by_month: BTreeMap<Period, Vec<f64>> = BTreeMap::new();
    for (date, v) in daily {
        by_month.entry(Period::monthly(date.year(), date.month())).or_default().push(*v);
    }
    let (first, last) = match (by_month.keys().next(), by_month.keys().next_back()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Vec::new(),
    };
    Period::range(first, last)
        .into_iter()
        .map(|period| match by_month.get_mut(&period) {
            Some(values) => {
                values.sort_by(f64::total_cmp);
                let sum: f64 = values.iter().sum();
                MonthlyMean { period, n_days: values.len(), value: Some(sum / values.len() as f64) }
            }
            None => MonthlyMean { period, n_days: 0, value: None },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn constant_january() {
        let days: Vec<_> = (1..=31).map(|d| (day(2008, 1, d), 50.0)).collect();
        let out = monthly_average(&days);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].value, Some(50.0));
    }

    #[test]
    fn one_to_thirty() {
        let days: Vec<_> = (1..=30).map(|d| (day(2008, 4, d), d as f64)).collect();
        assert_eq!(monthly_average(&days)[0].value, Some(15.5));
    }

    #[test]
    fn random_february_matches_summation_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..28).map(|_| rng.random_range(-100.0..300.0)).collect();
        let days: Vec<_> = values.iter().enumerate().map(|(i, v)| (day(2009, 2, i as u32 + 1), *v)).collect();
        // Kahan-compensated summation in input order.
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for v in &values {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        let oracle = sum / 28.0;
        let got = monthly_average(&days)[0].value.unwrap();
        assert!(((got - oracle) / oracle).abs() < 1e-12);
    }

    #[test]
    fn empty_months_are_flagged() {
        let days = vec![(day(2008, 1, 5), 1.0), (day(2008, 3, 5), 3.0)];
        let out = monthly_average(&days);
        assert_eq!(out.len(), 3);
        assert_eq!(out[1].value, None);
        assert_eq!(out[1].n_days, 0);
        assert_eq!(out[1].period.label(), "2008-02");
    }

    proptest! {
        #[test]
        fn invariant_under_reordering(values in prop::collection::vec(-1e6f64..1e6, 1..31), seed in any::<u64>()) {
            let days: Vec<_> = values.iter().enumerate().map(|(i, v)| (day(2012, 5, i as u32 + 1), *v)).collect();
            let mut shuffled = days.clone();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                let j = rng.random_range(0..=i);
                shuffled.swap(i, j);
            }
            prop_assert_eq!(monthly_average(&days), monthly_average(&shuffled));
        }
    }
}
