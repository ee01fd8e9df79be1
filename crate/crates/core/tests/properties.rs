use cepsim_core::diagnostics::{durbin_watson, hausman, vif, wald_slope_equality};
use cepsim_core::forecast::fit_trend;
use cepsim_core::montecarlo::{compliance_of, quantiles_of};
use cepsim_core::panel::{
    derive_variable, ingest_csv, parse_schema, synthesize_dataset, write_csv, Derivation, Dgp, Frequency, PanelDataset,
    Period, RegressorDgp,
};
use cepsim_core::regression::{fit_ols, fit_random_effects, FitResult, FixedEffect, ModelSpec, SlopeScope};
use cepsim_core::targets::{
    consumption_projection_and_target, ghg_target, res_target, Direction, Horizon, TargetsConfig,
};
use proptest::prelude::*;

fn panel(countries: usize, periods: usize, seed: u64, regressors: usize) -> PanelDataset {
    let names: Vec<String> = (0..countries).map(|i| format!("C{i}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut dgp = Dgp::new(&names, Period::yearly(1980), periods, 1.0);
    dgp.country_effect_sd = 0.5;
    dgp.regressors = (0..regressors)
        .map(|k| RegressorDgp::new(&format!("X{k}"), k as f64, 1.0 + k as f64, (0..countries).map(|j| 0.3 * j as f64 - 0.5 * k as f64).collect()))
        .collect();
    synthesize_dataset(&dgp, seed).unwrap().dataset
}

fn spec(regs: &[&str], scope: SlopeScope) -> ModelSpec {
    regs.iter().fold(ModelSpec::new("Y").fixed_effect(FixedEffect::Country), |s, r| s.regressor(r, scope))
}

fn rescaled(ds: &PanelDataset, name: &str, c: f64) -> PanelDataset {
    let mut out = PanelDataset::with_span(ds.countries().to_vec(), ds.periods()[0], ds.n_periods());
    for v in ds.variable_names() {
        let values: Vec<f64> = (0..ds.n_countries())
            .flat_map(|j| ds.complete_series(v, j).unwrap())
            .map(|x| if v == name { x * c } else { x })
            .collect();
        out = out.with_values(v, ds.unit(v).unwrap(), &values).unwrap();
    }
    out
}

fn residuals(f: &FitResult) -> Vec<f64> {
    f.residuals.iter().flatten().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_round_trip_is_identity(seed in 0u64..1000, countries in 1usize..5, periods in 3usize..20) {
        let ds = panel(countries, periods, seed, 2);
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let schema = parse_schema("X0 - raw\nX1 - raw\nY - raw\n").unwrap();
        let back = ingest_csv(buf.as_slice(), &schema, Frequency::Yearly).unwrap();
        prop_assert_eq!(back.countries(), ds.countries());
        for v in ["X0", "X1", "Y"] {
            for j in 0..countries {
                prop_assert_eq!(back.complete_series(v, j).unwrap(), ds.complete_series(v, j).unwrap());
            }
        }
    }

    #[test]
    fn res_share_stays_in_unit_interval(pairs in prop::collection::vec((0.0f64..1e6, 0.0f64..1.0), 1..30)) {
        let renew: Vec<f64> = pairs.iter().map(|(g, f)| g * f).collect();
        let gross: Vec<f64> = pairs.iter().map(|(g, _)| *g).collect();
        let ds = PanelDataset::with_span(vec!["A".into()], Period::yearly(2000), pairs.len())
            .with_values("RENEW", "GWh", &renew).unwrap()
            .with_values("GROSS", "GWh", &gross).unwrap();
        match derive_variable(&ds, &Derivation::parse("RES", "res_share(RENEW,GROSS)").unwrap()) {
            Ok(out) => {
                for v in out.series("RES", 0).unwrap().iter().flatten() {
                    prop_assert!((0.0..=1.0).contains(v));
                }
            }
            // Zero gross generation is reported, never silently divided.
            Err(_) => prop_assert!(gross.contains(&0.0)),
        }
    }

    #[test]
    fn step_dummy_is_monotone(start_month in 1u32..13, n in 2usize..60, cut_year in 2007i32..2013, cut_month in 1u32..13) {
        let ds = PanelDataset::with_span(vec!["A".into(), "B".into()], Period::monthly(2008, start_month), n);
        let rule = Derivation::parse("D", &format!("step({cut_year}-{cut_month:02})")).unwrap();
        let out = derive_variable(&ds, &rule).unwrap();
        for j in 0..2 {
            let s = out.complete_series("D", j).unwrap();
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn adding_a_regressor_never_lowers_r2(seed in 0u64..1000) {
        let ds = panel(4, 15, seed, 3);
        let small = fit_ols(&ds, &spec(&["X0", "X1"], SlopeScope::Pooled)).unwrap();
        let large = fit_ols(&ds, &spec(&["X0", "X1", "X2"], SlopeScope::Pooled)).unwrap();
        prop_assert!(large.r2 >= small.r2 - 1e-12);
    }

    #[test]
    fn coefficients_do_not_depend_on_regressor_order(seed in 0u64..1000) {
        let ds = panel(4, 15, seed, 3);
        let a = fit_ols(&ds, &spec(&["X0", "X1", "X2"], SlopeScope::PerCountry)).unwrap();
        let b = fit_ols(&ds, &spec(&["X2", "X0", "X1"], SlopeScope::PerCountry)).unwrap();
        for (l, v) in a.labels.iter().zip(&a.coefficients) {
            let w = b.coefficients[b.index_of(l).unwrap()];
            prop_assert!((v - w).abs() < 1e-8 * v.abs().max(1.0), "{} {} vs {}", l, v, w);
        }
    }

    #[test]
    fn scaling_a_regressor_rescales_its_slope(seed in 0u64..1000, c in prop_oneof![0.001f64..0.1, 10.0f64..1000.0]) {
        let ds = panel(3, 20, seed, 2);
        let s = spec(&["X0", "X1"], SlopeScope::PerCountry);
        let a = fit_ols(&ds, &s).unwrap();
        let b = fit_ols(&rescaled(&ds, "X1", c), &s).unwrap();
        for country in ds.countries() {
            let (ba, bb) = (a.coef("X1", Some(country)).unwrap(), b.coef("X1", Some(country)).unwrap());
            prop_assert!((bb * c - ba).abs() < 1e-8 * ba.abs().max(1.0));
        }
        for (x, y) in residuals(&a).iter().zip(residuals(&b)) {
            prop_assert!((x - y).abs() < 1e-8);
        }
        let (wa, wb) = (wald_slope_equality(&a, "X1").unwrap(), wald_slope_equality(&b, "X1").unwrap());
        prop_assert!((wa.statistic - wb.statistic).abs() < 1e-8 * wa.statistic.max(1.0));
    }

    #[test]
    fn dw_is_within_bounds(series in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2..40), 1..5)) {
        if let Ok(dw) = durbin_watson(&series) {
            prop_assert!((0.0..=4.0).contains(&dw));
        }
    }

    #[test]
    fn vif_is_at_least_one(seed in 0u64..1000) {
        let ds = panel(3, 12, seed, 3);
        for v in vif(&ds, &["X0", "X1", "X2"]).unwrap().values() {
            prop_assert!(*v >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn hausman_is_non_negative_with_psd_difference(seed in 0u64..1000) {
        let ds = panel(6, 12, seed, 2);
        let (fe_spec, re_spec) = spec(&["X0", "X1"], SlopeScope::Pooled).hausman_pair();
        let fe = fit_ols(&ds, &fe_spec).unwrap();
        let re = fit_random_effects(&ds, &re_spec).unwrap();
        let h = hausman(&fe, &re).unwrap();
        if h.flags.is_empty() {
            prop_assert!(h.statistic >= 0.0);
        }
        prop_assert!((0.0..=1.0).contains(&h.p_value));
    }

    #[test]
    fn trend_is_shift_equivariant(values in prop::collection::vec(-1e4f64..1e4, 4..30), shift in -1e4f64..1e4) {
        let s: Vec<(i32, f64)> = values.iter().enumerate().map(|(i, v)| (1990 + i as i32, *v)).collect();
        let t: Vec<(i32, f64)> = s.iter().map(|(y, v)| (*y, v + shift)).collect();
        let (a, b) = (fit_trend(&s).unwrap(), fit_trend(&t).unwrap());
        prop_assert!((b.beta0 - a.beta0 - shift).abs() < 1e-9 * (1.0 + shift.abs() + a.beta0.abs()));
        prop_assert!((b.beta1 - a.beta1).abs() < 1e-9 * (1.0 + a.beta1.abs()) * 1e3);
        prop_assert!((b.sigma - a.sigma).abs() < 1e-9 * (1.0 + a.sigma) * 1e3);
    }

    #[test]
    fn quantiles_and_compliance_are_monotone(values in prop::collection::vec(-1e3f64..1e3, 1..400), t1 in -1e3f64..1e3, t2 in -1e3f64..1e3) {
        let qs = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];
        let q = quantiles_of(&values, &qs).unwrap();
        prop_assert!(q.windows(2).all(|w| w[0].1 <= w[1].1));
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(compliance_of(&values, lo, Direction::AtMost) <= compliance_of(&values, hi, Direction::AtMost));
        prop_assert!(compliance_of(&values, hi, Direction::AtLeast) <= compliance_of(&values, lo, Direction::AtLeast));
    }

    #[test]
    fn target_orderings(base in 1.0f64..1e7, gic in 1.0f64..1e7) {
        prop_assert!(ghg_target(base, Horizon::Y2030) < ghg_target(base, Horizon::Y2020));
        let (p, t) = consumption_projection_and_target(gic, Horizon::Y2030);
        prop_assert!(t < p);
    }
}

#[test]
fn res_targets_for_2030_respect_the_floor() {
    let config = TargetsConfig::builtin();
    for c in config.codes() {
        assert!(res_target(&config, c, Horizon::Y2030).unwrap() >= 0.27);
    }
}
