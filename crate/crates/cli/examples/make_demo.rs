//! Regenerates the synthetic demo panels, specs and run plan.
//!
//! ```text
//! cargo run -p cepsim-cli --example make_demo -- demo
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cepsim_core::panel::{synthesize_dataset, write_csv, ArmaProcess, Dgp, Period, RegressorDgp};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const COUNTRIES: [&str; 10] = ["AU", "DK", "FI", "FR", "GE", "GR", "IT", "PT", "SE", "SP"];

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap_or_else(|e| panic!("writing {name}: {e}"));
}

fn equicorrelated(n: usize, sd: f64, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| sd * sd * if i == j { 1.0 } else { rho })
}

fn prices(dir: &Path) {
    let mut dgp = Dgp::new(&COUNTRIES, Period::monthly(2008, 1), 108, 4.0);
    dgp.dependent = "PRICE".into();
    dgp.dependent_unit = "EUR/MWh".into();
    dgp.intercepts = (0..10).map(|j| 35.0 + 1.5 * j as f64).collect();
    dgp.seasonal = (0..12).map(|m| 3.0 * (std::f64::consts::TAU * m as f64 / 12.0).cos()).collect();
    dgp.error_cov = equicorrelated(10, 4.0, 0.4);
    dgp.arma = ArmaProcess { ar: vec![(1, 0.27), (12, -0.235), (24, -0.173)], ma: vec![] };
    dgp.burn_in = 240;
    let reg = |name: &str, unit: &str, mean: f64, sd: f64, persistence: f64, slopes: [f64; 10]| {
        let mut r = RegressorDgp::new(name, mean, sd, slopes.to_vec());
        r.unit = unit.into();
        r.persistence = persistence;
        r
    };
    let mut res = reg("RES", "fraction", 0.3, 0.08, 0.8, [-16.72, -31.60, -42.02, -42.79, -29.50, -16.40, -17.51, -11.84, -26.58, -50.61]);
    res.bounds = Some((0.01, 0.99));
    dgp.regressors = vec![
        res,
        reg("BRENTOIL", "USD/bbl", 80.0, 20.0, 0.95, [0.112, -0.114, -0.166, 0.260, 0.042, 0.196, 0.298, 0.024, -0.168, 0.073]),
        reg("COAL", "USD/t", 80.0, 15.0, 0.95, [0.126, 0.206, 0.167, 0.134, 0.189, 0.108, 0.074, 0.011, 0.306, -0.043]),
        reg("GAS", "EUR/MWh", 25.0, 5.0, 0.9, [-0.057, 1.763, 4.279, -4.355, -1.500, -4.679, -3.407, -2.402, 4.983, -2.341]),
        reg("CARBON", "EUR/t", 10.0, 4.0, 0.9, [0.967, 0.010, 0.088, 0.087, 0.670, 0.326, 0.170, 0.535, -0.135, 0.182]),
        reg("TEMP", "C", 10.0, 6.0, 0.6, [-0.112, -0.934, -0.868, 0.024, -0.372, 0.204, 0.354, 0.243, -1.102, 0.352]),
    ];
    let panel = synthesize_dataset(&dgp, 20_080_101).expect("valid generating process");
    let mut csv = Vec::new();
    write_csv(&panel.dataset, &mut csv).expect("in-memory write");
    fs::write(dir.join("prices.csv"), csv).expect("write prices.csv");

    write(
        dir,
        "prices.schema",
        "# name     unit      construction\n\
         PRICE      EUR/MWh   raw\n\
         RES        fraction  raw\n\
         BRENTOIL   USD/bbl   raw\n\
         COAL       USD/t     raw\n\
         GAS        EUR/MWh   raw\n\
         CARBON     EUR/t     raw\n\
         TEMP       C         raw\n\
         DUM_CWE    -         derived:step(2010-11)\n\
         DUM_NWE    -         derived:step(2014-02)\n",
    );
    let mut spec = String::from(
        "title = \"Determinants of Wholesale Monthly Electricity Prices\"\nlayout = \"T1\"\n\n[model]\ndependent = \"PRICE\"\n\
         fixed_effects = [\"country\", \"seasonal\"]\ndummies = [\"DUM_CWE\", \"DUM_NWE\"]\n\
         weighting = \"cross_section_sur\"\ncovariance = \"pcse\"\n",
    );
    for r in &dgp.regressors {
        let _ = write!(spec, "\n[[model.regressors]]\nname = \"{}\"\nscope = \"per_country\"\n", r.name);
    }
    spec.push_str("\n[model.arma]\nar = [1, 12, 24]\n\n[model.fgls]\ntwo_step = true\n");
    write(dir, "price_model.toml", &spec);

    let truth = serde_json::json!({
        "slopes": panel.truth.slopes.iter().map(|(n, s)| (n.clone(), s.clone())).collect::<std::collections::BTreeMap<_, _>>(),
        "ar": dgp.arma.ar,
        "countries": COUNTRIES,
    });
    write(dir, "price_truth.json", &(serde_json::to_string_pretty(&truth).unwrap() + "\n"));
}

fn wedge(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(20_080_102);
    let mut n = move || -> f64 { StandardNormal.sample(&mut rng) };
    let delta = [-10.679, 83.382, 119.713, 106.208, 50.421, 48.423, 199.856, 41.802, 55.473, 22.253];
    let phi = [-0.823, 0.483, -1.703, -0.494, -0.764, 0.124, -2.949, -2.421, 0.877, -1.145];
    let t_n = 18;
    let mut out = String::from("country,period,variable,value\n");
    let mut common = vec![0.0; t_n];
    for c in common.iter_mut() {
        *c = n();
    }
    for (j, code) in COUNTRIES.iter().enumerate() {
        let mut pb = vec![-3.0 + 2.0 * n()];
        for _ in 1..t_n {
            let last = *pb.last().unwrap();
            pb.push(last + 1.5 * n());
        }
        let res0 = 0.15 + 0.04 * j as f64;
        let mut eta = 0.0;
        for t in 0..t_n {
            let res = (res0 + 0.012 * t as f64 + 0.02 * n()).clamp(0.01, 0.99);
            let dpb = if t >= 2 { pb[t - 1] - pb[t - 2] } else { 0.0 };
            eta = 0.5 * eta + 3.0 * (0.3f64.sqrt() * common[t] + 0.7f64.sqrt() * n());
            let wedge = 60.0 + 8.0 * j as f64 + delta[j] * res + phi[j] * dpb + eta;
            let price = 45.0 + 5.0 * n();
            let period = format!("{}-H{}", 2008 + t / 2, t % 2 + 1);
            for (var, v) in [("HOUSEHOLD", wedge + price), ("PB", pb[t]), ("PRICE", price), ("RES", res)] {
                let _ = writeln!(out, "{code},{period},{var},{v}");
            }
        }
    }
    write(dir, "wedge.csv", &out);
    write(
        dir,
        "wedge.schema",
        "HOUSEHOLD  EUR/MWh   raw\n\
         PRICE      EUR/MWh   raw\n\
         PB         pct_gdp   raw\n\
         RES        fraction  raw\n\
         WEDGE      EUR/MWh   derived:wedge(HOUSEHOLD,PRICE)\n\
         DPB        pct_gdp   derived:lag_diff(PB)\n",
    );
    write(
        dir,
        "wedge_model.toml",
        "title = \"Household Retail Prices (Government Wedge)\"\nlayout = \"T2\"\n\n[model]\ndependent = \"WEDGE\"\n\
         fixed_effects = [\"country\"]\nweighting = \"cross_section_sur\"\ncovariance = \"pcse\"\n\n\
         [[model.regressors]]\nname = \"RES\"\nscope = \"per_country\"\n\n\
         [[model.regressors]]\nname = \"DPB\"\nscope = \"per_country\"\n\n[model.arma]\nar = [1]\n\n[model.fgls]\ntwo_step = true\n",
    );
}

fn annual(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(20_080_103);
    let mut n = move || -> f64 { StandardNormal.sample(&mut rng) };
    // Level in 2008 and mean yearly growth of GHG, consumption and renewables share.
    let ghg0 = [89128.0, 68453.0, 72975.0, 541886.0, 1_000_000.0, 134630.0, 557990.0, 79335.0, 640000.0, 421075.0];
    let consm0 = [66000.0, 830000.0, 86500.0, 505000.0, 540000.0, 53000.0, 328000.0, 51500.0, 146000.0, 259000.0];
    let res0 = [0.65, 0.28, 0.28, 0.13, 0.15, 0.10, 0.18, 0.35, 0.50, 0.22];
    let g_ghg: [f64; 10] = [-0.013, -0.030, -0.022, -0.013, -0.010, -0.046, -0.027, -0.017, -0.016, -0.024];
    let g_consm: [f64; 10] = [0.009, -0.011, -0.003, -0.003, 0.003, -0.012, -0.012, -0.003, -0.015, 0.001];
    let g_res: [f64; 10] = [0.018, 0.05, 0.025, 0.035, 0.05, 0.05, 0.05, 0.05, 0.01, 0.05];
    let (b1, b2) = (0.8f64, -0.15f64);
    let mut out = String::from("country,period,variable,value\n");
    for (j, code) in COUNTRIES.iter().enumerate() {
        let (mut ghg, mut consm, mut res) = (ghg0[j], consm0[j], res0[j]);
        let b0 = (1.0 + g_ghg[j]).ln() - b1 * (1.0 + g_consm[j]).ln() - b2 * (1.0 + g_res[j]).ln();
        for year in 2008..=2016 {
            if year > 2008 {
                let new_consm = consm * (1.0 + g_consm[j] + 0.01 * n());
                let new_res = (res * (1.0 + g_res[j] + 0.04 * n())).min(0.95);
                ghg *= (b0 + b1 * (new_consm / consm).ln() + b2 * (new_res / res).ln() + 0.01 * n()).exp();
                consm = new_consm;
                res = new_res;
            }
            for (var, v) in [("CONSM", consm), ("GHG", ghg), ("RES", res)] {
                let _ = writeln!(out, "{code},{year},{var},{v}");
            }
        }
    }
    write(dir, "annual.csv", &out);
    write(dir, "annual.schema", "GHG    kt        raw\nCONSM  GWh       raw\nRES    fraction  raw\n");
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    fs::create_dir_all(&dir).expect("create output directory");
    prices(&dir);
    wedge(&dir);
    annual(&dir);
    write(
        &dir,
        "plan.toml",
        "seed = 20170601\npaths = 100000\nscenarios = [\"A\", \"B\", \"C\"]\n\n\
         [price]\ninput = \"prices.csv\"\nschema = \"prices.schema\"\nspec = \"price_model.toml\"\n\n\
         [wedge]\ninput = \"wedge.csv\"\nschema = \"wedge.schema\"\nspec = \"wedge_model.toml\"\n\n\
         [annual]\ninput = \"annual.csv\"\nschema = \"annual.schema\"\n",
    );
    write(
        &dir,
        "scenario_d.toml",
        "name = \"D\"\ndescription = \"flat consumption, renewables +4%/yr\"\n\n[growth]\nCONSM = 0.0\nRES = 0.04\n",
    );
    println!("demo written to {}", dir.display());
}
