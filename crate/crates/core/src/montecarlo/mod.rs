//! Seeded trajectory ensembles, terminal quantiles and compliance
//! probabilities.
//!
//! Each innovation is a pure function of `(master_seed, path, year, stream)`
//! where `stream` is derived from the country and variable, so ensembles are
//! identical for any worker count and path order, and two scenarios run with
//! the same seed share their shocks.

mod philox;

use std::collections::BTreeMap;
use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use philox::{philox4x32, PhiloxStream};

use crate::forecast::{ForecastModel, PooledGrowthModel};
use crate::targets::{Direction, Scenario, CONSM, GHG, RES};

pub const DEFAULT_PATHS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("horizon {start}..{end} is empty or starts before the data frontier {frontier}")]
    HorizonBeforeData { start: i32, end: i32, frontier: i32 },
    #[error("no start level for {0}")]
    MissingStartLevel(String),
    #[error("scenario `{scenario}` has no {variable} growth rate for {country}")]
    MissingScenarioRate { scenario: String, variable: String, country: String },
    #[error("need between 1 and 4294967295 paths, got {0}")]
    InvalidPathCount(usize),
    #[error("probability {0} is outside (0, 1)")]
    InvalidProbability(f64),
    #[error("year {0} is outside the ensemble horizon")]
    YearOutsideHorizon(i32),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("writing terminal values: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub n_paths: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl SimOptions {
    pub fn new(n_paths: usize, master_seed: u64) -> Self {
        SimOptions { n_paths, master_seed, workers: 0 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub country: String,
    pub variable: String,
    pub horizon_years: Vec<i32>,
    pub n_paths: usize,
    /// Row-major `n_paths x horizon_years.len()`.
    pub paths: Vec<f64>,
    pub master_seed: u64,
    /// SHA-256 of the serialized model (and scenario, for growth runs).
    pub model_fingerprint: String,
}

impl TrajectoryEnsemble {
    pub fn path(&self, i: usize) -> &[f64] {
        let h = self.horizon_years.len();
        &self.paths[i * h..(i + 1) * h]
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.horizon_years.iter().position(|&y| y == year)
    }

    pub fn values_at(&self, year: i32) -> Result<Vec<f64>, MonteCarloError> {
        let j = self.year_index(year).ok_or(MonteCarloError::YearOutsideHorizon(year))?;
        let h = self.horizon_years.len();
        Ok((0..self.n_paths).map(|i| self.paths[i * h + j]).collect())
    }

    pub fn terminal(&self) -> Vec<f64> {
        let h = self.horizon_years.len();
        (0..self.n_paths).map(|i| self.paths[i * h + h - 1]).collect()
    }

    pub fn terminal_year(&self) -> i32 {
        *self.horizon_years.last().expect("non-empty horizon")
    }
}

/// Stream identifier of a (country, variable) pair.
pub fn stream_id(country: &str, variable: &str) -> u32 {
    let digest = Sha256::new().chain_update(country.as_bytes()).chain_update([0u8]).chain_update(variable.as_bytes()).finalize();
    u32::from_le_bytes([digest[0], digest[1], digest[2], digest[3]])
}

/// Standard normal draw at the given coordinates.
pub fn innovation(master_seed: u64, path: u32, year: i32, stream: u32) -> f64 {
    StandardNormal.sample(&mut PhiloxStream::new(master_seed, path, year as u32, stream))
}

pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> String {
    hex::encode(Sha256::digest(crate::serialize::canonical_json(value).as_bytes()))
}

fn fill_paths<F>(opts: &SimOptions, horizon: usize, f: F) -> Result<Vec<f64>, MonteCarloError>
where
    F: Fn(u32, &mut [f64]) + Sync,
{
    if opts.n_paths == 0 || opts.n_paths > u32::MAX as usize {
        return Err(MonteCarloError::InvalidPathCount(opts.n_paths));
    }
    let mut paths = vec![0.0; opts.n_paths * horizon];
    let run = |buf: &mut Vec<f64>| {
        buf.par_chunks_mut(horizon).enumerate().for_each(|(i, row)| f(i as u32, row));
    };
    if opts.workers == 0 {
        run(&mut paths);
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| MonteCarloError::Pool(e.to_string()))?;
        pool.install(|| run(&mut paths));
    }
    Ok(paths)
}

/// Paths for the years `start_year + 1 ..= end_year`.
///
/// Trend paths are independent draws around the fitted line; AR(2) paths
/// run the recursion from the last two observations (through any years
/// between the data and `start_year`); Tobit paths clamp a latent trend
/// draw to `[0, 1]`.
pub fn simulate(
    model: &ForecastModel,
    country: &str,
    variable: &str,
    start_year: i32,
    end_year: i32,
    opts: &SimOptions,
) -> Result<TrajectoryEnsemble, MonteCarloError> {
    let frontier = model.last_year();
    let before = matches!(model, ForecastModel::Ar2(_)) && start_year < frontier;
    if end_year <= start_year || before {
        return Err(MonteCarloError::HorizonBeforeData { start: start_year, end: end_year, frontier });
    }
    let horizon_years: Vec<i32> = (start_year + 1..=end_year).collect();
    let h = horizon_years.len();
    let stream = stream_id(country, variable);
    let seed = opts.master_seed;
    let paths = match model {
        ForecastModel::Trend(m) => fill_paths(opts, h, |p, row| {
            for (k, &year) in horizon_years.iter().enumerate() {
                row[k] = m.mean_at(year) + m.sigma * innovation(seed, p, year, stream);
            }
        })?,
        ForecastModel::Tobit(m) => fill_paths(opts, h, |p, row| {
            for (k, &year) in horizon_years.iter().enumerate() {
                row[k] = (m.latent_mean_at(year) + m.sigma * innovation(seed, p, year, stream)).clamp(0.0, 1.0);
            }
        })?,
        ForecastModel::Ar2(m) => fill_paths(opts, h, |p, row| {
            let (mut y2, mut y1) = (m.last_two_obs[0].1, m.last_two_obs[1].1);
            for year in frontier + 1..=end_year {
                let y = m.mu + m.rho1 * y1 + m.rho2 * y2 + m.sigma * innovation(seed, p, year, stream);
                y2 = y1;
                y1 = y;
                if year > start_year {
                    row[(year - start_year - 1) as usize] = y;
                }
            }
        })?,
    };
    Ok(TrajectoryEnsemble {
        country: country.to_string(),
        variable: variable.to_string(),
        horizon_years,
        n_paths: opts.n_paths,
        paths,
        master_seed: seed,
        model_fingerprint: fingerprint(model),
    })
}

/// GHG level paths for every country of `model` under `scenario`: each
/// year `dlog GHG = b0 + b1 log(1 + g_CONSM) + b2 log(1 + g_RES) + sigma eps`,
/// compounded from the country's start level.
pub fn simulate_growth(
    model: &PooledGrowthModel,
    scenario: &Scenario,
    start_year: i32,
    end_year: i32,
    opts: &SimOptions,
) -> Result<BTreeMap<String, TrajectoryEnsemble>, MonteCarloError> {
    let fp = fingerprint(&serde_json::json!({ "model": model, "scenario": scenario }));
    let mut out = BTreeMap::new();
    for (country, c) in &model.coefficients {
        let start = *model.start_levels.get(country).ok_or_else(|| MonteCarloError::MissingStartLevel(country.clone()))?;
        if end_year <= start_year || start_year < start.year {
            return Err(MonteCarloError::HorizonBeforeData { start: start_year, end: end_year, frontier: start.year });
        }
        let rate = |var: &str| {
            scenario.rate(var, country).ok_or_else(|| MonteCarloError::MissingScenarioRate {
                scenario: scenario.name.clone(),
                variable: var.to_string(),
                country: country.clone(),
            })
        };
        let drift = c.beta0 + c.beta1 * (1.0 + rate(CONSM)?).ln() + c.beta2 * (1.0 + rate(RES)?).ln();
        let horizon_years: Vec<i32> = (start_year + 1..=end_year).collect();
        let stream = stream_id(country, GHG);
        let seed = opts.master_seed;
        let log_start = start.level.ln();
        let paths = fill_paths(opts, horizon_years.len(), |p, row| {
            let mut l = log_start;
            for year in start.year + 1..=end_year {
                l += drift + c.sigma * innovation(seed, p, year, stream);
                if year > start_year {
                    row[(year - start_year - 1) as usize] = l.exp();
                }
            }
        })?;
        out.insert(
            country.clone(),
            TrajectoryEnsemble {
                country: country.clone(),
                variable: GHG.to_string(),
                horizon_years,
                n_paths: opts.n_paths,
                paths,
                master_seed: seed,
                model_fingerprint: fp.clone(),
            },
        );
    }
    Ok(out)
}

/// Lower order statistic: the value at index `floor(q (n - 1))` of the
/// sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

pub fn quantiles_of(values: &[f64], qs: &[f64]) -> Result<Vec<(f64, f64)>, MonteCarloError> {
    if let Some(&q) = qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(MonteCarloError::InvalidProbability(q));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(qs.iter().map(|&q| (q, quantile_sorted(&sorted, q))).collect())
}

/// Terminal-year quantiles, in the order of `qs`.
pub fn quantiles(e: &TrajectoryEnsemble, qs: &[f64]) -> Result<Vec<(f64, f64)>, MonteCarloError> {
    quantiles_of(&e.terminal(), qs)
}

pub fn quantiles_at(e: &TrajectoryEnsemble, year: i32, qs: &[f64]) -> Result<Vec<(f64, f64)>, MonteCarloError> {
    quantiles_of(&e.values_at(year)?, qs)
}

pub fn compliance_of(values: &[f64], target: f64, direction: Direction) -> f64 {
    let hits = values
        .iter()
        .filter(|&&v| match direction {
            Direction::AtMost => v <= target,
            Direction::AtLeast => v >= target,
        })
        .count();
    hits as f64 / values.len() as f64
}

/// Share of terminal values on the compliant side of `target`.
pub fn compliance_probability(e: &TrajectoryEnsemble, target: f64, direction: Direction) -> f64 {
    compliance_of(&e.terminal(), target, direction)
}

pub fn compliance_probability_at(
    e: &TrajectoryEnsemble,
    year: i32,
    target: f64,
    direction: Direction,
) -> Result<f64, MonteCarloError> {
    Ok(compliance_of(&e.values_at(year)?, target, direction))
}

/// Terminal values as `country,variable,path,value` rows.
pub fn write_terminal_csv<'a, W: Write>(
    ensembles: impl IntoIterator<Item = &'a TrajectoryEnsemble>,
    writer: W,
) -> Result<(), MonteCarloError> {
    let io = |e: csv::Error| MonteCarloError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["country", "variable", "path", "value"]).map_err(io)?;
    for e in ensembles {
        for (i, v) in e.terminal().iter().enumerate() {
            w.write_record([e.country.as_str(), e.variable.as_str(), &i.to_string(), &format!("{v:?}")]).map_err(io)?;
        }
    }
    w.flush().map_err(|e| MonteCarloError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{fit_trend, GrowthCoefficients, StartLevel, TrendModel};

    fn trend(beta0: f64, beta1: f64, sigma: f64) -> ForecastModel {
        let mut m: TrendModel = fit_trend(&[(2008, 1.0), (2009, 2.0), (2010, 3.5)]).unwrap();
        m.beta0 = beta0;
        m.beta1 = beta1;
        m.sigma = sigma;
        m.t0 = 2008;
        m.last_obs = (2016, 0.0);
        ForecastModel::Trend(m)
    }

    #[test]
    fn deterministic_limit() {
        let e = simulate(&trend(100.0, -2.0, 0.0), "AU", "GHG", 2016, 2020, &SimOptions::new(50, 1)).unwrap();
        assert_eq!(e.horizon_years, vec![2017, 2018, 2019, 2020]);
        assert!(e.terminal().iter().all(|&v| v == 100.0 - 2.0 * 12.0));
    }

    #[test]
    fn lower_quantile_convention() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantiles_of(&v, &[0.5]).unwrap()[0].1, 50.0);
        assert_eq!(quantiles_of(&[7.0; 10], &[0.01, 0.99]).unwrap(), vec![(0.01, 7.0), (0.99, 7.0)]);
        assert!(quantiles_of(&v, &[1.0]).is_err());
    }

    #[test]
    fn compliance_edges() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(compliance_of(&v, 10.0, Direction::AtMost), 1.0);
        assert_eq!(compliance_of(&v, 2.0, Direction::AtMost), 0.5);
        assert_eq!(compliance_of(&v, 2.0, Direction::AtLeast), 0.75);
    }

    #[test]
    fn workers_do_not_change_paths() {
        let m = trend(50.0, 1.0, 3.0);
        let a = simulate(&m, "AU", "GHG", 2016, 2030, &SimOptions::new(2000, 9).with_workers(1)).unwrap();
        let b = simulate(&m, "AU", "GHG", 2016, 2030, &SimOptions::new(2000, 9).with_workers(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_drift_growth() {
        let model = PooledGrowthModel {
            coefficients: BTreeMap::from([("AU".to_string(), GrowthCoefficients { beta0: -0.02, beta1: 0.0, beta2: 0.0, sigma: 0.0 })]),
            start_levels: BTreeMap::from([("AU".to_string(), StartLevel { year: 2016, level: 1000.0 })]),
        };
        let s = crate::targets::builtin_scenario("B", None).unwrap();
        let e = &simulate_growth(&model, &s, 2016, 2020, &SimOptions::new(10, 3)).unwrap()["AU"];
        let expected: Vec<f64> = (1..=4).map(|k| 1000.0 * (-0.02 * k as f64).exp()).collect();
        for (a, b) in e.path(0).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9 * b);
        }
    }

    #[test]
    fn terminal_csv_layout() {
        let e = simulate(&trend(1.0, 0.0, 0.0), "AU", "GHG", 2016, 2017, &SimOptions::new(2, 1)).unwrap();
        let mut out = Vec::new();
        write_terminal_csv([&e], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "country,variable,path,value\nAU,GHG,0,1.0\nAU,GHG,1,1.0\n");
    }
}
