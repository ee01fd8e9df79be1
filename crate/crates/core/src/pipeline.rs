//! Reproducible runs: each command reads its inputs, builds result objects
//! and emits artifacts plus a `manifest.json` recording the configuration
//! hash, the seed and the SHA-256 of every input and artifact.
//!
//! Artifacts are written to a temporary file in the output directory and
//! renamed into place. Nothing time- or host-dependent is recorded, so two
//! runs with the same manifest produce the same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{durbin_watson_by_country, hausman, vif, wald_slope_equality, TestReport};
use crate::error::{Error, Result};
use crate::forecast::{fit_ar2, fit_tobit, fit_trend, select_model, ForecastModel, PooledGrowthModel, Selection};
use crate::montecarlo::{quantiles_at, simulate, simulate_growth, SimOptions, TrajectoryEnsemble, DEFAULT_PATHS};
use crate::panel::{ingest_csv, parse_schema, write_csv, Frequency, PanelDataset};
use crate::regression::{self, fit_pooled_growth, fit_random_effects, FitResult, GrowthVariables, ModelSpec, SlopeScope};
use crate::report::{
    coefficient_table, growth_rate_table, scenario_table, target_table, CoefficientInputs, ComplianceSummary, Layout,
    ScenarioPanel, Table, DEFAULT_MARKER,
};
use crate::serialize::canonical_json;
use crate::targets::{
    average_growth_rates, builtin_scenario, target_set, Aggregate, GrowthMean, GrowthTable, Horizon, Scenario,
    TargetsConfig, CONSM, GHG, RES,
};

pub const MANIFEST: &str = "manifest.json";
pub const DEFAULT_END_YEAR: i32 = 2030;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Ingest,
    Estimate,
    Diagnose,
    Models,
    Forecast,
    Scenario,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Estimate => "estimate",
            Command::Diagnose => "diagnose",
            Command::Models => "models",
            Command::Forecast => "forecast",
            Command::Scenario => "scenario",
            Command::Report => "report",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::Forecast | Command::Scenario | Command::Report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Table,
    Csv,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    /// Panel CSV (`country,period,variable,value`).
    pub input: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Model specification for `estimate`/`diagnose`, run plan for `report`.
    pub spec: Option<PathBuf>,
    /// `models.json` written by the `models` command.
    pub models: Option<PathBuf>,
    /// Targets configuration; the bundled one when absent.
    pub targets: Option<PathBuf>,
    /// Scenario definition file.
    pub scenario_file: Option<PathBuf>,
    /// Built-in scenario `A`, `B` or `C`; all three when neither this nor a
    /// file is given.
    pub scenario_name: Option<String>,
    pub n_paths: Option<usize>,
    pub master_seed: Option<u64>,
    /// First simulated year minus one; the last observed year by default.
    pub start_year: Option<i32>,
    pub end_year: i32,
    pub format: OutputFormat,
    pub marker: String,
    /// Worker threads. Results do not depend on it, so it is not hashed.
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(command: Command, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            input: None,
            schema: None,
            spec: None,
            models: None,
            targets: None,
            scenario_file: None,
            scenario_name: None,
            n_paths: None,
            master_seed: None,
            start_year: None,
            end_year: DEFAULT_END_YEAR,
            format: OutputFormat::Both,
            marker: DEFAULT_MARKER.to_string(),
            workers: 0,
            out: out.into(),
        }
    }

    pub fn hash(&self) -> String {
        sha256_hex(canonical_json(self).as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    /// Seed and path count actually used by a stochastic run.
    pub master_seed: Option<u64>,
    pub n_paths: Option<usize>,
    /// Input path (as given) to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name to SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub written: Vec<PathBuf>,
}

/// `[model]` plus optional table options, as read from a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSpec {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub layout: Option<Layout>,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateInputs {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub spec: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualInputs {
    pub input: PathBuf,
    pub schema: PathBuf,
}

/// Run plan for `report`. Relative paths resolve against the plan's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPlan {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default)]
    pub targets: Option<PathBuf>,
    #[serde(default)]
    pub scenarios: Option<Vec<String>>,
    /// Wholesale price regression (first table).
    #[serde(default)]
    pub price: Option<EstimateInputs>,
    /// Government wedge regression (second table).
    #[serde(default)]
    pub wedge: Option<EstimateInputs>,
    /// Yearly GHG, consumption and renewables panel (remaining tables).
    #[serde(default)]
    pub annual: Option<AnnualInputs>,
}

/// Univariate models per country and variable, and the pooled growth model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsArtifact {
    /// Panel order.
    pub countries: Vec<String>,
    /// `selections[country][variable]`.
    pub selections: BTreeMap<String, BTreeMap<String, Selection>>,
    /// Candidates that could not be fitted, `country/variable/model` to reason.
    pub skipped: BTreeMap<String, String>,
    pub growth: Option<PooledGrowthModel>,
    pub growth_method: Option<String>,
    pub growth_flags: Vec<String>,
    pub growth_table: Option<GrowthTable>,
}

/// Regression plus its specification tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimation {
    pub spec: EstimateSpec,
    pub fit: FitResult,
    pub wald: BTreeMap<String, TestReport>,
    pub vif: BTreeMap<String, f64>,
    pub hausman: TestReport,
    pub dw_by_country: Vec<f64>,
}

impl Estimation {
    pub fn table(&self, layout: Layout) -> Result<Table> {
        let regressors: Vec<String> = self.spec.model.regressors.iter().map(|r| r.name.clone()).collect();
        let title = self.spec.title.clone().unwrap_or_else(|| format!("Determinants of {}", self.fit.dependent));
        Ok(coefficient_table(
            layout,
            &title,
            CoefficientInputs {
                fit: &self.fit,
                regressors: &regressors,
                dummies: &self.spec.model.dummies,
                wald: &self.wald,
                vif: &self.vif,
                hausman: Some(&self.hausman),
            },
        )?)
    }

    pub fn diagnostics_json(&self) -> String {
        let dw: BTreeMap<&str, f64> =
            self.fit.countries.iter().map(|c| c.as_str()).zip(self.dw_by_country.iter().copied()).collect();
        canonical_json(&serde_json::json!({
            "method": self.fit.method,
            "wald_slope_equality": self.wald,
            "vif": self.vif,
            "hausman": self.hausman,
            "durbin_watson": { "pooled": self.fit.dw, "by_country": dw },
            "flags": self.fit.flags,
        }))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Ctx {
    inputs: BTreeMap<String, String>,
    artifacts: BTreeMap<String, Vec<u8>>,
    format: OutputFormat,
    marker: String,
    sim: Option<SimOptions>,
}

impl Ctx {
    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|_| Error::Config(format!("{} is not UTF-8 text", path.display())))
    }

    fn emit(&mut self, name: &str, content: impl Into<Vec<u8>>) {
        self.artifacts.insert(name.to_string(), content.into());
    }

    fn emit_table(&mut self, table: &Table) {
        let stem = table.layout.file_stem();
        if self.format != OutputFormat::Csv {
            let text = table.render_text(&self.marker);
            self.emit(&format!("{stem}.txt"), text);
        }
        if self.format != OutputFormat::Table {
            self.emit(&format!("{stem}.csv"), table.to_csv());
        }
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, command: Command) -> Result<&'a PathBuf> {
    value.as_ref().ok_or_else(|| Error::Config(format!("`{}` needs --{flag}", command.name())))
}

/// Reads a long-format panel, inferring the frequency from the first
/// period label.
pub fn load_panel(input_text: &str, schema_text: &str) -> Result<PanelDataset> {
    let schema = parse_schema(schema_text)?;
    let label = input_text
        .lines()
        .skip(1)
        .find(|l| !l.trim().is_empty())
        .and_then(|l| l.split(',').nth(1))
        .unwrap_or("");
    let frequency = Frequency::infer(label)
        .ok_or_else(|| Error::Config(format!("cannot infer the frequency from period label `{}`", label.trim())))?;
    Ok(ingest_csv(input_text.as_bytes(), &schema, frequency)?)
}

fn read_panel(ctx: &mut Ctx, input: &Path, schema: &Path) -> Result<PanelDataset> {
    let schema_text = ctx.read(schema)?;
    let input_text = ctx.read(input)?;
    load_panel(&input_text, &schema_text)
}

fn read_targets(ctx: &mut Ctx, path: Option<&Path>) -> Result<TargetsConfig> {
    match path {
        Some(p) => {
            let text = ctx.read(p)?;
            Ok(TargetsConfig::from_toml_str(&text)?)
        }
        None => Ok(TargetsConfig::builtin()),
    }
}

/// Fits the specification and runs slope-equality, VIF, Hausman and
/// per-country Durbin–Watson diagnostics on its estimation window.
pub fn estimate(ds: &PanelDataset, spec: &EstimateSpec) -> Result<Estimation> {
    let fit = regression::fit(ds, &spec.model)?;
    fit.ensure_converged()?;
    let mut wald = BTreeMap::new();
    for r in &spec.model.regressors {
        if r.scope == SlopeScope::PerCountry {
            wald.insert(r.name.clone(), wald_slope_equality(&fit, &r.name)?);
        }
    }
    let labels: Vec<String> = ds.periods().iter().map(|p| p.label()).collect();
    let first = fit.periods.first().and_then(|p| labels.iter().position(|l| l == p)).unwrap_or(0);
    let last = fit.periods.last().and_then(|p| labels.iter().position(|l| l == p)).unwrap_or(labels.len() - 1);
    let window = ds.slice_periods(first..last + 1);
    let names: Vec<&str> = spec.model.regressors.iter().map(|r| r.name.as_str()).collect();
    let vifs = if names.len() >= 2 { vif(&window, &names)? } else { BTreeMap::new() };
    let (fe_spec, re_spec) = spec.model.hausman_pair();
    let fe = regression::fit(&window, &fe_spec)?;
    let re = fit_random_effects(&window, &re_spec)?;
    let hausman = hausman(&fe, &re)?;
    let dw_by_country = durbin_watson_by_country(&fit.residuals);
    Ok(Estimation { spec: spec.clone(), fit, wald, vif: vifs, hausman, dw_by_country })
}

fn candidates_for(variable: &str, series: &[(i32, f64)], skipped: &mut BTreeMap<String, String>, key: &str) -> Vec<ForecastModel> {
    let mut out = Vec::new();
    let mut note = |name: &str, e: String| {
        skipped.insert(format!("{key}/{name}"), e);
    };
    match fit_trend(series) {
        Ok(m) => out.push(ForecastModel::Trend(m)),
        Err(e) => note("trend", e.to_string()),
    }
    match fit_ar2(series) {
        Ok(m) => out.push(ForecastModel::Ar2(m)),
        Err(e) => note("ar2", e.to_string()),
    }
    if variable == RES {
        match fit_tobit(series) {
            Ok(m) => out.push(ForecastModel::Tobit(m)),
            Err(e) => note("tobit", e.to_string()),
        }
    }
    out
}

/// Selects a forecast model per country for each of GHG, CONSM and RES
/// present in `ds` (yearly), and fits the pooled growth model and growth
/// table when all three are present.
pub fn fit_models(ds: &PanelDataset) -> Result<ModelsArtifact> {
    if ds.frequency() != Frequency::Yearly {
        return Err(Error::Config("forecast models need a yearly panel".into()));
    }
    let mut selections: BTreeMap<String, BTreeMap<String, Selection>> = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    let variables: Vec<&str> = [GHG, CONSM, RES].into_iter().filter(|v| ds.has_variable(v)).collect();
    if variables.is_empty() {
        return Err(Error::Config(format!("the panel has none of {GHG}, {CONSM}, {RES}")));
    }
    for (c, code) in ds.countries().iter().enumerate() {
        for &var in &variables {
            let values = ds.complete_series(var, c)?;
            let series: Vec<(i32, f64)> = ds.periods().iter().map(|p| p.year).zip(values).collect();
            let key = format!("{code}/{var}");
            let cands = candidates_for(var, &series, &mut skipped, &key);
            if cands.is_empty() {
                let reason = skipped.get(&format!("{key}/trend")).cloned().unwrap_or_default();
                return Err(Error::Config(format!("no forecast model could be fitted for {key}: {reason}")));
            }
            selections.entry(code.clone()).or_default().insert(var.to_string(), select_model(&cands, &series));
        }
    }
    let (growth, growth_method, growth_flags, growth_table) = if variables.len() == 3 {
        let g = fit_pooled_growth(ds, &GrowthVariables::default())?;
        let table = average_growth_rates(ds, &[GHG, CONSM, RES], GrowthMean::default(), Aggregate::default())?;
        (Some(g.model), Some(g.fit.method), g.fit.flags, Some(table))
    } else {
        (None, None, Vec::new(), None)
    };
    Ok(ModelsArtifact { countries: ds.countries().to_vec(), selections, skipped, growth, growth_method, growth_flags, growth_table })
}

fn layout_of(variable: &str) -> Layout {
    match variable {
        GHG => Layout::T3,
        RES => Layout::T6,
        _ => Layout::T7,
    }
}

const QUANTILES: [f64; 3] = [0.01, 0.5, 0.99];

fn summaries_for(e: &TrajectoryEnsemble, targets: &TargetsConfig) -> Result<Vec<ComplianceSummary>> {
    let mut out = Vec::new();
    for h in Horizon::ALL {
        if e.year_index(h.year()).is_some() {
            let t = target_set(targets, &e.country, &e.variable, h)?;
            out.push(ComplianceSummary::from_ensemble(e, t, &QUANTILES)?);
        }
    }
    Ok(out)
}

fn fan_rows(e: &TrajectoryEnsemble, w: &mut csv::Writer<Vec<u8>>) -> Result<()> {
    for &year in &e.horizon_years {
        let q = quantiles_at(e, year, &QUANTILES)?;
        let mut rec = vec![e.country.clone(), year.to_string()];
        rec.extend(q.iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn forecast_all(ctx: &mut Ctx, models: &ModelsArtifact, targets: &TargetsConfig, cfg: &RunConfig, opts: &SimOptions) -> Result<()> {
    let mut all = Vec::new();
    for var in [GHG, RES, CONSM] {
        let mut summaries = Vec::new();
        let mut fan = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        fan.write_record(["country", "year", "q01", "q50", "q99"]).map_err(|e| Error::Config(e.to_string()))?;
        let mut any = false;
        for country in &models.countries {
            let Some(sel) = models.selections.get(country).and_then(|m| m.get(var)) else { continue };
            any = true;
            let start = cfg.start_year.unwrap_or_else(|| sel.model.last_year());
            let e = simulate(&sel.model, country, var, start, cfg.end_year, opts)?;
            summaries.extend(summaries_for(&e, targets)?);
            fan_rows(&e, &mut fan)?;
        }
        if !any {
            continue;
        }
        let table = target_table(layout_of(var), &summaries)?;
        ctx.emit_table(&table);
        ctx.emit(&format!("fan_{}.csv", var.to_ascii_lowercase()), fan.into_inner().map_err(|e| Error::Config(e.to_string()))?);
        all.extend(summaries);
    }
    ctx.emit("compliance.json", canonical_json(&all));
    Ok(())
}

fn scenarios_all(ctx: &mut Ctx, models: &ModelsArtifact, targets: &TargetsConfig, scenarios: &[Scenario], cfg: &RunConfig, opts: &SimOptions) -> Result<()> {
    let growth = models
        .growth
        .as_ref()
        .ok_or_else(|| Error::Config("the models artifact has no pooled growth model (needs GHG, CONSM and RES)".into()))?;
    let start = match cfg.start_year {
        Some(y) => y,
        None => growth.start_levels.values().map(|s| s.year).max().unwrap_or(cfg.end_year - 1),
    };
    let mut panels = Vec::new();
    for s in scenarios {
        let ensembles = simulate_growth(growth, s, start, cfg.end_year, opts)?;
        let mut summaries = Vec::new();
        for country in &models.countries {
            if let Some(e) = ensembles.get(country) {
                summaries.extend(summaries_for(e, targets)?);
            }
        }
        panels.push(ScenarioPanel { scenario: s.name.clone(), summaries });
    }
    let table = scenario_table(&panels, &growth.start_levels)?;
    ctx.emit_table(&table);
    ctx.emit("scenario_compliance.json", canonical_json(&serde_json::json!({ "scenarios": scenarios, "panels": panels })));
    Ok(())
}

fn pick_scenarios(ctx: &mut Ctx, cfg: &RunConfig, names: Option<&[String]>, table: Option<&GrowthTable>) -> Result<Vec<Scenario>> {
    if let Some(path) = &cfg.scenario_file {
        let text = ctx.read(path)?;
        return Ok(vec![Scenario::from_toml_str(&text)?]);
    }
    if let Some(name) = &cfg.scenario_name {
        return Ok(vec![builtin_scenario(name, table)?]);
    }
    let default = ["A".to_string(), "B".to_string(), "C".to_string()];
    names.unwrap_or(&default).iter().map(|n| Ok(builtin_scenario(n, table)?)).collect()
}

fn load_models(ctx: &mut Ctx, cfg: &RunConfig) -> Result<ModelsArtifact> {
    match (&cfg.models, &cfg.input) {
        (Some(path), _) => {
            let text = ctx.read(path)?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        (None, Some(input)) => {
            let schema = required(&cfg.schema, "schema", cfg.command)?;
            let ds = read_panel(ctx, input, schema)?;
            fit_models(&ds)
        }
        (None, None) => Err(Error::Config(format!("`{}` needs --models or --input", cfg.command.name()))),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_spec(ctx: &mut Ctx, path: &Path) -> Result<EstimateSpec> {
    let text = ctx.read(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run_estimate(ctx: &mut Ctx, inputs: &EstimateInputs, forced: Option<Layout>, diagnostics_only: bool, prefix: &str) -> Result<()> {
    let spec = read_spec(ctx, &inputs.spec)?;
    let ds = read_panel(ctx, &inputs.input, &inputs.schema)?;
    let est = estimate(&ds, &spec)?;
    ctx.emit(&format!("{prefix}diagnostics.json"), est.diagnostics_json());
    if !diagnostics_only {
        ctx.emit(&format!("{prefix}fit.json"), est.fit.to_json());
        let layout = forced.or(spec.layout).unwrap_or(Layout::T1);
        let table = est.table(layout)?;
        ctx.emit_table(&table);
    }
    Ok(())
}

fn execute(ctx: &mut Ctx, cfg: &RunConfig) -> Result<()> {
    let seed = cfg.master_seed;
    let opts = |ctx: &mut Ctx, paths: Option<usize>, seed: Option<u64>| -> Result<SimOptions> {
        let seed = seed.ok_or_else(|| Error::Config(format!("`{}` is stochastic and needs --seed", cfg.command.name())))?;
        let o = SimOptions::new(paths.unwrap_or(DEFAULT_PATHS), seed).with_workers(cfg.workers);
        ctx.sim = Some(o);
        Ok(o)
    };
    match cfg.command {
        Command::Ingest => {
            let ds = read_panel(ctx, required(&cfg.input, "input", cfg.command)?, required(&cfg.schema, "schema", cfg.command)?)?;
            let mut buf = Vec::new();
            write_csv(&ds, &mut buf).map_err(|e| Error::io(&cfg.out, e))?;
            ctx.emit("panel.csv", buf);
            ctx.emit("panel_summary.txt", ds.summary() + "\n");
        }
        Command::Estimate | Command::Diagnose => {
            let inputs = EstimateInputs {
                input: required(&cfg.input, "input", cfg.command)?.clone(),
                schema: required(&cfg.schema, "schema", cfg.command)?.clone(),
                spec: required(&cfg.spec, "spec", cfg.command)?.clone(),
            };
            run_estimate(ctx, &inputs, None, cfg.command == Command::Diagnose, "")?;
        }
        Command::Models => {
            let ds = read_panel(ctx, required(&cfg.input, "input", cfg.command)?, required(&cfg.schema, "schema", cfg.command)?)?;
            let models = fit_models(&ds)?;
            if let Some(t) = &models.growth_table {
                ctx.emit_table(&growth_rate_table(t, &[GHG, CONSM, RES])?);
            }
            ctx.emit("models.json", canonical_json(&models));
        }
        Command::Forecast => {
            let opts = opts(ctx, cfg.n_paths, seed)?;
            let models = load_models(ctx, cfg)?;
            let targets = read_targets(ctx, cfg.targets.as_deref())?;
            forecast_all(ctx, &models, &targets, cfg, &opts)?;
        }
        Command::Scenario => {
            let opts = opts(ctx, cfg.n_paths, seed)?;
            let models = load_models(ctx, cfg)?;
            let targets = read_targets(ctx, cfg.targets.as_deref())?;
            let scenarios = pick_scenarios(ctx, cfg, None, models.growth_table.as_ref())?;
            scenarios_all(ctx, &models, &targets, &scenarios, cfg, &opts)?;
        }
        Command::Report => {
            let plan_path = required(&cfg.spec, "spec", cfg.command)?;
            let text = ctx.read(plan_path)?;
            let plan: ReportPlan = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", plan_path.display())))?;
            let base = plan_path.parent().unwrap_or(Path::new("")).to_path_buf();
            let opts = opts(ctx, cfg.n_paths.or(plan.paths), seed.or(plan.seed))?;
            let fix = |e: &EstimateInputs| EstimateInputs {
                input: resolve(&base, &e.input),
                schema: resolve(&base, &e.schema),
                spec: resolve(&base, &e.spec),
            };
            if let Some(p) = &plan.price {
                run_estimate(ctx, &fix(p), Some(Layout::T1), false, "price_")?;
            }
            if let Some(w) = &plan.wedge {
                run_estimate(ctx, &fix(w), Some(Layout::T2), false, "wedge_")?;
            }
            if let Some(a) = &plan.annual {
                let ds = read_panel(ctx, &resolve(&base, &a.input), &resolve(&base, &a.schema))?;
                let models = fit_models(&ds)?;
                if let Some(t) = &models.growth_table {
                    ctx.emit_table(&growth_rate_table(t, &[GHG, CONSM, RES])?);
                }
                ctx.emit("models.json", canonical_json(&models));
                let targets_path = cfg.targets.clone().or(plan.targets.as_ref().map(|t| resolve(&base, t)));
                let targets = read_targets(ctx, targets_path.as_deref())?;
                forecast_all(ctx, &models, &targets, cfg, &opts)?;
                if models.growth.is_some() {
                    let scenarios = pick_scenarios(ctx, cfg, plan.scenarios.as_deref(), models.growth_table.as_ref())?;
                    scenarios_all(ctx, &models, &targets, &scenarios, cfg, &opts)?;
                }
            }
        }
    }
    Ok(())
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
    Ok(target)
}

/// Executes `cfg` and writes its artifacts and manifest under `cfg.out`.
/// Nothing is written when the command fails.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    if cfg.n_paths == Some(0) {
        return Err(crate::montecarlo::MonteCarloError::InvalidPathCount(0).into());
    }
    if cfg.command.is_stochastic() && cfg.command != Command::Report && cfg.master_seed.is_none() {
        return Err(Error::Config(format!("`{}` is stochastic and needs --seed", cfg.command.name())));
    }
    let mut ctx = Ctx { inputs: BTreeMap::new(), artifacts: BTreeMap::new(), format: cfg.format, marker: cfg.marker.clone(), sim: None };
    execute(&mut ctx, cfg)?;

    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut written = Vec::new();
    let mut hashes = BTreeMap::new();
    for (name, bytes) in &ctx.artifacts {
        written.push(write_atomic(&cfg.out, name, bytes)?);
        hashes.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        tool: "cepsim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command.name().into(),
        config: cfg.clone(),
        config_hash: cfg.hash(),
        master_seed: ctx.sim.map(|o| o.master_seed),
        n_paths: ctx.sim.map(|o| o.n_paths),
        inputs: ctx.inputs,
        artifacts: hashes,
    };
    written.push(write_atomic(&cfg.out, MANIFEST, canonical_json(&manifest).as_bytes())?);
    Ok(RunSummary { manifest, written })
}
