use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Cell, Format, Layout, ReportError, Table};
use crate::diagnostics::{chi2_sf, TestReport};
use crate::forecast::StartLevel;
use crate::montecarlo::{compliance_probability_at, quantiles_at, MonteCarloError, TrajectoryEnsemble};
use crate::regression::{FitResult, SlopeScope, SEASON_PREFIX};
use crate::targets::{Direction, GrowthTable, Horizon, TargetDerivation, TargetSet};

const SIGNIFICANCE: f64 = 0.01;
const SCENARIO_TITLE: &str = "GHG Emissions in 2020 and 2030 under growth scenarios";

fn incomplete(layout: Layout, missing: Vec<String>) -> Result<(), ReportError> {
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ReportError::IncompleteResults { layout, missing })
    }
}

fn percent_label(q: f64) -> String {
    format!("{}%", q * 100.0)
}

/// Everything a coefficient table needs besides the fit itself.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientInputs<'a> {
    pub fit: &'a FitResult,
    /// Row order of the slope rows.
    pub regressors: &'a [String],
    pub dummies: &'a [String],
    pub wald: &'a BTreeMap<String, TestReport>,
    pub vif: &'a BTreeMap<String, f64>,
    pub hausman: Option<&'a TestReport>,
}

/// Coefficient table: per-country slopes with the slope-equality p-value in
/// the last column, error-process terms, fit statistics, VIFs and the
/// Hausman statistic. Coefficients significant at 1% are marked.
pub fn coefficient_table(layout: Layout, title: &str, inp: CoefficientInputs<'_>) -> Result<Table, ReportError> {
    let p_decimals = match layout {
        Layout::T1 => 3,
        Layout::T2 => 4,
        got => return Err(ReportError::WrongLayout { got, expected: "T1, T2".into() }),
    };
    let fit = inp.fit;
    let n_c = fit.countries.len();
    let mut columns = fit.countries.clone();
    columns.push("WTp".into());
    let mut table = Table::new(layout, title, columns);
    let mut missing = Vec::new();
    let coef_cell = |idx: usize| {
        let (b, se) = (fit.coefficients[idx], fit.std_error(idx));
        let significant = se > 0.0 && chi2_sf((b / se).powi(2), 1) < SIGNIFICANCE;
        Cell::number(b, Format::Fixed(3)).marked(significant)
    };
    let first_only = |cell: Cell| {
        let mut v = vec![None; n_c + 1];
        if n_c > 0 {
            v[0] = Some(cell);
        }
        v
    };

    for (name, tested) in inp.regressors.iter().map(|r| (r, true)).chain(inp.dummies.iter().map(|d| (d, false))) {
        let scope = fit.scopes.get(name).copied().unwrap_or(SlopeScope::Pooled);
        let mut cells = vec![None; n_c + 1];
        match scope {
            SlopeScope::PerCountry => {
                for (j, c) in fit.countries.iter().enumerate() {
                    match fit.labels.iter().position(|l| l.term == *name && l.country.as_deref() == Some(c)) {
                        Some(i) => cells[j] = Some(coef_cell(i)),
                        None => missing.push(format!("{name}[{c}]")),
                    }
                }
            }
            SlopeScope::Pooled => match fit.labels.iter().position(|l| l.term == *name && l.country.is_none()) {
                Some(i) if n_c > 0 => cells[0] = Some(coef_cell(i)),
                Some(_) => {}
                None => missing.push(name.clone()),
            },
        }
        if tested && n_c > 0 {
            match inp.wald.get(name) {
                Some(w) => cells[n_c] = Some(Cell::number(w.p_value, Format::Fixed(p_decimals))),
                None if scope == SlopeScope::PerCountry => missing.push(format!("Wald({name})")),
                None => {}
            }
        }
        table.push(name.clone(), cells);
    }

    if let Some(arma) = &fit.arma {
        let mut rows: BTreeMap<(String, usize), Vec<Option<Cell>>> = BTreeMap::new();
        for t in &arma.terms {
            let cells = rows.entry((t.kind.clone(), t.lag)).or_insert_with(|| vec![None; n_c + 1]);
            let j = match &t.country {
                Some(c) => fit.countries.iter().position(|x| x == c),
                None => (n_c > 0).then_some(0),
            };
            if let Some(j) = j {
                let significant = t.std_error > 0.0 && chi2_sf((t.estimate / t.std_error).powi(2), 1) < SIGNIFICANCE;
                cells[j] = Some(Cell::number(t.estimate, Format::Fixed(3)).marked(significant));
            }
        }
        for ((kind, lag), cells) in rows {
            table.push(format!("{}({})", kind.to_ascii_uppercase(), lag), cells);
        }
    }

    if fit.labels.iter().any(|l| l.term.starts_with(SEASON_PREFIX)) {
        let mut cells: Vec<Option<Cell>> = (0..n_c).map(|_| Some(Cell::text("YES"))).collect();
        cells.push(None);
        table.push("Fixed S Effects", cells);
    }
    table.push("Adjusted R2", first_only(Cell::number(fit.r2_adjusted, Format::Fixed(3))));
    table.push("DW Stat", first_only(Cell::number(fit.dw, Format::Fixed(3))));
    table.push("Sample size", first_only(Cell::number(fit.n_obs as f64, Format::Integer)));

    if inp.regressors.len() >= 2 {
        for name in inp.regressors {
            match inp.vif.get(name) {
                Some(v) => table.push(format!("VIF {name}"), first_only(Cell::number(*v, Format::Fixed(3)))),
                None => missing.push(format!("VIF({name})")),
            }
        }
    }
    match inp.hausman {
        Some(h) => {
            let mut cells = first_only(Cell::number(h.statistic, Format::Fixed(3)));
            if n_c > 0 {
                cells[n_c] = Some(Cell::number(h.p_value, Format::Fixed(p_decimals)));
            }
            table.push("Hausman Test", cells);
        }
        None => missing.push("Hausman".into()),
    }
    incomplete(layout, missing)?;
    table.note = format!("Method {}. {} marks coefficients significant at 1%.", fit.method, super::DEFAULT_MARKER);
    Ok(table)
}

/// Terminal-quantile summary of one ensemble against one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceSummary {
    pub country: String,
    pub variable: String,
    pub horizon: Horizon,
    pub target: TargetSet,
    /// `(probability, value)` pairs.
    pub quantiles: Vec<(f64, f64)>,
    /// Share of paths on the compliant side of the target.
    pub probability: f64,
}

impl ComplianceSummary {
    pub fn from_ensemble(e: &TrajectoryEnsemble, target: TargetSet, qs: &[f64]) -> Result<Self, MonteCarloError> {
        let year = target.horizon.year();
        Ok(ComplianceSummary {
            country: e.country.clone(),
            variable: e.variable.clone(),
            horizon: target.horizon,
            quantiles: quantiles_at(e, year, qs)?,
            probability: compliance_probability_at(e, year, target.target_value, target.direction)?,
            target,
        })
    }

    pub fn quantile(&self, q: f64) -> Option<f64> {
        self.quantiles.iter().find(|(p, _)| (p - q).abs() < 1e-12).map(|&(_, v)| v)
    }

    /// Whether fewer than 1% of paths can meet the target: Q(1%) above an
    /// upper bound, or Q(99%) below a floor. `None` if that quantile is absent.
    pub fn below_one_percent(&self) -> Option<bool> {
        match self.target.direction {
            Direction::AtMost => self.quantile(0.01).map(|q| q > self.target.target_value),
            Direction::AtLeast => self.quantile(0.99).map(|q| q < self.target.target_value),
        }
    }
}

fn country_order<'a>(items: impl Iterator<Item = &'a ComplianceSummary>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.contains(&s.country) {
            out.push(s.country.clone());
        }
    }
    out
}

fn horizons<'a>(items: impl Iterator<Item = &'a ComplianceSummary>) -> Vec<Horizon> {
    let mut hs: Vec<Horizon> = items.map(|s| s.horizon).collect();
    hs.sort();
    hs.dedup();
    hs
}

struct Grid<'a> {
    countries: Vec<String>,
    horizons: Vec<Horizon>,
    by_key: BTreeMap<(String, Horizon), &'a ComplianceSummary>,
}

impl<'a> Grid<'a> {
    fn new(summaries: &'a [ComplianceSummary]) -> Self {
        Grid {
            countries: country_order(summaries.iter()),
            horizons: horizons(summaries.iter()),
            by_key: summaries.iter().map(|s| ((s.country.clone(), s.horizon), s)).collect(),
        }
    }

    fn get(&self, country: &str, h: Horizon) -> Option<&'a ComplianceSummary> {
        self.by_key.get(&(country.to_string(), h)).copied()
    }

    /// One row with a cell per country produced by `f`; absent summaries
    /// and `None` results are recorded as missing under `label`.
    fn row(
        &self,
        h: Horizon,
        label: &str,
        missing: &mut Vec<String>,
        f: impl Fn(&ComplianceSummary) -> Option<Cell>,
    ) -> Vec<Option<Cell>> {
        self.countries
            .iter()
            .map(|c| {
                let cell = self.get(c, h).and_then(&f);
                if cell.is_none() {
                    missing.push(format!("{c} {label}"));
                }
                cell
            })
            .collect()
    }
}

/// GHG (T3), renewables share (T6) or consumption (T7) quantiles against
/// targets, one column per country. The quantile cells of a country and
/// horizon are marked when fewer than 1% of paths meet the target.
pub fn target_table(layout: Layout, summaries: &[ComplianceSummary]) -> Result<Table, ReportError> {
    let (title, format, probs): (&str, Format, &[f64]) = match layout {
        Layout::T3 => ("GHG Emissions in 2020 and 2030", Format::Integer, &[0.01, 0.5]),
        Layout::T6 => ("Renewable Shares in 2020 and 2030", Format::Percent(0), &[0.01, 0.5, 0.99]),
        Layout::T7 => ("Projections and Targets of Electricity Consumption", Format::Integer, &[0.01, 0.5]),
        got => return Err(ReportError::WrongLayout { got, expected: "T3, T6, T7".into() }),
    };
    let grid = Grid::new(summaries);
    let mut table = Table::new(layout, title, grid.countries.clone());
    let mut missing = Vec::new();
    if grid.countries.is_empty() {
        return Ok(table);
    }
    let first = grid.horizons[0];
    match layout {
        Layout::T3 => {
            let label = "GHG emissions 1990";
            let cells = grid.row(first, label, &mut missing, |s| match s.target.derivation {
                TargetDerivation::GhgCut { base_1990, .. } => Some(Cell::number(base_1990, format)),
                _ => None,
            });
            table.push(label, cells);
        }
        Layout::T7 => {
            let label = "Gross Inland Consumption 2010";
            let cells = grid.row(first, label, &mut missing, |s| match s.target.derivation {
                TargetDerivation::ConsumptionCut { gic_2010, .. } => Some(Cell::number(gic_2010, format)),
                _ => None,
            });
            table.push(label, cells);
        }
        _ => {}
    }
    for &h in &grid.horizons {
        if layout == Layout::T7 {
            let label = format!("Projection {h}");
            let cells = grid.row(h, &label, &mut missing, |s| s.target.derivation.projection().map(|p| Cell::number(p, format)));
            table.push(label, cells);
        }
        let label = format!("Target {h}");
        let cells = grid.row(h, &label, &mut missing, |s| Some(Cell::number(s.target.target_value, format)));
        table.push(label, cells);
        for &q in probs {
            let label = format!("Q({},{h})", percent_label(q));
            let cells = grid.row(h, &label, &mut missing, |s| {
                let v = s.quantile(q)?;
                Some(Cell::number(v, format).marked(s.below_one_percent() == Some(true)))
            });
            table.push(label, cells);
        }
    }
    incomplete(layout, missing)?;
    table.note = format!("{} marks less than 1% probability of meeting the target.", super::DEFAULT_MARKER);
    Ok(table)
}

/// Average growth rates per country plus the all-countries column.
pub fn growth_rate_table(table: &GrowthTable, variables: &[&str]) -> Result<Table, ReportError> {
    let mut columns = table.countries.clone();
    columns.push("Total".into());
    let mut out = Table::new(
        Layout::T4,
        &format!("Average Growth Rates {}-{}", table.first_period, table.last_period),
        columns,
    );
    let mut missing = Vec::new();
    for &var in variables {
        let mut cells: Vec<Option<Cell>> = table
            .countries
            .iter()
            .map(|c| {
                let r = table.rate(c, var).map(|r| Cell::number(r, Format::Percent(1)));
                if r.is_none() {
                    missing.push(format!("{c} {var}"));
                }
                r
            })
            .collect();
        let total = table.total.get(var).map(|r| Cell::number(*r, Format::Percent(1)));
        if total.is_none() {
            missing.push(format!("Total {var}"));
        }
        cells.push(total);
        out.push(var, cells);
    }
    incomplete(Layout::T4, missing)?;
    Ok(out)
}

/// GHG quantiles of one scenario, one summary per country and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPanel {
    pub scenario: String,
    pub summaries: Vec<ComplianceSummary>,
}

/// Shared reference rows (1990 level, start level, targets) followed by a
/// block of quantile rows per scenario panel.
pub fn scenario_table(panels: &[ScenarioPanel], start_levels: &BTreeMap<String, StartLevel>) -> Result<Table, ReportError> {
    let Some(head) = panels.first() else {
        return Ok(Table::new(Layout::T5, SCENARIO_TITLE, Vec::new()));
    };
    let reference = Grid::new(&head.summaries);
    let countries = reference.countries.clone();
    let mut table = Table::new(Layout::T5, SCENARIO_TITLE, countries.clone());
    if countries.is_empty() {
        return Ok(table);
    }
    let mut missing = Vec::new();
    let first = reference.horizons[0];
    table.push(
        "GHG in 1990",
        reference.row(first, "GHG in 1990", &mut missing, |s| match s.target.derivation {
            TargetDerivation::GhgCut { base_1990, .. } => Some(Cell::number(base_1990, Format::Integer)),
            _ => None,
        }),
    );
    let years: Vec<i32> = countries.iter().filter_map(|c| start_levels.get(c).map(|s| s.year)).collect();
    let start_label = match years.first() {
        Some(y) if years.iter().all(|x| x == y) => format!("GHG in {y}"),
        _ => "GHG at start".to_string(),
    };
    let start_cells = countries
        .iter()
        .map(|c| {
            let cell = start_levels.get(c).map(|s| Cell::number(s.level, Format::Integer));
            if cell.is_none() {
                missing.push(format!("{c} start level"));
            }
            cell
        })
        .collect();
    table.push(start_label, start_cells);
    for &h in &reference.horizons {
        let label = format!("TARGET {h}");
        let cells = reference.row(h, &label, &mut missing, |s| Some(Cell::number(s.target.target_value, Format::Integer)));
        table.push(label, cells);
    }
    for panel in panels {
        let grid = Grid {
            countries: countries.clone(),
            horizons: reference.horizons.clone(),
            by_key: panel.summaries.iter().map(|s| ((s.country.clone(), s.horizon), s)).collect(),
        };
        for &h in &grid.horizons {
            for q in [0.01, 0.5] {
                let label = format!("Panel {} Q({}, {h})", panel.scenario, percent_label(q));
                let cells = grid.row(h, &label, &mut missing, |s| {
                    let v = s.quantile(q)?;
                    Some(Cell::number(v, Format::Integer).marked(s.below_one_percent() == Some(true)))
                });
                table.push(label, cells);
            }
        }
    }
    incomplete(Layout::T5, missing)?;
    table.note = format!("{} marks less than 1% probability of meeting the target.", super::DEFAULT_MARKER);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{target_set, TargetsConfig, GHG, RES};

    fn summary(country: &str, var: &str, h: Horizon, qs: &[(f64, f64)]) -> ComplianceSummary {
        let target = target_set(&TargetsConfig::builtin(), country, var, h).unwrap();
        ComplianceSummary {
            country: country.into(),
            variable: var.into(),
            horizon: h,
            target,
            quantiles: qs.to_vec(),
            probability: 0.5,
        }
    }

    #[test]
    fn ghg_marking_follows_q1() {
        // AU 2020 target 63760.
        let s = vec![
            summary("AU", GHG, Horizon::Y2020, &[(0.01, 70379.0), (0.5, 75341.0)]),
            summary("AU", GHG, Horizon::Y2030, &[(0.01, 40000.0), (0.5, 65683.0)]),
        ];
        let t = target_table(Layout::T3, &s).unwrap();
        assert_eq!(t.cell("GHG emissions 1990", "AU").unwrap().as_number(), Some(79700.0));
        assert!(t.cell("Q(1%,2020)", "AU").unwrap().marked);
        assert!(t.cell("Q(50%,2020)", "AU").unwrap().marked);
        assert!(!t.cell("Q(1%,2030)", "AU").unwrap().marked);
        assert!(!t.cell("Target 2020", "AU").unwrap().marked);
        assert!(t.render_text("*").contains("70379*"));
    }

    #[test]
    fn res_marking_follows_q99() {
        let s = vec![summary("FR", RES, Horizon::Y2020, &[(0.01, 0.11), (0.5, 0.17), (0.99, 0.229)])];
        let t = target_table(Layout::T6, &s).unwrap();
        assert!(t.cell("Q(99%,2020)", "FR").unwrap().marked);
        assert_eq!(t.render_text("*").lines().find(|l| l.starts_with("Target 2020")).unwrap().trim_end(), "Target 2020   23%");
    }

    #[test]
    fn missing_quantile_is_reported() {
        let s = vec![summary("AU", GHG, Horizon::Y2020, &[(0.5, 75341.0)])];
        match target_table(Layout::T3, &s) {
            Err(ReportError::IncompleteResults { missing, .. }) => assert_eq!(missing, vec!["AU Q(1%,2020)"]),
            other => panic!("{other:?}"),
        }
        let s2 = vec![summary("AU", GHG, Horizon::Y2020, &[(0.01, 1.0), (0.5, 2.0)]), summary("DK", GHG, Horizon::Y2030, &[(0.01, 1.0), (0.5, 2.0)])];
        assert!(matches!(target_table(Layout::T3, &s2), Err(ReportError::IncompleteResults { .. })));
    }

    #[test]
    fn empty_is_header_only() {
        let t = target_table(Layout::T7, &[]).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.render_text("*").lines().count(), 3);
        let t5 = scenario_table(&[], &BTreeMap::new()).unwrap();
        assert!(t5.rows.is_empty());
    }

    #[test]
    fn wrong_layout() {
        assert!(matches!(target_table(Layout::T4, &[]), Err(ReportError::WrongLayout { .. })));
    }
}
