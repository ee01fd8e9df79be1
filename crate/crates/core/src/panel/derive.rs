//! Constructed variables: RES share, government wedge, lagged differences,
//! step dummies and net balance.

use serde::{Deserialize, Serialize};

use super::schema::Construction;
use super::{PanelDataset, PanelError, Period};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Derivation {
    /// `name = renewables / gross`.
    ResShare { name: String, renewables: String, gross: String },
    /// `name = household - wholesale`.
    Wedge { name: String, household: String, wholesale: String },
    /// `name_t = source_{t-1} - source_{t-2}`.
    LagDiff { name: String, source: String },
    /// 0 strictly before `cutover`, 1 from `cutover` on.
    Step { name: String, cutover: String },
    /// `name = exports - imports`.
    NetBalance { name: String, exports: String, imports: String },
}

impl Derivation {
    /// Parses the expression part of a `derived:` schema entry.
    pub fn parse(name: &str, expr: &str) -> Result<Self, PanelError> {
        let bad = |reason: String| PanelError::Schema { line: 0, reason };
        let (rule, rest) = expr
            .split_once('(')
            .ok_or_else(|| bad(format!("expected `rule(args)`, got `{expr}`")))?;
        let args_text = rest
            .strip_suffix(')')
            .ok_or_else(|| bad(format!("unterminated argument list in `{expr}`")))?;
        let args: Vec<String> = args_text
            .split(',')
            .map(|a| a.trim().to_string())
            .filter(|a| !a.is_empty())
            .collect();
        let want = |n: usize| -> Result<(), PanelError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(bad(format!("`{rule}` takes {n} argument(s), got {}", args.len())))
            }
        };
        let name = name.to_string();
        match rule {
            "res_share" => {
                want(2)?;
                Ok(Derivation::ResShare { name, renewables: args[0].clone(), gross: args[1].clone() })
            }
            "wedge" => {
                want(2)?;
                Ok(Derivation::Wedge { name, household: args[0].clone(), wholesale: args[1].clone() })
            }
            "lag_diff" => {
                want(1)?;
                Ok(Derivation::LagDiff { name, source: args[0].clone() })
            }
            "step" => {
                want(1)?;
                Ok(Derivation::Step { name, cutover: args[0].clone() })
            }
            "net_balance" => {
                want(2)?;
                Ok(Derivation::NetBalance { name, exports: args[0].clone(), imports: args[1].clone() })
            }
            other => Err(bad(format!("unknown derivation rule `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Derivation::ResShare { name, .. }
            | Derivation::Wedge { name, .. }
            | Derivation::LagDiff { name, .. }
            | Derivation::Step { name, .. }
            | Derivation::NetBalance { name, .. } => name,
        }
    }

    pub fn inputs(&self) -> Vec<&str> {
        match self {
            Derivation::ResShare { renewables, gross, .. } => vec![renewables, gross],
            Derivation::Wedge { household, wholesale, .. } => vec![household, wholesale],
            Derivation::LagDiff { source, .. } => vec![source],
            Derivation::Step { .. } => vec![],
            Derivation::NetBalance { exports, imports, .. } => vec![exports, imports],
        }
    }

    fn expression(&self) -> String {
        match self {
            Derivation::ResShare { renewables, gross, .. } => format!("res_share({renewables},{gross})"),
            Derivation::Wedge { household, wholesale, .. } => format!("wedge({household},{wholesale})"),
            Derivation::LagDiff { source, .. } => format!("lag_diff({source})"),
            Derivation::Step { cutover, .. } => format!("step({cutover})"),
            Derivation::NetBalance { exports, imports, .. } => format!("net_balance({exports},{imports})"),
        }
    }
}

/// Appends the variable described by `rule`. Cells whose inputs are missing
/// (including the first two periods of a lagged difference) come out missing.
pub fn derive_variable(ds: &PanelDataset, rule: &Derivation) -> Result<PanelDataset, PanelError> {
    for input in rule.inputs() {
        if !ds.has_variable(input) {
            return Err(PanelError::MissingInput { variable: input.to_string() });
        }
    }
    let n_t = ds.n_periods();
    let n = ds.n_countries() * n_t;
    let cell = |var: &str, i: usize| ds.variable(var).unwrap().cells[i];
    let binary = |a: &str, b: &str, f: &dyn Fn(f64, f64) -> f64| -> Vec<Option<f64>> {
        (0..n).map(|i| Some(f(cell(a, i)?, cell(b, i)?))).collect()
    };

    let (unit, cells) = match rule {
        Derivation::ResShare { renewables, gross, .. } => {
            let mut cells = Vec::with_capacity(n);
            for i in 0..n {
                cells.push(match (cell(renewables, i), cell(gross, i)) {
                    (Some(r), Some(g)) => {
                        if g == 0.0 {
                            return Err(PanelError::DivisionByZeroGross {
                                country: ds.countries()[i / n_t].clone(),
                                period: ds.periods()[i % n_t].label(),
                            });
                        }
                        Some(r / g)
                    }
                    _ => None,
                });
            }
            ("fraction".to_string(), cells)
        }
        Derivation::Wedge { household, wholesale, .. } => {
            (ds.unit(household).unwrap_or("").to_string(), binary(household, wholesale, &|h, p| h - p))
        }
        Derivation::NetBalance { exports, imports, .. } => {
            (ds.unit(exports).unwrap_or("").to_string(), binary(exports, imports, &|e, m| e - m))
        }
        Derivation::LagDiff { source, .. } => {
            let cells = (0..n)
                .map(|i| {
                    let t = i % n_t;
                    if t < 2 {
                        return None;
                    }
                    Some(cell(source, i - 1)? - cell(source, i - 2)?)
                })
                .collect();
            (ds.unit(source).unwrap_or("").to_string(), cells)
        }
        Derivation::Step { cutover, .. } => {
            let cut = Period::parse(cutover, ds.frequency())?;
            let cells = (0..n)
                .map(|i| Some(if ds.periods()[i % n_t] < cut { 0.0 } else { 1.0 }))
                .collect();
            ("indicator".to_string(), cells)
        }
    };
    ds.clone()
        .with_variable(rule.name(), unit, Construction::Derived(rule.expression()), cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Frequency;

    fn two_by_three() -> PanelDataset {
        PanelDataset::with_span(vec!["AU".into(), "SP".into()], Period::yearly(2008), 3)
    }

    #[test]
    fn res_share_ratio() {
        let ds = two_by_three()
            .with_values("RENEW", "GWh", &[30.0, 10.0, 0.0, 5.0, 6.0, 7.0])
            .unwrap()
            .with_values("GROSS", "GWh", &[100.0, 50.0, 10.0, 10.0, 12.0, 14.0])
            .unwrap();
        let rule = Derivation::parse("RES", "res_share(RENEW,GROSS)").unwrap();
        let out = derive_variable(&ds, &rule).unwrap();
        assert_eq!(out.value("RES", 0, 0), Some(0.30));
        assert_eq!(out.value("RES", 1, 2), Some(0.5));
        assert_eq!(out.unit("RES"), Some("fraction"));
    }

    #[test]
    fn res_share_zero_gross() {
        let ds = two_by_three()
            .with_values("RENEW", "GWh", &[1.0; 6])
            .unwrap()
            .with_values("GROSS", "GWh", &[1.0, 1.0, 1.0, 1.0, 0.0, 1.0])
            .unwrap();
        let rule = Derivation::parse("RES", "res_share(RENEW,GROSS)").unwrap();
        match derive_variable(&ds, &rule) {
            Err(PanelError::DivisionByZeroGross { country, period }) => {
                assert_eq!(country, "SP");
                assert_eq!(period, "2009");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wedge_is_difference() {
        let ds = two_by_three()
            .with_values("H", "EUR/MWh", &[200.0; 6])
            .unwrap()
            .with_values("P", "EUR/MWh", &[50.0; 6])
            .unwrap();
        let out = derive_variable(&ds, &Derivation::parse("WEDGE", "wedge(H,P)").unwrap()).unwrap();
        assert!(out.series("WEDGE", 1).unwrap().iter().all(|v| *v == Some(150.0)));
    }

    #[test]
    fn lag_diff_marks_leading_cells_missing() {
        let ds = PanelDataset::with_span(vec!["FI".into()], Period::yearly(2008), 5)
            .with_values("PB", "%GDP", &[1.0, 3.0, 2.0, 5.0, 4.0])
            .unwrap();
        let out = derive_variable(&ds, &Derivation::parse("DPB1", "lag_diff(PB)").unwrap()).unwrap();
        assert_eq!(out.series("DPB1", 0).unwrap(), &[None, None, Some(2.0), Some(-1.0), Some(3.0)]);
    }

    #[test]
    fn cwe_step_dummy_on_monthly_calendar() {
        // 2008-01..2016-12; months before 2010-11: 12 + 12 + 10.
        let ds = PanelDataset::with_span(vec!["GE".into()], Period::monthly(2008, 1), 108);
        let zeros_oracle = ds.periods().iter().filter(|p| (p.year, p.sub) < (2010, 11)).count();
        assert_eq!(zeros_oracle, 34);
        let out = derive_variable(&ds, &Derivation::parse("DUM_CWE", "step(2010-11)").unwrap()).unwrap();
        let s = out.series("DUM_CWE", 0).unwrap();
        assert_eq!(s.iter().filter(|v| **v == Some(0.0)).count(), 34);
        assert_eq!(s.iter().filter(|v| **v == Some(1.0)).count(), 74);
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(ds.frequency(), Frequency::Monthly);
    }

    #[test]
    fn net_balance_and_missing_input() {
        let ds = two_by_three().with_values("EXP", "GWh", &[5.0; 6]).unwrap();
        assert!(matches!(
            derive_variable(&ds, &Derivation::parse("NETBAL", "net_balance(EXP,IMP)").unwrap()),
            Err(PanelError::MissingInput { .. })
        ));
        let ds = ds.with_values("IMP", "GWh", &[7.0; 6]).unwrap();
        let out = derive_variable(&ds, &Derivation::parse("NETBAL", "net_balance(EXP,IMP)").unwrap()).unwrap();
        assert_eq!(out.value("NETBAL", 0, 0), Some(-2.0));
    }
}
