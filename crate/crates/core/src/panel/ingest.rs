//! Long-format CSV ingestion: `country,period,variable,value`.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use super::derive::derive_variable;
use super::schema::VariableDef;
use super::{CellRef, Frequency, PanelDataset, PanelError, Period};

const HEADER: [&str; 4] = ["country", "period", "variable", "value"];

/// Reads a long-format panel. Missing cells may be written as `NA` or left
/// empty; they stay marked missing. Raw schema variables must have a row for
/// every (country, period); derived variables absent from the file are
/// computed from their rules in schema order.
pub fn ingest_csv<R: Read>(source: R, schema: &[VariableDef], frequency: Frequency) -> Result<PanelDataset, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut records = reader.records();
    let header = match records.next() {
        None => {
            return Err(PanelError::UnbalancedPanel {
                missing: Vec::new(),
                summary: "empty dataset: 0 countries x 0 periods".to_string(),
            })
        }
        Some(rec) => rec.map_err(|e| malformed(1, e.to_string()))?,
    };
    let names: Vec<String> = header.iter().map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase()).collect();
    if names != HEADER {
        return Err(malformed(1, format!("header must be `{}`, got `{}`", HEADER.join(","), names.join(","))));
    }

    let defs: HashMap<&str, &VariableDef> = schema.iter().map(|d| (d.name.as_str(), d)).collect();
    let mut countries: Vec<String> = Vec::new();
    let mut cells: HashMap<(usize, i64, String), (Option<f64>, usize)> = HashMap::new();
    let mut min_ord = i64::MAX;
    let mut max_ord = i64::MIN;

    for rec in records {
        let rec = rec.map_err(|e| malformed(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 4 {
            return Err(malformed(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let (country, period_label, variable, value) = (&rec[0], &rec[1], &rec[2], &rec[3]);
        if country.is_empty() {
            return Err(malformed(line, "empty country code".into()));
        }
        let period = Period::parse(period_label, frequency).map_err(|e| malformed(line, e.to_string()))?;
        if !defs.contains_key(variable) {
            return Err(PanelError::UnknownVariable { line, name: variable.to_string() });
        }
        let value = parse_value(value).map_err(|reason| malformed(line, reason))?;
        let c = match countries.iter().position(|x| x == country) {
            Some(c) => c,
            None => {
                countries.push(country.to_string());
                countries.len() - 1
            }
        };
        let ord = period.ordinal();
        min_ord = min_ord.min(ord);
        max_ord = max_ord.max(ord);
        let key = (c, ord, variable.to_string());
        if let Some((_, first)) = cells.get(&key) {
            return Err(malformed(
                line,
                format!("duplicate cell {country}/{period_label}/{variable} (first seen on line {first})"),
            ));
        }
        cells.insert(key, (value, line));
    }

    if cells.is_empty() {
        return Err(PanelError::UnbalancedPanel {
            missing: Vec::new(),
            summary: "empty dataset: 0 countries x 0 periods".to_string(),
        });
    }

    let periods = Period::range(Period::from_ordinal(frequency, min_ord), Period::from_ordinal(frequency, max_ord));
    let mut ds = PanelDataset::new(frequency, countries.clone(), periods.clone())?;
    let present: BTreeMap<&str, ()> = cells.keys().map(|(_, _, v)| (v.as_str(), ())).collect();

    let mut missing = Vec::new();
    for def in schema {
        let in_file = present.contains_key(def.name.as_str());
        if !def.is_raw() && !in_file {
            continue;
        }
        let mut column = Vec::with_capacity(countries.len() * periods.len());
        for (c, country) in countries.iter().enumerate() {
            for p in &periods {
                match cells.get(&(c, p.ordinal(), def.name.clone())) {
                    Some((v, _)) => column.push(*v),
                    None => {
                        missing.push(CellRef { country: country.clone(), period: p.label(), variable: def.name.clone() });
                        column.push(None);
                    }
                }
            }
        }
        ds = ds.with_variable(def.name.clone(), def.unit.clone(), def.construction.clone(), column)?;
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(PanelError::UnbalancedPanel { missing, summary: ds.summary() });
    }

    for def in schema {
        if ds.has_variable(&def.name) {
            continue;
        }
        if let Some(rule) = def.derivation() {
            ds = derive_variable(&ds, &rule?)?;
        }
    }
    Ok(ds)
}

fn malformed(line: usize, reason: String) -> PanelError {
    PanelError::MalformedRow { line, reason }
}

fn parse_value(text: &str) -> Result<Option<f64>, String> {
    if text.is_empty() || text.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("unparseable value `{text}`")),
    }
}

/// Writes `ds` in the same long format, countries in dataset order, periods
/// ascending, variables sorted by name. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_csv<W: Write>(ds: &PanelDataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    let names: Vec<&str> = ds.variable_names().collect();
    for (c, country) in ds.countries().iter().enumerate() {
        for (t, period) in ds.periods().iter().enumerate() {
            for name in &names {
                match ds.value(name, c, t) {
                    Some(v) => writeln!(out, "{country},{period},{name},{v}")?,
                    None => writeln!(out, "{country},{period},{name},NA")?,
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::parse_schema;

    fn schema() -> Vec<VariableDef> {
        parse_schema("PRICE EUR/MWh raw\nRES fraction raw\n").unwrap()
    }

    #[test]
    fn empty_file_is_unbalanced() {
        match ingest_csv("".as_bytes(), &schema(), Frequency::Monthly) {
            Err(PanelError::UnbalancedPanel { missing, summary }) => {
                assert!(missing.is_empty());
                assert!(summary.contains("0 countries"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ingest_csv("country,period,variable,value\n".as_bytes(), &schema(), Frequency::Monthly),
            Err(PanelError::UnbalancedPanel { .. })
        ));
    }

    #[test]
    fn duplicate_row_names_the_cell() {
        let csv = "country,period,variable,value\nAU,2008-01,PRICE,50\nAU,2008-01,RES,0.3\nAU,2008-01,PRICE,51\n";
        match ingest_csv(csv.as_bytes(), &schema(), Frequency::Monthly) {
            Err(PanelError::MalformedRow { line, reason }) => {
                assert_eq!(line, 4);
                assert!(reason.contains("AU/2008-01/PRICE"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unparseable_value_is_reported_with_line() {
        let csv = "country,period,variable,value\nAU,2008-01,PRICE,abc\n";
        assert!(matches!(
            ingest_csv(csv.as_bytes(), &schema(), Frequency::Monthly),
            Err(PanelError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_variable() {
        let csv = "country,period,variable,value\nAU,2008-01,COAL,1\n";
        assert!(matches!(
            ingest_csv(csv.as_bytes(), &schema(), Frequency::Monthly),
            Err(PanelError::UnknownVariable { line: 2, .. })
        ));
    }

    #[test]
    fn missing_rows_are_listed() {
        let csv = "country,period,variable,value\nAU,2008-01,PRICE,1\nAU,2008-01,RES,0.1\nAU,2008-03,PRICE,1\nAU,2008-03,RES,0.1\n";
        match ingest_csv(csv.as_bytes(), &schema(), Frequency::Monthly) {
            Err(PanelError::UnbalancedPanel { missing, .. }) => {
                assert_eq!(missing.len(), 2);
                assert_eq!(missing[0].period, "2008-02");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_na_is_kept_missing() {
        let csv = "country,period,variable,value\nAU,2008,PRICE,NA\nAU,2008,RES,\n";
        let ds = ingest_csv(csv.as_bytes(), &schema(), Frequency::Yearly).unwrap();
        assert_eq!(ds.value("PRICE", 0, 0), None);
        assert_eq!(ds.value("RES", 0, 0), None);
    }

    #[test]
    fn derived_variables_are_computed() {
        let schema = parse_schema("RENEW GWh raw\nGROSS GWh raw\nRES fraction derived:res_share(RENEW,GROSS)\n").unwrap();
        let csv = "country,period,variable,value\nAU,2008,RENEW,30\nAU,2008,GROSS,100\n";
        let ds = ingest_csv(csv.as_bytes(), &schema, Frequency::Yearly).unwrap();
        assert_eq!(ds.value("RES", 0, 0), Some(0.3));
    }
}
