//! Table emitters. Every number in a [`Table`] is copied from a result
//! object; rendering only rounds for display, and the CSV twin keeps full
//! precision.

mod layouts;

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layouts::{
    coefficient_table, growth_rate_table, scenario_table, target_table, CoefficientInputs, ComplianceSummary,
    ScenarioPanel,
};

pub const DEFAULT_MARKER: &str = "*";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("{layout} is missing {} cell(s): {}", missing.len(), missing.join(", "))]
    IncompleteResults { layout: Layout, missing: Vec<String> },
    #[error("layout {got} cannot be built here; expected one of {expected}")]
    WrongLayout { got: Layout, expected: String },
    #[error("malformed table CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layout {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
}

impl Layout {
    pub const ALL: [Layout; 7] = [Layout::T1, Layout::T2, Layout::T3, Layout::T4, Layout::T5, Layout::T6, Layout::T7];

    pub fn file_stem(self) -> String {
        format!("table_{}", self as u8 + 1)
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", *self as u8 + 1)
    }
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Layout::ALL
            .iter()
            .copied()
            .find(|l| l.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown layout `{s}`; use T1..T7"))
    }
}

/// Display rounding of a numeric cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    /// Fixed number of decimals.
    Fixed(u8),
    /// Levels, rounded to the integer.
    Integer,
    /// A fraction shown as a percentage with the given decimals.
    Percent(u8),
}

impl Format {
    pub fn render(self, v: f64) -> String {
        if !v.is_finite() {
            return v.to_string();
        }
        match self {
            Format::Fixed(d) => format!("{:.*}", d as usize, v),
            Format::Integer => format!("{:.0}", v),
            Format::Percent(d) => format!("{:.*}%", d as usize, v * 100.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Number(f64, Format),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub value: CellValue,
    pub marked: bool,
}

impl Cell {
    pub fn number(v: f64, format: Format) -> Self {
        Cell { value: CellValue::Number(v, format), marked: false }
    }

    pub fn text(s: &str) -> Self {
        Cell { value: CellValue::Text(s.to_string()), marked: false }
    }

    pub fn marked(mut self, yes: bool) -> Self {
        self.marked = yes;
        self
    }

    pub fn as_number(&self) -> Option<f64> {
        match self.value {
            CellValue::Number(v, _) => Some(v),
            CellValue::Text(_) => None,
        }
    }

    fn display(&self, marker: &str) -> String {
        let mut s = match &self.value {
            CellValue::Number(v, f) => f.render(*v),
            CellValue::Text(t) => t.clone(),
        };
        if self.marked {
            s.push_str(marker);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    /// One slot per table column.
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub layout: Layout,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub note: String,
}

impl Table {
    pub fn new(layout: Layout, title: &str, columns: Vec<String>) -> Self {
        Table { layout, title: title.to_string(), columns, rows: Vec::new(), note: String::new() }
    }

    pub fn push(&mut self, label: impl Into<String>, cells: Vec<Option<Cell>>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(Row { label: label.into(), cells });
    }

    pub fn row(&self, label: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<&Cell> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.row(row)?.cells[c].as_ref()
    }

    /// Aligned plain-text rendering; marked cells carry `marker`.
    pub fn render_text(&self, marker: &str) -> String {
        let label_w = self.rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(0);
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.cells.iter().map(|c| c.as_ref().map(|c| c.display(marker)).unwrap_or_default()).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, h)| body.iter().map(|r| r[j].chars().count()).chain([h.chars().count()]).max().unwrap_or(0))
            .collect();
        let line = |label: &str, cells: &[String]| {
            let mut s = format!("{:<label_w$}", label);
            for (c, w) in cells.iter().zip(&widths) {
                s.push_str(&format!("  {:>w$}", c, w = *w));
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        out.push_str(&self.title);
        out.push_str("\n\n");
        out.push_str(&line("", &self.columns));
        out.push('\n');
        for (r, cells) in self.rows.iter().zip(&body) {
            out.push_str(&line(&r.label, cells));
            out.push('\n');
        }
        if !self.note.is_empty() {
            out.push('\n');
            out.push_str(&self.note);
            out.push('\n');
        }
        out
    }

    /// Long-format twin `row,column,value,marked` with full-precision numbers.
    /// Empty slots are omitted.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["row", "column", "value", "marked"]).expect("in-memory write");
        for r in &self.rows {
            for (col, cell) in self.columns.iter().zip(&r.cells) {
                if let Some(cell) = cell {
                    let v = match &cell.value {
                        CellValue::Number(v, _) => v.to_string(),
                        CellValue::Text(t) => t.clone(),
                    };
                    w.write_record([r.label.as_str(), col.as_str(), v.as_str(), if cell.marked { "1" } else { "0" }])
                        .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

/// One record of a table CSV twin.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvCell {
    pub row: String,
    pub column: String,
    pub value: String,
    pub marked: bool,
}

impl CsvCell {
    pub fn number(&self) -> Option<f64> {
        self.value.parse().ok()
    }
}

pub fn read_table_csv<R: Read>(source: R) -> Result<Vec<CsvCell>, ReportError> {
    let mut reader = csv::Reader::from_reader(source);
    let header = reader.headers().map_err(|e| ReportError::Csv(e.to_string()))?;
    if header != vec!["row", "column", "value", "marked"] {
        return Err(ReportError::Csv(format!("unexpected header {:?}", header)));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| ReportError::Csv(e.to_string()))?;
        if rec.len() != 4 {
            return Err(ReportError::Csv(format!("expected 4 fields, got {}", rec.len())));
        }
        let marked = match &rec[3] {
            "1" => true,
            "0" => false,
            other => return Err(ReportError::Csv(format!("marked flag must be 0 or 1, got `{other}`"))),
        };
        out.push(CsvCell { row: rec[0].to_string(), column: rec[1].to_string(), value: rec[2].to_string(), marked });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(Layout::T4, "Sample", vec!["AU".into(), "DK".into()]);
        t.push("GHG", vec![Some(Cell::number(-0.0134, Format::Percent(1))), Some(Cell::number(0.1 + 0.2, Format::Percent(1)).marked(true))]);
        t.push("Label, quoted", vec![None, Some(Cell::text("YES"))]);
        t
    }

    #[test]
    fn text_is_aligned_and_marked() {
        let text = sample().render_text("*");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Sample");
        assert!(lines[2].ends_with("AU      DK"), "{:?}", lines[2]);
        assert!(lines[3].ends_with("-1.3%  30.0%*"), "{:?}", lines[3]);
        assert!(sample().render_text("(b)").contains("30.0%(b)"));
    }

    #[test]
    fn csv_round_trip() {
        let t = sample();
        let cells = read_table_csv(t.to_csv().as_bytes()).unwrap();
        assert_eq!(cells.len(), 3);
        assert_eq!(cells[1].number().unwrap(), 0.1 + 0.2);
        assert!(cells[1].marked);
        assert_eq!(cells[2].row, "Label, quoted");
        assert_eq!(cells[2].value, "YES");
    }

    #[test]
    fn layout_names() {
        assert_eq!(Layout::T3.to_string(), "T3");
        assert_eq!(Layout::T7.file_stem(), "table_7");
        assert_eq!("t5".parse::<Layout>().unwrap(), Layout::T5);
    }

    #[test]
    fn rounding_conventions() {
        assert_eq!(Format::Integer.render(63759.6), "63760");
        assert_eq!(Format::Percent(0).render(0.346), "35%");
        assert_eq!(Format::Fixed(3).render(-16.7249), "-16.725");
    }
}
