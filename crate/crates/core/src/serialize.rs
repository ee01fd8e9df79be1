//! Deterministic text serialization shared by every result type.
//!
//! Object keys are emitted in sorted order (serde_json's default map is a
//! `BTreeMap`) and floats use the shortest round-tripping representation, so
//! equal values always produce byte-identical text.

use nalgebra::DMatrix;
use serde::Serialize;

pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("result types serialize to JSON");
    let mut s = serde_json::to_string_pretty(&v).expect("JSON values render");
    s.push('\n');
    s
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
