//! CSV, JSON and JSON-lines emitters. Floats are written with 17 significant
//! digits so that outputs round-trip exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::cantor::{fmt_rational, CantorBox, Certificate};
use crate::error::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `{lemma, params, value, bound, pass}`, plus whatever structured detail the
/// check produced. `bound` is absent for purely descriptive runs.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub params: BTreeMap<String, String>,
    pub value: f64,
    pub bound: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl LemmaReport {
    pub fn new(
        lemma: &str,
        params: &BTreeMap<String, String>,
        value: f64,
        bound: Option<f64>,
        pass: bool,
    ) -> Self {
        Self {
            lemma: lemma.to_string(),
            params: params.clone(),
            value,
            bound,
            pass,
            details: Value::Null,
        }
    }

    pub fn with_details<T: Serialize>(mut self, details: &T) -> Self {
        self.details = serde_json::to_value(details).expect("serializable");
        self
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// A CSV file whose rows are prefixed by the run parameters.
pub struct CsvTable {
    params: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(params: &BTreeMap<String, String>, columns: &[&str]) -> Self {
        Self {
            params: params.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            header: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let header = self
            .params
            .iter()
            .map(|(k, _)| k.as_str())
            .chain(self.header.iter().map(|s| s.as_str()));
        w.write_record(header).map_err(csv_err)?;
        for row in &self.rows {
            let rec = self
                .params
                .iter()
                .map(|(_, v)| v.as_str())
                .chain(row.iter().map(|s| s.as_str()));
            w.write_record(rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// `{depth, corner: ["num/den", ...], side: "num/den", certificate?}`.
pub fn box_record(depth: usize, b: &CantorBox, certificate: Option<&Certificate>) -> Value {
    let mut v = json!({
        "depth": depth,
        "corner": b.corner.iter().map(fmt_rational).collect::<Vec<_>>(),
        "side": fmt_rational(&b.side),
    });
    if let Some(c) = certificate {
        v["certificate"] = serde_json::to_value(c).expect("serializable");
    }
    v
}

pub fn write_jsonl(path: &Path, records: &[Value]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::ratio;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, 12345.678] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_carries_params() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let params = BTreeMap::from([("p".to_string(), "5".to_string())]);
        let mut t = CsvTable::new(&params, &["a", "value"]);
        t.push(vec!["(1,2)".into(), fmt_f64(0.5)]);
        t.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "p,a,value\n5,\"(1,2)\",5.0000000000000000e-1\n");
    }

    #[test]
    fn box_records() {
        let b = CantorBox {
            corner: vec![ratio(1, 4), ratio(0, 1)],
            side: ratio(1, 8),
        };
        let v = box_record(2, &b, None);
        assert_eq!(
            v.to_string(),
            r#"{"corner":["1/4","0/1"],"depth":2,"side":"1/8"}"#
        );
    }
}
