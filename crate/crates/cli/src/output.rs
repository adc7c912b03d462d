//! JSONL and annotated CSV result files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Input,
    Exact,
    Empirical,
    Derived,
    Check,
}

impl Provenance {
    fn label(self) -> &'static str {
        match self {
            Provenance::Input => "input",
            Provenance::Exact => "exact",
            Provenance::Empirical => "empirical",
            Provenance::Derived => "derived",
            Provenance::Check => "assertion",
        }
    }
}

/// One CSV column with its unit and provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
    pub provenance: Provenance,
}

pub const fn col(name: &'static str, unit: &'static str, provenance: Provenance) -> Column {
    Column { name, unit, provenance }
}

/// The rows of one run and whether every assertion held.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub columns: &'static [Column],
    pub rows: Vec<Map<String, Value>>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.get("pass").and_then(Value::as_bool).unwrap_or(true))
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.get("pass").and_then(Value::as_bool) == Some(false)).count()
    }
}

/// Hex SHA-256 of the manifest's canonical compact JSON.
pub fn manifest_digest(manifest: &Manifest) -> String {
    let bytes = serde_json::to_vec(manifest).expect("manifest serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One JSON object per row, each tagged with the experiment and manifest digest.
pub fn jsonl(outcome: &Outcome, experiment: &str, digest: &str) -> String {
    let mut out = String::new();
    for (i, row) in outcome.rows.iter().enumerate() {
        let mut rec = Map::new();
        rec.insert("experiment".into(), Value::from(experiment));
        rec.insert("manifest_sha256".into(), Value::from(digest));
        rec.insert("row".into(), Value::from(i));
        rec.extend(row.clone());
        out.push_str(&serde_json::to_string(&rec).expect("row serializes"));
        out.push('\n');
    }
    out
}

fn csv_cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

/// CSV preceded by `#` lines documenting each column.
pub fn annotated_csv(outcome: &Outcome, digest: &str) -> Result<String, csv::Error> {
    let mut head = format!("# manifest_sha256: {digest}\n");
    for c in outcome.columns {
        head.push_str(&format!("# {}: {} ({})\n", c.name, c.unit, c.provenance.label()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(outcome.columns.iter().map(|c| c.name))?;
    for row in &outcome.rows {
        w.write_record(outcome.columns.iter().map(|c| csv_cell(row.get(c.name))))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8");
    Ok(head + &body)
}

pub struct Written {
    pub jsonl: PathBuf,
    pub csv: PathBuf,
}

pub fn write(dir: &Path, stem: &str, outcome: &Outcome, experiment: &str, digest: &str) -> Result<Written, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let jsonl_path = dir.join(format!("{stem}.jsonl"));
    let csv_path = dir.join(format!("{stem}.csv"));
    let csv_text = annotated_csv(outcome, digest)
        .map_err(|e| CliError::Io { path: csv_path.clone(), source: std::io::Error::other(e) })?;
    let mut f = fs::File::create(&jsonl_path).map_err(io(&jsonl_path))?;
    f.write_all(jsonl(outcome, experiment, digest).as_bytes()).map_err(io(&jsonl_path))?;
    fs::write(&csv_path, csv_text).map_err(io(&csv_path))?;
    Ok(Written { jsonl: jsonl_path, csv: csv_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    const COLUMNS: &[Column] = &[
        col("n", "level", Provenance::Input),
        col("value", "probability", Provenance::Exact),
        col("pass", "bool", Provenance::Check),
    ];

    fn outcome(pass: bool) -> Outcome {
        let row = |n: u64, v: Value| json!({"n": n, "value": v, "pass": pass}).as_object().unwrap().clone();
        Outcome { columns: COLUMNS, rows: vec![row(1, json!(0.5)), row(2, json!("1/3"))] }
    }

    #[test]
    fn csv_is_annotated() {
        let text = annotated_csv(&outcome(true), "abc").unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# manifest_sha256: abc");
        assert_eq!(lines[2], "# value: probability (exact)");
        assert_eq!(lines[4], "n,value,pass");
        assert_eq!(lines[5], "1,0.5,true");
        assert_eq!(lines[6], "2,1/3,true");
    }

    #[test]
    fn jsonl_tags_rows() {
        let text = jsonl(&outcome(false), "sn", "abc");
        let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["experiment"], "sn");
        assert_eq!(first["row"], 0);
        assert!(!outcome(false).passed());
        assert_eq!(outcome(false).failures(), 2);
    }
}
