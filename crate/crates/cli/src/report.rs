use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

/// Flat summary of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub experiment: String,
    pub input_digest: String,
    pub seed: u64,
    pub pass: bool,
    pub records: BTreeMap<String, Value>,
    /// Messages for thresholds that were missed.
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn new(config: &RunConfig, seed: u64) -> Self {
        RunReport {
            experiment: config.experiment.name().to_string(),
            input_digest: input_digest(config, seed),
            seed,
            pass: true,
            records: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    pub fn record(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.records.insert(key.into(), value.into());
    }

    pub fn record_opt(&mut self, key: impl Into<String>, value: Option<f64>) {
        self.records.insert(key.into(), value.map_or(Value::Null, Value::from));
    }

    /// Records a threshold check; a failed check fails the run.
    pub fn check(&mut self, key: &str, ok: bool, message: String) {
        self.records.insert(format!("check.{key}"), Value::Bool(ok));
        if !ok {
            self.pass = false;
            self.failures.push(message);
        }
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in &self.records {
            m.insert(k.clone(), v.clone());
        }
        m.insert("experiment".into(), self.experiment.clone().into());
        m.insert("input_digest".into(), self.input_digest.clone().into());
        m.insert("seed".into(), self.seed.into());
        m.insert("pass".into(), self.pass.into());
        m.insert("failures".into(), self.failures.join("; ").into());
        Value::Object(m)
    }
}

/// SHA-256 over the canonical configuration text and the seed.
pub fn input_digest(config: &RunConfig, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(config.to_toml_string().as_bytes());
    h.update(b"\nseed = ");
    h.update(seed.to_string().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// A report and the CSV tables produced alongside it.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        let mut json = serde_json::to_vec_pretty(&self.report.to_json()).map_err(std::io::Error::other)?;
        json.push(b'\n');
        fs::write(dir.join("report.json"), json)?;
        Ok(())
    }
}

/// CSV table built from displayable cells.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table { writer }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.writer.write_record(cells).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}
