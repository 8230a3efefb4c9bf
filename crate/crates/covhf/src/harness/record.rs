//! Result records and their JSON/CSV persistence.
//!
//! CSV schema (`covhf-csv-1`), one file per record:
//!
//! ```text
//! # schema,covhf-csv-1
//! kind,rep,n_scale,seed,<rep value keys...>,<summary keys...>
//! rep,0,500,12345,...,          <- one row per replication
//! summary,,,,,...               <- one trailing summary row
//! ```
//!
//! Replication rows fill the rep columns and leave the summary columns
//! empty; the summary row does the opposite. All numeric fields carry 17
//! significant digits, so parsing them back reproduces the f64 bits.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, HarnessError};

pub const RECORD_SCHEMA_VERSION: &str = "covhf-record-1";
pub const CSV_SCHEMA_VERSION: &str = "covhf-csv-1";

/// Outcome of one replication. Failed replications carry a diagnostic and
/// an empty value map; they count into `ResultRecord::failures`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: u64,
    pub n_scale: u64,
    pub seed: u64,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One named threshold evaluated by the experiment in self-test mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: String,
    pub experiment: String,
    pub scenario_hash: String,
    pub config: ExperimentConfig,
    pub replications: Vec<RepOutcome>,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub failures: usize,
    pub wall_clock_secs: f64,
}

impl ResultRecord {
    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Writes `<experiment>.json` and/or `<experiment>.csv` into `dir`;
    /// returns the written paths.
    pub fn export(&self, dir: &Path, json: bool, csv: bool) -> Result<Vec<PathBuf>, HarnessError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if json {
            let path = dir.join(format!("{}.json", self.experiment));
            fs::write(&path, self.to_json()?)?;
            written.push(path);
        }
        if csv {
            let path = dir.join(format!("{}.csv", self.experiment));
            self.write_csv(&path)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut rep_keys: Vec<&str> = Vec::new();
        for rep in &self.replications {
            for key in rep.values.keys() {
                if !rep_keys.contains(&key.as_str()) {
                    rep_keys.push(key);
                }
            }
        }
        rep_keys.sort_unstable();
        let summary_keys: Vec<&str> = self.summary.keys().map(String::as_str).collect();

        let file = fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# schema,{CSV_SCHEMA_VERSION}")?;
        write!(w, "kind,rep,n_scale,seed")?;
        for key in &rep_keys {
            write!(w, ",{key}")?;
        }
        for key in &summary_keys {
            write!(w, ",summary:{key}")?;
        }
        writeln!(w)?;

        for rep in &self.replications {
            write!(w, "rep,{},{},{}", rep.rep, rep.n_scale, rep.seed)?;
            for key in &rep_keys {
                match rep.values.get(*key) {
                    Some(v) => write!(w, ",{v:.16e}")?,
                    None => write!(w, ",")?,
                }
            }
            for _ in &summary_keys {
                write!(w, ",")?;
            }
            writeln!(w)?;
        }
        if !self.replications.is_empty() {
            write!(w, "summary,,,")?;
            for _ in &rep_keys {
                write!(w, ",")?;
            }
            for key in &summary_keys {
                write!(w, ",{:.16e}", self.summary[*key])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// FNV-1a hash of the reproducibility-relevant configuration, rendered as
/// hex. Deterministic across processes and platforms.
pub(super) fn scenario_hash(config: &ExperimentConfig) -> String {
    let payload = serde_json::json!({
        "experiment": config.experiment,
        "scenario": config.scenario,
        "estimator": config.estimator,
        "replications": config.replications,
        "n_grid": config.n_grid,
        "kn_grid": config.kn_grid,
        "master_seed": config.master_seed,
    });
    let text = payload.to_string();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny_config;
    use super::super::{run, ExperimentKind};
    use super::*;

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("covhf_record_{tag}"));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn json_round_trip_reproduces_summary_exactly() {
        let record = run(&tiny_config(ExperimentKind::CltCoverage)).unwrap();
        let dir = temp_dir("json");
        let written = record.export(&dir, true, false).unwrap();
        let back = ResultRecord::from_json_file(&written[0]).unwrap();
        assert_eq!(back.summary, record.summary);
        assert_eq!(back.replications, record.replications);
        let recomputed = super::super::recompute_summary(&back);
        for (key, value) in &record.summary {
            let diff = (recomputed[key] - value).abs();
            assert!(diff <= 1e-12 * value.abs().max(1.0), "{key}: {diff}");
        }
    }

    #[test]
    fn csv_carries_full_precision() {
        let record = run(&tiny_config(ExperimentKind::SingleRun)).unwrap();
        let dir = temp_dir("csv");
        let path = dir.join("single_run.csv");
        record.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# schema,{CSV_SCHEMA_VERSION}"));
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let rep_line: Vec<&str> = lines.next().unwrap().split(',').collect();
        let estimate_col = header.iter().position(|h| *h == "estimate").unwrap();
        let parsed: f64 = rep_line[estimate_col].parse().unwrap();
        let original = record.replications[0].values["estimate"];
        assert_eq!(parsed.to_bits(), original.to_bits());
    }

    #[test]
    fn empty_replication_set_writes_header_only() {
        let record = ResultRecord {
            schema_version: RECORD_SCHEMA_VERSION.to_string(),
            experiment: "single_run".into(),
            scenario_hash: "0".into(),
            config: tiny_config(ExperimentKind::SingleRun),
            replications: vec![],
            summary: BTreeMap::new(),
            checks: vec![],
            failures: 0,
            wall_clock_secs: 0.0,
        };
        let dir = temp_dir("empty");
        let path = dir.join("empty.csv");
        record.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2); // schema comment + header, no data rows
        assert!(lines[1].starts_with("kind,rep,n_scale,seed"));
    }

    #[test]
    fn scenario_hash_is_stable_and_sensitive() {
        let config = tiny_config(ExperimentKind::Consistency);
        let h1 = scenario_hash(&config);
        let h2 = scenario_hash(&config);
        assert_eq!(h1, h2);
        let mut other = config.clone();
        other.master_seed += 1;
        assert_ne!(h1, scenario_hash(&other));
    }
}
