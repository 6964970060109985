//! Append-only experiment logs: line-delimited JSON, one record per line.
//!
//! Every record carries the run id; step indices are non-decreasing within a
//! phase. `wall_clock_ms` is the only field excluded from the determinism
//! contract (reruns with the same config and seeds reproduce every other
//! field exactly).

use crate::error::{FipError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const RUNLOG_FILE: &str = "runlog.jsonl";

/// One log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub phase: String,
    pub step: u64,
    pub event: String,
    /// Named scalars; a BTreeMap keeps serialization order stable.
    pub values: BTreeMap<String, f64>,
    pub wall_clock_ms: f64,
}

impl RunRecord {
    /// Everything the determinism contract covers (drops wall clock).
    pub fn comparable(&self) -> (&str, &str, u64, &str, &BTreeMap<String, f64>) {
        (
            &self.run_id,
            &self.phase,
            self.step,
            &self.event,
            &self.values,
        )
    }
}

/// In-memory record list plus an optional line-delimited JSON writer.
pub struct RunLog {
    run_id: String,
    records: Vec<RunRecord>,
    writer: Option<BufWriter<File>>,
    last_step: BTreeMap<String, u64>,
    started: Instant,
    path: Option<PathBuf>,
}

impl RunLog {
    pub fn in_memory(run_id: impl Into<String>) -> Self {
        RunLog {
            run_id: run_id.into(),
            records: Vec::new(),
            writer: None,
            last_step: BTreeMap::new(),
            started: Instant::now(),
            path: None,
        }
    }

    /// Creates (or appends to) `<dir>/runlog.jsonl`.
    pub fn create(dir: &Path, run_id: impl Into<String>) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(RUNLOG_FILE);
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(RunLog {
            run_id: run_id.into(),
            records: Vec::new(),
            writer: Some(BufWriter::new(file)),
            last_step: BTreeMap::new(),
            started: Instant::now(),
            path: Some(path),
        })
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn append(
        &mut self,
        phase: &str,
        step: u64,
        event: &str,
        values: BTreeMap<String, f64>,
    ) -> Result<&RunRecord> {
        if let Some(&prev) = self.last_step.get(phase) {
            if step < prev {
                return Err(FipError::NonMonotoneStep {
                    phase: phase.to_string(),
                    prev,
                    got: step,
                });
            }
        }
        self.last_step.insert(phase.to_string(), step);
        let record = RunRecord {
            run_id: self.run_id.clone(),
            phase: phase.to_string(),
            step,
            event: event.to_string(),
            values,
            wall_clock_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        if let Some(w) = &mut self.writer {
            serde_json::to_writer(&mut *w, &record)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.records.push(record);
        Ok(self.records.last().unwrap())
    }

    /// Most recent value of `key` among records matching `phase` and `event`.
    pub fn last_value(&self, phase: &str, event: &str, key: &str) -> Option<f64> {
        self.records
            .iter()
            .rev()
            .find(|r| r.phase == phase && r.event == event && r.values.contains_key(key))
            .and_then(|r| r.values.get(key).copied())
    }
}

/// Reads every record of a line-delimited log file.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Builds a values map from literal pairs.
pub fn values_of(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_and_reload_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = RunLog::create(dir.path(), "run-1").unwrap();
        log.append("train", 0, "epoch", values_of(&[("loss", 0.9)]))
            .unwrap();
        log.append("train", 1, "epoch", values_of(&[("loss", 0.5)]))
            .unwrap();
        let records = load_records(&dir.path().join(RUNLOG_FILE)).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].values["loss"], 0.5);
        assert!(records.iter().all(|r| r.run_id == "run-1"));
    }

    #[test]
    fn step_indices_must_be_monotone_within_a_phase() {
        let mut log = RunLog::in_memory("r");
        log.append("a", 5, "e", BTreeMap::new()).unwrap();
        assert!(matches!(
            log.append("a", 4, "e", BTreeMap::new()),
            Err(FipError::NonMonotoneStep { .. })
        ));
        // a different phase starts fresh
        log.append("b", 0, "e", BTreeMap::new()).unwrap();
    }

    #[test]
    fn comparable_view_excludes_wall_clock() {
        let mut a = RunLog::in_memory("r");
        let mut b = RunLog::in_memory("r");
        a.append("p", 0, "e", values_of(&[("x", 1.0)])).unwrap();
        std::thread::sleep(std::time::Duration::from_millis(2));
        b.append("p", 0, "e", values_of(&[("x", 1.0)])).unwrap();
        assert_eq!(a.records()[0].comparable(), b.records()[0].comparable());
    }
}
