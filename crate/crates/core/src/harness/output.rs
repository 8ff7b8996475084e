//! Result files: the slot-level CSV, a JSON summary and optional trajectories.
//!
//! Floats are written with 17 significant digits so they read back exactly.
//! `relay` and `chosen_relay` are 1-based in files, `trial` is 0-based.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::controller::Policy;
use crate::error::{Error, Result};
use crate::geometry::Point;

use super::config::ExperimentConfig;
use super::experiment::{ExperimentResult, PolicyAggregate, TrialFailure};
use super::jensen::JensenCheck;
use super::trial::SlotRecord;

pub const CSV_HEADER: [&str; 12] = [
    "trial",
    "slot",
    "policy",
    "relay",
    "x",
    "y",
    "value_V",
    "relay_power",
    "sinr",
    "feasible",
    "chosen_relay",
    "best_E",
];

/// The part of a [`SlotRecord`] stored in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub trial: usize,
    pub slot: usize,
    pub policy: Policy,
    pub positions: Vec<Point>,
    pub value_v: f64,
    pub relay_power: f64,
    pub sinr: f64,
    pub feasible: bool,
    /// 0-based.
    pub chosen_relay: usize,
    pub best_e: f64,
}

impl From<&SlotRecord> for CsvRecord {
    fn from(r: &SlotRecord) -> Self {
        CsvRecord {
            trial: r.trial,
            slot: r.slot,
            policy: r.policy,
            positions: r.positions.clone(),
            value_v: r.value_v,
            relay_power: r.relay_power,
            sinr: r.achieved_sinr,
            feasible: r.feasible,
            chosen_relay: r.chosen_relay,
            best_e: r.best_e,
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Writes one row per relay per record.
pub fn write_csv<W: Write>(out: W, records: &[CsvRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        for (i, p) in r.positions.iter().enumerate() {
            w.write_record([
                r.trial.to_string(),
                r.slot.to_string(),
                r.policy.to_string(),
                (i + 1).to_string(),
                num(p.x),
                num(p.y),
                num(r.value_v),
                num(r.relay_power),
                num(r.sinr),
                r.feasible.to_string(),
                (r.chosen_relay + 1).to_string(),
                num(r.best_e),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T> {
    let s = row.get(i).unwrap_or("");
    s.parse()
        .map_err(|_| Error::Config(format!("csv: bad `{}` value `{s}`", CSV_HEADER[i])))
}

/// Reads a slot CSV back, regrouping consecutive rows of one record.
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<CsvRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config("csv: unexpected header".into()));
    }
    let mut out: Vec<CsvRecord> = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let trial: usize = field(&row, 0)?;
        let slot: usize = field(&row, 1)?;
        let policy: Policy = field::<String>(&row, 2)?.parse()?;
        let relay: usize = field(&row, 3)?;
        let p = Point::new(field(&row, 4)?, field(&row, 5)?);
        let same = out
            .last()
            .is_some_and(|r| r.trial == trial && r.slot == slot && r.policy == policy);
        if same && relay == out.last().map_or(0, |r| r.positions.len()) + 1 {
            out.last_mut().expect("checked").positions.push(p);
            continue;
        }
        if relay != 1 {
            return Err(Error::Config(format!("csv: relay {relay} out of order")));
        }
        out.push(CsvRecord {
            trial,
            slot,
            policy,
            positions: vec![p],
            value_v: field(&row, 6)?,
            relay_power: field(&row, 7)?,
            sinr: field(&row, 8)?,
            feasible: field(&row, 9)?,
            chosen_relay: field::<usize>(&row, 10)?
                .checked_sub(1)
                .ok_or_else(|| Error::Config("csv: chosen_relay is 1-based".into()))?,
            best_e: field(&row, 11)?,
        });
    }
    Ok(out)
}

pub fn write_trajectories<W: Write>(out: W, records: &[SlotRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "policy", "slot", "relay", "x", "y", "target_x", "target_y", "vx", "vy"])
        .map_err(csv_err)?;
    for r in records {
        for i in 0..r.positions.len() {
            let (p, t, v) = (r.positions[i], r.targets[i], r.velocities[i]);
            w.write_record([
                r.trial.to_string(),
                r.policy.to_string(),
                r.slot.to_string(),
                (i + 1).to_string(),
                num(p.x),
                num(p.y),
                num(t.x),
                num(t.y),
                num(v.x),
                num(v.y),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))
}

#[derive(Serialize)]
struct JensenEntry<'a> {
    policy: Policy,
    #[serde(flatten)]
    check: &'a JensenCheck,
    passed: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    records: usize,
    aggregates: &'a [PolicyAggregate],
    failures: &'a [TrialFailure],
    jensen: Vec<JensenEntry<'a>>,
}

pub fn summary_json(result: &ExperimentResult, config: &ExperimentConfig) -> String {
    let summary = Summary {
        config,
        records: result.records.len(),
        aggregates: &result.aggregates,
        failures: &result.failures,
        jensen: result
            .jensen_checks()
            .map(|(policy, check)| JensenEntry {
                policy,
                check,
                passed: check.passed(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&summary).expect("summary serializes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub slots_csv: PathBuf,
    pub summary_json: PathBuf,
    pub trajectories_csv: Option<PathBuf>,
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| io_err(path, e))
}

/// Writes `slots.csv`, `summary.json` and, if enabled, `trajectories.csv`
/// into `dir`, creating it when missing.
pub fn write_outputs(result: &ExperimentResult, config: &ExperimentConfig, dir: &Path) -> Result<OutputPaths> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let slots_csv = dir.join("slots.csv");
    let rows: Vec<CsvRecord> = result.records.iter().map(CsvRecord::from).collect();
    write_csv(create(&slots_csv)?, &rows).map_err(|e| io_err(&slots_csv, e))?;

    let summary_path = dir.join("summary.json");
    create(&summary_path)?
        .write_all(summary_json(result, config).as_bytes())
        .map_err(|e| io_err(&summary_path, e))?;

    let trajectories_csv = if config.trajectories {
        let path = dir.join("trajectories.csv");
        write_trajectories(create(&path)?, &result.records).map_err(|e| io_err(&path, e))?;
        Some(path)
    } else {
        None
    };
    Ok(OutputPaths {
        slots_csv,
        summary_json: summary_path,
        trajectories_csv,
    })
}
