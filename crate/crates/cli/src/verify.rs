//! `verify`: re-checks an output directory against its manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::artifacts::{
    sha256_hex, RoundRow, RunManifest, METRICS_COLUMNS, METRICS_CSV, ROUNDS_COLUMNS, ROUNDS_CSV,
};
use crate::sweep::{SWEEP_COLUMNS, SWEEP_CSV};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, failures: Vec<String>, ok_detail: String) -> Self {
        let passed = failures.is_empty();
        let detail = if passed {
            ok_detail
        } else {
            let more = failures.len().saturating_sub(3);
            let mut d = failures.into_iter().take(3).collect::<Vec<_>>().join("; ");
            if more > 0 {
                d.push_str(&format!("; and {more} more"));
            }
            d
        };
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn read_csv(dir: &Path, name: &str, expected: &[&str]) -> Result<Vec<csv::StringRecord>, CliError> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(CliError::io(&path))?;
    let corrupt = |message: String| CliError::Corrupt {
        path: path.clone(),
        message,
    };
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header = r.headers().map_err(|e| corrupt(e.to_string()))?.clone();
    let header: Vec<&str> = header.iter().collect();
    if header != expected {
        return Err(corrupt(format!("header {header:?} does not match schema {expected:?}")));
    }
    r.records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| corrupt(e.to_string()))
}

fn parse_rows(dir: &Path, records: &[csv::StringRecord], header: &[&str]) -> Result<Vec<RoundRow>, CliError> {
    let header = csv::StringRecord::from(header.to_vec());
    records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            rec.deserialize(Some(&header)).map_err(|e| CliError::Corrupt {
                path: dir.join(ROUNDS_CSV),
                message: format!("row {}: {e}", i + 1),
            })
        })
        .collect()
}

/// Recomputes the invariant suite over an output directory.
///
/// Hash mismatches are reported as a failed check; a file that cannot be
/// read or parsed against its schema is an error.
pub fn verify(dir: &Path) -> Result<VerifyReport, CliError> {
    let manifest = RunManifest::read(dir)?;
    let mut checks = Vec::new();

    let mut hash_failures = Vec::new();
    for f in &manifest.files {
        let path = dir.join(&f.name);
        match fs::read(&path) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 && bytes.len() as u64 == f.bytes => {}
            Ok(_) => hash_failures.push(format!("{} does not match its recorded hash", f.name)),
            Err(_) => hash_failures.push(format!("{} is missing", f.name)),
        }
    }
    checks.push(Check::new("hashes", hash_failures, format!("{} files match", manifest.files.len())));

    let cfg = &manifest.config;
    let bound = cfg.base_reward + cfg.committee_size as f64 * cfg.committee_bonus;
    let r_max = |t: u32| {
        if t <= cfg.r_max_switch_round {
            cfg.r_max_early
        } else {
            cfg.r_max_late
        }
    };

    match manifest.subcommand.as_str() {
        "simulate" => {
            let records = read_csv(dir, ROUNDS_CSV, &ROUNDS_COLUMNS)?;
            let rows = parse_rows(dir, &records, &ROUNDS_COLUMNS)?;
            read_csv(dir, METRICS_CSV, &METRICS_COLUMNS)?;

            let mut per_round: BTreeMap<u32, f64> = BTreeMap::new();
            for r in &rows {
                *per_round.entry(r.round).or_default() += r.reward;
            }
            let conservation = per_round
                .iter()
                .filter(|(_, &total)| total > bound)
                .map(|(t, total)| format!("round {t}: total reward {total} exceeds {bound}"))
                .collect();
            checks.push(Check::new(
                "conservation",
                conservation,
                format!("{} rounds within {bound}", per_round.len()),
            ));

            let caps = rows
                .iter()
                .filter(|r| !(0.0..=r_max(r.round)).contains(&r.reputation))
                .map(|r| format!("round {} node {}: reputation {}", r.round, r.node_id, r.reputation))
                .collect();
            checks.push(Check::new("reputation_caps", caps, format!("{} rows within caps", rows.len())));

            let zero = rows
                .iter()
                .filter(|r| r.contribution == 0.0 && r.reward != 0.0)
                .map(|r| format!("round {} node {}: zero contribution paid {}", r.round, r.node_id, r.reward))
                .collect();
            checks.push(Check::new("zero_override", zero, "zero contributors paid nothing".into()));
        }
        "sweep" => {
            let keys: Vec<&str> = manifest.grid.iter().map(|(k, _)| k.as_str()).collect();
            let header: Vec<&str> = keys.iter().copied().chain(SWEEP_COLUMNS).collect();
            let records = read_csv(dir, SWEEP_CSV, &header)?;
            let col = header.iter().position(|&c| c == "total_reward").expect("schema column");
            let mut failures = Vec::new();
            for (i, rec) in records.iter().enumerate() {
                let total: f64 = rec[col].parse().map_err(|_| CliError::Corrupt {
                    path: dir.join(SWEEP_CSV),
                    message: format!("row {}: total_reward {:?} is not a number", i + 1, &rec[col]),
                })?;
                // A grid axis may move the pool or committee, so the bound
                // is rebuilt from the row's own grid values.
                let mut pool = (cfg.base_reward, cfg.committee_size as f64, cfg.committee_bonus);
                for (j, key) in keys.iter().enumerate() {
                    let slot = match *key {
                        "base_reward" => &mut pool.0,
                        "committee_size" => &mut pool.1,
                        "committee_bonus" => &mut pool.2,
                        _ => continue,
                    };
                    *slot = rec[j].parse().unwrap_or(f64::NAN);
                }
                let row_bound = pool.0 + pool.1 * pool.2;
                if !(total <= row_bound) {
                    failures.push(format!("row {}: total reward {total} exceeds {row_bound}", i + 1));
                }
            }
            checks.push(Check::new("conservation", failures, format!("{} rows checked", records.len())));
        }
        other => {
            return Err(CliError::Corrupt {
                path: dir.join(crate::artifacts::MANIFEST_JSON),
                message: format!("unknown subcommand {other:?}"),
            })
        }
    }
    Ok(VerifyReport { checks })
}
