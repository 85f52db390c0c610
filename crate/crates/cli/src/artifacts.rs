//! Output files of `simulate` and the run manifest.

use std::fs;
use std::path::Path;

use fedrep::engine::SimulationResult;
use fedrep::{run_simulation, SystemConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{load_config, write_file, CliError};

/// Bumped whenever a column or manifest field changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const ROUNDS_CSV: &str = "rounds.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const MANIFEST_JSON: &str = "manifest.json";

pub const ROUNDS_COLUMNS: [&str; 11] = [
    "round",
    "node_id",
    "role",
    "contribution",
    "tau",
    "quality",
    "reputation",
    "penalty",
    "reward",
    "committee",
    "detected",
];

pub const METRICS_COLUMNS: [&str; 8] = [
    "round",
    "jain",
    "gini",
    "detected_count",
    "honest_mean_rep",
    "malicious_mean_rep",
    "honest_mean_reward",
    "malicious_mean_reward",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: u32,
    pub node_id: usize,
    pub role: String,
    pub contribution: f64,
    pub tau: f64,
    pub quality: f64,
    pub reputation: f64,
    pub penalty: f64,
    pub reward: f64,
    pub committee: bool,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: u32,
    pub jain: f64,
    pub gini: f64,
    pub detected_count: usize,
    pub honest_mean_rep: f64,
    pub malicious_mean_rep: f64,
    pub honest_mean_reward: f64,
    pub malicious_mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileEntry {
    pub fn for_bytes(name: &str, bytes: &[u8]) -> Self {
        Self {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub subcommand: String,
    pub config_path: Option<String>,
    pub seeds: Vec<u64>,
    pub out_dir: String,
    pub config: SystemConfig,
    /// Grid axes of a sweep, in column order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<(String, Vec<String>)>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_JSON);
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt {
            path,
            message: e.to_string(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        write_file(dir, MANIFEST_JSON, text.as_bytes()).map(|_| ())
    }
}

pub(crate) fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("rows serialise to CSV");
    }
    w.into_inner().expect("in-memory writer")
}

pub fn round_rows(result: &SimulationResult) -> impl Iterator<Item = RoundRow> + '_ {
    result.records.iter().flat_map(|rec| {
        rec.rows.iter().map(move |r| RoundRow {
            round: rec.round,
            node_id: r.node_id,
            role: r.role.as_str().to_string(),
            contribution: r.contribution,
            tau: r.tau,
            quality: r.quality,
            reputation: r.reputation,
            penalty: r.penalty,
            reward: r.reward,
            committee: r.committee,
            detected: r.detected,
        })
    })
}

pub fn metrics_rows(result: &SimulationResult) -> impl Iterator<Item = MetricsRow> + '_ {
    result.records.iter().map(|rec| {
        let m = &rec.metrics;
        MetricsRow {
            round: rec.round,
            jain: m.jain,
            gini: m.gini,
            detected_count: m.detected_count,
            honest_mean_rep: m.honest_mean_rep,
            malicious_mean_rep: m.malicious_mean_rep,
            honest_mean_reward: m.honest_mean_reward,
            malicious_mean_reward: m.malicious_mean_reward,
        }
    })
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Runs one simulation and writes its artifacts into `out`.
pub fn simulate(config_path: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<RunManifest, CliError> {
    let raw = load_config(config_path)?;
    let seed = seed.unwrap_or(raw.seed);
    let cfg = raw.validate().map_err(|source| CliError::Config {
        path: config_path.map_or("<defaults>".into(), |p| p.display().to_string()),
        source,
    })?;
    let result = run_simulation(&cfg, seed).map_err(|e| CliError::Failed(e.to_string()))?;

    create_dir(out)?;
    let mut summary = serde_json::to_string_pretty(&result.summary).expect("summary serialises");
    summary.push('\n');
    let files = vec![
        write_file(out, ROUNDS_CSV, &csv_bytes(round_rows(&result)))?,
        write_file(out, METRICS_CSV, &csv_bytes(metrics_rows(&result)))?,
        write_file(out, SUMMARY_JSON, summary.as_bytes())?,
    ];
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        subcommand: "simulate".into(),
        config_path: config_path.map(|p| p.display().to_string()),
        seeds: vec![seed],
        out_dir: out.display().to_string(),
        config: result.config.clone(),
        grid: Vec::new(),
        files,
    };
    manifest.write(out)?;
    Ok(manifest)
}
