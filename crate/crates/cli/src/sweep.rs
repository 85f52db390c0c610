//! Parameter sweeps over (grid point, seed).

use std::path::Path;

use fedrep::{run_simulation, SystemConfig};
use rayon::prelude::*;

use crate::artifacts::{create_dir, RunManifest, SCHEMA_VERSION};
use crate::{load_config, write_file, CliError};

pub const SWEEP_CSV: &str = "sweep.csv";

/// Columns after the grid keys.
pub const SWEEP_COLUMNS: [&str; 11] = [
    "seed",
    "round",
    "jain",
    "gini",
    "detected_count",
    "honest_mean_rep",
    "malicious_mean_rep",
    "honest_mean_reward",
    "malicious_mean_reward",
    "total_reward",
    "honest_malicious_ratio",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// Parses `key=v1,v2,...`.
pub fn parse_grid(spec: &str) -> Result<GridAxis, CliError> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("grid entry {spec:?} is not of the form key=v1,v2")))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if key.trim().is_empty() || values.is_empty() {
        return Err(CliError::Usage(format!("grid entry {spec:?} needs a key and at least one value")));
    }
    Ok(GridAxis {
        key: key.trim().to_string(),
        values,
    })
}

fn as_table(cfg: &SystemConfig) -> toml::Table {
    match toml::Value::try_from(cfg).expect("config serialises to TOML") {
        toml::Value::Table(t) => t,
        _ => unreachable!("a struct serialises to a table"),
    }
}

/// Sets `key` to `value` on `base`, parsing the value as a TOML literal of
/// the field's type.
fn apply(base: &SystemConfig, assignments: &[(&str, &str)]) -> Result<SystemConfig, CliError> {
    let mut table = as_table(base);
    for &(key, value) in assignments {
        let current = table
            .get(key)
            .ok_or_else(|| CliError::Usage(format!("unknown grid key {key:?}")))?;
        let parsed: toml::Value = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let coerced = match (current, parsed) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (toml::Value::Table(_) | toml::Value::Array(_), _) => {
                return Err(CliError::Usage(format!("grid key {key:?} is not a scalar")))
            }
            (_, v) => v,
        };
        table.insert(key.to_string(), coerced);
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("grid values: {}", e.message())))
}

/// Optional fields only appear in the serialised table once set, so they are
/// listed here for key validation.
const OPTIONAL_KEYS: [&str; 1] = ["t_max"];

fn check_key(base: &SystemConfig, key: &str) -> Result<(), CliError> {
    let table = as_table(base);
    if table.contains_key(key) || OPTIONAL_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("unknown grid key {key:?}")))
    }
}

fn apply_point(base: &SystemConfig, axes: &[GridAxis], point: &[usize]) -> Result<SystemConfig, CliError> {
    let mut cfg = base.clone();
    for (axis, &i) in axes.iter().zip(point) {
        if OPTIONAL_KEYS.contains(&axis.key.as_str()) {
            let v: f64 = axis.values[i]
                .parse()
                .map_err(|_| CliError::Usage(format!("{}: {:?} is not a number", axis.key, axis.values[i])))?;
            cfg.t_max = Some(v);
        } else {
            cfg = apply(&cfg, &[(axis.key.as_str(), axis.values[i].as_str())])?;
        }
    }
    Ok(cfg)
}

/// Cartesian product of axis indices, last axis fastest.
fn points(axes: &[GridAxis]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..axis.values.len()).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or_else(String::new, |v| v.to_string())
}

/// Runs every (grid point, seed) pair and writes one long-format CSV.
///
/// All grid points are built and validated before any simulation starts.
pub fn sweep(config_path: Option<&Path>, axes: &[GridAxis], seeds: &[u64], out: &Path) -> Result<RunManifest, CliError> {
    let base = load_config(config_path)?;
    for (i, axis) in axes.iter().enumerate() {
        check_key(&base, &axis.key)?;
        if axes[..i].iter().any(|a| a.key == axis.key) {
            return Err(CliError::Usage(format!("grid key {:?} given twice", axis.key)));
        }
    }
    let seeds: Vec<u64> = if seeds.is_empty() { vec![base.seed] } else { seeds.to_vec() };

    let grid = points(axes);
    let mut jobs = Vec::new();
    for point in &grid {
        let cfg = apply_point(&base, axes, point)?;
        let label = axes
            .iter()
            .zip(point)
            .map(|(a, &i)| format!("{}={}", a.key, a.values[i]))
            .collect::<Vec<_>>()
            .join(" ");
        let cfg = cfg.validate().map_err(|source| CliError::Config {
            path: format!("grid point [{label}]"),
            source,
        })?;
        for &seed in &seeds {
            jobs.push((point.clone(), cfg.clone(), seed));
        }
    }

    let results = jobs
        .par_iter()
        .map(|(point, cfg, seed)| run_simulation(cfg, *seed).map(|r| (point, *seed, r)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Failed(e.to_string()))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = axes.iter().map(|a| a.key.as_str()).chain(SWEEP_COLUMNS).collect();
    w.write_record(&header).expect("in-memory write");
    for (point, seed, result) in &results {
        let ratio = fmt_ratio(result.summary.reward_ratio);
        for rec in &result.records {
            let m = &rec.metrics;
            let mut row: Vec<String> = axes.iter().zip(point.iter()).map(|(a, &i)| a.values[i].clone()).collect();
            row.extend([
                seed.to_string(),
                rec.round.to_string(),
                m.jain.to_string(),
                m.gini.to_string(),
                m.detected_count.to_string(),
                m.honest_mean_rep.to_string(),
                m.malicious_mean_rep.to_string(),
                m.honest_mean_reward.to_string(),
                m.malicious_mean_reward.to_string(),
                rec.total_reward.to_string(),
                ratio.clone(),
            ]);
            w.write_record(&row).expect("in-memory write");
        }
    }
    let bytes = w.into_inner().expect("in-memory writer");

    create_dir(out)?;
    let files = vec![write_file(out, SWEEP_CSV, &bytes)?];
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        subcommand: "sweep".into(),
        config_path: config_path.map(|p| p.display().to_string()),
        seeds,
        out_dir: out.display().to_string(),
        config: base,
        grid: axes.iter().map(|a| (a.key.clone(), a.values.clone())).collect(),
        files,
    };
    manifest.write(out)?;
    Ok(manifest)
}
