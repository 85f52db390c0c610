//! System configuration and validation.
//!
//! Every tunable of the mechanism lives in one flat [`SystemConfig`] so that
//! a config file has exactly one key per parameter. Field names are the
//! snake_case names used in config files; the README carries the full table.

use std::fmt;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behavior::PhaseSpec;

/// Flat parameter ledger for a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    // Population and economics.
    pub initial_stake: f64,
    pub initial_reputation: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Exponent applied to reputation when weighting committee draws.
    pub gamma: f64,
    pub r_max_early: f64,
    pub r_max_late: f64,
    /// Last round (inclusive) that uses `r_max_early`.
    pub r_max_switch_round: u32,
    pub epsilon: f64,
    pub cooldown_period: u32,
    pub strata: usize,
    pub committee_bonus: f64,
    pub base_decay: f64,
    pub decay_compensation: f64,
    pub history_window: usize,
    pub default_stability: f64,
    pub contribution_bonus: f64,
    pub stability_bonus: f64,
    pub penalty_reputation: f64,
    pub penalty_stake: f64,
    pub history_decay: f64,
    pub base_reward: f64,
    pub participants: usize,
    pub stake_weight: f64,
    pub committee_size: usize,
    pub malicious_percent: f64,
    pub eta_switch: u32,
    pub rounds: u32,

    // Reward shaping and contract economics.
    pub f_scale: f64,
    pub effort_cost: f64,
    /// Maximum waiting time; `None` means every submission is on time.
    pub t_max: Option<f64>,
    pub timeout_weight: f64,
    pub malicious_weight: f64,
    pub severe_cutoff: f64,
    pub contract_accounting: bool,

    // Detection thresholds.
    pub theta_low: f64,
    pub theta_fluct: f64,
    pub theta_jump: f64,
    pub eps_std: f64,

    // Behaviour generation.
    pub normal_mean: f64,
    pub normal_std: f64,
    pub fluctuation_low: f64,
    pub fluctuation_high: f64,
    pub false_high_mean: f64,
    pub false_high_std: f64,
    pub random_mix_p_high: f64,
    pub completion_time_low: f64,
    pub completion_time_high: f64,
    /// Explicit attack schedule; the default schedule is derived when absent.
    pub schedule: Option<Vec<PhaseSpec>>,

    pub identity_verified: bool,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            initial_stake: 100.0,
            initial_reputation: 100.0,
            c_min: 0.0,
            c_max: 10.0,
            gamma: 0.5,
            r_max_early: 300.0,
            r_max_late: 500.0,
            r_max_switch_round: 5,
            epsilon: 1e-8,
            cooldown_period: 3,
            strata: 3,
            committee_bonus: 40.0,
            base_decay: 0.88,
            decay_compensation: 0.07,
            history_window: 5,
            default_stability: 0.8,
            contribution_bonus: 50.0,
            stability_bonus: 30.0,
            penalty_reputation: 0.3,
            penalty_stake: 0.1,
            history_decay: 0.9,
            base_reward: 1200.0,
            participants: 100,
            stake_weight: 0.4,
            committee_size: 5,
            malicious_percent: 0.15,
            eta_switch: 5,
            rounds: 90,

            f_scale: 100.0,
            effort_cost: 0.5,
            t_max: None,
            timeout_weight: 0.3,
            malicious_weight: 1.0,
            severe_cutoff: 1.0,
            contract_accounting: false,

            theta_low: 0.3,
            theta_fluct: 1.5,
            theta_jump: 3.0,
            eps_std: 2.0,

            normal_mean: 7.0,
            normal_std: 1.0,
            fluctuation_low: 0.9,
            fluctuation_high: 1.1,
            false_high_mean: 9.5,
            false_high_std: 0.25,
            random_mix_p_high: 0.6,
            completion_time_low: 0.5,
            completion_time_high: 1.5,
            schedule: None,

            identity_verified: true,
            seed: 42,
        }
    }
}

/// Node ids and round numbers are packed into 28-bit fields of the rng label.
pub(crate) const MAX_LABEL_INDEX: u64 = (1 << 28) - 2;

/// One violated constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", list(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
}

fn list(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl ConfigError {
    /// Violations carried by an `Invalid` error, empty otherwise.
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

/// A configuration that passed [`validate_config`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedConfig(SystemConfig);

impl Deref for ValidatedConfig {
    type Target = SystemConfig;

    fn deref(&self) -> &SystemConfig {
        &self.0
    }
}

impl ValidatedConfig {
    pub fn into_inner(self) -> SystemConfig {
        self.0
    }

    #[cfg(test)]
    pub(crate) fn unchecked(raw: SystemConfig) -> Self {
        Self(raw)
    }

    /// Reputation cap in force at round `t`.
    pub fn r_max(&self, t: u32) -> f64 {
        if t <= self.r_max_switch_round {
            self.r_max_early
        } else {
            self.r_max_late
        }
    }

    /// Number of adversarial nodes, `m * n` rounded half up.
    pub fn malicious_count(&self) -> usize {
        malicious_count(self.malicious_percent, self.participants)
    }
}

/// Half-up rounding with a small guard so that products such as `0.35 * 10`
/// land on the decimal value they denote.
pub fn malicious_count(percent: f64, n: usize) -> usize {
    let count = (percent * n as f64 + 0.5 + 1e-9).floor() as usize;
    count.min(n)
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(self) -> Result<ValidatedConfig, ConfigError> {
        validate_config(self)
    }
}

/// Checks every invariant and reports all violations at once.
pub fn validate_config(raw: SystemConfig) -> Result<ValidatedConfig, ConfigError> {
    let mut errs = Vec::new();
    let mut check = |ok: bool, field: &'static str, message: &str| {
        if !ok {
            errs.push(Violation {
                field,
                message: message.to_string(),
            });
        }
    };

    let c = &raw;
    check(c.participants >= 1, "participants", "population must be non-empty");
    check(
        c.participants as u64 <= MAX_LABEL_INDEX,
        "participants",
        "population too large",
    );
    check(
        (c.rounds as u64) <= MAX_LABEL_INDEX,
        "rounds",
        "too many rounds",
    );
    check(c.strata >= 1, "strata", "L must be at least 1");
    check(
        c.committee_size <= c.participants,
        "committee_size",
        "committee size exceeds population",
    );
    check(
        c.gamma > 0.0 && c.gamma <= 1.0,
        "gamma",
        "γ must lie in (0,1]",
    );
    check(
        c.history_decay > 0.0 && c.history_decay < 1.0,
        "history_decay",
        "ζ must lie in (0,1)",
    );
    check(
        c.base_decay + c.decay_compensation <= 1.0,
        "base_decay",
        "δ_b + λ_p must not exceed 1",
    );
    check(
        (0.0..=1.0).contains(&c.malicious_percent),
        "malicious_percent",
        "malicious percent must lie in [0,1]",
    );
    check(c.c_max > c.c_min, "c_max", "C_max must exceed C_min");
    check(c.c_min >= 0.0, "c_min", "C_min must be non-negative");
    check(c.history_window >= 1, "history_window", "τ must be at least 1");
    check(c.f_scale > 0.0, "f_scale", "f_scale must be positive");
    check(c.effort_cost > 0.0, "effort_cost", "γ_c must be positive");
    check(
        c.r_max_early >= 0.0 && c.r_max_late >= 0.0,
        "r_max_early",
        "reputation caps must be non-negative",
    );
    check(
        c.t_max.is_none_or(|t| t > 0.0),
        "t_max",
        "T_max must be positive when set",
    );
    check(
        c.fluctuation_low <= c.fluctuation_high,
        "fluctuation_low",
        "fluctuation range is reversed",
    );
    check(
        c.completion_time_low > 0.0 && c.completion_time_low <= c.completion_time_high,
        "completion_time_low",
        "completion time range must be positive and ordered",
    );
    check(
        (0.0..=1.0).contains(&c.random_mix_p_high),
        "random_mix_p_high",
        "p_high must lie in [0,1]",
    );
    check(
        c.normal_std >= 0.0 && c.false_high_std >= 0.0,
        "normal_std",
        "standard deviations must be non-negative",
    );

    let non_negative: [(&'static str, f64); 24] = [
        ("initial_stake", c.initial_stake),
        ("initial_reputation", c.initial_reputation),
        ("epsilon", c.epsilon),
        ("committee_bonus", c.committee_bonus),
        ("base_decay", c.base_decay),
        ("decay_compensation", c.decay_compensation),
        ("default_stability", c.default_stability),
        ("contribution_bonus", c.contribution_bonus),
        ("stability_bonus", c.stability_bonus),
        ("penalty_reputation", c.penalty_reputation),
        ("penalty_stake", c.penalty_stake),
        ("base_reward", c.base_reward),
        ("stake_weight", c.stake_weight),
        ("timeout_weight", c.timeout_weight),
        ("malicious_weight", c.malicious_weight),
        ("severe_cutoff", c.severe_cutoff),
        ("theta_low", c.theta_low),
        ("theta_fluct", c.theta_fluct),
        ("theta_jump", c.theta_jump),
        ("eps_std", c.eps_std),
        ("fluctuation_low", c.fluctuation_low),
        ("false_high_mean", c.false_high_mean),
        ("normal_mean", c.normal_mean),
        ("completion_time_high", c.completion_time_high),
    ];
    for (field, value) in non_negative {
        check(
            value.is_finite() && value >= 0.0,
            field,
            "must be finite and non-negative",
        );
    }
    check(
        c.penalty_stake <= 1.0,
        "penalty_stake",
        "λ_s must not exceed 1",
    );

    if let Some(phases) = &c.schedule {
        if let Err(e) = crate::behavior::AttackSchedule::from_phases(phases, c.rounds) {
            check(false, "schedule", &e.to_string());
        }
    } else if c.rounds > 0 && c.rounds < c.eta_switch {
        check(false, "rounds", "rounds must be at least η_switch");
    }

    if errs.is_empty() {
        Ok(ValidatedConfig(raw))
    } else {
        Err(ConfigError::Invalid(errs))
    }
}
