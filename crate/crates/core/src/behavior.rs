//! Contribution generation for honest and adversarial nodes.
//!
//! Honest nodes always draw from the fluctuating normal pattern. Adversaries
//! follow an [`AttackSchedule`], a partition of the run into phases that each
//! carry one pattern.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::node::Role;
use crate::rng::RngStream;

/// Contribution-generation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "pattern")]
pub enum BehaviorPattern {
    /// `max(0, N(mean, std) * F)` with `F ~ U[fluct_low, fluct_high]`.
    Normal {
        mean: f64,
        std: f64,
        fluct_low: f64,
        fluct_high: f64,
    },
    /// Abnormally high contributions drawn from `N(mean, std)`.
    FalseHigh { mean: f64, std: f64 },
    ZeroContribution,
    /// FalseHigh with probability `p_high`, zero otherwise.
    RandomMix {
        p_high: f64,
        high_mean: f64,
        high_std: f64,
    },
}

/// Pattern names accepted in config phase tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    FalseHigh,
    Zero,
    RandomMix,
    Normal,
}

/// One row of a config phase table: `[start, end)` uses `pattern`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub start: u32,
    pub end: u32,
    pub pattern: PatternKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("rounds ({rounds}) must be at least eta_switch ({eta})")]
    TooFewRounds { rounds: u32, eta: u32 },
    #[error("phases must partition [0, {rounds}) without gaps or overlaps")]
    NotAPartition { rounds: u32 },
}

impl PatternKind {
    pub fn resolve(self, cfg: &SystemConfig) -> BehaviorPattern {
        match self {
            PatternKind::FalseHigh => BehaviorPattern::FalseHigh {
                mean: cfg.false_high_mean,
                std: cfg.false_high_std,
            },
            PatternKind::Zero => BehaviorPattern::ZeroContribution,
            PatternKind::RandomMix => BehaviorPattern::RandomMix {
                p_high: cfg.random_mix_p_high,
                high_mean: cfg.false_high_mean,
                high_std: cfg.false_high_std,
            },
            PatternKind::Normal => BehaviorPattern::normal(cfg),
        }
    }
}

impl BehaviorPattern {
    pub fn normal(cfg: &SystemConfig) -> Self {
        BehaviorPattern::Normal {
            mean: cfg.normal_mean,
            std: cfg.normal_std,
            fluct_low: cfg.fluctuation_low,
            fluct_high: cfg.fluctuation_high,
        }
    }

    /// Draws a contribution before clamping to `[C_min, C_max]`. Always `>= 0`.
    pub fn sample_raw(&self, rng: &mut RngStream) -> f64 {
        match *self {
            BehaviorPattern::Normal {
                mean,
                std,
                fluct_low,
                fluct_high,
            } => {
                let base = gaussian(mean, std, rng);
                let f = if fluct_high > fluct_low {
                    rng.random_range(fluct_low..=fluct_high)
                } else {
                    fluct_low
                };
                (base * f).max(0.0)
            }
            BehaviorPattern::FalseHigh { mean, std } => gaussian(mean, std, rng).max(0.0),
            BehaviorPattern::ZeroContribution => 0.0,
            BehaviorPattern::RandomMix {
                p_high,
                high_mean,
                high_std,
            } => {
                if rng.random_bool(p_high) {
                    gaussian(high_mean, high_std, rng).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }
}

fn gaussian(mean: f64, std: f64, rng: &mut RngStream) -> f64 {
    if std == 0.0 {
        return mean;
    }
    Normal::new(mean, std)
        .expect("std validated non-negative")
        .sample(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start: u32,
    pub end: u32,
    pub pattern: BehaviorPattern,
}

/// Phase table covering `[0, rounds)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSchedule {
    phases: Vec<Phase>,
    kinds: Vec<PatternKind>,
}

impl AttackSchedule {
    /// Checks that `phases` partition `[0, rounds)`.
    pub fn from_phases(phases: &[PhaseSpec], rounds: u32) -> Result<Vec<PhaseSpec>, ScheduleError> {
        let mut cursor = 0;
        for p in phases {
            if p.start != cursor || p.end <= p.start {
                return Err(ScheduleError::NotAPartition { rounds });
            }
            cursor = p.end;
        }
        if cursor != rounds {
            return Err(ScheduleError::NotAPartition { rounds });
        }
        Ok(phases.to_vec())
    }

    fn build(specs: Vec<PhaseSpec>, cfg: &SystemConfig) -> Self {
        let phases = specs
            .iter()
            .map(|s| Phase {
                start: s.start,
                end: s.end,
                pattern: s.pattern.resolve(cfg),
            })
            .collect();
        let kinds = specs.iter().map(|s| s.pattern).collect();
        Self { phases, kinds }
    }

    /// The configured phase table, or the default schedule when none is set.
    pub fn from_config(cfg: &SystemConfig) -> Result<Self, ScheduleError> {
        match &cfg.schedule {
            Some(specs) => {
                let specs = Self::from_phases(specs, cfg.rounds)?;
                Ok(Self::build(specs, cfg))
            }
            None => default_schedule(cfg),
        }
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Exclusive end of every phase.
    pub fn boundaries(&self) -> Vec<u32> {
        self.phases.iter().map(|p| p.end).collect()
    }

    pub fn kinds(&self) -> &[PatternKind] {
        &self.kinds
    }

    /// Pattern active at round `t`; the last phase extends past the end.
    pub fn pattern_at(&self, t: u32) -> Option<&BehaviorPattern> {
        self.phases
            .iter()
            .find(|p| p.start <= t && t < p.end)
            .or(self.phases.last())
            .map(|p| &p.pattern)
    }
}

/// FalseHigh until `eta_switch`, then Zero, RandomMix and Zero again. The
/// later boundaries sit at one and two thirds of the run (30 and 60 for 90
/// rounds).
pub fn default_schedule(cfg: &SystemConfig) -> Result<AttackSchedule, ScheduleError> {
    let rounds = cfg.rounds;
    let eta = cfg.eta_switch;
    if rounds < eta {
        return Err(ScheduleError::TooFewRounds { rounds, eta });
    }
    let third = |k: u64| ((rounds as u64 * k + 1) / 3) as u32;
    let b1 = third(1).max(eta);
    let b2 = third(2).max(b1);
    let raw = [
        (0, eta, PatternKind::FalseHigh),
        (eta, b1, PatternKind::Zero),
        (b1, b2, PatternKind::RandomMix),
        (b2, rounds, PatternKind::Zero),
    ];
    let specs = raw
        .into_iter()
        .filter(|(s, e, _)| e > s)
        .map(|(start, end, pattern)| PhaseSpec {
            start,
            end,
            pattern,
        })
        .collect();
    Ok(AttackSchedule::build(specs, cfg))
}

/// `(contribution, completion_time)` for one node-round.
///
/// `contribution_rng` and `time_rng` are separate streams so the completion
/// time does not depend on which pattern was drawn.
pub fn sample_contribution(
    role: Role,
    pattern: &BehaviorPattern,
    cfg: &SystemConfig,
    contribution_rng: &mut RngStream,
    time_rng: &mut RngStream,
) -> (f64, f64) {
    let honest;
    let pattern = match role {
        Role::Honest => {
            honest = BehaviorPattern::normal(cfg);
            &honest
        }
        Role::Malicious => pattern,
    };
    let c = pattern.sample_raw(contribution_rng).clamp(cfg.c_min, cfg.c_max);
    let tau = if cfg.completion_time_high > cfg.completion_time_low {
        time_rng.random_range(cfg.completion_time_low..=cfg.completion_time_high)
    } else {
        cfg.completion_time_low
    };
    (c, tau)
}
