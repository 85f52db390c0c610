//! Malicious-behaviour detection and penalties.
//!
//! A node is flagged when `(cond1 && cond2) || cond3` holds over its recent
//! contribution window:
//!
//! * cond1, persistent low contribution: the window mean is below
//!   `theta_low` times the pooled population median over the same rounds.
//! * cond2, abnormal fluctuation: the root-mean-square deviation of the window
//!   from that population median exceeds `theta_fluct` times the population
//!   standard deviation of the current round. This is the node's own spread
//!   plus its offset from the population, so a flat zero contributor counts
//!   as fluctuating away from the population level.
//! * cond3, sudden change: the current contribution departs from the mean of
//!   the preceding window by more than `theta_jump * max(std, eps_std)`.
//!
//! Nodes with fewer than two recorded rounds are never flagged. Only
//! contribution histories are read; the role tag is not.

use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::node::{Node, NodeId};
use crate::reputation::population_std;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub window: usize,
    pub theta_low: f64,
    pub theta_fluct: f64,
    pub theta_jump: f64,
    pub eps_std: f64,
}

impl Thresholds {
    pub fn from_config(cfg: &ValidatedConfig) -> Self {
        Self {
            window: cfg.history_window,
            theta_low: cfg.theta_low,
            theta_fluct: cfg.theta_fluct,
            theta_jump: cfg.theta_jump,
            eps_std: cfg.eps_std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConditionFlags {
    pub low: bool,
    pub fluctuation: bool,
    pub jump: bool,
}

impl ConditionFlags {
    pub fn detected(&self) -> bool {
        (self.low && self.fluctuation) || self.jump
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub round: u32,
    pub flags: Vec<ConditionFlags>,
    pub detected: Vec<NodeId>,
    /// Filled in by [`apply_penalties`].
    pub penalties: Vec<f64>,
    pub stake_deductions: Vec<f64>,
}

impl DetectionReport {
    pub fn is_detected(&self, id: NodeId) -> bool {
        self.detected.binary_search(&id).is_ok()
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Evaluates the condition set for round `t`. Histories must already hold
/// the round-`t` contribution as their last entry.
pub fn detect(nodes: &[Node], thresholds: &Thresholds, t: u32) -> DetectionReport {
    let tau = thresholds.window.max(1);
    let windows: Vec<Vec<f64>> = nodes.iter().map(|n| n.recent_contributions(tau)).collect();
    let reference = median(windows.iter().flatten().copied().collect());
    let current: Vec<f64> = nodes
        .iter()
        .filter_map(|n| n.contribution_history.last().map(|e| e.contribution))
        .collect();
    let round_std = population_std(&current);

    let mut flags = Vec::with_capacity(nodes.len());
    let mut detected = Vec::new();
    for (node, window) in nodes.iter().zip(&windows) {
        let h = node.recent_contributions(tau + 1);
        if h.len() < 2 {
            flags.push(ConditionFlags::default());
            continue;
        }
        let low = mean(window) < thresholds.theta_low * reference;
        let rms = (window.iter().map(|c| (c - reference).powi(2)).sum::<f64>() / window.len() as f64).sqrt();
        let fluctuation = rms > thresholds.theta_fluct * round_std;
        let (prev, cur) = h.split_at(h.len() - 1);
        let prev = &prev[prev.len().saturating_sub(tau)..];
        let spread = population_std(prev).max(thresholds.eps_std);
        let jump = (cur[0] - mean(prev)).abs() > thresholds.theta_jump * spread;

        let f = ConditionFlags {
            low,
            fluctuation,
            jump,
        };
        if f.detected() {
            detected.push(node.id);
        }
        flags.push(f);
    }
    detected.sort_unstable();
    DetectionReport {
        round: t,
        flags,
        penalties: vec![0.0; nodes.len()],
        stake_deductions: vec![0.0; nodes.len()],
        detected,
    }
}

/// `min(λ_r r + λ_s S, r / 2)`.
pub fn penalty(reputation: f64, stake: f64, lambda_r: f64, lambda_s: f64) -> f64 {
    (lambda_r * reputation + lambda_s * stake).min(reputation / 2.0)
}

/// Deducts penalties from detected nodes and returns the total stake
/// forfeited, which the caller credits to the publisher.
pub fn apply_penalties(nodes: &mut [Node], report: &mut DetectionReport, cfg: &ValidatedConfig) -> f64 {
    let mut forfeited = 0.0;
    for &id in &report.detected {
        let node = &mut nodes[id];
        let p = penalty(node.reputation, node.stake, cfg.penalty_reputation, cfg.penalty_stake);
        let deduction = (cfg.penalty_stake * node.stake).min(node.stake);
        node.reputation = (node.reputation - p).max(0.0);
        node.stake = (node.stake - deduction).max(0.0);
        node.violations += 1;
        report.penalties[id] = p;
        report.stake_deductions[id] = deduction;
        forfeited += deduction;
    }
    forfeited
}
