//! Contribution quality, decay, stability and the reputation recurrence.

use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::node::Node;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("domain error: {0}")]
pub struct DomainError(pub &'static str);

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `σ((C - C_min) / (C_max - C_min))`.
pub fn quality(c: f64, c_min: f64, c_max: f64) -> Result<f64, DomainError> {
    if c_max <= c_min {
        return Err(DomainError("C_max must exceed C_min"));
    }
    Ok(sigmoid((c - c_min) / (c_max - c_min)))
}

/// Effective decay; grows from `δ_b` toward `δ_b + λ_p` with participation.
pub fn decay_factor(base: f64, compensation: f64, participation: u32) -> f64 {
    base + compensation * (1.0 - 1.0 / (1.0 + participation as f64 / 100.0))
}

/// Population standard deviation.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// `1 - std(window) / τ`, clamped to `[0, 1]`; `default` until `τ` rounds exist.
pub fn stability(recent: &[f64], window: usize, default: f64) -> f64 {
    assert!(window >= 1);
    if recent.len() < window {
        return default;
    }
    let w = &recent[recent.len() - window..];
    (1.0 - population_std(w) / window as f64).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReputationUpdate {
    pub node: usize,
    pub decay: f64,
    pub quality: f64,
    pub stability: f64,
    pub before: f64,
    pub after: f64,
}

/// `min(r_max(t), max(0, δ r + q X_c + λ_stab X_s))`.
pub fn next_reputation(
    before: f64,
    decay: f64,
    quality: f64,
    stability: f64,
    contribution_bonus: f64,
    stability_bonus: f64,
    cap: f64,
) -> f64 {
    (decay * before + quality * contribution_bonus + stability * stability_bonus)
        .max(0.0)
        .min(cap)
}

/// Applies the recurrence to `node` in round `t` and returns the audit.
///
/// `quality` and `stability` come from the node's current-round contribution
/// and window. The decay uses the node's participation count as it stands.
pub fn update_reputation(
    node: &mut Node,
    quality: f64,
    stability: f64,
    cfg: &ValidatedConfig,
    t: u32,
) -> ReputationUpdate {
    let decay = decay_factor(cfg.base_decay, cfg.decay_compensation, node.participation);
    let before = node.reputation;
    let after = next_reputation(
        before,
        decay,
        quality,
        stability,
        cfg.contribution_bonus,
        cfg.stability_bonus,
        cfg.r_max(t),
    );
    node.reputation = after;
    ReputationUpdate {
        node: node.id,
        decay,
        quality,
        stability,
        before,
        after,
    }
}
