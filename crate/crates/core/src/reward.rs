//! Per-round reward allocation.
//!
//! Each node's reward blends a stake share and a decayed-contribution share
//! of the pool, scaled by the population's reputation fairness, plus a
//! committee bonus for members:
//!
//! ```text
//! R_i = (α B S_eff,i / ΣS + (1 - α) B C_hist,i / C_total) J(r) + R_cmm,i
//! ```
//!
//! The stake-share denominator uses raw stakes while the numerator uses the
//! capped effective stake. A node that contributed nothing this round, or has
//! no history, receives zero, committee bonus included.

use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::metrics::jain_index;
use crate::node::{ContributionEntry, Node, NodeId, RewardEntry};
use crate::reputation::{sigmoid, DomainError};

/// Stake counted toward rewards, capped at three times the mean stake.
pub fn effective_stake(stake: f64, mean_stake: f64) -> f64 {
    stake.min(3.0 * mean_stake)
}

/// `Σ_{lag=0..=τ} C^(t - lag) ζ^lag`; rounds without an entry count as zero.
pub fn historical_contribution(history: &[ContributionEntry], current_round: u32, zeta: f64, tau: usize) -> f64 {
    let oldest = current_round.saturating_sub(tau as u32);
    history
        .iter()
        .rev()
        .take_while(|e| e.round >= oldest)
        .filter(|e| e.round <= current_round)
        .map(|e| e.contribution * zeta.powi((current_round - e.round) as i32))
        .sum()
}

/// `σ((r̄ - r⁰) / f_scale) λ_stake`.
pub fn alpha_weight(mean_reputation: f64, initial_reputation: f64, f_scale: f64, stake_weight: f64) -> Result<f64, DomainError> {
    if f_scale <= 0.0 {
        return Err(DomainError("f_scale must be positive"));
    }
    Ok(sigmoid((mean_reputation - initial_reputation) / f_scale) * stake_weight)
}

/// Bonus paid to each committee member: `B_cmm` times the sigmoid-scaled
/// Jain index of the members' reputations.
pub fn committee_bonus(member_reputations: &[f64], base_bonus: f64, epsilon: f64) -> f64 {
    if member_reputations.is_empty() {
        return 0.0;
    }
    base_bonus * jain_index(member_reputations, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub node: NodeId,
    pub alpha: f64,
    pub beta: f64,
    pub effective_stake: f64,
    pub historical_contribution: f64,
    pub stake_share: f64,
    pub contribution_share: f64,
    pub fairness_scale: f64,
    pub committee_bonus: f64,
    pub total: f64,
}

/// Computes and credits round-`t` rewards. `nodes` must be indexed by id and
/// already hold their round-`t` contributions.
pub fn allocate_rewards(
    nodes: &mut [Node],
    committee: &[NodeId],
    cfg: &ValidatedConfig,
    t: u32,
) -> Result<Vec<RewardBreakdown>, DomainError> {
    let breakdown = compute_rewards(nodes, committee, cfg, t)?;
    for b in &breakdown {
        let node = &mut nodes[b.node];
        node.reward_history.push(RewardEntry {
            round: t,
            reward: b.total,
        });
        node.total_reward += b.total;
    }
    Ok(breakdown)
}

/// Pure part of [`allocate_rewards`].
pub fn compute_rewards(
    nodes: &[Node],
    committee: &[NodeId],
    cfg: &ValidatedConfig,
    t: u32,
) -> Result<Vec<RewardBreakdown>, DomainError> {
    let n = nodes.len() as f64;
    if nodes.is_empty() {
        return Ok(Vec::new());
    }
    let reputations: Vec<f64> = nodes.iter().map(|x| x.reputation).collect();
    let mean_rep = reputations.iter().sum::<f64>() / n;
    let mean_stake = nodes.iter().map(|x| x.stake).sum::<f64>() / n;
    let stake_total: f64 = nodes.iter().map(|x| x.stake).sum();
    let fairness = jain_index(&reputations, cfg.epsilon);
    let hist: Vec<f64> = nodes
        .iter()
        .map(|x| historical_contribution(&x.contribution_history, t, cfg.history_decay, cfg.history_window))
        .collect();
    let c_total: f64 = hist.iter().sum();

    let members: Vec<f64> = committee.iter().map(|&id| nodes[id].reputation).collect();
    let bonus = committee_bonus(&members, cfg.committee_bonus, cfg.epsilon);

    nodes
        .iter()
        .zip(&hist)
        .map(|(node, &c_hist)| {
            let alpha = alpha_weight(mean_rep, node.initial_reputation, cfg.f_scale, cfg.stake_weight)?;
            let beta = 1.0 - alpha;
            let s_eff = effective_stake(node.stake, mean_stake);
            let stake_share = if stake_total > 0.0 {
                alpha * cfg.base_reward * s_eff / stake_total
            } else {
                0.0
            };
            let contribution_share = if c_total > 0.0 {
                beta * cfg.base_reward * c_hist / c_total
            } else {
                0.0
            };
            let member_bonus = if committee.contains(&node.id) { bonus } else { 0.0 };
            let current = node.contribution_at(t).unwrap_or(0.0);
            let total = if current == 0.0 || node.contribution_history.is_empty() {
                0.0
            } else {
                (stake_share + contribution_share) * fairness + member_bonus
            };
            Ok(RewardBreakdown {
                node: node.id,
                alpha,
                beta,
                effective_stake: s_eff,
                historical_contribution: c_hist,
                stake_share,
                contribution_share,
                fairness_scale: fairness,
                committee_bonus: member_bonus,
                total,
            })
        })
        .collect()
}
