//! Reputation-stratified committee selection with cooldowns.
//!
//! Nodes are sorted by reputation (descending, ties by ascending id) and cut
//! into `L` contiguous strata. Each stratum contributes up to its quota of
//! members, drawn without replacement with probability proportional to
//! `r^γ` among nodes that are not cooling down. Any shortfall is filled from
//! the pooled leftover eligible nodes with the same weighting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::node::{Node, NodeId};
use crate::rng::{Purpose, RngStream};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot draw {count} items from {available} candidates")]
pub struct SampleError {
    pub count: usize,
    pub available: usize,
}

/// Initial quota of stratum `k` (1-based).
pub fn stratum_quota(committee_size: usize, strata: usize, k: usize) -> usize {
    assert!(strata >= 1 && (1..=strata).contains(&k), "stratum index out of range");
    committee_size / strata + usize::from(k <= committee_size % strata)
}

/// Sequential weighted draws without replacement.
///
/// At each draw item `i` is chosen with probability `w_i / Σ w_remaining`.
/// Once only zero-weight items remain they are drawn uniformly.
pub fn weighted_sample_without_replacement<R: Rng + ?Sized>(
    candidates: &[NodeId],
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>, SampleError> {
    assert_eq!(candidates.len(), weights.len());
    if count > candidates.len() {
        return Err(SampleError {
            count,
            available: candidates.len(),
        });
    }
    let mut pool: Vec<(NodeId, f64)> = candidates
        .iter()
        .copied()
        .zip(weights.iter().map(|w| w.max(0.0)))
        .collect();
    let mut picked = Vec::with_capacity(count);
    for _ in 0..count {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, (_, w)) in pool.iter().enumerate() {
                if *w <= 0.0 {
                    continue;
                }
                if target < *w {
                    chosen = Some(i);
                    break;
                }
                target -= w;
            }
            // Rounding can leave `target` just past the last positive weight.
            chosen.unwrap_or_else(|| pool.iter().rposition(|(_, w)| *w > 0.0).unwrap())
        } else {
            rng.random_range(0..pool.len())
        };
        picked.push(pool.remove(idx).0);
    }
    Ok(picked)
}

/// Audit of one selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitteeSelection {
    pub round: u32,
    /// Half-open index ranges into the sorted order.
    pub strata_bounds: Vec<(usize, usize)>,
    pub quotas: Vec<usize>,
    pub eligible: Vec<Vec<NodeId>>,
    pub stratum_picks: Vec<Vec<NodeId>>,
    pub remainder_pool: Vec<NodeId>,
    pub remainder_picks: Vec<NodeId>,
    pub committee: Vec<NodeId>,
    pub undersized: bool,
}

impl CommitteeSelection {
    pub fn contains(&self, id: NodeId) -> bool {
        self.committee.contains(&id)
    }
}

/// Reputation order used for stratification.
pub fn sorted_by_reputation(nodes: &[Node]) -> Vec<NodeId> {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        nodes[b]
            .reputation
            .total_cmp(&nodes[a].reputation)
            .then(nodes[a].id.cmp(&nodes[b].id))
    });
    order
}

pub fn select_committee(nodes: &[Node], cfg: &ValidatedConfig, t: u32) -> CommitteeSelection {
    let mut rng = RngStream::for_purpose(cfg.seed, Purpose::Committee, t, None);
    select_committee_with(nodes, cfg.committee_size, cfg.strata, cfg.gamma, t, &mut rng)
}

/// Selection with explicit parameters. `nodes` must be indexed by id.
pub fn select_committee_with<R: Rng + ?Sized>(
    nodes: &[Node],
    committee_size: usize,
    strata: usize,
    gamma: f64,
    t: u32,
    rng: &mut R,
) -> CommitteeSelection {
    assert!(!nodes.is_empty(), "population must be non-empty");
    let n = nodes.len();
    let weight = |id: NodeId| nodes[id].reputation.max(0.0).powf(gamma);
    let sorted = sorted_by_reputation(nodes);

    let mut strata_bounds = Vec::with_capacity(strata);
    let mut quotas = Vec::with_capacity(strata);
    let mut eligible = Vec::with_capacity(strata);
    let mut stratum_picks = Vec::with_capacity(strata);
    let mut chosen = 0usize;

    for k in 1..=strata {
        let lo = (k - 1) * n / strata;
        let hi = if k == strata { n } else { k * n / strata };
        strata_bounds.push((lo, hi));
        let quota = stratum_quota(committee_size, strata, k);
        quotas.push(quota);

        let pool: Vec<NodeId> = sorted[lo..hi]
            .iter()
            .map(|&i| nodes[i].id)
            .filter(|&id| nodes[id].cooldown == 0)
            .collect();
        let budget = committee_size - chosen;
        let m_k = if pool.is_empty() {
            0
        } else {
            quota.min(pool.len()).max(1).min(budget)
        };
        let weights: Vec<f64> = pool.iter().map(|&id| weight(id)).collect();
        let picks = weighted_sample_without_replacement(&pool, &weights, m_k, rng)
            .expect("m_k never exceeds the eligible set");
        chosen += picks.len();
        eligible.push(pool);
        stratum_picks.push(picks);
    }

    let mut remainder_pool = Vec::new();
    let mut remainder_picks = Vec::new();
    if chosen < committee_size {
        remainder_pool = eligible
            .iter()
            .zip(&stratum_picks)
            .flat_map(|(pool, picks)| pool.iter().filter(move |id| !picks.contains(id)).copied())
            .collect();
        let want = (committee_size - chosen).min(remainder_pool.len());
        let weights: Vec<f64> = remainder_pool.iter().map(|&id| weight(id)).collect();
        remainder_picks = weighted_sample_without_replacement(&remainder_pool, &weights, want, rng)
            .expect("bounded by pool size");
    }

    let committee: Vec<NodeId> = stratum_picks
        .iter()
        .flatten()
        .chain(&remainder_picks)
        .copied()
        .collect();
    CommitteeSelection {
        round: t,
        strata_bounds,
        quotas,
        eligible,
        stratum_picks,
        remainder_pool,
        undersized: committee.len() < committee_size,
        remainder_picks,
        committee,
    }
}

/// Members start cooling down; everyone else counts down by one.
pub fn update_cooldowns(nodes: &mut [Node], committee: &[NodeId], period: u32) {
    for node in nodes.iter_mut() {
        if committee.contains(&node.id) {
            node.cooldown = period;
        } else {
            node.cooldown = node.cooldown.saturating_sub(1);
        }
    }
}

/// Probability that `target` is among `count` sequential weighted draws,
/// computed by exact enumeration over draw orders. Exponential in `count`;
/// intended for small audits and tests.
pub fn inclusion_probability(weights: &[f64], count: usize, target: usize) -> f64 {
    fn recurse(weights: &[f64], taken: &mut Vec<bool>, left: usize, target: usize) -> f64 {
        if left == 0 {
            return 0.0;
        }
        let total: f64 = weights
            .iter()
            .zip(taken.iter())
            .filter(|(_, t)| !**t)
            .map(|(w, _)| *w)
            .sum();
        if total <= 0.0 {
            return 0.0;
        }
        let mut p = 0.0;
        for i in 0..weights.len() {
            if taken[i] || weights[i] <= 0.0 {
                continue;
            }
            let step = weights[i] / total;
            if i == target {
                p += step;
            } else {
                taken[i] = true;
                p += step * recurse(weights, taken, left - 1, target);
                taken[i] = false;
            }
        }
        p
    }
    let mut taken = vec![false; weights.len()];
    recurse(weights, &mut taken, count, target)
}
