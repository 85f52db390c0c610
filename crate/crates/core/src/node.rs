//! Participant state.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::rng::{Purpose, RngStream};

pub type NodeId = usize;

/// Ground-truth simulation tag. The mechanism never reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Honest,
    Malicious,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Honest => "honest",
            Role::Malicious => "malicious",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContributionEntry {
    pub round: u32,
    pub contribution: f64,
    pub completion_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub round: u32,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub stake: f64,
    pub reputation: f64,
    pub initial_reputation: f64,
    pub total_reward: f64,
    pub violations: u32,
    pub timeouts: u32,
    /// On-time rounds with a positive contribution.
    pub participation: u32,
    pub cooldown: u32,
    pub contribution_history: Vec<ContributionEntry>,
    pub reward_history: Vec<RewardEntry>,
    pub identity_verified: bool,
    pub role: Role,
}

impl Node {
    pub fn new(id: NodeId, stake: f64, reputation: f64, role: Role) -> Self {
        Self {
            id,
            stake,
            reputation,
            initial_reputation: reputation,
            total_reward: 0.0,
            violations: 0,
            timeouts: 0,
            participation: 0,
            cooldown: 0,
            contribution_history: Vec::new(),
            reward_history: Vec::new(),
            identity_verified: true,
            role,
        }
    }

    /// Contribution recorded for round `t`, if any.
    pub fn contribution_at(&self, t: u32) -> Option<f64> {
        self.contribution_history
            .iter()
            .rev()
            .find(|e| e.round == t)
            .map(|e| e.contribution)
    }

    /// The most recent `k` contributions, oldest first.
    pub fn recent_contributions(&self, k: usize) -> Vec<f64> {
        let h = &self.contribution_history;
        h[h.len().saturating_sub(k)..]
            .iter()
            .map(|e| e.contribution)
            .collect()
    }

    /// Appends a contribution; rounds must be strictly increasing.
    pub fn record_contribution(&mut self, entry: ContributionEntry) {
        if let Some(last) = self.contribution_history.last() {
            assert!(
                entry.round > last.round,
                "contribution rounds must be strictly increasing"
            );
        }
        self.contribution_history.push(entry);
    }
}

/// Builds the initial population; `round(m * n)` nodes are tagged malicious.
pub fn init_population(cfg: &ValidatedConfig) -> Vec<Node> {
    let n = cfg.participants;
    let k = cfg.malicious_count();
    let mut rng = RngStream::for_purpose(cfg.seed, Purpose::Roles, 0, None);
    let malicious = index::sample(&mut rng, n, k);
    let mut nodes: Vec<Node> = (0..n)
        .map(|id| {
            let mut node = Node::new(id, cfg.initial_stake, cfg.initial_reputation, Role::Honest);
            node.identity_verified = cfg.identity_verified;
            node
        })
        .collect();
    for id in malicious.iter() {
        nodes[id].role = Role::Malicious;
    }
    nodes
}
