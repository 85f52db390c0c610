//! The round loop.
//!
//! Each round runs these steps in order:
//!
//! 1. collect every node's contribution and completion time;
//! 2. select the committee on the current reputations and update cooldowns;
//! 3. aggregate (a no-op here, contributions stand in for model updates);
//! 4. run detection;
//! 5. penalise detected nodes and apply the reputation recurrence to the rest;
//! 6. allocate rewards;
//! 7. compute fairness metrics;
//! 8. emit the [`RoundRecord`].
//!
//! A round either commits in full or leaves the state untouched.

use serde::{Deserialize, Serialize};

use crate::behavior::{sample_contribution, AttackSchedule, ScheduleError};
use crate::committee::{select_committee, update_cooldowns};
use crate::config::{SystemConfig, ValidatedConfig};
use crate::contract::{compliance, contribution_value, ComplianceInput};
use crate::detection::{apply_penalties, detect, Thresholds};
use crate::metrics::{gini, jain_index, FairnessPoint};
use crate::node::{init_population, ContributionEntry, Node, NodeId, Role};
use crate::reputation::{quality, stability, update_reputation, DomainError};
use crate::reward::allocate_rewards;
use crate::rng::{Purpose, RngStream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("simulation already ran all {0} rounds")]
    Finished(u32),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// What the publisher has collected so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PublisherLedger {
    pub stake_forfeits: f64,
    /// `Σ (V - R) 𝕀` over node-rounds; only accrues with contract accounting on.
    pub contract_margin: f64,
}

impl PublisherLedger {
    pub fn total(&self) -> f64 {
        self.stake_forfeits + self.contract_margin
    }
}

/// One node's submission for a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub contribution: f64,
    pub completion_time: f64,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub node_id: NodeId,
    pub role: Role,
    pub contribution: f64,
    pub tau: f64,
    pub timed_out: bool,
    pub quality: f64,
    /// Reputation after the round.
    pub reputation: f64,
    pub penalty: f64,
    pub reward: f64,
    pub committee: bool,
    pub detected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// Jain index of cumulative rewards.
    pub jain: f64,
    /// Gini coefficient of cumulative rewards.
    pub gini: f64,
    pub jain_round: f64,
    pub gini_round: f64,
    pub detected_count: usize,
    pub honest_mean_rep: f64,
    pub malicious_mean_rep: f64,
    pub honest_mean_reward: f64,
    pub malicious_mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub committee: Vec<NodeId>,
    pub committee_undersized: bool,
    pub detected: Vec<NodeId>,
    pub rows: Vec<NodeRow>,
    pub total_reward: f64,
    pub stake_forfeited: f64,
    pub contract_margin: f64,
    pub metrics: RoundMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldState {
    cfg: ValidatedConfig,
    t: u32,
    nodes: Vec<Node>,
    schedule: AttackSchedule,
    ledger: PublisherLedger,
    records: Vec<RoundRecord>,
}

impl WorldState {
    pub fn new(cfg: ValidatedConfig) -> Result<Self, EngineError> {
        let schedule = AttackSchedule::from_config(&cfg)?;
        let nodes = init_population(&cfg);
        Ok(Self {
            cfg,
            t: 0,
            nodes,
            schedule,
            ledger: PublisherLedger::default(),
            records: Vec::new(),
        })
    }

    pub fn config(&self) -> &ValidatedConfig {
        &self.cfg
    }

    pub fn round(&self) -> u32 {
        self.t
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn schedule(&self) -> &AttackSchedule {
        &self.schedule
    }

    pub fn ledger(&self) -> PublisherLedger {
        self.ledger
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.cfg.rounds
    }
}

/// Draws round-`t` submissions and appends them to the histories.
///
/// A submission slower than `T_max` is recorded as a zero contribution and
/// counted as a timeout.
pub fn collect_contributions(nodes: &mut [Node], schedule: &AttackSchedule, cfg: &SystemConfig, t: u32) -> Vec<Submission> {
    nodes
        .iter_mut()
        .map(|node| {
            let label = Some(node.id as u32);
            let mut c_rng = RngStream::for_purpose(cfg.seed, Purpose::Contribution, t, label);
            let mut t_rng = RngStream::for_purpose(cfg.seed, Purpose::CompletionTime, t, label);
            let pattern = schedule.pattern_at(t).expect("schedule is never empty");
            let (c, tau) = sample_contribution(node.role, pattern, cfg, &mut c_rng, &mut t_rng);
            let timed_out = cfg.t_max.is_some_and(|limit| tau > limit);
            let contribution = if timed_out { 0.0 } else { c };
            if timed_out {
                node.timeouts += 1;
            } else if contribution > 0.0 {
                node.participation += 1;
            }
            node.record_contribution(ContributionEntry {
                round: t,
                contribution,
                completion_time: tau,
            });
            Submission {
                contribution,
                completion_time: tau,
                timed_out,
            }
        })
        .collect()
}

fn mean_where(nodes: &[Node], role: Role, value: impl Fn(&Node) -> f64) -> f64 {
    let picked: Vec<f64> = nodes.iter().filter(|n| n.role == role).map(value).collect();
    if picked.is_empty() {
        0.0
    } else {
        picked.iter().sum::<f64>() / picked.len() as f64
    }
}

/// Advances the world by one round.
pub fn run_round(state: &mut WorldState) -> Result<RoundRecord, EngineError> {
    if state.is_finished() {
        return Err(EngineError::Finished(state.cfg.rounds));
    }
    let cfg = &state.cfg;
    let t = state.t;
    let mut nodes = state.nodes.clone();
    let mut ledger = state.ledger;

    let submissions = collect_contributions(&mut nodes, &state.schedule, cfg, t);

    let selection = select_committee(&nodes, cfg, t);
    update_cooldowns(&mut nodes, &selection.committee, cfg.cooldown_period);

    let mut report = detect(&nodes, &Thresholds::from_config(cfg), t);

    let qualities = submissions
        .iter()
        .map(|s| quality(s.contribution, cfg.c_min, cfg.c_max))
        .collect::<Result<Vec<_>, _>>()?;
    let forfeited = apply_penalties(&mut nodes, &mut report, cfg);
    for node in nodes.iter_mut() {
        if report.is_detected(node.id) {
            continue;
        }
        let stab = stability(&node.recent_contributions(cfg.history_window), cfg.history_window, cfg.default_stability);
        update_reputation(node, qualities[node.id], stab, cfg, t);
    }
    ledger.stake_forfeits += forfeited;

    let rewards = allocate_rewards(&mut nodes, &selection.committee, cfg, t)?;

    let mut margin = 0.0;
    if cfg.contract_accounting {
        for (i, s) in submissions.iter().enumerate() {
            let mut violations = ComplianceInput::none();
            if report.is_detected(i) {
                violations.push(cfg.malicious_weight, 1.0)?;
            }
            if s.timed_out {
                violations.push(cfg.timeout_weight, 1.0)?;
            }
            let v = contribution_value(s.contribution, s.completion_time, cfg.contribution_bonus, cfg.c_min, cfg.c_max)?;
            margin += (v - rewards[i].total) * compliance(&violations, cfg.severe_cutoff);
        }
        ledger.contract_margin += margin;
    }

    let cumulative: Vec<f64> = nodes.iter().map(|n| n.total_reward).collect();
    let this_round: Vec<f64> = rewards.iter().map(|r| r.total).collect();
    let round_reward = |n: &Node| rewards[n.id].total;
    let metrics = RoundMetrics {
        jain: jain_index(&cumulative, cfg.epsilon),
        gini: gini(&cumulative),
        jain_round: jain_index(&this_round, cfg.epsilon),
        gini_round: gini(&this_round),
        detected_count: report.detected.len(),
        honest_mean_rep: mean_where(&nodes, Role::Honest, |n| n.reputation),
        malicious_mean_rep: mean_where(&nodes, Role::Malicious, |n| n.reputation),
        honest_mean_reward: mean_where(&nodes, Role::Honest, round_reward),
        malicious_mean_reward: mean_where(&nodes, Role::Malicious, round_reward),
    };

    let rows = nodes
        .iter()
        .map(|n| NodeRow {
            node_id: n.id,
            role: n.role,
            contribution: submissions[n.id].contribution,
            tau: submissions[n.id].completion_time,
            timed_out: submissions[n.id].timed_out,
            quality: qualities[n.id],
            reputation: n.reputation,
            penalty: report.penalties[n.id],
            reward: rewards[n.id].total,
            committee: selection.contains(n.id),
            detected: report.is_detected(n.id),
        })
        .collect();

    let record = RoundRecord {
        round: t,
        committee_undersized: selection.undersized,
        committee: selection.committee,
        detected: report.detected,
        rows,
        total_reward: this_round.iter().sum(),
        stake_forfeited: forfeited,
        contract_margin: margin,
        metrics,
    };

    state.nodes = nodes;
    state.ledger = ledger;
    state.records.push(record.clone());
    state.t += 1;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rounds: u32,
    pub roles: Vec<Role>,
    pub final_reputations: Vec<f64>,
    pub cumulative_rewards: Vec<f64>,
    /// First round each node was detected in, if ever.
    pub first_detection: Vec<Option<u32>>,
    pub fairness: Vec<FairnessPoint>,
    pub honest_total_reward: f64,
    pub malicious_total_reward: f64,
    /// Honest over malicious total reward; absent when malicious nodes earned nothing.
    pub reward_ratio: Option<f64>,
    pub honest_mean_reputation: f64,
    pub malicious_mean_reputation: f64,
    pub gini_final: f64,
    pub gini_honest: f64,
    pub ledger: PublisherLedger,
}

impl Summary {
    fn build(state: &WorldState) -> Self {
        let nodes = state.nodes();
        let mut first_detection = vec![None; nodes.len()];
        for rec in state.records() {
            for &id in &rec.detected {
                first_detection[id].get_or_insert(rec.round);
            }
        }
        let total = |role| nodes.iter().filter(|n| n.role == role).map(|n| n.total_reward).sum::<f64>();
        let honest_total_reward = total(Role::Honest);
        let malicious_total_reward = total(Role::Malicious);
        let cumulative: Vec<f64> = nodes.iter().map(|n| n.total_reward).collect();
        let honest: Vec<f64> = nodes.iter().filter(|n| n.role == Role::Honest).map(|n| n.total_reward).collect();
        Self {
            rounds: state.round(),
            roles: nodes.iter().map(|n| n.role).collect(),
            final_reputations: nodes.iter().map(|n| n.reputation).collect(),
            first_detection,
            fairness: state
                .records()
                .iter()
                .map(|r| FairnessPoint {
                    round: r.round,
                    jain: r.metrics.jain,
                    gini: r.metrics.gini,
                })
                .collect(),
            honest_total_reward,
            malicious_total_reward,
            reward_ratio: (malicious_total_reward > 0.0).then(|| honest_total_reward / malicious_total_reward),
            honest_mean_reputation: mean_where(nodes, Role::Honest, |n| n.reputation),
            malicious_mean_reputation: mean_where(nodes, Role::Malicious, |n| n.reputation),
            gini_final: gini(&cumulative),
            gini_honest: gini(&honest),
            ledger: state.ledger(),
            cumulative_rewards: cumulative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SystemConfig,
    pub records: Vec<RoundRecord>,
    pub summary: Summary,
}

/// Runs every configured round with `seed` as the root seed.
pub fn run_simulation(cfg: &ValidatedConfig, seed: u64) -> Result<SimulationResult, EngineError> {
    let mut raw = (**cfg).clone();
    raw.seed = seed;
    let cfg = raw.validate().expect("changing the seed keeps a config valid");
    let mut state = WorldState::new(cfg)?;
    while !state.is_finished() {
        run_round(&mut state)?;
    }
    let summary = Summary::build(&state);
    Ok(SimulationResult {
        config: (*state.cfg).clone(),
        records: state.records,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_with(f: impl FnOnce(&mut SystemConfig)) -> ValidatedConfig {
        let mut c = SystemConfig::default();
        f(&mut c);
        c.validate().unwrap()
    }

    #[test]
    fn first_round_shape() {
        let mut s = WorldState::new(cfg_with(|_| {})).unwrap();
        let r = run_round(&mut s).unwrap();
        assert_eq!(r.committee.len(), 5);
        assert!(r.detected.is_empty());
        for row in &r.rows {
            assert_eq!(row.reward > 0.0, row.contribution > 0.0);
        }
        assert_eq!(s.round(), 1);
        assert_eq!(s.records().len(), 1);
    }

    #[test]
    fn timeouts_zero_the_contribution() {
        let c = cfg_with(|c| c.t_max = Some(1.0));
        let mut s = WorldState::new(c).unwrap();
        let r = run_round(&mut s).unwrap();
        let slow: Vec<_> = r.rows.iter().filter(|row| row.tau > 1.0).collect();
        assert!(!slow.is_empty());
        for row in slow {
            assert!(row.timed_out);
            assert_eq!(row.contribution, 0.0);
            assert_eq!(row.reward, 0.0);
            assert_eq!(s.nodes()[row.node_id].timeouts, 1);
        }
        for row in r.rows.iter().filter(|row| row.tau <= 1.0) {
            assert!(!row.timed_out);
        }
    }

    #[test]
    fn zero_phase_is_not_a_timeout() {
        let c = cfg_with(|c| c.eta_switch = 0);
        let mut s = WorldState::new(c).unwrap();
        let r = run_round(&mut s).unwrap();
        for row in r.rows.iter().filter(|row| row.role == Role::Malicious) {
            assert_eq!(row.contribution, 0.0);
            assert!(!row.timed_out);
            assert_eq!(row.reward, 0.0);
        }
        assert_eq!(r.rows.iter().filter(|row| row.role == Role::Malicious).count(), 15);
    }

    #[test]
    fn finished_state_rejects_rounds() {
        let mut s = WorldState::new(cfg_with(|c| {
            c.rounds = 1;
            c.eta_switch = 1;
        })).unwrap();
        run_round(&mut s).unwrap();
        let before = s.clone();
        assert_eq!(run_round(&mut s), Err(EngineError::Finished(1)));
        assert_eq!(s, before);
    }

    #[test]
    fn failing_round_leaves_state_untouched() {
        // With contract accounting on, a zero completion time makes the
        // contribution value undefined, which surfaces only after rewards are allocated.
        let mut raw = SystemConfig::default();
        raw.contract_accounting = true;
        raw.completion_time_low = 0.0;
        raw.completion_time_high = 0.0;
        let c = ValidatedConfig::unchecked(raw);
        let mut s = WorldState::new(c).unwrap();
        let before = s.clone();
        assert!(matches!(run_round(&mut s), Err(EngineError::Domain(_))));
        assert_eq!(s, before);
    }

    #[test]
    fn zero_rounds() {
        let r = run_simulation(&cfg_with(|c| {
            c.rounds = 0;
            c.eta_switch = 0;
        }), 1).unwrap();
        assert!(r.records.is_empty());
        assert!(r.summary.final_reputations.iter().all(|&x| x == 100.0));
    }

    #[test]
    fn ledger_matches_records() {
        let c = cfg_with(|c| {
            c.contract_accounting = true;
            c.rounds = 30;
        });
        let r = run_simulation(&c, 3).unwrap();
        let forfeits: f64 = r.records.iter().map(|x| x.stake_forfeited).sum();
        let margin: f64 = r.records.iter().map(|x| x.contract_margin).sum();
        let l = r.summary.ledger;
        assert!((l.stake_forfeits - forfeits).abs() < 1e-9);
        assert!((l.contract_margin - margin).abs() < 1e-9);
        assert!(forfeits > 0.0);
    }

    #[test]
    fn same_seed_same_result() {
        let c = cfg_with(|c| c.rounds = 20);
        assert_eq!(run_simulation(&c, 9).unwrap(), run_simulation(&c, 9).unwrap());
        assert_ne!(run_simulation(&c, 9).unwrap(), run_simulation(&c, 10).unwrap());
    }
}
