//! Deterministic simulator for a reputation-based incentive mechanism in
//! federated learning.
//!
//! A population of honest and adversarial participants submits scalar
//! contributions each round. The mechanism selects a validation committee by
//! stratified reputation-weighted sampling, flags anomalous contributors,
//! updates reputations, splits a reward pool by stake and decayed
//! contribution, and tracks fairness. A separate [`contract`] module solves
//! for the optimal contract terms.
//!
//! ```
//! use fedrep::{run_simulation, SystemConfig};
//!
//! let cfg = SystemConfig { rounds: 10, ..Default::default() }.validate().unwrap();
//! let result = run_simulation(&cfg, 7).unwrap();
//! assert_eq!(result.records.len(), 10);
//! assert!(result.summary.honest_total_reward > result.summary.malicious_total_reward);
//! ```

pub mod behavior;
pub mod committee;
pub mod config;
pub mod contract;
pub mod detection;
pub mod engine;
pub mod metrics;
pub mod node;
pub mod reputation;
pub mod reward;
pub mod rng;

pub use behavior::{AttackSchedule, BehaviorPattern, PatternKind, PhaseSpec};
pub use config::{ConfigError, SystemConfig, ValidatedConfig};
pub use contract::{ContractEnv, OptimalSolution, SolverOptions};
pub use engine::{run_round, run_simulation, RoundRecord, SimulationResult, WorldState};
pub use node::{Node, NodeId, Role};
pub use reputation::DomainError;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/round-loop.md")]
    mod round_loop {}
    #[doc = include_str!("../../../book/src/committee.md")]
    mod committee {}
    #[doc = include_str!("../../../book/src/reputation-detection.md")]
    mod reputation_detection {}
    #[doc = include_str!("../../../book/src/rewards-fairness.md")]
    mod rewards_fairness {}
    #[doc = include_str!("../../../book/src/contract.md")]
    mod contract {}
}
