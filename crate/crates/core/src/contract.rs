//! Contract economics and the optimal-contract problem.
//!
//! A contract item `(C, S, R)` asks a participant for contribution `C`,
//! locks stake `S` and promises reward `R`. The participant's utility is
//! `R 𝕀 - λ_s S (1 - 𝕀) - c(C)` and the publisher's profit is
//! `(V - R) 𝕀 + λ_s S (1 - 𝕀)`, where `𝕀` is the compliance indicator.
//!
//! The optimum is found in three stages.
//!
//! 1. The contribution level maximises the publisher's margin
//!    `V(C) - R_mech(C)` against the reward the mechanism would actually pay
//!    for `C`, holding the population totals fixed.
//! 2. The reward binds the participation constraint `R >= c(C)` through a
//!    log barrier, which lands `R` a margin `μ` inside the feasible side.
//! 3. The common stake follows from equating the mechanism's reward with `R`.
//!
//! [`optimal_contribution_closed_form`] solves stage 1 analytically through
//! the usual `ln(x - 1)` approximation and [`solve_constrained`] solves it
//! numerically, checked against a dense grid.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::reputation::{sigmoid, DomainError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractItem {
    pub theta: f64,
    pub contribution: f64,
    pub stake: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MenuError {
    #[error("type probabilities sum to {0}, expected 1")]
    Probability(f64),
    #[error("menu has {items} items but {probabilities} probabilities")]
    Length { items: usize, probabilities: usize },
    #[error("types must be strictly descending (item {0})")]
    TypeOrder(usize),
    #[error("item {index}: {message}")]
    Item { index: usize, message: String },
}

/// Items ordered by type, best type first, with their prior probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractMenu {
    pub t_max: Option<f64>,
    items: Vec<ContractItem>,
    probabilities: Vec<f64>,
}

const PROBABILITY_TOLERANCE: f64 = 1e-9;

fn check_probabilities(p: &[f64]) -> Result<(), MenuError> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE || p.iter().any(|&x| x < 0.0) {
        return Err(MenuError::Probability(sum));
    }
    Ok(())
}

impl ContractMenu {
    pub fn new(
        t_max: Option<f64>,
        items: Vec<ContractItem>,
        probabilities: Vec<f64>,
        c_bounds: (f64, f64),
    ) -> Result<Self, MenuError> {
        if items.len() != probabilities.len() {
            return Err(MenuError::Length {
                items: items.len(),
                probabilities: probabilities.len(),
            });
        }
        check_probabilities(&probabilities)?;
        for (i, item) in items.iter().enumerate() {
            if !(c_bounds.0..=c_bounds.1).contains(&item.contribution) {
                return Err(MenuError::Item {
                    index: i,
                    message: format!("contribution {} outside [{}, {}]", item.contribution, c_bounds.0, c_bounds.1),
                });
            }
            if item.stake < 0.0 || item.reward < 0.0 {
                return Err(MenuError::Item {
                    index: i,
                    message: "stake and reward must be non-negative".into(),
                });
            }
            if i > 0 && item.theta >= items[i - 1].theta {
                return Err(MenuError::TypeOrder(i));
            }
        }
        Ok(Self {
            t_max,
            items,
            probabilities,
        })
    }

    /// Menu with equal type probabilities.
    pub fn uniform(t_max: Option<f64>, items: Vec<ContractItem>, c_bounds: (f64, f64)) -> Result<Self, MenuError> {
        let n = items.len().max(1);
        let p = vec![1.0 / n as f64; items.len()];
        Self::new(t_max, items, p, c_bounds)
    }

    pub fn items(&self) -> &[ContractItem] {
        &self.items
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// Weighted violations `(ω_k, VSL_k)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplianceInput {
    violations: Vec<(f64, f64)>,
}

impl ComplianceInput {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(violations: Vec<(f64, f64)>) -> Result<Self, DomainError> {
        if violations.iter().any(|&(w, _)| w < 0.0 || !w.is_finite()) {
            return Err(DomainError("violation weight must be non-negative"));
        }
        if violations.iter().any(|&(_, s)| !(0.0..=1.0).contains(&s)) {
            return Err(DomainError("violation severity must lie in [0, 1]"));
        }
        Ok(Self { violations })
    }

    pub fn push(&mut self, weight: f64, severity: f64) -> Result<(), DomainError> {
        let mut next = self.violations.clone();
        next.push((weight, severity));
        *self = Self::new(next)?;
        Ok(())
    }

    pub fn weighted_severity(&self) -> f64 {
        self.violations.iter().map(|(w, s)| w * s).sum()
    }
}

/// `exp(-Σ ω_k VSL_k)`, or 0 once the weighted severity reaches `severe_cutoff`.
pub fn compliance(input: &ComplianceInput, severe_cutoff: f64) -> f64 {
    let s = input.weighted_severity();
    if s >= severe_cutoff {
        0.0
    } else {
        (-s).exp()
    }
}

/// `(X_c / τ) σ((C - C_min) / (C_max - C_min))`.
pub fn contribution_value(c: f64, tau: f64, x_c: f64, c_min: f64, c_max: f64) -> Result<f64, DomainError> {
    if tau <= 0.0 {
        return Err(DomainError("completion time must be positive"));
    }
    if c_max <= c_min {
        return Err(DomainError("C_max must exceed C_min"));
    }
    Ok(x_c / tau * sigmoid((c - c_min) / (c_max - c_min)))
}

/// `½ γ_c C²`.
pub fn effort_cost(c: f64, gamma_c: f64) -> Result<f64, DomainError> {
    if gamma_c <= 0.0 {
        return Err(DomainError("cost parameter must be positive"));
    }
    Ok(0.5 * gamma_c * c * c)
}

pub fn participant_utility(item: &ContractItem, compliance: f64, lambda_s: f64, gamma_c: f64) -> Result<f64, DomainError> {
    Ok(item.reward * compliance - lambda_s * item.stake * (1.0 - compliance) - effort_cost(item.contribution, gamma_c)?)
}

pub fn publisher_profit(item: &ContractItem, value: f64, compliance: f64, lambda_s: f64) -> f64 {
    (value - item.reward) * compliance + lambda_s * item.stake * (1.0 - compliance)
}

/// `Σ p_i π_i` over the menu.
pub fn expected_profit(menu: &ContractMenu, values: &[f64], compliances: &[f64], lambda_s: f64) -> Result<f64, MenuError> {
    check_probabilities(menu.probabilities())?;
    let n = menu.items().len();
    if values.len() != n || compliances.len() != n {
        return Err(MenuError::Length {
            items: n,
            probabilities: values.len().min(compliances.len()),
        });
    }
    Ok(menu
        .items()
        .iter()
        .zip(menu.probabilities())
        .zip(values.iter().zip(compliances))
        .map(|((item, p), (&v, &i))| p * publisher_profit(item, v, i, lambda_s))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrReport {
    pub utilities: Vec<f64>,
    pub satisfied: Vec<bool>,
    pub rate: f64,
    pub min_utility: f64,
}

/// Participation check: each type's utility from its own item is `>= 0`.
pub fn check_ir(menu: &ContractMenu, compliances: &[f64], lambda_s: f64, gamma_c: f64) -> Result<IrReport, DomainError> {
    let utilities = menu
        .items()
        .iter()
        .zip(compliances)
        .map(|(item, &i)| participant_utility(item, i, lambda_s, gamma_c))
        .collect::<Result<Vec<_>, _>>()?;
    let satisfied: Vec<bool> = utilities.iter().map(|&u| u >= 0.0).collect();
    let n = satisfied.len().max(1) as f64;
    Ok(IrReport {
        rate: satisfied.iter().filter(|&&s| s).count() as f64 / n,
        min_utility: utilities.iter().copied().fold(f64::INFINITY, f64::min),
        utilities,
        satisfied,
    })
}

/// `U[i][j]`: utility of a type-`i` participant who takes item `j`.
///
/// `cost(theta, c)` is the type-dependent effort cost.
pub fn utility_matrix(
    menu: &ContractMenu,
    compliance: f64,
    lambda_s: f64,
    cost: impl Fn(f64, f64) -> f64,
) -> Vec<Vec<f64>> {
    let items = menu.items();
    items
        .iter()
        .map(|own| {
            items
                .iter()
                .map(|other| {
                    other.reward * compliance - lambda_s * other.stake * (1.0 - compliance) - cost(own.theta, other.contribution)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcReport {
    pub satisfied: Vec<bool>,
    /// `max_j U[i][j] - U[i][i]`; positive means type `i` gains by misreporting.
    pub margins: Vec<f64>,
    pub worst_margin: f64,
}

const IC_TOLERANCE: f64 = 1e-9;

/// Truth-telling check over a square utility matrix.
pub fn check_ic(utilities: &[Vec<f64>]) -> IcReport {
    let margins: Vec<f64> = utilities
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), utilities.len(), "utility matrix must be square");
            row.iter().map(|u| u - row[i]).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    IcReport {
        satisfied: margins.iter().map(|&m| m <= IC_TOLERANCE).collect(),
        worst_margin: margins.iter().copied().fold(0.0, f64::max),
        margins,
    }
}

/// Parameters of the single-participant contract problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractEnv {
    pub x_c: f64,
    /// Completion time of the representative participant.
    pub completion_time: f64,
    pub gamma_c: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub history_decay: f64,
    pub history_window: usize,
    pub stake_weight: f64,
    pub base_reward: f64,
    /// Fairness scale `J(r)` of the reward pool.
    pub fairness: f64,
    pub participants: usize,
    pub c_total: f64,
    pub committee_reward: f64,
    /// Log-barrier weight on the participation constraint.
    pub barrier: f64,
}

impl ContractEnv {
    /// Environment implied by a system config: perfect fairness, unit
    /// completion time, no committee bonus, and a population in which every
    /// node contributes `C_max` for the whole history window.
    pub fn from_config(cfg: &SystemConfig) -> Self {
        let mut env = Self {
            x_c: cfg.contribution_bonus,
            completion_time: 1.0,
            gamma_c: cfg.effort_cost,
            c_min: cfg.c_min,
            c_max: cfg.c_max,
            history_decay: cfg.history_decay,
            history_window: cfg.history_window,
            stake_weight: cfg.stake_weight,
            base_reward: cfg.base_reward,
            fairness: 1.0,
            participants: cfg.participants,
            c_total: 0.0,
            committee_reward: 0.0,
            barrier: 1e-8,
        };
        env.c_total = cfg.participants as f64 * cfg.c_max * env.decay_sum();
        env
    }

    /// `Σ_{t=0..=τ} ζ^t`.
    pub fn decay_sum(&self) -> f64 {
        (0..=self.history_window).map(|t| self.history_decay.powi(t as i32)).sum()
    }

    pub fn k(&self) -> f64 {
        1.0 / self.c_max
    }

    fn validate(&self) -> Result<(), DomainError> {
        let positive = [
            (self.x_c, "X_c must be positive"),
            (self.completion_time, "completion time must be positive"),
            (self.gamma_c, "cost parameter must be positive"),
            (self.c_max, "C_max must be positive"),
            (self.history_decay, "ζ must be positive"),
            (self.base_reward, "B must be positive"),
            (self.fairness, "J(r) must be positive"),
            (self.c_total, "C_total must be positive"),
            (1.0 - self.stake_weight, "λ_stake must be below 1"),
        ];
        for (v, msg) in positive {
            if !(v > 0.0) {
                return Err(DomainError(msg));
            }
        }
        if self.history_decay >= 1.0 {
            return Err(DomainError("ζ must be below 1"));
        }
        if self.participants == 0 {
            return Err(DomainError("population must be non-empty"));
        }
        if self.c_max <= self.c_min {
            return Err(DomainError("C_max must exceed C_min"));
        }
        Ok(())
    }

    /// Contribution value at the representative completion time.
    pub fn value(&self, c: f64) -> f64 {
        self.x_c / self.completion_time * sigmoid((c - self.c_min) / (self.c_max - self.c_min))
    }

    /// Reward the allocation rule pays a participant that contributes `c`
    /// every round while everyone stakes the same amount.
    pub fn mechanism_reward(&self, c: f64) -> f64 {
        let pool = self.base_reward * self.fairness;
        self.stake_weight * pool / self.participants as f64
            + (1.0 - self.stake_weight) * pool * c * self.decay_sum() / self.c_total
            + self.committee_reward
    }

    /// Stage-1 objective.
    pub fn margin(&self, c: f64) -> f64 {
        self.value(c) - self.mechanism_reward(c)
    }

    /// The relaxed objective `V(C) - c(C)` with the participation constraint binding.
    pub fn relaxed_profit(&self, c: f64) -> f64 {
        self.value(c) - 0.5 * self.gamma_c * c * c
    }

    pub fn cost(&self, c: f64) -> f64 {
        0.5 * self.gamma_c * c * c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormContribution {
    /// `C*` clamped to `[C_min, C_max]`.
    pub c_star: f64,
    /// `C_max ln(x - 1)`, NaN when `x <= 1`.
    pub unclamped: f64,
    pub x: f64,
    /// `x` with `C_total` and the completion time placed as printed in the
    /// usual statement of the formula. Kept for comparison only.
    pub x_as_printed: f64,
    pub interior_nonexistent: bool,
}

/// Stage-1 optimum from the first-order condition.
///
/// Equating the value slope `X_c k e^{-kC} / (τ_c (1 + e^{-kC})²)` with the
/// marginal mechanism reward `(1 - λ_stake) B J Σζ / C_total` and dropping
/// the `e^{-kC}` term of the squared denominator gives
/// `C* = ln(x - 1) / k` with
/// `x = X_c k C_total (1 - ζ) / (τ_c (1 - λ_stake) B J (1 - ζ^{τ+1}))`.
pub fn optimal_contribution_closed_form(env: &ContractEnv) -> Result<ClosedFormContribution, DomainError> {
    env.validate()?;
    let z = env.history_decay;
    let window = env.history_window as i32;
    let geometric = (1.0 - z.powi(window + 1)) / (1.0 - z);
    let marginal = (1.0 - env.stake_weight) * env.base_reward * env.fairness * geometric;
    let x = env.x_c * env.k() * env.c_total / (env.completion_time * marginal);
    let x_as_printed = env.x_c * env.k() * env.history_window as f64 / (marginal * env.c_total);
    if x <= 1.0 {
        return Ok(ClosedFormContribution {
            c_star: env.c_min,
            unclamped: f64::NAN,
            x,
            x_as_printed,
            interior_nonexistent: true,
        });
    }
    let unclamped = (x - 1.0).ln() / env.k();
    Ok(ClosedFormContribution {
        c_star: unclamped.clamp(env.c_min, env.c_max),
        unclamped,
        x,
        x_as_printed,
        interior_nonexistent: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ContractError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("degenerate contract: stake denominator is {denominator:e}")]
    DegenerateContract { denominator: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormContract {
    pub contribution: ClosedFormContribution,
    pub c_star: f64,
    pub s_star: f64,
    pub r_star: f64,
}

/// `S*` from equating the allocation rule's reward with `R*`.
pub fn stake_for_reward(env: &ContractEnv, c: f64, reward: f64) -> Result<f64, ContractError> {
    let pool = env.base_reward * env.fairness;
    let c_hist = c * env.decay_sum();
    let denominator = reward - env.committee_reward - (1.0 - env.stake_weight) * pool * c_hist / env.c_total;
    if !(denominator > 0.0) {
        return Err(ContractError::DegenerateContract { denominator });
    }
    Ok(env.stake_weight * pool / (env.participants as f64 * denominator))
}

/// `(C*, S*, R*)` with `R* = c(C*)`.
pub fn optimal_contract_closed_form(env: &ContractEnv) -> Result<ClosedFormContract, ContractError> {
    let contribution = optimal_contribution_closed_form(env)?;
    let c_star = contribution.c_star;
    let r_star = env.cost(c_star);
    let s_star = stake_for_reward(env, c_star, r_star)?;
    Ok(ClosedFormContract {
        contribution,
        c_star,
        s_star,
        r_star,
    })
}

/// Which stage-1 objective the solver maximises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `V(C) - R_mech(C)`.
    #[default]
    Mechanism,
    /// `V(C) - c(C)`, the relaxed problem with the reward tied to cost.
    Relaxed,
}

impl Objective {
    pub fn eval(self, env: &ContractEnv, c: f64) -> f64 {
        match self {
            Objective::Mechanism => env.margin(c),
            Objective::Relaxed => env.relaxed_profit(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub bounds: (f64, f64),
    pub tolerance: f64,
    pub max_evaluations: usize,
    pub grid_steps: usize,
    pub objective: Objective,
}

impl SolverOptions {
    pub fn for_env(env: &ContractEnv) -> Self {
        Self {
            bounds: (env.c_min, env.c_max),
            tolerance: 1e-6,
            max_evaluations: 10_000,
            grid_steps: 2000,
            objective: Objective::Mechanism,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub contribution: f64,
    pub reward: f64,
    pub objective: f64,
    pub steps: usize,
}

/// Exhaustive search over an evenly spaced contribution grid, with the
/// reward on the participation boundary.
pub fn grid_oracle(env: &ContractEnv, objective: Objective, bounds: (f64, f64), steps: usize) -> GridOptimum {
    let steps = steps.max(1);
    let (lo, hi) = bounds;
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..=steps {
        let c = if i == steps { hi } else { lo + (hi - lo) * i as f64 / steps as f64 };
        let v = objective.eval(env, c);
        if v > best.1 {
            best = (c, v);
        }
    }
    GridOptimum {
        contribution: best.0,
        reward: env.cost(best.0),
        objective: best.1,
        steps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub evaluations: usize,
    pub iterations: usize,
    /// `max(0, c(C*) - R*)`.
    pub ir_residual: f64,
    /// `R* - c(C*)` left by the barrier.
    pub barrier_margin: f64,
    pub grid: GridOptimum,
    /// Stage-1 objective at the grid optimum minus at the solver optimum.
    pub objective_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    pub contribution: f64,
    /// Common stake reproducing `R*` through the allocation rule; `None` when
    /// the contribution term alone already exceeds `R*`.
    pub stake: Option<f64>,
    pub reward: f64,
    /// `V(C*) - R*`.
    pub profit: f64,
    /// Stage-1 objective at `C*`.
    pub objective: f64,
    pub ir_rate: f64,
    pub min_utility: f64,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("no convergence within {evaluations} evaluations (step {step:e})")]
    Budget { evaluations: usize, step: f64 },
    #[error("invalid bounds [{0}, {1}]")]
    Bounds(f64, f64),
    #[error(transparent)]
    Contract(#[from] ContractError),
}

impl From<DomainError> for SolverError {
    fn from(e: DomainError) -> Self {
        SolverError::Contract(ContractError::Domain(e))
    }
}

/// Projected coordinate search on `[lo, hi]`; returns `(c, f(c), evals, iters)`.
fn coordinate_search(
    f: impl Fn(f64) -> f64,
    (lo, hi): (f64, f64),
    tolerance: f64,
    budget: usize,
) -> Result<(f64, f64, usize, usize), SolverError> {
    let mut c = 0.5 * (lo + hi);
    let mut fc = f(c);
    let mut evals = 1;
    let mut iters = 0;
    let mut step = 0.25 * (hi - lo);
    let stop = tolerance * (hi - lo).max(1.0);
    while step > stop {
        if evals + 2 > budget {
            return Err(SolverError::Budget { evaluations: evals, step });
        }
        iters += 1;
        let up = (c + step).min(hi);
        let down = (c - step).max(lo);
        let (fu, fd) = (f(up), f(down));
        evals += 2;
        if fu > fc && fu >= fd {
            c = up;
            fc = fu;
        } else if fd > fc {
            c = down;
            fc = fd;
        } else {
            step *= 0.5;
        }
    }
    Ok((c, fc, evals, iters))
}

/// Numerical optimum of the contract problem, validated on a dense grid.
pub fn solve_constrained(env: &ContractEnv, opts: &SolverOptions) -> Result<OptimalSolution, SolverError> {
    env.validate()?;
    let (lo, hi) = opts.bounds;
    if !(lo <= hi) || lo < env.c_min || hi > env.c_max {
        return Err(SolverError::Bounds(lo, hi));
    }
    let objective = opts.objective;
    let (c, fc, evaluations, iterations) =
        coordinate_search(|c| objective.eval(env, c), (lo, hi), opts.tolerance, opts.max_evaluations)?;

    // Stage 2: maximise V(C*) - R + μ ln(R - c(C*)); the stationary point is
    // R = c(C*) + μ.
    let cost = env.cost(c);
    let reward = cost + env.barrier;
    let stake = match stake_for_reward(env, c, reward) {
        Ok(s) => Some(s),
        Err(ContractError::DegenerateContract { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let item = ContractItem {
        theta: 1.0,
        contribution: c,
        stake: stake.unwrap_or(0.0),
        reward,
    };
    let menu = ContractMenu::new(None, vec![item], vec![1.0], (env.c_min, env.c_max))
        .expect("single in-bounds item is a valid menu");
    let ir = check_ir(&menu, &[1.0], 0.0, env.gamma_c)?;
    let grid = grid_oracle(env, objective, opts.bounds, opts.grid_steps);

    Ok(OptimalSolution {
        contribution: c,
        stake,
        reward,
        profit: env.value(c) - reward,
        objective: fc,
        ir_rate: ir.rate,
        min_utility: ir.min_utility,
        diagnostics: SolverDiagnostics {
            evaluations,
            iterations,
            ir_residual: (cost - reward).max(0.0),
            barrier_margin: reward - cost,
            grid,
            objective_gap: grid.objective - fc,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn env() -> ContractEnv {
        ContractEnv::from_config(&SystemConfig::default())
    }

    fn item(theta: f64, c: f64, s: f64, r: f64) -> ContractItem {
        ContractItem {
            theta,
            contribution: c,
            stake: s,
            reward: r,
        }
    }

    #[test]
    fn value_examples() {
        let v = contribution_value(10.0, 1.0, 50.0, 0.0, 10.0).unwrap();
        assert!((v - 50.0 * sigmoid(1.0)).abs() < 1e-12);
        assert!((v - 36.553).abs() < 1e-3);
        assert_eq!(contribution_value(0.0, 1.0, 50.0, 0.0, 10.0).unwrap(), 25.0);
        let half = contribution_value(6.0, 2.0, 50.0, 0.0, 10.0).unwrap();
        assert!((2.0 * half - contribution_value(6.0, 1.0, 50.0, 0.0, 10.0).unwrap()).abs() < 1e-12);
        assert!(contribution_value(1.0, 0.0, 50.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn cost_examples() {
        assert_eq!(effort_cost(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(effort_cost(10.0, 0.5).unwrap(), 25.0);
        assert!(effort_cost(1.0, 0.0).is_err());
        let (a, b) = (2.0, 7.0);
        let c = |x| effort_cost(x, 0.5).unwrap();
        assert!(c(a) + c(b) > 2.0 * c((a + b) / 2.0));
    }

    #[test]
    fn compliance_examples() {
        assert_eq!(compliance(&ComplianceInput::none(), 1.0), 1.0);
        let one = ComplianceInput::new(vec![(0.3, 0.5)]).unwrap();
        assert!((compliance(&one, 1.0) - 0.8607).abs() < 1e-4);
        let severe = ComplianceInput::new(vec![(1.0, 1.0)]).unwrap();
        assert_eq!(compliance(&severe, 1.0), 0.0);
        assert!(ComplianceInput::new(vec![(0.3, 1.5)]).is_err());
        assert!(ComplianceInput::new(vec![(-0.1, 0.5)]).is_err());
    }

    #[test]
    fn utility_and_profit_examples() {
        let it = item(1.0, 10.0, 100.0, 50.0);
        assert_eq!(participant_utility(&it, 1.0, 0.1, 0.5).unwrap(), 25.0);
        assert!((participant_utility(&it, 0.0, 0.1, 0.5).unwrap() + 35.0).abs() < 1e-12);
        let binding = item(1.0, 10.0, 100.0, 25.0);
        assert_eq!(participant_utility(&binding, 1.0, 0.1, 0.5).unwrap(), 0.0);

        assert!((publisher_profit(&binding, 36.55, 1.0, 0.1) - 11.55).abs() < 1e-9);
        assert!((publisher_profit(&binding, 1e6, 0.0, 0.1) - 10.0).abs() < 1e-12);
        assert_eq!(publisher_profit(&binding, 25.0, 1.0, 0.1), 0.0);
    }

    #[test]
    fn expected_profit_examples() {
        let b = (0.0, 10.0);
        let single = ContractMenu::new(None, vec![item(1.0, 10.0, 0.0, 25.0)], vec![1.0], b).unwrap();
        assert_eq!(expected_profit(&single, &[36.0], &[1.0], 0.1).unwrap(), 11.0);

        let it = item(2.0, 5.0, 0.0, 5.0);
        let twin = ContractMenu::new(None, vec![it, ContractItem { theta: 1.0, ..it }], vec![0.5, 0.5], b).unwrap();
        assert!((expected_profit(&twin, &[15.0, 15.0], &[1.0, 1.0], 0.1).unwrap() - 10.0).abs() < 1e-12);

        let two = ContractMenu::new(
            None,
            vec![item(2.0, 5.0, 0.0, 0.0), item(1.0, 5.0, 0.0, 0.0)],
            vec![0.3, 0.7],
            b,
        )
        .unwrap();
        assert!((expected_profit(&two, &[10.0, 20.0], &[1.0, 1.0], 0.1).unwrap() - 17.0).abs() < 1e-12);

        assert!(matches!(
            ContractMenu::new(None, vec![item(1.0, 1.0, 0.0, 0.0)], vec![0.9], b),
            Err(MenuError::Probability(_))
        ));
        assert!(matches!(
            ContractMenu::new(None, vec![item(1.0, 1.0, 0.0, 0.0), item(1.0, 1.0, 0.0, 0.0)], vec![0.5, 0.5], b),
            Err(MenuError::TypeOrder(1))
        ));
    }

    #[test]
    fn ir_examples() {
        let b = (0.0, 10.0);
        let items: Vec<_> = [9.0, 6.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &c)| item(3.0 - i as f64, c, 10.0, effort_cost(c, 0.5).unwrap()))
            .collect();
        let menu = ContractMenu::uniform(None, items.clone(), b).unwrap();
        let r = check_ir(&menu, &[1.0; 3], 0.1, 0.5).unwrap();
        assert_eq!(r.rate, 1.0);
        assert_eq!(r.min_utility, 0.0);

        let short: Vec<_> = items.iter().map(|it| ContractItem { reward: it.reward - 1.0, ..*it }).collect();
        let menu = ContractMenu::uniform(None, short, b).unwrap();
        assert_eq!(check_ir(&menu, &[1.0; 3], 0.1, 0.5).unwrap().rate, 0.0);
    }

    #[test]
    fn ic_examples() {
        let b = (0.0, 10.0);
        let cost = |_theta: f64, c: f64| 0.25 * c * c;

        let single = ContractMenu::uniform(None, vec![item(1.0, 4.0, 0.0, 4.0)], b).unwrap();
        let r = check_ic(&utility_matrix(&single, 1.0, 0.1, cost));
        assert!(r.satisfied[0] && r.worst_margin == 0.0);

        // Item 2 asks for less work at the same pay, so type 1 prefers it.
        let dominated = ContractMenu::uniform(None, vec![item(2.0, 8.0, 0.0, 16.0), item(1.0, 2.0, 0.0, 16.0)], b).unwrap();
        let u = utility_matrix(&dominated, 1.0, 0.1, cost);
        let r = check_ic(&u);
        assert!(!r.satisfied[0]);
        let brute = (u[0][1] - u[0][0]).max(0.0);
        assert!((r.worst_margin - brute).abs() < 1e-12 && brute > 0.0);

        let same = item(1.0, 5.0, 1.0, 6.0);
        let menu = ContractMenu::uniform(None, vec![ContractItem { theta: 2.0, ..same }, same], b).unwrap();
        let r = check_ic(&utility_matrix(&menu, 1.0, 0.1, cost));
        assert!(r.satisfied.iter().all(|&s| s));
        assert!(r.margins.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn closed_form_defaults() {
        let e = env();
        assert!((e.c_total - 4685.5).abs() < 1.0);
        let cf = optimal_contribution_closed_form(&e).unwrap();
        assert!(!cf.interior_nonexistent);
        assert!(cf.x > 2.0 && cf.unclamped > e.c_max);
        assert_eq!(cf.c_star, 10.0);
        // The printed arrangement puts C_total in the denominator and lands
        // far below 1.
        assert!(cf.x_as_printed < 1e-3);
    }

    #[test]
    fn closed_form_tuning_identity() {
        // Choose X_c so that x = 1 + e exactly.
        let mut e = env();
        let base = optimal_contribution_closed_form(&e).unwrap().x;
        e.x_c *= (1.0 + std::f64::consts::E) / base;
        let cf = optimal_contribution_closed_form(&e).unwrap();
        assert!((cf.x - 1.0 - std::f64::consts::E).abs() < 1e-12);
        assert!((cf.unclamped - e.c_max).abs() < 1e-9);
        assert!(((cf.x - 1.0).ln() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_without_interior() {
        let mut e = env();
        e.c_total = 1.0;
        let cf = optimal_contribution_closed_form(&e).unwrap();
        assert!(cf.x <= 1.0);
        assert!(cf.interior_nonexistent);
        assert_eq!(cf.c_star, e.c_min);
        e.x_c = -1.0;
        assert!(optimal_contribution_closed_form(&e).is_err());
    }

    #[test]
    fn closed_form_contract() {
        let e = env();
        let k = optimal_contract_closed_form(&e).unwrap();
        assert_eq!(k.r_star, 25.0);
        let term = 0.6 * 1200.0 * 10.0 * e.decay_sum() / e.c_total;
        assert!((k.s_star - 480.0 / (100.0 * (25.0 - term))).abs() < 1e-12);
    }

    #[test]
    fn stake_formula_example() {
        // Contribution term of 20 with R* = 25 leaves a denominator of 5.
        let mut e = env();
        e.participants = 100;
        let pool = e.base_reward;
        let c = 20.0 * e.c_total / ((1.0 - e.stake_weight) * pool * e.decay_sum());
        let s = stake_for_reward(&e, c, 25.0).unwrap();
        assert!((s - 0.96).abs() < 1e-12);

        let c_exact = 25.0 * e.c_total / ((1.0 - e.stake_weight) * pool * e.decay_sum());
        let err = stake_for_reward(&e, c_exact * (1.0 + 1e-12), 25.0).unwrap_err();
        assert!(matches!(err, ContractError::DegenerateContract { denominator } if denominator <= 0.0));
    }

    #[test]
    fn solver_defaults() {
        let e = env();
        let sol = solve_constrained(&e, &SolverOptions::for_env(&e)).unwrap();
        assert_eq!(sol.contribution, 10.0);
        assert!((sol.reward - 25.0).abs() <= 1e-6);
        assert!((sol.reward - sol.diagnostics.grid.reward).abs() <= 1e-6);
        assert_eq!(sol.ir_rate, 1.0);
        assert!(sol.min_utility > 0.0);
        assert_eq!(sol.diagnostics.ir_residual, 0.0);
        assert!(sol.diagnostics.objective_gap.abs() <= 1e-3);
        let cf = optimal_contribution_closed_form(&e).unwrap();
        assert!((cf.c_star - sol.contribution).abs() <= 1e-3 * e.c_max);
    }

    #[test]
    fn solver_tightened_bound() {
        let e = env();
        let opts = SolverOptions {
            bounds: (0.0, 5.0),
            ..SolverOptions::for_env(&e)
        };
        let sol = solve_constrained(&e, &opts).unwrap();
        assert_eq!(sol.contribution, 5.0);
        assert!((sol.reward - 6.25).abs() <= 1e-6);
        assert_eq!(sol.diagnostics.grid.contribution, 5.0);
    }

    #[test]
    fn relaxed_objective_has_interior_optimum() {
        let e = env();
        let opts = SolverOptions {
            objective: Objective::Relaxed,
            ..SolverOptions::for_env(&e)
        };
        let sol = solve_constrained(&e, &opts).unwrap();
        assert!(sol.contribution > 2.0 && sol.contribution < 3.0);
        assert!(sol.diagnostics.objective_gap.abs() <= 1e-3);
        // Stationarity of V(C) - c(C).
        let h = 1e-5;
        let d = (e.relaxed_profit(sol.contribution + h) - e.relaxed_profit(sol.contribution - h)) / (2.0 * h);
        assert!(d.abs() < 1e-3);
    }

    #[test]
    fn solver_budget_exhaustion() {
        let e = env();
        let opts = SolverOptions {
            max_evaluations: 4,
            ..SolverOptions::for_env(&e)
        };
        assert!(matches!(solve_constrained(&e, &opts), Err(SolverError::Budget { .. })));
    }

    #[test]
    fn profit_decreases_in_reward() {
        let it = item(1.0, 10.0, 0.0, 25.0);
        let more = ContractItem { reward: 26.0, ..it };
        assert!(publisher_profit(&more, 36.5, 1.0, 0.1) < publisher_profit(&it, 36.5, 1.0, 0.1));
    }

    proptest! {
        #[test]
        fn value_monotone(c in 0.0f64..9.9, dc in 0.01f64..0.1, tau in 0.1f64..3.0, dt in 0.01f64..1.0) {
            let v = |c, t| contribution_value(c, t, 50.0, 0.0, 10.0).unwrap();
            prop_assert!(v(c + dc, tau) > v(c, tau));
            prop_assert!(v(c, tau + dt) < v(c, tau));
        }

        #[test]
        fn monotone_menu_has_zero_ic_margins(mut cs in prop::collection::vec(0.0f64..10.0, 2..6)) {
            cs.sort_by(|a, b| b.total_cmp(a));
            let n = cs.len();
            let items: Vec<_> = cs.iter().enumerate()
                .map(|(i, &c)| item((n - i) as f64, c, 0.0, effort_cost(c, 0.5).unwrap()))
                .collect();
            let menu = ContractMenu::uniform(None, items, (0.0, 10.0)).unwrap();
            let r = check_ic(&utility_matrix(&menu, 1.0, 0.1, |_, c| effort_cost(c, 0.5).unwrap()));
            prop_assert!(r.margins.iter().all(|&m| m >= -1e-9 && m <= 1e-9));
        }

        #[test]
        fn solver_matches_grid(x_c in 5.0f64..200.0, gamma_c in 0.05f64..2.0, hi in 1.0f64..10.0) {
            let mut e = env();
            e.x_c = x_c;
            e.gamma_c = gamma_c;
            for objective in [Objective::Mechanism, Objective::Relaxed] {
                let opts = SolverOptions { bounds: (0.0, hi), objective, ..SolverOptions::for_env(&e) };
                let sol = solve_constrained(&e, &opts).unwrap();
                prop_assert!(sol.diagnostics.objective_gap <= 1e-3);
                prop_assert!(sol.reward >= e.cost(sol.contribution));
            }
        }
    }
}
