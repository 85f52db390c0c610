//! `contract-opt`: closed-form and numerical optimal contract as JSON.

use std::path::Path;

use fedrep::contract::{
    optimal_contract_closed_form, solve_constrained, ClosedFormContract, ContractEnv, Objective, OptimalSolution,
    SolverOptions,
};
use serde::Serialize;

use crate::{load_config, CliError};

/// Worst acceptable solver-vs-grid objective gap.
pub const GAP_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Default)]
pub struct ContractOptions {
    /// Upper contribution bound, `C_max` when absent.
    pub c_upper: Option<f64>,
    pub objective: Objective,
    /// Cost parameters to evaluate; the configured one when empty.
    pub gamma_c: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractCase {
    pub gamma_c: f64,
    /// Absent when the stake equation has no positive root.
    pub closed_form: Option<ClosedFormContract>,
    pub closed_form_error: Option<String>,
    pub solver: OptimalSolution,
    pub agreement: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractReport {
    pub environment: ContractEnv,
    pub options: SolverOptions,
    pub cases: Vec<ContractCase>,
}

impl ContractReport {
    pub fn ok(&self) -> bool {
        self.cases.iter().all(|c| c.ok)
    }
}

pub fn contract_opt(config_path: Option<&Path>, opts: &ContractOptions) -> Result<ContractReport, CliError> {
    let cfg = load_config(config_path)?;
    let base = ContractEnv::from_config(&cfg);
    let mut solver_opts = SolverOptions::for_env(&base);
    solver_opts.objective = opts.objective;
    if let Some(hi) = opts.c_upper {
        solver_opts.bounds.1 = hi;
    }
    let gammas = if opts.gamma_c.is_empty() { vec![base.gamma_c] } else { opts.gamma_c.clone() };

    let mut cases = Vec::new();
    for gamma_c in gammas {
        let env = ContractEnv { gamma_c, ..base };
        let solver = solve_constrained(&env, &solver_opts).map_err(|e| CliError::Failed(format!("γ_c = {gamma_c}: {e}")))?;
        let (closed_form, closed_form_error) = match optimal_contract_closed_form(&env) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let agreement = closed_form.map_or(f64::NAN, |c| {
            (c.c_star.min(solver_opts.bounds.1) - solver.contribution).abs()
        });
        let residual_ok = solver.diagnostics.ir_residual <= solver_opts.tolerance;
        let ok = residual_ok && solver.diagnostics.objective_gap <= GAP_TOLERANCE && solver.ir_rate == 1.0;
        cases.push(ContractCase {
            gamma_c,
            closed_form,
            closed_form_error,
            solver,
            agreement,
            ok,
        });
    }
    Ok(ContractReport {
        environment: base,
        options: solver_opts,
        cases,
    })
}
