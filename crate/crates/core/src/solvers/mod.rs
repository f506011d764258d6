//! Round-based solvers: DstoFW and the DenFW / CenFW baselines.
//!
//! Every solver advances in synchronous rounds. Within a round each agent
//! reads only the round-start snapshot of its neighbours and writes its own
//! next state, so agents are stepped in parallel without affecting results.

mod cenfw;
mod denfw;
mod dstofw;
mod step;

pub use cenfw::CenFw;
pub use denfw::DenFw;
pub use dstofw::{AgentState, DstoFw, TrackingResidual};
pub use step::{step_size, StepSchedule};

pub use crate::metrics::{IterationRecord, RunLog};

use thiserror::Error;

use crate::constraint::{ConstraintError, ConstraintSet};
use crate::metrics::{average, consensus_error, fw_gap};
use crate::problem::FiniteSumProblem;
use crate::sampling::SamplingError;

/// Iterates must stay within this distance of the constraint set.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("agent {agent} left the constraint set at iteration {k} (norm {norm})")]
    Infeasible { agent: usize, k: usize, norm: f64 },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("invariant violated at iteration {k}: {msg}")]
    Invariant { k: usize, msg: String },
    #[error("{0}")]
    Setup(String),
}

/// Cumulative oracle and communication counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub ifo: u64,
    pub lo: u64,
    pub comm_rounds: u64,
}

/// One synchronous multi-agent method.
pub trait RoundSolver {
    fn name(&self) -> &'static str;

    /// Current decision vector of every agent.
    fn iterates(&self) -> Vec<&[f64]>;

    fn counters(&self) -> Counters;

    /// Step size applied at iteration `k`.
    fn gamma(&self, k: usize) -> f64;

    /// Advances from iterate `k` to `k + 1`.
    fn round(&mut self, k: usize) -> Result<(), SolverError>;
}

/// Runs `iters` rounds, logging iterate 1 and every `log_every`-th iterate
/// after it, plus the final one. `after_round` sees the solver after each
/// round and may abort the run.
pub fn drive<S, F>(
    solver: &mut S,
    problem: &FiniteSumProblem,
    set: &dyn ConstraintSet,
    iters: usize,
    log_every: usize,
    mut after_round: F,
) -> Result<RunLog, SolverError>
where
    S: RoundSolver,
    F: FnMut(&S, usize) -> Result<(), SolverError>,
{
    let log_every = log_every.max(1);
    let mut log = RunLog { solver: solver.name().to_string(), iters, ..Default::default() };
    let mut eval_ifo = 0u64;
    log.records.push(evaluate(solver, problem, set, 1, &mut eval_ifo)?);
    for k in 1..=iters {
        solver.round(k)?;
        after_round(solver, k)?;
        if k % log_every == 0 || k == iters {
            log.records.push(evaluate(solver, problem, set, k + 1, &mut eval_ifo)?);
        }
    }
    log.final_iterates = solver.iterates().into_iter().map(<[f64]>::to_vec).collect();
    Ok(log)
}

fn evaluate<S: RoundSolver>(
    solver: &S,
    problem: &FiniteSumProblem,
    set: &dyn ConstraintSet,
    k: usize,
    eval_ifo: &mut u64,
) -> Result<IterationRecord, SolverError> {
    let iterates = solver.iterates();
    let x_bar = average(&iterates);
    let (loss, grad) = problem.loss_and_gradient(&x_bar, eval_ifo);
    let counters = solver.counters();
    Ok(IterationRecord {
        k,
        gamma: solver.gamma(k),
        loss,
        fw_gap: fw_gap(&x_bar, &grad, set)?,
        consensus_err: consensus_error(&iterates),
        ifo_cum: counters.ifo,
        lo_cum: counters.lo,
        comm_rounds_cum: counters.comm_rounds,
        eval_ifo_cum: *eval_ifo,
    })
}

pub(crate) fn check_feasible(set: &dyn ConstraintSet, x: &[f64], agent: usize, k: usize) -> Result<(), SolverError> {
    if set.contains(x, FEASIBILITY_TOL) {
        Ok(())
    } else {
        Err(SolverError::Infeasible { agent, k, norm: x.iter().map(|v| v.abs()).sum() })
    }
}
