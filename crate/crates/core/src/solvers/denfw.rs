use rayon::prelude::*;

use super::{check_feasible, Counters, RoundSolver, SolverError, StepSchedule};
use crate::constraint::ConstraintSet;
use crate::graph::MixingMatrix;
use crate::problem::FiniteSumProblem;

/// Decentralized deterministic Frank-Wolfe with gradient tracking.
///
/// Per iteration: (1) mix `x`; (2) full local gradient at the mixed point;
/// (3) tracking update `s_i = p_i + grad_i - grad_i_prev`, mixed again to give
/// the new `p_i`; (4) Frank-Wolfe step from the mixed point along `p_i`.
/// Two communication rounds per iteration.
pub struct DenFw<'a> {
    problem: &'a FiniteSumProblem,
    mixing: &'a MixingMatrix,
    set: &'a dyn ConstraintSet,
    step: StepSchedule,
    x: Vec<Vec<f64>>,
    /// Mixed tracked gradient of the last iteration (zero before the first).
    p: Vec<Vec<f64>>,
    /// Local gradients of the last iteration (zero before the first).
    grads: Vec<Vec<f64>>,
    ifo: u64,
    lo: u64,
    comm_rounds: u64,
}

/// One agent's first-phase output: mixed point, gradient there, and the
/// tracking surrogate to be mixed.
struct MixedPoint {
    x: Vec<f64>,
    grad: Vec<f64>,
    s: Vec<f64>,
    ifo: u64,
}

impl<'a> DenFw<'a> {
    pub fn new(
        problem: &'a FiniteSumProblem,
        mixing: &'a MixingMatrix,
        set: &'a dyn ConstraintSet,
        step: StepSchedule,
        x0: &[f64],
    ) -> Result<Self, SolverError> {
        let m = problem.agents();
        if mixing.agents() != m {
            return Err(SolverError::Setup(format!("{m} local datasets, {} mixing rows", mixing.agents())));
        }
        if x0.len() != problem.dim() || set.dim() != problem.dim() {
            return Err(SolverError::Setup("initial point, constraint and data dimensions differ".into()));
        }
        check_feasible(set, x0, 0, 1)?;
        let zeros = vec![vec![0.0; problem.dim()]; m];
        Ok(DenFw {
            problem,
            mixing,
            set,
            step,
            x: vec![x0.to_vec(); m],
            p: zeros.clone(),
            grads: zeros,
            ifo: 0,
            lo: 0,
            comm_rounds: 0,
        })
    }

    /// Local gradients from the most recent iteration, evaluated at each
    /// agent's mixed point.
    pub fn local_gradients(&self) -> &[Vec<f64>] {
        &self.grads
    }

    /// Network average of the tracked gradients.
    pub fn tracked_average(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.problem.dim()];
        for p in &self.p {
            avg.iter_mut().zip(p).for_each(|(a, v)| *a += v);
        }
        avg.iter_mut().for_each(|a| *a /= self.p.len() as f64);
        avg
    }
}

impl RoundSolver for DenFw<'_> {
    fn name(&self) -> &'static str {
        "denfw"
    }

    fn iterates(&self) -> Vec<&[f64]> {
        self.x.iter().map(Vec::as_slice).collect()
    }

    fn counters(&self) -> Counters {
        Counters { ifo: self.ifo, lo: self.lo, comm_rounds: self.comm_rounds }
    }

    fn gamma(&self, k: usize) -> f64 {
        self.step.gamma(k)
    }

    fn round(&mut self, k: usize) -> Result<(), SolverError> {
        let gamma = self.step.gamma(k);
        let dim = self.problem.dim();
        let m = self.x.len();

        // First exchange: x. Local gradients at the mixed points.
        let local: Vec<MixedPoint> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut x_mix = vec![0.0; dim];
                self.mixing.mix_into(i, |j| &self.x[j], &mut x_mix);
                let mut ifo = 0;
                let grad = self.problem.local_gradient(i, &x_mix, &mut ifo);
                let s = self.p[i].iter().zip(&grad).zip(&self.grads[i]).map(|((p, gn), go)| p + gn - go).collect();
                MixedPoint { x: x_mix, grad, s, ifo }
            })
            .collect();

        // Second exchange: the tracking surrogate s. Then the FW step.
        let stepped = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut p = vec![0.0; dim];
                self.mixing.mix_into(i, |j| &local[j].s, &mut p);
                let vertex = self.set.lmo(&p)?;
                let mut x = vec![0.0; dim];
                vertex.combine_into(&local[i].x, gamma, &mut x);
                check_feasible(self.set, &x, i, k + 1)?;
                Ok((x, p))
            })
            .collect::<Result<Vec<(Vec<f64>, Vec<f64>)>, SolverError>>()?;

        for (i, ((x, p), point)) in stepped.into_iter().zip(local).enumerate() {
            self.x[i] = x;
            self.p[i] = p;
            self.grads[i] = point.grad;
            self.ifo += point.ifo;
        }
        self.lo += m as u64;
        self.comm_rounds += 2;
        Ok(())
    }
}
