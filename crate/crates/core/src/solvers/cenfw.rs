use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_feasible, Counters, RoundSolver, SolverError, StepSchedule};
use crate::constraint::ConstraintSet;
use crate::problem::FiniteSumProblem;
use crate::sampling::draw_sample_set;

/// Centralized SPIDER Frank-Wolfe on a single node.
///
/// Epochs have length `q`: the estimator is reset to the full gradient at
/// `k = 1` and whenever `k % q == 0`; in between it is updated with the
/// path-integrated difference over a fixed mini-batch of `batch` samples.
pub struct CenFw<'a> {
    problem: &'a FiniteSumProblem,
    set: &'a dyn ConstraintSet,
    step: StepSchedule,
    q: usize,
    batch: usize,
    x: Vec<f64>,
    x_prev: Vec<f64>,
    v: Vec<f64>,
    rng: ChaCha8Rng,
    ifo: u64,
    lo: u64,
}

impl<'a> CenFw<'a> {
    /// `problem` must hold a single local dataset.
    pub fn new(
        problem: &'a FiniteSumProblem,
        set: &'a dyn ConstraintSet,
        step: StepSchedule,
        q: usize,
        batch: usize,
        x0: &[f64],
        seed: u64,
    ) -> Result<Self, SolverError> {
        if problem.agents() != 1 {
            return Err(SolverError::Setup(format!("CenFW runs on one node, got {} datasets", problem.agents())));
        }
        let n = problem.local(0).len();
        if q == 0 || batch == 0 || batch > n {
            return Err(SolverError::Setup(format!("need q >= 1 and 1 <= batch <= {n}, got q={q}, batch={batch}")));
        }
        if x0.len() != problem.dim() || set.dim() != problem.dim() {
            return Err(SolverError::Setup("initial point, constraint and data dimensions differ".into()));
        }
        check_feasible(set, x0, 0, 1)?;
        Ok(CenFw {
            problem,
            set,
            step,
            q,
            batch,
            x: x0.to_vec(),
            x_prev: x0.to_vec(),
            v: vec![0.0; problem.dim()],
            rng: ChaCha8Rng::seed_from_u64(seed),
            ifo: 0,
            lo: 0,
        })
    }

    pub fn is_refresh(&self, k: usize) -> bool {
        k == 1 || k.is_multiple_of(self.q)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl RoundSolver for CenFw<'_> {
    fn name(&self) -> &'static str {
        "cenfw"
    }

    fn iterates(&self) -> Vec<&[f64]> {
        vec![&self.x]
    }

    fn counters(&self) -> Counters {
        Counters { ifo: self.ifo, lo: self.lo, comm_rounds: 0 }
    }

    fn gamma(&self, k: usize) -> f64 {
        self.step.gamma(k)
    }

    fn round(&mut self, k: usize) -> Result<(), SolverError> {
        let local = self.problem.local(0);
        let objective = self.problem.objective();
        if self.is_refresh(k) {
            self.v = local.full_gradient(&self.x, objective, &mut self.ifo);
        } else {
            let picks = draw_sample_set(&mut self.rng, local.len(), self.batch)?;
            let scale = 1.0 / self.batch as f64;
            let mut diff = vec![0.0; self.x.len()];
            for j in picks {
                let s = local.sample(j);
                s.add_gradient(&self.x, objective, scale, &mut diff);
                s.add_gradient(&self.x_prev, objective, -scale, &mut diff);
            }
            self.v.iter_mut().zip(&diff).for_each(|(v, d)| *v += d);
            self.ifo += 2 * self.batch as u64;
        }
        let vertex = self.set.lmo(&self.v)?;
        let mut next = vec![0.0; self.x.len()];
        vertex.combine_into(&self.x, self.step.gamma(k), &mut next);
        check_feasible(self.set, &next, 0, k + 1)?;
        self.x_prev = std::mem::replace(&mut self.x, next);
        self.lo += 1;
        Ok(())
    }
}
