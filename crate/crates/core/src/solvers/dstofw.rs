use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_feasible, Counters, RoundSolver, SolverError, StepSchedule};
use crate::constraint::ConstraintSet;
use crate::graph::MixingMatrix;
use crate::problem::FiniteSumProblem;
use crate::sampling::{draw_sample_set, SamplingSchedule};

/// One agent's iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Vec<f64>,
    /// Decision vector of the previous iterate.
    pub x_prev: Vec<f64>,
    /// Variance-reduced local gradient estimate.
    pub v: Vec<f64>,
    /// Tracked gradient before mixing.
    pub g: Vec<f64>,
    /// Tracked gradient after mixing; drives the oracle.
    pub d: Vec<f64>,
    pub ifo_count: u64,
    pub lo_count: u64,
}

/// `max |avg(d) - avg(v)|` and `max |avg(d) - avg(g)|` over coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingResidual {
    pub d_minus_v: f64,
    pub d_minus_g: f64,
}

/// Distributed stochastic Frank-Wolfe with SPIDER-style variance reduction
/// and gradient tracking. One communication round per iteration carries
/// each agent's `(x, g)` pair.
pub struct DstoFw<'a> {
    problem: &'a FiniteSumProblem,
    mixing: &'a MixingMatrix,
    set: &'a dyn ConstraintSet,
    step: StepSchedule,
    schedules: Vec<SamplingSchedule>,
    states: Vec<AgentState>,
    rngs: Vec<ChaCha8Rng>,
    comm_rounds: u64,
}

/// Output of the local phase of a round, before gradient mixing.
struct LocalUpdate {
    x: Vec<f64>,
    v: Vec<f64>,
    g: Vec<f64>,
    ifo: u64,
}

impl<'a> DstoFw<'a> {
    /// Every agent starts at `x0` with `d = v = g = grad f_i(x0)`, which costs
    /// `n_i` IFO calls per agent. Agent `i` samples from stream `i` of a
    /// ChaCha generator seeded with `sampling_seed`.
    pub fn new(
        problem: &'a FiniteSumProblem,
        mixing: &'a MixingMatrix,
        set: &'a dyn ConstraintSet,
        step: StepSchedule,
        schedules: Vec<SamplingSchedule>,
        x0: &[f64],
        sampling_seed: u64,
    ) -> Result<Self, SolverError> {
        let m = problem.agents();
        if mixing.agents() != m || schedules.len() != m {
            return Err(SolverError::Setup(format!(
                "{m} local datasets, {} mixing rows, {} schedules",
                mixing.agents(),
                schedules.len()
            )));
        }
        if x0.len() != problem.dim() || set.dim() != problem.dim() {
            return Err(SolverError::Setup("initial point, constraint and data dimensions differ".into()));
        }
        check_feasible(set, x0, 0, 1)?;
        let states = (0..m)
            .map(|i| {
                let mut ifo = 0;
                let grad = problem.local_gradient(i, x0, &mut ifo);
                AgentState {
                    x: x0.to_vec(),
                    x_prev: x0.to_vec(),
                    v: grad.clone(),
                    g: grad.clone(),
                    d: grad,
                    ifo_count: ifo,
                    lo_count: 0,
                }
            })
            .collect();
        let rngs = (0..m)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(sampling_seed);
                rng.set_stream(i as u64);
                rng
            })
            .collect();
        Ok(DstoFw { problem, mixing, set, step, schedules, states, rngs, comm_rounds: 0 })
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn schedules(&self) -> &[SamplingSchedule] {
        &self.schedules
    }

    fn mean_of(&self, pick: impl Fn(&AgentState) -> &[f64]) -> Vec<f64> {
        let mut avg = vec![0.0; self.problem.dim()];
        for s in &self.states {
            avg.iter_mut().zip(pick(s)).for_each(|(a, v)| *a += v);
        }
        let inv = 1.0 / self.states.len() as f64;
        avg.iter_mut().for_each(|a| *a *= inv);
        avg
    }

    /// Network average of the mixed tracked gradients.
    pub fn tracked_average(&self) -> Vec<f64> {
        self.mean_of(|s| &s.d)
    }

    /// How far the averages of `d`, `v` and `g` are from coinciding.
    pub fn tracking_residual(&self) -> TrackingResidual {
        let d = self.tracked_average();
        let v = self.mean_of(|s| &s.v);
        let g = self.mean_of(|s| &s.g);
        let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        TrackingResidual { d_minus_v: max_diff(&d, &v), d_minus_g: max_diff(&d, &g) }
    }

    fn local_update(&self, i: usize, k: usize, gamma: f64, rng: &mut ChaCha8Rng) -> Result<LocalUpdate, SolverError> {
        let state = &self.states[i];
        let local = self.problem.local(i);
        let objective = self.problem.objective();
        let dim = self.problem.dim();

        // Consensus on x, then the Frank-Wolfe step along the tracked gradient.
        let mut x_mix = vec![0.0; dim];
        self.mixing.mix_into(i, |j| &self.states[j].x, &mut x_mix);
        let vertex = self.set.lmo(&state.d)?;
        let mut x = vec![0.0; dim];
        vertex.combine_into(&x_mix, gamma, &mut x);
        check_feasible(self.set, &x, i, k + 1)?;

        let schedule = &self.schedules[i];
        let mut ifo = 0;
        let v = if schedule.is_refresh(k) {
            local.full_gradient(&x, objective, &mut ifo)
        } else {
            let size = schedule.sample_size(k)?;
            let picks = draw_sample_set(rng, local.len(), size)?;
            let scale = 1.0 / size as f64;
            let mut diff = vec![0.0; dim];
            for j in picks {
                let s = local.sample(j);
                s.add_gradient(&x, objective, scale, &mut diff);
                s.add_gradient(&state.x, objective, -scale, &mut diff);
            }
            ifo += 2 * size as u64;
            diff.iter().zip(&state.v).map(|(a, b)| a + b).collect()
        };
        let g = state.d.iter().zip(&v).zip(&state.v).map(|((d, vn), vo)| d + vn - vo).collect();
        Ok(LocalUpdate { x, v, g, ifo })
    }
}

impl RoundSolver for DstoFw<'_> {
    fn name(&self) -> &'static str {
        "dstofw"
    }

    fn iterates(&self) -> Vec<&[f64]> {
        self.states.iter().map(|s| s.x.as_slice()).collect()
    }

    fn counters(&self) -> Counters {
        Counters {
            ifo: self.states.iter().map(|s| s.ifo_count).sum(),
            lo: self.states.iter().map(|s| s.lo_count).sum(),
            comm_rounds: self.comm_rounds,
        }
    }

    fn gamma(&self, k: usize) -> f64 {
        self.step.gamma(k)
    }

    fn round(&mut self, k: usize) -> Result<(), SolverError> {
        let gamma = self.step.gamma(k);
        let mut rngs = std::mem::take(&mut self.rngs);
        let updates: Result<Vec<LocalUpdate>, SolverError> = {
            let this = &*self;
            rngs.par_iter_mut().enumerate().map(|(i, rng)| this.local_update(i, k, gamma, rng)).collect()
        };
        self.rngs = rngs;
        let updates = updates?;

        let dim = self.problem.dim();
        let mixed: Vec<Vec<f64>> = (0..updates.len())
            .into_par_iter()
            .map(|i| {
                let mut d = vec![0.0; dim];
                self.mixing.mix_into(i, |j| &updates[j].g, &mut d);
                d
            })
            .collect();

        for ((state, update), d) in self.states.iter_mut().zip(updates).zip(mixed) {
            state.x_prev = std::mem::replace(&mut state.x, update.x);
            state.v = update.v;
            state.g = update.g;
            state.d = d;
            state.ifo_count += update.ifo;
            state.lo_count += 1;
        }
        self.comm_rounds += 1;
        Ok(())
    }
}
