mod common;

use common::{max_abs_diff, mixing, oracle_local_gradient, synthetic_problem};
use dstofw::constraint::{lmo_l1, L1Ball};
use dstofw::graph::TopologyKind;
use dstofw::problem::{FiniteSumProblem, Objective};
use dstofw::sampling::{epoch_length, SamplingSchedule, SizeRule};
use dstofw::solvers::{drive, CenFw, DenFw, DstoFw, RoundSolver, RunLog, SolverError, StepSchedule};

fn schedules(problem: &FiniteSumProblem, q: usize, step: StepSchedule, full_batch: bool) -> Vec<SamplingSchedule> {
    problem
        .locals()
        .iter()
        .map(|l| SamplingSchedule::new(q, l.len(), step, SizeRule::Backward).unwrap().with_full_batch(full_batch))
        .collect()
}

fn dstofw_log(problem: &FiniteSumProblem, iters: usize, log_every: usize, seed: u64) -> RunLog {
    let w = mixing(TopologyKind::Ring, problem.agents());
    let set = L1Ball::new(10.0, problem.dim()).unwrap();
    let step = StepSchedule::Harmonic;
    let q = epoch_length(problem.local(0).len(), problem.objective());
    let x0 = vec![0.0; problem.dim()];
    let mut solver = DstoFw::new(problem, &w, &set, step, schedules(problem, q, step, false), &x0, seed).unwrap();
    drive(&mut solver, problem, &set, iters, log_every, |_, _| Ok(())).unwrap()
}

#[test]
fn single_agent_full_batch_is_classical_frank_wolfe() {
    let problem = synthetic_problem(1, 300, 8, Objective::ConvexLogistic, 2);
    let w = mixing(TopologyKind::Complete, 1);
    let set = L1Ball::new(3.0, 8).unwrap();
    let step = StepSchedule::Harmonic;
    let mut solver = DstoFw::new(&problem, &w, &set, step, schedules(&problem, 4, step, true), &[0.0; 8], 0).unwrap();

    let mut x = vec![0.0; 8];
    for k in 1..=200 {
        let grad = oracle_local_gradient(problem.local(0), &x, Objective::ConvexLogistic);
        let s = lmo_l1(&grad, 3.0).unwrap().to_dense(8);
        let gamma = step.gamma(k);
        x = x.iter().zip(&s).map(|(a, b)| (1.0 - gamma) * a + gamma * b).collect();
        solver.round(k).unwrap();
        assert!(max_abs_diff(&solver.states()[0].x, &x) <= 1e-9, "diverged at k={k}");
    }
}

#[test]
fn zero_iterations_log_only_the_start() {
    let problem = synthetic_problem(3, 40, 5, Objective::NonconvexSigmoid, 1);
    let log = dstofw_log(&problem, 0, 1, 0);
    assert_eq!(log.records.len(), 1);
    let r = &log.records[0];
    assert_eq!((r.k, r.ifo_cum, r.lo_cum, r.comm_rounds_cum), (1, 120, 0, 0));
    assert!((r.loss - 0.5).abs() < 1e-15);
    assert_eq!(r.consensus_err, 0.0);
    assert!(log.min_fw_gap_second_half().is_none());
}

#[test]
fn log_cadence_does_not_change_the_trajectory() {
    let problem = synthetic_problem(4, 64, 6, Objective::ConvexLogistic, 3);
    let dense = dstofw_log(&problem, 53, 1, 4);
    let sparse = dstofw_log(&problem, 53, 10, 4);
    assert_eq!(dense.final_iterates, sparse.final_iterates);
    let ks: Vec<usize> = sparse.records.iter().map(|r| r.k).collect();
    assert_eq!(ks, vec![1, 11, 21, 31, 41, 51, 54]);
    for r in &sparse.records {
        let d = dense.record_at(r.k).unwrap();
        assert_eq!((d.gamma, d.loss, d.fw_gap, d.consensus_err), (r.gamma, r.loss, r.fw_gap, r.consensus_err));
        assert_eq!((d.ifo_cum, d.lo_cum, d.comm_rounds_cum), (r.ifo_cum, r.lo_cum, r.comm_rounds_cum));
    }
    assert!(sparse.last().unwrap().eval_ifo_cum < dense.last().unwrap().eval_ifo_cum);
}

#[test]
fn seeds_control_sampling() {
    let problem = synthetic_problem(4, 64, 6, Objective::ConvexLogistic, 3);
    assert_eq!(dstofw_log(&problem, 30, 1, 1).records, dstofw_log(&problem, 30, 1, 1).records);
    assert_ne!(dstofw_log(&problem, 30, 1, 1).final_iterates, dstofw_log(&problem, 30, 1, 2).final_iterates);
}

#[test]
fn dstofw_counts_one_exchange_per_round() {
    let problem = synthetic_problem(5, 50, 4, Objective::ConvexLogistic, 6);
    let log = dstofw_log(&problem, 37, 5, 0);
    let last = log.last().unwrap();
    assert_eq!((last.k, last.lo_cum, last.comm_rounds_cum), (38, 5 * 37, 37));
}

#[test]
fn iterates_stay_in_a_tight_ball() {
    let problem = synthetic_problem(6, 50, 10, Objective::NonconvexSigmoid, 7);
    let w = mixing(TopologyKind::Path, 6);
    let set = L1Ball::new(0.25, 10).unwrap();
    let step = StepSchedule::nonconvex(0.5);
    let mut solver = DstoFw::new(&problem, &w, &set, step, schedules(&problem, 3, step, false), &[0.0; 10], 0).unwrap();
    for k in 1..=300 {
        solver.round(k).unwrap();
        for s in solver.states() {
            assert!(s.x.iter().map(|v| v.abs()).sum::<f64>() <= 0.25 + 1e-9);
        }
    }
}

#[test]
fn infeasible_start_is_rejected() {
    let problem = synthetic_problem(2, 20, 3, Objective::ConvexLogistic, 0);
    let w = mixing(TopologyKind::Ring, 2);
    let set = L1Ball::new(1.0, 3).unwrap();
    let x0 = [0.8, -0.8, 0.0];
    let err = DstoFw::new(&problem, &w, &set, StepSchedule::Harmonic, schedules(&problem, 2, StepSchedule::Harmonic, false), &x0, 0);
    assert!(matches!(err, Err(SolverError::Infeasible { .. })));
    assert!(DenFw::new(&problem, &w, &set, StepSchedule::Harmonic, &x0).is_err());
}

#[test]
fn denfw_tracks_the_average_gradient_at_mixed_points() {
    let problem = synthetic_problem(5, 40, 6, Objective::NonconvexSigmoid, 8);
    let w = mixing(TopologyKind::RingChords, 5);
    let set = L1Ball::new(5.0, 6).unwrap();
    let mut solver = DenFw::new(&problem, &w, &set, StepSchedule::nonconvex(0.5), &[0.0; 6]).unwrap();
    for k in 1..=150 {
        solver.round(k).unwrap();
        let grads: Vec<&[f64]> = solver.local_gradients().iter().map(Vec::as_slice).collect();
        let mean = dstofw::metrics::average(&grads);
        assert!(max_abs_diff(&solver.tracked_average(), &mean) <= 1e-12, "k={k}");
    }
    let c = solver.counters();
    assert_eq!((c.ifo, c.lo, c.comm_rounds), (150 * 200, 150 * 5, 300));
}

#[test]
fn cenfw_refreshes_at_one_and_multiples_of_q() {
    let problem = synthetic_problem(4, 25, 5, Objective::ConvexLogistic, 9).merged();
    let set = L1Ball::new(5.0, 5).unwrap();
    let step = StepSchedule::SpiderConvex { q: 10 };
    let mut solver = CenFw::new(&problem, &set, step, 10, 7, &[0.0; 5], 0).unwrap();
    let refreshes: Vec<usize> = (1..=35).filter(|&k| solver.is_refresh(k)).collect();
    assert_eq!(refreshes, vec![1, 10, 20, 30]);
    let log = drive(&mut solver, &problem, &set, 35, 35, |_, _| Ok(())).unwrap();
    let last = log.last().unwrap();
    assert_eq!((last.ifo_cum, last.lo_cum, last.comm_rounds_cum), (4 * 100 + 31 * 14, 35, 0));
    assert_eq!(last.consensus_err, 0.0);
}

#[test]
fn cenfw_needs_a_single_node_and_a_valid_batch() {
    let problem = synthetic_problem(2, 10, 3, Objective::ConvexLogistic, 0);
    let set = L1Ball::new(1.0, 3).unwrap();
    let step = StepSchedule::Constant { horizon: 10 };
    assert!(CenFw::new(&problem, &set, step, 3, 2, &[0.0; 3], 0).is_err());
    let merged = problem.merged();
    assert!(CenFw::new(&merged, &set, step, 3, 21, &[0.0; 3], 0).is_err());
    assert!(CenFw::new(&merged, &set, step, 0, 2, &[0.0; 3], 0).is_err());
}

#[test]
fn spider_estimator_uses_fewer_oracle_calls_than_deterministic_tracking() {
    let problem = synthetic_problem(10, 400, 30, Objective::ConvexLogistic, 10);
    let w = mixing(TopologyKind::RingChords, 10);
    let set = L1Ball::new(20.0, 30).unwrap();
    let step = StepSchedule::Harmonic;
    let q = epoch_length(400, Objective::ConvexLogistic);
    let mut dsto = DstoFw::new(&problem, &w, &set, step, schedules(&problem, q, step, false), &[0.0; 30], 0).unwrap();
    let mut den = DenFw::new(&problem, &w, &set, step, &[0.0; 30]).unwrap();
    let dsto_log = drive(&mut dsto, &problem, &set, 500, 500, |_, _| Ok(())).unwrap();
    let den_log = drive(&mut den, &problem, &set, 500, 500, |_, _| Ok(())).unwrap();
    let (a, b) = (dsto_log.last().unwrap(), den_log.last().unwrap());
    assert!(2 * a.ifo_cum < b.ifo_cum, "{} vs {}", a.ifo_cum, b.ifo_cum);
    assert!(a.loss <= b.loss + 1e-3, "{} vs {}", a.loss, b.loss);
}

#[test]
fn invariant_hook_can_abort_a_run() {
    let problem = synthetic_problem(2, 20, 3, Objective::ConvexLogistic, 0);
    let w = mixing(TopologyKind::Ring, 2);
    let set = L1Ball::new(1.0, 3).unwrap();
    let mut solver = DenFw::new(&problem, &w, &set, StepSchedule::Harmonic, &[0.0; 3]).unwrap();
    let err = drive(&mut solver, &problem, &set, 10, 1, |_, k| {
        if k == 4 {
            Err(SolverError::Invariant { k, msg: "stop".into() })
        } else {
            Ok(())
        }
    });
    assert!(matches!(err, Err(SolverError::Invariant { k: 4, .. })));
}
