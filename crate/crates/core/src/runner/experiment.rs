use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{DataSource, InitPoint, RunConfig, SolverChoice, TopologySpec};
use super::RunError;
use crate::constraint::L1Ball;
use crate::graph::{build_topology, k0_alpha, metropolis_weights, parse_edge_list, MixingMatrix, Topology};
use crate::metrics::{emit_csv, RunLog};
use crate::problem::{
    generate_synthetic, partition, read_libsvm_file, Dataset, FiniteSumProblem, LibsvmOptions,
};
use crate::sampling::{epoch_length, SamplingSchedule};
use crate::solvers::{drive, CenFw, DenFw, DstoFw, SolverError, StepSchedule};

/// Largest tolerated tracking residual under `check_invariants`.
pub const INVARIANT_TOL: f64 = 1e-10;

/// Everything the three solvers share: the partitioned problem, the network
/// and the starting point.
pub struct Prepared {
    pub problem: FiniteSumProblem,
    pub topology: Topology,
    pub mixing: MixingMatrix,
    pub set: L1Ball,
    pub x0: Vec<f64>,
    /// Samples read before equalization dropped any.
    pub samples_loaded: usize,
}

pub struct RunOutput {
    pub path: PathBuf,
    pub log: RunLog,
}

pub fn load_dataset(config: &RunConfig) -> Result<Dataset, RunError> {
    let mut data = match &config.data {
        DataSource::Libsvm { path, dim, labels } => {
            read_libsvm_file(path, &LibsvmOptions { dim: *dim, labels: labels.clone() })?
        }
        DataSource::Synthetic(spec) => generate_synthetic(spec)?,
    };
    if config.normalize {
        data.max_abs_scale();
    }
    Ok(data)
}

pub fn build_mixing(config: &RunConfig) -> Result<(Topology, MixingMatrix), RunError> {
    let topology = match &config.topology {
        TopologySpec::Kind(kind) => build_topology(kind, config.agents, config.topology_seed)?,
        TopologySpec::File(path) => {
            let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
            let (m, edges) = parse_edge_list(&text)?;
            if m != config.agents {
                return Err(RunError::Config(format!(
                    "config key `topology`: edge list has {m} agents but agents={}",
                    config.agents
                )));
            }
            Topology::from_edges(m, &edges)?
        }
    };
    let mixing = metropolis_weights(&topology)?;
    Ok((topology, mixing))
}

fn initial_point(config: &RunConfig, dim: usize) -> Vec<f64> {
    match config.init {
        InitPoint::Zero => vec![0.0; dim],
        InitPoint::Random => {
            // A random direction placed halfway to the boundary.
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(1);
            let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm: f64 = x.iter().map(|v| v.abs()).sum();
            if norm > 0.0 {
                let scale = 0.5 * config.radius / norm;
                x.iter_mut().for_each(|v| *v *= scale);
            }
            x
        }
    }
}

pub fn prepare(config: &RunConfig) -> Result<Prepared, RunError> {
    let data = load_dataset(config)?;
    let samples_loaded = data.samples.len();
    let locals = partition(&data.samples, data.dim, config.agents, config.partition, config.equalize, config.partition_seed)?;
    let problem = FiniteSumProblem::new(locals, config.objective)?;
    let (topology, mixing) = build_mixing(config)?;
    let set = L1Ball::new(config.radius, problem.dim()).map_err(|e| RunError::Config(format!("config key `radius`: {e}")))?;
    let x0 = initial_point(config, problem.dim());
    Ok(Prepared { problem, topology, mixing, set, x0, samples_loaded })
}

/// Step sizes for DstoFW and DenFW.
pub fn decentralized_step(config: &RunConfig) -> StepSchedule {
    match config.step_scale {
        None if config.objective.is_convex() && config.alpha == 1.0 => StepSchedule::Harmonic,
        scale => StepSchedule::Polynomial { scale: scale.unwrap_or(1.0), alpha: config.alpha },
    }
}

fn cenfw_params(config: &RunConfig, n: usize) -> (usize, usize, StepSchedule) {
    let root = n.isqrt().max(2);
    let q = config.cenfw_q.unwrap_or(root);
    let batch = config.cenfw_batch.unwrap_or(root).min(n);
    let step = if config.objective.is_convex() {
        StepSchedule::SpiderConvex { q }
    } else {
        StepSchedule::Constant { horizon: config.iters.max(1) }
    };
    (q, batch, step)
}

fn invariant(k: usize, residual: f64, what: &str) -> Result<(), SolverError> {
    if residual <= INVARIANT_TOL {
        Ok(())
    } else {
        Err(SolverError::Invariant { k: k + 1, msg: format!("{what} = {residual:e} exceeds {INVARIANT_TOL:e}") })
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs one solver (not [`SolverChoice::All`]) and attaches run metadata.
pub fn run_prepared(config: &RunConfig, prep: &Prepared, which: SolverChoice) -> Result<RunLog, RunError> {
    let problem = &prep.problem;
    let check = config.check_invariants;
    let mut meta: Vec<(String, String)> = Vec::new();
    let mut log = match which {
        SolverChoice::DstoFw => {
            let step = decentralized_step(config);
            let n_min = problem.locals().iter().map(|l| l.len()).min().unwrap_or(0);
            let q = config.q.unwrap_or_else(|| epoch_length(n_min, config.objective));
            let schedules = problem
                .locals()
                .iter()
                .map(|l| SamplingSchedule::new(q, l.len(), step, config.size_rule).map(|s| s.with_full_batch(config.full_batch)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(SolverError::from)?;
            let mut solver = DstoFw::new(problem, &prep.mixing, &prep.set, step, schedules, &prep.x0, config.sampling_seed)?;
            meta.push(("q".into(), q.to_string()));
            meta.push(("step".into(), step.to_string()));
            drive(&mut solver, problem, &prep.set, config.iters, config.log_every, |s, k| {
                if !check {
                    return Ok(());
                }
                let r = s.tracking_residual();
                invariant(k, r.d_minus_v.max(r.d_minus_g), "tracking residual")
            })?
        }
        SolverChoice::DenFw => {
            let step = decentralized_step(config);
            let mut solver = DenFw::new(problem, &prep.mixing, &prep.set, step, &prep.x0)?;
            meta.push(("step".into(), step.to_string()));
            drive(&mut solver, problem, &prep.set, config.iters, config.log_every, |s, k| {
                if !check {
                    return Ok(());
                }
                let grads: Vec<&[f64]> = s.local_gradients().iter().map(Vec::as_slice).collect();
                invariant(k, max_abs_diff(&s.tracked_average(), &crate::metrics::average(&grads)), "tracking residual")
            })?
        }
        SolverChoice::CenFw => {
            let merged = problem.merged();
            let (q, batch, step) = cenfw_params(config, merged.total_samples());
            let mut solver = CenFw::new(&merged, &prep.set, step, q, batch, &prep.x0, config.sampling_seed)?;
            meta.push(("cenfw_q".into(), q.to_string()));
            meta.push(("cenfw_batch".into(), batch.to_string()));
            meta.push(("step".into(), step.to_string()));
            drive(&mut solver, &merged, &prep.set, config.iters, config.log_every, |_, _| Ok(()))?
        }
        SolverChoice::All => return Err(RunError::Config("run_prepared needs a single solver".into())),
    };

    for (k, v) in config.echo() {
        log.push_meta(k, v);
    }
    log.push_meta("run_solver", which);
    log.push_meta("dim", problem.dim());
    log.push_meta("samples_loaded", prep.samples_loaded);
    log.push_meta("samples_used", problem.total_samples());
    let sizes = problem.locals().iter().map(|l| l.len());
    log.push_meta("n_local_min", sizes.clone().min().unwrap_or(0));
    log.push_meta("n_local_max", sizes.max().unwrap_or(0));
    log.push_meta("edges", prep.topology.edge_count());
    log.push_meta("lambda2", prep.mixing.lambda2());
    if let Ok(k0) = k0_alpha(prep.mixing.lambda2(), config.alpha) {
        log.push_meta("k0_alpha", k0);
    }
    for (k, v) in meta {
        log.push_meta(k, v);
    }
    Ok(log)
}

/// Where `which`'s CSV goes. With `solver=all` the solver name is appended
/// to the file stem of `out`.
pub fn output_path(config: &RunConfig, which: SolverChoice) -> PathBuf {
    if config.solver != SolverChoice::All {
        return config.out.clone();
    }
    let stem = config.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    let ext = config.out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    config.out.with_file_name(format!("{stem}_{which}.{ext}"))
}

pub fn write_csv(path: &Path, log: &RunLog) -> Result<(), RunError> {
    let io_err = |source| RunError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let file = fs::File::create(path).map_err(io_err)?;
    emit_csv(log, BufWriter::new(file)).map_err(io_err)
}

/// Prepares the problem once, runs every requested solver on it and writes
/// one CSV per solver.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<RunOutput>, RunError> {
    let prep = prepare(config)?;
    let mut outputs = Vec::new();
    for which in config.solver.expand() {
        let log = run_prepared(config, &prep, which)?;
        let path = output_path(config, which);
        write_csv(&path, &log)?;
        outputs.push(RunOutput { path, log });
    }
    Ok(outputs)
}
