//! Finite-sum binary classification objectives over partitioned data.
//!
//! Features are sparse, decision vectors are dense. Every per-sample gradient
//! evaluation performed by a solver is charged to an IFO counter passed in by
//! the caller; metric evaluations go to a separate counter.

mod libsvm;
mod objective;
mod synthetic;

pub use libsvm::{parse_libsvm, read_libsvm_file, LabelMap, LibsvmOptions};
pub use objective::{sigmoid, softplus, Objective};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("reading dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset is empty")]
    Empty,
    #[error("cannot split {samples} samples over {agents} agents")]
    TooFewSamples { samples: usize, agents: usize },
    #[error("feature index {index} exceeds dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("local datasets disagree on dimension: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid synthetic spec: {0}")]
    Synthetic(String),
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Panics if indices are not strictly increasing or lengths differ.
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Self {
        assert_eq!(indices.len(), values.len());
        assert!(indices.windows(2).all(|w| w[0] < w[1]), "indices must be strictly increasing");
        SparseVector { indices, values }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        SparseVector { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| (i as usize, v))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().map(|&i| i as usize)
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).map(|(&i, v)| v * x[i as usize]).sum()
    }

    /// `out += scale * self`
    #[inline]
    pub fn axpy(&self, scale: f64, out: &mut [f64]) {
        for (&i, v) in self.indices.iter().zip(&self.values) {
            out[i as usize] += scale * v;
        }
    }

    fn scale_features(&mut self, factors: &[f64]) {
        for (&i, v) in self.indices.iter().zip(self.values.iter_mut()) {
            *v *= factors[i as usize];
        }
    }
}

/// One labelled example; the label is `-1.0` or `+1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: SparseVector,
    pub label: f64,
}

impl Sample {
    pub fn new(features: SparseVector, label: f64) -> Self {
        assert!(label == 1.0 || label == -1.0, "label must be +/-1, got {label}");
        Sample { features, label }
    }

    #[inline]
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.label * self.features.dot(x)
    }

    pub fn loss(&self, x: &[f64], objective: Objective) -> f64 {
        objective.loss(self.margin(x))
    }

    /// `out += scale * grad f(x)` for this component.
    #[inline]
    pub fn add_gradient(&self, x: &[f64], objective: Objective, scale: f64, out: &mut [f64]) {
        let coef = objective.dloss(self.margin(x)) * self.label * scale;
        if coef != 0.0 {
            self.features.axpy(coef, out);
        }
    }

    /// Dense component gradient.
    pub fn gradient(&self, x: &[f64], objective: Objective) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.add_gradient(x, objective, 1.0, &mut out);
        out
    }
}

/// Gradient of `ln(1 + exp(-l <a, x>))`.
pub fn grad_convex_component(x: &[f64], s: &Sample) -> Vec<f64> {
    s.gradient(x, Objective::ConvexLogistic)
}

/// Gradient of `1 / (1 + exp(l <a, x>))`.
pub fn grad_nonconvex_component(x: &[f64], s: &Sample) -> Vec<f64> {
    s.gradient(x, Objective::NonconvexSigmoid)
}

/// A loaded dataset before partitioning.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dim: usize,
}

impl Dataset {
    /// Scales every feature by its maximum absolute value so it lies in [-1, 1].
    pub fn max_abs_scale(&mut self) {
        let mut max_abs = vec![0.0_f64; self.dim];
        for s in &self.samples {
            for (i, v) in s.features.iter() {
                max_abs[i] = max_abs[i].max(v.abs());
            }
        }
        let factors: Vec<f64> = max_abs.iter().map(|&m| if m > 0.0 { 1.0 / m } else { 1.0 }).collect();
        for s in &mut self.samples {
            s.features.scale_features(&factors);
        }
    }
}

/// The samples owned by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    samples: Vec<Sample>,
    dim: usize,
}

impl LocalDataset {
    pub fn new(samples: Vec<Sample>, dim: usize) -> Result<Self, ProblemError> {
        if samples.is_empty() {
            return Err(ProblemError::Empty);
        }
        for s in &samples {
            if let Some(i) = s.features.max_index() {
                if i >= dim {
                    return Err(ProblemError::IndexOutOfRange { index: i, dim });
                }
            }
        }
        Ok(LocalDataset { samples, dim })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, j: usize) -> &Sample {
        &self.samples[j]
    }

    /// `(1 / n_i) sum_j f_ij(x)`; charges `n_i` to `ifo`.
    pub fn loss(&self, x: &[f64], objective: Objective, ifo: &mut u64) -> f64 {
        *ifo += self.samples.len() as u64;
        self.samples.iter().map(|s| s.loss(x, objective)).sum::<f64>() / self.samples.len() as f64
    }

    /// Writes the mean component gradient into `out`; charges `n_i` to `ifo`.
    pub fn full_gradient_into(&self, x: &[f64], objective: Objective, ifo: &mut u64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for s in &self.samples {
            s.add_gradient(x, objective, 1.0, out);
        }
        let inv = 1.0 / self.samples.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        *ifo += self.samples.len() as u64;
    }

    pub fn full_gradient(&self, x: &[f64], objective: Objective, ifo: &mut u64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.full_gradient_into(x, objective, ifo, &mut out);
        out
    }
}

/// `F(x) = (1/m) sum_i f_i(x)` over the agents' local datasets.
#[derive(Debug, Clone)]
pub struct FiniteSumProblem {
    locals: Vec<LocalDataset>,
    objective: Objective,
    dim: usize,
}

impl FiniteSumProblem {
    pub fn new(locals: Vec<LocalDataset>, objective: Objective) -> Result<Self, ProblemError> {
        let dim = locals.first().ok_or(ProblemError::Empty)?.dim();
        if let Some(bad) = locals.iter().find(|l| l.dim() != dim) {
            return Err(ProblemError::DimensionMismatch(dim, bad.dim()));
        }
        Ok(FiniteSumProblem { locals, objective, dim })
    }

    pub fn agents(&self) -> usize {
        self.locals.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn local(&self, i: usize) -> &LocalDataset {
        &self.locals[i]
    }

    pub fn locals(&self) -> &[LocalDataset] {
        &self.locals
    }

    pub fn total_samples(&self) -> usize {
        self.locals.iter().map(LocalDataset::len).sum()
    }

    /// Same samples in a single node, for centralized baselines.
    pub fn merged(&self) -> FiniteSumProblem {
        let samples = self.locals.iter().flat_map(|l| l.samples.iter().cloned()).collect();
        FiniteSumProblem {
            locals: vec![LocalDataset { samples, dim: self.dim }],
            objective: self.objective,
            dim: self.dim,
        }
    }

    pub fn local_gradient(&self, i: usize, x: &[f64], ifo: &mut u64) -> Vec<f64> {
        self.locals[i].full_gradient(x, self.objective, ifo)
    }

    /// `F(x)`; charges every local sample to `eval_ifo`.
    pub fn global_loss(&self, x: &[f64], eval_ifo: &mut u64) -> f64 {
        self.locals.iter().map(|l| l.loss(x, self.objective, eval_ifo)).sum::<f64>() / self.locals.len() as f64
    }

    /// `(F(x), grad F(x))` in one pass; each sample is one IFO call.
    pub fn loss_and_gradient(&self, x: &[f64], eval_ifo: &mut u64) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.dim];
        let mut loss = 0.0;
        for l in &self.locals {
            let inv = 1.0 / l.len() as f64;
            let mut local_loss = 0.0;
            for s in &l.samples {
                let z = s.margin(x);
                local_loss += self.objective.loss(z);
                let coef = self.objective.dloss(z) * s.label * inv;
                if coef != 0.0 {
                    s.features.axpy(coef, &mut grad);
                }
            }
            loss += local_loss * inv;
            *eval_ifo += l.len() as u64;
        }
        let m = self.locals.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        (loss / m, grad)
    }

    /// `grad F(x)`; charges every local sample to `eval_ifo`.
    pub fn global_gradient(&self, x: &[f64], eval_ifo: &mut u64) -> Vec<f64> {
        let mut total = vec![0.0; self.dim];
        let mut buf = vec![0.0; self.dim];
        for l in &self.locals {
            l.full_gradient_into(x, self.objective, eval_ifo, &mut buf);
            total.iter_mut().zip(&buf).for_each(|(t, b)| *t += b);
        }
        let inv = 1.0 / self.locals.len() as f64;
        total.iter_mut().for_each(|t| *t *= inv);
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// Seeded shuffle, then deal samples out one agent at a time.
    RoundRobin,
    /// File order, consecutive blocks.
    Contiguous,
}

impl fmt::Display for PartitionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionStrategy::RoundRobin => "round_robin",
            PartitionStrategy::Contiguous => "contiguous",
        })
    }
}

impl FromStr for PartitionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round_robin" => Ok(PartitionStrategy::RoundRobin),
            "contiguous" => Ok(PartitionStrategy::Contiguous),
            other => Err(format!("expected `round_robin` or `contiguous`, got `{other}`")),
        }
    }
}

/// Splits samples over `m` agents. With `equalize`, the trailing
/// `N - m * floor(N / m)` samples (after shuffling) are dropped so every
/// agent holds the same count.
pub fn partition(
    samples: &[Sample],
    dim: usize,
    m: usize,
    strategy: PartitionStrategy,
    equalize: bool,
    seed: u64,
) -> Result<Vec<LocalDataset>, ProblemError> {
    if samples.is_empty() {
        return Err(ProblemError::Empty);
    }
    if m == 0 || samples.len() < m {
        return Err(ProblemError::TooFewSamples { samples: samples.len(), agents: m });
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    if strategy == PartitionStrategy::RoundRobin {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    if equalize {
        order.truncate(m * (samples.len() / m));
    }
    let mut buckets: Vec<Vec<Sample>> = vec![Vec::new(); m];
    match strategy {
        PartitionStrategy::RoundRobin => {
            for (pos, &idx) in order.iter().enumerate() {
                buckets[pos % m].push(samples[idx].clone());
            }
        }
        PartitionStrategy::Contiguous => {
            let (base, extra) = (order.len() / m, order.len() % m);
            let mut it = order.iter();
            for (agent, bucket) in buckets.iter_mut().enumerate() {
                let take = base + usize::from(agent < extra);
                bucket.extend(it.by_ref().take(take).map(|&idx| samples[idx].clone()));
            }
        }
    }
    buckets.into_iter().map(|b| LocalDataset::new(b, dim)).collect()
}
