//! Epoch structure and mini-batch sizes for the variance-reduced estimator.
//!
//! Iteration `k` refreshes the estimator with a full local gradient when
//! `(k + 1) % q == 0`. Every other iteration belongs to epoch
//! `e = k / q + 1`, anchored at `a = e q - 1` where the size is pinned to
//! `q^2`. Sizes inside an epoch must satisfy
//! `gamma_k / sqrt(|S^k|) <= gamma_{k+1} / sqrt(|S^{k+1}|)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::problem::Objective;
use crate::solvers::StepSchedule;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("iteration {0} refreshes with a full gradient; no sample set is drawn")]
    RefreshIteration(usize),
    #[error("iteration index must be at least 1")]
    ZeroIteration,
    #[error("sample size {size} outside 1..={n_local}")]
    BadSize { size: usize, n_local: usize },
    #[error("epoch length must be at least 1")]
    ZeroEpoch,
}

/// Integer `floor(n^(1/root))`.
fn integer_root(n: usize, root: u32) -> usize {
    let mut q = (n as f64).powf(1.0 / root as f64).round() as usize;
    while q > 0 && (q as u128).pow(root) > n as u128 {
        q -= 1;
    }
    while ((q + 1) as u128).pow(root) <= n as u128 {
        q += 1;
    }
    q
}

/// `max(2, floor(n^(1/4)))` for convex objectives,
/// `max(2, floor(n^(1/3)))` for non-convex ones.
pub fn epoch_length(n_local: usize, objective: Objective) -> usize {
    let root = if objective.is_convex() { 4 } else { 3 };
    integer_root(n_local, root).max(2)
}

/// How in-epoch sizes are derived from the anchor `|S^a| = q^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeRule {
    /// Walk back from the anchor taking the smallest integer allowed by the
    /// ratio inequality: `|S^k| = ceil((gamma_k / gamma_{k+1})^2 |S^{k+1}|)`.
    /// Satisfies the inequality exactly for every consecutive pair.
    #[default]
    Backward,
    /// `ceil((gamma_k / gamma_a)^2 q^2)` in one shot. Rounding can break
    /// the ratio inequality by a few percent on some pairs.
    Direct,
}

impl fmt::Display for SizeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeRule::Backward => "backward",
            SizeRule::Direct => "direct",
        })
    }
}

impl FromStr for SizeRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "backward" => Ok(SizeRule::Backward),
            "direct" => Ok(SizeRule::Direct),
            other => Err(format!("expected `backward` or `direct`, got `{other}`")),
        }
    }
}

/// `(gamma_num_k / gamma_den_k)^2` either exactly or in floating point.
enum SquaredRatio {
    Exact(u128, u128),
    Float(f64),
}

fn squared_ratio(step: &StepSchedule, num_k: usize, den_k: usize) -> SquaredRatio {
    let (n, d) = (num_k as u128, den_k as u128);
    match *step {
        StepSchedule::Harmonic => SquaredRatio::Exact((d + 1) * (d + 1), (n + 1) * (n + 1)),
        StepSchedule::Polynomial { scale, alpha } if alpha == 0.5 && scale <= 1.0 => SquaredRatio::Exact(d, n),
        StepSchedule::Polynomial { scale, alpha } if alpha == 1.0 && scale <= 1.0 => SquaredRatio::Exact(d * d, n * n),
        _ => {
            let r = step.gamma(num_k) / step.gamma(den_k);
            SquaredRatio::Float(r * r)
        }
    }
}

fn ceil_scaled(ratio: SquaredRatio, base: u64) -> u64 {
    match ratio {
        SquaredRatio::Exact(num, den) => (base as u128 * num).div_ceil(den).min(u64::MAX as u128) as u64,
        SquaredRatio::Float(r) => {
            let v = r * base as f64;
            let floor = v.floor();
            // Absorb rounding noise just above an integer.
            if v - floor <= 1e-12 * v {
                floor as u64
            } else {
                v.ceil() as u64
            }
        }
    }
}

/// Mini-batch sizes per iteration for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSchedule {
    q: usize,
    n_local: usize,
    step: StepSchedule,
    rule: SizeRule,
    full_batch: bool,
}

impl SamplingSchedule {
    pub fn new(q: usize, n_local: usize, step: StepSchedule, rule: SizeRule) -> Result<Self, SamplingError> {
        if q == 0 {
            return Err(SamplingError::ZeroEpoch);
        }
        if n_local == 0 {
            return Err(SamplingError::BadSize { size: 0, n_local });
        }
        Ok(SamplingSchedule { q, n_local, step, rule, full_batch: false })
    }

    /// Every non-refresh iteration uses all `n_local` samples.
    pub fn with_full_batch(mut self, on: bool) -> Self {
        self.full_batch = on;
        self
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn rule(&self) -> SizeRule {
        self.rule
    }

    pub fn is_full_batch(&self) -> bool {
        self.full_batch
    }

    pub fn is_refresh(&self, k: usize) -> bool {
        (k + 1).is_multiple_of(self.q)
    }

    pub fn epoch(&self, k: usize) -> usize {
        k / self.q + 1
    }

    /// Last iteration of the epoch containing `k`.
    pub fn anchor(&self, k: usize) -> usize {
        self.epoch(k) * self.q - 1
    }

    /// Uncapped size for any `k >= 1`; the anchor itself returns `q^2`.
    pub fn rule_size(&self, k: usize) -> Result<u64, SamplingError> {
        if k == 0 {
            return Err(SamplingError::ZeroIteration);
        }
        let anchor = self.anchor(k);
        let q2 = (self.q as u64) * (self.q as u64);
        Ok(match self.rule {
            SizeRule::Direct => ceil_scaled(squared_ratio(&self.step, k, anchor), q2),
            SizeRule::Backward => {
                let mut size = q2;
                for j in (k..anchor).rev() {
                    size = ceil_scaled(squared_ratio(&self.step, j, j + 1), size);
                }
                size
            }
        })
    }

    /// `|S^k|` capped to `[1, n_local]`, for non-refresh iterations only.
    pub fn sample_size(&self, k: usize) -> Result<usize, SamplingError> {
        if k == 0 {
            return Err(SamplingError::ZeroIteration);
        }
        if self.is_refresh(k) {
            return Err(SamplingError::RefreshIteration(k));
        }
        if self.full_batch {
            return Ok(self.n_local);
        }
        let raw = self.rule_size(k)?;
        Ok(raw.clamp(1, self.n_local as u64) as usize)
    }
}

/// `size` distinct indices drawn uniformly from `0..n_local`.
pub fn draw_sample_set<R: Rng + ?Sized>(rng: &mut R, n_local: usize, size: usize) -> Result<Vec<usize>, SamplingError> {
    if size == 0 || size > n_local {
        return Err(SamplingError::BadSize { size, n_local });
    }
    if size == n_local {
        return Ok((0..n_local).collect());
    }
    Ok(rand::seq::index::sample(rng, n_local, size).into_vec())
}
