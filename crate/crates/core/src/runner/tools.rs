use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::RunError;
use crate::constraint::lmo_l1;
use crate::graph::{build_topology, k0_alpha, metropolis_weights, TopologyKind};

#[derive(Debug, Clone, PartialEq)]
pub struct LmoReport {
    pub trials: usize,
    /// Largest `<g, lmo(g)> - min over signed axis vertices <g, v>`.
    pub max_excess: f64,
}

/// Checks the l1 oracle against enumeration of all `2 * dim` vertices on
/// random Gaussian directions of dimension 1 to `max_dim`.
pub fn lmo_self_test(trials: usize, max_dim: usize, radius: f64, seed: u64) -> Result<LmoReport, RunError> {
    if max_dim == 0 || radius.is_nan() || radius <= 0.0 {
        return Err(RunError::Config("lmo-test needs max_dim >= 1 and radius > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_excess = 0.0_f64;
    for _ in 0..trials {
        let dim = rng.random_range(1..=max_dim);
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let value = lmo_l1(&g, radius).map_err(|e| RunError::Config(e.to_string()))?.dot(&g);
        let best = g.iter().flat_map(|gi| [radius * gi, -radius * gi]).fold(f64::INFINITY, f64::min);
        max_excess = max_excess.max((value - best).abs());
    }
    Ok(LmoReport { trials, max_excess })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub agents: usize,
    pub edges: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub lambda2: f64,
    /// `k0` for `alpha = 0.5` and `alpha = 1`.
    pub k0_half: u64,
    pub k0_one: u64,
}

pub fn spectrum_report(kind: &TopologyKind, agents: usize, seed: u64) -> Result<SpectrumReport, RunError> {
    let topology = build_topology(kind, agents, seed)?;
    let mixing = metropolis_weights(&topology)?;
    let degrees = (0..agents).map(|i| topology.degree(i));
    Ok(SpectrumReport {
        agents,
        edges: topology.edge_count(),
        min_degree: degrees.clone().min().unwrap_or(0),
        max_degree: degrees.max().unwrap_or(0),
        lambda2: mixing.lambda2(),
        k0_half: k0_alpha(mixing.lambda2(), 0.5)?,
        k0_one: k0_alpha(mixing.lambda2(), 1.0)?,
    })
}
