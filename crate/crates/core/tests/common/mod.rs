#![allow(dead_code)]

use dstofw::graph::{build_topology, metropolis_weights, MixingMatrix, TopologyKind};
use dstofw::problem::{generate_synthetic, partition, FiniteSumProblem, LocalDataset, Objective, PartitionStrategy, SyntheticSpec};

/// `m * n_loc` synthetic samples split round-robin over `m` agents.
pub fn synthetic_problem(m: usize, n_loc: usize, dim: usize, objective: Objective, seed: u64) -> FiniteSumProblem {
    let data = generate_synthetic(&SyntheticSpec { n: m * n_loc, dim, seed, noise: 0.1 }).unwrap();
    let locals = partition(&data.samples, data.dim, m, PartitionStrategy::RoundRobin, true, seed).unwrap();
    FiniteSumProblem::new(locals, objective).unwrap()
}

pub fn mixing(kind: TopologyKind, m: usize) -> MixingMatrix {
    metropolis_weights(&build_topology(&kind, m, 0).unwrap()).unwrap()
}

/// Textbook local gradient, written out from the loss definitions:
/// `ln(1 + e^{-z})` and `1 / (1 + e^{z})` with `z = l <a, x>`.
pub fn oracle_local_gradient(local: &LocalDataset, x: &[f64], objective: Objective) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    for s in local.samples() {
        let dense = s.features.iter().fold(vec![0.0; x.len()], |mut v, (i, a)| {
            v[i] = a;
            v
        });
        let z: f64 = s.label * dense.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let dz = match objective {
            Objective::ConvexLogistic => -1.0 / (1.0 + z.exp()),
            Objective::NonconvexSigmoid => -z.exp() / (1.0 + z.exp()).powi(2),
        };
        for (g, a) in grad.iter_mut().zip(&dense) {
            *g += dz * s.label * a / local.len() as f64;
        }
    }
    grad
}

/// `lmo` objective value by enumerating all `2 * dim` signed vertices.
pub fn brute_force_lmo_value(g: &[f64], radius: f64) -> f64 {
    let mut best = f64::INFINITY;
    for gi in g {
        for sign in [1.0, -1.0] {
            best = best.min(sign * radius * gi);
        }
    }
    best
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Pre-cap mini-batch sizes by the backward recursion
/// `S_j = ceil(S_{j+1} * (gamma_j / gamma_{j+1})^2)` from `S_anchor = q^2`,
/// with the squared ratio given as an exact fraction `(num(j), den(j))`.
pub fn oracle_rule_sizes(q: u64, horizon: u64, ratio: impl Fn(u64) -> (u128, u128)) -> Vec<u64> {
    let mut sizes = vec![0u64; horizon as usize + 1];
    let mut anchor = q - 1;
    while anchor < horizon + q {
        let mut s = (q * q) as u128;
        let start = anchor + 1 - q;
        if anchor <= horizon {
            sizes[anchor as usize] = s as u64;
        }
        for j in (start.max(1)..anchor).rev() {
            let (num, den) = ratio(j);
            s = (s * num).div_ceil(den);
            if j <= horizon {
                sizes[j as usize] = s as u64;
            }
        }
        anchor += q;
    }
    sizes
}
