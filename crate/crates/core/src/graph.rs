//! Communication topologies and doubly-stochastic mixing matrices.
//!
//! A [`Topology`] is a connected undirected simple graph over `m` agents.
//! [`metropolis_weights`] turns it into a symmetric doubly-stochastic
//! [`MixingMatrix`] whose second eigenvalue modulus is certified by deflated
//! power iteration.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const ER_MAX_RETRIES: u64 = 1000;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 200_000;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("agent count must be positive")]
    NoAgents,
    #[error("edge probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("edge {{{0}, {1}}} references an agent outside 0..{2}")]
    OutOfRange(usize, usize, usize),
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("topology is disconnected: {components} components over {m} agents")]
    Disconnected { components: usize, m: usize },
    #[error("no connected Erdos-Renyi graph with p={p} after {retries} seeds")]
    RetriesExhausted { p: f64, retries: u64 },
    #[error("edge list line {line}: {msg}")]
    EdgeList { line: usize, msg: String },
    #[error("unknown topology `{0}`")]
    UnknownKind(String),
    #[error("power iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("lambda2 = {0} violates lambda2 < 1")]
    NotContractive(f64),
    #[error("alpha = {0} outside (0, 1]")]
    BadAlpha(f64),
    #[error("matrix is not {0}")]
    NotDoublyStochastic(&'static str),
}

/// Graph family used to build a [`Topology`].
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Ring,
    Path,
    Complete,
    ErdosRenyi { p: f64 },
    /// Ring plus "diameter" chords `{i, i + m/2}`; the stand-in for the
    /// ten-agent network used in the reproduction runs.
    RingChords,
    Custom(Vec<(usize, usize)>),
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Ring => write!(f, "ring"),
            TopologyKind::Path => write!(f, "path"),
            TopologyKind::Complete => write!(f, "complete"),
            TopologyKind::ErdosRenyi { p } => write!(f, "er:{p}"),
            TopologyKind::RingChords => write!(f, "ring_chords"),
            TopologyKind::Custom(edges) => write!(f, "custom({} edges)", edges.len()),
        }
    }
}

impl FromStr for TopologyKind {
    type Err = GraphError;

    /// Parses `ring`, `path`, `complete`, `ring_chords` and `er:<p>`.
    /// Edge-list files are handled by the runner via [`parse_edge_list`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ring" => Ok(TopologyKind::Ring),
            "path" => Ok(TopologyKind::Path),
            "complete" => Ok(TopologyKind::Complete),
            "ring_chords" => Ok(TopologyKind::RingChords),
            other => match other.strip_prefix("er:") {
                Some(p) => p
                    .parse::<f64>()
                    .map(|p| TopologyKind::ErdosRenyi { p })
                    .map_err(|_| GraphError::UnknownKind(other.to_string())),
                None => Err(GraphError::UnknownKind(other.to_string())),
            },
        }
    }
}

/// Connected undirected simple graph. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    m: usize,
    edges: BTreeSet<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Validates an edge list over `m` agents. Duplicate edges (in either
    /// orientation) collapse to one.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if m == 0 {
            return Err(GraphError::NoAgents);
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i >= m || j >= m {
                return Err(GraphError::OutOfRange(i, j, m));
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let topo = Self::from_set(m, set);
        let components = topo.component_count();
        if components != 1 {
            return Err(GraphError::Disconnected { components, m });
        }
        Ok(topo)
    }

    fn from_set(m: usize, edges: BTreeSet<(usize, usize)>) -> Self {
        let mut neighbors = vec![Vec::new(); m];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Topology { m, edges, neighbors }
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.m];
        let mut components = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.m {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                for &j in &self.neighbors[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        components
    }
}

/// Builds a connected topology of the requested family.
///
/// Erdos-Renyi graphs are resampled with `seed, seed + 1, ...` until a
/// connected draw appears (at most 1000 attempts).
pub fn build_topology(kind: &TopologyKind, m: usize, seed: u64) -> Result<Topology, GraphError> {
    if m == 0 {
        return Err(GraphError::NoAgents);
    }
    let mut edges = Vec::new();
    match kind {
        TopologyKind::Ring | TopologyKind::RingChords => {
            if m >= 2 {
                for i in 0..m {
                    edges.push((i, (i + 1) % m));
                }
            }
            if *kind == TopologyKind::RingChords && m >= 4 {
                for i in 0..m / 2 {
                    edges.push((i, i + m / 2));
                }
            }
        }
        TopologyKind::Path => {
            for i in 1..m {
                edges.push((i - 1, i));
            }
        }
        TopologyKind::Complete => {
            for i in 0..m {
                for j in i + 1..m {
                    edges.push((i, j));
                }
            }
        }
        TopologyKind::ErdosRenyi { p } => {
            let p = *p;
            if !(p > 0.0 && p <= 1.0) {
                return Err(GraphError::BadProbability(p));
            }
            for attempt in 0..ER_MAX_RETRIES {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
                let mut draw = BTreeSet::new();
                for i in 0..m {
                    for j in i + 1..m {
                        if rng.random::<f64>() < p {
                            draw.insert((i, j));
                        }
                    }
                }
                let topo = Topology::from_set(m, draw);
                if topo.component_count() == 1 {
                    return Ok(topo);
                }
            }
            return Err(GraphError::RetriesExhausted { p, retries: ER_MAX_RETRIES });
        }
        TopologyKind::Custom(list) => return Topology::from_edges(m, list),
    }
    Topology::from_edges(m, &edges)
}

/// Reads a whitespace-separated `i j` edge list (0-based, one pair per line).
/// Blank lines and `#` comments are skipped. Returns the edges and the agent
/// count implied by the largest index.
pub fn parse_edge_list(text: &str) -> Result<(usize, Vec<(usize, usize)>), GraphError> {
    let mut edges = Vec::new();
    let mut max_index = None::<usize>;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(GraphError::EdgeList {
                line: lineno + 1,
                msg: format!("expected two indices, found {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| GraphError::EdgeList {
                line: lineno + 1,
                msg: format!("`{s}` is not a non-negative integer"),
            })
        };
        let (i, j) = (parse(fields[0])?, parse(fields[1])?);
        max_index = Some(max_index.unwrap_or(0).max(i).max(j));
        edges.push((i, j));
    }
    Ok((max_index.map_or(0, |x| x + 1), edges))
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        SquareMatrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        SquareMatrix { n, data }
    }

    pub fn filled(n: usize, value: f64) -> Self {
        SquareMatrix { n, data: vec![value; n * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Symmetric doubly-stochastic weights with a certified `lambda2 < 1`.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    w: SquareMatrix,
    lambda2: f64,
    /// Sparse view of each row: `(j, w_ij)` for the nonzero entries.
    support: Vec<Vec<(usize, f64)>>,
}

impl MixingMatrix {
    /// Wraps an explicit weight matrix after checking symmetry, stochasticity,
    /// non-negativity and `lambda2 < 1`.
    pub fn new(w: SquareMatrix) -> Result<Self, GraphError> {
        let n = w.size();
        if n == 0 {
            return Err(GraphError::NoAgents);
        }
        for i in 0..n {
            let row: f64 = w.row(i).iter().sum();
            let col: f64 = (0..n).map(|r| w.get(r, i)).sum();
            if (row - 1.0).abs() > 1e-12 || (col - 1.0).abs() > 1e-12 {
                return Err(GraphError::NotDoublyStochastic("stochastic"));
            }
            for j in 0..n {
                if w.get(i, j) < 0.0 {
                    return Err(GraphError::NotDoublyStochastic("non-negative"));
                }
                if (w.get(i, j) - w.get(j, i)).abs() > 1e-15 {
                    return Err(GraphError::NotDoublyStochastic("symmetric"));
                }
            }
        }
        let lambda2 = second_eigenvalue(&w)?;
        if lambda2 >= 1.0 - 1e-12 && n > 1 {
            return Err(GraphError::NotContractive(lambda2));
        }
        let support = (0..n)
            .map(|i| {
                w.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Ok(MixingMatrix { w, lambda2, support })
    }

    pub fn agents(&self) -> usize {
        self.w.size()
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.w
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w.get(i, j)
    }

    /// Nonzero `(j, w_ij)` pairs of row `i`, in ascending `j`.
    pub fn row_support(&self, i: usize) -> &[(usize, f64)] {
        &self.support[i]
    }

    /// `out = sum_j w_ij * vector(j)`, summed in ascending `j`.
    pub fn mix_into<'v, F>(&self, i: usize, vector: F, out: &mut [f64])
    where
        F: Fn(usize) -> &'v [f64],
    {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(j, w) in &self.support[i] {
            for (o, v) in out.iter_mut().zip(vector(j)) {
                *o += w * v;
            }
        }
    }
}

/// Metropolis-Hastings weights: `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges,
/// diagonal fills each row to one.
pub fn metropolis_weights(t: &Topology) -> Result<MixingMatrix, GraphError> {
    let m = t.agents();
    let mut rows = vec![vec![0.0; m]; m];
    for (i, j) in t.edges() {
        let w = 1.0 / (1.0 + t.degree(i).max(t.degree(j)) as f64);
        rows[i][j] = w;
        rows[j][i] = w;
    }
    for (i, row) in rows.iter_mut().enumerate() {
        let off: f64 = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, w)| w).sum();
        row[i] = 1.0 - off;
    }
    MixingMatrix::new(SquareMatrix::from_rows(&rows))
}

/// Largest eigenvalue modulus of `w` on the complement of the all-ones
/// direction, by power iteration on `(W - J/m)^2`.
///
/// Works for any symmetric matrix with `W 1 = 1`; a one-by-one matrix has no
/// such complement and yields 0.
pub fn second_eigenvalue(w: &SquareMatrix) -> Result<f64, GraphError> {
    let n = w.size();
    if n <= 1 {
        return Ok(0.0);
    }
    let deflate = |x: &mut [f64]| {
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
    };
    let normalize = |x: &mut [f64]| -> f64 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
        norm
    };

    // Fixed start so the certificate is reproducible.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2b);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    deflate(&mut x);
    if normalize(&mut x) == 0.0 {
        x = (0..n).map(|i| i as f64).collect();
        deflate(&mut x);
        normalize(&mut x);
    }
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut prev = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        w.mul_vec(&x, &mut y);
        deflate(&mut y);
        w.mul_vec(&y, &mut z);
        deflate(&mut z);
        // Rayleigh quotient of B^2 at unit x is |Bx|^2.
        let estimate = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if estimate < 1e-300 {
            return Ok(0.0);
        }
        if (estimate - prev).abs() <= POWER_TOL * 1e-2 {
            return Ok(estimate);
        }
        prev = estimate;
        std::mem::swap(&mut x, &mut z);
        if normalize(&mut x) == 0.0 {
            return Ok(estimate);
        }
    }
    Err(GraphError::NoConvergence(POWER_MAX_ITERS))
}

/// Smallest positive integer `k` with
/// `lambda2 <= (k / (k + 1))^alpha / (1 + k^-alpha)`.
pub fn k0_alpha(lambda2: f64, alpha: f64) -> Result<u64, GraphError> {
    if !(0.0..1.0).contains(&lambda2) {
        return Err(GraphError::NotContractive(lambda2));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(GraphError::BadAlpha(alpha));
    }
    let mut k: u64 = 1;
    loop {
        let kf = k as f64;
        let rhs = (kf / (kf + 1.0)).powf(alpha) / (1.0 + kf.powf(-alpha));
        if lambda2 <= rhs {
            return Ok(k);
        }
        k += 1;
    }
}
