//! Constraint sets accessed only through a linear minimization oracle.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstraintError {
    #[error("direction has a non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("direction has length {got}, set dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Output of the oracle: a point with at most one nonzero coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Vertex {
    Zero,
    Axis { index: usize, value: f64 },
}

impl Vertex {
    pub fn dot(&self, x: &[f64]) -> f64 {
        match *self {
            Vertex::Zero => 0.0,
            Vertex::Axis { index, value } => value * x[index],
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        if let Vertex::Axis { index, value } = *self {
            out[index] = value;
        }
        out
    }

    /// `out = (1 - gamma) * base + gamma * self`.
    pub fn combine_into(&self, base: &[f64], gamma: f64, out: &mut [f64]) {
        let keep = 1.0 - gamma;
        for (o, b) in out.iter_mut().zip(base) {
            *o = keep * b;
        }
        if let Vertex::Axis { index, value } = *self {
            out[index] += gamma * value;
        }
    }
}

/// A compact convex set exposed through its linear minimization oracle.
pub trait ConstraintSet: Send + Sync {
    fn dim(&self) -> usize;

    /// A minimizer of `<u, direction>` over the set.
    fn lmo(&self, direction: &[f64]) -> Result<Vertex, ConstraintError>;

    /// Euclidean diameter.
    fn diameter(&self) -> f64;

    fn contains(&self, x: &[f64], tol: f64) -> bool;
}

/// `{ x in R^dim : ||x||_1 <= radius }`.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Ball {
    radius: f64,
    dim: usize,
}

impl L1Ball {
    pub fn new(radius: f64, dim: usize) -> Result<Self, ConstraintError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(ConstraintError::BadRadius(radius));
        }
        Ok(L1Ball { radius, dim })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ConstraintSet for L1Ball {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lmo(&self, direction: &[f64]) -> Result<Vertex, ConstraintError> {
        if direction.len() != self.dim {
            return Err(ConstraintError::DimensionMismatch { expected: self.dim, got: direction.len() });
        }
        lmo_l1(direction, self.radius)
    }

    fn diameter(&self) -> f64 {
        diameter_l1(self.radius)
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        contains_l1(x, self.radius, tol)
    }
}

/// `-R sgn(g_j) e_j` for the first `j` maximizing `|g_j|`; zero when `g = 0`.
pub fn lmo_l1(g: &[f64], radius: f64) -> Result<Vertex, ConstraintError> {
    let mut best = 0.0_f64;
    let mut arg = None;
    for (j, &v) in g.iter().enumerate() {
        if !v.is_finite() {
            return Err(ConstraintError::NonFinite(j));
        }
        if v.abs() > best {
            best = v.abs();
            arg = Some(j);
        }
    }
    Ok(match arg {
        None => Vertex::Zero,
        Some(index) => Vertex::Axis { index, value: -radius * g[index].signum() },
    })
}

pub fn diameter_l1(radius: f64) -> f64 {
    2.0 * radius
}

pub fn contains_l1(x: &[f64], radius: f64, tol: f64) -> bool {
    x.iter().map(|v| v.abs()).sum::<f64>() <= radius + tol
}
