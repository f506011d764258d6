use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, ProblemError, Sample, SparseVector};

/// Gaussian features, a planted separator and symmetric label noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    /// Probability of flipping each label.
    pub noise: f64,
}

/// Draws `a ~ N(0, I)`, `w ~ N(0, I / dim)` and labels `sgn <a, w>` flipped
/// with probability `noise`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, ProblemError> {
    if spec.n == 0 || spec.dim == 0 {
        return Err(ProblemError::Synthetic("n and dim must be positive".into()));
    }
    if !(0.0..=0.5).contains(&spec.noise) {
        return Err(ProblemError::Synthetic(format!("noise {} outside [0, 0.5]", spec.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scale = 1.0 / (spec.dim as f64).sqrt();
    let planted: Vec<f64> = (0..spec.dim).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    let samples = (0..spec.n)
        .map(|_| {
            let a: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let score: f64 = a.iter().zip(&planted).map(|(x, w)| x * w).sum();
            let mut label = if score >= 0.0 { 1.0 } else { -1.0 };
            if rng.random::<f64>() < spec.noise {
                label = -label;
            }
            Sample::new(SparseVector::from_dense(&a), label)
        })
        .collect();
    Ok(Dataset { samples, dim: spec.dim })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let spec = SyntheticSpec { n: 40, dim: 5, seed: 3, noise: 0.1 };
        let a = generate_synthetic(&spec).unwrap();
        assert_eq!(a, generate_synthetic(&spec).unwrap());
        assert_eq!(a.samples.len(), 40);
        assert_eq!(a.dim, 5);
        assert!(a.samples.iter().any(|s| s.label == 1.0) && a.samples.iter().any(|s| s.label == -1.0));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate_synthetic(&SyntheticSpec { n: 0, dim: 5, seed: 0, noise: 0.0 }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { n: 5, dim: 5, seed: 0, noise: 0.9 }).is_err());
    }
}
