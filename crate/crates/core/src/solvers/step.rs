use std::fmt;

/// Step-size rules `gamma_k`, `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `2 / (k + 1)`: convex DstoFW and DenFW.
    Harmonic,
    /// `scale / k^alpha`: non-convex DstoFW and DenFW use `scale = 1`.
    Polynomial { scale: f64, alpha: f64 },
    /// `2 / (2^t + k + 1)` with `t = k / q` (integer division): convex CenFW.
    SpiderConvex { q: usize },
    /// `1 / sqrt(horizon)`: non-convex CenFW.
    Constant { horizon: usize },
}

impl StepSchedule {
    pub fn nonconvex(alpha: f64) -> Self {
        StepSchedule::Polynomial { scale: 1.0, alpha }
    }

    pub fn gamma(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        let kf = k as f64;
        match *self {
            StepSchedule::Harmonic => 2.0 / (kf + 1.0),
            StepSchedule::Polynomial { scale, alpha } => (scale * kf.powf(-alpha)).min(1.0),
            StepSchedule::SpiderConvex { q } => {
                let t = (k / q.max(1)).min(i32::MAX as usize) as i32;
                2.0 / (2f64.powi(t) + kf + 1.0)
            }
            StepSchedule::Constant { horizon } => 1.0 / (horizon.max(1) as f64).sqrt(),
        }
    }

    /// Exponent of polynomial decay, where one exists.
    pub fn decay_exponent(&self) -> Option<f64> {
        match *self {
            StepSchedule::Harmonic => Some(1.0),
            StepSchedule::Polynomial { alpha, .. } => Some(alpha),
            _ => None,
        }
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSchedule::Harmonic => write!(f, "2/(k+1)"),
            StepSchedule::Polynomial { scale, alpha } => write!(f, "{scale}/k^{alpha}"),
            StepSchedule::SpiderConvex { q } => write!(f, "2/(2^(k//{q})+k+1)"),
            StepSchedule::Constant { horizon } => write!(f, "1/sqrt({horizon})"),
        }
    }
}

/// `gamma_k` under `sched`.
pub fn step_size(k: usize, sched: &StepSchedule) -> f64 {
    sched.gamma(k)
}
