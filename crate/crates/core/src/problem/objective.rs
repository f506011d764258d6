use std::fmt;
use std::str::FromStr;

/// Per-sample loss as a function of the margin `z = l <a, x>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `ln(1 + exp(-z))`
    ConvexLogistic,
    /// `1 / (1 + exp(z))`
    NonconvexSigmoid,
}

impl Objective {
    pub fn is_convex(self) -> bool {
        matches!(self, Objective::ConvexLogistic)
    }

    /// Component loss at margin `z`.
    pub fn loss(self, z: f64) -> f64 {
        match self {
            Objective::ConvexLogistic => softplus(-z),
            Objective::NonconvexSigmoid => sigmoid(-z),
        }
    }

    /// `d loss / d z`; the component gradient is `dloss(z) * l * a`.
    pub fn dloss(self, z: f64) -> f64 {
        match self {
            Objective::ConvexLogistic => -sigmoid(-z),
            Objective::NonconvexSigmoid => {
                let s = sigmoid(z);
                -s * (1.0 - s)
            }
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::ConvexLogistic => "convex",
            Objective::NonconvexSigmoid => "nonconvex",
        })
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "convex" => Ok(Objective::ConvexLogistic),
            "nonconvex" => Ok(Objective::NonconvexSigmoid),
            other => Err(format!("expected `convex` or `nonconvex`, got `{other}`")),
        }
    }
}

/// Logistic function without overflow for large `|t|`.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(t))` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}
