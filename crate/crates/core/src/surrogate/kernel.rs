use serde::{Deserialize, Serialize};

/// Stationary correlation family. Both are functions of the weighted squared
/// distance `s = Σ_k θ_k (x_k − x'_k)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
    #[serde(rename = "matern52")]
    Matern52,
}

impl std::str::FromStr for KernelFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "squared-exponential" | "se" | "gaussian" => Ok(Self::SquaredExponential),
            "matern52" | "matern-5/2" => Ok(Self::Matern52),
            other => Err(format!("unknown kernel `{other}` (expected squared-exponential or matern52)")),
        }
    }
}

const SQRT5: f64 = 2.236_067_977_499_79;

impl KernelFamily {
    pub fn corr(self, s: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => (-s).exp(),
            KernelFamily::Matern52 => {
                let h = s.max(0.0).sqrt();
                (1.0 + SQRT5 * h + 5.0 * s / 3.0) * (-SQRT5 * h).exp()
            }
        }
    }

    /// `c` such that `∂k/∂x_j = c · θ_j (x_j − x'_j)`.
    pub fn grad_factor(self, s: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => -2.0 * (-s).exp(),
            KernelFamily::Matern52 => {
                let h = s.max(0.0).sqrt();
                -5.0 / 3.0 * (1.0 + SQRT5 * h) * (-SQRT5 * h).exp()
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "se" | "squared-exponential" | "gaussian" => Some(Self::SquaredExponential),
            "matern52" | "matern-5/2" => Some(Self::Matern52),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "squared-exponential",
            KernelFamily::Matern52 => "matern52",
        }
    }
}
