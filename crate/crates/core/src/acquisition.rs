//! Improvement criteria under independent Gaussian predictions and their
//! regularized form `γ α(x) − ψ(μ(x))`.
//!
//! EHVI and PI integrate the predictive density over the region not dominated
//! by the current front. That region is split into disjoint boxes by slicing
//! along the last objective (points below each slice dominate it), so both
//! criteria are exact sums of per-box products:
//!
//! * PI:   `Σ_box Π_i [Φ(t(u_i)) − Φ(t(l_i))]`
//! * EHVI: `Σ_box Π_i [Ψ(u_i) − Ψ(l_i)]`, `Ψ(a) = ∫_{−∞}^{a} Φ((z − μ)/σ) dz
//!   = σ (tΦ(t) + φ(t))`, `t = (a − μ)/σ`
//!
//! For EHVI the boxes are clipped to the reference point. When the
//! decomposition would exceed [`MAX_CELLS`] boxes the criteria fall back to a
//! seeded Monte-Carlo estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::pareto::{hypervolume_improvement, nondominated_filter, weakly_dominates};

/// Upper bound on the number of boxes in the exact decomposition.
pub const MAX_CELLS: usize = 200_000;
/// Monte-Carlo sample count used beyond [`MAX_CELLS`].
pub const MC_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Ehvi,
    Pi,
    Mpi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    None,
    Max,
    Sum,
}

impl std::str::FromStr for Criterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ehvi" => Ok(Self::Ehvi),
            "pi" => Ok(Self::Pi),
            "mpi" => Ok(Self::Mpi),
            other => Err(format!("unknown criterion `{other}` (expected ehvi, pi or mpi)")),
        }
    }
}

impl std::str::FromStr for Regularization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "max" => Ok(Self::Max),
            "sum" => Ok(Self::Sum),
            other => Err(format!("unknown regularization `{other}` (expected none, max or sum)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub criterion: Criterion,
    pub reg: Regularization,
    pub gamma: f64,
    /// Seed of the Monte-Carlo fallback.
    #[serde(default)]
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Ehvi,
            reg: Regularization::Sum,
            gamma: 1.0,
            seed: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(format!("gamma must be a positive finite number, got {}", self.gamma));
        }
        Ok(())
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn norm_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

/// `P(Y ≤ a)` for `Y ~ N(μ, σ²)`; a point mass splits evenly at `a = μ`.
fn cdf(a: f64, mu: f64, sigma: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        0.0
    } else if a == f64::INFINITY {
        1.0
    } else if sigma > 0.0 {
        norm_cdf((a - mu) / sigma)
    } else if a > mu {
        1.0
    } else if a < mu {
        0.0
    } else {
        0.5
    }
}

/// `Ψ(a) = E[(a − Y)⁺]` for `Y ~ N(μ, σ²)`.
fn psi(a: f64, mu: f64, sigma: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        0.0
    } else if sigma > 0.0 {
        let t = (a - mu) / sigma;
        sigma * (t * norm_cdf(t) + norm_pdf(t))
    } else {
        (a - mu).max(0.0)
    }
}

/// Disjoint boxes covering `{z ≤ upper : z not weakly dominated by the front}`,
/// stored as index pairs into per-objective breakpoint lists.
#[derive(Debug, Clone)]
struct Cells {
    n: usize,
    breaks: Vec<Vec<f64>>,
    /// `2n` indices per cell: lower indices then upper indices.
    idx: Vec<u32>,
}

impl Cells {
    fn build(front: &[Vec<f64>], upper: &[f64]) -> Option<Self> {
        let n = upper.len();
        let pts: Vec<&[f64]> = front.iter().map(|p| p.as_slice()).collect();
        let mut raw: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = upper.to_vec();
        if !decompose(&pts, upper, n, &mut lo, &mut hi, &mut raw) {
            return None;
        }
        let mut breaks: Vec<Vec<f64>> = vec![vec![f64::NEG_INFINITY]; n];
        for (l, u) in &raw {
            for i in 0..n {
                breaks[i].push(l[i]);
                breaks[i].push(u[i]);
            }
        }
        for b in &mut breaks {
            b.sort_by(|x, y| x.total_cmp(y));
            b.dedup();
        }
        let find = |i: usize, v: f64| breaks[i].binary_search_by(|x| x.total_cmp(&v)).expect("breakpoint") as u32;
        let mut idx = Vec::with_capacity(raw.len() * 2 * n);
        for (l, u) in &raw {
            idx.extend((0..n).map(|i| find(i, l[i])));
            idx.extend((0..n).map(|i| find(i, u[i])));
        }
        Some(Self { n, breaks, idx })
    }

    fn len(&self) -> usize {
        self.idx.len() / (2 * self.n)
    }

    /// `Σ_cells Π_i [F_i(u) − F_i(l)]` for per-objective antiderivative-like
    /// tables `table[i][k] = F_i(breaks[i][k])`.
    fn integrate(&self, table: &[Vec<f64>]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for cell in self.idx.chunks_exact(2 * n) {
            let mut prod = 1.0;
            for i in 0..n {
                prod *= table[i][cell[n + i] as usize] - table[i][cell[i] as usize];
                if prod == 0.0 {
                    break;
                }
            }
            total += prod;
        }
        total
    }
}

/// Recursive slicing on objective `d − 1`. `lo`/`hi` carry the interval of
/// the objectives above `d` for the box under construction. Returns false once
/// the cell budget is exhausted.
fn decompose(
    pts: &[&[f64]],
    upper: &[f64],
    d: usize,
    lo: &mut Vec<f64>,
    hi: &mut Vec<f64>,
    out: &mut Vec<(Vec<f64>, Vec<f64>)>,
) -> bool {
    let k = d - 1;
    // only the nondominated projections shape the region
    let proj: Vec<Vec<f64>> = pts.iter().map(|p| p[..d].to_vec()).collect();
    let keep = nondominated_filter(&proj);
    let mut sorted: Vec<&[f64]> = keep.iter().map(|&i| pts[i]).collect();
    sorted.sort_by(|a, b| a[k].total_cmp(&b[k]));

    if d == 1 {
        let top = sorted.first().map_or(upper[0], |p| p[0].min(upper[0]));
        if top > f64::NEG_INFINITY {
            lo[0] = f64::NEG_INFINITY;
            hi[0] = top;
            out.push((lo.clone(), hi.clone()));
        }
        return out.len() <= MAX_CELLS;
    }
    let mut start = f64::NEG_INFINITY;
    for j in 0..=sorted.len() {
        let end = if j < sorted.len() { sorted[j][k].min(upper[k]) } else { upper[k] };
        if end > start {
            lo[k] = start;
            hi[k] = end;
            if !decompose(&sorted[..j], upper, k, lo, hi, out) {
                return false;
            }
        }
        start = start.max(end);
        if start >= upper[k] {
            break;
        }
    }
    true
}

/// Reusable evaluator of one criterion against a fixed front and reference
/// point. Building it performs the box decomposition once.
#[derive(Debug, Clone)]
pub struct Acquisition {
    config: AcquisitionConfig,
    front: Vec<Vec<f64>>,
    r: Vec<f64>,
    cells: Option<Cells>,
}

impl Acquisition {
    pub fn new(config: AcquisitionConfig, front: &[Vec<f64>], r: &[f64]) -> Self {
        let nd: Vec<Vec<f64>> = nondominated_filter(front).into_iter().map(|i| front[i].clone()).collect();
        let cells = match config.criterion {
            Criterion::Ehvi => Cells::build(&nd, r),
            Criterion::Pi => Cells::build(&nd, &vec![f64::INFINITY; r.len()]),
            Criterion::Mpi => None,
        };
        Self {
            config,
            front: nd,
            r: r.to_vec(),
            cells,
        }
    }

    pub fn config(&self) -> &AcquisitionConfig {
        &self.config
    }

    /// Number of boxes in the exact decomposition, `None` when the
    /// Monte-Carlo fallback is in use (or the criterion needs none).
    pub fn n_cells(&self) -> Option<usize> {
        self.cells.as_ref().map(Cells::len)
    }

    /// Raw criterion `α`.
    pub fn criterion(&self, means: &[f64], sigmas: &[f64]) -> f64 {
        match self.config.criterion {
            Criterion::Ehvi => match &self.cells {
                Some(c) => {
                    let table: Vec<Vec<f64>> = (0..c.n)
                        .map(|i| c.breaks[i].iter().map(|&a| psi(a, means[i], sigmas[i])).collect())
                        .collect();
                    c.integrate(&table).max(0.0)
                }
                None => ehvi_monte_carlo(means, sigmas, &self.front, &self.r, MC_SAMPLES, self.config.seed).0,
            },
            Criterion::Pi => match &self.cells {
                Some(c) => {
                    let table: Vec<Vec<f64>> = (0..c.n)
                        .map(|i| c.breaks[i].iter().map(|&a| cdf(a, means[i], sigmas[i])).collect())
                        .collect();
                    c.integrate(&table).clamp(0.0, 1.0)
                }
                None => pi_monte_carlo(means, sigmas, &self.front, MC_SAMPLES, self.config.seed).0,
            },
            Criterion::Mpi => mpi(means, sigmas, &self.front),
        }
    }

    /// `α` (reg = none) or `γ α − ψ(means)` with `ψ` the max or the sum of the
    /// means, which are expected in standardized units.
    pub fn regularized(&self, means: &[f64], sigmas: &[f64]) -> f64 {
        let alpha = self.criterion(means, sigmas);
        regularize(&self.config, alpha, means)
    }
}

fn regularize(config: &AcquisitionConfig, alpha: f64, means: &[f64]) -> f64 {
    match config.reg {
        Regularization::None => alpha,
        Regularization::Max => config.gamma * alpha - means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Regularization::Sum => config.gamma * alpha - means.iter().sum::<f64>(),
    }
}

/// Expected hypervolume improvement of `N(means, diag(sigmas²))` over `front`
/// bounded by `r`. Exact for any number of objectives below [`MAX_CELLS`].
pub fn ehvi(means: &[f64], sigmas: &[f64], front: &[Vec<f64>], r: &[f64]) -> f64 {
    let config = AcquisitionConfig {
        criterion: Criterion::Ehvi,
        ..AcquisitionConfig::default()
    };
    Acquisition::new(config, front, r).criterion(means, sigmas)
}

/// Probability that the Gaussian candidate is not weakly dominated by any
/// front member.
pub fn pi(means: &[f64], sigmas: &[f64], front: &[Vec<f64>]) -> f64 {
    let config = AcquisitionConfig {
        criterion: Criterion::Pi,
        ..AcquisitionConfig::default()
    };
    Acquisition::new(config, front, &vec![f64::INFINITY; means.len()]).criterion(means, sigmas)
}

/// `min_y Π_i Φ((y_i − μ_i)/σ_i)` over front members `y`; 1 for an empty
/// front.
pub fn mpi(means: &[f64], sigmas: &[f64], front: &[Vec<f64>]) -> f64 {
    front
        .iter()
        .map(|y| (0..means.len()).map(|i| cdf(y[i], means[i], sigmas[i])).product::<f64>())
        .fold(1.0, f64::min)
}

/// Regularized criterion of `config` for one prediction.
pub fn regularized(config: &AcquisitionConfig, means: &[f64], sigmas: &[f64], front: &[Vec<f64>], r: &[f64]) -> f64 {
    Acquisition::new(*config, front, r).regularized(means, sigmas)
}

/// Monte-Carlo EHVI: mean of exact hypervolume improvements of sampled
/// outcomes. Returns the estimate and its standard error.
pub fn ehvi_monte_carlo(
    means: &[f64],
    sigmas: &[f64],
    front: &[Vec<f64>],
    r: &[f64],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = means.len();
    let mut y = vec![0.0; n];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        for i in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            y[i] = means[i] + sigmas[i] * e;
        }
        let v = hypervolume_improvement(front, r, &y).unwrap_or(0.0);
        s1 += v;
        s2 += v * v;
    }
    mean_and_error(s1, s2, samples)
}

/// Monte-Carlo PI with standard error.
pub fn pi_monte_carlo(means: &[f64], sigmas: &[f64], front: &[Vec<f64>], samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = means.len();
    let mut y = vec![0.0; n];
    let mut hits = 0.0;
    for _ in 0..samples {
        for i in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            y[i] = means[i] + sigmas[i] * e;
        }
        if !front.iter().any(|p| weakly_dominates(p, &y)) {
            hits += 1.0;
        }
    }
    mean_and_error(hits, hits, samples)
}

fn mean_and_error(s1: f64, s2: f64, samples: usize) -> (f64, f64) {
    let n = samples.max(1) as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Per-objective affine standardization `(f − mean) / std` fitted on the
/// archive's objective values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(values: &[Vec<f64>]) -> Option<Self> {
        let n = values.first()?.len();
        let k = values.len() as f64;
        let mean: Vec<f64> = (0..n).map(|i| values.iter().map(|v| v[i]).sum::<f64>() / k).collect();
        let std = (0..n)
            .map(|i| {
                let var = values.iter().map(|v| (v[i] - mean[i]).powi(2)).sum::<f64>() / k;
                if var.sqrt() > 1e-12 * (1.0 + mean[i].abs()) {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Some(Self { mean, std })
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        f.iter().enumerate().map(|(i, v)| (v - self.mean[i]) / self.std[i]).collect()
    }

    pub fn apply_sigma(&self, s: &[f64]) -> Vec<f64> {
        s.iter().enumerate().map(|(i, v)| v / self.std[i]).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().enumerate().map(|(i, v)| v * self.std[i] + self.mean[i]).collect()
    }
}
