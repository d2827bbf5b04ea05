//! Ordinary-kriging Gaussian processes over the relaxed design space.
//!
//! Each model has a constant trend and a stationary anisotropic correlation
//! `k(x, x') = corr(Σ_i θ_i (x_i − x'_i)²)` on standardized inputs. With
//! `n_pls = h > 0` the `d'` per-coordinate scales are generated from `h` free
//! hyperparameters and the PLS weights `W` of the training data:
//! `θ_i = Σ_k θ_k W_ik²` (KPLS). The process mean and variance are
//! concentrated out of the likelihood; the free scales maximize the
//! concentrated log marginal likelihood by a multistart derivative-free
//! search in `log10 θ ∈ [−3, 2]`. Scales at which the nugget would shift the
//! mean at a training input by more than `1e-8` (standardized units) are left
//! out of the search unless no other scales can be factored.

mod kernel;
mod pls;

pub use kernel::KernelFamily;
pub use pls::fit_pls;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design_space::lhs_unit;
use crate::local::{minimize, LocalOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("need at least 2 distinct training points, got {got}")]
    TooFewPoints { got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data contains non-finite values")]
    NonFinite,
    #[error("response has zero variance")]
    Degenerate,
    #[error("correlation matrix of {n} points not positive definite with nugget up to {nugget:e}")]
    NotPositiveDefinite { n: usize, nugget: f64 },
    #[error("model dump: {0}")]
    Dump(String),
}

pub const NUGGET_MAX: f64 = 1e-4;
pub const LOG10_THETA_MIN: f64 = -3.0;
pub const LOG10_THETA_MAX: f64 = 2.0;
/// Training rows closer than this (Euclidean) are merged, keeping the first.
pub const DEDUP_TOL: f64 = 1e-12;
const DUMP_VERSION: u32 = 1;
/// Largest admissible `τ·max|α|` on the standardized response: the mean at a
/// training input differs from the data by exactly `τ α_i`.
const INTERP_TOL: f64 = 1e-8;
const FAILED_LML: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub family: KernelFamily,
    /// Number of PLS components; 0 means one scale per relaxed coordinate.
    #[serde(default)]
    pub n_pls: usize,
    /// Initial nugget, escalated ×10 up to [`NUGGET_MAX`] when the
    /// correlation matrix cannot be factored.
    #[serde(default = "default_nugget")]
    pub nugget: f64,
    /// Multistart count for the likelihood search.
    #[serde(default = "default_starts")]
    pub n_starts: usize,
    /// Likelihood evaluations per start; 0 picks `20·(p + 1)` for `p` free
    /// scales.
    #[serde(default)]
    pub max_evals: usize,
}

fn default_nugget() -> f64 {
    1e-10
}

fn default_starts() -> usize {
    10
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            n_pls: 0,
            nugget: default_nugget(),
            n_starts: default_starts(),
            max_evals: 0,
        }
    }
}

impl KernelConfig {
    pub fn with_pls(mut self, h: usize) -> Self {
        self.n_pls = h;
        self
    }

    pub fn with_family(mut self, family: KernelFamily) -> Self {
        self.family = family;
        self
    }
}

/// Per-fit record of the likelihood search.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitDiagnostics {
    /// Concentrated log-likelihood at each multistart initial point
    /// (`-inf` where the matrix could not be factored).
    pub start_log_likelihood: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
struct Factor {
    l: DMatrix<f64>,
    nugget: f64,
    mu: f64,
    sigma2: f64,
    lml: f64,
    alpha: DVector<f64>,
    u: DVector<f64>,
    uu: f64,
}

#[derive(Debug, Clone)]
enum Fitted {
    Constant,
    Gp(Box<Factor>),
}

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    config: KernelConfig,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    x_std: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    xs: DMatrix<f64>,
    theta: Vec<f64>,
    theta_eff: Vec<f64>,
    pls_weights: Option<DMatrix<f64>>,
    fitted: Fitted,
    diagnostics: FitDiagnostics,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDump {
    version: u32,
    config: KernelConfig,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    theta: Vec<f64>,
    pls_weights: Option<Vec<Vec<f64>>>,
    nugget: f64,
}

struct Prepared {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    x_std: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    xs: DMatrix<f64>,
    ys: DVector<f64>,
}

fn prepare(x: &[Vec<f64>], y: &[f64]) -> Result<Prepared, SurrogateError> {
    if x.len() != y.len() {
        return Err(SurrogateError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let Some(first) = x.first() else {
        return Err(SurrogateError::TooFewPoints { got: 0 });
    };
    let d = first.len();
    for row in x {
        if row.len() != d {
            return Err(SurrogateError::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFinite);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SurrogateError::NonFinite);
    }
    let mut keep: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let dup = keep.iter().any(|&k| {
            let d2: f64 = x[i].iter().zip(&x[k]).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() <= DEDUP_TOL
        });
        if !dup {
            keep.push(i);
        }
    }
    let xk: Vec<Vec<f64>> = keep.iter().map(|&i| x[i].clone()).collect();
    let yk: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
    let n = xk.len();
    let nf = n as f64;
    let mut x_mean = vec![0.0; d];
    let mut x_std = vec![0.0; d];
    for j in 0..d {
        let m = xk.iter().map(|r| r[j]).sum::<f64>() / nf;
        let v = xk.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / nf;
        x_mean[j] = m;
        x_std[j] = if v.sqrt() > 1e-14 * (1.0 + m.abs()) { v.sqrt() } else { 1.0 };
    }
    let y_mean = yk.iter().sum::<f64>() / nf;
    let y_var = yk.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / nf;
    let y_std = y_var.sqrt();
    let xs = DMatrix::from_fn(n, d, |i, j| (xk[i][j] - x_mean[j]) / x_std[j]);
    let ys = if y_std > 0.0 {
        DVector::from_fn(n, |i, _| (yk[i] - y_mean) / y_std)
    } else {
        DVector::zeros(n)
    };
    Ok(Prepared {
        x: xk,
        y: yk,
        x_mean,
        x_std,
        y_mean,
        y_std,
        xs,
        ys,
    })
}

/// Pairwise squared differences (pairs `i < j` in row-major order) projected
/// on the free scales: `F[p, l] = Σ_k (x_ik − x_jk)² M_kl`.
fn pair_features(xs: &DMatrix<f64>, m: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let (n, d) = xs.shape();
    let p = m.map_or(d, |m| m.ncols());
    let npairs = n * (n - 1) / 2;
    let mut feat = DMatrix::zeros(npairs, p);
    let mut dsq = vec![0.0; d];
    let mut row = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..d {
                let t = xs[(i, k)] - xs[(j, k)];
                dsq[k] = t * t;
            }
            match m {
                None => {
                    for k in 0..d {
                        feat[(row, k)] = dsq[k];
                    }
                }
                Some(m) => {
                    for l in 0..p {
                        feat[(row, l)] = (0..d).map(|k| dsq[k] * m[(k, l)]).sum();
                    }
                }
            }
            row += 1;
        }
    }
    feat
}

fn corr_matrix(family: KernelFamily, feat: &DMatrix<f64>, theta: &[f64], n: usize) -> DMatrix<f64> {
    let mut r = DMatrix::identity(n, n);
    let mut row = 0;
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = (0..theta.len()).map(|l| theta[l] * feat[(row, l)]).sum();
            let c = family.corr(s);
            r[(i, j)] = c;
            r[(j, i)] = c;
            row += 1;
        }
    }
    r
}

fn forward_solve(l: &DMatrix<f64>, b: &[f64]) -> DVector<f64> {
    let n = b.len();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * out[k];
        }
        out[i] = s / l[(i, i)];
    }
    out
}

fn backward_solve_t(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut out = DVector::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * out[k];
        }
        out[i] = s / l[(i, i)];
    }
    out
}

/// Factors `R + τI`, escalating the nugget `τ`, and concentrates `μ` and `σ²`.
fn factor(r: &DMatrix<f64>, ys: &DVector<f64>, nugget0: f64) -> Option<Factor> {
    let n = r.nrows();
    let mut nugget = nugget0.max(f64::MIN_POSITIVE);
    loop {
        let mut a = r.clone();
        for i in 0..n {
            a[(i, i)] += nugget;
        }
        if let Some(ch) = Cholesky::new(a) {
            let l = ch.l();
            if l.diagonal().iter().all(|v| v.is_finite() && *v > 0.0) {
                let ones = vec![1.0; n];
                let u = forward_solve(&l, &ones);
                let v = forward_solve(&l, ys.as_slice());
                let uu = u.dot(&u);
                let mu = u.dot(&v) / uu;
                let e = &v - &u * mu;
                let sigma2 = (e.dot(&e) / n as f64).max(1e-300);
                let logdet: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let nf = n as f64;
                let lml = -0.5 * (nf * (2.0 * std::f64::consts::PI * sigma2).ln() + nf + logdet);
                let alpha = backward_solve_t(&l, &e);
                if lml.is_finite() && alpha.iter().all(|v| v.is_finite()) {
                    return Some(Factor {
                        l,
                        nugget,
                        mu,
                        sigma2,
                        lml,
                        alpha,
                        u,
                        uu,
                    });
                }
            }
        }
        nugget *= 10.0;
        if nugget > NUGGET_MAX * (1.0 + 1e-9) {
            return None;
        }
    }
}

impl Factor {
    fn interpolates(&self) -> bool {
        self.nugget * self.alpha.amax() <= INTERP_TOL
    }
}

impl SurrogateModel {
    /// Fits a model to rows `x` (relaxed coordinates) and responses `y`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &KernelConfig, seed: u64) -> Result<Self, SurrogateError> {
        let prep = prepare(x, y)?;
        let n = prep.x.len();
        if n < 2 {
            return Err(SurrogateError::TooFewPoints { got: n });
        }
        let d = prep.xs.ncols();
        if prep.y_std == 0.0 {
            return Ok(Self::assemble(prep, *config, vec![], vec![0.0; d], None, Fitted::Constant, FitDiagnostics::default()));
        }
        let h = config.n_pls.min(d).min(n - 1);
        let weights = if h > 0 { Some(fit_pls(&prep.xs, &prep.ys, h)?) } else { None };
        let sq = weights.as_ref().map(|w| w.map(|v| v * v));
        let feat = pair_features(&prep.xs, sq.as_ref());
        let p = feat.ncols();

        let family = config.family;
        // the search runs over scales whose factor reproduces the training
        // data (see `Factor::interpolates`); others only serve as a fallback
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut fallback: Option<(f64, Vec<f64>)> = None;
        let mut evaluations = 0usize;
        let mut neg_lml = |log_theta: &[f64], best: &mut Option<(f64, Vec<f64>)>| -> f64 {
            evaluations += 1;
            let theta: Vec<f64> = log_theta.iter().map(|t| 10f64.powf(*t)).collect();
            let r = corr_matrix(family, &feat, &theta, n);
            match factor(&r, &prep.ys, config.nugget) {
                Some(fac) if fac.interpolates() => {
                    if best.as_ref().is_none_or(|(b, _)| fac.lml > *b) {
                        *best = Some((fac.lml, log_theta.to_vec()));
                    }
                    -fac.lml
                }
                Some(fac) => {
                    if fallback.as_ref().is_none_or(|(b, _)| fac.lml > *b) {
                        fallback = Some((fac.lml, log_theta.to_vec()));
                    }
                    FAILED_LML
                }
                None => FAILED_LML,
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts = lhs_unit(config.n_starts.max(1), p, &mut rng);
        let lower = vec![LOG10_THETA_MIN; p];
        let upper = vec![LOG10_THETA_MAX; p];
        let max_evals = if config.max_evals > 0 { config.max_evals } else { 20 * (p + 1) };
        let opts = LocalOptions {
            rho_begin: 0.2,
            rho_end: 1e-4,
            max_evals,
            feasibility_tol: 0.0,
        };
        let mut start_lml = Vec::with_capacity(starts.len());
        for s in &starts {
            let x0: Vec<f64> = s.iter().map(|u| LOG10_THETA_MIN + u * (LOG10_THETA_MAX - LOG10_THETA_MIN)).collect();
            let v = neg_lml(&x0, &mut best);
            start_lml.push(if v >= FAILED_LML { f64::NEG_INFINITY } else { -v });
            minimize(|z, _| neg_lml(z, &mut best), &x0, &lower, &upper, 0, &opts);
        }
        let diagnostics = FitDiagnostics {
            start_log_likelihood: start_lml,
            evaluations,
        };
        if best.is_none() && fallback.is_some() {
            log::warn!("no interpolating kernel scales found for {n} points; using the best regularized fit");
        }
        let Some((_, log_theta)) = best.or(fallback) else {
            return Err(SurrogateError::NotPositiveDefinite { n, nugget: NUGGET_MAX });
        };
        let theta: Vec<f64> = log_theta.iter().map(|t| 10f64.powf(*t)).collect();
        let r = corr_matrix(family, &feat, &theta, n);
        let fac = factor(&r, &prep.ys, config.nugget).ok_or(SurrogateError::NotPositiveDefinite { n, nugget: NUGGET_MAX })?;
        let theta_eff = effective_scales(&theta, sq.as_ref(), d);
        Ok(Self::assemble(prep, *config, theta, theta_eff, weights, Fitted::Gp(Box::new(fac)), diagnostics))
    }

    fn assemble(
        prep: Prepared,
        config: KernelConfig,
        theta: Vec<f64>,
        theta_eff: Vec<f64>,
        pls_weights: Option<DMatrix<f64>>,
        fitted: Fitted,
        diagnostics: FitDiagnostics,
    ) -> Self {
        Self {
            config,
            x: prep.x,
            y: prep.y,
            x_mean: prep.x_mean,
            x_std: prep.x_std,
            y_mean: prep.y_mean,
            y_std: prep.y_std,
            xs: prep.xs,
            theta,
            theta_eff,
            pls_weights,
            fitted,
            diagnostics,
        }
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.xs.ncols()
    }

    /// Training rows after duplicate merging.
    pub fn training_inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn training_outputs(&self) -> &[f64] {
        &self.y
    }

    /// Free kernel scales (`h` with PLS, `d'` without, empty for a constant
    /// model).
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn n_hyperparameters(&self) -> usize {
        self.theta.len()
    }

    /// Per-coordinate scales on standardized inputs.
    pub fn effective_theta(&self) -> &[f64] {
        &self.theta_eff
    }

    pub fn pls_weights(&self) -> Option<&DMatrix<f64>> {
        self.pls_weights.as_ref()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.fitted, Fitted::Constant)
    }

    pub fn nugget(&self) -> f64 {
        match &self.fitted {
            Fitted::Gp(f) => f.nugget,
            Fitted::Constant => 0.0,
        }
    }

    /// Process variance `σ²` in output units.
    pub fn process_variance(&self) -> f64 {
        match &self.fitted {
            Fitted::Gp(f) => f.sigma2 * self.y_std * self.y_std,
            Fitted::Constant => 0.0,
        }
    }

    /// Concentrated log marginal likelihood of the fitted scales, on the
    /// standardized response.
    pub fn log_likelihood(&self) -> f64 {
        match &self.fitted {
            Fitted::Gp(f) => f.lml,
            Fitted::Constant => f64::INFINITY,
        }
    }

    /// Concentrated log-likelihood at arbitrary free scales `theta` for the
    /// same training data; `-inf` if the matrix cannot be factored or the
    /// nugget would break interpolation of the data.
    pub fn log_likelihood_at(&self, theta: &[f64]) -> f64 {
        if self.is_constant() || theta.len() != self.theta.len() {
            return f64::NEG_INFINITY;
        }
        let sq = self.pls_weights.as_ref().map(|w| w.map(|v| v * v));
        let feat = pair_features(&self.xs, sq.as_ref());
        let ys = DVector::from_fn(self.y.len(), |i, _| (self.y[i] - self.y_mean) / self.y_std);
        let r = corr_matrix(self.config.family, &feat, theta, self.y.len());
        match factor(&r, &ys, self.config.nugget) {
            Some(f) if f.interpolates() => f.lml,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    fn standardize(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim(), "prediction point has wrong dimension");
        v.iter().zip(self.x_mean.iter().zip(&self.x_std)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    /// Weighted squared distances and correlations to every training row.
    fn correlations(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.xs.nrows();
        let mut s = vec![0.0; n];
        for (i, si) in s.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, th) in self.theta_eff.iter().enumerate() {
                let t = z[k] - self.xs[(i, k)];
                acc += th * t * t;
            }
            *si = acc;
        }
        let r = s.iter().map(|&si| self.config.family.corr(si)).collect();
        (s, r)
    }

    /// Predictive mean and variance (clamped at 0).
    pub fn predict(&self, v: &[f64]) -> (f64, f64) {
        let (m, var) = self.predict_raw(v);
        (m, var.max(0.0))
    }

    /// Predictive mean and the variance before clamping, for diagnostics.
    pub fn predict_raw(&self, v: &[f64]) -> (f64, f64) {
        let Fitted::Gp(f) = &self.fitted else {
            return (self.y_mean, 0.0);
        };
        let z = self.standardize(v);
        let (_, r) = self.correlations(&z);
        let mean = f.mu + r.iter().zip(f.alpha.iter()).map(|(a, b)| a * b).sum::<f64>();
        let w = forward_solve(&f.l, &r);
        let uw = f.u.dot(&w);
        let var = f.sigma2 * (1.0 - w.dot(&w) + (1.0 - uw) * (1.0 - uw) / f.uu);
        (self.y_mean + self.y_std * mean, var * self.y_std * self.y_std)
    }

    pub fn predict_mean(&self, v: &[f64]) -> f64 {
        let Fitted::Gp(f) = &self.fitted else {
            return self.y_mean;
        };
        let z = self.standardize(v);
        let (_, r) = self.correlations(&z);
        self.y_mean + self.y_std * (f.mu + r.iter().zip(f.alpha.iter()).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Analytic gradient of the predictive mean.
    pub fn predict_gradient(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let Fitted::Gp(f) = &self.fitted else {
            return vec![0.0; d];
        };
        let z = self.standardize(v);
        let (s, _) = self.correlations(&z);
        let mut g = vec![0.0; d];
        for i in 0..self.xs.nrows() {
            let c = f.alpha[i] * self.config.family.grad_factor(s[i]);
            if c == 0.0 {
                continue;
            }
            for k in 0..d {
                g[k] += c * self.theta_eff[k] * (z[k] - self.xs[(i, k)]);
            }
        }
        for k in 0..d {
            g[k] *= self.y_std / self.x_std[k];
        }
        g
    }

    /// Versioned JSON dump of data, configuration and hyperparameters.
    pub fn to_json(&self) -> String {
        let dump = ModelDump {
            version: DUMP_VERSION,
            config: self.config,
            x: self.x.clone(),
            y: self.y.clone(),
            theta: self.theta.clone(),
            pls_weights: self
                .pls_weights
                .as_ref()
                .map(|w| (0..w.nrows()).map(|i| w.row(i).iter().copied().collect()).collect()),
            nugget: self.nugget(),
        };
        serde_json::to_string_pretty(&dump).expect("model dump serializes")
    }

    /// Rebuilds a model from [`to_json`](Self::to_json) output without
    /// re-running the likelihood search.
    pub fn from_json(text: &str) -> Result<Self, SurrogateError> {
        let dump: ModelDump = serde_json::from_str(text).map_err(|e| SurrogateError::Dump(e.to_string()))?;
        if dump.version != DUMP_VERSION {
            return Err(SurrogateError::Dump(format!("unsupported version {}", dump.version)));
        }
        let prep = prepare(&dump.x, &dump.y)?;
        let n = prep.x.len();
        if n < 2 {
            return Err(SurrogateError::TooFewPoints { got: n });
        }
        let d = prep.xs.ncols();
        if prep.y_std == 0.0 {
            return Ok(Self::assemble(prep, dump.config, vec![], vec![0.0; d], None, Fitted::Constant, FitDiagnostics::default()));
        }
        let weights = match dump.pls_weights {
            Some(rows) => {
                if rows.len() != d {
                    return Err(SurrogateError::Dump("pls_weights row count".into()));
                }
                let h = rows.first().map_or(0, |r| r.len());
                if rows.iter().any(|r| r.len() != h) {
                    return Err(SurrogateError::Dump("ragged pls_weights".into()));
                }
                Some(DMatrix::from_fn(d, h, |i, j| rows[i][j]))
            }
            None => None,
        };
        let sq = weights.as_ref().map(|w| w.map(|v| v * v));
        let p = sq.as_ref().map_or(d, |m| m.ncols());
        if dump.theta.len() != p {
            return Err(SurrogateError::Dump(format!("expected {p} scales, got {}", dump.theta.len())));
        }
        let feat = pair_features(&prep.xs, sq.as_ref());
        let r = corr_matrix(dump.config.family, &feat, &dump.theta, n);
        // factoring directly at the stored nugget reproduces the fitted state
        let fac = factor(&r, &prep.ys, dump.nugget).ok_or(SurrogateError::NotPositiveDefinite { n, nugget: NUGGET_MAX })?;
        let theta_eff = effective_scales(&dump.theta, sq.as_ref(), d);
        Ok(Self::assemble(prep, dump.config, dump.theta, theta_eff, weights, Fitted::Gp(Box::new(fac)), FitDiagnostics::default()))
    }
}

fn effective_scales(theta: &[f64], sq_weights: Option<&DMatrix<f64>>, d: usize) -> Vec<f64> {
    match sq_weights {
        None => theta.to_vec(),
        Some(m) => (0..d).map(|i| (0..theta.len()).map(|l| theta[l] * m[(i, l)]).sum()).collect(),
    }
}

/// Independent models for the `n` objectives and `m` constraints of a problem,
/// all trained on the same inputs.
#[derive(Debug, Clone)]
pub struct MultiOutputSurrogate {
    pub objectives: Vec<SurrogateModel>,
    pub constraints: Vec<SurrogateModel>,
}

/// Means and variances of every output at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub f_mean: Vec<f64>,
    pub f_var: Vec<f64>,
    pub g_mean: Vec<f64>,
    pub g_var: Vec<f64>,
}

impl MultiOutputSurrogate {
    /// `f[i]` and `g[i]` are the objective and constraint values of row `x[i]`.
    /// Model `k` (objectives first) is fitted with seed `seed + k`.
    pub fn fit(
        x: &[Vec<f64>],
        f: &[Vec<f64>],
        g: &[Vec<f64>],
        config: &KernelConfig,
        seed: u64,
    ) -> Result<Self, SurrogateError> {
        let n_obj = f.first().map_or(0, |r| r.len());
        let n_con = g.first().map_or(0, |r| r.len());
        if f.len() != x.len() || (n_con > 0 && g.len() != x.len()) {
            return Err(SurrogateError::DimensionMismatch {
                expected: x.len(),
                got: f.len(),
            });
        }
        let column = |rows: &[Vec<f64>], k: usize| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
        let mut objectives = Vec::with_capacity(n_obj);
        for k in 0..n_obj {
            objectives.push(SurrogateModel::fit(x, &column(f, k), config, seed.wrapping_add(k as u64))?);
        }
        let mut constraints = Vec::with_capacity(n_con);
        for k in 0..n_con {
            let s = seed.wrapping_add((n_obj + k) as u64);
            constraints.push(SurrogateModel::fit(x, &column(g, k), config, s)?);
        }
        Ok(Self { objectives, constraints })
    }

    pub fn predict(&self, v: &[f64]) -> Prediction {
        let (f_mean, f_var) = self.objectives.iter().map(|m| m.predict(v)).unzip();
        let (g_mean, g_var) = self.constraints.iter().map(|m| m.predict(v)).unzip();
        Prediction {
            f_mean,
            f_var,
            g_mean,
            g_var,
        }
    }

    pub fn predict_means(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.objectives.iter().map(|m| m.predict_mean(v)).collect(),
            self.constraints.iter().map(|m| m.predict_mean(v)).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        lhs_unit(n, d, &mut rng)
    }

    fn branin_like(x: &[f64]) -> f64 {
        (3.0 * x[0]).sin() + x[1] * x[1] - 0.5 * x[0] * x[1] + if x.len() > 2 { 0.3 * x[2] } else { 0.0 }
    }

    #[test]
    fn one_dimensional_reference() {
        let x = vec![vec![0.0], vec![0.5], vec![1.0]];
        let y = vec![0.0, 0.5, 1.0];
        let m = SurrogateModel::fit(&x, &y, &KernelConfig::default(), 0).unwrap();
        let mean = m.predict_mean(&[0.25]);
        assert!((0.15..=0.35).contains(&mean), "{mean}");
        for (xi, yi) in x.iter().zip(&y) {
            let (mu, var) = m.predict(xi);
            assert!((mu - yi).abs() <= 1e-6 * (1.0 + yi.abs()));
            assert!(var <= 1e-6 * m.process_variance());
        }
    }

    #[test]
    fn constant_response() {
        let x = vec![vec![0.0], vec![0.5], vec![1.0]];
        let m = SurrogateModel::fit(&x, &[2.0; 3], &KernelConfig::default(), 0).unwrap();
        assert!(m.is_constant());
        assert_eq!(m.predict(&[0.3]), (2.0, 0.0));
        assert_eq!(m.predict_gradient(&[0.3]), vec![0.0]);
    }

    #[test]
    fn deterministic_refit() {
        let x = sample(15, 3, 1);
        let y: Vec<f64> = x.iter().map(|r| branin_like(r)).collect();
        let a = SurrogateModel::fit(&x, &y, &KernelConfig::default(), 9).unwrap();
        let b = SurrogateModel::fit(&x, &y, &KernelConfig::default(), 9).unwrap();
        assert_eq!(
            a.theta().iter().map(|t| t.to_bits()).collect::<Vec<_>>(),
            b.theta().iter().map(|t| t.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn interpolates_and_recovers_prior() {
        for family in [KernelFamily::SquaredExponential, KernelFamily::Matern52] {
            let x = sample(20, 2, 3);
            let y: Vec<f64> = x.iter().map(|r| branin_like(r)).collect();
            let m = SurrogateModel::fit(&x, &y, &KernelConfig::default().with_family(family), 4).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                let (mu, var) = m.predict(xi);
                assert!((mu - yi).abs() <= 1e-6 * (1.0 + yi.abs()), "{family:?} {} {:?} {}", mu - yi, m.theta(), m.nugget());
                assert!(var <= 1e-6 * m.process_variance());
            }
            let far = [1e4, -1e4];
            assert!(m.predict(&far).1 >= 0.99 * m.process_variance());
        }
    }

    #[test]
    fn symmetric_data_gives_symmetric_mean() {
        let x: Vec<Vec<f64>> = [0.0, 0.2, 0.35, 0.65, 0.8, 1.0].iter().map(|&v| vec![v]).collect();
        let y: Vec<f64> = x.iter().map(|r| (r[0] - 0.5).powi(2)).collect();
        let m = SurrogateModel::fit(&x, &y, &KernelConfig::default(), 0).unwrap();
        for t in [0.05, 0.1, 0.27, 0.4] {
            let (a, b) = (m.predict_mean(&[0.5 - t]), m.predict_mean(&[0.5 + t]));
            assert!((a - b).abs() < 1e-9, "{t}: {a} vs {b}");
        }
    }

    #[test]
    fn kpls_hyperparameter_count() {
        let x = sample(30, 8, 5);
        let y: Vec<f64> = x.iter().map(|r| r.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v).sum()).collect();
        let m = SurrogateModel::fit(&x, &y, &KernelConfig::default().with_pls(2), 0).unwrap();
        assert_eq!(m.n_hyperparameters(), 2);
        assert_eq!(m.effective_theta().len(), 8);
        assert_eq!(m.pls_weights().unwrap().shape(), (8, 2));
        let m0 = SurrogateModel::fit(&x, &y, &KernelConfig::default(), 0).unwrap();
        assert_eq!(m0.n_hyperparameters(), 8);
    }

    #[test]
    fn likelihood_beats_every_start() {
        let x = sample(18, 3, 2);
        let y: Vec<f64> = x.iter().map(|r| branin_like(r)).collect();
        let m = SurrogateModel::fit(&x, &y, &KernelConfig::default(), 3).unwrap();
        let starts = &m.diagnostics().start_log_likelihood;
        assert_eq!(starts.len(), 10);
        for s in starts {
            assert!(m.log_likelihood() >= *s);
        }
        assert_eq!(m.log_likelihood_at(m.theta()), m.log_likelihood());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for family in [KernelFamily::SquaredExponential, KernelFamily::Matern52] {
            let x = sample(25, 3, 8);
            let y: Vec<f64> = x.iter().map(|r| branin_like(r)).collect();
            let m = SurrogateModel::fit(&x, &y, &KernelConfig::default().with_family(family), 1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for _ in 0..20 {
                let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
                let g = m.predict_gradient(&p);
                for k in 0..3 {
                    let h = 1e-5;
                    let mut a = p.clone();
                    let mut b = p.clone();
                    a[k] += h;
                    b[k] -= h;
                    let fd = (m.predict_mean(&a) - m.predict_mean(&b)) / (2.0 * h);
                    assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "{family:?} {fd} {}", g[k]);
                }
            }
        }
    }

    #[test]
    fn duplicate_rows_are_merged() {
        let x = vec![vec![0.0], vec![0.5], vec![0.5], vec![1.0]];
        let y = vec![0.0, 1.0, 1.0, 0.0];
        let m = SurrogateModel::fit(&x, &y, &KernelConfig::default(), 0).unwrap();
        assert_eq!(m.training_inputs().len(), 3);
    }

    #[test]
    fn dump_round_trip() {
        let x = sample(20, 4, 6);
        let y: Vec<f64> = x.iter().map(|r| branin_like(r)).collect();
        for cfg in [KernelConfig::default(), KernelConfig::default().with_pls(2)] {
            let m = SurrogateModel::fit(&x, &y, &cfg, 2).unwrap();
            let back = SurrogateModel::from_json(&m.to_json()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for _ in 0..50 {
                let p: Vec<f64> = (0..4).map(|_| rng.random_range(-0.2..1.2)).collect();
                let (a, va) = m.predict(&p);
                let (b, vb) = back.predict(&p);
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                assert!((va - vb).abs() <= 1e-12 * (1.0 + va.abs()));
            }
        }
        assert!(SurrogateModel::from_json(r#"{"version":2}"#).is_err());
    }

    #[test]
    fn multi_output_shares_inputs() {
        let x = sample(12, 2, 0);
        let f: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0], r[1] * r[1]]).collect();
        let g: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] + r[1] - 1.0]).collect();
        let s = MultiOutputSurrogate::fit(&x, &f, &g, &KernelConfig::default(), 0).unwrap();
        assert_eq!(s.objectives.len(), 2);
        assert_eq!(s.constraints.len(), 1);
        let p = s.predict(&x[3]);
        assert!((p.g_mean[0] - g[3][0]).abs() < 1e-6);
        for m in s.objectives.iter().chain(&s.constraints) {
            assert_eq!(m.training_inputs(), &x[..]);
        }
    }

    #[test]
    fn variance_never_negative_before_clamp() {
        let x = sample(30, 2, 11);
        let y: Vec<f64> = x.iter().map(|r| branin_like(r)).collect();
        let m = SurrogateModel::fit(&x, &y, &KernelConfig::default(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let p: Vec<f64> = (0..2).map(|_| rng.random_range(-0.5..1.5)).collect();
            assert!(m.predict_raw(&p).1 >= -1e-8);
        }
        for xi in &x {
            assert!(m.predict_raw(xi).1 >= -1e-8);
        }
    }
}
