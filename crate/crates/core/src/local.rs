//! Derivative-free constrained local minimizer.
//!
//! A COBYLA-style method: linear models of the objective and of every
//! constraint are interpolated on a simplex of `n + 1` points, each iteration
//! solves a linear program over an infinity-norm trust region intersected with
//! the variable bounds, and the trust-region radius `ρ` is halved whenever the
//! models stop predicting progress. Constraints follow the `c(x) ≤ 0`
//! convention. The search runs in coordinates scaled to the unit box.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    /// Initial trust-region radius, as a fraction of each variable's range.
    pub rho_begin: f64,
    /// Final radius, same units.
    pub rho_end: f64,
    pub max_evals: usize,
    /// Constraint values up to this are treated as satisfied when picking the
    /// returned point.
    pub feasibility_tol: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            rho_begin: 0.2,
            rho_end: 1e-6,
            max_evals: 1000,
            feasibility_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub constraints: Vec<f64>,
    /// `max(0, max_j c_j)` at `x`.
    pub violation: f64,
    pub evals: usize,
}

impl LocalResult {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.violation <= tol
    }
}

fn violation(c: &[f64]) -> f64 {
    c.iter().fold(0.0, |acc, &v| if v.is_nan() { f64::INFINITY } else { acc.max(v) })
}

/// Keeps the best point seen: feasible points by objective, then infeasible
/// ones by violation.
struct Incumbent {
    tol: f64,
    best: Option<LocalResult>,
}

impl Incumbent {
    fn offer(&mut self, x: &[f64], f: f64, c: &[f64], evals: usize) {
        let v = violation(c);
        let better = match &self.best {
            None => true,
            Some(b) => {
                let (bf, cf) = (b.violation <= self.tol, v <= self.tol);
                match (bf, cf) {
                    (false, true) => true,
                    (true, false) => false,
                    (true, true) => f < b.f || (b.f.is_nan() && !f.is_nan()),
                    (false, false) => v < b.violation,
                }
            }
        };
        if better {
            self.best = Some(LocalResult {
                x: x.to_vec(),
                f,
                constraints: c.to_vec(),
                violation: v,
                evals,
            });
        }
    }
}

struct Problem<'a, F> {
    func: F,
    lower: &'a [f64],
    scale: Vec<f64>,
    n_con: usize,
    evals: usize,
    incumbent: Incumbent,
    xbuf: Vec<f64>,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Problem<'_, F> {
    fn eval(&mut self, z: &[f64]) -> (f64, Vec<f64>) {
        for (i, x) in self.xbuf.iter_mut().enumerate() {
            *x = self.lower[i] + z[i].clamp(0.0, 1.0) * self.scale[i];
        }
        let mut c = vec![0.0; self.n_con];
        let mut f = (self.func)(&self.xbuf, &mut c);
        if f.is_nan() {
            f = f64::INFINITY;
        }
        for v in c.iter_mut() {
            if v.is_nan() {
                *v = f64::INFINITY;
            }
        }
        self.evals += 1;
        let xb = std::mem::take(&mut self.xbuf);
        self.incumbent.offer(&xb, f, &c, self.evals);
        self.xbuf = xb;
        (f, c)
    }
}

struct Vertex {
    z: Vec<f64>,
    f: f64,
    c: Vec<f64>,
    v: f64,
}

impl Vertex {
    fn merit(&self, mu: f64) -> f64 {
        if self.v == 0.0 {
            self.f
        } else {
            self.f + mu * self.v
        }
    }
}

/// Minimizes `f(x)` subject to `c(x) ≤ 0` and `lower ≤ x ≤ upper`.
///
/// `func(x, c)` returns the objective and writes the `n_constraints`
/// constraint values into `c`. Bounds must be finite; fixed variables
/// (`lower == upper`) are allowed. Non-finite objective or constraint values
/// are treated as `+∞`.
pub fn minimize<F>(
    func: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    n_constraints: usize,
    opts: &LocalOptions,
) -> LocalResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(lower.len(), n, "lower bound length");
    assert_eq!(upper.len(), n, "upper bound length");
    let scale: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| (u - l).max(0.0)).collect();
    let mut prob = Problem {
        func,
        lower,
        scale: scale.clone(),
        n_con: n_constraints,
        evals: 0,
        incumbent: Incumbent {
            tol: opts.feasibility_tol,
            best: None,
        },
        xbuf: vec![0.0; n],
    };
    let z0: Vec<f64> = (0..n)
        .map(|i| {
            if scale[i] > 0.0 {
                ((x0[i] - lower[i]) / scale[i]).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    // only free variables take part in the simplex
    let free: Vec<usize> = (0..n).filter(|&i| scale[i] > 0.0).collect();
    let (f0, c0) = prob.eval(&z0);
    if free.is_empty() || opts.max_evals <= 1 {
        let _ = (f0, c0);
        return prob.incumbent.best.unwrap();
    }
    search(&mut prob, z0, f0, c0, &free, opts);
    prob.incumbent.best.unwrap()
}

fn search<F: FnMut(&[f64], &mut [f64]) -> f64>(
    prob: &mut Problem<'_, F>,
    z0: Vec<f64>,
    f0: f64,
    c0: Vec<f64>,
    free: &[usize],
    opts: &LocalOptions,
) {
    let nf = free.len();
    let m = prob.n_con;
    let mut rho = opts.rho_begin.clamp(opts.rho_end.max(1e-12), 0.5);
    let rho_end = opts.rho_end.min(rho);
    let rho_max = rho;
    let mut mu = 0.0;

    let mut verts: Vec<Vertex> = Vec::with_capacity(nf + 1);
    verts.push(Vertex {
        v: violation(&c0),
        z: z0,
        f: f0,
        c: c0,
    });
    for &i in free {
        if prob.evals >= opts.max_evals {
            return;
        }
        let mut z = verts[0].z.clone();
        z[i] = if z[i] + rho <= 1.0 { z[i] + rho } else { z[i] - rho };
        let (f, c) = prob.eval(&z);
        verts.push(Vertex { v: violation(&c), z, f, c });
    }

    let mut shrink_pending = false;
    let mut basis: Option<Lagrange> = None;
    while prob.evals < opts.max_evals {
        // best vertex under the current merit function
        let b = best_vertex(&verts, mu);
        let others: Vec<usize> = (0..verts.len()).filter(|&k| k != b).collect();
        let zb = verts[b].z.clone();

        if basis.as_ref().is_none_or(|l| l.updates >= nf || l.h != rho) {
            basis = Lagrange::build(&verts, free, &zb, rho);
        }
        let Some(lag) = basis.as_ref() else {
            // degenerate simplex: rebuild the worst vertex along a coordinate
            let r = farthest(&verts, &others, &zb);
            let mut z = zb.clone();
            let i = free[r % nf];
            z[i] = if z[i] + rho <= 1.0 { z[i] + rho } else { z[i] - rho };
            replace(prob, &mut verts, &mut basis, free, others[r], z);
            continue;
        };
        let grads: Vec<Vec<f64>> = others.iter().map(|&k| lag.gradient(k)).collect();

        // geometry diagnostics: distance of each vertex from the best one, and
        // its height over the face spanned by the others
        let mut worst: Option<(usize, f64)> = None;
        for (r, &k) in others.iter().enumerate() {
            let dist = dist_inf(&verts[k].z, &zb, free);
            let col_norm = dot(&grads[r], &grads[r]).sqrt();
            let sigma = if col_norm > 0.0 { 1.0 / col_norm } else { 0.0 };
            let badness = if dist > 2.1 * rho {
                dist / rho
            } else if sigma < 0.25 * rho {
                1.0 + (0.25 * rho - sigma) / rho
            } else {
                0.0
            };
            if badness > 0.0 && worst.is_none_or(|(_, w)| badness > w) {
                worst = Some((r, badness));
            }
        }

        if shrink_pending {
            shrink_pending = false;
            if let Some((r, _)) = worst {
                let z = geometry_point(&zb, free, &grads[r], rho);
                replace(prob, &mut verts, &mut basis, free, others[r], z);
                continue;
            }
            if rho <= rho_end {
                break;
            }
            rho = if rho * 0.5 <= 1.5 * rho_end { rho_end } else { rho * 0.5 };
            continue;
        }

        // linear models
        let model = |values: &dyn Fn(usize) -> f64| -> Vec<f64> {
            let mut out = vec![0.0; nf];
            for (r, &k) in others.iter().enumerate() {
                let dv = values(k) - values(b);
                for (o, w) in out.iter_mut().zip(&grads[r]) {
                    *o += w * dv;
                }
            }
            out
        };
        let g = model(&|k| verts[k].f);
        let a: Vec<Vec<f64>> = (0..m).map(|j| model(&|k| verts[k].c[j])).collect();
        if g.iter().any(|v| !v.is_finite()) || a.iter().flatten().any(|v| !v.is_finite()) {
            // infinite values on the simplex; contract toward the best point
            shrink_pending = true;
            if worst.is_none() && rho <= rho_end {
                break;
            }
            if worst.is_none() {
                rho = (rho * 0.5).max(rho_end);
                let r = farthest(&verts, &others, &zb);
                let mut z = zb.clone();
                for &i in free {
                    z[i] = zb[i] + 0.5 * (verts[others[r]].z[i] - zb[i]);
                }
                replace(prob, &mut verts, &mut basis, free, others[r], z);
                shrink_pending = false;
            }
            continue;
        }

        let lo: Vec<f64> = free.iter().map(|&i| (-rho).max(-zb[i])).collect();
        let hi: Vec<f64> = free.iter().map(|&i| rho.min(1.0 - zb[i])).collect();
        let cb = &verts[b].c;
        let s = trust_region_step(&g, &a, cb, &lo, &hi);
        let snorm = s.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if snorm < 0.5 * rho {
            shrink_pending = true;
            continue;
        }

        // penalty parameter keeps the predicted merit reduction positive
        let pred_f = -dot(&g, &s);
        let vb = verts[b].v;
        let v_new = (0..m).fold(0.0f64, |acc, j| acc.max(cb[j] + dot(&a[j], &s)));
        let pred_v = vb - v_new;
        if pred_v > 0.0 && pred_f + mu * pred_v <= 0.0 {
            mu = 1.5 * (-pred_f) / pred_v;
            if best_vertex(&verts, mu) != b {
                continue;
            }
        }
        let predicted = pred_f + mu * pred_v;

        let mut zt = zb.clone();
        for (col, &i) in free.iter().enumerate() {
            zt[i] = (zb[i] + s[col]).clamp(0.0, 1.0);
        }
        let (ft, ct) = prob.eval(&zt);
        let trial = Vertex {
            v: violation(&ct),
            z: zt,
            f: ft,
            c: ct,
        };
        let actual = verts[b].merit(mu) - trial.merit(mu);
        let ratio = if predicted > 0.0 { actual / predicted } else { -1.0 };

        // vertex to drop: large coefficient of s in the edge basis, weighted by
        // distance so that far-away vertices leave first
        let mut jdrop = 0;
        let mut best_score = -1.0;
        for (r, &k) in others.iter().enumerate() {
            let dist = dist_inf(&verts[k].z, &trial.z, free);
            let score = dot(&grads[r], &s).abs() * (dist / rho).max(1.0);
            if score > best_score {
                best_score = score;
                jdrop = r;
            }
        }
        swap(&mut verts, &mut basis, free, others[jdrop], trial);
        if ratio < 0.1 {
            shrink_pending = true;
        } else if ratio > 0.7 && snorm > 0.9 * rho {
            rho = (2.0 * rho).min(rho_max);
        }
    }
}

/// Inverse of the interpolation matrix with rows `[1, (z_k − center) / h]`.
/// Column `k` holds the coefficients of the linear Lagrange function of
/// vertex `k`. Vertex swaps are rank-one updates.
struct Lagrange {
    inv: DMatrix<f64>,
    center: Vec<f64>,
    h: f64,
    updates: usize,
}

impl Lagrange {
    fn row(&self, z: &[f64], free: &[usize]) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(free.iter().zip(&self.center).map(|(&i, c)| (z[i] - c) / self.h))
            .collect()
    }

    fn build(verts: &[Vertex], free: &[usize], zb: &[f64], h: f64) -> Option<Self> {
        let n = free.len() + 1;
        let mut lag = Self {
            inv: DMatrix::zeros(0, 0),
            center: free.iter().map(|&i| zb[i]).collect(),
            h,
            updates: 0,
        };
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (k, v) in verts.iter().enumerate() {
            for (col, x) in lag.row(&v.z, free).into_iter().enumerate() {
                m[(k, col)] = x;
            }
        }
        lag.inv = m.try_inverse().filter(|m| m.iter().all(|v| v.is_finite()))?;
        Some(lag)
    }

    /// Gradient of vertex `k`'s Lagrange function in unit-box coordinates.
    fn gradient(&self, k: usize) -> Vec<f64> {
        self.inv.column(k).iter().skip(1).map(|w| w / self.h).collect()
    }

    /// Replaces vertex `k` by `z`. Returns `false` when `z` nearly lies on
    /// the face opposite `k`.
    fn update(&mut self, k: usize, z: &[f64], free: &[usize]) -> bool {
        let u = self.row(z, free);
        let n = u.len();
        let values: Vec<f64> = (0..n).map(|j| u.iter().zip(self.inv.column(j).iter()).map(|(a, b)| a * b).sum()).collect();
        let pivot = values[k];
        if !pivot.is_finite() || pivot.abs() < 1e-10 {
            return false;
        }
        for r in 0..n {
            self.inv[(r, k)] /= pivot;
        }
        for j in (0..n).filter(|&j| j != k) {
            if values[j] != 0.0 {
                for r in 0..n {
                    let w = self.inv[(r, k)];
                    self.inv[(r, j)] -= values[j] * w;
                }
            }
        }
        self.updates += 1;
        true
    }
}

fn swap(verts: &mut [Vertex], basis: &mut Option<Lagrange>, free: &[usize], k: usize, vertex: Vertex) {
    if basis.as_mut().is_some_and(|l| !l.update(k, &vertex.z, free)) {
        *basis = None;
    }
    verts[k] = vertex;
}

fn best_vertex(verts: &[Vertex], mu: f64) -> usize {
    let mut b = 0;
    for k in 1..verts.len() {
        let (mk, mb) = (verts[k].merit(mu), verts[b].merit(mu));
        if mk < mb || (mk == mb && verts[k].v < verts[b].v) {
            b = k;
        }
    }
    b
}

fn farthest(verts: &[Vertex], others: &[usize], zb: &[f64]) -> usize {
    let mut r_best = 0;
    let mut d_best = -1.0;
    for (r, &k) in others.iter().enumerate() {
        let d: f64 = verts[k].z.iter().zip(zb).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if d > d_best {
            d_best = d;
            r_best = r;
        }
    }
    r_best
}

fn replace<F: FnMut(&[f64], &mut [f64]) -> f64>(
    prob: &mut Problem<'_, F>,
    verts: &mut [Vertex],
    basis: &mut Option<Lagrange>,
    free: &[usize],
    k: usize,
    z: Vec<f64>,
) {
    let (f, c) = prob.eval(&z);
    swap(verts, basis, free, k, Vertex { v: violation(&c), z, f, c });
}

/// New vertex at distance `ρ` from the best point along `dir`, which is
/// orthogonal to all remaining edges. The sign is chosen to stay in the box.
fn geometry_point(zb: &[f64], free: &[usize], dir: &[f64], rho: f64) -> Vec<f64> {
    let norm = dir.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut z = zb.to_vec();
    if norm == 0.0 || !norm.is_finite() {
        return z;
    }
    let fits = |sign: f64| {
        free.iter()
            .enumerate()
            .all(|(col, &i)| (0.0..=1.0).contains(&(zb[i] + sign * rho * dir[col] / norm)))
    };
    let sign = if fits(1.0) || !fits(-1.0) { 1.0 } else { -1.0 };
    for (col, &i) in free.iter().enumerate() {
        z[i] = (zb[i] + sign * rho * dir[col] / norm).clamp(0.0, 1.0);
    }
    z
}

fn dist_inf(a: &[f64], b: &[f64], free: &[usize]) -> f64 {
    free.iter().fold(0.0, |acc, &i| acc.max((a[i] - b[i]).abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trust-region subproblem: among steps `lo ≤ s ≤ hi`, first minimize the
/// largest linearized violation `max(0, max_j c_j + a_jᵀs)`, then minimize
/// `gᵀs` without letting that violation grow.
pub(crate) fn trust_region_step(g: &[f64], a: &[Vec<f64>], c: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = g.len();
    let m = a.len();
    // columns: p (n), q (n), t, slacks (m); s = p − q
    let ncol = 2 * n + 1 + m;
    let t_col = 2 * n;
    let mut lp = BoundedSimplex::new(m, ncol);
    for i in 0..n {
        lp.upper[i] = hi[i].max(0.0);
        lp.upper[n + i] = (-lo[i]).max(0.0);
    }
    lp.upper[t_col] = f64::INFINITY;
    for j in 0..m {
        lp.upper[t_col + 1 + j] = f64::INFINITY;
        for i in 0..n {
            lp.set(j, i, a[j][i]);
            lp.set(j, n + i, -a[j][i]);
        }
        lp.set(j, t_col, -1.0);
        lp.set(j, t_col + 1 + j, 1.0);
        lp.basis[j] = t_col + 1 + j;
        lp.beta[j] = -c[j];
    }
    // start with t basic in the most violated row, which makes every slack
    // nonnegative
    if let Some((r, _)) = (0..m)
        .map(|j| (j, lp.beta[j]))
        .filter(|&(_, b)| b < 0.0)
        .min_by(|x, y| x.1.total_cmp(&y.1))
    {
        let theta = -lp.beta[r];
        for j in 0..m {
            lp.beta[j] += theta;
        }
        lp.pivot(r, t_col, theta);
    }
    let mut cost = vec![0.0; ncol];
    cost[t_col] = 1.0;
    lp.optimize(&cost);
    let t_star = lp.value(t_col).max(0.0);
    lp.upper[t_col] = t_star * (1.0 + 1e-12) + 1e-14;
    let mut cost = vec![0.0; ncol];
    for i in 0..n {
        cost[i] = g[i];
        cost[n + i] = -g[i];
    }
    lp.optimize(&cost);
    (0..n).map(|i| (lp.value(i) - lp.value(n + i)).clamp(lo[i], hi[i])).collect()
}

/// Dense bounded-variable primal simplex on `T x = β` with `0 ≤ x ≤ upper`,
/// using Bland's rule. The caller sets up a feasible basis.
struct BoundedSimplex {
    m: usize,
    ncol: usize,
    tab: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
}

const LP_EPS: f64 = 1e-12;

impl BoundedSimplex {
    fn new(m: usize, ncol: usize) -> Self {
        Self {
            m,
            ncol,
            tab: vec![0.0; m * ncol],
            beta: vec![0.0; m],
            basis: vec![usize::MAX; m],
            at_upper: vec![false; ncol],
            upper: vec![0.0; ncol],
        }
    }

    fn set(&mut self, r: usize, c: usize, v: f64) {
        self.tab[r * self.ncol + c] = v;
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        self.tab[r * self.ncol + c]
    }

    fn basic_row(&self, col: usize) -> Option<usize> {
        self.basis.iter().position(|&b| b == col)
    }

    fn value(&self, col: usize) -> f64 {
        match self.basic_row(col) {
            Some(r) => self.beta[r],
            None if self.at_upper[col] => self.upper[col],
            None => 0.0,
        }
    }

    /// Makes `col` basic in row `r`; `beta` must already hold the post-step
    /// values except row `r`, which receives `new_value`.
    fn pivot(&mut self, r: usize, col: usize, new_value: f64) {
        let ncol = self.ncol;
        let p = self.get(r, col);
        for c in 0..ncol {
            self.tab[r * ncol + c] /= p;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.get(i, col);
            if f != 0.0 {
                for c in 0..ncol {
                    self.tab[i * ncol + c] -= f * self.tab[r * ncol + c];
                }
            }
        }
        let leaving = self.basis[r];
        if leaving != usize::MAX {
            self.at_upper[leaving] = false;
        }
        self.basis[r] = col;
        self.at_upper[col] = false;
        self.beta[r] = new_value;
    }

    fn optimize(&mut self, cost: &[f64]) {
        let max_iter = 50 * (self.ncol + self.m + 1);
        for _ in 0..max_iter {
            let mut is_basic = vec![false; self.ncol];
            for &b in &self.basis {
                is_basic[b] = true;
            }
            // Bland: lowest eligible index enters
            let mut entering = None;
            for k in 0..self.ncol {
                if is_basic[k] {
                    continue;
                }
                let mut d = cost[k];
                for i in 0..self.m {
                    d -= cost[self.basis[i]] * self.get(i, k);
                }
                let room = self.upper[k] > LP_EPS;
                if !self.at_upper[k] && d < -1e-13 && room {
                    entering = Some((k, 1.0));
                    break;
                }
                if self.at_upper[k] && d > 1e-13 {
                    entering = Some((k, -1.0));
                    break;
                }
            }
            let Some((e, dir)) = entering else { return };

            let mut theta = self.upper[e];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.m {
                let rate = self.get(i, e) * dir;
                let bi = self.basis[i];
                let limit = if rate > LP_EPS {
                    (self.beta[i].max(0.0)) / rate
                } else if rate < -LP_EPS && self.upper[bi].is_finite() {
                    (self.upper[bi] - self.beta[i]).max(0.0) / -rate
                } else {
                    continue;
                };
                let to_upper = rate < 0.0;
                let replace = match leave {
                    None => limit < theta,
                    Some((r, _)) => limit < theta || (limit == theta && bi < self.basis[r]),
                };
                if replace {
                    theta = limit;
                    leave = Some((i, to_upper));
                }
            }
            if !theta.is_finite() {
                return;
            }
            let old = if self.at_upper[e] { self.upper[e] } else { 0.0 };
            for i in 0..self.m {
                let rate = self.get(i, e) * dir;
                self.beta[i] -= rate * theta;
            }
            match leave {
                None => {
                    self.at_upper[e] = !self.at_upper[e];
                }
                Some((r, to_upper)) => {
                    let leaving = self.basis[r];
                    self.pivot(r, e, old + dir * theta);
                    self.at_upper[leaving] = to_upper;
                }
            }
            for i in 0..self.m {
                let b = self.basis[i];
                self.beta[i] = self.beta[i].clamp(0.0, self.upper[b]);
            }
        }
    }
}
