//! The inner problem of each enrichment step: maximize the regularized
//! acquisition over the relaxed box subject to `ĝ_j(x) ≤ tol_c` on the
//! constraint surrogate means, by multistart local search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::acquisition::{Acquisition, Standardizer};
use crate::design_space::{lhs_sample, lhs_unit, DesignSpace, MixedPoint, RelaxedVector};
use crate::local::{minimize, LocalOptions};
use crate::surrogate::MultiOutputSurrogate;

/// Something to maximize over a box, with constraints `c_j(x) ≤ 0`.
pub trait InfillObjective {
    fn n_constraints(&self) -> usize;
    /// Returns the value to maximize and writes the constraint values to `g`.
    fn evaluate(&self, x: &[f64], g: &mut [f64]) -> f64;
}

/// Regularized acquisition on top of fitted surrogates, in standardized
/// objective units.
pub struct SurrogateInfill<'a> {
    pub surrogate: &'a MultiOutputSurrogate,
    pub acquisition: &'a Acquisition,
    pub standardizer: &'a Standardizer,
}

impl InfillObjective for SurrogateInfill<'_> {
    fn n_constraints(&self) -> usize {
        self.surrogate.constraints.len()
    }

    fn evaluate(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let p = self.surrogate.predict(x);
        g.copy_from_slice(&p.g_mean);
        let means = self.standardizer.apply(&p.f_mean);
        let sigmas: Vec<f64> = p.f_var.iter().map(|v| v.max(0.0).sqrt()).collect();
        let sigmas = self.standardizer.apply_sigma(&sigmas);
        self.acquisition.regularized(&means, &sigmas)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfillOptions {
    pub n_starts: usize,
    /// How many of the starts are perturbed archive points.
    pub n_archive_starts: usize,
    pub tol_c: f64,
    /// Perturbation of archive starts, as a fraction of each range.
    pub perturbation: f64,
    pub local: LocalOptions,
}

impl Default for InfillOptions {
    fn default() -> Self {
        Self {
            n_starts: 20,
            n_archive_starts: 5,
            tol_c: 1e-6,
            perturbation: 0.05,
            local: LocalOptions {
                rho_begin: 0.25,
                rho_end: 1e-4,
                max_evals: 300,
                feasibility_tol: 1e-6,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfillResult {
    pub x: RelaxedVector,
    pub value: f64,
    /// Whether every constraint mean is within `tol_c`.
    pub feasible: bool,
    /// `Σ_j max(ĝ_j, 0)` at `x`.
    pub violation: f64,
    /// Index of the start that produced `x`.
    pub start: usize,
    /// Converged value of each start, in start order.
    pub start_values: Vec<f64>,
    /// Converged iterate of each start, in start order.
    pub start_points: Vec<RelaxedVector>,
}

fn total_violation(g: &[f64]) -> f64 {
    g.iter().map(|v| if v.is_nan() { f64::INFINITY } else { v.max(0.0) }).sum()
}

/// Starting points: perturbed `archive` rows first (at most
/// `n_archive_starts`, evenly spread over the list), then LHS points of the
/// box up to `n_starts`.
pub fn start_points(lower: &[f64], upper: &[f64], archive: &[Vec<f64>], options: &InfillOptions, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = lower.len();
    let k = options.n_archive_starts.min(archive.len()).min(options.n_starts);
    let mut starts = Vec::with_capacity(options.n_starts.max(1));
    for i in 0..k {
        let src = &archive[i * archive.len() / k];
        starts.push(
            (0..d)
                .map(|j| {
                    let e: f64 = rng.sample(StandardNormal);
                    (src[j] + options.perturbation * (upper[j] - lower[j]) * e).clamp(lower[j], upper[j])
                })
                .collect(),
        );
    }
    let n_lhs = options.n_starts.max(1) - starts.len();
    for u in lhs_unit(n_lhs, d, &mut rng) {
        starts.push((0..d).map(|j| lower[j] + u[j] * (upper[j] - lower[j])).collect());
    }
    starts
}

/// Multistart maximization. Returns the best result satisfying all
/// constraints within `tol_c`, or, when none does, the one with the smallest
/// total violation (`feasible = false`). Ties go to the lowest start index.
pub fn solve<O: InfillObjective>(
    objective: &O,
    lower: &[f64],
    upper: &[f64],
    archive: &[Vec<f64>],
    options: &InfillOptions,
    seed: u64,
) -> InfillResult {
    let m = objective.n_constraints();
    let starts = start_points(lower, upper, archive, options, seed);
    let mut best: Option<InfillResult> = None;
    let mut start_values = Vec::with_capacity(starts.len());
    let mut start_points = Vec::with_capacity(starts.len());
    for (i, x0) in starts.iter().enumerate() {
        let r = minimize(
            |x, g| {
                let v = objective.evaluate(x, g);
                if v.is_finite() {
                    -v
                } else {
                    f64::INFINITY
                }
            },
            x0,
            lower,
            upper,
            m,
            &options.local,
        );
        let value = -r.f;
        let violation = total_violation(&r.constraints);
        let feasible = r.constraints.iter().all(|&c| c <= options.tol_c);
        start_values.push(value);
        start_points.push(RelaxedVector(r.x.clone()));
        let better = match &best {
            None => true,
            Some(b) => match (feasible, b.feasible) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => value > b.value,
                (false, false) => violation < b.violation,
            },
        };
        if better {
            best = Some(InfillResult {
                x: RelaxedVector(r.x),
                value,
                feasible,
                violation,
                start: i,
                start_values: vec![],
                start_points: vec![],
            });
        }
    }
    let mut best = best.expect("at least one start");
    best.start_values = start_values;
    best.start_points = start_points;
    best
}

/// Decoded candidate chosen by [`best_decoded`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedCandidate {
    /// Encoding of the decoded point.
    pub x: RelaxedVector,
    pub point: MixedPoint,
    pub value: f64,
    pub feasible: bool,
    pub start: usize,
}

/// Decodes the converged iterate of every start and re-scores the decoded
/// points with `objective`, then hill-climbs from the best of them over
/// one-variable moves (another categorical level, an integer step of ±1).
/// Returns the best scored point that is not already in `evaluated`
/// (feasible before infeasible, then by value, ties to the first found), or
/// `None` when every scored point collides.
pub fn best_decoded<O: InfillObjective>(
    space: &DesignSpace,
    objective: &O,
    result: &InfillResult,
    evaluated: &[MixedPoint],
    tol_c: f64,
) -> Option<DecodedCandidate> {
    let (lo, hi) = space.relaxed_bounds();
    let scale: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a).max(1.0)).collect();
    let known: Vec<Vec<f64>> = evaluated.iter().map(|p| space.encode(p).expect("valid point").0).collect();
    let mut g = vec![0.0; objective.n_constraints()];
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let better = |a: &DecodedCandidate, b: &DecodedCandidate| (a.feasible && !b.feasible) || (a.feasible == b.feasible && a.value > b.value);

    // scores a decoded point once; returns it with a collision flag
    let mut score = |point: MixedPoint, start: usize, seen: &mut Vec<Vec<f64>>| -> Option<(DecodedCandidate, bool)> {
        let enc = space.encode(&point).expect("decoded point is valid").0;
        if seen.iter().any(|k| collides(k, &enc, &scale)) {
            return None;
        }
        seen.push(enc.clone());
        let value = objective.evaluate(&enc, &mut g);
        let value = if value.is_nan() { f64::NEG_INFINITY } else { value };
        let feasible = g.iter().all(|&c| c <= tol_c);
        let hit = known.iter().any(|k| collides(k, &enc, &scale));
        Some((
            DecodedCandidate {
                x: RelaxedVector(enc),
                point,
                value,
                feasible,
                start,
            },
            hit,
        ))
    };

    let mut best_free: Option<DecodedCandidate> = None;
    let mut current: Option<DecodedCandidate> = None;
    let consider = |c: DecodedCandidate, hit: bool, best_free: &mut Option<DecodedCandidate>, current: &mut Option<DecodedCandidate>| {
        if !hit && best_free.as_ref().is_none_or(|b| better(&c, b)) {
            *best_free = Some(c.clone());
        }
        if current.as_ref().is_none_or(|b| better(&c, b)) {
            *current = Some(c);
        }
    };
    for (i, x) in result.start_points.iter().enumerate() {
        let point = space.decode(&x.0).expect("relaxed dimension");
        if let Some((c, hit)) = score(point, i, &mut seen) {
            consider(c, hit, &mut best_free, &mut current);
        }
    }
    let Some(mut here) = current else {
        return best_free;
    };
    for _ in 0..4 * space.len() {
        let mut step: Option<DecodedCandidate> = None;
        for q in neighbours(space, &here.point) {
            if let Some((c, hit)) = score(q, here.start, &mut seen) {
                if !hit && best_free.as_ref().is_none_or(|b| better(&c, b)) {
                    best_free = Some(c.clone());
                }
                if step.as_ref().is_none_or(|b| better(&c, b)) {
                    step = Some(c);
                }
            }
        }
        match step {
            Some(c) if better(&c, &here) => here = c,
            _ => break,
        }
    }
    best_free
}

/// Points differing from `p` in one categorical level or by one integer
/// step, re-imputed for activity.
fn neighbours(space: &DesignSpace, p: &MixedPoint) -> Vec<MixedPoint> {
    use crate::design_space::{Value, VariableKind};
    let mut out = Vec::new();
    for (i, var) in space.variables().iter().enumerate() {
        if !p.active[i] {
            continue;
        }
        let alternatives: Vec<Value> = match (&var.kind, p.values[i]) {
            (VariableKind::Categorical { levels }, Value::Level(k)) => {
                (0..levels.len()).filter(|&l| l != k).map(Value::Level).collect()
            }
            (VariableKind::Integer { lower, upper }, Value::Int(v)) => [v - 1, v + 1]
                .into_iter()
                .filter(|w| (*lower..=*upper).contains(w))
                .map(Value::Int)
                .collect(),
            _ => continue,
        };
        for v in alternatives {
            let mut values = p.values.clone();
            values[i] = v;
            let active = space.activity(&values);
            out.push(space.impute(&MixedPoint { values, active }));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub x: RelaxedVector,
    pub point: MixedPoint,
    /// The candidate collided and was replaced.
    pub replaced: bool,
    /// The candidate collided and no non-colliding replacement was found.
    pub exhausted: bool,
}

/// Number of LHS draws searched for a replacement.
pub const DEDUP_DRAWS: usize = 100;

fn collides(a: &[f64], b: &[f64], scale: &[f64]) -> bool {
    a.iter().zip(b).zip(scale).all(|((x, y), s)| (x - y).abs() <= 1e-10 * s)
}

/// Guards against re-evaluating a known point. If `decode(candidate)`
/// coincides with an `evaluated` point, returns the LHS draw (of
/// [`DEDUP_DRAWS`]) farthest, by minimum relaxed distance, from every
/// evaluated point, preferring draws for which `feasible` holds. When every
/// draw collides the candidate is returned with `exhausted` set.
pub fn dedup_guard(
    space: &DesignSpace,
    candidate: &[f64],
    evaluated: &[MixedPoint],
    feasible: impl Fn(&[f64]) -> bool,
    seed: u64,
) -> DedupOutcome {
    let point = space.decode(candidate).expect("candidate has the relaxed dimension");
    let enc = |p: &MixedPoint| space.encode(p).expect("valid point").0;
    let (lo, hi) = space.relaxed_bounds();
    let scale: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a).max(1.0)).collect();
    let x = enc(&point);
    let known: Vec<Vec<f64>> = evaluated.iter().map(enc).collect();
    if !known.iter().any(|k| collides(k, &x, &scale)) {
        return DedupOutcome {
            x: RelaxedVector(x),
            point,
            replaced: false,
            exhausted: false,
        };
    }
    let mut best: Option<(bool, f64, Vec<f64>, MixedPoint)> = None;
    for p in lhs_sample(space, DEDUP_DRAWS, seed) {
        let v = enc(&p);
        if known.iter().any(|k| collides(k, &v, &scale)) {
            continue;
        }
        let dist = known
            .iter()
            .map(|k| k.iter().zip(&v).zip(&scale).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let ok = feasible(&v);
        let better = best.as_ref().is_none_or(|(bf, bd, _, _)| (ok && !bf) || (ok == *bf && dist > *bd));
        if better {
            best = Some((ok, dist, v, p));
        }
    }
    match best {
        Some((_, _, v, p)) => DedupOutcome {
            x: RelaxedVector(v),
            point: p,
            replaced: true,
            exhausted: false,
        },
        None => DedupOutcome {
            x: RelaxedVector(x),
            point,
            replaced: false,
            exhausted: true,
        },
    }
}
