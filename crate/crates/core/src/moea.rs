//! NSGA-II over a mixed design space. Individuals carry a relaxed genotype;
//! SBX and polynomial mutation act on it and every evaluation sees the decoded
//! point. Constraints use the constrained-domination rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design_space::{lhs_sample, DesignSpace, MixedPoint};
use crate::pareto::{ArchiveEntry, ParetoArchive};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nsga2Config {
    pub pop_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub crossover_eta: f64,
    /// Per-gene mutation probability; `None` means `1/d'`.
    #[serde(default)]
    pub mutation_prob: Option<f64>,
    pub mutation_eta: f64,
    pub seed: u64,
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Self {
            pop_size: 100,
            generations: 200,
            crossover_prob: 0.9,
            crossover_eta: 15.0,
            mutation_prob: None,
            mutation_eta: 20.0,
            seed: 0,
        }
    }
}

impl Nsga2Config {
    pub fn validate(&self) -> Result<(), String> {
        if self.pop_size < 4 || self.pop_size % 2 != 0 {
            return Err(format!("population size must be even and at least 4, got {}", self.pop_size));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err("crossover probability must lie in [0, 1]".into());
        }
        if let Some(p) = self.mutation_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err("mutation probability must lie in [0, 1]".into());
            }
        }
        if !(self.crossover_eta >= 0.0 && self.mutation_eta >= 0.0) {
            return Err("distribution indices must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    /// Relaxed genotype.
    pub x: Vec<f64>,
    pub point: MixedPoint,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `Σ_j max(g_j, 0)`, infinite when an output is not finite.
    pub violation: f64,
}

fn violation_of(f: &[f64], g: &[f64]) -> f64 {
    if f.iter().chain(g).any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    g.iter().map(|v| v.max(0.0)).sum()
}

/// `i` beats `j` in objective space: no worse everywhere and better somewhere;
/// of two identical vectors the lower index wins.
fn beats(fi: &[f64], fj: &[f64], i: usize, j: usize) -> bool {
    let mut strictly = false;
    for (a, b) in fi.iter().zip(fj) {
        if a > b {
            return false;
        }
        if a < b {
            strictly = true;
        }
    }
    strictly || i < j
}

/// Partition into ranked fronts of indices. Front 0 coincides with
/// [`crate::pareto::nondominated_filter`].
pub fn fast_nondominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let v = vec![0.0; points.len()];
    sort_constrained(points, &v)
}

fn constrained_beats(f: &[Vec<f64>], v: &[f64], i: usize, j: usize) -> bool {
    let (fi, fj) = (v[i] == 0.0, v[j] == 0.0);
    match (fi, fj) {
        (true, false) => true,
        (false, true) => false,
        (false, false) if v[i] != v[j] => v[i] < v[j],
        _ => beats(&f[i], &f[j], i, j),
    }
}

fn sort_constrained(f: &[Vec<f64>], v: &[f64]) -> Vec<Vec<usize>> {
    let n = f.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if constrained_beats(f, v, i, j) {
                dominates[i].push(j);
                dominated_by[j] += 1;
            } else if constrained_beats(f, v, j, i) {
                dominates[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front`. Boundary points of every
/// objective get `+∞`, interior points the sum over objectives of the gap
/// between their neighbours divided by the objective's range. Repeated
/// vectors after the first get 0.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    let mut out = vec![0.0; n];
    let unique: Vec<usize> = (0..n).filter(|&i| !front[..i].contains(&front[i])).collect();
    if unique.len() <= 2 {
        for &i in &unique {
            out[i] = f64::INFINITY;
        }
        return out;
    }
    let k = front[0].len();
    let mut order = unique.clone();
    for m in 0..k {
        order.sort_by(|&a, &b| front[a][m].total_cmp(&front[b][m]).then(a.cmp(&b)));
        let lo = front[order[0]][m];
        let hi = front[order[order.len() - 1]][m];
        out[order[0]] = f64::INFINITY;
        out[order[order.len() - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            if out[w[1]].is_finite() {
                out[w[1]] += (front[w[2]][m] - front[w[0]][m]) / range;
            }
        }
    }
    out
}

fn sbx(a: &[f64], b: &[f64], lower: &[f64], upper: &[f64], eta: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for j in 0..a.len() {
        if rng.random::<f64>() > 0.5 || (a[j] - b[j]).abs() <= 1e-14 || upper[j] <= lower[j] {
            continue;
        }
        let (y1, y2) = if a[j] < b[j] { (a[j], b[j]) } else { (b[j], a[j]) };
        let (yl, yu) = (lower[j], upper[j]);
        let u: f64 = rng.random();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let bq1 = spread(1.0 + 2.0 * (y1 - yl) / (y2 - y1));
        let bq2 = spread(1.0 + 2.0 * (yu - y2) / (y2 - y1));
        let mut v1 = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(yl, yu);
        let mut v2 = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(yl, yu);
        if rng.random::<f64>() <= 0.5 {
            std::mem::swap(&mut v1, &mut v2);
        }
        c1[j] = v1;
        c2[j] = v2;
    }
    (c1, c2)
}

fn polynomial_mutation(x: &mut [f64], lower: &[f64], upper: &[f64], prob: f64, eta: f64, rng: &mut ChaCha8Rng) {
    for j in 0..x.len() {
        if rng.random::<f64>() >= prob || upper[j] <= lower[j] {
            continue;
        }
        let (yl, yu) = (lower[j], upper[j]);
        let y = x[j];
        let d1 = (y - yl) / (yu - yl);
        let d2 = (yu - y) / (yu - yl);
        let u: f64 = rng.random();
        let p = 1.0 / (eta + 1.0);
        let dq = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            v.powf(p) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(p)
        };
        x[j] = (y + dq * (yu - yl)).clamp(yl, yu);
    }
}

/// Rank and crowding of every member, ranks from the constrained sort.
fn rank_and_crowd(pop: &[Individual]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<f64>) {
    let f: Vec<Vec<f64>> = pop.iter().map(|p| p.f.clone()).collect();
    let v: Vec<f64> = pop.iter().map(|p| p.violation).collect();
    let fronts = sort_constrained(&f, &v);
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, front) in fronts.iter().enumerate() {
        let vals: Vec<Vec<f64>> = front.iter().map(|&i| f[i].clone()).collect();
        for (&i, c) in front.iter().zip(crowding_distance(&vals)) {
            rank[i] = r;
            crowd[i] = c;
        }
    }
    (fronts, rank, crowd)
}

/// Result of [`evolve`]: the final population and its nondominated feasible
/// subset as an archive.
#[derive(Debug, Clone)]
pub struct Nsga2Result {
    pub population: Vec<Individual>,
    pub archive: ParetoArchive,
    pub evaluations: usize,
}

/// Runs NSGA-II. `evaluate` receives each decoded point together with its
/// encoding and returns `(f, g)`.
pub fn evolve<E>(space: &DesignSpace, config: &Nsga2Config, evaluate: E) -> Nsga2Result
where
    E: FnMut(&MixedPoint, &[f64]) -> (Vec<f64>, Vec<f64>),
{
    evolve_observed(space, config, evaluate, |_, _| {})
}

/// [`evolve`] with a callback invoked after the initial population (generation
/// 0) and after every survival step with the current population.
pub fn evolve_observed<E, O>(space: &DesignSpace, config: &Nsga2Config, mut evaluate: E, mut observe: O) -> Nsga2Result
where
    E: FnMut(&MixedPoint, &[f64]) -> (Vec<f64>, Vec<f64>),
    O: FnMut(usize, &[Individual]),
{
    let n = config.pop_size.max(4) + config.pop_size % 2;
    let (lower, upper) = space.relaxed_bounds();
    let d = lower.len();
    let pm = config.mutation_prob.unwrap_or(1.0 / d as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evaluations = 0usize;

    let mut make = |x: Vec<f64>| -> Individual {
        let point = space.decode(&x).expect("relaxed dimension");
        let enc = space.encode(&point).expect("decoded point is valid").0;
        let (f, g) = evaluate(&point, &enc);
        evaluations += 1;
        let violation = violation_of(&f, &g);
        Individual { x, point, f, g, violation }
    };

    let init = lhs_sample(space, n, config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut pop: Vec<Individual> = init.iter().map(|p| make(space.encode(p).expect("valid").0)).collect();
    observe(0, &pop);

    for gen in 1..=config.generations {
        let (_, rank, crowd) = rank_and_crowd(&pop);
        let tournament = |rng: &mut ChaCha8Rng| {
            let a = rng.random_range(0..pop.len());
            let b = rng.random_range(0..pop.len());
            if rank[a] < rank[b] || (rank[a] == rank[b] && crowd[a] > crowd[b]) || (rank[a] == rank[b] && crowd[a] == crowd[b] && a <= b) {
                a
            } else {
                b
            }
        };
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let p1 = tournament(&mut rng);
            let p2 = tournament(&mut rng);
            let (mut c1, mut c2) = if rng.random::<f64>() < config.crossover_prob {
                sbx(&pop[p1].x, &pop[p2].x, &lower, &upper, config.crossover_eta, &mut rng)
            } else {
                (pop[p1].x.clone(), pop[p2].x.clone())
            };
            polynomial_mutation(&mut c1, &lower, &upper, pm, config.mutation_eta, &mut rng);
            polynomial_mutation(&mut c2, &lower, &upper, pm, config.mutation_eta, &mut rng);
            offspring.push(c1);
            offspring.push(c2);
        }
        for x in offspring {
            pop.push(make(x));
        }

        let (fronts, _, crowd) = rank_and_crowd(&pop);
        let mut keep = Vec::with_capacity(n);
        for front in fronts {
            if keep.len() + front.len() <= n {
                keep.extend(front);
            } else {
                let mut last = front;
                last.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(a.cmp(&b)));
                keep.extend(last.into_iter().take(n - keep.len()));
            }
            if keep.len() == n {
                break;
            }
        }
        keep.sort_unstable();
        let mut slots: Vec<Option<Individual>> = pop.into_iter().map(Some).collect();
        pop = keep.iter().map(|&i| slots[i].take().expect("kept once")).collect();
        observe(gen, &pop);
    }

    let entries: Vec<ArchiveEntry> = pop
        .iter()
        .filter(|ind| ind.violation == 0.0)
        .enumerate()
        .map(|(id, ind)| ArchiveEntry {
            id,
            point: ind.point.clone(),
            f: ind.f.clone(),
            g: ind.g.clone(),
            feasible: true,
        })
        .collect();
    let full = ParetoArchive::new(entries);
    let front: Vec<ArchiveEntry> = full
        .nondominated()
        .iter()
        .enumerate()
        .map(|(id, &i)| ArchiveEntry {
            id,
            ..full.entries()[i].clone()
        })
        .collect();
    Nsga2Result {
        population: pop,
        archive: ParetoArchive::new(front),
        evaluations,
    }
}
