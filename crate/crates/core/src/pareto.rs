//! Dominance, Pareto archives and hypervolume.
//!
//! All objectives are minimized. Dominance is the weak relation
//! `a ⪯ b ⟺ a_i ≤ b_i ∀i`, so every vector dominates itself.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design_space::MixedPoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("objective vectors have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("objective vectors are empty")]
    NoObjectives,
}

/// Monte-Carlo sample count for hypervolume with four or more objectives.
pub const HV_MC_SAMPLES: usize = 200_000;
/// Seed of the Monte-Carlo hypervolume estimator.
pub const HV_MC_SEED: u64 = 0x5eed_4a11;

/// `a ⪯ b`: `a` is no worse than `b` in every objective.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, ParetoError> {
    if a.len() != b.len() {
        return Err(ParetoError::LengthMismatch(a.len(), b.len()));
    }
    Ok(weakly_dominates(a, b))
}

#[inline]
pub(crate) fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

#[inline]
fn strictly_below(a: &[f64], r: &[f64]) -> bool {
    a.iter().zip(r).all(|(x, y)| x < y)
}

/// Indices of the vectors not weakly dominated by any different vector, in
/// input order. Of several identical vectors only the first is kept.
pub fn nondominated_filter(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let p = &points[i];
            !points.iter().enumerate().any(|(j, q)| {
                if q == p {
                    j < i
                } else {
                    weakly_dominates(q, p)
                }
            })
        })
        .collect()
}

/// Hypervolume result; `std_error` is zero for exact computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvEstimate {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
}

fn check(front: &[Vec<f64>], r: &[f64]) -> Result<(), ParetoError> {
    if r.is_empty() {
        return Err(ParetoError::NoObjectives);
    }
    for p in front {
        if p.len() != r.len() {
            return Err(ParetoError::LengthMismatch(p.len(), r.len()));
        }
    }
    Ok(())
}

/// Points strictly inside the box below `r`, reduced to their nondominated set.
fn relevant(front: &[Vec<f64>], r: &[f64]) -> Vec<Vec<f64>> {
    let inside: Vec<Vec<f64>> = front.iter().filter(|p| strictly_below(p, r)).cloned().collect();
    nondominated_filter(&inside).into_iter().map(|i| inside[i].clone()).collect()
}

/// Volume dominated by `front` and bounded by `r`. Exact for up to three
/// objectives; from four on, a seeded Monte-Carlo estimate with
/// [`HV_MC_SAMPLES`] samples (see [`hypervolume_estimate`] for its standard
/// error, and [`hypervolume_exact`] for the exact but exponential-cost value).
pub fn hypervolume(front: &[Vec<f64>], r: &[f64]) -> Result<f64, ParetoError> {
    hypervolume_estimate(front, r).map(|e| e.value)
}

pub fn hypervolume_estimate(front: &[Vec<f64>], r: &[f64]) -> Result<HvEstimate, ParetoError> {
    check(front, r)?;
    let pts = relevant(front, r);
    if r.len() <= 3 {
        return Ok(HvEstimate {
            value: hv_recursive(pts, r),
            std_error: 0.0,
            exact: true,
        });
    }
    Ok(hv_monte_carlo(&pts, r, HV_MC_SAMPLES, HV_MC_SEED))
}

/// Exact hypervolume for any number of objectives by recursive slicing on
/// the last objective. Cost grows as `O(k^{n−1} log k)` for `k` points.
pub fn hypervolume_exact(front: &[Vec<f64>], r: &[f64]) -> Result<f64, ParetoError> {
    check(front, r)?;
    Ok(hv_recursive(relevant(front, r), r))
}

fn hv_recursive(mut pts: Vec<Vec<f64>>, r: &[f64]) -> f64 {
    let n = r.len();
    if pts.is_empty() {
        return 0.0;
    }
    match n {
        1 => r[0] - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => hv2(&mut pts, r),
        _ => {
            pts.sort_by(|a, b| a[n - 1].total_cmp(&b[n - 1]));
            let mut total = 0.0;
            let mut slice: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
            for k in 0..pts.len() {
                let p = &pts[k];
                // keep the projected set nondominated as it grows
                let proj = &p[..n - 1];
                if !slice.iter().any(|q| weakly_dominates(q, proj)) {
                    slice.retain(|q| !weakly_dominates(proj, q));
                    slice.push(proj.to_vec());
                }
                let top = if k + 1 < pts.len() { pts[k + 1][n - 1] } else { r[n - 1] };
                let depth = top - p[n - 1];
                if depth > 0.0 {
                    total += depth * hv_recursive(slice.clone(), &r[..n - 1]);
                }
            }
            total
        }
    }
}

fn hv2(pts: &mut [Vec<f64>], r: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut total = 0.0;
    let mut y_floor = r[1];
    for p in pts.iter() {
        if p[1] < y_floor {
            total += (r[0] - p[0]) * (y_floor - p[1]);
            y_floor = p[1];
        }
    }
    total
}

/// Seeded Monte-Carlo hypervolume for any number of objectives: uniform
/// samples in the box spanned by the front's minima and `r`.
pub fn hypervolume_monte_carlo(front: &[Vec<f64>], r: &[f64], samples: usize, seed: u64) -> Result<HvEstimate, ParetoError> {
    check(front, r)?;
    Ok(hv_monte_carlo(&relevant(front, r), r, samples.max(1), seed))
}

fn hv_monte_carlo(pts: &[Vec<f64>], r: &[f64], samples: usize, seed: u64) -> HvEstimate {
    let n = r.len();
    if pts.is_empty() {
        return HvEstimate {
            value: 0.0,
            std_error: 0.0,
            exact: false,
        };
    }
    let lo: Vec<f64> = (0..n).map(|i| pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min)).collect();
    let vol: f64 = (0..n).map(|i| r[i] - lo[i]).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; n];
    let mut hits = 0usize;
    for _ in 0..samples {
        for i in 0..n {
            z[i] = lo[i] + rng.random::<f64>() * (r[i] - lo[i]);
        }
        if pts.iter().any(|p| weakly_dominates(p, &z)) {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    HvEstimate {
        value: frac * vol,
        std_error: vol * (frac * (1.0 - frac) / samples as f64).sqrt(),
        exact: false,
    }
}

/// `HV(front ∪ {c}) − HV(front)`, computed exactly as the volume of the box
/// `[c, r]` minus the part of it already dominated by the front. Zero when `c`
/// is weakly dominated by a front member or does not dominate `r`.
pub fn hypervolume_improvement(front: &[Vec<f64>], r: &[f64], c: &[f64]) -> Result<f64, ParetoError> {
    check(front, r)?;
    if c.len() != r.len() {
        return Err(ParetoError::LengthMismatch(c.len(), r.len()));
    }
    if !strictly_below(c, r) || front.iter().any(|p| weakly_dominates(p, c)) {
        return Ok(0.0);
    }
    let boxed: f64 = c.iter().zip(r).map(|(a, b)| b - a).product();
    let clipped: Vec<Vec<f64>> = front
        .iter()
        .map(|p| p.iter().zip(c).map(|(a, b)| a.max(*b)).collect())
        .collect();
    let covered = hv_recursive(relevant(&clipped, r), r);
    Ok((boxed - covered).max(0.0))
}

/// Reference-point policy: componentwise maximum plus 10% of the range plus
/// `1e−6`. `None` for an empty set.
pub fn reference_point(values: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = values.first()?.len();
    Some(
        (0..n)
            .map(|i| {
                let hi = values.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max);
                let lo = values.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
                hi + 0.1 * (hi - lo) + 1e-6
            })
            .collect(),
    )
}

/// Feasibility under the `g ≤ 0` convention.
pub fn is_feasible(g: &[f64], tol: f64) -> bool {
    g.iter().all(|v| *v <= tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub id: usize,
    pub point: MixedPoint,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub feasible: bool,
}

/// Evaluated points with their nondominated feasible subset and the current
/// reference point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
    nondominated: Vec<usize>,
    ref_point: Option<Vec<f64>>,
}

impl ParetoArchive {
    pub fn new(entries: Vec<ArchiveEntry>) -> Self {
        let mut a = Self {
            entries,
            nondominated: Vec::new(),
            ref_point: None,
        };
        a.refresh();
        a
    }

    pub fn push(&mut self, entry: ArchiveEntry) {
        self.entries.push(entry);
        self.refresh();
    }

    fn refresh(&mut self) {
        let feasible: Vec<usize> = (0..self.entries.len()).filter(|&i| self.entries[i].feasible).collect();
        let fvals: Vec<Vec<f64>> = feasible.iter().map(|&i| self.entries[i].f.clone()).collect();
        self.nondominated = nondominated_filter(&fvals).into_iter().map(|k| feasible[k]).collect();
        self.ref_point = if fvals.is_empty() {
            let all: Vec<Vec<f64>> = self.entries.iter().map(|e| e.f.clone()).collect();
            reference_point(&all)
        } else {
            reference_point(&fvals)
        };
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices (into [`entries`](Self::entries)) of the nondominated feasible
    /// entries.
    pub fn nondominated(&self) -> &[usize] {
        &self.nondominated
    }

    pub fn front(&self) -> Vec<Vec<f64>> {
        self.nondominated.iter().map(|&i| self.entries[i].f.clone()).collect()
    }

    pub fn ref_point(&self) -> Option<&[f64]> {
        self.ref_point.as_deref()
    }

    /// Hypervolume of the feasible front w.r.t. `r` (the archive's own
    /// reference point if `None`).
    pub fn hypervolume(&self, r: Option<&[f64]>) -> f64 {
        let Some(r) = r.or(self.ref_point.as_deref()) else {
            return 0.0;
        };
        hypervolume_exact(&self.front(), r).unwrap_or(0.0)
    }

    /// Writes `point_id, f1..fn, g1..gm, feasible, on_front`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let n = self.entries.first().map_or(0, |e| e.f.len());
        let m = self.entries.first().map_or(0, |e| e.g.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["point_id".to_string()];
        header.extend((1..=n).map(|i| format!("f{i}")));
        header.extend((1..=m).map(|i| format!("g{i}")));
        header.push("feasible".into());
        header.push("on_front".into());
        w.write_record(&header)?;
        for (k, e) in self.entries.iter().enumerate() {
            let mut rec = vec![e.id.to_string()];
            rec.extend(e.f.iter().map(|v| v.to_string()));
            rec.extend(e.g.iter().map(|v| v.to_string()));
            rec.push(e.feasible.to_string());
            rec.push(self.nondominated.contains(&k).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(p: &[[f64; 2]]) -> Vec<Vec<f64>> {
        p.iter().map(|a| a.to_vec()).collect()
    }

    /// Midpoint-rule grid oracle for 2-D hypervolume.
    fn grid_hv2(front: &[Vec<f64>], r: &[f64], lo: [f64; 2], res: usize) -> f64 {
        let (dx, dy) = ((r[0] - lo[0]) / res as f64, (r[1] - lo[1]) / res as f64);
        let mut hits = 0usize;
        for i in 0..res {
            for j in 0..res {
                let z = [lo[0] + (i as f64 + 0.5) * dx, lo[1] + (j as f64 + 0.5) * dy];
                if front.iter().any(|p| p[0] <= z[0] && p[1] <= z[1]) {
                    hits += 1;
                }
            }
        }
        hits as f64 * dx * dy
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[1.0, 2.0], &[2.0, 3.0]).unwrap());
        assert!(!dominates(&[1.0, 3.0], &[3.0, 1.0]).unwrap());
        assert!(!dominates(&[3.0, 1.0], &[1.0, 3.0]).unwrap());
        assert!(dominates(&[1.0, 1.0], &[1.0, 1.0]).unwrap());
        assert!(dominates(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn filter_examples() {
        let pts = v(&[[1.0, 3.0], [2.0, 2.0], [3.0, 1.0], [3.0, 3.0]]);
        assert_eq!(nondominated_filter(&pts), vec![0, 1, 2]);
        assert_eq!(nondominated_filter(&v(&[[5.0, 5.0]])), vec![0]);
        let dup = v(&[[2.0, 2.0], [1.0, 3.0], [2.0, 2.0]]);
        assert_eq!(nondominated_filter(&dup), vec![0, 1]);
        assert!(nondominated_filter(&[]).is_empty());
    }

    #[test]
    fn hypervolume_examples() {
        assert_eq!(hypervolume(&v(&[[1.0, 1.0]]), &[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(hypervolume(&v(&[[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]]), &[4.0, 4.0]).unwrap(), 6.0);
        assert_eq!(hypervolume(&[], &[4.0, 4.0]).unwrap(), 0.0);
        // points outside the reference box contribute nothing
        assert_eq!(hypervolume(&v(&[[1.0, 5.0], [4.0, 1.0]]), &[4.0, 4.0]).unwrap(), 0.0);
        assert!(hypervolume(&[], &[]).is_err());
        assert_eq!(hypervolume(&[vec![0.5]], &[2.0]).unwrap(), 1.5);
    }

    #[test]
    fn hypervolume_matches_grid_oracle() {
        let front = v(&[[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]]);
        let grid = grid_hv2(&front, &[4.0, 4.0], [0.0, 0.0], 1000);
        assert!((grid - 6.0).abs() < 1e-9);
    }

    #[test]
    fn improvement_examples() {
        let front = v(&[[1.0, 3.0], [3.0, 1.0]]);
        assert_eq!(hypervolume_improvement(&front, &[4.0, 4.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(hypervolume_improvement(&front, &[4.0, 4.0], &[3.5, 3.5]).unwrap(), 0.0);
        assert_eq!(hypervolume_improvement(&front, &[4.0, 4.0], &[1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(hypervolume_improvement(&[], &[2.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn three_objective_exact() {
        // three 2×1×1 boxes; inclusion-exclusion gives 3·2 − 3·1 + 1
        let front = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let hv = hypervolume(&front, &[2.0, 2.0, 2.0]).unwrap();
        assert!((hv - 4.0).abs() < 1e-12, "{hv}");
    }

    #[test]
    fn monte_carlo_for_four_objectives() {
        let front3 = vec![vec![0.2, 0.7, 0.5], vec![0.6, 0.1, 0.4], vec![0.4, 0.4, 0.1], vec![0.9, 0.8, 0.05]];
        let r3 = [1.0, 1.0, 1.0];
        let exact = hypervolume(&front3, &r3).unwrap();
        let front4: Vec<Vec<f64>> = front3.iter().map(|p| [p.as_slice(), &[0.0]].concat()).collect();
        let est = hypervolume_estimate(&front4, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(!est.exact);
        assert!((est.value - exact).abs() <= 3.0 * est.std_error, "{est:?} vs {exact}");
        assert!((hypervolume_exact(&front4, &[1.0; 4]).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn reference_policy() {
        let r = reference_point(&v(&[[0.0, 10.0], [1.0, 0.0]])).unwrap();
        assert!((r[0] - (1.0 + 0.1 + 1e-6)).abs() < 1e-12);
        assert!((r[1] - (10.0 + 1.0 + 1e-6)).abs() < 1e-12);
        assert!(reference_point(&[]).is_none());
    }

    #[test]
    fn archive_csv_and_front() {
        let point = MixedPoint {
            values: vec![],
            active: vec![],
        };
        let mk = |id, f: [f64; 2], g: f64| ArchiveEntry {
            id,
            point: point.clone(),
            f: f.to_vec(),
            g: vec![g],
            feasible: g <= 0.0,
        };
        let a = ParetoArchive::new(vec![mk(0, [1.0, 3.0], -1.0), mk(1, [0.0, 0.0], 1.0), mk(2, [3.0, 1.0], 0.0), mk(3, [3.0, 3.0], -0.5)]);
        assert_eq!(a.nondominated(), &[0, 2]);
        let r = a.ref_point().unwrap();
        for p in a.front() {
            assert!(p.iter().zip(r).all(|(x, y)| x < y));
        }
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "point_id,f1,f2,g1,feasible,on_front");
        assert_eq!(text.lines().nth(2).unwrap(), "1,0,0,1,false,false");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn front(n: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
            proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, n), 0..max)
        }

        proptest! {
            #[test]
            fn filter_matches_pairwise_oracle(pts in front(3, 60)) {
                let got = nondominated_filter(&pts);
                for i in 0..pts.len() {
                    let dominated = (0..pts.len()).any(|j| pts[j] != pts[i] && pts[j].iter().zip(&pts[i]).all(|(a, b)| a <= b));
                    let earlier_dup = (0..i).any(|j| pts[j] == pts[i]);
                    prop_assert_eq!(got.contains(&i), !dominated && !earlier_dup);
                }
            }

            #[test]
            fn adding_points_never_decreases_hv(pts in front(3, 25), extra in proptest::collection::vec(0.0f64..1.2, 3)) {
                let r = [1.1, 1.1, 1.1];
                let before = hypervolume(&pts, &r).unwrap();
                let mut more = pts.clone();
                more.push(extra.clone());
                let after = hypervolume(&more, &r).unwrap();
                prop_assert!(after >= before - 1e-12);
                let hvi = hypervolume_improvement(&pts, &r, &extra).unwrap();
                prop_assert!((after - before - hvi).abs() < 1e-9);
            }

            #[test]
            fn filter_preserves_hv(pts in front(2, 40)) {
                let r = [1.0, 1.0];
                let nd: Vec<Vec<f64>> = nondominated_filter(&pts).into_iter().map(|i| pts[i].clone()).collect();
                prop_assert!((hypervolume(&pts, &r).unwrap() - hypervolume(&nd, &r).unwrap()).abs() < 1e-12);
            }

            #[test]
            fn translation_invariant(pts in front(3, 20), shift in proptest::collection::vec(-5.0f64..5.0, 3)) {
                let r = [1.0, 1.0, 1.0];
                let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
                let rm: Vec<f64> = r.iter().zip(&shift).map(|(a, b)| a + b).collect();
                prop_assert!((hypervolume(&pts, &r).unwrap() - hypervolume(&moved, &rm).unwrap()).abs() < 1e-9);
            }

            #[test]
            fn exact_2d_matches_grid(pts in front(2, 15)) {
                let r = [1.0, 1.0];
                // snap to a 1/8 lattice so the midpoint grid is exact
                let snapped: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| (v * 8.0).floor() / 8.0).collect()).collect();
                let g = grid_hv2(&snapped, &r, [0.0, 0.0], 64);
                prop_assert!((hypervolume(&snapped, &r).unwrap() - g).abs() < 1e-9);
            }
        }
    }
}
