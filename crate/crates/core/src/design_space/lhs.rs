use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DesignSpace, MixedPoint, Value, VariableKind};

/// `n × k` Latin hypercube in `[0, 1)^k`: in every column each of the `n`
/// equal-width bins holds exactly one sample.
pub fn lhs_unit(n: usize, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; k]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..k {
        perm.shuffle(rng);
        for (i, row) in out.iter_mut().enumerate() {
            let u: f64 = rng.random();
            row[j] = (perm[i] as f64 + u) / n as f64;
        }
    }
    out
}

/// Latin hypercube sample of `n` mixed points, one stratified column per
/// native variable. Integer columns are stratified over `[lo − ½, hi + ½)` and
/// rounded, categorical columns map bin `u` to level `⌊u·L⌋`.
pub fn lhs_sample(space: &DesignSpace, n: usize, seed: u64) -> Vec<MixedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = lhs_unit(n, space.len(), &mut rng);
    unit.iter()
        .map(|row| {
            let values: Vec<Value> = space
                .variables()
                .iter()
                .zip(row)
                .map(|(var, &u)| match &var.kind {
                    VariableKind::Continuous { lower, upper } => {
                        Value::Real((lower + u * (upper - lower)).clamp(*lower, *upper))
                    }
                    VariableKind::Integer { lower, upper } => {
                        let lo = *lower as f64 - 0.5;
                        let hi = *upper as f64 + 0.5;
                        Value::Int(((lo + u * (hi - lo)).round() as i64).clamp(*lower, *upper))
                    }
                    VariableKind::Categorical { levels } => {
                        Value::Level(((u * levels.len() as f64) as usize).min(levels.len() - 1))
                    }
                })
                .collect();
            let active = space.activity(&values);
            space.impute(&MixedPoint { values, active })
        })
        .collect()
}
