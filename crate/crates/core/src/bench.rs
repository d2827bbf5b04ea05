//! Analytic benchmark problems: classic continuous test functions and three
//! mixed-variable toys whose variable layouts mimic realistic aircraft design
//! studies (a retrofit, a family with shared components, and a supply chain
//! made of categorical choices only).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design_space::{DesignSpace, MixedPoint, Value, VariableSpec};

pub type Evaluator = Arc<dyn Fn(&MixedPoint) -> (Vec<f64>, Vec<f64>) + Send + Sync>;

/// What is known about a problem's true Pareto front.
#[derive(Clone)]
pub enum KnownFront {
    /// Points `curve(t)` for `t ∈ [0, 1]` trace the front (in the problem's
    /// own objective signs).
    Curve(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
    /// The space is small enough to enumerate; the front follows from
    /// [`BenchmarkProblem::enumerate`].
    Enumerable,
    None,
}

#[derive(Clone)]
pub struct BenchmarkProblem {
    pub name: &'static str,
    pub description: &'static str,
    pub space: DesignSpace,
    pub objective_names: Vec<String>,
    pub constraint_names: Vec<String>,
    /// Objectives to be maximized rather than minimized.
    pub maximize: Vec<bool>,
    pub evaluator: Evaluator,
    pub known_front: KnownFront,
}

impl std::fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkProblem").field("name", &self.name).finish_non_exhaustive()
    }
}

impl BenchmarkProblem {
    pub fn n_objectives(&self) -> usize {
        self.objective_names.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraint_names.len()
    }

    pub fn evaluate(&self, p: &MixedPoint) -> (Vec<f64>, Vec<f64>) {
        (self.evaluator)(p)
    }

    /// Every point of a purely categorical/integer space (imputed), in
    /// lexicographic order. `None` when a continuous variable is present or
    /// the space has more than `limit` points.
    pub fn enumerate(&self, limit: usize) -> Option<Vec<MixedPoint>> {
        enumerate_space(&self.space, limit)
    }
}

/// See [`BenchmarkProblem::enumerate`]. Points that differ only in inactive
/// variables are listed once.
pub fn enumerate_space(space: &DesignSpace, limit: usize) -> Option<Vec<MixedPoint>> {
    use crate::design_space::VariableKind;
    let sizes: Vec<usize> = space
        .variables()
        .iter()
        .map(|v| match &v.kind {
            VariableKind::Categorical { levels } => Some(levels.len()),
            VariableKind::Integer { lower, upper } => Some((upper - lower + 1) as usize),
            VariableKind::Continuous { .. } => None,
        })
        .collect::<Option<_>>()?;
    let total = sizes.iter().try_fold(1usize, |a, &s| a.checked_mul(s))?;
    if total > limit {
        return None;
    }
    let mut out: Vec<MixedPoint> = Vec::with_capacity(total);
    let mut idx = vec![0usize; sizes.len()];
    for _ in 0..total {
        let values: Vec<Value> = space
            .variables()
            .iter()
            .zip(&idx)
            .map(|(v, &k)| match &v.kind {
                VariableKind::Categorical { .. } => Value::Level(k),
                VariableKind::Integer { lower, .. } => Value::Int(lower + k as i64),
                VariableKind::Continuous { .. } => unreachable!(),
            })
            .collect();
        let active = space.activity(&values);
        let p = space.impute(&MixedPoint { values, active });
        if out.last() != Some(&p) && !out.contains(&p) {
            out.push(p);
        }
        for j in (0..idx.len()).rev() {
            idx[j] += 1;
            if idx[j] < sizes[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    Some(out)
}

pub const PROBLEM_NAMES: &[&str] = &[
    "zdt1",
    "bnh",
    "schaffer",
    "mixed-retrofit-toy",
    "mixed-family-toy",
    "cat-supply-toy",
    "cat-supply-toy-restricted",
];

pub fn builtin_problems() -> Vec<BenchmarkProblem> {
    PROBLEM_NAMES.iter().map(|n| problem(n).expect("catalog entry")).collect()
}

pub fn problem(name: &str) -> Option<BenchmarkProblem> {
    Some(match name {
        "zdt1" => zdt1(5),
        "bnh" => bnh(),
        "schaffer" => schaffer(),
        "mixed-retrofit-toy" => retrofit(),
        "mixed-family-toy" => family(),
        "cat-supply-toy" => supply(false),
        "cat-supply-toy-restricted" => supply(true),
        _ => return None,
    })
}

fn reals(p: &MixedPoint) -> Vec<f64> {
    p.values.iter().map(Value::as_f64).collect()
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn zdt1(d: usize) -> BenchmarkProblem {
    let space = DesignSpace::new("zdt1", (1..=d).map(|i| VariableSpec::continuous(format!("x{i}"), 0.0, 1.0)).collect())
        .expect("valid space");
    BenchmarkProblem {
        name: "zdt1",
        description: "continuous bi-objective, convex front f2 = 1 - sqrt(f1)",
        space,
        objective_names: names("f", 2),
        constraint_names: vec![],
        maximize: vec![false; 2],
        evaluator: Arc::new(|p| {
            let x = reals(p);
            let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64;
            (vec![x[0], g * (1.0 - (x[0] / g).sqrt())], vec![])
        }),
        known_front: KnownFront::Curve(Arc::new(|t| vec![t, 1.0 - t.sqrt()])),
    }
}

pub fn bnh() -> BenchmarkProblem {
    let space = DesignSpace::new(
        "bnh",
        vec![VariableSpec::continuous("x1", 0.0, 5.0), VariableSpec::continuous("x2", 0.0, 3.0)],
    )
    .expect("valid space");
    let f = |x1: f64, x2: f64| vec![4.0 * x1 * x1 + 4.0 * x2 * x2, (x1 - 5.0).powi(2) + (x2 - 5.0).powi(2)];
    BenchmarkProblem {
        name: "bnh",
        description: "constrained bi-objective with two inequality constraints",
        space,
        objective_names: names("f", 2),
        constraint_names: names("g", 2),
        maximize: vec![false; 2],
        evaluator: Arc::new(move |p| {
            let x = reals(p);
            let g1 = (x[0] - 5.0).powi(2) + x[1] * x[1] - 25.0;
            let g2 = 7.7 - (x[0] - 8.0).powi(2) - (x[1] + 3.0).powi(2);
            (f(x[0], x[1]), vec![g1, g2])
        }),
        // x1 = x2 on [0, 3], then x2 = 3 with x1 up to 5
        known_front: KnownFront::Curve(Arc::new(move |t| {
            let s = 5.0 * t;
            if s <= 3.0 {
                f(s, s)
            } else {
                f(s, 3.0)
            }
        })),
    }
}

pub fn schaffer() -> BenchmarkProblem {
    let space = DesignSpace::new("schaffer", vec![VariableSpec::continuous("x", -10.0, 10.0)]).expect("valid space");
    BenchmarkProblem {
        name: "schaffer",
        description: "one-variable bi-objective, front for x in [0, 2]",
        space,
        objective_names: names("f", 2),
        constraint_names: vec![],
        maximize: vec![false; 2],
        evaluator: Arc::new(|p| {
            let x = p.values[0].as_f64();
            (vec![x * x, (x - 2.0).powi(2)], vec![])
        }),
        known_front: KnownFront::Curve(Arc::new(|t| {
            let x = 2.0 * t;
            vec![x * x, (x - 2.0).powi(2)]
        })),
    }
}

/// 3 continuous + 1 categorical with 4 levels; 4 objectives (the last one,
/// specific air range, maximized) and 4 constraints.
pub fn retrofit() -> BenchmarkProblem {
    let engines = ["baseline", "geared-fan", "open-rotor", "hybrid"];
    let space = DesignSpace::new(
        "mixed-retrofit-toy",
        vec![
            VariableSpec::continuous("span_extension", 0.0, 3.0),
            VariableSpec::continuous("fan_diameter", 1.6, 2.4),
            VariableSpec::continuous("bypass_ratio", 5.0, 12.0),
            VariableSpec::categorical("engine", &engines),
        ],
    )
    .expect("valid space");
    // per-engine offsets: fuel, noise, cost, range, weight, certification
    const FUEL: [f64; 4] = [0.0, -0.08, -0.14, -0.05];
    const NOISE: [f64; 4] = [0.0, -0.05, 0.12, -0.1];
    const COST: [f64; 4] = [0.0, 0.12, 0.25, 0.35];
    const RANGE: [f64; 4] = [0.0, 0.06, 0.1, -0.04];
    const WEIGHT: [f64; 4] = [0.0, 0.05, 0.08, 0.2];
    const CERT: [f64; 4] = [0.0, 0.05, 0.3, 0.15];
    BenchmarkProblem {
        name: "mixed-retrofit-toy",
        description: "retrofit study: 3 continuous + engine choice, 4 objectives, 4 constraints",
        space,
        objective_names: vec!["fuel_burn".into(), "noise".into(), "retrofit_cost".into(), "specific_air_range".into()],
        constraint_names: vec!["ground_clearance".into(), "weight".into(), "stability".into(), "certification".into()],
        maximize: vec![false, false, false, true],
        evaluator: Arc::new(|p| {
            let x = reals(p);
            let s = x[0] / 3.0;
            let f = (x[1] - 1.6) / 0.8;
            let b = (x[2] - 5.0) / 7.0;
            let k = p.values[3].as_f64() as usize;
            let fuel = 1.0 - 0.3 * b - 0.15 * s + 0.2 * (f - 0.6).powi(2) + 0.1 * s * s + FUEL[k];
            let noise = 0.5 + 0.35 * b * b - 0.2 * f + 0.05 * s + NOISE[k];
            let cost = 0.2 + 0.4 * s * s + 0.3 * f * b + COST[k];
            let sar = 0.8 + 0.3 * s - 0.25 * (b - 0.4).powi(2) + 0.1 * (3.0 * f).sin() + RANGE[k];
            let g = vec![
                f * (1.0 + 0.1 * k as f64) - 0.9,
                0.3 * s + 0.4 * f + WEIGHT[k] - 0.75,
                0.2 - 0.5 * s - 0.3 * (1.0 - b),
                CERT[k] + 0.3 * b - 0.55,
            ];
            (vec![fuel, noise, cost, sar], g)
        }),
        known_front: KnownFront::None,
    }
}

/// Three-member aircraft family: 9 continuous wing parameters, 10 binary
/// sharing/technology choices. The wing of members 2 and 3 is only designed
/// when it is not shared with the previous member.
pub fn family() -> BenchmarkProblem {
    let share = ["common", "specific"];
    let mut vars = Vec::new();
    for i in 1..=3 {
        let span = VariableSpec::continuous(format!("span_{i}"), 30.0, 40.0);
        let sweep = VariableSpec::continuous(format!("sweep_{i}"), 20.0, 35.0);
        let thick = VariableSpec::continuous(format!("thickness_{i}"), 0.09, 0.15);
        let rule = match i {
            2 => Some("wing_12"),
            3 => Some("wing_23"),
            _ => None,
        };
        for v in [span, sweep, thick] {
            vars.push(match rule {
                Some(r) => v.active_when(r, &["specific"]),
                None => v,
            });
        }
    }
    // categoricals come after the continuous block in the layout but the
    // activity rules need them earlier, so the space lists them first
    let mut cats = vec![
        VariableSpec::categorical("wing_12", &share),
        VariableSpec::categorical("wing_23", &share),
        VariableSpec::categorical("fuselage_12", &share),
        VariableSpec::categorical("fuselage_23", &share),
        VariableSpec::categorical("tail_12", &share),
        VariableSpec::categorical("tail_23", &share),
        VariableSpec::categorical("systems", &share),
    ];
    for i in 1..=3 {
        cats.push(VariableSpec::categorical(format!("engine_{i}"), &["current", "advanced"]));
    }
    cats.extend(vars);
    let space = DesignSpace::new("mixed-family-toy", cats).expect("valid space");
    const TARGET_SPAN: [f64; 3] = [0.2, 0.55, 0.9];
    const TARGET_SWEEP: [f64; 3] = [0.3, 0.5, 0.7];
    BenchmarkProblem {
        name: "mixed-family-toy",
        description: "aircraft family: 9 continuous + 10 binary, wing activity rules, 2 objectives, 2 constraints",
        space,
        objective_names: vec!["family_fuel".into(), "development_cost".into()],
        constraint_names: vec!["field_length".into(), "wing_loading".into()],
        maximize: vec![false; 2],
        evaluator: Arc::new(|p| {
            let lv = |i: usize| p.values[i].as_f64();
            let wing_12 = lv(0) > 0.5;
            let wing_23 = lv(1) > 0.5;
            // native wing variables start at index 10
            let wing = |m: usize| {
                let base = 10 + 3 * m;
                [(lv(base) - 30.0) / 10.0, (lv(base + 1) - 20.0) / 15.0, (lv(base + 2) - 0.09) / 0.06]
            };
            let w1 = wing(0);
            let w2 = if wing_12 { wing(1) } else { w1 };
            let w3 = if wing_23 { wing(2) } else { w2 };
            let wings = [w1, w2, w3];
            let mut fuel = 0.0;
            for (m, w) in wings.iter().enumerate() {
                let eng = lv(7 + m);
                fuel += (w[0] - TARGET_SPAN[m]).powi(2) + 0.5 * (w[1] - TARGET_SWEEP[m]).powi(2) + 0.3 * (w[2] - 0.5).powi(2)
                    - 0.08 * eng;
            }
            for (k, pen) in [(2, 0.05), (3, 0.06), (4, 0.02), (5, 0.02), (6, 0.03)] {
                if lv(k) < 0.5 {
                    fuel += pen;
                }
            }
            let mut cost = 1.0;
            cost += 0.35 * lv(0) + 0.35 * lv(1);
            cost += 0.2 * (lv(2) + lv(3)) + 0.1 * (lv(4) + lv(5)) + 0.15 * lv(6);
            cost += 0.12 * (lv(7) + lv(8) + lv(9));
            cost += 0.05 * wings.iter().map(|w| w[0]).sum::<f64>();
            let field = 0.6 - 0.5 * w3[0] - 0.2 * w3[2] + 0.1 * w3[1] - 0.1 * lv(9);
            let loading = 0.3 - 0.4 * w1[0] - 0.3 * w1[2];
            (vec![fuel, cost], vec![field - 0.25, loading])
        }),
        known_front: KnownFront::None,
    }
}

const SUPPLY_PROCESSES: [usize; 4] = [6, 5, 4, 5];
const SUPPLY_SITES: usize = 21;

/// Latent (cost, lead time) per part and level.
struct SupplyTables {
    site: Vec<Vec<[f64; 2]>>,
    process: Vec<Vec<[f64; 2]>>,
    compatible: Vec<Vec<Vec<bool>>>,
}

fn supply_tables() -> SupplyTables {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5u64 << 40 | 2024);
    let pair = |rng: &mut ChaCha8Rng| -> [f64; 2] {
        let c: f64 = rng.random_range(0.5..2.0);
        // cheap sites are slow
        let t = 1.5 - 0.25 * c + rng.random_range(-0.5..0.5);
        [c, t]
    };
    let site = (0..4).map(|_| (0..SUPPLY_SITES).map(|_| pair(&mut rng)).collect()).collect();
    let process = SUPPLY_PROCESSES
        .iter()
        .map(|&n| (0..n).map(|_| pair(&mut rng)).map(|v| [0.5 * v[0], 0.5 * v[1]]).collect())
        .collect();
    let compatible = SUPPLY_PROCESSES
        .iter()
        .map(|&n| (0..SUPPLY_SITES).map(|s| (0..n).map(|q| s == 0 || q == 0 || rng.random::<f64>() > 0.2).collect()).collect())
        .collect();
    SupplyTables {
        site,
        process,
        compatible,
    }
}

/// Supply-chain selection: each of 4 parts gets a production site (21
/// options) and a process (6, 5, 4 and 5 options). Objectives are affine in
/// the summed latent cost and lead time; constraints mask incompatible site/process pairs
/// and forbid more than two parts at one site. The restricted variant keeps 4
/// sites and 2 processes per part (4096 configurations).
pub fn supply(restricted: bool) -> BenchmarkProblem {
    let n_sites = if restricted { 4 } else { SUPPLY_SITES };
    let mut vars = Vec::new();
    for part in 0..4 {
        let levels: Vec<String> = (0..n_sites).map(|s| format!("site_{s:02}")).collect();
        vars.push(VariableSpec::categorical(format!("site_part{}", part + 1), &levels));
    }
    for (part, &n) in SUPPLY_PROCESSES.iter().enumerate() {
        let n = if restricted { 2 } else { n };
        let levels: Vec<String> = (0..n).map(|q| format!("process_{q}")).collect();
        vars.push(VariableSpec::categorical(format!("process_part{}", part + 1), &levels));
    }
    let name = if restricted { "cat-supply-toy-restricted" } else { "cat-supply-toy" };
    let space = DesignSpace::new(name, vars).expect("valid space");
    let tables = Arc::new(supply_tables());
    BenchmarkProblem {
        name: if restricted { "cat-supply-toy-restricted" } else { "cat-supply-toy" },
        description: if restricted {
            "supply chain, 4 sites x 2 processes per part (4096 configurations), 5 objectives, 2 constraints"
        } else {
            "supply chain: 8 categoricals (21,21,21,21,6,5,4,5 levels), 5 objectives, 2 constraints"
        },
        space,
        objective_names: vec!["cost".into(), "lead_time".into(), "emissions".into(), "risk".into(), "total_cost".into()],
        constraint_names: vec!["compatibility".into(), "site_capacity".into()],
        maximize: vec![false; 5],
        evaluator: Arc::new(move |p| {
            let lv: Vec<usize> = p.values.iter().map(|v| v.as_f64() as usize).collect();
            let mut z = [0.0; 2];
            let mut incompatible = 0.0;
            let mut per_site = [0usize; SUPPLY_SITES];
            for part in 0..4 {
                let (s, q) = (lv[part], lv[4 + part]);
                for k in 0..2 {
                    z[k] += tables.site[part][s][k] + tables.process[part][q][k];
                }
                if !tables.compatible[part][s][q] {
                    incompatible += 1.0;
                }
                per_site[s] += 1;
            }
            let crowd = *per_site.iter().max().expect("sites") as f64;
            let f = vec![z[0], z[1], 0.3 * z[0] + 0.7 * z[1], 0.5 * z[0] + 0.5 * z[1], z[0] + 0.4 * z[1]];
            (f, vec![incompatible - 0.5, crowd - 2.5])
        }),
        known_front: if restricted { KnownFront::Enumerable } else { KnownFront::None },
    }
}
