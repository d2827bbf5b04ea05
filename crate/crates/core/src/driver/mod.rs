//! Ask-tell optimization loop: an LHS design of experiments followed by one
//! infill point per iteration (fit surrogates, maximize the regularized
//! acquisition under surrogate constraints, guard against duplicates), and a
//! final post-processing step producing the evaluated front, the front
//! predicted by NSGA-II on the final surrogates, and a proximity report.

mod artifacts;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{Acquisition, AcquisitionConfig, Standardizer};
use crate::design_space::{lhs_sample, DesignSpace, DesignSpaceDef, MixedPoint, SpaceError};
use crate::infill::{best_decoded, dedup_guard, solve, InfillOptions, SurrogateInfill};
use crate::moea::{evolve, Nsga2Config};
use crate::pareto::{is_feasible, nondominated_filter, ArchiveEntry, ParetoArchive};
use crate::surrogate::{KernelConfig, MultiOutputSurrogate};

pub use artifacts::{read_history, write_artifacts, write_history, ArtifactPaths};

/// Constraint values up to this count as satisfied for true evaluations.
pub const FEASIBILITY_TOL: f64 = 0.0;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("pending evaluation: tell the outstanding point before asking again")]
    PendingEvaluation,
    #[error("budget exhausted")]
    BudgetExhausted,
    #[error("no pending ask")]
    NoPendingAsk,
    #[error("told point does not match the pending ask")]
    PointMismatch,
    #[error("expected {expected} {what} values, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("history: {0}")]
    History(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RunConfigDef", into = "RunConfigDef")]
pub struct RunConfig {
    pub space: DesignSpace,
    pub objective_names: Vec<String>,
    pub constraint_names: Vec<String>,
    /// Per-objective flag; maximized objectives are negated internally.
    pub maximize: Vec<bool>,
    pub doe_size: usize,
    pub budget: usize,
    pub acquisition: AcquisitionConfig,
    /// Shared by objective and constraint models.
    pub kernel: KernelConfig,
    pub infill_starts: usize,
    pub nsga2: Nsga2Config,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigDef {
    space: DesignSpaceDef,
    #[serde(default)]
    n_objectives: Option<usize>,
    #[serde(default)]
    n_constraints: Option<usize>,
    #[serde(default)]
    objective_names: Vec<String>,
    #[serde(default)]
    constraint_names: Vec<String>,
    #[serde(default)]
    maximize: Vec<bool>,
    doe_size: usize,
    budget: usize,
    #[serde(default)]
    acquisition: AcquisitionConfig,
    #[serde(default = "default_kernel")]
    kernel: KernelConfig,
    #[serde(default = "default_infill_starts")]
    infill_starts: usize,
    #[serde(default = "default_nsga2")]
    nsga2: Nsga2Config,
    #[serde(default)]
    seed: u64,
}

fn default_kernel() -> KernelConfig {
    RunConfig::default_kernel()
}

fn default_infill_starts() -> usize {
    InfillOptions::default().n_starts
}

fn default_nsga2() -> Nsga2Config {
    Nsga2Config::default()
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

impl TryFrom<RunConfigDef> for RunConfig {
    type Error = String;
    fn try_from(d: RunConfigDef) -> Result<Self, String> {
        let space = d.space.build().map_err(|e| format!("space: {e}"))?;
        let n = match (d.n_objectives, d.objective_names.len()) {
            (Some(n), 0) => n,
            (None, k) => k,
            (Some(n), k) if n == k => n,
            (Some(n), k) => return Err(format!("n_objectives is {n} but {k} objective names are given")),
        };
        let m = match (d.n_constraints, d.constraint_names.len()) {
            (Some(m), 0) => m,
            (None, k) => k,
            (Some(m), k) if m == k => m,
            (Some(m), k) => return Err(format!("n_constraints is {m} but {k} constraint names are given")),
        };
        let cfg = RunConfig {
            space,
            objective_names: if d.objective_names.is_empty() { names("f", n) } else { d.objective_names },
            constraint_names: if d.constraint_names.is_empty() { names("g", m) } else { d.constraint_names },
            maximize: if d.maximize.is_empty() { vec![false; n] } else { d.maximize },
            doe_size: d.doe_size,
            budget: d.budget,
            acquisition: d.acquisition,
            kernel: d.kernel,
            infill_starts: d.infill_starts,
            nsga2: d.nsga2,
            seed: d.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<RunConfig> for RunConfigDef {
    fn from(c: RunConfig) -> Self {
        RunConfigDef {
            space: c.space.to_def(),
            n_objectives: Some(c.objective_names.len()),
            n_constraints: Some(c.constraint_names.len()),
            objective_names: c.objective_names,
            constraint_names: c.constraint_names,
            maximize: c.maximize,
            doe_size: c.doe_size,
            budget: c.budget,
            acquisition: c.acquisition,
            kernel: c.kernel,
            infill_starts: c.infill_starts,
            nsga2: c.nsga2,
            seed: c.seed,
        }
    }
}

impl RunConfig {
    /// Squared-exponential kernel with 2 PLS components and 5 likelihood
    /// starts.
    pub fn default_kernel() -> KernelConfig {
        KernelConfig {
            n_starts: 5,
            ..KernelConfig::default().with_pls(2)
        }
    }

    pub fn new(space: DesignSpace, n_objectives: usize, n_constraints: usize, doe_size: usize, budget: usize) -> Self {
        Self {
            space,
            objective_names: names("f", n_objectives),
            constraint_names: names("g", n_constraints),
            maximize: vec![false; n_objectives],
            doe_size,
            budget,
            acquisition: AcquisitionConfig::default(),
            kernel: Self::default_kernel(),
            infill_starts: default_infill_starts(),
            nsga2: Nsga2Config::default(),
            seed: 0,
        }
    }

    pub fn n_objectives(&self) -> usize {
        self.objective_names.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraint_names.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.objective_names.is_empty() {
            return Err("at least one objective is required".into());
        }
        if self.maximize.len() != self.objective_names.len() {
            return Err(format!(
                "maximize has {} entries for {} objectives",
                self.maximize.len(),
                self.objective_names.len()
            ));
        }
        if self.doe_size < 2 {
            return Err(format!("doe_size must be at least 2, got {}", self.doe_size));
        }
        if self.budget < self.doe_size {
            return Err(format!("budget {} is smaller than doe_size {}", self.budget, self.doe_size));
        }
        if self.infill_starts == 0 {
            return Err("infill_starts must be positive".into());
        }
        self.acquisition.validate()?;
        self.nsga2.validate()?;
        if !(self.kernel.nugget > 0.0) {
            return Err("kernel nugget must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DriverError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Doe,
    Enrich,
    Done,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Doe => "doe",
            Phase::Enrich => "enrich",
            Phase::Done => "done",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Doe,
    Infill,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Doe => "doe",
            Origin::Infill => "infill",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalStatus {
    Ok,
    Failed,
}

impl EvalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalStatus::Ok => "ok",
            EvalStatus::Failed => "failed",
        }
    }
}

/// One evaluated point; `f` keeps the caller's objective signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: usize,
    pub origin: Origin,
    pub status: EvalStatus,
    pub point: MixedPoint,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub feasible: bool,
}

/// Diagnostics of one infill ask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfillInfo {
    pub acquisition: f64,
    pub surrogate_feasible: bool,
    pub replaced: bool,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    point: MixedPoint,
    origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontPoint {
    /// History id for database points, sequence number for predicted ones.
    pub id: usize,
    pub point: MixedPoint,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProximityReport {
    /// Standardized distance of each predicted point to the nearest database
    /// point (`+∞` with an empty database).
    pub distances: Vec<f64>,
    pub database_total: usize,
    pub database_survivors: usize,
    pub predicted_total: usize,
    pub predicted_survivors: usize,
}

impl ProximityReport {
    pub fn summary(&self) -> String {
        format!(
            "{} of {} database + {} of {} predicted points survive in the merged front",
            self.database_survivors, self.database_total, self.predicted_survivors, self.predicted_total
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutputs {
    pub pf_database: Vec<FrontPoint>,
    pub predicted_pf: Vec<FrontPoint>,
    pub proximity: ProximityReport,
    /// Reference point of the final database, in minimization signs.
    pub reference_point: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// State of one optimization run.
#[derive(Debug, Clone)]
pub struct Run {
    config: RunConfig,
    doe: Vec<MixedPoint>,
    history: Vec<Record>,
    archive: ParetoArchive,
    pending: Option<Pending>,
    log: Vec<String>,
    last_infill: Option<InfillInfo>,
}

/// Fit seeds and similar are derived from the run seed and the iteration.
fn derive_seed(seed: u64, stream: u64, iteration: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(iteration as u64)
}

impl Run {
    pub fn new(config: RunConfig) -> Result<Self, DriverError> {
        config.validate().map_err(DriverError::Config)?;
        let doe = lhs_sample(&config.space, config.doe_size, config.seed);
        let mut run = Self {
            config,
            doe,
            history: Vec::new(),
            archive: ParetoArchive::default(),
            pending: None,
            log: Vec::new(),
            last_infill: None,
        };
        run.log(format!(
            "run started: space {} (d'={}), {} objectives, {} constraints, doe {}, budget {}",
            run.config.space.name(),
            run.config.space.relaxed_dimension(),
            run.config.n_objectives(),
            run.config.n_constraints(),
            run.config.doe_size,
            run.config.budget
        ));
        run.log("objectives and psi are standardized by the archive mean/std before the acquisition".to_string());
        Ok(run)
    }

    /// Rebuilds a run from recorded history (e.g. a history CSV). The DOE
    /// sequence is regenerated from the seed; no ask is pending.
    pub fn with_history(config: RunConfig, records: Vec<Record>) -> Result<Self, DriverError> {
        let mut run = Self::new(config)?;
        if records.len() > run.config.budget {
            return Err(DriverError::History(format!(
                "{} records exceed the budget of {}",
                records.len(),
                run.config.budget
            )));
        }
        for r in records {
            run.config.space.validate(&r.point)?;
            run.check_arity(&r.f, &r.g, r.status)?;
            run.push_record(r.origin, r.status, r.point, r.f, r.g);
        }
        Ok(run)
    }

    fn log(&mut self, line: String) {
        log::info!("{line}");
        self.log.push(line);
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn history(&self) -> &[Record] {
        &self.history
    }

    pub fn doe_points(&self) -> &[MixedPoint] {
        &self.doe
    }

    pub fn log_lines(&self) -> &[String] {
        &self.log
    }

    pub fn last_infill(&self) -> Option<&InfillInfo> {
        self.last_infill.as_ref()
    }

    pub fn pending(&self) -> Option<&MixedPoint> {
        self.pending.as_ref().map(|p| &p.point)
    }

    pub fn phase(&self) -> Phase {
        let n = self.history.len();
        if n >= self.config.budget {
            Phase::Done
        } else if n < self.config.doe_size {
            Phase::Doe
        } else {
            Phase::Enrich
        }
    }

    /// Archive of successful evaluations in minimization signs.
    pub fn archive(&self) -> &ParetoArchive {
        &self.archive
    }

    fn to_min(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.config.maximize).map(|(v, &mx)| if mx { -v } else { *v }).collect()
    }

    fn successful(&self) -> Vec<&Record> {
        self.history.iter().filter(|r| r.status == EvalStatus::Ok).collect()
    }

    /// Next point to evaluate.
    pub fn ask(&mut self) -> Result<MixedPoint, DriverError> {
        if self.pending.is_some() {
            return Err(DriverError::PendingEvaluation);
        }
        let (point, origin) = match self.phase() {
            Phase::Done => return Err(DriverError::BudgetExhausted),
            Phase::Doe => (self.doe[self.history.len()].clone(), Origin::Doe),
            Phase::Enrich => (self.infill_point()?, Origin::Infill),
        };
        self.pending = Some(Pending {
            point: point.clone(),
            origin,
        });
        Ok(point)
    }

    /// Marks `point` as the outstanding ask without recomputing it, for
    /// replaying a recorded session. The caller vouches that it is the point
    /// [`ask`](Self::ask) produced at this state.
    pub fn restore_pending(&mut self, point: MixedPoint) -> Result<(), DriverError> {
        if self.pending.is_some() {
            return Err(DriverError::PendingEvaluation);
        }
        let origin = match self.phase() {
            Phase::Done => return Err(DriverError::BudgetExhausted),
            Phase::Doe => Origin::Doe,
            Phase::Enrich => Origin::Infill,
        };
        self.config.space.validate(&point)?;
        self.pending = Some(Pending { point, origin });
        Ok(())
    }

    fn infill_point(&mut self) -> Result<MixedPoint, DriverError> {
        let iteration = self.history.len();
        let space = &self.config.space;
        let ok = self.successful();
        let evaluated: Vec<MixedPoint> = self.history.iter().map(|r| r.point.clone()).collect();
        let x: Vec<Vec<f64>> = ok.iter().map(|r| space.encode(&r.point).map(|v| v.0)).collect::<Result<_, _>>()?;
        let f: Vec<Vec<f64>> = ok.iter().map(|r| self.to_min(&r.f)).collect();
        let g: Vec<Vec<f64>> = ok.iter().map(|r| r.g.clone()).collect();
        let fit_seed = derive_seed(self.config.seed, 1, iteration);
        let models = if x.len() >= 2 {
            MultiOutputSurrogate::fit(&x, &f, &g, &self.config.kernel, fit_seed).ok()
        } else {
            None
        };
        let Some(models) = models else {
            // not enough data for surrogates: space-filling fallback
            let out = dedup_guard(space, &space.encode(&self.doe[0])?.0, &evaluated, |_| true, fit_seed);
            let point = if out.replaced || out.exhausted { out.point } else { lhs_sample(space, 1, fit_seed).remove(0) };
            self.log(format!("iteration {iteration}: surrogates unavailable, space-filling point"));
            self.last_infill = None;
            return Ok(point);
        };
        let standardizer = Standardizer::fit(&f).expect("non-empty");
        let front: Vec<Vec<f64>> = self.archive.front().iter().map(|y| standardizer.apply(y)).collect();
        let r = standardizer.apply(self.archive.ref_point().expect("non-empty archive"));
        let acq_cfg = AcquisitionConfig {
            seed: derive_seed(self.config.seed, 2, iteration),
            ..self.config.acquisition
        };
        let acquisition = Acquisition::new(acq_cfg, &front, &r);
        let objective = SurrogateInfill {
            surrogate: &models,
            acquisition: &acquisition,
            standardizer: &standardizer,
        };
        let (lower, upper) = space.relaxed_bounds();
        let starts: Vec<Vec<f64>> = self
            .archive
            .nondominated()
            .iter()
            .map(|&i| space.encode(&self.archive.entries()[i].point).map(|v| v.0))
            .collect::<Result<_, _>>()?;
        let options = InfillOptions {
            n_starts: self.config.infill_starts,
            ..InfillOptions::default()
        };
        let res = solve(&objective, &lower, &upper, &starts, &options, derive_seed(self.config.seed, 3, iteration));
        let tol_c = options.tol_c;
        let decoded = best_decoded(space, &objective, &res, &evaluated, tol_c);
        let candidate = decoded.as_ref().map_or(&res.x.0, |c| &c.x.0);
        let out = dedup_guard(
            space,
            candidate,
            &evaluated,
            |v| models.constraints.iter().all(|m| m.predict_mean(v) <= tol_c),
            derive_seed(self.config.seed, 4, iteration),
        );
        let info = InfillInfo {
            acquisition: decoded.as_ref().map_or(res.value, |c| c.value),
            surrogate_feasible: decoded.as_ref().map_or(res.feasible, |c| c.feasible),
            replaced: out.replaced,
            exhausted: out.exhausted,
        };
        self.log(format!(
            "iteration {iteration}: acquisition {:.6e}, surrogate-feasible {}, replaced {}, exhausted {}, cells {}",
            info.acquisition,
            info.surrogate_feasible,
            info.replaced,
            info.exhausted,
            acquisition.n_cells().map_or("-".to_string(), |c| c.to_string())
        ));
        self.last_infill = Some(info);
        Ok(out.point)
    }

    fn check_arity(&self, f: &[f64], g: &[f64], status: EvalStatus) -> Result<(), DriverError> {
        let (n, m) = (self.config.n_objectives(), self.config.n_constraints());
        if status == EvalStatus::Failed && f.is_empty() && g.is_empty() {
            return Ok(());
        }
        if f.len() != n {
            return Err(DriverError::Arity {
                what: "objective",
                expected: n,
                got: f.len(),
            });
        }
        if g.len() != m {
            return Err(DriverError::Arity {
                what: "constraint",
                expected: m,
                got: g.len(),
            });
        }
        Ok(())
    }

    /// Records the evaluation of the pending point. Non-finite values turn
    /// the record into a failure; failed records never reach the surrogates.
    /// Returns the stored status.
    pub fn tell(&mut self, point: &MixedPoint, f: Vec<f64>, g: Vec<f64>, status: EvalStatus) -> Result<EvalStatus, DriverError> {
        let Some(pending) = &self.pending else {
            return Err(DriverError::NoPendingAsk);
        };
        if &pending.point != point {
            return Err(DriverError::PointMismatch);
        }
        self.check_arity(&f, &g, status)?;
        let origin = pending.origin;
        let point = pending.point.clone();
        self.pending = None;
        Ok(self.push_record(origin, status, point, f, g))
    }

    fn push_record(&mut self, origin: Origin, status: EvalStatus, point: MixedPoint, f: Vec<f64>, g: Vec<f64>) -> EvalStatus {
        let (n, m) = (self.config.n_objectives(), self.config.n_constraints());
        let finite = f.len() == n && g.len() == m && f.iter().chain(&g).all(|v| v.is_finite());
        let status = if status == EvalStatus::Ok && finite { EvalStatus::Ok } else { EvalStatus::Failed };
        let f = if f.len() == n { f } else { vec![f64::NAN; n] };
        let g = if g.len() == m { g } else { vec![f64::NAN; m] };
        let feasible = status == EvalStatus::Ok && is_feasible(&g, FEASIBILITY_TOL);
        let id = self.history.len();
        if status == EvalStatus::Ok {
            self.archive.push(ArchiveEntry {
                id,
                point: point.clone(),
                f: self.to_min(&f),
                g: g.clone(),
                feasible,
            });
        } else {
            self.log(format!("evaluation {id} failed; excluded from training"));
        }
        self.history.push(Record {
            id,
            origin,
            status,
            point,
            f,
            g,
            feasible,
        });
        if self.history.len() == self.config.doe_size {
            self.log(format!("doe complete after {id} evaluations", id = self.history.len()));
        }
        if self.history.len() == self.config.budget {
            self.log("budget reached".to_string());
        }
        status
    }

    /// Evaluated front, NSGA-II front on the final surrogates and their
    /// comparison. Works in any phase; deterministic.
    pub fn finalize(&self, nsga2: &Nsga2Config) -> RunOutputs {
        let space = &self.config.space;
        let mut warnings = Vec::new();
        let from_min = |f: &[f64]| -> Vec<f64> {
            f.iter().zip(&self.config.maximize).map(|(v, &mx)| if mx { -v } else { *v }).collect()
        };
        let pf_database: Vec<FrontPoint> = self
            .archive
            .nondominated()
            .iter()
            .map(|&i| {
                let e = &self.archive.entries()[i];
                FrontPoint {
                    id: e.id,
                    point: e.point.clone(),
                    f: from_min(&e.f),
                    g: e.g.clone(),
                }
            })
            .collect();
        if pf_database.is_empty() {
            warnings.push("no feasible evaluated point: pf_database is empty".to_string());
        }
        let ok = self.successful();
        let x: Vec<Vec<f64>> = ok.iter().map(|r| space.encode(&r.point).expect("valid").0).collect();
        let f: Vec<Vec<f64>> = ok.iter().map(|r| self.to_min(&r.f)).collect();
        let g: Vec<Vec<f64>> = ok.iter().map(|r| r.g.clone()).collect();
        let models = if x.len() >= 2 {
            match MultiOutputSurrogate::fit(&x, &f, &g, &self.config.kernel, derive_seed(self.config.seed, 5, 0)) {
                Ok(m) => Some(m),
                Err(e) => {
                    warnings.push(format!("final surrogate fit failed: {e}"));
                    None
                }
            }
        } else {
            warnings.push("fewer than two successful evaluations: no predicted front".to_string());
            None
        };
        let predicted_min: Vec<(MixedPoint, Vec<f64>, Vec<f64>)> = match &models {
            Some(models) => {
                let res = evolve(space, nsga2, |_, v| models.predict_means(v));
                res.archive
                    .nondominated()
                    .iter()
                    .map(|&i| {
                        let e = &res.archive.entries()[i];
                        (e.point.clone(), e.f.clone(), e.g.clone())
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        if models.is_some() && predicted_min.is_empty() {
            warnings.push("no surrogate-feasible point found: predicted_pf is empty".to_string());
        }
        let predicted_pf: Vec<FrontPoint> = predicted_min
            .iter()
            .enumerate()
            .map(|(id, (p, f, g))| FrontPoint {
                id,
                point: p.clone(),
                f: from_min(f),
                g: g.clone(),
            })
            .collect();

        let db_min: Vec<Vec<f64>> = self.archive.front();
        let pred: Vec<Vec<f64>> = predicted_min.iter().map(|(_, f, _)| f.clone()).collect();
        let standardizer = Standardizer::fit(&f);
        let distances = pred
            .iter()
            .map(|p| match &standardizer {
                Some(s) => {
                    let zp = s.apply(p);
                    db_min
                        .iter()
                        .map(|q| {
                            let zq = s.apply(q);
                            zp.iter().zip(&zq).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                        })
                        .fold(f64::INFINITY, f64::min)
                }
                None => f64::INFINITY,
            })
            .collect();
        let merged: Vec<Vec<f64>> = db_min.iter().chain(&pred).cloned().collect();
        let survivors = nondominated_filter(&merged);
        let proximity = ProximityReport {
            distances,
            database_total: db_min.len(),
            database_survivors: survivors.iter().filter(|&&i| i < db_min.len()).count(),
            predicted_total: pred.len(),
            predicted_survivors: survivors.iter().filter(|&&i| i >= db_min.len()).count(),
        };
        RunOutputs {
            pf_database,
            predicted_pf,
            proximity,
            reference_point: self.archive.ref_point().map(|r| r.to_vec()),
            warnings,
        }
    }
}

/// Evaluation callback result: `Err` marks the point as failed.
pub type EvalResult = Result<(Vec<f64>, Vec<f64>), String>;

/// Drives ask/tell to the budget, then finalizes.
pub fn run<E>(config: RunConfig, mut evaluate: E) -> Result<(Run, RunOutputs), DriverError>
where
    E: FnMut(&MixedPoint) -> EvalResult,
{
    let mut state = Run::new(config)?;
    while state.phase() != Phase::Done {
        let p = state.ask()?;
        match evaluate(&p) {
            Ok((f, g)) => state.tell(&p, f, g, EvalStatus::Ok)?,
            Err(msg) => {
                state.log(format!("evaluator error: {msg}"));
                state.tell(&p, vec![], vec![], EvalStatus::Failed)?
            }
        };
    }
    let nsga2 = state.config.nsga2;
    let outputs = state.finalize(&nsga2);
    Ok((state, outputs))
}

#[cfg(test)]
mod tests;
