use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{DriverError, EvalStatus, FrontPoint, Origin, Record, Run, RunConfig, RunOutputs};
use crate::design_space::{DesignSpace, MixedPoint};

/// Files written by [`write_artifacts`].
#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub config: PathBuf,
    pub history: PathBuf,
    pub pf_database: PathBuf,
    pub predicted_pf: PathBuf,
    pub proximity: PathBuf,
    pub log: PathBuf,
}

impl ArtifactPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            config: dir.join("config.json"),
            history: dir.join("history.csv"),
            pf_database: dir.join("pf_database.csv"),
            predicted_pf: dir.join("predicted_pf.csv"),
            proximity: dir.join("proximity.csv"),
            log: dir.join("run.log"),
        }
    }
}

fn point_cells(space: &DesignSpace, p: &MixedPoint) -> Vec<String> {
    p.values.iter().enumerate().map(|(i, v)| space.format_value(i, v)).collect()
}

fn floats(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| x.to_string())
}

fn variable_names(space: &DesignSpace) -> impl Iterator<Item = String> + '_ {
    space.variables().iter().map(|v| v.name.clone())
}

/// `id, origin, status, <variables>, <objectives>, <constraints>, feasible`.
pub fn write_history<W: Write>(run: &Run, out: W) -> Result<(), DriverError> {
    let cfg = run.config();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "origin".into(), "status".into()];
    header.extend(variable_names(&cfg.space));
    header.extend(cfg.objective_names.iter().cloned());
    header.extend(cfg.constraint_names.iter().cloned());
    header.push("feasible".into());
    w.write_record(&header)?;
    for r in run.history() {
        let mut row = vec![r.id.to_string(), r.origin.as_str().into(), r.status.as_str().into()];
        row.extend(point_cells(&cfg.space, &r.point));
        row.extend(floats(&r.f));
        row.extend(floats(&r.g));
        row.push(r.feasible.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a history CSV written by [`write_history`]. Truncated files (any
/// prefix of whole rows) are accepted.
pub fn read_history<R: Read>(config: &RunConfig, input: R) -> Result<Vec<Record>, DriverError> {
    let space = &config.space;
    let (n, m) = (config.n_objectives(), config.n_constraints());
    let d = space.len();
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() != 4 + d + n + m {
        return Err(DriverError::History(format!(
            "expected {} columns, found {}",
            4 + d + n + m,
            header.len()
        )));
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |what: &str| DriverError::History(format!("row {}: invalid {what}", line + 1));
        let id: usize = row[0].parse().map_err(|_| bad("id"))?;
        let origin = match &row[1] {
            "doe" => Origin::Doe,
            "infill" => Origin::Infill,
            _ => return Err(bad("origin")),
        };
        let status = match &row[2] {
            "ok" => EvalStatus::Ok,
            "failed" => EvalStatus::Failed,
            _ => return Err(bad("status")),
        };
        let values = (0..d).map(|i| space.parse_value(i, &row[3 + i])).collect::<Result<Vec<_>, _>>()?;
        let point = space.point(values)?;
        let num = |k: usize| -> Result<f64, DriverError> { row[k].trim().parse::<f64>().map_err(|_| bad("number")) };
        let f = (0..n).map(|k| num(3 + d + k)).collect::<Result<Vec<_>, _>>()?;
        let g = (0..m).map(|k| num(3 + d + n + k)).collect::<Result<Vec<_>, _>>()?;
        let feasible = row[3 + d + n + m].parse().map_err(|_| bad("feasible flag"))?;
        out.push(Record {
            id,
            origin,
            status,
            point,
            f,
            g,
            feasible,
        });
    }
    Ok(out)
}

fn write_front<W: Write>(cfg: &RunConfig, front: &[FrontPoint], out: W) -> Result<(), DriverError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(variable_names(&cfg.space));
    header.extend(cfg.objective_names.iter().cloned());
    header.extend(cfg.constraint_names.iter().cloned());
    w.write_record(&header)?;
    for p in front {
        let mut row = vec![p.id.to_string()];
        row.extend(point_cells(&cfg.space, &p.point));
        row.extend(floats(&p.f));
        row.extend(floats(&p.g));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the config snapshot, history, both fronts, the proximity table and
/// the run log into `dir` (created if missing).
pub fn write_artifacts(dir: &Path, run: &Run, outputs: &RunOutputs) -> Result<ArtifactPaths, DriverError> {
    fs::create_dir_all(dir)?;
    let paths = ArtifactPaths::in_dir(dir);
    let cfg = run.config();
    fs::write(&paths.config, cfg.to_json())?;
    write_history(run, fs::File::create(&paths.history)?)?;
    write_front(cfg, &outputs.pf_database, fs::File::create(&paths.pf_database)?)?;
    write_front(cfg, &outputs.predicted_pf, fs::File::create(&paths.predicted_pf)?)?;
    {
        let mut w = csv::Writer::from_writer(fs::File::create(&paths.proximity)?);
        w.write_record(["predicted_id", "distance_to_database"])?;
        for (i, d) in outputs.proximity.distances.iter().enumerate() {
            w.write_record([i.to_string(), d.to_string()])?;
        }
        w.flush()?;
    }
    let mut log = fs::File::create(&paths.log)?;
    for line in run.log_lines() {
        writeln!(log, "{line}")?;
    }
    for line in &outputs.warnings {
        writeln!(log, "warning: {line}")?;
    }
    writeln!(
        log,
        "pf_database: {} points, predicted_pf: {} points",
        outputs.pf_database.len(),
        outputs.predicted_pf.len()
    )?;
    writeln!(log, "{}", outputs.proximity.summary())?;
    Ok(paths)
}
