//! Objective-pair front tables for external plotting.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use mixbo::driver::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrontSelection {
    Database,
    Predicted,
    Both,
}

/// Objective columns of a front CSV (`id, <variables>, <objectives>, ...`).
fn read_front(path: &Path, d: usize, n: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let f = (0..n)
            .map(|k| row[1 + d + k].trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: bad objective value", path.display()))?;
        out.push((row[0].to_string(), f));
    }
    Ok(out)
}

fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

pub fn pair_file_name(i: usize, j: usize, names: &[String]) -> String {
    format!("pair_{}_{}__{}__vs__{}.csv", i + 1, j + 1, file_safe(&names[i]), file_safe(&names[j]))
}

/// Writes one file per objective pair `i < j`: `front, id, f_i, f_j`.
pub fn write_pairs(dir: &Path, out: &Path, mode: FrontSelection) -> Result<Vec<PathBuf>> {
    let cfg_path = dir.join("config.json");
    let text = std::fs::read_to_string(&cfg_path).with_context(|| format!("reading {}", cfg_path.display()))?;
    let cfg = RunConfig::from_json(&text)?;
    let (d, n) = (cfg.space.len(), cfg.n_objectives());
    let mut fronts = Vec::new();
    if mode != FrontSelection::Predicted {
        fronts.push(("database", read_front(&dir.join("pf_database.csv"), d, n)?));
    }
    if mode != FrontSelection::Database {
        fronts.push(("predicted", read_front(&dir.join("predicted_pf.csv"), d, n)?));
    }
    std::fs::create_dir_all(out)?;
    let names = &cfg.objective_names;
    let mut files = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let path = out.join(pair_file_name(i, j, names));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["front", "id", names[i].as_str(), names[j].as_str()])?;
            for (label, rows) in &fronts {
                for (id, f) in rows {
                    w.write_record([label.to_string(), id.clone(), f[i].to_string(), f[j].to_string()])?;
                }
            }
            w.flush()?;
            files.push(path);
        }
    }
    Ok(files)
}
