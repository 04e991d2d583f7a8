use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use reciprocity::deep::{train_deep, DeepEpoch, DeepLog};
use reciprocity::mdp::ModelFile;
use reciprocity::tabular::{train_tabular, EpochMetrics};
use reciprocity::{EnvSpec, Error, Learner, OracleQ, QTable, Result};

use crate::config::{Algorithm, ExperimentConfig};

pub const TABULAR_COLUMNS: [&str; 6] = ["epoch", "mean_return", "consensus_error", "oracle_gap", "policy_mse", "min_visits"];
pub const DEEP_COLUMNS: [&str; 4] = ["epoch", "return", "td_loss", "actor_grad_norm"];

/// Seventeen significant digits; `None` is an empty cell.
pub fn fmt_float(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

pub fn seed_dir(run_dir: &Path, seed: u64) -> PathBuf {
    run_dir.join(format!("seed-{seed}"))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Usage(format!("csv: {other:?}")),
    }
}

/// Rows of a metrics file as optional floats, header excluded.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(
            rec.iter()
                .map(|c| if c.is_empty() { Ok(None) } else { c.parse::<f64>().map(Some) })
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?,
        );
    }
    Ok((header, rows))
}

fn tabular_row(m: &EpochMetrics<f64>) -> Vec<String> {
    vec![
        m.epoch.to_string(),
        fmt_float(m.mean_return),
        fmt_float(m.consensus_error),
        fmt_float(m.oracle_gap),
        fmt_float(m.policy_mse),
        m.min_visits.to_string(),
    ]
}

fn deep_row(m: &DeepEpoch<f64>) -> Vec<String> {
    vec![
        m.epoch.to_string(),
        fmt_float(m.mean_return),
        fmt_float(m.td_loss),
        fmt_float(m.actor_grad_norm),
    ]
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<()> {
    fs::write(path, serde_json::to_string(value)?)?;
    Ok(())
}

/// Per-epoch mean over seeds of every column but `epoch`; `min_visits` is
/// the minimum. Cells missing in some seed average over the others.
fn summarize(header: &[&str], per_seed: &[Vec<Vec<Option<f64>>>]) -> Vec<Vec<String>> {
    let n_rows = per_seed.iter().map(Vec::len).min().unwrap_or(0);
    (0..n_rows)
        .map(|r| {
            header
                .iter()
                .enumerate()
                .map(|(c, name)| {
                    let vals: Vec<f64> = per_seed.iter().filter_map(|s| s[r][c]).collect();
                    match *name {
                        "epoch" => format!("{}", vals[0] as u64),
                        "min_visits" => format!("{}", vals.iter().copied().fold(f64::INFINITY, f64::min) as u64),
                        _ if vals.is_empty() => String::new(),
                        _ => fmt_float(Some(vals.iter().sum::<f64>() / vals.len() as f64)),
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub seeds: Vec<u64>,
}

/// Executes one training run per seed under the resolved output directory.
///
/// Layout: `config.json`, `summary.csv`, optional `env.json` and
/// `oracle.json`, and per seed `seed-<n>/metrics.csv` plus the final
/// tables (`qtables.json`) or networks (`agents.json`).
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.resolve_output();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.json"), cfg.to_json())?;

    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let header: &[&str] = match cfg.algorithm {
        Algorithm::DeepPr => &DEEP_COLUMNS,
        _ => &TABULAR_COLUMNS,
    };
    for &seed in &cfg.seeds {
        let sd = seed_dir(&dir, seed);
        fs::create_dir_all(&sd)?;
        info!("{}: seed {seed}", cfg.id);
        let rows = match cfg.algorithm {
            Algorithm::Iql | Algorithm::TabularPr => run_tabular(cfg, seed, &dir, &sd)?,
            Algorithm::DeepPr => run_deep(cfg, seed, &sd)?,
        };
        write_csv(&sd.join("metrics.csv"), header, &rows)?;
        per_seed.push(read_csv(&sd.join("metrics.csv"))?.1);
    }
    write_csv(&dir.join("summary.csv"), header, &summarize(header, &per_seed))?;
    Ok(RunOutcome { dir, seeds: cfg.seeds.clone() })
}

fn run_tabular(cfg: &ExperimentConfig, seed: u64, dir: &Path, sd: &Path) -> Result<Vec<Vec<String>>> {
    let pr = cfg.pr.as_ref().expect("validated");
    let learner = match cfg.algorithm {
        Algorithm::Iql => Learner::Iql,
        _ => Learner::TabularPr,
    };
    let mut env = cfg.env.build::<f64>()?;
    let log = train_tabular(env.as_mut(), pr, learner, &cfg.tabular_options(), seed)?;
    if let (Some(model), EnvSpec::Digital { model_seed, .. }) = (env.model(), &cfg.env) {
        ModelFile::digital(model.clone(), *model_seed).save(&dir.join("env.json"))?;
    }
    if let Some(o) = &log.oracle {
        write_json(&dir.join("oracle.json"), o)?;
    }
    write_json(&sd.join("qtables.json"), &log.tables)?;
    if !log.snapshots.is_empty() {
        write_json(&sd.join("snapshots.json"), &log.snapshots)?;
    }
    Ok(log.epochs.iter().map(tabular_row).collect())
}

fn run_deep(cfg: &ExperimentConfig, seed: u64, sd: &Path) -> Result<Vec<Vec<String>>> {
    let EnvSpec::PointMass(env) = &cfg.env else {
        return Err(Error::config("env.kind", "deep_pr needs the point_mass env"));
    };
    let log: DeepLog<f64> = train_deep(env, cfg.deep.as_ref().expect("validated"), &cfg.deep_options(), seed)?;
    write_json(&sd.join("agents.json"), &log.agents)?;
    Ok(log.epochs.iter().map(deep_row).collect())
}

pub fn load_tables(path: &Path) -> Result<Vec<QTable<f64>>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn load_snapshots(path: &Path) -> Result<Vec<(usize, Vec<QTable<f64>>)>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn load_oracle(path: &Path) -> Result<OracleQ<f64>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let x = 0.1 + 0.2;
        let s = fmt_float(Some(x));
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(fmt_float(None), "");
    }

    #[test]
    fn summary_averages_and_takes_min_visits() {
        let a = vec![vec![Some(1.0), Some(2.0), None, Some(1.0), Some(0.0), Some(7.0)]];
        let b = vec![vec![Some(1.0), Some(4.0), None, None, Some(1.0), Some(5.0)]];
        let s = summarize(&TABULAR_COLUMNS, &[a, b]);
        assert_eq!(s[0][0], "1");
        assert_eq!(s[0][1].parse::<f64>().unwrap(), 3.0);
        assert_eq!(s[0][2], "");
        assert_eq!(s[0][3].parse::<f64>().unwrap(), 1.0);
        assert_eq!(s[0][5], "5");
    }
}
