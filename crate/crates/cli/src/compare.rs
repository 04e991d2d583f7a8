use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use reciprocity::oracle::kappa_one_gap;
use reciprocity::{Error, Result};

use crate::run::{load_oracle, load_snapshots, load_tables, read_csv, seed_dir};

#[derive(Clone, Debug, PartialEq)]
pub struct SeedComparison {
    pub seed: u64,
    /// `max |Q_a − Q_b|` over agents, states and actions of the final tables.
    pub final_gap: f64,
    /// `(epoch, gap)` at every snapshot epoch present in both runs.
    pub gap_by_epoch: Vec<(usize, f64)>,
    pub consensus: (Option<f64>, Option<f64>),
    /// `max_i ‖Q_i − Q*‖∞ / ‖Q*‖∞` of the final tables of each run.
    pub optimality: (Option<f64>, Option<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub seeds: Vec<SeedComparison>,
}

fn seeds_of(dir: &Path) -> Result<BTreeSet<u64>> {
    let mut out = BTreeSet::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        if let Some(n) = name.to_str().and_then(|s| s.strip_prefix("seed-")) {
            if let Ok(seed) = n.parse() {
                out.insert(seed);
            }
        }
    }
    Ok(out)
}

fn last_column(dir: &Path, seed: u64, column: &str) -> Result<Option<f64>> {
    let (header, rows) = read_csv(&seed_dir(dir, seed).join("metrics.csv"))?;
    let Some(c) = header.iter().position(|h| h == column) else {
        return Ok(None);
    };
    Ok(rows.last().and_then(|r| r[c]))
}

fn relative_optimality(dir: &Path, seed: u64) -> Result<Option<f64>> {
    let path = dir.join("oracle.json");
    if !path.exists() {
        return Ok(None);
    }
    let oracle = load_oracle(&path)?;
    let tables = load_tables(&seed_dir(dir, seed).join("qtables.json"))?;
    Ok(Some(oracle.max_gap(&tables)? / oracle.sup_norm().max(f64::MIN_POSITIVE)))
}

/// Pairs the seeds two tabular runs share.
pub fn compare(a: &Path, b: &Path) -> Result<CompareReport> {
    let (sa, sb) = (seeds_of(a)?, seeds_of(b)?);
    let shared: Vec<u64> = sa.intersection(&sb).copied().collect();
    if shared.is_empty() {
        return Err(Error::Usage(format!("{} and {} share no seed", a.display(), b.display())));
    }
    let mut seeds = Vec::with_capacity(shared.len());
    for seed in shared {
        let (da, db) = (seed_dir(a, seed), seed_dir(b, seed));
        let (qa, qb) = (da.join("qtables.json"), db.join("qtables.json"));
        if !qa.exists() || !qb.exists() {
            return Err(Error::Usage("compare needs tabular runs with Q-table dumps".into()));
        }
        let final_gap = kappa_one_gap(&load_tables(&qa)?, &load_tables(&qb)?)?;
        let mut gap_by_epoch = Vec::new();
        let (pa, pb) = (da.join("snapshots.json"), db.join("snapshots.json"));
        if pa.exists() && pb.exists() {
            let snaps_b = load_snapshots(&pb)?;
            for (epoch, tables) in load_snapshots(&pa)? {
                if let Some((_, other)) = snaps_b.iter().find(|(e, _)| *e == epoch) {
                    gap_by_epoch.push((epoch, kappa_one_gap(&tables, other)?));
                }
            }
        }
        seeds.push(SeedComparison {
            seed,
            final_gap,
            gap_by_epoch,
            consensus: (last_column(a, seed, "consensus_error")?, last_column(b, seed, "consensus_error")?),
            optimality: (relative_optimality(a, seed)?, relative_optimality(b, seed)?),
        });
    }
    Ok(CompareReport { seeds })
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into())
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed\tkappa_gap\tconsensus_a\tconsensus_b\toptimality_a\toptimality_b")?;
        for s in &self.seeds {
            writeln!(
                f,
                "{}\t{:.6e}\t{}\t{}\t{}\t{}",
                s.seed,
                s.final_gap,
                cell(s.consensus.0),
                cell(s.consensus.1),
                cell(s.optimality.0),
                cell(s.optimality.1)
            )?;
        }
        let epochs: BTreeSet<usize> = self.seeds.iter().flat_map(|s| s.gap_by_epoch.iter().map(|g| g.0)).collect();
        if !epochs.is_empty() {
            writeln!(f, "epoch\tmean_kappa_gap")?;
            for e in epochs {
                let gaps: Vec<f64> = self
                    .seeds
                    .iter()
                    .filter_map(|s| s.gap_by_epoch.iter().find(|g| g.0 == e).map(|g| g.1))
                    .collect();
                writeln!(f, "{e}\t{:.6e}", gaps.iter().sum::<f64>() / gaps.len() as f64)?;
            }
        }
        Ok(())
    }
}
