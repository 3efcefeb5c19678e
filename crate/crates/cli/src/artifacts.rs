//! Reads back the CSV artifacts of a previous run for re-rendering.

use anyhow::{bail, Context, Result};
use flexfor::classify::{Classification, ClassifiedScenario};
use flexfor::report::DensitySeries;
use flexfor::stats::DensityBin;
use std::path::{Path, PathBuf};

/// Finds `feeder_N<k>` directories below `dir`, sorted by `k`.
pub fn find_feeder_dirs(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let entries =
        std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut feeders = Vec::new();
    for entry in entries {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name();
        let Some(rest) = name.to_str().and_then(|s| s.strip_prefix("feeder_N")) else {
            continue;
        };
        let Ok(n) = rest.parse::<usize>() else {
            continue;
        };
        feeders.push((n, entry.path()));
    }
    feeders.sort_unstable_by_key(|&(n, _)| n);
    Ok(feeders)
}

/// Parses a `classified*.csv` file back into scenario rows.
pub fn read_classified_csv(path: &Path) -> Result<Vec<ClassifiedScenario>> {
    let text = read(path)?;
    let mut rows = Vec::new();
    for (number, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            bail!(
                "{}:{}: expected 11 columns, got {}",
                path.display(),
                number + 1,
                cols.len()
            );
        }
        let classification = if cols[9] == "unclassified" {
            None
        } else {
            Some(Classification {
                volt_ok: parse(cols[6], path, number)?,
                line_ok: parse(cols[7], path, number)?,
                inverter_ok: parse(cols[8], path, number)?,
            })
        };
        rows.push(ClassifiedScenario {
            scenario_id: parse(cols[0], path, number)?,
            p_ipf_kw: parse(cols[1], path, number)?,
            q_ipf_kvar: parse(cols[2], path, number)?,
            min_v_pu: parse(cols[3], path, number)?,
            max_v_pu: parse(cols[4], path, number)?,
            max_line_loading_pct: parse(cols[5], path, number)?,
            classification,
        });
    }
    Ok(rows)
}

/// Parses a `density.csv` file into an overlay series for feeder `n`.
pub fn read_density_series(n: usize, path: &Path) -> Result<DensitySeries> {
    let text = read(path)?;
    let mut bins = Vec::new();
    for (number, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            bail!(
                "{}:{}: expected 4 columns, got {}",
                path.display(),
                number + 1,
                cols.len()
            );
        }
        bins.push(DensityBin {
            left: parse(cols[0], path, number)?,
            right: parse(cols[1], path, number)?,
            empirical: parse(cols[2], path, number)?,
            predicted: parse(cols[3], path, number)?,
        });
    }
    if bins.is_empty() {
        bail!("{}: no density bins", path.display());
    }
    // The stored prediction is sampled at bin midpoints, which is plenty
    // for a dashed overlay curve.
    let curve = bins
        .iter()
        .map(|b| (0.5 * (b.left + b.right), b.predicted))
        .collect();
    Ok(DensitySeries {
        label: format!("N={n}"),
        bins,
        curve,
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse<T: std::str::FromStr>(value: &str, path: &Path, line: usize) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value
        .parse()
        .with_context(|| format!("{}:{}: invalid value {value:?}", path.display(), line + 1))
}
