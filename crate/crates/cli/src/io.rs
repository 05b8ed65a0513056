//! Plain CSV tables in and out.
//!
//! Input tables are comma separated with an optional header row (a first row
//! with no numeric cell). Labels are written one-based and read back
//! zero-based.

use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use cpclust::{EpiCounts, Series};

fn open(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))
}

/// Raw rows of a table, header removed, every cell present and non-empty.
fn read_cells(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for (i, rec) in open(path)?.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: malformed line {}", path.display(), i + 1))?;
        let cells: Vec<String> = rec.iter().map(str::to_owned).collect();
        if cells.len() == 1 && cells[0].is_empty() {
            continue;
        }
        if i == 0 && cells.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let width = rows[0].len();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            bail!(
                "{}: ragged table, data row {} has {} cells, expected {width}",
                path.display(),
                r + 1,
                row.len()
            );
        }
        if let Some(c) = row.iter().position(|c| c.is_empty()) {
            bail!("{}: empty cell at data row {}, column {}", path.display(), r + 1, c + 1);
        }
    }
    Ok(rows)
}

/// A numeric table; NaN and infinite cells are rejected.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let rows = read_cells(path)?;
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(c, cell)| match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(anyhow!(
                        "{}: non-numeric cell {cell:?} at data row {}, column {}",
                        path.display(),
                        r + 1,
                        c + 1
                    )),
                })
                .collect()
        })
        .collect()
}

/// A `d × T` table as one series; rows are dimensions.
pub fn read_series(path: &Path) -> Result<Series> {
    let rows = read_table(path)?;
    Series::from_rows(&rows).with_context(|| format!("{}", path.display()))
}

/// Every row of an `n × T` table as a univariate series.
pub fn read_series_rows(path: &Path) -> Result<Vec<Series>> {
    read_table(path)?
        .into_iter()
        .enumerate()
        .map(|(r, row)| Series::univariate(row).with_context(|| format!("{}: data row {}", path.display(), r + 1)))
        .collect()
}

/// One multivariate series per file, each `d × T`.
pub fn read_array(paths: &[impl AsRef<Path>]) -> Result<Vec<Series>> {
    let series = paths.iter().map(|p| read_series(p.as_ref())).collect::<Result<Vec<_>>>()?;
    if let Some(first) = series.first() {
        for (p, s) in paths.iter().zip(&series) {
            if s.dim() != first.dim() || s.len() != first.len() {
                bail!(
                    "{}: shape {}×{} differs from the first input ({}×{})",
                    p.as_ref().display(),
                    s.dim(),
                    s.len(),
                    first.dim(),
                    first.len()
                );
            }
        }
    }
    Ok(series)
}

fn count_cell(path: &Path, cell: &str, r: usize, c: usize) -> Result<u64> {
    if let Ok(v) = cell.parse::<u64>() {
        return Ok(v);
    }
    match cell.parse::<f64>() {
        Ok(v) if v < 0.0 => bail!("{}: negative count {cell} at data row {r}, column {c}", path.display()),
        Ok(v) if v.fract() == 0.0 && v.is_finite() => Ok(v as u64),
        _ => bail!("{}: count {cell:?} at data row {r}, column {c} is not a non-negative integer", path.display()),
    }
}

fn count_rows(path: &Path) -> Result<Vec<Vec<u64>>> {
    read_cells(path)?
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(c, cell)| count_cell(path, cell, r + 1, c + 1))
                .collect()
        })
        .collect()
}

/// Daily counts stored as a single row or a single column.
pub fn read_counts(path: &Path) -> Result<EpiCounts> {
    let rows = count_rows(path)?;
    let counts = if rows.len() == 1 {
        rows.into_iter().next().unwrap()
    } else if rows[0].len() == 1 {
        rows.into_iter().map(|r| r[0]).collect()
    } else {
        bail!(
            "{}: expected a single row or column of counts, found {}×{}",
            path.display(),
            rows.len(),
            rows[0].len()
        );
    };
    EpiCounts::new(counts).with_context(|| format!("{}", path.display()))
}

/// Each row of an `n × T` table as the daily counts of one population.
pub fn read_count_rows(path: &Path) -> Result<Vec<EpiCounts>> {
    count_rows(path)?
        .into_iter()
        .enumerate()
        .map(|(r, row)| EpiCounts::new(row).with_context(|| format!("{}: data row {}", path.display(), r + 1)))
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Allocations, one per row, shifted to one-based labels.
pub fn write_labels(path: &Path, draws: &[Vec<usize>]) -> Result<()> {
    let mut w = writer(path)?;
    for d in draws {
        w.write_record(d.iter().map(|l| (l + 1).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<Vec<usize>>> {
    let rows = read_cells(path)?;
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .map(|cell| match cell.parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(anyhow!("{}: bad label {cell:?} at row {}", path.display(), r + 1)),
                })
                .collect()
        })
        .collect()
}

/// A named column of a chains file.
#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Real(Vec<f64>),
    Flag(Vec<bool>),
    Index(Vec<usize>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Real(v) => v.len(),
            Column::Flag(v) => v.len(),
            Column::Index(v) => v.len(),
        }
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Real(v) => v[i].to_string(),
            Column::Flag(v) => u8::from(v[i]).to_string(),
            Column::Index(v) => v[i].to_string(),
        }
    }
}

/// Columns with a header row. Reals are printed in shortest round-trip form.
pub fn write_columns(path: &Path, columns: &[(String, Column)]) -> Result<()> {
    let n = columns.first().map_or(0, |(_, c)| c.len());
    if let Some((name, _)) = columns.iter().find(|(_, c)| c.len() != n) {
        bail!("column {name} has a different length");
    }
    let mut w = writer(path)?;
    w.write_record(columns.iter().map(|(h, _)| h.as_str()))?;
    for i in 0..n {
        w.write_record(columns.iter().map(|(_, c)| c.cell(i)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a file written by [`write_columns`]. Column kinds follow the
/// header names: `iteration` and `*_index` are indices, `*_accepted` flags.
pub fn read_columns(path: &Path) -> Result<Vec<(String, Column)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut cols: Vec<(String, Column)> = headers
        .iter()
        .map(|h| {
            let c = if h == "iteration" || h.ends_with("_index") {
                Column::Index(vec![])
            } else if h.ends_with("_accepted") {
                Column::Flag(vec![])
            } else {
                Column::Real(vec![])
            };
            (h.clone(), c)
        })
        .collect();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), r + 1))?;
        for ((name, col), cell) in cols.iter_mut().zip(rec.iter()) {
            let bad = || anyhow!("{}: bad {name} value {cell:?} at row {}", path.display(), r + 1);
            match col {
                Column::Real(v) => v.push(cell.parse().map_err(|_| bad())?),
                Column::Index(v) => v.push(cell.parse().map_err(|_| bad())?),
                Column::Flag(v) => v.push(match cell {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                }),
            }
        }
    }
    Ok(cols)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: malformed JSON", path.display()))
}
