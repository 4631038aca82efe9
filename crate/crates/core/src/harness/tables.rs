//! Reproduction of the reference iteration-count tables and the diff
//! against the embedded reference values.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{ExampleId, ExperimentConfig, MethodConfig, OneOrMany, ProblemConfig, RunConfig};
use super::run::{ResultRow, Runner};
use crate::error::{Error, Result};
use crate::mesh::{BcSpec, Mesh};

/// Relative slack for large counts: a cell also passes when the deviation
/// is at most this fraction of the reference value.
pub const RELATIVE_TOLERANCE: f64 = 0.1;

pub const TABLE_IDS: [&str; 14] = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "r1", "r2", "r3", "r4"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRow {
    pub label: String,
    pub method: MethodConfig,
    /// `iters[i][j]` at `levels[i]`, `taus[j]`; `None` is no convergence.
    pub iters: Vec<Vec<Option<u32>>>,
    #[serde(default)]
    pub factors: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTable {
    pub id: String,
    pub title: String,
    pub example: ExampleId,
    pub bc: BcSpec,
    pub levels: Vec<u32>,
    pub taus: Vec<f64>,
    pub source: String,
    /// Allowed absolute deviation of the seed-averaged count.
    pub tolerance: u32,
    pub rows: Vec<ReferenceRow>,
}

fn raw(id: &str) -> Option<&'static str> {
    Some(match id {
        "1" => include_str!("../../data/table1.json"),
        "2" => include_str!("../../data/table2.json"),
        "3" => include_str!("../../data/table3.json"),
        "4" => include_str!("../../data/table4.json"),
        "5" => include_str!("../../data/table5.json"),
        "6" => include_str!("../../data/table6.json"),
        "7" => include_str!("../../data/table7.json"),
        "8" => include_str!("../../data/table8.json"),
        "9" => include_str!("../../data/table9.json"),
        "10" => include_str!("../../data/table10.json"),
        "r1" => include_str!("../../data/table_r1.json"),
        "r2" => include_str!("../../data/table_r2.json"),
        "r3" => include_str!("../../data/table_r3.json"),
        "r4" => include_str!("../../data/table_r4.json"),
        _ => return None,
    })
}

impl ReferenceTable {
    pub fn load(id: &str) -> Result<ReferenceTable> {
        let id = id.trim().to_ascii_lowercase();
        let text = raw(&id).ok_or_else(|| Error::UnknownTable(id.clone()))?;
        let t: ReferenceTable = serde_json::from_str(text)?;
        Ok(t)
    }

    pub fn row(&self, label: &str) -> Option<&ReferenceRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    fn config(&self, row: &ReferenceRow, levels: Vec<u32>, run: RunConfig) -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemConfig {
                example: self.example,
                bc: self.bc,
                tau: OneOrMany::Many(self.taus.clone()),
                level: OneOrMany::Many(levels),
                coarse_level: 1,
                ordering: None,
                coefficients: None,
            },
            method: OneOrMany::One(row.method.clone()),
            run,
            output: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableOptions {
    pub run: RunConfig,
    /// Restrict to these levels (default: all of the table's levels).
    pub levels: Option<Vec<u32>>,
    /// Restrict to these row labels.
    pub rows: Option<Vec<String>>,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            run: RunConfig::default(),
            levels: None,
            rows: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub row: String,
    pub level: u32,
    pub h: f64,
    pub tau: f64,
    /// `Some(None)` is a reference "no convergence"; `None` when the
    /// reference has no such cell.
    pub reference: Option<Option<u32>>,
    pub reference_factor: Option<f64>,
    pub iters_mean: f64,
    /// Seed-averaged count rounded to the nearest integer, if all seeds
    /// converged.
    pub iters: Option<u32>,
    pub converged: bool,
    pub conv_factor: f64,
    pub wall_ms: f64,
    pub deviation: Option<i64>,
    pub within: bool,
}

fn judge(reference: Option<Option<u32>>, measured: Option<u32>, tol: u32) -> (Option<i64>, bool) {
    match (reference, measured) {
        (None, _) => (None, true),
        (Some(Some(r)), Some(m)) => {
            let d = i64::from(m) - i64::from(r);
            let allowed = f64::from(tol).max(RELATIVE_TOLERANCE * f64::from(r));
            (Some(d), (d.unsigned_abs() as f64) <= allowed)
        }
        (Some(None), None) => (None, true),
        (Some(Some(_)), None) | (Some(None), Some(_)) => (None, false),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableResult {
    pub id: String,
    pub title: String,
    pub tolerance: u32,
    pub cells: Vec<CellResult>,
    #[serde(skip)]
    pub runs: Vec<ResultRow>,
}

impl TableResult {
    pub fn all_within(&self) -> bool {
        self.cells.iter().all(|c| c.within)
    }

    pub fn n_within(&self) -> usize {
        self.cells.iter().filter(|c| c.within).count()
    }

    pub fn cell(&self, row: &str, level: u32, tau: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.row == row && c.level == level && (c.tau / tau - 1.0).abs() < 1e-9)
    }

    pub fn row_cells(&self, row: &str) -> Vec<&CellResult> {
        self.cells.iter().filter(|c| c.row == row).collect()
    }

    /// Total solve time of a row at one level.
    pub fn row_wall_ms(&self, row: &str, level: u32) -> f64 {
        self.cells
            .iter()
            .filter(|c| c.row == row && c.level == level)
            .map(|c| c.wall_ms)
            .sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "table", "row", "h", "tau", "reference", "measured", "iters_mean", "deviation", "within", "reference_factor",
            "conv_factor", "wall_ms",
        ])
        .map_err(csv_err)?;
        let count = |c: Option<u32>| c.map_or("*".to_string(), |v| v.to_string());
        for c in &self.cells {
            wr.write_record([
                self.id.clone(),
                c.row.clone(),
                format!("{}", c.h),
                format!("{:e}", c.tau),
                c.reference.map_or("-".to_string(), count),
                count(c.iters),
                format!("{:.2}", c.iters_mean),
                c.deviation.map_or("-".to_string(), |d| d.to_string()),
                c.within.to_string(),
                c.reference_factor.map_or("-".to_string(), |f| f.to_string()),
                format!("{:.4}", c.conv_factor),
                format!("{:.3}", c.wall_ms),
            ])
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Text grid: one line per (row, h), cells `measured(reference)`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "table {}: {}", self.id, self.title);
        let mut taus: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !taus.iter().any(|t| *t == c.tau) {
                taus.push(c.tau);
            }
        }
        let _ = write!(out, "{:<22}{:>8}", "row", "h");
        for t in &taus {
            let _ = write!(out, "{:>12}", format!("{t:.0e}"));
        }
        out.push('\n');
        let mut keys: Vec<(String, u32)> = Vec::new();
        for c in &self.cells {
            if !keys.iter().any(|(r, l)| *r == c.row && *l == c.level) {
                keys.push((c.row.clone(), c.level));
            }
        }
        for (row, level) in keys {
            let _ = write!(out, "{:<22}{:>8}", row, format!("1/{}", 1u64 << level));
            for t in &taus {
                let cell = self.cell(&row, level, *t);
                let s = cell.map_or(String::new(), |c| {
                    let m = c.iters.map_or("*".into(), |v| v.to_string());
                    let r = match c.reference {
                        Some(Some(v)) => v.to_string(),
                        Some(None) => "*".into(),
                        None => "-".into(),
                    };
                    format!("{m}({r}){}", if c.within { "" } else { "!" })
                });
                let _ = write!(out, "{s:>12}");
            }
            out.push('\n');
        }
        let _ = write!(
            out,
            "{}/{} cells within tolerance (±{} or {:.0}%)",
            self.n_within(),
            self.cells.len(),
            self.tolerance,
            RELATIVE_TOLERANCE * 100.0
        );
        out
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

/// Runs the full grid of a reference table (or the selected part of it)
/// and compares seed-averaged counts with the reference.
pub fn reproduce_table(id: &str, opts: &TableOptions) -> Result<TableResult> {
    let table = ReferenceTable::load(id)?;
    let mut runner = Runner::new();
    reproduce_with(&table, opts, &mut runner)
}

pub fn reproduce_with(table: &ReferenceTable, opts: &TableOptions, runner: &mut Runner) -> Result<TableResult> {
    opts.run.validate()?;
    let levels: Vec<u32> = match &opts.levels {
        Some(ls) => table.levels.iter().copied().filter(|l| ls.contains(l)).collect(),
        None => table.levels.clone(),
    };
    if levels.is_empty() {
        return Err(Error::config("levels", format!("none of the requested levels is in table {}", table.id)));
    }
    let mut cells = Vec::new();
    let mut runs = Vec::new();
    for row in &table.rows {
        if let Some(sel) = &opts.rows {
            if !sel.iter().any(|s| s == &row.label) {
                continue;
            }
        }
        let cfg = table.config(row, levels.clone(), opts.run.clone());
        let rows = runner.run(&cfg)?;
        let n_seeds = opts.run.seeds.len();
        for (k, chunk) in rows.chunks(n_seeds).enumerate() {
            let level = levels[k / table.taus.len()];
            let li = table.levels.iter().position(|&l| l == level).unwrap_or(0);
            let ti = k % table.taus.len();
            let converged = chunk.iter().all(|r| r.converged);
            let mean = |f: &dyn Fn(&ResultRow) -> f64| chunk.iter().map(f).sum::<f64>() / n_seeds as f64;
            let iters_mean = mean(&|r| r.iters as f64);
            let iters = converged.then(|| iters_mean.round() as u32);
            let reference = row.iters.get(li).and_then(|v| v.get(ti)).copied();
            let (deviation, within) = judge(reference, iters, table.tolerance);
            cells.push(CellResult {
                row: row.label.clone(),
                level,
                h: Mesh::lshape_h(level),
                tau: table.taus[ti],
                reference,
                reference_factor: row.factors.as_ref().and_then(|f| f.get(li)).and_then(|v| v.get(ti)).copied(),
                iters_mean,
                iters,
                converged,
                conv_factor: mean(&|r| r.conv_factor),
                wall_ms: mean(&|r| r.wall_ms),
                deviation,
                within,
            });
        }
        runs.extend(rows);
    }
    Ok(TableResult {
        id: table.id.clone(),
        title: table.title.clone(),
        tolerance: table.tolerance,
        cells,
        runs,
    })
}
