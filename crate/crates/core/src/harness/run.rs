//! Executes experiment grids and writes CSV rows plus a JSON manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::assembly::DiscreteProblem;
use crate::block::{BlockOperator, Variant};
use crate::error::Result;
use crate::krylov::{gmres_solve, Preconditioner};
use crate::mesh::Mesh;
use crate::multigrid::{mg_solve, LevelStack, MGHierarchy};
use crate::report::SolveReport;

/// One solve: a `(level, tau, seed)` cell of an experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub example: String,
    pub bc: String,
    pub h: f64,
    pub tau: f64,
    pub method: String,
    pub precond: String,
    pub cycle: String,
    pub pre: usize,
    pub post: usize,
    pub seed: u64,
    pub iters: usize,
    pub converged: bool,
    pub conv_factor: f64,
    /// Solve time; hierarchy assembly is excluded.
    pub wall_ms: f64,
}

impl ResultRow {
    /// Row with the timing column cleared, for determinism comparisons.
    pub fn without_timing(&self) -> ResultRow {
        ResultRow {
            wall_ms: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub lumpmg_version: String,
    pub config: ExperimentConfig,
    pub rows: usize,
    pub csv: String,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Caches `tau`-independent level stacks keyed by problem and level, so a
/// grid assembles each level once.
#[derive(Default)]
pub struct Runner {
    stacks: HashMap<(String, u32), Arc<LevelStack>>,
}

impl Runner {
    pub fn new() -> Self {
        Runner::default()
    }

    pub fn stack(&mut self, cfg: &ExperimentConfig, level: u32) -> Result<Arc<LevelStack>> {
        let p = &cfg.problem;
        let key = (
            format!("{}|{:?}|{:?}|{:?}|{}", p.example, p.bc, p.ordering, p.coefficients, p.coarse_level),
            level,
        );
        if let Some(s) = self.stacks.get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(LevelStack::build(level, p.coarse_level, &p.spec())?);
        self.stacks.insert(key, s.clone());
        Ok(s)
    }

    /// Runs every `(level, tau, seed)` cell in grid order.
    /// Runs every `(method, level, tau, seed)` cell in grid order.
    pub fn run(&mut self, cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
        let methods = cfg.validate()?;
        let mut rows = Vec::new();
        for (part, method) in cfg.split().iter().zip(&methods) {
            for level in part.problem.level.values() {
                let stack = self.stack(part, level)?;
                let h = Mesh::lshape_h(level);
                for tau in part.problem.tau.values() {
                    let mut solver = CellSolver::new(&stack, tau, method)?;
                    for &seed in &part.run.seeds {
                        let report = solver.solve(part.run.tol, part.run.maxit, seed)?;
                        rows.push(make_row(part, method, h, tau, seed, &report));
                    }
                }
            }
        }
        Ok(rows)
    }
}

/// Solver state for one `(level, tau)`, reused across seeds.
pub struct CellSolver {
    problem: DiscreteProblem,
    kind: CellKind,
    setup_ms: f64,
}

enum CellKind {
    Mg(MGHierarchy),
    Gmres(Preconditioner),
}

impl CellSolver {
    pub fn new(stack: &LevelStack, tau: f64, method: &Method) -> Result<Self> {
        let start = Instant::now();
        let problem = DiscreteProblem::new(stack.finest().clone(), tau);
        let kind = match method {
            Method::Mg(c) => CellKind::Mg(MGHierarchy::new(stack, tau, Variant::A, *c)?),
            Method::Gmres(p) => CellKind::Gmres(Preconditioner::build(stack, tau, p)?),
        };
        Ok(CellSolver {
            problem,
            kind,
            setup_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    pub fn setup_ms(&self) -> f64 {
        self.setup_ms
    }

    pub fn problem(&self) -> &DiscreteProblem {
        &self.problem
    }

    /// Solves with the problem's own right-hand side.
    pub fn solve(&mut self, tol: f64, maxit: usize, seed: u64) -> Result<SolveReport> {
        let rhs = self.problem.rhs();
        Ok(self.solve_rhs(&rhs, tol, maxit, seed)?.1)
    }

    /// Solves `A x = rhs` from the seeded random initial guess.
    pub fn solve_rhs(&mut self, rhs: &[f64], tol: f64, maxit: usize, seed: u64) -> Result<(Vec<f64>, SolveReport)> {
        match &mut self.kind {
            CellKind::Mg(h) => mg_solve(h, rhs, tol, maxit, seed),
            CellKind::Gmres(p) => {
                let op = BlockOperator::new(self.problem.clone(), Variant::A);
                gmres_solve(&op, p, rhs, tol, maxit, seed)
            }
        }
    }
}

fn make_row(cfg: &ExperimentConfig, method: &Method, h: f64, tau: f64, seed: u64, r: &SolveReport) -> ResultRow {
    let mg = method.mg_config();
    ResultRow {
        example: cfg.problem.example.to_string(),
        bc: cfg.problem.bc.name().to_string(),
        h,
        tau,
        method: method.name(),
        precond: method.precond_name().to_string(),
        cycle: mg.map_or("-".into(), |c| c.cycle.label().to_string()),
        pre: mg.map_or(0, |c| c.pre),
        post: mg.map_or(0, |c| c.post),
        seed,
        iters: r.iterations,
        converged: r.converged,
        conv_factor: r.conv_factor,
        wall_ms: r.wall_ms,
    }
}

/// Runs a config on a fresh runner.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Runner::new().run(cfg)
}

pub fn write_rows_csv<W: std::io::Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(csv_err))
        .collect()
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

/// Writes `results.csv` and `manifest.json` into `dir`; returns their paths.
pub fn write_outputs(cfg: &ExperimentConfig, rows: &[ResultRow], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    write_rows_csv(rows, fs::File::create(&csv_path)?)?;
    let manifest = Manifest {
        lumpmg_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.resolved(),
        rows: rows.len(),
        csv: "results.csv".into(),
    };
    let man_path = dir.join("manifest.json");
    fs::write(&man_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok((csv_path, man_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"problem": {"example": 1, "tau": [1.0, 1e-3], "level": [2, 3]},
                "method": {"solver": "gmres", "precond": "B", "smoother": "cgs"},
                "run": {"seeds": [0, 1]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn grid_order_and_size() {
        let rows = run_experiment(&small()).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!((rows[0].h, rows[0].tau, rows[0].seed), (0.25, 1.0, 0));
        assert_eq!((rows[1].h, rows[1].tau, rows[1].seed), (0.25, 1.0, 1));
        assert_eq!((rows[2].h, rows[2].tau), (0.25, 1e-3));
        assert_eq!(rows[4].h, 0.125);
        assert!(rows.iter().all(|r| r.converged && r.precond == "B" && r.method == "gmres/cgs"));
    }

    #[test]
    fn deterministic_modulo_timing() {
        let a = run_experiment(&small()).unwrap();
        let b = run_experiment(&small()).unwrap();
        let strip = |v: &[ResultRow]| v.iter().map(ResultRow::without_timing).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn csv_round_trip() {
        let rows = run_experiment(&small()).unwrap();
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("example,bc,h,tau,method,precond,cycle,pre,post,seed,iters,converged,conv_factor,wall_ms"));
        assert_eq!(read_rows_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn mg_rows_have_no_precond() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"example": 2, "tau": 1e-2, "level": 3},
                "method": {"solver": "mg", "smoother": "cj", "cycle": "w", "pre": 2, "post": 1},
                "run": {"seeds": [3]}}"#,
        )
        .unwrap();
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.precond.as_str(), r.cycle.as_str(), r.pre, r.post, r.seed), ("-", "w", 2, 1, 3));
        assert!(r.converged);
    }
}
