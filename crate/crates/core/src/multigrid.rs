//! Geometric multigrid on nested L-shape meshes with re-discretized levels.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{DiscreteProblem, ProblemSpec, SystemMatrices};
use crate::block::{BlockOperator, Variant};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::report::{random_initial_guess, SolveReport};
use crate::smoothers::{Smoother, SmootherConfig, SmootherWork};
use crate::sparse::{norm2, CsrMatrix, DenseLu};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleKind {
    V,
    W,
}

impl CycleKind {
    fn gamma(self) -> usize {
        match self {
            CycleKind::V => 1,
            CycleKind::W => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CycleKind::V => "v",
            CycleKind::W => "w",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgConfig {
    pub cycle: CycleKind,
    pub pre: usize,
    pub post: usize,
    pub smoother: SmootherConfig,
}

impl MgConfig {
    pub fn v(pre: usize, post: usize, smoother: SmootherConfig) -> Self {
        MgConfig {
            cycle: CycleKind::V,
            pre,
            post,
            smoother,
        }
    }

    pub fn w(pre: usize, post: usize, smoother: SmootherConfig) -> Self {
        MgConfig {
            cycle: CycleKind::W,
            pre,
            post,
            smoother,
        }
    }
}

impl Default for MgConfig {
    fn default() -> Self {
        MgConfig::v(1, 1, SmootherConfig::cgs())
    }
}

/// Assembled, `tau`-independent levels with their prolongations. Build once
/// and derive hierarchies for many `tau` and targets.
#[derive(Debug, Clone)]
pub struct LevelStack {
    coarse_level: u32,
    levels: Vec<Arc<SystemMatrices>>,
    /// `prolongations[l]` maps level `l` to level `l + 1` (scalar, free DOFs).
    prolongations: Vec<Arc<CsrMatrix>>,
    restrictions: Vec<Arc<CsrMatrix>>,
}

impl LevelStack {
    pub fn build(fine_level: u32, coarse_level: u32, spec: &ProblemSpec) -> Result<Self> {
        if coarse_level < 1 || coarse_level > fine_level {
            return Err(Error::InvalidLevels {
                coarse: coarse_level,
                fine: fine_level,
            });
        }
        let mut mesh = Mesh::lshape(coarse_level);
        let mut levels = Vec::new();
        let mut prolongations = Vec::new();
        let mut restrictions = Vec::new();
        loop {
            let mats = SystemMatrices::assemble(Arc::new(mesh.clone()), spec)?;
            if mats.n() == 0 {
                return Err(Error::EmptyCoarseLevel(mesh.level() as usize));
            }
            levels.push(Arc::new(mats));
            if mesh.level() == fine_level {
                break;
            }
            let (fine, transfer) = mesh.refine();
            let coarse_dofs = levels.last().unwrap().dofs.as_ref().expect("assembled");
            let fine_dofs = fine.classify_dofs_ordered(spec.bc, spec.ordering);
            let p = transfer.prolongation(coarse_dofs, &fine_dofs);
            restrictions.push(Arc::new(p.transpose()));
            prolongations.push(Arc::new(p));
            mesh = fine;
        }
        Ok(LevelStack {
            coarse_level,
            levels,
            prolongations,
            restrictions,
        })
    }

    pub fn coarse_level(&self) -> u32 {
        self.coarse_level
    }

    pub fn fine_level(&self) -> u32 {
        self.coarse_level + self.levels.len() as u32 - 1
    }

    pub fn levels(&self) -> &[Arc<SystemMatrices>] {
        &self.levels
    }

    pub fn finest(&self) -> &Arc<SystemMatrices> {
        self.levels.last().expect("at least one level")
    }

    pub fn prolongation(&self, coarse_index: usize) -> &CsrMatrix {
        &self.prolongations[coarse_index]
    }
}

#[derive(Debug, Clone)]
struct Level {
    op: BlockOperator,
    smoother: Option<Smoother>,
}

/// Multigrid hierarchy for one target system and `tau`.
#[derive(Debug, Clone)]
pub struct MGHierarchy {
    levels: Vec<Level>,
    prolongations: Vec<Arc<CsrMatrix>>,
    restrictions: Vec<Arc<CsrMatrix>>,
    coarse: DenseLu,
    cfg: MgConfig,
}

/// Assembles levels `coarse_level..=fine_level` and builds the hierarchy.
pub fn build_hierarchy(
    fine_level: u32,
    coarse_level: u32,
    spec: &ProblemSpec,
    tau: f64,
    target: Variant,
    cfg: MgConfig,
) -> Result<MGHierarchy> {
    MGHierarchy::new(&LevelStack::build(fine_level, coarse_level, spec)?, tau, target, cfg)
}

impl MGHierarchy {
    pub fn new(stack: &LevelStack, tau: f64, target: Variant, cfg: MgConfig) -> Result<Self> {
        if target == Variant::Bd {
            return Err(Error::config("target", "multigrid targets are A, B or Btilde"));
        }
        cfg.smoother.validate()?;
        let mut levels = Vec::with_capacity(stack.levels.len());
        for (l, mats) in stack.levels.iter().enumerate() {
            let op = BlockOperator::new(DiscreteProblem::new(mats.clone(), tau), target);
            let smoother = if l == 0 {
                None
            } else {
                Some(Smoother::new(&op, cfg.smoother)?)
            };
            levels.push(Level { op, smoother });
        }
        let coarse = DenseLu::new(&levels[0].op.densify())?;
        Ok(MGHierarchy {
            levels,
            prolongations: stack.prolongations.clone(),
            restrictions: stack.restrictions.clone(),
            coarse,
            cfg,
        })
    }

    pub fn config(&self) -> MgConfig {
        self.cfg
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Operator of the finest level.
    pub fn fine_operator(&self) -> &BlockOperator {
        &self.levels.last().expect("nonempty").op
    }

    pub fn operator(&self, l: usize) -> &BlockOperator {
        &self.levels[l].op
    }

    pub fn dim(&self) -> usize {
        self.fine_operator().dim()
    }

    pub fn workspace(&self) -> MgWorkspace {
        MgWorkspace {
            levels: self
                .levels
                .iter()
                .map(|l| {
                    let n = l.op.n();
                    LevelWork {
                        x: vec![0.0; 2 * n],
                        b: vec![0.0; 2 * n],
                        r: vec![0.0; 2 * n],
                        smoother: SmootherWork::new(n),
                    }
                })
                .collect(),
        }
    }

    /// One cycle on the finest level, updating `x`.
    pub fn cycle(&self, ws: &mut MgWorkspace, rhs: &[f64], x: &mut [f64]) -> Result<()> {
        for len in [rhs.len(), x.len()] {
            if len != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: len,
                });
            }
        }
        let top = self.levels.len() - 1;
        ws.levels[top].b.copy_from_slice(rhs);
        ws.levels[top].x.copy_from_slice(x);
        self.cycle_at(top, &mut ws.levels);
        x.copy_from_slice(&ws.levels[top].x);
        Ok(())
    }

    fn cycle_at(&self, l: usize, work: &mut [LevelWork]) {
        if l == 0 {
            let w = &mut work[0];
            self.coarse.solve_into(&w.b, &mut w.x);
            return;
        }
        let level = &self.levels[l];
        let smoother = level.smoother.as_ref().expect("smoother on non-coarse level");
        let (coarser, rest) = work.split_at_mut(l);
        let w = &mut rest[0];
        for _ in 0..self.cfg.pre {
            smoother.sweep(&level.op, &mut w.x, &w.b, &mut w.smoother);
        }
        level.op.residual_into(&w.x, &w.b, &mut w.r);
        let c = &mut coarser[l - 1];
        block_transfer(&self.restrictions[l - 1], &w.r, &mut c.b);
        c.x.fill(0.0);
        for _ in 0..self.cfg.cycle.gamma() {
            self.cycle_at(l - 1, coarser);
        }
        let c = &coarser[l - 1];
        block_transfer_add(&self.prolongations[l - 1], &c.x, &mut w.x);
        for _ in 0..self.cfg.post {
            smoother.sweep(&level.op, &mut w.x, &w.b, &mut w.smoother);
        }
    }
}

/// Scratch vectors for [`MGHierarchy::cycle`].
#[derive(Debug, Clone)]
pub struct MgWorkspace {
    levels: Vec<LevelWork>,
}

#[derive(Debug, Clone)]
struct LevelWork {
    x: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
    smoother: SmootherWork,
}

/// Applies a scalar transfer to the `v` and `u` parts separately.
fn block_transfer(t: &CsrMatrix, x: &[f64], y: &mut [f64]) {
    let (nx, ny) = (t.n_cols(), t.n_rows());
    t.mul_into(&x[..nx], &mut y[..ny]);
    t.mul_into(&x[nx..], &mut y[ny..]);
}

fn block_transfer_add(t: &CsrMatrix, x: &[f64], y: &mut [f64]) {
    let (nx, ny) = (t.n_cols(), t.n_rows());
    t.mul_add_into(1.0, &x[..nx], &mut y[..ny]);
    t.mul_add_into(1.0, &x[nx..], &mut y[ny..]);
}

/// One cycle from `x`, returning the new iterate.
pub fn mg_cycle(h: &MGHierarchy, rhs: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    h.cycle(&mut h.workspace(), rhs, &mut y)?;
    Ok(y)
}

/// Stationary multigrid iteration from a seeded random guess until the
/// relative residual drops below `tol` or `maxit` cycles are spent.
pub fn mg_solve(h: &MGHierarchy, rhs: &[f64], tol: f64, maxit: usize, seed: u64) -> Result<(Vec<f64>, SolveReport)> {
    let x0 = random_initial_guess(h.dim(), seed);
    mg_solve_from(h, rhs, x0, tol, maxit)
}

pub fn mg_solve_from(
    h: &MGHierarchy,
    rhs: &[f64],
    mut x: Vec<f64>,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    if rhs.len() != h.dim() || x.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: rhs.len().min(x.len()),
        });
    }
    let start = Instant::now();
    let op = h.fine_operator();
    let mut ws = h.workspace();
    let mut r = vec![0.0; h.dim()];
    op.residual_into(&x, rhs, &mut r);
    let r0 = norm2(&r);
    let mut history = vec![r0];
    let mut converged = r0 == 0.0;
    while !converged && history.len() <= maxit {
        h.cycle(&mut ws, rhs, &mut x)?;
        op.residual_into(&x, rhs, &mut r);
        let rk = norm2(&r);
        history.push(rk);
        converged = rk < tol * r0;
    }
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((x, SolveReport::from_history(history, converged, wall_ms)))
}
