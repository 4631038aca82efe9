//! Flexible GMRes without restart, right preconditioned, and the
//! preconditioner actions used with it.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::block::{BlockOperator, Variant};
use crate::error::{Error, Result};
use crate::multigrid::{LevelStack, MGHierarchy, MgConfig, MgWorkspace};
use crate::report::{random_initial_guess, SolveReport};
use crate::smoothers::{bd_gauss_seidel, ScalarGaussSeidel};
use crate::sparse::{axpy, dot, norm2, CsrMatrix, DenseLu};

/// FGMRes on `apply_a` with right preconditioner `apply_p`, which may change
/// from one call to the next. Stops when `|r_k| < tol |r_0|` according to
/// the Givens-rotated least-squares residual, or after `maxit` steps.
pub fn fgmres<A, P>(
    mut apply_a: A,
    mut apply_p: P,
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport)>
where
    A: FnMut(&[f64], &mut [f64]),
    P: FnMut(&[f64], &mut [f64]),
{
    let n = rhs.len();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut w = vec![0.0; n];
    apply_a(&x, &mut w);
    let r0: Vec<f64> = rhs.iter().zip(&w).map(|(b, ax)| b - ax).collect();
    let beta = norm2(&r0);
    let mut history = vec![beta];
    if beta == 0.0 {
        return Ok((x, SolveReport::from_history(history, true, 0.0)));
    }

    let mut v: Vec<Vec<f64>> = vec![r0.iter().map(|r| r / beta).collect()];
    let mut z: Vec<Vec<f64>> = Vec::new();
    // Hessenberg columns after rotation; column j has j + 2 entries.
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut converged = false;

    for j in 0..maxit {
        let mut zj = vec![0.0; n];
        apply_p(&v[j], &mut zj);
        apply_a(&zj, &mut w);
        z.push(zj);
        let mut col = vec![0.0; j + 2];
        for (i, vi) in v.iter().enumerate() {
            let hij = dot(&w, vi);
            col[i] = hij;
            axpy(-hij, vi, &mut w);
        }
        let hnext = norm2(&w);
        col[j + 1] = hnext;
        for i in 0..j {
            let (a, b) = (col[i], col[i + 1]);
            col[i] = cs[i] * a + sn[i] * b;
            col[i + 1] = -sn[i] * a + cs[i] * b;
        }
        let (a, b) = (col[j], col[j + 1]);
        let rho = a.hypot(b);
        let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, b / rho) };
        cs.push(c);
        sn.push(s);
        col[j] = rho;
        col[j + 1] = 0.0;
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.push(col);
        let res = g[j + 1].abs();
        history.push(res);
        if res < tol * beta {
            converged = true;
            break;
        }
        // happy breakdown: the Krylov space is invariant, so the
        // least-squares solution is exact
        if hnext <= f64::EPSILON * beta * 1e-3 {
            converged = true;
            break;
        }
        v.push(w.iter().map(|x| x / hnext).collect());
    }

    let k = h.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for jj in i + 1..k {
            s -= h[jj][i] * y[jj];
        }
        y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
    }
    for (yi, zi) in y.iter().zip(&z) {
        axpy(*yi, zi, &mut x);
    }
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((x, SolveReport::from_history(history, converged, wall_ms)))
}

/// Inner solver used to apply a preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerSolver {
    /// One multigrid cycle from a zero start.
    Mg(MgConfig),
    /// `k` Gauss-Seidel sweeps from zero; only for `Bd`.
    GaussSeidel { steps: usize },
    DenseLu,
}

/// Which block matrix preconditions, and how it is inverted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreconditionerSpec {
    pub kind: Variant,
    pub inner: InnerSolver,
}

impl PreconditionerSpec {
    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.inner) {
            (Variant::Bd, InnerSolver::Mg(_)) => Err(Error::config("inner", "Bd is applied with gs(k) or dense LU")),
            (Variant::Bd, InnerSolver::GaussSeidel { steps: 0 }) => {
                Err(Error::config("inner", "gs(k) needs k >= 1"))
            }
            (Variant::Bd, _) => Ok(()),
            (_, InnerSolver::GaussSeidel { .. }) => Err(Error::config("inner", "gs(k) is only available for Bd")),
            (_, InnerSolver::Mg(cfg)) => cfg.smoother.validate(),
            (_, InnerSolver::DenseLu) => Ok(()),
        }
    }

    /// Label like `V_B(1,1)`, `GS_Bd(3)` or `LU_Btilde`.
    pub fn label(&self) -> String {
        match self.inner {
            InnerSolver::Mg(c) => format!(
                "{}_{}({},{})",
                c.cycle.label().to_uppercase(),
                self.kind.name(),
                c.pre,
                c.post
            ),
            InnerSolver::GaussSeidel { steps } => format!("GS_{}({steps})", self.kind.name()),
            InnerSolver::DenseLu => format!("LU_{}", self.kind.name()),
        }
    }
}

/// A ready-to-apply preconditioner `z = P^{-1} r`.
#[derive(Debug)]
pub enum Preconditioner {
    Identity,
    Mg {
        hierarchy: Box<MGHierarchy>,
        workspace: MgWorkspace,
    },
    BdGaussSeidel {
        mass: CsrMatrix,
        gs: ScalarGaussSeidel,
        steps: usize,
    },
    Dense(DenseLu),
}

impl Preconditioner {
    /// Builds the preconditioner for the finest level of `stack` at `tau`.
    pub fn build(stack: &LevelStack, tau: f64, spec: &PreconditionerSpec) -> Result<Self> {
        spec.validate()?;
        let finest = crate::assembly::DiscreteProblem::new(stack.finest().clone(), tau);
        match spec.inner {
            InnerSolver::Mg(cfg) => {
                let hierarchy = MGHierarchy::new(stack, tau, spec.kind, cfg)?;
                Ok(Preconditioner::mg(hierarchy))
            }
            InnerSolver::GaussSeidel { steps } => Preconditioner::bd_gauss_seidel(finest.mass(), steps),
            InnerSolver::DenseLu => Preconditioner::dense(&BlockOperator::new(finest, spec.kind)),
        }
    }

    pub fn mg(hierarchy: MGHierarchy) -> Self {
        let workspace = hierarchy.workspace();
        Preconditioner::Mg {
            hierarchy: Box::new(hierarchy),
            workspace,
        }
    }

    pub fn bd_gauss_seidel(mass: &CsrMatrix, steps: usize) -> Result<Self> {
        Ok(Preconditioner::BdGaussSeidel {
            gs: ScalarGaussSeidel::new(mass)?,
            mass: mass.clone(),
            steps,
        })
    }

    pub fn dense(op: &BlockOperator) -> Result<Self> {
        Ok(Preconditioner::Dense(DenseLu::new(&op.densify())?))
    }

    pub fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::Mg { hierarchy, workspace } => {
                z.fill(0.0);
                hierarchy.cycle(workspace, r, z).expect("dimensions checked by caller");
            }
            Preconditioner::BdGaussSeidel { mass, gs, steps } => bd_gauss_seidel(mass, gs, *steps, r, z),
            Preconditioner::Dense(lu) => lu.solve_into(r, z),
        }
    }
}

/// Right-preconditioned FGMRes on `op` from a seeded random initial guess.
pub fn gmres_solve(
    op: &BlockOperator,
    precond: &mut Preconditioner,
    rhs: &[f64],
    tol: f64,
    maxit: usize,
    seed: u64,
) -> Result<(Vec<f64>, SolveReport)> {
    if rhs.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: rhs.len(),
        });
    }
    let x0 = random_initial_guess(op.dim(), seed);
    fgmres(|x, y| op.apply_into(x, y), |r, z| precond.apply(r, z), rhs, &x0, tol, maxit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{DiscreteProblem, ProblemSpec};
    use crate::smoothers::SmootherConfig;
    use crate::sparse::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = random(10, 1);
        let (x, rep) = fgmres(|x, y| y.copy_from_slice(x), |r, z| z.copy_from_slice(r), &b, &[0.0; 10], 1e-12, 5).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for i in 0..10 {
            assert!((x[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_preconditioner_one_step() {
        let p = DiscreteProblem::lshape(2, &ProblemSpec::nice(), 0.1).unwrap();
        let op = BlockOperator::new(p.clone(), Variant::A);
        let mut pc = Preconditioner::dense(&op).unwrap();
        let rhs = p.rhs();
        let (x, rep) = gmres_solve(&op, &mut pc, &rhs, 1e-12, 10, 0).unwrap();
        assert_eq!(rep.iterations, 1);
        let mut r = vec![0.0; op.dim()];
        op.residual_into(&x, &rhs, &mut r);
        assert!(norm2(&r) < 1e-12 * rep.residuals[0]);
    }

    #[test]
    fn unpreconditioned_matches_dense_lu() {
        let p = DiscreteProblem::lshape(2, &ProblemSpec::degenerate(), 0.3).unwrap();
        let op = BlockOperator::new(p.clone(), Variant::A);
        let rhs = p.rhs();
        let exact = DenseLu::new(&op.densify()).unwrap().solve(&rhs);
        let (x, rep) = gmres_solve(&op, &mut Preconditioner::Identity, &rhs, 1e-14, op.dim(), 3).unwrap();
        assert!(rep.converged);
        let err: Vec<f64> = x.iter().zip(&exact).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) <= 1e-8 * norm2(&exact));
        // GMRes residuals never increase
        for w in rep.residuals.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * rep.residuals[0]);
        }
    }

    #[test]
    fn happy_breakdown_is_convergence() {
        // rhs is an eigenvector, so the Krylov space has dimension 1
        let mut b = TripletBuilder::new(3, 3);
        b.push(0, 0, 2.0);
        b.push(1, 1, 3.0);
        b.push(2, 2, 4.0);
        let a = b.build();
        let (x, rep) = fgmres(
            |x, y| a.mul_into(x, y),
            |r, z| z.copy_from_slice(r),
            &[2.0, 0.0, 0.0],
            &[0.0; 3],
            1e-30,
            10,
        )
        .unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!((x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn maxit_reports_nonconvergence() {
        let p = DiscreteProblem::lshape(3, &ProblemSpec::nice(), 1e-2).unwrap();
        let op = BlockOperator::new(p.clone(), Variant::A);
        let (_, rep) = gmres_solve(&op, &mut Preconditioner::Identity, &p.rhs(), 1e-10, 5, 0).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 5);
        assert!(gmres_solve(&op, &mut Preconditioner::Identity, &p.rhs()[1..], 1e-10, 5, 0).is_err());
        assert!(gmres_solve(&op, &mut Preconditioner::Identity, &p.rhs(), 0.0, 5, 0).is_err());
    }

    #[test]
    fn exact_lumped_preconditioner_is_mesh_independent() {
        let mut counts = Vec::new();
        for level in 2..=4 {
            let p = DiscreteProblem::lshape(level, &ProblemSpec::laplace(), 1e-1).unwrap();
            let op = BlockOperator::new(p.clone(), Variant::A);
            let mut pc = Preconditioner::dense(&BlockOperator::new(p.clone(), Variant::B)).unwrap();
            let (_, rep) = gmres_solve(&op, &mut pc, &p.rhs(), 1e-7, 200, 0).unwrap();
            assert!(rep.converged);
            counts.push(rep.iterations);
        }
        // bounded independently of h: refinement never adds iterations
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    }

    #[test]
    fn multigrid_preconditioner_on_level4() {
        let spec = ProblemSpec::nice();
        let stack = LevelStack::build(4, 1, &spec).unwrap();
        let p = DiscreteProblem::new(stack.finest().clone(), 1e-2);
        let op = BlockOperator::new(p.clone(), Variant::A);
        for kind in [Variant::A, Variant::B, Variant::Btilde] {
            let ps = PreconditionerSpec {
                kind,
                inner: InnerSolver::Mg(MgConfig::v(1, 1, SmootherConfig::cgs())),
            };
            let mut pc = Preconditioner::build(&stack, 1e-2, &ps).unwrap();
            let (_, rep) = gmres_solve(&op, &mut pc, &p.rhs(), 1e-7, 200, 0).unwrap();
            assert!(rep.converged && rep.iterations <= 12, "{kind:?} {}", rep.iterations);
        }
    }

    #[test]
    fn spec_validation_and_labels() {
        let mg = InnerSolver::Mg(MgConfig::default());
        assert!(PreconditionerSpec { kind: Variant::Bd, inner: mg }.validate().is_err());
        assert!(PreconditionerSpec {
            kind: Variant::B,
            inner: InnerSolver::GaussSeidel { steps: 3 }
        }
        .validate()
        .is_err());
        let gs = PreconditionerSpec {
            kind: Variant::Bd,
            inner: InnerSolver::GaussSeidel { steps: 3 },
        };
        assert!(gs.validate().is_ok());
        assert_eq!(gs.label(), "GS_Bd(3)");
        assert_eq!(PreconditionerSpec { kind: Variant::Btilde, inner: mg }.label(), "V_Btilde(1,1)");
        let json = serde_json::to_string(&gs).unwrap();
        assert_eq!(serde_json::from_str::<PreconditionerSpec>(&json).unwrap(), gs);
    }
}
