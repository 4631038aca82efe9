//! Collective Jacobi, collective Gauss-Seidel and distributive relaxation
//! for block operators.

use serde::{Deserialize, Serialize};

use crate::block::{distribute_into, schur_apply_into, schur_diagonal, BlockOperator, Coupling, Variant};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Relaxation scheme and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmootherConfig {
    CollectiveJacobi {
        damping: f64,
    },
    CollectiveGs,
    Distributive {
        omega: f64,
        gs_sweeps: usize,
        jacobi_sweeps: usize,
    },
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig::CollectiveGs
    }
}

impl SmootherConfig {
    pub const DEFAULT_DAMPING: f64 = 0.8;
    pub const DEFAULT_OMEGA: f64 = 0.5;

    pub fn cj() -> Self {
        SmootherConfig::CollectiveJacobi {
            damping: Self::DEFAULT_DAMPING,
        }
    }

    pub fn cgs() -> Self {
        SmootherConfig::CollectiveGs
    }

    pub fn dgs() -> Self {
        SmootherConfig::Distributive {
            omega: Self::DEFAULT_OMEGA,
            gs_sweeps: 1,
            jacobi_sweeps: 1,
        }
    }

    /// Short label used in reports: `cj`, `cgs` or `dgs`.
    pub fn label(&self) -> &'static str {
        match self {
            SmootherConfig::CollectiveJacobi { .. } => "cj",
            SmootherConfig::CollectiveGs => "cgs",
            SmootherConfig::Distributive { .. } => "dgs",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SmootherConfig::CollectiveJacobi { damping } => {
                if !(damping > 0.0 && damping <= 1.0) {
                    return Err(Error::config("damping", "must lie in (0, 1]"));
                }
            }
            SmootherConfig::CollectiveGs => {}
            SmootherConfig::Distributive {
                omega,
                gs_sweeps,
                jacobi_sweeps,
            } => {
                if !(omega > 0.0 && omega <= 1.0) {
                    return Err(Error::config("omega", "must lie in (0, 1]"));
                }
                if gs_sweeps == 0 || jacobi_sweeps == 0 {
                    return Err(Error::config("sweeps", "inner sweep counts must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

/// Scratch vectors for one level.
#[derive(Debug, Clone)]
pub struct SmootherWork {
    r: Vec<f64>,
    ex: Vec<f64>,
    ey: Vec<f64>,
    t: Vec<f64>,
    s: Vec<f64>,
}

impl SmootherWork {
    pub fn new(n: usize) -> Self {
        SmootherWork {
            r: vec![0.0; 2 * n],
            ex: vec![0.0; n],
            ey: vec![0.0; n],
            t: vec![0.0; n],
            s: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    /// Inverses of the 2x2 point blocks, row-major.
    Collective(Vec<[f64; 4]>),
    Distributive {
        schur_diag: Vec<f64>,
        /// Reciprocal diagonal of `-tau B`.
        neg_tau_b_inv: Vec<f64>,
        coupling: Coupling,
    },
}

/// A smoother prepared for one operator.
#[derive(Debug, Clone)]
pub struct Smoother {
    cfg: SmootherConfig,
    prepared: Prepared,
}

fn point_inverses(op: &BlockOperator) -> Result<Vec<[f64; 4]>> {
    let p = op.problem();
    let ts = if op.variant() == Variant::Bd { 0.0 } else { op.tau() };
    let a = p.stiffness_a().diagonal();
    let b = p.stiffness_b().diagonal();
    let m = p.mass().diagonal();
    let lumped = p.lumped().diag();
    let pick = |c: Coupling, i: usize| match c {
        Coupling::Mass => m[i],
        Coupling::Lumped => lumped[i],
    };
    (0..op.n())
        .map(|i| {
            let tr = pick(op.variant().top_right(), i);
            let bl = pick(op.variant().bottom_left(), i);
            let (d00, d11) = (ts * a[i], -ts * b[i]);
            let det = d00 * d11 - tr * bl;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::SingularPointBlock(i));
            }
            Ok([d11 / det, -tr / det, -bl / det, d00 / det])
        })
        .collect()
}

impl Smoother {
    pub fn new(op: &BlockOperator, cfg: SmootherConfig) -> Result<Self> {
        cfg.validate()?;
        let prepared = match cfg {
            SmootherConfig::CollectiveJacobi { .. } | SmootherConfig::CollectiveGs => {
                Prepared::Collective(point_inverses(op)?)
            }
            SmootherConfig::Distributive { .. } => {
                if !matches!(op.variant(), Variant::B | Variant::Btilde) {
                    return Err(Error::config(
                        "smoother",
                        "distributive relaxation needs target B or Btilde",
                    ));
                }
                if op.tau() == 0.0 {
                    return Err(Error::ZeroTau);
                }
                let coupling = op.variant().top_right();
                let schur_diag = schur_diagonal(op.problem(), coupling)?.diag().to_vec();
                let tau = op.tau();
                let neg_tau_b_inv = op
                    .problem()
                    .stiffness_b()
                    .diagonal()
                    .iter()
                    .enumerate()
                    .map(|(index, &d)| {
                        if d > 0.0 {
                            Ok(-1.0 / (tau * d))
                        } else {
                            Err(Error::NonPositiveDiagonal { index, value: d })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Prepared::Distributive {
                    schur_diag,
                    neg_tau_b_inv,
                    coupling,
                }
            }
        };
        Ok(Smoother { cfg, prepared })
    }

    pub fn config(&self) -> SmootherConfig {
        self.cfg
    }

    /// One relaxation sweep, updating `x` in place. `op` must be the
    /// operator this smoother was prepared for.
    pub fn sweep(&self, op: &BlockOperator, x: &mut [f64], rhs: &[f64], work: &mut SmootherWork) {
        match (&self.prepared, self.cfg) {
            (Prepared::Collective(inv), SmootherConfig::CollectiveJacobi { damping }) => {
                cj_kernel(op, inv, damping, x, rhs, &mut work.r)
            }
            (Prepared::Collective(inv), _) => cgs_dispatch(op, inv, x, rhs),
            (
                Prepared::Distributive {
                    schur_diag,
                    neg_tau_b_inv,
                    coupling,
                },
                SmootherConfig::Distributive {
                    omega,
                    gs_sweeps,
                    jacobi_sweeps,
                },
            ) => dgs_kernel(
                op,
                DgsParts {
                    schur_diag,
                    neg_tau_b_inv,
                    coupling: *coupling,
                    omega,
                    gs_sweeps,
                    jacobi_sweeps,
                },
                x,
                rhs,
                work,
            ),
            _ => unreachable!("prepared state matches config"),
        }
    }
}

fn check_dims(op: &BlockOperator, x: &[f64], rhs: &[f64]) -> Result<()> {
    for len in [x.len(), rhs.len()] {
        if len != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                got: len,
            });
        }
    }
    Ok(())
}

/// One collective damped Jacobi sweep.
pub fn collective_jacobi_sweep(op: &BlockOperator, x: &[f64], rhs: &[f64], damping: f64) -> Result<Vec<f64>> {
    check_dims(op, x, rhs)?;
    let s = Smoother::new(op, SmootherConfig::CollectiveJacobi { damping })?;
    let mut y = x.to_vec();
    s.sweep(op, &mut y, rhs, &mut SmootherWork::new(op.n()));
    Ok(y)
}

/// One collective Gauss-Seidel sweep in ascending DOF order.
pub fn collective_gs_sweep(op: &BlockOperator, x: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    check_dims(op, x, rhs)?;
    let s = Smoother::new(op, SmootherConfig::CollectiveGs)?;
    let mut y = x.to_vec();
    s.sweep(op, &mut y, rhs, &mut SmootherWork::new(op.n()));
    Ok(y)
}

/// One distributive sweep for the target system `op` (variant B or Btilde).
pub fn distributive_sweep(op: &BlockOperator, x: &[f64], rhs: &[f64], cfg: SmootherConfig) -> Result<Vec<f64>> {
    check_dims(op, x, rhs)?;
    if !matches!(cfg, SmootherConfig::Distributive { .. }) {
        return Err(Error::config("smoother", "expected a distributive configuration"));
    }
    let s = Smoother::new(op, cfg)?;
    let mut y = x.to_vec();
    s.sweep(op, &mut y, rhs, &mut SmootherWork::new(op.n()));
    Ok(y)
}

fn cj_kernel(op: &BlockOperator, inv: &[[f64; 4]], damping: f64, x: &mut [f64], rhs: &[f64], r: &mut [f64]) {
    let n = op.n();
    op.residual_into(x, rhs, r);
    let (xv, xu) = x.split_at_mut(n);
    let (rv, ru) = r.split_at(n);
    for i in 0..n {
        let d = inv[i];
        xv[i] += damping * (d[0] * rv[i] + d[1] * ru[i]);
        xu[i] += damping * (d[2] * rv[i] + d[3] * ru[i]);
    }
}

fn cgs_dispatch(op: &BlockOperator, inv: &[[f64; 4]], x: &mut [f64], rhs: &[f64]) {
    match (op.variant().top_right(), op.variant().bottom_left()) {
        (Coupling::Mass, Coupling::Mass) => cgs_kernel::<true, true>(op, inv, x, rhs),
        (Coupling::Mass, Coupling::Lumped) => cgs_kernel::<true, false>(op, inv, x, rhs),
        (Coupling::Lumped, Coupling::Mass) => cgs_kernel::<false, true>(op, inv, x, rhs),
        (Coupling::Lumped, Coupling::Lumped) => cgs_kernel::<false, false>(op, inv, x, rhs),
    }
}

/// Pointwise 2x2 solves in ascending order. `TR`/`BL` select a sparse mass
/// coupling in the off-diagonal blocks; otherwise the lumped diagonal.
fn cgs_kernel<const TR: bool, const BL: bool>(op: &BlockOperator, inv: &[[f64; 4]], x: &mut [f64], rhs: &[f64]) {
    let n = op.n();
    let p = op.problem();
    let ts = if op.variant() == Variant::Bd { 0.0 } else { op.tau() };
    let pat = p.mass().pattern();
    let row_ptr = pat.row_ptr();
    let cols = pat.col_indices();
    let (av, bv, mv) = (p.stiffness_a().values(), p.stiffness_b().values(), p.mass().values());
    let lumped = p.lumped().diag();
    let (f, g) = rhs.split_at(n);
    for i in 0..n {
        let range = row_ptr[i]..row_ptr[i + 1];
        let (mut sa, mut sb, mut smu, mut smv) = (0.0, 0.0, 0.0, 0.0);
        let c = &cols[range.clone()];
        let (a, b, m) = (&av[range.clone()], &bv[range.clone()], &mv[range]);
        for k in 0..c.len() {
            let j = c[k] as usize;
            let (vj, uj) = (x[j], x[n + j]);
            sa += a[k] * vj;
            sb += b[k] * uj;
            if TR {
                smu += m[k] * uj;
            }
            if BL {
                smv += m[k] * vj;
            }
        }
        let (vi, ui) = (x[i], x[n + i]);
        if !TR {
            smu = lumped[i] * ui;
        }
        if !BL {
            smv = lumped[i] * vi;
        }
        let rv = f[i] - ts * sa - smu;
        let ru = g[i] - smv + ts * sb;
        let d = inv[i];
        x[i] = vi + d[0] * rv + d[1] * ru;
        x[n + i] = ui + d[2] * rv + d[3] * ru;
    }
}

struct DgsParts<'a> {
    schur_diag: &'a [f64],
    neg_tau_b_inv: &'a [f64],
    coupling: Coupling,
    omega: f64,
    gs_sweeps: usize,
    jacobi_sweeps: usize,
}

fn dgs_kernel(op: &BlockOperator, parts: DgsParts<'_>, x: &mut [f64], rhs: &[f64], work: &mut SmootherWork) {
    let n = op.n();
    let p = op.problem();
    let tau = op.tau();
    op.residual_into(x, rhs, &mut work.r);
    let (rv, ru) = work.r.split_at(n);

    // -tau B e_y = r_u
    work.ey.fill(0.0);
    for _ in 0..parts.gs_sweeps {
        scalar_gs_kernel(p.stiffness_b(), -tau, parts.neg_tau_b_inv, &mut work.ey, ru);
    }

    // S e_x = r_v - C e_y
    match parts.coupling {
        Coupling::Mass => p.mass().mul_into(&work.ey, &mut work.t),
        Coupling::Lumped => p.lumped().mul_into(&work.ey, &mut work.t),
    }
    for (t, r) in work.t.iter_mut().zip(rv) {
        *t = r - *t;
    }
    for (e, (t, d)) in work.ex.iter_mut().zip(work.t.iter().zip(parts.schur_diag)) {
        *e = parts.omega * t / d;
    }
    for _ in 1..parts.jacobi_sweeps {
        schur_apply_into(p, parts.coupling, &work.ex, &mut work.s, &mut work.r[..n]);
        for i in 0..n {
            work.ex[i] += parts.omega * (work.t[i] - work.s[i]) / parts.schur_diag[i];
        }
    }

    distribute_into(p, &work.ex, &work.ey, &mut work.r);
    for (xi, ei) in x.iter_mut().zip(&work.r) {
        *xi += ei;
    }
}

/// One Gauss-Seidel sweep on `scale * mat`, given the reciprocal diagonal.
fn scalar_gs_kernel(mat: &CsrMatrix, scale: f64, diag_inv: &[f64], x: &mut [f64], rhs: &[f64]) {
    let pat = mat.pattern();
    let row_ptr = pat.row_ptr();
    let cols = pat.col_indices();
    let vals = mat.values();
    for i in 0..x.len() {
        let mut s = 0.0;
        for k in row_ptr[i]..row_ptr[i + 1] {
            s += vals[k] * x[cols[k] as usize];
        }
        x[i] += (rhs[i] - scale * s) * diag_inv[i];
    }
}

/// Scalar Gauss-Seidel for a matrix with positive diagonal.
#[derive(Debug, Clone)]
pub struct ScalarGaussSeidel {
    diag_inv: Vec<f64>,
}

impl ScalarGaussSeidel {
    pub fn new(mat: &CsrMatrix) -> Result<Self> {
        let diag_inv = mat
            .diagonal()
            .iter()
            .enumerate()
            .map(|(index, &d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::NonPositiveDiagonal { index, value: d })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarGaussSeidel { diag_inv })
    }

    /// `sweeps` forward sweeps on `mat x = rhs`, updating `x`.
    pub fn run(&self, mat: &CsrMatrix, sweeps: usize, x: &mut [f64], rhs: &[f64]) {
        for _ in 0..sweeps {
            scalar_gs_kernel(mat, 1.0, &self.diag_inv, x, rhs);
        }
    }
}

/// Approximate solve with `diag(M, M)` in `(u, v)` order: `k` Gauss-Seidel
/// sweeps from zero on `M e_u = r_v` and on `M e_v = r_u`. Vectors use the
/// usual `[v; u]` layout.
pub fn bd_gauss_seidel(mass: &CsrMatrix, gs: &ScalarGaussSeidel, k: usize, r: &[f64], e: &mut [f64]) {
    let n = mass.n_rows();
    e.fill(0.0);
    let (ev, eu) = e.split_at_mut(n);
    let (rv, ru) = r.split_at(n);
    gs.run(mass, k, eu, rv);
    gs.run(mass, k, ev, ru);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{DiscreteProblem, ProblemSpec, SystemMatrices};
    use crate::block::{distribution_dense, schur_dense};
    use crate::sparse::{norm2, DenseLu, TripletBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn op(level: u32, tau: f64, v: Variant) -> BlockOperator {
        BlockOperator::new(DiscreteProblem::lshape(level, &ProblemSpec::nice(), tau).unwrap(), v)
    }

    fn scalar_op() -> BlockOperator {
        BlockOperator::new(DiscreteProblem::scalar(2.0, 3.0, 1.0, 1.0).unwrap(), Variant::A)
    }

    fn residual_norm(op: &BlockOperator, x: &[f64], rhs: &[f64]) -> f64 {
        let mut r = vec![0.0; op.dim()];
        op.residual_into(x, rhs, &mut r);
        norm2(&r)
    }

    #[test]
    fn config_defaults_and_validation() {
        assert_eq!(SmootherConfig::cj(), SmootherConfig::CollectiveJacobi { damping: 0.8 });
        assert_eq!(
            SmootherConfig::dgs(),
            SmootherConfig::Distributive {
                omega: 0.5,
                gs_sweeps: 1,
                jacobi_sweeps: 1
            }
        );
        assert!(SmootherConfig::CollectiveJacobi { damping: 0.0 }.validate().is_err());
        assert!(SmootherConfig::CollectiveJacobi { damping: 1.2 }.validate().is_err());
        assert!(SmootherConfig::Distributive {
            omega: 0.5,
            gs_sweeps: 0,
            jacobi_sweeps: 1
        }
        .validate()
        .is_err());
        let json = serde_json::to_string(&SmootherConfig::cj()).unwrap();
        assert_eq!(serde_json::from_str::<SmootherConfig>(&json).unwrap(), SmootherConfig::cj());
    }

    #[test]
    fn scalar_block_solved_exactly() {
        let op = scalar_op();
        let want = [3.0 / 7.0, 1.0 / 7.0];
        let x = collective_jacobi_sweep(&op, &[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        let y = collective_gs_sweep(&op, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        for i in 0..2 {
            assert!((x[i] - want[i]).abs() < 1e-15);
            assert!((y[i] - want[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_solution_is_fixed_point() {
        let o = op(2, 0.1, Variant::A);
        let rhs = o.problem().rhs();
        let x = DenseLu::new(&o.densify()).unwrap().solve(&rhs);
        for y in [
            collective_jacobi_sweep(&o, &x, &rhs, 0.8).unwrap(),
            collective_gs_sweep(&o, &x, &rhs).unwrap(),
        ] {
            for i in 0..o.dim() {
                assert!((y[i] - x[i]).abs() < 1e-12);
            }
        }
        let t = op(2, 0.1, Variant::Btilde);
        let x = DenseLu::new(&t.densify()).unwrap().solve(&rhs);
        let y = distributive_sweep(&t, &x, &rhs, SmootherConfig::dgs()).unwrap();
        for i in 0..t.dim() {
            assert!((y[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_error_decreases_each_sweep() {
        let o = op(2, 1e-2, Variant::A);
        let rhs = o.problem().rhs();
        let exact = DenseLu::new(&o.densify()).unwrap().solve(&rhs);
        let s = Smoother::new(&o, SmootherConfig::cj()).unwrap();
        let mut w = SmootherWork::new(o.n());
        let mut x = random(o.dim(), 5);
        let err = |x: &[f64]| norm2(&x.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>());
        let mut last = err(&x);
        for k in 0..50 {
            s.sweep(&o, &mut x, &rhs, &mut w);
            let e = err(&x);
            assert!(e < last, "sweep {k}: {e} >= {last}");
            last = e;
        }
    }

    #[test]
    fn gs_exact_for_lower_triangular_blocks() {
        let n = 4;
        let lower = |d: f64, o: f64| {
            let mut b = TripletBuilder::new(n, n);
            for i in 0..n {
                b.push(i, i, d);
                if i > 0 {
                    b.push(i, i - 1, o);
                }
            }
            b.build()
        };
        let mats = SystemMatrices::from_matrices(
            &lower(1.0, 0.3),
            &lower(4.0, -1.0),
            &lower(3.0, -0.5),
            vec![1.3; n],
            vec![0.0; n],
            false,
        )
        .unwrap();
        let o = BlockOperator::new(DiscreteProblem::new(Arc::new(mats), 0.7), Variant::A);
        let rhs = random(2 * n, 1);
        let x = collective_gs_sweep(&o, &vec![0.0; 2 * n], &rhs).unwrap();
        assert!(residual_norm(&o, &x, &rhs) < 1e-14);
    }

    fn contraction(o: &BlockOperator, cfg: SmootherConfig) -> f64 {
        let s = Smoother::new(o, cfg).unwrap();
        let mut w = SmootherWork::new(o.n());
        let zero = vec![0.0; o.dim()];
        let mut x = random(o.dim(), 9);
        let mut rate = 0.0;
        for _ in 0..300 {
            let before = norm2(&x);
            s.sweep(o, &mut x, &zero, &mut w);
            let after = norm2(&x);
            rate = after / before;
            x.iter_mut().for_each(|v| *v /= after);
        }
        rate
    }

    #[test]
    fn gs_contracts_faster_than_jacobi() {
        let o = op(2, 1e-2, Variant::A);
        let gs = contraction(&o, SmootherConfig::cgs());
        let cj = contraction(&o, SmootherConfig::cj());
        assert!(gs < cj, "gs {gs} cj {cj}");
    }

    #[test]
    fn error_propagation_independent_of_rhs() {
        for (v, cfg) in [
            (Variant::A, SmootherConfig::cgs()),
            (Variant::A, SmootherConfig::cj()),
            (Variant::B, SmootherConfig::dgs()),
            (Variant::Btilde, SmootherConfig::dgs()),
        ] {
            let o = op(2, 0.05, v);
            let x = random(o.dim(), 1);
            let y = random(o.dim(), 2);
            let diffs: Vec<Vec<f64>> = [3u64, 4]
                .iter()
                .map(|&seed| {
                    let rhs = random(o.dim(), seed);
                    let s = Smoother::new(&o, cfg).unwrap();
                    let mut w = SmootherWork::new(o.n());
                    let (mut a, mut b) = (x.clone(), y.clone());
                    s.sweep(&o, &mut a, &rhs, &mut w);
                    s.sweep(&o, &mut b, &rhs, &mut w);
                    a.iter().zip(&b).map(|(p, q)| p - q).collect()
                })
                .collect();
            for i in 0..o.dim() {
                assert!((diffs[0][i] - diffs[1][i]).abs() < 1e-12, "{v:?} {cfg:?}");
            }
        }
    }

    #[test]
    fn gs_residual_monotone() {
        for level in [2, 3] {
            for tau in [1.0, 1e-2] {
                let o = op(level, tau, Variant::A);
                let s = Smoother::new(&o, SmootherConfig::cgs()).unwrap();
                let mut w = SmootherWork::new(o.n());
                let zero = vec![0.0; o.dim()];
                let mut x = random(o.dim(), level as u64);
                let mut last = residual_norm(&o, &x, &zero);
                for _ in 0..100 {
                    s.sweep(&o, &mut x, &zero, &mut w);
                    let r = residual_norm(&o, &x, &zero);
                    assert!(r <= last, "level {level} tau {tau}");
                    last = r;
                }
            }
        }
    }

    /// Distributive step with the inner relaxations replaced by dense solves.
    fn exact_distributive(o: &BlockOperator, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let p = o.problem();
        let n = p.n();
        let mut r = vec![0.0; 2 * n];
        o.residual_into(x, rhs, &mut r);
        let neg_tau_b = p.stiffness_b().to_dense().scale(-p.tau());
        let ey = DenseLu::new(&neg_tau_b).unwrap().solve(&r[n..]);
        let c = o.variant().top_right();
        let cm = match c {
            Coupling::Mass => p.mass().to_dense(),
            Coupling::Lumped => p.lumped().to_dense(),
        };
        let ce = cm.matvec(&ey);
        let t: Vec<f64> = (0..n).map(|i| r[i] - ce[i]).collect();
        let ex = DenseLu::new(&schur_dense(p, c)).unwrap().solve(&t);
        let e = distribution_dense(p).matvec(&[ex, ey].concat());
        x.iter().zip(&e).map(|(a, b)| a + b).collect()
    }

    #[test]
    fn exact_inner_distributive_is_direct() {
        let s = BlockOperator::new(DiscreteProblem::scalar(2.0, 3.0, 1.0, 0.5).unwrap(), Variant::Btilde);
        let y = exact_distributive(&s, &[0.0, 0.0], &[1.0, -2.0]);
        assert!(residual_norm(&s, &y, &[1.0, -2.0]) < 1e-14);
        for v in [Variant::B, Variant::Btilde] {
            for tau in [1.0, 1e-2, 1e-4] {
                let o = op(2, tau, v);
                let rhs = random(o.dim(), 3);
                let x0 = random(o.dim(), 4);
                let y = exact_distributive(&o, &x0, &rhs);
                assert!(residual_norm(&o, &y, &rhs) <= 1e-10 * norm2(&rhs), "{v:?} {tau}");
            }
        }
    }

    #[test]
    fn distributive_converges_as_stationary_iteration() {
        let o = op(2, 1e-2, Variant::Btilde);
        let rhs = o.problem().rhs();
        let exact = DenseLu::new(&o.densify()).unwrap().solve(&rhs);
        let s = Smoother::new(&o, SmootherConfig::dgs()).unwrap();
        let mut w = SmootherWork::new(o.n());
        let mut x = vec![0.0; o.dim()];
        let r0 = residual_norm(&o, &x, &rhs);
        let mut sweeps = 0;
        while residual_norm(&o, &x, &rhs) >= 1e-7 * r0 {
            s.sweep(&o, &mut x, &rhs, &mut w);
            sweeps += 1;
            assert!(sweeps <= 200, "no convergence in 200 sweeps");
        }
        let err = norm2(&x.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err <= 1e-5 * norm2(&exact));
    }

    #[test]
    fn distributive_rejects_zero_tau_and_wrong_target() {
        let o = op(2, 0.0, Variant::B);
        let x = vec![0.0; o.dim()];
        assert!(matches!(
            distributive_sweep(&o, &x, &x, SmootherConfig::dgs()),
            Err(Error::ZeroTau)
        ));
        let a = op(2, 0.1, Variant::A);
        assert!(distributive_sweep(&a, &x, &x, SmootherConfig::dgs()).is_err());
        assert!(distributive_sweep(&a, &x, &x, SmootherConfig::cgs()).is_err());
        assert!(collective_gs_sweep(&a, &x[1..], &x).is_err());
    }

    #[test]
    fn more_inner_sweeps_still_a_valid_smoother() {
        let o = op(2, 1e-2, Variant::B);
        let cfg = SmootherConfig::Distributive {
            omega: 0.5,
            gs_sweeps: 2,
            jacobi_sweeps: 3,
        };
        let rhs = o.problem().rhs();
        let mut x = vec![0.0; o.dim()];
        let r0 = residual_norm(&o, &x, &rhs);
        let s = Smoother::new(&o, cfg).unwrap();
        let mut w = SmootherWork::new(o.n());
        for _ in 0..50 {
            s.sweep(&o, &mut x, &rhs, &mut w);
        }
        assert!(residual_norm(&o, &x, &rhs) < 1e-2 * r0);
    }

    #[test]
    fn bd_gauss_seidel_converges_to_bd_solve() {
        let p = DiscreteProblem::lshape(2, &ProblemSpec::nice(), 1e-3).unwrap();
        let bd = BlockOperator::new(p.clone(), Variant::Bd);
        let gs = ScalarGaussSeidel::new(p.mass()).unwrap();
        let r = random(bd.dim(), 6);
        let mut e = vec![0.0; bd.dim()];
        bd_gauss_seidel(p.mass(), &gs, 60, &r, &mut e);
        assert!(residual_norm(&bd, &e, &r) < 1e-10 * norm2(&r));
    }
}
