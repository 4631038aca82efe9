//! The 2x2 block operator `[[tau A, M], [M, -tau B]]`, its lumped variants
//! and the matrix-free Schur pieces used by the distributive smoother.
//!
//! Block vectors are stored as `[v; u]`, each part of length `n`.

use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteProblem;
use crate::error::{Error, Result};
use crate::sparse::{DenseMatrix, DiagonalMatrix};

/// Which block matrix to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// `[[tau A, M], [M, -tau B]]`
    A,
    /// `[[tau A, M_bar], [M_bar, -tau B]]`
    B,
    /// `[[tau A, M], [M_bar, -tau B]]`
    Btilde,
    /// `diag(M, M)` acting on `(u, v)`, which is `[[0, M], [M, 0]]` on `(v, u)`.
    Bd,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::A => "A",
            Variant::B => "B",
            Variant::Btilde => "Btilde",
            Variant::Bd => "Bd",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "A" => Some(Variant::A),
            "B" => Some(Variant::B),
            "Btilde" => Some(Variant::Btilde),
            "Bd" => Some(Variant::Bd),
            _ => None,
        }
    }

    /// Mass coupling in the upper-right block.
    pub fn top_right(self) -> Coupling {
        match self {
            Variant::A | Variant::Btilde | Variant::Bd => Coupling::Mass,
            Variant::B => Coupling::Lumped,
        }
    }

    /// Mass coupling in the lower-left block.
    pub fn bottom_left(self) -> Coupling {
        match self {
            Variant::A | Variant::Bd => Coupling::Mass,
            Variant::B | Variant::Btilde => Coupling::Lumped,
        }
    }

    pub fn is_symmetric(self) -> bool {
        self.top_right() == self.bottom_left()
    }
}

/// Consistent or lumped mass matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Mass,
    Lumped,
}

/// A block operator referencing the matrices of a [`DiscreteProblem`].
#[derive(Debug, Clone)]
pub struct BlockOperator {
    problem: DiscreteProblem,
    variant: Variant,
}

impl BlockOperator {
    pub fn new(problem: DiscreteProblem, variant: Variant) -> Self {
        BlockOperator { problem, variant }
    }

    pub fn problem(&self) -> &DiscreteProblem {
        &self.problem
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn tau(&self) -> f64 {
        self.problem.tau()
    }

    /// Number of scalar DOFs per part.
    pub fn n(&self) -> usize {
        self.problem.n()
    }

    /// Full block dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n()
    }

    pub fn is_symmetric(&self) -> bool {
        self.variant.is_symmetric()
    }

    /// `y = op * x` with dimension checks.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `y = op * x`; panics on length mismatch.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.accumulate(-1.0, x, y);
        y.iter_mut().for_each(|v| *v = -*v);
    }

    /// `r = rhs - op * x`.
    pub fn residual_into(&self, x: &[f64], rhs: &[f64], r: &mut [f64]) {
        r.copy_from_slice(rhs);
        self.accumulate(-1.0, x, r);
    }

    /// `y += alpha * op * x` in one pass over the shared pattern.
    fn accumulate(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        assert_eq!(x.len(), 2 * n, "block vector length");
        assert_eq!(y.len(), 2 * n, "block vector length");
        match (self.variant, self.variant.top_right(), self.variant.bottom_left()) {
            (Variant::Bd, ..) => self.accumulate_kernel::<false, true, true>(alpha, x, y),
            (_, Coupling::Mass, Coupling::Mass) => self.accumulate_kernel::<true, true, true>(alpha, x, y),
            (_, Coupling::Mass, Coupling::Lumped) => self.accumulate_kernel::<true, true, false>(alpha, x, y),
            (_, Coupling::Lumped, Coupling::Mass) => self.accumulate_kernel::<true, false, true>(alpha, x, y),
            (_, Coupling::Lumped, Coupling::Lumped) => self.accumulate_kernel::<true, false, false>(alpha, x, y),
        }
    }

    /// `DIAG` keeps the stiffness blocks; `TR`/`BL` select the sparse mass
    /// in the off-diagonal blocks, otherwise the lumped diagonal.
    fn accumulate_kernel<const DIAG: bool, const TR: bool, const BL: bool>(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        let p = &self.problem;
        let lumped = p.lumped().diag();
        let (xv, xu) = x.split_at(n);
        let (yv, yu) = y.split_at_mut(n);
        let pat = p.mass().pattern();
        let row_ptr = pat.row_ptr();
        let cols = pat.col_indices();
        let (av, bv, mv) = (p.stiffness_a().values(), p.stiffness_b().values(), p.mass().values());
        let tau = p.tau();
        for i in 0..n {
            let range = row_ptr[i]..row_ptr[i + 1];
            let c = &cols[range.clone()];
            let (a, b, m) = (&av[range.clone()], &bv[range.clone()], &mv[range]);
            let (mut sa, mut sb, mut smu, mut smv) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..c.len() {
                let j = c[k] as usize;
                if DIAG {
                    sa += a[k] * xv[j];
                    sb += b[k] * xu[j];
                }
                if TR {
                    smu += m[k] * xu[j];
                }
                if BL {
                    smv += m[k] * xv[j];
                }
            }
            if !TR {
                smu = lumped[i] * xu[i];
            }
            if !BL {
                smv = lumped[i] * xv[i];
            }
            yv[i] += alpha * (tau * sa + smu);
            yu[i] += alpha * (smv - tau * sb);
        }
    }

    /// Dense copy, for verification at small sizes.
    pub fn densify(&self) -> DenseMatrix {
        let n = self.n();
        let p = &self.problem;
        let tau = p.tau();
        let mut d = DenseMatrix::zeros(2 * n, 2 * n);
        if self.variant != Variant::Bd {
            for (i, j, v) in p.stiffness_a().triplets() {
                d[(i, j)] += tau * v;
            }
            for (i, j, v) in p.stiffness_b().triplets() {
                d[(n + i, n + j)] -= tau * v;
            }
        }
        let put = |d: &mut DenseMatrix, c: Coupling, ro: usize, co: usize| match c {
            Coupling::Mass => {
                for (i, j, v) in p.mass().triplets() {
                    d[(ro + i, co + j)] += v;
                }
            }
            Coupling::Lumped => {
                for (i, &v) in p.lumped().diag().iter().enumerate() {
                    d[(ro + i, co + i)] += v;
                }
            }
        };
        put(&mut d, self.variant.top_right(), 0, n);
        put(&mut d, self.variant.bottom_left(), n, 0);
        d
    }
}

/// Reorders `[v; u]` into `[u; v]`.
pub fn vu_to_uv(x: &[f64]) -> Vec<f64> {
    let n = x.len() / 2;
    let mut y = Vec::with_capacity(x.len());
    y.extend_from_slice(&x[n..]);
    y.extend_from_slice(&x[..n]);
    y
}

/// Reorders `[u; v]` into `[v; u]`. The swap is an involution.
pub fn uv_to_vu(x: &[f64]) -> Vec<f64> {
    vu_to_uv(x)
}

/// `diag(M, M)` in `(u, v)` ordering, dense.
pub fn bd_dense_uv(problem: &DiscreteProblem) -> DenseMatrix {
    let n = problem.n();
    let mut d = DenseMatrix::zeros(2 * n, 2 * n);
    for (i, j, v) in problem.mass().triplets() {
        d[(i, j)] = v;
        d[(n + i, n + j)] = v;
    }
    d
}

/// `[[0, tau A], [-tau B, 0]]` in `(u, v)` ordering, so that the block
/// system in that ordering is `diag(M, M)` plus this matrix.
pub fn bd_remainder_dense_uv(problem: &DiscreteProblem) -> DenseMatrix {
    let n = problem.n();
    let tau = problem.tau();
    let mut d = DenseMatrix::zeros(2 * n, 2 * n);
    for (i, j, v) in problem.stiffness_a().triplets() {
        d[(i, n + j)] = tau * v;
    }
    for (i, j, v) in problem.stiffness_b().triplets() {
        d[(n + i, j)] = -tau * v;
    }
    d
}

fn coupling_diag(problem: &DiscreteProblem, c: Coupling) -> Vec<f64> {
    match c {
        Coupling::Mass => problem.mass().diagonal(),
        Coupling::Lumped => problem.lumped().diag().to_vec(),
    }
}

/// Diagonal of `C + tau^2 A M_bar^{-1} B` where `C` is `M` or `M_bar`, in
/// O(nnz) work. Relies on `B` being symmetric and sharing `A`'s pattern.
pub fn schur_diagonal(problem: &DiscreteProblem, c: Coupling) -> Result<DiagonalMatrix> {
    let tau2 = problem.tau() * problem.tau();
    let a = problem.stiffness_a();
    let b = problem.stiffness_b();
    let lumped = problem.lumped().diag();
    let cols = a.pattern().col_indices();
    let mut d = coupling_diag(problem, c);
    for (i, di) in d.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in a.pattern().row_range(i) {
            let j = cols[k] as usize;
            s += a.values()[k] * b.values()[k] / lumped[j];
        }
        *di += tau2 * s;
    }
    for (index, &value) in d.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
    }
    Ok(DiagonalMatrix::new(d))
}

/// `y = C x + tau^2 A (M_bar^{-1} (B x))`; `work` has length `n`.
pub fn schur_apply_into(problem: &DiscreteProblem, c: Coupling, x: &[f64], y: &mut [f64], work: &mut [f64]) {
    let tau2 = problem.tau() * problem.tau();
    problem.stiffness_b().mul_into(x, work);
    for (w, d) in work.iter_mut().zip(problem.lumped().diag()) {
        *w /= d;
    }
    problem.stiffness_a().mul_into(work, y);
    y.iter_mut().for_each(|v| *v *= tau2);
    match c {
        Coupling::Mass => problem.mass().mul_add_into(1.0, x, y),
        Coupling::Lumped => {
            for ((yi, xi), di) in y.iter_mut().zip(x).zip(problem.lumped().diag()) {
                *yi += di * xi;
            }
        }
    }
}

/// Allocating form of [`schur_apply_into`] with a dimension check.
pub fn schur_apply(problem: &DiscreteProblem, c: Coupling, x: &[f64]) -> Result<Vec<f64>> {
    let n = problem.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let mut y = vec![0.0; n];
    let mut w = vec![0.0; n];
    schur_apply_into(problem, c, x, &mut y, &mut w);
    Ok(y)
}

/// Dense `C + tau^2 A M_bar^{-1} B`.
pub fn schur_dense(problem: &DiscreteProblem, c: Coupling) -> DenseMatrix {
    let tau2 = problem.tau() * problem.tau();
    let a = problem.stiffness_a().to_dense();
    let b = problem.stiffness_b().to_dense();
    let inv = DenseMatrix::from_diagonal(&problem.lumped().diag().iter().map(|d| 1.0 / d).collect::<Vec<_>>());
    let cm = match c {
        Coupling::Mass => problem.mass().to_dense(),
        Coupling::Lumped => problem.lumped().to_dense(),
    };
    cm.add(&a.matmul(&inv).matmul(&b).scale(tau2))
}

/// Applies the distribution matrix `[[tau M_bar^{-1} B, 0], [I, I]]` to
/// `(e_x, e_y)`, writing `[e_v; e_u]` into `out`.
pub fn distribute_into(problem: &DiscreteProblem, ex: &[f64], ey: &[f64], out: &mut [f64]) {
    let n = problem.n();
    let tau = problem.tau();
    let (ov, ou) = out.split_at_mut(n);
    problem.stiffness_b().mul_into(ex, ov);
    for (o, d) in ov.iter_mut().zip(problem.lumped().diag()) {
        *o *= tau / d;
    }
    for i in 0..n {
        ou[i] = ex[i] + ey[i];
    }
}

/// Dense distribution matrix.
pub fn distribution_dense(problem: &DiscreteProblem) -> DenseMatrix {
    let n = problem.n();
    let tau = problem.tau();
    let mut d = DenseMatrix::zeros(2 * n, 2 * n);
    let lumped = problem.lumped().diag();
    for (i, j, v) in problem.stiffness_b().triplets() {
        d[(i, j)] = tau * v / lumped[i];
    }
    for i in 0..n {
        d[(n + i, i)] = 1.0;
        d[(n + i, n + i)] = 1.0;
    }
    d
}
