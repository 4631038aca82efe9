//! Dense spectral diagnostics for small problems: spectra of preconditioned
//! block systems, the norm-equivalence constant `C1`, the spectrum of
//! `X = (I + tau^2 M_bar^{-1} B M^{-1} A)^{-1} (M_bar^{-1} M - I)`, the
//! small-`tau` block-diagonal bound and the Sherman-Morrison-Woodbury check.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::DiscreteProblem;
use crate::block::{bd_dense_uv, bd_remainder_dense_uv, BlockOperator, Variant};
use crate::error::{Error, Result};
use crate::sparse::{
    dense_eigenvalues, generalized_sym_eigenvalues, sym_generalized_eig_extremes, CsrMatrix, DenseLu, DenseMatrix,
    DiagonalMatrix, DEFAULT_DENSE_CAP,
};

/// Slack applied to interval endpoints in containment checks.
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// One named inequality and how comfortably it holds. `margin` is positive
/// when satisfied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub satisfied: bool,
    pub margin: f64,
}

impl BoundCheck {
    /// A check of the form `margin > 0`.
    pub fn positive(name: impl Into<String>, margin: f64) -> Self {
        BoundCheck {
            name: name.into(),
            satisfied: margin > 0.0,
            margin,
        }
    }

    /// A check of the form `margin >= 0`.
    pub fn non_negative(name: impl Into<String>, margin: f64) -> Self {
        BoundCheck {
            name: name.into(),
            satisfied: margin >= 0.0,
            margin,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    #[serde(serialize_with = "ser_complex")]
    pub eigenvalues: Vec<Complex64>,
    /// Largest modulus over `eigenvalues`.
    pub rho: f64,
    pub c1: Option<f64>,
    pub bound_checks: Vec<BoundCheck>,
}

fn ser_complex<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl SpectrumReport {
    pub fn new(eigenvalues: Vec<Complex64>) -> Self {
        let rho = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        SpectrumReport {
            eigenvalues,
            rho,
            c1: None,
            bound_checks: Vec::new(),
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.bound_checks.iter().all(|c| c.satisfied)
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.bound_checks.iter().find(|c| c.name == name)
    }

    /// Largest pairwise distance between eigenvalues.
    pub fn diameter(&self) -> f64 {
        let ev = &self.eigenvalues;
        let mut d: f64 = 0.0;
        for i in 0..ev.len() {
            for j in i + 1..ev.len() {
                d = d.max((ev[i] - ev[j]).norm());
            }
        }
        d
    }

    pub fn min_re(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_im(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Writes `re,im,h,tau,precond` rows, optionally with the header.
    pub fn write_scatter_csv<W: Write>(&self, mut w: W, h: f64, tau: f64, precond: &str, header: bool) -> Result<()> {
        if header {
            writeln!(w, "re,im,h,tau,precond")?;
        }
        for z in &self.eigenvalues {
            writeln!(w, "{:e},{:e},{:e},{:e},{}", z.re, z.im, h, tau, precond)?;
        }
        Ok(())
    }
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(Error::DenseCapExceeded { dim, cap });
    }
    Ok(())
}

/// Dense `P^{-1} A` for the preconditioner variant `precond` (`Variant::A`
/// gives the identity).
pub fn preconditioned_dense(problem: &DiscreteProblem, precond: Variant, cap: usize) -> Result<DenseMatrix> {
    check_cap(2 * problem.n(), cap)?;
    let a = BlockOperator::new(problem.clone(), Variant::A).densify();
    let p = BlockOperator::new(problem.clone(), precond).densify();
    Ok(DenseLu::new(&p)?.solve_matrix(&a))
}

/// All eigenvalues of `P^{-1} A`, with the default dense cap.
pub fn preconditioned_spectrum(problem: &DiscreteProblem, precond: Variant) -> Result<SpectrumReport> {
    preconditioned_spectrum_with_cap(problem, precond, DEFAULT_DENSE_CAP)
}

pub fn preconditioned_spectrum_with_cap(problem: &DiscreteProblem, precond: Variant, cap: usize) -> Result<SpectrumReport> {
    let d = preconditioned_dense(problem, precond, cap)?;
    Ok(SpectrumReport::new(dense_eigenvalues(&d, cap)?))
}

/// Sharp constant in `C1 (M_bar u, u) <= (M u, u)`: the smallest eigenvalue
/// of the pencil `(M, M_bar)`.
pub fn estimate_c1(m: &CsrMatrix, mbar: &DiagonalMatrix) -> Result<f64> {
    let (lo, _) = sym_generalized_eig_extremes(&m.to_dense(), mbar)?;
    Ok(lo)
}

fn lumped_dense(problem: &DiscreteProblem) -> DenseMatrix {
    problem.lumped().to_dense()
}

/// Dense `X`, formed directly from its definition.
pub fn x_dense(problem: &DiscreteProblem) -> Result<DenseMatrix> {
    let n = problem.n();
    let tau2 = problem.tau() * problem.tau();
    let m = problem.mass().to_dense();
    let a = problem.stiffness_a().to_dense();
    let b = problem.stiffness_b().to_dense();
    let inv_lumped: Vec<f64> = problem.lumped().diag().iter().map(|d| 1.0 / d).collect();
    let inv_lumped = DenseMatrix::from_diagonal(&inv_lumped);
    let m_inv_a = DenseLu::new(&m)?.solve_matrix(&a);
    let left = DenseMatrix::identity(n).add(&inv_lumped.matmul(&b).matmul(&m_inv_a).scale(tau2));
    let right = inv_lumped.matmul(&m).sub(&DenseMatrix::identity(n));
    Ok(DenseLu::new(&left)?.solve_matrix(&right))
}

/// Spectrum of `X` through the symmetric-definite pencil
/// `(M - M_bar, M_bar + tau^2 A M^{-1} A)`, checked against the direct
/// dense route and against the interval `(C1 - 1, 0]`. Requires `A = B`.
pub fn spectrum_of_x(problem: &DiscreteProblem) -> Result<SpectrumReport> {
    spectrum_of_x_with_cap(problem, DEFAULT_DENSE_CAP)
}

pub fn spectrum_of_x_with_cap(problem: &DiscreteProblem, cap: usize) -> Result<SpectrumReport> {
    if !problem.same_coefficients() {
        return Err(Error::CoefficientMismatch);
    }
    check_cap(problem.n(), cap)?;
    let tau2 = problem.tau() * problem.tau();
    let m = problem.mass().to_dense();
    let a = problem.stiffness_a().to_dense();
    let mbar = lumped_dense(problem);
    let m_inv_a = DenseLu::new(&m)?.solve_matrix(&a);
    let s1 = m.sub(&mbar);
    let s2 = mbar.add(&a.matmul(&m_inv_a).scale(tau2));
    let pencil = generalized_sym_eigenvalues(&s1, &s2)?;

    let mut direct: Vec<f64> = dense_eigenvalues(&x_dense(problem)?, cap)?.iter().map(|z| z.re).collect();
    direct.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let agreement = pencil.iter().zip(&direct).map(|(p, d)| (p - d).abs()).fold(0.0, f64::max);

    let c1 = estimate_c1(problem.mass(), problem.lumped())?;
    let lo = pencil.first().copied().unwrap_or(0.0);
    let hi = pencil.last().copied().unwrap_or(0.0);
    let mut report = SpectrumReport::new(pencil.iter().map(|&x| Complex64::new(x, 0.0)).collect());
    report.c1 = Some(c1);
    report.bound_checks = vec![
        BoundCheck::positive("x_lower", lo - (c1 - 1.0) + CONTAINMENT_TOL),
        BoundCheck::non_negative("x_upper", CONTAINMENT_TOL - hi),
        BoundCheck::non_negative("x_routes_agree", 1e-8 - agreement),
    ];
    Ok(report)
}

/// Spectrum of `B_tilde^{-1} A` together with the checks that hold when
/// `A = B`: containment in `(C1, 1]` and at least `N_h` unit eigenvalues.
pub fn btilde_spectrum(problem: &DiscreteProblem) -> Result<SpectrumReport> {
    let mut report = preconditioned_spectrum(problem, Variant::Btilde)?;
    let c1 = estimate_c1(problem.mass(), problem.lumped())?;
    report.c1 = Some(c1);
    let lo = report.min_re();
    let hi = report.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let ones = report.eigenvalues.iter().filter(|z| (*z - 1.0).norm() < 1e-6).count();
    report.bound_checks = vec![
        BoundCheck::non_negative("btilde_real", 1e-8 - report.max_abs_im()),
        BoundCheck::positive("btilde_lower", lo - (c1 - CONTAINMENT_TOL)),
        BoundCheck::non_negative("btilde_upper", 1.0 + CONTAINMENT_TOL - hi),
        BoundCheck::non_negative("btilde_unit_multiplicity", ones as f64 - problem.n() as f64),
        BoundCheck::positive("c1_in_unit_interval", c1.min(1.0 - c1)),
    ];
    Ok(report)
}

/// `E_d = B_d^{-1} [[0, tau A], [-tau B, 0]]` in `(u, v)` ordering. The
/// report lists the eigenvalues of `E_d`; its checks compare them with the
/// independently computed spectrum of `B_d^{-1} A`.
pub fn verify_bd_bound(problem: &DiscreteProblem) -> Result<SpectrumReport> {
    verify_bd_bound_with_cap(problem, DEFAULT_DENSE_CAP)
}

pub fn verify_bd_bound_with_cap(problem: &DiscreteProblem, cap: usize) -> Result<SpectrumReport> {
    check_cap(2 * problem.n(), cap)?;
    let ed = DenseLu::new(&bd_dense_uv(problem))?.solve_matrix(&bd_remainder_dense_uv(problem));
    let mut report = SpectrumReport::new(dense_eigenvalues(&ed, cap)?);
    let rho = report.rho;
    let pre = preconditioned_spectrum_with_cap(problem, Variant::Bd, cap)?;
    let disk = pre.eigenvalues.iter().map(|z| (z - 1.0).norm()).fold(0.0, f64::max);
    // eigenvalues of E_d are +-i tau sqrt(mu), mu in the spectrum of M^{-1}A M^{-1}B
    let closed_form = problem.tau() * bd_product_max(problem, cap)?.sqrt();
    report.bound_checks = vec![
        BoundCheck::positive("ed_rho_below_one", 1.0 - rho),
        BoundCheck::non_negative("bd_disk", rho + CONTAINMENT_TOL - disk),
        BoundCheck::non_negative("ed_closed_form", 1e-8 * (1.0 + rho) - (rho - closed_form).abs()),
        BoundCheck::non_negative("ed_imaginary", 1e-8 * (1.0 + rho) - report.eigenvalues.iter().map(|z| z.re.abs()).fold(0.0, f64::max)),
    ];
    Ok(report)
}

/// Largest eigenvalue of `M^{-1} A M^{-1} B`.
fn bd_product_max(problem: &DiscreteProblem, cap: usize) -> Result<f64> {
    let lu = DenseLu::new(&problem.mass().to_dense())?;
    let ma = lu.solve_matrix(&problem.stiffness_a().to_dense());
    let mb = lu.solve_matrix(&problem.stiffness_b().to_dense());
    let ev = dense_eigenvalues(&ma.matmul(&mb), cap)?;
    Ok(ev.iter().map(|z| z.re).fold(0.0, f64::max))
}

/// The `tau` at which `rho(E_d)` reaches 1, using its linearity in `tau`.
pub fn bd_threshold(problem: &DiscreteProblem) -> Result<f64> {
    let unit = problem.with_tau(1.0);
    Ok(1.0 / bd_product_max(&unit, DEFAULT_DENSE_CAP)?.sqrt())
}

/// Both sides of `V^T (A + U V^T)^{-1} U = (I + (V^T A^{-1} U)^{-1})^{-1}`.
/// When `W = V^T A^{-1} U` is singular the right side is evaluated in the
/// equivalent form `W (I + W)^{-1}`.
pub fn smw_sides(a: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let k = u.n_cols();
    let vt = v.transpose();
    let lhs = vt.matmul(&DenseLu::new(&a.add(&u.matmul(&vt)))?.solve_matrix(u));
    let w = vt.matmul(&DenseLu::new(a)?.solve_matrix(u));
    let id = DenseMatrix::identity(k);
    let rhs = match DenseLu::new(&w) {
        Ok(lu) if min_singular(&w) > 1e-12 * w.max_abs().max(1.0) => DenseLu::new(&id.add(&lu.inverse()))?.inverse(),
        _ => {
            let s = DenseLu::new(&id.add(&w))?;
            s.solve_matrix(&w.transpose()).transpose()
        }
    };
    Ok((lhs, rhs))
}

fn min_singular(m: &DenseMatrix) -> f64 {
    m.as_nalgebra()
        .clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct SmwReport {
    pub instances: usize,
    pub passed: usize,
    pub max_deviation: f64,
}

impl SmwReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.instances
    }
}

/// Checks the identity on `instances` random `(A, U, V)` with `A` of size
/// `n` and `U, V` of size `n x k`, to relative deviation `tol`. Samples with
/// a nearly singular `W` are redrawn.
pub fn verify_smw_identity(n: usize, k: usize, instances: usize, seed: u64, tol: f64) -> Result<SmwReport> {
    if n == 0 || n > 50 || k == 0 || k > n {
        return Err(Error::config("smw", format!("need 1 <= k <= n <= 50, got n={n}, k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rand_mat = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
        let data: Vec<f64> = (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_row_major(r, c, &data)
    };
    let mut report = SmwReport {
        instances,
        passed: 0,
        max_deviation: 0.0,
    };
    for _ in 0..instances {
        let mut tries = 0;
        let (lhs, rhs) = loop {
            tries += 1;
            let a = rand_mat(n, n, &mut rng).add(&DenseMatrix::identity(n).scale(n as f64));
            let u = rand_mat(n, k, &mut rng);
            let v = rand_mat(n, k, &mut rng);
            let w = v.transpose().matmul(&DenseLu::new(&a)?.solve_matrix(&u));
            let id = DenseMatrix::identity(k);
            let conditioned = min_singular(&w) > 1e-3 * w.max_abs() && min_singular(&id.add(&w)) > 1e-3;
            if conditioned || tries >= 20 {
                break smw_sides(&a, &u, &v)?;
            }
        };
        let dev = lhs.sub(&rhs).max_abs() / lhs.max_abs().max(1.0);
        report.max_deviation = report.max_deviation.max(dev);
        if dev <= tol {
            report.passed += 1;
        }
    }
    Ok(report)
}

type CMat = DMatrix<Complex64>;

fn to_complex(d: &DenseMatrix) -> CMat {
    d.as_nalgebra().map(|x| Complex64::new(x, 0.0))
}

/// Eigenvector of the pencil `(A, P)` for a computed eigenvalue `lambda`,
/// by shifted inverse iteration. Returns the vector and its relative
/// residual `|A x - lambda P x| / (|A| |x|)`.
pub fn pencil_eigenvector(a: &DenseMatrix, p: &DenseMatrix, lambda: Complex64) -> Result<(Vec<Complex64>, f64)> {
    let n = a.n_rows();
    let ac = to_complex(a);
    let pc = to_complex(p);
    let mut delta = 1e-10 * (1.0 + lambda.norm());
    let lu = loop {
        let shift = lambda + Complex64::new(delta, delta);
        let k = &ac - &pc * shift;
        let lu = k.lu();
        if lu.is_invertible() {
            break lu;
        }
        delta *= 10.0;
        if delta > 1e-2 {
            return Err(Error::Singular);
        }
    };
    let mut x = CMat::from_fn(n, 1, |i, _| Complex64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05));
    for _ in 0..4 {
        let rhs = &pc * &x;
        x = lu.solve(&rhs).ok_or(Error::Singular)?;
        let nx = x.norm();
        x /= Complex64::new(nx, 0.0);
    }
    let r = &ac * &x - &pc * &x * lambda;
    let res = r.norm() / ac.norm().max(f64::MIN_POSITIVE);
    Ok((x.iter().copied().collect(), res))
}

/// Both sides of the eigenpair identity for `B^{-1} A` with `x = (v, u)`:
/// `|lambda - 1|^2` and `4 Im(v^H dM u)^2 / (alpha^2 + 4 Im(v^H M_bar u)^2)`
/// with `dM = M - M_bar` and `alpha = tau (v^H A v + u^H B u)`.
pub fn lambda_identity_sides(problem: &DiscreteProblem, lambda: Complex64, x: &[Complex64]) -> (f64, f64) {
    let n = problem.n();
    let (v, u) = x.split_at(n);
    let quad = |m: &CsrMatrix, l: &[Complex64], r: &[Complex64]| -> Complex64 {
        m.triplets().map(|(i, j, a)| l[i].conj() * r[j] * a).sum()
    };
    let mbar = problem.lumped().diag();
    let v_mbar_u: Complex64 = (0..n).map(|i| v[i].conj() * u[i] * mbar[i]).sum();
    let v_m_u = quad(problem.mass(), v, u);
    let v_dm_u = v_m_u - v_mbar_u;
    let alpha = problem.tau() * (quad(problem.stiffness_a(), v, v).re + quad(problem.stiffness_b(), u, u).re);
    let lhs = (lambda - 1.0).norm_sqr();
    let rhs = 4.0 * v_dm_u.im.powi(2) / (alpha * alpha + 4.0 * v_mbar_u.im.powi(2));
    (lhs, rhs)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_residual: f64,
}

/// Reconstructs eigenvectors of `B^{-1} A` and evaluates the eigenpair
/// identity. With `sample = Some(k)`, only `k` eigenvalues drawn with `seed`
/// are checked; otherwise all are.
pub fn verify_lambda_identity(problem: &DiscreteProblem, sample: Option<usize>, seed: u64) -> Result<IdentityReport> {
    let a = BlockOperator::new(problem.clone(), Variant::A).densify();
    let p = BlockOperator::new(problem.clone(), Variant::B).densify();
    let spec = preconditioned_spectrum(problem, Variant::B)?;
    let mut idx: Vec<usize> = (0..spec.eigenvalues.len()).collect();
    if let Some(k) = sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..idx.len() {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        idx.truncate(k);
    }
    let mut report = IdentityReport {
        checked: 0,
        max_rel_error: 0.0,
        max_residual: 0.0,
    };
    for i in idx {
        let lambda = spec.eigenvalues[i];
        let (x, res) = pencil_eigenvector(&a, &p, lambda)?;
        let (lhs, rhs) = lambda_identity_sides(problem, lambda, &x);
        let err = (lhs - rhs).abs() / lhs.max(rhs).max(1e-12);
        report.checked += 1;
        report.max_rel_error = report.max_rel_error.max(err);
        report.max_residual = report.max_residual.max(res);
    }
    Ok(report)
}
