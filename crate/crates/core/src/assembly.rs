//! P1 mass and stiffness assembly on free DOFs and the lumped mass matrix.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BcSpec, DofMap, DofOrdering, Mesh};
use crate::sparse::{CsrMatrix, CsrPattern, DiagonalMatrix};

/// Scalar diffusion coefficient field.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// `a = 1`
    NiceA,
    /// `0.6` below the diagonal `x2 < x1`, `1.2` elsewhere
    NiceB,
    /// `0.1|x1| + |x2|`
    DegenerateA,
    /// `10 + 3 sin(5 pi x1) sin(8 pi x2)`
    DegenerateB,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Coefficient {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::NiceA => 1.0,
            Coefficient::NiceB => {
                if y < x {
                    0.6
                } else {
                    1.2
                }
            }
            Coefficient::DegenerateA => 0.1 * x.abs() + y.abs(),
            Coefficient::DegenerateB => 10.0 + 3.0 * (5.0 * PI * x).sin() * (8.0 * PI * y).sin(),
            Coefficient::Custom(f) => f(x, y),
        }
    }

    /// Whether two coefficients are known to be the same field.
    pub fn same_as(&self, other: &Coefficient) -> bool {
        use Coefficient::*;
        match (self, other) {
            (Constant(a), Constant(b)) => a == b,
            (Constant(c), NiceA) | (NiceA, Constant(c)) => *c == 1.0,
            (NiceA, NiceA) | (NiceB, NiceB) | (DegenerateA, DegenerateA) | (DegenerateB, DegenerateB) => true,
            (Custom(f), Custom(g)) => Arc::ptr_eq(f, g),
            _ => false,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::NiceA => f.write_str("NiceA"),
            Coefficient::NiceB => f.write_str("NiceB"),
            Coefficient::DegenerateA => f.write_str("DegenerateA"),
            Coefficient::DegenerateB => f.write_str("DegenerateB"),
            Coefficient::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Coefficients and boundary conditions of one model problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub a: Coefficient,
    pub b: Coefficient,
    pub bc: BcSpec,
    pub ordering: DofOrdering,
}

impl ProblemSpec {
    /// Example 1: `a = 1`, piecewise constant `b`.
    pub fn nice() -> Self {
        ProblemSpec {
            a: Coefficient::NiceA,
            b: Coefficient::NiceB,
            bc: BcSpec::AllDirichlet,
            ordering: DofOrdering::Hierarchical,
        }
    }

    /// Example 2: degenerate `a`, oscillating `b`.
    pub fn degenerate() -> Self {
        ProblemSpec {
            a: Coefficient::DegenerateA,
            b: Coefficient::DegenerateB,
            bc: BcSpec::AllDirichlet,
            ordering: DofOrdering::Hierarchical,
        }
    }

    /// `a = b = 1`.
    pub fn laplace() -> Self {
        ProblemSpec {
            a: Coefficient::Constant(1.0),
            b: Coefficient::Constant(1.0),
            bc: BcSpec::AllDirichlet,
            ordering: DofOrdering::Hierarchical,
        }
    }

    pub fn with_bc(mut self, bc: BcSpec) -> Self {
        self.bc = bc;
        self
    }

    pub fn with_ordering(mut self, ordering: DofOrdering) -> Self {
        self.ordering = ordering;
        self
    }
}

/// Sparsity pattern of P1 couplings between free DOFs. Every pair of free
/// vertices sharing a triangle is present, including pairs whose stiffness
/// entry happens to vanish, so mass and stiffness matrices share it.
pub fn p1_pattern(mesh: &Mesh, dofs: &DofMap) -> CsrPattern {
    let n = dofs.n_free();
    let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(7); n];
    for t in mesh.triangles() {
        for &p in t {
            if let Some(i) = dofs.dof(p) {
                rows[i].extend(t.iter().filter_map(|&q| dofs.dof(q)));
            }
        }
    }
    CsrPattern::from_rows(n, rows)
}

struct Element {
    area: f64,
    grads: [[f64; 2]; 3],
    dofs: [Option<usize>; 3],
}

fn element(mesh: &Mesh, dofs: &DofMap, t: usize) -> Element {
    let [p0, p1, p2] = mesh.triangle_coords(t);
    let area = mesh.area(t);
    let s = 1.0 / (2.0 * area);
    let grads = [
        [(p1[1] - p2[1]) * s, (p2[0] - p1[0]) * s],
        [(p2[1] - p0[1]) * s, (p0[0] - p2[0]) * s],
        [(p0[1] - p1[1]) * s, (p1[0] - p0[0]) * s],
    ];
    let tri = mesh.triangles()[t];
    Element {
        area,
        grads,
        dofs: [dofs.dof(tri[0]), dofs.dof(tri[1]), dofs.dof(tri[2])],
    }
}

fn assemble_with<F>(mesh: &Mesh, dofs: &DofMap, pattern: &Arc<CsrPattern>, mut local: F) -> Result<CsrMatrix>
where
    F: FnMut(usize, &Element) -> Result<[[f64; 3]; 3]>,
{
    let mut values = vec![0.0; pattern.nnz()];
    for t in 0..mesh.triangles().len() {
        let el = element(mesh, dofs, t);
        let k = local(t, &el)?;
        for (a, da) in el.dofs.iter().enumerate() {
            let Some(i) = *da else { continue };
            for (b, db) in el.dofs.iter().enumerate() {
                let Some(j) = *db else { continue };
                let pos = pattern.find(i, j).expect("pattern covers element couplings");
                values[pos] += k[a][b];
            }
        }
    }
    Ok(CsrMatrix::from_pattern(pattern.clone(), values))
}

fn mass_on(mesh: &Mesh, dofs: &DofMap, pattern: &Arc<CsrPattern>) -> CsrMatrix {
    assemble_with(mesh, dofs, pattern, |_, el| {
        let d = el.area / 6.0;
        let o = el.area / 12.0;
        Ok([[d, o, o], [o, d, o], [o, o, d]])
    })
    .expect("mass assembly cannot fail")
}

fn stiffness_on(mesh: &Mesh, dofs: &DofMap, pattern: &Arc<CsrPattern>, c: &Coefficient) -> Result<CsrMatrix> {
    assemble_with(mesh, dofs, pattern, |t, el| {
        let [x, y] = mesh.barycenter(t);
        let cval = c.eval(x, y);
        if !(cval > 0.0) {
            return Err(Error::NonPositiveCoefficient {
                triangle: t,
                value: cval,
            });
        }
        let mut k = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let g = el.grads;
                k[a][b] = cval * el.area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
        Ok(k)
    })
}

/// Consistent P1 mass matrix on the free DOFs.
pub fn assemble_mass(mesh: &Mesh, dofs: &DofMap) -> CsrMatrix {
    mass_on(mesh, dofs, &Arc::new(p1_pattern(mesh, dofs)))
}

/// P1 stiffness matrix for `(c grad u, grad v)` with the coefficient
/// sampled at each triangle barycenter.
pub fn assemble_stiffness(mesh: &Mesh, dofs: &DofMap, c: &Coefficient) -> Result<CsrMatrix> {
    stiffness_on(mesh, dofs, &Arc::new(p1_pattern(mesh, dofs)), c)
}

/// Vertex-quadrature lumped mass: `sum |K|/3` over triangles incident to each
/// free vertex. Contributions to fixed neighbours are kept, so this equals the
/// row sums of the unrestricted mass matrix.
pub fn lump(mesh: &Mesh, dofs: &DofMap) -> DiagonalMatrix {
    let mut d = vec![0.0; dofs.n_free()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.area(t) / 3.0;
        for &v in tri {
            if let Some(i) = dofs.dof(v) {
                d[i] += third;
            }
        }
    }
    DiagonalMatrix::new(d)
}

/// Diagonal of row sums of an assembled matrix.
pub fn row_sum_lumping(m: &CsrMatrix) -> DiagonalMatrix {
    DiagonalMatrix::new(m.row_sums())
}

/// Matrices of one discretization level; independent of `tau`.
#[derive(Debug)]
pub struct SystemMatrices {
    /// Absent for systems built directly from matrices.
    pub mesh: Option<Arc<Mesh>>,
    pub dofs: Option<DofMap>,
    pub mass: CsrMatrix,
    pub stiffness_a: CsrMatrix,
    pub stiffness_b: CsrMatrix,
    pub lumped: DiagonalMatrix,
    /// Load vector for `f = 1`.
    pub load: Vec<f64>,
    /// Whether `a` and `b` are the same coefficient field.
    pub same_coefficients: bool,
}

impl SystemMatrices {
    pub fn assemble(mesh: Arc<Mesh>, spec: &ProblemSpec) -> Result<Self> {
        let dofs = mesh.classify_dofs_ordered(spec.bc, spec.ordering);
        let pattern = Arc::new(p1_pattern(&mesh, &dofs));
        let mass = mass_on(&mesh, &dofs, &pattern);
        let stiffness_a = stiffness_on(&mesh, &dofs, &pattern, &spec.a)?;
        let stiffness_b = stiffness_on(&mesh, &dofs, &pattern, &spec.b)?;
        let lumped = lump(&mesh, &dofs);
        let load = lumped.diag().to_vec();
        let lumped = DiagonalMatrix::positive(lumped.diag().to_vec())?;
        Ok(SystemMatrices {
            mesh: Some(mesh),
            dofs: Some(dofs),
            mass,
            stiffness_a,
            stiffness_b,
            lumped,
            load,
            same_coefficients: spec.a.same_as(&spec.b),
        })
    }

    /// Builds a system from user matrices. The three sparse matrices are
    /// moved onto the union of their patterns; `a_equals_b` is recorded as
    /// given and only used to gate checks that need `A = B`.
    pub fn from_matrices(
        mass: &CsrMatrix,
        stiffness_a: &CsrMatrix,
        stiffness_b: &CsrMatrix,
        lumped: Vec<f64>,
        load: Vec<f64>,
        a_equals_b: bool,
    ) -> Result<Self> {
        let n = mass.n_rows();
        for m in [mass, stiffness_a, stiffness_b] {
            if m.n_rows() != n || m.n_cols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.n_rows().max(m.n_cols()),
                });
            }
        }
        for len in [lumped.len(), load.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for m in [mass, stiffness_a, stiffness_b] {
            for (i, j, _) in m.triplets() {
                rows[i].push(j);
            }
        }
        for (i, r) in rows.iter_mut().enumerate() {
            r.push(i);
        }
        let pattern = Arc::new(CsrPattern::from_rows(n, rows));
        let lift = |m: &CsrMatrix| {
            let mut v = vec![0.0; pattern.nnz()];
            for (i, j, x) in m.triplets() {
                v[pattern.find(i, j).expect("union pattern")] += x;
            }
            CsrMatrix::from_pattern(pattern.clone(), v)
        };
        Ok(SystemMatrices {
            mesh: None,
            dofs: None,
            mass: lift(mass),
            stiffness_a: lift(stiffness_a),
            stiffness_b: lift(stiffness_b),
            lumped: DiagonalMatrix::positive(lumped)?,
            load,
            same_coefficients: a_equals_b,
        })
    }

    pub fn n(&self) -> usize {
        self.mass.n_rows()
    }
}

/// One linear system `[[tau A, M], [M, -tau B]] (v; u) = (f; g)`.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    matrices: Arc<SystemMatrices>,
    tau: f64,
}

impl DiscreteProblem {
    pub fn new(matrices: Arc<SystemMatrices>, tau: f64) -> Self {
        DiscreteProblem { matrices, tau }
    }

    /// Assembles the level-`level` L-shape problem.
    pub fn lshape(level: u32, spec: &ProblemSpec, tau: f64) -> Result<Self> {
        let m = SystemMatrices::assemble(Arc::new(Mesh::lshape(level)), spec)?;
        Ok(DiscreteProblem::new(Arc::new(m), tau))
    }

    /// Same matrices, different `tau`.
    pub fn with_tau(&self, tau: f64) -> Self {
        DiscreteProblem {
            matrices: self.matrices.clone(),
            tau,
        }
    }

    pub fn matrices(&self) -> &Arc<SystemMatrices> {
        &self.matrices
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.matrices.n()
    }

    pub fn mesh(&self) -> Option<&Mesh> {
        self.matrices.mesh.as_deref()
    }

    pub fn dofs(&self) -> Option<&DofMap> {
        self.matrices.dofs.as_ref()
    }

    /// Whether `A = B` is known to hold.
    pub fn same_coefficients(&self) -> bool {
        self.matrices.same_coefficients
    }

    /// Builds a problem from 1x1 blocks `[a]`, `[b]`, `[m]`, with `M = M_bar`.
    pub fn scalar(a: f64, b: f64, m: f64, tau: f64) -> Result<Self> {
        let one = |x: f64| CsrMatrix::identity(1).scaled(x);
        let mats = SystemMatrices::from_matrices(&one(m), &one(a), &one(b), vec![m], vec![m], a == b)?;
        Ok(DiscreteProblem::new(Arc::new(mats), tau))
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.matrices.mass
    }

    pub fn stiffness_a(&self) -> &CsrMatrix {
        &self.matrices.stiffness_a
    }

    pub fn stiffness_b(&self) -> &CsrMatrix {
        &self.matrices.stiffness_b
    }

    pub fn lumped(&self) -> &DiagonalMatrix {
        &self.matrices.lumped
    }

    /// Block right-hand side `(f; g)` with `f = 1`, `g = 0`.
    pub fn rhs(&self) -> Vec<f64> {
        let n = self.n();
        let mut r = vec![0.0; 2 * n];
        r[..n].copy_from_slice(&self.matrices.load);
        r
    }
}
