//! Triangulations of the L-shaped domain `(-1,1)^2 \ [0,1)^2`, uniform
//! red refinement, and boundary-condition driven DOF classification.

use std::collections::HashMap;
use std::io::Write;

use crate::sparse::{CsrMatrix, TripletBuilder};

/// Boundary segment tags for the L-shaped domain.
pub mod segment {
    /// `y = -1`
    pub const BOTTOM: u8 = 0;
    /// `x = 1`, `y in [-1, 0]`
    pub const RIGHT: u8 = 1;
    /// `y = 0`, `x in [0, 1]` (reentrant side)
    pub const INNER_HORIZONTAL: u8 = 2;
    /// `x = 0`, `y in [0, 1]` (reentrant side)
    pub const INNER_VERTICAL: u8 = 3;
    /// `y = 1`
    pub const TOP: u8 = 4;
    /// `x = -1`
    pub const LEFT: u8 = 5;

    pub fn name(tag: u8) -> &'static str {
        match tag {
            BOTTOM => "bottom",
            RIGHT => "right",
            INNER_HORIZONTAL => "inner_horizontal",
            INNER_VERTICAL => "inner_vertical",
            TOP => "top",
            LEFT => "left",
            _ => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub segment: u8,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Base-mesh cell each triangle descends from.
    regions: Vec<u8>,
    level: u32,
    boundary_edges: Vec<BoundaryEdge>,
    tagger: fn([f64; 2]) -> u8,
    rank: Vec<usize>,
}

/// Coarse-grid origin of a fine vertex after one uniform refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parent {
    Twin(usize),
    Midpoint(usize, usize),
}

/// Nodal interpolation data between two consecutive meshes.
#[derive(Debug, Clone)]
pub struct TransferMap {
    parents: Vec<Parent>,
    n_coarse: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcSpec {
    #[default]
    AllDirichlet,
    /// Homogeneous Neumann on the open reentrant sides `{x=0, 0<y<1}` and
    /// `{y=0, 0<x<1}`, Dirichlet elsewhere.
    MixedCorner,
}

impl BcSpec {
    pub fn is_neumann(self, segment: u8) -> bool {
        match self {
            BcSpec::AllDirichlet => false,
            BcSpec::MixedCorner => matches!(
                segment,
                segment::INNER_HORIZONTAL | segment::INNER_VERTICAL
            ),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BcSpec::AllDirichlet => "all_dirichlet",
            BcSpec::MixedCorner => "mixed_corner",
        }
    }
}

/// How free DOFs are numbered. Gauss-Seidel sweeps follow this numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DofOrdering {
    /// Vertices of the base mesh first, then the midpoints created by each
    /// refinement, appended in order of their parent edge `(lower, higher)`
    /// where parents are compared by this same numbering.
    #[default]
    Hierarchical,
    /// Ascending vertex index, i.e. lexicographic by `(y, x)`.
    Lexicographic,
}

/// Free/fixed split of mesh vertices.
#[derive(Debug, Clone)]
pub struct DofMap {
    free: Vec<usize>,
    fixed: Vec<usize>,
    index: Vec<Option<usize>>,
}

impl DofMap {
    /// Every vertex carries an unknown.
    pub fn all_free(n_vertices: usize) -> DofMap {
        DofMap {
            free: (0..n_vertices).collect(),
            fixed: Vec::new(),
            index: (0..n_vertices).map(Some).collect(),
        }
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// DOF index of a vertex, `None` when the vertex is fixed.
    pub fn dof(&self, vertex: usize) -> Option<usize> {
        self.index[vertex]
    }
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn lshape_segment(mid: [f64; 2]) -> u8 {
    let [x, y] = mid;
    if y == -1.0 {
        segment::BOTTOM
    } else if x == 1.0 {
        segment::RIGHT
    } else if x == -1.0 {
        segment::LEFT
    } else if y == 1.0 {
        segment::TOP
    } else if y == 0.0 && x > 0.0 {
        segment::INNER_HORIZONTAL
    } else if x == 0.0 && y > 0.0 {
        segment::INNER_VERTICAL
    } else {
        u8::MAX
    }
}

impl Mesh {
    /// Base mesh built from unit squares given by their lower-left corners.
    /// Every square is split along its lower-left to upper-right diagonal.
    /// `tagger` maps a boundary edge midpoint to its segment tag.
    pub fn from_unit_squares(corners: &[(i32, i32)], tagger: fn([f64; 2]) -> u8) -> Mesh {
        let mut coords: Vec<(i32, i32)> = corners
            .iter()
            .flat_map(|&(x, y)| [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)])
            .collect();
        coords.sort_by_key(|&(x, y)| (y, x));
        coords.dedup();
        let lookup: HashMap<(i32, i32), usize> =
            coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut triangles = Vec::with_capacity(2 * corners.len());
        let mut regions = Vec::with_capacity(2 * corners.len());
        for (cell, &(x, y)) in corners.iter().enumerate() {
            let a = lookup[&(x, y)];
            let b = lookup[&(x + 1, y)];
            let c = lookup[&(x + 1, y + 1)];
            let d = lookup[&(x, y + 1)];
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
            regions.extend([cell as u8, cell as u8]);
        }
        let vertices = coords.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
        let mut mesh = Mesh {
            vertices,
            triangles,
            regions,
            level: 0,
            boundary_edges: Vec::new(),
            tagger,
            rank: (0..coords.len()).collect(),
        };
        mesh.boundary_edges = mesh.find_boundary_edges(tagger);
        mesh
    }

    /// Mesh from explicit vertices and counterclockwise triangles. Boundary
    /// edges get segment tag 0.
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Mesh {
        let n = vertices.len();
        let regions = vec![0; triangles.len()];
        let mut mesh = Mesh {
            vertices,
            triangles,
            regions,
            level: 0,
            boundary_edges: Vec::new(),
            tagger: |_| 0,
            rank: (0..n).collect(),
        };
        mesh.boundary_edges = mesh.find_boundary_edges(|_| 0);
        mesh
    }

    /// The L-shaped domain after `level` uniform refinements of the
    /// six-triangle base mesh.
    pub fn lshape(level: u32) -> Mesh {
        let mut mesh = Mesh::from_unit_squares(&[(-1, -1), (0, -1), (-1, 0)], lshape_segment);
        for _ in 0..level {
            mesh = mesh.refine().0;
        }
        mesh
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn regions(&self) -> &[u8] {
        &self.regions
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Position of each vertex in the hierarchical numbering.
    pub fn hierarchical_rank(&self) -> &[usize] {
        &self.rank
    }

    /// Edge length of the square cells, `2^-level`.
    pub fn h(&self) -> f64 {
        Mesh::lshape_h(self.level)
    }

    /// Mesh size of the level-`level` L-shape mesh, without building it.
    pub fn lshape_h(level: u32) -> f64 {
        0.5f64.powi(level as i32)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [p, q, r] = self.triangle_coords(t);
        signed_area(p, q, r)
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [p, q, r] = self.triangle_coords(t);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::with_capacity(3 * self.triangles.len() / 2 + 8);
        for t in &self.triangles {
            for k in 0..3 {
                *counts.entry(edge_key(t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        counts
    }

    fn find_boundary_edges(&self, tagger: fn([f64; 2]) -> u8) -> Vec<BoundaryEdge> {
        let counts = self.edge_counts();
        let mut edges: Vec<BoundaryEdge> = Vec::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if counts[&edge_key(a, b)] == 1 {
                    let (pa, pb) = (self.vertices[a], self.vertices[b]);
                    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                    edges.push(BoundaryEdge {
                        a,
                        b,
                        segment: tagger(mid),
                    });
                }
            }
        }
        edges.sort_by_key(|e| (e.segment, edge_key(e.a, e.b)));
        edges
    }

    /// Splits each triangle into four by its edge midpoints.
    pub fn refine(&self) -> (Mesh, TransferMap) {
        let tagger = self.tagger;
        let nv = self.vertices.len();
        let mut coords = self.vertices.clone();
        let mut parents: Vec<Parent> = (0..nv).map(Parent::Twin).collect();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, coords: &mut Vec<[f64; 2]>| -> usize {
            *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                let (pa, pb) = (coords[a], coords[b]);
                coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                let (p, q) = edge_key(a, b);
                parents.push(Parent::Midpoint(p, q));
                coords.len() - 1
            })
        };
        let mut children = Vec::with_capacity(4 * self.triangles.len());
        let mut regions = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[p0, p1, p2]) in self.triangles.iter().enumerate() {
            let m01 = midpoint(p0, p1, &mut coords);
            let m12 = midpoint(p1, p2, &mut coords);
            let m20 = midpoint(p2, p0, &mut coords);
            children.extend([
                [p0, m01, m20],
                [m01, p1, m12],
                [m20, m12, p2],
                [m01, m12, m20],
            ]);
            regions.extend([self.regions[t]; 4]);
        }

        // Renumber lexicographically by (y, x). Coordinates are dyadic, so
        // exact comparisons are safe.
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (coords[i], coords[j]);
            (a[1], a[0]).partial_cmp(&(b[1], b[0])).unwrap()
        });
        let mut new_index = vec![0; coords.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let vertices = order.iter().map(|&old| coords[old]).collect();
        let parents: Vec<Parent> = order.iter().map(|&old| parents[old]).collect();
        let mut mids: Vec<((usize, usize), usize)> = Vec::new();
        let mut rank = vec![0; coords.len()];
        for (new, p) in parents.iter().enumerate() {
            match *p {
                Parent::Twin(c) => rank[new] = self.rank[c],
                Parent::Midpoint(a, b) => {
                    let (ra, rb) = (self.rank[a], self.rank[b]);
                    mids.push(((ra.min(rb), ra.max(rb)), new));
                }
            }
        }
        mids.sort();
        for (k, &(_, new)) in mids.iter().enumerate() {
            rank[new] = nv + k;
        }
        let triangles = children
            .iter()
            .map(|t| [new_index[t[0]], new_index[t[1]], new_index[t[2]]])
            .collect();

        let mut fine = Mesh {
            vertices,
            triangles,
            regions,
            level: self.level + 1,
            boundary_edges: Vec::new(),
            tagger,
            rank,
        };
        fine.boundary_edges = fine.find_boundary_edges(tagger);
        (
            fine,
            TransferMap {
                parents,
                n_coarse: nv,
            },
        )
    }

    /// Checks positivity of every triangle and conformity of the edge graph.
    pub fn validate(&self) -> Result<(), String> {
        for t in 0..self.triangles.len() {
            let a = self.area(t);
            if a <= 0.0 {
                return Err(format!("triangle {t} has non-positive area {a}"));
            }
        }
        let counts = self.edge_counts();
        let boundary = counts.values().filter(|&&c| c == 1).count();
        if let Some((e, c)) = counts.iter().find(|(_, &c)| c > 2) {
            return Err(format!("edge {e:?} shared by {c} triangles"));
        }
        if boundary != self.boundary_edges.len() {
            return Err("boundary edge list out of date".into());
        }
        Ok(())
    }

    /// Splits vertices into free and fixed according to `bc`. A boundary
    /// vertex stays free only when it lies strictly inside a Neumann segment.
    pub fn classify_dofs(&self, bc: BcSpec) -> DofMap {
        self.classify_dofs_ordered(bc, DofOrdering::default())
    }

    /// As [`Mesh::classify_dofs`] with an explicit DOF numbering.
    pub fn classify_dofs_ordered(&self, bc: BcSpec, ordering: DofOrdering) -> DofMap {
        let nv = self.vertices.len();
        // Per vertex: (touches a Dirichlet edge, set of Neumann segments touched)
        let mut on_boundary = vec![false; nv];
        let mut dirichlet = vec![false; nv];
        let mut neumann_segment: Vec<Option<u8>> = vec![None; nv];
        for e in &self.boundary_edges {
            for v in [e.a, e.b] {
                on_boundary[v] = true;
                if bc.is_neumann(e.segment) {
                    match neumann_segment[v] {
                        None => neumann_segment[v] = Some(e.segment),
                        // corner between two Neumann segments
                        Some(s) if s != e.segment => dirichlet[v] = true,
                        _ => {}
                    }
                } else {
                    dirichlet[v] = true;
                }
            }
        }
        let mut free = Vec::new();
        let mut fixed = Vec::new();
        let mut index = vec![None; nv];
        let mut visit: Vec<usize> = (0..nv).collect();
        if ordering == DofOrdering::Hierarchical {
            visit.sort_by_key(|&v| self.rank[v]);
        }
        for v in visit {
            if on_boundary[v] && dirichlet[v] {
                fixed.push(v);
            } else {
                index[v] = Some(free.len());
                free.push(v);
            }
        }
        DofMap { free, fixed, index }
    }

    /// Writes `id,x,y` vertex rows.
    pub fn write_vertices_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,x,y")?;
        for (i, p) in self.vertices.iter().enumerate() {
            writeln!(w, "{i},{},{}", p[0], p[1])?;
        }
        Ok(())
    }

    /// Writes `id,v0,v1,v2,tag` triangle rows; the tag is the base cell.
    pub fn write_triangles_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,v0,v1,v2,tag")?;
        for (i, (t, r)) in self.triangles.iter().zip(&self.regions).enumerate() {
            writeln!(w, "{i},{},{},{},{r}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn write_boundary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,v0,v1,segment")?;
        for (i, e) in self.boundary_edges.iter().enumerate() {
            writeln!(w, "{i},{},{},{}", e.a, e.b, segment::name(e.segment))?;
        }
        Ok(())
    }
}

impl TransferMap {
    pub fn parents(&self) -> &[Parent] {
        &self.parents
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    pub fn n_fine(&self) -> usize {
        self.parents.len()
    }

    /// Linear interpolation of a coarse nodal vector (all vertices).
    pub fn prolong_vertices(&self, coarse: &[f64]) -> Vec<f64> {
        assert_eq!(coarse.len(), self.n_coarse);
        self.parents
            .iter()
            .map(|p| match *p {
                Parent::Twin(c) => coarse[c],
                Parent::Midpoint(a, b) => 0.5 * (coarse[a] + coarse[b]),
            })
            .collect()
    }

    /// Prolongation between free DOFs. Fixed coarse parents carry the
    /// homogeneous boundary value and contribute nothing.
    pub fn prolongation(&self, coarse: &DofMap, fine: &DofMap) -> CsrMatrix {
        let mut builder = TripletBuilder::new(fine.n_free(), coarse.n_free());
        for (row, &v) in fine.free().iter().enumerate() {
            match self.parents[v] {
                Parent::Twin(c) => {
                    if let Some(j) = coarse.dof(c) {
                        builder.push(row, j, 1.0);
                    }
                }
                Parent::Midpoint(a, b) => {
                    for c in [a, b] {
                        if let Some(j) = coarse.dof(c) {
                            builder.push(row, j, 0.5);
                        }
                    }
                }
            }
        }
        builder.build()
    }
}
