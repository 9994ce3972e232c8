//! Q1 finite elements: quadrature, stiffness, mass and load assembly, and
//! the non-matching coupling matrix between a background and an immersed mesh.

mod problem;

use std::sync::Arc;

pub use problem::{
    build_saddle_system, BoundaryCondition, Forcing, Geometry, ProblemConfig, Refinement,
    SaddleSystem, DEFAULT_QUAD_ORDER,
};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{jacobian, q1_gradients, q1_values, Mesh, Point};

/// Tensor Gauss–Legendre rule on the reference square `[0,1]²`; weights sum to 1.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    order: usize,
}

impl QuadratureRule {
    /// `q × q` Gauss points, exact for polynomials of degree `2q − 1` in each variable.
    pub fn gauss(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one point".into(),
            ));
        }
        let (x, w) = gauss_legendre_unit(q);
        let mut points = Vec::with_capacity(q * q);
        let mut weights = Vec::with_capacity(q * q);
        for j in 0..q {
            for i in 0..q {
                points.push([x[i], x[j]]);
                weights.push(w[i] * w[j]);
            }
        }
        Ok(Self {
            points,
            weights,
            order: 2 * q - 1,
        })
    }

    /// Polynomial degree per variable integrated exactly.
    pub fn exactness(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[0,1]` by Newton iteration on `P_q`.
fn gauss_legendre_unit(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(q, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(q, t);
        dp = if d != 0.0 { d } else { dp };
        x[q - 1 - i] = 0.5 * (1.0 + t);
        w[q - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn legendre(q: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=q {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Q1 space on a mesh with an optional set of homogeneous Dirichlet nodes.
#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    dirichlet: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        Self {
            mesh,
            dirichlet: Vec::new(),
        }
    }

    /// Constrains the given nodes, which must lie on the mesh boundary.
    pub fn with_dirichlet(mesh: Arc<Mesh>, nodes: &[usize]) -> Result<Self> {
        let boundary = mesh.boundary_nodes();
        let mut d = nodes.to_vec();
        d.sort_unstable();
        d.dedup();
        if let Some(bad) = d.iter().find(|i| boundary.binary_search(i).is_err()) {
            return Err(Error::InvalidArgument(format!(
                "Dirichlet node {bad} is not on the boundary"
            )));
        }
        Ok(Self { mesh, dirichlet: d })
    }

    /// Constrains every boundary node.
    pub fn with_boundary_dirichlet(mesh: Arc<Mesh>) -> Self {
        let dirichlet = mesh.boundary_nodes().to_vec();
        Self { mesh, dirichlet }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        self.mesh.node_count()
    }

    /// Sorted constrained node indices.
    pub fn dirichlet(&self) -> &[usize] {
        &self.dirichlet
    }

    /// Value of the finite-element function with nodal values `u` at `p`.
    pub fn evaluate(&self, u: &[f64], p: Point) -> Result<f64> {
        let loc = self.mesh.locate_point(p)?;
        let n = q1_values(loc.ref_coords[0], loc.ref_coords[1]);
        let cell = self.mesh.cells()[loc.cell_index];
        Ok((0..4).map(|a| n[a] * u[cell[a]]).sum())
    }
}

struct CellGeometry {
    det: f64,
    grads: [[f64; 2]; 4],
    point: Point,
}

fn cell_geometry(v: &[Point; 4], r: Point) -> CellGeometry {
    let j = jacobian(v, r);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let g = q1_gradients(r[0], r[1]);
    let mut grads = [[0.0; 2]; 4];
    for a in 0..4 {
        grads[a][0] = (j[1][1] * g[a][0] - j[1][0] * g[a][1]) / det;
        grads[a][1] = (-j[0][1] * g[a][0] + j[0][0] * g[a][1]) / det;
    }
    let n = q1_values(r[0], r[1]);
    let mut point = [0.0; 2];
    for a in 0..4 {
        point[0] += n[a] * v[a][0];
        point[1] += n[a] * v[a][1];
    }
    CellGeometry { det, grads, point }
}

fn finish(space: &FeSpace, triplets: &[(usize, usize, f64)], apply_dirichlet: bool) -> CsrMatrix {
    let n = space.dof_count();
    let mat = CsrMatrix::from_triplets(n, n, triplets).expect("cell indices lie in range");
    if apply_dirichlet && !space.dirichlet.is_empty() {
        mat.with_symmetric_dirichlet(&space.dirichlet)
    } else {
        mat
    }
}

/// Matrix of `coefficient · (∇u, ∇v)` with 2×2 Gauss quadrature. With
/// `apply_dirichlet`, constrained rows and columns become unit vectors.
pub fn assemble_stiffness(
    space: &FeSpace,
    coefficient: f64,
    apply_dirichlet: bool,
) -> Result<CsrMatrix> {
    if !(coefficient > 0.0 && coefficient.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "stiffness coefficient must be positive, got {coefficient}"
        )));
    }
    let quad = QuadratureRule::gauss(2)?;
    let mesh = space.mesh();
    let mut triplets = Vec::with_capacity(16 * mesh.cell_count());
    for (c, cell) in mesh.cells().iter().enumerate() {
        let v = mesh.cell_vertices(c);
        let mut local = [[0.0; 4]; 4];
        for (r, w) in quad.points.iter().zip(&quad.weights) {
            let g = cell_geometry(&v, *r);
            let s = coefficient * w * g.det;
            for (row, ga) in local.iter_mut().zip(&g.grads) {
                for (entry, gb) in row.iter_mut().zip(&g.grads) {
                    *entry += s * (ga[0] * gb[0] + ga[1] * gb[1]);
                }
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                triplets.push((cell[a], cell[b], local[a][b]));
            }
        }
    }
    Ok(finish(space, &triplets, apply_dirichlet))
}

/// Consistent mass matrix with 2×2 Gauss quadrature.
pub fn assemble_mass(space: &FeSpace) -> CsrMatrix {
    let quad = QuadratureRule::gauss(2).expect("two-point rule");
    let mesh = space.mesh();
    let mut triplets = Vec::with_capacity(16 * mesh.cell_count());
    for (c, cell) in mesh.cells().iter().enumerate() {
        let v = mesh.cell_vertices(c);
        let mut local = [[0.0; 4]; 4];
        for (r, w) in quad.points.iter().zip(&quad.weights) {
            let g = cell_geometry(&v, *r);
            let n = q1_values(r[0], r[1]);
            for a in 0..4 {
                for b in 0..4 {
                    local[a][b] += w * g.det * n[a] * n[b];
                }
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                triplets.push((cell[a], cell[b], local[a][b]));
            }
        }
    }
    finish(space, &triplets, false)
}

/// Load vector `(f, φ_i)` with 3×3 Gauss quadrature; constrained entries are zero.
pub fn assemble_load(space: &FeSpace, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let quad = QuadratureRule::gauss(3).expect("three-point rule");
    let mesh = space.mesh();
    let mut b = vec![0.0; space.dof_count()];
    for (c, cell) in mesh.cells().iter().enumerate() {
        let v = mesh.cell_vertices(c);
        for (r, w) in quad.points.iter().zip(&quad.weights) {
            let g = cell_geometry(&v, *r);
            let n = q1_values(r[0], r[1]);
            let fx = f(g.point) * w * g.det;
            for a in 0..4 {
                b[cell[a]] += fx * n[a];
            }
        }
    }
    for &i in space.dirichlet() {
        b[i] = 0.0;
    }
    b
}

/// Coupling matrix `C[k, i] = ∫_{Ω₂} ψ_k φ_i` (ℓ × n), integrated with
/// `quad_order × quad_order` Gauss points per immersed cell and background
/// basis functions evaluated by point location.
pub fn assemble_coupling(bg: &FeSpace, im: &FeSpace, quad_order: usize) -> Result<CsrMatrix> {
    if quad_order < 2 {
        return Err(Error::InvalidArgument(
            "coupling quadrature order must be at least 2".into(),
        ));
    }
    let quad = QuadratureRule::gauss(quad_order)?;
    let bg_mesh = bg.mesh();
    let im_mesh = im.mesh();
    let mut triplets = Vec::with_capacity(16 * quad.len() * im_mesh.cell_count());
    for (c, cell) in im_mesh.cells().iter().enumerate() {
        let v = im_mesh.cell_vertices(c);
        for (r, w) in quad.points.iter().zip(&quad.weights) {
            let g = cell_geometry(&v, *r);
            let psi = q1_values(r[0], r[1]);
            let loc = bg_mesh.locate_point(g.point)?;
            let phi = q1_values(loc.ref_coords[0], loc.ref_coords[1]);
            let bg_cell = bg_mesh.cells()[loc.cell_index];
            let s = w * g.det;
            for k in 0..4 {
                for i in 0..4 {
                    triplets.push((cell[k], bg_cell[i], s * psi[k] * phi[i]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(im.dof_count(), bg.dof_count(), &triplets)
}

/// `‖u_a − u_b‖_{L²}` integrated over the cells of space `b`, evaluating `u_a`
/// by point location; suited to nested meshes with `a` the coarser one.
pub fn l2_difference(
    a: &FeSpace,
    ua: &[f64],
    b: &FeSpace,
    ub: &[f64],
    quad_order: usize,
) -> Result<f64> {
    let quad = QuadratureRule::gauss(quad_order)?;
    let mesh = b.mesh();
    let mut s = 0.0;
    for (c, cell) in mesh.cells().iter().enumerate() {
        let v = mesh.cell_vertices(c);
        for (r, w) in quad.points.iter().zip(&quad.weights) {
            let g = cell_geometry(&v, *r);
            let n = q1_values(r[0], r[1]);
            let vb: f64 = (0..4).map(|k| n[k] * ub[cell[k]]).sum();
            let va = a.evaluate(ua, g.point)?;
            s += w * g.det * (va - vb) * (va - vb);
        }
    }
    Ok(s.sqrt())
}
