//! Quadrilateral meshes: structured boxes, five-patch disks, bilinear
//! cell maps and point location.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2D point.
pub type Point = [f64; 2];

/// Newton tolerance on reference coordinates.
pub const NEWTON_TOL: f64 = 1e-12;
/// Newton iteration cap.
pub const NEWTON_MAX_ITER: usize = 25;
/// Slack on reference-square membership.
pub const CONTAINMENT_TOL: f64 = 1e-10;

/// Shape family a mesh was generated from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryTag {
    Box,
    Disk,
}

/// A cell containing a query point and the point's reference coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellLocation {
    pub cell_index: usize,
    pub ref_coords: Point,
}

#[derive(Clone, Debug)]
struct BoxGrid {
    lo: Point,
    hi: Point,
    cells_per_side: usize,
}

#[derive(Clone, Debug)]
struct Bins {
    lo: Point,
    size: Point,
    dims: [usize; 2],
    cells: Vec<Vec<usize>>,
}

/// Conforming quadrilateral mesh with counterclockwise cells.
#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<Point>,
    cells: Vec<[usize; 4]>,
    boundary_nodes: Vec<usize>,
    h: f64,
    h_min: f64,
    tag: GeometryTag,
    grid: Option<BoxGrid>,
    bins: Option<Bins>,
}

/// Q1 shape functions at reference coordinates, in vertex order.
pub fn q1_values(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

/// Reference gradients of the Q1 shape functions.
pub fn q1_gradients(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [eta, xi],
        [-eta, 1.0 - xi],
    ]
}

impl Mesh {
    fn assemble(
        nodes: Vec<Point>,
        cells: Vec<[usize; 4]>,
        tag: GeometryTag,
        grid: Option<BoxGrid>,
    ) -> Self {
        let boundary_nodes = boundary_of(&cells, nodes.len());
        let mut h: f64 = 0.0;
        let mut h_min = f64::INFINITY;
        for c in &cells {
            let d = diameter(&c.map(|i| nodes[i]));
            h = h.max(d);
            h_min = h_min.min(d);
        }
        let mut mesh = Mesh {
            nodes,
            cells,
            boundary_nodes,
            h,
            h_min,
            tag,
            grid,
            bins: None,
        };
        for c in 0..mesh.cells.len() {
            let v = mesh.cell_vertices(c);
            for corner in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] {
                assert!(
                    jacobian_det(&v, corner) > 0.0,
                    "cell {c} is degenerate or clockwise"
                );
            }
        }
        if mesh.grid.is_none() {
            mesh.bins = Some(mesh.build_bins());
        }
        mesh
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    /// Sorted indices of nodes on edges that belong to a single cell.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Largest cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Smallest cell diameter.
    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn geometry_tag(&self) -> GeometryTag {
        self.tag
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_vertices(&self, c: usize) -> [Point; 4] {
        self.cells[c].map(|i| self.nodes[i])
    }

    /// Image of reference coordinates under the bilinear map of cell `c`.
    pub fn map_to_physical(&self, c: usize, r: Point) -> Point {
        bilinear(&self.cell_vertices(c), r)
    }

    /// Area of cell `c` (exact for bilinear cells).
    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, cc, d] = self.cell_vertices(c);
        0.5 * ((cc[0] - a[0]) * (d[1] - b[1]) - (cc[1] - a[1]) * (d[0] - b[0]))
    }

    pub fn area(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_area(c)).sum()
    }

    /// Reference coordinates of `p` in cell `c` if the cell contains it.
    pub fn cell_contains(&self, c: usize, p: Point) -> Option<Point> {
        let v = self.cell_vertices(c);
        let r = inverse_bilinear(&v, p)?;
        let inside = r
            .iter()
            .all(|&t| (-CONTAINMENT_TOL..=1.0 + CONTAINMENT_TOL).contains(&t));
        inside.then_some(r)
    }

    /// Lowest-index cell containing `p` together with its reference coordinates.
    pub fn locate_point(&self, p: Point) -> Result<CellLocation> {
        if let Some(g) = &self.grid {
            return locate_in_grid(g, p);
        }
        let bins = self.bins.as_ref().expect("unstructured meshes carry bins");
        let outside = Error::PointOutsideMesh { x: p[0], y: p[1] };
        let bin = bins.bin_of(p).ok_or(outside)?;
        for &c in &bins.cells[bin] {
            if let Some(r) = self.cell_contains(c, p) {
                return Ok(CellLocation {
                    cell_index: c,
                    ref_coords: r,
                });
            }
        }
        Err(Error::PointOutsideMesh { x: p[0], y: p[1] })
    }

    /// Exhaustive scan over all cells with the same containment test.
    pub fn locate_point_scan(&self, p: Point) -> Result<CellLocation> {
        (0..self.cells.len())
            .find_map(|c| {
                self.cell_contains(c, p).map(|r| CellLocation {
                    cell_index: c,
                    ref_coords: r,
                })
            })
            .ok_or(Error::PointOutsideMesh { x: p[0], y: p[1] })
    }

    fn build_bins(&self) -> Bins {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let per_side = ((self.cells.len() as f64).sqrt().ceil() as usize).max(1);
        let pad = 1e-9 * self.h.max(f64::MIN_POSITIVE);
        let lo = [lo[0] - pad, lo[1] - pad];
        let size = [
            (hi[0] + pad - lo[0]) / per_side as f64,
            (hi[1] + pad - lo[1]) / per_side as f64,
        ];
        let mut bins = Bins {
            lo,
            size,
            dims: [per_side, per_side],
            cells: vec![Vec::new(); per_side * per_side],
        };
        for (c, cell) in self.cells.iter().enumerate() {
            let mut clo = [f64::INFINITY; 2];
            let mut chi = [f64::NEG_INFINITY; 2];
            for &i in cell {
                for k in 0..2 {
                    clo[k] = clo[k].min(self.nodes[i][k] - pad);
                    chi[k] = chi[k].max(self.nodes[i][k] + pad);
                }
            }
            let i0 = bins.index_clamped(0, clo[0]);
            let i1 = bins.index_clamped(0, chi[0]);
            let j0 = bins.index_clamped(1, clo[1]);
            let j1 = bins.index_clamped(1, chi[1]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins.cells[j * per_side + i].push(c);
                }
            }
        }
        bins
    }

    /// Plain-text export: a header line `nodes cells`, then one `x y` line per
    /// node, then one line of four node indices per cell.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.nodes.len(), self.cells.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {} {}", c[0], c[1], c[2], c[3]);
        }
        s
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

impl Bins {
    fn index_clamped(&self, k: usize, x: f64) -> usize {
        let t = ((x - self.lo[k]) / self.size[k]).floor();
        (t.max(0.0) as usize).min(self.dims[k] - 1)
    }

    fn bin_of(&self, p: Point) -> Option<usize> {
        let mut idx = [0usize; 2];
        for k in 0..2 {
            let t = ((p[k] - self.lo[k]) / self.size[k]).floor();
            if !(t >= 0.0 && t < self.dims[k] as f64) {
                return None;
            }
            idx[k] = t as usize;
        }
        Some(idx[1] * self.dims[0] + idx[0])
    }
}

fn locate_in_grid(g: &BoxGrid, p: Point) -> Result<CellLocation> {
    let n = g.cells_per_side;
    let mut idx = [0usize; 2];
    let mut r = [0.0; 2];
    for k in 0..2 {
        let t = (p[k] - g.lo[k]) / (g.hi[k] - g.lo[k]) * n as f64;
        if !(t >= -CONTAINMENT_TOL && t <= n as f64 + CONTAINMENT_TOL) {
            return Err(Error::PointOutsideMesh { x: p[0], y: p[1] });
        }
        let i = (t.ceil() - 1.0).clamp(0.0, (n - 1) as f64) as usize;
        idx[k] = i;
        r[k] = t - i as f64;
    }
    Ok(CellLocation {
        cell_index: idx[1] * n + idx[0],
        ref_coords: r,
    })
}

fn bilinear(v: &[Point; 4], r: Point) -> Point {
    let n = q1_values(r[0], r[1]);
    let mut x = [0.0; 2];
    for a in 0..4 {
        x[0] += n[a] * v[a][0];
        x[1] += n[a] * v[a][1];
    }
    x
}

/// Jacobian `[[∂x/∂ξ, ∂x/∂η], [∂y/∂ξ, ∂y/∂η]]` of the bilinear map.
pub fn jacobian(v: &[Point; 4], r: Point) -> [[f64; 2]; 2] {
    let g = q1_gradients(r[0], r[1]);
    let mut j = [[0.0; 2]; 2];
    for a in 0..4 {
        for d in 0..2 {
            j[d][0] += v[a][d] * g[a][0];
            j[d][1] += v[a][d] * g[a][1];
        }
    }
    j
}

fn jacobian_det(v: &[Point; 4], r: Point) -> f64 {
    let j = jacobian(v, r);
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

fn inverse_bilinear(v: &[Point; 4], p: Point) -> Option<Point> {
    let mut r = [0.5, 0.5];
    for _ in 0..NEWTON_MAX_ITER {
        let x = bilinear(v, r);
        let res = [p[0] - x[0], p[1] - x[1]];
        let j = jacobian(v, r);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let d0 = (j[1][1] * res[0] - j[0][1] * res[1]) / det;
        let d1 = (-j[1][0] * res[0] + j[0][0] * res[1]) / det;
        r[0] += d0;
        r[1] += d1;
        if d0.abs().max(d1.abs()) < NEWTON_TOL {
            return Some(r);
        }
        if r[0].abs() > 1e6 || r[1].abs() > 1e6 {
            return None;
        }
    }
    None
}

fn diameter(v: &[Point; 4]) -> f64 {
    let mut d: f64 = 0.0;
    for a in 0..4 {
        for b in a + 1..4 {
            d = d.max((v[a][0] - v[b][0]).hypot(v[a][1] - v[b][1]));
        }
    }
    d
}

fn boundary_of(cells: &[[usize; 4]], n: usize) -> Vec<usize> {
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for c in cells {
        for k in 0..4 {
            let (a, b) = (c[k], c[(k + 1) % 4]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut on = vec![false; n];
    for ((a, b), count) in edges {
        if count == 1 {
            on[a] = true;
            on[b] = true;
        }
    }
    (0..n).filter(|&i| on[i]).collect()
}

/// Uniform tensor-product mesh of the box `[lo, hi]`; node `(i, j)` has index `j (N+1) + i`.
pub fn build_box_mesh(lo: Point, hi: Point, cells_per_side: usize) -> Result<Mesh> {
    if !(lo[0] < hi[0] && lo[1] < hi[1]) || !lo.iter().chain(&hi).all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "box bounds must satisfy lo < hi componentwise, got {lo:?} and {hi:?}"
        )));
    }
    if cells_per_side == 0 {
        return Err(Error::InvalidArgument(
            "cells_per_side must be positive".into(),
        ));
    }
    let n = cells_per_side;
    let coord = |k: usize, i: usize| {
        if i == n {
            hi[k]
        } else {
            lo[k] + (hi[k] - lo[k]) * i as f64 / n as f64
        }
    };
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([coord(0, i), coord(1, j)]);
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let a = j * (n + 1) + i;
            cells.push([a, a + 1, a + n + 2, a + n + 1]);
        }
    }
    let grid = BoxGrid {
        lo,
        hi,
        cells_per_side: n,
    };
    Ok(Mesh::assemble(nodes, cells, GeometryTag::Box, Some(grid)))
}

/// Five-patch disk mesh: a central square and four blocks bridging its
/// edges to the circle, each split into `2^level × 2^level` cells by
/// transfinite interpolation between the square edge and the circular arc.
pub fn build_disk_mesh(center: Point, radius: f64, refinement_level: u32) -> Result<Mesh> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if refinement_level > 12 {
        return Err(Error::InvalidArgument("refinement level above 12".into()));
    }
    let k = 1usize << refinement_level;
    let a = radius / (std::f64::consts::SQRT_2 * (1.0 + std::f64::consts::SQRT_2));
    let corners = [[-a, -a], [a, -a], [a, a], [-a, a]];
    let quarter = std::f64::consts::FRAC_PI_2;
    let mut builder = NodeMerger::new(radius);
    let mut cells = Vec::new();

    let inner = |s: usize, t: f64| -> Point {
        let p = corners[s];
        let q = corners[(s + 1) % 4];
        [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]
    };
    let frac = |i: usize| i as f64 / k as f64;

    let mut grid = vec![0usize; (k + 1) * (k + 1)];
    for j in 0..=k {
        for i in 0..=k {
            let p = [-a + 2.0 * a * frac(i), -a + 2.0 * a * frac(j)];
            grid[j * (k + 1) + i] = builder.insert(p, center);
        }
    }
    push_patch_cells(&grid, k, &mut cells);

    for s in 0..4 {
        let theta0 = 1.25 * std::f64::consts::PI + s as f64 * quarter;
        for j in 0..=k {
            let eta = frac(j);
            for i in 0..=k {
                let xi = frac(i);
                let b = inner(s, xi);
                let p = if j == k {
                    let th = theta0 + quarter * xi;
                    [radius * th.cos(), radius * th.sin()]
                } else {
                    let th = theta0 + quarter * xi;
                    let arc = [radius * th.cos(), radius * th.sin()];
                    [
                        (1.0 - eta) * b[0] + eta * arc[0],
                        (1.0 - eta) * b[1] + eta * arc[1],
                    ]
                };
                grid[j * (k + 1) + i] = builder.insert(p, center);
            }
        }
        push_patch_cells(&grid, k, &mut cells);
    }
    let nodes = builder.nodes;
    for c in &mut cells {
        let v = c.map(|i| nodes[i]);
        let signed = 0.5
            * ((v[2][0] - v[0][0]) * (v[3][1] - v[1][1])
                - (v[2][1] - v[0][1]) * (v[3][0] - v[1][0]));
        if signed < 0.0 {
            *c = [c[0], c[3], c[2], c[1]];
        }
    }
    Ok(Mesh::assemble(nodes, cells, GeometryTag::Disk, None))
}

fn push_patch_cells(grid: &[usize], k: usize, cells: &mut Vec<[usize; 4]>) {
    for j in 0..k {
        for i in 0..k {
            let at = |ii: usize, jj: usize| grid[jj * (k + 1) + ii];
            cells.push([at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
}

/// Deduplicates nodes generated by adjacent patches.
struct NodeMerger {
    nodes: Vec<Point>,
    index: HashMap<(i64, i64), usize>,
    quantum: f64,
}

impl NodeMerger {
    fn new(scale: f64) -> Self {
        Self {
            nodes: Vec::new(),
            index: HashMap::new(),
            quantum: 1e-9 * scale,
        }
    }

    fn insert(&mut self, local: Point, center: Point) -> usize {
        let key = (
            (local[0] / self.quantum).round() as i64,
            (local[1] / self.quantum).round() as i64,
        );
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&i) = self.index.get(&(key.0 + dx, key.1 + dy)) {
                    return i;
                }
            }
        }
        let i = self.nodes.len();
        self.nodes
            .push([center[0] + local[0], center[1] + local[1]]);
        self.index.insert(key, i);
        i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn box_mesh_counts() {
        let m = build_box_mesh([0.0, 0.0], [1.0, 1.0], 1).unwrap();
        assert_eq!(
            (m.node_count(), m.cell_count(), m.boundary_nodes().len()),
            (4, 1, 4)
        );
        assert_eq!(
            build_box_mesh([0.0, 0.0], [1.0, 1.0], 32)
                .unwrap()
                .node_count(),
            1089
        );
        assert_eq!(
            build_box_mesh([0.2, 0.2], [0.5, 0.5], 8)
                .unwrap()
                .node_count(),
            81
        );
        let m = build_box_mesh([0.0, 0.0], [2.0, 2.0], 4).unwrap();
        assert!((m.h() - 2.0 * 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(m.boundary_nodes().len(), 16);
    }

    #[test]
    fn box_mesh_rejects_bad_bounds() {
        assert!(matches!(
            build_box_mesh([1.0, 0.0], [0.0, 1.0], 2),
            Err(Error::InvalidArgument(_))
        ));
        assert!(build_box_mesh([0.0, 0.0], [1.0, 1.0], 0).is_err());
    }

    #[test]
    fn box_locate() {
        let m = build_box_mesh([0.0, 0.0], [1.0, 1.0], 1).unwrap();
        let loc = m.locate_point([0.5, 0.5]).unwrap();
        assert_eq!(loc.cell_index, 0);
        assert!((loc.ref_coords[0] - 0.5).abs() < 1e-15 && (loc.ref_coords[1] - 0.5).abs() < 1e-15);
        assert!(matches!(
            m.locate_point([2.0, 2.0]),
            Err(Error::PointOutsideMesh { .. })
        ));
        let m = build_box_mesh([0.0, 0.0], [1.0, 1.0], 4).unwrap();
        let loc = m.locate_point([0.25, 0.5]).unwrap();
        assert_eq!(
            loc.cell_index,
            m.locate_point_scan([0.25, 0.5]).unwrap().cell_index
        );
        assert_eq!(loc.cell_index, 4);
    }

    #[test]
    fn disk_level_zero() {
        let m = build_disk_mesh([0.0, 0.0], 1.0, 0).unwrap();
        assert_eq!(m.cell_count(), 5);
        assert_eq!(m.node_count(), 8);
        assert_eq!(m.boundary_nodes().len(), 4);
        for &b in m.boundary_nodes() {
            let p = m.nodes()[b];
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_area_and_refinement() {
        let exact = std::f64::consts::PI * 0.09;
        let m2 = build_disk_mesh([0.0, 0.0], 0.3, 2).unwrap();
        assert_eq!(m2.cell_count(), 80);
        assert!(((m2.area() - exact) / exact).abs() < 0.03);
        let m3 = build_disk_mesh([0.0, 0.0], 0.3, 3).unwrap();
        assert!(((m3.area() - exact) / exact).abs() < 0.01);
        for level in 0..5 {
            let a = build_disk_mesh([0.1, -0.2], 0.3, level).unwrap();
            let b = build_disk_mesh([0.1, -0.2], 0.3, level + 1).unwrap();
            assert_eq!(b.cell_count(), 4 * a.cell_count());
            let ratio = b.h() / a.h();
            assert!((ratio - 0.5).abs() <= 0.05, "level {level}: {ratio}");
            assert!(b.h() / b.h_min() <= 4.0);
            for &i in b.boundary_nodes() {
                let p = b.nodes()[i];
                assert!(((p[0] - 0.1).hypot(p[1] + 0.2) - 0.3).abs() < 1e-12 * 0.3);
            }
        }
    }

    #[test]
    fn disk_locate_matches_scan() {
        let m = build_disk_mesh([0.0, 0.0], 0.3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut found = 0;
        for _ in 0..100 {
            let r = 0.3 * rng.gen::<f64>().sqrt();
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let p = [r * t.cos(), r * t.sin()];
            match (m.locate_point(p), m.locate_point_scan(p)) {
                (Ok(a), Ok(b)) => {
                    assert_eq!(a.cell_index, b.cell_index);
                    found += 1;
                }
                (Err(_), Err(_)) => {}
                other => panic!("disagreement at {p:?}: {other:?}"),
            }
        }
        assert!(found > 90);
        assert!(m.locate_point([0.31, 0.0]).is_err());
    }

    #[test]
    fn corners_reproduce_nodes_and_inverse_map() {
        let m = build_disk_mesh([0.0, 0.0], 1.0, 2).unwrap();
        for c in 0..m.cell_count() {
            let v = m.cell_vertices(c);
            for (k, r) in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
                .iter()
                .enumerate()
            {
                assert_eq!(m.map_to_physical(c, *r), v[k]);
            }
            let r = [0.3, 0.7];
            let back = m.cell_contains(c, m.map_to_physical(c, r)).unwrap();
            assert!((back[0] - r[0]).abs() < 1e-10 && (back[1] - r[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn text_export_header() {
        let m = build_box_mesh([0.0, 0.0], [1.0, 1.0], 2).unwrap();
        let t = m.to_text();
        assert_eq!(t.lines().next(), Some("9 4"));
        assert_eq!(t.lines().count(), 1 + 9 + 4);
    }
}
