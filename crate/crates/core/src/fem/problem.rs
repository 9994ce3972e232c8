//! Problem configurations and assembly of the fictitious-domain saddle system
//! `[[A, 0, Cᵀ], [0, A₂, −C₂ᵀ], [C, −C₂, 0]] (u, u₂, λ) = (f, g, 0)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{assemble_coupling, assemble_load, assemble_mass, assemble_stiffness, FeSpace};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{build_box_mesh, build_disk_mesh, Mesh, Point};

/// Gauss points per direction for the coupling integrals.
pub const DEFAULT_QUAD_ORDER: usize = 3;

/// Background domain and immersed body.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// `Ω = [0,1]²` with the immersed square `[0.2,0.5]²`.
    #[serde(rename = "unit_square_41", alias = "unit_square41")]
    UnitSquare41,
    /// `Ω = [−1,1]²` with the immersed square `[−0.14,0.47]²`.
    SquareInSquare,
    /// `Ω = [−1,1]²` with the immersed disk of radius 0.3 at the origin.
    DiskInSquare,
}

impl Geometry {
    pub fn background_box(self) -> (Point, Point) {
        match self {
            Geometry::UnitSquare41 => ([0.0, 0.0], [1.0, 1.0]),
            Geometry::SquareInSquare | Geometry::DiskInSquare => ([-1.0, -1.0], [1.0, 1.0]),
        }
    }

    pub fn background_mesh(self, cells_per_side: usize) -> Result<Mesh> {
        let (lo, hi) = self.background_box();
        build_box_mesh(lo, hi, cells_per_side)
    }

    /// Default admissible range of `h₂/h` (maximum cell diameters). The disk
    /// allows coarser immersed meshes: its rim cells have aspect ratio near 2.7,
    /// so the maximum diameter overstates the resolution of the multiplier space.
    pub fn mesh_ratio_bounds(self) -> (f64, f64) {
        match self {
            Geometry::UnitSquare41 | Geometry::SquareInSquare => (0.5, 2.0),
            Geometry::DiskInSquare => (0.5, 3.0),
        }
    }

    /// Three paired refinements used by the experiments, coarse to fine.
    pub fn default_levels(self) -> [Refinement; 3] {
        let r = Refinement::new;
        match self {
            Geometry::UnitSquare41 => [r(8, 2), r(16, 4), r(32, 8)],
            Geometry::SquareInSquare => [r(16, 4), r(32, 8), r(64, 16)],
            Geometry::DiskInSquare => [r(32, 1), r(64, 2), r(128, 3)],
        }
    }

    /// Immersed mesh; `level` is cells per side for squares and the refinement level for the disk.
    pub fn immersed_mesh(self, level: usize) -> Result<Mesh> {
        match self {
            Geometry::UnitSquare41 => build_box_mesh([0.2, 0.2], [0.5, 0.5], level),
            Geometry::SquareInSquare => build_box_mesh([-0.14, -0.14], [0.47, 0.47], level),
            Geometry::DiskInSquare => {
                let level = u32::try_from(level)
                    .map_err(|_| Error::Config("disk level too large".into()))?;
                build_disk_mesh([0.0, 0.0], 0.3, level)
            }
        }
    }
}

/// Paired resolutions of the two meshes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refinement {
    /// Background cells per side.
    pub background: usize,
    /// Immersed cells per side (squares) or refinement level (disk).
    pub immersed: usize,
}

impl Refinement {
    pub fn new(background: usize, immersed: usize) -> Self {
        Self {
            background,
            immersed,
        }
    }
}

/// Source terms `f` on `Ω` and `f₂` on `Ω₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Forcing {
    Constant {
        #[serde(default = "one")]
        f: f64,
        #[serde(default = "two")]
        f2: f64,
    },
    /// `f = f₂ = sin(πx) + tanh(y)`.
    SinTanh,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing::Constant { f: 1.0, f2: 2.0 }
    }
}

impl Forcing {
    pub fn f(&self, p: Point) -> f64 {
        match *self {
            Forcing::Constant { f, .. } => f,
            Forcing::SinTanh => (std::f64::consts::PI * p[0]).sin() + p[1].tanh(),
        }
    }

    pub fn f2(&self, p: Point) -> f64 {
        match *self {
            Forcing::Constant { f2, .. } => f2,
            Forcing::SinTanh => self.f(p),
        }
    }
}

/// Boundary condition on `∂Ω`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    #[default]
    DirichletZero,
    NeumannZero,
}

/// Everything needed to assemble one saddle system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub geometry: Geometry,
    pub refinement: Refinement,
    #[serde(default = "one")]
    pub beta: f64,
    pub beta2: f64,
    #[serde(default)]
    pub forcing: Forcing,
    #[serde(default)]
    pub bc: BoundaryCondition,
    #[serde(default = "default_quad")]
    pub quad_order: usize,
    /// Admissible range of `h₂/h`; `None` selects the geometry default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_ratio_bounds: Option<(f64, f64)>,
}

fn default_quad() -> usize {
    DEFAULT_QUAD_ORDER
}

impl ProblemConfig {
    pub fn new(geometry: Geometry, refinement: Refinement, beta2: f64) -> Self {
        Self {
            geometry,
            refinement,
            beta: 1.0,
            beta2,
            forcing: Forcing::default(),
            bc: BoundaryCondition::default(),
            quad_order: DEFAULT_QUAD_ORDER,
            mesh_ratio_bounds: None,
        }
    }

    /// The configured or geometry-default range of `h₂/h`.
    pub fn ratio_bounds(&self) -> (f64, f64) {
        self.mesh_ratio_bounds
            .unwrap_or_else(|| self.geometry.mesh_ratio_bounds())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.beta2 > self.beta && self.beta2.is_finite()) {
            return Err(Error::Config(format!(
                "beta2 must exceed beta, got beta = {} and beta2 = {}",
                self.beta, self.beta2
            )));
        }
        let (lo, hi) = self.ratio_bounds();
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!(
                "invalid mesh ratio bounds ({lo}, {hi})"
            )));
        }
        if self.quad_order < 2 {
            return Err(Error::Config("quad_order must be at least 2".into()));
        }
        Ok(())
    }
}

/// Blocks and right-hand side of the fictitious-domain system.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub a2: CsrMatrix,
    pub c: CsrMatrix,
    pub c2: CsrMatrix,
    pub m: CsrMatrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub beta: f64,
    pub beta2: f64,
    pub background: FeSpace,
    pub immersed: FeSpace,
}

impl SaddleSystem {
    /// Background dofs `n`.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Immersed dofs `m`.
    pub fn m_dim(&self) -> usize {
        self.a2.rows()
    }

    /// Multiplier dofs `ℓ`.
    pub fn l(&self) -> usize {
        self.m.rows()
    }

    pub fn size(&self) -> usize {
        self.n() + self.m_dim() + self.l()
    }

    /// `"n+m+ℓ"` label.
    pub fn dof_string(&self) -> String {
        format!("{}+{}+{}", self.n(), self.m_dim(), self.l())
    }

    /// Background mesh size.
    pub fn h(&self) -> f64 {
        self.background.mesh().h()
    }

    /// Immersed mesh size.
    pub fn h2(&self) -> f64 {
        self.immersed.mesh().h()
    }

    /// The full symmetric-indefinite block matrix.
    pub fn matrix(&self) -> CsrMatrix {
        let ct = self.c.transpose();
        let c2t = self.c2.transpose().scaled(-1.0);
        let c2n = self.c2.scaled(-1.0);
        CsrMatrix::block(&[
            vec![Some(&self.a), None, Some(&ct)],
            vec![None, Some(&self.a2), Some(&c2t)],
            vec![Some(&self.c), Some(&c2n), None],
        ])
        .expect("block shapes agree by construction")
    }

    /// `(f, g, 0)`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.size());
        b.extend_from_slice(&self.f);
        b.extend_from_slice(&self.g);
        b.resize(self.size(), 0.0);
        b
    }

    /// Product with the block matrix without forming it.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (n, m) = (self.n(), self.m_dim());
        let (u, rest) = x.split_at(n);
        let (u2, lam) = rest.split_at(m);
        let (yu, rest) = y.split_at_mut(n);
        let (y2, yl) = rest.split_at_mut(m);
        self.a.spmv_into(u, yu);
        self.c.transpose_spmv_add(1.0, lam, yu);
        self.a2.spmv_into(u2, y2);
        self.c2.transpose_spmv_add(-1.0, lam, y2);
        self.c.spmv_into(u, yl);
        self.c2.spmv_add(-1.0, u2, yl);
    }

    /// `‖b − 𝒜x‖ / ‖b‖`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.size()];
        self.apply(x, &mut y);
        let b = self.rhs();
        let r: f64 = y
            .iter()
            .zip(&b)
            .map(|(p, q)| (q - p) * (q - p))
            .sum::<f64>()
            .sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }
}

fn check_ratio(cfg: &ProblemConfig, bg: &Mesh, im: &Mesh) -> Result<f64> {
    let ratio = im.h() / bg.h();
    let (lo, hi) = cfg.ratio_bounds();
    if !(lo..=hi).contains(&ratio) {
        return Err(Error::Config(format!(
            "mesh size ratio h2/h = {ratio:.3} lies outside [{lo}, {hi}] for refinement {:?}",
            cfg.refinement
        )));
    }
    Ok(ratio)
}

impl ProblemConfig {
    /// Builds both meshes and checks `h₂/h` against the admissible range.
    pub fn check_mesh_ratio(&self) -> Result<f64> {
        self.validate()?;
        let bg = self.geometry.background_mesh(self.refinement.background)?;
        let im = self.geometry.immersed_mesh(self.refinement.immersed)?;
        check_ratio(self, &bg, &im)
    }
}

/// Meshes, spaces and blocks for a configuration.
pub fn build_saddle_system(cfg: &ProblemConfig) -> Result<SaddleSystem> {
    cfg.validate()?;
    let bg_mesh = Arc::new(cfg.geometry.background_mesh(cfg.refinement.background)?);
    let im_mesh = Arc::new(cfg.geometry.immersed_mesh(cfg.refinement.immersed)?);
    check_ratio(cfg, &bg_mesh, &im_mesh)?;
    let background = match cfg.bc {
        BoundaryCondition::DirichletZero => FeSpace::with_boundary_dirichlet(bg_mesh),
        BoundaryCondition::NeumannZero => FeSpace::new(bg_mesh),
    };
    let immersed = FeSpace::new(im_mesh);
    let a = assemble_stiffness(&background, cfg.beta, true)?;
    let a2 = assemble_stiffness(&immersed, cfg.beta2 - cfg.beta, false)?;
    let m = assemble_mass(&immersed);
    let c = assemble_coupling(&background, &immersed, cfg.quad_order)?
        .without_columns(background.dirichlet());
    let forcing = cfg.forcing;
    let f = assemble_load(&background, &|p| forcing.f(p));
    let g = assemble_load(&immersed, &|p| forcing.f2(p) - forcing.f(p));
    Ok(SaddleSystem {
        a,
        a2,
        c2: m.clone(),
        c,
        m,
        f,
        g,
        beta: cfg.beta,
        beta2: cfg.beta2,
        background,
        immersed,
    })
}
