//! Shared fixtures for the benchmark suite.

use fdal::fem::{build_saddle_system, Geometry, ProblemConfig, Refinement, SaddleSystem};

/// Assembled system for one geometry, refinement and `β₂`.
pub fn system(geometry: Geometry, background: usize, immersed: usize, beta2: f64) -> SaddleSystem {
    build_saddle_system(&ProblemConfig::new(
        geometry,
        Refinement::new(background, immersed),
        beta2,
    ))
    .expect("benchmark fixtures assemble")
}

/// The 1251-dof unit-square case used by the spectral checks.
pub fn unit_square(beta2: f64) -> SaddleSystem {
    system(Geometry::UnitSquare41, 32, 8, beta2)
}

/// Square-in-square system at the given default level index.
pub fn square_level(level: usize, beta2: f64) -> SaddleSystem {
    let r = Geometry::SquareInSquare.default_levels()[level];
    system(Geometry::SquareInSquare, r.background, r.immersed, beta2)
}
