//! Property tests for kernels, formats and algebraic invariants.

use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;

use fdal::al::{AugmentedSystem, WMode};
use fdal::experiment::{Cell, Outcome};
use fdal::fem::{build_saddle_system, Geometry, ProblemConfig, Refinement, SaddleSystem};
use fdal::io::{matrix_market_string, parse_matrix_market, MmObject};
use fdal::krylov::{cg, IdentityPreconditioner, LinearOperator};
use fdal::linalg::{CsrMatrix, DenseMatrix, SkylineCholesky};
use fdal::mesh::build_box_mesh;
use fdal::spectral::matched_distance;

fn triplets(rows: usize, cols: usize) -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    prop::collection::vec((0..rows, 0..cols, -1e3..1e3f64), 0..60)
}

fn csr() -> impl Strategy<Value = CsrMatrix> {
    (1usize..12, 1usize..12)
        .prop_flat_map(|(r, c)| (Just(r), Just(c), triplets(r, c)))
        .prop_map(|(r, c, t)| CsrMatrix::from_triplets(r, c, &t).unwrap())
}

/// Sparse SPD matrix `BᵀB + I`.
fn spd() -> impl Strategy<Value = CsrMatrix> {
    csr().prop_map(|b| {
        let bt = b.transpose();
        let id = CsrMatrix::identity(b.cols());
        bt.matmul(&b)
            .unwrap()
            .linear_combination(1.0, &id, 1.0)
            .unwrap()
    })
}

fn small_system() -> &'static (SaddleSystem, Vec<f64>) {
    static CELL: OnceLock<(SaddleSystem, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let sys = build_saddle_system(&ProblemConfig::new(
            Geometry::UnitSquare41,
            Refinement::new(8, 2),
            100.0,
        ))
        .unwrap();
        let x = sys
            .matrix()
            .to_dense()
            .lu()
            .unwrap()
            .solve(&sys.rhs())
            .unwrap();
        (sys, x)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csr_matches_dense_accumulation(r in 1usize..10, c in 1usize..10, t in triplets(10, 10)) {
        let t: Vec<_> = t.into_iter().filter(|(i, j, _)| *i < r && *j < c).collect();
        let a = CsrMatrix::from_triplets(r, c, &t).unwrap();
        let mut d = DenseMatrix::zeros(r, c);
        for (i, j, v) in &t {
            d[(*i, *j)] += v;
        }
        let ad = a.to_dense();
        for i in 0..r {
            for j in 0..c {
                prop_assert!((ad[(i, j)] - d[(i, j)]).abs() <= 1e-9 * (1.0 + d[(i, j)].abs()));
            }
        }
    }

    #[test]
    fn transpose_is_an_involution_and_adjoint(a in csr(), seed in any::<u64>()) {
        prop_assert_eq!(&a.transpose().transpose(), &a);
        let x: Vec<f64> = (0..a.cols()).map(|k| ((seed >> (k % 60)) & 7) as f64 - 3.5).collect();
        let y: Vec<f64> = (0..a.rows()).map(|k| ((seed >> (k % 50)) & 5) as f64 - 2.0).collect();
        let lhs: f64 = a.spmv(&x).unwrap().iter().zip(&y).map(|(p, q)| p * q).sum();
        let rhs: f64 = a.transpose().spmv(&y).unwrap().iter().zip(&x).map(|(p, q)| p * q).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn matrix_market_round_trip_is_exact(a in csr()) {
        prop_assert_eq!(parse_matrix_market(&matrix_market_string(&a)).unwrap(), MmObject::Matrix(a));
    }

    #[test]
    fn skyline_cholesky_solves_spd_systems(a in spd()) {
        let n = a.rows();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = SkylineCholesky::new(&a).unwrap().solve(&b).unwrap();
        let r: Vec<f64> = a.spmv(&x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect();
        prop_assert!(r.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-8 * (1.0 + a.to_dense().max_abs()));
    }

    #[test]
    fn cg_reaches_tolerance_on_spd(a in spd()) {
        let b = vec![1.0; a.rows()];
        let (x, rep) = cg(&a, &b, &mut IdentityPreconditioner, 1e-10, 10 * a.rows() + 50).unwrap();
        prop_assert!(rep.converged);
        let mut ax = vec![0.0; a.rows()];
        a.apply(&x, &mut ax);
        let res = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(res <= 1e-8 * (b.len() as f64).sqrt());
    }

    #[test]
    fn point_location_inverts_the_cell_map(k in 1usize..12, px in 0.0..1.0f64, py in 0.0..1.0f64) {
        let mesh = build_box_mesh([-1.0, 0.5], [2.0, 3.5], k).unwrap();
        let p = [-1.0 + 3.0 * px, 0.5 + 3.0 * py];
        let loc = mesh.locate_point(p).unwrap();
        let q = mesh.map_to_physical(loc.cell_index, loc.ref_coords);
        prop_assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
    }

    #[test]
    fn augmentation_keeps_the_solution(g1 in 1e-3..1e3f64, g2 in 1e-3..1e3f64, diag in any::<bool>()) {
        let (sys, x) = small_system();
        let w = if diag { WMode::Diag } else { WMode::ExactMSquared };
        let aug = AugmentedSystem::new(sys, g1, g2, w).unwrap();
        let b = aug.rhs();
        let mut ax = vec![0.0; aug.size()];
        aug.apply(x, &mut ax);
        let res = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(res <= 1e-6 * bn, "relative residual {}", res / bn);
    }

    #[test]
    fn matched_distance_is_symmetric_and_permutation_free(
        v in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..8),
        w in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..8),
        rot in 0usize..8,
    ) {
        let a: Vec<Complex64> = v.iter().map(|(x, y)| Complex64::new(*x, *y)).collect();
        let b: Vec<Complex64> = w.iter().map(|(x, y)| Complex64::new(*x, *y)).collect();
        prop_assert!((matched_distance(&a, &b) - matched_distance(&b, &a)).abs() < 1e-12);
        let mut p = a.clone();
        p.rotate_left(rot % a.len());
        prop_assert!(matched_distance(&a, &p) < 1e-12);
        if a.len() == b.len() {
            let identity: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).sum::<f64>() / a.len() as f64;
            prop_assert!(matched_distance(&a, &b) <= identity + 1e-12);
        }
    }

    #[test]
    fn table_cells_round_trip(main in prop::option::of(0usize..1000), fb in prop::option::of(prop::option::of(0usize..1000))) {
        let outcome = |o: Option<usize>| o.map_or(Outcome::Failed, Outcome::Converged);
        let cell = Cell { outcome: outcome(main), fallback: fb.map(outcome) };
        prop_assert_eq!(cell.to_string().parse::<Cell>().unwrap(), cell);
    }
}
