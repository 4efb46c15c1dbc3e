mod common;

use deadoil_core::operators::assemble_pressure_operator;
use deadoil_core::sparse::solve_dense_capped;
use deadoil_core::{
    assemble_adjoint_continuous, assemble_laplacian, builtin_model, create_grid, solve_bicgstab,
    solve_cg, solve_dense, solve_state, Field, Grid, SolverSettings, SparseMatrix,
};
use rand::Rng;

fn random_sparse(rng: &mut impl Rng, n: usize, m: usize, fill: f64) -> (SparseMatrix, Vec<f64>) {
    let dense: Vec<f64> = (0..n * m)
        .map(|_| {
            if rng.gen_bool(fill) {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            }
        })
        .collect();
    (SparseMatrix::from_dense(n, m, &dense).unwrap(), dense)
}

#[test]
fn spmv_matches_dense_oracle() {
    let mut rng = common::rng(10);
    let (a, dense) = random_sparse(&mut rng, 6, 6, 0.5);
    let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = a.spmv(&x).unwrap();
    for r in 0..6 {
        let oracle: f64 = (0..6).map(|c| dense[r * 6 + c] * x[c]).sum();
        assert!((y[r] - oracle).abs() <= 1e-14);
    }
}

#[test]
fn spmv_is_bit_reproducible() {
    let mut rng = common::rng(11);
    let (a, _) = random_sparse(&mut rng, 40, 40, 0.3);
    let x: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
    assert_eq!(a.spmv(&x).unwrap(), a.spmv(&x).unwrap());
}

#[test]
fn transpose_is_an_involution() {
    let mut rng = common::rng(12);
    let (a, dense) = random_sparse(&mut rng, 5, 7, 0.5);
    let t = a.transpose();
    assert_eq!((t.nrows(), t.ncols()), (7, 5));
    for r in 0..5 {
        for c in 0..7 {
            assert_eq!(t.get(c, r), dense[r * 7 + c]);
        }
    }
    assert_eq!(t.transpose(), a);
}

#[test]
fn transpose_satisfies_pairing_identity() {
    let mut rng = common::rng(13);
    for _ in 0..10 {
        let (a, _) = random_sparse(&mut rng, 9, 6, 0.4);
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs: f64 = a
            .transpose()
            .spmv(&y)
            .unwrap()
            .iter()
            .zip(&x)
            .map(|(p, q)| p * q)
            .sum();
        let rhs: f64 = a.spmv(&x).unwrap().iter().zip(&y).map(|(p, q)| p * q).sum();
        assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(rhs.abs()).max(1e-300));
    }
}

#[test]
fn cg_matches_dense_lu_on_laplacian() {
    let g = Grid::unit_square(3).unwrap();
    let a = assemble_laplacian(&g);
    let mut rng = common::rng(14);
    let b: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = solve_cg(&a, &b, 1e-14, 100).unwrap().x;
    let oracle = common::dense_lu_solve(9, &a.to_dense(), &b);
    for (p, q) in x.iter().zip(&oracle) {
        assert!((p - q).abs() <= 1e-10);
    }
}

#[test]
fn cg_and_dense_agree_on_spd_operators() {
    let m = builtin_model("smooth_bounded").unwrap();
    let mut rng = common::rng(15);
    let tol = 1e-12;
    for n in [1, 4, 9, 20] {
        let g = create_grid(n, n + 1, 1.0, 1.5).unwrap();
        let u = common::random_field(g, &mut rng, -1.5, 1.5);
        for a in [assemble_laplacian(&g), assemble_pressure_operator(&m, &u)] {
            assert_eq!(a.max_asymmetry(), 0.0);
            let b: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xc = solve_cg(&a, &b, tol, 10_000).unwrap().x;
            let xd = solve_dense(&a, &b).unwrap().x;
            let scale = xd.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            let err = xc
                .iter()
                .zip(&xd)
                .fold(0.0f64, |s, (p, q)| s.max((p - q).abs()));
            assert!(err <= 10.0 * tol * scale, "n={n}: {err:e}");
        }
    }
}

#[test]
fn bicgstab_matches_dense_on_adjoint_operator() {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(4).unwrap();
    let f = common::bump(g, 1.0);
    let (s, _) = solve_state(&m, &f, &SolverSettings::default()).unwrap();
    let a = assemble_adjoint_continuous(&m, &s);
    let mut rng = common::rng(16);
    let b: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = solve_bicgstab(&a, &b, 1e-13, 1000).unwrap().x;
    let oracle = common::dense_lu_solve(32, &a.to_dense(), &b);
    let norm = oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
    let err = x
        .iter()
        .zip(&oracle)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-8 * norm, "{err:e}");
}

#[test]
fn bicgstab_reports_nonconvergence() {
    let g = Grid::unit_square(10).unwrap();
    let a = assemble_laplacian(&g);
    let b = vec![1.0; g.len()];
    assert!(solve_bicgstab(&a, &b, 1e-14, 2)
        .unwrap_err()
        .is_nonconvergence());
}

#[test]
fn dense_residual_is_small() {
    let mut rng = common::rng(17);
    let mut dense: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for k in 0..10 {
        dense[k * 10 + k] += 10.0;
    }
    let a = SparseMatrix::from_dense(10, 10, &dense).unwrap();
    let b: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sol = solve_dense(&a, &b).unwrap();
    let binf = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(sol.residual <= 1e-10 * binf);
    assert!(solve_dense_capped(&a, &b, 9).is_err());
}

#[test]
fn symmetric_operators_are_exactly_symmetric() {
    let m = builtin_model("smooth_bounded").unwrap();
    let mut rng = common::rng(18);
    for (nx, ny) in [(1, 1), (3, 7), (16, 16)] {
        let g = create_grid(nx, ny, 2.0, 1.0).unwrap();
        let u = common::random_field(g, &mut rng, -2.0, 2.0);
        assert_eq!(assemble_pressure_operator(&m, &u).max_asymmetry(), 0.0);
        assert_eq!(assemble_laplacian(&g).max_asymmetry(), 0.0);
    }
    let _ = Field::zeros(Grid::unit_square(1).unwrap());
}
