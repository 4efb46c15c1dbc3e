mod common;

use deadoil_core::operators::assemble_pressure_operator;
use deadoil_core::{
    assemble_adjoint_continuous, assemble_linearized, builtin_model, solve_cg, solve_state,
    state_residual, CoefficientModel, Field, Grid, SolverSettings, SparseMatrix, StateSolution,
};
use rand::Rng;

/// Stencil-by-stencil residual on a padded array, written independently of
/// the crate's assembly helpers.
fn naive_residual(m: &CoefficientModel, s: &StateSolution, f: &Field) -> (Vec<f64>, Vec<f64>) {
    let g = *s.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let pad = |v: &Field| {
        let mut a = vec![vec![0.0; ny + 2]; nx + 2];
        for i in 0..nx {
            for j in 0..ny {
                a[i + 1][j + 1] = v.values()[g.index(i, j)];
            }
        }
        a
    };
    let (u, p) = (pad(&s.u), pad(&s.p));
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut r1 = vec![0.0; g.len()];
    let mut r2 = vec![0.0; g.len()];
    for i in 1..=nx {
        for j in 1..=ny {
            let k = g.index(i - 1, j - 1);
            let nbrs = [
                (i + 1, j, ihx2),
                (i - 1, j, ihx2),
                (i, j + 1, ihy2),
                (i, j - 1, ihy2),
            ];
            let mut lap = 0.0;
            let mut fg = 0.0;
            let mut fd = 0.0;
            for (a, b, c) in nbrs {
                lap += c * (m.phi(u[i][j]) - m.phi(u[a][b]));
                fg += c * 0.5 * (m.g(u[i][j]) + m.g(u[a][b])) * (p[i][j] - p[a][b]);
                fd += c * 0.5 * (m.d(u[i][j]) + m.d(u[a][b])) * (p[i][j] - p[a][b]);
            }
            r1[k] = lap + fg;
            r2[k] = fd - f.values()[k];
        }
    }
    (r1, r2)
}

#[test]
fn residual_matches_naive_oracle() {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(8).unwrap();
    let mut rng = common::rng(30);
    let s = StateSolution::new(
        common::random_field(g, &mut rng, -0.3, 0.3),
        common::random_field(g, &mut rng, -0.3, 0.3),
    )
    .unwrap();
    let f = common::random_field(g, &mut rng, -1.0, 1.0);
    let (r1, r2) = state_residual(&m, &s, &f).unwrap();
    let (o1, o2) = naive_residual(&m, &s, &f);
    for (a, b) in r1
        .values()
        .iter()
        .zip(&o1)
        .chain(r2.values().iter().zip(&o2))
    {
        assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn shifting_f_only_moves_pressure_rows() {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(6).unwrap();
    let mut rng = common::rng(31);
    let s = StateSolution::new(
        common::random_field(g, &mut rng, -0.5, 0.5),
        common::random_field(g, &mut rng, -0.5, 0.5),
    )
    .unwrap();
    let f = common::random_field(g, &mut rng, -1.0, 1.0);
    let c = 0.75;
    let (a1, a2) = state_residual(&m, &s, &f).unwrap();
    let (b1, b2) = state_residual(&m, &s, &f.map(|v| v + c)).unwrap();
    assert_eq!(a1, b1);
    for (x, y) in a2.values().iter().zip(b2.values()) {
        assert!((x - c - y).abs() <= 1e-13 * x.abs().max(1.0));
    }
}

fn stacked_norm(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .chain(b.values())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

#[test]
fn taylor_remainder_is_quadratic() {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(8).unwrap();
    let mut rng = common::rng(32);
    for _ in 0..5 {
        let s = StateSolution::new(
            common::random_field(g, &mut rng, -0.5, 0.5),
            common::random_field(g, &mut rng, -0.5, 0.5),
        )
        .unwrap();
        let f = common::random_field(g, &mut rng, -1.0, 1.0);
        let mut e = common::random_field(g, &mut rng, -1.0, 1.0);
        let mut w = common::random_field(g, &mut rng, -1.0, 1.0);
        let nrm = stacked_norm(&e, &w);
        e = e.scaled(1.0 / nrm);
        w = w.scaled(1.0 / nrm);
        let op = assemble_linearized(&m, &s);
        let (d1, d2) = op.apply(&e, &w, None).unwrap();
        let (f1, f2) = state_residual(&m, &s, &f).unwrap();
        let remainders: Vec<f64> = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
            .iter()
            .map(|&h| {
                let ts = StateSolution::new(
                    s.u.add_scaled(h, &e).unwrap(),
                    s.p.add_scaled(h, &w).unwrap(),
                )
                .unwrap();
                let (t1, t2) = state_residual(&m, &ts, &f).unwrap();
                let r1 = t1
                    .add_scaled(-1.0, &f1)
                    .unwrap()
                    .add_scaled(-h, &d1)
                    .unwrap();
                let r2 = t2
                    .add_scaled(-1.0, &f2)
                    .unwrap()
                    .add_scaled(-h, &d2)
                    .unwrap();
                stacked_norm(&r1, &r2)
            })
            .collect();
        for pair in remainders.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.9, "order {order} from {remainders:?}");
        }
    }
}

#[test]
fn control_direction_enters_with_minus_sign() {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(4).unwrap();
    let op = assemble_linearized(&m, &StateSolution::zeros(g));
    let h = Field::constant(g, 2.0);
    let z = Field::zeros(g);
    let (a, b) = op.apply(&z, &z, Some(&h)).unwrap();
    assert!(a.values().iter().all(|&v| v == 0.0));
    assert!(b.values().iter().all(|&v| v == -2.0));
}

#[test]
fn decoupled_pressure_block_is_spd() {
    // g ≡ 0 and constant d
    let m = CoefficientModel::polynomial("g0", &[0.0, 1.0], &[0.0], &[2.5], 2.0, None).unwrap();
    let g = Grid::unit_square(7).unwrap();
    let mut rng = common::rng(33);
    let s = StateSolution::new(
        common::random_field(g, &mut rng, -1.0, 1.0),
        common::random_field(g, &mut rng, -1.0, 1.0),
    )
    .unwrap();
    let block = assemble_linearized(&m, &s).block(1, 1);
    assert_eq!(block.max_asymmetry(), 0.0);
    assert_eq!(block, assemble_pressure_operator(&m, &s.u));
    for _ in 0..5 {
        let b: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve_cg(&block, &b, 1e-12, 1000).unwrap().x;
        let xax: f64 = block
            .spmv(&x)
            .unwrap()
            .iter()
            .zip(&x)
            .map(|(p, q)| p * q)
            .sum();
        assert!(xax > 0.0);
    }
}

fn rel_frobenius(a: &SparseMatrix, b: &SparseMatrix) -> f64 {
    let (da, db) = (a.to_dense(), b.to_dense());
    let diff: f64 = da.iter().zip(&db).map(|(x, y)| (x - y).powi(2)).sum();
    let norm: f64 = db.iter().map(|y| y * y).sum();
    (diff / norm).sqrt()
}

#[test]
fn continuous_adjoint_approaches_negative_transpose() {
    let m = builtin_model("smooth_bounded").unwrap();
    let st = SolverSettings::default();
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for n in [8, 16] {
        let g = Grid::unit_square(n).unwrap();
        let (s, _) = solve_state(&m, &common::bump(g, 1.0), &st).unwrap();
        let cont = assemble_adjoint_continuous(&m, &s);
        let jt = assemble_linearized(&m, &s).matrix.transpose();
        let neg = SparseMatrix::from_csr(
            jt.nrows(),
            jt.ncols(),
            jt.row_offsets().to_vec(),
            jt.col_indices().to_vec(),
            jt.values().iter().map(|v| -v).collect(),
        )
        .unwrap();
        errs.push(rel_frobenius(&cont, &neg));
        hs.push(g.hx());
    }
    let order = (errs[0] / errs[1]).ln() / (hs[0] / hs[1]).ln();
    assert!(errs[1] < errs[0], "{errs:?}");
    assert!(order >= 0.9, "order {order}, {errs:?}");
}
