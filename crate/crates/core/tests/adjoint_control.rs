mod common;

use deadoil_core::adjoint::reduced_cost;
use deadoil_core::{
    assemble_laplacian, builtin_model, eval_cost, inner_product, lp_power_norm, optimize,
    reduced_gradient, solve_adjoint, solve_cg, solve_state, AdjointMode, ControlProblem, Field,
    Grid, OptimizeOptions, SolverSettings, StateSolution, Termination,
};
use rand::Rng;

fn tight() -> SolverSettings {
    SolverSettings {
        tol_nonlinear: 1e-13,
        ..SolverSettings::default()
    }
}

#[test]
fn adjoint_vanishes_at_targets() {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(6).unwrap();
    let (s, _) = solve_state(&m, &common::bump(g, 1.0), &tight()).unwrap();
    let cp = ControlProblem::new(0.1, 1.5, s.u.clone(), s.p.clone()).unwrap();
    for mode in [AdjointMode::Continuous, AdjointMode::Discrete] {
        let a = solve_adjoint(mode, &m, &s, &cp, &tight()).unwrap();
        assert!(a.e1.values().iter().chain(a.p1.values()).all(|&v| v == 0.0));
    }
}

#[test]
fn decoupled_adjoint_is_a_poisson_solve() {
    let m = builtin_model("verification_constant").unwrap();
    let g = Grid::unit_square(7).unwrap();
    let mut rng = common::rng(50);
    let target_p = common::random_field(g, &mut rng, -1.0, 1.0);
    let cp = ControlProblem::new(0.1, 1.5, Field::zeros(g), target_p.clone()).unwrap();
    let s = StateSolution::zeros(g);
    // div(∇p₁) = p − P = −P, i.e. (−Δₕ) p₁ = P
    let oracle = solve_cg(&assemble_laplacian(&g), target_p.values(), 1e-14, 1000)
        .unwrap()
        .x;
    let oracle = Field::from_values(g, oracle).unwrap();
    for mode in [AdjointMode::Continuous, AdjointMode::Discrete] {
        let a = solve_adjoint(mode, &m, &s, &cp, &tight()).unwrap();
        assert!(a.e1.max_abs() == 0.0);
        assert!(common::max_diff(&a.p1, &oracle) <= 1e-10 * oracle.max_abs());
    }
}

#[test]
fn adjoint_modes_converge_together() {
    let m = builtin_model("smooth_bounded").unwrap();
    let st = SolverSettings::default();
    let mut rel = Vec::new();
    let mut hs = Vec::new();
    for n in [8, 16, 32] {
        let g = Grid::unit_square(n).unwrap();
        let (s, _) = solve_state(&m, &common::bump(g, 1.0), &st).unwrap();
        let cp = ControlProblem::new(1e-3, 1.5, Field::zeros(g), Field::zeros(g)).unwrap();
        let a = solve_adjoint(AdjointMode::Continuous, &m, &s, &cp, &st).unwrap();
        let b = solve_adjoint(AdjointMode::Discrete, &m, &s, &cp, &st).unwrap();
        let de = a.e1.add_scaled(-1.0, &b.e1).unwrap().norm_l2();
        let dp = a.p1.add_scaled(-1.0, &b.p1).unwrap().norm_l2();
        let nb = b.e1.norm_l2().hypot(b.p1.norm_l2());
        rel.push(de.hypot(dp) / nb);
        hs.push(g.hx());
    }
    for k in 0..2 {
        let order = (rel[k] / rel[k + 1]).ln() / (hs[k] / hs[k + 1]).ln();
        assert!(order >= 0.9, "order {order} from {rel:?}");
    }
}

/// Central-difference directional derivative of the reduced cost.
fn fd_directional(
    cp: &ControlProblem,
    m: &deadoil_core::CoefficientModel,
    f: &Field,
    dir: &Field,
    h: f64,
) -> f64 {
    let st = tight();
    let plus = reduced_cost(cp, m, &f.add_scaled(h, dir).unwrap(), &st).unwrap();
    let minus = reduced_cost(cp, m, &f.add_scaled(-h, dir).unwrap(), &st).unwrap();
    (plus - minus) / (2.0 * h)
}

#[test]
fn discrete_gradient_matches_finite_differences() {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(8).unwrap();
    let mut rng = common::rng(51);
    let cp = ControlProblem::new(
        0.1,
        1.5,
        common::random_field(g, &mut rng, -0.05, 0.05),
        common::random_field(g, &mut rng, -0.05, 0.05),
    )
    .unwrap();
    let f = common::random_field(g, &mut rng, -1.0, 1.0);
    let (s, _) = solve_state(&m, &f, &tight()).unwrap();
    let adj = solve_adjoint(AdjointMode::Discrete, &m, &s, &cp, &tight()).unwrap();
    let grad = reduced_gradient(&cp, &f, &adj).unwrap();
    for _ in 0..3 {
        let dir = common::random_field(g, &mut rng, -1.0, 1.0);
        let dir = dir.scaled(1.0 / dir.norm_l2());
        let exact = inner_product(&grad, &dir).unwrap();
        let fd = fd_directional(&cp, &m, &f, &dir, 1e-5);
        let rel = (exact - fd).abs() / exact.abs();
        assert!(rel <= 1e-6, "rel {rel:e} ({exact} vs {fd})");
    }
}

#[test]
fn smoothing_is_invisible_away_from_zero() {
    let g = Grid::unit_square(6).unwrap();
    let s = StateSolution::zeros(g);
    for seed in 0..20 {
        let mut rng = common::rng(60 + seed);
        let f: Vec<f64> = (0..g.len())
            .map(|_| {
                let mag = rng.gen_range(1e-3..1.0);
                if rng.gen_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let f = Field::from_values(g, f).unwrap();
        let q0 = rng.gen_range(1.01..1.99);
        let zero = || Field::zeros(g);
        let a = ControlProblem::with_smoothing(0.1, q0, zero(), zero(), 0.0).unwrap();
        let b = ControlProblem::with_smoothing(0.1, q0, zero(), zero(), 1e-8).unwrap();
        let (ja, jb) = (
            eval_cost(&a, &s, &f).unwrap(),
            eval_cost(&b, &s, &f).unwrap(),
        );
        assert!((ja - jb).abs() <= 1e-12 * ja, "q0={q0}: {ja} vs {jb}");
    }
}

#[test]
fn unsmoothed_cost_uses_lp_norm() {
    let g = Grid::unit_square(4).unwrap();
    let mut rng = common::rng(70);
    let f = common::random_field(g, &mut rng, -2.0, 2.0);
    let cp =
        ControlProblem::with_smoothing(0.3, 1.25, Field::zeros(g), Field::zeros(g), 0.0).unwrap();
    let j = eval_cost(&cp, &StateSolution::zeros(g), &f).unwrap();
    assert_eq!(j, 0.3 * lp_power_norm(&f, 2.5).unwrap());
}

#[test]
fn stationary_start_returns_immediately() {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(8).unwrap();
    let cp = ControlProblem::new(0.1, 1.5, Field::zeros(g), Field::zeros(g)).unwrap();
    let out = optimize(
        &cp,
        &m,
        &Field::zeros(g),
        &SolverSettings::default(),
        &OptimizeOptions::default(),
    )
    .unwrap();
    assert_eq!(out.iterations(), 0);
    assert_eq!(out.termination, Termination::Tolerance);
    assert_eq!(out.control, Field::zeros(g));
    assert_eq!(out.final_cost(), 0.0);
}

fn manufactured(n: usize, beta1: f64) -> (deadoil_core::CoefficientModel, ControlProblem, Grid) {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(n).unwrap();
    let (target, _) = solve_state(&m, &common::bump(g, 1.0), &SolverSettings::default()).unwrap();
    let cp = ControlProblem::new(beta1, 1.5, target.u, target.p).unwrap();
    (m, cp, g)
}

#[test]
fn inverse_problem_descends() {
    let (m, cp, g) = manufactured(16, 1e-3);
    let st = SolverSettings::default();
    let out = optimize(&cp, &m, &Field::zeros(g), &st, &OptimizeOptions::default()).unwrap();
    let h = &out.history;
    assert!(h.windows(2).all(|w| w[1].cost < w[0].cost));
    assert!(out.stationarity_norm() <= 1e-2 * h[0].stationarity_norm);

    // the reported stationarity norm is reproducible from the returned triple
    let adj = solve_adjoint(AdjointMode::Discrete, &m, &out.state, &cp, &st).unwrap();
    let g_again = reduced_gradient(&cp, &out.control, &adj).unwrap().norm_l2();
    assert!(
        (g_again - out.stationarity_norm()).abs() <= 1e-12 * out.stationarity_norm().max(1e-300)
    );
}

#[test]
fn penalty_weight_shrinks_control() {
    let mut norms = Vec::new();
    for beta1 in [1e-1, 1e-2, 1e-3] {
        let (m, cp, g) = manufactured(12, beta1);
        let out = optimize(
            &cp,
            &m,
            &Field::zeros(g),
            &SolverSettings::default(),
            &OptimizeOptions::default(),
        )
        .unwrap();
        norms.push(lp_power_norm(&out.control, 2.0 * cp.q0).unwrap());
    }
    // ‖f*‖ grows as β₁ decreases
    assert!(norms[0] <= norms[1] && norms[1] <= norms[2], "{norms:?}");
}

#[test]
fn zero_outer_iterations_echo_start() {
    let (m, cp, g) = manufactured(8, 1e-2);
    let f0 = common::bump(g, 0.3);
    let opt = OptimizeOptions {
        max_outer: 0,
        ..OptimizeOptions::default()
    };
    let out = optimize(&cp, &m, &f0, &SolverSettings::default(), &opt).unwrap();
    assert_eq!(out.iterations(), 0);
    assert_eq!(out.control, f0);
    assert_eq!(out.termination, Termination::MaxOuter);
}
