use std::f64::consts::PI;

use deadoil::verify::{
    adjoint_consistency, coupled_manufactured, gradient_check, gradient_problem, mms_coupled,
    mms_pressure, run_case, taylor_delta_f, VerificationReport, VerifyOptions, CASES,
};
use deadoil_core::{builtin_model, solve_state, ControlProblem, Field, Grid, SolverSettings};

fn st() -> SolverSettings {
    SolverSettings::default()
}

fn round_trip(r: &VerificationReport) -> VerificationReport {
    serde_json::from_str(&serde_json::to_string(r).unwrap()).unwrap()
}

/// Continuous `-div(a(u)∇v)` by nested central differences of the analytic
/// fields, independent of the symbolic substitution.
fn fd_neg_div(
    a: impl Fn(f64) -> f64,
    u: impl Fn(f64, f64) -> f64,
    v: impl Fn(f64, f64) -> f64,
    x: f64,
    y: f64,
) -> f64 {
    let h = 1e-4;
    let flux = |x0: f64, y0: f64, x1: f64, y1: f64| {
        let am = a(u((x0 + x1) / 2.0, (y0 + y1) / 2.0));
        am * (v(x1, y1) - v(x0, y0))
    };
    -(flux(x, y, x + h, y) - flux(x - h, y, x, y) + flux(x, y, x, y + h) - flux(x, y - h, x, y))
        / (h * h)
}

#[test]
fn manufactured_sources_match_finite_differences() {
    let m = builtin_model("smooth_bounded").unwrap();
    let a = 0.1;
    let u = |x: f64, y: f64| a * (PI * x).sin() * (PI * y).sin();
    let p = |x: f64, y: f64| a * (PI * x).sin() * (2.0 * PI * y).sin();
    let phi_u = |x: f64, y: f64| m.phi(u(x, y));
    let g = Grid::unit_square(5).unwrap();
    let (us, ps, aux, f) = coupled_manufactured(&m, g, a);
    for k in 0..g.len() {
        let (i, j) = g.ij(k);
        let (x, y) = g.coords(i, j);
        assert!((us.values()[k] - u(x, y)).abs() < 1e-15);
        assert!((ps.values()[k] - p(x, y)).abs() < 1e-15);
        let s1 = fd_neg_div(|_| 1.0, u, phi_u, x, y) + fd_neg_div(|r| m.g(r), u, p, x, y);
        let f_fd = fd_neg_div(|r| m.d(r), u, p, x, y);
        assert!(
            (aux.values()[k] - s1).abs() <= 1e-5 * (1.0 + s1.abs()),
            "{} vs {s1}",
            aux.values()[k]
        );
        assert!(
            (f.values()[k] - f_fd).abs() <= 1e-5 * (1.0 + f_fd.abs()),
            "{} vs {f_fd}",
            f.values()[k]
        );
    }
}

#[test]
fn pressure_mms_two_grids() {
    let r = mms_pressure(&[32, 64], &st()).unwrap();
    assert_eq!(r.series("p_error_max").unwrap().len(), 2);
    assert_eq!(r.series("p_order").unwrap().len(), 1);
    assert!(r.pass, "{:?}", r.failures());
}

#[test]
fn pressure_mms_orders_approach_two() {
    let r = mms_pressure(&[16, 32, 64], &st()).unwrap();
    let o = r.series("p_order").unwrap();
    assert!(o[1] >= o[0] - 0.01, "{o:?}");
    assert!(o.iter().all(|v| (v - 2.0).abs() < 0.05), "{o:?}");
}

#[test]
fn coupled_mms_report_shape() {
    let r = mms_coupled(&[16, 32], 0.1, &st()).unwrap();
    assert_eq!(r.series("u_error_max").unwrap().len(), 2);
    assert_eq!(r.series("p_error_max").unwrap().len(), 2);
    assert!(r.pass, "{:?}", r.failures());
}

#[test]
fn coupled_mms_zero_amplitude_is_exact() {
    let r = mms_coupled(&[8, 16], 0.0, &st()).unwrap();
    assert!(r.series("u_error_max").unwrap().iter().all(|&e| e == 0.0));
    assert!(r.series("p_error_max").unwrap().iter().all(|&e| e == 0.0));
    assert!(r.pass, "{:?}", r.failures());
}

#[test]
fn taylor_linear_model_at_zero_is_exact() {
    let m = builtin_model("verification_constant").unwrap();
    let r = taylor_delta_f(&m, 2, 7, true).unwrap();
    assert!(r.check_named("all samples exact").is_some());
    assert!(r.pass);
}

#[test]
fn taylor_single_sample_orders() {
    let m = builtin_model("smooth_bounded").unwrap();
    let r = taylor_delta_f(&m, 1, 11, false).unwrap();
    assert!(r
        .series("sample 0 order")
        .unwrap()
        .iter()
        .all(|&o| o >= 1.9));
    assert!(r.pass);
}

#[test]
fn taylor_is_deterministic_per_seed() {
    let m = builtin_model("smooth_bounded").unwrap();
    let a = taylor_delta_f(&m, 2, 99, false).unwrap();
    let b = taylor_delta_f(&m, 2, 99, false).unwrap();
    let c = taylor_delta_f(&m, 2, 100, false).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.series, c.series);
    assert_eq!(a.seed, Some(99));
}

#[test]
fn gradient_check_trivial_at_data() {
    let m = builtin_model("smooth_bounded").unwrap();
    let g = Grid::unit_square(6).unwrap();
    let f = Field::zeros(g);
    let (s, _) = solve_state(&m, &f, &st()).unwrap();
    let cp = ControlProblem::with_smoothing(0.1, 1.5, s.u, s.p, 0.0).unwrap();
    let r = gradient_check(&m, &cp, &f, 2, 1, &st()).unwrap();
    assert!(r
        .series("discrete_directional")
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));
    assert!(r
        .series("fd_directional")
        .unwrap()
        .iter()
        .all(|v| v.abs() < 1e-12));
    assert!(r.pass);
}

#[test]
fn gradient_check_rejects_large_grids() {
    let m = builtin_model("smooth_bounded").unwrap();
    let (cp, f) = gradient_problem(33, 1).unwrap();
    assert!(gradient_check(&m, &cp, &f, 1, 1, &st()).is_err());
}

#[test]
fn continuous_mode_gradient_error_shrinks() {
    let m = builtin_model("smooth_bounded").unwrap();
    let r = adjoint_consistency(&m, &[8, 16], &st()).unwrap();
    let e = r.series("continuous_gradient_error").unwrap();
    assert!(e[0] / e[1] >= 1.5, "{e:?}");
}

#[test]
fn default_cases_pass_and_are_self_consistent() {
    let opt = VerifyOptions::default();
    for case in CASES {
        let r = run_case(case, &opt).unwrap();
        assert!(r.pass, "{case}: {:?}", r.failures());
        let back = round_trip(&r);
        assert!(back.is_consistent());
        assert_eq!(back.recomputed_pass(), r.pass);
    }
}

#[test]
fn tampered_report_is_detected() {
    let r = run_case("mms_pressure", &VerifyOptions::default()).unwrap();
    let mut t = round_trip(&r);
    t.checks[0].value = 1.0;
    assert!(!t.is_consistent());
    assert!(!t.recomputed_pass());
}
