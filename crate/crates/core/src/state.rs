//! Nonlinear state solvers: Picard sweeps alternating frozen-coefficient
//! pressure and saturation solves, and damped Newton on the exact Jacobian.
//!
//! Both start from the branch reachable from `u = p = 0`; nothing rules
//! out other solutions of the continuous system.

use alloc::vec::Vec;

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::operators::{
    assemble_laplacian, assemble_linearized, assemble_pressure_operator, neg_div_flux,
    neg_laplacian, nodal, residual_with_source, StateSolution,
};
use crate::sparse::{solve_cg, solve_general};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Converged when `‖(r1, r2)‖₂ ≤ tol_nonlinear·(1 + ‖f‖₂)`.
    pub tol_nonlinear: f64,
    pub maxit_nonlinear: usize,
    pub tol_linear: f64,
    pub maxit_linear: usize,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub min_step: f64,
    /// Picard sweeps run before Newton by [`solve_state`].
    pub warm_start_sweeps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_nonlinear: 1e-10,
            maxit_nonlinear: 100,
            tol_linear: 1e-12,
            maxit_linear: 20_000,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            min_step: 1e-8,
            warm_start_sweeps: 3,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_nonlinear", self.tol_nonlinear),
            ("tol_linear", self.tol_linear),
            ("armijo_c", self.armijo_c),
            ("min_step", self.min_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(alloc::format!("{name} must be positive")));
            }
        }
        if self.maxit_nonlinear == 0 || self.maxit_linear == 0 {
            return Err(Error::invalid("iteration caps must be positive"));
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(Error::invalid("armijo_shrink must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub residual: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveLog {
    pub records: Vec<IterRecord>,
}

impl SolveLog {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    /// `log₂(r_{k-1}/r_k)` for consecutive iterations.
    pub fn reduction_orders(&self) -> Vec<f64> {
        self.records
            .windows(2)
            .map(|w| libm::log2(w[0].residual / w[1].residual))
            .collect()
    }
}

/// Discrete L² norm of the stacked residual.
pub fn residual_norm(r1: &Field, r2: &Field) -> f64 {
    libm::sqrt(r1.norm_l2() * r1.norm_l2() + r2.norm_l2() * r2.norm_l2())
}

fn target(st: &SolverSettings, f: &Field) -> f64 {
    st.tol_nonlinear * (1.0 + f.norm_l2())
}

/// Solves `-divₕ(d(u)∇ₕp) = f` by CG.
pub fn solve_pressure(
    m: &CoefficientModel,
    u: &Field,
    f: &Field,
    st: &SolverSettings,
) -> Result<Field> {
    u.grid().check_same(f.grid())?;
    let a = assemble_pressure_operator(m, u);
    let sol = solve_cg(&a, f.values(), st.tol_linear, st.maxit_linear)?;
    Field::from_values(*u.grid(), sol.x)
}

/// One frozen-coefficient saturation update.
///
/// Linearizes `φ` about `u_prev` and freezes `g(u_prev)`:
/// `-Δₕ[φ(u_prev) + φ′(u_prev)(u_new − u_prev)] = divₕ(g(u_prev)∇ₕp)`,
/// so a fixed point solves the discrete saturation equation exactly. With
/// `v = φ′(u_prev)·u_new` this is a Laplace problem solved by CG.
pub fn solve_saturation(
    m: &CoefficientModel,
    u_prev: &Field,
    p: &Field,
    st: &SolverSettings,
) -> Result<Field> {
    saturation_step(m, u_prev, p, None, st)
}

fn saturation_step(
    m: &CoefficientModel,
    u_prev: &Field,
    p: &Field,
    aux: Option<&Field>,
    st: &SolverSettings,
) -> Result<Field> {
    let grid = *u_prev.grid();
    grid.check_same(p.grid())?;
    let dphi = nodal(m, u_prev, CoefficientModel::dphi);
    if dphi.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::invalid(
            "saturation update needs φ′ > 0 at every node",
        ));
    }
    let phi0 = m.phi(0.0);
    // z = φ(u) − φ(0) − φ′(u)·u vanishes on the boundary
    let z: Vec<f64> = u_prev
        .values()
        .iter()
        .zip(&dphi)
        .map(|(&u, &dp)| (m.phi(u) - phi0) - dp * u)
        .collect();
    let g = nodal(m, u_prev, CoefficientModel::g);
    let flux_g = neg_div_flux(&grid, &g, m.g(0.0), p.values());
    let lap_z = neg_laplacian(&grid, &z);
    let mut rhs: Vec<f64> = flux_g.iter().zip(&lap_z).map(|(a, b)| -a - b).collect();
    if let Some(a) = aux {
        for (r, s) in rhs.iter_mut().zip(a.values()) {
            *r += s;
        }
    }
    let lap = assemble_laplacian(&grid);
    let v = solve_cg(&lap, &rhs, st.tol_linear, st.maxit_linear)?.x;
    let u_new = v.iter().zip(&dphi).map(|(v, d)| v / d).collect();
    Field::from_values(grid, u_new)
}

/// Picard sweeps from zero: pressure solve with the current saturation,
/// then a saturation update with the new pressure.
pub fn solve_state_picard(
    m: &CoefficientModel,
    f: &Field,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog)> {
    picard(
        m,
        f,
        None,
        StateSolution::zeros(*f.grid()),
        st.maxit_nonlinear,
        st,
    )
}

/// [`solve_state_picard`] with an auxiliary saturation source, for
/// manufactured-solution studies only.
pub fn solve_state_picard_with_source(
    m: &CoefficientModel,
    f: &Field,
    aux: &Field,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog)> {
    picard(
        m,
        f,
        Some(aux),
        StateSolution::zeros(*f.grid()),
        st.maxit_nonlinear,
        st,
    )
}

fn picard(
    m: &CoefficientModel,
    f: &Field,
    aux: Option<&Field>,
    init: StateSolution,
    sweeps: usize,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog)> {
    let (s, log, converged) = picard_sweeps(m, f, aux, init, sweeps, st)?;
    if converged {
        Ok((s, log))
    } else {
        Err(Error::NonConvergence {
            method: "picard",
            iterations: log.iterations(),
            residual: log.final_residual().unwrap_or(f64::NAN),
            history: log.residuals(),
        })
    }
}

/// Runs at most `sweeps` sweeps; the flag tells whether the tolerance was met.
fn picard_sweeps(
    m: &CoefficientModel,
    f: &Field,
    aux: Option<&Field>,
    init: StateSolution,
    sweeps: usize,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog, bool)> {
    st.validate()?;
    let tol = target(st, f);
    let mut s = init;
    let mut log = SolveLog::default();
    let (r1, r2) = residual_with_source(m, &s, f, aux)?;
    let res = residual_norm(&r1, &r2);
    log.records.push(IterRecord {
        iter: 0,
        residual: res,
        step: 0.0,
    });
    if res <= tol {
        return Ok((s, log, true));
    }
    for iter in 1..=sweeps {
        let p = solve_pressure(m, &s.u, f, st)?;
        let u = saturation_step(m, &s.u, &p, aux, st)?;
        s = StateSolution { u, p };
        let (r1, r2) = residual_with_source(m, &s, f, aux)?;
        let res = residual_norm(&r1, &r2);
        log.records.push(IterRecord {
            iter,
            residual: res,
            step: 1.0,
        });
        if !res.is_finite() {
            break;
        }
        if res <= tol {
            return Ok((s, log, true));
        }
    }
    Ok((s, log, false))
}

/// Damped Newton on `F(u, p, f) = 0` using the exact discrete Jacobian and
/// Armijo backtracking on `‖F‖₂²`.
pub fn solve_state_newton(
    m: &CoefficientModel,
    f: &Field,
    init: &StateSolution,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog)> {
    newton(m, f, None, init, st)
}

/// [`solve_state_newton`] with an auxiliary saturation source, for
/// manufactured-solution studies only.
pub fn solve_state_newton_with_source(
    m: &CoefficientModel,
    f: &Field,
    aux: &Field,
    init: &StateSolution,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog)> {
    newton(m, f, Some(aux), init, st)
}

fn newton(
    m: &CoefficientModel,
    f: &Field,
    aux: Option<&Field>,
    init: &StateSolution,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog)> {
    st.validate()?;
    let grid: Grid = *f.grid();
    grid.check_same(init.grid())?;
    let tol = target(st, f);
    let mut s = init.clone();
    let (r1, r2) = residual_with_source(m, &s, f, aux)?;
    let mut res = residual_norm(&r1, &r2);
    let mut rvec = stack(&r1, &r2);
    let mut log = SolveLog::default();
    log.records.push(IterRecord {
        iter: 0,
        residual: res,
        step: 0.0,
    });
    let mut iter = 0;
    while res > tol {
        if iter == st.maxit_nonlinear || !res.is_finite() {
            return Err(Error::NonConvergence {
                method: "newton",
                iterations: iter,
                residual: res,
                history: log.residuals(),
            });
        }
        iter += 1;
        let jac = assemble_linearized(m, &s);
        let rhs: Vec<f64> = rvec.iter().map(|v| -v).collect();
        let delta = solve_general(&jac.matrix, &rhs, st.tol_linear, st.maxit_linear)?.x;
        let x = s.stacked();
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + step * b).collect();
            let ts = StateSolution::from_stacked(grid, &trial)?;
            let (t1, t2) = residual_with_source(m, &ts, f, aux)?;
            let tres = residual_norm(&t1, &t2);
            if tres.is_finite() && tres * tres <= (1.0 - 2.0 * st.armijo_c * step) * res * res {
                s = ts;
                res = tres;
                rvec = stack(&t1, &t2);
                break;
            }
            step *= st.armijo_shrink;
            if step < st.min_step {
                return Err(Error::Stagnation {
                    method: "newton",
                    residual: res,
                    history: log.residuals(),
                });
            }
        }
        log.records.push(IterRecord {
            iter,
            residual: res,
            step,
        });
    }
    Ok((s, log))
}

fn stack(a: &Field, b: &Field) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a.values());
    v.extend_from_slice(b.values());
    v
}

/// Picard warm start (at most `warm_start_sweeps`) followed by Newton.
pub fn solve_state(
    m: &CoefficientModel,
    f: &Field,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog)> {
    solve_state_from(m, f, None, StateSolution::zeros(*f.grid()), st)
}

pub(crate) fn solve_state_from(
    m: &CoefficientModel,
    f: &Field,
    aux: Option<&Field>,
    init: StateSolution,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog)> {
    let (warm, warm_log, converged) =
        picard_sweeps(m, f, aux, init.clone(), st.warm_start_sweeps, st)?;
    if converged {
        return Ok((warm, warm_log));
    }
    let warm = if warm.is_finite() { warm } else { init };
    let (s, newton_log) = newton(m, f, aux, &warm, st)?;
    let offset = warm_log.iterations();
    let mut log = warm_log;
    log.records
        .extend(newton_log.records.into_iter().skip(1).map(|r| IterRecord {
            iter: r.iter + offset,
            ..r
        }));
    Ok((s, log))
}

/// [`solve_state`] with an auxiliary saturation source, for
/// manufactured-solution studies only.
pub fn solve_state_with_source(
    m: &CoefficientModel,
    f: &Field,
    aux: &Field,
    st: &SolverSettings,
) -> Result<(StateSolution, SolveLog)> {
    solve_state_from(m, f, Some(aux), StateSolution::zeros(*f.grid()), st)
}
