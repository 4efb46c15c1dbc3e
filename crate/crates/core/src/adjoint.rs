//! Cost functional, adjoint solves, reduced gradient and a steepest-descent
//! driver for the source control `f`.
//!
//! The reduced gradient is the stationarity residual
//! `2q₀β₁(f² + ε²)^(q₀−1) f − p₁`; at `ε = 0` it vanishes exactly when
//! `2q₀β₁|f|^(2q₀−2) f = p₁`.

use alloc::vec::Vec;

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::grid::{inner_product, lp_power_norm, Field};
use crate::operators::{assemble_adjoint_continuous, assemble_linearized, StateSolution};
use crate::sparse::solve_general;
use crate::state::{solve_state_from, solve_state_newton, SolverSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub beta1: f64,
    pub q0: f64,
    pub target_u: Field,
    pub target_p: Field,
    /// Penalty smoothing `ε ≥ 0`.
    pub eps_smooth: f64,
}

impl ControlProblem {
    pub fn new(beta1: f64, q0: f64, target_u: Field, target_p: Field) -> Result<Self> {
        Self::with_smoothing(beta1, q0, target_u, target_p, 1e-8)
    }

    pub fn with_smoothing(
        beta1: f64,
        q0: f64,
        target_u: Field,
        target_p: Field,
        eps_smooth: f64,
    ) -> Result<Self> {
        if !(beta1 > 0.0 && beta1.is_finite()) {
            return Err(Error::invalid("beta1 must be positive"));
        }
        if !(q0 > 1.0 && q0 < 2.0) {
            return Err(Error::invalid("q0 must lie in the open interval (1, 2)"));
        }
        if !(eps_smooth >= 0.0 && eps_smooth.is_finite()) {
            return Err(Error::invalid("eps_smooth must be nonnegative"));
        }
        target_u.grid().check_same(target_p.grid())?;
        if !target_u.is_finite() || !target_p.is_finite() {
            return Err(Error::invalid("targets must be finite"));
        }
        Ok(ControlProblem {
            beta1,
            q0,
            target_u,
            target_p,
            eps_smooth,
        })
    }

    /// Penalty density `(f² + ε²)^q₀ − ε^(2q₀)`, i.e. `|f|^(2q₀)` at `ε = 0`.
    fn penalty_density(&self, f: f64) -> f64 {
        let e2 = self.eps_smooth * self.eps_smooth;
        libm::pow(f * f + e2, self.q0) - libm::pow(e2, self.q0)
    }

    fn penalty_slope(&self, f: f64) -> f64 {
        let e2 = self.eps_smooth * self.eps_smooth;
        2.0 * self.q0 * self.beta1 * libm::pow(f * f + e2, self.q0 - 1.0) * f
    }
}

/// `J = ½‖u−U‖² + ½‖p−P‖² + β₁ ∫((f²+ε²)^q₀ − ε^(2q₀))`.
pub fn eval_cost(cp: &ControlProblem, s: &StateSolution, f: &Field) -> Result<f64> {
    let du = s.u.add_scaled(-1.0, &cp.target_u)?;
    let dp = s.p.add_scaled(-1.0, &cp.target_p)?;
    s.grid().check_same(f.grid())?;
    let misfit = 0.5 * inner_product(&du, &du)? + 0.5 * inner_product(&dp, &dp)?;
    let penalty = if cp.eps_smooth == 0.0 {
        lp_power_norm(f, 2.0 * cp.q0)?
    } else {
        f.grid().cell_area()
            * f.values()
                .iter()
                .map(|&v| cp.penalty_density(v))
                .sum::<f64>()
    };
    Ok(misfit + cp.beta1 * penalty)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointMode {
    /// The continuous adjoint system discretized on its own.
    Continuous,
    /// Transpose of the discrete Jacobian; yields exact discrete gradients.
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSolution {
    pub e1: Field,
    pub p1: Field,
}

/// Solves for `(e₁, p₁)`.
///
/// Both modes use the sign convention of the continuous system, whose
/// right-hand side is `(u − U, p − P)`; in discrete mode that reads
/// `δFᵀ(e₁, p₁) = −(u − U, p − P)`. Quadrature weights are uniform and
/// cancel from both sides.
pub fn solve_adjoint(
    mode: AdjointMode,
    m: &CoefficientModel,
    s: &StateSolution,
    cp: &ControlProblem,
    st: &SolverSettings,
) -> Result<AdjointSolution> {
    let grid = *s.grid();
    let n = grid.len();
    let du = s.u.add_scaled(-1.0, &cp.target_u)?;
    let dp = s.p.add_scaled(-1.0, &cp.target_p)?;
    let mut rhs = Vec::with_capacity(2 * n);
    rhs.extend_from_slice(du.values());
    rhs.extend_from_slice(dp.values());
    let matrix = match mode {
        AdjointMode::Continuous => assemble_adjoint_continuous(m, s),
        AdjointMode::Discrete => {
            rhs.iter_mut().for_each(|v| *v = -*v);
            assemble_linearized(m, s).matrix.transpose()
        }
    };
    let mut x = solve_general(&matrix, &rhs, st.tol_linear, st.maxit_linear)?.x;
    let p1 = x.split_off(n);
    Ok(AdjointSolution {
        e1: Field::from_values(grid, x)?,
        p1: Field::from_values(grid, p1)?,
    })
}

/// Nodal reduced gradient `2q₀β₁(f²+ε²)^(q₀−1) f − p₁`.
pub fn reduced_gradient(cp: &ControlProblem, f: &Field, adj: &AdjointSolution) -> Result<Field> {
    f.grid().check_same(adj.p1.grid())?;
    let values = f
        .values()
        .iter()
        .zip(adj.p1.values())
        .map(|(&fk, &pk)| cp.penalty_slope(fk) - pk)
        .collect();
    Field::from_values(*f.grid(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub max_outer: usize,
    /// Stop once `‖g‖₂ ≤ tol_stationarity · ‖g₀‖₂`.
    pub tol_stationarity: f64,
    /// First trial step; later trials use the Barzilai–Borwein length.
    pub step0: f64,
    pub adjoint_mode: AdjointMode,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_outer: 200,
            tol_stationarity: 1e-6,
            step0: 1.0,
            adjoint_mode: AdjointMode::Discrete,
        }
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterRecord {
    pub iter: usize,
    pub cost: f64,
    pub stationarity_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Stationarity tolerance met.
    Tolerance,
    /// `max_outer` iterations spent.
    MaxOuter,
    /// Line search failed after at least one accepted step.
    Stagnated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub control: Field,
    pub state: StateSolution,
    pub adjoint: AdjointSolution,
    pub gradient: Field,
    pub history: Vec<OuterRecord>,
    pub termination: Termination,
}

impl OptimizeOutcome {
    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.iter)
    }
    pub fn final_cost(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.cost)
    }
    pub fn stationarity_norm(&self) -> f64 {
        self.history
            .last()
            .map_or(f64::NAN, |r| r.stationarity_norm)
    }
}

/// State, cost, adjoint and gradient at one control.
struct Evaluation {
    f: Field,
    state: StateSolution,
    cost: f64,
}

fn evaluate_state(
    cp: &ControlProblem,
    m: &CoefficientModel,
    f: Field,
    warm: Option<&StateSolution>,
    st: &SolverSettings,
) -> Result<Evaluation> {
    let state = match warm {
        Some(init) => match solve_state_newton(m, &f, init, st) {
            Ok((s, _)) => s,
            Err(_) => solve_state_from(m, &f, None, StateSolution::zeros(*f.grid()), st)?.0,
        },
        None => solve_state_from(m, &f, None, StateSolution::zeros(*f.grid()), st)?.0,
    };
    let cost = eval_cost(cp, &state, &f)?;
    Ok(Evaluation { f, state, cost })
}

/// Reduced cost `Ĵ(f) = J(S(f), f)` with the state solved from zero.
pub fn reduced_cost(
    cp: &ControlProblem,
    m: &CoefficientModel,
    f: &Field,
    st: &SolverSettings,
) -> Result<f64> {
    Ok(evaluate_state(cp, m, f.clone(), None, st)?.cost)
}

/// Steepest descent with Armijo backtracking on the reduced cost.
///
/// Returns the last accepted iterate, which is also the best one since
/// accepted costs strictly decrease. Trial steps whose state or adjoint
/// solve fails are treated as rejected.
pub fn optimize(
    cp: &ControlProblem,
    m: &CoefficientModel,
    f0: &Field,
    st: &SolverSettings,
    opt: &OptimizeOptions,
) -> Result<OptimizeOutcome> {
    st.validate()?;
    cp.target_u.grid().check_same(f0.grid())?;
    if !f0.is_finite() {
        return Err(Error::invalid("initial control must be finite"));
    }
    if opt.step0.is_nan()
        || opt.step0 <= 0.0
        || opt.tol_stationarity.is_nan()
        || opt.tol_stationarity < 0.0
    {
        return Err(Error::invalid(
            "step0 must be positive, tol_stationarity nonnegative",
        ));
    }

    let mut cur = evaluate_state(cp, m, f0.clone(), None, st)?;
    let mut adj = solve_adjoint(opt.adjoint_mode, m, &cur.state, cp, st)?;
    let mut grad = reduced_gradient(cp, &cur.f, &adj)?;
    let mut gnorm = grad.norm_l2();
    let g0 = gnorm;
    let mut history = Vec::new();
    history.push(OuterRecord {
        iter: 0,
        cost: cur.cost,
        stationarity_norm: gnorm,
        step: 0.0,
    });

    let converged = |g: f64| g == 0.0 || g <= opt.tol_stationarity * g0;
    let mut termination = Termination::MaxOuter;
    let mut trial_step = opt.step0;
    let mut prev: Option<(Field, Field)> = None;

    for iter in 1..=opt.max_outer {
        if converged(gnorm) {
            termination = Termination::Tolerance;
            break;
        }
        if let Some((f_prev, g_prev)) = &prev {
            let s = cur.f.add_scaled(-1.0, f_prev)?;
            let y = grad.add_scaled(-1.0, g_prev)?;
            let sy = inner_product(&s, &y)?;
            if sy > 0.0 {
                trial_step = inner_product(&s, &s)? / sy;
            }
        }
        let slope = gnorm * gnorm;
        let mut step = trial_step;
        let accepted = loop {
            let f_trial = cur.f.add_scaled(-step, &grad)?;
            if let Ok(ev) = evaluate_state(cp, m, f_trial, Some(&cur.state), st) {
                if ev.cost.is_finite()
                    && ev.cost < cur.cost
                    && ev.cost <= cur.cost - st.armijo_c * step * slope
                {
                    if let Ok(a) = solve_adjoint(opt.adjoint_mode, m, &ev.state, cp, st) {
                        break Some((ev, a));
                    }
                }
            }
            step *= st.armijo_shrink;
            if step < st.min_step {
                break None;
            }
        };
        let Some((ev, a)) = accepted else {
            if iter == 1 {
                return Err(Error::Stagnation {
                    method: "optimize",
                    residual: gnorm,
                    history: history.iter().map(|r| r.cost).collect(),
                });
            }
            termination = Termination::Stagnated;
            break;
        };
        let new_grad = reduced_gradient(cp, &ev.f, &a)?;
        prev = Some((cur.f.clone(), grad));
        cur = ev;
        adj = a;
        grad = new_grad;
        gnorm = grad.norm_l2();
        trial_step = step;
        history.push(OuterRecord {
            iter,
            cost: cur.cost,
            stationarity_norm: gnorm,
            step,
        });
    }
    if termination == Termination::MaxOuter && converged(gnorm) {
        termination = Termination::Tolerance;
    }
    Ok(OptimizeOutcome {
        control: cur.f,
        state: cur.state,
        adjoint: adj,
        gradient: grad,
        history,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn grid3() -> Grid {
        Grid::unit_square(3).unwrap()
    }

    fn problem(beta1: f64, q0: f64, eps: f64) -> ControlProblem {
        let g = grid3();
        ControlProblem::with_smoothing(beta1, q0, Field::zeros(g), Field::zeros(g), eps).unwrap()
    }

    #[test]
    fn cost_examples() {
        let g = grid3();
        let cp = problem(0.1, 1.5, 1e-8);
        let zero = StateSolution::zeros(g);
        assert_eq!(eval_cost(&cp, &zero, &Field::zeros(g)).unwrap(), 0.0);

        let s = StateSolution::new(Field::constant(g, 1.0), Field::zeros(g)).unwrap();
        assert!((eval_cost(&cp, &s, &Field::zeros(g)).unwrap() - 0.28125).abs() < 1e-15);

        let cp0 = problem(0.1, 1.5, 0.0);
        let c = eval_cost(&cp0, &zero, &Field::constant(g, 1.0)).unwrap();
        assert!((c - 0.05625).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let g = grid3();
        let cp = problem(0.1, 1.5, 0.0);
        let f = Field::constant(g, 1.0);
        let adj = AdjointSolution {
            e1: Field::zeros(g),
            p1: Field::zeros(g),
        };
        let grad = reduced_gradient(&cp, &f, &adj).unwrap();
        assert!(grad.values().iter().all(|&v| (v - 0.3).abs() < 1e-15));

        let adj = AdjointSolution {
            e1: Field::zeros(g),
            p1: Field::constant(g, 0.3),
        };
        let grad = reduced_gradient(&cp, &f, &adj).unwrap();
        assert!(grad.values().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn control_problem_validation() {
        let g = grid3();
        let z = || Field::zeros(g);
        assert!(ControlProblem::new(0.1, 2.5, z(), z()).is_err());
        assert!(ControlProblem::new(0.1, 1.0, z(), z()).is_err());
        assert!(ControlProblem::new(0.0, 1.5, z(), z()).is_err());
        assert!(ControlProblem::with_smoothing(0.1, 1.5, z(), z(), -1.0).is_err());
        assert!(
            ControlProblem::new(0.1, 1.5, z(), Field::zeros(Grid::unit_square(2).unwrap()))
                .is_err()
        );
    }
}
