//! Discrete state residual `F(u, p, f)`, its exact Jacobian and the
//! continuous-form adjoint operator, all on the 5-point stencil.
//!
//! Conventions shared by every routine here:
//! * `-div(a∇v)` is assembled in flux form with face coefficient
//!   `(a_k + a_nb) / 2`; a boundary neighbour contributes `a(0)`, since
//!   `u = 0` there, and `v = 0`.
//! * `-Δφ(u)` is the 5-point Laplacian of the nodal field `φ(u)` with ghost
//!   value `φ(0)`.
//! * Unknowns are stacked `(u, p)`, rows `(F₁, F₂)`, each block of size
//!   `N = nx·ny`.

use alloc::vec;
use alloc::vec::Vec;

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::grid::{Dir, Field, Grid};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Reduced oil saturation `u` and global pressure `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSolution {
    pub u: Field,
    pub p: Field,
}

impl StateSolution {
    pub fn new(u: Field, p: Field) -> Result<Self> {
        u.grid().check_same(p.grid())?;
        Ok(StateSolution { u, p })
    }

    pub fn zeros(grid: Grid) -> Self {
        StateSolution {
            u: Field::zeros(grid),
            p: Field::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.p.is_finite()
    }

    /// Whether every saturation value lies in the model's validity interval.
    pub fn within_validity(&self, m: &CoefficientModel) -> bool {
        self.u.values().iter().all(|&r| m.in_validity(r))
    }

    /// Stacked `(u, p)` vector.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.u.len());
        v.extend_from_slice(self.u.values());
        v.extend_from_slice(self.p.values());
        v
    }

    pub fn from_stacked(grid: Grid, v: &[f64]) -> Result<Self> {
        let n = grid.len();
        if v.len() != 2 * n {
            return Err(Error::invalid("stacked state has wrong length"));
        }
        Ok(StateSolution {
            u: Field::from_values(grid, v[..n].to_vec())?,
            p: Field::from_values(grid, v[n..].to_vec())?,
        })
    }
}

#[inline]
fn inv_h2(grid: &Grid, dir: Dir) -> f64 {
    if dir.is_x() {
        1.0 / (grid.hx() * grid.hx())
    } else {
        1.0 / (grid.hy() * grid.hy())
    }
}

/// `-div(a∇v)` with nodal coefficient `a` (boundary value `a_bnd`) and zero
/// boundary data for `v`. Adds into `out`.
fn add_neg_div_flux(grid: &Grid, a: &[f64], a_bnd: f64, v: &[f64], out: &mut [f64]) {
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let k = grid.index(i, j);
            let mut acc = 0.0;
            for dir in Dir::ALL {
                let c = inv_h2(grid, dir);
                let (a_nb, v_nb) = match grid.neighbor(i, j, dir) {
                    Some(nb) => (a[nb], v[nb]),
                    None => (a_bnd, 0.0),
                };
                acc += c * 0.5 * (a[k] + a_nb) * (v[k] - v_nb);
            }
            out[k] += acc;
        }
    }
}

pub(crate) fn neg_div_flux(grid: &Grid, a: &[f64], a_bnd: f64, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    add_neg_div_flux(grid, a, a_bnd, v, &mut out);
    out
}

pub(crate) fn neg_laplacian(grid: &Grid, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    add_neg_laplacian(grid, w, 0.0, &mut out);
    out
}

/// `-Δₕ w` for a nodal field `w` whose ghost value is `w_bnd`. Adds into `out`.
fn add_neg_laplacian(grid: &Grid, w: &[f64], w_bnd: f64, out: &mut [f64]) {
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let k = grid.index(i, j);
            let mut acc = 0.0;
            for dir in Dir::ALL {
                let w_nb = grid.neighbor(i, j, dir).map_or(w_bnd, |nb| w[nb]);
                acc += inv_h2(grid, dir) * (w[k] - w_nb);
            }
            out[k] += acc;
        }
    }
}

pub(crate) fn nodal(
    m: &CoefficientModel,
    u: &Field,
    f: impl Fn(&CoefficientModel, f64) -> f64,
) -> Vec<f64> {
    u.values().iter().map(|&r| f(m, r)).collect()
}

/// `-divₕ(d(u)∇ₕ·)`, symmetric positive definite when `d > 0`.
pub fn assemble_pressure_operator(m: &CoefficientModel, u: &Field) -> SparseMatrix {
    let d = nodal(m, u, CoefficientModel::d);
    flux_matrix(u.grid(), &d, m.d(0.0), 0, 0, u.len(), 1.0)
}

/// `-Δₕ` with zero boundary values.
pub fn assemble_laplacian(grid: &Grid) -> SparseMatrix {
    let ones = vec![1.0; grid.len()];
    flux_matrix(grid, &ones, 1.0, 0, 0, grid.len(), 1.0)
}

/// `sign · (-divₕ(a∇ₕ·))` placed at block offset `(row0, col0)` in a square
/// matrix of size `dim`.
fn flux_matrix(
    grid: &Grid,
    a: &[f64],
    a_bnd: f64,
    row0: usize,
    col0: usize,
    dim: usize,
    sign: f64,
) -> SparseMatrix {
    let mut b = TripletBuilder::with_capacity(dim, dim, 5 * grid.len());
    push_flux(&mut b, grid, a, a_bnd, row0, col0, sign);
    b.build().expect("stencil indices are in range")
}

fn push_flux(
    b: &mut TripletBuilder,
    grid: &Grid,
    a: &[f64],
    a_bnd: f64,
    row0: usize,
    col0: usize,
    sign: f64,
) {
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let k = grid.index(i, j);
            let mut diag = 0.0;
            for dir in Dir::ALL {
                let c = inv_h2(grid, dir);
                match grid.neighbor(i, j, dir) {
                    Some(nb) => {
                        let face = 0.5 * (a[k] + a[nb]);
                        diag += c * face;
                        b.push(row0 + k, col0 + nb, -sign * c * face);
                    }
                    None => diag += c * 0.5 * (a[k] + a_bnd),
                }
            }
            b.push(row0 + k, col0 + k, sign * diag);
        }
    }
}

/// State residual
/// `r1 = -Δₕφ(u) - divₕ(g(u)∇ₕp)`, `r2 = -divₕ(d(u)∇ₕp) - f`.
pub fn state_residual(
    m: &CoefficientModel,
    s: &StateSolution,
    f: &Field,
) -> Result<(Field, Field)> {
    residual_with_source(m, s, f, None)
}

/// As [`state_residual`], with an extra source subtracted from the
/// saturation equation. Only manufactured-solution studies use `aux`.
pub fn residual_with_source(
    m: &CoefficientModel,
    s: &StateSolution,
    f: &Field,
    aux: Option<&Field>,
) -> Result<(Field, Field)> {
    let grid = *s.grid();
    grid.check_same(f.grid())?;
    if let Some(a) = aux {
        grid.check_same(a.grid())?;
    }
    let p = s.p.values();
    let phi = nodal(m, &s.u, CoefficientModel::phi);
    let g = nodal(m, &s.u, CoefficientModel::g);
    let d = nodal(m, &s.u, CoefficientModel::d);

    let mut r1 = vec![0.0; grid.len()];
    add_neg_laplacian(&grid, &phi, m.phi(0.0), &mut r1);
    add_neg_div_flux(&grid, &g, m.g(0.0), p, &mut r1);
    if let Some(a) = aux {
        for (r, s1) in r1.iter_mut().zip(a.values()) {
            *r -= s1;
        }
    }

    let mut r2 = vec![0.0; grid.len()];
    add_neg_div_flux(&grid, &d, m.d(0.0), p, &mut r2);
    for (r, fk) in r2.iter_mut().zip(f.values()) {
        *r -= fk;
    }
    Ok((Field::from_values(grid, r1)?, Field::from_values(grid, r2)?))
}

/// Jacobian of the discrete state residual with respect to `(u, p)`.
///
/// `∂F₂/∂f = -I` is not stored; [`LinearizedOperator::apply`] adds it.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedOperator {
    pub matrix: SparseMatrix,
    /// Coefficient of the control direction `h` in the pressure rows (−1).
    pub control_coupling: f64,
    grid: Grid,
}

impl LinearizedOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `δF(u, p, f)(e, w, h)`; `h = None` means a zero control direction.
    pub fn apply(&self, e: &Field, w: &Field, h: Option<&Field>) -> Result<(Field, Field)> {
        self.grid.check_same(e.grid())?;
        self.grid.check_same(w.grid())?;
        let n = self.grid.len();
        let mut x = Vec::with_capacity(2 * n);
        x.extend_from_slice(e.values());
        x.extend_from_slice(w.values());
        let mut y = self.matrix.spmv(&x)?;
        if let Some(h) = h {
            self.grid.check_same(h.grid())?;
            for (yk, hk) in y[n..].iter_mut().zip(h.values()) {
                *yk += self.control_coupling * hk;
            }
        }
        let p_part = y.split_off(n);
        Ok((
            Field::from_values(self.grid, y)?,
            Field::from_values(self.grid, p_part)?,
        ))
    }

    /// Block `(row_block, col_block)` as its own `N×N` matrix.
    pub fn block(&self, row_block: usize, col_block: usize) -> SparseMatrix {
        extract_block(&self.matrix, self.grid.len(), row_block, col_block)
    }
}

pub(crate) fn extract_block(a: &SparseMatrix, n: usize, rb: usize, cb: usize) -> SparseMatrix {
    let mut b = TripletBuilder::new(n, n);
    for r in rb * n..(rb + 1) * n {
        for (c, v) in a.row(r) {
            if c >= cb * n && c < (cb + 1) * n {
                b.push(r - rb * n, c - cb * n, v);
            }
        }
    }
    b.build().expect("block indices are in range")
}

/// Exact derivative of [`state_residual`] at `s`.
///
/// The four continuous coupling terms appear as follows: `-Δₕ(φ′(u)e)`
/// carries both `-div(φ′∇e)` and `-div(φ″e∇u)`; `-divₕ(g∇w)` and
/// `-divₕ(d∇w)` are the frozen-coefficient flux operators; the `g′` and `d′`
/// terms differentiate the arithmetic-mean face coefficients, i.e. they are
/// flux-form `-div(a′(u)e∇p)` with face value `(a′_k e_k + a′_nb e_nb)/2`.
pub fn assemble_linearized(m: &CoefficientModel, s: &StateSolution) -> LinearizedOperator {
    let grid = *s.grid();
    let n = grid.len();
    let p = s.p.values();
    let dphi = nodal(m, &s.u, CoefficientModel::dphi);
    let g = nodal(m, &s.u, CoefficientModel::g);
    let dg = nodal(m, &s.u, CoefficientModel::dg);
    let d = nodal(m, &s.u, CoefficientModel::d);
    let dd = nodal(m, &s.u, CoefficientModel::dd);

    let mut b = TripletBuilder::with_capacity(2 * n, 2 * n, 20 * n);
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let k = grid.index(i, j);
            let mut diag_phi = 0.0;
            let mut diag_gu = 0.0;
            let mut diag_du = 0.0;
            for dir in Dir::ALL {
                let c = inv_h2(&grid, dir);
                diag_phi += c * dphi[k];
                match grid.neighbor(i, j, dir) {
                    Some(nb) => {
                        let jump = c * (p[k] - p[nb]);
                        b.push(k, nb, -c * dphi[nb]);
                        diag_gu += 0.5 * dg[k] * jump;
                        b.push(k, nb, 0.5 * dg[nb] * jump);
                        diag_du += 0.5 * dd[k] * jump;
                        b.push(n + k, nb, 0.5 * dd[nb] * jump);
                    }
                    None => {
                        let jump = c * p[k];
                        diag_gu += 0.5 * dg[k] * jump;
                        diag_du += 0.5 * dd[k] * jump;
                    }
                }
            }
            b.push(k, k, diag_phi + diag_gu);
            b.push(n + k, k, diag_du);
        }
    }
    push_flux(&mut b, &grid, &g, m.g(0.0), 0, n, 1.0);
    push_flux(&mut b, &grid, &d, m.d(0.0), n, n, 1.0);
    LinearizedOperator {
        matrix: b.build().expect("stencil indices are in range"),
        control_coupling: -1.0,
        grid,
    }
}

/// Nodal central-difference gradient with the structural zero boundary.
pub(crate) fn central_gradient(grid: &Grid, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; grid.len()];
    let mut gy = vec![0.0; grid.len()];
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let k = grid.index(i, j);
            let at = |dir| grid.neighbor(i, j, dir).map_or(0.0, |nb| v[nb]);
            gx[k] = (at(Dir::East) - at(Dir::West)) / (2.0 * grid.hx());
            gy[k] = (at(Dir::North) - at(Dir::South)) / (2.0 * grid.hy());
        }
    }
    (gx, gy)
}

/// Adds `a·∇ₕv` (central differences) into row `row0 + k` at column block `col0`.
fn push_advection(
    b: &mut TripletBuilder,
    grid: &Grid,
    ax: &[f64],
    ay: &[f64],
    row0: usize,
    col0: usize,
) {
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let k = grid.index(i, j);
            let cx = ax[k] / (2.0 * grid.hx());
            let cy = ay[k] / (2.0 * grid.hy());
            for (dir, coef) in [
                (Dir::East, cx),
                (Dir::West, -cx),
                (Dir::North, cy),
                (Dir::South, -cy),
            ] {
                if let Some(nb) = grid.neighbor(i, j, dir) {
                    b.push(row0 + k, col0 + nb, coef);
                }
            }
        }
    }
}

/// Adjoint operator in its continuous form, discretized directly, acting on
/// stacked `(e₁, p₁)`:
///
/// ```text
/// div(φ′(u)∇e₁) − d′(u)∇p·∇p₁ − φ″(u)∇u·∇e₁ − g′(u)∇p·∇e₁ = u − U
/// div(d(u)∇p₁) + div(g(u)∇e₁)                            = p − P
/// ```
///
/// Divergence terms use the flux form, first-order terms central differences.
pub fn assemble_adjoint_continuous(m: &CoefficientModel, s: &StateSolution) -> SparseMatrix {
    let grid = *s.grid();
    let n = grid.len();
    let u = s.u.values();
    let dphi = nodal(m, &s.u, CoefficientModel::dphi);
    let d2phi = nodal(m, &s.u, CoefficientModel::d2phi);
    let g = nodal(m, &s.u, CoefficientModel::g);
    let dg = nodal(m, &s.u, CoefficientModel::dg);
    let d = nodal(m, &s.u, CoefficientModel::d);
    let dd = nodal(m, &s.u, CoefficientModel::dd);
    let (ux, uy) = central_gradient(&grid, u);
    let (px, py) = central_gradient(&grid, s.p.values());

    let mut b = TripletBuilder::with_capacity(2 * n, 2 * n, 20 * n);
    push_flux(&mut b, &grid, &dphi, m.dphi(0.0), 0, 0, -1.0);
    let ex: Vec<f64> = (0..n)
        .map(|k| -(d2phi[k] * ux[k] + dg[k] * px[k]))
        .collect();
    let ey: Vec<f64> = (0..n)
        .map(|k| -(d2phi[k] * uy[k] + dg[k] * py[k]))
        .collect();
    push_advection(&mut b, &grid, &ex, &ey, 0, 0);
    let qx: Vec<f64> = (0..n).map(|k| -dd[k] * px[k]).collect();
    let qy: Vec<f64> = (0..n).map(|k| -dd[k] * py[k]).collect();
    push_advection(&mut b, &grid, &qx, &qy, 0, n);

    push_flux(&mut b, &grid, &d, m.d(0.0), n, n, -1.0);
    push_flux(&mut b, &grid, &g, m.g(0.0), n, 0, -1.0);
    b.build().expect("stencil indices are in range")
}
