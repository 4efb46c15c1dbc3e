//! Uniform interior-node grid on a rectangle and nodal fields.
//!
//! Only interior nodes are stored. Every field vanishes on the boundary, so
//! the homogeneous Dirichlet condition is structural rather than data.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform tensor grid on `[0, lx] × [0, ly]` with `nx × ny` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

/// Builds a grid with spacings `lx / (nx + 1)` and `ly / (ny + 1)`.
pub fn create_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(
            "grid needs at least one interior node per axis",
        ));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::invalid(
            "domain edge lengths must be positive and finite",
        ));
    }
    Ok(Grid {
        nx,
        ny,
        lx,
        ly,
        hx: lx / (nx + 1) as f64,
        hy: ly / (ny + 1) as f64,
    })
}

impl Grid {
    /// Square grid with `n × n` interior nodes on the unit square.
    pub fn unit_square(n: usize) -> Result<Grid> {
        create_grid(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of a single node.
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// Row-major index of node `(i, j)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    /// Inverse of [`Grid::index`].
    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    /// Physical coordinates of node `(i, j)`.
    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        ((i + 1) as f64 * self.hx, (j + 1) as f64 * self.hy)
    }

    /// Index of a neighbour, `None` when it lies on the boundary.
    #[inline]
    pub(crate) fn neighbor(&self, i: usize, j: usize, dir: Dir) -> Option<usize> {
        match dir {
            Dir::East if i + 1 < self.nx => Some(self.index(i + 1, j)),
            Dir::West if i > 0 => Some(self.index(i - 1, j)),
            Dir::North if j + 1 < self.ny => Some(self.index(i, j + 1)),
            Dir::South if j > 0 => Some(self.index(i, j - 1)),
            _ => None,
        }
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::invalid("fields live on different grids"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Dir {
    East,
    West,
    North,
    South,
}

impl Dir {
    pub(crate) const ALL: [Dir; 4] = [Dir::East, Dir::West, Dir::North, Dir::South];

    pub(crate) fn is_x(self) -> bool {
        matches!(self, Dir::East | Dir::West)
    }
}

/// Nodal scalar function on the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("field length does not match grid"));
        }
        Ok(Field { grid, values })
    }

    /// Samples `f(x, y)` at every interior node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let (x, y) = grid.coords(i, j);
                values.push(f(x, y));
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm, `sqrt(inner_product(self, self))`.
    pub fn norm_l2(&self) -> f64 {
        libm::sqrt(self.cell_weighted_sum(|v| v * v))
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn cell_weighted_sum(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid.cell_area() * self.values.iter().map(|&v| f(v)).sum::<f64>()
    }
}

/// `‖v‖ᵣʳ` by nodal quadrature, `Σ hx·hy·|vᵢⱼ|ʳ`.
///
/// Exact for the nodal rule; against the continuum integral of a smooth
/// function vanishing on the boundary the quadrature error is O(h²).
pub fn lp_power_norm(v: &Field, r: f64) -> Result<f64> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::invalid("lp exponent must be at least 1"));
    }
    Ok(v.cell_weighted_sum(|x| libm::pow(libm::fabs(x), r)))
}

/// Discrete L² pairing `Σ hx·hy·aᵢⱼ·bᵢⱼ`.
pub fn inner_product(a: &Field, b: &Field) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(a.grid.cell_area() * s)
}
