//! Uniform tensor-product discretization of Ω = [0,1]^n, n ∈ {1,2}.
//!
//! Scalar/vector unknowns live on nodes; gradients live at cell centers as
//! the gradient of the multilinear interpolant, and all integrals use the
//! midpoint rule over cells. The divergence is defined as the negative
//! adjoint of the gradient under this quadrature pairing, which makes
//! discrete integration by parts exact.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub const MAX_CORNERS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum GridError {
    BadResolution { res: usize },
    BadDimension { n: usize },
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::BadResolution { res } => write!(f, "grid needs res >= 3, got {res}"),
            GridError::BadDimension { n } => write!(f, "grid dimension must be 1 or 2, got {n}"),
        }
    }
}

impl core::error::Error for GridError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub res: usize,
}

impl Grid {
    pub fn new(n: usize, res: usize) -> Result<Self, GridError> {
        if !(1..=2).contains(&n) {
            return Err(GridError::BadDimension { n });
        }
        if res < 3 {
            return Err(GridError::BadResolution { res });
        }
        Ok(Grid { n, res })
    }

    #[inline]
    pub fn h_cell(&self) -> f64 {
        1.0 / (self.res - 1) as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.res.pow(self.n as u32)
    }

    pub fn num_cells(&self) -> usize {
        (self.res - 1).pow(self.n as u32)
    }

    /// Cell measure h^n.
    #[inline]
    pub fn cell_measure(&self) -> f64 {
        libm::pow(self.h_cell(), self.n as f64)
    }

    pub fn node_coord(&self, idx: usize, out: &mut [f64]) {
        let h = self.h_cell();
        if self.n == 1 {
            out[0] = idx as f64 * h;
        } else {
            out[0] = (idx % self.res) as f64 * h;
            out[1] = (idx / self.res) as f64 * h;
        }
    }

    pub fn cell_center(&self, idx: usize, out: &mut [f64]) {
        let h = self.h_cell();
        let m = self.res - 1;
        if self.n == 1 {
            out[0] = (idx as f64 + 0.5) * h;
        } else {
            out[0] = ((idx % m) as f64 + 0.5) * h;
            out[1] = ((idx / m) as f64 + 0.5) * h;
        }
    }

    pub fn is_boundary_node(&self, idx: usize) -> bool {
        let last = self.res - 1;
        if self.n == 1 {
            idx == 0 || idx == last
        } else {
            let (ix, iy) = (idx % self.res, idx / self.res);
            ix == 0 || ix == last || iy == 0 || iy == last
        }
    }

    /// Corner node indices of a cell and the per-axis gradient weights of the
    /// multilinear interpolant evaluated at the cell center.
    pub fn cell_corners(&self, cell: usize) -> ([usize; MAX_CORNERS], [[f64; 2]; MAX_CORNERS], usize) {
        let h = self.h_cell();
        if self.n == 1 {
            let mut ids = [0usize; MAX_CORNERS];
            let mut w = [[0.0; 2]; MAX_CORNERS];
            ids[0] = cell;
            ids[1] = cell + 1;
            w[0][0] = -1.0 / h;
            w[1][0] = 1.0 / h;
            (ids, w, 2)
        } else {
            let m = self.res - 1;
            let (cx, cy) = (cell % m, cell / m);
            let base = cy * self.res + cx;
            let ids = [base, base + 1, base + self.res, base + self.res + 1];
            let q = 1.0 / (2.0 * h);
            let w = [[-q, -q], [q, -q], [-q, q], [q, q]];
            (ids, w, 4)
        }
    }

    /// Indices of cells whose centers lie within Euclidean distance `rho`
    /// of `x0`.
    pub fn ball_cells(&self, x0: &[f64], rho: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut c = [0.0; 2];
        for cell in 0..self.num_cells() {
            self.cell_center(cell, &mut c);
            let mut d2 = 0.0;
            for k in 0..self.n {
                let d = c[k] - x0[k];
                d2 += d * d;
            }
            if libm::sqrt(d2) <= rho {
                out.push(cell);
            }
        }
        out
    }
}

/// Nodal vector field with `big_n` components per node, node-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub grid: Grid,
    pub big_n: usize,
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(grid: Grid, big_n: usize) -> Self {
        NodalField {
            grid,
            big_n,
            values: vec![0.0; grid.num_nodes() * big_n],
        }
    }

    /// Samples a closure (x, component) ↦ value at every node.
    pub fn from_fn(grid: Grid, big_n: usize, f: &dyn Fn(&[f64], usize) -> f64) -> Self {
        let mut u = NodalField::zeros(grid, big_n);
        let mut x = [0.0; 2];
        for node in 0..grid.num_nodes() {
            grid.node_coord(node, &mut x);
            for i in 0..big_n {
                u.values[node * big_n + i] = f(&x[..grid.n], i);
            }
        }
        u
    }

    #[inline]
    pub fn get(&self, node: usize, i: usize) -> f64 {
        self.values[node * self.big_n + i]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)))
    }
}

/// Per-cell gradient, layout `values[cell * n * big_n + i * n + alpha]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGradField {
    pub grid: Grid,
    pub big_n: usize,
    pub values: Vec<f64>,
}

impl CellGradField {
    pub fn zeros(grid: Grid, big_n: usize) -> Self {
        CellGradField {
            grid,
            big_n,
            values: vec![0.0; grid.num_cells() * grid.n * big_n],
        }
    }

    #[inline]
    pub fn cell(&self, cell: usize) -> &[f64] {
        let w = self.grid.n * self.big_n;
        &self.values[cell * w..(cell + 1) * w]
    }
}

/// Gradient of the multilinear interpolant at cell centers; exact on
/// multilinear nodal data.
pub fn gradient(u: &NodalField) -> CellGradField {
    let grid = u.grid;
    let n = grid.n;
    let mut out = CellGradField::zeros(grid, u.big_n);
    let w = n * u.big_n;
    for cell in 0..grid.num_cells() {
        let (ids, wts, count) = grid.cell_corners(cell);
        let slot = &mut out.values[cell * w..(cell + 1) * w];
        for k in 0..count {
            let node = ids[k];
            for i in 0..u.big_n {
                let v = u.get(node, i);
                for a in 0..n {
                    slot[i * n + a] += wts[k][a] * v;
                }
            }
        }
    }
    out
}

/// Negative adjoint of [`gradient`] under the quadrature pairing, for spatial
/// fluxes (one component per axis and cell): with node weights h^n,
/// ⟨flux, ∇φ⟩ = −⟨div flux, φ⟩ for every nodal φ vanishing on the boundary.
/// Boundary nodes are left at zero.
pub fn divergence(flux: &CellGradField) -> NodalField {
    assert_eq!(flux.big_n, 1, "divergence expects a spatial flux per cell");
    let grid = flux.grid;
    let mut out = NodalField::zeros(grid, 1);
    for cell in 0..grid.num_cells() {
        let f = flux.cell(cell);
        let (ids, wts, count) = grid.cell_corners(cell);
        for k in 0..count {
            let mut s = 0.0;
            for a in 0..grid.n {
                s += f[a] * wts[k][a];
            }
            out.values[ids[k]] -= s;
        }
    }
    for node in 0..grid.num_nodes() {
        if grid.is_boundary_node(node) {
            out.values[node] = 0.0;
        }
    }
    out
}

/// Sets boundary nodes from the datum, leaving the interior untouched.
pub fn apply_dirichlet(u: &mut NodalField, datum: &dyn Fn(&[f64], usize) -> f64) {
    let grid = u.grid;
    let mut x = [0.0; 2];
    for node in 0..grid.num_nodes() {
        if grid.is_boundary_node(node) {
            grid.node_coord(node, &mut x);
            for i in 0..u.big_n {
                u.values[node * u.big_n + i] = datum(&x[..grid.n], i);
            }
        }
    }
}

/// Midpoint quadrature Σ values·h^n over cells.
pub fn integrate(grid: &Grid, cell_values: &[f64]) -> f64 {
    debug_assert_eq!(cell_values.len(), grid.num_cells());
    cell_values.iter().sum::<f64>() * grid.cell_measure()
}
