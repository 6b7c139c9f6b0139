//! Minimization of the regularized discrete energy
//!
//! ```text
//! E_ε(u) = Σ_cells [ (1/p)(|Du|_γ - 1)_+^p + (ε/2)|Du|²_γ ] · h^n
//! ```
//!
//! subject to Dirichlet data, and vanishing-viscosity continuation over a
//! decreasing ε-schedule. The criticality condition of E_ε is the discrete
//! regularized system: the residual assembled here is the exact gradient of
//! the energy with respect to interior nodal values, rescaled by h^n so it
//! approximates the divergence-form operator.
//!
//! Two optimizers are provided: Polak-Ribière nonlinear conjugate gradient
//! with Armijo backtracking (robust default for 1 < p < 2, where the second
//! derivative blows up at the degeneracy boundary) and an inexact Newton-CG
//! path for p ≥ 2, whose Hessian action is the bilinear form 𝓑_ε applied to
//! cell gradients.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::{apply_dirichlet, gradient, Grid, GridError, NodalField};
use crate::kernel::{f_integrand, h, h_prime};
use crate::metric::{MetricError, MetricField, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    ZeroEpsRequested,
    InvalidSchedule(&'static str),
    NotConverged { eps: f64, residual: f64 },
    Grid(GridError),
    Metric(MetricError),
    InvalidSpec(&'static str),
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::ZeroEpsRequested => {
                write!(f, "eps = 0 solves are refused; take the limit through a schedule")
            }
            SolverError::InvalidSchedule(msg) => write!(f, "invalid eps schedule: {msg}"),
            SolverError::NotConverged { eps, residual } => {
                write!(f, "solve at eps = {eps} stalled with residual {residual}")
            }
            SolverError::Grid(e) => write!(f, "{e}"),
            SolverError::Metric(e) => write!(f, "{e}"),
            SolverError::InvalidSpec(msg) => write!(f, "invalid problem spec: {msg}"),
        }
    }
}

impl core::error::Error for SolverError {}

impl From<GridError> for SolverError {
    fn from(e: GridError) -> Self {
        SolverError::Grid(e)
    }
}

impl From<MetricError> for SolverError {
    fn from(e: MetricError) -> Self {
        SolverError::Metric(e)
    }
}

/// Dirichlet boundary datum, evaluated per component.
#[derive(Debug, Clone)]
pub enum Datum {
    /// u^i(x) = Σ_α grad[i*n + α] x_α.
    Linear { n: usize, grad: Vec<f64> },
    /// u^i(x) = coef[i]·x₁·x₂ (2D).
    Bilinear { coef: Vec<f64> },
    Custom(fn(&[f64], usize) -> f64),
}

impl Datum {
    pub fn eval(&self, x: &[f64], i: usize) -> f64 {
        match self {
            Datum::Linear { n, grad } => (0..*n).map(|a| grad[i * n + a] * x[a]).sum(),
            Datum::Bilinear { coef } => coef[i] * x[0] * x[1],
            Datum::Custom(f) => f(x, i),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub metric: MetricField,
    pub p: f64,
    pub big_n: usize,
    pub datum: Datum,
    pub eps_schedule: Vec<f64>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.p > 1.0) {
            return Err(SolverError::InvalidSpec("p must exceed 1"));
        }
        if self.metric.dim_n != self.grid.n {
            return Err(SolverError::InvalidSpec("metric dimension must match the grid"));
        }
        if self.big_n == 0 {
            return Err(SolverError::InvalidSpec("codomain dimension must be positive"));
        }
        for w in self.eps_schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(SolverError::InvalidSchedule("schedule must decrease strictly"));
            }
        }
        if let Some(&e) = self.eps_schedule.first() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(SolverError::InvalidSchedule("entries must lie in (0,1]"));
            }
        }
        if let Some(&e) = self.eps_schedule.last() {
            if !(e > 0.0) {
                return Err(SolverError::InvalidSchedule("entries must be positive"));
            }
        }
        Ok(())
    }

    /// Multilinear extension of the boundary datum: the datum sampled at all
    /// nodes. Used as the default initial iterate and as the comparison field
    /// in the energy bound.
    pub fn datum_extension(&self) -> NodalField {
        let datum = &self.datum;
        NodalField::from_fn(self.grid, self.big_n, &|x, i| datum.eval(x, i))
    }

    /// Lipschitz proxy of the datum: max Euclidean gradient norm of its
    /// multilinear extension over cells. Scales the solver tolerance.
    pub fn datum_lipschitz(&self) -> f64 {
        let ext = self.datum_extension();
        let du = gradient(&ext);
        let w = self.grid.n * self.big_n;
        let mut worst = 0.0f64;
        for cell in 0..self.grid.num_cells() {
            let s = &du.values[cell * w..(cell + 1) * w];
            worst = worst.max(libm::sqrt(s.iter().map(|v| v * v).sum()));
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Newton-CG for p ≥ 2, NCG otherwise.
    Auto,
    Ncg,
    NewtonCg,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Residual tolerance is `tol * max(1, datum Lipschitz constant)`.
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 50_000,
            method: Method::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionState {
    pub u: NodalField,
    pub eps: f64,
    pub energy: f64,
    /// Max-norm of the h^n-rescaled interior energy gradient.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// max over cells of |Du|_γ; reported for the uniform-bound check.
    pub sup_slope: f64,
}

/// Per-cell cached geometry: metric matrix at each cell center.
struct CellCache {
    mats: Vec<SymMatrix>,
}

impl CellCache {
    fn build(spec: &ProblemSpec) -> Self {
        let grid = spec.grid;
        let mut mats = Vec::with_capacity(grid.num_cells());
        let mut c = [0.0; 2];
        for cell in 0..grid.num_cells() {
            grid.cell_center(cell, &mut c);
            mats.push(spec.metric.eval_unchecked(&c[..grid.n]));
        }
        CellCache { mats }
    }
}

/// Evaluates the energy and, when `grad` is given, accumulates the raw
/// gradient dE/du (including the h^n factor) with boundary rows zeroed.
fn energy_impl(
    spec: &ProblemSpec,
    cache: &CellCache,
    eps: f64,
    u_values: &[f64],
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let grid = spec.grid;
    let n = grid.n;
    let big_n = spec.big_n;
    let w = n * big_n;
    let measure = grid.cell_measure();
    let p = spec.p;

    if let Some(gout) = grad.as_deref_mut() {
        gout.fill(0.0);
    }

    let mut xi = [0.0f64; 8]; // n*big_n <= 2*4 at desk scale; grown below if needed
    let mut xi_vec;
    let xi_slice: &mut [f64] = if w <= 8 {
        &mut xi[..w]
    } else {
        xi_vec = vec![0.0; w];
        &mut xi_vec[..]
    };
    let mut gxi = vec![0.0f64; w];

    let mut total = 0.0;
    for cell in 0..grid.num_cells() {
        let (ids, wts, count) = grid.cell_corners(cell);
        xi_slice.fill(0.0);
        for k in 0..count {
            let node = ids[k];
            for i in 0..big_n {
                let v = u_values[node * big_n + i];
                for a in 0..n {
                    xi_slice[i * n + a] += wts[k][a] * v;
                }
            }
        }
        let gmat = &cache.mats[cell];
        let t = gmat.norm_grad(xi_slice);
        total += f_integrand(t, p) + 0.5 * eps * t * t;

        if let Some(gout) = grad.as_deref_mut() {
            let factor = (h(t, p) + eps) * measure;
            gmat.apply_grad(xi_slice, &mut gxi);
            for k in 0..count {
                let node = ids[k];
                for i in 0..big_n {
                    let mut s = 0.0;
                    for a in 0..n {
                        s += gxi[i * n + a] * wts[k][a];
                    }
                    gout[node * big_n + i] += factor * s;
                }
            }
        }
    }

    if let Some(gout) = grad.as_deref_mut() {
        for node in 0..grid.num_nodes() {
            if grid.is_boundary_node(node) {
                for i in 0..big_n {
                    gout[node * big_n + i] = 0.0;
                }
            }
        }
    }
    total * measure
}

/// Hessian action: (Hv) with boundary rows/columns of v treated as zero.
/// Per cell this is the bilinear form 𝓑_ε(x, Du)(Gv, ·) scattered back.
fn hessian_apply(
    spec: &ProblemSpec,
    cache: &CellCache,
    eps: f64,
    u_values: &[f64],
    v: &[f64],
    out: &mut [f64],
) {
    let grid = spec.grid;
    let n = grid.n;
    let big_n = spec.big_n;
    let w = n * big_n;
    let measure = grid.cell_measure();
    let p = spec.p;

    out.fill(0.0);
    let mut xi = vec![0.0f64; w];
    let mut gv = vec![0.0f64; w];
    let mut gxi = vec![0.0f64; w];
    let mut flux = vec![0.0f64; w];

    for cell in 0..grid.num_cells() {
        let (ids, wts, count) = grid.cell_corners(cell);
        xi.fill(0.0);
        gv.fill(0.0);
        for k in 0..count {
            let node = ids[k];
            let on_boundary = grid.is_boundary_node(node);
            for i in 0..big_n {
                let uv = u_values[node * big_n + i];
                let vv = if on_boundary { 0.0 } else { v[node * big_n + i] };
                for a in 0..n {
                    xi[i * n + a] += wts[k][a] * uv;
                    gv[i * n + a] += wts[k][a] * vv;
                }
            }
        }
        let gmat = &cache.mats[cell];
        let t = gmat.norm_grad(&xi);
        let k_base = h(t, p) + eps;
        let k_rank = if t > 1.0 { h_prime(t, p) / t } else { 0.0 };

        gmat.apply_grad(&gv, &mut flux);
        for f in &mut flux {
            *f *= k_base;
        }
        if k_rank != 0.0 {
            gmat.apply_grad(&xi, &mut gxi);
            let proj: f64 = gxi.iter().zip(&gv).map(|(a, b)| a * b).sum();
            for (f, gx) in flux.iter_mut().zip(&gxi) {
                *f += k_rank * proj * gx;
            }
        }
        for k in 0..count {
            let node = ids[k];
            if grid.is_boundary_node(node) {
                continue;
            }
            for i in 0..big_n {
                let mut s = 0.0;
                for a in 0..n {
                    s += flux[i * n + a] * wts[k][a];
                }
                out[node * big_n + i] += measure * s;
            }
        }
    }
}

/// E_ε(u) with the boundary already applied.
pub fn energy(spec: &ProblemSpec, eps: f64, u: &NodalField) -> f64 {
    let cache = CellCache::build(spec);
    energy_impl(spec, &cache, eps, &u.values, None)
}

/// Exact energy gradient w.r.t. interior nodal values, rescaled by 1/h^n so
/// that it approximates the divergence-form operator; vanishes at discrete
/// minimizers.
pub fn residual(spec: &ProblemSpec, eps: f64, u: &NodalField) -> NodalField {
    let cache = CellCache::build(spec);
    let mut out = NodalField::zeros(spec.grid, spec.big_n);
    let mut raw = vec![0.0; out.values.len()];
    energy_impl(spec, &cache, eps, &u.values, Some(&mut raw));
    let inv = 1.0 / spec.grid.cell_measure();
    for (o, r) in out.values.iter_mut().zip(&raw) {
        *o = r * inv;
    }
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_slope(spec: &ProblemSpec, cache: &CellCache, u_values: &[f64]) -> f64 {
    let grid = spec.grid;
    let (n, big_n) = (grid.n, spec.big_n);
    let w = n * big_n;
    let mut xi = vec![0.0f64; w];
    let mut worst = 0.0f64;
    for cell in 0..grid.num_cells() {
        let (ids, wts, count) = grid.cell_corners(cell);
        xi.fill(0.0);
        for k in 0..count {
            for i in 0..big_n {
                let v = u_values[ids[k] * big_n + i];
                for a in 0..n {
                    xi[i * n + a] += wts[k][a] * v;
                }
            }
        }
        worst = worst.max(cache.mats[cell].norm_grad(&xi));
    }
    worst
}

/// Armijo backtracking on φ(s) = E(u + s·d). Returns the accepted step and
/// the new energy, or None when the step underflows.
fn armijo(
    spec: &ProblemSpec,
    cache: &CellCache,
    eps: f64,
    u: &mut [f64],
    d: &[f64],
    e0: f64,
    slope: f64,
    s_init: f64,
    trial: &mut [f64],
) -> Option<(f64, f64)> {
    const C1: f64 = 1e-4;
    // slack for decreases at the level of floating-point rounding of E
    let round = 16.0 * f64::EPSILON * (1.0 + libm::fabs(e0));
    let mut s = s_init;
    for _ in 0..60 {
        for ((t, uv), dv) in trial.iter_mut().zip(u.iter()).zip(d) {
            *t = uv + s * dv;
        }
        let e = energy_impl(spec, cache, eps, trial, None);
        if e <= e0 + C1 * s * slope + round {
            u.copy_from_slice(trial);
            return Some((s, e));
        }
        s *= 0.5;
    }
    None
}

/// Diagonal of the Hessian (Jacobi preconditioner), floored away from zero
/// by the ε-metric part so the degenerate region stays invertible.
fn jacobi_diag(spec: &ProblemSpec, cache: &CellCache, eps: f64, u_values: &[f64], diag: &mut [f64]) {
    let grid = spec.grid;
    let (n, big_n) = (grid.n, spec.big_n);
    let w = n * big_n;
    let measure = grid.cell_measure();
    let p = spec.p;

    diag.fill(0.0);
    let mut xi = vec![0.0f64; w];
    let mut gxi = vec![0.0f64; w];
    for cell in 0..grid.num_cells() {
        let (ids, wts, count) = grid.cell_corners(cell);
        xi.fill(0.0);
        for k in 0..count {
            for i in 0..big_n {
                let v = u_values[ids[k] * big_n + i];
                for a in 0..n {
                    xi[i * n + a] += wts[k][a] * v;
                }
            }
        }
        let gmat = &cache.mats[cell];
        let t = gmat.norm_grad(&xi);
        let k_base = h(t, p) + eps;
        let k_rank = if t > 1.0 { h_prime(t, p) / t } else { 0.0 };
        gmat.apply_grad(&xi, &mut gxi);
        for k in 0..count {
            let node = ids[k];
            if grid.is_boundary_node(node) {
                continue;
            }
            // wᵀγw for this corner
            let mut wgw = 0.0;
            for a in 0..n {
                for b in 0..n {
                    wgw += wts[k][a] * gmat.get(a, b) * wts[k][b];
                }
            }
            for i in 0..big_n {
                let mut proj = 0.0;
                for a in 0..n {
                    proj += gxi[i * n + a] * wts[k][a];
                }
                diag[node * big_n + i] += measure * (k_base * wgw + k_rank * proj * proj);
            }
        }
    }
    let floor = eps * measure * 1e-8;
    for d in diag.iter_mut() {
        if !(*d > floor) {
            *d = 1.0;
        }
    }
}

/// Armijo backtracking followed by secant refinement toward the strong
/// Wolfe curvature condition |φ'(s)| ≤ 0.1|φ'(0)|. On success `u` is
/// advanced, `g_out` holds the gradient at the new point, and the step and
/// energy are returned.
#[allow(clippy::too_many_arguments)]
fn wolfe_search(
    spec: &ProblemSpec,
    cache: &CellCache,
    eps: f64,
    u: &mut [f64],
    d: &[f64],
    e0: f64,
    slope: f64,
    s_init: f64,
    trial: &mut [f64],
    g_out: &mut [f64],
) -> Option<(f64, f64)> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.1;
    let round = 16.0 * f64::EPSILON * (1.0 + libm::fabs(e0));
    let eval_at = |s: f64, trial: &mut [f64], g: Option<&mut [f64]>, u: &[f64]| -> f64 {
        for ((t, uv), dv) in trial.iter_mut().zip(u.iter()).zip(d) {
            *t = uv + s * dv;
        }
        energy_impl(spec, cache, eps, trial, g)
    };

    // phase 1: backtrack to an Armijo-acceptable step
    let mut s = s_init;
    let mut e = f64::INFINITY;
    let mut found = false;
    for _ in 0..60 {
        e = eval_at(s, trial, None, u);
        if e <= e0 + C1 * s * slope + round {
            found = true;
            break;
        }
        s *= 0.5;
    }
    if !found {
        return None;
    }

    // phase 2: secant refinement on φ'(s); keeps Armijo while tightening
    // curvature. Each probe reuses the gradient the caller needs anyway.
    let mut ds = {
        eval_at(s, trial, Some(g_out), u);
        dot(g_out, d)
    };
    let mut lo = 0.0f64;
    let mut dlo = slope;
    for _ in 0..4 {
        if libm::fabs(ds) <= C2 * libm::fabs(slope) {
            break;
        }
        let denom = ds - dlo;
        if !(libm::fabs(denom) > 0.0) {
            break;
        }
        let mut s_new = s - ds * (s - lo) / denom;
        if !(s_new.is_finite()) || s_new <= 0.0 {
            break;
        }
        s_new = s_new.clamp(0.1 * s.min(lo.max(1e-12)), 4.0 * s);
        if libm::fabs(s_new - s) <= 1e-12 * s {
            break;
        }
        let e_new = eval_at(s_new, trial, None, u);
        if e_new > e0 + C1 * s_new * slope + round {
            break;
        }
        if ds > 0.0 || s_new < s {
            // stepping back toward the bracket start
        } else {
            lo = s;
            dlo = ds;
        }
        s = s_new;
        e = e_new;
        ds = {
            eval_at(s, trial, Some(g_out), u);
            dot(g_out, d)
        };
    }
    // final state: advance u and make sure g_out matches it
    eval_at(s, trial, Some(g_out), u);
    u.copy_from_slice(trial);
    Some((s, e))
}

fn solve_ncg(
    spec: &ProblemSpec,
    cache: &CellCache,
    eps: f64,
    u: &mut Vec<f64>,
    tol_raw: f64,
    max_iter: usize,
) -> (usize, f64, bool) {
    let len = u.len();
    let mut g = vec![0.0; len];
    let mut g_prev = vec![0.0; len];
    let mut g_new = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut z_prev = vec![0.0; len];
    let mut d = vec![0.0; len];
    let mut diag = vec![1.0; len];
    let mut trial = vec![0.0; len];

    let mut e = energy_impl(spec, cache, eps, u, Some(&mut g));
    let mut s_prev = 1.0f64;
    let mut iter = 0;
    let restart_every = len.max(20);
    let mut since_restart = 0usize;
    let mut stalls = 0usize;

    while iter < max_iter {
        let gnorm = max_abs(&g);
        if gnorm <= tol_raw {
            return (iter, gnorm, true);
        }
        if since_restart == 0 {
            jacobi_diag(spec, cache, eps, u, &mut diag);
        }
        for k in 0..len {
            z[k] = g[k] / diag[k];
        }
        let beta = if since_restart == 0 {
            0.0
        } else {
            // preconditioned Polak-Ribière+, clipped at zero
            let num: f64 = z.iter().zip(&g).zip(&g_prev).map(|((zi, gi), gp)| zi * (gi - gp)).sum();
            let den = dot(&z_prev, &g_prev);
            (num / den).max(0.0)
        };
        for k in 0..len {
            d[k] = -z[k] + beta * d[k];
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            for k in 0..len {
                d[k] = -z[k];
            }
            slope = -dot(&g, &z);
            since_restart = 0;
        }
        let s_init = (2.0f64 * s_prev).clamp(1e-12, 1e3);
        match wolfe_search(
            spec, cache, eps, u, &d, e, slope, s_init, &mut trial, &mut g_new,
        ) {
            Some((s, e_new)) => {
                s_prev = s;
                e = e_new;
                stalls = 0;
            }
            None => {
                // line search underflow: restart steepest descent once, then stop
                stalls += 1;
                if stalls > 1 {
                    let gnorm = max_abs(&g);
                    return (iter, gnorm, gnorm <= tol_raw);
                }
                since_restart = 0;
                s_prev = 1.0;
                iter += 1;
                continue;
            }
        }
        g_prev.copy_from_slice(&g);
        z_prev.copy_from_slice(&z);
        g.copy_from_slice(&g_new);
        iter += 1;
        since_restart += 1;
        if since_restart >= restart_every {
            since_restart = 0;
        }
    }
    (iter, max_abs(&g), max_abs(&g) <= tol_raw)
}

fn solve_newton_cg(
    spec: &ProblemSpec,
    cache: &CellCache,
    eps: f64,
    u: &mut Vec<f64>,
    tol_raw: f64,
    max_iter: usize,
) -> (usize, f64, bool) {
    let len = u.len();
    let mut g = vec![0.0; len];
    let mut d = vec![0.0; len];
    let mut r = vec![0.0; len];
    let mut pbuf = vec![0.0; len];
    let mut hp = vec![0.0; len];
    let mut trial = vec![0.0; len];

    let mut e = energy_impl(spec, cache, eps, u, Some(&mut g));
    let mut iter = 0;

    while iter < max_iter {
        let gnorm = max_abs(&g);
        if gnorm <= tol_raw {
            return (iter, gnorm, true);
        }
        // inexact Newton: CG on H d = -g, forcing term 0.1·min(1, √(‖g‖/tol))
        d.fill(0.0);
        for k in 0..len {
            r[k] = -g[k];
        }
        pbuf.copy_from_slice(&r);
        let g2 = dot(&r, &r);
        let force = 0.1 * libm::sqrt((gnorm / tol_raw).min(1e4)).min(1.0).max(1e-3);
        let cg_tol2 = (force * force * g2).max(1e-300);
        let mut r2 = g2;
        let cg_max = 400.min(len.max(1));
        for _ in 0..cg_max {
            if r2 <= cg_tol2 {
                break;
            }
            hessian_apply(spec, cache, eps, u, &pbuf, &mut hp);
            let php = dot(&pbuf, &hp);
            if php <= 0.0 {
                break; // non-positive curvature: keep current d (or fall back below)
            }
            let alpha = r2 / php;
            for k in 0..len {
                d[k] += alpha * pbuf[k];
                r[k] -= alpha * hp[k];
            }
            let r2_new = dot(&r, &r);
            let beta = r2_new / r2;
            r2 = r2_new;
            for k in 0..len {
                pbuf[k] = r[k] + beta * pbuf[k];
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            for k in 0..len {
                d[k] = -g[k];
            }
            slope = -dot(&g, &g);
        }
        match armijo(spec, cache, eps, u, &d, e, slope, 1.0, &mut trial) {
            Some(_) => {}
            None => {
                let gnorm = max_abs(&g);
                return (iter, gnorm, gnorm <= tol_raw);
            }
        }
        e = energy_impl(spec, cache, eps, u, Some(&mut g));
        iter += 1;
    }
    (iter, max_abs(&g), max_abs(&g) <= tol_raw)
}

/// Solves the ε-regularized Dirichlet problem. `warm_start`, when given,
/// must conform to the grid; its boundary values are overwritten by the
/// datum. With `warm_start = None` the iteration starts from the datum's
/// multilinear extension.
pub fn solve_regularized(
    spec: &ProblemSpec,
    eps: f64,
    opts: &SolveOptions,
    warm_start: Option<&NodalField>,
) -> Result<SolutionState, SolverError> {
    spec.validate()?;
    if !(eps > 0.0) {
        return Err(SolverError::ZeroEpsRequested);
    }
    let cache = CellCache::build(spec);
    let mut u = match warm_start {
        Some(f) => {
            if f.grid != spec.grid || f.big_n != spec.big_n {
                return Err(SolverError::InvalidSpec("warm start does not conform to the grid"));
            }
            f.clone()
        }
        None => spec.datum_extension(),
    };
    let datum = &spec.datum;
    apply_dirichlet(&mut u, &|x, i| datum.eval(x, i));

    let scale = spec.datum_lipschitz().max(1.0);
    let tol = opts.tol * scale;
    // the optimizers work on the raw gradient, which carries the h^n factor
    let tol_raw = tol * spec.grid.cell_measure();

    let use_newton = match opts.method {
        Method::Auto => spec.p >= 2.0,
        Method::Ncg => false,
        Method::NewtonCg => true,
    };
    let (iterations, res_raw, converged) = if use_newton {
        solve_newton_cg(spec, &cache, eps, &mut u.values, tol_raw, opts.max_iter)
    } else {
        solve_ncg(spec, &cache, eps, &mut u.values, tol_raw, opts.max_iter)
    };

    let energy = energy_impl(spec, &cache, eps, &u.values, None);
    Ok(SolutionState {
        sup_slope: sup_slope(spec, &cache, &u.values),
        u,
        eps,
        energy,
        residual_norm: res_raw / spec.grid.cell_measure(),
        iterations,
        converged,
    })
}

/// Solves the whole schedule with warm starts; errors on the first ε whose
/// solve fails to converge.
pub fn eps_continuation(
    spec: &ProblemSpec,
    opts: &SolveOptions,
) -> Result<Vec<SolutionState>, SolverError> {
    spec.validate()?;
    let mut states: Vec<SolutionState> = Vec::new();
    for &eps in &spec.eps_schedule {
        let warm = states.last().map(|s| &s.u);
        let state = solve_regularized(spec, eps, opts, warm)?;
        if !state.converged {
            return Err(SolverError::NotConverged {
                eps,
                residual: state.residual_norm,
            });
        }
        states.push(state);
    }
    Ok(states)
}

/// Closed-form 1D oracle: with constant boundary slope `a` the flux
/// h_ε(t)·t is constant, and it is strictly monotone in t whenever ε > 0,
/// so the minimizer has constant slope a. At ε = 0 with |a| ≤ 1 every
/// monotone 1-Lipschitz profile has zero energy and the minimizer is not
/// unique.
pub fn solve_1d_oracle(p: f64, eps: f64, a: f64) -> (f64, bool) {
    let _ = p;
    let unique = eps > 0.0 || libm::fabs(a) > 1.0;
    (a, unique)
}
