//! Congested-transport post-processing for scalar solutions with the
//! identity metric: the traffic flow σ = D_ξF(Du) = h(|Du|)Du, its
//! congestion cost H(|σ|) = |σ| + |σ|^q/q (q the conjugate exponent), the
//! pointwise Fenchel–Young defect, and the interior divergence check of the
//! dual optimality system.
//!
//! The flow is defined for the unregularized integrand, so it is extracted
//! from the smallest-ε continuation solution with ε excluded from σ.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::{divergence, gradient, integrate, CellGradField, Grid};
use crate::kernel::{conjugate_h, f_integrand, h, KernelError};
use crate::metric::{MetricField, MetricKind};
use crate::solver::SolutionState;

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    VectorValued { big_n: usize },
    NonIdentityMetric,
    NotConverged,
    Kernel(KernelError),
}

impl fmt::Display for TransportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportError::VectorValued { big_n } => {
                write!(f, "traffic flow requires a scalar solution, got N = {big_n}")
            }
            TransportError::NonIdentityMetric => {
                write!(f, "traffic flow requires the identity metric")
            }
            TransportError::NotConverged => {
                write!(f, "traffic flow requires a converged solution")
            }
            TransportError::Kernel(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TransportError {}

impl From<KernelError> for TransportError {
    fn from(e: KernelError) -> Self {
        TransportError::Kernel(e)
    }
}

#[derive(Debug, Clone)]
pub struct FlowField {
    pub grid: Grid,
    pub p: f64,
    /// σ per cell, n entries each.
    pub sigma: Vec<f64>,
    /// H(|σ|) per cell.
    pub congestion_cost: Vec<f64>,
    /// F(|Du|) + H(|σ|) − σ·Du per cell; non-negative, zero at optimality.
    pub fy_residual: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct DualityReport {
    /// ∫ F(|Du|) dx.
    pub primal_energy: f64,
    /// ∫ H(|σ|) dx.
    pub dual_energy: f64,
    /// ∫ σ·Du dx; equals primal + dual at optimality.
    pub pairing: f64,
    /// max interior |div σ|.
    pub div_norm: f64,
    pub max_fy_residual: f64,
}

fn require_scalar_identity(
    sol: &SolutionState,
    m: &MetricField,
) -> Result<(), TransportError> {
    if sol.u.big_n != 1 {
        return Err(TransportError::VectorValued { big_n: sol.u.big_n });
    }
    if !matches!(m.kind, MetricKind::Identity) {
        return Err(TransportError::NonIdentityMetric);
    }
    if !sol.converged {
        return Err(TransportError::NotConverged);
    }
    Ok(())
}

/// σ = h(|Du|)Du per cell, with the pointwise congestion cost and
/// Fenchel–Young defect.
pub fn traffic_flow(
    sol: &SolutionState,
    m: &MetricField,
    p: f64,
) -> Result<FlowField, TransportError> {
    require_scalar_identity(sol, m)?;
    let grid = sol.u.grid;
    let n = grid.n;
    let du = gradient(&sol.u);
    let mut sigma = vec![0.0; grid.num_cells() * n];
    let mut congestion_cost = vec![0.0; grid.num_cells()];
    let mut fy_residual = vec![0.0; grid.num_cells()];
    for cell in 0..grid.num_cells() {
        let g = du.cell(cell);
        let t = libm::sqrt(g.iter().map(|v| v * v).sum());
        let factor = h(t, p);
        let mut s_norm2 = 0.0;
        let mut pair = 0.0;
        for a in 0..n {
            let s = factor * g[a];
            sigma[cell * n + a] = s;
            s_norm2 += s * s;
            pair += s * g[a];
        }
        let s_norm = libm::sqrt(s_norm2);
        let cost = conjugate_h(s_norm, p)?;
        congestion_cost[cell] = cost;
        fy_residual[cell] = f_integrand(t, p) + cost - pair;
    }
    Ok(FlowField {
        grid,
        p,
        sigma,
        congestion_cost,
        fy_residual,
    })
}

/// Primal/dual energies, the duality pairing, interior divergence of σ and
/// the worst Fenchel–Young defect. The dual boundary condition σ·ν = 0 is
/// not imposed by the Dirichlet primal problem, so only the interior
/// divergence is reported.
pub fn duality_report(flow: &FlowField, sol: &SolutionState) -> DualityReport {
    let grid = flow.grid;
    let n = grid.n;
    let du = gradient(&sol.u);
    let mut f_cells = vec![0.0; grid.num_cells()];
    let mut pairing_cells = vec![0.0; grid.num_cells()];
    for cell in 0..grid.num_cells() {
        let g = du.cell(cell);
        let t = libm::sqrt(g.iter().map(|v| v * v).sum());
        f_cells[cell] = f_integrand(t, flow.p);
        pairing_cells[cell] = (0..n).map(|a| flow.sigma[cell * n + a] * g[a]).sum();
    }
    let primal_energy = integrate(&grid, &f_cells);
    let dual_energy = integrate(&grid, &flow.congestion_cost);
    let pairing = integrate(&grid, &pairing_cells);

    let flux = CellGradField {
        grid,
        big_n: 1,
        values: flow.sigma.clone(),
    };
    let div = divergence(&flux);
    let div_norm = div.max_abs();
    let max_fy_residual = flow
        .fy_residual
        .iter()
        .fold(0.0f64, |m, &v| m.max(libm::fabs(v)));
    DualityReport {
        primal_energy,
        dual_energy,
        pairing,
        div_norm,
        max_fy_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use crate::solver::{solve_regularized, Datum, ProblemSpec, SolveOptions};

    fn solve(ax: f64, ay: f64, res: usize, eps: f64) -> (ProblemSpec, SolutionState) {
        let spec = ProblemSpec {
            grid: Grid::new(2, res).unwrap(),
            metric: MetricField::identity(2),
            p: 2.0,
            big_n: 1,
            datum: Datum::Linear {
                n: 2,
                grad: vec![ax, ay],
            },
            eps_schedule: vec![eps],
        };
        let sol = solve_regularized(&spec, eps, &SolveOptions::default(), None).unwrap();
        (spec, sol)
    }

    #[test]
    fn linear_flow_and_duality_identity() {
        // u = 2x₁, p = 2: σ = (1, 0), H(1) = 1.5, residual 0.5 + 1.5 − 2 = 0
        let (spec, sol) = solve(2.0, 0.0, 17, 1e-3);
        let flow = traffic_flow(&sol, &spec.metric, 2.0).unwrap();
        for cell in 0..spec.grid.num_cells() {
            assert!((flow.sigma[cell * 2] - 1.0).abs() < 1e-6);
            assert!(flow.sigma[cell * 2 + 1].abs() < 1e-6);
            assert!((flow.congestion_cost[cell] - 1.5).abs() < 1e-6);
            assert!(flow.fy_residual[cell].abs() < 1e-6);
        }
        let report = duality_report(&flow, &sol);
        assert!((report.primal_energy - 0.5).abs() < 1e-6);
        assert!((report.dual_energy - 1.5).abs() < 1e-6);
        assert!((report.pairing - 2.0).abs() < 1e-6);
        assert!(report.div_norm <= 1e-6);
    }

    #[test]
    fn subunit_solution_carries_no_flow() {
        let (spec, sol) = solve(0.7, 0.2, 9, 1e-3);
        let flow = traffic_flow(&sol, &spec.metric, 2.0).unwrap();
        assert!(flow.sigma.iter().all(|&s| s.abs() < 1e-9));
        assert!(flow.congestion_cost.iter().all(|&c| c.abs() < 1e-9));
        let report = duality_report(&flow, &sol);
        assert!(report.primal_energy.abs() < 1e-12);
        assert!(report.dual_energy.abs() < 1e-12);
        assert!(report.div_norm < 1e-9);
    }

    #[test]
    fn fenchel_young_nonnegative_for_random_fields() {
        // arbitrary (not optimal) nodal data: the defect stays non-negative
        // and vanishes exactly because sigma is built from Du itself
        let grid = Grid::new(2, 9).unwrap();
        let mut r = sampling::rng(17);
        let u = crate::grid::NodalField::from_fn(grid, 1, &|x, _| {
            3.0 * x[0] * x[1] - x[0] * x[0]
        });
        let _ = &mut r;
        let sol = SolutionState {
            u,
            eps: 1e-3,
            energy: 0.0,
            residual_norm: 0.0,
            iterations: 0,
            converged: true,
            sup_slope: 0.0,
        };
        let m = MetricField::identity(2);
        let flow = traffic_flow(&sol, &m, 2.5).unwrap();
        for &v in &flow.fy_residual {
            assert!(v >= -1e-12);
            assert!(v.abs() <= 1e-10);
        }
        // mismatched pairs violate equality but not the inequality
        let du = gradient(&sol.u);
        for cell in 0..grid.num_cells() {
            let g = du.cell(cell);
            let s: Vec<f64> = (0..2).map(|_| sampling::uniform(&mut r, -2.0, 2.0)).collect();
            let t = libm::sqrt(g.iter().map(|v| v * v).sum());
            let sn = libm::sqrt(s.iter().map(|v| v * v).sum());
            let pair: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
            let defect = f_integrand(t, 2.5) + conjugate_h(sn, 2.5).unwrap() - pair;
            assert!(defect >= -1e-12);
        }
    }

    #[test]
    fn preconditions_enforced() {
        let (spec, sol) = solve(2.0, 0.0, 9, 1e-2);
        let aniso = MetricField::constant_diagonal(2, [1.5, 0.5]).unwrap();
        assert!(matches!(
            traffic_flow(&sol, &aniso, 2.0),
            Err(TransportError::NonIdentityMetric)
        ));
        let mut unconverged = sol.clone();
        unconverged.converged = false;
        assert!(matches!(
            traffic_flow(&unconverged, &spec.metric, 2.0),
            Err(TransportError::NotConverged)
        ));
        let vector = SolutionState {
            u: crate::grid::NodalField::zeros(spec.grid, 2),
            converged: true,
            ..sol.clone()
        };
        assert!(matches!(
            traffic_flow(&vector, &spec.metric, 2.0),
            Err(TransportError::VectorValued { big_n: 2 })
        ));
    }
}
