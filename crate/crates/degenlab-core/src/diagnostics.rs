//! Measurable quantities of the regularity analysis: the truncated-gradient
//! field 𝓖_δ(x, Du_ε), the scalar U_ε, ball excesses Φ and Ψ_δ, the
//! super-level-set regime dichotomy, empirical Hölder seminorms, the
//! vanishing-viscosity convergence rate, and composition with a continuous
//! closure 𝓚 vanishing on the degenerate set.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::{gradient, Grid};
use crate::kernel::truncate_slice;
use crate::metric::{MetricError, MetricField};
use crate::sampling;
use crate::solver::SolutionState;

#[derive(Debug, Clone, PartialEq)]
pub enum DiagnosticsError {
    NotConverged,
    EmptyBall,
    NotEnoughStates,
    VanishingCheckFailed { value: f64 },
    Metric(MetricError),
}

impl fmt::Display for DiagnosticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticsError::NotConverged => {
                write!(f, "diagnostics require a converged solution")
            }
            DiagnosticsError::EmptyBall => write!(f, "ball contains no cell centers"),
            DiagnosticsError::NotEnoughStates => {
                write!(f, "rate fit needs at least three continuation states")
            }
            DiagnosticsError::VanishingCheckFailed { value } => {
                write!(f, "closure fails to vanish on the degenerate set (got {value})")
            }
            DiagnosticsError::Metric(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DiagnosticsError {}

impl From<MetricError> for DiagnosticsError {
    fn from(e: MetricError) -> Self {
        DiagnosticsError::Metric(e)
    }
}

/// Per-cell 𝓖_δ(x, Du_ε(x)) together with its γ-norms (|Du_ε|_γ − 1 − δ)_+.
#[derive(Debug, Clone)]
pub struct TruncatedGradientField {
    pub grid: Grid,
    pub big_n: usize,
    pub delta: f64,
    /// Cell-major, n·N entries per cell.
    pub values: Vec<f64>,
    /// |𝓖_δ|_{γ(x)} per cell.
    pub norms: Vec<f64>,
}

impl TruncatedGradientField {
    pub fn cell(&self, cell: usize) -> &[f64] {
        let w = self.grid.n * self.big_n;
        &self.values[cell * w..(cell + 1) * w]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Degenerate,
    Nondegenerate,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Degenerate => "degenerate",
            Regime::Nondegenerate => "nondegenerate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExcessReport {
    pub x0: Vec<f64>,
    pub rho: f64,
    /// Gradient excess ⨏_B |Du_ε − (Du_ε)_B|².
    pub phi: f64,
    /// Truncated-gradient excess ⨏_B |𝓖_δ − (𝓖_δ)_B|².
    pub psi_delta: f64,
    /// Degeneracy scale: max over the ball of (|Du_ε|_γ − 1 − δ)_+.
    pub mu: f64,
    /// |E^ν_ρ| / |B_ρ| by cell counts, where E^ν_ρ is the super-level set
    /// { |Du_ε|_γ − 1 − δ > (1−ν)μ }.
    pub superlevel_fraction: f64,
    pub regime: Regime,
    pub cells: usize,
}

fn cell_gradient_data(
    sol: &SolutionState,
    m: &MetricField,
) -> Result<(Vec<f64>, Vec<f64>), DiagnosticsError> {
    let grid = sol.u.grid;
    let du = gradient(&sol.u);
    let mut norms = vec![0.0; grid.num_cells()];
    let mut c = [0.0; 2];
    for cell in 0..grid.num_cells() {
        grid.cell_center(cell, &mut c);
        let gmat = m.eval(&c[..grid.n])?;
        norms[cell] = gmat.norm_grad(du.cell(cell));
    }
    Ok((du.values, norms))
}

/// 𝓖_δ applied cell-by-cell to the solution gradient.
pub fn g_delta_field(
    sol: &SolutionState,
    m: &MetricField,
    delta: f64,
) -> Result<TruncatedGradientField, DiagnosticsError> {
    if !sol.converged {
        return Err(DiagnosticsError::NotConverged);
    }
    let grid = sol.u.grid;
    let w = grid.n * sol.u.big_n;
    let (du_values, t_norms) = cell_gradient_data(sol, m)?;
    let mut values = vec![0.0; du_values.len()];
    let mut norms = vec![0.0; grid.num_cells()];
    for cell in 0..grid.num_cells() {
        let xi = &du_values[cell * w..(cell + 1) * w];
        norms[cell] = truncate_slice(t_norms[cell], delta, xi, &mut values[cell * w..(cell + 1) * w]);
    }
    Ok(TruncatedGradientField {
        grid,
        big_n: sol.u.big_n,
        delta,
        values,
        norms,
    })
}

/// U_ε = (|Du_ε|_γ − 1 − δ)²_+ per cell, computed directly from the norm
/// (independently of `g_delta_field`, whose norms-squared it must match).
pub fn u_eps_field(
    sol: &SolutionState,
    m: &MetricField,
    delta: f64,
) -> Result<Vec<f64>, DiagnosticsError> {
    if !sol.converged {
        return Err(DiagnosticsError::NotConverged);
    }
    let (_, t_norms) = cell_gradient_data(sol, m)?;
    Ok(t_norms
        .iter()
        .map(|&t| {
            let e = (t - 1.0 - delta).max(0.0);
            e * e
        })
        .collect())
}

/// Ball excesses, degeneracy scale and the super-level-set regime dichotomy.
pub fn excess(
    sol: &SolutionState,
    m: &MetricField,
    x0: &[f64],
    rho: f64,
    delta: f64,
    nu: f64,
) -> Result<ExcessReport, DiagnosticsError> {
    if !sol.converged {
        return Err(DiagnosticsError::NotConverged);
    }
    let grid = sol.u.grid;
    let cells = grid.ball_cells(x0, rho);
    if cells.is_empty() {
        return Err(DiagnosticsError::EmptyBall);
    }
    let w = grid.n * sol.u.big_n;
    let (du_values, t_norms) = cell_gradient_data(sol, m)?;
    let gfield = g_delta_field(sol, m, delta)?;

    let count = cells.len() as f64;
    let mut du_mean = vec![0.0; w];
    let mut g_mean = vec![0.0; w];
    for &cell in &cells {
        for k in 0..w {
            du_mean[k] += du_values[cell * w + k] / count;
            g_mean[k] += gfield.values[cell * w + k] / count;
        }
    }
    let mut phi = 0.0;
    let mut psi = 0.0;
    let mut mu = 0.0f64;
    for &cell in &cells {
        for k in 0..w {
            let d = du_values[cell * w + k] - du_mean[k];
            phi += d * d / count;
            let e = gfield.values[cell * w + k] - g_mean[k];
            psi += e * e / count;
        }
        mu = mu.max((t_norms[cell] - 1.0 - delta).max(0.0));
    }
    let threshold = (1.0 - nu) * mu;
    let super_count = cells
        .iter()
        .filter(|&&cell| t_norms[cell] - 1.0 - delta > threshold)
        .count();
    let superlevel_fraction = super_count as f64 / count;
    let regime = if 1.0 - superlevel_fraction < nu {
        Regime::Nondegenerate
    } else {
        Regime::Degenerate
    };
    Ok(ExcessReport {
        x0: x0.to_vec(),
        rho,
        phi,
        psi_delta: psi,
        mu,
        superlevel_fraction,
        regime,
        cells: cells.len(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct HolderRow {
    pub alpha: f64,
    pub seminorm: f64,
    pub pairs: usize,
}

/// Empirical Hölder seminorm table: for each α, the sup over cell-center
/// pairs within `max_pair_dist` of |field(x) − field(y)| / |x − y|^α.
pub fn holder_estimate(
    field: &TruncatedGradientField,
    exponent_grid: &[f64],
    max_pair_dist: f64,
) -> Vec<HolderRow> {
    let grid = field.grid;
    let w = grid.n * field.big_n;
    let ncells = grid.num_cells();
    let mut centers = vec![0.0; ncells * grid.n];
    let mut c = [0.0; 2];
    for cell in 0..ncells {
        grid.cell_center(cell, &mut c);
        centers[cell * grid.n..(cell + 1) * grid.n].copy_from_slice(&c[..grid.n]);
    }
    let mut rows: Vec<HolderRow> = exponent_grid
        .iter()
        .map(|&alpha| HolderRow {
            alpha,
            seminorm: 0.0,
            pairs: 0,
        })
        .collect();
    for a in 0..ncells {
        for b in (a + 1)..ncells {
            let mut dist2 = 0.0;
            for k in 0..grid.n {
                let d = centers[a * grid.n + k] - centers[b * grid.n + k];
                dist2 += d * d;
            }
            let dist = libm::sqrt(dist2);
            if dist > max_pair_dist || dist == 0.0 {
                continue;
            }
            let mut diff2 = 0.0;
            for k in 0..w {
                let d = field.values[a * w + k] - field.values[b * w + k];
                diff2 += d * d;
            }
            let diff = libm::sqrt(diff2);
            for row in rows.iter_mut() {
                let q = diff / libm::pow(dist, row.alpha);
                if q > row.seminorm {
                    row.seminorm = q;
                }
                row.pairs += 1;
            }
        }
    }
    rows
}

/// The largest exponent whose seminorm drifts by less than `rel_tol`
/// between two resolutions. Rows must share the exponent grid.
pub fn largest_stable_alpha(
    coarse: &[HolderRow],
    fine: &[HolderRow],
    rel_tol: f64,
) -> Option<f64> {
    let mut best = None;
    for (c, f) in coarse.iter().zip(fine) {
        let scale = c.seminorm.max(f.seminorm);
        if scale == 0.0 || libm::fabs(f.seminorm - c.seminorm) <= rel_tol * scale {
            best = Some(match best {
                Some(b) if b > c.alpha => b,
                _ => c.alpha,
            });
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct RateReport {
    /// Least-squares slope of log ∫|Δ𝓖_δ|^p_γ versus log ε.
    pub slope: f64,
    /// (ε, ∫|𝓖_δ(Du_ε) − 𝓖_δ(Du_ref)|^p_γ dx) per continuation state.
    pub errors: Vec<(f64, f64)>,
    /// All errors below 1e-14: the discrete solutions coincide and no rate
    /// can be fitted.
    pub exact_match: bool,
}

/// Ordinary least-squares slope of y against x.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let nf = xs.len() as f64;
    let mx: f64 = xs.iter().sum::<f64>() / nf;
    let my: f64 = ys.iter().sum::<f64>() / nf;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Vanishing-viscosity rate: compares each continuation state against the
/// reference (by design the smallest-ε solution on the same grid, excluded
/// from the fit) in the γ-weighted L^p integral of the 𝓖_δ defect.
pub fn convergence_rate(
    states: &[SolutionState],
    reference: &SolutionState,
    m: &MetricField,
    delta: f64,
    p: f64,
) -> Result<RateReport, DiagnosticsError> {
    if states.len() < 3 {
        return Err(DiagnosticsError::NotEnoughStates);
    }
    let grid = reference.u.grid;
    let w = grid.n * reference.u.big_n;
    let g_ref = g_delta_field(reference, m, delta)?;
    let measure = grid.cell_measure();
    let mut errors = Vec::with_capacity(states.len());
    let mut c = [0.0; 2];
    for s in states {
        let g_s = g_delta_field(s, m, delta)?;
        let mut err = 0.0;
        for cell in 0..grid.num_cells() {
            grid.cell_center(cell, &mut c);
            let gmat = m.eval(&c[..grid.n])?;
            let d: Vec<f64> = (0..w)
                .map(|k| g_s.values[cell * w + k] - g_ref.values[cell * w + k])
                .collect();
            err += libm::pow(gmat.norm_grad(&d), p) * measure;
        }
        errors.push((s.eps, err));
    }
    let exact_match = errors.iter().all(|&(_, e)| e <= 1e-14);
    let slope = if exact_match {
        0.0
    } else {
        let xs: Vec<f64> = errors.iter().map(|&(e, _)| libm::log(e)).collect();
        let ys: Vec<f64> = errors.iter().map(|&(_, v)| libm::log(v.max(1e-300))).collect();
        fit_slope(&xs, &ys)
    };
    Ok(RateReport {
        slope,
        errors,
        exact_match,
    })
}

/// Composition with a continuous closure k(x, ξ) that must vanish on the
/// degenerate set {|ξ|_{γ(x)} ≤ 1}; the vanishing hypothesis is spot-checked
/// by sampling before the field is built. Returns the per-cell field and the
/// discrete modulus-of-continuity table ω(r), non-decreasing in r.
pub fn k_compose(
    sol: &SolutionState,
    m: &MetricField,
    k: &dyn Fn(&[f64], &[f64]) -> f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<(f64, f64)>), DiagnosticsError> {
    if !sol.converged {
        return Err(DiagnosticsError::NotConverged);
    }
    let grid = sol.u.grid;
    let n = grid.n;
    let big_n = sol.u.big_n;
    let w = n * big_n;

    // spot-check: k must vanish where |ξ|_γ ≤ 1
    let mut r = sampling::rng(seed);
    for _ in 0..200 {
        let x = sampling::point_in_unit_cube(&mut r, n);
        let gmat = m.eval(&x)?;
        let target = sampling::uniform(&mut r, 0.0, 1.0);
        let mut xi: Vec<f64> = (0..w).map(|_| sampling::normal(&mut r)).collect();
        let t0 = gmat.norm_grad(&xi);
        if t0 > 0.0 {
            for v in &mut xi {
                *v *= target / t0;
            }
        } else {
            xi.fill(0.0);
        }
        let val = k(&x, &xi);
        if libm::fabs(val) > 1e-12 {
            return Err(DiagnosticsError::VanishingCheckFailed { value: val });
        }
    }

    let du = gradient(&sol.u);
    let mut field = vec![0.0; grid.num_cells()];
    let mut centers = vec![0.0; grid.num_cells() * n];
    let mut c = [0.0; 2];
    for cell in 0..grid.num_cells() {
        grid.cell_center(cell, &mut c);
        centers[cell * n..(cell + 1) * n].copy_from_slice(&c[..n]);
        field[cell] = k(&c[..n], du.cell(cell));
    }

    // modulus table at dyadic multiples of the cell size
    let h = grid.h_cell();
    let diam = libm::sqrt(n as f64);
    let mut radii = Vec::new();
    let mut rr = h;
    while rr < diam {
        radii.push(rr);
        rr *= 2.0;
    }
    radii.push(diam);
    let mut omega = vec![0.0f64; radii.len()];
    for a in 0..grid.num_cells() {
        for b in (a + 1)..grid.num_cells() {
            let mut dist2 = 0.0;
            for kdim in 0..n {
                let d = centers[a * n + kdim] - centers[b * n + kdim];
                dist2 += d * d;
            }
            let dist = libm::sqrt(dist2);
            let diff = libm::fabs(field[a] - field[b]);
            for (ri, &rad) in radii.iter().enumerate() {
                if dist <= rad && diff > omega[ri] {
                    omega[ri] = diff;
                }
            }
        }
    }
    // enforce monotonicity against floating-point radius boundaries
    for i in 1..omega.len() {
        if omega[i] < omega[i - 1] {
            omega[i] = omega[i - 1];
        }
    }
    Ok((field, radii.into_iter().zip(omega).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_regularized, Datum, ProblemSpec, SolveOptions};

    fn solved_linear(ax: f64, ay: f64, res: usize) -> (ProblemSpec, SolutionState) {
        let spec = ProblemSpec {
            grid: Grid::new(2, res).unwrap(),
            metric: MetricField::identity(2),
            p: 2.0,
            big_n: 1,
            datum: Datum::Linear {
                n: 2,
                grad: vec![ax, ay],
            },
            eps_schedule: vec![0.1],
        };
        let sol = solve_regularized(&spec, 0.1, &SolveOptions::default(), None).unwrap();
        (spec, sol)
    }

    #[test]
    fn g_delta_linear_field() {
        let (spec, sol) = solved_linear(2.0, 0.0, 9);
        let f = g_delta_field(&sol, &spec.metric, 0.0).unwrap();
        for cell in 0..spec.grid.num_cells() {
            let v = f.cell(cell);
            assert!((v[0] - 1.0).abs() < 1e-7 && v[1].abs() < 1e-7);
            assert!((f.norms[cell] - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn g_delta_zero_on_subunit_and_full_truncation() {
        let (spec, sol) = solved_linear(0.8, 0.0, 9);
        let f = g_delta_field(&sol, &spec.metric, 0.0).unwrap();
        assert!(f.values.iter().all(|&v| v.abs() < 1e-9));
        // delta beyond sup slope - 1 truncates everything
        let (spec2, sol2) = solved_linear(1.5, 0.0, 9);
        let f2 = g_delta_field(&sol2, &spec2.metric, 0.9).unwrap();
        assert!(f2.values.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn u_eps_matches_norm_squared() {
        let (spec, sol) = solved_linear(2.0, 1.0, 9);
        for delta in [0.0, 0.3, 0.8] {
            let f = g_delta_field(&sol, &spec.metric, delta).unwrap();
            let u = u_eps_field(&sol, &spec.metric, delta).unwrap();
            for cell in 0..spec.grid.num_cells() {
                assert!((u[cell] - f.norms[cell] * f.norms[cell]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn u_eps_trivial_value() {
        let (spec, sol) = solved_linear(2.0, 0.0, 9);
        let u = u_eps_field(&sol, &spec.metric, 0.5).unwrap();
        for v in &u {
            assert!((v - 0.25).abs() < 1e-7);
        }
    }

    #[test]
    fn excess_zero_for_constant_gradient() {
        let (spec, sol) = solved_linear(2.0, 0.0, 17);
        let rep = excess(&sol, &spec.metric, &[0.5, 0.5], 0.3, 0.0, 0.25).unwrap();
        assert!(rep.phi < 1e-14 && rep.psi_delta < 1e-14);
        assert!((rep.mu - 1.0).abs() < 1e-7);
        // constant norm 1+δ+μ: every cell is in the super-level set
        assert!((rep.superlevel_fraction - 1.0).abs() < 1e-14);
        assert_eq!(rep.regime, Regime::Nondegenerate);
    }

    #[test]
    fn excess_degenerate_on_subunit() {
        let (spec, sol) = solved_linear(0.5, 0.0, 17);
        let rep = excess(&sol, &spec.metric, &[0.5, 0.5], 0.3, 0.0, 0.25).unwrap();
        assert_eq!(rep.mu, 0.0);
        assert_eq!(rep.superlevel_fraction, 0.0);
        assert_eq!(rep.regime, Regime::Degenerate);
    }

    #[test]
    fn excess_empty_ball_rejected() {
        let (spec, sol) = solved_linear(2.0, 0.0, 9);
        assert!(matches!(
            excess(&sol, &spec.metric, &[0.5, 0.5], 1e-6, 0.0, 0.25),
            Err(DiagnosticsError::EmptyBall)
        ));
    }

    #[test]
    fn psi_mean_minimality() {
        // replacing the ball mean by any other constant never decreases the
        // excess
        let spec = ProblemSpec {
            grid: Grid::new(2, 17).unwrap(),
            metric: MetricField::identity(2),
            p: 2.0,
            big_n: 1,
            datum: Datum::Bilinear { coef: vec![2.0] },
            eps_schedule: vec![0.1],
        };
        let sol = solve_regularized(&spec, 0.1, &SolveOptions::default(), None).unwrap();
        let rep = excess(&sol, &spec.metric, &[0.5, 0.5], 0.3, 0.1, 0.25).unwrap();
        let f = g_delta_field(&sol, &spec.metric, 0.1).unwrap();
        let cells = spec.grid.ball_cells(&[0.5, 0.5], 0.3);
        let w = 2;
        let count = cells.len() as f64;
        let mut r = sampling::rng(3);
        for _ in 0..20 {
            let shift: Vec<f64> = (0..w).map(|_| sampling::uniform(&mut r, -1.0, 1.0)).collect();
            let mut alt = 0.0;
            let mut mean = vec![0.0; w];
            for &cell in &cells {
                for k in 0..w {
                    mean[k] += f.values[cell * w + k] / count;
                }
            }
            for &cell in &cells {
                for k in 0..w {
                    let d = f.values[cell * w + k] - (mean[k] + shift[k]);
                    alt += d * d / count;
                }
            }
            assert!(alt + 1e-14 >= rep.psi_delta);
        }
    }

    #[test]
    fn holder_constant_and_linear_fields() {
        let grid = Grid::new(2, 9).unwrap();
        let w = 2;
        let mut constant = TruncatedGradientField {
            grid,
            big_n: 1,
            delta: 0.0,
            values: vec![0.7; grid.num_cells() * w],
            norms: vec![0.7; grid.num_cells()],
        };
        let rows = holder_estimate(&constant, &[0.5, 1.0], 0.5);
        assert!(rows.iter().all(|r| r.seminorm == 0.0));
        // field(x) = x₁·e: Lipschitz seminorm 1
        let mut c = [0.0; 2];
        for cell in 0..grid.num_cells() {
            grid.cell_center(cell, &mut c);
            constant.values[cell * w] = c[0];
            constant.values[cell * w + 1] = 0.0;
        }
        let rows = holder_estimate(&constant, &[1.0], 2.0);
        assert!((rows[0].seminorm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holder_sqrt_field_stability() {
        // field(x) = √x₁ · e is Hölder-1/2 but not Lipschitz near 0: the
        // α = 0.5 seminorm is stable under refinement, α = 1 diverges
        let build = |res: usize| {
            let grid = Grid::new(2, res).unwrap();
            let w = 2;
            let mut values = vec![0.0; grid.num_cells() * w];
            let mut c = [0.0; 2];
            for cell in 0..grid.num_cells() {
                grid.cell_center(cell, &mut c);
                values[cell * w] = libm::sqrt(c[0]);
            }
            TruncatedGradientField {
                grid,
                big_n: 1,
                delta: 0.0,
                values,
                norms: vec![0.0; grid.num_cells()],
            }
        };
        let coarse = holder_estimate(&build(17), &[0.5, 1.0], 2.0);
        let fine = holder_estimate(&build(33), &[0.5, 1.0], 2.0);
        let alpha = largest_stable_alpha(&coarse, &fine, 0.25).unwrap();
        assert!((alpha - 0.5).abs() < 1e-12);
        // the Lipschitz seminorm must have grown substantially
        assert!(fine[1].seminorm > 1.3 * coarse[1].seminorm);
    }

    #[test]
    fn rate_fit_recovers_synthetic_power_law() {
        let eps = [1e-1f64, 3e-2, 1e-2, 3e-3, 1e-3];
        let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = eps.iter().map(|e| (e.sqrt()).ln()).collect();
        let slope = fit_slope(&xs, &ys);
        assert!((slope - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rate_exact_match_for_linear_datum() {
        let spec = ProblemSpec {
            grid: Grid::new(1, 33).unwrap(),
            metric: MetricField::identity(1),
            p: 2.0,
            big_n: 1,
            datum: Datum::Linear {
                n: 1,
                grad: vec![2.0],
            },
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4],
        };
        let states = crate::solver::eps_continuation(&spec, &SolveOptions::default()).unwrap();
        let (reference, rest) = states.split_last().unwrap();
        let report = convergence_rate(rest, reference, &spec.metric, 0.1, 2.0).unwrap();
        assert!(report.exact_match, "errors: {:?}", report.errors);
    }

    #[test]
    fn k_compose_examples() {
        let (spec, sol) = solved_linear(0.8, 0.0, 9);
        // (|ξ|_γ − 1)_+ vanishes below the threshold
        let k = |x: &[f64], xi: &[f64]| {
            let gmat = MetricField::identity(2).eval(x).unwrap();
            (gmat.norm_grad(xi) - 1.0).max(0.0)
        };
        let (field, omega) = k_compose(&sol, &spec.metric, &k, 5).unwrap();
        assert!(field.iter().all(|&v| v.abs() < 1e-9));
        assert!(omega.windows(2).all(|w| w[1].1 >= w[0].1));

        let (spec2, sol2) = solved_linear(2.0, 0.0, 9);
        let (field2, _) = k_compose(&sol2, &spec2.metric, &k, 5).unwrap();
        for v in &field2 {
            assert!((v - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn k_compose_rejects_nonvanishing_closure() {
        let (spec, sol) = solved_linear(2.0, 0.0, 9);
        let bad = |_x: &[f64], _xi: &[f64]| 1.0;
        assert!(matches!(
            k_compose(&sol, &spec.metric, &bad, 5),
            Err(DiagnosticsError::VanishingCheckFailed { .. })
        ));
    }

    #[test]
    fn delta_to_zero_uniform_defect() {
        let (spec, sol) = solved_linear(2.0, 1.0, 17);
        let g0 = g_delta_field(&sol, &spec.metric, 0.0).unwrap();
        let mut ratios = Vec::new();
        for delta in [0.1, 0.01, 0.001] {
            let gd = g_delta_field(&sol, &spec.metric, delta).unwrap();
            let defect = g0
                .values
                .iter()
                .zip(&gd.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            ratios.push(defect / delta);
        }
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
        assert!(hi.is_finite() && lo > 0.0);
        assert!((hi - lo) / hi < 0.1, "defect/delta ratios {ratios:?}");
    }
}
