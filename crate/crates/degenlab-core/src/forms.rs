//! The three bilinear forms obtained by linearizing 𝐀_ε around a gradient ξ.
//!
//! All three share the coefficient structure
//!
//! ```text
//! h_ε(t)·(metric pairing) + h'_ε(t)·t · (rank-one pairing)/t²,   t = |ξ|_γ(x)
//! ```
//!
//! acting on second-gradient space ℝ^{n²N} (form 𝓐), gradient space ℝ^{nN}
//! (form 𝓑) and spatial ℝⁿ (form 𝓒). The rank-one part is normalized by t²
//! in all three forms, which is the unique normalization under which the
//! shared two-sided envelope
//!
//! ```text
//! [ε + λ(t)]·|η|²_γ ≤ Q(η,η) ≤ [ε + Λ(t)]·|η|²_γ
//! ```
//!
//! holds for each of them. On the degenerate set |ξ|_γ ≤ 1 the rank-one part
//! is dropped and the forms reduce to ε times the metric pairing.

use alloc::vec::Vec;
use core::fmt;

use crate::kernel::{big_lambda, h, h_prime, lambda, KernelParams};
use crate::metric::{GammaVector, MetricError, MetricField, SymMatrix};
use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormSpace {
    /// ℝ^{n²N}, layout `eta[i*n*n + alpha*n + nu]`.
    SecondGradient,
    /// ℝ^{nN}, layout `eta[i*n + alpha]`.
    Gradient,
    /// ℝⁿ.
    Spatial,
}

impl FormSpace {
    pub fn len(&self, n: usize, big_n: usize) -> usize {
        match self {
            FormSpace::SecondGradient => n * n * big_n,
            FormSpace::Gradient => n * big_n,
            FormSpace::Spatial => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormOperand {
    pub space: FormSpace,
    pub entries: Vec<f64>,
}

impl FormOperand {
    pub fn new(space: FormSpace, entries: Vec<f64>) -> Self {
        FormOperand { space, entries }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormsError {
    ZeroBasePoint,
    /// |ξ|_γ = 1 with 1 < p < 2: h' is unbounded there.
    UndefinedDerivative { t: f64, p: f64 },
    OperandMismatch { expected: usize, got: usize },
    WrongSpace,
    Metric(MetricError),
}

impl fmt::Display for FormsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormsError::ZeroBasePoint => write!(f, "base point xi must be nonzero"),
            FormsError::UndefinedDerivative { t, p } => {
                write!(f, "form undefined at |xi|_gamma = {t} for p = {p} < 2")
            }
            FormsError::OperandMismatch { expected, got } => {
                write!(f, "operand length {got}, expected {expected}")
            }
            FormsError::WrongSpace => write!(f, "operand lies in the wrong space"),
            FormsError::Metric(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for FormsError {}

impl From<MetricError> for FormsError {
    fn from(e: MetricError) -> Self {
        FormsError::Metric(e)
    }
}

/// Shared scalar coefficients at the base point: (h_ε, h'_ε/t) with the
/// rank-one coefficient zeroed on the degenerate set.
fn coefficients(t: f64, params: &KernelParams) -> Result<(f64, f64), FormsError> {
    if params.p < 2.0 && libm::fabs(t - 1.0) < 1e-14 {
        return Err(FormsError::UndefinedDerivative { t, p: params.p });
    }
    if t <= 1.0 {
        Ok((params.eps, 0.0))
    } else {
        Ok((h(t, params.p) + params.eps, h_prime(t, params.p) / t))
    }
}

fn check_operand(op: &FormOperand, space: FormSpace, n: usize, big_n: usize) -> Result<(), FormsError> {
    if op.space != space {
        return Err(FormsError::WrongSpace);
    }
    let expected = space.len(n, big_n);
    if op.entries.len() != expected {
        return Err(FormsError::OperandMismatch {
            expected,
            got: op.entries.len(),
        });
    }
    Ok(())
}

fn base_point(
    m: &MetricField,
    x: &[f64],
    xi: &GammaVector,
) -> Result<(SymMatrix, f64, Vec<f64>), FormsError> {
    let gmat = m.eval(x)?;
    let t = gmat.norm_grad(&xi.entries);
    if xi.entries.iter().all(|&v| v == 0.0) {
        return Err(FormsError::ZeroBasePoint);
    }
    let mut gxi = alloc::vec![0.0; xi.entries.len()];
    gmat.apply_grad(&xi.entries, &mut gxi);
    Ok((gmat, t, gxi))
}

/// 𝓐_ε(x,ξ)(η,ζ) on second-gradient space.
pub fn form_a(
    m: &MetricField,
    x: &[f64],
    xi: &GammaVector,
    params: &KernelParams,
    eta: &FormOperand,
    zeta: &FormOperand,
) -> Result<f64, FormsError> {
    check_operand(eta, FormSpace::SecondGradient, xi.n, xi.big_n)?;
    check_operand(zeta, FormSpace::SecondGradient, xi.n, xi.big_n)?;
    let (gmat, t, gxi) = base_point(m, x, xi)?;
    let (k_base, k_rank) = coefficients(t, params)?;
    let n = xi.n;
    let base = gmat.inner_second(&eta.entries, &zeta.entries);
    if k_rank == 0.0 {
        return Ok(k_base * base);
    }
    // Q_ν(η) = Σ_{i,α} (γξ)^i_α η^i_{αν}, then contract the ν index with γ.
    let project = |v: &[f64], nu: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..xi.big_n {
            for a in 0..n {
                s += gxi[i * n + a] * v[i * n * n + a * n + nu];
            }
        }
        s
    };
    let mut rank = 0.0;
    for nu in 0..n {
        let qe = project(&eta.entries, nu);
        for sg in 0..n {
            rank += gmat.get(nu, sg) * qe * project(&zeta.entries, sg);
        }
    }
    Ok(k_base * base + k_rank * rank)
}

/// 𝓑_ε(x,ξ)(η,ζ) on gradient space.
pub fn form_b(
    m: &MetricField,
    x: &[f64],
    xi: &GammaVector,
    params: &KernelParams,
    eta: &FormOperand,
    zeta: &FormOperand,
) -> Result<f64, FormsError> {
    check_operand(eta, FormSpace::Gradient, xi.n, xi.big_n)?;
    check_operand(zeta, FormSpace::Gradient, xi.n, xi.big_n)?;
    let (gmat, t, gxi) = base_point(m, x, xi)?;
    let (k_base, k_rank) = coefficients(t, params)?;
    Ok(form_b_raw(&gmat, &gxi, k_base, k_rank, &eta.entries, &zeta.entries))
}

/// Allocation-free 𝓑_ε given precomputed γ(x), γξ and coefficients; the
/// solver's Hessian action runs through this path.
#[inline]
pub fn form_b_raw(
    gmat: &SymMatrix,
    gxi: &[f64],
    k_base: f64,
    k_rank: f64,
    eta: &[f64],
    zeta: &[f64],
) -> f64 {
    let base = gmat.inner_grad(eta, zeta);
    if k_rank == 0.0 {
        return k_base * base;
    }
    let pe: f64 = gxi.iter().zip(eta).map(|(a, b)| a * b).sum();
    let pz: f64 = gxi.iter().zip(zeta).map(|(a, b)| a * b).sum();
    k_base * base + k_rank * pe * pz
}

/// 𝓒_ε(x,ξ)(η,ζ) on ℝⁿ; ξ is contracted over its codomain index.
pub fn form_c(
    m: &MetricField,
    x: &[f64],
    xi: &GammaVector,
    params: &KernelParams,
    eta: &FormOperand,
    zeta: &FormOperand,
) -> Result<f64, FormsError> {
    check_operand(eta, FormSpace::Spatial, xi.n, xi.big_n)?;
    check_operand(zeta, FormSpace::Spatial, xi.n, xi.big_n)?;
    let (gmat, t, gxi) = base_point(m, x, xi)?;
    let (k_base, k_rank) = coefficients(t, params)?;
    let n = xi.n;
    let base = gmat.inner_spatial(&eta.entries, &zeta.entries);
    if k_rank == 0.0 {
        return Ok(k_base * base);
    }
    let mut rank = 0.0;
    for i in 0..xi.big_n {
        let pe: f64 = (0..n).map(|a| gxi[i * n + a] * eta.entries[a]).sum();
        let pz: f64 = (0..n).map(|a| gxi[i * n + a] * zeta.entries[a]).sum();
        rank += pe * pz;
    }
    Ok(k_base * base + k_rank * rank)
}

/// γ-norm squared of an operand in its own space.
pub fn operand_gamma_sq(gmat: &SymMatrix, op: &FormOperand) -> f64 {
    match op.space {
        FormSpace::SecondGradient => gmat.inner_second(&op.entries, &op.entries),
        FormSpace::Gradient => gmat.inner_grad(&op.entries, &op.entries),
        FormSpace::Spatial => gmat.inner_spatial(&op.entries, &op.entries),
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    /// Smallest observed Q(η,η)/|η|²_γ over all samples and spaces.
    pub min_ratio_low: f64,
    /// Largest observed ratio.
    pub max_ratio_high: f64,
    /// Samples violating [ε+λ, ε+Λ] beyond 1e-10 relative slack.
    pub violations: usize,
    pub samples: usize,
}

/// Randomized check of the two-sided envelope for all three forms at a fixed
/// base point (x, ξ). Deterministic parallel/γ-orthogonal probes in gradient
/// space are included so that the extremal ratios are actually attained.
pub fn envelope_check(
    m: &MetricField,
    x: &[f64],
    xi: &GammaVector,
    params: &KernelParams,
    samples: usize,
    seed: u64,
) -> Result<EnvelopeReport, FormsError> {
    let (gmat, t, gxi) = base_point(m, x, xi)?;
    coefficients(t, params)?; // reject the forbidden (xi, p) combination up front
    let lo_bound = params.eps + lambda(t, params.p);
    let hi_bound = params.eps + big_lambda(t, params.p);
    let n = xi.n;
    let big_n = xi.big_n;
    let mut r = sampling::rng(seed);

    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut violations = 0usize;
    let mut total = 0usize;

    let tol = 1e-10;
    let mut record = |ratio: f64| {
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        if ratio < lo_bound - tol * (1.0 + libm::fabs(lo_bound))
            || ratio > hi_bound + tol * (1.0 + libm::fabs(hi_bound))
        {
            violations += 1;
        }
    };

    // parallel probe
    let eta_par = FormOperand::new(FormSpace::Gradient, xi.entries.clone());
    let q = form_b(m, x, xi, params, &eta_par, &eta_par)?;
    let nsq = operand_gamma_sq(&gmat, &eta_par);
    if nsq > 0.0 {
        record(q / nsq);
        total += 1;
    }
    // γ-orthogonal probes: project coordinate directions off ξ in the γ inner product
    let xi_sq = gmat.inner_grad(&xi.entries, &xi.entries);
    if xi_sq > 0.0 {
        for k in 0..n * big_n {
            let mut e = alloc::vec![0.0; n * big_n];
            e[k] = 1.0;
            let proj = gmat.inner_grad(&xi.entries, &e) / xi_sq;
            for (ev, xv) in e.iter_mut().zip(&xi.entries) {
                *ev -= proj * xv;
            }
            let nsq = gmat.inner_grad(&e, &e);
            if nsq > 1e-20 {
                let op = FormOperand::new(FormSpace::Gradient, e);
                record(form_b(m, x, xi, params, &op, &op)? / nsq);
                total += 1;
            }
        }
    }

    let per_space = samples / 3 + 1;
    for space in [FormSpace::SecondGradient, FormSpace::Gradient, FormSpace::Spatial] {
        let len = space.len(n, big_n);
        for _ in 0..per_space {
            let v = sampling::vector_with_norm(&mut r, len, 1e-2, 1e2);
            let op = FormOperand::new(space, v);
            let nsq = operand_gamma_sq(&gmat, &op);
            if nsq <= 0.0 {
                continue;
            }
            let q = match space {
                FormSpace::SecondGradient => form_a(m, x, xi, params, &op, &op)?,
                FormSpace::Gradient => form_b_raw(
                    &gmat,
                    &gxi,
                    coefficients(t, params)?.0,
                    coefficients(t, params)?.1,
                    &op.entries,
                    &op.entries,
                ),
                FormSpace::Spatial => form_c(m, x, xi, params, &op, &op)?,
            };
            record(q / nsq);
            total += 1;
        }
    }

    Ok(EnvelopeReport {
        min_ratio_low: min_ratio,
        max_ratio_high: max_ratio,
        violations,
        samples: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn setup() -> (MetricField, [f64; 2], GammaVector, KernelParams) {
        (
            MetricField::identity(2),
            [0.5, 0.5],
            GammaVector::new(2, 1, vec![2.0, 0.0]).unwrap(),
            KernelParams::new(2.0, 0.0, 0.0).unwrap(),
        )
    }

    #[test]
    fn form_a_aligned_and_orthogonal() {
        let (m, x, xi, params) = setup();
        // slot (i=0, alpha=0, nu=0) aligns with the rank-one direction
        let mut aligned = vec![0.0; 4];
        aligned[0] = 1.0;
        let op = FormOperand::new(FormSpace::SecondGradient, aligned);
        let v = form_a(&m, &x, &xi, &params, &op, &op).unwrap();
        assert!(close(v, 1.0, 1e-14), "aligned: {v}"); // [eps + Lambda(2)]|eta|^2

        let mut orth = vec![0.0; 4];
        orth[2] = 1.0; // (i=0, alpha=1, nu=0): gamma-orthogonal to xi
        let op = FormOperand::new(FormSpace::SecondGradient, orth);
        let v = form_a(&m, &x, &xi, &params, &op, &op).unwrap();
        assert!(close(v, 0.5, 1e-14), "orthogonal: {v}"); // h(2)
    }

    #[test]
    fn form_a_degenerate_reduces_to_eps_pairing() {
        let m = MetricField::identity(2);
        let xi = GammaVector::new(2, 1, vec![0.5, 0.0]).unwrap();
        let params = KernelParams::new(2.0, 0.3, 0.0).unwrap();
        let eta = FormOperand::new(FormSpace::SecondGradient, vec![0.2, -1.0, 0.4, 0.7]);
        let zeta = FormOperand::new(FormSpace::SecondGradient, vec![1.0, 0.3, -0.2, 0.5]);
        let v = form_a(&m, &[0.5, 0.5], &xi, &params, &eta, &zeta).unwrap();
        let g = m.eval(&[0.5, 0.5]).unwrap();
        let expect = 0.3 * g.inner_second(&eta.entries, &zeta.entries);
        assert!(close(v, expect, 1e-14));
    }

    #[test]
    fn form_b_parallel_orthogonal_zero() {
        let (m, x, xi, params) = setup();
        let par = FormOperand::new(FormSpace::Gradient, vec![1.0, 0.0]);
        let v = form_b(&m, &x, &xi, &params, &par, &par).unwrap();
        assert!(close(v, 1.0, 1e-14)); // h_eps + h' t = 1 at t=2, p=2

        let orth = FormOperand::new(FormSpace::Gradient, vec![0.0, 1.0]);
        let v = form_b(&m, &x, &xi, &params, &orth, &orth).unwrap();
        assert!(close(v, 0.5, 1e-14)); // h(2)

        let zero = FormOperand::new(FormSpace::Gradient, vec![0.0, 0.0]);
        let v = form_b(&m, &x, &xi, &params, &zero, &par).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn form_c_examples() {
        let (m, x, xi, _) = setup();
        let params = KernelParams::new(2.0, 0.1, 0.0).unwrap();
        let e1 = FormOperand::new(FormSpace::Spatial, vec![1.0, 0.0]);
        let v = form_c(&m, &x, &xi, &params, &e1, &e1).unwrap();
        assert!(close(v, 1.1, 1e-14), "{v}");

        let e2 = FormOperand::new(FormSpace::Spatial, vec![0.0, 1.0]);
        let v = form_c(&m, &x, &xi, &params, &e2, &e2).unwrap();
        assert!(close(v, 0.6, 1e-14), "{v}");

        // degenerate base point, eps = 0: everything vanishes
        let sub = GammaVector::new(2, 1, vec![0.3, 0.1]).unwrap();
        let p0 = KernelParams::new(2.0, 0.0, 0.0).unwrap();
        let v = form_c(&m, &x, &sub, &p0, &e1, &e1).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn forbidden_combination_rejected() {
        let m = MetricField::identity(2);
        let xi = GammaVector::new(2, 1, vec![1.0, 0.0]).unwrap();
        let params = KernelParams::new(1.5, 0.1, 0.0).unwrap();
        let eta = FormOperand::new(FormSpace::Gradient, vec![1.0, 0.0]);
        assert!(matches!(
            form_b(&m, &[0.5, 0.5], &xi, &params, &eta, &eta),
            Err(FormsError::UndefinedDerivative { .. })
        ));
        let zero = GammaVector::zeros(2, 1);
        assert!(matches!(
            form_b(&m, &[0.5, 0.5], &zero, &params, &eta, &eta),
            Err(FormsError::ZeroBasePoint)
        ));
    }

    #[test]
    fn envelope_degenerate_point() {
        let m = MetricField::identity(2);
        let xi = GammaVector::new(2, 1, vec![0.4, 0.2]).unwrap();
        let params = KernelParams::new(2.0, 0.2, 0.0).unwrap();
        let rep = envelope_check(&m, &[0.5, 0.5], &xi, &params, 300, 7).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(close(rep.min_ratio_low, 0.2, 1e-12));
        assert!(close(rep.max_ratio_high, 0.2, 1e-12));
    }

    #[test]
    fn envelope_extremes_attained() {
        let (m, x, xi, _) = setup();
        let params = KernelParams::new(2.0, 0.05, 0.0).unwrap();
        let rep = envelope_check(&m, &x, &xi, &params, 2000, 11).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(close(rep.min_ratio_low, 0.05 + 0.5, 1e-12), "{}", rep.min_ratio_low);
        assert!(close(rep.max_ratio_high, 0.05 + 1.0, 1e-12), "{}", rep.max_ratio_high);
    }
}
