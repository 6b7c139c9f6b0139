//! Scalar kernels of the energy and the maps built from them.
//!
//! For p > 1 and t ≥ 0:
//!
//! ```text
//! h(t) = (t-1)_+^{p-1} / t          F(t) = (1/p)(t-1)_+^p
//! g(t) = (t-1)_+^p / t              H(s) = s + s^q/q,  1/p + 1/q = 1
//! λ(t) = min{h(t), (p-1)(t-1)^{p-2}}   (0 for t ≤ 1)
//! Λ(t) = max{h(t), (p-1)(t-1)^{p-2}}   (0 for t ≤ 1)
//! ```
//!
//! with h(0) = g(0) = 0 by the positive part. The regularized kernel is
//! h_ε = h + ε. At t = 1 with 1 < p < 2 the derivative h′ blows up; it is
//! reported as `f64::INFINITY` and all samplers stay away from t = 1.

use crate::metric::{GammaVector, MetricError, MetricField};
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelError {
    NegativeArgument { t: f64 },
    InvalidParams(&'static str),
    Metric(MetricError),
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::NegativeArgument { t } => write!(f, "kernel argument {t} is negative"),
            KernelError::InvalidParams(msg) => write!(f, "invalid kernel parameters: {msg}"),
            KernelError::Metric(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for KernelError {}

impl From<MetricError> for KernelError {
    fn from(e: MetricError) -> Self {
        KernelError::Metric(e)
    }
}

/// Exponent p, ellipticity ε and truncation δ of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub p: f64,
    pub eps: f64,
    pub delta: f64,
}

impl KernelParams {
    pub fn new(p: f64, eps: f64, delta: f64) -> Result<Self, KernelError> {
        if !(p > 1.0) {
            return Err(KernelError::InvalidParams("p must exceed 1"));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(KernelError::InvalidParams("eps must lie in [0,1]"));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(KernelError::InvalidParams("delta must lie in [0,1]"));
        }
        Ok(KernelParams { p, eps, delta })
    }
}

#[inline]
fn pos(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

#[inline]
pub fn h(t: f64, p: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else {
        libm::pow(t - 1.0, p - 1.0) / t
    }
}

/// h′ on t > 1; 0 on t < 1. At t = 1 exactly: 0 for p ≥ 2, +∞ for 1 < p < 2.
#[inline]
pub fn h_prime(t: f64, p: f64) -> f64 {
    if t < 1.0 {
        0.0
    } else if t == 1.0 {
        if p < 2.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        let s = t - 1.0;
        ((p - 1.0) * libm::pow(s, p - 2.0) * t - libm::pow(s, p - 1.0)) / (t * t)
    }
}

#[inline]
pub fn g(t: f64, p: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else {
        libm::pow(t - 1.0, p) / t
    }
}

/// g′ on t > 1 computed analytically from g(t) = (t-1)^p/t; 0 on t ≤ 1.
#[inline]
pub fn g_prime(t: f64, p: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else {
        let s = t - 1.0;
        (p * libm::pow(s, p - 1.0) * t - libm::pow(s, p)) / (t * t)
    }
}

/// F(t) = (1/p)(t-1)_+^p, the energy density in the modulus variable.
#[inline]
pub fn f_integrand(t: f64, p: f64) -> f64 {
    libm::pow(pos(t - 1.0), p) / p
}

#[inline]
pub fn lambda(t: f64, p: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else {
        h(t, p).min((p - 1.0) * libm::pow(t - 1.0, p - 2.0))
    }
}

#[inline]
pub fn big_lambda(t: f64, p: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else {
        h(t, p).max((p - 1.0) * libm::pow(t - 1.0, p - 2.0))
    }
}

/// All scalar kernels at one argument; h_ε is obtained as `h + eps` by the caller.
#[derive(Debug, Clone, Copy)]
pub struct KernelValues {
    pub h: f64,
    pub h_prime: f64,
    pub g: f64,
    pub g_prime: f64,
    pub f_integrand: f64,
    pub lambda_env: f64,
    pub big_lambda_env: f64,
}

pub fn eval_kernels(t: f64, params: &KernelParams) -> Result<KernelValues, KernelError> {
    if t < 0.0 {
        return Err(KernelError::NegativeArgument { t });
    }
    let p = params.p;
    Ok(KernelValues {
        h: h(t, p),
        h_prime: h_prime(t, p),
        g: g(t, p),
        g_prime: g_prime(t, p),
        f_integrand: f_integrand(t, p),
        lambda_env: lambda(t, p),
        big_lambda_env: big_lambda(t, p),
    })
}

/// Fenchel conjugate of F on s ≥ 0: H(s) = s + s^q/q with q = p/(p-1).
pub fn conjugate_h(s: f64, p: f64) -> Result<f64, KernelError> {
    if s < 0.0 {
        return Err(KernelError::NegativeArgument { t: s });
    }
    let q = p / (p - 1.0);
    Ok(s + libm::pow(s, q) / q)
}

/// 𝓖_δ(x,ξ) = (|ξ|_γ - 1 - δ)_+ ξ / |ξ|_γ; zero at ξ = 0 and on |ξ|_γ ≤ 1+δ.
pub fn truncated_gradient(
    m: &MetricField,
    x: &[f64],
    xi: &GammaVector,
    delta: f64,
) -> Result<GammaVector, KernelError> {
    let t = m.gamma_norm(x, xi)?;
    let mut out = xi.clone();
    let factor = if t > 1.0 + delta { (t - 1.0 - delta) / t } else { 0.0 };
    for v in &mut out.entries {
        *v *= factor;
    }
    Ok(out)
}

/// Truncation factor (|ξ|_γ − 1 − δ)_+ / |ξ|_γ applied in-place to a slice;
/// allocation-free path for per-cell loops. Returns |𝓖_δ|_γ = (t−1−δ)_+.
#[inline]
pub fn truncate_slice(t: f64, delta: f64, xi: &[f64], out: &mut [f64]) -> f64 {
    let excess = t - 1.0 - delta;
    if excess > 0.0 && t > 0.0 {
        let factor = excess / t;
        for (o, v) in out.iter_mut().zip(xi) {
            *o = factor * v;
        }
        excess
    } else {
        out.fill(0.0);
        0.0
    }
}

/// 𝐀_ε(x,ξ) = (h(|ξ|_γ) + ε) ξ.
pub fn vector_field_a(
    m: &MetricField,
    x: &[f64],
    xi: &GammaVector,
    params: &KernelParams,
) -> Result<GammaVector, KernelError> {
    let t = m.gamma_norm(x, xi)?;
    let factor = h(t, params.p) + params.eps;
    let mut out = xi.clone();
    for v in &mut out.entries {
        *v *= factor;
    }
    Ok(out)
}

/// Max-norm residual of the identity g(|ξ|_γ)ξ = |𝓖(x,ξ)|_γ^{p-1} 𝓖(x,ξ).
pub fn identity_check_g_pow(
    m: &MetricField,
    x: &[f64],
    xi: &GammaVector,
    p: f64,
) -> Result<f64, KernelError> {
    let t = m.gamma_norm(x, xi)?;
    let gv = g(t, p);
    let trunc = truncated_gradient(m, x, xi, 0.0)?;
    let tn = pos(t - 1.0); // |𝓖(x,ξ)|_γ
    let factor = if tn > 0.0 { libm::pow(tn, p - 1.0) } else { 0.0 };
    let mut worst = 0.0f64;
    for (a, b) in xi.entries.iter().zip(&trunc.entries) {
        let d = libm::fabs(gv * a - factor * b);
        worst = worst.max(d);
    }
    Ok(worst)
}
