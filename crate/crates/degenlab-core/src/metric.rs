//! The coefficient field γ(x) and the inner products it induces.
//!
//! γ(x) is a symmetric n×n matrix, coercive with constants `c0 ≤ c1` and
//! Lipschitz with constant `c2`. It acts on spatial vectors in ℝⁿ and, summed
//! over the codomain index, on gradient-space vectors in ℝ^{nN} laid out as
//! `xi[i*n + alpha]` for component i and spatial index alpha.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Spatial dimension is capped at 2; matrices are stored in a fixed 2x2 slot.
pub const MAX_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricError {
    OutOfDomain { x: [f64; MAX_DIM] },
    DimensionMismatch { expected: usize, got: usize },
    InvalidSpec(String),
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::OutOfDomain { x } => {
                write!(f, "point ({}, {}) lies outside [0,1]^n", x[0], x[1])
            }
            MetricError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            MetricError::InvalidSpec(msg) => write!(f, "invalid metric: {msg}"),
        }
    }
}

impl core::error::Error for MetricError {}

/// Symmetric n×n matrix evaluated at one point, row-major in a fixed array.
#[derive(Debug, Clone, Copy)]
pub struct SymMatrix {
    pub n: usize,
    entries: [f64; MAX_DIM * MAX_DIM],
}

impl SymMatrix {
    pub fn new(n: usize, entries: [f64; MAX_DIM * MAX_DIM]) -> Self {
        SymMatrix { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        let mut e = [0.0; MAX_DIM * MAX_DIM];
        for a in 0..n {
            e[a * MAX_DIM + a] = 1.0;
        }
        SymMatrix { n, entries: e }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a * MAX_DIM + b]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for a in 0..self.n {
            for b in (a + 1)..self.n {
                let d = self.get(a, b) - self.get(b, a);
                let s = 1.0 + libm::fabs(self.get(a, b));
                if libm::fabs(d) > tol * s {
                    return false;
                }
            }
        }
        true
    }

    /// Eigenvalue range (min, max); closed form for n ≤ 2.
    pub fn eig_range(&self) -> (f64, f64) {
        match self.n {
            1 => (self.get(0, 0), self.get(0, 0)),
            _ => {
                let (a, b, c) = (self.get(0, 0), self.get(0, 1), self.get(1, 1));
                let mean = 0.5 * (a + c);
                let rad = libm::sqrt(0.25 * (a - c) * (a - c) + b * b);
                (mean - rad, mean + rad)
            }
        }
    }

    /// ⟨ξ, η⟩ for spatial vectors in ℝⁿ.
    #[inline]
    pub fn inner_spatial(&self, xi: &[f64], eta: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                s += self.get(a, b) * xi[a] * eta[b];
            }
        }
        s
    }

    /// ⟨ξ, η⟩_γ = Σ_i Σ_{αβ} γ_{αβ} ξ^i_α η^i_β for gradient-space vectors.
    #[inline]
    pub fn inner_grad(&self, xi: &[f64], eta: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), eta.len());
        debug_assert_eq!(xi.len() % self.n, 0);
        let mut s = 0.0;
        let mut off = 0;
        while off < xi.len() {
            for a in 0..self.n {
                for b in 0..self.n {
                    s += self.get(a, b) * xi[off + a] * eta[off + b];
                }
            }
            off += self.n;
        }
        s
    }

    #[inline]
    pub fn norm_grad(&self, xi: &[f64]) -> f64 {
        libm::sqrt(self.inner_grad(xi, xi).max(0.0))
    }

    /// Writes (γξ)^i_α = Σ_β γ_{αβ} ξ^i_β into `out`.
    #[inline]
    pub fn apply_grad(&self, xi: &[f64], out: &mut [f64]) {
        debug_assert_eq!(xi.len(), out.len());
        let mut off = 0;
        while off < xi.len() {
            for a in 0..self.n {
                let mut s = 0.0;
                for b in 0..self.n {
                    s += self.get(a, b) * xi[off + b];
                }
                out[off + a] = s;
            }
            off += self.n;
        }
    }

    /// Norm on second-gradient space ℝ^{n²N}: γ_{αβ} γ_{νσ} η^i_{αν} η^i_{βσ},
    /// with layout `eta[i*n*n + alpha*n + nu]`.
    pub fn inner_second(&self, eta: &[f64], zeta: &[f64]) -> f64 {
        let n = self.n;
        debug_assert_eq!(eta.len(), zeta.len());
        debug_assert_eq!(eta.len() % (n * n), 0);
        let big_n = eta.len() / (n * n);
        let mut s = 0.0;
        for i in 0..big_n {
            let base = i * n * n;
            for a in 0..n {
                for b in 0..n {
                    let gab = self.get(a, b);
                    if gab == 0.0 {
                        continue;
                    }
                    for nu in 0..n {
                        for sg in 0..n {
                            s += gab
                                * self.get(nu, sg)
                                * eta[base + a * n + nu]
                                * zeta[base + b * n + sg];
                        }
                    }
                }
            }
        }
        s
    }
}

/// A vector in gradient space ℝ^{nN}, component layout `entries[i*n + alpha]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaVector {
    pub n: usize,
    pub big_n: usize,
    pub entries: Vec<f64>,
}

impl GammaVector {
    pub fn new(n: usize, big_n: usize, entries: Vec<f64>) -> Result<Self, MetricError> {
        if entries.len() != n * big_n {
            return Err(MetricError::DimensionMismatch {
                expected: n * big_n,
                got: entries.len(),
            });
        }
        Ok(GammaVector { n, big_n, entries })
    }

    pub fn zeros(n: usize, big_n: usize) -> Self {
        GammaVector {
            n,
            big_n,
            entries: alloc::vec![0.0; n * big_n],
        }
    }

    pub fn euclid_norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|v| v * v).sum())
    }
}

/// Built-in metric library. All fields are smooth on [0,1]^n.
#[derive(Debug, Clone)]
pub enum MetricKind {
    /// γ = I.
    Identity,
    /// Constant diagonal γ = diag(d).
    ConstantDiagonal { diag: [f64; MAX_DIM] },
    /// Diagonal entries affine in x₁: γ_αα(x) = base[α] + slope[α]·x₁.
    AffineDiagonal {
        base: [f64; MAX_DIM],
        slope: [f64; MAX_DIM],
    },
    /// 2D rotation field: γ(x) = R(θ)ᵀ diag(eigs) R(θ) with θ = θ₀ + rate·(x₁+x₂).
    Rotation {
        angle0: f64,
        rate: f64,
        eigs: [f64; 2],
    },
    /// Arbitrary entry function; the caller is responsible for the declared
    /// constants. Entries are written row-major into a fixed 2x2 slot.
    Custom(fn(&[f64], &mut [f64; MAX_DIM * MAX_DIM])),
}

/// The coefficient field γ(x) on Ω = [0,1]^n together with its declared
/// ellipticity constants `c0 ≤ |ξ|²_γ/|ξ|² ≤ c1` and Lipschitz bound `c2`.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub dim_n: usize,
    pub kind: MetricKind,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

const DOMAIN_TOL: f64 = 1e-12;

impl MetricField {
    pub fn identity(n: usize) -> Self {
        MetricField {
            dim_n: n,
            kind: MetricKind::Identity,
            c0: 1.0,
            c1: 1.0,
            c2: 0.0,
        }
    }

    pub fn constant_diagonal(n: usize, diag: [f64; MAX_DIM]) -> Result<Self, MetricError> {
        let (lo, hi) = diag_range(n, &diag);
        if lo <= 0.0 {
            return Err(MetricError::InvalidSpec(String::from(
                "diagonal entries must be positive",
            )));
        }
        Ok(MetricField {
            dim_n: n,
            kind: MetricKind::ConstantDiagonal { diag },
            c0: lo,
            c1: hi,
            c2: 0.0,
        })
    }

    pub fn affine_diagonal(
        n: usize,
        base: [f64; MAX_DIM],
        slope: [f64; MAX_DIM],
    ) -> Result<Self, MetricError> {
        // extremes over x₁ ∈ [0,1]
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut c2 = 0.0f64;
        for a in 0..n {
            let e0 = base[a];
            let e1 = base[a] + slope[a];
            lo = lo.min(e0.min(e1));
            hi = hi.max(e0.max(e1));
            c2 = c2.max(libm::fabs(slope[a]));
        }
        if lo <= 0.0 {
            return Err(MetricError::InvalidSpec(String::from(
                "affine diagonal must stay positive on [0,1]",
            )));
        }
        Ok(MetricField {
            dim_n: n,
            kind: MetricKind::AffineDiagonal { base, slope },
            c0: lo,
            c1: hi,
            c2,
        })
    }

    pub fn rotation(angle0: f64, rate: f64, eigs: [f64; 2]) -> Result<Self, MetricError> {
        if eigs[0] <= 0.0 || eigs[1] <= 0.0 {
            return Err(MetricError::InvalidSpec(String::from(
                "rotation eigenvalues must be positive",
            )));
        }
        let half_gap = 0.5 * libm::fabs(eigs[0] - eigs[1]);
        Ok(MetricField {
            dim_n: 2,
            kind: MetricKind::Rotation { angle0, rate, eigs },
            c0: eigs[0].min(eigs[1]),
            c1: eigs[0].max(eigs[1]),
            // per-entry gradient: |∂γ_αβ| ≤ 2·half_gap·|rate| per coordinate
            c2: 2.0 * libm::sqrt(2.0) * half_gap * libm::fabs(rate),
        })
    }

    pub fn custom(
        n: usize,
        f: fn(&[f64], &mut [f64; MAX_DIM * MAX_DIM]),
        c0: f64,
        c1: f64,
        c2: f64,
    ) -> Self {
        MetricField {
            dim_n: n,
            kind: MetricKind::Custom(f),
            c0,
            c1,
            c2,
        }
    }

    fn check_domain(&self, x: &[f64]) -> Result<(), MetricError> {
        if x.len() != self.dim_n {
            return Err(MetricError::DimensionMismatch {
                expected: self.dim_n,
                got: x.len(),
            });
        }
        let mut slot = [0.0; MAX_DIM];
        slot[..x.len()].copy_from_slice(x);
        for &c in x {
            if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&c) {
                return Err(MetricError::OutOfDomain { x: slot });
            }
        }
        Ok(())
    }

    /// Evaluates γ(x); errors on points outside [0,1]^n.
    pub fn eval(&self, x: &[f64]) -> Result<SymMatrix, MetricError> {
        self.check_domain(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Pointwise evaluation without the domain check; used by hot loops whose
    /// sample points are grid-generated and therefore already inside Ω.
    pub fn eval_unchecked(&self, x: &[f64]) -> SymMatrix {
        let n = self.dim_n;
        let mut e = [0.0; MAX_DIM * MAX_DIM];
        match &self.kind {
            MetricKind::Identity => {
                for a in 0..n {
                    e[a * MAX_DIM + a] = 1.0;
                }
            }
            MetricKind::ConstantDiagonal { diag } => {
                for a in 0..n {
                    e[a * MAX_DIM + a] = diag[a];
                }
            }
            MetricKind::AffineDiagonal { base, slope } => {
                for a in 0..n {
                    e[a * MAX_DIM + a] = base[a] + slope[a] * x[0];
                }
            }
            MetricKind::Rotation { angle0, rate, eigs } => {
                let theta = angle0 + rate * (x[0] + x[1]);
                let (s, c) = libm::sincos(theta);
                let (d1, d2) = (eigs[0], eigs[1]);
                // Rᵀ D R with R = [[c, s], [-s, c]]
                e[0] = d1 * c * c + d2 * s * s;
                e[1] = (d1 - d2) * s * c;
                e[MAX_DIM] = e[1];
                e[MAX_DIM + 1] = d1 * s * s + d2 * c * c;
            }
            MetricKind::Custom(f) => f(x, &mut e),
        }
        SymMatrix::new(n, e)
    }

    fn check_vec(&self, v: &GammaVector) -> Result<(), MetricError> {
        if v.n != self.dim_n {
            return Err(MetricError::DimensionMismatch {
                expected: self.dim_n,
                got: v.n,
            });
        }
        Ok(())
    }

    /// ⟨ξ, η⟩_{γ(x)}.
    pub fn gamma_inner(
        &self,
        x: &[f64],
        xi: &GammaVector,
        eta: &GammaVector,
    ) -> Result<f64, MetricError> {
        self.check_vec(xi)?;
        self.check_vec(eta)?;
        if xi.big_n != eta.big_n {
            return Err(MetricError::DimensionMismatch {
                expected: xi.big_n,
                got: eta.big_n,
            });
        }
        let g = self.eval(x)?;
        Ok(g.inner_grad(&xi.entries, &eta.entries))
    }

    /// |ξ|_{γ(x)} = √⟨ξ,ξ⟩_{γ(x)}.
    pub fn gamma_norm(&self, x: &[f64], xi: &GammaVector) -> Result<f64, MetricError> {
        self.check_vec(xi)?;
        let g = self.eval(x)?;
        Ok(g.norm_grad(&xi.entries))
    }
}

/// Empirical validation of the field's declared constants over a sample grid.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub symmetry_ok: bool,
    pub c0_emp: f64,
    pub c1_emp: f64,
    pub c2_emp: f64,
    /// true when the empirical constants respect the declared ones (with a
    /// small relative slack for the finite-difference slope).
    pub declared_ok: bool,
}

/// Sweeps the sample points, computing eigenvalue extremes of γ and central
/// finite-difference slopes of each entry with step `fd_step`.
pub fn validate_metric(
    m: &MetricField,
    sample_grid: &[Vec<f64>],
    fd_step: f64,
) -> Result<MetricReport, MetricError> {
    if fd_step <= 0.0 {
        return Err(MetricError::InvalidSpec(String::from("fd_step must be positive")));
    }
    let n = m.dim_n;
    let mut symmetry_ok = true;
    let mut c0 = f64::INFINITY;
    let mut c1 = f64::NEG_INFINITY;
    let mut c2 = 0.0f64;
    for x in sample_grid {
        let g = m.eval(x)?;
        if !g.is_symmetric(1e-12) {
            symmetry_ok = false;
        }
        let (lo, hi) = g.eig_range();
        c0 = c0.min(lo);
        c1 = c1.max(hi);
        // central differences, shifted to stay inside the domain
        let mut xp = alloc::vec![0.0; n];
        let mut xm = alloc::vec![0.0; n];
        for k in 0..n {
            xp.copy_from_slice(x);
            xm.copy_from_slice(x);
            xp[k] = (x[k] + fd_step).min(1.0);
            xm[k] = (x[k] - fd_step).max(0.0);
            let dx = xp[k] - xm[k];
            if dx <= 0.0 {
                continue;
            }
            let gp = m.eval(&xp)?;
            let gm = m.eval(&xm)?;
            for a in 0..n {
                for b in 0..n {
                    let slope = libm::fabs(gp.get(a, b) - gm.get(a, b)) / dx;
                    c2 = c2.max(slope);
                }
            }
        }
    }
    let declared_ok = symmetry_ok
        && c0 >= m.c0 - 1e-12
        && c1 <= m.c1 + 1e-12
        && c2 <= m.c2 * (1.0 + 1e-6) + 1e-12;
    Ok(MetricReport {
        symmetry_ok,
        c0_emp: c0,
        c1_emp: c1,
        c2_emp: c2,
        declared_ok,
    })
}

fn diag_range(n: usize, diag: &[f64; MAX_DIM]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in 0..n {
        lo = lo.min(diag[a]);
        hi = hi.max(diag[a]);
    }
    (lo, hi)
}
