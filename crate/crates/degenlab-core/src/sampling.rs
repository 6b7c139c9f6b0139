//! Seeded sampling helpers shared by the randomized checkers.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metric::MetricField;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

pub fn log_uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    libm::exp(uniform(r, libm::log(lo), libm::log(hi)))
}

/// Standard-normal-ish direction components via Box-Muller.
pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = r.random::<f64>().max(1e-300);
    let u2: f64 = r.random();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Random vector of length `len` with Euclidean norm drawn log-uniformly
/// from [norm_lo, norm_hi].
pub fn vector_with_norm(r: &mut ChaCha8Rng, len: usize, norm_lo: f64, norm_hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| normal(r)).collect();
    let mut nrm = libm::sqrt(v.iter().map(|x| x * x).sum());
    if nrm == 0.0 {
        v[0] = 1.0;
        nrm = 1.0;
    }
    let target = log_uniform(r, norm_lo, norm_hi);
    for x in &mut v {
        *x *= target / nrm;
    }
    v
}

pub fn point_in_unit_cube(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random::<f64>()).collect()
}

/// Draws one metric from the built-in library, covering isotropic and
/// anisotropic, constant and x-dependent regimes.
pub fn metric_from_library(r: &mut ChaCha8Rng, n: usize) -> MetricField {
    match r.random_range(0..4u32) {
        0 => MetricField::identity(n),
        1 => {
            let d0 = uniform(r, 0.5, 2.0);
            let d1 = uniform(r, 0.5, 2.0);
            MetricField::constant_diagonal(n, [d0, d1]).unwrap()
        }
        2 => {
            let b0 = uniform(r, 0.8, 1.5);
            let b1 = uniform(r, 0.8, 1.5);
            let s0 = uniform(r, -0.4, 0.6);
            let s1 = uniform(r, -0.4, 0.6);
            MetricField::affine_diagonal(n, [b0, b1], [s0.max(-0.5 * b0), s1.max(-0.5 * b1)])
                .unwrap()
        }
        _ => {
            if n == 2 {
                MetricField::rotation(uniform(r, 0.0, 1.0), uniform(r, -1.0, 1.0), [
                    uniform(r, 0.6, 1.0),
                    uniform(r, 1.0, 2.5),
                ])
                .unwrap()
            } else {
                MetricField::identity(n)
            }
        }
    }
}
