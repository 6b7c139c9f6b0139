//! Numerical core for minimizing very degenerate anisotropic convex energies.
//!
//! The energy density is `(1/p)(|Du|_γ(x) - 1)_+^p`: it vanishes on the whole
//! unit γ-ball of gradients, so the problem is degenerate there and uniformly
//! convex only for large gradients. The crate provides
//!
//! - the anisotropic metric field γ(x) and its induced inner products ([`metric`]),
//! - the scalar kernels h, g, their envelopes and the truncated gradient map ([`kernel`]),
//! - the bilinear forms used to linearize the regularized system ([`forms`]),
//! - randomized checkers for the algebraic estimates those objects satisfy
//!   ([`lemma_oracle`]),
//! - a uniform tensor-product grid with adjoint-consistent gradient/divergence
//!   ([`grid`]),
//! - an ε-regularized energy minimizer with vanishing-viscosity continuation
//!   ([`solver`]),
//! - excess/regime/Hölder/convergence diagnostics ([`diagnostics`]),
//! - the congested-transport dual flow and its optimality certificates
//!   ([`transport`]).
//!
//! The crate is `no_std` (with `alloc`); all IO, configuration and file
//! formats live in the companion `degenlab` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod forms;
pub mod grid;
pub mod kernel;
pub mod lemma_oracle;
pub mod metric;
pub mod solver;
pub mod transport;

pub mod sampling;
