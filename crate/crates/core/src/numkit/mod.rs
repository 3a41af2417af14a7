//! Numeric kernels: dense f64 matrices, reverse-mode autodiff on a flat
//! tape, the shared parameter bundles (GRU cell, two-layer MLP), and a
//! finite-difference gradient oracle.
//!
//! Conventions:
//! * matrices are row-major; vectors are 1×n rows,
//! * `linear` computes `y = x·Wᵀ + b` with `W: d_out×d_in`, matching the
//!   column-vector form `y = W x + b`,
//! * all transcendental functions go through `libm` so results are
//!   bit-identical across platforms.

mod fd;
mod kernels;
mod matrix;
mod tape;


pub use fd::{fd_gradient, max_rel_err};
pub use kernels::{
    gru_cell, linear, mlp2, softmax_rows, GruNodes, GruParams, Mlp2Nodes, Mlp2Params,
};
pub use matrix::{matmul, matmul_nt, matmul_tn, Matrix};
pub use tape::{Gradients, NodeId, Tape};

use alloc::string::String;
use core::fmt;

/// Errors produced by the numeric layer.
#[derive(Debug, Clone, PartialEq)]
pub enum NumError {
    /// Operand shapes are incompatible for the named operation.
    DimMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// A function evaluation produced a non-finite value where a finite one
    /// is required (finite-difference probing, loss evaluation).
    NonFinite { what: String },
}

impl fmt::Display for NumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumError::DimMismatch { op, lhs, rhs } => write!(
                f,
                "dimension mismatch in {op}: {}x{} vs {}x{}",
                lhs.0, lhs.1, rhs.0, rhs.1
            ),
            NumError::NonFinite { what } => write!(f, "non-finite value in {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NumError {}

/// Draw from N(0, std²) via Box–Muller (two uniform draws per sample).
pub fn normal(rng: &mut impl rand::Rng, std: f64) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    std * libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}
