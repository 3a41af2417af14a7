//! Spatial trajectory encoding.
//!
//! The executed position history P₁..Pₜ becomes one token per transition:
//! normalized direction d = ΔP/‖ΔP‖ (zero when the motion is shorter than
//! ε), scalar range r = ‖ΔP‖, and a sinusoidal temporal embedding of the
//! transition index, all fed through a shared two-layer MLP. Tokens are a
//! pure function of position differences, hence translation-invariant.

use alloc::vec::Vec;

use crate::numkit::{Matrix, Mlp2Params};

/// Motions shorter than this are treated as zero direction.
pub const DIR_EPS: f64 = 1e-8;

/// Trajectory encoder configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SteConfig {
    /// Temporal embedding width (even).
    pub d_t: usize,
    /// MLP hidden width.
    pub hidden: usize,
    /// Output token width.
    pub d_m: usize,
    /// Apply ReLU to the MLP output (off keeps the token space signed).
    pub outer_relu: bool,
}

impl Default for SteConfig {
    fn default() -> Self {
        SteConfig {
            d_t: 8,
            hidden: 32,
            d_m: 16,
            outer_relu: false,
        }
    }
}

impl SteConfig {
    pub fn feature_dim(&self) -> usize {
        4 + self.d_t
    }

    pub fn init_params(&self, rng: &mut impl rand::Rng) -> Mlp2Params {
        Mlp2Params::init(self.feature_dim(), self.hidden, self.d_m, 1.0, rng)
    }
}

/// [dx, dy, dz, r] per consecutive position pair; n-1 rows for n positions.
pub fn displacement_features(history: &[[f64; 3]]) -> Matrix {
    let n = history.len().saturating_sub(1);
    let mut m = Matrix::zeros(n, 4);
    for i in 0..n {
        let a = &history[i];
        let b = &history[i + 1];
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let r = libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        let row = m.row_mut(i);
        if r > DIR_EPS {
            row[0] = d[0] / r;
            row[1] = d[1] / r;
            row[2] = d[2] / r;
        }
        row[3] = r;
    }
    m
}

/// Sinusoidal temporal embedding of a 1-based transition index:
/// τ[2m] = sin(i / 10000^{2m/d_t}), τ[2m+1] = cos(i / 10000^{2m/d_t}).
pub fn temporal_embedding(i: usize, d_t: usize) -> Vec<f64> {
    assert!(d_t % 2 == 0, "temporal embedding width must be even");
    let mut out = Vec::with_capacity(d_t);
    for m in 0..d_t / 2 {
        let denom = libm::pow(10000.0, 2.0 * m as f64 / d_t as f64);
        let x = i as f64 / denom;
        out.push(libm::sin(x));
        out.push(libm::cos(x));
    }
    out
}

/// Raw MLP input features: [direction ‖ range ‖ temporal embedding],
/// one row per transition. `index_offset` shifts the 1-based transition
/// indices (used when encoding a truncated history window).
pub fn trajectory_features(history: &[[f64; 3]], d_t: usize, index_offset: usize) -> Matrix {
    let disp = displacement_features(history);
    let n = disp.rows;
    let mut m = Matrix::zeros(n, 4 + d_t);
    for i in 0..n {
        m.row_mut(i)[..4].copy_from_slice(disp.row(i));
        let tau = temporal_embedding(index_offset + i + 1, d_t);
        m.row_mut(i)[4..].copy_from_slice(&tau);
    }
    m
}

/// Encode a position history into trajectory tokens (n-1 × d_m). Histories
/// with fewer than two positions produce an empty (0-row) token matrix.
pub fn encode_trajectory(
    history: &[[f64; 3]],
    params: &Mlp2Params,
    cfg: &SteConfig,
) -> Matrix {
    let feats = trajectory_features(history, cfg.d_t, 0);
    if feats.rows == 0 {
        return Matrix::zeros(0, cfg.d_m);
    }
    crate::numkit::mlp2(&feats, params, cfg.outer_relu).expect("ste feature width")
}
