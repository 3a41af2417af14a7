//! Slot-based history compression.
//!
//! Each camera view keeps a fixed set of K slot vectors that fold in one
//! observation per step: slots attend over the step's tokens (scaled
//! dot-product, softmax over tokens) and the attended readout drives a
//! slot-wise GRU update with shared parameters. Memory cost is O(K·d)
//! regardless of episode length. Views fold independently; parameter sets
//! are shared across views by default, with an optional per-view mode.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numkit::{GruNodes, GruParams, Matrix, NodeId, Tape};

/// Trainable parameters of one slot compressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotParams {
    /// Learnable initial slots, K×d.
    pub phi: Matrix,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub gru: GruParams,
}

impl SlotParams {
    pub fn init(k: usize, d: usize, rng: &mut impl rand::Rng) -> Self {
        let s = 1.0 / libm::sqrt(d as f64);
        SlotParams {
            phi: Matrix::randn(k, d, 0.5, rng),
            wq: Matrix::randn(d, d, s, rng),
            wk: Matrix::randn(d, d, s, rng),
            wv: Matrix::randn(d, d, s, rng),
            gru: GruParams::init(d, d, rng),
        }
    }

    pub fn zeros(k: usize, d: usize) -> Self {
        SlotParams {
            phi: Matrix::zeros(k, d),
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            gru: GruParams::zeros(d, d),
        }
    }

    pub fn slots(&self) -> usize {
        self.phi.rows
    }

    pub fn width(&self) -> usize {
        self.phi.cols
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        f(format!("{prefix}.phi"), &self.phi);
        f(format!("{prefix}.wq"), &self.wq);
        f(format!("{prefix}.wk"), &self.wk);
        f(format!("{prefix}.wv"), &self.wv);
        self.gru.visit(&format!("{prefix}.gru"), f);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        f(format!("{prefix}.phi"), &mut self.phi);
        f(format!("{prefix}.wq"), &mut self.wq);
        f(format!("{prefix}.wk"), &mut self.wk);
        f(format!("{prefix}.wv"), &mut self.wv);
        self.gru.visit_mut(&format!("{prefix}.gru"), f);
    }
}

/// Compressor parameters for all five views: one shared set (default) or
/// five independent sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShicParams {
    pub per_view: bool,
    /// Length 1 (shared) or 5 (per-view).
    pub sets: Vec<SlotParams>,
}

impl ShicParams {
    pub fn init(k: usize, d: usize, per_view: bool, rng: &mut impl rand::Rng) -> Self {
        let n = if per_view { 5 } else { 1 };
        ShicParams {
            per_view,
            sets: (0..n).map(|_| SlotParams::init(k, d, rng)).collect(),
        }
    }

    pub fn for_view(&self, view: usize) -> &SlotParams {
        if self.per_view {
            &self.sets[view]
        } else {
            &self.sets[0]
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        if self.per_view {
            for (v, set) in self.sets.iter().enumerate() {
                set.visit(&format!("{prefix}.view{v}"), f);
            }
        } else {
            self.sets[0].visit(&format!("{prefix}.shared"), f);
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        if self.per_view {
            for (v, set) in self.sets.iter_mut().enumerate() {
                set.visit_mut(&format!("{prefix}.view{v}"), f);
            }
        } else {
            self.sets[0].visit_mut(&format!("{prefix}.shared"), f);
        }
    }
}

/// Tape handles for one slot parameter set.
#[derive(Debug, Clone, Copy)]
pub struct SlotNodes {
    pub phi: NodeId,
    pub wq: NodeId,
    pub wk: NodeId,
    pub wv: NodeId,
    pub gru: GruNodes,
}

impl Tape {
    pub fn insert_slot_params(&mut self, p: &SlotParams) -> SlotNodes {
        SlotNodes {
            phi: self.input(p.phi.clone()),
            wq: self.input(p.wq.clone()),
            wk: self.input(p.wk.clone()),
            wv: self.input(p.wv.clone()),
            gru: self.insert_gru(&p.gru),
        }
    }

    /// Slot attention over one step's tokens: α = softmax((S·Wqᵀ)(Z·Wkᵀ)ᵀ/√d)
    /// rows-over-tokens, readout ŝ = α·(Z·Wvᵀ). Returns (α, ŝ).
    pub fn slot_attend(&mut self, slots: NodeId, tokens: NodeId, p: &SlotNodes) -> (NodeId, NodeId) {
        let d = self.value(slots).cols;
        let q = self.matmul_nt(slots, p.wq);
        let k = self.matmul_nt(tokens, p.wk);
        let v = self.matmul_nt(tokens, p.wv);
        let scores = self.matmul_nt(q, k);
        let scaled = self.scale(scores, 1.0 / libm::sqrt(d as f64));
        let alpha = self.softmax_rows(scaled);
        let shat = self.matmul(alpha, v);
        (alpha, shat)
    }

    /// Fold one observation into the slot state (attention + GRU update).
    pub fn slot_fold(&mut self, slots: NodeId, tokens: NodeId, p: &SlotNodes) -> NodeId {
        let (_, shat) = self.slot_attend(slots, tokens, p);
        self.gru_step(shat, slots, &p.gru)
    }
}

/// Plain (non-tape) slot attention; returns (α, ŝ).
pub fn attend(slots: &Matrix, tokens: &Matrix, p: &SlotParams) -> (Matrix, Matrix) {
    let mut tape = Tape::new();
    let s = tape.constant(slots.clone());
    let z = tape.constant(tokens.clone());
    let pn = tape.insert_slot_params(p);
    let (a, shat) = tape.slot_attend(s, z, &pn);
    (tape.value(a).clone(), tape.value(shat).clone())
}

/// Fold a full history of per-view encoded token matrices into five slot
/// memories. `streams[t][v]` is the n×d token matrix of view v at step t.
/// Zero steps returns the learnable initial slots Φ unchanged. State size
/// is K×d per view for any history length.
pub fn compress_history(streams: &[[Matrix; 5]], params: &ShicParams) -> [Matrix; 5] {
    core::array::from_fn(|view| {
        let p = params.for_view(view);
        let mut tape = Tape::new();
        let pn = tape.insert_slot_params(p);
        let mut slots = pn.phi;
        for step in streams {
            let z = tape.constant(step[view].clone());
            slots = tape.slot_fold(slots, z, &pn);
        }
        tape.value(slots).clone()
    })
}
