//! Prompt-guided fusion and the trainable reasoner.
//!
//! All modalities are projected into a shared width d_u and concatenated
//! into one ordered prompt sequence:
//!
//! `[INSTR] [TRAJ] [SLOT_front..SLOT_bottom] [CUR_front..CUR_bottom] [READOUT]`
//!
//! Every token carries a learned segment tag. Trajectory tokens addition-
//! ally carry sinusoidal positions (their order matters); slot and current
//! tokens are position-free, so the readout is invariant to permutations
//! within those segments. The reasoner is a small pre-activation-free
//! residual transformer: L × (x += MHA(x); x += MLP(x)); the final row
//! (READOUT) feeds the waypoint and stop heads.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numkit::{Matrix, Mlp2Nodes, Mlp2Params, NodeId, Tape};
use crate::ste;

/// Prompt segment ids, in prompt order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Instr = 0,
    Traj = 1,
    SlotFront = 2,
    SlotRear = 3,
    SlotLeft = 4,
    SlotRight = 5,
    SlotBottom = 6,
    CurFront = 7,
    CurRear = 8,
    CurLeft = 9,
    CurRight = 10,
    CurBottom = 11,
    Readout = 12,
}

pub const N_SEGMENTS: usize = 13;

impl Segment {
    pub fn slot(view: usize) -> Segment {
        [
            Segment::SlotFront,
            Segment::SlotRear,
            Segment::SlotLeft,
            Segment::SlotRight,
            Segment::SlotBottom,
        ][view]
    }

    pub fn cur(view: usize) -> Segment {
        [
            Segment::CurFront,
            Segment::CurRear,
            Segment::CurLeft,
            Segment::CurRight,
            Segment::CurBottom,
        ][view]
    }

    pub fn name(self) -> &'static str {
        match self {
            Segment::Instr => "instruction",
            Segment::Traj => "trajectory",
            Segment::SlotFront => "slots/front",
            Segment::SlotRear => "slots/rear",
            Segment::SlotLeft => "slots/left",
            Segment::SlotRight => "slots/right",
            Segment::SlotBottom => "slots/bottom",
            Segment::CurFront => "current/front",
            Segment::CurRear => "current/rear",
            Segment::CurLeft => "current/left",
            Segment::CurRight => "current/right",
            Segment::CurBottom => "current/bottom",
            Segment::Readout => "readout",
        }
    }
}

/// Reasoner shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReasonerConfig {
    pub d_u: usize,
    pub layers: usize,
    pub heads: usize,
    pub mlp_hidden: usize,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            d_u: 32,
            layers: 2,
            heads: 2,
            mlp_hidden: 64,
        }
    }
}

impl ReasonerConfig {
    pub fn d_head(&self) -> usize {
        assert!(
            self.heads > 0 && self.d_u % self.heads == 0,
            "d_u must be divisible by heads"
        );
        self.d_u / self.heads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnHeadParams {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonerLayerParams {
    pub heads: Vec<AttnHeadParams>,
    /// Output projection d_u × (heads·d_head) and bias.
    pub wo: Matrix,
    pub bo: Matrix,
    pub mlp: Mlp2Params,
}

/// All trainable fusion/reasoner parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmParams {
    /// Instruction projection d_l → d_u (with bias).
    pub w_l: Matrix,
    pub b_l: Matrix,
    /// Slot projection d → d_u.
    pub p_v: Matrix,
    /// Trajectory projection d_m → d_u.
    pub p_m: Matrix,
    /// Learned segment tags, N_SEGMENTS × d_u.
    pub seg: Matrix,
    /// Learned readout token content, 1 × d_u.
    pub readout: Matrix,
    pub layers: Vec<ReasonerLayerParams>,
    /// Waypoint head 3 × d_u (+ bias); output scaled by `motion_scale`.
    pub w_way: Matrix,
    pub b_way: Matrix,
    /// Stop head 1 × d_u (+ bias), a logit.
    pub w_stop: Matrix,
    pub b_stop: Matrix,
}

impl PgmParams {
    pub fn init(
        cfg: &ReasonerConfig,
        d: usize,
        d_l: usize,
        d_m: usize,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let d_u = cfg.d_u;
        let dh = cfg.d_head();
        // Residual branches initialized small (scaled by 1/√(2L)) keeps the
        // stream near its input at init; there is no layer norm here.
        let res_scale = 1.0 / libm::sqrt(2.0 * cfg.layers as f64);
        let layers = (0..cfg.layers)
            .map(|_| ReasonerLayerParams {
                heads: (0..cfg.heads)
                    .map(|_| AttnHeadParams {
                        wq: Matrix::randn(dh, d_u, 1.0 / libm::sqrt(d_u as f64), rng),
                        wk: Matrix::randn(dh, d_u, 1.0 / libm::sqrt(d_u as f64), rng),
                        wv: Matrix::randn(dh, d_u, 1.0 / libm::sqrt(d_u as f64), rng),
                    })
                    .collect(),
                wo: Matrix::randn(d_u, d_u, res_scale / libm::sqrt(d_u as f64), rng),
                bo: Matrix::zeros(1, d_u),
                mlp: Mlp2Params::init(d_u, cfg.mlp_hidden, d_u, res_scale, rng),
            })
            .collect();
        PgmParams {
            w_l: Matrix::randn(d_u, d_l, 1.0 / libm::sqrt(d_l as f64), rng),
            b_l: Matrix::zeros(1, d_u),
            p_v: Matrix::randn(d_u, d, 1.0 / libm::sqrt(d as f64), rng),
            p_m: Matrix::randn(d_u, d_m, 1.0 / libm::sqrt(d_m as f64), rng),
            seg: Matrix::randn(N_SEGMENTS, d_u, 0.1, rng),
            readout: Matrix::randn(1, d_u, 0.1, rng),
            layers,
            w_way: Matrix::randn(3, d_u, 1.0 / libm::sqrt(d_u as f64), rng),
            b_way: Matrix::zeros(1, 3),
            w_stop: Matrix::randn(1, d_u, 1.0 / libm::sqrt(d_u as f64), rng),
            b_stop: Matrix::zeros(1, 1),
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        f(format!("{prefix}.w_l"), &self.w_l);
        f(format!("{prefix}.b_l"), &self.b_l);
        f(format!("{prefix}.p_v"), &self.p_v);
        f(format!("{prefix}.p_m"), &self.p_m);
        f(format!("{prefix}.seg"), &self.seg);
        f(format!("{prefix}.readout"), &self.readout);
        for (l, layer) in self.layers.iter().enumerate() {
            for (h, head) in layer.heads.iter().enumerate() {
                f(format!("{prefix}.layer{l}.head{h}.wq"), &head.wq);
                f(format!("{prefix}.layer{l}.head{h}.wk"), &head.wk);
                f(format!("{prefix}.layer{l}.head{h}.wv"), &head.wv);
            }
            f(format!("{prefix}.layer{l}.wo"), &layer.wo);
            f(format!("{prefix}.layer{l}.bo"), &layer.bo);
            layer.mlp.visit(&format!("{prefix}.layer{l}.mlp"), f);
        }
        f(format!("{prefix}.w_way"), &self.w_way);
        f(format!("{prefix}.b_way"), &self.b_way);
        f(format!("{prefix}.w_stop"), &self.w_stop);
        f(format!("{prefix}.b_stop"), &self.b_stop);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        f(format!("{prefix}.w_l"), &mut self.w_l);
        f(format!("{prefix}.b_l"), &mut self.b_l);
        f(format!("{prefix}.p_v"), &mut self.p_v);
        f(format!("{prefix}.p_m"), &mut self.p_m);
        f(format!("{prefix}.seg"), &mut self.seg);
        f(format!("{prefix}.readout"), &mut self.readout);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (h, head) in layer.heads.iter_mut().enumerate() {
                f(format!("{prefix}.layer{l}.head{h}.wq"), &mut head.wq);
                f(format!("{prefix}.layer{l}.head{h}.wk"), &mut head.wk);
                f(format!("{prefix}.layer{l}.head{h}.wv"), &mut head.wv);
            }
            f(format!("{prefix}.layer{l}.wo"), &mut layer.wo);
            f(format!("{prefix}.layer{l}.bo"), &mut layer.bo);
            layer.mlp.visit_mut(&format!("{prefix}.layer{l}.mlp"), f);
        }
        f(format!("{prefix}.w_way"), &mut self.w_way);
        f(format!("{prefix}.b_way"), &mut self.b_way);
        f(format!("{prefix}.w_stop"), &mut self.w_stop);
        f(format!("{prefix}.b_stop"), &mut self.b_stop);
    }
}

/// Tape handles mirroring `PgmParams`.
#[derive(Debug, Clone)]
pub struct PgmNodes {
    pub w_l: NodeId,
    pub b_l: NodeId,
    pub p_v: NodeId,
    pub p_m: NodeId,
    pub seg: NodeId,
    pub readout: NodeId,
    pub layers: Vec<LayerNodes>,
    pub w_way: NodeId,
    pub b_way: NodeId,
    pub w_stop: NodeId,
    pub b_stop: NodeId,
}

#[derive(Debug, Clone)]
pub struct LayerNodes {
    pub heads: Vec<(NodeId, NodeId, NodeId)>,
    pub wo: NodeId,
    pub bo: NodeId,
    pub mlp: Mlp2Nodes,
}

impl Tape {
    pub fn insert_pgm(&mut self, p: &PgmParams) -> PgmNodes {
        PgmNodes {
            w_l: self.input(p.w_l.clone()),
            b_l: self.input(p.b_l.clone()),
            p_v: self.input(p.p_v.clone()),
            p_m: self.input(p.p_m.clone()),
            seg: self.input(p.seg.clone()),
            readout: self.input(p.readout.clone()),
            layers: p
                .layers
                .iter()
                .map(|l| LayerNodes {
                    heads: l
                        .heads
                        .iter()
                        .map(|h| {
                            (
                                self.input(h.wq.clone()),
                                self.input(h.wk.clone()),
                                self.input(h.wv.clone()),
                            )
                        })
                        .collect(),
                    wo: self.input(l.wo.clone()),
                    bo: self.input(l.bo.clone()),
                    mlp: self.insert_mlp2(&l.mlp),
                })
                .collect(),
            w_way: self.input(p.w_way.clone()),
            b_way: self.input(p.b_way.clone()),
            w_stop: self.input(p.w_stop.clone()),
            b_stop: self.input(p.b_stop.clone()),
        }
    }
}

/// Row extents of each segment in an assembled prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptLayout {
    /// (segment, first row, row count) in prompt order; zero-row segments
    /// are omitted.
    pub spans: Vec<(Segment, usize, usize)>,
    pub total_rows: usize,
}

impl PromptLayout {
    pub fn rows_of(&self, seg: Segment) -> Option<(usize, usize)> {
        self.spans
            .iter()
            .find(|(s, _, _)| *s == seg)
            .map(|&(_, start, len)| (start, len))
    }

    pub fn readout_row(&self) -> usize {
        self.total_rows - 1
    }
}

/// Inputs to prompt assembly. Token matrices are tape nodes so gradients
/// flow back into the upstream encoders' trainable parts.
pub struct PromptInputs {
    /// 1×d_l instruction embedding (constant).
    pub instr: NodeId,
    /// Trajectory tokens n×d_m; `None` when STE is disabled or empty.
    pub traj: Option<NodeId>,
    /// Slot memories per view K×d; `None` when SHIC is disabled.
    pub slots: Option<[NodeId; 5]>,
    /// Current encoded view tokens per view, n_v×d.
    pub cur: [NodeId; 5],
}

/// Project all modalities to d_u, add segment tags (and sinusoidal
/// positions for trajectory tokens only), concatenate in the fixed prompt
/// order, and append the readout token.
pub fn assemble_prompt(
    tape: &mut Tape,
    inputs: &PromptInputs,
    p: &PgmNodes,
    cfg: &ReasonerConfig,
) -> (NodeId, PromptLayout) {
    let d_u = cfg.d_u;
    let mut parts: Vec<NodeId> = Vec::new();
    let mut spans: Vec<(Segment, usize, usize)> = Vec::new();
    let mut row = 0;

    let mut push = |tape: &mut Tape, parts: &mut Vec<NodeId>, node: NodeId, seg: Segment| {
        let tag = tape.slice_rows(p.seg, seg as usize, seg as usize + 1);
        let n = tape.value(node).rows;
        let tagged = tape.add_row(node, tag);
        parts.push(tagged);
        spans.push((seg, row, n));
        row += n;
    };

    // [INSTR]
    let instr_proj = tape.linear_t(inputs.instr, p.w_l, p.b_l);
    push(tape, &mut parts, instr_proj, Segment::Instr);

    // [TRAJ] with sinusoidal in-segment positions.
    if let Some(traj) = inputs.traj {
        let n = tape.value(traj).rows;
        if n > 0 {
            let proj = tape.matmul_nt(traj, p.p_m);
            let mut pos = Matrix::zeros(n, d_u);
            for i in 0..n {
                let e = ste::temporal_embedding(i + 1, d_u);
                pos.row_mut(i).copy_from_slice(&e);
            }
            let pos_node = tape.constant(pos);
            let placed = tape.add(proj, pos_node);
            push(tape, &mut parts, placed, Segment::Traj);
        }
    }

    // [SLOT_view] × 5, position-free.
    if let Some(slots) = &inputs.slots {
        for (v, &s) in slots.iter().enumerate() {
            let proj = tape.matmul_nt(s, p.p_v);
            push(tape, &mut parts, proj, Segment::slot(v));
        }
    }

    // [CUR_view] × 5, position-free.
    for (v, &c) in inputs.cur.iter().enumerate() {
        let proj = tape.matmul_nt(c, p.p_v);
        push(tape, &mut parts, proj, Segment::cur(v));
    }

    // [READOUT]
    push(tape, &mut parts, p.readout, Segment::Readout);

    let prompt = tape.concat_rows(&parts);
    (
        prompt,
        PromptLayout {
            spans,
            total_rows: row,
        },
    )
}

/// Residual multi-head attention + MLP stack (no layer norm by design).
pub fn reason(tape: &mut Tape, prompt: NodeId, p: &PgmNodes, cfg: &ReasonerConfig) -> NodeId {
    let dh = cfg.d_head();
    let mut x = prompt;
    for layer in &p.layers {
        let mut head_outs = Vec::with_capacity(layer.heads.len());
        for &(wq, wk, wv) in &layer.heads {
            let q = tape.matmul_nt(x, wq);
            let k = tape.matmul_nt(x, wk);
            let v = tape.matmul_nt(x, wv);
            let scores = tape.matmul_nt(q, k);
            let scaled = tape.scale(scores, 1.0 / libm::sqrt(dh as f64));
            let a = tape.softmax_rows(scaled);
            head_outs.push(tape.matmul(a, v));
        }
        let cat = if head_outs.len() == 1 {
            head_outs[0]
        } else {
            tape.concat_cols(&head_outs)
        };
        let proj = tape.linear_t(cat, layer.wo, layer.bo);
        x = tape.add(x, proj);
        let m = tape.mlp2(x, &layer.mlp, false);
        x = tape.add(x, m);
    }
    x
}

/// Waypoint (1×3, scaled by `motion_scale`) and stop logit (1×1) from the
/// readout row of the reasoned prompt.
pub fn heads(
    tape: &mut Tape,
    reasoned: NodeId,
    layout: &PromptLayout,
    p: &PgmNodes,
    motion_scale: f64,
) -> (NodeId, NodeId) {
    let r = layout.readout_row();
    let readout = tape.slice_rows(reasoned, r, r + 1);
    let way_raw = tape.linear_t(readout, p.w_way, p.b_way);
    let way = tape.scale(way_raw, motion_scale);
    let stop = tape.linear_t(readout, p.w_stop, p.b_stop);
    (way, stop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{fd_gradient, max_rel_err};
    use crate::rng::rng_for;

    fn small_cfg() -> ReasonerConfig {
        ReasonerConfig {
            d_u: 8,
            layers: 2,
            heads: 2,
            mlp_hidden: 12,
        }
    }

    struct Fixture {
        p: PgmParams,
        instr: Matrix,
        traj: Matrix,
        slots: [Matrix; 5],
        cur: [Matrix; 5],
    }

    fn fixture(seed: u64, d: usize, d_l: usize, d_m: usize) -> Fixture {
        let cfg = small_cfg();
        let mut rng = rng_for(seed, &[0x96]);
        let p = PgmParams::init(&cfg, d, d_l, d_m, &mut rng);
        let instr = Matrix::randn(1, d_l, 1.0, &mut rng);
        let traj = Matrix::randn(4, d_m, 1.0, &mut rng);
        let slots: [Matrix; 5] = core::array::from_fn(|_| Matrix::randn(3, d, 1.0, &mut rng));
        let cur: [Matrix; 5] = core::array::from_fn(|_| Matrix::randn(2, d, 1.0, &mut rng));
        Fixture {
            p,
            instr,
            traj,
            slots,
            cur,
        }
    }

    fn run(
        f: &Fixture,
        cfg: &ReasonerConfig,
        with_traj: bool,
        with_slots: bool,
        motion_scale: f64,
    ) -> (Matrix, Matrix, PromptLayout) {
        let mut tape = Tape::new();
        let pn = tape.insert_pgm(&f.p);
        let instr = tape.constant(f.instr.clone());
        let traj = with_traj.then(|| tape.constant(f.traj.clone()));
        let slots = with_slots.then(|| core::array::from_fn(|v| tape.constant(f.slots[v].clone())));
        let cur = core::array::from_fn(|v| tape.constant(f.cur[v].clone()));
        let inputs = PromptInputs {
            instr,
            traj,
            slots,
            cur,
        };
        let (prompt, layout) = assemble_prompt(&mut tape, &inputs, &pn, cfg);
        let reasoned = reason(&mut tape, prompt, &pn, cfg);
        let (way, stop) = heads(&mut tape, reasoned, &layout, &pn, motion_scale);
        (
            tape.value(way).clone(),
            tape.value(stop).clone(),
            layout,
        )
    }

    #[test]
    fn prompt_layout_follows_fixed_segment_order() {
        let cfg = small_cfg();
        let f = fixture(1, 6, 5, 7);
        let (way, stop, layout) = run(&f, &cfg, true, true, 15.0);
        assert_eq!(way.shape(), (1, 3));
        assert_eq!(stop.shape(), (1, 1));
        // 1 instr + 4 traj + 5×3 slots + 5×2 cur + 1 readout = 31 rows.
        assert_eq!(layout.total_rows, 31);
        let order: Vec<Segment> = layout.spans.iter().map(|s| s.0).collect();
        assert_eq!(order[0], Segment::Instr);
        assert_eq!(order[1], Segment::Traj);
        assert_eq!(order[2], Segment::SlotFront);
        assert_eq!(order[6], Segment::SlotBottom);
        assert_eq!(order[7], Segment::CurFront);
        assert_eq!(order[11], Segment::CurBottom);
        assert_eq!(*order.last().unwrap(), Segment::Readout);
        assert_eq!(layout.readout_row(), 30);
    }

    #[test]
    fn toggles_reduce_to_baseline_prompt() {
        let cfg = small_cfg();
        let f = fixture(2, 6, 5, 7);
        let (_, _, layout) = run(&f, &cfg, false, false, 15.0);
        // 1 instr + 5×2 cur + 1 readout.
        assert_eq!(layout.total_rows, 12);
        assert!(layout.rows_of(Segment::Traj).is_none());
        assert!(layout.rows_of(Segment::SlotFront).is_none());
        let (_, _, l_shic) = run(&f, &cfg, false, true, 15.0);
        assert!(l_shic.rows_of(Segment::SlotFront).is_some());
        assert!(l_shic.rows_of(Segment::Traj).is_none());
    }

    #[test]
    fn outputs_are_deterministic() {
        let cfg = small_cfg();
        let f = fixture(3, 6, 5, 7);
        let (w1, s1, _) = run(&f, &cfg, true, true, 15.0);
        let (w2, s2, _) = run(&f, &cfg, true, true, 15.0);
        assert_eq!(w1, w2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn readout_is_invariant_to_slot_permutations() {
        let cfg = small_cfg();
        let mut f = fixture(4, 6, 5, 7);
        let (w1, s1, _) = run(&f, &cfg, true, true, 15.0);
        // Rotate the rows of every slot memory.
        for m in f.slots.iter_mut() {
            let mut rotated = Matrix::zeros(m.rows, m.cols);
            for r in 0..m.rows {
                rotated
                    .row_mut((r + 1) % m.rows)
                    .copy_from_slice(m.row(r));
            }
            *m = rotated;
        }
        let (w2, s2, _) = run(&f, &cfg, true, true, 15.0);
        for (a, b) in w1.data.iter().zip(w2.data.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!((s1.data[0] - s2.data[0]).abs() < 1e-9);
    }

    #[test]
    fn trajectory_order_matters() {
        let cfg = small_cfg();
        let mut f = fixture(5, 6, 5, 7);
        let (w1, _, _) = run(&f, &cfg, true, true, 15.0);
        // Swap two trajectory tokens; positions should make this visible.
        let r0 = f.traj.row(0).to_vec();
        let r1 = f.traj.row(1).to_vec();
        f.traj.row_mut(0).copy_from_slice(&r1);
        f.traj.row_mut(1).copy_from_slice(&r0);
        let (w2, _, _) = run(&f, &cfg, true, true, 15.0);
        let diff: f64 = w1
            .data
            .iter()
            .zip(w2.data.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-9, "trajectory permutation was invisible");
    }

    #[test]
    fn motion_scale_scales_waypoint_head_linearly() {
        let cfg = small_cfg();
        let f = fixture(6, 6, 5, 7);
        let (w1, _, _) = run(&f, &cfg, true, true, 1.0);
        let (w15, _, _) = run(&f, &cfg, true, true, 15.0);
        for (a, b) in w1.data.iter().zip(w15.data.iter()) {
            assert!((15.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_reach_representative_tensors() {
        let cfg = small_cfg();
        let f = fixture(7, 6, 5, 7);
        let target = Matrix::row_vec(alloc::vec![1.0, -2.0, 0.5]);

        let loss_of = |p: &PgmParams| -> f64 {
            let mut tape = Tape::new();
            let pn = tape.insert_pgm(p);
            let instr = tape.constant(f.instr.clone());
            let traj = tape.constant(f.traj.clone());
            let slots = core::array::from_fn(|v| tape.constant(f.slots[v].clone()));
            let cur = core::array::from_fn(|v| tape.constant(f.cur[v].clone()));
            let inputs = PromptInputs {
                instr,
                traj: Some(traj),
                slots: Some(slots),
                cur,
            };
            let (prompt, layout) = assemble_prompt(&mut tape, &inputs, &pn, &cfg);
            let reasoned = reason(&mut tape, prompt, &pn, &cfg);
            let (way, stop) = heads(&mut tape, reasoned, &layout, &pn, 15.0);
            let tgt = tape.constant(target.clone());
            let mse = tape.mean_sq_diff(way, tgt);
            let stop_tgt = tape.constant(Matrix::row_vec(alloc::vec![1.0]));
            let bce = tape.bce_with_logits(stop, stop_tgt);
            let bce_s = tape.scale(bce, 0.1);
            let loss = tape.add(mse, bce_s);
            tape.value(loss).data[0]
        };

        // Analytic gradients in one pass.
        let mut tape = Tape::new();
        let pn = tape.insert_pgm(&f.p);
        let instr = tape.constant(f.instr.clone());
        let traj = tape.constant(f.traj.clone());
        let slots = core::array::from_fn(|v| tape.constant(f.slots[v].clone()));
        let cur = core::array::from_fn(|v| tape.constant(f.cur[v].clone()));
        let inputs = PromptInputs {
            instr,
            traj: Some(traj),
            slots: Some(slots),
            cur,
        };
        let (prompt, layout) = assemble_prompt(&mut tape, &inputs, &pn, &cfg);
        let reasoned = reason(&mut tape, prompt, &pn, &cfg);
        let (way, stop) = heads(&mut tape, reasoned, &layout, &pn, 15.0);
        let tgt = tape.constant(target.clone());
        let mse = tape.mean_sq_diff(way, tgt);
        let stop_tgt = tape.constant(Matrix::row_vec(alloc::vec![1.0]));
        let bce = tape.bce_with_logits(stop, stop_tgt);
        let bce_s = tape.scale(bce, 0.1);
        let loss = tape.add(mse, bce_s);
        let grads = tape.backward(loss);

        type Field = (
            &'static str,
            fn(&PgmParams) -> &Matrix,
            fn(&mut PgmParams) -> &mut Matrix,
            fn(&PgmNodes) -> NodeId,
        );
        let fields: [Field; 6] = [
            ("w_l", |p| &p.w_l, |p| &mut p.w_l, |n| n.w_l),
            ("p_v", |p| &p.p_v, |p| &mut p.p_v, |n| n.p_v),
            ("seg", |p| &p.seg, |p| &mut p.seg, |n| n.seg),
            ("head0.wq", |p| &p.layers[0].heads[0].wq, |p| &mut p.layers[0].heads[0].wq, |n| n.layers[0].heads[0].0),
            ("layer1.mlp.w1", |p| &p.layers[1].mlp.w1, |p| &mut p.layers[1].mlp.w1, |n| n.layers[1].mlp.w1),
            ("w_way", |p| &p.w_way, |p| &mut p.w_way, |n| n.w_way),
        ];
        for (name, get, get_mut, node) in fields {
            let analytic = grads.get(node(&pn)).unwrap().clone();
            let fd = fd_gradient(
                |probe| {
                    let mut pp = f.p.clone();
                    *get_mut(&mut pp) = probe.clone();
                    loss_of(&pp)
                },
                get(&f.p),
                1e-5,
            )
            .unwrap();
            let err = max_rel_err(&analytic, &fd);
            assert!(err < 1e-4, "{name}: rel err {err}");
        }
    }
}
