//! The assembled navigation model: configuration, the trainable parameter
//! registry, and a per-episode runtime used by both training and
//! evaluation.
//!
//! A runtime owns one gradient tape per episode. Each `act` call encodes
//! the current observation, assembles the prompt from the instruction,
//! trajectory tokens, slot memories and current views, runs the reasoner,
//! and returns waypoint/stop nodes plus their values. `advance` then folds
//! the observation into the slot state and records the executed pose, so
//! the next step sees it as history. Calling `backward` on a loss node
//! built from the step outputs yields gradients for every registered
//! parameter of the episode in one sweep.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::encoders::{
    encode_instruction, encode_observation, EncodeError, FrozenEncoders,
};
use crate::numkit::{Gradients, Matrix, Mlp2Nodes, Mlp2Params, NodeId, Tape};
use crate::pgm::{
    assemble_prompt, heads, reason, PgmNodes, PgmParams, PromptInputs, PromptLayout,
    ReasonerConfig,
};
use crate::rng::rng_for;
use crate::shic::{ShicParams, SlotNodes};
use crate::ste::{trajectory_features, SteConfig};
use crate::worldsim::{Observation, Pose, Vocab};

const INIT_SHIC_TAG: u64 = 0x51c0;
const INIT_STE_TAG: u64 = 0x57e0;
const INIT_PGM_TAG: u64 = 0x96f0;

fn default_d() -> usize {
    16
}
fn default_slots() -> usize {
    32
}
fn default_motion_scale() -> f64 {
    15.0
}
fn default_obs_scale() -> f64 {
    150.0
}
fn default_max_steps() -> usize {
    50
}
fn default_stop_threshold() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_encoder_seed() -> u64 {
    11
}
fn default_init_seed() -> u64 {
    12
}

/// Full model shape and behavior switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Shared width of visual tokens and slot memories.
    #[serde(default = "default_d")]
    pub d: usize,
    /// Instruction embedding width.
    #[serde(default = "default_d")]
    pub d_l: usize,
    /// Slot count K per view.
    #[serde(default = "default_slots")]
    pub slots: usize,
    /// Independent compressor parameters per view (default: shared).
    #[serde(default)]
    pub per_view_shic: bool,
    #[serde(default)]
    pub ste: SteConfig,
    #[serde(default)]
    pub reasoner: ReasonerConfig,
    /// Train/assemble with the history compressor.
    #[serde(default = "default_true")]
    pub use_shic: bool,
    /// Train/assemble with trajectory tokens.
    #[serde(default = "default_true")]
    pub use_ste: bool,
    /// Keep only the most recent N observations (and N trajectory
    /// transitions); `None` keeps everything.
    #[serde(default)]
    pub history_limit: Option<usize>,
    /// Scale applied to the raw waypoint head; the head then predicts
    /// displacements in units of a typical step.
    #[serde(default = "default_motion_scale")]
    pub motion_scale: f64,
    /// Distance normalization folded into the frozen view encoder.
    #[serde(default = "default_obs_scale")]
    pub obs_scale: f64,
    #[serde(default = "default_encoder_seed")]
    pub encoder_seed: u64,
    #[serde(default = "default_init_seed")]
    pub init_seed: u64,
    /// Rollout step budget.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Stop when σ(stop logit) exceeds this.
    #[serde(default = "default_stop_threshold")]
    pub stop_threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: default_d(),
            d_l: default_d(),
            slots: default_slots(),
            per_view_shic: false,
            ste: SteConfig::default(),
            reasoner: ReasonerConfig::default(),
            use_shic: true,
            use_ste: true,
            history_limit: None,
            motion_scale: default_motion_scale(),
            obs_scale: default_obs_scale(),
            encoder_seed: default_encoder_seed(),
            init_seed: default_init_seed(),
            max_steps: default_max_steps(),
            stop_threshold: default_stop_threshold(),
        }
    }
}

/// All trainable parameters. Components absent from the architecture
/// (`use_shic`/`use_ste` false at init) are `None`, which keeps the
/// registry, checkpoints, and optimizer state in sync by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub shic: Option<ShicParams>,
    pub ste: Option<Mlp2Params>,
    pub pgm: PgmParams,
}

impl ModelParams {
    /// Deterministic init. Each component draws from its own derived
    /// stream, so toggling one never shifts another's values.
    pub fn init(cfg: &ModelConfig) -> Self {
        let shic = cfg.use_shic.then(|| {
            let mut rng = rng_for(cfg.init_seed, &[INIT_SHIC_TAG]);
            ShicParams::init(cfg.slots, cfg.d, cfg.per_view_shic, &mut rng)
        });
        let ste = cfg.use_ste.then(|| {
            let mut rng = rng_for(cfg.init_seed, &[INIT_STE_TAG]);
            cfg.ste.init_params(&mut rng)
        });
        let mut rng = rng_for(cfg.init_seed, &[INIT_PGM_TAG]);
        let pgm = PgmParams::init(&cfg.reasoner, cfg.d, cfg.d_l, cfg.ste.d_m, &mut rng);
        ModelParams { shic, ste, pgm }
    }

    /// Fixed-order traversal; the canonical registry order for gradient
    /// accumulation and optimizer state.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, &'a Matrix)) {
        if let Some(shic) = &self.shic {
            shic.visit("shic", f);
        }
        if let Some(ste) = &self.ste {
            ste.visit("ste", f);
        }
        self.pgm.visit("pgm", f);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut Matrix)) {
        if let Some(shic) = &mut self.shic {
            shic.visit_mut("shic", f);
        }
        if let Some(ste) = &mut self.ste {
            ste.visit_mut("ste", f);
        }
        self.pgm.visit_mut("pgm", f);
    }

    /// Registry as (name, tensor) pairs in canonical order.
    pub fn named(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        self.visit(&mut |name, m| out.push((name, m)));
        out
    }

    pub fn n_scalars(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, m| n += m.data.len());
        n
    }

    /// Insert every tensor into `tape` as a differentiable input, in
    /// registry order (mirrors `visit`).
    pub fn insert(&self, tape: &mut Tape) -> ParamNodes {
        ParamNodes {
            shic: self
                .shic
                .as_ref()
                .map(|s| s.sets.iter().map(|set| tape.insert_slot_params(set)).collect()),
            ste: self.ste.as_ref().map(|p| tape.insert_mlp2(p)),
            pgm: tape.insert_pgm(&self.pgm),
        }
    }
}

/// Tape handles for `ModelParams`, in the same structure.
#[derive(Debug, Clone)]
pub struct ParamNodes {
    pub shic: Option<Vec<SlotNodes>>,
    pub ste: Option<Mlp2Nodes>,
    pub pgm: PgmNodes,
}

impl ParamNodes {
    fn flatten_slot(out: &mut Vec<NodeId>, s: &SlotNodes) {
        out.extend([s.phi, s.wq, s.wk, s.wv]);
        let g = &s.gru;
        out.extend([g.wz, g.uz, g.bz, g.wr, g.ur, g.br, g.wh, g.uh, g.bh]);
    }

    /// Node ids in canonical registry order (mirrors `ModelParams::visit`).
    pub fn flatten(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        if let Some(sets) = &self.shic {
            for s in sets {
                Self::flatten_slot(&mut out, s);
            }
        }
        if let Some(m) = &self.ste {
            out.extend([m.w1, m.b1, m.w2, m.b2]);
        }
        let p = &self.pgm;
        out.extend([p.w_l, p.b_l, p.p_v, p.p_m, p.seg, p.readout]);
        for layer in &p.layers {
            for &(wq, wk, wv) in &layer.heads {
                out.extend([wq, wk, wv]);
            }
            out.extend([layer.wo, layer.bo]);
            let m = &layer.mlp;
            out.extend([m.w1, m.b1, m.w2, m.b2]);
        }
        out.extend([p.w_way, p.b_way, p.w_stop, p.b_stop]);
        out
    }
}

/// Per-parameter gradients in registry order; parameters a loss never
/// touched (e.g. ablated segments) get zeros.
pub fn gradients_in_order(
    grads: &Gradients,
    nodes: &ParamNodes,
    params: &ModelParams,
) -> Vec<Matrix> {
    let flat = nodes.flatten();
    let named = params.named();
    debug_assert_eq!(flat.len(), named.len());
    flat.iter()
        .zip(named.iter())
        .map(|(&id, (_, m))| match grads.get(id) {
            Some(g) => g.clone(),
            None => Matrix::zeros(m.rows, m.cols),
        })
        .collect()
}

/// Immutable bundle of everything needed to run episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NavModel {
    pub cfg: ModelConfig,
    pub params: ModelParams,
    pub enc: FrozenEncoders,
    pub vocab: Vocab,
}

impl NavModel {
    pub fn new(cfg: ModelConfig, vocab: Vocab) -> Self {
        let params = ModelParams::init(&cfg);
        let enc = FrozenEncoders::new(cfg.d, cfg.d_l, &vocab, cfg.obs_scale, cfg.encoder_seed);
        NavModel {
            cfg,
            params,
            enc,
            vocab,
        }
    }

    pub fn from_parts(cfg: ModelConfig, params: ModelParams, vocab: Vocab) -> Self {
        let enc = FrozenEncoders::new(cfg.d, cfg.d_l, &vocab, cfg.obs_scale, cfg.encoder_seed);
        NavModel {
            cfg,
            params,
            enc,
            vocab,
        }
    }
}

/// Evaluation-time structural ablations. Unlike the `use_*` config flags
/// these do not change which parameters exist; they only drop segments
/// from the assembled prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    pub disable_shic: bool,
    pub disable_ste: bool,
}

/// Output of one reasoning step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// 1×3 predicted displacement node (already motion-scaled).
    pub way: NodeId,
    /// 1×1 stop logit node.
    pub stop: NodeId,
    pub way_value: [f64; 3],
    pub stop_prob: f64,
    pub layout: PromptLayout,
    /// Slot memory values visible to this step (for inspection/tests).
    pub slot_values: Option<[Matrix; 5]>,
    /// Trajectory tokens visible to this step.
    pub traj_rows: usize,
}

/// One episode's worth of model state on a single gradient tape.
pub struct EpisodeRuntime<'m> {
    model: &'m NavModel,
    pub tape: Tape,
    nodes: ParamNodes,
    instr: NodeId,
    use_shic: bool,
    use_ste: bool,
    /// Current folded slot state per view (unlimited-history mode).
    slot_state: Option<[NodeId; 5]>,
    /// Recent encoded observations (history-limited mode).
    window: Vec<[Matrix; 5]>,
    /// Encoded observation awaiting `advance`.
    pending: Option<[Matrix; 5]>,
    positions: Vec<[f64; 3]>,
    pose: Pose,
    steps_done: usize,
}

impl<'m> EpisodeRuntime<'m> {
    pub fn new(
        model: &'m NavModel,
        instruction: &str,
        start: Pose,
        ablation: Ablation,
    ) -> Result<Self, EncodeError> {
        let instr_emb = encode_instruction(instruction, &model.vocab, &model.enc)?;
        let mut tape = Tape::new();
        let nodes = model.params.insert(&mut tape);
        let instr = tape.constant(instr_emb);
        let use_shic = model.cfg.use_shic && nodes.shic.is_some() && !ablation.disable_shic;
        let use_ste = model.cfg.use_ste && nodes.ste.is_some() && !ablation.disable_ste;
        let slot_state = (use_shic && model.cfg.history_limit.is_none()).then(|| {
            core::array::from_fn(|v| slot_nodes_for(&nodes, v).phi)
        });
        Ok(EpisodeRuntime {
            model,
            tape,
            nodes,
            instr,
            use_shic,
            use_ste,
            slot_state,
            window: Vec::new(),
            pending: None,
            positions: alloc::vec![start.position],
            pose: start,
            steps_done: 0,
        })
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// Reason over the current observation; does not move the agent.
    pub fn act(&mut self, obs: &Observation) -> StepOutput {
        let cfg = &self.model.cfg;
        let enc_views = encode_observation(obs, &self.model.enc);
        let cur: [NodeId; 5] =
            core::array::from_fn(|v| self.tape.constant(enc_views[v].clone()));

        let slots = if self.use_shic {
            Some(match cfg.history_limit {
                None => self.slot_state.expect("slot state present"),
                Some(_) => {
                    // Refold the retained window from the initial slots.
                    core::array::from_fn(|v| {
                        let pn = *slot_nodes_for(&self.nodes, v);
                        let mut s = pn.phi;
                        for frame in &self.window {
                            let z = self.tape.constant(frame[v].clone());
                            s = self.tape.slot_fold(s, z, &pn);
                        }
                        s
                    })
                }
            })
        } else {
            None
        };

        let traj = if self.use_ste {
            let n = self.positions.len();
            let trans = n - 1;
            let used = match cfg.history_limit {
                None => trans,
                Some(h) => trans.min(h),
            };
            if used == 0 {
                None
            } else {
                let slice = &self.positions[n - 1 - used..];
                let feats = trajectory_features(slice, cfg.ste.d_t, trans - used);
                let f = self.tape.constant(feats);
                let mn = self.nodes.ste.as_ref().expect("ste params present");
                Some(self.tape.mlp2(f, mn, cfg.ste.outer_relu))
            }
        } else {
            None
        };

        let traj_rows = traj.map_or(0, |t| self.tape.value(t).rows);
        let slot_values =
            slots.map(|s| core::array::from_fn(|v| self.tape.value(s[v]).clone()));

        let inputs = PromptInputs {
            instr: self.instr,
            traj,
            slots,
            cur,
        };
        let (prompt, layout) =
            assemble_prompt(&mut self.tape, &inputs, &self.nodes.pgm, &cfg.reasoner);
        let reasoned = reason(&mut self.tape, prompt, &self.nodes.pgm, &cfg.reasoner);
        let (way, stop) = heads(
            &mut self.tape,
            reasoned,
            &layout,
            &self.nodes.pgm,
            cfg.motion_scale,
        );

        let wv = self.tape.value(way);
        let way_value = [wv.data[0], wv.data[1], wv.data[2]];
        let logit = self.tape.value(stop).data[0];
        let stop_prob = 1.0 / (1.0 + libm::exp(-logit));
        self.pending = Some(enc_views);
        StepOutput {
            way,
            stop,
            way_value,
            stop_prob,
            layout,
            slot_values,
            traj_rows,
        }
    }

    /// Record the executed pose and absorb the pending observation into
    /// history. `new_pose` is wherever the world actually put the agent.
    pub fn advance(&mut self, new_pose: Pose) {
        let enc_views = self.pending.take().expect("advance without act");
        if self.use_shic {
            match self.model.cfg.history_limit {
                None => {
                    let st = self.slot_state.expect("slot state present");
                    self.slot_state = Some(core::array::from_fn(|v| {
                        let pn = *slot_nodes_for(&self.nodes, v);
                        let z = self.tape.constant(enc_views[v].clone());
                        self.tape.slot_fold(st[v], z, &pn)
                    }));
                }
                Some(h) => {
                    self.window.push(enc_views);
                    if self.window.len() > h {
                        self.window.remove(0);
                    }
                }
            }
        }
        self.pose = new_pose;
        self.positions.push(new_pose.position);
        self.steps_done += 1;
    }

    /// Gradients for every registered parameter, in registry order.
    pub fn backward(&mut self, loss: NodeId) -> Vec<Matrix> {
        let grads = self.tape.backward(loss);
        gradients_in_order(&grads, &self.nodes, &self.model.params)
    }
}

fn slot_nodes_for<'a>(nodes: &'a ParamNodes, view: usize) -> &'a SlotNodes {
    let sets = nodes.shic.as_ref().expect("shic nodes present");
    if sets.len() == 5 {
        &sets[view]
    } else {
        &sets[0]
    }
}

/// Combine per-step heads into the episode loss
/// `mean-squared waypoint error + λ · stop BCE`.
/// Returns (total, waypoint-MSE node, stop-BCE node).
pub fn assemble_episode_loss(
    tape: &mut Tape,
    ways: &[NodeId],
    stops: &[NodeId],
    way_targets: &Matrix,
    stop_targets: &Matrix,
    lambda: f64,
) -> (NodeId, NodeId, NodeId) {
    assert!(!ways.is_empty(), "episode has no steps");
    assert_eq!(way_targets.shape(), (ways.len(), 3));
    assert_eq!(stop_targets.shape(), (1, stops.len()));
    let way_cat = tape.concat_rows(ways);
    let wt = tape.constant(way_targets.clone());
    let mse = tape.mean_sq_diff(way_cat, wt);
    let stop_cat = tape.concat_cols(stops);
    let st = tape.constant(stop_targets.clone());
    let bce = tape.bce_with_logits(stop_cat, st);
    let bce_scaled = tape.scale(bce, lambda);
    let total = tape.add(mse, bce_scaled);
    (total, mse, bce)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgm::Segment;
    use crate::shic::compress_history;
    use crate::worldsim::{self, Difficulty, WorldConfig};

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            d: 8,
            d_l: 8,
            slots: 4,
            ste: SteConfig {
                d_t: 4,
                hidden: 8,
                d_m: 6,
                outer_relu: false,
            },
            reasoner: ReasonerConfig {
                d_u: 8,
                layers: 1,
                heads: 2,
                mlp_hidden: 8,
            },
            ..ModelConfig::default()
        }
    }

    fn fixture() -> (WorldConfig, worldsim::Scene, worldsim::Episode) {
        let wc = WorldConfig::default();
        let scene = worldsim::generate_scene(&wc, 42).unwrap();
        let ep = worldsim::generate_episode(&scene, &wc, 7, Difficulty::Easy).unwrap();
        (wc, scene, ep)
    }

    /// Teacher-forced rollout for `n` steps; returns per-step outputs.
    fn roll<'m>(
        model: &'m NavModel,
        wc: &WorldConfig,
        scene: &worldsim::Scene,
        ep: &worldsim::Episode,
        n: usize,
        ablation: Ablation,
    ) -> (Vec<StepOutput>, EpisodeRuntime<'m>) {
        let mut rt = EpisodeRuntime::new(model, &ep.instruction, ep.start_pose, ablation).unwrap();
        let mut outs = Vec::new();
        for t in 0..n.min(ep.waypoints.len()) {
            let obs = worldsim::observe(scene, &rt.pose(), wc);
            outs.push(rt.act(&obs));
            let next = worldsim::step(&rt.pose(), ep.waypoints[t], wc);
            rt.advance(next);
        }
        (outs, rt)
    }

    #[test]
    fn registry_insert_matches_visit_order() {
        let cfg = small_cfg();
        let params = ModelParams::init(&cfg);
        let mut tape = Tape::new();
        let nodes = params.insert(&mut tape);
        let flat = nodes.flatten();
        let named = params.named();
        assert_eq!(flat.len(), named.len());
        for (&id, (name, m)) in flat.iter().zip(named.iter()) {
            assert_eq!(tape.value(id), *m, "registry misalignment at {name}");
        }
        // Names must be unique.
        let mut names: Vec<&String> = named.iter().map(|(n, _)| n).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), named.len());
    }

    #[test]
    fn registry_shrinks_with_disabled_components() {
        let full = ModelParams::init(&small_cfg());
        let cfg_bs = ModelConfig {
            use_shic: false,
            use_ste: false,
            ..small_cfg()
        };
        let bs = ModelParams::init(&cfg_bs);
        assert!(bs.shic.is_none() && bs.ste.is_none());
        assert!(bs.n_scalars() < full.n_scalars());
        // Shared component draws are independent of the toggles.
        assert_eq!(bs.pgm, full.pgm);
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = small_cfg();
        assert_eq!(ModelParams::init(&cfg), ModelParams::init(&cfg));
        let other = ModelConfig {
            init_seed: 99,
            ..cfg
        };
        assert_ne!(ModelParams::init(&other), ModelParams::init(&small_cfg()));
    }

    #[test]
    fn rollout_is_finite_and_reproducible() {
        let (wc, scene, ep) = fixture();
        let model = NavModel::new(small_cfg(), wc.vocab.clone());
        let (a, _) = roll(&model, &wc, &scene, &ep, 4, Ablation::default());
        let (b, _) = roll(&model, &wc, &scene, &ep, 4, Ablation::default());
        assert_eq!(a.len(), 4);
        for (oa, ob) in a.iter().zip(b.iter()) {
            assert_eq!(oa.way_value, ob.way_value);
            assert!(oa.way_value.iter().all(|v| v.is_finite()));
            assert!(oa.stop_prob.is_finite() && oa.stop_prob > 0.0 && oa.stop_prob < 1.0);
            assert_eq!(oa.stop_prob, ob.stop_prob);
        }
        // Trajectory segment grows with executed steps.
        assert_eq!(a[0].traj_rows, 0);
        assert_eq!(a[1].traj_rows, 1);
        assert_eq!(a[3].traj_rows, 3);
    }

    #[test]
    fn slot_state_matches_batch_compression_oracle() {
        let (wc, scene, ep) = fixture();
        let model = NavModel::new(small_cfg(), wc.vocab.clone());
        let (outs, rt) = roll(&model, &wc, &scene, &ep, 5, Ablation::default());
        // Recompute the stream the runtime saw: observations at poses
        // 0..4, the slots visible at step 4 fold frames 0..3.
        let mut pose = ep.start_pose;
        let mut frames = Vec::new();
        for t in 0..4 {
            let obs = worldsim::observe(&scene, &pose, &wc);
            frames.push(encode_observation(&obs, &model.enc));
            pose = worldsim::step(&pose, ep.waypoints[t], &wc);
        }
        let oracle = compress_history(&frames, model.params.shic.as_ref().unwrap());
        let got = outs[4].slot_values.as_ref().unwrap();
        for v in 0..5 {
            assert_eq!(got[v], oracle[v], "view {v} diverged from batch fold");
        }
        drop(rt);
    }

    #[test]
    fn history_limit_folds_only_the_window() {
        let (wc, scene, ep) = fixture();
        let cfg = ModelConfig {
            history_limit: Some(3),
            ..small_cfg()
        };
        let model = NavModel::new(cfg, wc.vocab.clone());
        let (outs, _) = roll(&model, &wc, &scene, &ep, 6, Ablation::default());
        // At step 5 the window holds frames 2..4 (last three).
        let mut pose = ep.start_pose;
        let mut frames = Vec::new();
        for t in 0..5 {
            let obs = worldsim::observe(&scene, &pose, &wc);
            frames.push(encode_observation(&obs, &model.enc));
            pose = worldsim::step(&pose, ep.waypoints[t], &wc);
        }
        let oracle = compress_history(&frames[2..], model.params.shic.as_ref().unwrap());
        let got = outs[5].slot_values.as_ref().unwrap();
        for v in 0..5 {
            assert_eq!(got[v], oracle[v]);
        }
        // Trajectory tokens also capped at the window length.
        assert_eq!(outs[5].traj_rows, 3);
        assert_eq!(outs[2].traj_rows, 2);
    }

    #[test]
    fn ablations_drop_prompt_segments() {
        let (wc, scene, ep) = fixture();
        let model = NavModel::new(small_cfg(), wc.vocab.clone());
        let abl = Ablation {
            disable_shic: true,
            disable_ste: false,
        };
        let (outs, _) = roll(&model, &wc, &scene, &ep, 3, abl);
        assert!(outs[2].layout.rows_of(Segment::SlotFront).is_none());
        assert!(outs[2].layout.rows_of(Segment::Traj).is_some());
        let both = Ablation {
            disable_shic: true,
            disable_ste: true,
        };
        let (outs, _) = roll(&model, &wc, &scene, &ep, 3, both);
        assert!(outs[2].layout.rows_of(Segment::Traj).is_none());
        assert!(outs[2].layout.rows_of(Segment::CurFront).is_some());
        assert!(outs[2].slot_values.is_none());
    }

    #[test]
    fn episode_loss_backward_reaches_all_live_parameters() {
        let (wc, scene, ep) = fixture();
        let model = NavModel::new(small_cfg(), wc.vocab.clone());
        let mut rt =
            EpisodeRuntime::new(&model, &ep.instruction, ep.start_pose, Ablation::default())
                .unwrap();
        let mut ways = Vec::new();
        let mut stops = Vec::new();
        let n = 3;
        let mut wt = Matrix::zeros(n, 3);
        let mut st = Matrix::zeros(1, n);
        for t in 0..n {
            let obs = worldsim::observe(&scene, &rt.pose(), &wc);
            let out = rt.act(&obs);
            ways.push(out.way);
            stops.push(out.stop);
            let cur = rt.pose().position;
            let target = ep.waypoints[t];
            for c in 0..3 {
                *wt.at_mut(t, c) = target[c] - cur[c];
            }
            if t == n - 1 {
                *st.at_mut(0, t) = 1.0;
            }
            let next = worldsim::step(&rt.pose(), target, &wc);
            rt.advance(next);
        }
        let (loss, mse, bce) =
            assemble_episode_loss(&mut rt.tape, &ways, &stops, &wt, &st, 0.1);
        assert!(rt.tape.value(mse).data[0].is_finite());
        assert!(rt.tape.value(bce).data[0] > 0.0);
        let grads = rt.backward(loss);
        let named = model.params.named();
        assert_eq!(grads.len(), named.len());
        let mut nonzero = 0;
        for (g, (name, m)) in grads.iter().zip(named.iter()) {
            assert_eq!(g.shape(), m.shape(), "{name}");
            assert!(g.is_finite(), "{name} gradient not finite");
            if g.data.iter().any(|x| *x != 0.0) {
                nonzero += 1;
            }
        }
        // Every tensor should receive signal in a full 3-step episode.
        assert_eq!(nonzero, grads.len(), "dead parameters in backward pass");
    }
}
