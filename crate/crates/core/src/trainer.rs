//! Teacher-forced training with scheduled sampling and AdamW.
//!
//! Episodes are rolled out on their own gradient tapes. At every step the
//! model is supervised toward the ground-truth displacement `w_t − p_t`
//! and the stop label `1[t = T−1]`; the pose fed forward is the ground
//! truth with probability `p` (scheduled sampling) and otherwise the
//! model's own — detached — prediction. `p` decays as
//! `ratio^⌊step/every⌋`, computed by repeated multiplication so the
//! schedule values are exact.
//!
//! Everything is derived from the training seed: epoch shuffles, the
//! per-step sampling coins, and therefore the whole parameter trajectory.
//! A (params, optimizer, step) snapshot resumes bit-exactly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoders::EncodeError;
use crate::model::{assemble_episode_loss, Ablation, EpisodeRuntime, ModelParams, NavModel};
use crate::numkit::Matrix;
use crate::rng::rng_for;
use crate::worldsim::{self, dist3, Episode, GenError, Scene, WorldConfig};

const EPOCH_TAG: u64 = 0xe60c;
const STEP_TAG: u64 = 0x57e9;

fn default_batch() -> usize {
    8
}
fn default_lr() -> f64 {
    5e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}
fn default_weight_decay() -> f64 {
    0.01
}
fn default_lambda_stop() -> f64 {
    0.1
}
fn default_ss_every() -> usize {
    3000
}
fn default_ss_ratio() -> f64 {
    0.75
}
fn default_steps() -> usize {
    2000
}
fn default_log_every() -> usize {
    50
}
fn default_stop_radius() -> f64 {
    20.0
}
fn default_val_every() -> usize {
    250
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// Stop-loss weight λ.
    #[serde(default = "default_lambda_stop")]
    pub lambda_stop: f64,
    /// Scheduled-sampling decay interval (steps).
    #[serde(default = "default_ss_every")]
    pub ss_every: usize,
    /// Scheduled-sampling decay ratio per interval.
    #[serde(default = "default_ss_ratio")]
    pub ss_ratio: f64,
    /// Stop label radius (m): a step is a positive stop example when the
    /// agent is within this distance of the goal.
    #[serde(default = "default_stop_radius")]
    pub stop_radius: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Steps between validation passes (when a validation set is supplied).
    #[serde(default = "default_val_every")]
    pub val_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: default_steps(),
            batch_size: default_batch(),
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            adam_eps: default_adam_eps(),
            weight_decay: default_weight_decay(),
            lambda_stop: default_lambda_stop(),
            ss_every: default_ss_every(),
            ss_ratio: default_ss_ratio(),
            stop_radius: default_stop_radius(),
            seed: 0,
            log_every: default_log_every(),
            val_every: default_val_every(),
        }
    }
}

/// Probability of feeding the ground-truth pose at `step`:
/// `ratio^⌊step/every⌋`, as an exact product.
pub fn ss_probability(step: usize, every: usize, ratio: f64) -> f64 {
    let k = if every == 0 { 0 } else { step / every };
    let mut p = 1.0;
    for _ in 0..k {
        p *= ratio;
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    /// Loss or a gradient went non-finite.
    NonFinite { step: usize },
    Encode(EncodeError),
    World(GenError),
    EmptyDataset,
}

impl From<EncodeError> for TrainError {
    fn from(e: EncodeError) -> Self {
        TrainError::Encode(e)
    }
}

impl From<GenError> for TrainError {
    fn from(e: GenError) -> Self {
        TrainError::World(e)
    }
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::NonFinite { step } => {
                write!(f, "training diverged: non-finite loss at step {step}")
            }
            TrainError::Encode(e) => write!(f, "instruction error: {e}"),
            TrainError::World(e) => write!(f, "world error: {e}"),
            TrainError::EmptyDataset => write!(f, "training dataset is empty"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TrainError {}

/// AdamW state, aligned with the parameter registry by position; names
/// are kept for checkpoint validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: usize,
    pub names: Vec<String>,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let named = params.named();
        AdamState {
            t: 0,
            names: named.iter().map(|(n, _)| n.clone()).collect(),
            m: named
                .iter()
                .map(|(_, p)| Matrix::zeros(p.rows, p.cols))
                .collect(),
            v: named
                .iter()
                .map(|(_, p)| Matrix::zeros(p.rows, p.cols))
                .collect(),
        }
    }

    /// Decoupled-weight-decay Adam update, in registry order.
    pub fn step(&mut self, params: &mut ModelParams, grads: &[Matrix], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(cfg.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(cfg.beta2, self.t as f64);
        let mut i = 0;
        params.visit_mut(&mut |name, p| {
            debug_assert_eq!(name, self.names[i], "optimizer/registry mismatch");
            let g = &grads[i];
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..p.data.len() {
                let gj = g.data[j];
                m.data[j] = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * gj;
                v.data[j] = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * gj * gj;
                let mh = m.data[j] / bc1;
                let vh = v.data[j] / bc2;
                p.data[j] -= cfg.lr
                    * (mh / (libm::sqrt(vh) + cfg.adam_eps) + cfg.weight_decay * p.data[j]);
            }
            i += 1;
        });
        debug_assert_eq!(i, self.names.len());
    }
}

/// Scenes regenerate deterministically from their seed; this caches them
/// across episodes.
#[derive(Debug, Default)]
pub struct SceneCache {
    scenes: BTreeMap<u64, Scene>,
}

impl SceneCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, seed: u64, wc: &WorldConfig) -> Result<&Scene, GenError> {
        if !self.scenes.contains_key(&seed) {
            let scene = worldsim::generate_scene(wc, seed)?;
            self.scenes.insert(seed, scene);
        }
        Ok(&self.scenes[&seed])
    }
}

/// Per-episode training statistics.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeStats {
    pub loss: f64,
    pub way_mse: f64,
    pub stop_bce: f64,
    pub steps: usize,
}

/// One logged training step (no wall-clock fields: logs must be
/// reproducible byte-for-byte).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub loss: f64,
    pub way_mse: f64,
    pub stop_bce: f64,
    pub ss_p: f64,
    pub grad_norm: f64,
    /// Median validation NE, when a validation pass ran at this step.
    #[serde(default)]
    pub val_ne: Option<f64>,
    /// Validation success rate, when a validation pass ran at this step.
    #[serde(default)]
    pub val_sr: Option<f64>,
}

/// Roll one episode teacher-forced (with scheduled sampling), backprop,
/// and return gradients in registry order.
pub fn train_episode(
    model: &NavModel,
    scene: &Scene,
    ep: &Episode,
    wc: &WorldConfig,
    ss_p: f64,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<Matrix>, EpisodeStats), TrainError> {
    let mut rt = EpisodeRuntime::new(model, &ep.instruction, ep.start_pose, Ablation::default())?;
    let t_max = ep.waypoints.len().min(model.cfg.max_steps);
    let goal = *ep.waypoints.last().expect("episodes have waypoints");
    let mut ways = Vec::with_capacity(t_max);
    let mut stops = Vec::with_capacity(t_max);
    let mut way_targets = Matrix::zeros(t_max, 3);
    let mut stop_targets = Matrix::zeros(1, t_max);
    for t in 0..t_max {
        let obs = worldsim::observe(scene, &rt.pose(), wc);
        let out = rt.act(&obs);
        ways.push(out.way);
        stops.push(out.stop);
        let pos = rt.pose().position;
        let target = ep.waypoints[t];
        for c in 0..3 {
            *way_targets.at_mut(t, c) = target[c] - pos[c];
        }
        // Stop supervision is proximity-based so it transfers to drifted
        // rollouts: positive whenever the decision state is already inside
        // the stop radius, and always at the final reference step.
        if t == t_max - 1 || dist3(&pos, &goal) <= cfg.stop_radius {
            *stop_targets.at_mut(0, t) = 1.0;
        }
        // Scheduled sampling: follow the ground truth with probability
        // ss_p, otherwise the model's own prediction (as a value — no
        // gradient flows through the executed pose).
        let executed = if rng.gen_bool(ss_p) {
            target
        } else {
            [
                pos[0] + out.way_value[0],
                pos[1] + out.way_value[1],
                pos[2] + out.way_value[2],
            ]
        };
        let next = worldsim::step(&rt.pose(), executed, wc);
        rt.advance(next);
    }
    let (loss, mse, bce) = assemble_episode_loss(
        &mut rt.tape,
        &ways,
        &stops,
        &way_targets,
        &stop_targets,
        cfg.lambda_stop,
    );
    let stats = EpisodeStats {
        loss: rt.tape.value(loss).data[0],
        way_mse: rt.tape.value(mse).data[0],
        stop_bce: rt.tape.value(bce).data[0],
        steps: t_max,
    };
    let grads = rt.backward(loss);
    Ok((grads, stats))
}

/// Episode indices making up `step`'s batch: epochwise shuffles derived
/// from (seed, epoch), consumed in `batch_size` chunks.
pub fn batch_indices(step: usize, n: usize, cfg: &TrainConfig) -> Vec<usize> {
    let per_epoch = n.div_ceil(cfg.batch_size);
    let epoch = step / per_epoch;
    let slot = step % per_epoch;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(cfg.seed, &[EPOCH_TAG, epoch as u64]);
    order.shuffle(&mut rng);
    order
        .into_iter()
        .skip(slot * cfg.batch_size)
        .take(cfg.batch_size)
        .collect()
}

/// Run training steps `[start, end)`, mutating `params` and `opt` in
/// place. `on_log` fires every `log_every` steps and on the final step.
pub fn run_steps(
    model: &mut NavModel,
    opt: &mut AdamState,
    episodes: &[Episode],
    wc: &WorldConfig,
    cfg: &TrainConfig,
    start: usize,
    end: usize,
    scenes: &mut SceneCache,
    on_log: &mut dyn FnMut(&LogRecord),
) -> Result<(), TrainError> {
    if episodes.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for step in start..end {
        let idx = batch_indices(step, episodes.len(), cfg);
        let ss_p = ss_probability(step, cfg.ss_every, cfg.ss_ratio);
        let mut rng = rng_for(cfg.seed, &[STEP_TAG, step as u64]);
        let mut accum: Option<Vec<Matrix>> = None;
        let mut loss_sum = 0.0;
        let mut mse_sum = 0.0;
        let mut bce_sum = 0.0;
        for &i in &idx {
            let ep = &episodes[i];
            let scene = scenes.get(ep.scene_seed, wc)?.clone();
            let (grads, stats) =
                train_episode(model, &scene, ep, wc, ss_p, cfg, &mut rng)?;
            if !stats.loss.is_finite() {
                return Err(TrainError::NonFinite { step });
            }
            loss_sum += stats.loss;
            mse_sum += stats.way_mse;
            bce_sum += stats.stop_bce;
            match &mut accum {
                None => accum = Some(grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(grads.iter()) {
                        for (x, y) in a.data.iter_mut().zip(g.data.iter()) {
                            *x += y;
                        }
                    }
                }
            }
        }
        let mut grads = accum.expect("non-empty batch");
        let inv = 1.0 / idx.len() as f64;
        let mut sq_norm = 0.0;
        for g in grads.iter_mut() {
            for x in g.data.iter_mut() {
                *x *= inv;
                sq_norm += *x * *x;
            }
        }
        if !sq_norm.is_finite() {
            return Err(TrainError::NonFinite { step });
        }
        opt.step(&mut model.params, &grads, cfg);
        if step % cfg.log_every == 0 || step + 1 == end {
            on_log(&LogRecord {
                step,
                loss: loss_sum * inv,
                way_mse: mse_sum * inv,
                stop_bce: bce_sum * inv,
                ss_p,
                grad_norm: libm::sqrt(sq_norm),
                val_ne: None,
                val_sr: None,
            });
        }
    }
    Ok(())
}

/// Train from scratch for `cfg.steps` steps; returns the log history.
pub fn train(
    model: &mut NavModel,
    episodes: &[Episode],
    wc: &WorldConfig,
    cfg: &TrainConfig,
) -> Result<(AdamState, Vec<LogRecord>), TrainError> {
    let mut opt = AdamState::new(&model.params);
    let mut logs = Vec::new();
    let mut scenes = SceneCache::new();
    run_steps(
        model,
        &mut opt,
        episodes,
        wc,
        cfg,
        0,
        cfg.steps,
        &mut scenes,
        &mut |r| logs.push(r.clone()),
    )?;
    Ok((opt, logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::pgm::ReasonerConfig;
    use crate::ste::SteConfig;
    use crate::worldsim::Difficulty;

    fn tiny_model_cfg() -> ModelConfig {
        ModelConfig {
            d: 8,
            d_l: 8,
            slots: 4,
            ste: SteConfig {
                d_t: 4,
                hidden: 12,
                d_m: 8,
                outer_relu: false,
            },
            reasoner: ReasonerConfig {
                d_u: 16,
                layers: 1,
                heads: 2,
                mlp_hidden: 24,
            },
            ..ModelConfig::default()
        }
    }

    fn fixture(n_eps: usize) -> (WorldConfig, Vec<Episode>) {
        let wc = WorldConfig::default();
        let scene = worldsim::generate_scene(&wc, 5).unwrap();
        let eps = (0..n_eps)
            .map(|i| {
                worldsim::generate_episode(&scene, &wc, 100 + i as u64, Difficulty::Easy).unwrap()
            })
            .collect();
        (wc, eps)
    }

    #[test]
    fn scheduled_sampling_values_are_exact() {
        assert_eq!(ss_probability(0, 3000, 0.75), 1.0);
        assert_eq!(ss_probability(2999, 3000, 0.75), 1.0);
        assert_eq!(ss_probability(3000, 3000, 0.75), 0.75);
        assert_eq!(ss_probability(5999, 3000, 0.75), 0.75);
        assert_eq!(ss_probability(6000, 3000, 0.75), 0.5625);
        assert_eq!(ss_probability(9000, 3000, 0.75), 0.75 * 0.75 * 0.75);
        // A zero interval disables the decay rather than dividing by zero.
        assert_eq!(ss_probability(10_000, 0, 0.75), 1.0);
    }

    #[test]
    fn adamw_matches_a_hand_computed_update() {
        let cfg = TrainConfig {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.99,
            adam_eps: 1e-8,
            weight_decay: 0.1,
            ..TrainConfig::default()
        };
        let model_cfg = ModelConfig {
            use_shic: false,
            use_ste: false,
            ..tiny_model_cfg()
        };
        let mut params = ModelParams::init(&model_cfg);
        let before = params.named()[0].1.clone();
        let name0 = params.named()[0].0.clone();
        let mut opt = AdamState::new(&params);
        // Constant gradient of 1 on the first tensor, 0 elsewhere.
        let grads: Vec<Matrix> = params
            .named()
            .iter()
            .enumerate()
            .map(|(i, (_, p))| {
                if i == 0 {
                    Matrix::from_vec(p.rows, p.cols, alloc::vec![1.0; p.data.len()])
                } else {
                    Matrix::zeros(p.rows, p.cols)
                }
            })
            .collect();
        opt.step(&mut params, &grads, &cfg);
        opt.step(&mut params, &grads, &cfg);

        // Hand-roll the same two updates for one scalar.
        let mut theta = before.data[0];
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2u32 {
            m = 0.9 * m + 0.1 * 1.0;
            v = 0.99 * v + 0.01 * 1.0;
            let mh = m / (1.0 - 0.9f64.powi(t as i32));
            let vh = v / (1.0 - 0.99f64.powi(t as i32));
            theta -= 0.1 * (mh / (vh.sqrt() + 1e-8) + 0.1 * theta);
        }
        let got = params.named()[0].1.data[0];
        assert!(
            (got - theta).abs() < 1e-12,
            "{name0}: {got} vs oracle {theta}"
        );
        // Zero-gradient tensors still decay toward zero (decoupled wd).
        let later = params.named().last().unwrap().1.clone();
        let orig = ModelParams::init(&model_cfg);
        let last_orig = orig.named().last().unwrap().1.clone();
        for (a, b) in later.data.iter().zip(last_orig.data.iter()) {
            if *b != 0.0 {
                assert!(a.abs() < b.abs());
            }
        }
    }

    #[test]
    fn batches_cover_each_epoch_exactly_once() {
        let cfg = TrainConfig {
            batch_size: 4,
            seed: 3,
            ..TrainConfig::default()
        };
        let n = 10usize;
        let per_epoch = n.div_ceil(cfg.batch_size);
        for epoch in 0..3 {
            let mut seen: Vec<usize> = (0..per_epoch)
                .flat_map(|s| batch_indices(epoch * per_epoch + s, n, &cfg))
                .collect();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
        // Identical reconstruction from the step index alone.
        assert_eq!(batch_indices(7, n, &cfg), batch_indices(7, n, &cfg));
    }

    #[test]
    fn training_is_deterministic_and_resumable() {
        let (wc, eps) = fixture(6);
        let cfg = TrainConfig {
            steps: 4,
            batch_size: 3,
            seed: 9,
            log_every: 1,
            ..TrainConfig::default()
        };
        let mut m1 = NavModel::new(tiny_model_cfg(), wc.vocab.clone());
        let (_, logs1) = train(&mut m1, &eps, &wc, &cfg).unwrap();
        let mut m2 = NavModel::new(tiny_model_cfg(), wc.vocab.clone());
        let (_, logs2) = train(&mut m2, &eps, &wc, &cfg).unwrap();
        assert_eq!(m1.params, m2.params);
        assert_eq!(logs1, logs2);

        // Resume: 2 steps, snapshot, 2 more == 4 straight.
        let mut m3 = NavModel::new(tiny_model_cfg(), wc.vocab.clone());
        let mut opt = AdamState::new(&m3.params);
        let mut scenes = SceneCache::new();
        run_steps(&mut m3, &mut opt, &eps, &wc, &cfg, 0, 2, &mut scenes, &mut |_| {}).unwrap();
        let snap_params = m3.params.clone();
        let snap_opt = opt.clone();
        // Restart from the snapshot (fresh cache, fresh model shell).
        let mut m4 = NavModel::from_parts(tiny_model_cfg(), snap_params, wc.vocab.clone());
        let mut opt4 = snap_opt;
        let mut scenes4 = SceneCache::new();
        run_steps(&mut m4, &mut opt4, &eps, &wc, &cfg, 2, 4, &mut scenes4, &mut |_| {}).unwrap();
        assert_eq!(m4.params, m1.params);
    }

    #[test]
    fn frozen_encoders_do_not_move_during_training() {
        let (wc, eps) = fixture(4);
        let mut model = NavModel::new(tiny_model_cfg(), wc.vocab.clone());
        let before = model.enc.byte_fingerprint();
        let cfg = TrainConfig {
            steps: 3,
            batch_size: 2,
            ..TrainConfig::default()
        };
        train(&mut model, &eps, &wc, &cfg).unwrap();
        assert_eq!(model.enc.byte_fingerprint(), before);
    }

    #[test]
    fn divergence_is_reported_not_propagated() {
        let (wc, eps) = fixture(2);
        let mut model = NavModel::new(tiny_model_cfg(), wc.vocab.clone());
        // Blow up the waypoint head so the first MSE overflows.
        model.params.pgm.w_way = model.params.pgm.w_way.map(|x| x * 1e200);
        let cfg = TrainConfig {
            steps: 2,
            batch_size: 1,
            ..TrainConfig::default()
        };
        match train(&mut model, &eps, &wc, &cfg) {
            Err(TrainError::NonFinite { step: 0 }) => {}
            other => panic!("expected NonFinite at step 0, got {other:?}"),
        }
    }

    #[test]
    fn overfits_one_episode() {
        let (wc, eps) = fixture(1);
        let mut model = NavModel::new(tiny_model_cfg(), wc.vocab.clone());
        let cfg = TrainConfig {
            steps: 500,
            batch_size: 1,
            lr: 3e-3,
            seed: 1,
            log_every: 100,
            ..TrainConfig::default()
        };
        let (_, logs) = train(&mut model, &eps, &wc, &cfg).unwrap();
        let first = logs.first().unwrap();
        let last = logs.last().unwrap();
        assert!(
            last.way_mse < 0.1,
            "waypoint MSE after overfit: {} (start {})",
            last.way_mse,
            first.way_mse
        );
        assert!(last.loss < first.loss * 0.05);
    }
}
