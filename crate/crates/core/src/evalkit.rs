//! Closed-loop evaluation: rollout runner, navigation metrics, and
//! reference agents.
//!
//! Metrics per episode, with τ the success radius (default 20 m):
//! * NE — distance from the final position to the goal,
//! * SR — NE ≤ τ (inclusive),
//! * OSR — any visited position (start included) within τ,
//! * SPL — SR · ℓ / max(ℓ, p), ℓ the straight start→goal distance and
//!   p the executed path length.
//!
//! By construction SPL ≤ SR ≤ OSR for every episode and in aggregate.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::encoders::EncodeError;
use crate::model::{Ablation, EpisodeRuntime, NavModel};
use crate::rng::rng_for;
use crate::worldsim::{
    self, dist3, path_length, Difficulty, Episode, GenError, Observation, Pose, Scene,
    WorldConfig,
};

fn default_radius() -> f64 {
    20.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Success radius τ in meters.
    #[serde(default = "default_radius")]
    pub success_radius: f64,
    /// Rollout step budget per episode.
    #[serde(default = "crate::evalkit::default_eval_steps")]
    pub max_steps: usize,
}

pub(crate) fn default_eval_steps() -> usize {
    50
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            success_radius: default_radius(),
            max_steps: default_eval_steps(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The agent raised its stop flag.
    Stopped,
    /// The step budget ran out.
    MaxSteps,
}

/// Everything needed to score one executed episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub episode_index: usize,
    pub difficulty: Difficulty,
    pub start: [f64; 3],
    pub goal: [f64; 3],
    /// Positions after each executed step (start excluded).
    pub executed: Vec<[f64; 3]>,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub ne: f64,
    pub success: bool,
    pub oracle: bool,
    pub spl: f64,
}

/// Score one log against the success radius.
pub fn episode_metrics(log: &TrajectoryLog, radius: f64) -> EpisodeMetrics {
    let last = log.executed.last().unwrap_or(&log.start);
    let ne = dist3(last, &log.goal);
    let success = ne <= radius;
    let oracle = core::iter::once(&log.start)
        .chain(log.executed.iter())
        .any(|p| dist3(p, &log.goal) <= radius);
    let ell = dist3(&log.start, &log.goal);
    let p = path_length(&log.start, &log.executed);
    let denom = if ell > p { ell } else { p };
    let spl = if !success {
        0.0
    } else if denom == 0.0 {
        1.0
    } else {
        ell / denom
    };
    EpisodeMetrics {
        ne,
        success,
        oracle,
        spl,
    }
}

/// Aggregate metrics over one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub n: usize,
    /// Mean navigation error (m).
    pub ne: f64,
    /// Median navigation error (m).
    pub ne_median: f64,
    /// Success rate in [0, 1].
    pub sr: f64,
    /// Oracle success rate in [0, 1].
    pub osr: f64,
    /// Success weighted by path length, in [0, 1].
    pub spl: f64,
}

impl SplitReport {
    fn empty() -> Self {
        SplitReport {
            n: 0,
            ne: 0.0,
            ne_median: 0.0,
            sr: 0.0,
            osr: 0.0,
            spl: 0.0,
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn aggregate(ms: &[EpisodeMetrics]) -> SplitReport {
    if ms.is_empty() {
        return SplitReport::empty();
    }
    let n = ms.len();
    let inv = 1.0 / n as f64;
    let mut nes: Vec<f64> = ms.iter().map(|m| m.ne).collect();
    nes.sort_by(|a, b| a.partial_cmp(b).expect("finite NE"));
    SplitReport {
        n,
        ne: ms.iter().map(|m| m.ne).sum::<f64>() * inv,
        ne_median: median(&nes),
        sr: ms.iter().filter(|m| m.success).count() as f64 * inv,
        osr: ms.iter().filter(|m| m.oracle).count() as f64 * inv,
        spl: ms.iter().map(|m| m.spl).sum::<f64>() * inv,
    }
}

/// Evaluation report over the full set and per difficulty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub success_radius: f64,
    pub full: SplitReport,
    pub easy: SplitReport,
    pub hard: SplitReport,
}

/// Build the report from per-episode logs.
pub fn make_report(logs: &[TrajectoryLog], radius: f64) -> Report {
    let all: Vec<EpisodeMetrics> = logs.iter().map(|l| episode_metrics(l, radius)).collect();
    let part = |d: Difficulty| -> Vec<EpisodeMetrics> {
        logs.iter()
            .zip(all.iter())
            .filter(|(l, _)| l.difficulty == d)
            .map(|(_, m)| *m)
            .collect()
    };
    Report {
        success_radius: radius,
        full: aggregate(&all),
        easy: aggregate(&part(Difficulty::Easy)),
        hard: aggregate(&part(Difficulty::Hard)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    Encode(EncodeError),
    World(GenError),
}

impl From<EncodeError> for EvalError {
    fn from(e: EncodeError) -> Self {
        EvalError::Encode(e)
    }
}

impl From<GenError> for EvalError {
    fn from(e: GenError) -> Self {
        EvalError::World(e)
    }
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::Encode(e) => write!(f, "instruction error: {e}"),
            EvalError::World(e) => write!(f, "world error: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

/// One decision: an absolute waypoint plus a stop flag. The waypoint is
/// executed first; the flag then ends the episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentAction {
    pub waypoint: [f64; 3],
    pub stop: bool,
}

/// A navigation policy under evaluation.
pub trait Agent {
    fn begin(&mut self, episode: &Episode) -> Result<(), EvalError>;
    fn act(&mut self, obs: &Observation, pose: &Pose, step: usize) -> AgentAction;
    /// Called after the world executes the action.
    fn after_step(&mut self, _new_pose: Pose) {}
}

/// The trained model driving itself (optionally with eval-time ablations).
pub struct ModelAgent<'m> {
    model: &'m NavModel,
    ablation: Ablation,
    rt: Option<EpisodeRuntime<'m>>,
}

impl<'m> ModelAgent<'m> {
    pub fn new(model: &'m NavModel, ablation: Ablation) -> Self {
        ModelAgent {
            model,
            ablation,
            rt: None,
        }
    }
}

impl<'m> Agent for ModelAgent<'m> {
    fn begin(&mut self, episode: &Episode) -> Result<(), EvalError> {
        self.rt = Some(EpisodeRuntime::new(
            self.model,
            &episode.instruction,
            episode.start_pose,
            self.ablation,
        )?);
        Ok(())
    }

    fn act(&mut self, obs: &Observation, pose: &Pose, _step: usize) -> AgentAction {
        let rt = self.rt.as_mut().expect("begin before act");
        let out = rt.act(obs);
        AgentAction {
            waypoint: [
                pose.position[0] + out.way_value[0],
                pose.position[1] + out.way_value[1],
                pose.position[2] + out.way_value[2],
            ],
            stop: out.stop_prob > self.model.cfg.stop_threshold,
        }
    }

    fn after_step(&mut self, new_pose: Pose) {
        self.rt.as_mut().expect("begin before step").advance(new_pose);
    }
}

/// Replays the ground-truth waypoints and stops on the last one.
#[derive(Debug, Default)]
pub struct ReplayAgent {
    waypoints: Vec<[f64; 3]>,
    i: usize,
}

impl Agent for ReplayAgent {
    fn begin(&mut self, episode: &Episode) -> Result<(), EvalError> {
        self.waypoints = episode.waypoints.clone();
        self.i = 0;
        Ok(())
    }

    fn act(&mut self, _obs: &Observation, _pose: &Pose, _step: usize) -> AgentAction {
        let last = self.waypoints.len().saturating_sub(1);
        let i = self.i.min(last);
        self.i += 1;
        AgentAction {
            waypoint: self.waypoints[i],
            stop: i == last,
        }
    }
}

/// Seeded random-walk baseline; never stops on its own.
pub struct RandomAgent {
    seed: u64,
    episode: u64,
    rng: rand_chacha::ChaCha8Rng,
    step_len: f64,
}

impl RandomAgent {
    pub fn new(seed: u64, step_len: f64) -> Self {
        RandomAgent {
            seed,
            episode: 0,
            rng: rng_for(seed, &[0]),
            step_len,
        }
    }
}

impl Agent for RandomAgent {
    fn begin(&mut self, _episode: &Episode) -> Result<(), EvalError> {
        self.rng = rng_for(self.seed, &[self.episode]);
        self.episode += 1;
        Ok(())
    }

    fn act(&mut self, _obs: &Observation, pose: &Pose, _step: usize) -> AgentAction {
        let mut d = [0.0f64; 3];
        loop {
            for v in d.iter_mut() {
                *v = crate::numkit::normal(&mut self.rng, 1.0);
            }
            let n = libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            if n > 1e-9 {
                for v in d.iter_mut() {
                    *v *= self.step_len / n;
                }
                break;
            }
        }
        AgentAction {
            waypoint: [
                pose.position[0] + d[0],
                pose.position[1] + d[1],
                pose.position[2] + d[2],
            ],
            stop: false,
        }
    }
}

/// Always moves by the same displacement; never stops.
pub struct FixedAgent {
    pub displacement: [f64; 3],
}

impl Agent for FixedAgent {
    fn begin(&mut self, _episode: &Episode) -> Result<(), EvalError> {
        Ok(())
    }

    fn act(&mut self, _obs: &Observation, pose: &Pose, _step: usize) -> AgentAction {
        AgentAction {
            waypoint: [
                pose.position[0] + self.displacement[0],
                pose.position[1] + self.displacement[1],
                pose.position[2] + self.displacement[2],
            ],
            stop: false,
        }
    }
}

/// Drive one episode closed-loop and log the executed trajectory.
pub fn run_episode(
    agent: &mut dyn Agent,
    scene: &Scene,
    episode: &Episode,
    episode_index: usize,
    wc: &WorldConfig,
    max_steps: usize,
) -> Result<TrajectoryLog, EvalError> {
    agent.begin(episode)?;
    let goal = scene.landmarks[episode.target_index].position;
    let mut pose = episode.start_pose;
    let mut executed = Vec::new();
    let mut stop_reason = StopReason::MaxSteps;
    for step in 0..max_steps {
        let obs = worldsim::observe(scene, &pose, wc);
        let action = agent.act(&obs, &pose, step);
        pose = worldsim::step(&pose, action.waypoint, wc);
        agent.after_step(pose);
        executed.push(pose.position);
        if action.stop {
            stop_reason = StopReason::Stopped;
            break;
        }
    }
    Ok(TrajectoryLog {
        episode_index,
        difficulty: episode.difficulty,
        start: episode.start_pose.position,
        goal,
        executed,
        stop_reason,
    })
}

/// Evaluate an agent over a dataset; returns the logs and the report.
pub fn evaluate(
    agent: &mut dyn Agent,
    episodes: &[Episode],
    wc: &WorldConfig,
    cfg: &EvalConfig,
) -> Result<(Vec<TrajectoryLog>, Report), EvalError> {
    let mut scenes = crate::trainer::SceneCache::new();
    let mut logs = Vec::with_capacity(episodes.len());
    for (i, ep) in episodes.iter().enumerate() {
        let scene = scenes.get(ep.scene_seed, wc)?.clone();
        logs.push(run_episode(agent, &scene, ep, i, wc, cfg.max_steps)?);
    }
    let report = make_report(&logs, cfg.success_radius);
    Ok((logs, report))
}
