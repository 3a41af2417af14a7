//! Deterministic synthetic 3-D world for aerial navigation episodes.
//!
//! A scene is a bounded box containing point landmarks with (color, kind)
//! attributes. Episodes come in two difficulties:
//! * easy — fly from the start straight to a target that is visible from
//!   the start pose,
//! * hard — fly to a visible via landmark first, then turn to a target
//!   that is out of sensor range from the via, so the turn direction can
//!   only be recovered from earlier observations.
//!
//! Observations are five body-frame view token sets (front/rear/left/
//! right/bottom); motion is waypoint-to-waypoint teleportation with yaw
//! following the motion heading. Everything is seeded and bit-reproducible.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numkit::Matrix;
use crate::rng::rng_for;

/// Attribute embedding width per table. Eight dimensions keep random
/// gaussian embeddings well separated (at four dims, distinct values can
/// land nearly parallel and become indistinguishable downstream).
pub const D_ATTR: usize = 8;
/// Raw per-token feature width: color embed + kind embed +
/// body-frame offset (3) + range (1).
pub const D_FEAT: usize = 2 * D_ATTR + 4;

/// Valid trajectory length range in meters.
pub const MIN_PATH_LEN: f64 = 50.0;
pub const MAX_PATH_LEN: f64 = 400.0;

/// Episode geometry (meters). Easy targets are visible from the start;
/// hard episodes place the via inside sensor range but the target far
/// enough from the via to be invisible there, with a symmetric-sign turn.
pub const EASY_DIST: (f64, f64) = (60.0, 135.0);
pub const HARD_LEG1: (f64, f64) = (115.0, 140.0);
pub const HARD_START_GOAL: (f64, f64) = (70.0, 135.0);
pub const HARD_VIA_GOAL: (f64, f64) = (165.0, 210.0);
/// Waypoint spacing on the first (via) leg of hard episodes; kept well
/// under `step_max` so the leg spans more than ten frames.
pub const HARD_LEG1_SPACING: f64 = 10.0;

const LANDMARK_MIN_SEP: f64 = 40.0;
const LANDMARK_Z_MAX: f64 = 12.0;
const START_Z: (f64, f64) = (25.0, 40.0);
const BOUNDS_MARGIN: f64 = 20.0;
const GEN_ATTEMPTS: usize = 4000;

const SCENE_TAG: u64 = 0x5ce9;
const EP_TAG: u64 = 0xe915;
const ATTR_EMB_TAG: u64 = 0xa77e;

/// UAV pose. Pitch and roll are identically zero in this world; yaw is the
/// heading angle in radians measured from +x toward +y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: [f64; 3],
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: [f64; 3], yaw: f64) -> Self {
        Pose { position, yaw }
    }
}

// Serialized as the flat array [x, y, z, yaw].
impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [
            self.position[0],
            self.position[1],
            self.position[2],
            self.yaw,
        ]
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[f64; 4]>::deserialize(d)?;
        Ok(Pose {
            position: [a[0], a[1], a[2]],
            yaw: a[3],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

/// The five rigid camera views in body frame: x forward, y left, z up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Front = 0,
    Rear = 1,
    Left = 2,
    Right = 3,
    Bottom = 4,
}

pub const VIEWS: [View; 5] = [View::Front, View::Rear, View::Left, View::Right, View::Bottom];

impl View {
    pub fn name(self) -> &'static str {
        match self {
            View::Front => "front",
            View::Rear => "rear",
            View::Left => "left",
            View::Right => "right",
            View::Bottom => "bottom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    pub colors: Vec<String>,
    pub kinds: Vec<String>,
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab {
            colors: ["red", "blue", "green", "yellow", "white", "orange"]
                .iter()
                .map(|s| String::from(*s))
                .collect(),
            kinds: [
                "tower", "tank", "dome", "antenna", "hangar", "crane", "silo", "pylon",
            ]
            .iter()
            .map(|s| String::from(*s))
            .collect(),
        }
    }
}

fn default_bounds() -> Bounds {
    Bounds {
        min: [0.0, 0.0, 0.0],
        max: [600.0, 600.0, 60.0],
    }
}
fn default_n_landmarks() -> usize {
    12
}
fn default_step_max() -> f64 {
    15.0
}
fn default_vis_range() -> f64 {
    150.0
}
fn default_max_view_tokens() -> usize {
    6
}

/// World/scene generation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    #[serde(default = "default_bounds")]
    pub bounds: Bounds,
    #[serde(default = "default_n_landmarks")]
    pub n_landmarks: usize,
    #[serde(default)]
    pub vocab: Vocab,
    /// Maximum distance between consecutive trajectory waypoints (m).
    #[serde(default = "default_step_max")]
    pub step_max: f64,
    #[serde(default)]
    pub seed: u64,
    /// Sensor range: landmarks beyond this 3-D distance are not observed.
    #[serde(default = "default_vis_range")]
    pub vis_range: f64,
    /// Cap on tokens per view (nearest kept).
    #[serde(default = "default_max_view_tokens")]
    pub max_view_tokens: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            bounds: default_bounds(),
            n_landmarks: default_n_landmarks(),
            vocab: Vocab::default(),
            step_max: default_step_max(),
            seed: 0,
            vis_range: default_vis_range(),
            max_view_tokens: default_max_view_tokens(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub position: [f64; 3],
    pub color: usize,
    pub kind: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub seed: u64,
    pub landmarks: Vec<Landmark>,
}

/// One navigation task. `waypoints` excludes the start pose; the final
/// waypoint coincides with the target landmark position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub scene_seed: u64,
    pub instruction: String,
    pub target_index: usize,
    pub start_pose: Pose,
    pub waypoints: Vec<[f64; 3]>,
    pub difficulty: Difficulty,
}

/// Token sets for the five views; each matrix is n×D_FEAT with one row per
/// visible landmark (nearest-first), or a single zero row when the view is
/// empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub views: [Matrix; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenError {
    /// Vocabulary too small to give every landmark a distinct attribute pair.
    VocabTooSmall { needed: usize, available: usize },
    /// Could not place landmarks with the required separation.
    ScenePlacement,
    /// Could not satisfy the episode geometry constraints in this scene.
    Geometry { difficulty: Difficulty },
}

impl core::fmt::Display for GenError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GenError::VocabTooSmall { needed, available } => write!(
                f,
                "vocabulary too small: {needed} landmarks need distinct attribute pairs, only {available} available"
            ),
            GenError::ScenePlacement => write!(f, "could not place landmarks with required separation"),
            GenError::Geometry { difficulty } => {
                let d = match difficulty {
                    Difficulty::Easy => "easy",
                    Difficulty::Hard => "hard",
                };
                write!(f, "could not satisfy {d} episode geometry in this scene")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GenError {}

#[inline]
fn dist_xy(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

#[inline]
pub fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    libm::sqrt(
        (a[0] - b[0]) * (a[0] - b[0])
            + (a[1] - b[1]) * (a[1] - b[1])
            + (a[2] - b[2]) * (a[2] - b[2]),
    )
}

/// Total polyline length start → w₁ → ... → wₙ.
pub fn path_length(start: &[f64; 3], waypoints: &[[f64; 3]]) -> f64 {
    let mut len = 0.0;
    let mut prev = *start;
    for w in waypoints {
        len += dist3(&prev, w);
        prev = *w;
    }
    len
}

/// Deterministic global attribute embedding (shared by every scene).
///
/// The first `D_ATTR` indices in each table are orthonormal one-hot codes,
/// so the default vocabularies are exactly distinguishable. Larger indices
/// fall back to a seeded unit-norm gaussian so oversized vocabularies stay
/// valid (merely no longer orthogonal).
pub fn attr_embedding(table: usize, index: usize) -> [f64; D_ATTR] {
    let mut e = [0.0; D_ATTR];
    if index < D_ATTR {
        e[index] = 1.0;
        return e;
    }
    let mut rng = rng_for(ATTR_EMB_TAG, &[table as u64, index as u64]);
    for v in e.iter_mut() {
        *v = crate::numkit::normal(&mut rng, 0.5);
    }
    let norm = libm::sqrt(e.iter().map(|x| x * x).sum::<f64>()).max(1e-12);
    for v in e.iter_mut() {
        *v /= norm;
    }
    e
}

/// Place landmarks with distinct attribute pairs and minimum separation.
pub fn generate_scene(config: &WorldConfig, seed: u64) -> Result<Scene, GenError> {
    let n = config.n_landmarks;
    let pairs_avail = config.vocab.colors.len() * config.vocab.kinds.len();
    if n > pairs_avail {
        return Err(GenError::VocabTooSmall {
            needed: n,
            available: pairs_avail,
        });
    }
    let mut rng = rng_for(seed, &[SCENE_TAG]);

    // Distinct (color, kind) pairs ensure every landmark is uniquely
    // describable by its attributes.
    let mut pairs: Vec<(usize, usize)> = (0..config.vocab.colors.len())
        .flat_map(|c| (0..config.vocab.kinds.len()).map(move |k| (c, k)))
        .collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(n);

    let lo = [
        config.bounds.min[0] + BOUNDS_MARGIN,
        config.bounds.min[1] + BOUNDS_MARGIN,
    ];
    let hi = [
        config.bounds.max[0] - BOUNDS_MARGIN,
        config.bounds.max[1] - BOUNDS_MARGIN,
    ];

    let mut landmarks: Vec<Landmark> = Vec::with_capacity(n);
    let mut attempts = 0;
    while landmarks.len() < n {
        attempts += 1;
        if attempts > GEN_ATTEMPTS {
            return Err(GenError::ScenePlacement);
        }
        let pos = [
            rng.gen_range(lo[0]..hi[0]),
            rng.gen_range(lo[1]..hi[1]),
            rng.gen_range(0.0..LANDMARK_Z_MAX),
        ];
        if landmarks
            .iter()
            .all(|l| dist_xy(&l.position, &pos) >= LANDMARK_MIN_SEP)
        {
            let (color, kind) = pairs[landmarks.len()];
            landmarks.push(Landmark {
                position: pos,
                color,
                kind,
            });
        }
    }
    Ok(Scene { seed, landmarks })
}

/// Evenly spaced points on the segment a→b, excluding a, including b, with
/// per-step spacing ≤ `cap`.
fn line_points(a: &[f64; 3], b: &[f64; 3], cap: f64) -> Vec<[f64; 3]> {
    let d = dist3(a, b);
    let n = libm::ceil(d / cap).max(1.0) as usize;
    (1..=n)
        .map(|i| {
            if i == n {
                // Land on the endpoint exactly (t = 1 interpolation would
                // differ in the last ulp).
                return *b;
            }
            let t = i as f64 / n as f64;
            [
                a[0] + t * (b[0] - a[0]),
                a[1] + t * (b[1] - a[1]),
                a[2] + t * (b[2] - a[2]),
            ]
        })
        .collect()
}

fn describe(vocab: &Vocab, lm: &Landmark) -> String {
    format!("{} {}", vocab.colors[lm.color], vocab.kinds[lm.kind])
}

pub fn easy_instruction(vocab: &Vocab, target: &Landmark) -> String {
    format!("Fly to the {}.", describe(vocab, target))
}

pub fn hard_instruction(vocab: &Vocab, via: &Landmark, target: &Landmark) -> String {
    format!(
        "Fly to the {}, then continue to the {}.",
        describe(vocab, via),
        describe(vocab, target)
    )
}

fn in_xy_margin(p: &[f64; 3], b: &Bounds) -> bool {
    p[0] >= b.min[0] + BOUNDS_MARGIN
        && p[0] <= b.max[0] - BOUNDS_MARGIN
        && p[1] >= b.min[1] + BOUNDS_MARGIN
        && p[1] <= b.max[1] - BOUNDS_MARGIN
}

/// Construct a navigation episode in `scene`. The start yaw is always 0
/// (+x heading), so first-frame observations are world-aligned.
pub fn generate_episode(
    scene: &Scene,
    config: &WorldConfig,
    seed: u64,
    difficulty: Difficulty,
) -> Result<Episode, GenError> {
    let mut rng = rng_for(seed, &[EP_TAG, difficulty as u64]);
    let spacing = config.step_max * 0.95;
    match difficulty {
        Difficulty::Easy => {
            for _ in 0..GEN_ATTEMPTS {
                let t_idx = rng.gen_range(0..scene.landmarks.len());
                let target = &scene.landmarks[t_idx];
                let r = rng.gen_range(EASY_DIST.0..EASY_DIST.1);
                let th = rng.gen_range(0.0..core::f64::consts::TAU);
                let start = [
                    target.position[0] + r * libm::cos(th),
                    target.position[1] + r * libm::sin(th),
                    rng.gen_range(START_Z.0..START_Z.1),
                ];
                if !in_xy_margin(&start, &config.bounds) {
                    continue;
                }
                let waypoints = line_points(&start, &target.position, spacing);
                let len = path_length(&start, &waypoints);
                if !(MIN_PATH_LEN..=MAX_PATH_LEN).contains(&len) {
                    continue;
                }
                return Ok(Episode {
                    scene_seed: scene.seed,
                    instruction: easy_instruction(&config.vocab, target),
                    target_index: t_idx,
                    start_pose: Pose::new(start, 0.0),
                    waypoints,
                    difficulty,
                });
            }
            Err(GenError::Geometry { difficulty })
        }
        Difficulty::Hard => {
            let n = scene.landmarks.len();
            let mut cand: Vec<(usize, usize)> = Vec::new();
            for v in 0..n {
                for g in 0..n {
                    if v != g {
                        let d = dist_xy(
                            &scene.landmarks[v].position,
                            &scene.landmarks[g].position,
                        );
                        if (HARD_VIA_GOAL.0..=HARD_VIA_GOAL.1).contains(&d) {
                            cand.push((v, g));
                        }
                    }
                }
            }
            cand.shuffle(&mut rng);
            for &(v_idx, g_idx) in &cand {
                let via = scene.landmarks[v_idx].position;
                let goal = scene.landmarks[g_idx].position;
                for _ in 0..GEN_ATTEMPTS / cand.len().max(1) {
                    let r = rng.gen_range(HARD_LEG1.0..HARD_LEG1.1);
                    let th = rng.gen_range(0.0..core::f64::consts::TAU);
                    let start = [
                        via[0] + r * libm::cos(th),
                        via[1] + r * libm::sin(th),
                        rng.gen_range(START_Z.0..START_Z.1),
                    ];
                    let sg = dist_xy(&start, &goal);
                    if !(HARD_START_GOAL.0..=HARD_START_GOAL.1).contains(&sg)
                        || !in_xy_margin(&start, &config.bounds)
                    {
                        continue;
                    }
                    let mut waypoints = line_points(&start, &via, HARD_LEG1_SPACING);
                    waypoints.extend(line_points(&via, &goal, spacing));
                    let len = path_length(&start, &waypoints);
                    if !(MIN_PATH_LEN..=MAX_PATH_LEN).contains(&len) {
                        continue;
                    }
                    return Ok(Episode {
                        scene_seed: scene.seed,
                        instruction: hard_instruction(
                            &config.vocab,
                            &scene.landmarks[v_idx],
                            &scene.landmarks[g_idx],
                        ),
                        target_index: g_idx,
                        start_pose: Pose::new(start, 0.0),
                        waypoints,
                        difficulty,
                    });
                }
            }
            Err(GenError::Geometry { difficulty })
        }
    }
}

/// Structural checks every generated episode must satisfy.
pub fn validate_episode(episode: &Episode, scene: &Scene, config: &WorldConfig) -> Result<(), String> {
    let goal = scene.landmarks[episode.target_index].position;
    let last = episode
        .waypoints
        .last()
        .ok_or_else(|| String::from("empty waypoint list"))?;
    if *last != goal {
        return Err(String::from("final waypoint is not the target position"));
    }
    let mut prev = episode.start_pose.position;
    for (i, w) in episode.waypoints.iter().enumerate() {
        let d = dist3(&prev, w);
        if d > config.step_max + 1e-9 {
            return Err(format!("step {i} spacing {d} exceeds {}", config.step_max));
        }
        for a in 0..3 {
            if w[a] < config.bounds.min[a] - 1e-9 || w[a] > config.bounds.max[a] + 1e-9 {
                return Err(format!("waypoint {i} out of bounds on axis {a}"));
            }
        }
        prev = *w;
    }
    let len = path_length(&episode.start_pose.position, &episode.waypoints);
    if !(MIN_PATH_LEN..=MAX_PATH_LEN).contains(&len) {
        return Err(format!("path length {len} outside [{MIN_PATH_LEN}, {MAX_PATH_LEN}]"));
    }
    Ok(())
}

/// Classify a body-frame offset into exactly one view. The bottom camera
/// owns the 45° downward cone; the four side views partition the rest by
/// azimuth with ties going to front/rear.
pub fn classify_view(body: [f64; 3]) -> View {
    let (bx, by, bz) = (body[0], body[1], body[2]);
    if bz < 0.0 && libm::hypot(bx, by) <= -bz {
        return View::Bottom;
    }
    let a = libm::fabs(by);
    if bx >= a {
        View::Front
    } else if -bx >= a {
        View::Rear
    } else if by > 0.0 {
        View::Left
    } else {
        View::Right
    }
}

/// Render the five view token sets at `pose`. Offsets are expressed in the
/// body frame (x forward along yaw, y left, z up); each visible landmark
/// appears in exactly one view; views keep at most `max_view_tokens`
/// nearest landmarks and contain a single zero token when empty.
pub fn observe(scene: &Scene, pose: &Pose, config: &WorldConfig) -> Observation {
    let (s, c) = (libm::sin(pose.yaw), libm::cos(pose.yaw));
    // (view, dist, landmark index, body offset)
    let mut hits: [Vec<(f64, usize, [f64; 3])>; 5] = Default::default();
    for (i, lm) in scene.landmarks.iter().enumerate() {
        let d = [
            lm.position[0] - pose.position[0],
            lm.position[1] - pose.position[1],
            lm.position[2] - pose.position[2],
        ];
        let dist = libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if dist > config.vis_range || dist < 1e-9 {
            continue;
        }
        let body = [c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]];
        let view = classify_view(body);
        hits[view as usize].push((dist, i, body));
    }

    let views = core::array::from_fn(|v| {
        let list = &mut hits[v];
        list.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        list.truncate(config.max_view_tokens);
        if list.is_empty() {
            return Matrix::zeros(1, D_FEAT);
        }
        let mut m = Matrix::zeros(list.len(), D_FEAT);
        for (r, (dist, i, body)) in list.iter().enumerate() {
            let lm = &scene.landmarks[*i];
            let ce = attr_embedding(0, lm.color);
            let ke = attr_embedding(1, lm.kind);
            let row = m.row_mut(r);
            row[..D_ATTR].copy_from_slice(&ce);
            row[D_ATTR..2 * D_ATTR].copy_from_slice(&ke);
            row[2 * D_ATTR] = body[0];
            row[2 * D_ATTR + 1] = body[1];
            row[2 * D_ATTR + 2] = body[2];
            row[2 * D_ATTR + 3] = *dist;
        }
        m
    });
    Observation { views }
}

/// Execute one waypoint command: clamp to bounds, move there, align yaw
/// with the horizontal motion direction (unchanged for near-vertical or
/// zero motion).
pub fn step(pose: &Pose, waypoint: [f64; 3], config: &WorldConfig) -> Pose {
    let mut w = waypoint;
    for a in 0..3 {
        w[a] = w[a].clamp(config.bounds.min[a], config.bounds.max[a]);
    }
    let dx = w[0] - pose.position[0];
    let dy = w[1] - pose.position[1];
    let yaw = if libm::hypot(dx, dy) < 1e-9 {
        pose.yaw
    } else {
        libm::atan2(dy, dx)
    };
    Pose::new(w, yaw)
}
