//! Subcommand implementations. Thin argument structs (clap) over library
//! calls; every command is deterministic given its flags and input files.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};

use slotnav_core::evalkit::{
    self, Agent, EvalConfig, FixedAgent, ModelAgent, RandomAgent, ReplayAgent, Report,
};
use slotnav_core::model::{Ablation, EpisodeRuntime, NavModel};
use slotnav_core::rng::derive_seed;
use slotnav_core::trainer::{self, AdamState, LogRecord, SceneCache};
use slotnav_core::worldsim::{self, Difficulty, Episode, Pose};

use crate::config::{apply_overrides, RunConfig};
use crate::error::CliError;
use crate::formats::{
    load_checkpoint, read_dataset, save_checkpoint, write_dataset, write_json_pretty,
    write_jsonl, Checkpoint, DatasetManifest,
};

const GEN_SCENE_TAG: u64 = 0x6e5c;
const GEN_EP_TAG: u64 = 0x6ee9;
const EPISODE_RETRIES: u64 = 100;

#[derive(Args, Debug, Clone)]
pub struct GenDataArgs {
    /// Output dataset path (.jsonl); the sidecar config lands next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of distinct scenes to spread episodes over.
    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
    /// Easy episodes (straight flight to a visible target).
    #[arg(long, default_value_t = 32)]
    pub easy: usize,
    /// Hard episodes (turn at a via landmark; target unseen from there).
    #[arg(long, default_value_t = 0)]
    pub hard: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Config overrides, e.g. --set world.n_landmarks=9
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

pub fn gen_data(args: &GenDataArgs) -> Result<DatasetManifest, CliError> {
    if args.scenes == 0 {
        return Err(CliError::config("--scenes must be at least 1"));
    }
    if args.easy + args.hard == 0 {
        return Err(CliError::config("dataset would be empty (--easy 0 --hard 0)"));
    }
    let mut cfg = RunConfig::default();
    apply_overrides(&mut cfg, &args.sets)?;
    let wc = cfg.world.clone();

    let scene_seeds: Vec<u64> = (0..args.scenes)
        .map(|i| derive_seed(args.seed, &[GEN_SCENE_TAG, i as u64]))
        .collect();
    let mut scenes = Vec::with_capacity(scene_seeds.len());
    for &s in &scene_seeds {
        scenes.push((s, worldsim::generate_scene(&wc, s)?));
    }

    let mut episodes: Vec<Episode> = Vec::with_capacity(args.easy + args.hard);
    for (count, difficulty) in [(args.easy, Difficulty::Easy), (args.hard, Difficulty::Hard)] {
        for j in 0..count {
            let (_, scene) = &scenes[j % scenes.len()];
            let mut placed = None;
            for attempt in 0..EPISODE_RETRIES {
                let ep_seed = derive_seed(
                    args.seed,
                    &[GEN_EP_TAG, difficulty as u64, j as u64, attempt],
                );
                match worldsim::generate_episode(scene, &wc, ep_seed, difficulty) {
                    Ok(ep) => {
                        placed = Some(ep);
                        break;
                    }
                    Err(worldsim::GenError::Geometry { .. }) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            episodes.push(placed.ok_or_else(|| {
                CliError::config(format!(
                    "couldn't fit a {difficulty:?} episode in scene {} after {EPISODE_RETRIES} tries",
                    j % scenes.len()
                ))
            })?);
        }
    }

    let manifest = DatasetManifest {
        world: wc,
        seed: args.seed,
        n_scenes: args.scenes,
        n_easy: args.easy,
        n_hard: args.hard,
    };
    write_dataset(&args.out, &episodes, &manifest)?;
    Ok(manifest)
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Training dataset (.jsonl with sidecar config).
    #[arg(long)]
    pub data: PathBuf,
    /// Output checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Validation dataset; when given, the kept checkpoint is the one with
    /// the best (lowest) median validation NE, probed every train.val_every
    /// steps.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Training log (JSONL, no timestamps).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Resume from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Config overrides, e.g. --set train.lr=5e-4
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub steps_run: usize,
    pub final_loss: Option<f64>,
    pub records: Vec<LogRecord>,
}

pub fn train(args: &TrainArgs) -> Result<TrainSummary, CliError> {
    let (episodes, manifest) = read_dataset(&args.data)?;
    let mut cfg = RunConfig {
        world: manifest.world.clone(),
        ..RunConfig::default()
    };

    let resume = match &args.resume {
        Some(p) => Some(load_checkpoint(p)?),
        None => None,
    };
    if let Some(ck) = &resume {
        cfg.model = ck.model.clone();
    }
    let before_world = cfg.world.clone();
    let before_model = resume.as_ref().map(|c| c.model.clone());
    apply_overrides(&mut cfg, &args.sets)?;
    if cfg.world != before_world {
        return Err(CliError::config(
            "world.* is fixed by the dataset sidecar and cannot be overridden at train time",
        ));
    }
    if let Some(bm) = before_model {
        if cfg.model != bm {
            return Err(CliError::config(
                "model.* is fixed by the checkpoint and cannot be overridden on resume",
            ));
        }
    }

    let (mut model, mut opt, start) = match resume {
        Some(ck) => {
            if ck.vocab != manifest.world.vocab {
                return Err(CliError::config(
                    "checkpoint vocabulary differs from the dataset vocabulary",
                ));
            }
            let model = NavModel::from_parts(ck.model, ck.params, ck.vocab);
            (model, ck.opt, ck.step)
        }
        None => {
            let model = NavModel::new(cfg.model.clone(), manifest.world.vocab.clone());
            let opt = AdamState::new(&model.params);
            (model, opt, 0)
        }
    };
    let end = cfg.train.steps;
    if start >= end {
        return Err(CliError::config(format!(
            "checkpoint already at step {start}; train.steps={end} adds nothing"
        )));
    }

    let val = match &args.val {
        Some(p) => {
            let (val_eps, val_manifest) = read_dataset(p)?;
            if val_manifest.world != manifest.world {
                return Err(CliError::config(
                    "validation dataset was generated under a different world config",
                ));
            }
            Some(val_eps)
        }
        None => None,
    };

    let mut records: Vec<LogRecord> = Vec::new();
    let mut scenes = SceneCache::new();
    // Best-by-validation-NE checkpoint: (step, median NE, params, opt).
    let mut best: Option<(usize, f64, slotnav_core::model::ModelParams, AdamState)> = None;
    let chunk = match &val {
        Some(_) => cfg.train.val_every.max(1),
        None => end - start,
    };
    let mut s = start;
    while s < end {
        let e = (s + chunk).min(end);
        trainer::run_steps(
            &mut model,
            &mut opt,
            &episodes,
            &manifest.world,
            &cfg.train,
            s,
            e,
            &mut scenes,
            &mut |r| {
                eprintln!(
                    "step {:>6}  loss {:<12.6} way_mse {:<12.6} stop_bce {:<10.6} ss_p {:.4}",
                    r.step, r.loss, r.way_mse, r.stop_bce, r.ss_p
                );
                records.push(r.clone());
            },
        )?;
        if let Some(val_eps) = &val {
            let mut agent = ModelAgent::new(&model, Ablation::default());
            let (_, report) =
                evalkit::evaluate(&mut agent, val_eps, &manifest.world, &cfg.eval)?;
            let (ne, sr) = (report.full.ne_median, report.full.sr);
            eprintln!("validation @ step {e}: median NE {ne:.2} m, SR {sr:.3}");
            if let Some(r) = records.last_mut() {
                if r.step + 1 == e {
                    r.val_ne = Some(ne);
                    r.val_sr = Some(sr);
                }
            }
            if best.as_ref().is_none_or(|(_, b, _, _)| ne < *b) {
                best = Some((e, ne, model.params.clone(), opt.clone()));
            }
        }
        s = e;
    }

    if let Some(log_path) = &args.log {
        if args.resume.is_some() && log_path.exists() {
            let mut old: Vec<LogRecord> = crate::formats::read_jsonl(log_path)?;
            old.extend(records.iter().cloned());
            write_jsonl(log_path, &old)?;
        } else {
            write_jsonl(log_path, &records)?;
        }
    }

    let (ckpt_step, ckpt_params, ckpt_opt) = match best {
        Some((step, _, params, opt)) => (step, params, opt),
        None => (end, model.params.clone(), opt),
    };
    let ckpt = Checkpoint::new(ckpt_step, model.cfg.clone(), model.vocab.clone(), ckpt_params, ckpt_opt);
    save_checkpoint(&args.out, &ckpt)?;
    Ok(TrainSummary {
        steps_run: end - start,
        final_loss: records.last().map(|r| r.loss),
        records,
    })
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    /// The trained model (requires --ckpt).
    Model,
    /// Replays ground-truth waypoints (skyline).
    Replay,
    /// Seeded random walk (floor).
    Random,
    /// Constant displacement, never stops.
    Fixed,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Evaluation dataset (.jsonl with sidecar config).
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to evaluate (agent = model).
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write per-episode trajectory logs here (JSONL).
    #[arg(long)]
    pub logs: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AgentKind::Model)]
    pub agent: AgentKind,
    /// Structurally remove the visual-history segments at eval time.
    #[arg(long)]
    pub no_shic: bool,
    /// Structurally remove the trajectory segment at eval time.
    #[arg(long)]
    pub no_ste: bool,
    /// Seed for the random agent.
    #[arg(long, default_value_t = 0)]
    pub agent_seed: u64,
    /// Config overrides, e.g. --set eval.success_radius=20
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

pub fn eval(args: &EvalArgs) -> Result<(Report, String), CliError> {
    let (episodes, manifest) = read_dataset(&args.data)?;
    let mut cfg = RunConfig {
        world: manifest.world.clone(),
        ..RunConfig::default()
    };
    let before_world = cfg.world.clone();
    apply_overrides(&mut cfg, &args.sets)?;
    if cfg.world != before_world {
        return Err(CliError::config(
            "world.* is fixed by the dataset sidecar and cannot be overridden at eval time",
        ));
    }
    let ecfg: EvalConfig = cfg.eval;

    let ablation = Ablation {
        disable_shic: args.no_shic,
        disable_ste: args.no_ste,
    };

    let model = match (args.agent, &args.ckpt) {
        (AgentKind::Model, Some(p)) => {
            let ck = load_checkpoint(p)?;
            if ck.vocab != manifest.world.vocab {
                return Err(CliError::config(
                    "checkpoint vocabulary differs from the dataset vocabulary",
                ));
            }
            Some(NavModel::from_parts(ck.model, ck.params, ck.vocab))
        }
        (AgentKind::Model, None) => {
            return Err(CliError::config("--agent model requires --ckpt"));
        }
        _ => None,
    };

    let step_len = manifest.world.step_max * 0.95;
    let mut model_agent;
    let mut replay_agent;
    let mut random_agent;
    let mut fixed_agent;
    let agent: &mut dyn Agent = match args.agent {
        AgentKind::Model => {
            model_agent = ModelAgent::new(model.as_ref().expect("checked above"), ablation);
            &mut model_agent
        }
        AgentKind::Replay => {
            replay_agent = ReplayAgent::default();
            &mut replay_agent
        }
        AgentKind::Random => {
            random_agent = RandomAgent::new(args.agent_seed, step_len);
            &mut random_agent
        }
        AgentKind::Fixed => {
            fixed_agent = FixedAgent {
                displacement: [step_len, 0.0, 0.0],
            };
            &mut fixed_agent
        }
    };

    let (logs, report) = evalkit::evaluate(agent, &episodes, &manifest.world, &ecfg)?;
    if let Some(p) = &args.logs {
        write_jsonl(p, &logs)?;
    }
    if let Some(p) = &args.report {
        write_json_pretty(p, &report)?;
    }
    let table = crate::formats::render_report_table(&report);
    Ok((report, table))
}

#[derive(Args, Debug, Clone)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct InspectArgs {
    /// Dataset holding the episode to inspect.
    #[arg(long)]
    pub data: PathBuf,
    /// Episode index within the dataset.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Optional checkpoint (otherwise a freshly initialized model).
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Ground-truth steps to execute before rendering.
    #[arg(long, default_value_t = 3)]
    pub steps: usize,
    /// Config overrides for the fresh-model case, e.g. --set model.slots=8
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

fn fmt_pos(p: &[f64; 3]) -> String {
    format!("[{:.2}, {:.2}, {:.2}]", p[0], p[1], p[2])
}

/// Render the assembled prompt state of one episode after a few
/// teacher-forced steps, as a fixed-section text block.
pub fn inspect_prompt(args: &InspectArgs) -> Result<String, CliError> {
    let (episodes, manifest) = read_dataset(&args.data)?;
    let ep = episodes
        .get(args.index)
        .ok_or_else(|| {
            CliError::config(format!(
                "episode index {} out of range ({} episodes)",
                args.index,
                episodes.len()
            ))
        })?
        .clone();
    let mut cfg = RunConfig {
        world: manifest.world.clone(),
        ..RunConfig::default()
    };
    apply_overrides(&mut cfg, &args.sets)?;

    let model = match &args.ckpt {
        Some(p) => {
            let ck = load_checkpoint(p)?;
            NavModel::from_parts(ck.model, ck.params, ck.vocab)
        }
        None => NavModel::new(cfg.model.clone(), manifest.world.vocab.clone()),
    };

    let mut scenes = SceneCache::new();
    let scene = scenes.get(ep.scene_seed, &manifest.world)?.clone();
    let mut rt = EpisodeRuntime::new(&model, &ep.instruction, ep.start_pose, Ablation::default())
        .map_err(CliError::from)?;
    let k = args.steps.min(ep.waypoints.len());
    for t in 0..k {
        let obs = worldsim::observe(&scene, &rt.pose(), &manifest.world);
        let _ = rt.act(&obs);
        let next = worldsim::step(&rt.pose(), ep.waypoints[t], &manifest.world);
        rt.advance(next);
    }
    let obs = worldsim::observe(&scene, &rt.pose(), &manifest.world);
    let out = rt.act(&obs);

    let mut s = String::new();
    writeln!(s, "INSTRUCTION").unwrap();
    writeln!(s, "  {}", ep.instruction).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "STATUS").unwrap();
    writeln!(s, "  step {} of {}", k, model.cfg.max_steps).unwrap();
    let pose: Pose = rt.pose();
    writeln!(
        s,
        "  position {}  yaw {:.2} rad",
        fmt_pos(&pose.position),
        pose.yaw
    )
    .unwrap();
    writeln!(s, "  predicted waypoint {}", {
        let p = pose.position;
        fmt_pos(&[
            p[0] + out.way_value[0],
            p[1] + out.way_value[1],
            p[2] + out.way_value[2],
        ])
    })
    .unwrap();
    writeln!(s, "  stop probability {:.2}", out.stop_prob).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "HISTORY WAYPOINTS").unwrap();
    let positions = rt.positions();
    writeln!(s, "  start: {}", fmt_pos(&positions[0])).unwrap();
    if positions.len() == 1 {
        writeln!(s, "  (none executed)").unwrap();
    }
    for (i, p) in positions.iter().enumerate().skip(1) {
        writeln!(s, "  {}: {}", i, fmt_pos(p)).unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "CONTEXT SUMMARY").unwrap();
    for &(seg, _, len) in &out.layout.spans {
        writeln!(s, "  {:<16} {:>4} tokens", seg.name(), len).unwrap();
    }
    writeln!(
        s,
        "  {:<16} {:>4} tokens (width {})",
        "total",
        out.layout.total_rows,
        model.cfg.reasoner.d_u
    )
    .unwrap();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_sets() -> Vec<String> {
        vec![
            "model.d=8".into(),
            "model.d_l=8".into(),
            "model.slots=4".into(),
            "model.ste.d_t=4".into(),
            "model.ste.hidden=8".into(),
            "model.ste.d_m=6".into(),
            "model.reasoner.d_u=8".into(),
            "model.reasoner.layers=1".into(),
            "model.reasoner.heads=2".into(),
            "model.reasoner.mlp_hidden=8".into(),
        ]
    }

    #[test]
    fn gen_train_eval_inspect_pipeline() {
        let dir = tempdir().unwrap();
        let data = dir.path().join("train.jsonl");
        let ckpt = dir.path().join("model.ckpt.json");
        let log = dir.path().join("log.jsonl");
        let report = dir.path().join("report.json");

        let g = GenDataArgs {
            out: data.clone(),
            scenes: 2,
            easy: 6,
            hard: 2,
            seed: 5,
            sets: vec![],
        };
        gen_data(&g).unwrap();
        let (eps, manifest) = read_dataset(&data).unwrap();
        assert_eq!(eps.len(), 8);
        assert_eq!(manifest.n_easy, 6);
        assert_eq!(
            eps.iter().filter(|e| e.difficulty == Difficulty::Hard).count(),
            2
        );

        let mut sets = small_sets();
        sets.push("train.steps=3".into());
        sets.push("train.batch_size=2".into());
        let t = TrainArgs {
            data: data.clone(),
            out: ckpt.clone(),
            val: None,
            log: Some(log.clone()),
            resume: None,
            sets,
        };
        let summary = train(&t).unwrap();
        assert_eq!(summary.steps_run, 3);
        assert!(ckpt.exists() && log.exists());

        let e = EvalArgs {
            data: data.clone(),
            ckpt: Some(ckpt.clone()),
            report: Some(report.clone()),
            logs: None,
            agent: AgentKind::Model,
            no_shic: false,
            no_ste: false,
            agent_seed: 0,
            sets: vec!["eval.max_steps=8".into()],
        };
        let (r, table) = eval(&e).unwrap();
        assert_eq!(r.full.n, 8);
        assert!(table.contains("full"));
        assert!(report.exists());

        let i = InspectArgs {
            data: data.clone(),
            index: 0,
            ckpt: Some(ckpt.clone()),
            steps: 2,
            sets: vec![],
        };
        let text = inspect_prompt(&i).unwrap();
        let idx = |needle: &str| text.find(needle).unwrap_or_else(|| panic!("missing {needle}"));
        let a = idx("INSTRUCTION");
        let b = idx("STATUS");
        let c = idx("HISTORY WAYPOINTS");
        let d = idx("CONTEXT SUMMARY");
        assert!(a < b && b < c && c < d, "sections out of order:\n{text}");
        assert!(text.contains("Fly to the"));
        assert!(text.contains("stop probability"));
        assert!(text.contains("readout"));
        // Positions render with two decimals.
        assert!(text.contains("start: ["));
    }

    #[test]
    fn resume_continues_training() {
        let dir = tempdir().unwrap();
        let data = dir.path().join("train.jsonl");
        let ck1 = dir.path().join("m1.ckpt.json");
        let ck2 = dir.path().join("m2.ckpt.json");
        gen_data(&GenDataArgs {
            out: data.clone(),
            scenes: 1,
            easy: 4,
            hard: 0,
            seed: 6,
            sets: vec![],
        })
        .unwrap();

        let mut sets = small_sets();
        sets.push("train.steps=2".into());
        sets.push("train.batch_size=2".into());
        train(&TrainArgs {
            data: data.clone(),
            out: ck1.clone(),
            val: None,
            log: None,
            resume: None,
            sets: sets.clone(),
        })
        .unwrap();

        // Resume to step 4.
        let mut sets2: Vec<String> = vec!["train.steps=4".into(), "train.batch_size=2".into()];
        train(&TrainArgs {
            data: data.clone(),
            out: ck2.clone(),
            val: None,
            log: None,
            resume: Some(ck1.clone()),
            sets: sets2.clone(),
        })
        .unwrap();

        // Straight 4-step run matches the resumed one bit-for-bit.
        let ck_direct = dir.path().join("direct.ckpt.json");
        sets2 = small_sets();
        sets2.push("train.steps=4".into());
        sets2.push("train.batch_size=2".into());
        train(&TrainArgs {
            data: data.clone(),
            out: ck_direct.clone(),
            val: None,
            log: None,
            resume: None,
            sets: sets2,
        })
        .unwrap();
        let a = load_checkpoint(&ck2).unwrap();
        let b = load_checkpoint(&ck_direct).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.step, 4);

        // Model overrides on resume are rejected.
        let err = train(&TrainArgs {
            data,
            out: ck2,
            val: None,
            log: None,
            resume: Some(ck1),
            sets: vec!["train.steps=6".into(), "model.slots=16".into()],
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn eval_requires_checkpoint_for_model_agent() {
        let dir = tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        gen_data(&GenDataArgs {
            out: data.clone(),
            scenes: 1,
            easy: 2,
            hard: 0,
            seed: 8,
            sets: vec![],
        })
        .unwrap();
        let err = eval(&EvalArgs {
            data,
            ckpt: None,
            report: None,
            logs: None,
            agent: AgentKind::Model,
            no_shic: false,
            no_ste: false,
            agent_seed: 0,
            sets: vec![],
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn replay_via_cli_reaches_full_success() {
        let dir = tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        let logs = dir.path().join("traj.jsonl");
        gen_data(&GenDataArgs {
            out: data.clone(),
            scenes: 1,
            easy: 3,
            hard: 2,
            seed: 9,
            sets: vec![],
        })
        .unwrap();
        let (r, _) = eval(&EvalArgs {
            data,
            ckpt: None,
            report: None,
            logs: Some(logs.clone()),
            agent: AgentKind::Replay,
            no_shic: false,
            no_ste: false,
            agent_seed: 0,
            sets: vec![],
        })
        .unwrap();
        assert_eq!(r.full.sr, 1.0);
        assert_eq!(r.full.osr, 1.0);
        let lines: Vec<slotnav_core::evalkit::TrajectoryLog> =
            crate::formats::read_jsonl(&logs).unwrap();
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn world_overrides_after_generation_are_rejected() {
        let dir = tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        gen_data(&GenDataArgs {
            out: data.clone(),
            scenes: 1,
            easy: 2,
            hard: 0,
            seed: 1,
            sets: vec![],
        })
        .unwrap();
        let err = train(&TrainArgs {
            data,
            out: dir.path().join("x.json"),
            val: None,
            log: None,
            resume: None,
            sets: vec!["world.vis_range=50".into(), "train.steps=1".into()],
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
