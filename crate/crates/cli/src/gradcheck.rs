//! Finite-difference verification of the analytic gradients, on small
//! dimensions (≤ 8). Central differences with ε = 1e-5; every check must
//! land within relative error 1e-4 (`max |a−b| / max(1, |a|, |b|)`).

use slotnav_core::model::{
    assemble_episode_loss, Ablation, EpisodeRuntime, ModelConfig, ModelParams, NavModel,
};
use slotnav_core::numkit::{
    fd_gradient, max_rel_err, GruParams, Matrix, Mlp2Params, Tape,
};
use slotnav_core::pgm::ReasonerConfig;
use slotnav_core::rng::rng_for;
use slotnav_core::shic::SlotParams;
use slotnav_core::ste::SteConfig;
use slotnav_core::worldsim::{self, Difficulty, WorldConfig};

use crate::error::CliError;

pub const FD_EPS: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub rel_err: f64,
}

impl CheckResult {
    pub fn ok(&self) -> bool {
        self.rel_err.is_finite() && self.rel_err < GRAD_TOL
    }
}

/// Relative error between the tape gradient and a finite-difference probe
/// of `build` with respect to `theta`. The builder returns (loss node,
/// theta node).
fn check<F>(theta: &Matrix, mut build: F) -> f64
where
    F: FnMut(&mut Tape, &Matrix) -> (slotnav_core::numkit::NodeId, slotnav_core::numkit::NodeId),
{
    let mut tape = Tape::new();
    let (loss, tid) = build(&mut tape, theta);
    let grads = tape.backward(loss);
    let analytic = grads
        .get(tid)
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(theta.rows, theta.cols));
    let fd = fd_gradient(
        |probe| {
            let mut t = Tape::new();
            let (l, _) = build(&mut t, probe);
            t.value(l).data[0]
        },
        theta,
        FD_EPS,
    )
    .expect("finite probes");
    max_rel_err(&analytic, &fd)
}

/// Run the whole suite; deterministic in `seed`.
pub fn run_suite(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name: &str, rel_err: f64| {
        out.push(CheckResult {
            name: name.to_string(),
            rel_err,
        })
    };

    let mut rng = rng_for(seed, &[0x6c]);
    let x = Matrix::randn(2, 5, 1.0, &mut rng);
    let tgt = Matrix::randn(2, 3, 1.0, &mut rng);

    // Affine map.
    let w = Matrix::randn(3, 5, 1.0, &mut rng);
    let b = Matrix::randn(1, 3, 0.5, &mut rng);
    {
        let x = x.clone();
        let b = b.clone();
        let tgt = tgt.clone();
        push(
            "linear/w",
            check(&w, move |t, th| {
                let xn = t.constant(x.clone());
                let wn = t.input(th.clone());
                let bn = t.input(b.clone());
                let y = t.linear_t(xn, wn, bn);
                let tn = t.constant(tgt.clone());
                (t.mean_sq_diff(y, tn), wn)
            }),
        );
    }

    // Two-layer MLP, both output modes.
    for outer_relu in [false, true] {
        let mlp = Mlp2Params::init(5, 7, 3, 1.0, &mut rng);
        let x = x.clone();
        let tgt = tgt.clone();
        let frozen = mlp.clone();
        push(
            &format!("mlp2/w1(outer_relu={outer_relu})"),
            check(&mlp.w1, move |t, th| {
                let mut p = frozen.clone();
                p.w1 = th.clone();
                let pn = t.insert_mlp2(&p);
                let xn = t.constant(x.clone());
                let y = t.mlp2(xn, &pn, outer_relu);
                let tn = t.constant(tgt.clone());
                (t.mean_sq_diff(y, tn), pn.w1)
            }),
        );
    }

    // GRU through two steps (credit over time).
    let gru = GruParams::init(4, 4, &mut rng);
    let x1 = Matrix::randn(1, 4, 1.0, &mut rng);
    let x2 = Matrix::randn(1, 4, 1.0, &mut rng);
    let h0 = Matrix::randn(1, 4, 1.0, &mut rng);
    let gtgt = Matrix::randn(1, 4, 1.0, &mut rng);
    for field in ["wz", "uh", "br"] {
        let gru = gru.clone();
        let (x1, x2, h0, gtgt) = (x1.clone(), x2.clone(), h0.clone(), gtgt.clone());
        let theta = match field {
            "wz" => gru.wz.clone(),
            "uh" => gru.uh.clone(),
            _ => gru.br.clone(),
        };
        push(
            &format!("gru2/{field}"),
            check(&theta, move |t, th| {
                let mut p = gru.clone();
                match field {
                    "wz" => p.wz = th.clone(),
                    "uh" => p.uh = th.clone(),
                    _ => p.br = th.clone(),
                }
                let pn = t.insert_gru(&p);
                let a = t.constant(x1.clone());
                let b = t.constant(x2.clone());
                let h = t.constant(h0.clone());
                let h1 = t.gru_step(a, h, &pn);
                let h2 = t.gru_step(b, h1, &pn);
                let tn = t.constant(gtgt.clone());
                let tid = match field {
                    "wz" => pn.wz,
                    "uh" => pn.uh,
                    _ => pn.br,
                };
                (t.mean_sq_diff(h2, tn), tid)
            }),
        );
    }

    // Slot attention + fold through two observations.
    let slot = SlotParams::init(3, 4, &mut rng);
    let z1 = Matrix::randn(2, 4, 1.0, &mut rng);
    let z2 = Matrix::randn(3, 4, 1.0, &mut rng);
    let stgt = Matrix::randn(3, 4, 1.0, &mut rng);
    for field in ["phi", "wq", "wv"] {
        let slot = slot.clone();
        let (z1, z2, stgt) = (z1.clone(), z2.clone(), stgt.clone());
        let theta = match field {
            "phi" => slot.phi.clone(),
            "wq" => slot.wq.clone(),
            _ => slot.wv.clone(),
        };
        push(
            &format!("slotfold2/{field}"),
            check(&theta, move |t, th| {
                let mut p = slot.clone();
                match field {
                    "phi" => p.phi = th.clone(),
                    "wq" => p.wq = th.clone(),
                    _ => p.wv = th.clone(),
                }
                let pn = t.insert_slot_params(&p);
                let a = t.constant(z1.clone());
                let b = t.constant(z2.clone());
                let s1 = t.slot_fold(pn.phi, a, &pn);
                let s2 = t.slot_fold(s1, b, &pn);
                let tn = t.constant(stgt.clone());
                let tid = match field {
                    "phi" => pn.phi,
                    "wq" => pn.wq,
                    _ => pn.wv,
                };
                (t.mean_sq_diff(s2, tn), tid)
            }),
        );
    }

    // Full model: two teacher-forced steps of a real episode.
    let cfg = ModelConfig {
        d: 6,
        d_l: 6,
        slots: 3,
        ste: SteConfig {
            d_t: 4,
            hidden: 6,
            d_m: 5,
            outer_relu: false,
        },
        reasoner: ReasonerConfig {
            d_u: 8,
            layers: 2,
            heads: 2,
            mlp_hidden: 8,
        },
        init_seed: seed ^ 0x11,
        ..ModelConfig::default()
    };
    // Dense world: with the default 12 landmarks a view often holds a single
    // token, and softmax over one token has an exactly-zero gradient into the
    // keys — the wk check would pass vacuously (0 == 0).
    let wc = WorldConfig {
        n_landmarks: 40,
        ..WorldConfig::default()
    };
    let scene = worldsim::generate_scene(&wc, seed ^ 0x22).unwrap();
    let ep = worldsim::generate_episode(&scene, &wc, seed ^ 0x33, Difficulty::Easy).unwrap();
    let model = NavModel::new(cfg, wc.vocab.clone());

    let episode_loss = |params: &ModelParams| -> f64 {
        let m = NavModel {
            params: params.clone(),
            ..model.clone()
        };
        let mut rt =
            EpisodeRuntime::new(&m, &ep.instruction, ep.start_pose, Ablation::default()).unwrap();
        let mut ways = Vec::new();
        let mut stops = Vec::new();
        let n = 2usize;
        let mut wt = Matrix::zeros(n, 3);
        let mut st = Matrix::zeros(1, n);
        for t in 0..n {
            let obs = worldsim::observe(&scene, &rt.pose(), &wc);
            let o = rt.act(&obs);
            ways.push(o.way);
            stops.push(o.stop);
            let pos = rt.pose().position;
            for c in 0..3 {
                *wt.at_mut(t, c) = ep.waypoints[t][c] - pos[c];
            }
            if t == n - 1 {
                *st.at_mut(0, t) = 1.0;
            }
            let next = worldsim::step(&rt.pose(), ep.waypoints[t], &wc);
            rt.advance(next);
        }
        let (loss, _, _) = assemble_episode_loss(&mut rt.tape, &ways, &stops, &wt, &st, 0.1);
        rt.tape.value(loss).data[0]
    };

    // Analytic gradients once.
    let full_grads: Vec<Matrix> = {
        let mut rt = EpisodeRuntime::new(&model, &ep.instruction, ep.start_pose, Ablation::default())
            .unwrap();
        let mut ways = Vec::new();
        let mut stops = Vec::new();
        let n = 2usize;
        let mut wt = Matrix::zeros(n, 3);
        let mut st = Matrix::zeros(1, n);
        for t in 0..n {
            let obs = worldsim::observe(&scene, &rt.pose(), &wc);
            let o = rt.act(&obs);
            ways.push(o.way);
            stops.push(o.stop);
            let pos = rt.pose().position;
            for c in 0..3 {
                *wt.at_mut(t, c) = ep.waypoints[t][c] - pos[c];
            }
            if t == n - 1 {
                *st.at_mut(0, t) = 1.0;
            }
            let next = worldsim::step(&rt.pose(), ep.waypoints[t], &wc);
            rt.advance(next);
        }
        let (loss, _, _) = assemble_episode_loss(&mut rt.tape, &ways, &stops, &wt, &st, 0.1);
        rt.backward(loss)
    };

    let named = model.params.named();
    for probe_name in [
        "shic.shared.phi",
        "shic.shared.wq",
        "shic.shared.wk",
        "shic.shared.wv",
        "shic.shared.gru.wz",
        "shic.shared.gru.uh",
        "ste.w1",
        "ste.w2",
        "pgm.w_l",
        "pgm.p_v",
        "pgm.p_m",
        "pgm.seg",
        "pgm.layer0.head0.wq",
        "pgm.layer0.head1.wv",
        "pgm.layer1.mlp.w2",
        "pgm.w_way",
        "pgm.w_stop",
    ] {
        let idx = named
            .iter()
            .position(|(n, _)| n == probe_name)
            .unwrap_or_else(|| panic!("unknown registry name {probe_name}"));
        let theta = named[idx].1.clone();
        assert!(
            full_grads[idx].data.iter().any(|&g| g != 0.0),
            "vacuous gradient check: {probe_name} has an all-zero analytic gradient"
        );
        let fd = fd_gradient(
            |probe| {
                let mut p = model.params.clone();
                let mut i = 0;
                p.visit_mut(&mut |_, m| {
                    if i == idx {
                        *m = probe.clone();
                    }
                    i += 1;
                });
                episode_loss(&p)
            },
            &theta,
            FD_EPS,
        )
        .expect("finite probes");
        push(
            &format!("episode/{probe_name}"),
            max_rel_err(&full_grads[idx], &fd),
        );
    }

    out
}

/// Run and pretty-print the suite; `Err(Numeric)` if any check fails.
pub fn run_and_render(seed: u64) -> Result<String, CliError> {
    let results = run_suite(seed);
    let mut text = String::new();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        text.push_str(&format!(
            "{:<width$}  rel_err {:10.3e}  {}\n",
            r.name,
            r.rel_err,
            if r.ok() { "ok" } else { "FAIL" },
        ));
    }
    let n_fail = results.iter().filter(|r| !r.ok()).count();
    text.push_str(&format!(
        "{} checks, {} failed (tolerance {GRAD_TOL:.0e})\n",
        results.len(),
        n_fail
    ));
    if n_fail > 0 {
        Err(CliError::numeric(format!(
            "{n_fail} gradient checks exceeded tolerance:\n{text}"
        )))
    } else {
        Ok(text)
    }
}
