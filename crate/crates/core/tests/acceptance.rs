//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p aclab --release --test acceptance` runs everything; numeric
//! arguments after `--` select criteria, e.g. `-- 1 3 10`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use aclab::agents::{
    ActorCritic, AgentBundle, AgentConfig, Algorithm, Architecture, CriticKind, NoiseSchedule,
};
use aclab::env::ActionBounds;
use aclab::harness::{
    checkpoint_mean, run_training, EnvironmentKind, ExperimentConfig, Metric, Task,
};
use aclab::nn::Network;
use aclab::parallel::warmup_offset;
use aclab::{ReplayBuffer, Transition};
use common::*;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mlp(obs_len: usize, action_len: usize) -> Architecture {
    Architecture::Mlp {
        obs_len,
        action_len,
        bounds: ActionBounds::Unit,
    }
}

fn config(algorithm: Algorithm) -> AgentConfig {
    AgentConfig::for_algorithm(algorithm, 0.9, NoiseSchedule::standard(10_000).unwrap())
}

fn random_batch(obs_len: usize, action_len: usize, n: usize, r: &mut impl Rng) -> Vec<Transition> {
    (0..n)
        .map(|_| {
            let s: Vec<f64> = (0..obs_len).map(|_| r.random_range(-1.0..1.0)).collect();
            let s2: Vec<f64> = (0..obs_len).map(|_| r.random_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..action_len).map(|_| r.random()).collect();
            Transition::new(s, a, r.random_range(-1.0..1.0), s2, r.random_bool(0.1))
        })
        .collect()
}

fn with_critic(
    algorithm: Algorithm,
    obs_len: usize,
    critic: Network,
    r: &mut impl Rng,
) -> AgentBundle {
    let base = ActorCritic::build(&mlp(obs_len, 2), CriticKind::StateAction, r).unwrap();
    let online = ActorCritic::from_parts(
        None,
        base.actor,
        critic,
        CriticKind::StateAction,
        ActionBounds::Unit,
    )
    .unwrap();
    AgentBundle::from_parts(algorithm, config(algorithm), online, None, 0).unwrap()
}

fn param_counts() -> Outcome {
    let mut r = rng(0);
    let build = |arch: &Architecture, kind, r: &mut rand_chacha::ChaCha8Rng| {
        ActorCritic::build(arch, kind, r).unwrap()
    };
    let cheetah = Architecture::Mlp {
        obs_len: 17,
        action_len: 6,
        bounds: ActionBounds::Symmetric,
    };
    let grid = mlp(123, 2);
    let pixel = Architecture::Pixel {
        side: 42,
        action_len: 2,
        bounds: ActionBounds::Unit,
    };
    let (cq, cv) = (
        build(&cheetah, CriticKind::StateAction, &mut r),
        build(&cheetah, CriticKind::State, &mut r),
    );
    let gv = build(&grid, CriticKind::State, &mut r);
    let (pq, pv) = (
        build(&pixel, CriticKind::StateAction, &mut r),
        build(&pixel, CriticKind::State, &mut r),
    );
    let got = [
        ("cheetah actor", cq.actor_param_count(), 12_506),
        ("cheetah Q-critic", cq.critic_param_count(), 12_601),
        ("cheetah V-critic", cv.critic_param_count(), 12_001),
        ("grid V-critic", gv.critic_param_count(), 22_601),
        ("pixel actor", pq.actor_param_count(), 102_914),
        ("pixel Q-critic", pq.critic_param_count(), 103_013),
        ("pixel V-critic", pv.critic_param_count(), 102_813),
    ];
    for &(name, n, want) in &got {
        ensure(n == want, || format!("{name}: {n} != {want}"))?;
    }
    Ok(got
        .iter()
        .map(|(name, n, _)| format!("{name} {n}"))
        .collect::<Vec<_>>()
        .join(", "))
}

fn gradients() -> Outcome {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for (label, arch, kind) in all_architectures() {
        let per_net = if matches!(arch, Architecture::Pixel { .. }) {
            150
        } else {
            1500
        };
        for _ in 0..2 {
            let model = ActorCritic::build(&arch, kind, &mut r).unwrap();
            let obs = random_obs(&model, &mut r);
            let e = actor_grad_error(&model, &obs, per_net, &mut r)
                .max(critic_grad_error(&model, &obs, per_net, &mut r));
            ensure(e < 1e-4, || format!("{label}: max rel err {e:e}"))?;
            worst = worst.max(e);
        }
    }
    Ok(format!("max rel err {worst:.2e} over 7 architectures"))
}

fn noise_schedule() -> Outcome {
    let t_max = 500_000;
    let s = NoiseSchedule::standard(t_max).unwrap();
    let r0 = (s.sd(0) - 1.0).abs();
    let rh = (s.sd(t_max / 2) - 0.05).abs() / 0.05;
    ensure(r0 <= 1e-12 && rh <= 1e-12, || {
        format!("N(0) rel {r0:e}, N(T/2) rel {rh:e}")
    })?;
    let ts: Vec<u64> = (0..1000u64).map(|k| k * t_max / 999).collect();
    let sds: Vec<f64> = ts.iter().map(|&t| s.sd(t)).collect();
    ensure(sds.windows(2).all(|w| w[1] < w[0]), || {
        "not strictly decreasing".into()
    })?;
    Ok(format!(
        "N(0) err {r0:.1e}, N(T/2) rel err {rh:.1e}, {} points decreasing",
        ts.len()
    ))
}

fn gating() -> Outcome {
    let mut r = rng(1);
    // CACLA: every delta <= 0
    let mut agent = AgentBundle::new(
        Algorithm::Cacla,
        &mlp(4, 2),
        config(Algorithm::Cacla),
        &mut r,
    )
    .unwrap();
    agent.optimistic_init(50.0).unwrap();
    let batch: Vec<Transition> = random_batch(4, 2, 32, &mut r)
        .into_iter()
        .map(|t| Transition { reward: -1.0, ..t })
        .collect();
    ensure(
        agent.td_errors(&batch).unwrap().iter().all(|&d| d <= 0.0),
        || "setup: positive delta".into(),
    )?;
    let before = agent.actor().param_hash();
    agent.train_step(&batch, &mut r).unwrap();
    ensure(agent.actor().param_hash() == before, || {
        "CACLA actor moved on non-positive deltas".into()
    })?;

    // SPG: every sample scores below the policy under -|a - pi(s)|
    let base = ActorCritic::build(&mlp(3, 2), CriticKind::StateAction, &mut r).unwrap();
    let s = vec![0.1, 0.2, 0.3];
    let center = base.policy(&s).unwrap();
    let online = ActorCritic::from_parts(
        None,
        base.actor,
        abs_critic(3, &center, &mut r),
        CriticKind::StateAction,
        ActionBounds::Unit,
    )
    .unwrap();
    let mut spg =
        AgentBundle::from_parts(Algorithm::Spg, config(Algorithm::Spg), online, None, 0).unwrap();
    let batch = vec![Transition::new(s.clone(), vec![0.0, 0.0], 0.0, s, false); 16];
    let before = spg.actor().param_hash();
    let used = spg.train_actor_spg(&batch, &mut r).unwrap();
    ensure(used == 0 && spg.actor().param_hash() == before, || {
        format!("SPG used {used} rows")
    })?;

    // DPG: the actor step must not touch the critic
    let mut dpg =
        AgentBundle::new(Algorithm::Dpg, &mlp(5, 2), config(Algorithm::Dpg), &mut r).unwrap();
    let batch = random_batch(5, 2, 8, &mut r);
    let critic = dpg.critic().param_hash();
    dpg.train_actor_dpg(&batch).unwrap();
    ensure(dpg.critic().param_hash() == critic, || {
        "DPG actor step changed the critic".into()
    })?;
    Ok("CACLA unchanged, SPG no contribution, DPG critic unchanged".into())
}

fn dpg_ascent() -> Outcome {
    let mut r = rng(6);
    let optimum = [0.3, 0.7];
    let mut agent = with_critic(
        Algorithm::Dpg,
        3,
        quadratic_critic(3, &optimum, &mut r),
        &mut r,
    );
    agent.config.actor_lr = 1e-3;
    let s = vec![0.2, -0.4, 0.9];
    let batch = vec![Transition::new(
        s.clone(),
        vec![0.5, 0.5],
        0.0,
        s.clone(),
        false,
    )];
    let err = |agent: &AgentBundle| {
        let a = agent.online.policy(&s).unwrap();
        (a[0] - optimum[0]).abs().max((a[1] - optimum[1]).abs())
    };
    let start = err(&agent);
    for step in 1..=5_000 {
        agent.train_actor_dpg(&batch).unwrap();
        if err(&agent) < 1e-2 {
            return Ok(format!(
                "within 1e-2 after {step} steps (start err {start:.3})"
            ));
        }
    }
    Err(format!("err {:.4} after 5000 steps", err(&agent)))
}

fn critic_fixpoint() -> Outcome {
    let mut details = Vec::new();
    for algorithm in [Algorithm::Cacla, Algorithm::Dpg] {
        let mut r = rng(10);
        let mut cfg = config(algorithm);
        cfg.critic_lr = 1e-3;
        cfg.target_update_interval = 100;
        let mut agent = AgentBundle::new(algorithm, &mlp(4, 2), cfg, &mut r).unwrap();
        let s = vec![0.5, -0.25, 0.1, 0.8];
        let a = agent.online.policy(&s).unwrap();
        let batch = vec![Transition::new(s.clone(), a.clone(), 1.0, s.clone(), false); 32];
        for _ in 0..12_000 {
            agent.train_critic(&batch).unwrap();
            agent.advance_steps(1);
        }
        let action = (algorithm != Algorithm::Cacla).then_some(&a[..]);
        let v = agent.online.value(&s, action).unwrap();
        let rel = (v - 10.0).abs() / 10.0;
        ensure(rel < 0.01, || format!("{algorithm}: V = {v}"))?;
        details.push(format!("{algorithm} V = {v:.4}"));
    }
    Ok(format!("{} (target 10)", details.join(", ")))
}

fn replay() -> Outcome {
    let tagged = |i: usize| Transition::new(vec![i as f64], vec![0.0], i as f64, vec![0.0], false);
    let mut b = ReplayBuffer::new(1000).unwrap();
    for i in 0..2500 {
        b.push(tagged(i)).unwrap();
    }
    let order: Vec<usize> = b.iter_oldest_first().map(|t| t.reward as usize).collect();
    ensure(order == (1500..2500).collect::<Vec<_>>(), || {
        "FIFO order wrong".into()
    })?;

    let mut b = ReplayBuffer::new(100).unwrap();
    for i in 0..100 {
        b.push(tagged(i)).unwrap();
    }
    let mut r = rng(42);
    let mut counts = [0usize; 100];
    for _ in 0..1_000_000 / 32 {
        for t in b.sample(32, &mut r).unwrap() {
            counts[t.reward as usize] += 1;
        }
    }
    let draws: usize = counts.iter().sum();
    let e = draws as f64 / 100.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let critical = chi_square_quantile(99.0, Z_99);
    ensure(stat < critical, || {
        format!("chi-square {stat:.2} >= {critical:.2}")
    })?;
    Ok(format!(
        "FIFO exact; chi-square {stat:.2} < {critical:.2} over {draws} draws"
    ))
}

fn parallel() -> Outcome {
    let mut cfg = ExperimentConfig::defaults(EnvironmentKind::PointMass, Algorithm::Dpg);
    cfg.task = Task::OnPolicy;
    cfg.total_steps = 2000;
    cfg.workers = 8;
    cfg.n_runs = 1;
    cfg.save_checkpoints = false;
    cfg.seed = 2024;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let files: Vec<String> = dirs
        .iter()
        .map(|d| {
            run_training(&cfg, Some(d.path())).unwrap();
            std::fs::read_to_string(d.path().join("metrics.csv")).unwrap()
        })
        .collect();
    ensure(files[0] == files[1], || "metrics files differ".into())?;
    let l = cfg.pointmass.episode_steps;
    for id in 0..8 {
        let got = warmup_offset(id, l, 8).unwrap();
        ensure(got == id * l / 8, || format!("worker {id}: offset {got}"))?;
    }
    let lines = files[0].lines().count() - 1;
    Ok(format!(
        "identical metrics ({lines} rows, {} bytes); offsets floor(id*{l}/8)",
        files[0].len()
    ))
}

fn desk_scale_learning() -> Outcome {
    let mut details = Vec::new();
    let mut failures = Vec::new();
    for algorithm in Algorithm::ALL {
        let mut cfg = ExperimentConfig::defaults(EnvironmentKind::AgarGrid, algorithm);
        cfg.apply_quick_preset();
        cfg.seed = 0;
        cfg.save_checkpoints = false;
        let t = Instant::now();
        let report = run_training(&cfg, None).map_err(|e| e.to_string())?;
        let records = report.records();
        let baseline = checkpoint_mean(&records, 0, Metric::FinalMass).unwrap();
        let last = checkpoint_mean(&records, 100, Metric::FinalMass).unwrap();
        let line = format!(
            "{algorithm}: {last:.2} vs baseline {baseline:.4} ({:.0} s)",
            t.elapsed().as_secs_f64()
        );
        if last < 3.0 * baseline {
            failures.push(line.clone());
        }
        details.push(line);
    }
    if failures.is_empty() {
        Ok(details.join("; "))
    } else {
        Err(details.join("; "))
    }
}

fn checkpoint_round_trip() -> Outcome {
    let mut r = rng(15);
    let dir = tempfile::tempdir().unwrap();
    let mut compared = 0;
    for (label, arch, kind) in all_architectures() {
        let algorithm = match kind {
            CriticKind::State => Algorithm::Cacla,
            CriticKind::StateAction => Algorithm::Dpg,
        };
        let mut agent = AgentBundle::new(algorithm, &arch, config(algorithm), &mut r).unwrap();
        let batch = random_batch(arch.observation_shape().len(), arch.action_len(), 4, &mut r);
        agent.train_step(&batch, &mut r).unwrap();
        let path = dir.path().join(format!("{label}.acag"));
        agent.save_checkpoint(&path, label).unwrap();
        let back = AgentBundle::load_checkpoint(&path).unwrap().bundle;
        for _ in 0..100 {
            let obs = random_obs(&agent.online, &mut r);
            let a = agent.online.policy(&obs).unwrap();
            let b = back.online.policy(&obs).unwrap();
            let q = |m: &ActorCritic| {
                m.value(&obs, (kind == CriticKind::StateAction).then_some(&a[..]))
                    .unwrap()
            };
            ensure(
                a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())
                    && q(&agent.online).to_bits() == q(&back.online).to_bits(),
                || format!("{label}: outputs differ"),
            )?;
            compared += 1;
        }
    }
    Ok(format!(
        "{compared} inputs bit-identical across 7 architectures"
    ))
}

fn trunk_hash(agent: &AgentBundle) -> u64 {
    agent
        .online
        .trunk
        .as_ref()
        .expect("pixel agent has a trunk")
        .net
        .param_hash()
}

fn pixel_smoke() -> Outcome {
    let mut r = rng(21);
    let arch = Architecture::Pixel {
        side: 42,
        action_len: 2,
        bounds: ActionBounds::Unit,
    };
    let agent = AgentBundle::new(Algorithm::Dpg, &arch, config(Algorithm::Dpg), &mut r).unwrap();
    let batch: Vec<Transition> = (0..8)
        .map(|_| {
            let s: Vec<f64> = (0..42 * 42).map(|_| r.random()).collect();
            Transition::new(s.clone(), vec![r.random(), r.random()], 1.0, s, false)
        })
        .collect();
    let start = trunk_hash(&agent);
    let mut actor_only = agent.clone();
    actor_only.train_actor_dpg(&batch).unwrap();
    let mut critic_only = agent.clone();
    critic_only.train_critic(&batch).unwrap();
    ensure(trunk_hash(&actor_only) != start, || {
        "actor update left the trunk unchanged".into()
    })?;
    ensure(trunk_hash(&critic_only) != start, || {
        "critic update left the trunk unchanged".into()
    })?;

    let mut timings = Vec::new();
    for algorithm in Algorithm::ALL {
        let mut cfg = ExperimentConfig::defaults(EnvironmentKind::AgarPixel, algorithm);
        cfg.total_steps = 2000;
        cfg.n_runs = 1;
        cfg.tests_per_checkpoint = 1;
        cfg.agar.episode_frames = 2000;
        cfg.save_checkpoints = false;
        let report = run_training(&cfg, None).map_err(|e| e.to_string())?;
        let run = &report.runs[0];
        ensure(run.losses_finite, || {
            format!("{algorithm}: non-finite loss")
        })?;
        let initial =
            AgentBundle::new(algorithm, &arch, cfg.agent_config().unwrap(), &mut rng(0)).unwrap();
        ensure(trunk_hash(&run.final_agent) != trunk_hash(&initial), || {
            format!("{algorithm}: trunk frozen")
        })?;
        timings.push(format!(
            "{algorithm} {:.2} ms/step",
            run.seconds_per_step() * 1e3
        ));
    }
    Ok(format!(
        "trunk moves under actor-only and critic-only steps; {}",
        timings.join(", ")
    ))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "parameter counts", param_counts),
        (2, "gradient correctness", gradients),
        (3, "noise schedule", noise_schedule),
        (4, "algorithm gating", gating),
        (5, "DPG convex ascent", dpg_ascent),
        (6, "critic fixpoint", critic_fixpoint),
        (7, "replay semantics", replay),
        (8, "parallel determinism", parallel),
        (9, "desk-scale learning", desk_scale_learning),
        (10, "checkpoint round trip", checkpoint_round_trip),
        (11, "pixel path smoke", pixel_smoke),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{id:>2}] {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{id:>2}] {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
