use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use aclab::agents::AgentBundle;
use aclab::harness::{
    curve_points, emit_curves, make_env, run_test, run_training_with, save_metrics, test_seeds,
    EnvironmentKind, ExperimentConfig, Metric, OUTPUT_DIR_ENV,
};
use aclab::Shape;

#[derive(Parser)]
#[command(
    name = "aclab",
    version,
    about = "Continuous-action actor-critic experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train `n_runs` agents and write checkpoints plus metrics.csv.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `quick`: 50,000 steps, one run.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long)]
        environment: Option<String>,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        total_steps: Option<u64>,
        #[arg(long)]
        n_runs: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Any config key, as `key=value`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, env = OUTPUT_DIR_ENV, default_value = "aclab-out")]
        out: PathBuf,
    },
    /// Test a checkpoint with the deterministic policy.
    Test {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        /// Environment settings; inferred from the checkpoint when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the records here as metrics CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Plot learning curves from metrics files.
    Plot {
        #[arg(long, default_value = "curves.svg")]
        out: PathBuf,
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
    /// Print the header and network shapes of an agent checkpoint.
    InspectCheckpoint { file: PathBuf },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train {
            config,
            preset,
            seed,
            algorithm,
            environment,
            task,
            total_steps,
            n_runs,
            workers,
            set,
            out,
        } => {
            let text = match &config {
                Some(p) => std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?,
                None => String::new(),
            };
            let mut overrides: Vec<(String, String)> = Vec::new();
            for kv in &set {
                let (k, v) = kv
                    .split_once('=')
                    .with_context(|| format!("--set expects key=value, got {kv}"))?;
                overrides.push((k.trim().into(), v.trim().into()));
            }
            let flags = [
                ("algorithm", algorithm),
                ("environment", environment),
                ("task", task),
                ("seed", seed.map(|s| s.to_string())),
                ("total_steps", total_steps.map(|s| s.to_string())),
                ("n_runs", n_runs.map(|s| s.to_string())),
                ("workers", workers.map(|s| s.to_string())),
            ];
            let mut cfg = ExperimentConfig::parse_with_overrides(&text, &overrides)?;
            match preset.as_deref() {
                None => {}
                Some("quick") => cfg.apply_quick_preset(),
                Some(other) => bail!("unknown preset {other:?}"),
            }
            // explicit flags win over both the file and the preset
            let flag_pairs: Vec<(String, String)> = flags
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
                .collect();
            if !flag_pairs.is_empty() {
                let mut merged = cfg.to_text();
                for (k, v) in &flag_pairs {
                    merged.push_str(&format!("{k} = {v}\n"));
                }
                cfg = ExperimentConfig::parse(&merged)?;
            }
            eprintln!(
                "training {} on {} ({}) for {} steps x {} runs -> {}",
                cfg.algorithm,
                cfg.environment,
                cfg.task.as_str(),
                cfg.total_steps,
                cfg.n_runs,
                out.display()
            );
            let metric = if cfg.environment.is_agar() {
                Metric::FinalMass
            } else {
                Metric::EpisodeReturn
            };
            let report = run_training_with(&cfg, Some(&out), &mut |run, pct, recs| {
                let pts = curve_points(recs, metric).unwrap_or_default();
                if let Some(p) = pts.first() {
                    eprintln!(
                        "run {run} {pct:>3}%  mean {}: {:.3}",
                        metric.label(),
                        p.mean
                    );
                }
            })?;
            for r in &report.runs {
                eprintln!(
                    "run {}: {} train steps, {:.3} ms/step, optimistic offset {:.4}",
                    r.run_id,
                    r.train_steps,
                    r.seconds_per_step() * 1e3,
                    r.optimistic_offset
                );
            }
            if let Some(p) = &report.metrics_path {
                println!("{}", p.display());
            }
        }
        Command::Test {
            checkpoint,
            episodes,
            config,
            seed,
            metrics,
        } => {
            let ck = AgentBundle::load_checkpoint(&checkpoint)
                .with_context(|| format!("loading {}", checkpoint.display()))?;
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::parse(&std::fs::read_to_string(p)?)?,
                None => infer_config(&ck.bundle, &checkpoint)?,
            };
            cfg.seed = seed;
            cfg.tests_per_checkpoint = episodes.max(1);
            let mut env = make_env(&cfg)?;
            let seeds = test_seeds(&cfg, 0, 100);
            let recs = run_test(&ck.bundle, env.as_mut(), &seeds, 0, 100)?;
            println!("episode,return,final_mass");
            for r in &recs {
                let mass = r.final_mass.map(|m| m.to_string()).unwrap_or_default();
                println!("{},{},{}", r.test_episode, r.episode_return, mass);
            }
            if let Some(p) = metrics {
                save_metrics(p, &recs)?;
            }
        }
        Command::Plot { out, metrics } => {
            let series = emit_curves(&metrics, &out)?;
            eprintln!("{} series -> {}", series.len(), out.display());
        }
        Command::InspectCheckpoint { file } => {
            let ck = AgentBundle::load_checkpoint(&file)
                .with_context(|| format!("loading {}", file.display()))?;
            let b = &ck.bundle;
            println!("label: {}", ck.label);
            println!("algorithm: {}", b.algorithm);
            println!("step counter: {}", b.step_counter());
            println!("observation: {}", b.online.observation_shape());
            println!("action: {} {:?}", b.online.action_len(), b.online.bounds);
            println!("discount: {}", b.config.discount);
            println!(
                "learning rates: actor {} critic {}",
                b.config.actor_lr, b.config.critic_lr
            );
            if let Some(t) = &b.online.trunk {
                println!("trunk params: {}", t.net.param_count());
            }
            println!("actor params: {}", b.online.actor_param_count());
            println!("critic params: {}", b.online.critic_param_count());
        }
    }
    Ok(())
}

/// Default environment settings for the observation shape a checkpoint expects.
fn infer_config(agent: &AgentBundle, path: &Path) -> anyhow::Result<ExperimentConfig> {
    let kind = match agent.online.observation_shape() {
        Shape::Image { .. } => EnvironmentKind::AgarPixel,
        Shape::Flat(n) if n == aclab::env::agar::GRID_FEATURES => EnvironmentKind::AgarGrid,
        Shape::Flat(n) if n % 3 == 0 => EnvironmentKind::PointMass,
        other => bail!(
            "cannot infer an environment for {other} observations in {}; pass --config",
            path.display()
        ),
    };
    let mut cfg = ExperimentConfig::defaults(kind, agent.algorithm);
    if let Shape::Flat(n) = agent.online.observation_shape() {
        if kind == EnvironmentKind::PointMass {
            cfg.set("pointmass_dims", &(n / 3).to_string())?;
        }
    }
    Ok(cfg)
}
