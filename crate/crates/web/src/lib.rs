//! Browser demo. Three things to poke at: the pellet arena with its vision
//! grid, the exploration noise schedule, and a point mass trained live.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use aclab::agents::{AgentBundle, AgentConfig, Algorithm, Architecture, NoiseSchedule};
use aclab::env::agar::{GRID_SIDE, PIXEL_SIDE};
use aclab::env::{ActionBounds, AgarConfig, AgarWorld, Environment, PointMassConfig, PointMassEnv};
use aclab::{ReplayBuffer, Transition};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// The pellet arena, steered by the cursor.
#[wasm_bindgen]
pub struct AgarDemo {
    world: AgarWorld,
    total_reward: f64,
}

#[wasm_bindgen]
impl AgarDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<AgarDemo, JsError> {
        AgarDemo::create(seed).map_err(js_err)
    }

    pub fn reset(&mut self, seed: u64) -> Result<(), JsError> {
        *self = AgarDemo::new(seed)?;
        Ok(())
    }

    /// One transition toward `(x, y)` given as fractions of the view window.
    /// Returns the mass gained (can be negative).
    pub fn step(&mut self, x: f64, y: f64) -> Result<f64, JsError> {
        self.advance(x, y).map_err(js_err)
    }

    pub fn done(&self) -> bool {
        self.world.is_done()
    }

    pub fn arena_side(&self) -> f64 {
        self.world.config().arena_side
    }

    pub fn mass(&self) -> f64 {
        self.world.player().mass
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn frame(&self) -> u64 {
        self.world.frame()
    }

    pub fn player_x(&self) -> f64 {
        self.world.player().position[0]
    }

    pub fn player_y(&self) -> f64 {
        self.world.player().position[1]
    }

    pub fn radius(&self) -> f64 {
        self.world.radius()
    }

    pub fn view_side(&self) -> f64 {
        self.world.view_side()
    }

    /// Pellet centres as `[x0, y0, x1, y1, ...]`.
    pub fn pellets(&self) -> Vec<f64> {
        self.world
            .pellets()
            .iter()
            .flat_map(|p| p.position)
            .collect()
    }

    /// Pellet mass per cell of the vision grid, row-major.
    pub fn vision_grid(&self) -> Vec<f64> {
        self.world.vision_grid()[..GRID_SIDE * GRID_SIDE].to_vec()
    }

    pub fn grid_side(&self) -> usize {
        GRID_SIDE
    }

    /// The grayscale frame the pixel agents see, as RGBA bytes.
    pub fn agent_view_rgba(&self) -> Vec<u8> {
        self.world
            .render_grayscale()
            .iter()
            .flat_map(|&v| {
                let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                [g, g, g, 255]
            })
            .collect()
    }

    pub fn agent_view_side(&self) -> usize {
        PIXEL_SIDE
    }
}

impl AgarDemo {
    pub fn create(seed: u64) -> aclab::Result<AgarDemo> {
        Ok(AgarDemo {
            world: AgarWorld::reset(AgarConfig::default(), seed)?,
            total_reward: 0.0,
        })
    }

    pub fn advance(&mut self, x: f64, y: f64) -> aclab::Result<f64> {
        let (reward, _) = self.world.step([x, y])?;
        self.total_reward += reward;
        Ok(reward)
    }
}

/// Exploration SD at `points` evenly spaced steps over `[0, t_max]`.
#[wasm_bindgen]
pub fn noise_curve(
    sd_initial: f64,
    sd_at_half: f64,
    t_max: u64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    schedule_points(sd_initial, sd_at_half, t_max, points).map_err(js_err)
}

pub fn schedule_points(
    sd_initial: f64,
    sd_at_half: f64,
    t_max: u64,
    points: usize,
) -> aclab::Result<Vec<f64>> {
    let s = NoiseSchedule::new(sd_initial, sd_at_half, t_max)?;
    let n = points.max(2);
    Ok((0..n)
        .map(|i| s.sd(i as u64 * t_max / (n as u64 - 1)))
        .collect())
}

/// Decay coefficient of the schedule.
#[wasm_bindgen]
pub fn noise_lambda(sd_initial: f64, sd_at_half: f64, t_max: u64) -> Result<f64, JsError> {
    NoiseSchedule::new(sd_initial, sd_at_half, t_max)
        .map(|s| s.lambda())
        .map_err(js_err)
}

const TRAINER_BUFFER: usize = 5_000;
const TRAINER_BATCH: usize = 32;

/// Replay-task training on a 2-D point mass, a slice of steps at a time.
#[wasm_bindgen]
pub struct PointMassTrainer {
    env: PointMassEnv,
    agent: AgentBundle,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    episodes: u64,
    steps: u64,
    total_steps: u64,
}

#[wasm_bindgen]
impl PointMassTrainer {
    /// `algorithm` is `cacla`, `dpg` or `spg`.
    #[wasm_bindgen(constructor)]
    pub fn new(algorithm: &str, total_steps: u64, seed: u64) -> Result<PointMassTrainer, JsError> {
        PointMassTrainer::create(algorithm, total_steps, seed).map_err(js_err)
    }

    /// Runs `n` environment steps, training after each once the buffer holds
    /// a batch. Returns the mean critic loss over the slice.
    pub fn train(&mut self, n: u32) -> Result<f64, JsError> {
        self.run(n).map_err(js_err)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn current_sd(&self) -> f64 {
        self.agent.config.schedule.sd(self.steps)
    }

    /// Noise-free episode from `seed`: positions `[x0, y0, x1, y1, ...]`,
    /// starting with the initial position.
    pub fn rollout(&self, seed: u64) -> Result<Vec<f64>, JsError> {
        self.path(seed).map_err(js_err)
    }

    /// Distance closed by a noise-free episode from `seed`, which is also its
    /// return.
    pub fn evaluate(&self, seed: u64) -> Result<f64, JsError> {
        self.path(seed).map(|p| progress(&p)).map_err(js_err)
    }
}

/// Start distance minus end distance to the origin.
pub fn progress(path: &[f64]) -> f64 {
    let dist = |i: usize| path[2 * i].hypot(path[2 * i + 1]);
    dist(0) - dist(path.len() / 2 - 1)
}

impl PointMassTrainer {
    pub fn create(algorithm: &str, total_steps: u64, seed: u64) -> aclab::Result<PointMassTrainer> {
        let algorithm: Algorithm = algorithm.parse()?;
        let cfg = PointMassConfig {
            episode_steps: 200,
            ..PointMassConfig::with_dims(2)
        };
        let mut env = PointMassEnv::new(cfg)?;
        let arch = Architecture::Mlp {
            obs_len: 6,
            action_len: 2,
            bounds: ActionBounds::Symmetric,
        };
        let schedule = NoiseSchedule::standard(total_steps.max(2))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = AgentBundle::new(
            algorithm,
            &arch,
            AgentConfig::for_algorithm(algorithm, 0.99, schedule),
            &mut rng,
        )?;
        let obs = env.reset(seed);
        Ok(PointMassTrainer {
            env,
            agent,
            buffer: ReplayBuffer::new(TRAINER_BUFFER)?,
            rng,
            obs,
            episodes: 0,
            steps: 0,
            total_steps,
        })
    }

    pub fn run(&mut self, n: u32) -> aclab::Result<f64> {
        let (mut loss, mut updates) = (0.0, 0u32);
        for _ in 0..n {
            let sd = self.agent.config.schedule.sd(self.steps);
            let action = self.agent.act(&self.obs, sd, &mut self.rng)?;
            let step = self.env.step(&action)?;
            let next = step.observation.clone();
            self.buffer.push(Transition::new(
                self.obs.clone(),
                action,
                step.reward,
                next.clone(),
                step.done,
            ))?;
            self.steps += 1;
            self.obs = if step.done {
                self.episodes += 1;
                self.env.reset(self.steps ^ 0x5eed)
            } else {
                next
            };
            if self.buffer.len() >= TRAINER_BATCH {
                let batch = self.buffer.sample(TRAINER_BATCH, &mut self.rng)?;
                loss += self.agent.train_step(&batch, &mut self.rng)?.critic_loss;
                updates += 1;
            }
        }
        Ok(if updates > 0 {
            loss / updates as f64
        } else {
            0.0
        })
    }

    pub fn path(&self, seed: u64) -> aclab::Result<Vec<f64>> {
        let mut env = self.env.clone();
        let mut obs = env.reset(seed);
        let mut path = env.state().position.clone();
        loop {
            let action = self.agent.online.policy(&obs)?;
            let step = env.step(&action)?;
            path.extend_from_slice(&env.state().position);
            obs = step.observation;
            if step.done {
                return Ok(path);
            }
        }
    }
}
