//! Single-cell pellet-collection clone of Agar.io.
//!
//! One player cell roams a square arena. Each frame it moves toward the
//! cursor, loses a fixed fraction of its mass, then absorbs every pellet whose
//! centre lies inside its radius. Absorbed pellets respawn at once elsewhere,
//! so the pellet count is constant. One environment transition repeats the
//! chosen action for `frame_skip + 1` frames.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionBounds, Environment, Step, TraceRecord};
use crate::error::{Error, Result, Shape};

pub const GRID_SIDE: usize = 11;
pub const GRID_FEATURES: usize = GRID_SIDE * GRID_SIDE + 2;
pub const PIXEL_SIDE: usize = 42;
pub const PELLET_INTENSITY: f64 = 0.5;
pub const PLAYER_INTENSITY: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AgarConfig {
    pub arena_side: f64,
    pub pellet_count: usize,
    pub pellet_mass: f64,
    pub start_mass: f64,
    pub mass_decay_per_frame: f64,
    pub base_speed: f64,
    pub speed_mass_exponent: f64,
    /// View side is `view_base + view_scale * sqrt(mass)`.
    pub view_scale: f64,
    pub view_base: f64,
    /// Radius is `radius_scale * sqrt(mass / pi)`.
    pub radius_scale: f64,
    pub frame_skip: u32,
    pub episode_frames: u64,
}

impl Default for AgarConfig {
    fn default() -> Self {
        AgarConfig {
            arena_side: 1000.0,
            pellet_count: 500,
            pellet_mass: 1.0,
            start_mass: 10.0,
            mass_decay_per_frame: 0.0005,
            base_speed: 30.0,
            speed_mass_exponent: 0.44,
            view_scale: 25.0,
            view_base: 100.0,
            radius_scale: 8.0,
            frame_skip: 7,
            episode_frames: 20_000,
        }
    }
}

impl AgarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.arena_side > 0.0) {
            return bad("arena_side must be > 0");
        }
        if !(0.0..1.0).contains(&self.mass_decay_per_frame) {
            return bad("mass_decay_per_frame must be in [0, 1)");
        }
        if !(self.start_mass > 0.0) || !(self.pellet_mass >= 0.0) {
            return bad("start_mass must be > 0 and pellet_mass >= 0");
        }
        if !(self.base_speed >= 0.0) || !(self.view_scale >= 0.0) || !(self.view_base >= 0.0) {
            return bad("speed and view parameters must be >= 0");
        }
        if !(self.view_scale > 0.0 || self.view_base > 0.0) {
            return bad("view window must have positive size");
        }
        if !(self.radius_scale > 0.0) {
            return bad("radius_scale must be > 0");
        }
        if self.episode_frames == 0 || !self.episode_frames.is_multiple_of(self.frames_per_step()) {
            return bad("episode_frames must be a positive multiple of frame_skip + 1");
        }
        Ok(())
    }

    pub fn frames_per_step(&self) -> u64 {
        u64::from(self.frame_skip) + 1
    }

    pub fn transitions_per_episode(&self) -> usize {
        (self.episode_frames / self.frames_per_step()) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pellet {
    pub position: [f64; 2],
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Player {
    pub position: [f64; 2],
    pub mass: f64,
}

/// A pellet absorbed during the last transition: which frame (0-based within
/// the transition) and how much mass it added.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorption {
    pub frame: u64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct AgarWorld {
    config: AgarConfig,
    player: Player,
    pellets: Vec<Pellet>,
    frame: u64,
    rng: ChaCha8Rng,
    last_absorptions: Vec<Absorption>,
}

impl AgarWorld {
    pub fn reset(config: AgarConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = config.arena_side;
        let player = Player {
            position: [rng.random::<f64>() * side, rng.random::<f64>() * side],
            mass: config.start_mass,
        };
        let pellets = (0..config.pellet_count)
            .map(|_| Pellet {
                position: interior_point(&mut rng, side),
                mass: config.pellet_mass,
            })
            .collect();
        Ok(AgarWorld {
            config,
            player,
            pellets,
            frame: 0,
            rng,
            last_absorptions: Vec::new(),
        })
    }

    /// A world with a hand-placed player and pellet field. Respawns still use
    /// the seeded generator.
    pub fn with_layout(
        config: AgarConfig,
        player: Player,
        pellets: Vec<Pellet>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let side = config.arena_side;
        if !(player.mass > 0.0) || !player.position.iter().all(|c| (0.0..=side).contains(c)) {
            return Err(Error::Config(
                "player must be in bounds with mass > 0".into(),
            ));
        }
        if !pellets
            .iter()
            .all(|p| p.position.iter().all(|&c| c > 0.0 && c < side))
        {
            return Err(Error::Config(
                "pellets must lie strictly inside the arena".into(),
            ));
        }
        Ok(AgarWorld {
            config,
            player,
            pellets,
            frame: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_absorptions: Vec::new(),
        })
    }

    pub fn config(&self) -> &AgarConfig {
        &self.config
    }

    pub fn player(&self) -> Player {
        self.player
    }

    pub fn pellets(&self) -> &[Pellet] {
        &self.pellets
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn is_done(&self) -> bool {
        self.frame >= self.config.episode_frames
    }

    pub fn last_absorptions(&self) -> &[Absorption] {
        &self.last_absorptions
    }

    pub fn view_side(&self) -> f64 {
        self.config.view_base + self.config.view_scale * self.player.mass.sqrt()
    }

    pub fn radius(&self) -> f64 {
        self.config.radius_scale * (self.player.mass / PI).sqrt()
    }

    pub fn speed(&self) -> f64 {
        self.config.base_speed * self.player.mass.powf(-self.config.speed_mass_exponent)
    }

    pub fn total_pellet_mass(&self) -> f64 {
        self.pellets.iter().map(|p| p.mass).sum()
    }

    /// Advances one transition (`frame_skip + 1` frames) and returns the
    /// summed change in mass and whether the episode is over.
    pub fn step(&mut self, action: [f64; 2]) -> Result<(f64, bool)> {
        if self.is_done() {
            return Err(Error::EpisodeFinished);
        }
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("agar action".into()));
        }
        let action = action.map(|a| a.clamp(0.0, 1.0));
        let before = self.player.mass;
        self.last_absorptions.clear();
        for f in 0..self.config.frames_per_step() {
            self.advance_frame(action, f);
        }
        Ok((self.player.mass - before, self.is_done()))
    }

    fn advance_frame(&mut self, action: [f64; 2], frame_in_step: u64) {
        let side = self.config.arena_side;
        let view = self.view_side();
        let offset = [(action[0] - 0.5) * view, (action[1] - 0.5) * view];
        let dist = offset[0].hypot(offset[1]);
        if dist > 0.0 {
            let travel = self.speed().min(dist);
            for (p, o) in self.player.position.iter_mut().zip(offset) {
                *p = (*p + o / dist * travel).clamp(0.0, side);
            }
        }

        self.player.mass *= 1.0 - self.config.mass_decay_per_frame;

        let r2 = self.radius().powi(2);
        let [px, py] = self.player.position;
        for i in 0..self.pellets.len() {
            let p = self.pellets[i];
            let (dx, dy) = (p.position[0] - px, p.position[1] - py);
            if dx * dx + dy * dy <= r2 {
                self.player.mass += p.mass;
                self.last_absorptions.push(Absorption {
                    frame: frame_in_step,
                    mass: p.mass,
                });
                self.pellets[i] = Pellet {
                    position: interior_point(&mut self.rng, side),
                    mass: self.config.pellet_mass,
                };
            }
        }
        self.frame += 1;
    }

    /// Window origin (top-left corner) of the square view centred on the player.
    fn view_origin(&self, view: f64) -> [f64; 2] {
        [
            self.player.position[0] - view / 2.0,
            self.player.position[1] - view / 2.0,
        ]
    }

    /// 11x11 pellet-mass grid over the view window (row-major, row = y),
    /// followed by the player mass and the view side length.
    pub fn vision_grid(&self) -> Vec<f64> {
        let view = self.view_side();
        let cell = view / GRID_SIDE as f64;
        let origin = self.view_origin(view);
        let mut grid = vec![0.0; GRID_FEATURES];
        for p in &self.pellets {
            if let Some((row, col)) = bin(p.position, origin, cell, GRID_SIDE) {
                grid[row * GRID_SIDE + col] += p.mass;
            }
        }
        grid[GRID_SIDE * GRID_SIDE] = self.player.mass;
        grid[GRID_SIDE * GRID_SIDE + 1] = view;
        grid
    }

    /// 42x42 grayscale frame of the view window, row-major. Pellets are single
    /// pixels at 0.5; the player is a filled disc at 1.0 in the centre.
    pub fn render_grayscale(&self) -> Vec<f64> {
        let view = self.view_side();
        let px = view / PIXEL_SIDE as f64;
        let origin = self.view_origin(view);
        let mut frame = vec![0.0; PIXEL_SIDE * PIXEL_SIDE];
        for p in &self.pellets {
            if let Some((row, col)) = bin(p.position, origin, px, PIXEL_SIDE) {
                frame[row * PIXEL_SIDE + col] = PELLET_INTENSITY;
            }
        }
        let radius_px = self.radius() / px;
        let centre = PIXEL_SIDE as f64 / 2.0;
        for row in 0..PIXEL_SIDE {
            for col in 0..PIXEL_SIDE {
                let dy = row as f64 + 0.5 - centre;
                let dx = col as f64 + 0.5 - centre;
                if dx * dx + dy * dy <= radius_px * radius_px {
                    frame[row * PIXEL_SIDE + col] = PLAYER_INTENSITY;
                }
            }
        }
        frame
    }
}

fn bin(pos: [f64; 2], origin: [f64; 2], cell: f64, cells: usize) -> Option<(usize, usize)> {
    let col = ((pos[0] - origin[0]) / cell).floor();
    let row = ((pos[1] - origin[1]) / cell).floor();
    let n = cells as f64;
    (col >= 0.0 && col < n && row >= 0.0 && row < n).then_some((row as usize, col as usize))
}

fn interior_point(rng: &mut impl Rng, side: f64) -> [f64; 2] {
    let mut coord = || loop {
        let c = rng.random::<f64>() * side;
        if c > 0.0 {
            return c;
        }
    };
    [coord(), coord()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    Grid,
    Pixels,
}

/// Divisors applied to the mass and view-size features of the grid
/// observation before it reaches a network.
pub const MASS_FEATURE_SCALE: f64 = 100.0;
pub const VIEW_FEATURE_SCALE: f64 = 1000.0;

/// [`Environment`] adapter over [`AgarWorld`].
#[derive(Debug, Clone)]
pub struct AgarEnv {
    config: AgarConfig,
    kind: ObservationKind,
    world: Option<AgarWorld>,
}

impl AgarEnv {
    pub fn new(config: AgarConfig, kind: ObservationKind) -> Result<Self> {
        config.validate()?;
        Ok(AgarEnv {
            config,
            kind,
            world: None,
        })
    }

    pub fn world(&self) -> Option<&AgarWorld> {
        self.world.as_ref()
    }

    pub fn kind(&self) -> ObservationKind {
        self.kind
    }

    fn observe(&self, world: &AgarWorld) -> Vec<f64> {
        match self.kind {
            ObservationKind::Grid => {
                let mut g = world.vision_grid();
                g[GRID_FEATURES - 2] /= MASS_FEATURE_SCALE;
                g[GRID_FEATURES - 1] /= VIEW_FEATURE_SCALE;
                g
            }
            ObservationKind::Pixels => world.render_grayscale(),
        }
    }
}

impl Environment for AgarEnv {
    fn observation_shape(&self) -> Shape {
        match self.kind {
            ObservationKind::Grid => Shape::Flat(GRID_FEATURES),
            ObservationKind::Pixels => Shape::Image {
                channels: 1,
                side: PIXEL_SIDE,
            },
        }
    }

    fn action_len(&self) -> usize {
        2
    }

    fn action_bounds(&self) -> ActionBounds {
        ActionBounds::Unit
    }

    fn episode_length(&self) -> usize {
        self.config.transitions_per_episode()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let world = AgarWorld::reset(self.config.clone(), seed).expect("config validated in new");
        let obs = self.observe(&world);
        self.world = Some(world);
        obs
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let &[ax, ay] = action else {
            return Err(Error::shape("[2]", format!("[{}]", action.len())));
        };
        let world = self
            .world
            .as_mut()
            .ok_or_else(|| Error::State("step before reset".into()))?;
        let (reward, done) = world.step([ax, ay])?;
        let world = self.world.as_ref().expect("just stepped");
        Ok(Step {
            observation: self.observe(world),
            reward,
            done,
        })
    }

    fn mass(&self) -> Option<f64> {
        self.world.as_ref().map(|w| w.player().mass)
    }

    fn trace_record(&self, action: &[f64], reward: f64) -> TraceRecord {
        let (index, state) = match &self.world {
            Some(w) => {
                let p = w.player();
                (w.frame(), vec![p.position[0], p.position[1], p.mass])
            }
            None => (0, vec![f64::NAN; 3]),
        };
        TraceRecord {
            index,
            state,
            action: action.to_vec(),
            reward,
        }
    }

    fn trace_header(&self) -> Vec<String> {
        ["frame", "x", "y", "mass", "action_x", "action_y", "reward"]
            .map(String::from)
            .to_vec()
    }
}
