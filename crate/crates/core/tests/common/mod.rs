//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aclab::agents::{ActorCritic, Architecture, CriticKind};
use aclab::env::ActionBounds;
use aclab::nn::{LayerSpec, Network};
use aclab::Shape;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub const FD_STEP: f64 = 1e-5;
pub const REL_FLOOR: f64 = 1e-5;

/// Every architecture the lab builds, with a label.
pub fn all_architectures() -> Vec<(&'static str, Architecture, CriticKind)> {
    let cheetah = Architecture::Mlp {
        obs_len: 17,
        action_len: 6,
        bounds: ActionBounds::Symmetric,
    };
    let grid = Architecture::Mlp {
        obs_len: 123,
        action_len: 2,
        bounds: ActionBounds::Unit,
    };
    let pixel = Architecture::Pixel {
        side: 42,
        action_len: 2,
        bounds: ActionBounds::Unit,
    };
    let pointmass = Architecture::Mlp {
        obs_len: 18,
        action_len: 6,
        bounds: ActionBounds::Symmetric,
    };
    vec![
        ("cheetah-v", cheetah.clone(), CriticKind::State),
        ("cheetah-q", cheetah, CriticKind::StateAction),
        ("grid-v", grid.clone(), CriticKind::State),
        ("grid-q", grid, CriticKind::StateAction),
        ("pixel-v", pixel.clone(), CriticKind::State),
        ("pixel-q", pixel, CriticKind::StateAction),
        ("pointmass-q", pointmass, CriticKind::StateAction),
    ]
}

pub fn random_obs(model: &ActorCritic, rng: &mut impl Rng) -> Vec<f64> {
    match model.observation_shape() {
        // pixel-like intensities; grid-like non-negative features
        Shape::Image { .. } => (0..model.observation_shape().len())
            .map(|_| rng.random::<f64>())
            .collect(),
        Shape::Flat(n) => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Parameter indices to check: all of them for small networks, otherwise a
/// random subset of `per_net`.
fn indices(n: usize, per_net: usize, rng: &mut impl Rng) -> Vec<usize> {
    if n <= per_net {
        (0..n).collect()
    } else {
        sample(rng, n, per_net).into_vec()
    }
}

fn nudge(net: &mut Network, i: usize, delta: f64) {
    *net.params_mut().nth(i).expect("index in range") += delta;
}

#[derive(Clone, Copy)]
enum Which {
    Trunk,
    Actor,
    Critic,
}

fn net_mut(model: &mut ActorCritic, which: Which) -> &mut Network {
    match which {
        Which::Trunk => &mut model.trunk.as_mut().expect("trunk").net,
        Which::Actor => &mut model.actor,
        Which::Critic => &mut model.critic,
    }
}

fn numeric_grad(
    model: &ActorCritic,
    which: Which,
    i: usize,
    loss: &dyn Fn(&ActorCritic) -> f64,
) -> f64 {
    let mut plus = model.clone();
    nudge(net_mut(&mut plus, which), i, FD_STEP);
    let mut minus = model.clone();
    nudge(net_mut(&mut minus, which), i, -FD_STEP);
    (loss(&plus) - loss(&minus)) / (2.0 * FD_STEP)
}

/// Max relative error of the actor path gradient of `c . pi(s)`.
pub fn actor_grad_error(
    model: &ActorCritic,
    obs: &[f64],
    per_net: usize,
    rng: &mut impl Rng,
) -> f64 {
    let c: Vec<f64> = (0..model.action_len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut m = model.clone();
    m.actor_forward(obs).unwrap();
    let mut grads = m.zero_actor_grads();
    m.actor_backward(&c, Some(&mut grads)).unwrap();
    let loss = |mm: &ActorCritic| {
        mm.policy(obs)
            .unwrap()
            .iter()
            .zip(&c)
            .map(|(p, c)| p * c)
            .sum::<f64>()
    };

    let mut worst: f64 = 0.0;
    let head: Vec<f64> = grads.head.iter().collect();
    for i in indices(head.len(), per_net, rng) {
        worst = worst.max(rel_err(
            head[i],
            numeric_grad(model, Which::Actor, i, &loss),
        ));
    }
    if let Some(t) = &grads.trunk {
        let trunk: Vec<f64> = t.iter().collect();
        for i in indices(trunk.len(), per_net, rng) {
            worst = worst.max(rel_err(
                trunk[i],
                numeric_grad(model, Which::Trunk, i, &loss),
            ));
        }
    }
    worst
}

/// Max relative error of the critic path gradient of `c * Q(s, a)`, including
/// the action gradient for Q-critics.
pub fn critic_grad_error(
    model: &ActorCritic,
    obs: &[f64],
    per_net: usize,
    rng: &mut impl Rng,
) -> f64 {
    let c: f64 = rng.random_range(0.5..1.5);
    let action: Option<Vec<f64>> = (model.critic_kind == CriticKind::StateAction).then(|| {
        (0..model.action_len())
            .map(|_| rng.random::<f64>())
            .collect()
    });
    let mut m = model.clone();
    m.critic_forward(obs, action.as_deref()).unwrap();
    let mut grads = m.zero_critic_grads();
    let d_action = m.critic_backward(c, Some(&mut grads)).unwrap();
    let loss = |mm: &ActorCritic| c * mm.value(obs, action.as_deref()).unwrap();

    let mut worst: f64 = 0.0;
    let head: Vec<f64> = grads.head.iter().collect();
    for i in indices(head.len(), per_net, rng) {
        worst = worst.max(rel_err(
            head[i],
            numeric_grad(model, Which::Critic, i, &loss),
        ));
    }
    if let Some(t) = &grads.trunk {
        let trunk: Vec<f64> = t.iter().collect();
        for i in indices(trunk.len(), per_net, rng) {
            worst = worst.max(rel_err(
                trunk[i],
                numeric_grad(model, Which::Trunk, i, &loss),
            ));
        }
    }
    if let Some(a) = &action {
        for j in 0..a.len() {
            let mut up = a.clone();
            up[j] += FD_STEP;
            let mut down = a.clone();
            down[j] -= FD_STEP;
            let n = c
                * (model.value(obs, Some(&up)).unwrap() - model.value(obs, Some(&down)).unwrap())
                / (2.0 * FD_STEP);
            worst = worst.max(rel_err(d_action[j], n));
        }
    }
    worst
}

/// Knot spacing of the piecewise-linear quadratic critic.
pub const KNOT: f64 = 0.01;

/// A Q-critic equal to the piecewise-linear interpolant of
/// `-sum_i (a_i - a*_i)^2` on a 0.01 grid over `[0, 1]`, ignoring the
/// state. With `a*` on the grid, the maximum is exactly `a*`.
pub fn quadratic_critic(obs_len: usize, optimum: &[f64], rng: &mut impl Rng) -> Network {
    let dims = optimum.len();
    let knots = (1.0 / KNOT).round() as usize; // units per action dim: knot 0..knots-1
    let hidden = dims * knots;
    let specs = [
        LayerSpec::dense(obs_len + dims, hidden),
        LayerSpec::Relu,
        LayerSpec::dense(hidden, 1),
        LayerSpec::Linear,
    ];
    let mut net = Network::new(Shape::Flat(obs_len + dims), &specs, rng).unwrap();
    {
        let (w, b) = net.layer_params_mut(0).unwrap();
        w.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..dims {
            for k in 0..knots {
                let unit = i * knots + k;
                w[unit * (obs_len + dims) + obs_len + i] = 1.0;
                b[unit] = -(k as f64) * KNOT;
            }
        }
    }
    {
        let (w, b) = net.layer_params_mut(2).unwrap();
        for i in 0..dims {
            // slope of the first segment, then a change of -2*KNOT per knot
            w[i * knots] = 2.0 * optimum[i] - KNOT;
            for k in 1..knots {
                w[i * knots + k] = -2.0 * KNOT;
            }
        }
        b[0] = -optimum.iter().map(|o| o * o).sum::<f64>();
    }
    net
}

/// A Q-critic equal to `-sum_i |a_i - center_i|`, ignoring the state.
pub fn abs_critic(obs_len: usize, center: &[f64], rng: &mut impl Rng) -> Network {
    let dims = center.len();
    let specs = [
        LayerSpec::dense(obs_len + dims, 2 * dims),
        LayerSpec::Relu,
        LayerSpec::dense(2 * dims, 1),
        LayerSpec::Linear,
    ];
    let mut net = Network::new(Shape::Flat(obs_len + dims), &specs, rng).unwrap();
    {
        let (w, b) = net.layer_params_mut(0).unwrap();
        w.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..dims {
            w[(2 * i) * (obs_len + dims) + obs_len + i] = 1.0;
            b[2 * i] = -center[i];
            w[(2 * i + 1) * (obs_len + dims) + obs_len + i] = -1.0;
            b[2 * i + 1] = center[i];
        }
    }
    {
        let (w, b) = net.layer_params_mut(2).unwrap();
        w.iter_mut().for_each(|v| *v = -1.0);
        b[0] = 0.0;
    }
    net
}

/// Closed-form counts for a `in -> 100 -> 100 -> out` head.
pub fn mlp_count(inputs: usize, outputs: usize) -> usize {
    (inputs * 100 + 100) + (100 * 100 + 100) + (100 * outputs + outputs)
}

/// Upper `p` quantile of chi-square with `k` degrees of freedom via the
/// Wilson-Hilferty cube approximation; `z` is the matching normal quantile.
pub fn chi_square_quantile(k: f64, z: f64) -> f64 {
    let c = 2.0 / (9.0 * k);
    k * (1.0 - c + z * c.sqrt()).powi(3)
}

/// Standard normal 0.99 quantile.
pub const Z_99: f64 = 2.326_347_874;
