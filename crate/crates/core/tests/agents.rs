mod common;

use aclab::agents::{
    spg_select, ActorCritic, AgentBundle, AgentConfig, Algorithm, Architecture, CriticKind,
    NoiseSchedule,
};
use aclab::env::ActionBounds;
use aclab::nn::{LayerSpec, Network};
use aclab::{Shape, Transition};
use common::*;
use proptest::prelude::*;
use rand::Rng;

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

/// Bundle whose Q-critic is replaced by a hand-built network.
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

#[test]
fn cacla_ignores_non_positive_td_errors() {
    let mut r = rng(1);
    let mut agent = AgentBundle::new(
        Algorithm::Cacla,
        &mlp(4, 2),
        config(Algorithm::Cacla),
        &mut r,
    )
    .unwrap();
    // V around +50 everywhere; rewards of -1 make every delta negative
    agent.optimistic_init(50.0).unwrap();
    let batch: Vec<Transition> = random_batch(4, 2, 32, &mut r)
        .into_iter()
        .map(|t| Transition { reward: -1.0, ..t })
        .collect();
    assert!(agent.td_errors(&batch).unwrap().iter().all(|&d| d <= 0.0));
    let before = agent.actor().param_hash();
    let adam_before = agent.actor().adam().step();
    let stats = agent.train_step(&batch, &mut r).unwrap();
    assert_eq!(stats.actor_rows, 0);
    assert_eq!(agent.actor().param_hash(), before);
    assert_eq!(agent.actor().adam().step(), adam_before);
}

#[test]
fn cacla_uses_exactly_the_positive_rows() {
    let mut r = rng(2);
    let agent = AgentBundle::new(
        Algorithm::Cacla,
        &mlp(3, 2),
        config(Algorithm::Cacla),
        &mut r,
    )
    .unwrap();
    let batch = random_batch(3, 2, 64, &mut r);
    let deltas = agent.td_errors(&batch).unwrap();
    let positive: Vec<Transition> = batch
        .iter()
        .zip(&deltas)
        .filter(|(_, &d)| d > 0.0)
        .map(|(t, _)| t.clone())
        .collect();
    assert!(!positive.is_empty() && positive.len() < batch.len());

    let mut full = agent.clone();
    let used = full.train_actor_cacla(&batch).unwrap();
    let mut only = agent.clone();
    only.train_actor_cacla(&positive).unwrap();
    assert_eq!(used, positive.len());
    assert_eq!(full.actor().param_hash(), only.actor().param_hash());
}

#[test]
fn cacla_delta_comes_from_the_critic_before_its_update() {
    let mut r = rng(3);
    let agent = AgentBundle::new(
        Algorithm::Cacla,
        &mlp(3, 2),
        config(Algorithm::Cacla),
        &mut r,
    )
    .unwrap();
    let batch = random_batch(3, 2, 32, &mut r);
    let mut expected = agent.clone();
    expected.train_actor_cacla(&batch).unwrap();
    let mut stepped = agent.clone();
    stepped.train_step(&batch, &mut r).unwrap();
    assert_eq!(stepped.actor().param_hash(), expected.actor().param_hash());
}

#[test]
fn dpg_actor_step_leaves_critic_untouched() {
    let mut r = rng(4);
    for arch in [
        mlp(5, 2),
        Architecture::Pixel {
            side: 42,
            action_len: 2,
            bounds: ActionBounds::Unit,
        },
    ] {
        let mut agent =
            AgentBundle::new(Algorithm::Dpg, &arch, config(Algorithm::Dpg), &mut r).unwrap();
        let obs_len = arch.observation_shape().len();
        let batch = random_batch(obs_len, 2, 8, &mut r);
        let critic = agent.critic().param_hash();
        let critic_adam = agent.critic().adam().step();
        let actor = agent.actor().param_hash();
        agent.train_actor_dpg(&batch).unwrap();
        assert_eq!(agent.critic().param_hash(), critic);
        assert_eq!(agent.critic().adam().step(), critic_adam);
        assert_ne!(agent.actor().param_hash(), actor);
    }
}

#[test]
fn quadratic_critic_oracle_is_what_it_claims() {
    let mut r = rng(5);
    let optimum = [0.3, 0.7];
    let net = quadratic_critic(3, &optimum, &mut r);
    for _ in 0..200 {
        // on grid points the interpolant equals the quadratic exactly
        let a = [
            r.random_range(0..=99) as f64 * KNOT,
            r.random_range(0..=99) as f64 * KNOT,
        ];
        let s = [r.random(), r.random(), r.random()];
        let q = net.predict(&[s[0], s[1], s[2], a[0], a[1]]).unwrap()[0];
        let exact = -(a[0] - optimum[0]).powi(2) - (a[1] - optimum[1]).powi(2);
        assert!((q - exact).abs() < 1e-12, "{a:?}: {q} vs {exact}");
    }
}

#[test]
fn dpg_ascends_to_the_known_optimum() {
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
    let mut converged_at = None;
    for step in 1..=5_000 {
        agent.train_actor_dpg(&batch).unwrap();
        let a = agent.online.policy(&s).unwrap();
        let err = (a[0] - optimum[0]).abs().max((a[1] - optimum[1]).abs());
        if err < 1e-2 && converged_at.is_none() {
            converged_at = Some(step);
        }
    }
    let a = agent.online.policy(&s).unwrap();
    let err = (a[0] - optimum[0]).abs().max((a[1] - optimum[1]).abs());
    assert!(
        converged_at.is_some() && err < 1e-2,
        "final {a:?}, err {err}"
    );
}

#[test]
fn spg_skips_states_where_no_sample_beats_the_policy() {
    let mut r = rng(7);
    let base = ActorCritic::build(&mlp(3, 2), CriticKind::StateAction, &mut r).unwrap();
    let s = vec![0.1, 0.2, 0.3];
    let center = base.policy(&s).unwrap();
    let critic = abs_critic(3, &center, &mut r);
    let online = ActorCritic::from_parts(
        None,
        base.actor,
        critic,
        CriticKind::StateAction,
        ActionBounds::Unit,
    )
    .unwrap();
    let mut agent =
        AgentBundle::from_parts(Algorithm::Spg, config(Algorithm::Spg), online, None, 0).unwrap();
    let batch = vec![Transition::new(s.clone(), vec![0.0, 0.0], 0.0, s.clone(), false); 16];
    let choices = agent.spg_search(&batch, &mut r).unwrap();
    assert!(choices.iter().all(|c| c.chosen.is_none()));
    assert!(choices
        .iter()
        .all(|c| c.sample_values.iter().all(|&v| v < c.base_value)));
    let before = agent.actor().param_hash();
    assert_eq!(agent.train_actor_spg(&batch, &mut r).unwrap(), 0);
    assert_eq!(agent.actor().param_hash(), before);
}

#[test]
fn spg_search_agrees_with_brute_force() {
    let mut r = rng(8);
    let agent =
        AgentBundle::new(Algorithm::Spg, &mlp(4, 2), config(Algorithm::Spg), &mut r).unwrap();
    let batch = random_batch(4, 2, 50, &mut r);
    let choices = agent.spg_search(&batch, &mut r).unwrap();
    for (t, c) in batch.iter().zip(&choices) {
        assert_eq!(c.samples.len(), 5);
        let base = agent
            .online
            .value(&t.state, Some(&agent.online.policy(&t.state).unwrap()))
            .unwrap();
        assert_eq!(base, c.base_value);
        let mut best: Option<(usize, f64)> = None;
        for (i, a) in c.samples.iter().enumerate() {
            assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
            let q = agent.online.value(&t.state, Some(a)).unwrap();
            assert_eq!(q, c.sample_values[i]);
            if q > base && best.is_none_or(|(_, b)| q > b) {
                best = Some((i, q));
            }
        }
        assert_eq!(c.chosen, best.map(|(i, _)| i));
    }
}

#[test]
fn spg_moves_toward_the_better_sample() {
    let mut r = rng(9);
    let optimum = [0.9, 0.1];
    let mut agent = with_critic(
        Algorithm::Spg,
        3,
        quadratic_critic(3, &optimum, &mut r),
        &mut r,
    );
    agent.config.actor_lr = 1e-3;
    let s = vec![0.5, 0.5, 0.5];
    let batch = vec![Transition::new(s.clone(), vec![0.5, 0.5], 0.0, s.clone(), false); 8];
    let dist = |a: &[f64]| ((a[0] - optimum[0]).powi(2) + (a[1] - optimum[1]).powi(2)).sqrt();
    let start = dist(&agent.online.policy(&s).unwrap());
    for _ in 0..500 {
        agent.train_actor_spg(&batch, &mut r).unwrap();
    }
    let end = dist(&agent.online.policy(&s).unwrap());
    assert!(end < start * 0.5, "{start} -> {end}");
}

/// One non-terminal self-looping state with constant reward: V* = r / (1 - gamma).
fn fixpoint(algorithm: Algorithm, steps: u64) -> f64 {
    let mut r = rng(10);
    let mut cfg = config(algorithm);
    cfg.critic_lr = 1e-3;
    cfg.target_update_interval = 100;
    let mut agent = AgentBundle::new(algorithm, &mlp(4, 2), cfg, &mut r).unwrap();
    let s = vec![0.5, -0.25, 0.1, 0.8];
    let a = agent.online.policy(&s).unwrap();
    let batch = vec![Transition::new(s.clone(), a.clone(), 1.0, s.clone(), false); 32];
    for _ in 0..steps {
        agent.train_critic(&batch).unwrap();
        agent.advance_steps(1);
    }
    let action = (algorithm != Algorithm::Cacla).then_some(&a[..]);
    agent.online.value(&s, action).unwrap()
}

#[test]
fn critic_reaches_the_constant_reward_fixpoint() {
    for algorithm in [Algorithm::Cacla, Algorithm::Dpg] {
        let v = fixpoint(algorithm, 12_000);
        assert!((v - 10.0).abs() / 10.0 < 0.01, "{algorithm}: V = {v}");
    }
}

#[test]
fn critic_targets_use_target_networks_and_terminals() {
    let mut r = rng(11);
    let mut agent =
        AgentBundle::new(Algorithm::Dpg, &mlp(3, 2), config(Algorithm::Dpg), &mut r).unwrap();
    let batch = random_batch(3, 2, 20, &mut r);
    let before = agent.critic_targets(&batch).unwrap();
    // training the online nets must not move the bootstrap targets
    for _ in 0..10 {
        agent.train_step(&batch, &mut r).unwrap();
    }
    assert_eq!(agent.critic_targets(&batch).unwrap(), before);
    for (t, y) in batch.iter().zip(&before) {
        let expected = if t.terminal {
            t.reward
        } else {
            let a = agent.target.policy(&t.next_state).unwrap();
            t.reward + 0.9 * agent.target.value(&t.next_state, Some(&a)).unwrap()
        };
        assert_eq!(*y, expected);
    }
}

#[test]
fn targets_refresh_only_on_the_interval() {
    let mut r = rng(12);
    let mut agent =
        AgentBundle::new(Algorithm::Spg, &mlp(3, 2), config(Algorithm::Spg), &mut r).unwrap();
    let batch = random_batch(3, 2, 8, &mut r);
    let frozen = agent.critic_target().param_hash();
    for step in 1..=1499u64 {
        let stats = agent.train_step(&batch[..], &mut r).unwrap();
        assert!(!stats.targets_updated, "step {step}");
        if step % 500 == 0 {
            assert_eq!(agent.critic_target().param_hash(), frozen);
        }
    }
    let stats = agent.train_step(&batch, &mut r).unwrap();
    assert!(stats.targets_updated);
    assert_eq!(agent.step_counter(), 1500);
    assert_eq!(
        agent.critic_target().param_hash(),
        agent.critic().param_hash()
    );
    assert_eq!(
        agent.actor_target().param_hash(),
        agent.actor().param_hash()
    );
    assert!(!agent.advance_steps(1499));
    assert!(agent.advance_steps(1));
}

#[test]
fn optimistic_init_shifts_both_critics() {
    let mut r = rng(13);
    let mut agent = AgentBundle::new(
        Algorithm::Cacla,
        &mlp(3, 2),
        config(Algorithm::Cacla),
        &mut r,
    )
    .unwrap();
    let s = [0.1, 0.2, 0.3];
    let v0 = agent.online.value(&s, None).unwrap();
    let t0 = agent.target.value(&s, None).unwrap();
    agent.optimistic_init(7.5).unwrap();
    assert!((agent.online.value(&s, None).unwrap() - v0 - 7.5).abs() < 1e-12);
    assert!((agent.target.value(&s, None).unwrap() - t0 - 7.5).abs() < 1e-12);
    let batch = random_batch(3, 2, 4, &mut r);
    agent.train_step(&batch, &mut r).unwrap();
    assert!(agent.optimistic_init(1.0).is_err());
}

#[test]
fn acting_is_clamped_and_noise_free_at_zero_sd() {
    let mut r = rng(14);
    let agent =
        AgentBundle::new(Algorithm::Dpg, &mlp(3, 2), config(Algorithm::Dpg), &mut r).unwrap();
    let s = [0.3, 0.3, 0.3];
    let pi = agent.online.policy(&s).unwrap();
    assert_eq!(agent.act(&s, 0.0, &mut r).unwrap(), pi);
    for _ in 0..500 {
        assert!(agent
            .act(&s, 5.0, &mut r)
            .unwrap()
            .iter()
            .all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn agent_checkpoint_round_trip() {
    let mut r = rng(15);
    for (label, arch, kind) in all_architectures() {
        let algorithm = match kind {
            CriticKind::State => Algorithm::Cacla,
            CriticKind::StateAction => Algorithm::Spg,
        };
        let mut agent = AgentBundle::new(algorithm, &arch, config(algorithm), &mut r).unwrap();
        let batch = random_batch(arch.observation_shape().len(), arch.action_len(), 4, &mut r);
        agent.train_step(&batch, &mut r).unwrap();
        let bytes = agent.to_checkpoint_bytes(label);
        let back = AgentBundle::from_checkpoint_bytes(&bytes).unwrap();
        assert_eq!(back.label, label);
        let b = back.bundle;
        assert_eq!(b.step_counter(), agent.step_counter());
        assert_eq!(b.config, agent.config);
        for _ in 0..5 {
            let obs = random_obs(&agent.online, &mut r);
            assert_eq!(
                b.online.policy(&obs).unwrap(),
                agent.online.policy(&obs).unwrap()
            );
            assert_eq!(
                b.target.policy(&obs).unwrap(),
                agent.target.policy(&obs).unwrap()
            );
        }
        assert!(AgentBundle::from_checkpoint_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}

#[test]
fn mismatched_networks_are_rejected() {
    let mut r = rng(16);
    let actor = Network::new(
        Shape::Flat(3),
        &Architecture::head_specs(3, 2, LayerSpec::Sigmoid),
        &mut r,
    )
    .unwrap();
    let critic = Network::new(
        Shape::Flat(4),
        &Architecture::head_specs(4, 1, LayerSpec::Linear),
        &mut r,
    )
    .unwrap();
    assert!(ActorCritic::from_parts(
        None,
        actor,
        critic,
        CriticKind::StateAction,
        ActionBounds::Unit
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spg_select_never_picks_a_non_improvement(
        base in -10.0f64..10.0,
        values in proptest::collection::vec(-10.0f64..10.0, 0..8),
    ) {
        match spg_select(base, &values) {
            Some(i) => {
                prop_assert!(values[i] > base);
                prop_assert!(values.iter().all(|&v| v <= values[i]));
                prop_assert!(values[..i].iter().all(|&v| v < values[i]));
            }
            None => prop_assert!(values.iter().all(|&v| v <= base)),
        }
    }
}
