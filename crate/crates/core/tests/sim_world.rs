use core_selftrain::sim::{
    expert_demos, generate_fixture_suite, replay_route, step, Behavior, SamplingConfig, ScriptedPolicy, Split, WorldSpec,
};
use core_selftrain::trajectory::{Action, Source};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fixture_suite_shape() {
    let w = generate_fixture_suite(0);
    w.check().unwrap();
    assert_eq!(w.tasks.len(), 20);
    assert_eq!(w.tasks.iter().filter(|t| t.split == Split::Train).count(), 14);
    assert!(w.tasks.iter().any(|t| t.is_multi_route()));
    assert_eq!(expert_demos(&w).len(), 14);
}

#[test]
fn every_route_succeeds() {
    let w = generate_fixture_suite(0);
    for t in &w.tasks {
        for r in &t.routes {
            let out = replay_route(&w, t, r, Source::Expert);
            assert_eq!(out.trajectory.env_feedback, Some(true), "{} / {}", t.task_id, r.name);
            assert_eq!(out.invalid_actions, 0);
        }
    }
}

#[test]
fn invalid_action_is_an_error_and_state_survives() {
    let w = generate_fixture_suite(0);
    let s = w.initial_state();
    assert!(step(&w, &s, &Action::click("no-such-element")).is_err());
    assert!(step(&w, &s, &Action::Navigate { url: "http://nowhere".into() }).is_err());
    let stopped = step(&w, &s, &Action::stop("x")).unwrap();
    assert!(step(&w, &stopped, &Action::stop("y")).is_err());
    assert_eq!(w.initial_state(), s);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn world_json_round_trips(seed in any::<u64>()) {
        let w = generate_fixture_suite(seed);
        let back = WorldSpec::from_json(&w.to_json()).unwrap();
        prop_assert_eq!(&back, &w);
    }

    #[test]
    fn seeded_rollouts_reproduce(seed in any::<u64>()) {
        let w = generate_fixture_suite(0);
        let p = ScriptedPolicy::new(Behavior::Noisy, seed);
        let cfg = SamplingConfig::default();
        let task = &w.tasks[(seed % w.tasks.len() as u64) as usize];
        let a = p.rollout(&w, task, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = p.rollout(&w, task, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a.trajectory, b.trajectory);
    }
}
