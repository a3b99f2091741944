//! The offline shop world: tasks, routes, feedback and a sampling policy.
//!
//!     cargo run --example simulate_world -- [seed]

use core_selftrain::sim::{generate_fixture_suite, replay_route, Behavior, SamplingConfig, ScriptedPolicy};
use core_selftrain::trajectory::Source;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let world = generate_fixture_suite(seed);
    println!("{}: {} pages, {} tasks", world.app_name, world.pages.len(), world.tasks.len());

    for task in &world.tasks {
        let routes: Vec<String> = task
            .routes
            .iter()
            .map(|r| {
                let ok = replay_route(&world, task, r, Source::Expert).trajectory.env_feedback == Some(true);
                format!("{}({} steps, {})", r.name, r.actions.len(), if ok { "ok" } else { "FAIL" })
            })
            .collect();
        println!("  {:<24} {:?}  {}", task.task_id, task.split, routes.join(" "));
    }

    let policy = ScriptedPolicy::new(Behavior::Improving, seed);
    let cfg = SamplingConfig::default();
    let task = &world.tasks[0];
    for k in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let r = policy.rollout(&world, task, &cfg, &mut rng);
        println!("sample {k} on {}: {} steps, success {:?}", task.task_id, r.trajectory.len(), r.trajectory.env_feedback);
    }
    Ok(())
}
