//! Task-pool growth from successes and intent relabelling of failures.
//!
//!     cargo run --example extrapolate_tasks

use core_selftrain::extrapolation::{
    augment_tasks, harvest_failed, refine_intent, IntentCandidate, MockIntent, RuleSet, TaskOrigin, TaskPool,
};
use core_selftrain::sim::{generate_fixture_suite, replay_route, run_episode};
use core_selftrain::trajectory::{Action, Source};

fn main() -> anyhow::Result<()> {
    let world = generate_fixture_suite(0);
    let mut pool = TaskPool::new(0);
    let seed_task = world.task("wish-garden-hose")?;
    pool.insert(seed_task.task_id.clone(), seed_task.goal.clone(), TaskOrigin::Seed);

    // evaluation runs: every task's first route succeeds
    let evaluated: Vec<_> =
        world.tasks.iter().map(|t| replay_route(&world, t, &t.routes[0], Source::Sampled).trajectory).collect();
    let aug = augment_tasks(&pool, &evaluated)?;
    println!("pool {} -> {} tasks, {} pseudo-expert demos", pool.len(), aug.pool.len(), aug.pseudo_experts.len());

    // a failed attempt: wander to the kitchen category and give up
    let task = world.task("price-blue-kettle")?;
    let mut actions = vec![Action::click("nav-kitchen"), Action::stop("")].into_iter();
    let failed = run_episode(&world, task, Source::Sampled, 5, |_, _, _| actions.next().unwrap()).trajectory;
    let h = harvest_failed(&[failed], &MockIntent::default(), &RuleSet::default(), None);
    for (t, goal) in &h.pairs {
        println!("relabelled {} -> \"{goal}\" ({} steps)", t.task_id, t.len());
    }
    for d in &h.drops {
        println!("dropped {}: {:?} by {:?}", d.task_id, d.raw, d.rule_fired);
    }

    let rules = RuleSet::default();
    for raw in ["The task intent is to browse the kitchen category", "Add to cart", "New task intent:"] {
        let c = refine_intent(&IntentCandidate::raw(raw), &rules, None);
        println!("{raw:?} -> {:?} {:?} {:?}", c.verdict, c.refined, c.rule_fired);
    }
    Ok(())
}
