//! A strategy graph grows when a successful trajectory takes a different
//! route: categorize, expand, re-categorize, export.
//!
//!     cargo run --example strategy_graph > graph.dot

use core_selftrain::graph::{categorize, enumerate_paths, expand, export_graph, init_linear, GraphFormat};
use core_selftrain::pipeline::Abstractor;
use core_selftrain::sim::{generate_fixture_suite, replay_route};
use core_selftrain::trajectory::Source;

fn main() -> anyhow::Result<()> {
    let world = generate_fixture_suite(0);
    let task = world.task("wish-watering-can")?;
    let ab = Abstractor::mock();

    let expert = replay_route(&world, task, &task.routes[0], Source::Expert).trajectory;
    let g = init_linear(&ab.run(&expert)?.label_functions, &task.task_id, 0)?;

    let alt = replay_route(&world, task, &task.routes[1], Source::Sampled).trajectory;
    eprintln!("alternative route before expansion: {}", categorize(&g, &alt, &ab.registry)?);

    let g = expand(&g, &ab.run(&alt)?.label_functions, alt.env_feedback == Some(true))?;
    eprintln!("alternative route after expansion:  {}", categorize(&g, &alt, &ab.registry)?);
    for p in enumerate_paths(&g)? {
        eprintln!("path: {:?}", p.vertex_ids.iter().map(|v| v.to_string()).collect::<Vec<_>>());
    }
    print!("{}", export_graph(&g, GraphFormat::Dot));
    Ok(())
}
