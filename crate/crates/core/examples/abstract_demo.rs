//! Semantic code abstraction of an expert demonstration with the offline
//! oracles: key steps, one label function each, and the attempt log.
//!
//!     cargo run --example abstract_demo -- [task_id]

use core_selftrain::abstraction::{abstract_trajectory, AbstractorConfig, Oracles};
use core_selftrain::dsl::{print_label_function, ApiRegistry};
use core_selftrain::sim::{expert_demos, generate_fixture_suite};
use core_selftrain::trajectory::{describe_trajectory, TemplateTable};

fn main() -> anyhow::Result<()> {
    let task_id = std::env::args().nth(1).unwrap_or_else(|| "wish-coffee-grinder".into());
    let world = generate_fixture_suite(0);
    let demo = expert_demos(&world)
        .into_iter()
        .find(|d| d.task_id == task_id)
        .ok_or_else(|| anyhow::anyhow!("no expert demo for '{task_id}'"))?;

    let table = TemplateTable::default();
    println!("goal: {}", demo.goal);
    for d in describe_trajectory(&demo, &table)? {
        println!("  {}. {}", d.step_t, d.text);
    }

    let registry = ApiRegistry::builtin();
    let a = abstract_trajectory(&demo, &demo.goal, &registry, &table, &Oracles::mock(), &AbstractorConfig::default())?;
    println!("key steps: {:?}", a.selection.selected.iter().map(|d| d.step_t).collect::<Vec<_>>());
    for lf in &a.label_functions {
        print!("{}", print_label_function(lf));
    }
    for log in &a.logs {
        println!("'{}': success at attempt {:?}", log.desc_text, log.success_position);
    }
    Ok(())
}
