//! Runs a few self-training iterations on the offline shop world with mock
//! oracles and a scripted policy, printing the metrics table.
//!
//!     cargo run --example self_train_loop -- [iterations] [seed]

use core_selftrain::pipeline::{Pipeline, PipelineConfig, CSV_HEADER};
use core_selftrain::sim::{generate_fixture_suite, Behavior, ScriptedPolicy};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: u32 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let world = generate_fixture_suite(seed);
    let pipeline = Pipeline::mock(world, PipelineConfig { seed, ..Default::default() })?;
    let mut policy = ScriptedPolicy::new(Behavior::Improving, seed);
    let state = pipeline.run(iterations, &mut policy)?;

    println!("baseline overall: {:.3}", state.baseline_overall);
    println!("{CSV_HEADER}");
    for m in &state.metrics {
        println!("{}", m.csv_row());
    }
    Ok(())
}
