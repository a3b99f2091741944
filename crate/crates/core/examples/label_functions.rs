//! Parse, evaluate and re-print a label function.
//!
//!     cargo run --example label_functions

use core_selftrain::dsl::{evaluate, parse_label_function, print_label_function, ApiRegistry};
use core_selftrain::trajectory::{Action, Element, Source, Trajectory, UiState};

const SOURCE: &str = r#"fn verify(trajectory):
  require validate_click_action("Pro Expense")
  require validate_stop_action("")
"#;

fn main() -> anyhow::Result<()> {
    let registry = ApiRegistry::builtin();
    println!("available predicates:\n{}", registry.prompt_listing());

    let lf = parse_label_function(SOURCE, &registry)?;
    let mut t = Trajectory::new("expenses", "Delete the Rental Income expense", Source::Sampled);
    t.push(UiState { elements: vec![Element::new("3", "DIV", "Pro Expense")], ..Default::default() }, Action::click("3"));
    t.push(UiState::default(), Action::stop(""));

    let r = evaluate(&lf, &t, &registry)?;
    println!("passed: {} (guards matched at steps {:?})", r.passed, r.match_steps);

    t.steps.truncate(1);
    let r = evaluate(&lf, &t, &registry)?;
    println!("without the stop: passed {}, first failing guard {:?}", r.passed, r.first_fail_index);

    let printed = print_label_function(&lf);
    assert_eq!(parse_label_function(&printed, &registry)?, lf);
    print!("canonical text:\n{printed}");
    Ok(())
}
