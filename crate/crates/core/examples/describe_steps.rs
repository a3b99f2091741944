//! Turns raw GUI steps into template descriptions.
//!
//!     cargo run --example describe_steps

use core_selftrain::trajectory::{describe_trajectory, Action, Element, Source, TemplateTable, Trajectory, UiState};

fn main() -> anyhow::Result<()> {
    let page = |els: Vec<Element>| UiState { elements: els, url: Some("shop/p/kettle".into()), ..Default::default() };
    let mut t = Trajectory::new("demo", "Add the Blue Kettle to my wish list", Source::Expert);
    t.push(page(vec![Element::new("q", "INPUT", "Search products")]), Action::type_text("q", "kettle"));
    t.push(page(vec![Element::new("42", "A", "Add to Wish List")]), Action::click("42"));
    t.push(page(vec![Element::new("7", "DIV", "Blue Kettle")]), Action::click("7"));
    t.push(page(vec![]), Action::stop(""));

    for d in describe_trajectory(&t, &TemplateTable::default())? {
        println!("{:>2}. {}", d.step_t, d.text);
    }
    Ok(())
}
