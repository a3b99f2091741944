//! Generators, brute-force oracles and the per-criterion checks shared by the
//! acceptance target and the property suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;

use core_selftrain::abstraction::SynthesisAttemptLog;
use core_selftrain::dsl::{evaluate, parse_label_function, print_label_function, ApiRegistry, LabelFunction, Origin, PredicateCall};
use core_selftrain::extrapolation::{harvest_failed, refine_intent, IntentCandidate, MockIntent, RuleSet, Verdict};
use core_selftrain::graph::{
    categorize, enumerate_paths, expand, init_linear, path_count, score_path, Category, Path as GPath, StrategyGraph,
    VertexId,
};
use core_selftrain::pipeline::{synthesis_metrics, Abstractor, Pipeline, PipelineConfig};
use core_selftrain::sim::{generate_fixture_suite, replay_route, Behavior, SamplingConfig, ScriptedPolicy};
use core_selftrain::trajectory::{Action, Direction, Element, Source, Trajectory, UiState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

const TEXTS: &[&str] = &["a", "b", "c", "d"];
const TAGS: &[&str] = &["A", "BUTTON", "INPUT", "DIV"];

pub fn random_guard(rng: &mut ChaCha8Rng) -> PredicateCall {
    let t = |rng: &mut ChaCha8Rng| TEXTS.choose(rng).unwrap().to_string();
    match rng.gen_range(0..6) {
        0 => PredicateCall::new("validate_click_action", [t(rng)]),
        1 => {
            let kind = ["click", "hover"].choose(rng).unwrap().to_string();
            let tag = ["A", "BUTTON", "*"].choose(rng).unwrap().to_string();
            PredicateCall::new("validate_click_or_hover_action", [kind, tag, t(rng)])
        }
        2 => PredicateCall::new("validate_type_action", [t(rng), t(rng)]),
        3 => PredicateCall::new("validate_stop_action", [t(rng)]),
        4 => PredicateCall::new("validate_item_in_wishlist", [t(rng)]),
        _ => PredicateCall::new("validate_scroll_action", [["up", "down"].choose(rng).unwrap().to_string()]),
    }
}

pub fn random_lf(rng: &mut ChaCha8Rng) -> LabelFunction {
    let n = rng.gen_range(1..=2);
    LabelFunction::new((0..n).map(|_| random_guard(rng)).collect(), Origin::Expert).unwrap()
}

pub fn random_trajectory(rng: &mut ChaCha8Rng) -> Trajectory {
    let mut t = Trajectory::new("t", "g", Source::Sampled);
    let n = rng.gen_range(0..=6);
    for _ in 0..n {
        let k = rng.gen_range(1..=3);
        let mut elements: Vec<Element> = (0..k)
            .map(|i| Element::new(format!("e{i}"), *TAGS.choose(rng).unwrap(), *TEXTS.choose(rng).unwrap()))
            .collect();
        if rng.gen_bool(0.3) {
            elements.push(Element::new("w", "WISHLIST_ITEM", *TEXTS.choose(rng).unwrap()));
        }
        let target = format!("e{}", rng.gen_range(0..k));
        let action = match rng.gen_range(0..5) {
            0 | 1 => Action::click(target),
            2 => Action::Hover { target_id: target },
            3 => Action::type_text(target, *TEXTS.choose(rng).unwrap()),
            _ => Action::Scroll { direction: *[Direction::Up, Direction::Down].choose(rng).unwrap() },
        };
        t.push(UiState { elements, ..Default::default() }, action);
    }
    if rng.gen_bool(0.5) {
        t.push(UiState::default(), Action::stop(*TEXTS.choose(rng).unwrap()));
    }
    t
}

/// A DAG on up to `max_v` vertices: edges only go forward in a random
/// permutation, so ids carry no order information.
pub fn random_dag(rng: &mut ChaCha8Rng, max_v: usize) -> StrategyGraph {
    let n = rng.gen_range(1..=max_v);
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(rng);
    let vertices: BTreeMap<VertexId, LabelFunction> = (0..n as u32).map(|i| (VertexId(i), random_lf(rng))).collect();
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.35) {
                edges.insert((VertexId(order[i]), VertexId(order[j])));
            }
        }
    }
    StrategyGraph::from_parts("t", 0, vertices, edges).unwrap()
}

/// Every source→sink vertex sequence, by plain DFS over the edge list.
pub fn brute_paths(g: &StrategyGraph) -> Vec<Vec<VertexId>> {
    let ids: Vec<VertexId> = g.vertices().map(|(v, _)| v).collect();
    let edges: Vec<(VertexId, VertexId)> = g.edges().collect();
    let has_in = |v: VertexId| edges.iter().any(|(_, b)| *b == v);
    fn dfs(v: VertexId, edges: &[(VertexId, VertexId)], cur: &mut Vec<VertexId>, out: &mut Vec<Vec<VertexId>>) {
        cur.push(v);
        let next: Vec<VertexId> = edges.iter().filter(|(a, _)| *a == v).map(|(_, b)| *b).collect();
        if next.is_empty() {
            out.push(cur.clone());
        }
        for n in next {
            dfs(n, edges, cur, out);
        }
        cur.pop();
    }
    let mut out = Vec::new();
    for v in ids.into_iter().filter(|v| !has_in(*v)) {
        dfs(v, &edges, &mut Vec::new(), &mut out);
    }
    out
}

fn passes(g: &StrategyGraph, v: VertexId, t: &Trajectory, reg: &ApiRegistry) -> bool {
    evaluate(g.label(v).unwrap(), t, reg).unwrap().passed
}

pub fn brute_score(path: &[VertexId], g: &StrategyGraph, t: &Trajectory, reg: &ApiRegistry) -> usize {
    path.iter().filter(|v| passes(g, **v, t, reg)).count()
}

/// The three-way rule evaluated literally over every path.
pub fn brute_categorize(g: &StrategyGraph, t: &Trajectory, reg: &ApiRegistry) -> Category {
    let scored: Vec<(usize, usize)> = brute_paths(g).iter().map(|p| (brute_score(p, g, t, reg), p.len())).collect();
    if scored.iter().any(|(s, n)| s == n) {
        Category::FullyPassed
    } else if scored.iter().any(|(s, n)| 0 < *s && s < n) {
        Category::PartiallyPassed
    } else {
        Category::Failed
    }
}

pub fn check_ngpt() -> Check {
    let rows = [
        (7.75, 45, 0.1722),
        (5.17, 49, 0.1055),
        (1.11, 38, 0.0292),
        (2.53, 307, 0.0082),
        (-0.55, 255, -0.0022),
        (-0.77, 63, -0.0122),
    ];
    let mut worst: f64 = 0.0;
    for (perf, traj, want) in rows {
        let got = core_selftrain::pipeline::compute_ngpt(perf, traj).map_err(|e| e.to_string())?;
        let err = (got - want).abs();
        worst = worst.max(err);
        if err > 1e-4 {
            return Err(format!("({perf}, {traj}) -> {got:.6}, expected {want}"));
        }
    }
    Ok(format!("6/6 rows, max abs error {worst:.2e}"))
}

pub fn check_categorize(cases: usize, seed: u64) -> Check {
    let reg = ApiRegistry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally: BTreeMap<Category, usize> = BTreeMap::new();
    for i in 0..cases {
        let g = random_dag(&mut rng, 8);
        let t = random_trajectory(&mut rng);
        let want = brute_categorize(&g, &t, &reg);
        let got = categorize(&g, &t, &reg).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("case {i}: categorize {got}, brute force {want}"));
        }
        *tally.entry(want).or_default() += 1;
    }
    Ok(format!("{cases}/{cases} agree {tally:?}"))
}

pub fn check_score_path(cases: usize, seed: u64) -> Check {
    let reg = ApiRegistry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nonzero = 0;
    for i in 0..cases {
        let g = random_dag(&mut rng, 8);
        let t = random_trajectory(&mut rng);
        let paths = brute_paths(&g);
        let p = paths.choose(&mut rng).unwrap();
        let want = brute_score(p, &g, &t, &reg);
        let got = score_path(&GPath { vertex_ids: p.clone() }, &g, &t, &reg).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("case {i}: score_path {got}, per-vertex sum {want}"));
        }
        nonzero += usize::from(want > 0);
    }
    Ok(format!("{cases}/{cases} agree ({nonzero} with nonzero score)"))
}

fn path_lfs(g: &StrategyGraph, p: &GPath) -> Vec<LabelFunction> {
    p.vertex_ids.iter().map(|v| g.label(*v).unwrap().clone()).collect()
}

pub fn check_expand(sequences: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a small pool so that paths share vertices and sometimes reverse them
    let pool: Vec<LabelFunction> = (0..6).map(|_| random_lf(&mut rng)).collect();
    let pick = |rng: &mut ChaCha8Rng| -> Vec<LabelFunction> {
        let n = rng.gen_range(1..=4);
        (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect()
    };
    let (mut graphs, mut counted, mut grew) = (0usize, 0usize, 0usize);
    for s in 0..sequences {
        let mut g = init_linear(&pick(&mut rng), "t", 0).map_err(|e| e.to_string())?;
        let steps = rng.gen_range(1..=6);
        for k in 0..steps {
            let before = path_count(&g).map_err(|e| e.to_string())?;
            let lfs = pick(&mut rng);
            let success = rng.gen_bool(0.85);
            let next = expand(&g, &lfs, success).map_err(|e| format!("seq {s} step {k}: {e}"))?;
            let ctx = format!("seq {s} step {k}");
            if !next.is_acyclic() {
                return Err(format!("{ctx}: cycle"));
            }
            let after = path_count(&next).map_err(|e| e.to_string())?;
            if after < before {
                return Err(format!("{ctx}: path_count {before} -> {after}"));
            }
            if !success && next != g {
                return Err(format!("{ctx}: failed trajectory changed the graph"));
            }
            if success && next.find_path(&lfs).is_none() {
                return Err(format!("{ctx}: added path not found"));
            }
            grew += usize::from(after > before);
            let paths = enumerate_paths(&next).map_err(|e| e.to_string())?;
            if next.vertex_count() <= 12 {
                counted += 1;
                if after as usize != paths.len() || paths.len() != brute_paths(&next).len() {
                    return Err(format!("{ctx}: path_count {after}, enumerate {}, dfs {}", paths.len(), brute_paths(&next).len()));
                }
            }
            let existing = paths.choose(&mut rng).unwrap();
            let again = expand(&next, &path_lfs(&next, existing), true).map_err(|e| e.to_string())?;
            if again != next {
                return Err(format!("{ctx}: re-adding an existing path changed the graph"));
            }
            g = next;
            graphs += 1;
        }
    }
    Ok(format!("{sequences} sequences, {graphs} graphs; {grew} expansions added paths; {counted} small graphs counted exactly"))
}

pub fn check_fig3() -> Check {
    let world = generate_fixture_suite(0);
    let ab = Abstractor::mock();
    let mut n = 0;
    for task in world.tasks.iter().filter(|t| t.is_multi_route()) {
        let expert = replay_route(&world, task, &task.routes[0], Source::Expert).trajectory;
        let g = init_linear(&ab.run(&expert).map_err(|e| e.to_string())?.label_functions, &task.task_id, 0)
            .map_err(|e| e.to_string())?;
        for route in &task.routes[1..] {
            let alt = replay_route(&world, task, route, Source::Sampled).trajectory;
            let id = format!("{}/{}", task.task_id, route.name);
            let before = categorize(&g, &alt, &ab.registry).map_err(|e| e.to_string())?;
            if before == Category::FullyPassed {
                return Err(format!("{id}: already FullyPassed before expansion"));
            }
            if alt.env_feedback != Some(true) {
                return Err(format!("{id}: environment feedback {:?}", alt.env_feedback));
            }
            let lfs = ab.run(&alt).map_err(|e| format!("{id}: {e}"))?.label_functions;
            let g2 = expand(&g, &lfs, true).map_err(|e| e.to_string())?;
            let after = categorize(&g2, &alt, &ab.registry).map_err(|e| e.to_string())?;
            if after != Category::FullyPassed {
                return Err(format!("{id}: {after} after one expansion"));
            }
            if categorize(&g2, &expert, &ab.registry).map_err(|e| e.to_string())? != Category::FullyPassed {
                return Err(format!("{id}: expansion broke the expert path"));
            }
            n += 1;
        }
    }
    Ok(format!("{n} alternative routes: non-full before, FullyPassed after one expand"))
}

pub fn constructed_logs() -> Vec<SynthesisAttemptLog> {
    let mut logs: Vec<_> = (0..98).map(|i| SynthesisAttemptLog::with_success_at(format!("d{i}"), Some(1))).collect();
    logs.push(SynthesisAttemptLog::with_success_at("late", Some(2)));
    logs
}

pub fn check_synthesis() -> Check {
    let world = generate_fixture_suite(0);
    let ab = Abstractor::mock();
    let mut logs = Vec::new();
    let mut lfs = 0;
    for task in &world.tasks {
        for route in &task.routes {
            let t = replay_route(&world, task, route, Source::Expert).trajectory;
            let a = ab.run(&t).map_err(|e| format!("{}/{}: {e}", task.task_id, route.name))?;
            for lf in &a.label_functions {
                if !evaluate(lf, &t, &ab.registry).map_err(|e| e.to_string())?.passed {
                    return Err(format!("{}/{}: accepted function fails its source", task.task_id, route.name));
                }
                lfs += 1;
            }
            logs.extend(a.logs);
        }
    }
    let m = synthesis_metrics(&logs).map_err(|e| e.to_string())?;
    if m.osr != 1.0 || m.ftsr != 1.0 || m.esp != Some(1.0) {
        return Err(format!("fixture corpus: OSR {} FTSR {} ESP {:?}", m.osr, m.ftsr, m.esp));
    }
    // 98 first-attempt successes and one second-attempt success
    let want_ftsr = 98.0 / 99.0;
    let want_esp = (98.0 + 2.0) / 99.0;
    let c = synthesis_metrics(&constructed_logs()).map_err(|e| e.to_string())?;
    let esp = c.esp.ok_or("constructed set: ESP undefined")?;
    if (c.ftsr - want_ftsr).abs() > 1e-12 || (esp - want_esp).abs() > 1e-12 {
        return Err(format!("constructed set: FTSR {} ESP {esp}", c.ftsr));
    }
    if (c.ftsr - 0.9899).abs() > 1e-4 || (esp - 1.0101).abs() > 1e-4 || c.osr != 1.0 {
        return Err(format!("constructed set: FTSR {:.4} ESP {esp:.4}", c.ftsr));
    }
    Ok(format!(
        "{lfs} functions over {} logs all source-valid, OSR/FTSR/ESP = 1; constructed FTSR {:.4} ESP {esp:.4}",
        logs.len(),
        c.ftsr
    ))
}

pub fn check_pipeline(iterations: u32) -> Check {
    let p = Pipeline::mock(generate_fixture_suite(0), PipelineConfig::default()).map_err(|e| e.to_string())?;
    let mut policy = ScriptedPolicy::new(Behavior::Improving, 0);
    let mut state = p.initialize(&mut policy).map_err(|e| e.to_string())?;
    let mut pools = vec![state.task_pool.len()];
    let mut training = vec![state.training_data.len()];
    let mut paths = vec![state.avg_path_count()];
    let mut per_task: BTreeMap<String, u64> =
        state.graphs.iter().map(|(k, g)| (k.clone(), path_count(g).unwrap())).collect();
    for _ in 0..iterations {
        state = p.run_iteration(state, &mut policy).map_err(|e| e.to_string())?;
        pools.push(state.task_pool.len());
        training.push(state.training_data.len());
        paths.push(state.avg_path_count());
        for (k, g) in &state.graphs {
            let n = path_count(g).unwrap();
            if per_task.get(k).is_some_and(|&prev| n < prev) {
                return Err(format!("{k}: path count decreased"));
            }
            per_task.insert(k.clone(), n);
        }
    }
    let mono_u = |xs: &[usize]| xs.windows(2).all(|w| w[0] <= w[1]);
    let mono_f = |xs: &[f64]| xs.windows(2).all(|w| w[0] <= w[1]);
    let summary = format!("pool {pools:?}, training {training:?}, avg paths {paths:.3?}");
    if mono_u(&pools) && mono_u(&training) && mono_f(&paths) && state.metrics.len() == iterations as usize {
        Ok(summary)
    } else {
        Err(summary)
    }
}

/// The label functions from the paper's appendix case studies, as generated
/// code, with a trajectory reconstructed from each key step.
pub fn case_studies() -> Vec<(&'static str, &'static str, Trajectory)> {
    let blanket = "PEACE NEST Lightweight Down and Feather Fiber Throw Blanket Soft Couch Throw for Indoor and Outdoor Use, 50x70, Navy Blue";
    let mut wish = Trajectory::new("vwa-1", "Add the navy blue one in the second column to my wish list", Source::Expert);
    wish.push(UiState { elements: vec![Element::new("42", "A", "Add to Wish List")], ..Default::default() }, Action::click("42"));
    wish.push(UiState { elements: vec![Element::new("w0", "WISHLIST_ITEM", blanket)], ..Default::default() }, Action::stop(""));

    let mut calories = Trajectory::new("vwa-2", "How many calories are in this item per container?", Source::Expert);
    calories.push(UiState::default(), Action::stop("4200 calories"));

    let mut clock = Trajectory::new("aw-1", "Run the stopwatch.", Source::Expert);
    clock.push(
        UiState { elements: vec![Element::new("9", "INPUT", "Search apps, web and more")], ..Default::default() },
        Action::type_text("9", "Clock"),
    );

    let mut expense = Trajectory::new("aw-2", "Delete the following expenses from pro expense: Rental Income.", Source::Expert);
    expense.push(UiState { elements: vec![Element::new("3", "DIV", "Pro Expense")], ..Default::default() }, Action::click("3"));

    vec![
        (
            "vwa-1",
            "from Function_APIs import *
def verify_function(trajectory, stop_page_url):
    # Check if the 'Add to Wish List' link was clicked
    if not validate_click_or_hover_action(trajectory, 'click', 'A', 'Add to Wish List'):
        return False
    # Check if the item 'PEACE NEST Lightweight Down and Feather Fiber Throw Blanket Soft Couch Throw for Indoor and Outdoor Use, 50x70, Navy Blue' was added to the wishlist
    if not validate_item_in_wishlist(trajectory, 'PEACE NEST Lightweight Down and Feather Fiber Throw Blanket Soft Couch Throw for Indoor and Outdoor Use, 50x70, Navy Blue'):
        return False
    # Return True if all conditions were satisfied
    return True
# Execute and return result
result = verify_function(trajectory, stop_page_url)",
            wish,
        ),
        (
            "vwa-2",
            "from Function_APIs import *
def verify_function(trajectory, stop_page_url):
    if not validate_stop_action(trajectory, '4200 calories'):
        return False
    return True
# Execute and return result
result = verify_function(trajectory, stop_page_url)",
            calories,
        ),
        (
            "aw-1",
            "from Function_APIs import *
def verify_function(trajectory):
    if not validate_type_action(trajectory, 'Clock', target_text_field='Search apps, web and more'):
        return False
    return True
# Execute and return result
result = verify_function(trajectory)",
            clock,
        ),
        (
            "aw-2",
            "from Function_APIs import *
def verify_function(trajectory):
    if not validate_click_action(trajectory, 'Pro Expense'):
        return False
    return True
# Execute and return result
result = verify_function(trajectory)",
            expense,
        ),
    ]
}

/// Arbitrary label functions over the builtin registry with free-form
/// string arguments (quotes, backslashes, newlines, non-ASCII).
pub fn fuzz_lf(rng: &mut ChaCha8Rng, reg: &ApiRegistry) -> LabelFunction {
    const ALPHABET: &[char] = &['a', 'Z', '9', ' ', '"', '\\', '\n', '\'', ',', '(', ')', '#', 'é', '∑', '日', '\t', ':'];
    let names: Vec<&str> = reg.names().collect();
    let n = rng.gen_range(1..=4);
    let guards = (0..n)
        .map(|_| {
            let name = *names.choose(rng).unwrap();
            let sig = reg.get(name).unwrap();
            let args: Vec<String> = sig
                .params
                .iter()
                .map(|(_, kind)| match kind {
                    core_selftrain::dsl::ArgKind::Enum(vals) => vals.choose(rng).unwrap().to_string(),
                    _ => (0..rng.gen_range(0..12)).map(|_| *ALPHABET.choose(rng).unwrap()).collect(),
                })
                .collect();
            PredicateCall::new(name, args)
        })
        .collect();
    LabelFunction::new(guards, Origin::Expert).unwrap()
}

pub fn check_dsl(cases: usize, seed: u64) -> Check {
    let reg = ApiRegistry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..cases {
        let lf = fuzz_lf(&mut rng, &reg);
        let text = print_label_function(&lf);
        let back = parse_label_function(&text, &reg).map_err(|e| format!("case {i}: {e}\n{text}"))?;
        if back != lf || print_label_function(&back) != text {
            return Err(format!("case {i}: round trip differs\n{text}"));
        }
    }
    for (name, code, traj) in case_studies() {
        let lf = core_selftrain::abstraction::candidate_to_label_function(code, &reg).map_err(|e| format!("{name}: {e}"))?;
        if !evaluate(&lf, &traj, &reg).map_err(|e| e.to_string())?.passed {
            return Err(format!("{name}: does not pass its reconstructed trajectory"));
        }
        let canonical = print_label_function(&core_selftrain::dsl::canonicalize(&lf));
        let again = parse_label_function(&canonical, &reg).map_err(|e| format!("{name}: {e}"))?;
        if print_label_function(&again) != canonical {
            return Err(format!("{name}: canonical text is not stable"));
        }
    }
    Ok(format!("{cases}/{cases} fuzz round trips; 4 case-study functions parse, pass and round-trip"))
}

pub fn check_intent_rules() -> Check {
    let rules = RuleSet::default();
    let refine = |s: &str| refine_intent(&IntentCandidate::raw(s), &rules, None);
    for bad in ["Add to cart", "New task intent:"] {
        if refine(bad).verdict != Verdict::Invalid {
            return Err(format!("{bad:?} was accepted"));
        }
    }
    let clean = "Add the Blue Kettle to my wish list";
    let c = refine(clean);
    if c.verdict != Verdict::Accepted || c.refined.as_deref() != Some(clean) {
        return Err(format!("{clean:?} became {:?}", c.refined));
    }

    // every accepted intent from the fixture corpus: task goals plus mock
    // intents of noisy, failing rollouts
    let world = generate_fixture_suite(0);
    let mut raws: Vec<String> = world.tasks.iter().map(|t| t.goal.clone()).collect();
    let policy = ScriptedPolicy::new(Behavior::Noisy, 0);
    let cfg = SamplingConfig::default();
    let mut failed = Vec::new();
    for (i, task) in world.tasks.iter().enumerate() {
        for k in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64 * 10 + k);
            let t = policy.rollout(&world, task, &cfg, &mut rng).trajectory;
            if t.env_feedback == Some(false) {
                failed.push(t);
            }
        }
    }
    let h = harvest_failed(&failed, &MockIntent::default(), &rules, None);
    raws.extend(h.candidates.iter().map(|c| c.raw.clone()));
    let mut accepted = 0;
    for raw in &raws {
        let once = refine(raw);
        if once.verdict == Verdict::Accepted {
            accepted += 1;
            let twice = refine_intent(&once, &rules, None);
            if twice != once {
                return Err(format!("refine not idempotent on {raw:?}: {:?} then {:?}", once.refined, twice.refined));
            }
        }
    }
    Ok(format!("invalid intents rejected, clean intent unchanged; idempotent on all {accepted} accepted of {} fixture intents", raws.len()))
}

pub fn run_loop(bin: &str, dir: &Path, config: &Path) -> Result<(), String> {
    let out = Command::new(bin)
        .args(["--config"])
        .arg(config)
        .args(["--seed", "7", "loop", "--output-dir"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("loop exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(())
}

/// Relative path → bytes for every file under `root`.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn check_determinism(bin: &str) -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "iterations = 3\nsamples_per_task = 5\nworkers = 4\n").map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_loop(bin, &a, &cfg)?;
    run_loop(bin, &b, &cfg)?;
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    if sa.is_empty() {
        return Err("no artifacts written".into());
    }
    if sa.keys().ne(sb.keys()) {
        return Err("file sets differ".into());
    }
    for (k, v) in &sa {
        if sb[k] != *v {
            return Err(format!("{k} differs"));
        }
    }
    Ok(format!("{} files, {} bytes, identical", sa.len(), sa.values().map(Vec::len).sum::<usize>()))
}
