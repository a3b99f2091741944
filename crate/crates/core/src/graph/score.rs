use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{enumerate_paths, GraphError, Path, StrategyGraph, VertexId};
use crate::dsl::{evaluate, ApiRegistry, EvalResult};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    FullyPassed,
    PartiallyPassed,
    Failed,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::FullyPassed => "FullyPassed",
            Category::PartiallyPassed => "PartiallyPassed",
            Category::Failed => "Failed",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a path's score is computed from its vertices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoringMode {
    /// Each vertex scores 1 when its label function passes anywhere in the
    /// trajectory; the path score is the sum.
    #[default]
    Unordered,
    /// A passing vertex only scores when its completion step is strictly
    /// later than that of the previous scoring vertex on the path.
    StrictOrdered,
}

type Memo = BTreeMap<VertexId, EvalResult>;

fn eval_vertex<'m>(
    memo: &'m mut Memo,
    g: &StrategyGraph,
    v: VertexId,
    traj: &Trajectory,
    registry: &ApiRegistry,
) -> Result<&'m EvalResult, GraphError> {
    if !memo.contains_key(&v) {
        let lf = g.label(v).ok_or_else(|| GraphError::Format(format!("unknown vertex {v}")))?;
        let r = evaluate(lf, traj, registry).map_err(|source| GraphError::Evaluation { vertex: v, source })?;
        memo.insert(v, r);
    }
    Ok(&memo[&v])
}

fn score_with_memo(
    memo: &mut Memo,
    p: &Path,
    g: &StrategyGraph,
    traj: &Trajectory,
    registry: &ApiRegistry,
    mode: ScoringMode,
) -> Result<usize, GraphError> {
    let mut score = 0;
    let mut last_step = 0u32;
    for v in &p.vertex_ids {
        let r = eval_vertex(memo, g, *v, traj, registry)?;
        match mode {
            ScoringMode::Unordered => score += usize::from(r.passed),
            ScoringMode::StrictOrdered => {
                if let Some(done) = r.completion_step() {
                    if done > last_step {
                        score += 1;
                        last_step = done;
                    }
                }
            }
        }
    }
    Ok(score)
}

/// Number of vertices on `p` whose label function passes `traj`.
pub fn score_path(p: &Path, g: &StrategyGraph, traj: &Trajectory, registry: &ApiRegistry) -> Result<usize, GraphError> {
    score_path_with(p, g, traj, registry, ScoringMode::Unordered)
}

pub fn score_path_with(
    p: &Path,
    g: &StrategyGraph,
    traj: &Trajectory,
    registry: &ApiRegistry,
    mode: ScoringMode,
) -> Result<usize, GraphError> {
    score_with_memo(&mut Memo::new(), p, g, traj, registry, mode)
}

const ALL_PASS: u8 = 1;
const ALL_FAIL: u8 = 2;
const MIXED: u8 = 4;

/// Three-way categorization against the best path of `g`.
pub fn categorize(g: &StrategyGraph, traj: &Trajectory, registry: &ApiRegistry) -> Result<Category, GraphError> {
    categorize_with(g, traj, registry, ScoringMode::Unordered)
}

pub fn categorize_with(
    g: &StrategyGraph,
    traj: &Trajectory,
    registry: &ApiRegistry,
    mode: ScoringMode,
) -> Result<Category, GraphError> {
    if g.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let mut memo = Memo::new();
    if mode == ScoringMode::StrictOrdered {
        let mut best = Category::Failed;
        for p in enumerate_paths(g)? {
            let s = score_with_memo(&mut memo, &p, g, traj, registry, mode)?;
            let c = classify(s, p.len());
            best = best.min(c);
            if best == Category::FullyPassed {
                break;
            }
        }
        return Ok(best);
    }

    // Track, per vertex, which pass/fail mixes are reachable on some path
    // prefix ending there. Each label function runs once.
    let order = g.topo_order()?;
    let mut reach: BTreeMap<VertexId, u8> = BTreeMap::new();
    let mut at_sinks = 0u8;
    for v in order {
        let passed = eval_vertex(&mut memo, g, v, traj, registry)?.passed;
        let incoming = if g.in_degree(v) == 0 { None } else { Some(reach.get(&v).copied().unwrap_or(0)) };
        let here = match incoming {
            None => {
                if passed {
                    ALL_PASS
                } else {
                    ALL_FAIL
                }
            }
            Some(mask) => {
                let mut m = 0;
                if mask & ALL_PASS != 0 {
                    m |= if passed { ALL_PASS } else { MIXED };
                }
                if mask & ALL_FAIL != 0 {
                    m |= if passed { MIXED } else { ALL_FAIL };
                }
                if mask & MIXED != 0 {
                    m |= MIXED;
                }
                m
            }
        };
        let mut has_succ = false;
        for s in g.successors(v) {
            has_succ = true;
            *reach.entry(s).or_insert(0) |= here;
        }
        if !has_succ {
            at_sinks |= here;
        }
        reach.insert(v, here);
    }
    Ok(if at_sinks & ALL_PASS != 0 {
        Category::FullyPassed
    } else if at_sinks & MIXED != 0 {
        Category::PartiallyPassed
    } else {
        Category::Failed
    })
}

pub(crate) fn classify(score: usize, len: usize) -> Category {
    if score == len {
        Category::FullyPassed
    } else if score > 0 {
        Category::PartiallyPassed
    } else {
        Category::Failed
    }
}

/// Path with the highest pass fraction (ties: higher score, then first in
/// enumeration order) and its score.
pub fn best_path(
    g: &StrategyGraph,
    traj: &Trajectory,
    registry: &ApiRegistry,
    mode: ScoringMode,
) -> Result<Option<(Path, usize)>, GraphError> {
    let mut memo = Memo::new();
    let mut best: Option<(Path, usize)> = None;
    for p in enumerate_paths(g)? {
        let s = score_with_memo(&mut memo, &p, g, traj, registry, mode)?;
        let better = match &best {
            None => true,
            Some((bp, bs)) => {
                let lhs = s * bp.len();
                let rhs = bs * p.len();
                lhs > rhs || (lhs == rhs && s > *bs)
            }
        };
        if better {
            best = Some((p, s));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{LabelFunction, Origin, PredicateCall};
    use crate::graph::init_linear;
    use crate::trajectory::{Action, Element, Source, UiState};

    fn click(text: &str) -> LabelFunction {
        LabelFunction::new(vec![PredicateCall::new("validate_click_action", [text])], Origin::Expert).unwrap()
    }

    fn traj(clicks: &[&str]) -> Trajectory {
        let mut t = Trajectory::new("t", "g", Source::Sampled);
        for c in clicks {
            t.push(UiState { elements: vec![Element::new("1", "A", *c)], ..Default::default() }, Action::click("1"));
        }
        t
    }

    #[test]
    fn all_and_none_pass() {
        let reg = ApiRegistry::builtin();
        let g = init_linear(&[click("a"), click("b"), click("c")], "t", 0).unwrap();
        let p = enumerate_paths(&g).unwrap().remove(0);
        assert_eq!(score_path(&p, &g, &traj(&["a", "b", "c"]), &reg).unwrap(), 3);
        assert_eq!(score_path(&p, &g, &traj(&["z"]), &reg).unwrap(), 0);
        assert_eq!(categorize(&g, &traj(&["c", "a", "b"]), &reg).unwrap(), Category::FullyPassed);
        assert_eq!(categorize(&g, &traj(&["z"]), &reg).unwrap(), Category::Failed);
    }

    #[test]
    fn partially_passed() {
        let reg = ApiRegistry::builtin();
        let g = init_linear(&[click("a"), click("b")], "t", 0).unwrap();
        assert_eq!(categorize(&g, &traj(&["b"]), &reg).unwrap(), Category::PartiallyPassed);
    }

    #[test]
    fn empty_graph_is_an_error() {
        let reg = ApiRegistry::builtin();
        assert_eq!(categorize(&StrategyGraph::empty("t", 0), &traj(&[]), &reg), Err(GraphError::EmptyGraph));
    }

    #[test]
    fn strict_mode_requires_order() {
        let reg = ApiRegistry::builtin();
        let g = init_linear(&[click("a"), click("b")], "t", 0).unwrap();
        let reversed = traj(&["b", "a"]);
        assert_eq!(categorize(&g, &reversed, &reg).unwrap(), Category::FullyPassed);
        assert_eq!(
            categorize_with(&g, &reversed, &reg, ScoringMode::StrictOrdered).unwrap(),
            Category::PartiallyPassed
        );
        assert_eq!(
            categorize_with(&g, &traj(&["a", "b"]), &reg, ScoringMode::StrictOrdered).unwrap(),
            Category::FullyPassed
        );
    }

    #[test]
    fn best_path_prefers_full_pass() {
        let reg = ApiRegistry::builtin();
        let g = init_linear(&[click("a"), click("b")], "t", 0).unwrap();
        let g = crate::graph::expand(&g, &[click("x")], true).unwrap();
        let (p, s) = best_path(&g, &traj(&["x"]), &reg, ScoringMode::Unordered).unwrap().unwrap();
        assert_eq!((p.len(), s), (1, 1));
    }
}
