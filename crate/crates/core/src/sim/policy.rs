use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{run_episode, Rollout, SimTask, WorldSpec, WorldState};
use crate::trajectory::{Action, Direction, Source, UiState};

/// Decoding parameters for sampled rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: usize,
    pub samples_per_task: usize,
    pub do_sample: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { temperature: 1.0, top_p: 0.9, top_k: 50, samples_per_task: 5, do_sample: true }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.top_k < 1 {
            return Err("top_k must be at least 1".into());
        }
        if self.samples_per_task < 1 {
            return Err("samples_per_task must be at least 1".into());
        }
        if !(self.temperature >= 0.0) {
            return Err(format!("temperature must be non-negative, got {}", self.temperature));
        }
        Ok(())
    }

    /// Same settings, decoding greedily.
    pub fn greedy(&self) -> Self {
        SamplingConfig { temperature: 0.0, do_sample: false, ..self.clone() }
    }

    pub fn is_greedy(&self) -> bool {
        !self.do_sample || self.temperature == 0.0
    }

    /// Picks an index from `logits`: argmax (first on ties) when greedy,
    /// otherwise temperature softmax restricted to the top-k / nucleus.
    pub fn choose(&self, logits: &[f64], rng: &mut ChaCha8Rng) -> usize {
        assert!(!logits.is_empty(), "no candidates to choose from");
        if self.is_greedy() {
            let mut best = 0;
            for (i, &l) in logits.iter().enumerate() {
                if l > logits[best] {
                    best = i;
                }
            }
            return best;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<(usize, f64)> =
            logits.iter().enumerate().map(|(i, &l)| (i, ((l - max) / self.temperature).exp())).collect();
        let z: f64 = probs.iter().map(|p| p.1).sum();
        probs.iter_mut().for_each(|p| p.1 /= z);
        probs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        probs.truncate(self.top_k);
        let mut cum = 0.0;
        let mut keep = probs.len();
        for (n, p) in probs.iter().enumerate() {
            cum += p.1;
            if cum >= self.top_p {
                keep = n + 1;
                break;
            }
        }
        probs.truncate(keep);
        let dist = WeightedIndex::new(probs.iter().map(|p| p.1)).expect("positive weights");
        probs[dist.sample(rng)].0
    }
}

/// 64-bit digest of the given parts, stable across platforms and runs.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    /// Always follows the first declared route.
    ExpertRoute,
    /// Follows the second route when there is one.
    AlternativeRoute,
    /// Follows the first route but takes a uniformly random action with
    /// probability `epsilon`.
    Noisy,
    /// Softmax over candidate actions where the on-route action's logit grows
    /// with training; the other actions get fixed pseudo-random logits.
    Improving,
}

impl std::str::FromStr for Behavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "expert_route" => Ok(Behavior::ExpertRoute),
            "alternative_route" => Ok(Behavior::AlternativeRoute),
            "noisy" => Ok(Behavior::Noisy),
            "improving" => Ok(Behavior::Improving),
            other => Err(format!("unknown policy behavior '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub step_budget: usize,
    pub epsilon: f64,
    /// Skill gained per `update` call.
    pub skill_per_level: f64,
    /// Extra skill on tasks that appeared in training data.
    pub trained_bonus: f64,
    /// Per-task difficulty is drawn from `[0, difficulty_span)`.
    pub difficulty_span: f64,
    /// Off-route logits are drawn from `[noise_low, noise_high)`.
    pub noise_low: f64,
    pub noise_high: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            step_budget: 12,
            epsilon: 0.3,
            skill_per_level: 0.4,
            trained_bonus: 1.0,
            difficulty_span: 2.5,
            noise_low: -3.0,
            noise_high: 1.0,
        }
    }
}

/// Simulated agent. Rollouts are a pure function of (seed, level, trained
/// set, task, rng stream).
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    pub behavior: Behavior,
    pub seed: u64,
    pub params: PolicyParams,
    level: u32,
    trained: BTreeSet<String>,
}

fn action_key(a: &Action) -> String {
    serde_json::to_string(a).expect("actions serialize")
}

fn candidates(world: &WorldSpec, ui: &UiState, money: &Regex) -> Vec<Action> {
    let mut out = Vec::new();
    let vocab = world.query_vocabulary();
    for e in &ui.elements {
        match e.tag.as_str() {
            "A" | "BUTTON" => out.push(Action::click(&e.id)),
            "INPUT" => out.extend(vocab.iter().map(|q| Action::type_text(&e.id, q))),
            _ => {}
        }
    }
    out.push(Action::Scroll { direction: Direction::Down });
    out.extend(world.shortcuts.iter().map(|u| Action::Navigate { url: u.clone() }));
    out.push(Action::stop(""));
    let mut answers = BTreeSet::new();
    for e in &ui.elements {
        for m in money.find_iter(&e.text) {
            if answers.insert(m.as_str().to_string()) {
                out.push(Action::stop(m.as_str()));
            }
        }
    }
    out
}

fn available(ui: &UiState, a: &Action) -> bool {
    a.target_id().map_or(true, |id| ui.element(id).is_some())
}

impl ScriptedPolicy {
    pub fn new(behavior: Behavior, seed: u64) -> Self {
        ScriptedPolicy { behavior, seed, params: PolicyParams::default(), level: 0, trained: BTreeSet::new() }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn trained_tasks(&self) -> &BTreeSet<String> {
        &self.trained
    }

    /// One round of "fine-tuning": raises the level and remembers the tasks.
    pub fn update<I: IntoIterator<Item = String>>(&mut self, task_ids: I) {
        self.level += 1;
        self.trained.extend(task_ids);
    }

    pub fn difficulty(&self, task_id: &str) -> f64 {
        unit(stable_hash(&["difficulty", &self.seed.to_string(), task_id])) * self.params.difficulty_span
    }

    /// Logit of the on-route action for `task_id`.
    pub fn skill(&self, task_id: &str) -> f64 {
        let bonus = if self.trained.contains(task_id) { self.params.trained_bonus } else { 0.0 };
        self.level as f64 * self.params.skill_per_level + bonus - self.difficulty(task_id)
    }

    fn noise(&self, task_id: &str, url: &str, a: &Action) -> f64 {
        let u = unit(stable_hash(&["noise", &self.seed.to_string(), task_id, url, &action_key(a)]));
        self.params.noise_low + u * (self.params.noise_high - self.params.noise_low)
    }

    pub fn rollout(&self, world: &WorldSpec, task: &SimTask, cfg: &SamplingConfig, rng: &mut ChaCha8Rng) -> Rollout {
        let money = Regex::new(r"\$\d+(?:\.\d{2})?").expect("static regex");
        let route_idx = match self.behavior {
            Behavior::AlternativeRoute if task.routes.len() > 1 => 1,
            Behavior::Improving if !cfg.is_greedy() && task.routes.len() > 1 => rng.gen_range(0..task.routes.len()),
            _ => 0,
        };
        let route: Vec<Action> = task.routes.get(route_idx).map(|r| r.actions.clone()).unwrap_or_default();
        let mut pos = 0usize;
        let task_id = task.task_id.clone();
        run_episode(world, task, Source::Sampled, self.params.step_budget, |ui: &UiState, s: &WorldState, _| {
            let mut on_route = route.get(pos).filter(|a| available(ui, a)).cloned();
            if on_route.is_none() && s.page == world.start_page && route.first().is_some_and(|a| available(ui, a)) {
                pos = 0;
                on_route = route.first().cloned();
            }
            let mut cands = candidates(world, ui, &money);
            if let Some(a) = &on_route {
                if !cands.contains(a) {
                    cands.push(a.clone());
                }
            }
            let chosen = match self.behavior {
                Behavior::ExpertRoute | Behavior::AlternativeRoute => on_route.clone().unwrap_or_else(|| Action::stop("")),
                Behavior::Noisy => match &on_route {
                    Some(a) if rng.gen::<f64>() >= self.params.epsilon => a.clone(),
                    _ => cands[rng.gen_range(0..cands.len())].clone(),
                },
                Behavior::Improving => {
                    let url = ui.url.as_deref().unwrap_or_default();
                    let skill = self.skill(&task_id);
                    let logits: Vec<f64> = cands
                        .iter()
                        .map(|a| if Some(a) == on_route.as_ref() { skill } else { self.noise(&task_id, url, a) })
                        .collect();
                    cands[cfg.choose(&logits, rng)].clone()
                }
            };
            if Some(&chosen) == on_route.as_ref() {
                pos += 1;
            }
            chosen
        })
    }
}
