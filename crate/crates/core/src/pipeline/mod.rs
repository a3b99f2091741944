//! The self-training loop: sample, categorize and expand strategy graphs,
//! grow the task pool, relabel failures, aggregate training data, hand it to
//! an external fine-tune hook and update the policy.

mod metrics;

pub use metrics::{
    compute_ngpt, intent_preference_ratio, keystep_metrics, synthesis_metrics, ConfusionCounts, Judgment,
    KeyStepMetrics, MetricsReport, SynthesisMetrics, CSV_HEADER,
};
pub use crate::sim::SamplingConfig;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{
    abstract_trajectory, write_attempt_logs, Abstraction, AbstractionError, AbstractorConfig, Oracles,
    SynthesisAttemptLog,
};
use crate::dsl::ApiRegistry;
use crate::extrapolation::{
    augment_tasks, harvest_failed, DropRecord, IntentOracle, IntentRewriter, MockIntent, RuleSet, TaskOrigin, TaskPool,
};
use crate::graph::{categorize_with, expand, export_graph, init_linear, path_count, Category, GraphFormat, ScoringMode, StrategyGraph};
use crate::sim::{expert_demos, stable_hash, Rollout, ScriptedPolicy, SimTask, Split, WorldSpec};
use crate::trajectory::{describe_trajectory, write_trajectory_to, TemplateTable, Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("the task pool is empty")]
    EmptyPool,
    #[error("trajectory delta must be positive")]
    ZeroTrajDelta,
    #[error("no synthesis logs")]
    EmptyLogs,
    #[error("no judgments")]
    EmptyJudgments,
    #[error("fine-tune hook `{command}` failed with status {status}")]
    HookFailed { command: String, status: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Expert,
    FullyPassed,
    FailureRelabel,
    PseudoExpert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub goal: String,
    pub provenance: Provenance,
    pub trajectory: Trajectory,
}

impl TrainingExample {
    pub fn new(trajectory: Trajectory, provenance: Provenance) -> Self {
        TrainingExample { goal: trajectory.goal.clone(), provenance, trajectory }
    }
}

/// Writes examples as JSON lines ordered by provenance, then task id, then
/// insertion order.
pub fn write_training_examples<W: Write>(w: &mut W, examples: &[TrainingExample]) -> Result<(), PipelineError> {
    let mut order: Vec<&TrainingExample> = examples.iter().collect();
    order.sort_by(|a, b| a.provenance.cmp(&b.provenance).then_with(|| a.trajectory.task_id.cmp(&b.trajectory.task_id)));
    for e in order {
        serde_json::to_writer(&mut *w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn export_training_file(examples: &[TrainingExample], path: &Path) -> Result<(), PipelineError> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    write_training_examples(&mut f, examples)?;
    f.flush()?;
    Ok(())
}

pub fn read_training_file(path: &Path) -> Result<Vec<TrainingExample>, PipelineError> {
    let f = std::io::BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// The agent being trained.
pub trait PolicyClient: Send + Sync {
    fn rollout(&self, world: &WorldSpec, task: &SimTask, cfg: &SamplingConfig, rng: &mut ChaCha8Rng) -> Rollout;
    /// Consumes the aggregated training data (one fine-tuning round).
    fn update(&mut self, data: &[TrainingExample]);
}

impl PolicyClient for ScriptedPolicy {
    fn rollout(&self, world: &WorldSpec, task: &SimTask, cfg: &SamplingConfig, rng: &mut ChaCha8Rng) -> Rollout {
        ScriptedPolicy::rollout(self, world, task, cfg, rng)
    }

    fn update(&mut self, data: &[TrainingExample]) {
        let tasks: BTreeSet<String> = data
            .iter()
            .filter(|e| e.provenance != Provenance::FailureRelabel)
            .map(|e| e.trajectory.task_id.clone())
            .collect();
        ScriptedPolicy::update(self, tasks);
    }
}

/// Everything needed to turn a trajectory into label functions.
pub struct Abstractor {
    pub registry: ApiRegistry,
    pub table: TemplateTable,
    pub oracles: Oracles,
    pub cfg: AbstractorConfig,
}

impl Abstractor {
    pub fn mock() -> Self {
        Abstractor {
            registry: ApiRegistry::builtin(),
            table: TemplateTable::default(),
            oracles: Oracles::mock(),
            cfg: AbstractorConfig::default(),
        }
    }

    pub fn run(&self, traj: &Trajectory) -> Result<Abstraction, AbstractionError> {
        abstract_trajectory(traj, &traj.goal, &self.registry, &self.table, &self.oracles, &self.cfg)
    }
}

/// What one abstraction selected, for key-step scoring.
#[derive(Debug, Clone)]
pub struct AbstractionRecord {
    pub task_id: String,
    pub step_texts: Vec<String>,
    pub selected: BTreeSet<u32>,
    pub logs: Vec<SynthesisAttemptLog>,
}

impl AbstractionRecord {
    fn new(traj: &Trajectory, table: &TemplateTable, a: &Abstraction) -> Self {
        AbstractionRecord {
            task_id: traj.task_id.clone(),
            step_texts: describe_trajectory(traj, table).map(|d| d.into_iter().map(|d| d.text).collect()).unwrap_or_default(),
            selected: a.selection.selected.iter().map(|d| d.step_t).collect(),
            logs: a.logs.clone(),
        }
    }

    fn failed(traj: &Trajectory, logs: Vec<SynthesisAttemptLog>) -> Self {
        AbstractionRecord { task_id: traj.task_id.clone(), step_texts: Vec::new(), selected: BTreeSet::new(), logs }
    }

    /// Per-step confusion counts against a ground-truth set of descriptions.
    pub fn confusion(&self, truth: &BTreeSet<String>) -> ConfusionCounts {
        let truth_steps: BTreeSet<u32> =
            self.step_texts.iter().enumerate().filter(|(_, t)| truth.contains(*t)).map(|(i, _)| i as u32 + 1).collect();
        ConfusionCounts::from_sets(&self.selected, &truth_steps, self.step_texts.len())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SgeOutcome {
    pub graphs: BTreeMap<String, StrategyGraph>,
    pub phase1: BTreeMap<Category, usize>,
    pub fully_passed: Vec<Trajectory>,
    pub partially_passed: Vec<Trajectory>,
    pub failed: Vec<Trajectory>,
    /// Trajectories that could not be categorized, with the reason.
    pub errored: Vec<(Trajectory, String)>,
    /// Expansion attempts that reached `expand`.
    pub expansions: usize,
    pub abstractions: Vec<AbstractionRecord>,
}

fn categorize_all(
    trajs: &[Trajectory],
    graphs: &BTreeMap<String, StrategyGraph>,
    registry: &ApiRegistry,
    mode: ScoringMode,
) -> Vec<Result<Category, String>> {
    trajs
        .par_iter()
        .map(|t| {
            let g = graphs.get(&t.task_id).ok_or_else(|| format!("no strategy graph for task '{}'", t.task_id))?;
            categorize_with(g, t, registry, mode).map_err(|e| e.to_string())
        })
        .collect()
}

/// Categorize → expand on partially-passed successes → re-categorize.
pub fn run_sge_iteration(
    trajs: &[Trajectory],
    graphs: &BTreeMap<String, StrategyGraph>,
    abstractor: &Abstractor,
    mode: ScoringMode,
) -> SgeOutcome {
    let mut out = SgeOutcome { graphs: graphs.clone(), ..Default::default() };
    let first = categorize_all(trajs, graphs, &abstractor.registry, mode);
    for c in first.iter().flatten() {
        *out.phase1.entry(*c).or_default() += 1;
    }

    for (t, c) in trajs.iter().zip(&first) {
        if !matches!(c, Ok(Category::PartiallyPassed)) || t.env_feedback != Some(true) {
            continue;
        }
        match abstractor.run(t) {
            Ok(a) => {
                out.abstractions.push(AbstractionRecord::new(t, &abstractor.table, &a));
                let g = &out.graphs[&t.task_id];
                match expand(g, &a.label_functions, true) {
                    Ok(g2) => {
                        out.expansions += 1;
                        out.graphs.insert(t.task_id.clone(), g2);
                    }
                    Err(e) => log::warn!("{}: expansion failed: {e}", t.task_id),
                }
            }
            Err(AbstractionError::AllStepsFailed(logs)) => {
                log::info!("{}: no label functions from a successful trajectory", t.task_id);
                out.abstractions.push(AbstractionRecord::failed(t, logs));
            }
            Err(e) => log::warn!("{}: abstraction failed: {e}", t.task_id),
        }
    }

    let second = categorize_all(trajs, &out.graphs, &abstractor.registry, mode);
    for (t, c) in trajs.iter().zip(second) {
        match c {
            Ok(Category::FullyPassed) => out.fully_passed.push(t.clone()),
            Ok(Category::PartiallyPassed) => out.partially_passed.push(t.clone()),
            Ok(Category::Failed) => out.failed.push(t.clone()),
            Err(e) => {
                log::warn!("{}: {e}", t.task_id);
                out.errored.push((t.clone(), e));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    pub sampling: SamplingConfig,
    /// Temperature of the whole-benchmark evaluation rollouts; 0 is greedy.
    pub eval_temperature: f64,
    pub scoring: ScoringMode,
    /// Abstract pseudo-expert demonstrations into graphs for their new tasks.
    pub seed_pseudo_expert_graphs: bool,
    /// Shell command run after each aggregation; `{training_file}` and
    /// `{iteration}` are substituted.
    pub finetune_hook: Option<String>,
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            sampling: SamplingConfig::default(),
            eval_temperature: 0.0,
            scoring: ScoringMode::Unordered,
            seed_pseudo_expert_graphs: true,
            finetune_hook: None,
            workers: 0,
            output_dir: None,
        }
    }
}

/// Loop state carried between iterations.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub iteration: u32,
    pub task_pool: TaskPool,
    pub graphs: BTreeMap<String, StrategyGraph>,
    pub training_data: Vec<TrainingExample>,
    pub metrics: Vec<MetricsReport>,
    /// Tasks seeded from expert demonstrations; the path-count average runs
    /// over this fixed set.
    pub seed_tasks: BTreeSet<String>,
    pub baseline_overall: f64,
    /// Cumulative sampled trajectories.
    pub traj_count: u64,
    /// Evaluation rollouts of the current policy over the whole benchmark.
    pub last_eval: Vec<Trajectory>,
    pending_keysteps: ConfusionCounts,
    pending_logs: Vec<SynthesisAttemptLog>,
}

impl IterationState {
    pub fn avg_path_count(&self) -> f64 {
        let counts: Vec<u64> =
            self.seed_tasks.iter().filter_map(|t| self.graphs.get(t)).filter_map(|g| path_count(g).ok()).collect();
        if counts.is_empty() {
            0.0
        } else {
            counts.iter().sum::<u64>() as f64 / counts.len() as f64
        }
    }
}

pub struct Pipeline {
    pub world: WorldSpec,
    pub abstractor: Abstractor,
    pub intent: Box<dyn IntentOracle>,
    pub rewriter: Option<Box<dyn IntentRewriter>>,
    pub rules: RuleSet,
    pub cfg: PipelineConfig,
    threads: rayon::ThreadPool,
}

fn rollout_rng(stream: &str, seed: u64, iteration: u32, task_id: &str, sample: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(&[stream, &seed.to_string(), &iteration.to_string(), task_id, &sample.to_string()]))
}

/// `samples` rollouts per task, in task order; each rollout has its own RNG
/// stream so results do not depend on scheduling.
pub fn sample_trajectories(
    policy: &dyn PolicyClient,
    tasks: &[&SimTask],
    world: &WorldSpec,
    cfg: &SamplingConfig,
    seed: u64,
    iteration: u32,
) -> Vec<Trajectory> {
    let jobs: Vec<(&SimTask, usize)> =
        tasks.iter().flat_map(|t| (0..cfg.samples_per_task).map(move |k| (*t, k))).collect();
    jobs.par_iter()
        .map(|(task, k)| {
            let mut rng = rollout_rng("sample", seed, iteration, &task.task_id, *k);
            policy.rollout(world, task, cfg, &mut rng).trajectory
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    for i in items {
        serde_json::to_writer(&mut f, i)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

impl Pipeline {
    pub fn new(
        world: WorldSpec,
        abstractor: Abstractor,
        intent: Box<dyn IntentOracle>,
        rewriter: Option<Box<dyn IntentRewriter>>,
        rules: RuleSet,
        cfg: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        cfg.sampling.validate().map_err(PipelineError::Config)?;
        if cfg.finetune_hook.is_some() && cfg.output_dir.is_none() {
            return Err(PipelineError::Config("a fine-tune hook needs an output directory".into()));
        }
        let threads = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Pipeline { world, abstractor, intent, rewriter, rules, cfg, threads })
    }

    /// Mock oracles throughout.
    pub fn mock(world: WorldSpec, cfg: PipelineConfig) -> Result<Self, PipelineError> {
        Pipeline::new(world, Abstractor::mock(), Box::new(MockIntent::default()), None, RuleSet::default(), cfg)
    }

    fn task(&self, id: &str) -> Option<&SimTask> {
        self.world.tasks.iter().find(|t| t.task_id == id)
    }

    fn iter_dir(&self, iteration: u32) -> Result<Option<PathBuf>, PipelineError> {
        let Some(root) = &self.cfg.output_dir else { return Ok(None) };
        let dir = root.join(format!("iter-{iteration}"));
        fs::create_dir_all(dir.join("graphs"))?;
        Ok(Some(dir))
    }

    /// Greedy (or `eval_temperature`) rollouts on every benchmark task.
    pub fn evaluate(&self, policy: &dyn PolicyClient) -> Vec<Trajectory> {
        let mut cfg = self.cfg.sampling.clone();
        cfg.temperature = self.cfg.eval_temperature;
        cfg.do_sample = self.cfg.eval_temperature > 0.0;
        cfg.samples_per_task = 1;
        let tasks: Vec<&SimTask> = self.world.tasks.iter().collect();
        self.threads.install(|| {
            tasks
                .par_iter()
                .map(|t| {
                    let mut rng = rollout_rng("eval", self.cfg.seed, 0, &t.task_id, 0);
                    policy.rollout(&self.world, t, &cfg, &mut rng).trajectory
                })
                .collect()
        })
    }

    /// (overall, generalization) success rates of an evaluation run.
    pub fn scores(&self, eval: &[Trajectory]) -> (f64, f64) {
        let rate = |split: Option<Split>| {
            let xs: Vec<bool> = eval
                .iter()
                .filter(|t| split.map_or(true, |s| self.task(&t.task_id).is_some_and(|k| k.split == s)))
                .map(|t| t.env_feedback == Some(true))
                .collect();
            if xs.is_empty() {
                0.0
            } else {
                xs.iter().filter(|&&b| b).count() as f64 / xs.len() as f64
            }
        };
        (rate(None), rate(Some(Split::Test)))
    }

    fn note_abstraction(&self, state: &mut IterationState, rec: &AbstractionRecord) {
        if let Some(task) = self.task(&rec.task_id) {
            if !rec.step_texts.is_empty() {
                state.pending_keysteps.add(rec.confusion(&task.ground_truth_key_steps));
            }
        }
        state.pending_logs.extend(rec.logs.iter().cloned());
    }

    /// Abstracts `demos` into fresh linear graphs (tasks that already have a
    /// graph are left alone).
    fn seed_graphs(&self, state: &mut IterationState, demos: &[Trajectory], iteration: u32) -> Vec<AbstractionRecord> {
        let results: Vec<_> = self.threads.install(|| demos.par_iter().map(|d| self.abstractor.run(d)).collect());
        let mut records = Vec::new();
        for (d, r) in demos.iter().zip(results) {
            match r {
                Ok(a) => {
                    records.push(AbstractionRecord::new(d, &self.abstractor.table, &a));
                    if !state.graphs.contains_key(&d.task_id) {
                        match init_linear(&a.label_functions, &d.task_id, iteration) {
                            Ok(g) => {
                                state.graphs.insert(d.task_id.clone(), g);
                            }
                            Err(e) => log::warn!("{}: {e}", d.task_id),
                        }
                    }
                }
                Err(AbstractionError::AllStepsFailed(logs)) => {
                    log::warn!("{}: demonstration yielded no label functions", d.task_id);
                    records.push(AbstractionRecord::failed(d, logs));
                }
                Err(e) => log::warn!("{}: {e}", d.task_id),
            }
        }
        records
    }

    fn persist(
        &self,
        dir: &Path,
        state: &IterationState,
        attempts: &[SynthesisAttemptLog],
    ) -> Result<PathBuf, PipelineError> {
        for (id, g) in &state.graphs {
            fs::write(dir.join("graphs").join(format!("{id}.graph.json")), export_graph(g, GraphFormat::Json))?;
        }
        let training = dir.join("training.jsonl");
        export_training_file(&state.training_data, &training)?;
        let mut f = BufWriter::new(fs::File::create(dir.join("attempts.jsonl"))?);
        write_attempt_logs(&mut f, attempts)?;
        f.flush()?;
        fs::write(dir.join("pool.json"), serde_json::to_string_pretty(&state.task_pool)? + "\n")?;
        Ok(training)
    }

    fn run_hook(&self, training: &Path, iteration: u32) -> Result<(), PipelineError> {
        let Some(template) = &self.cfg.finetune_hook else { return Ok(()) };
        let command = template
            .replace("{training_file}", &training.display().to_string())
            .replace("{iteration}", &iteration.to_string());
        log::info!("running fine-tune hook: {command}");
        let status = std::process::Command::new("sh").arg("-c").arg(&command).status()?;
        if !status.success() {
            return Err(PipelineError::HookFailed { command, status: status.to_string() });
        }
        Ok(())
    }

    /// Iteration 0: pool the expert goals, build their graphs, fine-tune the
    /// base policy on the demonstrations and measure the baseline.
    pub fn initialize(&self, policy: &mut dyn PolicyClient) -> Result<IterationState, PipelineError> {
        let demos = expert_demos(&self.world);
        let mut state = IterationState {
            iteration: 0,
            task_pool: TaskPool::new(0),
            graphs: BTreeMap::new(),
            training_data: Vec::new(),
            metrics: Vec::new(),
            seed_tasks: BTreeSet::new(),
            baseline_overall: 0.0,
            traj_count: 0,
            last_eval: Vec::new(),
            pending_keysteps: ConfusionCounts::default(),
            pending_logs: Vec::new(),
        };
        for d in &demos {
            state.task_pool.insert(d.task_id.clone(), d.goal.clone(), TaskOrigin::Seed);
        }
        let records = self.seed_graphs(&mut state, &demos, 0);
        for r in &records {
            self.note_abstraction(&mut state, r);
        }
        state.seed_tasks = state.graphs.keys().cloned().collect();
        state.training_data = demos.iter().cloned().map(|d| TrainingExample::new(d, crate::pipeline::Provenance::Expert)).collect();
        if state.task_pool.is_empty() {
            return Err(PipelineError::EmptyPool);
        }
        if let Some(dir) = self.iter_dir(0)? {
            let attempts: Vec<_> = records.iter().flat_map(|r| r.logs.iter().cloned()).collect();
            let training = self.persist(&dir, &state, &attempts)?;
            self.run_hook(&training, 0)?;
        }
        policy.update(&state.training_data);
        state.last_eval = self.evaluate(policy);
        state.baseline_overall = self.scores(&state.last_eval).0;
        Ok(state)
    }

    /// One round of sampling, graph expansion, extrapolation, aggregation,
    /// fine-tuning and evaluation.
    pub fn run_iteration(
        &self,
        mut state: IterationState,
        policy: &mut dyn PolicyClient,
    ) -> Result<IterationState, PipelineError> {
        if state.task_pool.is_empty() {
            return Err(PipelineError::EmptyPool);
        }
        let i = state.iteration + 1;
        let dir = self.iter_dir(i)?;

        // 1. sampling on pooled tasks that have a graph
        let tasks: Vec<&SimTask> = state
            .task_pool
            .tasks()
            .iter()
            .filter(|t| state.graphs.contains_key(&t.task_id))
            .filter_map(|t| self.task(&t.task_id))
            .collect();
        let sampled = self
            .threads
            .install(|| sample_trajectories(&*policy, &tasks, &self.world, &self.cfg.sampling, self.cfg.seed, i));
        state.traj_count += sampled.len() as u64;

        // 2. strategy graph expansion
        let sge = self.threads.install(|| run_sge_iteration(&sampled, &state.graphs, &self.abstractor, self.cfg.scoring));
        log::info!(
            "iteration {i}: {} sampled, {} fully passed, {} partially passed, {} failed, {} expansions",
            sampled.len(),
            sge.fully_passed.len(),
            sge.partially_passed.len(),
            sge.failed.len(),
            sge.expansions
        );
        let mut attempts: Vec<SynthesisAttemptLog> = Vec::new();
        for r in &sge.abstractions {
            self.note_abstraction(&mut state, r);
            attempts.extend(r.logs.iter().cloned());
        }
        state.graphs = sge.graphs.clone();

        // 3. extrapolation from the current policy's benchmark run
        let aug = augment_tasks(&state.task_pool, &state.last_eval).map_err(|e| PipelineError::Config(e.to_string()))?;
        state.task_pool = aug.pool;
        if self.cfg.seed_pseudo_expert_graphs {
            for r in self.seed_graphs(&mut state, &aug.pseudo_experts, i) {
                self.note_abstraction(&mut state, &r);
                attempts.extend(r.logs);
            }
        }
        let harvest = harvest_failed(
            &sge.failed,
            self.intent.as_ref(),
            &self.rules,
            self.rewriter.as_deref(),
        );

        // 4. aggregation, hook, update
        state.training_data.extend(sge.fully_passed.iter().cloned().map(|t| TrainingExample::new(t, Provenance::FullyPassed)));
        state.training_data.extend(
            harvest.pairs.iter().map(|(t, _)| TrainingExample::new(t.clone(), Provenance::FailureRelabel)),
        );
        state
            .training_data
            .extend(aug.pseudo_experts.iter().cloned().map(|t| TrainingExample::new(t, Provenance::PseudoExpert)));
        state.iteration = i;

        if let Some(dir) = &dir {
            let mut f = BufWriter::new(fs::File::create(dir.join("trajectories.jsonl"))?);
            for t in &sampled {
                write_trajectory_to(&mut f, t)?;
            }
            f.flush()?;
            write_jsonl::<DropRecord>(&dir.join("drops.jsonl"), &harvest.drops)?;
            let training = self.persist(dir, &state, &attempts)?;
            self.run_hook(&training, i)?;
        }
        policy.update(&state.training_data);

        // metrics for the updated policy
        state.last_eval = self.evaluate(&*policy);
        let (overall, generalization) = self.scores(&state.last_eval);
        let ngpt = compute_ngpt((overall - state.baseline_overall) * 100.0, state.traj_count as i64).ok();
        let keystep = (state.pending_keysteps.total() > 0).then(|| state.pending_keysteps.metrics());
        let synthesis = synthesis_metrics(&state.pending_logs).ok();
        state.pending_keysteps = ConfusionCounts::default();
        state.pending_logs.clear();
        state.metrics.push(MetricsReport {
            iteration: i,
            overall_score: overall,
            generalization_score: generalization,
            avg_path_count: state.avg_path_count(),
            traj_count: state.traj_count,
            ngpt,
            keystep,
            synthesis,
            intent_preference_ratio: None,
            pool_size: state.task_pool.len(),
            training_size: state.training_data.len(),
        });
        if let Some(root) = &self.cfg.output_dir {
            let mut csv = String::from(CSV_HEADER);
            csv.push('\n');
            for m in &state.metrics {
                csv.push_str(&m.csv_row());
                csv.push('\n');
            }
            fs::write(root.join("metrics.csv"), csv)?;
        }
        Ok(state)
    }

    /// `initialize` followed by `n` iterations.
    pub fn run(&self, n: u32, policy: &mut dyn PolicyClient) -> Result<IterationState, PipelineError> {
        let mut state = self.initialize(policy)?;
        for _ in 0..n {
            state = self.run_iteration(state, policy)?;
        }
        Ok(state)
    }
}
