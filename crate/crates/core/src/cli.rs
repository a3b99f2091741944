//! Command-line surface. Every command returns an exit code instead of
//! exiting so it can be driven from tests.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use crate::abstraction::{read_attempt_logs, write_attempt_logs, AbstractionError, AbstractorConfig, OracleKind, Oracles};
use crate::dsl::{print_label_function, ApiRegistry};
use crate::extrapolation::{IntentOracle, IntentRewriter, LlmIntent, LlmRewriter, MockIntent, RuleSet};
use crate::graph::{best_path, categorize_with, expand, export_graph, import_graph, init_linear, GraphFormat, ScoringMode};
use crate::llm::{ChatModel, LlmClient};
use crate::pipeline::{
    compute_ngpt, intent_preference_ratio, synthesis_metrics, Abstractor, ConfusionCounts, Judgment, Pipeline,
    PipelineConfig, PipelineError,
};
use crate::sim::{generate_fixture_suite, replay_route, Behavior, SamplingConfig, ScriptedPolicy, WorldSpec};
use crate::trajectory::{read_trajectories, write_trajectory_to, Source, TemplateTable, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_EMPTY: i32 = 2;
pub const EXIT_HOOK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "core-selftrain", version, about = "Label-function synthesis, strategy graphs and self-training")]
pub struct Cli {
    /// Seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Upper bound on worker threads; 0 = one per core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive label functions from a trajectory.
    Abstract(AbstractArgs),
    /// Categorize trajectories against a strategy graph.
    Categorize(CategorizeArgs),
    /// Add a successful trajectory's strategy to a graph.
    Expand(ExpandArgs),
    /// Run the self-training loop.
    Loop(LoopArgs),
    /// Write the fixture world or roll out trajectories in it.
    Simulate(SimulateArgs),
    /// NGPT, key-step, synthesis and preference metrics from logs.
    Metrics(MetricsArgs),
    /// Convert a graph to JSON or DOT.
    ExportGraph(ExportGraphArgs),
}

#[derive(Debug, Args)]
pub struct AbstractArgs {
    /// Trajectory JSONL file.
    pub trajectory: PathBuf,
    /// Which trajectory in the file (0-based).
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Goal text; defaults to the trajectory's own goal.
    #[arg(long)]
    pub goal: Option<String>,
    /// Oracle for both steps (overrides the config file).
    #[arg(long)]
    pub oracle: Option<OracleKind>,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CategorizeArgs {
    /// Graph in JSON form.
    pub graph: PathBuf,
    /// Trajectory JSONL files.
    #[arg(required = true)]
    pub trajectories: Vec<PathBuf>,
    #[arg(long)]
    pub strict_ordered: bool,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    /// Trajectory JSONL file; its first trajectory is abstracted.
    pub trajectory: PathBuf,
    /// Existing graph; without one a linear graph is created.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub oracle: Option<OracleKind>,
    /// Output path; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    #[arg(long)]
    pub iterations: Option<u32>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long)]
    pub finetune_hook: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Write the world spec here and stop.
    #[arg(long)]
    pub emit_world: Option<PathBuf>,
    /// Regex over task ids.
    #[arg(long)]
    pub task_filter: Option<String>,
    /// expert_route, alternative_route, noisy or improving.
    #[arg(long, default_value = "expert_route")]
    pub policy: Behavior,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// Output JSONL; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// CSV of `perf_delta,traj_delta` rows (header optional).
    #[arg(long)]
    pub ngpt: Option<PathBuf>,
    /// Synthesis attempt logs (JSONL).
    #[arg(long)]
    pub attempts: Option<PathBuf>,
    /// JSONL of `{"predicted":[..],"truth":[..],"universe":n}` records.
    #[arg(long)]
    pub keysteps: Option<PathBuf>,
    /// One judgment per line: intent1, intent2 or undecided.
    #[arg(long)]
    pub judgments: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportGraphArgs {
    pub graph: PathBuf,
    #[arg(long, default_value = "dot")]
    pub format: GraphFormat,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Settings read from the config file, with defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub world_spec: Option<PathBuf>,
    pub task_filter: Option<String>,
    pub sampling: SamplingConfig,
    pub eval_temperature: f64,
    pub keystep_oracle: OracleKind,
    pub synth_oracle: OracleKind,
    pub intent_oracle: OracleKind,
    pub rewriter: bool,
    pub model: String,
    pub max_attempts: u32,
    pub guidance: String,
    pub iterations: u32,
    pub output_dir: PathBuf,
    pub finetune_hook: Option<String>,
    pub strict_ordered_scoring: bool,
    pub seed_pseudo_expert_graphs: bool,
    pub policy: Behavior,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            world_spec: None,
            task_filter: None,
            sampling: SamplingConfig::default(),
            eval_temperature: 0.0,
            keystep_oracle: OracleKind::Mock,
            synth_oracle: OracleKind::Mock,
            intent_oracle: OracleKind::Mock,
            rewriter: false,
            model: "default".into(),
            max_attempts: 5,
            guidance: String::new(),
            iterations: 3,
            output_dir: PathBuf::from("runs"),
            finetune_hook: None,
            strict_ordered_scoring: false,
            seed_pseudo_expert_graphs: true,
            policy: Behavior::Improving,
            seed: 0,
            workers: 0,
        }
    }
}

fn parse_bit(key: &str, v: &str) -> anyhow::Result<bool> {
    match v {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => bail!("config key '{key}': expected 0/1, got '{v}'"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| anyhow!("config key '{key}': {e}"))
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment line. Relative paths
    /// are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> anyhow::Result<Self> {
        let mut c = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected key = value", n + 1))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "world_spec" => c.world_spec = Some(base.join(v)),
                "task_filter" => c.task_filter = Some(v.to_string()),
                "temperature" => c.sampling.temperature = parse_num(k, v)?,
                "top_p" => c.sampling.top_p = parse_num(k, v)?,
                "top_k" => c.sampling.top_k = parse_num(k, v)?,
                "samples_per_task" => c.sampling.samples_per_task = parse_num(k, v)?,
                "do_sample" => c.sampling.do_sample = parse_bit(k, v)?,
                "eval_temperature" => c.eval_temperature = parse_num(k, v)?,
                "keystep_oracle" => c.keystep_oracle = parse_num(k, v)?,
                "synth_oracle" => c.synth_oracle = parse_num(k, v)?,
                "intent_oracle" => c.intent_oracle = parse_num(k, v)?,
                "intent_rewriter" => c.rewriter = parse_bit(k, v)?,
                "model" => c.model = v.to_string(),
                "max_attempts" => c.max_attempts = parse_num(k, v)?,
                "guidance" => c.guidance = v.to_string(),
                "iterations" => c.iterations = parse_num(k, v)?,
                "output_dir" => c.output_dir = base.join(v),
                "finetune_hook" => c.finetune_hook = Some(v.to_string()).filter(|s| !s.is_empty()),
                "strict_ordered_scoring" => c.strict_ordered_scoring = parse_bit(k, v)?,
                "seed_pseudo_expert_graphs" => c.seed_pseudo_expert_graphs = parse_bit(k, v)?,
                "policy" => c.policy = parse_num(k, v)?,
                "seed" => c.seed = parse_num(k, v)?,
                "workers" => c.workers = parse_num(k, v)?,
                other => bail!("unknown config key '{other}'"),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.iterations < 1 {
            bail!("config key 'iterations' must be at least 1");
        }
        if self.max_attempts < 1 {
            bail!("config key 'max_attempts' must be at least 1");
        }
        self.sampling.validate().map_err(|e| anyhow!("sampling: {e}"))?;
        if let Some(p) = &self.world_spec {
            if !p.exists() {
                bail!("world spec {} does not exist", p.display());
            }
        }
        if let Some(f) = &self.task_filter {
            Regex::new(f).context("config key 'task_filter'")?;
        }
        Ok(())
    }

    /// The config file (if any) with global flags applied on top.
    pub fn resolve(cli: &Cli) -> anyhow::Result<Self> {
        let mut c = match &cli.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                RunConfig::parse(&text, p.parent().unwrap_or(Path::new(".")))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        if let Some(w) = cli.workers {
            c.workers = w;
        }
        Ok(c)
    }

    pub fn scoring(&self) -> ScoringMode {
        if self.strict_ordered_scoring {
            ScoringMode::StrictOrdered
        } else {
            ScoringMode::Unordered
        }
    }

    pub fn abstractor_config(&self) -> AbstractorConfig {
        AbstractorConfig {
            max_attempts: self.max_attempts,
            keystep_oracle: self.keystep_oracle,
            synth_oracle: self.synth_oracle,
            guidance: self.guidance.clone(),
            model: self.model.clone(),
        }
    }

    fn needs_llm(&self) -> bool {
        [self.keystep_oracle, self.synth_oracle, self.intent_oracle].contains(&OracleKind::Llm) || self.rewriter
    }

    fn chat(&self) -> anyhow::Result<Option<Arc<dyn ChatModel>>> {
        if !self.needs_llm() {
            return Ok(None);
        }
        let client = LlmClient::from_env(self.workers.max(1))?;
        Ok(Some(Arc::new(client)))
    }

    pub fn abstractor(&self) -> anyhow::Result<Abstractor> {
        let registry = ApiRegistry::builtin();
        let cfg = self.abstractor_config();
        let oracles = Oracles::from_config(&cfg, &registry, self.chat()?)?;
        Ok(Abstractor { registry, table: TemplateTable::default(), oracles, cfg })
    }

    /// The world (fixture suite unless a spec file is configured), filtered
    /// by `task_filter`.
    pub fn world(&self, override_path: Option<&Path>) -> anyhow::Result<WorldSpec> {
        let mut w = match override_path.or(self.world_spec.as_deref()) {
            Some(p) => WorldSpec::load(p).with_context(|| format!("loading world {}", p.display()))?,
            None => generate_fixture_suite(self.seed),
        };
        if let Some(f) = &self.task_filter {
            let re = Regex::new(f)?;
            w.tasks.retain(|t| re.is_match(&t.task_id));
        }
        Ok(w)
    }
}

/// An error that maps to a specific exit code.
#[derive(Debug)]
struct Exit(i32, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn exit_code(e: &anyhow::Error) -> i32 {
    if let Some(Exit(code, _)) = e.downcast_ref::<Exit>() {
        return *code;
    }
    match e.downcast_ref::<PipelineError>() {
        Some(PipelineError::HookFailed { .. }) => EXIT_HOOK,
        Some(PipelineError::EmptyPool) => EXIT_EMPTY,
        _ => EXIT_INPUT,
    }
}

fn write_out(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn load_trajectories(path: &Path) -> anyhow::Result<Vec<Trajectory>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trajectories(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn load_graph(path: &Path, registry: &ApiRegistry) -> anyhow::Result<crate::graph::StrategyGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    import_graph(&text, registry).with_context(|| format!("parsing {}", path.display()))
}

fn with_oracle(mut cfg: RunConfig, oracle: Option<OracleKind>) -> RunConfig {
    if let Some(o) = oracle {
        cfg.keystep_oracle = o;
        cfg.synth_oracle = o;
    }
    cfg
}

fn abstraction_failure(e: AbstractionError) -> anyhow::Error {
    match e {
        AbstractionError::AllStepsFailed(_) | AbstractionError::EmptySelection => {
            anyhow::Error::new(Exit(EXIT_EMPTY, e.to_string()))
        }
        other => other.into(),
    }
}

pub fn cmd_abstract(cfg: &RunConfig, args: &AbstractArgs) -> anyhow::Result<()> {
    let cfg = with_oracle(cfg.clone(), args.oracle);
    let trajs = load_trajectories(&args.trajectory)?;
    let traj = trajs.get(args.index).ok_or_else(|| anyhow!("{} has no trajectory #{}", args.trajectory.display(), args.index))?;
    let ab = cfg.abstractor()?;
    let goal = args.goal.clone().unwrap_or_else(|| traj.goal.clone());
    let result = crate::abstraction::abstract_trajectory(traj, &goal, &ab.registry, &ab.table, &ab.oracles, &ab.cfg);
    fs::create_dir_all(&args.out)?;
    let logs = match &result {
        Ok(a) => a.logs.clone(),
        Err(AbstractionError::AllStepsFailed(logs)) => logs.clone(),
        Err(_) => Vec::new(),
    };
    let mut f = fs::File::create(args.out.join("attempts.jsonl"))?;
    write_attempt_logs(&mut f, &logs)?;
    let a = result.map_err(abstraction_failure)?;
    for (k, lf) in a.label_functions.iter().enumerate() {
        let p = args.out.join(format!("{}.{}.lf", traj.task_id, k + 1));
        fs::write(&p, print_label_function(lf))?;
        println!("{}", p.display());
    }
    Ok(())
}

pub fn cmd_categorize(cfg: &RunConfig, args: &CategorizeArgs) -> anyhow::Result<()> {
    let registry = ApiRegistry::builtin();
    let g = load_graph(&args.graph, &registry)?;
    let mode = if args.strict_ordered { ScoringMode::StrictOrdered } else { cfg.scoring() };
    let mut out = io::stdout().lock();
    writeln!(out, "task_id\tfile\tcategory\tbest_score\tbest_path_len")?;
    for file in &args.trajectories {
        for t in load_trajectories(file)? {
            let c = categorize_with(&g, &t, &registry, mode)?;
            let (score, len) = best_path(&g, &t, &registry, mode)?.map(|(p, s)| (s, p.len())).unwrap_or((0, 0));
            writeln!(out, "{}\t{}\t{c}\t{score}\t{len}", t.task_id, file.display())?;
        }
    }
    Ok(())
}

pub fn cmd_expand(cfg: &RunConfig, args: &ExpandArgs) -> anyhow::Result<()> {
    let cfg = with_oracle(cfg.clone(), args.oracle);
    let ab = cfg.abstractor()?;
    let trajs = load_trajectories(&args.trajectory)?;
    let traj = trajs.first().ok_or_else(|| anyhow!("{} is empty", args.trajectory.display()))?;
    let a = ab.run(traj).map_err(abstraction_failure)?;
    let g = match &args.graph {
        Some(p) => {
            let g = load_graph(p, &ab.registry)?;
            expand(&g, &a.label_functions, traj.env_feedback == Some(true))?
        }
        None => init_linear(&a.label_functions, &traj.task_id, 0)?,
    };
    write_out(args.out.as_deref(), &export_graph(&g, GraphFormat::Json))
}

pub fn cmd_loop(cfg: &RunConfig, args: &LoopArgs) -> anyhow::Result<()> {
    let mut cfg = cfg.clone();
    if let Some(n) = args.iterations {
        cfg.iterations = n;
    }
    if let Some(d) = &args.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(h) = &args.finetune_hook {
        cfg.finetune_hook = Some(h.clone());
    }
    cfg.validate()?;
    let world = cfg.world(args.world.as_deref())?;
    let chat = cfg.chat()?;
    let abstractor = cfg.abstractor()?;
    let intent: Box<dyn IntentOracle> = match (cfg.intent_oracle, &chat) {
        (OracleKind::Llm, Some(c)) => {
            Box::new(LlmIntent { chat: c.clone(), model: cfg.model.clone(), table: TemplateTable::default() })
        }
        _ => Box::new(MockIntent::default()),
    };
    let rewriter: Option<Box<dyn IntentRewriter>> = match (&chat, cfg.rewriter) {
        (Some(c), true) => Some(Box::new(LlmRewriter { chat: c.clone(), model: cfg.model.clone(), examples: String::new() })),
        _ => None,
    };
    fs::create_dir_all(&cfg.output_dir)?;
    let pcfg = PipelineConfig {
        seed: cfg.seed,
        sampling: cfg.sampling.clone(),
        eval_temperature: cfg.eval_temperature,
        scoring: cfg.scoring(),
        seed_pseudo_expert_graphs: cfg.seed_pseudo_expert_graphs,
        finetune_hook: cfg.finetune_hook.clone(),
        workers: cfg.workers,
        output_dir: Some(cfg.output_dir.clone()),
    };
    let pipeline = Pipeline::new(world, abstractor, intent, rewriter, RuleSet::default(), pcfg)?;
    let mut policy = ScriptedPolicy::new(cfg.policy, cfg.seed);
    let state = pipeline.run(cfg.iterations, &mut policy)?;
    for m in &state.metrics {
        log::info!(
            "iteration {}: overall {:.3}, generalization {:.3}, avg paths {:.3}",
            m.iteration,
            m.overall_score,
            m.generalization_score,
            m.avg_path_count
        );
    }
    println!("{}", cfg.output_dir.join("metrics.csv").display());
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig, args: &SimulateArgs) -> anyhow::Result<()> {
    let mut cfg = cfg.clone();
    if args.task_filter.is_some() {
        cfg.task_filter = args.task_filter.clone();
    }
    let world = cfg.world(args.world.as_deref())?;
    if let Some(p) = &args.emit_world {
        fs::write(p, world.to_json())?;
        return Ok(());
    }
    let policy = ScriptedPolicy::new(args.policy, cfg.seed);
    let mut buf = Vec::new();
    for task in &world.tasks {
        for k in 0..args.samples {
            let t = match args.policy {
                Behavior::ExpertRoute => replay_route(&world, task, &task.routes[0], Source::Expert).trajectory,
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(crate::sim::stable_hash(&[
                        "simulate",
                        &cfg.seed.to_string(),
                        &task.task_id,
                        &k.to_string(),
                    ]));
                    policy.rollout(&world, task, &cfg.sampling, &mut rng).trajectory
                }
            };
            write_trajectory_to(&mut buf, &t)?;
        }
    }
    write_out(args.out.as_deref(), std::str::from_utf8(&buf)?)
}

#[derive(serde::Deserialize)]
struct KeyStepRecord {
    predicted: std::collections::BTreeSet<u32>,
    truth: std::collections::BTreeSet<u32>,
    universe: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

/// Prints `metric,value` CSV; metrics without input are left empty.
pub fn cmd_metrics(args: &MetricsArgs) -> anyhow::Result<()> {
    let mut rows: Vec<(String, String)> = Vec::new();
    if let Some(p) = &args.ngpt {
        for (i, line) in read_lines(p)?.iter().enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let [perf, traj] = cells[..] else { bail!("{}: line {}: expected perf_delta,traj_delta", p.display(), i + 1) };
            let (Ok(perf), Ok(traj)) = (perf.parse::<f64>(), traj.parse::<i64>()) else {
                if i == 0 {
                    continue; // header
                }
                bail!("{}: line {}: not numeric", p.display(), i + 1);
            };
            rows.push((format!("ngpt[{perf},{traj}]"), format!("{:.4}", compute_ngpt(perf, traj)?)));
        }
    }
    let mut counts = ConfusionCounts::default();
    if let Some(p) = &args.keysteps {
        for line in read_lines(p)? {
            let r: KeyStepRecord = serde_json::from_str(&line).with_context(|| format!("parsing {}", p.display()))?;
            counts.add(ConfusionCounts::from_sets(&r.predicted, &r.truth, r.universe));
        }
    }
    let ks = (counts.total() > 0).then(|| counts.metrics());
    rows.push(("keystep_accuracy".into(), fmt_opt(ks.map(|m| m.accuracy))));
    rows.push(("keystep_precision".into(), fmt_opt(ks.map(|m| m.precision))));
    rows.push(("keystep_recall".into(), fmt_opt(ks.map(|m| m.recall))));
    rows.push(("keystep_f1".into(), fmt_opt(ks.map(|m| m.f1))));
    let logs = match &args.attempts {
        Some(p) => read_attempt_logs(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => Vec::new(),
    };
    let sm = synthesis_metrics(&logs).ok();
    rows.push(("synthesis_osr".into(), fmt_opt(sm.map(|m| m.osr))));
    rows.push(("synthesis_ftsr".into(), fmt_opt(sm.map(|m| m.ftsr))));
    rows.push(("synthesis_esp".into(), fmt_opt(sm.and_then(|m| m.esp))));
    let judgments = match &args.judgments {
        Some(p) => read_lines(p)?.iter().map(|l| l.parse::<Judgment>().map_err(|e| anyhow!(e))).collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    rows.push(("intent_preference_ratio".into(), fmt_opt(intent_preference_ratio(&judgments).ok())));
    let mut out = io::stdout().lock();
    writeln!(out, "metric,value")?;
    for (k, v) in rows {
        writeln!(out, "{k},{v}")?;
    }
    Ok(())
}

pub fn cmd_export_graph(args: &ExportGraphArgs) -> anyhow::Result<()> {
    let g = load_graph(&args.graph, &ApiRegistry::builtin())?;
    write_out(args.out.as_deref(), &export_graph(&g, args.format))
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = RunConfig::resolve(&cli).and_then(|cfg| {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global().ok();
        match &cli.command {
            Command::Abstract(a) => cmd_abstract(&cfg, a),
            Command::Categorize(a) => cmd_categorize(&cfg, a),
            Command::Expand(a) => cmd_expand(&cfg, a),
            Command::Loop(a) => cmd_loop(&cfg, a),
            Command::Simulate(a) => cmd_simulate(&cfg, a),
            Command::Metrics(a) => cmd_metrics(a),
            Command::ExportGraph(a) => cmd_export_graph(a),
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
