//! The experiment loop, sweeps over strategies and seeds, and reports.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{actor, Agent, LabeledBatch};
use crate::checkpoint::{rng_state, Checkpoint};
use crate::config::ExperimentConfig;
use crate::envs::{CoverageGrid, CoverageTracker, Task};
use crate::error::{Error, Result};
use crate::labeler::UcbLabeler;
use crate::metrics::{evaluate, mean_stderr, read_metrics, MetricRow, MetricsWriter};
use crate::mdp::{sample_mixed_batch, Environment, ReplayBuffer, Transition};
use crate::nn::{AdamConfig, Matrix, Mlp, Trainable};
use crate::rng::{derive_seed, labels, stream};
use crate::strategy::{label_offline, train_guide, transform_online_rewards, RollIn, Strategy, StrategyKind};

/// `{strategy}__{env}__seed{seed}`, the stem of a run's artifacts.
pub fn run_name(strategy: StrategyKind, env: &str, seed: u64) -> String {
    format!("{strategy}__{env}__seed{seed}")
}

fn parse_run_name(stem: &str) -> Option<(StrategyKind, String, u64)> {
    let mut parts = stem.split("__");
    let (kind, env, seed) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() {
        return None;
    }
    Some((kind.parse().ok()?, env.to_string(), seed.strip_prefix("seed")?.parse().ok()?))
}

/// Regions (mazes) or states (chain) reached by online experience.
#[derive(Clone, Debug)]
enum Coverage {
    Grid(CoverageTracker),
    Chain { seen: HashSet<usize>, len: usize },
}

impl Coverage {
    fn new(task: &Task, cell: f64) -> Result<Self> {
        Ok(match task {
            Task::Chain(c) => Coverage::Chain {
                seen: HashSet::new(),
                len: c.len(),
            },
            _ => {
                let layout = task.layout().expect("spatial task");
                Coverage::Grid(CoverageTracker::new(CoverageGrid::new(layout, cell)?))
            }
        })
    }

    fn visit(&mut self, task: &Task, state: &[f64]) {
        match (self, task) {
            (Coverage::Chain { seen, .. }, Task::Chain(c)) => {
                seen.insert(c.decode(state));
            }
            (Coverage::Grid(tracker), _) => {
                if let Some(p) = task.position(state) {
                    tracker.visit(p);
                }
            }
            _ => {}
        }
    }

    fn fraction(&self) -> f64 {
        match self {
            Coverage::Grid(t) => t.fraction(),
            Coverage::Chain { seen, len } => seen.len() as f64 / *len as f64,
        }
    }
}

/// One (config, strategy, seed) training run, advanced one environment
/// step at a time.
pub struct Experiment {
    strategy: Strategy,
    budget: u64,
    start_training: u64,
    eval_episodes: usize,
    diagnostic_samples: usize,
    gamma: f64,
    task: Task,
    eval_task: Task,
    online: ReplayBuffer,
    offline: ReplayBuffer,
    agent: Agent,
    labeler: Option<UcbLabeler>,
    guide: Option<Mlp>,
    roll_in: Option<RollIn>,
    coverage: Coverage,
    env_rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    jsrl_rng: ChaCha8Rng,
    state: Vec<f64>,
    episode_step: u32,
    steps: u64,
}

impl Experiment {
    pub fn new(cfg: &ExperimentConfig, kind: StrategyKind, seed: u64) -> Result<Self> {
        let task = cfg.env.build()?;
        let offline = cfg.prior_data(&task)?;
        Self::with_prior(cfg, kind, seed, task, offline)
    }

    /// Like [`Experiment::new`] but with prior data already built.
    pub fn with_prior(
        cfg: &ExperimentConfig,
        kind: StrategyKind,
        seed: u64,
        task: Task,
        prior: ReplayBuffer,
    ) -> Result<Self> {
        let strategy = cfg.strategy_for(kind);
        let spec = task.spec().clone();
        let (sd, ad) = (spec.state_dim, spec.action_dim);
        if prior.is_empty() && (strategy.uses_offline_td() || strategy.jsrl.is_some()) {
            return Err(Error::config(format!("strategy {kind} needs non-empty prior data")));
        }
        let offline = ReplayBuffer::from_transitions(prior.to_vec(), derive_seed(seed, labels::REPLAY) ^ 1);
        let online = ReplayBuffer::new(None, derive_seed(seed, labels::REPLAY));
        let agent = Agent::new(cfg.agent.clone(), sd, ad, spec.gamma, derive_seed(seed, labels::AGENT))?;
        let labeler = if strategy.needs_labeler() {
            Some(UcbLabeler::new(cfg.labeler.clone(), sd, ad, derive_seed(seed, labels::LABELER))?)
        } else {
            None
        };
        let guide = match strategy.jsrl {
            Some(params) => {
                let init = Trainable::new(
                    actor::actor_spec(sd, &cfg.agent.hidden, ad),
                    derive_seed(seed, "guide"),
                    AdamConfig::with_lr(cfg.agent.actor_lr),
                )?;
                let mut data = ReplayBuffer::from_transitions(prior.to_vec(), derive_seed(seed, "guide-data"));
                let batch = cfg.agent.online_batch + cfg.agent.offline_batch;
                Some(train_guide(init, &mut data, params.bc_steps, batch)?)
            }
            None => None,
        };
        let coverage = Coverage::new(&task, cfg.eval.coverage_cell)?;
        let mut exp = Self {
            strategy,
            budget: cfg.budget,
            start_training: cfg.agent.start_training_for(cfg.budget),
            eval_episodes: cfg.eval.episodes,
            diagnostic_samples: cfg.eval.diagnostic_samples,
            gamma: spec.gamma,
            eval_task: task.clone(),
            task,
            online,
            offline,
            agent,
            labeler,
            guide,
            roll_in: None,
            coverage,
            env_rng: stream(seed, labels::ENV),
            eval_rng: stream(seed, labels::EVAL),
            jsrl_rng: stream(seed, "jsrl"),
            state: Vec::new(),
            episode_step: 0,
            steps: 0,
        };
        exp.begin_episode();
        Ok(exp)
    }

    fn begin_episode(&mut self) {
        self.state = self.task.reset(&mut self.env_rng);
        self.episode_step = 0;
        self.coverage.visit(&self.task, &self.state);
        self.roll_in = self.strategy.jsrl.map(|p| RollIn::begin(p.beta, &mut self.jsrl_rng));
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn labeler(&self) -> Option<&UcbLabeler> {
        self.labeler.as_ref()
    }

    pub fn online_buffer(&self) -> &ReplayBuffer {
        &self.online
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    /// Environment steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_finished(&self) -> bool {
        self.steps >= self.budget
    }

    pub fn coverage(&self) -> f64 {
        self.coverage.fraction()
    }

    fn choose_action(&mut self) -> Result<Vec<f64>> {
        if let (Some(roll), Some(guide)) = (self.roll_in.as_mut(), self.guide.as_ref()) {
            if roll.guide_acts() {
                roll.after_guide_step(self.gamma, &mut self.jsrl_rng);
                return actor::deterministic(guide, &self.state);
            }
        }
        if self.steps < self.start_training {
            let dim = self.task.spec().action_dim;
            let rng = self.agent.rng_mut();
            return Ok((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        self.agent.act(&self.state)
    }

    /// One environment step followed by the updates it triggers.
    pub fn step(&mut self) -> Result<()> {
        let step = self.steps;
        self.advance().map_err(|e| e.at_step(step))
    }

    fn advance(&mut self) -> Result<()> {
        let action = self.choose_action()?;
        let out = self.task.step(&action)?;
        let t = Transition::online(
            std::mem::take(&mut self.state),
            action,
            out.next_state.clone(),
            out.reward,
            out.terminal,
            self.episode_step,
        );
        self.coverage.visit(&self.task, &out.next_state);
        if self.strategy.needs_rnd() {
            if let Some(lab) = self.labeler.as_mut().filter(|l| l.is_training(self.steps)) {
                lab.rnd_update(&t)?;
            }
        }
        self.online.push(t);
        self.steps += 1;
        self.episode_step += 1;

        if self.steps >= self.start_training {
            self.train()?;
        }
        if let Some(lab) = self.labeler.as_mut() {
            lab.maybe_reset(self.steps)?;
        }
        if out.done() {
            self.begin_episode();
        } else {
            self.state = out.next_state;
        }
        Ok(())
    }

    fn train(&mut self) -> Result<()> {
        let cfg = self.agent.config();
        let (n_on, n_off) = self.strategy.batch_split(cfg.online_batch, cfg.offline_batch);
        let utd = cfg.utd;
        let labeler_training = self.labeler.as_ref().is_some_and(|l| l.is_training(self.steps));
        let mut last = None;
        for _ in 0..utd {
            let batch = sample_mixed_batch(&mut self.online, &mut self.offline, n_on, n_off)?;
            if labeler_training {
                let lab = self.labeler.as_mut().expect("labeler");
                if self.strategy.needs_reward_model() {
                    lab.reward_update(&batch.online)?;
                }
                if self.strategy.needs_termination_model() {
                    lab.termination_update(&batch.online)?;
                }
            }
            let lab = self.labeler.as_ref();
            let mut rewards = transform_online_rewards(&self.strategy, lab, &batch.online)?;
            let mut terminals: Vec<f64> = batch
                .online
                .iter()
                .map(|t| if t.terminal == Some(true) { 1.0 } else { 0.0 })
                .collect();
            if n_off > 0 {
                for label in label_offline(&self.strategy, lab, &self.task, &batch.offline)? {
                    rewards.push(label.reward);
                    terminals.push(label.terminal);
                }
            }
            let rows: Vec<&Transition> = batch.online.iter().chain(&batch.offline).copied().collect();
            let labeled = LabeledBatch::new(&rows, rewards, terminals)?;
            self.agent.critic_update(&labeled)?;
            let bc = (self.strategy.bc_coef > 0.0 && n_off > 0).then(|| {
                let ad = batch.offline[0].action.len();
                let sd = batch.offline[0].state.len();
                (
                    Matrix::from_rows(sd, batch.offline.iter().map(|t| t.state.as_slice())),
                    Matrix::from_rows(ad, batch.offline.iter().map(|t| t.action.as_slice())),
                )
            });
            last = Some((labeled.states, bc));
        }
        if let Some((states, bc)) = last {
            let bc = match bc {
                Some((s, a)) => Some((s?, a?)),
                None => None,
            };
            let coef = self.strategy.bc_coef;
            self.agent.actor_update(&states, bc.as_ref().map(|(s, a)| (s, a)), coef)?;
        }
        Ok(())
    }

    /// Evaluation and diagnostics at the current step. Randomness comes from
    /// a per-step substream of the evaluation seed, so rows do not depend on
    /// how often metrics were taken before.
    pub fn metrics(&mut self, seconds: f64) -> Result<MetricRow> {
        let mut rng = self.eval_rng.clone();
        rng.set_stream(self.steps);
        let agent = &self.agent;
        let success = evaluate(
            &mut self.eval_task,
            |s: &[f64]| agent.act_deterministic(s),
            self.eval_episodes,
            &mut rng,
        )?;
        let mut mean_bonus = f64::NAN;
        let mut reward_mse = f64::NAN;
        if let Some(lab) = &self.labeler {
            let n = self.diagnostic_samples;
            if self.strategy.needs_rnd() && !self.offline.is_empty() && n > 0 {
                let rows = sample_rows(&self.offline, n, &mut rng);
                let b = lab.bonus_batch(&rows)?;
                mean_bonus = b.iter().sum::<f64>() / b.len() as f64;
            }
            if self.strategy.needs_reward_model() && !self.online.is_empty() && n > 0 {
                let rows = sample_rows(&self.online, n, &mut rng);
                let pred = lab.reward_batch(&rows)?;
                reward_mse = rows
                    .iter()
                    .zip(&pred)
                    .map(|(t, p)| (p - t.reward.unwrap_or_default()).powi(2))
                    .sum::<f64>()
                    / rows.len() as f64;
            }
        }
        Ok(MetricRow {
            step: self.steps,
            success,
            coverage: self.coverage.fraction(),
            mean_bonus,
            reward_mse,
            seconds,
        })
    }

    /// Parameters, optimizer states and generator positions.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut tensors = self.agent.tensors();
        if let Some(lab) = &self.labeler {
            tensors.extend(lab.tensors());
        }
        tensors.push(("env_steps".into(), vec![self.steps as f64]));
        Checkpoint {
            tensors,
            blobs: vec![
                ("rng.agent".into(), rng_state(self.agent.rng())),
                ("rng.env".into(), rng_state(&self.env_rng)),
                ("rng.eval".into(), rng_state(&self.eval_rng)),
                ("rng.jsrl".into(), rng_state(&self.jsrl_rng)),
            ],
        }
    }
}

fn sample_rows<'a>(buffer: &'a ReplayBuffer, n: usize, rng: &mut ChaCha8Rng) -> Vec<&'a Transition> {
    (0..n)
        .map(|_| buffer.get(rng.random_range(0..buffer.len())).expect("index in range"))
        .collect()
}

/// Files a finished run leaves behind.
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub metrics: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub rows: Vec<MetricRow>,
}

/// Trains for exactly `budget` steps, logging every `eval.interval` steps
/// and at the last step.
pub fn run_experiment(cfg: &ExperimentConfig, kind: StrategyKind, seed: u64, out_dir: &Path) -> Result<RunArtifacts> {
    let exp = Experiment::new(cfg, kind, seed)?;
    run_prepared(cfg, exp, seed, out_dir)
}

/// Runs an already constructed experiment to completion.
pub fn run_prepared(cfg: &ExperimentConfig, mut exp: Experiment, seed: u64, out_dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(out_dir)?;
    let stem = run_name(exp.strategy().kind, &cfg.env.name, seed);
    let metrics = out_dir.join(format!("{stem}.csv"));
    let mut writer = MetricsWriter::create(&metrics)?;
    let started = Instant::now();
    let mut rows = Vec::new();
    while !exp.is_finished() {
        exp.step()?;
        let s = exp.steps();
        if s % cfg.eval.interval == 0 || s == cfg.budget {
            let seconds = if cfg.eval.wall_clock { started.elapsed().as_secs_f64() } else { 0.0 };
            let row = exp.metrics(seconds).map_err(|e| e.at_step(s))?;
            writer.write(&row)?;
            rows.push(row);
        }
    }
    drop(writer);
    let checkpoint = if cfg.eval.checkpoint && cfg.budget > 0 {
        let path = out_dir.join(format!("{stem}.ckpt"));
        exp.checkpoint().write(&path)?;
        Some(path)
    } else {
        None
    };
    Ok(RunArtifacts {
        metrics,
        checkpoint,
        rows,
    })
}

/// One (strategy, seed) pair of a sweep and how it ended.
#[derive(Debug)]
pub struct SweepRun {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub outcome: Result<RunArtifacts>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub runs: Vec<SweepRun>,
    pub summary: PathBuf,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Runs every (strategy, seed) pair on `threads` workers. A failed run is
/// recorded and the rest continue.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<SweepOutcome> {
    fs::create_dir_all(out_dir)?;
    let jobs: Vec<(StrategyKind, u64)> = cfg
        .sweep_strategies()
        .into_iter()
        .flat_map(|k| cfg.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let task = cfg.env.build()?;
    let prior = cfg.prior_data(&task)?;
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<RunArtifacts>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(kind, seed)) = jobs.get(i) else { break };
                let outcome = Experiment::with_prior(cfg, kind, seed, task.clone(), prior.clone())
                    .and_then(|exp| run_prepared(cfg, exp, seed, out_dir));
                *results[i].lock().expect("result slot") = Some(outcome);
            });
        }
    });
    let runs: Vec<SweepRun> = jobs
        .iter()
        .zip(results)
        .map(|(&(strategy, seed), slot)| SweepRun {
            strategy,
            seed,
            outcome: slot.into_inner().expect("result slot").expect("every job runs"),
        })
        .collect();
    let mut groups: BTreeMap<(String, String), Vec<Vec<MetricRow>>> = BTreeMap::new();
    for run in &runs {
        if let Ok(a) = &run.outcome {
            groups
                .entry((run.strategy.to_string(), cfg.env.name.clone()))
                .or_default()
                .push(a.rows.clone());
        }
    }
    let summary = out_dir.join("summary.csv");
    write_summary(&summary, &groups)?;
    Ok(SweepOutcome { runs, summary })
}

/// Final-step statistics of one (strategy, env) group.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub env: String,
    pub runs: usize,
    pub final_step: u64,
    pub success_mean: f64,
    pub success_stderr: f64,
    pub coverage_mean: f64,
    pub coverage_stderr: f64,
}

fn summarize(strategy: &str, env: &str, runs: &[Vec<MetricRow>]) -> SummaryRow {
    let finals: Vec<&MetricRow> = runs.iter().filter_map(|r| r.last()).collect();
    let success: Vec<f64> = finals.iter().map(|r| r.success).collect();
    let coverage: Vec<f64> = finals.iter().map(|r| r.coverage).collect();
    let (success_mean, success_stderr) = mean_stderr(&success);
    let (coverage_mean, coverage_stderr) = mean_stderr(&coverage);
    SummaryRow {
        strategy: strategy.to_string(),
        env: env.to_string(),
        runs: runs.len(),
        final_step: finals.iter().map(|r| r.step).max().unwrap_or(0),
        success_mean,
        success_stderr,
        coverage_mean,
        coverage_stderr,
    }
}

fn write_summary(path: &Path, groups: &BTreeMap<(String, String), Vec<Vec<MetricRow>>>) -> Result<Vec<SummaryRow>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "strategy",
        "env",
        "runs",
        "final_step",
        "success_mean",
        "success_stderr",
        "coverage_mean",
        "coverage_stderr",
    ])?;
    let mut out = Vec::new();
    for ((strategy, env), runs) in groups {
        let r = summarize(strategy, env, runs);
        w.write_record([
            r.strategy.clone(),
            r.env.clone(),
            r.runs.to_string(),
            r.final_step.to_string(),
            r.success_mean.to_string(),
            r.success_stderr.to_string(),
            r.coverage_mean.to_string(),
            r.coverage_stderr.to_string(),
        ])?;
        out.push(r);
    }
    w.flush()?;
    Ok(out)
}

/// Scans `dir` for run CSVs and writes `summary.csv` plus one
/// `curve__{strategy}__{env}.csv` of per-step mean and standard error per group.
pub fn report(dir: &Path) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(String, String), Vec<Vec<MetricRow>>> = BTreeMap::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.extension().is_none_or(|e| e != "csv") {
            continue;
        }
        let Some((kind, env, _)) = path.file_stem().and_then(|s| s.to_str()).and_then(parse_run_name) else {
            continue;
        };
        groups.entry((kind.to_string(), env)).or_default().push(read_metrics(&path)?);
    }
    if groups.is_empty() {
        return Err(Error::config(format!("no run CSVs found in {}", dir.display())));
    }
    for ((strategy, env), runs) in &groups {
        write_curve(&dir.join(format!("curve__{strategy}__{env}.csv")), runs)?;
    }
    write_summary(&dir.join("summary.csv"), &groups)
}

fn write_curve(path: &Path, runs: &[Vec<MetricRow>]) -> Result<()> {
    let steps: Vec<u64> = runs[0].iter().map(|r| r.step).collect();
    for (k, run) in runs.iter().enumerate() {
        if run.len() != steps.len() || run.iter().zip(&steps).any(|(r, s)| r.step != *s) {
            return Err(Error::Alignment(format!(
                "{}: run {k} is not logged at the same steps as run 0",
                path.display()
            )));
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "success_mean", "success_stderr", "coverage_mean", "coverage_stderr"])?;
    for (i, step) in steps.iter().enumerate() {
        let (sm, ss) = mean_stderr(&runs.iter().map(|r| r[i].success).collect::<Vec<_>>());
        let (cm, cs) = mean_stderr(&runs.iter().map(|r| r[i].coverage).collect::<Vec<_>>());
        w.write_record([step.to_string(), sm.to_string(), ss.to_string(), cm.to_string(), cs.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
