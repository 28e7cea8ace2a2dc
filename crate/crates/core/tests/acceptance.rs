//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers (e.g. `-- 1 6 7`) to run a
//! subset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use explore_core::agent::actor::{actor_loss, actor_spec, bc_loss, ActorObjective};
use explore_core::agent::critic::{critic_loss, critic_spec, temperature_loss};
use explore_core::agent::AgentConfig;
use explore_core::config::{CorruptionMode, ExperimentConfig};
use explore_core::envs::Task;
use explore_core::labeler::{reward_loss, rnd_loss, termination_loss, LabelerConfig, UcbLabeler};
use explore_core::mdp::{sample_mixed_batch, Environment, ReplayBuffer, Transition};
use explore_core::metrics::median;
use explore_core::nn::gradcheck::{finite_difference, grad_mismatch};
use explore_core::nn::{Head, Matrix, Mlp, MlpSpec};
use explore_core::runner::{run_experiment, Experiment};
use explore_core::strategy::{label_offline, RollIn, Strategy, StrategyKind};

const SEEDS: u64 = 10;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_path(&configs_dir().join(name)).expect("bundled config")
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Worst FD violation of `loss` over the parameters of `net`, if any.
fn check_params<F>(net: &Mlp, analytic: &[f64], mut loss: F) -> Option<String>
where
    F: FnMut(&Mlp) -> f64,
{
    let mut probe = net.clone();
    let numeric = finite_difference(net.params(), |p| {
        probe.set_params(p).unwrap();
        loss(&probe)
    });
    grad_mismatch(analytic, &numeric).map(|(i, a, n)| format!("component {i}: {a:e} vs {n:e}"))
}

fn gradient_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    let mut record = |what: &str, r: Option<String>| {
        if let Some(m) = r {
            failures.push(format!("{what} {m}"));
        }
    };
    let (sd, ad, n) = (3, 2, 7);
    let sa = random_matrix(n, sd + ad, &mut rng);
    let states = random_matrix(n, sd, &mut rng);

    let reward = Mlp::new(MlpSpec::new(sd + ad, &[8, 8], 1), 1).unwrap();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
    let (_, g) = reward_loss(&reward, &sa, &y).unwrap();
    record("reward", check_params(&reward, &g, |m| reward_loss(m, &sa, &y).unwrap().0));

    let pred = Mlp::new(MlpSpec::new(sd + ad, &[8, 8], 4), 2).unwrap();
    let target = Mlp::new(MlpSpec::new(sd + ad, &[8, 8], 4), 3).unwrap();
    let (_, g) = rnd_loss(&pred, &target, &sa).unwrap();
    record("rnd", check_params(&pred, &g, |m| rnd_loss(m, &target, &sa).unwrap().0));

    let term = Mlp::new(MlpSpec::new(sd + ad, &[8, 8], 1).with_head(Head::Sigmoid), 4).unwrap();
    let flags: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let (_, g) = termination_loss(&term, &sa, &flags).unwrap();
    record("termination", check_params(&term, &g, |m| termination_loss(m, &sa, &flags).unwrap().0));

    let critics: Vec<Mlp> = (0..3)
        .map(|k| Mlp::new(critic_spec(sd, ad, &[8, 8], true), 10 + k).unwrap())
        .collect();
    let (_, grads) = critic_loss(&critics, &sa, &y).unwrap();
    for (k, g) in grads.iter().enumerate() {
        let r = check_params(&critics[k], g, |m| {
            let mut cs = critics.clone();
            cs[k] = m.clone();
            critic_loss(&cs, &sa, &y).unwrap().0
        });
        record(&format!("critic{k}"), r);
    }

    let actor = Mlp::new(actor_spec(sd, &[8, 8], ad), 5).unwrap();
    let noise = random_matrix(n, ad, &mut rng);
    let subsets: Vec<Vec<usize>> = (0..n).map(|i| vec![i % 3, (i + 1) % 3]).collect();
    let bc_actions = Matrix::from_vec(n, ad, (0..n * ad).map(|_| rng.random_range(-0.9..0.9)).collect()).unwrap();
    let objective = |bc: bool| ActorObjective {
        critics: &critics,
        subsets: &subsets,
        alpha: 0.3,
        bc: bc.then_some((&states, &bc_actions, 0.5)),
    };
    for bc in [false, true] {
        let g = actor_loss(&actor, &states, &noise, &objective(bc)).unwrap().grads;
        let r = check_params(&actor, &g, |m| actor_loss(m, &states, &noise, &objective(bc)).unwrap().loss);
        record(if bc { "actor+bc" } else { "actor" }, r);
    }
    let (_, g) = bc_loss(&actor, &states, &bc_actions).unwrap();
    record("bc", check_params(&actor, &g, |m| bc_loss(m, &states, &bc_actions).unwrap().0));

    for (log_alpha, mean_lp) in [(-1.0, 0.4), (0.5, -2.0)] {
        let (_, d) = temperature_loss(log_alpha, mean_lp, -2.0);
        let numeric = finite_difference(&[log_alpha], |x| temperature_loss(x[0], mean_lp, -2.0).0);
        record(
            "temperature",
            grad_mismatch(&[d], &numeric).map(|(_, a, n)| format!("{a:e} vs {n:e}")),
        );
    }
    Verdict::new(failures.is_empty(), if failures.is_empty() {
        "all losses agree with central differences (rtol 1e-4)".to_string()
    } else {
        failures.join("; ")
    })
}

fn chain_oracle() -> Verdict {
    let cfg = load("chain.toml");
    let gamma = cfg.env.gamma;
    let mut worst: f64 = 0.0;
    let mut greedy = true;
    for seed in 0..3 {
        let mut exp = Experiment::new(&cfg, StrategyKind::Oracle, seed).unwrap();
        while !exp.is_finished() {
            exp.step().unwrap();
        }
        let Task::Chain(chain) = exp.task() else {
            unreachable!("chain config builds a chain")
        };
        let q_star = chain.optimal_q(gamma);
        for (s, q_opt) in q_star.iter().enumerate() {
            let state = chain.encode(s);
            let q = |a: f64| {
                let v = exp.agent().q_values(&state, &[a]).unwrap();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let (left, right) = (q(-0.75), q(0.75));
            worst = worst.max((left - q_opt[0]).abs()).max((right - q_opt[1]).abs());
            let act = exp.agent().act_deterministic(&state).unwrap()[0];
            greedy &= right > left && act > 0.0;
        }
    }
    Verdict::new(
        worst <= 0.05 && greedy,
        format!("max |Q - Q*| = {worst:.4} (tol 0.05), greedy policy optimal: {greedy}"),
    )
}

/// Metric rows of finished runs, keyed by a free-form run label.
#[derive(Default)]
struct Runs {
    rows: BTreeMap<String, Vec<explore_core::metrics::MetricRow>>,
    seconds: BTreeMap<String, f64>,
}

impl Runs {
    /// Runs `kind` for every seed unless already done; returns the wall time
    /// of the group (including earlier runs that are reused).
    fn ensure(&mut self, label: &str, cfg: &ExperimentConfig, kind: StrategyKind, out: &Path) -> f64 {
        let key = format!("{label}/{kind}");
        if !self.seconds.contains_key(&key) {
            let started = Instant::now();
            for seed in 0..SEEDS {
                let t = Instant::now();
                let dir = out.join(label);
                let artifacts = run_experiment(cfg, kind, seed, &dir).expect("training run");
                eprintln!("  {key} seed {seed}: {:.0}s", t.elapsed().as_secs_f64());
                self.rows.insert(format!("{key}/{seed}"), artifacts.rows);
            }
            self.seconds.insert(key.clone(), started.elapsed().as_secs_f64());
        }
        self.seconds[&key]
    }

    fn values<F>(&self, label: &str, kind: StrategyKind, step: u64, field: F) -> Vec<f64>
    where
        F: Fn(&explore_core::metrics::MetricRow) -> f64,
    {
        (0..SEEDS)
            .map(|seed| {
                let rows = &self.rows[&format!("{label}/{kind}/{seed}")];
                let row = rows.iter().find(|r| r.step == step).expect("logged step");
                field(row)
            })
            .collect()
    }

    fn final_success(&self, label: &str, kind: StrategyKind, budget: u64) -> f64 {
        median(&self.values(label, kind, budget, |r| r.success))
    }
}

fn with_budget(mut cfg: ExperimentConfig, budget: u64) -> ExperimentConfig {
    cfg.budget = budget;
    cfg.eval.interval = budget / 2;
    cfg.eval.checkpoint = false;
    cfg
}

fn minutes(s: f64) -> String {
    format!("{:.1} min", s / 60.0)
}

fn exploration_ordering(runs: &mut Runs, out: &Path) -> Verdict {
    let cfg = with_budget(load("medium.toml"), 20_000);
    let half = cfg.budget / 2;
    let mut secs = runs.ensure("medium", &cfg, StrategyKind::Ours, out);
    secs += runs.ensure("medium", &cfg, StrategyKind::Online, out);
    // Coverage at B/2 is a prefix of the full run; Naive is only trained that far.
    let short = with_budget(cfg.clone(), half);
    secs += runs.ensure("medium-half", &short, StrategyKind::Naive, out);
    let cov = |label: &str, kind| median(&runs.values(label, kind, half, |r| r.coverage));
    let (ours, naive, online) = (
        cov("medium", StrategyKind::Ours),
        cov("medium-half", StrategyKind::Naive),
        cov("medium", StrategyKind::Online),
    );
    Verdict::new(
        ours >= naive + 0.15 && ours >= online + 0.25 && secs < 30.0 * 60.0,
        format!(
            "median coverage at step {half}: Ours {ours:.3}, Naive {naive:.3}, Online {online:.3}; {}",
            minutes(secs)
        ),
    )
}

fn success_ordering(runs: &mut Runs, out: &Path) -> Verdict {
    let mut secs = 0.0;
    let mut lines = Vec::new();
    let mut pass = true;
    for (label, file, budget) in [("umaze", "umaze.toml", 10_000), ("medium", "medium.toml", 20_000)] {
        let cfg = with_budget(load(file), budget);
        for kind in [StrategyKind::Ours, StrategyKind::Oracle, StrategyKind::Online] {
            secs += runs.ensure(label, &cfg, kind, out);
        }
        let ours = runs.final_success(label, StrategyKind::Ours, budget);
        let oracle = runs.final_success(label, StrategyKind::Oracle, budget);
        let online = runs.final_success(label, StrategyKind::Online, budget);
        pass &= ours >= 0.8 && oracle >= 0.8 && (ours - oracle).abs() <= 0.2 && online <= 0.3;
        lines.push(format!("{label}: Ours {ours:.2}, Oracle {oracle:.2}, Online {online:.2}"));
    }
    Verdict::new(
        pass && secs < 45.0 * 60.0,
        format!("median final success {}; {}", lines.join("; "), minutes(secs)),
    )
}

const CORRUPTION_BUDGET: u64 = 20_000;

fn corruption_behaviors(runs: &mut Runs, out: &Path) -> Verdict {
    let base = with_budget(load("medium.toml"), CORRUPTION_BUDGET);
    let budget = base.budget;
    let corrupted = |mode: CorruptionMode| {
        let mut c = base.clone();
        c.corruption.mode = mode;
        match mode {
            CorruptionMode::Coverage => c.corruption.radius = Some(1.5),
            CorruptionMode::Subsample => c.corruption.fraction = Some(0.01),
            _ => {}
        }
        c
    };
    let mut secs = 0.0;
    let coverage = corrupted(CorruptionMode::Coverage);
    secs += runs.ensure("coverage", &coverage, StrategyKind::Ours, out);
    secs += runs.ensure("coverage", &coverage, StrategyKind::OursOnlineRnd, out);
    let orthogonal = corrupted(CorruptionMode::Orthogonal);
    secs += runs.ensure("orthogonal", &orthogonal, StrategyKind::OursOnlineRnd, out);
    secs += runs.ensure("orthogonal", &orthogonal, StrategyKind::Oracle, out);
    let subsample = corrupted(CorruptionMode::Subsample);
    secs += runs.ensure("subsample", &subsample, StrategyKind::Ours, out);
    secs += runs.ensure("medium", &base, StrategyKind::Ours, out);

    let s = |label: &str, kind| runs.final_success(label, kind, budget);
    let a = (s("coverage", StrategyKind::Ours), s("coverage", StrategyKind::OursOnlineRnd));
    let b = (s("orthogonal", StrategyKind::OursOnlineRnd), s("orthogonal", StrategyKind::Oracle));
    let c = (s("subsample", StrategyKind::Ours), s("medium", StrategyKind::Ours));
    let pass_a = a.0 <= 0.1 && a.1 >= 0.5;
    let pass_b = b.0 > 0.3 && b.1 <= 0.1;
    let pass_c = (c.0 - c.1).abs() <= 0.25;
    Verdict::new(
        pass_a && pass_b && pass_c && secs < 90.0 * 60.0,
        format!(
            "(a) coverage hole: Ours {:.2}, Ours+OnlineRND {:.2} [{}]; (b) orthogonal: Ours+OnlineRND {:.2}, Oracle {:.2} [{}]; (c) 1% subsample: Ours {:.2} vs {:.2} [{}]; {}",
            a.0,
            a.1,
            ok(pass_a),
            b.0,
            b.1,
            ok(pass_b),
            c.0,
            c.1,
            ok(pass_c),
            minutes(secs)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "fail"
    }
}

fn labeling_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = LabelerConfig {
        hidden: vec![32, 32],
        features: 16,
        lr: 1e-3,
        start_steps: 0,
        ..Default::default()
    };
    let mut labeler = UcbLabeler::new(cfg.clone(), 2, 2, 9).unwrap();
    let online: Vec<Transition> = (0..64)
        .map(|i| {
            let s = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            Transition::online(s.clone(), vec![0.1, -0.1], s, -1.0, i % 7 == 0, i)
        })
        .collect();
    for _ in 0..50 {
        let refs: Vec<&Transition> = online.iter().collect();
        labeler.rnd_update_batch(&refs).unwrap();
        labeler.reward_update(&refs).unwrap();
        labeler.termination_update(&refs).unwrap();
    }
    let inputs: Vec<Transition> = (0..10_000)
        .map(|i| {
            let s: Vec<f64> = (0..2).map(|_| rng.random_range(-5.0..5.0)).collect();
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            Transition::prior(s.clone(), a, s, i)
        })
        .collect();
    let rows: Vec<&Transition> = inputs.iter().collect();
    let task = ExperimentConfig::new("point-maze-umaze", StrategyKind::Ours, 1).env.build().unwrap();
    let labels = |kind| label_offline(&Strategy::new(kind), Some(&labeler), &task, &rows).unwrap();
    let bonus = labeler.bonus_batch(&rows).unwrap();
    let non_negative = bonus.iter().all(|&b| b >= 0.0);
    let ours = labels(StrategyKind::Ours);
    let naive = labels(StrategyKind::Naive);
    let dominates = ours.iter().zip(&naive).all(|(o, n)| o.reward >= n.reward);
    let min_r = labels(StrategyKind::MinR);
    let r_min = task.spec().reward.min_reward();
    let constant = min_r.iter().all(|l| l.reward == r_min);

    // Oracle labels reproduce the rewards the environment paid.
    let mut env = task.clone();
    let mut env_rng = ChaCha8Rng::seed_from_u64(1);
    let mut state = env.reset(&mut env_rng);
    let mut paid = Vec::new();
    for i in 0..2_000u32 {
        let a = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let o = env.step(&a).unwrap();
        paid.push((Transition::prior(state.clone(), a, o.next_state.clone(), i), o.reward, o.terminal));
        state = if o.done() { env.reset(&mut env_rng) } else { o.next_state };
    }
    let prior: Vec<&Transition> = paid.iter().map(|p| &p.0).collect();
    let oracle = label_offline(&Strategy::new(StrategyKind::Oracle), None, &env, &prior).unwrap();
    let exact = oracle
        .iter()
        .zip(&paid)
        .all(|(l, p)| l.reward == p.1 && l.terminal == if p.2 { 1.0 } else { 0.0 });

    let mut fresh = UcbLabeler::new(cfg, 2, 2, 21).unwrap();
    let point = Transition::online(vec![0.3, -0.2], vec![0.5, 0.5], vec![0.3, -0.2], -1.0, false, 0);
    for _ in 0..3_000 {
        fresh.rnd_update(&point).unwrap();
    }
    let trained = fresh.bonus(&point.state, &point.action).unwrap();

    Verdict::new(
        non_negative && dominates && constant && exact && trained < 1e-3,
        format!(
            "bonus >= 0: {non_negative}; Ours >= Naive on 1e4 inputs: {dominates}; MinR constant: {constant}; Oracle exact: {exact}; trained-point bonus {trained:.2e}"
        ),
    )
}

fn mechanics(out: &Path) -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;

    let gamma = 0.99;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 100_000;
    let mut total = 0usize;
    for _ in 0..trials {
        let mut roll = RollIn::begin(1.0, &mut rng);
        while roll.guide_acts() {
            roll.after_guide_step(gamma, &mut rng);
        }
        total += roll.guide_steps();
    }
    let mean = total as f64 / trials as f64;
    let expected = 1.0 / (1.0 - gamma);
    let rollin_ok = (mean / expected - 1.0).abs() <= 0.05;
    pass &= rollin_ok;
    notes.push(format!("roll-in mean {mean:.2} vs {expected:.0}"));

    let agent = AgentConfig::default();
    let split = Strategy::new(StrategyKind::Ours).batch_split(agent.online_batch, agent.offline_batch);
    let mut on = ReplayBuffer::new(None, 1);
    let mut off = ReplayBuffer::new(None, 2);
    for i in 0..10 {
        on.push(Transition::online(vec![i as f64], vec![0.0], vec![0.0], -1.0, false, 0));
        off.push(Transition::prior(vec![i as f64], vec![0.0], vec![0.0], 0));
    }
    let batch = sample_mixed_batch(&mut on, &mut off, split.0, split.1).unwrap();
    let split_ok = split == (128, 128) && (batch.online.len(), batch.offline.len()) == (128, 128);
    pass &= split_ok;
    notes.push(format!("batch split ({}, {})", batch.online.len(), batch.offline.len()));

    let mut labeler = UcbLabeler::new(
        LabelerConfig {
            hidden: vec![16, 16],
            features: 8,
            lr: 1e-3,
            start_steps: 0,
            ..Default::default()
        },
        2,
        2,
        4,
    )
    .unwrap();
    // Every input appears once with each flag, so the optimum is 0.5 everywhere.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let inputs: Vec<(Vec<f64>, Vec<f64>)> = (0..128)
        .map(|_| {
            let s = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let a = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            (s, a)
        })
        .collect();
    let flagged: Vec<Transition> = inputs
        .iter()
        .flat_map(|(s, a)| {
            [false, true].map(|f| Transition::online(s.clone(), a.clone(), s.clone(), -1.0, f, 0))
        })
        .collect();
    let refs: Vec<&Transition> = flagged.iter().collect();
    for _ in 0..2_000 {
        labeler.termination_update(&refs).unwrap();
    }
    let t = labeler.termination_batch(&refs).unwrap();
    let t_worst = t.iter().map(|p| (p - 0.5).abs()).fold(0.0, f64::max);
    let term_ok = t_worst <= 0.02;
    pass &= term_ok;
    notes.push(format!("termination max |p - 0.5| {t_worst:.4}"));

    let mut cfg = load("umaze.toml");
    cfg.budget = 1_500;
    cfg.eval.interval = 500;
    let read = |dir: &str| {
        let a = run_experiment(&cfg, StrategyKind::Ours, 3, &out.join(dir)).unwrap();
        (
            std::fs::read(&a.metrics).unwrap(),
            std::fs::read(a.checkpoint.unwrap()).unwrap(),
        )
    };
    let identical = read("same-a") == read("same-b");
    pass &= identical;
    notes.push(format!("same-seed CSV and checkpoint identical: {identical}"));

    let reset_cfg = LabelerConfig {
        hidden: vec![16, 16],
        features: 8,
        reset_period: 100,
        start_steps: 0,
        ..Default::default()
    };
    let mut labeler = UcbLabeler::new(reset_cfg, 2, 2, 6).unwrap();
    for i in 0..20 {
        let t = &flagged[i];
        labeler.rnd_update(t).unwrap();
        labeler.reward_update(&[t]).unwrap();
    }
    let rnd_before = (labeler.rnd_predictor().clone(), labeler.rnd_target().clone());
    let reward_before = labeler.reward_net().clone();
    let reset = labeler.maybe_reset(100).unwrap();
    let rnd_kept = rnd_before.0.params() == labeler.rnd_predictor().params()
        && rnd_before.1.params() == labeler.rnd_target().params();
    let reward_redrawn = reward_before.params() != labeler.reward_net().params();
    let reset_ok = reset && rnd_kept && reward_redrawn;
    pass &= reset_ok;
    notes.push(format!("reset keeps RND bit-exact: {rnd_kept}, redraws reward: {reward_redrawn}"));

    Verdict::new(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    let scratch = tempfile::tempdir().expect("temporary directory");
    let out = scratch.path();
    let mut runs = Runs::default();

    type Check<'a> = Box<dyn FnMut(&mut Runs) -> Verdict + 'a>;
    let checks: Vec<(u32, &str, Duration, Check)> = vec![
        (1, "gradient suite", Duration::from_secs(30), Box::new(|_| gradient_suite())),
        (2, "chain oracle matches value iteration", Duration::from_secs(120), Box::new(|_| chain_oracle())),
        (3, "exploration ordering (medium, mid-budget coverage)", Duration::MAX, Box::new(|r| exploration_ordering(r, out))),
        (4, "success ordering (umaze, medium)", Duration::MAX, Box::new(|r| success_ordering(r, out))),
        (5, "corruption behaviors", Duration::MAX, Box::new(|r| corruption_behaviors(r, out))),
        (6, "labeling invariants", Duration::from_secs(60), Box::new(|_| labeling_invariants())),
        (7, "mechanics", Duration::from_secs(300), Box::new(|_| mechanics(out))),
    ];
    let mut failed = 0;
    for (n, name, limit, mut check) in checks {
        if !wanted(n) {
            continue;
        }
        let started = Instant::now();
        let verdict = check(&mut runs);
        let elapsed = started.elapsed();
        let pass = verdict.pass && elapsed < limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{n}] {name}: {} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            verdict.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
