//! Off-policy actor-critic backbone: tanh-Gaussian actor, critic ensemble
//! with random-subset targets and a learned entropy temperature.

pub mod actor;
pub mod critic;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::mdp::Transition;
use crate::nn::{AdamConfig, AdamState, Matrix, Mlp, Trainable};
use actor::{actor_loss, actor_spec, sample_batch, ActorObjective};
use critic::{critic_loss, critic_spec, draw_subsets, subset_min, td_targets, temperature_loss};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub ensemble_size: usize,
    /// Critics drawn per target `Z`.
    pub subset_size: usize,
    pub polyak: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub temperature_lr: f64,
    pub init_temperature: f64,
    /// Include `−α log π` in TD targets.
    pub entropy_backups: bool,
    pub critic_layer_norm: bool,
    /// Critic updates per environment step.
    pub utd: usize,
    pub online_batch: usize,
    pub offline_batch: usize,
    /// Environment steps before updates begin; by default scaled from
    /// 5000 at a 300k budget, with a floor of 500.
    pub start_training: Option<u64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            ensemble_size: 10,
            subset_size: 1,
            polyak: 0.005,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            temperature_lr: 3e-4,
            init_temperature: 1.0,
            entropy_backups: false,
            critic_layer_norm: true,
            utd: 20,
            online_batch: 128,
            offline_batch: 128,
            start_training: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if self.ensemble_size == 0 {
            return bad("agent.ensemble_size must be at least 1");
        }
        if self.subset_size == 0 || self.subset_size > self.ensemble_size {
            return bad("agent.subset_size must lie in 1..=ensemble_size");
        }
        if !(self.polyak > 0.0 && self.polyak <= 1.0) {
            return bad("agent.polyak must lie in (0, 1]");
        }
        for (name, lr) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("temperature_lr", self.temperature_lr),
        ] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::config(format!("agent.{name} must be finite and >= 0")));
            }
        }
        if !(self.init_temperature > 0.0 && self.init_temperature.is_finite()) {
            return bad("agent.init_temperature must be positive");
        }
        if self.utd == 0 {
            return bad("agent.utd must be at least 1");
        }
        if self.online_batch + self.offline_batch == 0 {
            return bad("agent batch sizes cannot both be zero");
        }
        if self.hidden.contains(&0) {
            return bad("agent.hidden widths must be positive");
        }
        Ok(())
    }

    pub fn start_training_for(&self, budget: u64) -> u64 {
        self.start_training
            .unwrap_or_else(|| (5000.0 * budget as f64 / 300_000.0).round().max(500.0) as u64)
    }
}

/// Transitions with the reward and termination estimate the critic
/// should regress on.
#[derive(Clone, Debug)]
pub struct LabeledBatch {
    pub states: Matrix,
    pub actions: Matrix,
    pub next_states: Matrix,
    pub rewards: Vec<f64>,
    /// Termination probabilities in `[0, 1]`.
    pub terminals: Vec<f64>,
}

impl LabeledBatch {
    pub fn new(rows: &[&Transition], rewards: Vec<f64>, terminals: Vec<f64>) -> Result<Self> {
        ensure_dim("batch rewards", rows.len(), rewards.len())?;
        ensure_dim("batch terminals", rows.len(), terminals.len())?;
        let first = rows.first().ok_or_else(|| Error::usage("empty training batch"))?;
        let (sd, ad) = (first.state.len(), first.action.len());
        Ok(Self {
            states: Matrix::from_rows(sd, rows.iter().map(|t| t.state.as_slice()))?,
            actions: Matrix::from_rows(ad, rows.iter().map(|t| t.action.as_slice()))?,
            next_states: Matrix::from_rows(sd, rows.iter().map(|t| t.next_state.as_slice()))?,
            rewards,
            terminals,
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CriticStats {
    pub loss: f64,
    pub mean_target: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActorStats {
    pub loss: f64,
    pub entropy: f64,
    pub alpha: f64,
}

/// Actor, critics, target critics, temperature and their optimizers.
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    config: AgentConfig,
    gamma: f64,
    target_entropy: f64,
    actor: Trainable,
    critics: Vec<Trainable>,
    targets: Vec<Mlp>,
    log_alpha: f64,
    alpha_opt: AdamState,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(config: AgentConfig, state_dim: usize, action_dim: usize, gamma: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(seed);
        let mut next_seed = || rand::Rng::random::<u64>(&mut init);
        let actor = Trainable::new(
            actor_spec(state_dim, &config.hidden, action_dim),
            next_seed(),
            AdamConfig::with_lr(config.actor_lr),
        )?;
        let critics = (0..config.ensemble_size)
            .map(|_| {
                Trainable::new(
                    critic_spec(state_dim, action_dim, &config.hidden, config.critic_layer_norm),
                    next_seed(),
                    AdamConfig::with_lr(config.critic_lr),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let targets = critics.iter().map(|c| c.net.clone()).collect();
        let rng = ChaCha8Rng::seed_from_u64(next_seed());
        Ok(Self {
            gamma,
            target_entropy: -(action_dim as f64) / 2.0,
            actor,
            critics,
            targets,
            log_alpha: config.init_temperature.ln(),
            alpha_opt: AdamState::new(AdamConfig::with_lr(config.temperature_lr), 1),
            rng,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor.net
    }

    /// Replaces the policy network (e.g. with a pre-trained one).
    pub fn actor_trainable_mut(&mut self) -> &mut Trainable {
        &mut self.actor
    }

    pub fn critics(&self) -> impl Iterator<Item = &Mlp> {
        self.critics.iter().map(|c| &c.net)
    }

    pub fn targets(&self) -> &[Mlp] {
        &self.targets
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn target_entropy(&self) -> f64 {
        self.target_entropy
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Stochastic action for data collection.
    pub fn act(&mut self, state: &[f64]) -> Result<Vec<f64>> {
        let (a, _, _) = sample_batch(&self.actor.net, &Matrix::row_vector(state), &mut self.rng)?;
        Ok(a.into_vec())
    }

    /// `tanh(μ(s))`, used for evaluation.
    pub fn act_deterministic(&self, state: &[f64]) -> Result<Vec<f64>> {
        actor::deterministic(&self.actor.net, state)
    }

    /// Every online critic's estimate at `(s, a)`.
    pub fn q_values(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let x: Vec<f64> = state.iter().chain(action).copied().collect();
        self.critics.iter().map(|c| Ok(c.net.forward(&x)?[0])).collect()
    }

    /// One regression step of every critic towards the subset-min target,
    /// followed by a Polyak update of the targets.
    pub fn critic_update(&mut self, batch: &LabeledBatch) -> Result<CriticStats> {
        let n = batch.len();
        let (next_a, next_logp, _) = sample_batch(&self.actor.net, &batch.next_states, &mut self.rng)?;
        let subsets = draw_subsets(n, self.targets.len(), self.config.subset_size, &mut self.rng);
        let next_q = subset_min(&self.targets, &Matrix::hstack(&batch.next_states, &next_a)?, &subsets)?;
        let entropy_alpha = self.config.entropy_backups.then(|| self.alpha());
        let y = td_targets(
            &batch.rewards,
            &batch.terminals,
            &next_q,
            &next_logp,
            self.gamma,
            entropy_alpha,
        );
        let x = Matrix::hstack(&batch.states, &batch.actions)?;
        let nets: Vec<Mlp> = self.critics.iter().map(|c| c.net.clone()).collect();
        let (loss, grads) = critic_loss(&nets, &x, &y)?;
        if !loss.is_finite() {
            return Err(Error::non_finite("critic loss"));
        }
        for (c, g) in self.critics.iter_mut().zip(&grads) {
            c.apply(g)?;
        }
        let tau = self.config.polyak;
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.polyak_toward(&c.net, tau);
        }
        Ok(CriticStats {
            loss,
            mean_target: y.iter().sum::<f64>() / n.max(1) as f64,
        })
    }

    /// One actor step (optionally with a BC term on `bc` rows) and one
    /// temperature step.
    pub fn actor_update(&mut self, states: &Matrix, bc: Option<(&Matrix, &Matrix)>, bc_coef: f64) -> Result<ActorStats> {
        let n = states.rows();
        let dim = self.actor.net.output_dim() / 2;
        let mut noise = Matrix::zeros(n, dim);
        for v in noise.as_mut_slice() {
            *v = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut self.rng);
        }
        let subsets = draw_subsets(n, self.critics.len(), self.config.subset_size, &mut self.rng);
        let nets: Vec<Mlp> = self.critics.iter().map(|c| c.net.clone()).collect();
        let alpha = self.alpha();
        let obj = ActorObjective {
            critics: &nets,
            subsets: &subsets,
            alpha,
            bc: bc.map(|(s, a)| (s, a, bc_coef)),
        };
        let out = actor_loss(&self.actor.net, states, &noise, &obj)?;
        if !out.loss.is_finite() {
            return Err(Error::non_finite("actor loss"));
        }
        self.actor.apply(&out.grads)?;
        let (t_loss, t_grad) = temperature_loss(self.log_alpha, out.mean_log_prob, self.target_entropy);
        if !t_loss.is_finite() {
            return Err(Error::non_finite("temperature loss"));
        }
        let mut p = [self.log_alpha];
        self.alpha_opt.step(&mut p, &[t_grad])?;
        self.log_alpha = p[0];
        Ok(ActorStats {
            loss: out.loss,
            entropy: -out.mean_log_prob,
            alpha,
        })
    }

    /// Named parameter and optimizer tensors, for checkpoints.
    pub fn tensors(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        let mut push = |name: String, t: &Trainable| {
            out.push((format!("{name}.params"), t.net.params().to_vec()));
            out.push((format!("{name}.adam.m"), t.opt.m.clone()));
            out.push((format!("{name}.adam.v"), t.opt.v.clone()));
            out.push((format!("{name}.adam.step"), vec![t.opt.step as f64]));
        };
        push("actor".into(), &self.actor);
        for (k, c) in self.critics.iter().enumerate() {
            push(format!("critic.{k}"), c);
        }
        for (k, t) in self.targets.iter().enumerate() {
            out.push((format!("target.{k}.params"), t.params().to_vec()));
        }
        out.push(("temperature.log_alpha".into(), vec![self.log_alpha]));
        out.push(("temperature.adam.m".into(), self.alpha_opt.m.clone()));
        out.push(("temperature.adam.v".into(), self.alpha_opt.v.clone()));
        out.push(("temperature.adam.step".into(), vec![self.alpha_opt.step as f64]));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> AgentConfig {
        AgentConfig {
            hidden: vec![8, 8],
            ensemble_size: 3,
            subset_size: 2,
            utd: 1,
            ..Default::default()
        }
    }

    fn batch() -> LabeledBatch {
        let rows: Vec<Transition> = (0..8)
            .map(|i| {
                let x = i as f64 / 8.0;
                Transition::online(vec![x, -x], vec![0.1, -0.2], vec![x + 0.1, -x], -1.0, i == 7, 0)
            })
            .collect();
        let refs: Vec<&Transition> = rows.iter().collect();
        let r = rows.iter().map(|t| t.reward.unwrap()).collect();
        let d = rows.iter().map(|t| t.terminal.unwrap() as u8 as f64).collect();
        LabeledBatch::new(&refs, r, d).unwrap()
    }

    #[test]
    fn zero_learning_rates_leave_parameters_unchanged() {
        let cfg = AgentConfig {
            actor_lr: 0.0,
            critic_lr: 0.0,
            temperature_lr: 0.0,
            ..tiny()
        };
        let mut agent = Agent::new(cfg, 2, 2, 0.99, 1).unwrap();
        let before = agent.clone();
        let b = batch();
        agent.critic_update(&b).unwrap();
        agent.actor_update(&b.states, None, 0.0).unwrap();
        assert_eq!(agent.actor(), before.actor());
        assert!(agent.critics().zip(before.critics()).all(|(a, b)| a == b));
        assert_eq!(agent.alpha(), before.alpha());
    }

    #[test]
    fn targets_track_an_independent_polyak_shadow() {
        let mut agent = Agent::new(tiny(), 2, 2, 0.99, 2).unwrap();
        let mut shadow: Vec<Vec<f64>> = agent.targets().iter().map(|t| t.params().to_vec()).collect();
        let b = batch();
        for _ in 0..20 {
            agent.critic_update(&b).unwrap();
            for (s, c) in shadow.iter_mut().zip(agent.critics()) {
                for (x, y) in s.iter_mut().zip(c.params()) {
                    *x = (1.0 - 0.005) * *x + 0.005 * y;
                }
            }
        }
        for (s, t) in shadow.iter().zip(agent.targets()) {
            for (x, y) in s.iter().zip(t.params()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn start_training_scales_with_budget() {
        let cfg = AgentConfig::default();
        assert_eq!(cfg.start_training_for(300_000), 5000);
        assert_eq!(cfg.start_training_for(60_000), 1000);
        assert_eq!(cfg.start_training_for(10_000), 500);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(AgentConfig { subset_size: 4, ..tiny() }.validate().is_err());
        assert!(AgentConfig { utd: 0, ..tiny() }.validate().is_err());
        assert!(AgentConfig { polyak: 0.0, ..tiny() }.validate().is_err());
    }
}
