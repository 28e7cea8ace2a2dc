//! Optimistic reward labels for prior data: a learned reward, an RND
//! novelty bonus and a learned termination probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::mdp::{Source, Transition};
use crate::nn::{log_sigmoid, sigmoid, AdamConfig, Head, Matrix, Mlp, MlpSpec, Trainable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelerConfig {
    pub hidden: Vec<usize>,
    /// RND feature size `L`.
    pub features: usize,
    /// Multiplier `c` on the novelty bonus.
    pub bonus_scale: f64,
    /// Environment steps collected before any labeler network trains.
    pub start_steps: u64,
    /// Reward-model reset period in environment steps; 0 disables resets.
    pub reset_period: u64,
    /// Feed RND with the state only instead of `(s, a)`.
    pub state_only: bool,
    /// Width of a fixed random sinusoidal embedding of the RND input;
    /// 0 feeds the raw input.
    pub rnd_embedding: usize,
    /// Standard deviation of the embedding frequencies.
    pub rnd_embedding_scale: f64,
    pub lr: f64,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            features: 256,
            bonus_scale: 1.0,
            start_steps: 1000,
            reset_period: 0,
            state_only: false,
            rnd_embedding: 0,
            rnd_embedding_scale: 1.0,
            lr: 3e-4,
        }
    }
}

impl LabelerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.features == 0 {
            return Err(Error::config("labeler.features must be positive"));
        }
        if !(self.bonus_scale >= 0.0 && self.bonus_scale.is_finite()) {
            return Err(Error::config("labeler.bonus_scale must be a finite value >= 0"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("labeler.lr must be positive"));
        }
        if !(self.rnd_embedding_scale > 0.0 && self.rnd_embedding_scale.is_finite()) {
            return Err(Error::config("labeler.rnd_embedding_scale must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("labeler.hidden widths must be positive"));
        }
        Ok(())
    }
}

/// Reward and termination estimate attached to one transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Label {
    pub reward: f64,
    /// Termination probability in `[0, 1]`.
    pub terminal: f64,
}

/// Stacks `[s, a]` (or just `s`) rows into a network input.
pub fn design_matrix(rows: &[&Transition], state_only: bool) -> Matrix {
    let Some(first) = rows.first() else {
        return Matrix::zeros(0, 0);
    };
    let cols = first.state.len() + if state_only { 0 } else { first.action.len() };
    let mut data = Vec::with_capacity(rows.len() * cols);
    for t in rows {
        data.extend_from_slice(&t.state);
        if !state_only {
            data.extend_from_slice(&t.action);
        }
    }
    Matrix::from_vec(rows.len(), cols, data).expect("rows share dimensions")
}

/// Mean squared error of a scalar-output net against `targets`, with the
/// parameter gradient.
pub fn reward_loss(net: &Mlp, x: &Matrix, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_dim("reward targets", x.rows(), targets.len())?;
    let cache = net.forward_cached(x)?;
    let n = targets.len().max(1) as f64;
    let mut grad = Matrix::zeros(x.rows(), 1);
    let mut loss = 0.0;
    for (i, y) in targets.iter().enumerate() {
        let err = cache.output().get(i, 0) - y;
        loss += err * err / n;
        grad.set(i, 0, 2.0 * err / n);
    }
    Ok((loss, net.backward(&cache, &grad)?.params))
}

/// RND distillation loss `mean_i (1/L)‖f_φ(x_i) − f̄(x_i)‖²` and its
/// gradient with respect to the predictor.
pub fn rnd_loss(predictor: &Mlp, target: &Mlp, x: &Matrix) -> Result<(f64, Vec<f64>)> {
    let cache = predictor.forward_cached(x)?;
    let fixed = target.forward_batch(x)?;
    let l = predictor.output_dim() as f64;
    let n = x.rows().max(1) as f64;
    let mut grad = Matrix::zeros(x.rows(), predictor.output_dim());
    let mut loss = 0.0;
    for ((g, p), f) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(cache.output().as_slice())
        .zip(fixed.as_slice())
    {
        let d = p - f;
        loss += d * d / (l * n);
        *g = 2.0 * d / (l * n);
    }
    Ok((loss, predictor.backward(&cache, &grad)?.params))
}

/// Binary cross-entropy on termination logits,
/// `−mean[T·logσ(z) + (1 − T)·logσ(−z)]`, and its parameter gradient.
pub fn termination_loss(net: &Mlp, x: &Matrix, flags: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_dim("termination flags", x.rows(), flags.len())?;
    let cache = net.forward_cached(x)?;
    let n = flags.len().max(1) as f64;
    let mut grad = Matrix::zeros(x.rows(), 1);
    let mut loss = 0.0;
    for (i, t) in flags.iter().enumerate() {
        let z = cache.output().get(i, 0);
        loss -= (t * log_sigmoid(z) + (1.0 - t) * log_sigmoid(-z)) / n;
        grad.set(i, 0, (sigmoid(z) - t) / n);
    }
    Ok((loss, net.backward(&cache, &grad)?.params))
}

fn online_targets<F>(batch: &[&Transition], what: &str, mut pick: F) -> Result<Vec<f64>>
where
    F: FnMut(&Transition) -> Option<f64>,
{
    batch
        .iter()
        .map(|t| {
            if t.source != Source::Online {
                return Err(Error::usage(format!("{what} model must never train on prior data")));
            }
            pick(t).ok_or_else(|| Error::usage(format!("online transition without a {what} label")))
        })
        .collect()
}

fn check_loss(loss: f64, what: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::non_finite(what))
    }
}

/// Reward model, RND predictor/target pair and termination model.
#[derive(Clone, Debug, PartialEq)]
pub struct UcbLabeler {
    config: LabelerConfig,
    reward: Trainable,
    rnd: Trainable,
    rnd_target: Mlp,
    termination: Trainable,
    /// Frequencies (`in x width`) and phases of the RND input embedding.
    embedding: Option<(Vec<f64>, Vec<f64>)>,
    /// Draws the seeds of re-initialized reward models.
    rng: ChaCha8Rng,
}

impl UcbLabeler {
    pub fn new(config: LabelerConfig, state_dim: usize, action_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adam = AdamConfig::with_lr(config.lr);
        let sa = state_dim + action_dim;
        let raw_in = if config.state_only { state_dim } else { sa };
        let embedding = (config.rnd_embedding > 0).then(|| {
            let m = config.rnd_embedding;
            let mut draw = ChaCha8Rng::seed_from_u64(rng.random());
            let freq = (0..raw_in * m)
                .map(|_| config.rnd_embedding_scale * draw.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let phase = (0..m).map(|_| draw.random_range(0.0..std::f64::consts::TAU)).collect();
            (freq, phase)
        });
        let rnd_in = if config.rnd_embedding > 0 { config.rnd_embedding } else { raw_in };
        let reward = Trainable::new(MlpSpec::new(sa, &config.hidden, 1), rng.random(), adam)?;
        let rnd = Trainable::new(MlpSpec::new(rnd_in, &config.hidden, config.features), rng.random(), adam)?;
        let rnd_target = Mlp::new(MlpSpec::new(rnd_in, &config.hidden, config.features), rng.random())?;
        let termination = Trainable::new(
            MlpSpec::new(sa, &config.hidden, 1).with_head(Head::Sigmoid),
            rng.random(),
            adam,
        )?;
        Ok(Self {
            config,
            reward,
            rnd,
            rnd_target,
            termination,
            embedding,
            rng,
        })
    }

    /// RND network input for `rows`: `[s, a]` or `s`, optionally embedded
    /// as `sin(xW + b)`.
    pub fn rnd_input(&self, rows: &[&Transition]) -> Matrix {
        let x = design_matrix(rows, self.config.state_only);
        let Some((freq, phase)) = &self.embedding else {
            return x;
        };
        let m = phase.len();
        let mut out = Matrix::zeros(x.rows(), m);
        for r in 0..x.rows() {
            let o = out.row_mut(r);
            o.copy_from_slice(phase);
            for (xv, w) in x.row(r).iter().zip(freq.chunks_exact(m)) {
                for (ov, wv) in o.iter_mut().zip(w) {
                    *ov += xv * wv;
                }
            }
            o.iter_mut().for_each(|v| *v = v.sin());
        }
        out
    }

    pub fn config(&self) -> &LabelerConfig {
        &self.config
    }

    /// Bonus multiplier `c`; setting it to 0 turns UCB labels into plain
    /// reward-model labels.
    pub fn set_bonus_scale(&mut self, c: f64) {
        self.config.bonus_scale = c;
    }

    pub fn reward_net(&self) -> &Mlp {
        &self.reward.net
    }

    pub fn rnd_predictor(&self) -> &Mlp {
        &self.rnd.net
    }

    pub fn rnd_target(&self) -> &Mlp {
        &self.rnd_target
    }

    pub fn termination_net(&self) -> &Mlp {
        &self.termination.net
    }

    /// Makes the predictor an exact copy of the target (zero bonus everywhere).
    pub fn sync_predictor_to_target(&mut self) {
        self.rnd.net = self.rnd_target.clone();
        self.rnd.opt.reset();
    }

    pub fn is_training(&self, env_step: u64) -> bool {
        env_step >= self.config.start_steps
    }

    /// One optimizer step of the predictor on a single new transition.
    pub fn rnd_update(&mut self, t: &Transition) -> Result<f64> {
        self.rnd_update_batch(&[t])
    }

    pub fn rnd_update_batch(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.iter().any(|t| t.source != Source::Online) {
            return Err(Error::usage("RND predictor must never train on prior data"));
        }
        let x = self.rnd_input(batch);
        let (loss, grads) = rnd_loss(&self.rnd.net, &self.rnd_target, &x)?;
        check_loss(loss, "rnd loss")?;
        self.rnd.apply(&grads)?;
        Ok(loss)
    }

    /// One optimizer step of the reward model on online rows.
    pub fn reward_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let targets = online_targets(batch, "reward", |t| t.reward)?;
        let (loss, grads) = reward_loss(&self.reward.net, &design_matrix(batch, false), &targets)?;
        check_loss(loss, "reward loss")?;
        self.reward.apply(&grads)?;
        Ok(loss)
    }

    /// One optimizer step of the termination model on online rows.
    pub fn termination_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let flags = online_targets(batch, "termination", |t| {
            t.terminal.map(|f| if f { 1.0 } else { 0.0 })
        })?;
        let (loss, grads) =
            termination_loss(&self.termination.net, &design_matrix(batch, false), &flags)?;
        check_loss(loss, "termination loss")?;
        self.termination.apply(&grads)?;
        Ok(loss)
    }

    /// `(c/L)‖f_φ − f̄‖²` for each row.
    pub fn bonus_batch(&self, rows: &[&Transition]) -> Result<Vec<f64>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.rnd_input(rows);
        let p = self.rnd.net.forward_batch(&x)?;
        let f = self.rnd_target.forward_batch(&x)?;
        let scale = self.config.bonus_scale / self.config.features as f64;
        Ok((0..x.rows())
            .map(|i| {
                let sq: f64 = p.row(i).iter().zip(f.row(i)).map(|(a, b)| (a - b) * (a - b)).sum();
                scale * sq
            })
            .collect())
    }

    pub fn bonus(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let t = Transition::prior(state.to_vec(), action.to_vec(), state.to_vec(), 0);
        Ok(self.bonus_batch(&[&t])?[0])
    }

    /// Reward-model prediction for each row.
    pub fn reward_batch(&self, rows: &[&Transition]) -> Result<Vec<f64>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.reward.net.forward_batch(&design_matrix(rows, false))?.into_vec())
    }

    /// Termination probability for each row.
    pub fn termination_batch(&self, rows: &[&Transition]) -> Result<Vec<f64>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.termination.net.forward_batch(&design_matrix(rows, false))?.into_vec())
    }

    /// `r̂ = r_θ + bonus`, `T̂ = σ(logit)` for each row.
    pub fn label_batch(&self, rows: &[&Transition]) -> Result<Vec<Label>> {
        let r = self.reward_batch(rows)?;
        let t = self.termination_batch(rows)?;
        let b = if self.config.bonus_scale == 0.0 {
            vec![0.0; rows.len()]
        } else {
            self.bonus_batch(rows)?
        };
        Ok(r
            .into_iter()
            .zip(b)
            .zip(t)
            .map(|((r, b), t)| Label {
                reward: r + b,
                terminal: t,
            })
            .collect())
    }

    pub fn ucb_label(&self, state: &[f64], action: &[f64]) -> Result<Label> {
        let t = Transition::prior(state.to_vec(), action.to_vec(), state.to_vec(), 0);
        Ok(self.label_batch(&[&t])?[0])
    }

    /// Re-initializes the reward model and its optimizer when `env_step`
    /// is a positive multiple of the reset period. Returns whether it did.
    pub fn maybe_reset(&mut self, env_step: u64) -> Result<bool> {
        let period = self.config.reset_period;
        if period == 0 || env_step == 0 || env_step % period != 0 {
            return Ok(false);
        }
        let spec = self.reward.net.spec().clone();
        self.reward = Trainable::new(spec, self.rng.random(), AdamConfig::with_lr(self.config.lr))?;
        Ok(true)
    }

    /// Named parameter and optimizer tensors, for checkpoints.
    pub fn tensors(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for (name, t) in [
            ("reward", &self.reward),
            ("rnd", &self.rnd),
            ("termination", &self.termination),
        ] {
            out.push((format!("labeler.{name}.params"), t.net.params().to_vec()));
            out.push((format!("labeler.{name}.adam.m"), t.opt.m.clone()));
            out.push((format!("labeler.{name}.adam.v"), t.opt.v.clone()));
            out.push((format!("labeler.{name}.adam.step"), vec![t.opt.step as f64]));
        }
        out.push(("labeler.rnd_target.params".into(), self.rnd_target.params().to_vec()));
        if let Some((freq, phase)) = &self.embedding {
            out.push(("labeler.rnd_embedding.freq".into(), freq.clone()));
            out.push(("labeler.rnd_embedding.phase".into(), phase.clone()));
        }
        out
    }
}
