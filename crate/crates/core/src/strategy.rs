//! The method and its comparisons, as choices of offline label source,
//! online reward transform, actor regularizer and roll-in policy.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::actor::bc_loss;
use crate::error::{Error, Result};
use crate::labeler::{Label, UcbLabeler};
use crate::mdp::{Environment, EpisodeStats, ReplayBuffer, Transition};
use crate::nn::{Matrix, Mlp, Trainable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyKind {
    Ours,
    OursOnlineRnd,
    Naive,
    NaiveOnlineRnd,
    NaiveBc,
    MinR,
    Online,
    OnlineRnd,
    BcJsrl,
    Oracle,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 10] = [
        StrategyKind::Ours,
        StrategyKind::OursOnlineRnd,
        StrategyKind::Naive,
        StrategyKind::NaiveOnlineRnd,
        StrategyKind::NaiveBc,
        StrategyKind::MinR,
        StrategyKind::Online,
        StrategyKind::OnlineRnd,
        StrategyKind::BcJsrl,
        StrategyKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Ours => "Ours",
            StrategyKind::OursOnlineRnd => "Ours+OnlineRND",
            StrategyKind::Naive => "Naive",
            StrategyKind::NaiveOnlineRnd => "Naive+OnlineRND",
            StrategyKind::NaiveBc => "Naive+BC",
            StrategyKind::MinR => "MinR",
            StrategyKind::Online => "Online",
            StrategyKind::OnlineRnd => "Online+RND",
            StrategyKind::BcJsrl => "BC+JSRL",
            StrategyKind::Oracle => "Oracle",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = StrategyKind::ALL.iter().map(|k| k.name()).collect();
                Error::config(format!("unknown strategy '{s}' (expected one of {})", known.join(", ")))
            })
    }
}

impl TryFrom<String> for StrategyKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategyKind> for String {
    fn from(k: StrategyKind) -> String {
        k.name().to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OfflineSource {
    /// Reward model plus novelty bonus.
    Ucb,
    /// Reward model alone.
    RewardModel,
    /// The task's minimum reward.
    MinReward,
    GroundTruth,
    /// Prior data is not used for TD learning.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OnlineTransform {
    Identity,
    /// Adds the current novelty bonus to the observed reward.
    RndBonus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsrlParams {
    /// Probability of starting an episode with the guide policy.
    pub beta: f64,
    /// Behaviour-cloning steps used to train the guide.
    pub bc_steps: usize,
}

impl Default for JsrlParams {
    fn default() -> Self {
        Self {
            beta: 0.9,
            bc_steps: 5000,
        }
    }
}

pub const DEFAULT_BC_COEF: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub offline: OfflineSource,
    pub online: OnlineTransform,
    pub bc_coef: f64,
    pub jsrl: Option<JsrlParams>,
}

impl Strategy {
    pub fn new(kind: StrategyKind) -> Self {
        use OfflineSource as Off;
        use OnlineTransform as On;
        let (offline, online) = match kind {
            StrategyKind::Ours => (Off::Ucb, On::Identity),
            StrategyKind::OursOnlineRnd => (Off::Ucb, On::RndBonus),
            StrategyKind::Naive | StrategyKind::NaiveBc => (Off::RewardModel, On::Identity),
            StrategyKind::NaiveOnlineRnd => (Off::RewardModel, On::RndBonus),
            StrategyKind::MinR => (Off::MinReward, On::Identity),
            StrategyKind::Online | StrategyKind::BcJsrl => (Off::None, On::Identity),
            StrategyKind::OnlineRnd => (Off::None, On::RndBonus),
            StrategyKind::Oracle => (Off::GroundTruth, On::Identity),
        };
        Self {
            kind,
            offline,
            online,
            bc_coef: if kind == StrategyKind::NaiveBc { DEFAULT_BC_COEF } else { 0.0 },
            jsrl: (kind == StrategyKind::BcJsrl).then(JsrlParams::default),
        }
    }

    pub fn uses_offline_td(&self) -> bool {
        self.offline != OfflineSource::None
    }

    pub fn needs_reward_model(&self) -> bool {
        matches!(self.offline, OfflineSource::Ucb | OfflineSource::RewardModel)
    }

    pub fn needs_termination_model(&self) -> bool {
        matches!(
            self.offline,
            OfflineSource::Ucb | OfflineSource::RewardModel | OfflineSource::MinReward
        )
    }

    pub fn needs_rnd(&self) -> bool {
        self.offline == OfflineSource::Ucb || self.online == OnlineTransform::RndBonus
    }

    pub fn needs_labeler(&self) -> bool {
        self.needs_reward_model() || self.needs_termination_model() || self.needs_rnd()
    }

    /// `(online, offline)` rows per gradient step. Strategies that do not
    /// learn from prior data put the whole batch online.
    pub fn batch_split(&self, online: usize, offline: usize) -> (usize, usize) {
        if self.uses_offline_td() {
            (online, offline)
        } else {
            (online + offline, 0)
        }
    }
}

fn labeler_for<'a>(strategy: &Strategy, labeler: Option<&'a UcbLabeler>) -> Result<&'a UcbLabeler> {
    labeler.ok_or_else(|| Error::usage(format!("strategy {} needs a labeler", strategy.kind)))
}

/// Reward and termination labels for prior rows under `strategy`.
pub fn label_offline<E: Environment + ?Sized>(
    strategy: &Strategy,
    labeler: Option<&UcbLabeler>,
    env: &E,
    rows: &[&Transition],
) -> Result<Vec<Label>> {
    match strategy.offline {
        OfflineSource::Ucb => labeler_for(strategy, labeler)?.label_batch(rows),
        OfflineSource::RewardModel => {
            let lab = labeler_for(strategy, labeler)?;
            let r = lab.reward_batch(rows)?;
            let t = lab.termination_batch(rows)?;
            Ok(r.into_iter()
                .zip(t)
                .map(|(reward, terminal)| Label { reward, terminal })
                .collect())
        }
        OfflineSource::MinReward => {
            let r_min = env.spec().reward.min_reward();
            Ok(labeler_for(strategy, labeler)?
                .termination_batch(rows)?
                .into_iter()
                .map(|terminal| Label {
                    reward: r_min,
                    terminal,
                })
                .collect())
        }
        OfflineSource::GroundTruth => Ok(rows
            .iter()
            .map(|t| {
                let (reward, done) = env.ground_truth(&t.state, &t.action, &t.next_state);
                Label {
                    reward,
                    terminal: if done { 1.0 } else { 0.0 },
                }
            })
            .collect()),
        OfflineSource::None => Err(Error::usage(format!(
            "strategy {} does not label prior data",
            strategy.kind
        ))),
    }
}

/// Training-time rewards for online rows; the bonus, when used, reflects
/// the labeler's current parameters.
pub fn transform_online_rewards(
    strategy: &Strategy,
    labeler: Option<&UcbLabeler>,
    rows: &[&Transition],
) -> Result<Vec<f64>> {
    let rewards: Vec<f64> = rows
        .iter()
        .map(|t| t.reward.ok_or_else(|| Error::usage("online transition without a reward")))
        .collect::<Result<_>>()?;
    match strategy.online {
        OnlineTransform::Identity => Ok(rewards),
        OnlineTransform::RndBonus => {
            let bonus = labeler_for(strategy, labeler)?.bonus_batch(rows)?;
            Ok(rewards.iter().zip(bonus).map(|(r, b)| r + b).collect())
        }
    }
}

/// Guide-policy state for one episode: the guide acts first and hands
/// over for good with probability `1 − γ` after each of its steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RollIn {
    guiding: bool,
    guide_steps: usize,
}

impl RollIn {
    pub fn begin(beta: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            guiding: rng.random_bool(beta.clamp(0.0, 1.0)),
            guide_steps: 0,
        }
    }

    pub fn guide_acts(&self) -> bool {
        self.guiding
    }

    /// Records one guide step and decides whether to switch.
    pub fn after_guide_step(&mut self, gamma: f64, rng: &mut ChaCha8Rng) {
        self.guide_steps += 1;
        if rng.random_bool((1.0 - gamma).clamp(0.0, 1.0)) {
            self.guiding = false;
        }
    }

    pub fn guide_steps(&self) -> usize {
        self.guide_steps
    }
}

/// Runs one episode, letting `guide` act during the roll-in and
/// `explore` afterwards. Returns the episode statistics and the roll-in length.
#[allow(clippy::too_many_arguments)]
pub fn jsrl_rollin<E, G, P>(
    env: &mut E,
    mut guide: G,
    mut explore: P,
    beta: f64,
    gamma: f64,
    buffer: &mut ReplayBuffer,
    env_rng: &mut ChaCha8Rng,
    rng: &mut ChaCha8Rng,
) -> Result<(EpisodeStats, usize)>
where
    E: Environment + ?Sized,
    G: FnMut(&[f64]) -> Vec<f64>,
    P: FnMut(&[f64]) -> Vec<f64>,
{
    let mut roll = RollIn::begin(beta, rng);
    let stats = crate::mdp::rollout(
        env,
        |s| {
            if roll.guide_acts() {
                roll.after_guide_step(gamma, rng);
                guide(s)
            } else {
                explore(s)
            }
        },
        buffer,
        env_rng,
    )?;
    Ok((stats, roll.guide_steps()))
}

/// Behaviour-clones a guide policy on prior `(s, a)` pairs.
pub fn train_guide(
    mut actor: Trainable,
    prior: &mut ReplayBuffer,
    steps: usize,
    batch: usize,
) -> Result<Mlp> {
    if prior.is_empty() {
        return Err(Error::config("guide-policy training needs prior data"));
    }
    for step in 0..steps {
        let rows = prior.sample(batch)?;
        let sd = rows[0].state.len();
        let ad = rows[0].action.len();
        let s = Matrix::from_rows(sd, rows.iter().map(|t| t.state.as_slice()))?;
        let a = Matrix::from_rows(ad, rows.iter().map(|t| t.action.as_slice()))?;
        let (loss, grads) = bc_loss(&actor.net, &s, &a)?;
        if !loss.is_finite() {
            return Err(Error::non_finite("guide behaviour-cloning loss").at_step(step as u64));
        }
        actor.apply(&grads)?;
    }
    Ok(actor.net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{MazeLayout, PointMaze, PointMazeConfig, Task, UMAZE};
    use crate::labeler::LabelerConfig;
    use rand::SeedableRng;

    fn umaze() -> Task {
        Task::PointMaze(PointMaze::new(MazeLayout::parse(UMAZE).unwrap(), PointMazeConfig::default()).unwrap())
    }

    fn labeler() -> UcbLabeler {
        let cfg = LabelerConfig {
            hidden: vec![8],
            features: 8,
            ..Default::default()
        };
        UcbLabeler::new(cfg, 2, 2, 3).unwrap()
    }

    fn prior_rows() -> Vec<Transition> {
        (0..20)
            .map(|i| {
                let x = 1.1 + 0.1 * i as f64;
                Transition::prior(vec![x, 3.5], vec![0.5, 0.0], vec![x + 0.1, 3.5], 0)
            })
            .collect()
    }

    #[test]
    fn names_round_trip_and_unknown_names_fail() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("ours".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn registry_matches_the_comparison_table() {
        for k in StrategyKind::ALL {
            let s = Strategy::new(k);
            let ucb = matches!(k, StrategyKind::Ours | StrategyKind::OursOnlineRnd);
            assert_eq!(s.offline == OfflineSource::Ucb, ucb);
            assert_eq!(s.offline == OfflineSource::GroundTruth, k == StrategyKind::Oracle);
        }
        for k in [StrategyKind::Online, StrategyKind::OnlineRnd] {
            let s = Strategy::new(k);
            assert_eq!(s.offline, OfflineSource::None);
            assert_eq!(s.batch_split(128, 128), (256, 0));
        }
        assert_eq!(Strategy::new(StrategyKind::Ours).batch_split(128, 128), (128, 128));
        assert_eq!(Strategy::new(StrategyKind::NaiveBc).bc_coef, 0.01);
        assert_eq!(
            Strategy::new(StrategyKind::BcJsrl).jsrl,
            Some(JsrlParams {
                beta: 0.9,
                bc_steps: 5000
            })
        );
    }

    #[test]
    fn min_reward_and_oracle_labels() {
        let env = umaze();
        let lab = labeler();
        let rows = prior_rows();
        let refs: Vec<&Transition> = rows.iter().collect();
        let minr = label_offline(&Strategy::new(StrategyKind::MinR), Some(&lab), &env, &refs).unwrap();
        assert!(minr.iter().all(|l| l.reward == -1.0));
        let g = env.goal_position().unwrap();
        let into_goal = Transition::prior(vec![g[0] + 0.6, g[1]], vec![-0.5, 0.0], vec![g[0] + 0.1, g[1]], 0);
        let oracle = label_offline(&Strategy::new(StrategyKind::Oracle), None, &env, &[&into_goal]).unwrap();
        assert_eq!(oracle[0], Label { reward: 0.0, terminal: 1.0 });
        assert!(label_offline(&Strategy::new(StrategyKind::Online), None, &env, &refs).is_err());
    }

    #[test]
    fn naive_labels_are_ours_minus_the_bonus() {
        let env = umaze();
        let lab = labeler();
        let rows = prior_rows();
        let refs: Vec<&Transition> = rows.iter().collect();
        let ours = label_offline(&Strategy::new(StrategyKind::Ours), Some(&lab), &env, &refs).unwrap();
        let naive = label_offline(&Strategy::new(StrategyKind::Naive), Some(&lab), &env, &refs).unwrap();
        let bonus = lab.bonus_batch(&refs).unwrap();
        for ((o, n), b) in ours.iter().zip(&naive).zip(&bonus) {
            assert!((o.reward - b - n.reward).abs() < 1e-12);
            assert!(o.reward >= n.reward);
            assert_eq!(o.terminal, n.terminal);
        }
    }

    #[test]
    fn online_bonus_matches_the_offline_bonus_functional() {
        let mut lab = labeler();
        let rows: Vec<Transition> = prior_rows()
            .into_iter()
            .map(|t| Transition::online(t.state, t.action, t.next_state, -1.0, false, 0))
            .collect();
        let refs: Vec<&Transition> = rows.iter().collect();
        let plain = transform_online_rewards(&Strategy::new(StrategyKind::Ours), Some(&lab), &refs).unwrap();
        assert!(plain.iter().all(|r| *r == -1.0));
        let s = Strategy::new(StrategyKind::OursOnlineRnd);
        let bonus = lab.bonus_batch(&refs).unwrap();
        let boosted = transform_online_rewards(&s, Some(&lab), &refs).unwrap();
        for ((b, r), p) in bonus.iter().zip(&boosted).zip(&plain) {
            assert!((r - p - b).abs() < 1e-12);
        }
        lab.sync_predictor_to_target();
        let synced = transform_online_rewards(&Strategy::new(StrategyKind::OnlineRnd), Some(&lab), &refs).unwrap();
        assert_eq!(synced, plain);
    }

    #[test]
    fn beta_zero_never_uses_the_guide() {
        let mut env = umaze();
        let mut buf = ReplayBuffer::new(None, 0);
        let mut env_rng = ChaCha8Rng::seed_from_u64(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (_, k) = jsrl_rollin(
                &mut env,
                |_| panic!("guide must not act"),
                |_| vec![0.0, 0.0],
                0.0,
                0.99,
                &mut buf,
                &mut env_rng,
                &mut rng,
            )
            .unwrap();
            assert_eq!(k, 0);
        }
    }

    #[test]
    fn rollin_length_is_geometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 20_000;
        let total: usize = (0..trials)
            .map(|_| {
                let mut r = RollIn::begin(1.0, &mut rng);
                while r.guide_acts() {
                    r.after_guide_step(0.9, &mut rng);
                }
                r.guide_steps()
            })
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 10.0).abs() < 0.3, "{mean}");
    }
}
