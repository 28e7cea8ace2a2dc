use std::f64::consts::{LN_2, PI};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_dim, Result};
use crate::mdp::clamp_action;
use crate::nn::{softplus, ForwardCache, Head, Matrix, Mlp, MlpSpec, LOG_STD_MAX, LOG_STD_MIN};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `log(1 − tanh²(u))`, stable for large `|u|`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

/// Network for a tanh-squashed diagonal Gaussian policy. The raw output
/// holds the means followed by the unclipped log-stds.
pub fn actor_spec(state_dim: usize, hidden: &[usize], action_dim: usize) -> MlpSpec {
    MlpSpec::new(state_dim, hidden, 2 * action_dim).with_head(Head::GaussianSplit)
}

/// Per-row Gaussian parameters read off a raw actor output.
struct Gaussian {
    mean: Matrix,
    log_std: Matrix,
    /// Whether each log-std lies strictly inside the clip range.
    unclipped: Vec<bool>,
}

impl Gaussian {
    fn from_raw(raw: &Matrix) -> Self {
        let dim = raw.cols() / 2;
        let mean = raw.columns(0, dim);
        let mut log_std = raw.columns(dim, dim);
        let mut unclipped = Vec::with_capacity(log_std.as_slice().len());
        for v in log_std.as_mut_slice() {
            unclipped.push(*v > LOG_STD_MIN && *v < LOG_STD_MAX);
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        Self {
            mean,
            log_std,
            unclipped,
        }
    }
}

/// Draws `a = tanh(μ + σ ε)` for every row of `states`, returning the
/// actions, their log-densities and the noise used.
pub fn sample_batch(actor: &Mlp, states: &Matrix, rng: &mut ChaCha8Rng) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let dim = actor.output_dim() / 2;
    let mut noise = Matrix::zeros(states.rows(), dim);
    for v in noise.as_mut_slice() {
        *v = StandardNormal.sample(rng);
    }
    let (actions, logp) = squash(actor, states, &noise)?;
    Ok((actions, logp, noise))
}

/// Reparameterized actions (kept strictly inside the open box) and
/// log-densities for fixed noise.
pub fn squash(actor: &Mlp, states: &Matrix, noise: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let raw = actor.forward_cached(states)?;
    let g = Gaussian::from_raw(raw.output());
    ensure_dim("actor noise", g.mean.as_slice().len(), noise.as_slice().len())?;
    let mut actions = Matrix::zeros(states.rows(), g.mean.cols());
    let mut logp = vec![0.0; states.rows()];
    for r in 0..states.rows() {
        for j in 0..g.mean.cols() {
            let (mu, ls, e) = (g.mean.get(r, j), g.log_std.get(r, j), noise.get(r, j));
            let u = mu + ls.exp() * e;
            actions.set(r, j, clamp_action(u.tanh()));
            logp[r] += -0.5 * e * e - ls - HALF_LN_2PI - log_one_minus_tanh_sq(u);
        }
    }
    Ok((actions, logp))
}

/// Log-density of given actions in `(−1, 1)`.
pub fn log_prob(actor: &Mlp, states: &Matrix, actions: &Matrix) -> Result<Vec<f64>> {
    Ok(bc_terms(actor, states, actions, false)?.0)
}

/// Row log-densities of `actions`, and (optionally) the gradient of
/// `−mean log π(a|s)` with respect to the raw actor output.
fn bc_terms(
    actor: &Mlp,
    states: &Matrix,
    actions: &Matrix,
    with_grad: bool,
) -> Result<(Vec<f64>, Matrix, ForwardCache)> {
    let cache = actor.forward_cached(states)?;
    let g = Gaussian::from_raw(cache.output());
    ensure_dim("actions", g.mean.cols(), actions.cols())?;
    let n = states.rows();
    let dim = g.mean.cols();
    let mut logp = vec![0.0; n];
    let mut grad = Matrix::zeros(if with_grad { n } else { 0 }, 2 * dim);
    for r in 0..n {
        for j in 0..dim {
            let a = clamp_action(actions.get(r, j));
            let u = a.atanh();
            let (mu, ls) = (g.mean.get(r, j), g.log_std.get(r, j));
            let sigma = ls.exp();
            let e = (u - mu) / sigma;
            logp[r] += -0.5 * e * e - ls - HALF_LN_2PI - (1.0 - a * a).ln();
            if with_grad {
                grad.set(r, j, -(e / sigma) / n as f64);
                let mask = if g.unclipped[r * dim + j] { 1.0 } else { 0.0 };
                grad.set(r, dim + j, -mask * (e * e - 1.0) / n as f64);
            }
        }
    }
    Ok((logp, grad, cache))
}

/// Behaviour-cloning loss `−mean log π(a|s)` and its parameter gradient.
pub fn bc_loss(actor: &Mlp, states: &Matrix, actions: &Matrix) -> Result<(f64, Vec<f64>)> {
    let (logp, grad, cache) = bc_terms(actor, states, actions, true)?;
    let loss = -logp.iter().sum::<f64>() / logp.len().max(1) as f64;
    Ok((loss, actor.backward(&cache, &grad)?.params))
}

/// Fixed ingredients of one actor objective evaluation.
pub struct ActorObjective<'a> {
    pub critics: &'a [Mlp],
    /// Critic indices whose minimum scores each row.
    pub subsets: &'a [Vec<usize>],
    pub alpha: f64,
    /// Offline `(states, actions)` and weight of the BC term.
    pub bc: Option<(&'a Matrix, &'a Matrix, f64)>,
}

#[derive(Clone, Debug)]
pub struct ActorLoss {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub mean_log_prob: f64,
}

/// `mean[α log π(a|s) − min_{k∈subset} Q_k(s, a)] + α_bc·BC`, with
/// `a = tanh(μ + σ ε)` for the given noise, and its gradient.
pub fn actor_loss(actor: &Mlp, states: &Matrix, noise: &Matrix, obj: &ActorObjective) -> Result<ActorLoss> {
    let n = states.rows();
    ensure_dim("actor subsets", n, obj.subsets.len())?;
    let cache = actor.forward_cached(states)?;
    let g = Gaussian::from_raw(cache.output());
    let dim = g.mean.cols();
    let state_dim = states.cols();

    let mut a = Matrix::zeros(n, dim);
    let mut logp = vec![0.0; n];
    for r in 0..n {
        for j in 0..dim {
            let (mu, ls, e) = (g.mean.get(r, j), g.log_std.get(r, j), noise.get(r, j));
            let uj = mu + ls.exp() * e;
            a.set(r, j, uj.tanh());
            logp[r] += -0.5 * e * e - ls - HALF_LN_2PI - log_one_minus_tanh_sq(uj);
        }
    }

    // Q at the sampled actions for every critic that appears in a subset.
    let sa = Matrix::hstack(states, &a)?;
    let mut used = vec![false; obj.critics.len()];
    obj.subsets.iter().flatten().for_each(|&k| used[k] = true);
    let caches: Vec<_> = obj
        .critics
        .iter()
        .zip(&used)
        .map(|(c, &u)| if u { c.forward_cached(&sa).map(Some) } else { Ok(None) })
        .collect::<Result<_>>()?;
    let mut chosen = vec![0usize; n];
    let mut q_min = vec![0.0; n];
    for r in 0..n {
        let (k, q) = obj.subsets[r]
            .iter()
            .map(|&k| (k, caches[k].as_ref().expect("used critic").output().get(r, 0)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("subsets are non-empty");
        chosen[r] = k;
        q_min[r] = q;
    }
    // dQ_min/da per row.
    let mut dq_da = Matrix::zeros(n, dim);
    for (k, c) in caches.iter().enumerate() {
        let Some(c) = c else { continue };
        let mut seed = Matrix::zeros(n, 1);
        let mut any = false;
        for r in 0..n {
            if chosen[r] == k {
                seed.set(r, 0, 1.0);
                any = true;
            }
        }
        if !any {
            continue;
        }
        let gin = obj.critics[k].backward(c, &seed)?.input;
        for r in 0..n {
            if chosen[r] == k {
                for j in 0..dim {
                    dq_da.set(r, j, gin.get(r, state_dim + j));
                }
            }
        }
    }

    let nf = n.max(1) as f64;
    let alpha = obj.alpha;
    let mut grad_raw = Matrix::zeros(n, 2 * dim);
    for r in 0..n {
        for j in 0..dim {
            let aj = a.get(r, j);
            let sigma = g.log_std.get(r, j).exp();
            let e = noise.get(r, j);
            let dq = dq_da.get(r, j) * (1.0 - aj * aj);
            grad_raw.set(r, j, (alpha * 2.0 * aj - dq) / nf);
            let mask = if g.unclipped[r * dim + j] { 1.0 } else { 0.0 };
            let d_ls = alpha * (-1.0 + 2.0 * aj * sigma * e) - dq * sigma * e;
            grad_raw.set(r, dim + j, mask * d_ls / nf);
        }
    }
    let mut loss = (0..n).map(|r| alpha * logp[r] - q_min[r]).sum::<f64>() / nf;
    let mut grads = actor.backward(&cache, &grad_raw)?.params;
    if let Some((bs, ba, coef)) = obj.bc {
        if coef != 0.0 && bs.rows() > 0 {
            let (l, gb) = bc_loss(actor, bs, ba)?;
            loss += coef * l;
            grads.iter_mut().zip(gb).for_each(|(g, b)| *g += coef * b);
        }
    }
    Ok(ActorLoss {
        loss,
        grads,
        mean_log_prob: logp.iter().sum::<f64>() / nf,
    })
}

/// `tanh(μ)` for one state.
pub fn deterministic(actor: &Mlp, state: &[f64]) -> Result<Vec<f64>> {
    let out = actor.forward(state)?;
    let dim = out.len() / 2;
    Ok(out[..dim].iter().map(|m| clamp_action(m.tanh())).collect())
}

/// Density of a 1-D tanh-Gaussian with parameters `(μ, log σ)` at `a`.
pub fn tanh_gaussian_density(mu: f64, log_std: f64, a: f64) -> f64 {
    let u = a.atanh();
    let sigma = log_std.exp();
    let e = (u - mu) / sigma;
    (-0.5 * e * e).exp() / (sigma * (2.0 * PI).sqrt() * (1.0 - a * a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{assert_grad_close, finite_difference};
    use rand::{Rng, SeedableRng};

    fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn samples_stay_inside_the_open_box() {
        let actor = Mlp::new(actor_spec(2, &[8], 2), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let states = random_matrix(1000, 2, 3.0, &mut rng);
        for _ in 0..10 {
            let (a, logp, _) = sample_batch(&actor, &states, &mut rng).unwrap();
            assert!(a.as_slice().iter().all(|x| x.abs() < 1.0));
            assert!(logp.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn log_prob_agrees_with_reparameterized_density() {
        let actor = Mlp::new(actor_spec(3, &[8], 2), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let states = random_matrix(20, 3, 1.0, &mut rng);
        let (a, logp, _) = sample_batch(&actor, &states, &mut rng).unwrap();
        let again = log_prob(&actor, &states, &a).unwrap();
        for (x, y) in logp.iter().zip(&again) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn bc_and_actor_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let actor = Mlp::new(actor_spec(3, &[4, 4], 2), 11).unwrap();
        let critics: Vec<Mlp> = (0..3)
            .map(|k| Mlp::new(MlpSpec::new(5, &[4, 4], 1).with_layer_norm(true), 20 + k).unwrap())
            .collect();
        let states = random_matrix(5, 3, 1.0, &mut rng);
        let noise = random_matrix(5, 2, 1.5, &mut rng);
        let subsets: Vec<Vec<usize>> = vec![vec![0], vec![1, 2], vec![2], vec![0, 1], vec![1]];
        let bc_states = random_matrix(4, 3, 1.0, &mut rng);
        let bc_actions = random_matrix(4, 2, 0.9, &mut rng);
        let obj = ActorObjective {
            critics: &critics,
            subsets: &subsets,
            alpha: 0.7,
            bc: Some((&bc_states, &bc_actions, 0.3)),
        };
        let analytic = actor_loss(&actor, &states, &noise, &obj).unwrap().grads;
        let numeric = finite_difference(actor.params(), |p| {
            let mut probe = actor.clone();
            probe.set_params(p).unwrap();
            actor_loss(&probe, &states, &noise, &obj).unwrap().loss
        });
        assert_grad_close(&analytic, &numeric, "actor");

        let (_, analytic) = bc_loss(&actor, &bc_states, &bc_actions).unwrap();
        let numeric = finite_difference(actor.params(), |p| {
            let mut probe = actor.clone();
            probe.set_params(p).unwrap();
            bc_loss(&probe, &bc_states, &bc_actions).unwrap().0
        });
        assert_grad_close(&analytic, &numeric, "bc");
    }

    #[test]
    fn zero_bc_weight_leaves_the_actor_loss_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let actor = Mlp::new(actor_spec(2, &[4], 1), 3).unwrap();
        let critics = vec![Mlp::new(MlpSpec::new(3, &[4], 1), 8).unwrap()];
        let states = random_matrix(4, 2, 1.0, &mut rng);
        let noise = random_matrix(4, 1, 1.0, &mut rng);
        let subsets = vec![vec![0]; 4];
        let base = ActorObjective {
            critics: &critics,
            subsets: &subsets,
            alpha: 0.2,
            bc: None,
        };
        let with_zero = ActorObjective {
            bc: Some((&states, &noise, 0.0)),
            ..base
        };
        let a = actor_loss(&actor, &states, &noise, &base).unwrap();
        let b = actor_loss(&actor, &states, &noise, &with_zero).unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.grads, b.grads);
    }

    #[test]
    fn vanishing_std_collapses_onto_the_mean() {
        // Zero net: mean 0. Push the log-std bias to the lower clip.
        let mut actor = Mlp::new(actor_spec(1, &[2], 1), 0).unwrap();
        actor.params_mut().fill(0.0);
        let n = actor.num_params();
        actor.params_mut()[n - 1] = -30.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, _, _) = sample_batch(&actor, &Matrix::zeros(100, 1), &mut rng).unwrap();
        assert!(a.as_slice().iter().all(|x| x.abs() < 1e-7));
        assert_eq!(deterministic(&actor, &[0.3]).unwrap(), vec![0.0]);
    }

    #[test]
    fn density_integrates_to_one() {
        let (mu, ls) = (0.4, -0.3);
        let m = 200_000;
        let total: f64 = (0..m)
            .map(|i| {
                let a = -1.0 + (i as f64 + 0.5) * 2.0 / m as f64;
                tanh_gaussian_density(mu, ls, a) * 2.0 / m as f64
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }
}
