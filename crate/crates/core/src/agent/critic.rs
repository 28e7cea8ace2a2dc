use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_dim, Result};
use crate::nn::{Matrix, Mlp, MlpSpec};

/// `Q(s, a)` network; layer norm goes on the hidden layers only.
pub fn critic_spec(state_dim: usize, action_dim: usize, hidden: &[usize], layer_norm: bool) -> MlpSpec {
    MlpSpec::new(state_dim + action_dim, hidden, 1).with_layer_norm(layer_norm)
}

/// A uniformly drawn `z`-subset of `0..e` for each of `n` rows.
pub fn draw_subsets(n: usize, e: usize, z: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    (0..n).map(|_| index::sample(rng, e, z).into_vec()).collect()
}

/// Row-wise minimum over each row's subset of critics.
pub fn subset_min(critics: &[Mlp], x: &Matrix, subsets: &[Vec<usize>]) -> Result<Vec<f64>> {
    ensure_dim("critic subsets", x.rows(), subsets.len())?;
    let mut used = vec![false; critics.len()];
    subsets.iter().flatten().for_each(|&k| used[k] = true);
    let q: Vec<Option<Matrix>> = critics
        .iter()
        .zip(&used)
        .map(|(c, &u)| if u { c.forward_batch(x).map(Some) } else { Ok(None) })
        .collect::<Result<_>>()?;
    Ok(subsets
        .iter()
        .enumerate()
        .map(|(r, s)| {
            s.iter()
                .map(|&k| q[k].as_ref().expect("used critic").get(r, 0))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// `y = r̂ + γ(1 − T̂)(Q̄′ − [entropy backups] α log π(a′|s′))`.
pub fn td_targets(
    rewards: &[f64],
    terminals: &[f64],
    next_q: &[f64],
    next_log_prob: &[f64],
    gamma: f64,
    entropy_alpha: Option<f64>,
) -> Vec<f64> {
    rewards
        .iter()
        .zip(terminals)
        .zip(next_q.iter().zip(next_log_prob))
        .map(|((r, t), (q, lp))| {
            let soft = q - entropy_alpha.map_or(0.0, |a| a * lp);
            r + gamma * (1.0 - t) * soft
        })
        .collect()
}

/// Ensemble regression loss `(1/(E·n)) Σ_k Σ_i (Q_k(x_i) − y_i)²` and the
/// gradient for each critic.
pub fn critic_loss(critics: &[Mlp], x: &Matrix, targets: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
    ensure_dim("critic targets", x.rows(), targets.len())?;
    let scale = (critics.len() * targets.len()).max(1) as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(critics.len());
    for c in critics {
        let cache = c.forward_cached(x)?;
        let mut g = Matrix::zeros(x.rows(), 1);
        for (i, y) in targets.iter().enumerate() {
            let err = cache.output().get(i, 0) - y;
            loss += err * err / scale;
            g.set(i, 0, 2.0 * err / scale);
        }
        grads.push(c.backward(&cache, &g)?.params);
    }
    Ok((loss, grads))
}

/// Temperature objective `α·(−mean log π − H*)` with `α = exp(log_alpha)`,
/// and its derivative with respect to `log_alpha`.
pub fn temperature_loss(log_alpha: f64, mean_log_prob: f64, target_entropy: f64) -> (f64, f64) {
    let v = log_alpha.exp() * (-mean_log_prob - target_entropy);
    (v, v)
}
