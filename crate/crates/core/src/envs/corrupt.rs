//! Prior-data corruptions. Each returns a new dataset; inputs are untouched.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::ReplayBuffer;

/// Drops every transition whose planar displacement has a strictly
/// positive component along any axis direction in `toward` (components of
/// `toward` that are zero are ignored). With `toward = [1, 1]` only moves
/// that go neither right nor up survive.
pub fn corrupt_orthogonal(data: &ReplayBuffer, toward: [f64; 2]) -> ReplayBuffer {
    data.filtered(|t| {
        let d = t.displacement();
        (0..2).all(|i| toward[i] == 0.0 || d[i] * toward[i].signum() <= 0.0)
    })
}

/// Drops every transition whose state or next state lies within `radius`
/// of `goal`.
pub fn corrupt_coverage(data: &ReplayBuffer, goal: [f64; 2], radius: f64) -> Result<ReplayBuffer> {
    if !(radius > 0.0) {
        return Err(Error::config(format!("coverage corruption radius must be positive, got {radius}")));
    }
    let far = |s: &[f64]| ((s[0] - goal[0]).powi(2) + (s[1] - goal[1]).powi(2)).sqrt() > radius;
    Ok(data.filtered(|t| far(&t.state) && far(&t.next_state)))
}

/// Keeps `round(fraction · n)` transitions chosen uniformly without
/// replacement, in their original order.
pub fn corrupt_subsample(data: &ReplayBuffer, fraction: f64, seed: u64) -> Result<ReplayBuffer> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("subsample fraction must lie in (0, 1], got {fraction}")));
    }
    let n = data.len();
    let keep = (fraction * n as f64).round() as usize;
    if keep == 0 {
        return Err(Error::config(format!(
            "subsampling {n} transitions at {fraction} keeps nothing"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    for i in sample(&mut rng, n, keep) {
        chosen[i] = true;
    }
    let mut i = 0;
    Ok(data.filtered(|_| {
        let k = chosen[i];
        i += 1;
        k
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Transition;
    use proptest::prelude::*;

    fn mv(from: [f64; 2], d: [f64; 2]) -> Transition {
        Transition::prior(from.to_vec(), vec![0.0, 0.0], vec![from[0] + d[0], from[1] + d[1]], 0)
    }

    fn buf(rows: Vec<Transition>) -> ReplayBuffer {
        ReplayBuffer::from_transitions(rows, 0)
    }

    #[test]
    fn orthogonal_examples() {
        let data = buf(vec![mv([0.0, 0.0], [0.5, 0.0]), mv([0.0, 0.0], [-0.3, -0.1])]);
        let out = corrupt_orthogonal(&data, [1.0, 1.0]);
        assert_eq!(out.len(), 1);
        assert_eq!(out.get(0).unwrap().displacement(), [-0.3, -0.1]);
    }

    #[test]
    fn coverage_examples() {
        let goal = [5.0, 5.0];
        let near = mv([5.5, 5.0], [-0.4, 0.0]); // ends 0.1 from the goal
        let far = mv([15.0, 5.0], [0.0, 0.0]);
        let out = corrupt_coverage(&buf(vec![near, far.clone()]), goal, 1.0).unwrap();
        assert_eq!(out.to_vec(), vec![far]);
        assert!(corrupt_coverage(&out, goal, 0.0).is_err());
    }

    #[test]
    fn subsample_sizes() {
        let rows: Vec<Transition> = (0..100_000).map(|i| mv([i as f64, 0.0], [0.0, 0.0])).collect();
        let data = buf(rows);
        assert_eq!(corrupt_subsample(&data, 1.0, 3).unwrap().to_vec(), data.to_vec());
        let a = corrupt_subsample(&data, 0.01, 3).unwrap();
        assert_eq!(a.len(), 1_000);
        let b = corrupt_subsample(&data, 0.01, 3).unwrap();
        assert_eq!(a.to_vec(), b.to_vec());
        let small = buf((0..10).map(|i| mv([i as f64, 0.0], [0.0, 0.0])).collect());
        assert!(matches!(corrupt_subsample(&small, 0.01, 0), Err(Error::Config(_))));
        assert!(corrupt_subsample(&small, 0.0, 0).is_err());
    }

    fn arb_data() -> impl Strategy<Value = ReplayBuffer> {
        prop::collection::vec(
            (prop::array::uniform2(0.0f64..10.0), prop::array::uniform2(-1.0f64..1.0)),
            1..60,
        )
        .prop_map(|rows| buf(rows.into_iter().map(|(p, d)| mv(p, d)).collect()))
    }

    proptest! {
        #[test]
        fn corruptions_are_idempotent_and_never_add(data in arb_data(), seed in 0u64..100) {
            let o1 = corrupt_orthogonal(&data, [1.0, 1.0]);
            prop_assert!(o1.len() <= data.len());
            prop_assert_eq!(corrupt_orthogonal(&o1, [1.0, 1.0]).to_vec(), o1.to_vec());
            for t in o1.iter() {
                let d = t.displacement();
                prop_assert!(d[0] <= 0.0 && d[1] <= 0.0);
            }

            let c1 = corrupt_coverage(&data, [5.0, 5.0], 2.0).unwrap();
            prop_assert!(c1.len() <= data.len());
            prop_assert_eq!(corrupt_coverage(&c1, [5.0, 5.0], 2.0).unwrap().to_vec(), c1.to_vec());

            let s1 = corrupt_subsample(&data, 1.0, seed).unwrap();
            prop_assert_eq!(s1.to_vec(), data.to_vec());
            // surviving rows keep their relative order
            if let Ok(s) = corrupt_subsample(&data, 0.5, seed) {
                let xs: Vec<f64> = data.iter().map(|t| t.state[0] + 100.0 * t.state[1]).collect();
                let kept: Vec<f64> = s.iter().map(|t| t.state[0] + 100.0 * t.state[1]).collect();
                let mut pos = 0;
                for k in kept {
                    let found = xs[pos..].iter().position(|x| *x == k);
                    prop_assert!(found.is_some());
                    pos += found.unwrap() + 1;
                }
            }
        }
    }
}
