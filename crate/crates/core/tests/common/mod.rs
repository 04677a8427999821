#![allow(dead_code)]

use mpg_core::game::{JointPolicy, TabularStochasticGame};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense state-to-state matrix and expected reward vector of `policy`, built
/// by brute-force enumeration of joint action tuples.
pub fn brute_chain(game: &TabularStochasticGame, policy: &JointPolicy, agent: usize) -> (DMatrix<f64>, DVector<f64>) {
    let n = game.state_count();
    let space = game.joint_actions();
    let mut p = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    for s in 0..n {
        for j in 0..game.joint_count() {
            let actions = space.decode(j);
            let w: f64 = actions
                .iter()
                .enumerate()
                .map(|(i, &a)| policy.tables[i][s][a])
                .product();
            r[s] += w * game.payoff(agent, s, j);
            for t in 0..n {
                p[(s, t)] += w * game.kernel().probability(s, j, t);
            }
        }
    }
    (p, r)
}

/// `sum_{t < horizon} gamma^t P^t r` by explicit matrix powers.
pub fn truncated_sum(p: &DMatrix<f64>, r: &DVector<f64>, gamma: f64, horizon: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(r.len());
    let mut term = r.clone();
    for _ in 0..horizon {
        acc += &term;
        term = gamma * (p * term);
    }
    acc
}

pub fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
