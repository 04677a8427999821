use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TabularStochasticGame;
use crate::Result;

/// Game with payoffs drawn from `U[-1, 1]` and fully supported transition
/// rows, reproducible from `seed`.
pub fn random_game(
    seed: u64,
    action_counts: &[usize],
    state_count: usize,
    discount: f64,
) -> Result<TabularStochasticGame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let joint: usize = action_counts.iter().product();
    let n = action_counts.len();
    let payoffs: Vec<f64> = (0..n * state_count * joint)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let rows: Vec<Vec<(usize, f64)>> = (0..state_count * joint)
        .map(|_| {
            let w: Vec<f64> = (0..state_count).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().enumerate().map(|(t, x)| (t, x / total)).collect()
        })
        .collect();
    TabularStochasticGame::new(
        action_counts.to_vec(),
        state_count,
        payoffs,
        super::Kernel::from_fn(state_count, joint, |s, j| rows[s * joint + j].clone()),
        discount,
        None,
    )
}
