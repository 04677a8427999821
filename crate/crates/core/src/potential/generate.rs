use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::OneShotPotential;
use crate::game::{Kernel, TabularStochasticGame};
use crate::{Error, Result};

/// Random game satisfying complete state transitivity by construction:
/// `r_i = phi + c_i` with `phi ~ U[-1, 1]` per (state, joint action),
/// `c_i ~ U[-1, 1]` per agent, and a dense kernel of normalised positive
/// draws. Output is a pure function of the arguments.
pub fn generate_cst_game(
    seed: u64,
    agent_count: usize,
    state_count: usize,
    action_counts: &[usize],
    gamma: f64,
) -> Result<(TabularStochasticGame, OneShotPotential)> {
    if agent_count == 0 || state_count == 0 || action_counts.contains(&0) {
        return Err(Error::InvalidArgument("sizes must be positive".into()));
    }
    if action_counts.len() != agent_count {
        return Err(Error::InvalidArgument(format!(
            "{} action counts for {agent_count} agents",
            action_counts.len()
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let joints: usize = action_counts.iter().product();
    let phi: Vec<f64> = (0..state_count * joints)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let offsets: Vec<f64> = (0..agent_count).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let payoffs: Vec<f64> = offsets
        .iter()
        .flat_map(|c| phi.iter().map(move |p| p + c))
        .collect();
    let kernel = Kernel::from_fn(state_count, joints, |_, _| {
        let raw: Vec<f64> = (0..state_count).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).enumerate().collect::<Vec<_>>()
    });
    let game = TabularStochasticGame::new(
        action_counts.to_vec(),
        state_count,
        payoffs,
        kernel,
        gamma,
        None,
    )?;
    let potential = OneShotPotential::from_table(&game, phi)?;
    Ok((game, potential))
}
