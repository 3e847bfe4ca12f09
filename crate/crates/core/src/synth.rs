//! Synthetic toss datasets for experiments and tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contact_model::ContactParams;
use crate::design::TossDistribution;
use crate::dynamics::{rollout, BlockState, Physics, SolverSettings, Trajectory};
use crate::error::Result;
use crate::io::seed;

/// Time step and horizon shared by every simulated toss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub dt: f64,
    /// States per trajectory, including the initial one.
    pub horizon: usize,
    pub physics: Physics,
    pub solver: SolverSettings,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 0.005,
            horizon: 150,
            physics: Physics::default(),
            solver: SolverSettings::default(),
        }
    }
}

fn dist(mean: [f64; 13], std: [f64; 13]) -> TossDistribution {
    TossDistribution { mean, std }
}

/// Low tosses with spin that tumble and slide on the ground for most of the horizon.
pub fn contact_rich() -> TossDistribution {
    dist(
        [0.0, 0.0, 0.18, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.04, 0.5, 0.5, 0.5, 0.5, 1.0, 1.0, 0.5, 5.0, 5.0, 5.0],
    )
}

/// Nearly flat set-downs that slide a little and come to rest on the bottom
/// face: sustained but barely exciting contact.
pub fn settling() -> TossDistribution {
    dist(
        [0.0, 0.0, 0.056, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.002, 0.0, 0.02, 0.02, 0.02, 0.2, 0.2, 0.05, 0.3, 0.3, 0.3],
    )
}

/// High tosses that stay airborne for the whole default horizon.
pub fn airborne() -> TossDistribution {
    dist(
        [0.0, 0.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.1, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.2, 3.0, 3.0, 3.0],
    )
}

/// Named toss families for configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TossFamily {
    /// See [`mixed_dataset`].
    Mixed,
    ContactRich,
    Settling,
    Airborne,
}

impl TossFamily {
    /// The single distribution of a family; `None` for the mixture.
    pub fn distribution(self) -> Option<TossDistribution> {
        match self {
            TossFamily::Mixed => None,
            TossFamily::ContactRich => Some(contact_rich()),
            TossFamily::Settling => Some(settling()),
            TossFamily::Airborne => Some(airborne()),
        }
    }
}

/// Simulates one toss per initial state.
pub fn simulate_from(
    prefix: &str,
    initial: &[BlockState],
    params: &ContactParams,
    sim: &SimSettings,
) -> Result<Vec<Trajectory>> {
    initial
        .iter()
        .enumerate()
        .map(|(i, x0)| {
            rollout(
                format!("{prefix}{i:03}"),
                x0,
                params,
                sim.dt,
                sim.horizon,
                &sim.physics,
                &sim.solver,
            )
        })
        .collect()
}

/// Draws `n` initial states; draw `i` uses its own seed derived from `seed`.
pub fn sample_initial(dist: &TossDistribution, n: usize, seed_value: u64) -> Vec<BlockState> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, "toss", i as u64));
            dist.sample(&mut rng)
        })
        .collect()
}

pub fn simulate_tosses(
    prefix: &str,
    dist: &TossDistribution,
    n: usize,
    params: &ContactParams,
    sim: &SimSettings,
    seed_value: u64,
) -> Result<Vec<Trajectory>> {
    simulate_from(prefix, &sample_initial(dist, n, seed_value), params, sim)
}

/// Contact-rich tosses at even indices; the odd indices alternate between
/// settling and airborne tosses, the contact-poor half.
pub fn mixed_dataset(n: usize, params: &ContactParams, sim: &SimSettings, seed_value: u64) -> Result<Vec<Trajectory>> {
    let rich = sample_initial(&contact_rich(), n, seed::derive(seed_value, "rich", 0));
    let settle = sample_initial(&settling(), n, seed::derive(seed_value, "settle", 0));
    let air = sample_initial(&airborne(), n, seed::derive(seed_value, "air", 0));
    let initial: Vec<BlockState> = (0..n)
        .map(|i| match i % 4 {
            1 => settle[i],
            3 => air[i],
            _ => rich[i],
        })
        .collect();
    simulate_from("toss", &initial, params, sim)
}

/// `truth` with every vertex coordinate shifted uniformly in `[-amplitude, amplitude]`
/// and the friction coefficient replaced by `mu`.
pub fn perturbed(truth: &ContactParams, amplitude: f64, mu: f64, seed_value: u64) -> ContactParams {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, "perturb", 0));
    let mut out = truth.clone();
    for v in &mut out.vertices {
        for x in v.iter_mut() {
            *x += rng.gen_range(-amplitude..=amplitude);
        }
    }
    out.mu = mu;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{score, LossModel};

    #[test]
    fn families_differ_in_information() {
        let cube = ContactParams::cube(0.05, 0.3);
        let theta = perturbed(&cube, 0.01, 0.45, 3);
        let sim = SimSettings::default();
        let model = LossModel::default();
        let info = |data: &[Trajectory]| {
            data.iter()
                .map(|t| score(t, &theta, &model).unwrap().g.norm_squared())
                .sum::<f64>()
                / data.len() as f64
        };
        let rich = simulate_tosses("r", &contact_rich(), 6, &cube, &sim, 1).unwrap();
        let settle = simulate_tosses("s", &settling(), 3, &cube, &sim, 1).unwrap();
        let air = simulate_tosses("a", &airborne(), 3, &cube, &sim, 1).unwrap();
        assert_eq!(info(&air), 0.0);
        assert!(info(&rich) > 3.0 * info(&settle), "rich {} settle {}", info(&rich), info(&settle));
        for t in rich.iter().chain(&settle).chain(&air) {
            assert!(t.states.iter().all(|s| s.is_finite()));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cube = ContactParams::cube(0.05, 0.3);
        let sim = SimSettings { horizon: 40, ..Default::default() };
        let a = mixed_dataset(4, &cube, &sim, 9).unwrap();
        let b = mixed_dataset(4, &cube, &sim, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, mixed_dataset(4, &cube, &sim, 10).unwrap());
    }
}
