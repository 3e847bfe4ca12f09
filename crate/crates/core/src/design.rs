//! Contact-aware experimental design: choose initial toss states whose
//! simulated trajectories carry the most information about the contact
//! parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::contact_model::{kinematics, ContactParams};
use crate::dynamics::{rollout, BlockState, Trajectory};
use crate::error::{Error, Result};
use crate::estimate::{fit, OptimizerSettings};
use crate::fisher::{FisherMatrix, Normalization, Reduction, DEFAULT_RIDGE};
use crate::io::seed;
use crate::loss::{evaluate_trajectory, LossModel};
use crate::synth::SimSettings;

/// Componentwise Gaussian over initial states, in [`BlockState::to_array`]
/// order. Sampled quaternions are renormalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TossDistribution {
    pub mean: [f64; 13],
    pub std: [f64; 13],
}

impl TossDistribution {
    pub fn validate(&self) -> Result<()> {
        if self.mean.iter().chain(&self.std).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("toss distribution".into()));
        }
        if let Some(i) = self.std.iter().position(|&s| s < 0.0) {
            return Err(Error::Schema {
                path: format!("std[{i}]"),
                message: "standard deviation must be >= 0".into(),
            });
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BlockState {
        let mut a = [0.0; 13];
        for i in 0..13 {
            let z: f64 = rng.sample(StandardNormal);
            a[i] = self.mean[i] + self.std[i] * z;
        }
        let qn = a[3..7].iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(qn > 1e-9) {
            a[3..7].copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        }
        BlockState::from_array(a).expect("finite sample with nonzero quaternion")
    }
}

/// Componentwise mean and sample standard deviation of initial states.
pub fn fit_initial_distribution(dataset: &[Trajectory]) -> Result<TossDistribution> {
    if dataset.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 trajectories to fit a toss distribution, got {}",
            dataset.len()
        )));
    }
    let rows: Vec<[f64; 13]> = dataset.iter().map(|t| t.initial_state().to_array()).collect();
    Ok(moments(&rows))
}

/// Settings of the toss optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSettings {
    pub reduction: Reduction,
    /// Candidates simulated per round.
    pub n_candidates: usize,
    /// Cross-entropy refinement: refit the sampling distribution to the best
    /// candidates and sample again.
    pub cem: bool,
    pub cem_rounds: usize,
    /// Share of each round kept for the refit.
    pub elite_fraction: f64,
    /// Refit the parameter estimate on the data gathered so far before each
    /// new toss.
    pub refresh_theta: bool,
    pub ridge: f64,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self {
            reduction: Reduction::Trace,
            n_candidates: 32,
            cem: false,
            cem_rounds: 2,
            elite_fraction: 0.2,
            refresh_theta: false,
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl DesignSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| {
            Err(Error::Schema {
                path: path.into(),
                message: message.into(),
            })
        };
        if self.n_candidates == 0 {
            return bad("design.n_candidates", "must be at least 1");
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return bad("design.elite_fraction", "must lie in (0, 1]");
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad("design.ridge", "must be finite and >= 0");
        }
        Ok(())
    }
}

/// One simulated candidate toss, kept for auditing a design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub round: usize,
    pub x0: BlockState,
    /// Reduction of the candidate's expected information.
    pub value: f64,
    pub contact_steps: usize,
    pub converged: bool,
}

/// An optimized initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TossDesign {
    pub x0: BlockState,
    pub expected_info: f64,
    pub phi_kind: Reduction,
    pub n_candidates: usize,
    pub seed: u64,
    /// No candidate simulated without hitting the contact-solver cap; the
    /// design is the best of the unconverged ones.
    pub no_converged_candidate: bool,
    pub candidates: Vec<Candidate>,
}

/// Raises a sampled state until its lowest vertex sits on the ground.
fn lift_clear(mut x0: BlockState, theta: &ContactParams) -> BlockState {
    let lowest = kinematics(theta, &x0).phi.min();
    if lowest < 0.0 {
        x0.position.z -= lowest;
    }
    x0
}

fn evaluate_candidate(
    round: usize,
    x0: BlockState,
    theta: &ContactParams,
    settings: &DesignSettings,
    sim: &SimSettings,
    model: &LossModel,
) -> Result<Candidate> {
    let traj = rollout("candidate", &x0, theta, sim.dt, sim.horizon, &sim.physics, &sim.solver)?;
    let eval = evaluate_trajectory(&traj, theta, model, true)?;
    let info = FisherMatrix::from_matrix(eval.information.expect("requested"), 1, Normalization::Sum)?;
    Ok(Candidate {
        round,
        x0,
        value: info.reduce(settings.reduction, settings.ridge),
        contact_steps: eval.contact_steps,
        converged: traj.solver_converged,
    })
}

/// Draw `i` of a design seeded with `seed_value`. Design `j` of
/// [`generate_dataset`] and toss `j` of [`random_initial_states`] share
/// their first draw, so a single-candidate design is the random baseline.
fn draw(dist: &TossDistribution, seed_value: u64, i: usize) -> BlockState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, "candidate", i as u64));
    dist.sample(&mut rng)
}

/// Best-of-N search for the initial state whose simulated toss under `theta`
/// carries the most expected information about `theta`.
///
/// Candidates whose sampled pose starts below ground are lifted clear first.
pub fn design_toss(
    dist: &TossDistribution,
    theta: &ContactParams,
    settings: &DesignSettings,
    sim: &SimSettings,
    model: &LossModel,
    seed_value: u64,
) -> Result<TossDesign> {
    dist.validate()?;
    settings.validate()?;
    let rounds = if settings.cem { 1 + settings.cem_rounds } else { 1 };
    let n = settings.n_candidates;
    let mut candidates: Vec<Candidate> = Vec::with_capacity(rounds * n);
    let mut current = dist.clone();
    for round in 0..rounds {
        let states: Vec<BlockState> = (0..n)
            .map(|i| lift_clear(draw(&current, seed_value, round * n + i), theta))
            .collect();
        let evaluated = evaluate_all(round, &states, theta, settings, sim, model)?;
        if round + 1 < rounds {
            current = refit_elite(&evaluated, settings.elite_fraction, &current);
        }
        candidates.extend(evaluated);
    }

    let no_converged_candidate = !candidates.iter().any(|c| c.converged);
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if !(c.converged || no_converged_candidate) {
            continue;
        }
        if best.map_or(true, |b| c.value > candidates[b].value) {
            best = Some(i);
        }
    }
    let best = best.expect("at least one eligible candidate");
    if no_converged_candidate {
        log::warn!("no design candidate converged; returning the best unconverged one");
    }
    Ok(TossDesign {
        x0: candidates[best].x0,
        expected_info: candidates[best].value,
        phi_kind: settings.reduction,
        n_candidates: n,
        seed: seed_value,
        no_converged_candidate,
        candidates,
    })
}

fn evaluate_all(
    round: usize,
    states: &[BlockState],
    theta: &ContactParams,
    settings: &DesignSettings,
    sim: &SimSettings,
    model: &LossModel,
) -> Result<Vec<Candidate>> {
    let eval = |x0: &BlockState| evaluate_candidate(round, *x0, theta, settings, sim, model);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        states.par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        states.iter().map(eval).collect()
    }
}

/// Mean and standard deviation of the best candidates, highest value first
/// with ties to the earlier draw. Falls back to `previous` when fewer than two
/// candidates make the cut.
fn refit_elite(candidates: &[Candidate], fraction: f64, previous: &TossDistribution) -> TossDistribution {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].value.total_cmp(&candidates[a].value).then(a.cmp(&b)));
    let keep = ((candidates.len() as f64 * fraction).ceil() as usize).min(candidates.len());
    if keep < 2 {
        return previous.clone();
    }
    let rows: Vec<[f64; 13]> = order[..keep].iter().map(|&i| candidates[i].x0.to_array()).collect();
    moments(&rows)
}

fn moments(rows: &[[f64; 13]]) -> TossDistribution {
    let n = rows.len() as f64;
    let mut mean = [0.0; 13];
    let mut std = [0.0; 13];
    for i in 0..13 {
        mean[i] = rows.iter().map(|r| r[i]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1.0);
        std[i] = var.sqrt();
    }
    TossDistribution { mean, std }
}

/// Runs a designed initial state on the system being identified.
pub trait Executor {
    fn execute(&mut self, index: usize, x0: &BlockState) -> Result<Trajectory>;
}

/// Stands in for the physical robot: simulates tosses under fixed parameters.
#[derive(Clone, Debug)]
pub struct SimulatedRobot {
    pub params: ContactParams,
    pub sim: SimSettings,
    pub id_prefix: String,
}

impl Executor for SimulatedRobot {
    fn execute(&mut self, index: usize, x0: &BlockState) -> Result<Trajectory> {
        let s = &self.sim;
        rollout(format!("{}{index:03}", self.id_prefix), x0, &self.params, s.dt, s.horizon, &s.physics, &s.solver)
    }
}

/// A toss gathered by [`generate_dataset`] with the design that chose it.
#[derive(Clone, Debug)]
pub struct DesignedTrajectory {
    pub trajectory: Trajectory,
    pub design: TossDesign,
    /// Parameter estimate the design was computed at.
    pub theta: ContactParams,
}

/// Designs and executes `n_exp` tosses in sequence. With
/// `settings.refresh_theta`, the estimate is refit on everything gathered so
/// far (starting from the previous estimate) before each new design.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset(
    n_exp: usize,
    dist: &TossDistribution,
    theta: &ContactParams,
    settings: &DesignSettings,
    sim: &SimSettings,
    model: &LossModel,
    optimizer: &OptimizerSettings,
    executor: &mut dyn Executor,
    seed_value: u64,
) -> Result<Vec<DesignedTrajectory>> {
    if n_exp == 0 {
        return Err(Error::InvalidInput("n_exp must be at least 1".into()));
    }
    let mut current = theta.clone();
    let mut out: Vec<DesignedTrajectory> = Vec::with_capacity(n_exp);
    for j in 0..n_exp {
        if settings.refresh_theta && !out.is_empty() {
            let data: Vec<Trajectory> = out.iter().map(|d| d.trajectory.clone()).collect();
            current = fit(&data, &current, model, optimizer, seed::derive(seed_value, "refit", j as u64))?.theta_hat;
        }
        let design = design_toss(dist, &current, settings, sim, model, seed::derive(seed_value, "design", j as u64))?;
        let trajectory = executor.execute(j, &design.x0)?;
        out.push(DesignedTrajectory {
            trajectory,
            design,
            theta: current.clone(),
        });
    }
    Ok(out)
}

/// Undesigned baseline: toss `j` is the first candidate design `j` of
/// [`generate_dataset`] would draw, lifted clear of the ground under `theta`.
pub fn random_initial_states(n: usize, dist: &TossDistribution, theta: &ContactParams, seed_value: u64) -> Vec<BlockState> {
    (0..n)
        .map(|j| lift_clear(draw(dist, seed::derive(seed_value, "design", j as u64), 0), theta))
        .collect()
}
