//! Maximum-likelihood fitting of the contact parameters and the held-out
//! evaluation metrics.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contact_model::{kinematics, ContactParams, MU_INDEX};
use crate::curate::{evaluate_dataset, select, trajectory_scores, Method};
use crate::dynamics::{rollout, SolverSettings, Trajectory};
use crate::error::{Error, Result};
use crate::io::seed;
use crate::loss::LossModel;

/// Update rule of the fitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    /// Heavy-ball momentum on the raw gradient.
    Momentum,
    /// Momentum on the gradient divided by a running RMS per coordinate
    /// (bias-corrected, as in Adam).
    Adam,
}

/// First-order descent on the mean trajectory loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub rule: UpdateRule,
    pub step_size: f64,
    /// Multiplier on `step_size` for the friction coefficient, whose gradient
    /// is much smaller than the vertex gradients.
    pub mu_step_scale: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Trajectories per update; 0 uses the whole subset.
    pub batch_size: usize,
    /// Re-select the curated subset every this many epochs; 0 never does.
    pub refresh_every: usize,
    /// Vertex coordinates are kept in `[-param_bound, param_bound]` (m).
    pub param_bound: f64,
    /// A mean loss above this aborts the fit.
    pub divergence_threshold: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            rule: UpdateRule::Momentum,
            step_size: 0.03,
            mu_step_scale: 1000.0,
            momentum: 0.9,
            epochs: 12,
            batch_size: 4,
            refresh_every: 4,
            param_bound: 0.25,
            divergence_threshold: 1e6,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| {
            Err(Error::Schema {
                path: path.into(),
                message: message.into(),
            })
        };
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("optimizer.step_size", "must be positive and finite");
        }
        if !(self.mu_step_scale >= 0.0 && self.mu_step_scale.is_finite()) {
            return bad("optimizer.mu_step_scale", "must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("optimizer.momentum", "must lie in [0, 1)");
        }
        if self.epochs == 0 {
            return bad("optimizer.epochs", "must be at least 1");
        }
        if !(self.param_bound > 0.0 && self.param_bound.is_finite()) {
            return bad("optimizer.param_bound", "must be positive and finite");
        }
        if !(self.divergence_threshold > 0.0) {
            return bad("optimizer.divergence_threshold", "must be positive");
        }
        Ok(())
    }
}

/// Held-out trajectory metrics of a parameter estimate.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Mean position error of re-simulated rollouts (m).
    pub traj_pos_error: f64,
    /// Mean geodesic orientation error of re-simulated rollouts (rad).
    pub traj_rot_error: f64,
    /// Mean over steps of the deepest penetration (m).
    pub penetration_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub theta_hat: ContactParams,
    /// Mean subset loss before the first epoch and after every epoch.
    pub loss_history: Vec<f64>,
    /// Epoch whose parameters were returned (0 = initial guess).
    pub best_epoch: usize,
    /// Vertex RMSE against the generating parameters, when known (m).
    pub vertex_rmse: Option<f64>,
    pub metrics: Option<EvalMetrics>,
    /// Some inner impulse solve stopped at its iteration cap.
    pub low_confidence: bool,
}

struct Evaluated {
    loss: f64,
    gradient: DVector<f64>,
    low_confidence: bool,
}

fn evaluate_mean(trajs: &[Trajectory], params: &ContactParams, model: &LossModel) -> Result<Evaluated> {
    let evals = evaluate_dataset(trajs, params, model, false)?;
    let n = evals.len() as f64;
    let mut gradient = DVector::zeros(params.to_vec().len());
    let mut loss = 0.0;
    let mut low_confidence = false;
    for e in &evals {
        loss += e.loss;
        gradient += &e.score.g;
        low_confidence |= e.score.low_confidence;
    }
    Ok(Evaluated {
        loss: loss / n,
        gradient: gradient / n,
        low_confidence,
    })
}

/// State carried across epochs and subset refreshes.
struct Descent {
    theta: DVector<f64>,
    velocity: DVector<f64>,
    second_moment: DVector<f64>,
    updates: i32,
    best: (f64, DVector<f64>, usize),
    history: Vec<f64>,
    low_confidence: bool,
}

impl Descent {
    fn params(&self) -> Result<ContactParams> {
        ContactParams::from_slice(self.theta.as_slice())
    }

    fn record(&mut self, loss: f64, epoch: usize, opt: &OptimizerSettings) -> Result<()> {
        if !loss.is_finite() || loss > opt.divergence_threshold {
            return Err(Error::Divergence(format!(
                "mean loss {loss:e} after epoch {epoch} exceeds {:e}",
                opt.divergence_threshold
            )));
        }
        self.history.push(loss);
        if loss < self.best.0 {
            self.best = (loss, self.theta.clone(), epoch);
        }
        Ok(())
    }

    fn epoch(
        &mut self,
        subset: &[Trajectory],
        model: &LossModel,
        opt: &OptimizerSettings,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let mut order: Vec<usize> = (0..subset.len()).collect();
        order.shuffle(rng);
        let batch = if opt.batch_size == 0 { subset.len() } else { opt.batch_size };
        for chunk in order.chunks(batch) {
            let trajs: Vec<Trajectory> = chunk.iter().map(|&i| subset[i].clone()).collect();
            let eval = evaluate_mean(&trajs, &self.params()?, model)?;
            self.low_confidence |= eval.low_confidence;
            self.step(&eval.gradient, opt);
            let mut p = self.params()?;
            p.project(opt.param_bound);
            let projected = p.to_vector();
            if opt.rule == UpdateRule::Momentum {
                // Drop the momentum component that pushed against the bounds.
                self.velocity += &projected - &self.theta;
            }
            self.theta = projected;
        }
        Ok(())
    }

    fn step(&mut self, g: &DVector<f64>, opt: &OptimizerSettings) {
        let mut g = g.clone();
        g[MU_INDEX] *= opt.mu_step_scale;
        let g = &g;
        match opt.rule {
            UpdateRule::Momentum => {
                self.velocity = &self.velocity * opt.momentum - g * opt.step_size;
            }
            UpdateRule::Adam => {
                const BETA2: f64 = 0.999;
                const EPS: f64 = 1e-12;
                self.updates += 1;
                self.velocity = &self.velocity * opt.momentum + g * (1.0 - opt.momentum);
                self.second_moment = &self.second_moment * BETA2 + g.component_mul(g) * (1.0 - BETA2);
                let c1 = 1.0 - opt.momentum.powi(self.updates);
                let c2 = 1.0 - BETA2.powi(self.updates);
                let step = self.velocity.zip_map(&self.second_moment, |m, v| {
                    -opt.step_size * (m / c1) / ((v / c2).sqrt() + EPS)
                });
                self.theta += step;
                return;
            }
        }
        self.theta += &self.velocity;
    }

    fn subset_loss(&mut self, subset: &[Trajectory], model: &LossModel) -> Result<f64> {
        let eval = evaluate_mean(subset, &self.params()?, model)?;
        self.low_confidence |= eval.low_confidence;
        Ok(eval.loss)
    }

    fn new(theta0: &ContactParams) -> Self {
        let theta = theta0.to_vector();
        Self {
            velocity: DVector::zeros(theta.len()),
            second_moment: DVector::zeros(theta.len()),
            updates: 0,
            best: (f64::INFINITY, theta.clone(), 0),
            theta,
            history: Vec::new(),
            low_confidence: false,
        }
    }

    fn finish(self) -> Result<FitReport> {
        Ok(FitReport {
            theta_hat: ContactParams::from_slice(self.best.1.as_slice())?,
            loss_history: self.history,
            best_epoch: self.best.2,
            vertex_rmse: None,
            metrics: None,
            low_confidence: self.low_confidence,
        })
    }
}

fn check_start(subset_len: usize, theta0: &ContactParams, opt: &OptimizerSettings) -> Result<()> {
    opt.validate()?;
    if subset_len == 0 {
        return Err(Error::Empty("training subset"));
    }
    theta0.validate(opt.param_bound)
}

/// Fits the contact parameters to `subset` starting from `theta0`. Minibatch
/// order is shuffled per epoch from `seed`. Returns the epoch-boundary
/// iterate with the lowest subset loss.
pub fn fit(
    subset: &[Trajectory],
    theta0: &ContactParams,
    model: &LossModel,
    opt: &OptimizerSettings,
    seed_value: u64,
) -> Result<FitReport> {
    check_start(subset.len(), theta0, opt)?;
    let mut d = Descent::new(theta0);
    let l0 = d.subset_loss(subset, model)?;
    d.record(l0, 0, opt)?;
    for epoch in 1..=opt.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, "fit", epoch as u64));
        d.epoch(subset, model, opt, &mut rng)?;
        let l = d.subset_loss(subset, model)?;
        d.record(l, epoch, opt)?;
    }
    d.finish()
}

/// Like [`fit`], but the training subset is re-chosen by `select` at the
/// current estimate every `opt.refresh_every` epochs. `select` receives the
/// current parameters and returns indices into `pool`.
pub fn fit_with_refresh<F>(
    pool: &[Trajectory],
    theta0: &ContactParams,
    model: &LossModel,
    opt: &OptimizerSettings,
    seed_value: u64,
    mut select: F,
) -> Result<(FitReport, Vec<Vec<usize>>)>
where
    F: FnMut(&ContactParams) -> Result<Vec<usize>>,
{
    check_start(pool.len(), theta0, opt)?;
    let mut d = Descent::new(theta0);
    let mut selections = vec![select(theta0)?];
    let mut subset: Vec<Trajectory> = selections[0].iter().map(|&i| pool[i].clone()).collect();
    let l0 = d.subset_loss(&subset, model)?;
    d.record(l0, 0, opt)?;
    for epoch in 1..=opt.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, "fit", epoch as u64));
        d.epoch(&subset, model, opt, &mut rng)?;
        if opt.refresh_every > 0 && epoch % opt.refresh_every == 0 && epoch < opt.epochs {
            let picked = select(&d.params()?)?;
            subset = picked.iter().map(|&i| pool[i].clone()).collect();
            selections.push(picked);
            // Losses are only comparable on a common subset.
            d.best = (f64::INFINITY, d.theta.clone(), epoch);
        }
        let l = d.subset_loss(&subset, model)?;
        d.record(l, epoch, opt)?;
    }
    Ok((d.finish()?, selections))
}

/// Geodesic angle between two orientations (rad).
fn rotation_distance(a: &nalgebra::UnitQuaternion<f64>, b: &nalgebra::UnitQuaternion<f64>) -> f64 {
    let c = a.quaternion().dot(b.quaternion()).abs().min(1.0);
    2.0 * c.acos()
}

/// Re-simulates every test trajectory from its initial state under
/// `theta_hat` and averages the errors over steps and trajectories.
///
/// Penetration is the depth of `reference` geometry (the generating
/// parameters, when known) at the poses of the re-simulated rollout. Without
/// a reference it is the depth of `theta_hat` geometry at the recorded poses.
pub fn eval_metrics(
    theta_hat: &ContactParams,
    test_set: &[Trajectory],
    model: &LossModel,
    solver: &SolverSettings,
    reference: Option<&ContactParams>,
) -> Result<EvalMetrics> {
    if test_set.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let run = |t: &Trajectory| -> Result<(f64, f64, f64)> {
        let sim = rollout(t.id.clone(), t.initial_state(), theta_hat, t.dt, t.len(), &model.physics, solver)?;
        let n = t.len() as f64;
        let mut pos = 0.0;
        let mut rot = 0.0;
        let mut pen = 0.0;
        for (s, m) in sim.states.iter().zip(&t.states) {
            pos += (s.position - m.position).norm();
            rot += rotation_distance(&s.orientation, &m.orientation);
            let depth = match reference {
                Some(r) => kinematics(r, s).phi.min(),
                None => kinematics(theta_hat, m).phi.min(),
            };
            pen += (-depth).max(0.0);
        }
        Ok((pos / n, rot / n, pen / n))
    };
    let per: Vec<(f64, f64, f64)> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            test_set.par_iter().map(run).collect::<Result<_>>()?
        }
        #[cfg(not(feature = "parallel"))]
        {
            test_set.iter().map(run).collect::<Result<_>>()?
        }
    };
    let n = per.len() as f64;
    Ok(EvalMetrics {
        traj_pos_error: per.iter().map(|p| p.0).sum::<f64>() / n,
        traj_rot_error: per.iter().map(|p| p.1).sum::<f64>() / n,
        penetration_error: per.iter().map(|p| p.2).sum::<f64>() / n,
    })
}

/// Train/test partition of a dataset, by trajectory index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles indices with `seed_value` and keeps `round(n * train_fraction)`
/// for training (at least one each side when `n >= 2`). Both halves are
/// returned in ascending order.
pub fn split_dataset(n: usize, train_fraction: f64, seed_value: u64) -> Result<Split> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("cannot split {n} trajectories into train and test")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed_value));
    let k = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let mut train = order[..k].to_vec();
    let mut test = order[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Everything a curation experiment needs besides the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    pub optimizer: OptimizerSettings,
    pub model: LossModel,
    pub solver: SolverSettings,
    pub ridge: f64,
    pub train_fraction: f64,
    /// Root seed; the split, the selections and the minibatch order derive from it.
    pub seed: u64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSettings::default(),
            model: LossModel::default(),
            solver: SolverSettings::default(),
            ridge: crate::fisher::DEFAULT_RIDGE,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Mean and sample variance.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub variance: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat::default();
        }
        let mean = values.iter().sum::<f64>() / n;
        let variance = if values.len() < 2 {
            0.0
        } else {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        };
        Stat { mean, variance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub size: usize,
    pub method: Method,
    pub seed: u64,
    /// Ids of the training subset used in the final epochs.
    pub selected: Vec<String>,
    pub theta_hat: ContactParams,
    pub vertex_rmse: Option<f64>,
    pub metrics: EvalMetrics,
    pub final_loss: f64,
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub size: usize,
    pub method: Method,
    pub runs: usize,
    pub vertex_rmse: Option<Stat>,
    pub traj_pos_error: Stat,
    pub traj_rot_error: Stat,
    pub penetration_error: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub runs: Vec<ExperimentRun>,
    pub cells: Vec<ExperimentCell>,
}

impl ExperimentTable {
    pub fn cell(&self, size: usize, method: Method) -> Option<&ExperimentCell> {
        self.cells.iter().find(|c| c.size == size && c.method == method)
    }
}

/// For every `(size, method, seed)`: select a subset of the training pool,
/// fit from `theta0`, and evaluate on the held-out tosses.
///
/// Selections other than random ignore the seed, and so does the fit, whose
/// minibatch order derives from the root seed only. Runs that share every
/// input are therefore computed once and reported for each seed.
pub fn curation_experiment(
    dataset: &[Trajectory],
    theta0: &ContactParams,
    truth: Option<&ContactParams>,
    sizes: &[usize],
    methods: &[Method],
    seeds: &[u64],
    settings: &ExperimentSettings,
) -> Result<ExperimentTable> {
    if sizes.is_empty() || methods.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidInput("sizes, methods and seeds must be nonempty".into()));
    }
    let split = split_dataset(dataset.len(), settings.train_fraction, seed::derive(settings.seed, "split", 0))?;
    let pool: Vec<Trajectory> = split.train.iter().map(|&i| dataset[i].clone()).collect();
    let test: Vec<Trajectory> = split.test.iter().map(|&i| dataset[i].clone()).collect();
    if let Some(&too_big) = sizes.iter().find(|&&s| s == 0 || s > pool.len()) {
        return Err(Error::InvalidInput(format!(
            "subset size {too_big} must lie in 1..={} (training pool)",
            pool.len()
        )));
    }
    let model = &settings.model;
    let initial_scores: Vec<DVector<f64>> = trajectory_scores(&pool, theta0, model)?.into_iter().map(|s| s.g).collect();

    let mut jobs: Vec<(usize, Method, u64)> = Vec::new();
    for &size in sizes {
        for &method in methods {
            for &s in seeds {
                let key = (size, method, if method.is_seeded() { s } else { 0 });
                if !jobs.contains(&key) {
                    jobs.push(key);
                }
            }
        }
    }
    let fit_seed = seed::derive(settings.seed, "fit", 0);
    let run_job = |&(size, method, s): &(usize, Method, u64)| -> Result<(FitReport, Vec<usize>)> {
        let select_seed = seed::derive(settings.seed, "select", s);
        let selector = |theta: &ContactParams| -> Result<Vec<usize>> {
            let scores = if theta == theta0 || method == Method::Random {
                initial_scores.clone()
            } else {
                trajectory_scores(&pool, theta, model)?.into_iter().map(|s| s.g).collect()
            };
            Ok(select(method, &scores, size, select_seed, settings.ridge)?.ordered_indices)
        };
        let mut opt = settings.optimizer;
        if method == Method::Random {
            opt.refresh_every = 0;
        }
        let (mut report, selections) = fit_with_refresh(&pool, theta0, model, &opt, fit_seed, selector)?;
        report.vertex_rmse = truth.map(|t| report.theta_hat.vertex_rmse(t));
        report.metrics = Some(eval_metrics(&report.theta_hat, &test, model, &settings.solver, truth)?);
        Ok((report, selections.last().cloned().unwrap_or_default()))
    };
    let results: Vec<(FitReport, Vec<usize>)> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            jobs.par_iter().map(run_job).collect::<Result<_>>()?
        }
        #[cfg(not(feature = "parallel"))]
        {
            jobs.iter().map(run_job).collect::<Result<_>>()?
        }
    };

    let mut runs = Vec::new();
    let mut cells = Vec::new();
    for &size in sizes {
        for &method in methods {
            let mut cell_runs = Vec::new();
            for &s in seeds {
                let key = (size, method, if method.is_seeded() { s } else { 0 });
                let j = jobs.iter().position(|k| *k == key).expect("job scheduled");
                let (report, selected) = &results[j];
                cell_runs.push(ExperimentRun {
                    size,
                    method,
                    seed: s,
                    selected: selected.iter().map(|&i| pool[i].id.clone()).collect(),
                    theta_hat: report.theta_hat.clone(),
                    vertex_rmse: report.vertex_rmse,
                    metrics: report.metrics.expect("evaluated"),
                    final_loss: *report.loss_history.last().expect("nonempty history"),
                    low_confidence: report.low_confidence,
                });
            }
            let col = |f: &dyn Fn(&ExperimentRun) -> f64| Stat::of(&cell_runs.iter().map(f).collect::<Vec<_>>());
            cells.push(ExperimentCell {
                size,
                method,
                runs: cell_runs.len(),
                vertex_rmse: truth.map(|_| col(&|r| r.vertex_rmse.unwrap_or(0.0))),
                traj_pos_error: col(&|r| r.metrics.traj_pos_error),
                traj_rot_error: col(&|r| r.metrics.traj_rot_error),
                penetration_error: col(&|r| r.metrics.penetration_error),
            });
            runs.extend(cell_runs);
        }
    }
    Ok(ExperimentTable {
        train_ids: pool.iter().map(|t| t.id.clone()).collect(),
        test_ids: test.iter().map(|t| t.id.clone()).collect(),
        runs,
        cells,
    })
}
