//! Experiment configuration. Every field except `version` has a default, and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_json, read_text, FORMAT_VERSION};
use crate::contact_model::ContactParams;
use crate::curate::Method;
use crate::design::{DesignSettings, TossDistribution};
use crate::error::{Error, Result};
use crate::estimate::{ExperimentSettings, OptimizerSettings};
use crate::fisher::{Normalization, DEFAULT_RIDGE};
use crate::loss::{InnerSolverSettings, LossModel, TermWeights};
use crate::synth::{SimSettings, TossFamily};

/// Synthetic data generation for `simulate` and the curation experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSettings {
    pub n_tosses: usize,
    pub family: TossFamily,
    /// Overrides `family` when present.
    pub distribution: Option<TossDistribution>,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            n_tosses: 64,
            family: TossFamily::Mixed,
            distribution: None,
        }
    }
}

/// Sizes, methods and seeds of the curation experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            sizes: vec![8, 16, 32],
            methods: vec![Method::Trace, Method::Random],
            seeds: vec![0, 1, 2],
            train_fraction: 0.8,
        }
    }
}

/// Where the generating parameters and the initial estimate come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSettings {
    /// Params file of the simulated ground truth; a cube of half extent
    /// `truth_half_extent` with friction `truth_mu` when absent.
    pub truth: Option<PathBuf>,
    pub truth_half_extent: f64,
    pub truth_mu: f64,
    /// Params file of the initial estimate; otherwise the truth with each
    /// vertex coordinate shifted uniformly within `initial_perturbation` and
    /// friction `initial_mu`.
    pub initial: Option<PathBuf>,
    pub initial_perturbation: f64,
    pub initial_mu: f64,
}

impl Default for ParamsSettings {
    fn default() -> Self {
        Self {
            truth: None,
            truth_half_extent: 0.05,
            truth_mu: 0.3,
            initial: None,
            initial_perturbation: 0.01,
            initial_mu: 0.45,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Root of every random stream.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Subset size for `rank` and `select`; all trajectories when absent.
    #[serde(default)]
    pub k_thresh: Option<usize>,
    /// Relative ridge added before log-determinants, inverses and
    /// eigenvalue reductions.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub weights: TermWeights,
    #[serde(default)]
    pub inner_solver: InnerSolverSettings,
    #[serde(default)]
    pub simulation: SimSettings,
    #[serde(default)]
    pub data: DataSettings,
    #[serde(default)]
    pub params: ParamsSettings,
    #[serde(default)]
    pub design: DesignSettings,
    #[serde(default)]
    pub experiment: ExperimentPlan,
}

fn default_method() -> Method {
    Method::Trace
}

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: FORMAT_VERSION,
            seed: 0,
            method: default_method(),
            k_thresh: None,
            ridge: DEFAULT_RIDGE,
            normalization: Normalization::default(),
            optimizer: OptimizerSettings::default(),
            weights: TermWeights::default(),
            inner_solver: InnerSolverSettings::default(),
            simulation: SimSettings::default(),
            data: DataSettings::default(),
            params: ParamsSettings::default(),
            design: DesignSettings::default(),
            experiment: ExperimentPlan::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| {
            Err(Error::Schema {
                path: path.into(),
                message,
            })
        };
        if self.version != FORMAT_VERSION {
            return bad("version", format!("unsupported version {}", self.version));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad("ridge", "must be finite and >= 0".into());
        }
        if self.k_thresh == Some(0) {
            return bad("k_thresh", "must be at least 1".into());
        }
        self.optimizer.validate()?;
        self.design.validate()?;
        self.weights.validate()?;
        self.simulation.physics.mass.validate()?;
        if self.inner_solver.max_iterations == 0 || !(self.inner_solver.tolerance > 0.0) {
            return bad("inner_solver", "max_iterations and tolerance must be positive".into());
        }
        let sim = &self.simulation;
        if !(sim.dt > 0.0 && sim.dt.is_finite()) {
            return bad("simulation.dt", "must be positive".into());
        }
        if sim.horizon < 2 {
            return bad("simulation.horizon", "must be at least 2".into());
        }
        if self.data.n_tosses == 0 {
            return bad("data.n_tosses", "must be at least 1".into());
        }
        if let Some(d) = &self.data.distribution {
            d.validate()?;
        }
        let p = &self.params;
        for (name, x) in [
            ("params.truth_half_extent", p.truth_half_extent),
            ("params.truth_mu", p.truth_mu),
            ("params.initial_perturbation", p.initial_perturbation),
            ("params.initial_mu", p.initial_mu),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(name, "must be finite and >= 0".into());
            }
        }
        let plan = &self.experiment;
        if plan.sizes.is_empty() || plan.sizes.contains(&0) {
            return bad("experiment.sizes", "must be nonempty and positive".into());
        }
        if plan.methods.is_empty() || plan.seeds.is_empty() {
            return bad("experiment", "methods and seeds must be nonempty".into());
        }
        if !(plan.train_fraction > 0.0 && plan.train_fraction < 1.0) {
            return bad("experiment.train_fraction", "must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn loss_model(&self) -> LossModel {
        LossModel {
            physics: self.simulation.physics,
            weights: self.weights,
            inner: self.inner_solver,
        }
    }

    pub fn experiment_settings(&self) -> ExperimentSettings {
        ExperimentSettings {
            optimizer: self.optimizer,
            model: self.loss_model(),
            solver: self.simulation.solver,
            ridge: self.ridge,
            train_fraction: self.experiment.train_fraction,
            seed: self.seed,
        }
    }

    pub fn toss_distribution(&self) -> Option<TossDistribution> {
        self.data.distribution.clone().or_else(|| self.data.family.distribution())
    }

    /// Generating parameters; relative paths resolve against `base`.
    pub fn truth(&self, base: &Path) -> Result<ContactParams> {
        match &self.params.truth {
            Some(p) => super::params::load_params(&base.join(p)),
            None => Ok(ContactParams::cube(self.params.truth_half_extent, self.params.truth_mu)),
        }
    }

    /// Initial estimate; relative paths resolve against `base`.
    pub fn initial(&self, base: &Path) -> Result<ContactParams> {
        match &self.params.initial {
            Some(p) => super::params::load_params(&base.join(p)),
            None => Ok(crate::synth::perturbed(
                &self.truth(base)?,
                self.params.initial_perturbation,
                self.params.initial_mu,
                crate::io::seed::derive(self.seed, "initial", 0),
            )),
        }
    }
}

pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = parse_json(text, origin)?;
    config.validate().map_err(|e| match e {
        Error::Schema { path, message } => Error::Schema {
            path: format!("{}: {path}", origin.display()),
            message,
        },
        other => other,
    })?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config(text, Path::new("c.json"))
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse("{\"version\": 1}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c = ExperimentConfig::default();
        c.seed = 17;
        c.design.cem = true;
        c.experiment.methods = vec![Method::InfoOrthogonal, Method::Random];
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(parse(&text).unwrap(), c);
    }

    #[test]
    fn violations_carry_field_paths() {
        let err = |t: &str| parse(t).unwrap_err().to_string();
        assert!(err("{}").contains("version"));
        assert!(err("{\"version\": 1, \"sed\": 3}").contains("sed"));
        assert!(err("{\"version\": 1, \"optimizer\": {\"step_size\": \"big\"}}").contains("optimizer.step_size"));
        assert!(err("{\"version\": 1, \"optimizer\": {\"momentum\": 1.5}}").contains("optimizer.momentum"));
        assert!(err("{\"version\": 1, \"design\": {\"n_candidates\": 0}}").contains("design.n_candidates"));
        assert!(err("{\"version\": 1, \"method\": \"best\"}").contains("method"));
        assert!(err("{\"version\": 1, \"experiment\": {\"sizes\": []}}").contains("experiment.sizes"));
        assert!(err("{\"version\": 3}").contains("version"));
    }

    #[test]
    fn initial_estimate_is_seeded() {
        let c = ExperimentConfig::default();
        let base = Path::new(".");
        let a = c.initial(base).unwrap();
        assert_eq!(a, c.initial(base).unwrap());
        let truth = c.truth(base).unwrap();
        assert!(a.vertex_rmse(&truth) > 0.0 && a.vertex_rmse(&truth) <= 0.01 * 3f64.sqrt());
        assert_eq!(a.mu, 0.45);
    }
}
