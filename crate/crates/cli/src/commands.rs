use std::path::{Path, PathBuf};

use contact_fisher::contact_model::ContactParams;
use contact_fisher::curate::{select, trajectory_scores, Method, RankResult};
use contact_fisher::design::{fit_initial_distribution, generate_dataset, SimulatedRobot, TossDesign, TossDistribution};
use contact_fisher::dynamics::{Physics, Trajectory};
use contact_fisher::estimate::{curation_experiment, eval_metrics, fit, EvalMetrics, ExperimentTable};
use contact_fisher::fisher::{empirical_fim, subset_identity_gap, FisherSummary};
use contact_fisher::io::manifest::{DatasetManifest, ManifestEntry};
use contact_fisher::io::report::{experiment_csv, ranking_csv, save_report, Report};
use contact_fisher::io::{self, atomic_write, load_config, load_dataset, save_dataset, save_params, seed, ExperimentConfig};
use contact_fisher::loss::LossModel;
use contact_fisher::synth::{mixed_dataset, simulate_tosses, TossFamily};
use contact_fisher::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::{Cli, Command, DataArgs};

struct Context {
    config: ExperimentConfig,
    /// Relative paths inside the config resolve against this directory.
    base: PathBuf,
    out: PathBuf,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self> {
        let (mut config, base) = match &cli.config {
            Some(path) => (load_config(path)?, path.parent().map(Path::to_path_buf).unwrap_or_default()),
            None => (ExperimentConfig::default(), PathBuf::new()),
        };
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        Ok(Self {
            config,
            base,
            out: cli.out.clone(),
        })
    }

    fn validate(&self) -> Result<()> {
        self.config.validate()
    }

    fn params_or_initial(&self, path: Option<&PathBuf>) -> Result<ContactParams> {
        match path {
            Some(p) => io::load_params(p),
            None => self.config.initial(&self.base),
        }
    }

    fn model_for(&self, physics: Physics) -> LossModel {
        LossModel {
            physics,
            ..self.config.loss_model()
        }
    }

    /// Writes `<out>/<command>.json` and returns its path.
    fn report<T: Serialize>(&self, command: &str, result: T) -> Result<PathBuf> {
        let report = Report {
            command: command.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            config: self.config.clone(),
            result,
        };
        let path = self.out.join(format!("{command}.json"));
        save_report(&report, &path)?;
        Ok(path)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        atomic_write(&self.out.join(name), text.as_bytes())
    }

    /// The configured synthetic dataset under the configured ground truth.
    fn simulated(&self, n: usize) -> Result<(ContactParams, Vec<Trajectory>)> {
        let c = &self.config;
        let truth = c.truth(&self.base)?;
        let data_seed = seed::derive(c.seed, "data", 0);
        let data = match (&c.data.distribution, c.data.family) {
            (None, TossFamily::Mixed) => mixed_dataset(n, &truth, &c.simulation, data_seed)?,
            _ => {
                let dist = c.toss_distribution().expect("single family");
                simulate_tosses("toss", &dist, n, &truth, &c.simulation, data_seed)?
            }
        };
        Ok((truth, data))
    }
}

pub fn run(cli: &Cli) -> Result<PathBuf> {
    if let Command::Report { input } = &cli.command {
        return render(input, &cli.out);
    }
    let mut ctx = Context::load(cli)?;
    match &cli.command {
        Command::Simulate { n } => {
            if let Some(n) = n {
                ctx.config.data.n_tosses = *n;
            }
            ctx.validate()?;
            simulate(&ctx)
        }
        Command::Rank { data, method, k } | Command::Select { data, method, k } => {
            if let Some(m) = method {
                ctx.config.method = *m;
            }
            if k.is_some() {
                ctx.config.k_thresh = *k;
            }
            ctx.validate()?;
            let write_subset = matches!(cli.command, Command::Select { .. });
            rank(&ctx, data, write_subset)
        }
        Command::Fit { data, test_manifest, truth } => {
            ctx.validate()?;
            fit_command(&ctx, data, test_manifest.as_deref(), truth.as_deref())
        }
        Command::Experiment { manifest, sizes, methods, seeds } => {
            let plan = &mut ctx.config.experiment;
            if let Some(s) = sizes {
                plan.sizes = s.clone();
            }
            if let Some(m) = methods {
                plan.methods = m.clone();
            }
            if let Some(s) = seeds {
                plan.seeds = s.clone();
            }
            ctx.validate()?;
            experiment(&ctx, manifest.as_deref())
        }
        Command::Design { manifest, params, n_exp, n_candidates } => {
            if let Some(n) = n_candidates {
                ctx.config.design.n_candidates = *n;
            }
            ctx.validate()?;
            design(&ctx, manifest.as_deref(), params.as_ref(), *n_exp)
        }
        Command::Report { .. } => unreachable!("handled above"),
    }
}

#[derive(Serialize)]
struct SimulateResult {
    manifest: PathBuf,
    truth: ContactParams,
    initial: ContactParams,
    ids: Vec<String>,
    contact_steps: Vec<usize>,
}

fn simulate(ctx: &Context) -> Result<PathBuf> {
    let (truth, data) = ctx.simulated(ctx.config.data.n_tosses)?;
    let initial = ctx.config.initial(&ctx.base)?;
    let manifest = save_dataset(&data, &ctx.out, &ctx.config.simulation.physics, "simulated")?;
    save_params(&truth, &ctx.out.join("truth.json"))?;
    save_params(&initial, &ctx.out.join("initial.json"))?;
    let contact_steps = data
        .iter()
        .map(|t| {
            t.states
                .iter()
                .filter(|s| contact_fisher::contact_model::kinematics(&truth, s).phi.min() < ctx.config.simulation.solver.activation_margin)
                .count()
        })
        .collect();
    ctx.report(
        "simulate",
        SimulateResult {
            manifest,
            truth,
            initial,
            ids: data.iter().map(|t| t.id.clone()).collect(),
            contact_steps,
        },
    )
}

#[derive(Serialize)]
struct RankedEntry {
    rank: usize,
    id: String,
    value: f64,
}

#[derive(Serialize)]
struct RankReport {
    manifest: PathBuf,
    theta: ContactParams,
    method: Method,
    k: usize,
    trace_fallback: bool,
    ranking: Vec<RankedEntry>,
    subset_fim: FisherSummary,
    full_fim: FisherSummary,
    identity_gap: f64,
    /// Manifest of the selected subset (select only).
    subset_manifest: Option<PathBuf>,
}

fn rank(ctx: &Context, args: &DataArgs, write_subset: bool) -> Result<PathBuf> {
    let c = &ctx.config;
    let (manifest, data) = load_dataset(&args.manifest)?;
    let theta = ctx.params_or_initial(args.params.as_ref())?;
    let model = ctx.model_for(manifest.physics());
    let k = c.k_thresh.unwrap_or(data.len());
    let scores: Vec<_> = trajectory_scores(&data, &theta, &model)?.into_iter().map(|s| s.g).collect();
    let result: RankResult = select(c.method, &scores, k, seed::derive(c.seed, "select", 0), c.ridge)?;
    let picked: Vec<_> = result.ordered_indices.iter().map(|&i| &scores[i]).collect();
    let subset = empirical_fim(picked.iter().copied(), c.normalization)?;
    let full = empirical_fim(&scores, c.normalization)?;
    let ids: Vec<String> = result.ordered_indices.iter().map(|&i| data[i].id.clone()).collect();

    let subset_manifest = if write_subset {
        Some(write_subset_manifest(&manifest, &args.manifest, &result.ordered_indices, &ctx.out)?)
    } else {
        None
    };
    ctx.write("ranking.csv", &ranking_csv(&ids, &result.values))?;
    let command = if write_subset { "select" } else { "rank" };
    ctx.report(
        command,
        RankReport {
            manifest: args.manifest.clone(),
            theta,
            method: result.method,
            k,
            trace_fallback: result.trace_fallback,
            ranking: ids
                .into_iter()
                .zip(&result.values)
                .enumerate()
                .map(|(i, (id, &value))| RankedEntry { rank: i + 1, id, value })
                .collect(),
            subset_fim: subset.summary(c.ridge),
            full_fim: full.summary(c.ridge),
            identity_gap: subset_identity_gap(&subset, &full, c.ridge)?,
            subset_manifest,
        },
    )
}

/// A manifest listing the chosen entries, pointing at the original files.
fn write_subset_manifest(manifest: &DatasetManifest, source: &Path, picked: &[usize], out: &Path) -> Result<PathBuf> {
    let base = source.parent().unwrap_or(Path::new(""));
    let absolute = |p: &Path| -> Result<PathBuf> {
        let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        std::path::absolute(&joined).map_err(|e| Error::InvalidInput(format!("{}: {e}", joined.display())))
    };
    let trajectories = picked
        .iter()
        .map(|&i| {
            let e = &manifest.trajectories[i];
            Ok(ManifestEntry {
                file: absolute(&e.file)?,
                ..e.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let subset = DatasetManifest {
        trajectories,
        notes: format!("subset of {}", source.display()),
        ..manifest.clone()
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&subset).expect("plain data serializes");
    atomic_write(&path, text.as_bytes())?;
    Ok(path)
}

#[derive(Serialize)]
struct FitResult {
    manifest: PathBuf,
    theta0: ContactParams,
    theta_hat: ContactParams,
    loss_history: Vec<f64>,
    best_epoch: usize,
    vertex_rmse: Option<f64>,
    metrics: Option<EvalMetrics>,
    low_confidence: bool,
}

fn fit_command(ctx: &Context, args: &DataArgs, test: Option<&Path>, truth: Option<&Path>) -> Result<PathBuf> {
    let c = &ctx.config;
    let (manifest, data) = load_dataset(&args.manifest)?;
    let theta0 = ctx.params_or_initial(args.params.as_ref())?;
    let model = ctx.model_for(manifest.physics());
    let report = fit(&data, &theta0, &model, &c.optimizer, seed::derive(c.seed, "fit", 0))?;
    let truth = truth.map(io::load_params).transpose()?;
    let metrics = match test {
        Some(path) => {
            let (_, test_set) = load_dataset(path)?;
            Some(eval_metrics(&report.theta_hat, &test_set, &model, &c.simulation.solver, truth.as_ref())?)
        }
        None => None,
    };
    save_params(&report.theta_hat, &ctx.out.join("theta_hat.json"))?;
    let history: String = std::iter::once("epoch,loss".to_string())
        .chain(report.loss_history.iter().enumerate().map(|(i, l)| format!("{i},{l}")))
        .map(|l| l + "\n")
        .collect();
    ctx.write("loss_history.csv", &history)?;
    ctx.report(
        "fit",
        FitResult {
            manifest: args.manifest.clone(),
            theta0,
            vertex_rmse: truth.as_ref().map(|t| report.theta_hat.vertex_rmse(t)),
            theta_hat: report.theta_hat,
            loss_history: report.loss_history,
            best_epoch: report.best_epoch,
            metrics,
            low_confidence: report.low_confidence,
        },
    )
}

#[derive(Serialize, Deserialize)]
struct ExperimentResult {
    theta0: ContactParams,
    truth: Option<ContactParams>,
    table: ExperimentTable,
}

fn experiment(ctx: &Context, manifest: Option<&Path>) -> Result<PathBuf> {
    let c = &ctx.config;
    let theta0 = c.initial(&ctx.base)?;
    let (truth, data, physics) = match manifest {
        Some(path) => {
            let (m, data) = load_dataset(path)?;
            let truth = c.params.truth.as_ref().map(|_| c.truth(&ctx.base)).transpose()?;
            (truth, data, m.physics())
        }
        None => {
            let (truth, data) = ctx.simulated(c.data.n_tosses)?;
            (Some(truth), data, c.simulation.physics)
        }
    };
    let mut settings = c.experiment_settings();
    settings.model.physics = physics;
    let plan = &c.experiment;
    let table = curation_experiment(&data, &theta0, truth.as_ref(), &plan.sizes, &plan.methods, &plan.seeds, &settings)?;
    ctx.write("experiment.csv", &experiment_csv(&table))?;
    ctx.report("experiment", ExperimentResult { theta0, truth, table })
}

#[derive(Serialize)]
struct DesignResult {
    distribution: TossDistribution,
    theta: ContactParams,
    manifest: PathBuf,
    designs: Vec<TossDesign>,
}

fn design(ctx: &Context, manifest: Option<&Path>, params: Option<&PathBuf>, n_exp: usize) -> Result<PathBuf> {
    let c = &ctx.config;
    let dist = match (manifest, &c.data.distribution) {
        (Some(path), _) => fit_initial_distribution(&load_dataset(path)?.1)?,
        (None, Some(d)) => d.clone(),
        (None, None) => match c.data.family.distribution() {
            Some(d) => d,
            None => fit_initial_distribution(&ctx.simulated(c.data.n_tosses)?.1)?,
        },
    };
    let theta = ctx.params_or_initial(params)?;
    let mut robot = SimulatedRobot {
        params: c.truth(&ctx.base)?,
        sim: c.simulation,
        id_prefix: "design".into(),
    };
    let model = c.loss_model();
    let out = generate_dataset(n_exp, &dist, &theta, &c.design, &c.simulation, &model, &c.optimizer, &mut robot, seed::derive(c.seed, "design", 0))?;
    let trajectories: Vec<Trajectory> = out.iter().map(|d| d.trajectory.clone()).collect();
    let manifest = save_dataset(&trajectories, &ctx.out, &c.simulation.physics, "designed tosses")?;

    let mut audit = String::from("toss,round,candidate,value,contact_steps,converged,chosen\n");
    for (j, d) in out.iter().enumerate() {
        for (i, cand) in d.design.candidates.iter().enumerate() {
            let chosen = cand.x0 == d.design.x0 && cand.value == d.design.expected_info;
            audit += &format!("{j},{},{i},{},{},{},{chosen}\n", cand.round, cand.value, cand.contact_steps, cand.converged);
        }
    }
    ctx.write("candidates.csv", &audit)?;
    ctx.report(
        "design",
        DesignResult {
            distribution: dist,
            theta,
            manifest,
            designs: out.into_iter().map(|d| d.design).collect(),
        },
    )
}

/// Prints a report as text and writes plot-ready CSV next to `out`.
fn render(input: &Path, out: &Path) -> Result<PathBuf> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::Io { path: input.into(), source: e })?;
    let bad = |m: String| Error::Format { path: input.into(), message: m };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let command = value["command"].as_str().ok_or_else(|| bad("no command field".into()))?.to_string();
    let result = &value["result"];
    println!("{command} report ({})", value["timestamp"].as_str().unwrap_or("?"));
    let csv_path = out.join(format!("{command}_plot.csv"));
    match command.as_str() {
        "experiment" => {
            let r: ExperimentResult = serde_json::from_value(result.clone()).map_err(|e| bad(e.to_string()))?;
            println!("{:>5}  {:<10} {:>12} {:>12} {:>12} {:>12}", "size", "method", "vertex_rmse", "traj_pos", "traj_rot", "penetration");
            for cell in &r.table.cells {
                let rmse = cell.vertex_rmse.map_or("-".to_string(), |s| format!("{:.3e}", s.mean));
                println!(
                    "{:>5}  {:<10} {:>12} {:>12.3e} {:>12.3e} {:>12.3e}",
                    cell.size,
                    cell.method.name(),
                    rmse,
                    cell.traj_pos_error.mean,
                    cell.traj_rot_error.mean,
                    cell.penetration_error.mean
                );
            }
            atomic_write(&csv_path, experiment_csv(&r.table).as_bytes())?;
        }
        "rank" | "select" => {
            let mut ids = Vec::new();
            let mut values = Vec::new();
            for e in result["ranking"].as_array().ok_or_else(|| bad("no ranking".into()))? {
                let id = e["id"].as_str().unwrap_or_default().to_string();
                let v = e["value"].as_f64().unwrap_or(f64::NAN);
                println!("{:>4}  {id:<16} {v:.6e}", e["rank"]);
                ids.push(id);
                values.push(v);
            }
            atomic_write(&csv_path, ranking_csv(&ids, &values).as_bytes())?;
        }
        "fit" => {
            let mut csv = String::from("epoch,loss\n");
            for (i, l) in result["loss_history"].as_array().into_iter().flatten().enumerate() {
                println!("epoch {i:>3}  loss {:.6e}", l.as_f64().unwrap_or(f64::NAN));
                csv += &format!("{i},{l}\n");
            }
            atomic_write(&csv_path, csv.as_bytes())?;
        }
        "design" => {
            let mut csv = String::from("toss,expected_info,n_candidates\n");
            for (j, d) in result["designs"].as_array().into_iter().flatten().enumerate() {
                let v = d["expected_info"].as_f64().unwrap_or(f64::NAN);
                println!("toss {j:>3}  expected_info {v:.6e}");
                csv += &format!("{j},{v},{}\n", d["n_candidates"]);
            }
            atomic_write(&csv_path, csv.as_bytes())?;
        }
        "simulate" => {
            let mut csv = String::from("id,contact_steps\n");
            let ids = result["ids"].as_array().into_iter().flatten();
            let steps = result["contact_steps"].as_array().into_iter().flatten();
            for (id, s) in ids.zip(steps) {
                let id = id.as_str().unwrap_or_default();
                println!("{id:<16} contact steps {s}");
                csv += &format!("{id},{s}\n");
            }
            atomic_write(&csv_path, csv.as_bytes())?;
        }
        other => return Err(bad(format!("unknown report command {other:?}"))),
    }
    Ok(csv_path)
}
