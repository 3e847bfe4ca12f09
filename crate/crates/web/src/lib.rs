//! Browser bindings for the demo page in `www/`.
//!
//! Each exported function takes plain numbers and strings and returns a JSON
//! document; the page draws it. Everything runs single-threaded.

use contact_fisher::contact_model::{kinematics, ContactParams};
use contact_fisher::curate::{select, trajectory_scores, Method};
use contact_fisher::design::{design_toss, fit_initial_distribution, DesignSettings};
use contact_fisher::dynamics::{rollout, BlockState, Trajectory};
use contact_fisher::fisher::{empirical_fim, Normalization, DEFAULT_RIDGE};
use contact_fisher::loss::{evaluate_trajectory, LossModel};
use contact_fisher::synth::{mixed_dataset, perturbed, sample_initial, SimSettings, TossFamily};
use contact_fisher::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Short tosses keep the page responsive.
const HORIZON: usize = 100;

fn sim() -> SimSettings {
    SimSettings { horizon: HORIZON, ..Default::default() }
}

fn truth() -> ContactParams {
    ContactParams::cube(0.05, 0.3)
}

/// The estimate scores and designs are evaluated at.
fn estimate() -> ContactParams {
    perturbed(&truth(), 0.01, 0.45, 3)
}

/// Family of toss `i` in [`mixed_dataset`].
fn mixed_family(i: usize) -> &'static str {
    match i % 4 {
        1 => "settling",
        3 => "airborne",
        _ => "contact-rich",
    }
}

#[derive(Serialize)]
struct Curve {
    time: Vec<f64>,
    /// Height of the centre of mass.
    height: Vec<f64>,
    /// Height of the lowest vertex.
    clearance: Vec<f64>,
}

fn curve(traj: &Trajectory, params: &ContactParams) -> Curve {
    Curve {
        time: (0..traj.len()).map(|i| i as f64 * traj.dt).collect(),
        height: traj.states.iter().map(|s| s.position.z).collect(),
        clearance: traj.states.iter().map(|s| kinematics(params, s).phi.min()).collect(),
    }
}

fn information_trace(traj: &Trajectory, model: &LossModel) -> Result<f64> {
    let eval = evaluate_trajectory(traj, &estimate(), model, true)?;
    Ok(eval.information.map_or(0.0, |m| m.trace()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::InvalidInput(e.to_string()))
}

#[derive(Serialize)]
struct TossView {
    family: String,
    contact_steps: usize,
    score_norm: f64,
    information_trace: f64,
    curve: Curve,
}

/// Simulates one toss of `family` and reports how informative it is.
pub fn simulate(family: &str, seed: u64) -> Result<String> {
    let fam: TossFamily = serde_json::from_value(serde_json::Value::String(family.into()))
        .map_err(|_| Error::InvalidInput(format!("unknown family {family:?} (contact-rich|settling|airborne)")))?;
    let dist = fam
        .distribution()
        .ok_or_else(|| Error::InvalidInput("pick a single family".into()))?;
    let x0: BlockState = sample_initial(&dist, 1, seed)[0];
    let s = sim();
    let traj = rollout("toss", &x0, &truth(), s.dt, s.horizon, &s.physics, &s.solver)?;
    let model = LossModel::default();
    let eval = evaluate_trajectory(&traj, &estimate(), &model, false)?;
    to_json(&TossView {
        family: family.into(),
        contact_steps: eval.contact_steps,
        score_norm: eval.score.g.norm(),
        information_trace: information_trace(&traj, &model)?,
        curve: curve(&traj, &truth()),
    })
}

#[derive(Serialize)]
struct RankedToss {
    id: String,
    family: &'static str,
    value: f64,
    score_norm: f64,
}

#[derive(Serialize)]
struct RankView {
    method: &'static str,
    selected: Vec<RankedToss>,
    /// Condition number of the selected subset's information.
    condition_number: f64,
    trace: f64,
}

/// Simulates `n` mixed tosses and selects `k` of them with `method`.
pub fn rank(method: &str, n: usize, k: usize, seed: u64) -> Result<String> {
    let method: Method = method.parse()?;
    if n == 0 || n > 64 {
        return Err(Error::InvalidInput("n must lie in 1..=64".into()));
    }
    let data = mixed_dataset(n, &truth(), &sim(), seed)?;
    let scores: Vec<_> = trajectory_scores(&data, &estimate(), &LossModel::default())?
        .into_iter()
        .map(|s| s.g)
        .collect();
    let picked = select(method, &scores, k, seed, DEFAULT_RIDGE)?;
    let info = empirical_fim(picked.ordered_indices.iter().map(|&i| &scores[i]), Normalization::Mean)?;
    to_json(&RankView {
        method: method.name(),
        selected: picked
            .ordered_indices
            .iter()
            .zip(&picked.values)
            .map(|(&i, &value)| RankedToss {
                id: data[i].id.clone(),
                family: mixed_family(i),
                value,
                score_norm: scores[i].norm(),
            })
            .collect(),
        condition_number: info.condition_number(),
        trace: info.trace(),
    })
}

#[derive(Serialize)]
struct DesignView {
    chosen: usize,
    values: Vec<f64>,
    contact_steps: Vec<usize>,
    curve: Curve,
}

/// Best-of-N toss design from the initial-state distribution of a small
/// mixed dataset.
pub fn design(n_candidates: usize, seed: u64) -> Result<String> {
    let pilot = mixed_dataset(16, &truth(), &sim(), 1)?;
    let dist = fit_initial_distribution(&pilot)?;
    let settings = DesignSettings { n_candidates, ..Default::default() };
    let theta = estimate();
    let d = design_toss(&dist, &theta, &settings, &sim(), &LossModel::default(), seed)?;
    let chosen = d.candidates.iter().position(|c| c.x0 == d.x0).unwrap_or(0);
    let s = sim();
    let traj = rollout("design", &d.x0, &truth(), s.dt, s.horizon, &s.physics, &s.solver)?;
    to_json(&DesignView {
        chosen,
        values: d.candidates.iter().map(|c| c.value).collect(),
        contact_steps: d.candidates.iter().map(|c| c.contact_steps).collect(),
        curve: curve(&traj, &truth()),
    })
}

fn js(r: Result<String>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = simulateToss)]
pub fn simulate_toss(family: &str, seed: u32) -> std::result::Result<String, JsValue> {
    js(simulate(family, seed.into()))
}

#[wasm_bindgen(js_name = rankTosses)]
pub fn rank_tosses(method: &str, n: u32, k: u32, seed: u32) -> std::result::Result<String, JsValue> {
    js(rank(method, n as usize, k as usize, seed.into()))
}

#[wasm_bindgen(js_name = designToss)]
pub fn design_toss_js(n_candidates: u32, seed: u32) -> std::result::Result<String, JsValue> {
    js(design(n_candidates as usize, seed.into()))
}
