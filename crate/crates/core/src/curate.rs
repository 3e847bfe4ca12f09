//! Dataset ranking and subset selection.
//!
//! Every selector works on per-trajectory score vectors. [`trajectory_scores`]
//! computes them (in parallel when the `parallel` feature is on); the output
//! order always follows the dataset order.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contact_model::ContactParams;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::fisher::{empirical_fim, subset_identity_gap, Normalization, Reduction};
use crate::loss::{evaluate_trajectory, LossModel, ScoreVector, TrajectoryEvaluation};

/// Selection method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "trace")]
    Trace,
    #[serde(rename = "logdet")]
    LogDet,
    #[serde(rename = "mineig")]
    MinEig,
    #[serde(rename = "det")]
    Det,
    #[serde(rename = "info-orth")]
    InfoOrthogonal,
    #[serde(rename = "random")]
    Random,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Trace,
        Method::LogDet,
        Method::MinEig,
        Method::Det,
        Method::InfoOrthogonal,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Trace => "trace",
            Method::LogDet => "logdet",
            Method::MinEig => "mineig",
            Method::Det => "det",
            Method::InfoOrthogonal => "info-orth",
            Method::Random => "random",
        }
    }

    pub fn reduction(self) -> Option<Reduction> {
        match self {
            Method::Trace => Some(Reduction::Trace),
            Method::LogDet => Some(Reduction::LogDet),
            Method::MinEig => Some(Reduction::MinEig),
            Method::Det => Some(Reduction::Det),
            Method::InfoOrthogonal | Method::Random => None,
        }
    }

    /// Whether the selection depends on a random seed.
    pub fn is_seeded(self) -> bool {
        self == Method::Random
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown method {s:?} (trace|logdet|mineig|det|info-orth|random)"
                ))
            })
    }
}

/// Selected dataset indices, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub ordered_indices: Vec<usize>,
    /// For reduction methods the reduction of each trajectory's information;
    /// for info-orthogonal selection the largest absolute cosine between the
    /// pick and the earlier picks; zero for random selection.
    pub values: Vec<f64>,
    pub method: Method,
    pub k_thresh: usize,
    /// The requested reduction is degenerate on rank-one information and the
    /// ranking used the trace instead.
    pub trace_fallback: bool,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("k = {k} exceeds dataset size {n}")));
    }
    Ok(())
}

/// Loss evaluations of every trajectory at `params`, in dataset order.
pub fn evaluate_dataset(
    dataset: &[Trajectory],
    params: &ContactParams,
    model: &LossModel,
    with_information: bool,
) -> Result<Vec<TrajectoryEvaluation>> {
    let eval = |t: &Trajectory| evaluate_trajectory(t, params, model, with_information);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        dataset.par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        dataset.iter().map(eval).collect()
    }
}

pub fn trajectory_scores(dataset: &[Trajectory], params: &ContactParams, model: &LossModel) -> Result<Vec<ScoreVector>> {
    Ok(evaluate_dataset(dataset, params, model, false)?
        .into_iter()
        .map(|e| e.score)
        .collect())
}

/// Sorts by value descending with ties to the lower index.
fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Ranks trajectories by a reduction of their individual information `g g^T`
/// and keeps the best `k_thresh`.
pub fn rank_scores(scores: &[DVector<f64>], phi: Reduction, k_thresh: usize, ridge: f64) -> Result<RankResult> {
    check_k(k_thresh, scores.len())?;
    let d = scores[0].len();
    let trace_fallback = phi.needs_full_rank() && d > 1;
    let used = if trace_fallback { Reduction::Trace } else { phi };
    let values: Vec<f64> = scores
        .iter()
        .map(|g| Ok(empirical_fim([g], Normalization::Mean)?.reduce(used, ridge)))
        .collect::<Result<_>>()?;
    let order = descending(&values);
    let top = &order[..k_thresh];
    Ok(RankResult {
        ordered_indices: top.to_vec(),
        values: top.iter().map(|&i| values[i]).collect(),
        method: method_of(phi),
        k_thresh,
        trace_fallback,
    })
}

fn method_of(phi: Reduction) -> Method {
    match phi {
        Reduction::Trace => Method::Trace,
        Reduction::LogDet => Method::LogDet,
        Reduction::MinEig => Method::MinEig,
        Reduction::Det => Method::Det,
    }
}

/// Dataset ranker: score every trajectory at `params`, then [`rank_scores`].
pub fn rank(
    dataset: &[Trajectory],
    params: &ContactParams,
    model: &LossModel,
    phi: Reduction,
    k_thresh: usize,
    ridge: f64,
) -> Result<RankResult> {
    check_k(k_thresh, dataset.len())?;
    let scores = trajectory_scores(dataset, params, model)?;
    let g: Vec<_> = scores.into_iter().map(|s| s.g).collect();
    rank_scores(&g, phi, k_thresh, ridge)
}

/// Overlaps closer than this are treated as ties.
const TIE: f64 = 1e-12;

/// Greedy selection of mutually orthogonal score directions.
///
/// Starts from the largest score and repeatedly adds the candidate whose
/// largest absolute cosine with the selected set is smallest; ties go to the
/// larger norm, then the lower index. Zero scores are only taken once every
/// nonzero score has been used.
pub fn info_orthogonal_scores(scores: &[DVector<f64>], k: usize) -> Result<RankResult> {
    check_k(k, scores.len())?;
    let norms: Vec<f64> = scores.iter().map(|g| g.norm()).collect();
    let units: Vec<Option<DVector<f64>>> = scores
        .iter()
        .zip(&norms)
        .map(|(g, &n)| (n > 0.0).then(|| g / n))
        .collect();
    let mut taken = vec![false; scores.len()];
    let mut max_overlap = vec![0.0_f64; scores.len()];
    let mut ordered = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);

    while ordered.len() < k {
        let mut best: Option<usize> = None;
        for i in (0..scores.len()).filter(|&i| !taken[i] && units[i].is_some()) {
            best = match best {
                None => Some(i),
                Some(b) => {
                    let (oi, ob) = (max_overlap[i], max_overlap[b]);
                    let better = if (oi - ob).abs() > TIE { oi < ob } else { norms[i] > norms[b] };
                    Some(if better { i } else { b })
                }
            };
        }
        let Some(pick) = best else { break };
        taken[pick] = true;
        ordered.push(pick);
        values.push(max_overlap[pick]);
        let u = units[pick].as_ref().expect("nonzero pick");
        for (i, ui) in units.iter().enumerate() {
            if let (false, Some(ui)) = (taken[i], ui) {
                max_overlap[i] = max_overlap[i].max(ui.dot(u).abs());
            }
        }
    }
    for i in 0..scores.len() {
        if ordered.len() == k {
            break;
        }
        if !taken[i] {
            taken[i] = true;
            ordered.push(i);
            values.push(0.0);
        }
    }
    Ok(RankResult {
        ordered_indices: ordered,
        values,
        method: Method::InfoOrthogonal,
        k_thresh: k,
        trace_fallback: false,
    })
}

pub fn info_orthogonal_select(
    dataset: &[Trajectory],
    params: &ContactParams,
    model: &LossModel,
    k: usize,
) -> Result<RankResult> {
    check_k(k, dataset.len())?;
    let scores = trajectory_scores(dataset, params, model)?;
    let g: Vec<_> = scores.into_iter().map(|s| s.g).collect();
    info_orthogonal_scores(&g, k)
}

/// Uniform sample of `k` of `n` indices without replacement.
pub fn random_select(n: usize, k: usize, seed: u64) -> Result<RankResult> {
    check_k(k, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ordered = rand::seq::index::sample(&mut rng, n, k).into_vec();
    Ok(RankResult {
        ordered_indices: ordered,
        values: vec![0.0; k],
        method: Method::Random,
        k_thresh: k,
        trace_fallback: false,
    })
}

/// Dispatches to the selector for `method` given precomputed scores.
pub fn select(method: Method, scores: &[DVector<f64>], k: usize, seed: u64, ridge: f64) -> Result<RankResult> {
    match method {
        Method::InfoOrthogonal => info_orthogonal_scores(scores, k),
        Method::Random => random_select(scores.len(), k, seed),
        m => rank_scores(scores, m.reduction().expect("reduction method"), k, ridge),
    }
}

/// Subsets grown greedily to minimize the subset identity gap against the
/// mean information of the full set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCurve {
    /// Selection order.
    pub indices: Vec<usize>,
    /// `gaps[j]` is the gap of the first `j + 1` indices.
    pub gaps: Vec<f64>,
}

pub fn greedy_gap_select(scores: &[DVector<f64>], max_size: usize, ridge: f64) -> Result<GapCurve> {
    check_k(max_size, scores.len())?;
    let full = empirical_fim(scores, Normalization::Mean)?;
    let mut chosen: Vec<&DVector<f64>> = Vec::with_capacity(max_size);
    let mut taken = vec![false; scores.len()];
    let mut curve = GapCurve { indices: Vec::new(), gaps: Vec::new() };
    for _ in 0..max_size {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..scores.len()).filter(|&i| !taken[i]) {
            chosen.push(&scores[i]);
            let sub = empirical_fim(chosen.iter().copied(), Normalization::Mean)?;
            chosen.pop();
            let gap = subset_identity_gap(&sub, &full, ridge)?;
            if best.map_or(true, |(_, g)| gap < g) {
                best = Some((i, gap));
            }
        }
        let (pick, gap) = best.expect("candidates remain while size <= n");
        taken[pick] = true;
        chosen.push(&scores[pick]);
        curve.indices.push(pick);
        curve.gaps.push(gap);
    }
    Ok(curve)
}
