//! Empirical Fisher information, scalar reductions of it, and the subset
//! identity gap used to judge how well a data subset stands in for the whole.
//!
//! Ridges are relative: a ridge `r` adds `r * trace(F) / d` to the diagonal,
//! so every reduction ordering is invariant to a common rescaling of the
//! scores.

use accurate::sum::i_fast_sum_in_place;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `F = (1/N) sum g g^T`
    #[default]
    Mean,
    /// `F = sum g g^T`
    Sum,
}

/// Scalar utility of an information matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Trace,
    LogDet,
    MinEig,
    Det,
}

impl Reduction {
    pub const ALL: [Reduction; 4] = [Reduction::Trace, Reduction::LogDet, Reduction::MinEig, Reduction::Det];

    pub fn name(self) -> &'static str {
        match self {
            Reduction::Trace => "trace",
            Reduction::LogDet => "logdet",
            Reduction::MinEig => "mineig",
            Reduction::Det => "det",
        }
    }

    /// True if the reduction is identically degenerate on a rank-deficient matrix.
    pub fn needs_full_rank(self) -> bool {
        !matches!(self, Reduction::Trace)
    }
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Reduction::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown reduction {s:?} (trace|logdet|mineig|det)")))
    }
}

/// Symmetric positive semi-definite information matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FisherRepr", into = "FisherRepr")]
pub struct FisherMatrix {
    matrix: DMatrix<f64>,
    n_samples: usize,
    normalization: Normalization,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FisherRepr {
    n_samples: usize,
    normalization: Normalization,
    /// Row-major rows.
    matrix: Vec<Vec<f64>>,
}

impl From<FisherMatrix> for FisherRepr {
    fn from(f: FisherMatrix) -> Self {
        let d = f.dim();
        FisherRepr {
            n_samples: f.n_samples,
            normalization: f.normalization,
            matrix: (0..d).map(|i| f.matrix.row(i).iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<FisherRepr> for FisherMatrix {
    type Error = Error;

    fn try_from(r: FisherRepr) -> Result<Self> {
        let d = r.matrix.len();
        if let Some(row) = r.matrix.iter().find(|row| row.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
        let matrix = DMatrix::from_fn(d, d, |i, j| r.matrix[i][j]);
        FisherMatrix::from_matrix(matrix, r.n_samples, r.normalization)
    }
}

impl FisherMatrix {
    /// Wraps a matrix after checking it is finite, square, symmetric and PSD.
    pub fn from_matrix(matrix: DMatrix<f64>, n_samples: usize, normalization: Normalization) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("information matrix".into()));
        }
        let f = FisherMatrix { matrix: symmetrized(matrix), n_samples, normalization };
        let eig = f.eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if eig.len() > 0 && lo < -1e-9 * hi.max(1.0) {
            return Err(Error::InvalidInput(format!("information matrix is not PSD (min eigenvalue {lo:e})")));
        }
        Ok(f)
    }

    pub fn zeros(dim: usize, normalization: Normalization) -> Self {
        FisherMatrix { matrix: DMatrix::zeros(dim, dim), n_samples: 0, normalization }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.matrix.clone().symmetric_eigenvalues()
    }

    /// Absolute diagonal shift for a relative ridge.
    pub fn ridge_shift(&self, ridge: f64) -> f64 {
        let d = self.dim().max(1) as f64;
        ridge * (self.trace() / d).max(f64::MIN_POSITIVE)
    }

    /// `log det(F + shift I)` via Cholesky; `-inf` if the shifted matrix is singular.
    pub fn logdet(&self, ridge: f64) -> f64 {
        let shift = if ridge > 0.0 { self.ridge_shift(ridge) } else { 0.0 };
        let a = &self.matrix + DMatrix::identity(self.dim(), self.dim()) * shift;
        match a.cholesky() {
            Some(c) => 2.0 * c.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
            None => f64::NEG_INFINITY,
        }
    }

    pub fn reduce(&self, phi: Reduction, ridge: f64) -> f64 {
        match phi {
            Reduction::Trace => self.trace(),
            Reduction::LogDet => self.logdet(ridge),
            Reduction::Det => self.logdet(ridge).exp(),
            Reduction::MinEig => {
                let shift = if ridge > 0.0 { self.ridge_shift(ridge) } else { 0.0 };
                (self.eigenvalues().min() + shift).max(0.0)
            }
        }
    }

    /// Ratio of the largest eigenvalue to the smallest eigenvalue on the
    /// support the samples can span, i.e. the `min(n, d)`-th largest. A sample
    /// set with linearly dependent scores has an infinite condition number.
    pub fn condition_number(&self) -> f64 {
        let mut eig: Vec<f64> = self.eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let r = self.n_samples.min(self.dim());
        if r == 0 || eig[0] <= 0.0 {
            return f64::INFINITY;
        }
        let low = eig[r - 1];
        if low <= eig[0] * 1e-14 {
            f64::INFINITY
        } else {
            eig[0] / low
        }
    }

    /// Summary statistics written to reports.
    pub fn summary(&self, ridge: f64) -> FisherSummary {
        FisherSummary {
            dim: self.dim(),
            n_samples: self.n_samples,
            trace: self.trace(),
            mineig: self.reduce(Reduction::MinEig, ridge),
            logdet: self.logdet(ridge),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherSummary {
    pub dim: usize,
    pub n_samples: usize,
    pub trace: f64,
    pub mineig: f64,
    pub logdet: f64,
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Outer-product information of a set of score vectors.
///
/// Every entry is the correctly rounded sum of its products, so the result
/// does not depend on the order of the scores: a set and any permutation of
/// it give bitwise-equal matrices, and so do a set and its exact duplicate
/// under mean normalization.
pub fn empirical_fim<'a, I>(scores: I, normalization: Normalization) -> Result<FisherMatrix>
where
    I: IntoIterator<Item = &'a DVector<f64>>,
{
    let scores: Vec<&DVector<f64>> = scores.into_iter().collect();
    let first = scores.first().ok_or(Error::Empty("score set"))?;
    let d = first.len();
    for (n, g) in scores.iter().enumerate() {
        if g.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.len() });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("score {n}")));
        }
    }
    let n = scores.len();
    let mut acc = DMatrix::zeros(d, d);
    let mut products = vec![0.0; n];
    for i in 0..d {
        for j in i..d {
            for (p, g) in products.iter_mut().zip(&scores) {
                *p = g[i] * g[j];
            }
            let mut v = i_fast_sum_in_place(&mut products);
            if normalization == Normalization::Mean {
                v /= n as f64;
            }
            acc[(i, j)] = v;
            acc[(j, i)] = v;
        }
    }
    Ok(FisherMatrix { matrix: acc, n_samples: n, normalization })
}

/// Frobenius norm of `(F_sub + eps I)^{-1} (F_full + eps I) - I` with a
/// common shift `eps = ridge * trace(F_full) / d`, so directions excited by
/// neither matrix contribute nothing. Evaluated as
/// `(F_sub + eps I)^{-1} (F_full - F_sub)`, which is exactly zero when the
/// two matrices are equal.
pub fn subset_identity_gap(subset: &FisherMatrix, full: &FisherMatrix, ridge: f64) -> Result<f64> {
    let d = full.dim();
    if subset.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: subset.dim() });
    }
    let shift = full.ridge_shift(ridge);
    let a = subset.matrix() + DMatrix::<f64>::identity(d, d) * shift;
    let x = a
        .lu()
        .solve(&(full.matrix() - subset.matrix()))
        .ok_or_else(|| Error::Divergence("subset information is singular".into()))?;
    Ok(x.norm())
}

/// Location model `y = theta + eps`, `eps ~ N(0, sigma^2 I)`, `n` samples per trial.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLocationModel {
    pub theta: DVector<f64>,
    pub sigma: f64,
    pub n: usize,
}

impl GaussianLocationModel {
    /// Information of `n` samples: `n / sigma^2 I`.
    pub fn fisher(&self) -> DMatrix<f64> {
        let d = self.theta.len();
        DMatrix::identity(d, d) * (self.n as f64 / (self.sigma * self.sigma))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrlbOutcome {
    /// Monte-Carlo covariance of the sample-mean estimator.
    pub covariance: DMatrix<f64>,
    pub fisher_inverse: DMatrix<f64>,
    /// Smallest eigenvalue of `covariance - fisher_inverse`.
    pub gap: f64,
}

/// Monte-Carlo check of the Cramer-Rao bound for the sample-mean MLE.
pub fn crlb_gap(model: &GaussianLocationModel, n_trials: usize, seed: u64) -> Result<CrlbOutcome> {
    if n_trials < 2 || model.n == 0 {
        return Err(Error::InvalidInput("need at least 2 trials and 1 sample".into()));
    }
    if !(model.sigma > 0.0 && model.sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {}", model.sigma)));
    }
    let d = model.theta.len();
    let noise = Normal::new(0.0, model.sigma).expect("sigma checked");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimates = DMatrix::zeros(d, n_trials);
    for t in 0..n_trials {
        let mut sum = DVector::zeros(d);
        for _ in 0..model.n {
            sum += model.theta.map(|th| th + noise.sample(&mut rng));
        }
        estimates.set_column(t, &(sum / model.n as f64));
    }
    let mean = estimates.column_mean();
    let centered = DMatrix::from_fn(d, n_trials, |i, t| estimates[(i, t)] - mean[i]);
    let covariance = &centered * centered.transpose() / (n_trials as f64 - 1.0);
    let fisher_inverse = model
        .fisher()
        .try_inverse()
        .ok_or_else(|| Error::Divergence("singular Fisher matrix".into()))?;
    let gap = (&covariance - &fisher_inverse).symmetric_eigenvalues().min();
    Ok(CrlbOutcome { covariance, fisher_inverse, gap })
}
