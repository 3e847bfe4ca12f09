//! Polytope contact geometry against the ground plane `z = 0`.
//!
//! The block is described by eight body-frame vertices and one global
//! friction coefficient. The flattened parameter vector has the fixed order
//!
//! ```text
//! [v1.x, v1.y, v1.z, v2.x, ..., v8.z, mu]      (dimension 25)
//! ```
//!
//! Generalized velocities are `(v, w)` with `v` the world-frame linear
//! velocity and `w` the body-frame angular velocity. For a world direction
//! `d` the velocity of vertex `r` along `d` is `d.v + (r x R^T d).w`, which
//! gives every Jacobian row below.

use nalgebra::{DVector, Matrix3, SMatrix, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::BlockState;
use crate::error::{Error, Result};

pub const NUM_VERTICES: usize = 8;
pub const PARAM_DIM: usize = 3 * NUM_VERTICES + 1;
/// Index of the friction coefficient in the flattened parameter vector.
pub const MU_INDEX: usize = PARAM_DIM - 1;

/// Learnable contact parameters: vertex offsets (body frame, m) and friction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct ContactParams {
    pub vertices: [Vector3<f64>; NUM_VERTICES],
    pub mu: f64,
}

impl ContactParams {
    /// Box-shaped polytope. Vertices 0..4 form the `-z` face and 4..8 the
    /// `+z` face, each face ordered counter-clockwise seen from above.
    pub fn cuboid(half_extents: Vector3<f64>, mu: f64) -> Self {
        let signs = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        let mut vertices = [Vector3::zeros(); NUM_VERTICES];
        for (face, sz) in [-1.0, 1.0].into_iter().enumerate() {
            for (i, (sx, sy)) in signs.iter().enumerate() {
                vertices[4 * face + i] = Vector3::new(
                    sx * half_extents.x,
                    sy * half_extents.y,
                    sz * half_extents.z,
                );
            }
        }
        Self { vertices, mu }
    }

    pub fn cube(half_extent: f64, mu: f64) -> Self {
        Self::cuboid(Vector3::repeat(half_extent), mu)
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.to_vec())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(PARAM_DIM);
        for v in &self.vertices {
            out.extend_from_slice(v.as_slice());
        }
        out.push(self.mu);
        out
    }

    /// Inverse of [`ContactParams::to_vec`]. Only checks length and finiteness;
    /// use [`ContactParams::validate`] for the range constraints.
    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        if theta.len() != PARAM_DIM {
            return Err(Error::DimensionMismatch {
                expected: PARAM_DIM,
                got: theta.len(),
            });
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("contact parameters".into()));
        }
        let mut vertices = [Vector3::zeros(); NUM_VERTICES];
        for (k, v) in vertices.iter_mut().enumerate() {
            *v = Vector3::new(theta[3 * k], theta[3 * k + 1], theta[3 * k + 2]);
        }
        Ok(Self {
            vertices,
            mu: theta[MU_INDEX],
        })
    }

    /// Checks `mu >= 0` and that every vertex coordinate lies in `[-bound, bound]`.
    pub fn validate(&self, bound: f64) -> Result<()> {
        if !self.mu.is_finite() || self.vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite("contact parameters".into()));
        }
        if self.mu < 0.0 {
            return Err(Error::Schema {
                path: "theta[24] (mu)".into(),
                message: format!("friction coefficient must be >= 0, got {}", self.mu),
            });
        }
        for (k, v) in self.vertices.iter().enumerate() {
            for (axis, x) in v.iter().enumerate() {
                if x.abs() > bound {
                    return Err(Error::Schema {
                        path: format!("theta[{}] (vertex {k})", 3 * k + axis),
                        message: format!("{x} outside parameter box +-{bound}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Projects onto the feasible set: vertex box and `mu >= 0`.
    pub fn project(&mut self, bound: f64) {
        for v in &mut self.vertices {
            v.apply(|x| *x = x.clamp(-bound, bound));
        }
        self.mu = self.mu.max(0.0);
    }

    /// Root-mean-square vertex position error against `other`, in meters.
    pub fn vertex_rmse(&self, other: &ContactParams) -> f64 {
        let sq: f64 = self
            .vertices
            .iter()
            .zip(&other.vertices)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        (sq / NUM_VERTICES as f64).sqrt()
    }

    /// All vertices scaled about the body origin.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v *= factor;
        }
        out
    }

    /// Largest vertex distance from the body origin.
    pub fn radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl From<ContactParams> for Vec<f64> {
    fn from(p: ContactParams) -> Self {
        p.to_vec()
    }
}

impl TryFrom<Vec<f64>> for ContactParams {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_slice(&v)
    }
}

/// Signed distances and contact Jacobians at one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactKinematics {
    /// Height of each vertex above the ground.
    pub phi: SVector<f64, NUM_VERTICES>,
    /// Row `k`: normal velocity of vertex `k`.
    pub jn: SMatrix<f64, NUM_VERTICES, 6>,
    /// Rows `2k` and `2k + 1`: world x and y velocity of vertex `k`.
    pub jt: SMatrix<f64, { 2 * NUM_VERTICES }, 6>,
}

impl ContactKinematics {
    pub fn normal_row(&self, k: usize) -> Vector6<f64> {
        self.jn.row(k).transpose()
    }

    pub fn tangent_row(&self, k: usize, dir: usize) -> Vector6<f64> {
        self.jt.row(2 * k + dir).transpose()
    }
}

/// `R^T e_i` for the world axes, i.e. the rows of the rotation matrix.
pub(crate) fn body_axes(state: &BlockState) -> [Vector3<f64>; 3] {
    let r = state.orientation.to_rotation_matrix();
    let m = r.matrix();
    [
        m.row(0).transpose(),
        m.row(1).transpose(),
        m.row(2).transpose(),
    ]
}

fn jacobian_row(world_dir: usize, vertex: &Vector3<f64>, axis_in_body: &Vector3<f64>) -> Vector6<f64> {
    let ang = vertex.cross(axis_in_body);
    let mut row = Vector6::zeros();
    row[world_dir] = 1.0;
    row.fixed_rows_mut::<3>(3).copy_from(&ang);
    row
}

pub fn kinematics(params: &ContactParams, state: &BlockState) -> ContactKinematics {
    let rot = state.orientation.to_rotation_matrix();
    let axes = body_axes(state);
    let mut phi = SVector::<f64, NUM_VERTICES>::zeros();
    let mut jn = SMatrix::<f64, NUM_VERTICES, 6>::zeros();
    let mut jt = SMatrix::<f64, { 2 * NUM_VERTICES }, 6>::zeros();
    for (k, v) in params.vertices.iter().enumerate() {
        phi[k] = (rot * v + state.position).z;
        jn.set_row(k, &jacobian_row(2, v, &axes[2]).transpose());
        jt.set_row(2 * k, &jacobian_row(0, v, &axes[0]).transpose());
        jt.set_row(2 * k + 1, &jacobian_row(1, v, &axes[1]).transpose());
    }
    ContactKinematics { phi, jn, jt }
}

/// Derivatives of [`ContactKinematics`] with respect to the parameters.
///
/// Every quantity of vertex `k` depends on that vertex alone, and nothing
/// kinematic depends on `mu`, so only the per-vertex blocks are stored. The
/// linear halves of the Jacobian rows are constant and have zero derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicsJacobian {
    /// `d phi_k / d v_k` (the third row of `R`).
    pub dphi: [Vector3<f64>; NUM_VERTICES],
    /// `d (angular half of J_n row k) / d v_k`.
    pub djn: [Matrix3<f64>; NUM_VERTICES],
    /// `d (angular half of J_t row 2k + dir) / d v_k`.
    pub djt: [[Matrix3<f64>; 2]; NUM_VERTICES],
}

impl KinematicsJacobian {
    /// Full gradient of `phi_k` over the flattened parameter vector.
    pub fn phi_gradient(&self, k: usize) -> DVector<f64> {
        let mut g = DVector::zeros(PARAM_DIM);
        g.fixed_rows_mut::<3>(3 * k).copy_from(&self.dphi[k]);
        g
    }
}

pub fn kinematics_param_jacobian(_params: &ContactParams, state: &BlockState) -> KinematicsJacobian {
    let axes = body_axes(state);
    // d(v x a)/dv = -[a]x, independent of v itself.
    let neg_skew = |a: &Vector3<f64>| -a.cross_matrix();
    let djn_k = neg_skew(&axes[2]);
    let djt_k = [neg_skew(&axes[0]), neg_skew(&axes[1])];
    KinematicsJacobian {
        dphi: [axes[2]; NUM_VERTICES],
        djn: [djn_k; NUM_VERTICES],
        djt: [djt_k; NUM_VERTICES],
    }
}
