//! Contact-implicit trajectory loss and its parameter gradient (the score).
//!
//! For a measured transition `x_i -> x_{i+1}` the loss compares the impulse
//! needed to explain the data, `f_data = M (v_{i+1} - v_free)`, with what the
//! contact model can produce. Impulses are recovered by an inner convex
//! minimization and the four residual groups are
//!
//! ```text
//! prediction       J^T lam - f_data                                   (6)
//! complementarity  phi'_k |lam_k|                                     (8)
//! penetration      min(0, phi'_k)                                     (8)
//! dissipation      |J_t,k v'| lam_t,k + lam_n,k J_t,k v'              (8 x 2)
//! ```
//!
//! with `phi'_k = phi_k + dt J_n,k v'` and `v'` the measured next twist.
//! The tangent Jacobian is friction-scaled (`J_t = mu T`), so the tangential
//! unknowns live in the unit cone `|lam_t,k| <= lam_n,k` and physical friction
//! impulses are `mu lam_t`. This keeps the inner feasible set independent of
//! the parameters, which is what lets the score use the envelope theorem:
//! impulses are held at the inner optimum while differentiating.

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::contact_model::{
    kinematics, kinematics_param_jacobian, ContactKinematics, ContactParams,
    KinematicsJacobian, MU_INDEX, NUM_VERTICES, PARAM_DIM,
};
use crate::dynamics::{free_twist, ImpulseSet, Physics, Trajectory, Twist};
use crate::error::{Error, Result};

const NV: usize = NUM_VERTICES;
const NLAM: usize = 3 * NV;
pub const NUM_RESIDUALS: usize = 6 + NV + NV + 2 * NV;

type LamVec = SVector<f64, NLAM>;
type LamMat = SMatrix<f64, NLAM, NLAM>;
pub type ResidualVector = SVector<f64, NUM_RESIDUALS>;
pub type ResidualJacobian = SMatrix<f64, NUM_RESIDUALS, PARAM_DIM>;

/// Relative weights of the four residual groups.
///
/// Complementarity residuals are products of a gap (m) and an impulse (N s),
/// so with unit weight they are about four orders of magnitude smaller than
/// the prediction residual and barely constrain vertex positions. The
/// default weight of `1e4 = 1 / (1 cm)^2` prices a 1 cm gap under an impulse
/// like an unexplained impulse of the same size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TermWeights {
    pub prediction: f64,
    pub complementarity: f64,
    pub penetration: f64,
    pub dissipation: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        Self {
            prediction: 1.0,
            complementarity: 1e4,
            penetration: 1.0,
            dissipation: 1.0,
        }
    }
}

impl TermWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.prediction, self.complementarity, self.penetration, self.dissipation];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("term weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Accelerated projected gradient settings for impulse recovery.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerSolverSettings {
    pub max_iterations: usize,
    /// Stop once the projected-gradient step is below `tolerance` relative to
    /// the impulse scale `max(|lam|, |c| / L)`.
    pub tolerance: f64,
}

impl Default for InnerSolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            tolerance: 1e-6,
        }
    }
}

/// Everything the loss needs besides data and parameters.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossModel {
    pub physics: Physics,
    pub weights: TermWeights,
    pub inner: InnerSolverSettings,
}

/// Per-step data derived from a measured transition.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResidual {
    /// Generalized impulse gap against the contact-free prediction.
    pub f_data: Twist,
    /// Linearized next-step signed distances.
    pub phi_next: SVector<f64, NV>,
    /// Measured next twist.
    pub v_next: Twist,
    pub kinematics: ContactKinematics,
    pub dt: f64,
}

impl StepResidual {
    /// No impulse to explain and every vertex separating: the inner optimum is zero.
    pub fn is_free_flight(&self) -> bool {
        self.f_data.iter().all(|&x| x == 0.0) && self.phi_next.iter().all(|&p| p > 0.0)
    }

    /// Tangential velocity of vertex `k` under `v'`.
    fn slip(&self, k: usize) -> Vector2<f64> {
        Vector2::new(
            self.kinematics.tangent_row(k, 0).dot(&self.v_next),
            self.kinematics.tangent_row(k, 1).dot(&self.v_next),
        )
    }
}

pub fn step_residual(
    traj: &Trajectory,
    i: usize,
    params: &ContactParams,
    model: &LossModel,
) -> Result<StepResidual> {
    if i + 1 >= traj.states.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: traj.states.len().saturating_sub(1),
        });
    }
    let x = &traj.states[i];
    let v_next = traj.states[i + 1].twist();
    let v_free = free_twist(x, traj.dt, &model.physics);
    let f_data = (v_next - v_free).component_mul(&model.physics.mass.diag());
    let kin = kinematics(params, x);
    let phi_next = kin.phi + (kin.jn * v_next) * traj.dt;
    Ok(StepResidual {
        f_data,
        phi_next,
        v_next,
        kinematics: kin,
        dt: traj.dt,
    })
}

/// Impulses in the friction-scaled parameterization: `|tangential_k| <= normal_k`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScaledImpulses {
    pub normal: [f64; NV],
    pub tangential: [Vector2<f64>; NV],
}

impl ScaledImpulses {
    fn from_vec(x: &LamVec) -> Self {
        let mut out = Self::default();
        for k in 0..NV {
            out.normal[k] = x[3 * k];
            out.tangential[k] = Vector2::new(x[3 * k + 1], x[3 * k + 2]);
        }
        out
    }

    fn to_vec(&self) -> LamVec {
        let mut x = LamVec::zeros();
        for k in 0..NV {
            x[3 * k] = self.normal[k];
            x[3 * k + 1] = self.tangential[k].x;
            x[3 * k + 2] = self.tangential[k].y;
        }
        x
    }

    pub fn to_physical(&self, mu: f64) -> ImpulseSet {
        ImpulseSet {
            normal: self.normal,
            tangential: self.tangential.map(|t| t * mu),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.normal.iter().all(|&x| x == 0.0) && self.tangential.iter().all(|t| t.x == 0.0 && t.y == 0.0)
    }

    fn vertex_norm(&self, k: usize) -> f64 {
        (self.normal[k].powi(2) + self.tangential[k].norm_squared()).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseSolution {
    pub scaled: ScaledImpulses,
    /// Physical impulses (N s).
    pub impulses: ImpulseSet,
    pub converged: bool,
    pub iterations: usize,
}

/// Inner problem as `1/2 x^T H x - c^T x + const`.
struct InnerQuadratic {
    hessian: LamMat,
    linear: LamVec,
}

fn inner_quadratic(res: &StepResidual, mu: f64, w: &TermWeights) -> InnerQuadratic {
    let kin = &res.kinematics;
    let mut a = SMatrix::<f64, 6, NLAM>::zeros();
    for k in 0..NV {
        a.set_column(3 * k, &kin.normal_row(k));
        a.set_column(3 * k + 1, &(kin.tangent_row(k, 0) * mu));
        a.set_column(3 * k + 2, &(kin.tangent_row(k, 1) * mu));
    }
    let mut hessian = a.transpose() * a * (2.0 * w.prediction);
    for k in 0..NV {
        let comp = 2.0 * w.complementarity * res.phi_next[k].powi(2);
        let s = res.slip(k);
        let sn = s.norm();
        // B_k = mu [s | |s| I]
        let b = SMatrix::<f64, 2, 3>::new(mu * s.x, mu * sn, 0.0, mu * s.y, 0.0, mu * sn);
        let block = b.transpose() * b * (2.0 * w.dissipation);
        for r in 0..3 {
            for c in 0..3 {
                hessian[(3 * k + r, 3 * k + c)] += block[(r, c)];
            }
            hessian[(3 * k + r, 3 * k + r)] += comp;
        }
    }
    let linear = a.transpose() * res.f_data * (2.0 * w.prediction);
    InnerQuadratic { hessian, linear }
}

/// Projection onto `{(n, t) : |t| <= n}`.
fn project_cone(n: f64, t: Vector2<f64>) -> (f64, Vector2<f64>) {
    let tn = t.norm();
    if tn <= n {
        (n, t)
    } else if tn <= -n {
        (0.0, Vector2::zeros())
    } else {
        let m = 0.5 * (n + tn);
        (m, t * (m / tn))
    }
}

fn project(x: &LamVec) -> LamVec {
    let mut out = *x;
    for k in 0..NV {
        let (n, t) = project_cone(x[3 * k], Vector2::new(x[3 * k + 1], x[3 * k + 2]));
        out[3 * k] = n;
        out[3 * k + 1] = t.x;
        out[3 * k + 2] = t.y;
    }
    out
}

/// Minimizes the impulse-dependent part of the step loss over the friction
/// cones by accelerated projected gradient with adaptive restart.
pub fn solve_impulses(residual: &StepResidual, params: &ContactParams, model: &LossModel) -> ImpulseSolution {
    solve_impulses_from(residual, params, model, None)
}

/// [`solve_impulses`] started from `warm` (projected onto the cones first),
/// typically the solution of the previous step.
pub fn solve_impulses_from(
    residual: &StepResidual,
    params: &ContactParams,
    model: &LossModel,
    warm: Option<&ScaledImpulses>,
) -> ImpulseSolution {
    let done = |x: &LamVec, converged, iterations| {
        let scaled = ScaledImpulses::from_vec(x);
        ImpulseSolution {
            impulses: scaled.to_physical(params.mu),
            scaled,
            converged,
            iterations,
        }
    };
    let raw = inner_quadratic(residual, params.mu, &model.weights);
    if raw.linear.iter().all(|&c| c == 0.0) {
        // Q(x) - Q(0) = x^T H x / 2 >= 0, so zero is optimal.
        return done(&LamVec::zeros(), true, 0);
    }
    // Solve for y = D^{-1} x with one scale per vertex block. A uniform scale
    // maps each cone onto itself, and it evens out the block diagonals, which
    // differ by orders of magnitude between touching and distant vertices.
    let mut d = LamVec::repeat(1.0);
    for k in 0..NV {
        let m = (0..3).map(|r| raw.hessian[(3 * k + r, 3 * k + r)]).fold(0.0, f64::max);
        if m > 0.0 {
            d.fixed_rows_mut::<3>(3 * k).fill(1.0 / m.sqrt());
        }
    }
    let quad = InnerQuadratic {
        hessian: LamMat::from_diagonal(&d) * raw.hessian * LamMat::from_diagonal(&d),
        linear: raw.linear.component_mul(&d),
    };
    let lipschitz = quad.hessian.symmetric_eigenvalues().max();
    if !(lipschitz > 0.0) {
        return done(&LamVec::zeros(), true, 0);
    }
    let step = 1.0 / lipschitz;
    let settings = &model.inner;
    // Impulses are of order step * |c|; convergence is judged relative to that.
    let scale = step * quad.linear.norm();

    let mut x = warm.map_or_else(LamVec::zeros, |w| project(&w.to_vec()).component_div(&d));
    let mut y = x;
    let mut t = 1.0_f64;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iterations {
        iterations += 1;
        let grad = quad.hessian * y - quad.linear;
        let x_next = project(&(y - grad * step));
        let moved = (x_next - x).norm();
        if (y - x_next).dot(&(x_next - x)) > 0.0 {
            // Momentum points uphill: restart from the plain projected step.
            t = 1.0;
            y = x_next;
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = x_next + (x_next - x) * ((t - 1.0) / t_next);
            t = t_next;
        }
        x = x_next;
        let tol = settings.tolerance * scale.max(x.norm());
        if moved <= tol {
            let g = quad.hessian * x - quad.linear;
            let pg = (x - project(&(x - g * step))).norm();
            if pg <= tol {
                converged = true;
                break;
            }
        }
    }
    done(&x.component_mul(&d), converged, iterations)
}

/// Stacked, weight-scaled residuals of one step at fixed impulses.
pub fn residual_vector(
    res: &StepResidual,
    lam: &ScaledImpulses,
    params: &ContactParams,
    w: &TermWeights,
) -> ResidualVector {
    let kin = &res.kinematics;
    let mu = params.mu;
    let mut out = ResidualVector::zeros();
    let mut gen = -res.f_data;
    for k in 0..NV {
        gen += kin.normal_row(k) * lam.normal[k]
            + (kin.tangent_row(k, 0) * lam.tangential[k].x + kin.tangent_row(k, 1) * lam.tangential[k].y) * mu;
    }
    out.fixed_rows_mut::<6>(0).copy_from(&(gen * w.prediction.sqrt()));
    let (wc, wp, wd) = (
        w.complementarity.sqrt(),
        w.penetration.sqrt(),
        w.dissipation.sqrt(),
    );
    for k in 0..NV {
        let phi = res.phi_next[k];
        out[6 + k] = wc * phi * lam.vertex_norm(k);
        out[6 + NV + k] = wp * phi.min(0.0);
        let s = res.slip(k);
        let h = (lam.tangential[k] * s.norm() + s * lam.normal[k]) * (mu * wd);
        out[6 + 2 * NV + 2 * k] = h.x;
        out[6 + 2 * NV + 2 * k + 1] = h.y;
    }
    out
}

/// Derivative of [`residual_vector`] with respect to the flattened parameters,
/// impulses held fixed.
pub fn residual_jacobian(
    res: &StepResidual,
    lam: &ScaledImpulses,
    params: &ContactParams,
    dkin: &KinematicsJacobian,
    w: &TermWeights,
) -> ResidualJacobian {
    let kin = &res.kinematics;
    let mu = params.mu;
    let omega = Vector3::new(res.v_next[3], res.v_next[4], res.v_next[5]);
    let (wq, wc, wp, wd) = (
        w.prediction.sqrt(),
        w.complementarity.sqrt(),
        w.penetration.sqrt(),
        w.dissipation.sqrt(),
    );
    let mut jac = ResidualJacobian::zeros();

    let mut dpred_dmu = Twist::zeros();
    for k in 0..NV {
        let col = 3 * k;
        let (ln, lt) = (lam.normal[k], lam.tangential[k]);

        // Angular prediction rows: sum over directions of lambda_d * d(row_d)/dv_k.
        let dang = dkin.djn[k] * ln + (dkin.djt[k][0] * lt.x + dkin.djt[k][1] * lt.y) * mu;
        for r in 0..3 {
            for c in 0..3 {
                jac[(3 + r, col + c)] = wq * dang[(r, c)];
            }
        }
        dpred_dmu += kin.tangent_row(k, 0) * lt.x + kin.tangent_row(k, 1) * lt.y;

        // d phi'_k / d v_k = dphi + dt * (dJn)^T w'
        let dphi_next = dkin.dphi[k] + dkin.djn[k].transpose() * omega * res.dt;
        let lam_norm = lam.vertex_norm(k);
        let phi = res.phi_next[k];
        for c in 0..3 {
            jac[(6 + k, col + c)] = wc * lam_norm * dphi_next[c];
            if phi < 0.0 {
                jac[(6 + NV + k, col + c)] = wp * dphi_next[c];
            }
        }

        let s = res.slip(k);
        let sn = s.norm();
        let ds = [
            dkin.djt[k][0].transpose() * omega,
            dkin.djt[k][1].transpose() * omega,
        ];
        let dsn = if sn > 0.0 {
            (ds[0] * s.x + ds[1] * s.y) / sn
        } else {
            Vector3::zeros()
        };
        let row = 6 + 2 * NV + 2 * k;
        for c in 0..3 {
            jac[(row, col + c)] = wd * mu * (lt.x * dsn[c] + ln * ds[0][c]);
            jac[(row + 1, col + c)] = wd * mu * (lt.y * dsn[c] + ln * ds[1][c]);
        }
        let h = lt * sn + s * ln;
        jac[(row, MU_INDEX)] = wd * h.x;
        jac[(row + 1, MU_INDEX)] = wd * h.y;
    }
    for r in 0..6 {
        jac[(r, MU_INDEX)] = wq * dpred_dmu[r];
    }
    jac
}

/// Loss, gradient and (optionally) Gauss-Newton information for one step.
#[derive(Clone, Debug)]
pub struct StepEvaluation {
    pub loss: f64,
    pub gradient: DVector<f64>,
    pub information: Option<DMatrix<f64>>,
    pub solution: ImpulseSolution,
}

fn evaluate_step(
    traj: &Trajectory,
    i: usize,
    params: &ContactParams,
    model: &LossModel,
    with_information: bool,
    warm: Option<&ScaledImpulses>,
) -> Result<Option<StepEvaluation>> {
    let res = step_residual(traj, i, params, model)?;
    if res.is_free_flight() {
        return Ok(None);
    }
    let solution = solve_impulses_from(&res, params, model, warm);
    let r = residual_vector(&res, &solution.scaled, params, &model.weights);
    let state = &traj.states[i];
    let dkin = kinematics_param_jacobian(params, state);
    let jac = residual_jacobian(&res, &solution.scaled, params, &dkin, &model.weights);
    let gradient = jac.transpose() * r * 2.0;
    let information = with_information.then(|| {
        let jt = jac.transpose();
        DMatrix::from_column_slice(PARAM_DIM, PARAM_DIM, (jt * jac).as_slice())
    });
    Ok(Some(StepEvaluation {
        loss: r.norm_squared(),
        gradient: DVector::from_column_slice(gradient.as_slice()),
        information,
        solution,
    }))
}

pub fn step_loss(traj: &Trajectory, i: usize, params: &ContactParams, model: &LossModel) -> Result<f64> {
    let res = step_residual(traj, i, params, model)?;
    if res.is_free_flight() {
        return Ok(0.0);
    }
    let solution = solve_impulses(&res, params, model);
    Ok(residual_vector(&res, &solution.scaled, params, &model.weights).norm_squared())
}

/// Per-trajectory gradient of the mean step loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    pub g: DVector<f64>,
    /// Set when any inner impulse solve stopped at its iteration cap.
    pub low_confidence: bool,
}

impl ScoreVector {
    pub fn norm(&self) -> f64 {
        self.g.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.g.iter().all(|&x| x == 0.0)
    }
}

/// Loss, score and optional expected information of one trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryEvaluation {
    /// Mean step loss.
    pub loss: f64,
    pub score: ScoreVector,
    /// Expected information `E[g g^T]` under unit Gaussian noise on each
    /// residual: `(4 / (T-1)^2) sum_i J_i^T J_i`.
    pub information: Option<DMatrix<f64>>,
    /// Steps with a nonzero inner impulse.
    pub contact_steps: usize,
}

pub fn evaluate_trajectory(
    traj: &Trajectory,
    params: &ContactParams,
    model: &LossModel,
    with_information: bool,
) -> Result<TrajectoryEvaluation> {
    let steps = traj.states.len().checked_sub(1).filter(|&n| n > 0).ok_or_else(|| {
        Error::InvalidInput(format!("trajectory {} has fewer than 2 states", traj.id))
    })?;
    let mut loss = 0.0;
    let mut g = DVector::zeros(PARAM_DIM);
    let mut info = with_information.then(|| DMatrix::zeros(PARAM_DIM, PARAM_DIM));
    let mut low_confidence = false;
    let mut contact_steps = 0;
    let mut warm: Option<ScaledImpulses> = None;
    for i in 0..steps {
        let Some(step) = evaluate_step(traj, i, params, model, with_information, warm.as_ref())? else {
            warm = None;
            continue;
        };
        loss += step.loss;
        g += &step.gradient;
        if let (Some(acc), Some(si)) = (info.as_mut(), step.information.as_ref()) {
            *acc += si;
        }
        low_confidence |= !step.solution.converged;
        if !step.solution.scaled.is_zero() {
            contact_steps += 1;
        }
        warm = Some(step.solution.scaled);
    }
    let n = steps as f64;
    if let Some(acc) = info.as_mut() {
        *acc *= 4.0 / (n * n);
    }
    Ok(TrajectoryEvaluation {
        loss: loss / n,
        score: ScoreVector {
            g: g / n,
            low_confidence,
        },
        information: info,
        contact_steps,
    })
}

pub fn trajectory_loss(traj: &Trajectory, params: &ContactParams, model: &LossModel) -> Result<f64> {
    let steps = traj.states.len().saturating_sub(1);
    if steps == 0 {
        return Err(Error::InvalidInput(format!(
            "trajectory {} has fewer than 2 states",
            traj.id
        )));
    }
    let mut total = 0.0;
    for i in 0..steps {
        total += step_loss(traj, i, params, model)?;
    }
    Ok(total / steps as f64)
}

pub fn score(traj: &Trajectory, params: &ContactParams, model: &LossModel) -> Result<ScoreVector> {
    Ok(evaluate_trajectory(traj, params, model, false)?.score)
}

/// Expected Fisher information of one trajectory (see [`TrajectoryEvaluation::information`]).
pub fn expected_information(
    traj: &Trajectory,
    params: &ContactParams,
    model: &LossModel,
) -> Result<DMatrix<f64>> {
    Ok(evaluate_trajectory(traj, params, model, true)?
        .information
        .expect("requested"))
}

/// How the finite-difference oracle treats the inner impulses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImpulseHandling {
    /// Impulses frozen at their optimum for the unperturbed parameters.
    Frozen,
    /// Impulses re-solved at every perturbed parameter vector.
    Resolved,
}

/// Central finite-difference gradient of [`trajectory_loss`]; the test oracle
/// for [`score`].
pub fn score_finite_difference(
    traj: &Trajectory,
    params: &ContactParams,
    model: &LossModel,
    h: f64,
    handling: ImpulseHandling,
) -> Result<DVector<f64>> {
    let steps = traj.states.len().saturating_sub(1);
    if steps == 0 {
        return Err(Error::InvalidInput("trajectory too short".into()));
    }
    let frozen: Vec<Option<ScaledImpulses>> = match handling {
        ImpulseHandling::Resolved => vec![None; steps],
        ImpulseHandling::Frozen => (0..steps)
            .map(|i| {
                let res = step_residual(traj, i, params, model)?;
                Ok((!res.is_free_flight()).then(|| solve_impulses(&res, params, model).scaled))
            })
            .collect::<Result<_>>()?,
    };
    let loss_at = |p: &ContactParams| -> Result<f64> {
        let mut total = 0.0;
        for (i, lam) in frozen.iter().enumerate() {
            total += match (handling, lam) {
                (ImpulseHandling::Resolved, _) => step_loss(traj, i, p, model)?,
                (ImpulseHandling::Frozen, Some(lam)) => {
                    let res = step_residual(traj, i, p, model)?;
                    residual_vector(&res, lam, p, &model.weights).norm_squared()
                }
                (ImpulseHandling::Frozen, None) => {
                    let res = step_residual(traj, i, p, model)?;
                    let zero = ScaledImpulses::default();
                    residual_vector(&res, &zero, p, &model.weights).norm_squared()
                }
            };
        }
        Ok(total / steps as f64)
    };
    let theta = params.to_vec();
    let mut grad = DVector::zeros(PARAM_DIM);
    for j in 0..PARAM_DIM {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[j] += h;
        minus[j] -= h;
        let lp = loss_at(&ContactParams::from_slice(&plus)?)?;
        let lm = loss_at(&ContactParams::from_slice(&minus)?)?;
        grad[j] = (lp - lm) / (2.0 * h);
    }
    Ok(grad)
}
