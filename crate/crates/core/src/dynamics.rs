//! Rigid block on flat ground: semi-implicit Euler with an impulse-level
//! projected Gauss-Seidel contact solve (non-penetration + Coulomb cone).

use nalgebra::{Matrix2, Quaternion, UnitQuaternion, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::contact_model::{kinematics, ContactKinematics, ContactParams, NUM_VERTICES};
use crate::error::{Error, Result};

/// Generalized velocity `(v_world, w_body)`.
pub type Twist = Vector6<f64>;

/// Pose and twist of the block. Angular velocity is expressed in the body frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 13]", try_from = "[f64; 13]")]
pub struct BlockState {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

impl BlockState {
    pub fn at_rest(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
        }
    }

    /// `[px, py, pz, qw, qx, qy, qz, vx, vy, vz, wx, wy, wz]`
    pub fn to_array(&self) -> [f64; 13] {
        let q = self.orientation.quaternion();
        let p = &self.position;
        let v = &self.linear_velocity;
        let w = &self.angular_velocity;
        [
            p.x, p.y, p.z, q.w, q.i, q.j, q.k, v.x, v.y, v.z, w.x, w.y, w.z,
        ]
    }

    /// Inverse of [`BlockState::to_array`]. The quaternion is normalized; an
    /// exactly unit input is kept bit-for-bit.
    pub fn from_array(a: [f64; 13]) -> Result<Self> {
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("block state".into()));
        }
        let q = Quaternion::new(a[3], a[4], a[5], a[6]);
        let n = q.norm();
        if n < 1e-12 {
            return Err(Error::InvalidInput("zero quaternion".into()));
        }
        let orientation = if (n - 1.0).abs() < 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Self {
            position: Vector3::new(a[0], a[1], a[2]),
            orientation,
            linear_velocity: Vector3::new(a[7], a[8], a[9]),
            angular_velocity: Vector3::new(a[10], a[11], a[12]),
        })
    }

    pub fn twist(&self) -> Twist {
        let v = &self.linear_velocity;
        let w = &self.angular_velocity;
        Twist::new(v.x, v.y, v.z, w.x, w.y, w.z)
    }

    pub fn with_twist(&self, twist: &Twist) -> Self {
        Self {
            linear_velocity: twist.fixed_rows::<3>(0).into_owned(),
            angular_velocity: twist.fixed_rows::<3>(3).into_owned(),
            ..*self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// Kinetic plus gravitational potential energy.
    pub fn energy(&self, physics: &Physics) -> f64 {
        let m = &physics.mass;
        let w = &self.angular_velocity;
        0.5 * m.mass * self.linear_velocity.norm_squared()
            + 0.5 * w.component_mul(&m.inertia).dot(w)
            + m.mass * physics.gravity * self.position.z
    }
}

impl From<BlockState> for [f64; 13] {
    fn from(s: BlockState) -> Self {
        s.to_array()
    }
}

impl TryFrom<[f64; 13]> for BlockState {
    type Error = Error;

    fn try_from(a: [f64; 13]) -> Result<Self> {
        Self::from_array(a)
    }
}

/// Mass and principal body-frame inertia. Known constants, never learned.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassProps {
    pub mass: f64,
    pub inertia: Vector3<f64>,
}

impl MassProps {
    /// Uniform-density box.
    pub fn cuboid(mass: f64, half_extents: Vector3<f64>) -> Self {
        let h2 = half_extents.component_mul(&half_extents);
        Self {
            mass,
            inertia: Vector3::new(h2.y + h2.z, h2.x + h2.z, h2.x + h2.y) * (mass / 3.0),
        }
    }

    /// Diagonal of the generalized mass matrix.
    pub fn diag(&self) -> Twist {
        let i = &self.inertia;
        Twist::new(self.mass, self.mass, self.mass, i.x, i.y, i.z)
    }

    pub fn inverse_diag(&self) -> Twist {
        self.diag().map(|x| 1.0 / x)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || self.inertia.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidInput(
                "mass and inertia must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for MassProps {
    fn default() -> Self {
        Self::cuboid(0.37, Vector3::repeat(0.05))
    }
}

/// Known physical constants: mass properties and gravity (acting along `-z`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub mass: MassProps,
    pub gravity: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            mass: MassProps::default(),
            gravity: 9.81,
        }
    }
}

/// Projected Gauss-Seidel settings for the forward simulator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Largest per-sweep impulse change (N s) at which the solve is converged.
    pub tolerance: f64,
    /// Vertices closer than this to the ground take part in the solve.
    pub activation_margin: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-8,
            activation_margin: 1e-4,
        }
    }
}

/// Per-vertex contact impulses (N s).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ImpulseSet {
    pub normal: [f64; NUM_VERTICES],
    /// World x and y components.
    pub tangential: [Vector2<f64>; NUM_VERTICES],
}

impl ImpulseSet {
    pub fn is_zero(&self) -> bool {
        self.normal.iter().all(|&x| x == 0.0) && self.tangential.iter().all(|t| t.x == 0.0 && t.y == 0.0)
    }

    pub fn total_normal(&self) -> f64 {
        self.normal.iter().sum()
    }

    /// Largest violation of `lambda_n >= 0` and `|lambda_t| <= mu lambda_n`.
    pub fn cone_violation(&self, mu: f64) -> f64 {
        self.normal
            .iter()
            .zip(&self.tangential)
            .map(|(&n, t)| (-n).max(t.norm() - mu * n).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Generalized impulse `J^T lambda`.
    pub fn generalized(&self, kin: &ContactKinematics) -> Twist {
        let mut out = Twist::zeros();
        for k in 0..NUM_VERTICES {
            out += kin.normal_row(k) * self.normal[k]
                + kin.tangent_row(k, 0) * self.tangential[k].x
                + kin.tangent_row(k, 1) * self.tangential[k].y;
        }
        out
    }
}

/// One contact step: next state, impulses and solver diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactStep {
    pub state: BlockState,
    pub impulses: ImpulseSet,
    pub converged: bool,
    pub iterations: usize,
}

fn check_inputs(state: &BlockState, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if !state.is_finite() {
        return Err(Error::NonFinite(format!("block state {:?}", state.to_array())));
    }
    Ok(())
}

/// Contact-free velocity after one step: gravity plus the explicit gyroscopic term.
pub fn free_twist(state: &BlockState, dt: f64, physics: &Physics) -> Twist {
    let inertia = &physics.mass.inertia;
    let w = &state.angular_velocity;
    let gyro = -w.cross(&w.component_mul(inertia));
    let v = state.linear_velocity + Vector3::new(0.0, 0.0, -physics.gravity * dt);
    let w = w + gyro.component_div(inertia) * dt;
    Twist::new(v.x, v.y, v.z, w.x, w.y, w.z)
}

/// Advances the pose with the (already updated) twist and renormalizes.
pub fn integrate_pose(state: &BlockState, twist: &Twist, dt: f64) -> BlockState {
    let next = state.with_twist(twist);
    let delta = UnitQuaternion::from_scaled_axis(next.angular_velocity * dt);
    let q = (state.orientation * delta).into_inner();
    BlockState {
        position: state.position + next.linear_velocity * dt,
        orientation: UnitQuaternion::new_normalize(q),
        ..next
    }
}

/// Semi-implicit Euler step without contact.
pub fn step_free(state: &BlockState, dt: f64, physics: &Physics) -> Result<BlockState> {
    check_inputs(state, dt)?;
    let twist = free_twist(state, dt, physics);
    Ok(integrate_pose(state, &twist, dt))
}

fn project_disk(v: Vector2<f64>, radius: f64) -> Vector2<f64> {
    let n = v.norm();
    if n <= radius {
        v
    } else if radius <= 0.0 {
        Vector2::zeros()
    } else {
        v * (radius / n)
    }
}

fn largest_eigenvalue_2x2(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt()
}

struct VertexRows {
    normal: Twist,
    tangent: [Twist; 2],
    normal_minv: Twist,
    tangent_minv: [Twist; 2],
    normal_weight: f64,
    tangent_weight: f64,
}

impl VertexRows {
    fn new(kin: &ContactKinematics, k: usize, minv: &Twist) -> Self {
        let normal = kin.normal_row(k);
        let tangent = [kin.tangent_row(k, 0), kin.tangent_row(k, 1)];
        let normal_minv = normal.component_mul(minv);
        let tangent_minv = [tangent[0].component_mul(minv), tangent[1].component_mul(minv)];
        let wtt = Matrix2::new(
            tangent[0].dot(&tangent_minv[0]),
            tangent[0].dot(&tangent_minv[1]),
            tangent[1].dot(&tangent_minv[0]),
            tangent[1].dot(&tangent_minv[1]),
        );
        Self {
            normal_weight: normal.dot(&normal_minv),
            tangent_weight: largest_eigenvalue_2x2(&wtt),
            normal,
            tangent,
            normal_minv,
            tangent_minv,
        }
    }
}

/// Gauss-Seidel sweeps over the active vertices, warm-started from `impulses`.
/// Returns the post-contact twist, whether the sweep converged, and the sweep count.
///
/// Normal rows target `phi + dt * v_n >= 0`; tangent rows use a scalar step
/// followed by projection onto the disk of radius `mu * lambda_n`, whose
/// fixed points satisfy maximal dissipation.
fn pgs(
    kin: &ContactKinematics,
    active: &[bool; NUM_VERTICES],
    mu: f64,
    dt: f64,
    nu_free: &Twist,
    minv: &Twist,
    settings: &SolverSettings,
    impulses: &mut ImpulseSet,
) -> (Twist, bool, usize) {
    let rows: Vec<(usize, VertexRows)> = (0..NUM_VERTICES)
        .filter(|&k| active[k])
        .map(|k| (k, VertexRows::new(kin, k, minv)))
        .collect();
    let mut nu = *nu_free;
    for (k, r) in &rows {
        let t = impulses.tangential[*k];
        nu += r.normal_minv * impulses.normal[*k] + r.tangent_minv[0] * t.x + r.tangent_minv[1] * t.y;
    }
    let mut iterations = 0;
    let mut converged = rows.is_empty();
    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let mut max_delta: f64 = 0.0;
        for (k, r) in &rows {
            let k = *k;
            let vn = r.normal.dot(&nu) + kin.phi[k] / dt;
            let old_n = impulses.normal[k];
            let new_n = (old_n - vn / r.normal_weight).max(0.0);
            let dn = new_n - old_n;
            if dn != 0.0 {
                nu += r.normal_minv * dn;
                impulses.normal[k] = new_n;
            }

            let slip = Vector2::new(r.tangent[0].dot(&nu), r.tangent[1].dot(&nu));
            let old_t = impulses.tangential[k];
            let new_t = project_disk(old_t - slip / r.tangent_weight, mu * new_n);
            let dt_imp = new_t - old_t;
            if dt_imp.x != 0.0 || dt_imp.y != 0.0 {
                nu += r.tangent_minv[0] * dt_imp.x + r.tangent_minv[1] * dt_imp.y;
                impulses.tangential[k] = new_t;
            }
            max_delta = max_delta.max(dn.abs()).max(dt_imp.amax());
        }
        converged = max_delta < settings.tolerance;
    }
    (nu, converged, iterations)
}

/// One time step with frictional contact.
///
/// The active set starts with vertices that are, or would be after a free
/// step, within the activation margin, and grows until no inactive vertex
/// would end the step below the ground.
pub fn step_contact(
    state: &BlockState,
    params: &ContactParams,
    dt: f64,
    physics: &Physics,
    settings: &SolverSettings,
) -> Result<ContactStep> {
    check_inputs(state, dt)?;
    let nu_free = free_twist(state, dt, physics);
    let kin = kinematics(params, state);
    let minv = physics.mass.inverse_diag();
    let margin = settings.activation_margin;

    let mut active = [false; NUM_VERTICES];
    for (k, a) in active.iter_mut().enumerate() {
        let predicted = kin.phi[k] + dt * kin.normal_row(k).dot(&nu_free);
        *a = kin.phi[k] < margin || predicted < margin;
    }

    let mut impulses = ImpulseSet::default();
    let mut nu = nu_free;
    let mut converged = true;
    let mut iterations = 0;
    if active.iter().any(|&a| a) {
        loop {
            let (next, ok, iters) = pgs(
                &kin,
                &active,
                params.mu,
                dt,
                &nu_free,
                &minv,
                settings,
                &mut impulses,
            );
            nu = next;
            converged = ok;
            iterations += iters;
            let mut grew = false;
            for (k, a) in active.iter_mut().enumerate() {
                if !*a && kin.phi[k] + dt * kin.normal_row(k).dot(&nu) < 0.0 {
                    *a = true;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
    }

    Ok(ContactStep {
        state: integrate_pose(state, &nu, dt),
        impulses,
        converged,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectorySource {
    Simulated,
    Imported,
}

/// Default ceiling on per-step displacement, in m/s.
pub const DEFAULT_MAX_SPEED: f64 = 20.0;

/// A uniformly sampled toss.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub dt: f64,
    pub states: Vec<BlockState>,
    pub source: TrajectorySource,
    /// False if any contact solve hit its iteration cap.
    pub solver_converged: bool,
    /// True when velocities were reconstructed from poses on import.
    pub velocities_reconstructed: bool,
}

impl Trajectory {
    pub fn new(
        id: impl Into<String>,
        dt: f64,
        states: Vec<BlockState>,
        source: TrajectorySource,
    ) -> Result<Self> {
        let traj = Self {
            id: id.into(),
            dt,
            states,
            source,
            solver_converged: true,
            velocities_reconstructed: false,
        };
        traj.validate(DEFAULT_MAX_SPEED)?;
        Ok(traj)
    }

    pub fn validate(&self, max_speed: f64) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidInput(format!(
                "trajectory {}: dt must be positive, got {}",
                self.id, self.dt
            )));
        }
        if self.states.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "trajectory {}: needs at least 2 states, got {}",
                self.id,
                self.states.len()
            )));
        }
        for (i, pair) in self.states.windows(2).enumerate() {
            if !pair[0].is_finite() || !pair[1].is_finite() {
                return Err(Error::NonFinite(format!("trajectory {} near step {i}", self.id)));
            }
            let jump = (pair[1].position - pair[0].position).norm();
            if jump > max_speed * self.dt {
                return Err(Error::InvalidInput(format!(
                    "trajectory {}: position jump {jump:.4} m at step {i} exceeds {max_speed} m/s",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial_state(&self) -> &BlockState {
        &self.states[0]
    }
}

/// Repeated [`step_contact`] from `x0`, producing `steps` states including `x0`.
pub fn rollout(
    id: impl Into<String>,
    x0: &BlockState,
    params: &ContactParams,
    dt: f64,
    steps: usize,
    physics: &Physics,
    settings: &SolverSettings,
) -> Result<Trajectory> {
    if steps < 2 {
        return Err(Error::InvalidInput(format!("rollout needs T >= 2, got {steps}")));
    }
    let mut states = Vec::with_capacity(steps);
    states.push(*x0);
    let mut converged = true;
    let mut state = *x0;
    for _ in 1..steps {
        let step = step_contact(&state, params, dt, physics, settings)?;
        converged &= step.converged;
        state = step.state;
        states.push(state);
    }
    Ok(Trajectory {
        id: id.into(),
        dt,
        states,
        source: TrajectorySource::Simulated,
        solver_converged: converged,
        velocities_reconstructed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> ContactParams {
        ContactParams::cube(0.05, 0.3)
    }

    #[test]
    fn ballistic_step() {
        let s = BlockState::at_rest(Vector3::new(0.0, 0.0, 1.0), UnitQuaternion::identity());
        let next = step_free(&s, 0.1, &Physics::default()).unwrap();
        assert!((next.linear_velocity.z + 0.981).abs() < 1e-12);
        assert!((next.position.z - (1.0 - 0.0981)).abs() < 1e-12);
    }

    #[test]
    fn zero_gravity_keeps_velocity() {
        let physics = Physics {
            gravity: 0.0,
            ..Physics::default()
        };
        let mut s = BlockState::at_rest(Vector3::new(0.1, 0.2, 0.3), UnitQuaternion::identity());
        s.linear_velocity = Vector3::new(1.0, -2.0, 0.5);
        let next = step_free(&s, 0.01, &physics).unwrap();
        assert_eq!(next.linear_velocity, s.linear_velocity);
        assert!((next.position - (s.position + s.linear_velocity * 0.01)).norm() < 1e-15);
    }

    #[test]
    fn spin_keeps_unit_quaternion() {
        let mut s = BlockState::at_rest(Vector3::new(0.0, 0.0, 1.0), UnitQuaternion::identity());
        s.angular_velocity = Vector3::new(0.0, 0.0, 7.3);
        for _ in 0..100 {
            s = step_free(&s, 0.01, &Physics::default()).unwrap();
            assert!((s.orientation.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut s = BlockState::at_rest(Vector3::zeros(), UnitQuaternion::identity());
        assert!(step_free(&s, 0.0, &Physics::default()).is_err());
        s.linear_velocity.x = f64::NAN;
        assert!(step_free(&s, 0.01, &Physics::default()).is_err());
        assert!(step_contact(&s, &cube(), 0.01, &Physics::default(), &SolverSettings::default()).is_err());
    }

    #[test]
    fn resting_cube_balances_gravity() {
        let physics = Physics::default();
        let s = BlockState::at_rest(Vector3::new(0.0, 0.0, 0.05), UnitQuaternion::identity());
        let dt = 0.005;
        let step = step_contact(&s, &cube(), dt, &physics, &SolverSettings::default()).unwrap();
        assert!((step.state.position - s.position).norm() < 1e-6);
        let expected = physics.mass.mass * physics.gravity * dt;
        assert!((step.impulses.total_normal() - expected).abs() < 0.02 * expected);
        assert!(step.impulses.cone_violation(0.3) < 1e-6);
    }

    #[test]
    fn airborne_step_matches_free_step() {
        let physics = Physics::default();
        let mut s = BlockState::at_rest(Vector3::new(0.0, 0.0, 1.0), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
        s.angular_velocity = Vector3::new(1.0, 2.0, -3.0);
        let step = step_contact(&s, &cube(), 0.005, &physics, &SolverSettings::default()).unwrap();
        assert!(step.impulses.is_zero());
        assert_eq!(step.state, step_free(&s, 0.005, &physics).unwrap());
    }

    #[test]
    fn single_vertex_sliding_friction() {
        // One vertex directly below the center of mass behaves like a point
        // mass: with sustained sliding the friction impulse is -mu * lambda_n
        // along the slip direction.
        let physics = Physics::default();
        let mut params = ContactParams::cube(0.05, 0.3);
        for v in params.vertices.iter_mut().skip(1) {
            *v = Vector3::new(0.0, 0.0, 0.4);
        }
        params.vertices[0] = Vector3::new(0.0, 0.0, -0.05);
        let mut s = BlockState::at_rest(Vector3::new(0.0, 0.0, 0.05), UnitQuaternion::identity());
        s.linear_velocity = Vector3::new(2.0, 0.0, 0.0);
        let dt = 0.005;
        let step = step_contact(&s, &params, dt, &physics, &SolverSettings::default()).unwrap();
        let ln = step.impulses.normal[0];
        let lt = step.impulses.tangential[0];
        assert!(ln > 0.0);
        assert!((ln - physics.mass.mass * physics.gravity * dt).abs() < 1e-9);
        assert!(lt.x < 0.0 && lt.y.abs() < 1e-12);
        assert!((lt.norm() - params.mu * ln).abs() < 1e-6);
        let expected_vx = 2.0 - params.mu * physics.gravity * dt;
        assert!((step.state.linear_velocity.x - expected_vx).abs() < 1e-9);
    }

    #[test]
    fn cube_sliding_friction_opposes_motion() {
        let physics = Physics::default();
        let mut s = BlockState::at_rest(Vector3::new(0.0, 0.0, 0.05), UnitQuaternion::identity());
        s.linear_velocity = Vector3::new(1.5, 0.0, 0.0);
        let step = step_contact(&s, &cube(), 0.005, &physics, &SolverSettings::default()).unwrap();
        let total_t: Vector2<f64> = step.impulses.tangential.iter().sum();
        assert!(total_t.x < 0.0);
        assert!((total_t.norm() - 0.3 * step.impulses.total_normal()).abs() < 1e-6);
    }

    #[test]
    fn drop_settles_flat() {
        let physics = Physics::default();
        let x0 = BlockState::at_rest(Vector3::new(0.0, 0.0, 0.5), UnitQuaternion::identity());
        let traj = rollout("drop", &x0, &cube(), 0.005, 200, &physics, &SolverSettings::default()).unwrap();
        let last = traj.states.last().unwrap();
        let kin = kinematics(&cube(), last);
        for k in 0..4 {
            assert!(kin.phi[k].abs() < 1e-3, "vertex {k} gap {}", kin.phi[k]);
        }
        assert!(last.linear_velocity.norm() < 1e-3);
    }

    #[test]
    fn resting_rollout_is_constant_and_deterministic() {
        let physics = Physics::default();
        let x0 = BlockState::at_rest(Vector3::new(0.0, 0.0, 0.05), UnitQuaternion::identity());
        let a = rollout("a", &x0, &cube(), 0.005, 50, &physics, &SolverSettings::default()).unwrap();
        for s in &a.states {
            assert!((s.position - x0.position).norm() < 1e-6);
        }
        let mut x1 = x0;
        x1.position.z = 0.4;
        x1.linear_velocity = Vector3::new(1.0, 0.5, 0.0);
        x1.angular_velocity = Vector3::new(3.0, -4.0, 2.0);
        let b = rollout("b", &x1, &cube(), 0.005, 150, &physics, &SolverSettings::default()).unwrap();
        let c = rollout("b", &x1, &cube(), 0.005, 150, &physics, &SolverSettings::default()).unwrap();
        assert_eq!(b, c);
    }

    #[test]
    fn cuboid_inertia() {
        let m = MassProps::cuboid(12.0, Vector3::new(0.5, 1.0, 1.5));
        // Full extents 1, 2, 3: I_xx = m/12 (4 + 9) = 13.
        assert!((m.inertia.x - 13.0).abs() < 1e-12);
        assert!((m.inertia.y - 10.0).abs() < 1e-12);
        assert!((m.inertia.z - 5.0).abs() < 1e-12);
    }
}
