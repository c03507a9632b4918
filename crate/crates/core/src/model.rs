//! State types, the discrete double integrator and the parameter sets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Numerical slack used when checking norm bounds.
pub const EPS_NUM: f64 = 1e-9;

/// Below this relative speed (m/s) two bodies are treated as mutually at rest.
pub const EPS_V: f64 = 1e-9;

/// Serde adapter storing a [`Vec3`] as `[x, y, z]`.
pub mod vec3_serde {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(x, y, z))
    }
}

/// Serde adapter for `Vec<Vec3>`.
pub mod vec3_list_serde {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec3], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<[f64; 3]> = v.iter().map(|p| [p.x, p.y, p.z]).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec3>, D::Error> {
        let raw = Vec::<[f64; 3]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[x, y, z]| Vec3::new(x, y, z)).collect())
    }
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

pub(crate) fn ensure_finite(v: &Vec3, what: &str) -> Result<()> {
    if is_finite(v) {
        Ok(())
    } else {
        Err(FlockError::StateCorruption(format!("{what} is not finite: {:?}", [v.x, v.y, v.z])))
    }
}

/// Angle between two vectors in `[0, pi]`, computed with `atan2` so that it
/// stays accurate for nearly parallel inputs.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Position/velocity pair of one robot in the inertial frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    #[serde(with = "vec3_serde")]
    pub p: Vec3,
    #[serde(with = "vec3_serde")]
    pub v: Vec3,
}

impl RobotState {
    pub fn new(p: Vec3, v: Vec3) -> Self {
        Self { p, v }
    }

    pub fn at_rest(p: Vec3) -> Self {
        Self { p, v: Vec3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        is_finite(&self.p) && is_finite(&self.v)
    }
}

/// Radially rescales `w` onto the ball of radius `bound` if it lies outside.
pub fn saturate(w: Vec3, bound: f64) -> Vec3 {
    let n = w.norm();
    if n <= bound {
        w
    } else {
        // rounding can leave the result an ulp outside the ball
        let mut s = w * (bound / n);
        while s.norm() > bound {
            s *= 1.0 - f64::EPSILON;
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// Integration step (s).
    pub dt: f64,
    /// Prediction horizon (s).
    pub horizon: f64,
    pub v_max: f64,
    pub u_max: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            horizon: 0.15,
            v_max: 0.3,
            u_max: 0.4,
        }
    }
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0 && self.horizon >= self.dt && self.v_max > 0.0 && self.u_max > 0.0;
        if ok && [self.dt, self.horizon, self.v_max, self.u_max].iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(FlockError::InvalidParams(format!(
                "dynamics requires dt > 0, horizon >= dt, v_max > 0, u_max > 0 (got {self:?})"
            )))
        }
    }
}

/// One step of the discrete double integrator
/// `x' = A(dt) x + B(dt) u` with `A = [[1, dt], [0, 1]] (x) I3` and
/// `B = [dt^2/2, dt]^T (x) I3`.
///
/// The input is saturated to `u_max` first and the resulting velocity is
/// clamped radially to `v_max`.
pub fn step_dynamics(x: &RobotState, u: Vec3, dt: f64, params: &DynamicsParams) -> Result<RobotState> {
    ensure_finite(&x.p, "position")?;
    ensure_finite(&x.v, "velocity")?;
    ensure_finite(&u, "input")?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FlockError::InvalidParams(format!("step size must be positive, got {dt}")));
    }
    let u = saturate(u, params.u_max);
    Ok(integrate(x, &u, dt, params.v_max))
}

/// Single-shot prediction of the state `horizon` seconds ahead under a
/// constant input. Identical to [`step_dynamics`] with `dt = horizon`.
pub fn predict(x: &RobotState, u: Vec3, horizon: f64, params: &DynamicsParams) -> Result<RobotState> {
    step_dynamics(x, u, horizon, params)
}

#[inline]
pub(crate) fn integrate(x: &RobotState, u: &Vec3, dt: f64, v_max: f64) -> RobotState {
    let p = x.p + x.v * dt + u * (0.5 * dt * dt);
    let v = saturate(x.v + u * dt, v_max);
    RobotState { p, v }
}

/// Gains and geometric constants of the potential energies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    /// Pairwise gain.
    pub k_a: f64,
    /// Characteristic inter-robot distance (m).
    pub r_f: f64,
    /// Knee of the pairwise potential, as a multiple of `r_f`.
    pub k_t: f64,
    /// Scaling of `r_f` while traversing obstacles.
    pub k_n: f64,
    pub k_or: f64,
    pub k_od: f64,
    /// Risk-sector boundary coefficient.
    pub k_delta: f64,
    /// Transition threshold of the risk weight.
    pub delta: f64,
    /// Inner-sector weight.
    pub k_rho: f64,
    pub k_rp: f64,
    pub k_rv: f64,
    /// Perception radius (m).
    pub r_s: f64,
    /// Robot radius (m).
    pub r_c: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        Self {
            k_a: 12.0,
            r_f: 0.421,
            k_t: 2.0,
            k_n: 1.6,
            k_or: 20.0,
            k_od: 10.0,
            k_delta: 0.5,
            delta: 0.3,
            k_rho: 2.0,
            k_rp: 5.0,
            k_rv: 15.0,
            r_s: 0.4631,
            r_c: 0.12,
        }
    }
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        let gains = [
            self.k_a, self.r_f, self.k_n, self.k_or, self.k_od, self.k_delta, self.k_rp, self.k_rv,
            self.r_c,
        ];
        let ok = gains.iter().all(|g| *g > 0.0 && g.is_finite())
            && self.k_t > 0.0
            && self.k_t <= 2.0
            && self.delta > 0.0
            && self.delta < 1.0
            && self.k_rho > 1.0
            && self.r_s > self.r_f;
        if ok {
            Ok(())
        } else {
            Err(FlockError::InvalidParams(format!("potential parameters out of range: {self:?}")))
        }
    }

    /// Characteristic distance in effect for the given zone.
    pub fn effective_rf(&self, zone: Zone) -> f64 {
        match zone {
            Zone::Open => self.r_f,
            Zone::Dense => self.k_n * self.r_f,
        }
    }

    /// Inner risk threshold `1 / (1 + k_delta)`.
    pub fn lambda(&self) -> f64 {
        1.0 / (1.0 + self.k_delta)
    }
}

/// Whether a robot is currently traversing obstacles. Inside a dense zone the
/// pairwise potential uses `k_n * r_f` as its characteristic distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    #[default]
    Open,
    Dense,
}

/// Damping and bypass gains of the heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    pub k_av: f64,
    /// Goal velocity damping, `k_rv'`.
    pub k_rv_prime: f64,
    pub k_ob: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            k_av: 40.0,
            k_rv_prime: 0.1,
            k_ob: 10.0,
        }
    }
}

impl HeuristicParams {
    pub fn validate(&self) -> Result<()> {
        if [self.k_av, self.k_rv_prime, self.k_ob].iter().all(|g| *g > 0.0 && g.is_finite()) {
            Ok(())
        } else {
            Err(FlockError::InvalidParams(format!("heuristic gains must be positive: {self:?}")))
        }
    }
}

/// Control-space discretization and inference settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub k_theta: u32,
    pub k_phi: u32,
    /// Number of magnitude levels in `u_max / n_u, ..., u_max`.
    pub n_u: u32,
    /// Cone half-width as a fraction of pi.
    pub k_u: f64,
    /// Convergence threshold on the max per-entry belief change.
    #[serde(default = "default_mf_tol")]
    pub mf_tol: f64,
    #[serde(default = "default_mf_max_sweeps")]
    pub mf_max_sweeps: usize,
}

fn default_mf_tol() -> f64 {
    1e-9
}

fn default_mf_max_sweeps() -> usize {
    500
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            k_theta: 12,
            k_phi: 12,
            n_u: 2,
            k_u: 0.2,
            mf_tol: default_mf_tol(),
            mf_max_sweeps: default_mf_max_sweeps(),
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k_theta >= 1
            && self.k_phi >= 1
            && self.n_u >= 1
            && self.k_u > 0.0
            && self.k_u <= 1.0
            && self.mf_tol > 0.0
            && self.mf_max_sweeps >= 1;
        if ok {
            Ok(())
        } else {
            Err(FlockError::InvalidParams(format!("controller parameters out of range: {self:?}")))
        }
    }

    pub fn delta_theta(&self) -> f64 {
        2.0 * PI / f64::from(self.k_theta)
    }

    pub fn delta_phi(&self) -> f64 {
        2.0 * PI / f64::from(self.k_phi)
    }

    /// Magnitude ladder `u_max / n_u, 2 u_max / n_u, ..., u_max`.
    pub fn magnitudes(&self, u_max: f64) -> Vec<f64> {
        (1..=self.n_u)
            .map(|k| u_max * f64::from(k) / f64::from(self.n_u))
            .collect()
    }
}

/// Every parameter a robot's controller consumes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamBundle {
    pub dynamics: DynamicsParams,
    pub potential: PotentialParams,
    pub heuristic: HeuristicParams,
    pub controller: ControllerParams,
}

impl ParamBundle {
    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        self.potential.validate()?;
        self.heuristic.validate()?;
        self.controller.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dp() -> DynamicsParams {
        DynamicsParams::default()
    }

    #[test]
    fn step_saturates_input_before_integrating() {
        let x = RobotState::at_rest(Vec3::zeros());
        let next = step_dynamics(&x, Vec3::new(1.0, 0.0, 0.0), 0.05, &dp()).unwrap();
        assert_relative_eq!(next.p, Vec3::new(0.0005, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(next.v, Vec3::new(0.02, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn zero_input_at_rest_is_identity() {
        let x = RobotState::at_rest(Vec3::new(1.0, -2.0, 0.5));
        let next = step_dynamics(&x, Vec3::zeros(), 0.05, &dp()).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn velocity_is_clamped_at_v_max() {
        let x = RobotState::new(Vec3::zeros(), Vec3::new(0.29, 0.0, 0.0));
        let next = step_dynamics(&x, Vec3::new(0.4, 0.0, 0.0), 0.05, &dp()).unwrap();
        assert_relative_eq!(next.v.norm(), 0.3, epsilon = 1e-15);
        assert!(next.v.y == 0.0 && next.v.z == 0.0);
    }

    #[test]
    fn non_finite_input_is_state_corruption() {
        let x = RobotState::at_rest(Vec3::zeros());
        let err = step_dynamics(&x, Vec3::new(f64::NAN, 0.0, 0.0), 0.05, &dp()).unwrap_err();
        assert!(matches!(err, FlockError::StateCorruption(_)));
        let bad = RobotState::new(Vec3::new(f64::INFINITY, 0.0, 0.0), Vec3::zeros());
        assert!(step_dynamics(&bad, Vec3::zeros(), 0.05, &dp()).is_err());
    }

    #[test]
    fn saturate_examples() {
        assert_eq!(saturate(Vec3::new(3.0, 4.0, 0.0), 5.0), Vec3::new(3.0, 4.0, 0.0));
        assert_relative_eq!(saturate(Vec3::new(6.0, 8.0, 0.0), 5.0), Vec3::new(3.0, 4.0, 0.0));
        assert_eq!(saturate(Vec3::zeros(), 0.1), Vec3::zeros());
    }

    #[test]
    fn predict_matches_step_with_horizon() {
        let x = RobotState::new(Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0));
        let p = predict(&x, Vec3::zeros(), 0.15, &dp()).unwrap();
        assert_relative_eq!(p.p, Vec3::new(0.015, 0.0, 0.0), epsilon = 1e-15);
        let u = Vec3::new(0.1, -0.2, 0.3);
        assert_eq!(predict(&x, u, 0.15, &dp()).unwrap(), step_dynamics(&x, u, 0.15, &dp()).unwrap());
    }

    #[test]
    fn table_defaults_validate() {
        ParamBundle::default().validate().unwrap();
        let c = ControllerParams::default();
        assert_relative_eq!(f64::from(c.k_theta) * c.delta_theta(), 2.0 * PI, epsilon = 1e-15);
        assert_eq!(c.magnitudes(0.4), vec![0.2, 0.4]);
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn step_is_exact_double_integrator(p in vec3(), v in vec3(), u in vec3(), dt in 0.001..0.2f64) {
            let params = DynamicsParams { dt, horizon: dt, v_max: 100.0, u_max: 100.0 };
            let x = RobotState::new(p, v);
            let next = step_dynamics(&x, u, dt, &params).unwrap();
            let closed = p + v * dt + u * dt * dt / 2.0;
            prop_assert!((next.p - closed).norm() <= 1e-12 * closed.norm().max(1.0));
        }

        #[test]
        fn two_half_steps_equal_one_step(p in vec3(), v in vec3(), u in vec3(), dt in 0.001..0.2f64) {
            let params = DynamicsParams { dt, horizon: dt, v_max: 100.0, u_max: 100.0 };
            let x = RobotState::new(p, v);
            let one = step_dynamics(&x, u, dt, &params).unwrap();
            let half = step_dynamics(&x, u, dt / 2.0, &params).unwrap();
            let two = step_dynamics(&half, u, dt / 2.0, &params).unwrap();
            prop_assert!((one.v - two.v).norm() <= 1e-15 * one.v.norm().max(1.0) * 4.0);
            prop_assert!((one.p - two.p).norm() <= 1e-12 * one.p.norm().max(1.0));
        }

        #[test]
        fn clamped_step_respects_v_max(v in vec3(), u in vec3()) {
            let x = RobotState::new(Vec3::zeros(), v * 0.3);
            let next = step_dynamics(&x, u * 3.0, 0.05, &dp()).unwrap();
            prop_assert!(next.v.norm() <= 0.3 + EPS_NUM);
        }

        #[test]
        fn saturate_is_idempotent(w in vec3(), b in 0.01..2.0f64) {
            let once = saturate(w * 3.0, b);
            prop_assert_eq!(saturate(once, b), once);
            prop_assert!(once.norm() <= b * (1.0 + 1e-15));
        }
    }
}
