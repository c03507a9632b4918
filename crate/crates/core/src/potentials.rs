//! Potential energies of the flocking field.
//!
//! Pairwise, obstacle and goal energies are evaluated lazily per interacting
//! pair. The clique factors are `exp(-energy)` and the configuration energy
//! is the negated exponent of the unnormalized joint density.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::environment::{assess_risk, perceived_sets, BetaAgent, DynamicObstacle, RiskAssessment, Sector, StaticObstacle};
use crate::error::{FlockError, Result};
use crate::heuristic::{build_avoidance_frame, repulsion_gradient};
use crate::model::{angle_between, vec3_serde, HeuristicParams, PotentialParams, RobotState, Vec3, Zone, EPS_V};

/// Reference state tracked by a group. `v` is constant over a segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    #[serde(with = "vec3_serde")]
    pub p: Vec3,
    #[serde(with = "vec3_serde")]
    pub v: Vec3,
}

impl ReferenceState {
    pub fn new(p: Vec3, v: Vec3) -> Self {
        Self { p, v }
    }

    /// Constant-velocity extrapolation.
    pub fn advanced(&self, dt: f64) -> Self {
        Self {
            p: self.p + self.v * dt,
            v: self.v,
        }
    }
}

/// Pairwise energy as a function of separation `d` and characteristic
/// distance `r_f`: a cosine well with its minimum at `r_f`, continued
/// linearly beyond `k_t * r_f`.
pub fn psi_ar_at(d: f64, r_f: f64, k_a: f64, k_t: f64) -> f64 {
    if d <= k_t * r_f {
        k_a * (1.0 + (PI * d / r_f).cos())
    } else {
        -k_a * PI / r_f * (PI * k_t).sin() * (d - k_t * r_f) + k_a * (1.0 + (k_t * PI).cos())
    }
}

pub fn psi_ar(x_i: &RobotState, x_j: &RobotState, params: &PotentialParams, zone: Zone) -> Result<f64> {
    let d = (x_i.p - x_j.p).norm();
    if !(d > 0.0) {
        return Err(FlockError::DegenerateGeometry("coincident robots"));
    }
    Ok(psi_ar_at(d, params.effective_rf(zone), params.k_a, params.k_t))
}

/// Obstacle repulsion as a function of the distance to the beta-agent. Zero
/// beyond `r_f`.
pub fn psi_or_at(d: f64, params: &PotentialParams) -> f64 {
    if d > params.r_f {
        0.0
    } else {
        params.k_or * ((1.0 - (PI * d / (2.0 * params.r_f)).sin()).exp() - 1.0)
    }
}

pub fn psi_or(x_i: &RobotState, beta: &BetaAgent, params: &PotentialParams) -> Result<f64> {
    let d = (x_i.p - beta.p).norm();
    if !(d > 0.0) {
        return Err(FlockError::DegenerateGeometry("robot sits on its beta-agent"));
    }
    Ok(psi_or_at(d, params))
}

/// Risk weight: `k_rho` on a collision course, `1` in the inner ring, a
/// cosine ramp down to zero at the safe boundary. Branches are tested in
/// order, so when `lambda > delta` the unit plateau is empty.
pub fn rho(lambda: f64, delta: f64, z: f64, k_rho: f64) -> f64 {
    if (0.0..lambda).contains(&z) {
        k_rho
    } else if (lambda..delta).contains(&z) {
        1.0
    } else if (delta..1.0).contains(&z) {
        0.5 * (1.0 + (PI * (z - delta) / (1.0 - delta)).cos())
    } else {
        0.0
    }
}

/// Sector-dependent weight applied to the direction potential.
pub fn risk_weight(risk: &RiskAssessment, params: &PotentialParams) -> f64 {
    match risk.sector {
        Sector::IV => 0.0,
        Sector::I => params.k_rho,
        Sector::II | Sector::III => rho(risk.lambda, params.delta, risk.z, params.k_rho),
    }
}

/// Direction potential: penalizes the angle between the robot velocity and
/// the desired avoidance direction `u_go`, weighted by the risk sector.
pub fn psi_od(x_i: &RobotState, u_go: &Vec3, risk: &RiskAssessment, params: &PotentialParams) -> f64 {
    let w = risk_weight(risk, params);
    if w == 0.0 || x_i.v.norm() < EPS_V || u_go.norm() < EPS_V {
        return 0.0;
    }
    params.k_od * w * (angle_between(&x_i.v, u_go).exp() - 1.0)
}

/// Position and velocity goal energies `(psi_rp, psi_rv)`.
pub fn psi_goal(x_i: &RobotState, x_r: &ReferenceState, params: &PotentialParams) -> (f64, f64) {
    let rp = params.k_rp * ((x_i.p - x_r.p).norm().exp() - 1.0);
    let rv = params.k_rv * ((x_i.v - x_r.v).norm().exp() - 1.0);
    (rp, rv)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObstacleEnergy {
    pub or: f64,
    pub od: f64,
}

impl ObstacleEnergy {
    pub fn total(&self) -> f64 {
        self.or + self.od
    }
}

/// Avoidance direction `u_go`: the unit bypass direction scaled by `k_ob`
/// plus the repulsion force.
pub fn avoidance_direction(
    p_ib: &Vec3,
    v_ib: &Vec3,
    risk: &RiskAssessment,
    params: &PotentialParams,
    hparams: &HeuristicParams,
) -> Result<Vec3> {
    let mut u_go = repulsion_gradient(p_ib, params)?;
    if v_ib.norm() > EPS_V {
        let frame = build_avoidance_frame(p_ib, v_ib, risk)?;
        u_go += frame.v_ob * hparams.k_ob;
    }
    Ok(u_go)
}

/// Full obstacle energy `psi_or + psi_od` of one robot against one
/// beta-agent.
pub fn psi_obstacle(
    x_i: &RobotState,
    beta: &BetaAgent,
    params: &PotentialParams,
    hparams: &HeuristicParams,
) -> Result<ObstacleEnergy> {
    let p_ib = x_i.p - beta.p;
    let v_ib = x_i.v - beta.v;
    let d = p_ib.norm();
    if !(d > 0.0) {
        return Err(FlockError::DegenerateGeometry("robot sits on its beta-agent"));
    }
    let or = psi_or_at(d, params);
    let risk = assess_risk(&p_ib, &v_ib, beta.r_beta, params)?;
    let od = if risk.needs_avoidance() {
        let u_go = avoidance_direction(&p_ib, &v_ib, &risk, params, hparams)?;
        psi_od(x_i, &u_go, &risk, params)
    } else {
        0.0
    };
    Ok(ObstacleEnergy { or, od })
}

/// Supremum of the obstacle energy, used when a robot coincides with a
/// beta-agent and the geometry is undefined.
pub fn obstacle_energy_bound(params: &PotentialParams) -> f64 {
    params.k_or * (std::f64::consts::E - 1.0) + params.k_od * params.k_rho * (PI.exp() - 1.0)
}

/// Clique factors `exp(-energy)` attached to one robot.
#[derive(Clone, Debug, PartialEq)]
pub struct CliqueFactors {
    /// Pairwise factor, when a partner robot was given.
    pub ar: Option<f64>,
    /// Product of the obstacle factors.
    pub o: f64,
    pub r: f64,
}

pub fn clique_potentials(
    x_i: &RobotState,
    x_j: Option<&RobotState>,
    obstacles: &[BetaAgent],
    x_r: &ReferenceState,
    params: &PotentialParams,
    hparams: &HeuristicParams,
    zone: Zone,
) -> Result<CliqueFactors> {
    let ar = x_j.map(|x_j| psi_ar(x_i, x_j, params, zone)).transpose()?;
    let mut psi_o = 0.0;
    for b in obstacles {
        psi_o += psi_obstacle(x_i, b, params, hparams)?.total();
    }
    let (rp, rv) = psi_goal(x_i, x_r, params);
    Ok(CliqueFactors {
        ar: ar.map(|e| (-e).exp()),
        o: (-psi_o).exp(),
        r: (-(rp + rv)).exp(),
    })
}

/// Decomposition of the configuration energy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub ar: f64,
    pub or: f64,
    pub od: f64,
    pub rp: f64,
    pub rv: f64,
    pub total: f64,
}

/// Negated exponent of the unnormalized joint density of a configuration:
/// pairwise energy over ordered neighbour pairs, obstacle energy over every
/// perceived beta-agent, and the goal energy of each robot.
///
/// `references[i]` is the reference tracked by robot `i`.
pub fn configuration_energy(
    robots: &[RobotState],
    statics: &[StaticObstacle],
    dynamics: &[DynamicObstacle],
    references: &[ReferenceState],
    params: &PotentialParams,
    hparams: &HeuristicParams,
) -> Result<EnergyBreakdown> {
    if references.len() != robots.len() {
        return Err(FlockError::InvalidParams(format!(
            "{} references for {} robots",
            references.len(),
            robots.len()
        )));
    }
    let mut e = EnergyBreakdown::default();
    for (i, x_i) in robots.iter().enumerate() {
        let seen = perceived_sets(i, robots, statics, dynamics, params.r_s)?;
        let zone = if seen.statics.is_empty() { Zone::Open } else { Zone::Dense };
        for &j in &seen.neighbors {
            e.ar += psi_ar(x_i, &robots[j], params, zone)?;
        }
        for b in seen.obstacles() {
            let o = psi_obstacle(x_i, b, params, hparams)?;
            e.or += o.or;
            e.od += o.od;
        }
        let (rp, rv) = psi_goal(x_i, &references[i], params);
        e.rp += rp;
        e.rv += rv;
    }
    e.total = e.ar + e.or + e.od + e.rp + e.rv;
    Ok(e)
}
