//! Obstacles, beta-agents, perception and risk sectors.
//!
//! A static obstacle interacts with a robot through its beta-agent: the point
//! of the obstacle surface closest to the robot, with zero size and zero
//! velocity. Dynamic obstacles are balls; their beta-agent is the centre.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
use crate::model::{angle_between, vec3_serde, PotentialParams, RobotState, Vec3, EPS_V};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StaticObstacle {
    Sphere {
        #[serde(with = "vec3_serde")]
        center: Vec3,
        radius: f64,
    },
    /// Axis-aligned box.
    Box {
        #[serde(with = "vec3_serde")]
        min: Vec3,
        #[serde(with = "vec3_serde")]
        max: Vec3,
    },
    /// Half-space behind a plane; `normal` points out of the obstacle.
    Plane {
        #[serde(with = "vec3_serde")]
        point: Vec3,
        #[serde(with = "vec3_serde")]
        normal: Vec3,
    },
}

impl StaticObstacle {
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        StaticObstacle::Sphere { center, radius }
    }

    pub fn aabb(min: Vec3, max: Vec3) -> Self {
        StaticObstacle::Box { min, max }
    }

    pub fn plane(point: Vec3, normal: Vec3) -> Self {
        StaticObstacle::Plane { point, normal }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            StaticObstacle::Sphere { radius, .. } => *radius > 0.0,
            StaticObstacle::Box { min, max } => min.x < max.x && min.y < max.y && min.z < max.z,
            StaticObstacle::Plane { normal, .. } => (normal.norm() - 1.0).abs() <= 1e-9,
        };
        if ok {
            Ok(())
        } else {
            Err(FlockError::InvalidParams(format!("malformed obstacle {self:?}")))
        }
    }

    /// Signed distance from `p` to the surface, negative inside.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        match self {
            StaticObstacle::Sphere { center, radius } => (p - center).norm() - radius,
            StaticObstacle::Box { min, max } => {
                let c = (min + max) * 0.5;
                let h = (max - min) * 0.5;
                let q = (p - c).abs() - h;
                let outside = q.map(|x| x.max(0.0)).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                outside + inside
            }
            StaticObstacle::Plane { point, normal } => (p - point).dot(normal),
        }
    }

    /// Closest point of the surface to `p`. Defined for interior points too
    /// (the nearest face for a box).
    pub fn closest_surface_point(&self, p: &Vec3) -> Vec3 {
        match self {
            StaticObstacle::Sphere { center, radius } => {
                let d = p - center;
                let n = d.norm();
                let dir = if n > 0.0 { d / n } else { Vec3::x() };
                center + dir * *radius
            }
            StaticObstacle::Box { min, max } => {
                let clamped = Vec3::new(
                    p.x.clamp(min.x, max.x),
                    p.y.clamp(min.y, max.y),
                    p.z.clamp(min.z, max.z),
                );
                if clamped != *p {
                    return clamped;
                }
                // interior: push out through the nearest face
                let mut best = (f64::INFINITY, 0usize, 0.0);
                for axis in 0..3 {
                    let to_min = p[axis] - min[axis];
                    let to_max = max[axis] - p[axis];
                    if to_min < best.0 {
                        best = (to_min, axis, min[axis]);
                    }
                    if to_max < best.0 {
                        best = (to_max, axis, max[axis]);
                    }
                }
                let mut out = *p;
                out[best.1] = best.2;
                out
            }
            StaticObstacle::Plane { point, normal } => p - normal * (p - point).dot(normal),
        }
    }

    /// Beta-agent of this obstacle as seen from `p`.
    pub fn project_beta(&self, p: &Vec3) -> Result<BetaAgent> {
        let sd = self.signed_distance(p);
        if sd < 0.0 {
            return Err(FlockError::Penetration {
                point: [p.x, p.y, p.z],
                signed_distance: sd,
            });
        }
        Ok(BetaAgent::fixed(self.closest_surface_point(p)))
    }
}

/// Ball-shaped moving obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicObstacle {
    #[serde(with = "vec3_serde")]
    pub p: Vec3,
    #[serde(with = "vec3_serde")]
    pub v: Vec3,
    pub radius: f64,
}

impl DynamicObstacle {
    pub fn beta(&self) -> BetaAgent {
        BetaAgent {
            p: self.p,
            v: self.v,
            r_beta: self.radius,
            kind: BetaKind::Dynamic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaKind {
    Static,
    Dynamic,
}

/// Virtual agent standing in for an obstacle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaAgent {
    pub p: Vec3,
    pub v: Vec3,
    pub r_beta: f64,
    pub kind: BetaKind,
}

impl BetaAgent {
    pub fn fixed(p: Vec3) -> Self {
        Self {
            p,
            v: Vec3::zeros(),
            r_beta: 0.0,
            kind: BetaKind::Static,
        }
    }
}

/// What robot `i` perceives. Obstacles carry their index in the input slice.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerceivedSets {
    pub neighbors: Vec<usize>,
    pub statics: Vec<(usize, BetaAgent)>,
    pub dynamics: Vec<(usize, BetaAgent)>,
}

impl PerceivedSets {
    pub fn obstacles(&self) -> impl Iterator<Item = &BetaAgent> {
        self.statics.iter().chain(self.dynamics.iter()).map(|(_, b)| b)
    }
}

/// Neighbour set, perceived static beta-agents and perceived dynamic
/// obstacles of robot `i`. All boundaries are inclusive.
pub fn perceived_sets(
    i: usize,
    robots: &[RobotState],
    statics: &[StaticObstacle],
    dynamics: &[DynamicObstacle],
    r_s: f64,
) -> Result<PerceivedSets> {
    let me = robots.get(i).ok_or(FlockError::UnknownRobot(i))?;
    let neighbors = robots
        .iter()
        .enumerate()
        .filter(|(j, x)| *j != i && (x.p - me.p).norm() <= r_s)
        .map(|(j, _)| j)
        .collect();
    Ok(PerceivedSets {
        neighbors,
        statics: perceive_statics(&me.p, statics, r_s),
        dynamics: perceive_dynamics(&me.p, dynamics, r_s),
    })
}

pub(crate) fn perceive_statics(p: &Vec3, statics: &[StaticObstacle], r_s: f64) -> Vec<(usize, BetaAgent)> {
    statics
        .iter()
        .enumerate()
        .filter_map(|(k, o)| {
            let b = BetaAgent::fixed(o.closest_surface_point(p));
            ((b.p - p).norm() <= r_s).then_some((k, b))
        })
        .collect()
}

pub(crate) fn perceive_dynamics(p: &Vec3, dynamics: &[DynamicObstacle], r_s: f64) -> Vec<(usize, BetaAgent)> {
    dynamics
        .iter()
        .enumerate()
        .filter(|(_, d)| (d.p - p).norm() <= r_s + d.radius)
        .map(|(k, d)| (k, d.beta()))
        .collect()
}

/// Undirected interaction graph over robot indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborGraph {
    adjacency: Vec<Vec<usize>>,
}

impl NeighborGraph {
    pub fn from_positions(positions: &[Vec3], r_s: f64) -> Self {
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if (positions[i] - positions[j]).norm() <= r_s {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self { adjacency }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        if self.adjacency.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.adjacency.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Risk sector of an obstacle around a robot. `I` is a collision course,
/// `IV` is safe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sector {
    I,
    II,
    III,
    IV,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskAssessment {
    /// Bearing of the relative velocity from the line of sight (rad).
    pub theta: f64,
    /// Miss distance `|p| sin(theta)` (m).
    pub miss_distance: f64,
    /// Normalized miss distance `z`.
    pub z: f64,
    /// Inner threshold `1 / (1 + k_delta)`.
    pub lambda: f64,
    pub theta_i: f64,
    pub theta_iii: f64,
    pub sector: Sector,
}

impl RiskAssessment {
    pub fn needs_avoidance(&self) -> bool {
        self.sector != Sector::IV
    }
}

/// Classifies the relative geometry `p_ib = p_i - p_beta`,
/// `v_ib = v_i - v_beta` into a risk sector.
pub fn assess_risk(p_ib: &Vec3, v_ib: &Vec3, r_beta: f64, params: &PotentialParams) -> Result<RiskAssessment> {
    let dist = p_ib.norm();
    if !(dist > 0.0) {
        return Err(FlockError::DegenerateGeometry("zero robot-obstacle separation"));
    }
    let reach = r_beta + params.r_c;
    let outer = (1.0 + params.k_delta) * reach;
    let lambda = params.lambda();
    let speed = v_ib.norm();

    let theta = if speed < EPS_V {
        FRAC_PI_2
    } else {
        angle_between(&-p_ib, v_ib)
    };
    let miss_distance = dist * theta.sin();
    let z = miss_distance / outer;

    if dist < reach {
        return Ok(RiskAssessment {
            theta,
            miss_distance,
            z,
            lambda,
            theta_i: FRAC_PI_2,
            theta_iii: FRAC_PI_2,
            sector: Sector::I,
        });
    }

    let theta_i = (reach / dist).min(1.0).asin();
    let theta_iii = (outer / dist).min(1.0).asin();
    let sector = if speed < EPS_V || theta >= theta_iii {
        Sector::IV
    } else if z < lambda {
        Sector::I
    } else if z < params.delta {
        Sector::II
    } else {
        Sector::III
    };
    Ok(RiskAssessment {
        theta,
        miss_distance,
        z,
        lambda,
        theta_i,
        theta_iii,
        sector,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> PotentialParams {
        PotentialParams::default()
    }

    #[test]
    fn sphere_projection_is_radial() {
        let o = StaticObstacle::sphere(Vec3::zeros(), 1.0);
        let b = o.project_beta(&Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(b.p, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(b.v, Vec3::zeros());
        assert_eq!(b.r_beta, 0.0);
        assert_eq!(b.kind, BetaKind::Static);
    }

    #[test]
    fn box_projection_clamps_componentwise() {
        let o = StaticObstacle::aabb(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        let b = o.project_beta(&Vec3::new(0.3, 0.7, 5.0)).unwrap();
        assert_relative_eq!(b.p, Vec3::new(0.3, 0.7, 1.0));
    }

    #[test]
    fn interior_points_are_penetrations() {
        let o = StaticObstacle::aabb(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        let err = o.project_beta(&Vec3::new(0.5, 0.5, 0.9)).unwrap_err();
        assert!(matches!(err, FlockError::Penetration { .. }));
        assert_relative_eq!(o.closest_surface_point(&Vec3::new(0.5, 0.5, 0.9)), Vec3::new(0.5, 0.5, 1.0));
        let s = StaticObstacle::sphere(Vec3::zeros(), 1.0);
        assert!(s.project_beta(&Vec3::new(0.1, 0.0, 0.0)).is_err());
        let pl = StaticObstacle::plane(Vec3::zeros(), Vec3::z());
        assert!(pl.project_beta(&Vec3::new(3.0, 1.0, -0.01)).is_err());
        assert_relative_eq!(pl.project_beta(&Vec3::new(3.0, 1.0, 2.0)).unwrap().p, Vec3::new(3.0, 1.0, 0.0));
    }

    #[test]
    fn obstacle_validation() {
        assert!(StaticObstacle::sphere(Vec3::zeros(), 0.0).validate().is_err());
        assert!(StaticObstacle::aabb(Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0)).validate().is_err());
        assert!(StaticObstacle::plane(Vec3::zeros(), Vec3::new(0.0, 0.0, 2.0)).validate().is_err());
        assert!(StaticObstacle::plane(Vec3::zeros(), Vec3::y()).validate().is_ok());
    }

    #[test]
    fn neighbour_boundary_is_inclusive() {
        let r_s = params().r_s;
        let robots = [
            RobotState::at_rest(Vec3::zeros()),
            RobotState::at_rest(Vec3::new(r_s, 0.0, 0.0)),
            RobotState::at_rest(Vec3::new(0.0, r_s + 1e-6, 0.0)),
        ];
        let s0 = perceived_sets(0, &robots, &[], &[], r_s).unwrap();
        assert_eq!(s0.neighbors, vec![1]);
        let s1 = perceived_sets(1, &robots, &[], &[], r_s).unwrap();
        assert!(s1.neighbors.contains(&0));
        assert!(perceived_sets(7, &robots, &[], &[], r_s).is_err());
    }

    #[test]
    fn dynamic_obstacle_at_extended_range_is_perceived() {
        let r_s = params().r_s;
        let robots = [RobotState::at_rest(Vec3::zeros())];
        let d = DynamicObstacle {
            p: Vec3::new(r_s + 0.12, 0.0, 0.0),
            v: Vec3::zeros(),
            radius: 0.12,
        };
        let far = DynamicObstacle {
            p: Vec3::new(r_s + 0.12 + 1e-6, 0.0, 0.0),
            ..d
        };
        let s = perceived_sets(0, &robots, &[], &[d, far], r_s).unwrap();
        assert_eq!(s.dynamics.len(), 1);
        assert_eq!(s.dynamics[0].0, 0);
    }

    #[test]
    fn head_on_is_sector_one() {
        let p = Vec3::new(-1.0, 0.0, 0.0);
        let r = assess_risk(&p, &Vec3::new(0.3, 0.0, 0.0), 0.12, &params()).unwrap();
        assert_relative_eq!(r.theta, 0.0);
        assert_eq!(r.sector, Sector::I);
    }

    #[test]
    fn perpendicular_motion_is_safe() {
        let p = Vec3::new(-1.0, 0.0, 0.0);
        let r = assess_risk(&p, &Vec3::new(0.0, 0.2, 0.0), 0.12, &params()).unwrap();
        assert_relative_eq!(r.theta, FRAC_PI_2);
        assert_eq!(r.sector, Sector::IV);
    }

    #[test]
    fn sector_boundary_angles() {
        // |p| = 0.5 and r_beta + r_c = 0.24
        let r = assess_risk(&Vec3::new(0.5, 0.0, 0.0), &Vec3::new(-1.0, 0.0, 0.0), 0.12, &params()).unwrap();
        assert_relative_eq!(r.theta_i, 0.5006547124045881_f64, epsilon = 1e-12);
        assert_relative_eq!(r.theta_iii, 0.80380231893303_f64, epsilon = 1e-12);
        assert_relative_eq!(r.lambda, 2.0 / 3.0);
    }

    #[test]
    fn relative_rest_and_penetration_conventions() {
        let r = assess_risk(&Vec3::new(0.3, 0.0, 0.0), &Vec3::zeros(), 0.0, &params()).unwrap();
        assert_eq!(r.sector, Sector::IV);
        let inside = assess_risk(&Vec3::new(0.1, 0.0, 0.0), &Vec3::new(0.0, 1.0, 0.0), 0.12, &params()).unwrap();
        assert_eq!(inside.sector, Sector::I);
        assert_eq!(inside.theta_iii, FRAC_PI_2);
        assert!(assess_risk(&Vec3::zeros(), &Vec3::x(), 0.0, &params()).is_err());
    }

    #[test]
    fn graph_connectivity() {
        let pts = [Vec3::zeros(), Vec3::new(0.4, 0.0, 0.0), Vec3::new(0.8, 0.0, 0.0)];
        let g = NeighborGraph::from_positions(&pts, 0.4631);
        assert!(g.is_connected());
        assert_eq!(g.edge_count(), 2);
        let g = NeighborGraph::from_positions(&[Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)], 0.4631);
        assert!(!g.is_connected());
    }

    fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
        (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn unit_quaternion() -> impl Strategy<Value = nalgebra::UnitQuaternion<f64>> {
        (vec3(1.0), 0.0..std::f64::consts::TAU).prop_filter_map("axis", |(axis, angle)| {
            let n = axis.norm();
            (n > 1e-3).then(|| nalgebra::UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle))
        })
    }

    proptest! {
        #[test]
        fn neighbour_relation_is_symmetric(pts in proptest::collection::vec(vec3(1.0), 2..12)) {
            let robots: Vec<_> = pts.iter().map(|p| RobotState::at_rest(*p)).collect();
            let r_s = params().r_s;
            let sets: Vec<_> = (0..robots.len()).map(|i| perceived_sets(i, &robots, &[], &[], r_s).unwrap()).collect();
            let graph = NeighborGraph::from_positions(&pts, r_s);
            for i in 0..robots.len() {
                prop_assert!(!sets[i].neighbors.contains(&i));
                prop_assert_eq!(&sets[i].neighbors[..], graph.neighbors(i));
                for &j in &sets[i].neighbors {
                    prop_assert!(sets[j].neighbors.contains(&i));
                }
            }
        }

        #[test]
        fn projection_lands_on_surface(p in vec3(5.0), c in vec3(1.0), r in 0.1..2.0f64,
                                       lo in vec3(1.0), ext in vec3(1.0)) {
            let shapes = [
                StaticObstacle::sphere(c, r),
                StaticObstacle::aabb(lo, lo + ext.abs().add_scalar(0.05)),
                StaticObstacle::plane(c, (ext.add_scalar(0.01)).normalize()),
            ];
            for shape in shapes {
                if shape.signed_distance(&p) >= 0.0 {
                    let b = shape.project_beta(&p).unwrap();
                    prop_assert!(shape.signed_distance(&b.p).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn sector_consistent_with_transition(p in vec3(2.0), v in vec3(1.0), r_beta in 0.0..0.2f64) {
            prop_assume!(p.norm() > 0.3 && v.norm() > 1e-3);
            let pr = params();
            let r = assess_risk(&p, &v, r_beta, &pr).unwrap();
            match r.sector {
                Sector::IV => prop_assert!(r.z >= 1.0 || r.theta >= r.theta_iii),
                Sector::I => prop_assert!(r.z < r.lambda),
                _ => prop_assert!(r.z < 1.0),
            }
        }

        #[test]
        fn risk_is_rotation_invariant(p in vec3(2.0), v in vec3(1.0), q in unit_quaternion()) {
            prop_assume!(p.norm() > 0.05 && v.norm() > 1e-3);
            let pr = params();
            let a = assess_risk(&p, &v, 0.12, &pr).unwrap();
            let b = assess_risk(&(q * p), &(q * v), 0.12, &pr).unwrap();
            prop_assert!((a.theta - b.theta).abs() <= 1e-12 * 4.0 + 1e-12);
            prop_assert!((a.theta_i - b.theta_i).abs() <= 1e-12);
            prop_assert!((a.theta_iii - b.theta_iii).abs() <= 1e-12);
        }
    }
}
