//! Gradient heuristic `u_g`: negative potential gradients plus damping, and
//! the bypass direction used around obstacles on a collision course.
//!
//! The heuristic is not applied directly by the main controller; it only
//! orients the candidate cone.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::environment::{assess_risk, BetaAgent};
use crate::error::{FlockError, Result};
use crate::environment::RiskAssessment;
use crate::model::{HeuristicParams, PotentialParams, RobotState, Vec3, Zone, EPS_NUM, EPS_V};
use crate::potentials::ReferenceState;

/// Orthonormal frame attached to one robot/obstacle encounter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvoidanceFrame {
    pub l1: Vec3,
    pub l2: Vec3,
    pub l3: Vec3,
    /// Rows are `l1, l2, l3`: maps global coordinates to local ones.
    pub r_gl: Matrix3<f64>,
    /// Rotation by `theta_iii` about the local third axis.
    pub r_l: Matrix3<f64>,
    /// Unit bypass direction.
    pub v_ob: Vec3,
    /// True when `p` and `v` were collinear and `l3` came from the fallback.
    pub degenerate: bool,
}

/// Per-term decomposition of the heuristic.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HeuristicTerms {
    pub u_gar: Vec3,
    pub u_gav: Vec3,
    pub u_grp: Vec3,
    pub u_grv: Vec3,
    pub u_gor: Vec3,
    pub u_gob: Vec3,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HeuristicSolution {
    /// Obstacle-free part.
    pub u_g0: Vec3,
    /// Avoidance part.
    pub u_g1: Vec3,
    pub u_g: Vec3,
    pub terms: HeuristicTerms,
}

/// `-grad psi_ar` for a separation vector `p_ij = p_i - p_j`.
pub fn pair_gradient(p_ij: &Vec3, r_f: f64, k_a: f64, k_t: f64) -> Result<Vec3> {
    let d = p_ij.norm();
    if !(d > 0.0) {
        return Err(FlockError::DegenerateGeometry("coincident robots"));
    }
    let s = if d <= k_t * r_f {
        (PI * d / r_f).sin()
    } else {
        (PI * k_t).sin()
    };
    Ok(p_ij * (PI * k_a / r_f * s / d))
}

/// Inter-robot gradient term in the open zone.
pub fn grad_inter_robot(x_i: &RobotState, x_j: &RobotState, params: &PotentialParams) -> Result<Vec3> {
    pair_gradient(&(x_i.p - x_j.p), params.r_f, params.k_a, params.k_t)
}

/// Position goal term. Zero at the reference itself.
pub fn grad_goal(x_i: &RobotState, x_r: &ReferenceState, params: &PotentialParams) -> Vec3 {
    let p_ir = x_i.p - x_r.p;
    let d = p_ir.norm();
    if d == 0.0 {
        return Vec3::zeros();
    }
    -p_ir * (params.k_rp * d.exp() / d)
}

/// `-grad psi_or` for `p_ib = p_i - p_beta`. Zero beyond `r_f`.
pub fn repulsion_gradient(p_ib: &Vec3, params: &PotentialParams) -> Result<Vec3> {
    let d = p_ib.norm();
    if !(d > 0.0) {
        return Err(FlockError::DegenerateGeometry("robot sits on its beta-agent"));
    }
    if d > params.r_f {
        return Ok(Vec3::zeros());
    }
    let a = PI * d / (2.0 * params.r_f);
    let mag = params.k_or * (1.0 - a.sin()).exp() * a.cos() * PI / (2.0 * params.r_f);
    Ok(p_ib * (mag / d))
}

/// Obstacle-free heuristic: attraction/repulsion, velocity consensus,
/// position goal and velocity goal. Coincident neighbours contribute no
/// pairwise gradient.
pub fn heuristic_free(
    x_i: &RobotState,
    neighbors: &[RobotState],
    x_r: &ReferenceState,
    params: &PotentialParams,
    hparams: &HeuristicParams,
    zone: Zone,
) -> HeuristicTerms {
    let r_f = params.effective_rf(zone);
    let mut t = HeuristicTerms::default();
    for x_j in neighbors {
        if let Ok(g) = pair_gradient(&(x_i.p - x_j.p), r_f, params.k_a, params.k_t) {
            t.u_gar += g;
        }
        t.u_gav -= (x_i.v - x_j.v) * hparams.k_av;
    }
    t.u_grp = grad_goal(x_i, x_r, params);
    t.u_grv = -(x_i.v - x_r.v) * hparams.k_rv_prime;
    t
}

fn least_aligned_axis(p: &Vec3) -> Vec3 {
    let mut k = 0;
    for j in 1..3 {
        if p[j].abs() < p[k].abs() {
            k = j;
        }
    }
    let mut e = Vec3::zeros();
    e[k] = 1.0;
    e
}

/// Builds the local frame of an encounter and the bypass direction, which
/// is the line of sight rotated by `theta_iii` inside the plane spanned by
/// `p_ib` and `v_ib`.
///
/// When `p_ib` and `v_ib` are collinear, the third axis is
/// `p_ib x e_k / |p_ib x e_k|` with `e_k` the canonical axis least aligned
/// with `p_ib` (lowest index on ties).
pub fn build_avoidance_frame(p_ib: &Vec3, v_ib: &Vec3, risk: &RiskAssessment) -> Result<AvoidanceFrame> {
    let d = p_ib.norm();
    if !(d > 0.0) {
        return Err(FlockError::DegenerateGeometry("zero robot-obstacle separation"));
    }
    if !(v_ib.norm() > EPS_V) {
        return Err(FlockError::DegenerateGeometry("no relative motion"));
    }
    let l1 = -p_ib / d;
    let c = p_ib.cross(v_ib);
    let degenerate = c.norm() <= EPS_NUM * d * v_ib.norm();
    let l3 = if degenerate {
        p_ib.cross(&least_aligned_axis(p_ib)).normalize()
    } else {
        -c.normalize()
    };
    let l2 = l3.cross(&l1);
    let r_gl = Matrix3::from_rows(&[l1.transpose(), l2.transpose(), l3.transpose()]);
    let (s, co) = risk.theta_iii.sin_cos();
    let r_l = Matrix3::new(co, s, 0.0, -s, co, 0.0, 0.0, 0.0, 1.0);
    let v_ob = r_gl.transpose() * r_l.transpose() * Vec3::x();
    Ok(AvoidanceFrame {
        l1,
        l2,
        l3,
        r_gl,
        r_l,
        v_ob,
        degenerate,
    })
}

/// Full heuristic with avoidance terms for every perceived obstacle.
///
/// Repulsion acts within `r_f`; the bypass term acts for obstacles in
/// sectors I to III. Degenerate encounters (zero separation, no relative
/// motion) are skipped for the bypass term.
pub fn heuristic_full(
    x_i: &RobotState,
    neighbors: &[RobotState],
    obstacles: &[BetaAgent],
    x_r: &ReferenceState,
    params: &PotentialParams,
    hparams: &HeuristicParams,
    zone: Zone,
) -> HeuristicSolution {
    let mut terms = heuristic_free(x_i, neighbors, x_r, params, hparams, zone);
    for b in obstacles {
        let p_ib = x_i.p - b.p;
        let v_ib = x_i.v - b.v;
        if let Ok(g) = repulsion_gradient(&p_ib, params) {
            terms.u_gor += g;
        }
        let Ok(risk) = assess_risk(&p_ib, &v_ib, b.r_beta, params) else {
            continue;
        };
        if !risk.needs_avoidance() {
            continue;
        }
        if let Ok(frame) = build_avoidance_frame(&p_ib, &v_ib, &risk) {
            terms.u_gob += frame.v_ob * hparams.k_ob;
        }
    }
    let u_g0 = terms.u_gar + terms.u_gav + terms.u_grp + terms.u_grv;
    let u_g1 = terms.u_gor + terms.u_gob;
    HeuristicSolution {
        u_g0,
        u_g1,
        u_g: u_g0 + u_g1,
        terms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Sector;
    use crate::potentials::{psi_ar_at, psi_or_at};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn risk_with(theta_iii: f64) -> RiskAssessment {
        RiskAssessment {
            theta: 0.0,
            miss_distance: 0.0,
            z: 0.0,
            lambda: 2.0 / 3.0,
            theta_i: theta_iii / 2.0,
            theta_iii,
            sector: Sector::I,
        }
    }

    fn fd_grad(f: impl Fn(&Vec3) -> f64, p: &Vec3, h: f64) -> Vec3 {
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let mut a = *p;
            let mut b = *p;
            a[k] += h;
            b[k] -= h;
            g[k] = (f(&a) - f(&b)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn pair_gradient_examples() {
        let p = PotentialParams::default();
        let a = RobotState::at_rest(Vec3::zeros());
        let b = RobotState::at_rest(Vec3::new(p.r_f, 0.0, 0.0));
        assert!(grad_inter_robot(&a, &b, &p).unwrap().norm() < 1e-12);
        let c = RobotState::at_rest(Vec3::new(0.0, p.r_f / 2.0, 0.0));
        let g = grad_inter_robot(&a, &c, &p).unwrap();
        assert_relative_eq!(g, Vec3::new(0.0, -PI * p.k_a / p.r_f, 0.0), epsilon = 1e-12);
        assert!(grad_inter_robot(&a, &a, &p).is_err());
    }

    #[test]
    fn goal_gradient_examples() {
        let p = PotentialParams::default();
        let r = ReferenceState::new(Vec3::zeros(), Vec3::zeros());
        assert_eq!(grad_goal(&RobotState::at_rest(Vec3::zeros()), &r, &p), Vec3::zeros());
        let g = grad_goal(&RobotState::at_rest(Vec3::x()), &r, &p);
        assert_relative_eq!(g, Vec3::new(-5.0 * E, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(g.x, -13.591409142295225, epsilon = 1e-12);
    }

    #[test]
    fn free_heuristic_vanishes_at_equilibrium() {
        let p = PotentialParams::default();
        let h = HeuristicParams::default();
        let r = ReferenceState::new(Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.1, 0.0, 0.0));
        let me = RobotState::new(r.p, r.v);
        assert_eq!(heuristic_free(&me, &[], &r, &p, &h, Zone::Open), HeuristicTerms::default());

        let a = RobotState::new(r.p, r.v);
        let b = RobotState::new(r.p + Vec3::new(p.r_f, 0.0, 0.0), r.v);
        let rb = ReferenceState::new(b.p, r.v);
        let ta = heuristic_free(&a, &[b], &r, &p, &h, Zone::Open);
        let tb = heuristic_free(&b, &[a], &rb, &p, &h, Zone::Open);
        for t in [ta, tb] {
            let sum = t.u_gar + t.u_gav + t.u_grp + t.u_grv;
            assert!(sum.norm() < 1e-12);
        }
    }

    #[test]
    fn pairwise_terms_are_antisymmetric() {
        let p = PotentialParams::default();
        let h = HeuristicParams::default();
        let r = ReferenceState::new(Vec3::zeros(), Vec3::zeros());
        let a = RobotState::new(Vec3::new(0.1, 0.2, 0.0), Vec3::new(0.1, 0.0, 0.0));
        let b = RobotState::new(Vec3::new(0.3, -0.1, 0.05), Vec3::new(0.0, 0.2, 0.0));
        let ta = heuristic_free(&a, &[b], &r, &p, &h, Zone::Open);
        let tb = heuristic_free(&b, &[a], &r, &p, &h, Zone::Open);
        assert_relative_eq!(ta.u_gar, -tb.u_gar, epsilon = 1e-15);
        assert_relative_eq!(ta.u_gav, -tb.u_gav, epsilon = 1e-15);
    }

    #[test]
    fn head_on_frame_uses_the_fallback_axis() {
        let f = build_avoidance_frame(&Vec3::new(-1.0, 0.0, 0.0), &Vec3::new(1.0, 0.0, 0.0), &risk_with(PI / 6.0)).unwrap();
        assert!(f.degenerate);
        // independent planar rotation of the line of sight (+x) by -pi/6
        let (s, c) = (-PI / 6.0).sin_cos();
        assert_relative_eq!(f.v_ob, Vec3::new(c, s, 0.0), epsilon = 1e-12);
        assert_relative_eq!(f.v_ob, Vec3::new(0.8660254037844387, -0.5, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn bypass_turns_toward_the_side_already_taken() {
        let f = build_avoidance_frame(&Vec3::new(-1.0, 0.0, 0.0), &Vec3::new(1.0, 0.1, 0.0), &risk_with(0.5)).unwrap();
        assert!(!f.degenerate);
        assert!(f.v_ob.y > 0.0);
        assert_relative_eq!(f.l3, Vec3::z(), epsilon = 1e-12);
    }

    #[test]
    fn full_heuristic_gates() {
        let p = PotentialParams::default();
        let h = HeuristicParams::default();
        let r = ReferenceState::new(Vec3::new(2.0, 0.0, 1.0), Vec3::new(0.2, 0.0, 0.0));
        let me = RobotState::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.2, 0.0, 0.0));
        let none = heuristic_full(&me, &[], &[], &r, &p, &h, Zone::Open);
        assert_eq!(none.u_g, none.u_g0);
        assert_eq!(none.u_g1, Vec3::zeros());

        // behind the robot: sector IV, no bypass
        let behind = BetaAgent::fixed(Vec3::new(-0.3, 0.0, 1.0));
        let s = heuristic_full(&me, &[], &[behind], &r, &p, &h, Zone::Open);
        assert_eq!(s.terms.u_gob, Vec3::zeros());
        assert!(s.terms.u_gor.x > 0.0);

        // ahead, slightly off axis, beyond r_f: bypass only
        let ahead = BetaAgent::fixed(Vec3::new(0.44, 0.15, 1.0));
        let risk = assess_risk(&(me.p - ahead.p), &me.v, 0.12, &p).unwrap();
        assert!(risk.needs_avoidance());
        let s = heuristic_full(&me, &[], &[ahead], &r, &p, &h, Zone::Open);
        assert_eq!(s.terms.u_gor, Vec3::zeros());
        assert_relative_eq!(s.terms.u_gob.norm(), h.k_ob, epsilon = 1e-12);
        assert_eq!(s.u_g, s.u_g0 + s.u_g1);
    }

    fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
        (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn pair_gradient_matches_finite_differences(dir in vec3(1.0), frac in 0.01..0.999f64) {
            prop_assume!(dir.norm() > 0.1);
            let p = PotentialParams::default();
            let d = frac * p.k_t * p.r_f;
            prop_assume!((d - p.k_t * p.r_f).abs() > 1e-3 * p.r_f);
            let pij = dir.normalize() * d;
            let g = pair_gradient(&pij, p.r_f, p.k_a, p.k_t).unwrap();
            let fd = -fd_grad(|q| psi_ar_at(q.norm(), p.r_f, p.k_a, p.k_t), &pij, 1e-6);
            prop_assert!((g - fd).norm() <= 1e-5 * g.norm().max(1e-3));
        }

        #[test]
        fn repulsion_gradient_matches_finite_differences(dir in vec3(1.0), frac in 0.01..1.5f64) {
            prop_assume!(dir.norm() > 0.1);
            let p = PotentialParams::default();
            prop_assume!((frac - 1.0).abs() > 1e-3);
            let pib = dir.normalize() * frac * p.r_f;
            let g = repulsion_gradient(&pib, &p).unwrap();
            let fd = -fd_grad(|q| psi_or_at(q.norm(), &p), &pib, 1e-6);
            prop_assert!((g - fd).norm() <= 1e-5 * g.norm().max(1e-3));
        }

        #[test]
        fn goal_gradient_points_home(pir in vec3(2.0)) {
            prop_assume!(pir.norm() > 1e-9);
            let p = PotentialParams::default();
            let r = ReferenceState::new(Vec3::zeros(), Vec3::zeros());
            prop_assert!(grad_goal(&RobotState::at_rest(pir), &r, &p).dot(&pir) < 0.0);
        }

        #[test]
        fn frame_is_orthonormal(pib in vec3(2.0), vib in vec3(1.0), th in 0.0..std::f64::consts::FRAC_PI_2) {
            prop_assume!(pib.norm() > 1e-3 && vib.norm() > 1e-3);
            let f = build_avoidance_frame(&pib, &vib, &risk_with(th)).unwrap();
            for (a, b) in [(f.l1, f.l2), (f.l2, f.l3), (f.l3, f.l1)] {
                prop_assert!(a.dot(&b).abs() <= 1e-9);
            }
            for l in [f.l1, f.l2, f.l3, f.v_ob] {
                prop_assert!((l.norm() - 1.0).abs() <= 1e-9);
            }
            prop_assert!(f.v_ob.dot(&f.l3).abs() <= 1e-9);
            prop_assert!((crate::model::angle_between(&f.v_ob, &f.l1) - th).abs() <= 1e-9);
            if !f.degenerate {
                prop_assert!(f.l3.dot(&pib).abs() <= 1e-9 * pib.norm());
                prop_assert!(f.l3.dot(&vib).abs() <= 1e-9 * vib.norm());
            }
        }
    }
}
