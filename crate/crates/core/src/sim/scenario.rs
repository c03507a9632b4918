//! Scenario description, reference trajectories and built-in scenarios.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{DynamicObstacle, StaticObstacle};
use crate::error::{FlockError, Result};
use crate::model::{vec3_list_serde, vec3_serde, ParamBundle, RobotState, Vec3};
use crate::potentials::ReferenceState;

/// Reference followed by every robot of a group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceTrajectory {
    /// `p_r(t) = p0 + v t`.
    Linear {
        #[serde(with = "vec3_serde")]
        p0: Vec3,
        #[serde(with = "vec3_serde")]
        v: Vec3,
    },
    /// Constant-speed polyline; holds the last point once it is reached.
    Waypoints {
        #[serde(with = "vec3_list_serde")]
        points: Vec<Vec3>,
        speed: f64,
    },
}

impl ReferenceTrajectory {
    pub fn validate(&self) -> Result<()> {
        match self {
            ReferenceTrajectory::Linear { p0, v } => {
                if !(crate::model::is_finite(p0) && crate::model::is_finite(v)) {
                    return Err(FlockError::InvalidParams("linear reference must be finite".into()));
                }
            }
            ReferenceTrajectory::Waypoints { points, speed } => {
                if points.is_empty() || !points.iter().all(crate::model::is_finite) {
                    return Err(FlockError::InvalidParams("waypoint reference needs finite points".into()));
                }
                if !(speed.is_finite() && *speed >= 0.0) {
                    return Err(FlockError::InvalidParams(format!("waypoint speed {speed} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> ReferenceState {
        match self {
            ReferenceTrajectory::Linear { p0, v } => ReferenceState::new(p0 + v * t, *v),
            ReferenceTrajectory::Waypoints { points, speed } => {
                let mut s = speed * t;
                for w in points.windows(2) {
                    let seg = w[1] - w[0];
                    let len = seg.norm();
                    if len == 0.0 {
                        continue;
                    }
                    if s < len {
                        let dir = seg / len;
                        return ReferenceState::new(w[0] + dir * s, dir * *speed);
                    }
                    s -= len;
                }
                ReferenceState::new(*points.last().expect("validated"), Vec3::zeros())
            }
        }
    }

    /// Time at which the reference stops, if it does.
    pub fn end_time(&self) -> Option<f64> {
        match self {
            ReferenceTrajectory::Linear { .. } => None,
            ReferenceTrajectory::Waypoints { points, speed } => {
                let len: f64 = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
                (*speed > 0.0).then(|| len / speed)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub reference: ReferenceTrajectory,
    pub robots: Vec<RobotState>,
    #[serde(default)]
    pub params: ParamBundle,
}

fn default_r_beta() -> f64 {
    0.12
}

/// A complete simulation setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Episode length (s).
    pub duration: f64,
    /// Radius under which robots of other groups are perceived.
    #[serde(default = "default_r_beta")]
    pub r_beta: f64,
    /// Half-width of the seeded uniform perturbation of initial positions.
    #[serde(default)]
    pub initial_jitter: f64,
    #[serde(default)]
    pub statics: Vec<StaticObstacle>,
    /// Scripted obstacles moving at constant velocity from `t = 0`.
    #[serde(default)]
    pub dynamics: Vec<DynamicObstacle>,
    pub groups: Vec<Group>,
}

impl Scenario {
    pub fn robot_count(&self) -> usize {
        self.groups.iter().map(|g| g.robots.len()).sum()
    }

    /// Group index of every robot, in global robot order.
    pub fn group_of(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(g, grp)| std::iter::repeat_n(g, grp.robots.len()))
            .collect()
    }

    pub fn dt(&self) -> f64 {
        self.groups.first().map_or(0.05, |g| g.params.dynamics.dt)
    }

    /// Number of control steps `K = T / dt`; ticks run over `0..=K`.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt()).round() as usize
    }

    pub fn dynamics_at(&self, t: f64) -> Vec<DynamicObstacle> {
        self.dynamics
            .iter()
            .map(|d| DynamicObstacle {
                p: d.p + d.v * t,
                ..*d
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FlockError::InvalidParams(m));
        if self.groups.is_empty() || self.groups.iter().any(|g| g.robots.is_empty()) {
            return bad("every scenario needs at least one non-empty group".into());
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration {} must be positive", self.duration));
        }
        if !(self.r_beta.is_finite() && self.r_beta >= 0.0) || !(self.initial_jitter.is_finite() && self.initial_jitter >= 0.0) {
            return bad("r_beta and initial_jitter must be non-negative".into());
        }
        let dt = self.dt();
        for g in &self.groups {
            g.params
                .validate()
                .map_err(|e| FlockError::InvalidParams(format!("group `{}`: {e}", g.name)))?;
            g.reference.validate()?;
            if g.params.dynamics.dt != dt {
                return bad(format!("group `{}` uses a different time step", g.name));
            }
            if g.robots.iter().any(|x| !x.is_finite()) {
                return bad(format!("group `{}` has a non-finite initial state", g.name));
            }
        }
        for o in &self.statics {
            o.validate()?;
        }
        for d in &self.dynamics {
            if !(crate::model::is_finite(&d.p) && crate::model::is_finite(&d.v) && d.radius >= 0.0) {
                return bad("dynamic obstacles need finite state and radius >= 0".into());
            }
        }
        self.check_initial_states(&self.initial_states())
    }

    fn check_initial_states(&self, states: &[RobotState]) -> Result<()> {
        let group_of = self.group_of();
        for i in 0..states.len() {
            let r_c = self.groups[group_of[i]].params.potential.r_c;
            for j in i + 1..states.len() {
                let d = (states[i].p - states[j].p).norm();
                if d <= 2.0 * r_c {
                    return Err(FlockError::InvalidParams(format!(
                        "robots {i} and {j} start {d:.4} m apart (need > {:.4})",
                        2.0 * r_c
                    )));
                }
            }
            for (k, o) in self.statics.iter().enumerate() {
                if o.signed_distance(&states[i].p) <= 0.0 {
                    return Err(FlockError::InvalidParams(format!("robot {i} starts inside static obstacle {k}")));
                }
            }
        }
        Ok(())
    }

    pub fn initial_states(&self) -> Vec<RobotState> {
        self.groups.iter().flat_map(|g| g.robots.iter().copied()).collect()
    }

    /// Initial states with the seeded position perturbation applied.
    pub fn seeded_states(&self, seed: u64) -> Result<Vec<RobotState>> {
        let mut states = self.initial_states();
        if self.initial_jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = self.initial_jitter;
            for x in &mut states {
                x.p += Vec3::new(rng.gen_range(-a..=a), rng.gen_range(-a..=a), rng.gen_range(-a..=a));
            }
        }
        self.check_initial_states(&states)?;
        Ok(states)
    }

    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| FlockError::parse(source_name, e.to_string()))?;
        s.validate()
            .map_err(|e| FlockError::parse(source_name, e.to_string()))?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FlockError::InvalidParams(format!("cannot serialize scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }
}

/// Unit-spaced formation offsets for `n` robots, scaled to edge `spacing`.
pub fn formation(n: usize, spacing: f64) -> Vec<Vec3> {
    let pts: Vec<Vec3> = match n {
        1 => vec![Vec3::zeros()],
        2 => vec![Vec3::new(0.0, -0.5, 0.0), Vec3::new(0.0, 0.5, 0.0)],
        4 => {
            let s = 1.0 / (2.0 * 2f64.sqrt());
            vec![
                Vec3::new(s, s, s),
                Vec3::new(s, -s, -s),
                Vec3::new(-s, s, -s),
                Vec3::new(-s, -s, s),
            ]
        }
        6 => {
            let a = 1.0 / 2f64.sqrt();
            vec![
                Vec3::new(a, 0.0, 0.0),
                Vec3::new(-a, 0.0, 0.0),
                Vec3::new(0.0, a, 0.0),
                Vec3::new(0.0, -a, 0.0),
                Vec3::new(0.0, 0.0, a),
                Vec3::new(0.0, 0.0, -a),
            ]
        }
        8 => {
            let mut v = Vec::new();
            for x in [-0.5, 0.5] {
                for y in [-0.5, 0.5] {
                    for z in [-0.5, 0.5] {
                        v.push(Vec3::new(x, y, z));
                    }
                }
            }
            v
        }
        _ => {
            let r = 1.0 / (2.0 * (PI / n as f64).sin());
            (0..n)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    Vec3::new(0.0, r * a.cos(), r * a.sin())
                })
                .collect()
        }
    };
    pts.into_iter().map(|p| p * spacing).collect()
}

/// Default parameters, with the adjustments for groups of six and
/// eight robots.
pub fn params_for_group_size(n: usize) -> ParamBundle {
    let mut p = ParamBundle::default();
    match n {
        6 => {
            p.potential.k_n = 1.65;
            p.potential.k_rp = 25.0;
            p.potential.k_rv = 17.0;
        }
        8 => {
            p.potential.k_a = 18.0;
            p.potential.k_n = 1.7;
            p.potential.k_or = 18.0;
            p.potential.k_od = 12.0;
            p.potential.k_rp = 26.0;
            p.potential.k_rv = 20.0;
            p.heuristic.k_ob = 18.0;
        }
        _ => {}
    }
    p
}

/// Geometry of the two-door benchmark. Two groups start on the same side of
/// a wall, cross paths in front of it, and leave through different openings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoorwayConfig {
    /// Robots per group.
    pub n: usize,
    pub opening_width: f64,
    pub opening_height: f64,
    /// Lateral offset of each opening's centre from the wall's midline.
    pub door_offset: f64,
    pub wall_thickness: f64,
    /// Lateral and vertical extent of the wall.
    pub wall_half_width: f64,
    pub wall_height: f64,
    /// Flight altitude of the references and opening centres.
    pub altitude: f64,
    /// Distance of the start points in front of the wall.
    pub approach: f64,
    /// Lateral offset of the start points (the groups start on the side
    /// opposite their opening).
    pub start_offset: f64,
    /// Distance flown past the wall.
    pub exit: f64,
    /// Extra approach distance of the second group, so the formations reach
    /// the crossing point at different times.
    pub stagger: f64,
    pub speed: f64,
    pub duration: f64,
    pub jitter: f64,
}

impl Default for DoorwayConfig {
    fn default() -> Self {
        Self {
            n: 4,
            opening_width: 1.2,
            opening_height: 1.2,
            door_offset: 1.2,
            wall_thickness: 0.1,
            wall_half_width: 3.0,
            wall_height: 2.4,
            altitude: 1.2,
            approach: 3.0,
            start_offset: 1.2,
            exit: 2.0,
            stagger: 0.6,
            speed: 0.15,
            duration: 50.0,
            jitter: 0.03,
        }
    }
}

impl DoorwayConfig {
    /// Box obstacles forming a wall in the plane `x = 0` with two openings
    /// centred at `y = +-door_offset`.
    pub fn wall(&self) -> Vec<StaticObstacle> {
        let t = self.wall_thickness / 2.0;
        let (w, h) = (self.opening_width / 2.0, self.opening_height / 2.0);
        let (yd, zc) = (self.door_offset, self.altitude);
        let (ym, zm) = (self.wall_half_width, self.wall_height);
        let b = |y0: f64, y1: f64, z0: f64, z1: f64| StaticObstacle::aabb(Vec3::new(-t, y0, z0), Vec3::new(t, y1, z1));
        vec![
            // below and above both openings
            b(-ym, ym, 0.0, zc - h),
            b(-ym, ym, zc + h, zm),
            // columns left of, between and right of the openings
            b(-ym, -yd - w, zc - h, zc + h),
            b(-yd + w, yd - w, zc - h, zc + h),
            b(yd + w, ym, zc - h, zc + h),
        ]
    }

    pub fn build(&self) -> Result<Scenario> {
        if !matches!(self.n, 2 | 4 | 6 | 8) {
            log::warn!("doorway scenario with {} robots per group is untested", self.n);
        }
        if self.n == 0 {
            return Err(FlockError::InvalidParams("doorway groups need at least one robot".into()));
        }
        let params = params_for_group_size(self.n);
        let clearance = 2.0 * params.potential.r_c;
        if self.opening_width <= clearance || self.opening_height <= clearance {
            return Err(FlockError::InvalidParams(format!(
                "openings must be wider than {clearance} m to be passable"
            )));
        }
        let spacing = params.potential.r_f;
        let z = self.altitude;
        let mut groups = Vec::new();
        for (name, side, lag) in [("a", 1.0, 0.0), ("b", -1.0, self.stagger)] {
            let start = Vec3::new(-self.approach - lag, -side * self.start_offset, z);
            let door = side * self.door_offset;
            let points = vec![
                start,
                Vec3::new(-0.8, door, z),
                Vec3::new(0.8, door, z),
                Vec3::new(0.8 + self.exit, door + side * 0.5 * self.exit, z),
            ];
            let robots = formation(self.n, spacing)
                .into_iter()
                .map(|o| RobotState::at_rest(start + o))
                .collect();
            groups.push(Group {
                name: name.into(),
                reference: ReferenceTrajectory::Waypoints {
                    points,
                    speed: self.speed,
                },
                robots,
                params,
            });
        }
        let s = Scenario {
            name: if self.n == 4 { "doorway".into() } else { format!("doorway-{}", self.n) },
            duration: self.duration,
            r_beta: 0.12,
            initial_jitter: self.jitter,
            statics: self.wall(),
            dynamics: Vec::new(),
            groups,
        };
        s.validate()?;
        Ok(s)
    }
}

pub fn build_doorway_scenario(config: &DoorwayConfig) -> Result<Scenario> {
    config.build()
}

/// One group of four flying in open space along a straight line.
pub fn open_scenario() -> Scenario {
    let params = ParamBundle::default();
    let start = Vec3::new(0.0, 0.0, 1.2);
    Scenario {
        name: "open".into(),
        duration: 30.0,
        r_beta: 0.12,
        initial_jitter: 0.03,
        statics: Vec::new(),
        dynamics: Vec::new(),
        groups: vec![Group {
            name: "a".into(),
            reference: ReferenceTrajectory::Linear {
                p0: start,
                v: Vec3::new(0.15, 0.0, 0.0),
            },
            robots: formation(4, params.potential.r_f)
                .into_iter()
                .map(|o| RobotState::at_rest(start + o))
                .collect(),
            params,
        }],
    }
}

/// Softened gains under which the plain gradient law is stable at the
/// default time step. Used by the consensus and reconnection scenarios.
pub fn gentle_params() -> ParamBundle {
    let mut p = ParamBundle::default();
    p.potential.k_a = 0.2;
    p.potential.k_rp = 0.2;
    p.heuristic.k_av = 1.0;
    p.heuristic.k_rv_prime = 1.0;
    p
}

/// Four robots near formation, obstacle free, tracking a constant-velocity
/// reference with the gentle gains.
pub fn consensus_scenario() -> Scenario {
    let params = gentle_params();
    let start = Vec3::new(0.0, 0.0, 1.2);
    let offsets = formation(4, params.potential.r_f);
    let kicks = [
        Vec3::new(0.05, 0.0, 0.0),
        Vec3::new(0.0, 0.04, 0.0),
        Vec3::new(0.0, 0.0, -0.03),
        Vec3::new(-0.02, 0.0, 0.02),
    ];
    Scenario {
        name: "consensus".into(),
        duration: 60.0,
        r_beta: 0.12,
        initial_jitter: 0.0,
        statics: Vec::new(),
        dynamics: Vec::new(),
        groups: vec![Group {
            name: "a".into(),
            reference: ReferenceTrajectory::Linear {
                p0: start,
                v: Vec3::new(0.1, 0.0, 0.0),
            },
            robots: offsets
                .iter()
                .zip(kicks)
                .map(|(o, k)| RobotState::new(start + o * 1.05, k))
                .collect(),
            params,
        }],
    }
}

/// Two robots of one group starting three sensing radii apart.
pub fn reconnect_scenario() -> Scenario {
    let params = ParamBundle::default();
    let gap = 3.0 * params.potential.r_s;
    let c = Vec3::new(0.0, 0.0, 1.2);
    Scenario {
        name: "reconnect".into(),
        duration: 120.0,
        r_beta: 0.12,
        initial_jitter: 0.0,
        statics: Vec::new(),
        dynamics: Vec::new(),
        groups: vec![Group {
            name: "a".into(),
            reference: ReferenceTrajectory::Linear { p0: c, v: Vec3::zeros() },
            robots: vec![
                RobotState::at_rest(c - Vec3::new(gap / 2.0, 0.0, 0.0)),
                RobotState::at_rest(c + Vec3::new(gap / 2.0, 0.0, 0.0)),
            ],
            params,
        }],
    }
}

pub const BUILTIN_NAMES: [&str; 7] = ["doorway", "doorway-2", "doorway-6", "doorway-8", "open", "consensus", "reconnect"];

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let doorway = |n| DoorwayConfig { n, ..DoorwayConfig::default() }.build();
    match name {
        "doorway" => doorway(4),
        "doorway-2" => doorway(2),
        "doorway-6" => doorway(6),
        "doorway-8" => doorway(8),
        "open" => Ok(open_scenario()),
        "consensus" => Ok(consensus_scenario()),
        "reconnect" => Ok(reconnect_scenario()),
        _ => Err(FlockError::InvalidParams(format!(
            "unknown scenario `{name}` (built-ins: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}
