//! Biased control-space discretization, mean-field inference over the local
//! random field, and MAP control selection.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::environment::{perceive_dynamics, perceive_statics, BetaAgent, DynamicObstacle, StaticObstacle};
use crate::error::{FlockError, Result};
use crate::heuristic::{heuristic_full, HeuristicSolution};
use crate::model::{
    angle_between, predict, saturate, ControllerParams, DynamicsParams, ParamBundle, RobotState, Vec3, Zone, EPS_NUM,
};
use crate::potentials::{obstacle_energy_bound, psi_ar_at, psi_goal, psi_obstacle, ReferenceState};

/// Angular tolerance used to merge grid directions.
pub const DIRECTION_TOL: f64 = 1e-9;

/// Largest joint configuration count `exact_posterior` will enumerate.
pub const EXACT_LIMIT: u128 = 1_000_000;

/// Which control law a robot runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Heuristic cone of half-width `k_u * pi` around `u_g`.
    #[default]
    #[serde(rename = "heuristic")]
    Heuristic,
    /// Full sphere of directions (`k_u = 1`).
    #[serde(rename = "nonheuristic")]
    NonHeuristic,
    /// `saturate(u_g, u_max)` applied directly, no inference.
    #[serde(rename = "gradient-only")]
    GradientOnly,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Heuristic, Method::NonHeuristic, Method::GradientOnly];

    pub fn name(self) -> &'static str {
        match self {
            Method::Heuristic => "heuristic",
            Method::NonHeuristic => "nonheuristic",
            Method::GradientOnly => "gradient-only",
        }
    }

    /// Controller parameters actually used under this method.
    pub fn effective(self, c: &ControllerParams) -> ControllerParams {
        match self {
            Method::NonHeuristic => ControllerParams { k_u: 1.0, ..*c },
            _ => *c,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = FlockError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FlockError::InvalidParams(format!("unknown method `{s}` (heuristic, nonheuristic, gradient-only)")))
    }
}

/// Unit direction `e(theta, phi)`.
pub fn direction(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin())
}

/// The angular grid with duplicate directions removed, in `(k1, k2)`
/// lexicographic order; the first occurrence of each direction is kept.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionGrid {
    pub k_theta: u32,
    pub k_phi: u32,
    /// `(k1, k2, e)` per distinct direction.
    pub directions: Vec<(u32, u32, Vec3)>,
}

impl DirectionGrid {
    pub fn new(k_theta: u32, k_phi: u32) -> Self {
        let dt = 2.0 * PI / f64::from(k_theta);
        let dp = 2.0 * PI / f64::from(k_phi);
        let mut directions: Vec<(u32, u32, Vec3)> = Vec::new();
        for k1 in 0..k_theta {
            for k2 in 0..k_phi {
                let e = direction(f64::from(k1) * dt, f64::from(k2) * dp);
                if directions.iter().all(|(_, _, f)| angle_between(&e, f) > DIRECTION_TOL) {
                    directions.push((k1, k2, e));
                }
            }
        }
        Self {
            k_theta,
            k_phi,
            directions,
        }
    }

    pub fn for_params(c: &ControllerParams) -> Self {
        Self::new(c.k_theta, c.k_phi)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Indices of the directions inside the cone of half-width `k_u * pi`
    /// around `axis`. A zero axis or `k_u >= 1` keeps everything; an empty
    /// cone falls back to the nearest direction.
    pub fn cone(&self, axis: &Vec3, k_u: f64) -> Vec<usize> {
        if axis.norm() <= EPS_NUM || k_u >= 1.0 {
            return (0..self.len()).collect();
        }
        let half = k_u * PI;
        let angles: Vec<f64> = self.directions.iter().map(|(_, _, e)| angle_between(e, axis)).collect();
        let inside: Vec<usize> = (0..self.len()).filter(|&k| angles[k] <= half).collect();
        if !inside.is_empty() {
            return inside;
        }
        let mut best = 0;
        for k in 1..angles.len() {
            if angles[k] < angles[best] {
                best = k;
            }
        }
        vec![best]
    }
}

/// Input candidates of one robot with their predicted states. Ordered by
/// magnitude, then grid index; the zero input is last.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub inputs: Vec<Vec3>,
    pub predicted: Vec<RobotState>,
    pub k_u: f64,
    /// Directions that survived the cone filter.
    pub direction_count: usize,
    pub magnitude_count: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

pub fn build_candidate_set_on(
    grid: &DirectionGrid,
    x: &RobotState,
    u_g: &Vec3,
    cparams: &ControllerParams,
    dparams: &DynamicsParams,
) -> Result<CandidateSet> {
    let dirs = grid.cone(u_g, cparams.k_u);
    let mags = cparams.magnitudes(dparams.u_max);
    let mut inputs = Vec::with_capacity(dirs.len() * mags.len() + 1);
    for &m in &mags {
        for &k in &dirs {
            inputs.push(saturate(grid.directions[k].2 * m, dparams.u_max));
        }
    }
    inputs.push(Vec3::zeros());
    let predicted = inputs
        .iter()
        .map(|u| predict(x, *u, dparams.horizon, dparams))
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSet {
        inputs,
        predicted,
        k_u: cparams.k_u,
        direction_count: dirs.len(),
        magnitude_count: mags.len(),
    })
}

/// Candidate set for one robot biased toward `u_g`.
pub fn build_candidate_set(
    x: &RobotState,
    u_g: &Vec3,
    cparams: &ControllerParams,
    dparams: &DynamicsParams,
) -> Result<CandidateSet> {
    build_candidate_set_on(&DirectionGrid::for_params(cparams), x, u_g, cparams, dparams)
}

/// Pairwise energy table between agents `a < b`, row-major over
/// `(candidate of a, candidate of b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTerm {
    pub a: usize,
    pub b: usize,
    pub energy: Vec<f64>,
}

/// Discrete pairwise energy model over the candidates of a local agent set:
/// `E(x) = sum_h unary_h(x_h) + sum_pairs energy_ab(x_a, x_b)`, each
/// unordered pair counted once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalField {
    pub unary: Vec<Vec<f64>>,
    pub pairs: Vec<PairTerm>,
}

impl LocalField {
    pub fn agent_count(&self) -> usize {
        self.unary.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.unary.iter().map(Vec::len).collect()
    }

    fn validate(&self) -> Result<()> {
        let sizes = self.sizes();
        if sizes.contains(&0) {
            return Err(FlockError::InvalidParams("empty candidate set".into()));
        }
        for p in &self.pairs {
            if p.a >= p.b || p.b >= sizes.len() || p.energy.len() != sizes[p.a] * sizes[p.b] {
                return Err(FlockError::InvalidParams(format!("malformed pair term ({}, {})", p.a, p.b)));
            }
        }
        Ok(())
    }

    /// Energy of one joint configuration.
    pub fn energy(&self, config: &[usize]) -> f64 {
        let mut e: f64 = self.unary.iter().zip(config).map(|(u, &c)| u[c]).sum();
        for p in &self.pairs {
            e += p.energy[config[p.a] * self.unary[p.b].len() + config[p.b]];
        }
        e
    }

    /// Expected field seen by agent `h` given everyone else's beliefs.
    fn mean_field(&self, h: usize, q: &[Vec<f64>]) -> Vec<f64> {
        let mut f = self.unary[h].clone();
        for p in &self.pairs {
            if p.a == h {
                let nb = self.unary[p.b].len();
                for (x, fx) in f.iter_mut().enumerate() {
                    let row = &p.energy[x * nb..(x + 1) * nb];
                    *fx += row.iter().zip(&q[p.b]).map(|(w, qb)| w * qb).sum::<f64>();
                }
            } else if p.b == h {
                let nb = f.len();
                for (y, qa) in q[p.a].iter().enumerate() {
                    if *qa == 0.0 {
                        continue;
                    }
                    let row = &p.energy[y * nb..(y + 1) * nb];
                    for (fx, w) in f.iter_mut().zip(row) {
                        *fx += qa * w;
                    }
                }
            }
        }
        f
    }
}

/// Normalized `exp(-energy)`, shifted by the minimum for stability.
/// Returns `None` when no entry is finite.
pub fn softmin(energy: &[f64]) -> Option<Vec<f64>> {
    let lo = energy.iter().copied().filter(|e| !e.is_nan()).fold(f64::INFINITY, f64::min);
    if !lo.is_finite() || energy.iter().any(|e| e.is_nan()) {
        return None;
    }
    let w: Vec<f64> = energy.iter().map(|e| (-(e - lo)).exp()).collect();
    let s: f64 = w.iter().sum();
    Some(w.into_iter().map(|x| x / s).collect())
}

/// Per-agent beliefs over candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefTable {
    pub q: Vec<Vec<f64>>,
    pub sweeps: usize,
    /// Largest per-entry change during the last sweep.
    pub max_change: f64,
    pub converged: bool,
    /// Set when some agent's update had to fall back to uniform.
    pub fallback: bool,
}

impl BeliefTable {
    pub fn uniform(sizes: &[usize]) -> Self {
        Self {
            q: sizes.iter().map(|&n| vec![1.0 / n as f64; n]).collect(),
            sweeps: 0,
            max_change: f64::INFINITY,
            converged: false,
            fallback: false,
        }
    }

    /// Most probable candidate of agent `h`, lowest index on ties.
    pub fn argmax(&self, h: usize) -> usize {
        let q = &self.q[h];
        let mut best = 0;
        for k in 1..q.len() {
            if q[k] > q[best] {
                best = k;
            }
        }
        best
    }
}

/// One sweep of coordinate updates in ascending agent order.
pub fn mean_field_sweep(beliefs: &BeliefTable, field: &LocalField) -> Result<BeliefTable> {
    field.validate()?;
    if beliefs.q.len() != field.agent_count() {
        return Err(FlockError::InvalidParams("belief table does not match the field".into()));
    }
    let mut next = beliefs.clone();
    let mut max_change: f64 = 0.0;
    for h in 0..field.agent_count() {
        let f = field.mean_field(h, &next.q);
        let q = match softmin(&f) {
            Some(q) => q,
            None => {
                log::warn!("mean-field update of agent {h} is not finite; using uniform beliefs");
                next.fallback = true;
                vec![1.0 / f.len() as f64; f.len()]
            }
        };
        for (a, b) in q.iter().zip(&next.q[h]) {
            max_change = max_change.max((a - b).abs());
        }
        next.q[h] = q;
    }
    next.sweeps += 1;
    next.max_change = max_change;
    Ok(next)
}

/// Sweeps until the largest per-entry change drops below `tol` or the
/// budget runs out.
pub fn mean_field_converge(initial: BeliefTable, field: &LocalField, tol: f64, max_sweeps: usize) -> Result<BeliefTable> {
    if !(tol > 0.0) {
        return Err(FlockError::InvalidParams("tolerance must be positive".into()));
    }
    let mut b = initial;
    b.converged = false;
    for _ in 0..max_sweeps {
        b = mean_field_sweep(&b, field)?;
        if b.max_change < tol {
            b.converged = true;
            return Ok(b);
        }
    }
    log::warn!("mean field did not converge in {max_sweeps} sweeps (last change {:e})", b.max_change);
    Ok(b)
}

fn entropy(q: &[f64]) -> f64 {
    -q.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// Variational lower bound on `ln Z`: expected log-factor plus entropy.
pub fn free_energy(beliefs: &BeliefTable, field: &LocalField) -> f64 {
    let mut f = 0.0;
    for (u, q) in field.unary.iter().zip(&beliefs.q) {
        f -= u.iter().zip(q).filter(|(_, &p)| p > 0.0).map(|(e, p)| e * p).sum::<f64>();
        f += entropy(q);
    }
    for p in &field.pairs {
        let nb = field.unary[p.b].len();
        for (x, qa) in beliefs.q[p.a].iter().enumerate() {
            if *qa == 0.0 {
                continue;
            }
            for (y, qb) in beliefs.q[p.b].iter().enumerate() {
                if *qb > 0.0 {
                    f -= qa * qb * p.energy[x * nb + y];
                }
            }
        }
    }
    f
}

/// Exact joint distribution over every configuration of a small field.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPosterior {
    pub sizes: Vec<usize>,
    /// Probabilities in row-major order, last agent fastest.
    pub probs: Vec<f64>,
    pub log_z: f64,
}

impl JointPosterior {
    fn config(&self, mut flat: usize) -> Vec<usize> {
        let mut c = vec![0; self.sizes.len()];
        for h in (0..self.sizes.len()).rev() {
            c[h] = flat % self.sizes[h];
            flat /= self.sizes[h];
        }
        c
    }

    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut m: Vec<Vec<f64>> = self.sizes.iter().map(|&n| vec![0.0; n]).collect();
        for (flat, p) in self.probs.iter().enumerate() {
            for (h, c) in self.config(flat).into_iter().enumerate() {
                m[h][c] += p;
            }
        }
        m
    }

    /// `KL(q || p)` of a factorized belief against this posterior.
    pub fn kl_from(&self, beliefs: &BeliefTable) -> f64 {
        let mut kl = 0.0;
        for (flat, p) in self.probs.iter().enumerate() {
            let q: f64 = self.config(flat).iter().enumerate().map(|(h, &c)| beliefs.q[h][c]).product();
            if q > 0.0 {
                kl += q * (q / p).ln();
            }
        }
        kl
    }
}

/// Enumerates every joint configuration and normalizes explicitly.
pub fn exact_posterior(field: &LocalField) -> Result<JointPosterior> {
    field.validate()?;
    let sizes = field.sizes();
    let total: u128 = sizes.iter().map(|&n| n as u128).product();
    if total > EXACT_LIMIT {
        return Err(FlockError::InstanceTooLarge {
            size: total,
            limit: EXACT_LIMIT,
        });
    }
    let mut post = JointPosterior {
        sizes,
        probs: Vec::with_capacity(total as usize),
        log_z: 0.0,
    };
    let energies: Vec<f64> = (0..total as usize).map(|k| field.energy(&post.config(k))).collect();
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - lo)).exp()).collect();
    let s: f64 = w.iter().sum();
    post.log_z = s.ln() - lo;
    post.probs = w.into_iter().map(|x| x / s).collect();
    Ok(post)
}

/// What one group's controllers can see at a tick. Robots of other groups
/// appear among `dynamics`.
#[derive(Clone, Copy, Debug)]
pub struct WorldSnapshot<'a> {
    pub robots: &'a [RobotState],
    /// Current reference of each robot.
    pub references: &'a [ReferenceState],
    pub statics: &'a [StaticObstacle],
    pub dynamics: &'a [DynamicObstacle],
    /// Whether each robot saw static obstacles at the previous tick. May be
    /// empty.
    pub dense_memory: &'a [bool],
}

/// The inference problem robot `i` builds from its local view.
#[derive(Clone, Debug)]
pub struct LocalProblem {
    /// Snapshot indices of the agents, `i` first, then its neighbours.
    pub agents: Vec<usize>,
    pub zone: Zone,
    /// Whether `i` perceives static obstacles right now.
    pub sees_statics: bool,
    pub heuristics: Vec<HeuristicSolution>,
    pub candidates: Vec<CandidateSet>,
    pub field: LocalField,
}

fn static_energy(
    x: &RobotState,
    o: &StaticObstacle,
    params: &ParamBundle,
) -> f64 {
    let bound = obstacle_energy_bound(&params.potential);
    if o.signed_distance(&x.p) < 0.0 {
        return bound;
    }
    let beta = BetaAgent::fixed(o.closest_surface_point(&x.p));
    psi_obstacle(x, &beta, &params.potential, &params.heuristic).map_or(bound, |e| e.total())
}

/// Builds robot `i`'s local field: candidate sets for `i` and each of its
/// neighbours, biased by their heuristics, with energies evaluated at the
/// predicted states.
pub fn build_local_problem(i: usize, snap: &WorldSnapshot<'_>, params: &ParamBundle, method: Method) -> Result<LocalProblem> {
    let grid = DirectionGrid::for_params(&params.controller);
    build_local_problem_on(&grid, i, snap, params, method)
}

pub fn build_local_problem_on(
    grid: &DirectionGrid,
    i: usize,
    snap: &WorldSnapshot<'_>,
    params: &ParamBundle,
    method: Method,
) -> Result<LocalProblem> {
    let pp = &params.potential;
    let dp = &params.dynamics;
    let me = snap.robots.get(i).ok_or(FlockError::UnknownRobot(i))?;
    if snap.references.len() != snap.robots.len() {
        return Err(FlockError::InvalidParams("one reference per robot is required".into()));
    }
    for x in snap.robots {
        if !x.is_finite() {
            return Err(FlockError::StateCorruption(format!("non-finite robot state {x:?}")));
        }
    }
    let mut agents = vec![i];
    agents.extend((0..snap.robots.len()).filter(|&j| j != i && (snap.robots[j].p - me.p).norm() <= pp.r_s));

    let my_statics = perceive_statics(&me.p, snap.statics, pp.r_s);
    let my_dynamics = perceive_dynamics(&me.p, snap.dynamics, pp.r_s);
    let sees_statics = !my_statics.is_empty();
    let zone = if sees_statics || snap.dense_memory.get(i).copied().unwrap_or(false) {
        Zone::Dense
    } else {
        Zone::Open
    };
    let r_f = pp.effective_rf(zone);

    let mut heuristics = Vec::with_capacity(agents.len());
    let mut candidates = Vec::with_capacity(agents.len());
    let mut unary = Vec::with_capacity(agents.len());
    let cparams = method.effective(&params.controller);
    let h_ref: Vec<ReferenceState> = agents.iter().map(|&h| snap.references[h].advanced(dp.horizon)).collect();

    for (slot, &h) in agents.iter().enumerate() {
        let x_h = &snap.robots[h];
        let mates: Vec<RobotState> = agents
            .iter()
            .filter(|&&j| j != h && (snap.robots[j].p - x_h.p).norm() <= pp.r_s)
            .map(|&j| snap.robots[j])
            .collect();
        // obstacles i knows about that h also perceives
        let statics: Vec<usize> = my_statics
            .iter()
            .filter(|(k, _)| (snap.statics[*k].closest_surface_point(&x_h.p) - x_h.p).norm() <= pp.r_s)
            .map(|(k, _)| *k)
            .collect();
        let dynamics: Vec<usize> = my_dynamics
            .iter()
            .filter(|(k, _)| (snap.dynamics[*k].p - x_h.p).norm() <= pp.r_s + snap.dynamics[*k].radius)
            .map(|(k, _)| *k)
            .collect();
        let now: Vec<BetaAgent> = statics
            .iter()
            .map(|&k| BetaAgent::fixed(snap.statics[k].closest_surface_point(&x_h.p)))
            .chain(dynamics.iter().map(|&k| snap.dynamics[k].beta()))
            .collect();
        let sol = heuristic_full(x_h, &mates, &now, &snap.references[h], pp, &params.heuristic, zone);
        let cs = build_candidate_set_on(grid, x_h, &sol.u_g, &cparams, dp)?;

        let future: Vec<BetaAgent> = dynamics
            .iter()
            .map(|&k| {
                let d = &snap.dynamics[k];
                let mut b = d.beta();
                b.p += d.v * dp.horizon;
                b
            })
            .collect();
        let bound = obstacle_energy_bound(pp);
        let u: Vec<f64> = cs
            .predicted
            .iter()
            .map(|xp| {
                let mut e = 0.0;
                for &k in &statics {
                    e += static_energy(xp, &snap.statics[k], params);
                }
                for b in &future {
                    e += psi_obstacle(xp, b, pp, &params.heuristic).map_or(bound, |o| o.total());
                }
                let (rp, rv) = psi_goal(xp, &h_ref[slot], pp);
                e + rp + rv
            })
            .collect();
        heuristics.push(sol);
        candidates.push(cs);
        unary.push(u);
    }

    let mut pairs = Vec::new();
    for a in 0..agents.len() {
        for b in a + 1..agents.len() {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            let mut energy = Vec::with_capacity(ca.len() * cb.len());
            for xa in &ca.predicted {
                for xb in &cb.predicted {
                    energy.push(psi_ar_at((xa.p - xb.p).norm(), r_f, pp.k_a, pp.k_t));
                }
            }
            pairs.push(PairTerm { a, b, energy });
        }
    }

    Ok(LocalProblem {
        agents,
        zone,
        sees_statics,
        heuristics,
        candidates,
        field: LocalField { unary, pairs },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlDiagnostics {
    pub sweeps: usize,
    pub converged: bool,
    pub fallback: bool,
    /// Candidate count of every agent in the local set, `i` first.
    pub candidate_counts: Vec<usize>,
    pub wall_time: Duration,
    pub zone: Zone,
    pub sees_statics: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlDecision {
    pub u: Vec3,
    /// Predicted state the chosen input leads to after one horizon.
    pub predicted: RobotState,
    /// Posterior mass of the chosen candidate.
    pub mass: f64,
    pub u_g: Vec3,
    /// Final belief of robot `i` over its candidates (empty for the
    /// gradient-only law).
    pub belief: Vec<f64>,
    pub diagnostics: ControlDiagnostics,
}

/// Control input of robot `i` for this tick.
pub fn compute_control(i: usize, snap: &WorldSnapshot<'_>, params: &ParamBundle, method: Method) -> Result<ControlDecision> {
    let grid = DirectionGrid::for_params(&params.controller);
    compute_control_on(&grid, i, snap, params, method)
}

/// As [`compute_control`], reusing a precomputed direction grid.
pub fn compute_control_on(
    grid: &DirectionGrid,
    i: usize,
    snap: &WorldSnapshot<'_>,
    params: &ParamBundle,
    method: Method,
) -> Result<ControlDecision> {
    let start = Instant::now();
    let prob = build_local_problem_on(grid, i, snap, params, method)?;
    let dp = &params.dynamics;
    let x = &snap.robots[i];
    let u_g = prob.heuristics[0].u_g;
    let counts = prob.candidates.iter().map(CandidateSet::len).collect();

    if method == Method::GradientOnly {
        let u = saturate(u_g, dp.u_max);
        let predicted = predict(x, u, dp.horizon, dp)?;
        return Ok(ControlDecision {
            u,
            predicted,
            mass: 1.0,
            u_g,
            belief: Vec::new(),
            diagnostics: ControlDiagnostics {
                sweeps: 0,
                converged: true,
                fallback: false,
                candidate_counts: counts,
                wall_time: start.elapsed(),
                zone: prob.zone,
                sees_statics: prob.sees_statics,
            },
        });
    }

    let c = &params.controller;
    let beliefs = mean_field_converge(
        BeliefTable::uniform(&prob.field.sizes()),
        &prob.field,
        c.mf_tol,
        c.mf_max_sweeps,
    )?;
    let k = beliefs.argmax(0);
    let cs = &prob.candidates[0];
    let wall_time = start.elapsed();
    Ok(ControlDecision {
        u: cs.inputs[k],
        predicted: cs.predicted[k],
        mass: beliefs.q[0][k],
        u_g,
        belief: beliefs.q[0].clone(),
        diagnostics: ControlDiagnostics {
            sweeps: beliefs.sweeps,
            converged: beliefs.converged,
            fallback: beliefs.fallback,
            candidate_counts: counts,
            wall_time,
            zone: prob.zone,
            sees_statics: prob.sees_statics,
        },
    })
}
