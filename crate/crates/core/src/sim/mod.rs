//! Lockstep multi-group simulation.
//!
//! Every tick, all robots compute their input from the same snapshot; the
//! inputs are then applied together. Robots of other groups are seen as
//! dynamic obstacles of radius `r_beta`.

pub mod metrics;
pub mod record;
pub mod scenario;

use rayon::prelude::*;
use serde::Serialize;

pub use metrics::{compute_metrics, safety_violations, MetricsReport, Violation, ViolationKind};
pub use record::{TrajectoryRecord, TrajectoryRow, CSV_HEADER};
pub use scenario::{build_doorway_scenario, builtin_scenario, DoorwayConfig, Group, ReferenceTrajectory, Scenario};

use crate::controller::{compute_control_on, ControlDecision, DirectionGrid, Method, WorldSnapshot};
use crate::environment::DynamicObstacle;
use crate::error::{FlockError, Result};
use crate::model::{step_dynamics, RobotState};
use crate::potentials::ReferenceState;

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub method: Method,
    pub seed: u64,
    /// Worker threads for the per-tick fan-out; `None` uses the global pool.
    pub threads: Option<usize>,
    pub trace_beliefs: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            method: Method::Heuristic,
            seed: 0,
            threads: None,
            trace_beliefs: false,
        }
    }
}

/// One line of the optional belief trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeliefTrace {
    pub t: f64,
    pub robot: usize,
    pub chosen: usize,
    pub mass: f64,
    pub u: [f64; 3],
    pub sweeps: usize,
    pub belief: Vec<f64>,
}

/// Controller bookkeeping accumulated over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlStats {
    pub decisions: u64,
    /// Sum of the deciding robot's own candidate count.
    pub candidates: u64,
    pub sweeps: u64,
    pub unconverged: u64,
    pub fallbacks: u64,
}

impl ControlStats {
    pub fn mean_candidates(&self) -> f64 {
        self.candidates as f64 / self.decisions.max(1) as f64
    }

    fn add(&mut self, d: &ControlDecision) {
        self.decisions += 1;
        self.candidates += d.diagnostics.candidate_counts.first().copied().unwrap_or(0) as u64;
        self.sweeps += d.diagnostics.sweeps as u64;
        self.unconverged += u64::from(!d.diagnostics.converged);
        self.fallbacks += u64::from(d.diagnostics.fallback);
    }
}

/// State of a running scenario.
pub struct World<'s> {
    scenario: &'s Scenario,
    method: Method,
    group_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    grids: Vec<DirectionGrid>,
    states: Vec<RobotState>,
    dense: Vec<bool>,
    tick: usize,
}

/// Everything produced by one tick.
#[derive(Clone, Debug)]
pub struct TickOutcome {
    /// Rows for the state at the start of the tick and the inputs chosen.
    pub rows: Vec<TrajectoryRow>,
    pub decisions: Vec<ControlDecision>,
    /// Constraint failures of the state at the start of the tick.
    pub violations: Vec<Violation>,
}

impl<'s> World<'s> {
    pub fn new(scenario: &'s Scenario, method: Method, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let group_of = scenario.group_of();
        let mut members = vec![Vec::new(); scenario.groups.len()];
        for (i, &g) in group_of.iter().enumerate() {
            members[g].push(i);
        }
        let states = scenario.seeded_states(seed)?;
        Ok(Self {
            scenario,
            method,
            grids: scenario.groups.iter().map(|g| DirectionGrid::for_params(&g.params.controller)).collect(),
            dense: vec![false; states.len()],
            states,
            group_of,
            members,
            tick: 0,
        })
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.scenario.dt()
    }

    pub fn states(&self) -> &[RobotState] {
        &self.states
    }

    /// Inputs of every robot for the current snapshot, in robot order.
    pub fn decide(&self) -> Result<Vec<ControlDecision>> {
        let t = self.time();
        let scripted = self.scenario.dynamics_at(t);
        let views: Vec<GroupView> = self
            .members
            .iter()
            .enumerate()
            .map(|(g, idx)| {
                let reference = self.scenario.groups[g].reference.at(t);
                let mut dynamics = scripted.clone();
                dynamics.extend(
                    (0..self.states.len())
                        .filter(|&j| self.group_of[j] != g)
                        .map(|j| DynamicObstacle {
                            p: self.states[j].p,
                            v: self.states[j].v,
                            radius: self.scenario.r_beta,
                        }),
                );
                GroupView {
                    robots: idx.iter().map(|&i| self.states[i]).collect(),
                    references: vec![reference; idx.len()],
                    dynamics,
                    dense: idx.iter().map(|&i| self.dense[i]).collect(),
                }
            })
            .collect();
        let local: Vec<usize> = (0..self.states.len())
            .map(|i| self.members[self.group_of[i]].iter().position(|&j| j == i).expect("member"))
            .collect();
        (0..self.states.len())
            .into_par_iter()
            .map(|i| {
                let g = self.group_of[i];
                let v = &views[g];
                let snap = WorldSnapshot {
                    robots: &v.robots,
                    references: &v.references,
                    statics: &self.scenario.statics,
                    dynamics: &v.dynamics,
                    dense_memory: &v.dense,
                };
                compute_control_on(&self.grids[g], local[i], &snap, &self.scenario.groups[g].params, self.method)
            })
            .collect()
    }

    fn rows(&self, decisions: &[ControlDecision]) -> Vec<TrajectoryRow> {
        let t = self.time();
        self.states
            .iter()
            .zip(decisions)
            .enumerate()
            .map(|(i, (x, d))| TrajectoryRow {
                t,
                robot: i,
                group: self.group_of[i],
                p: x.p,
                v: x.v,
                u: d.u,
                tcal_s: d.diagnostics.wall_time.as_secs_f64(),
            })
            .collect()
    }

    /// Decides and records the current tick without advancing.
    pub fn observe(&self) -> Result<TickOutcome> {
        let decisions = self.decide()?;
        let rows = self.rows(&decisions);
        let violations = safety_violations(self.scenario, &rows);
        Ok(TickOutcome {
            rows,
            decisions,
            violations,
        })
    }

    /// Decides, records, then applies every input over one time step.
    pub fn step_world(&mut self) -> Result<TickOutcome> {
        let out = self.observe()?;
        for (i, d) in out.decisions.iter().enumerate() {
            let params = &self.scenario.groups[self.group_of[i]].params.dynamics;
            self.states[i] = step_dynamics(&self.states[i], d.u, params.dt, params)?;
            self.dense[i] = d.diagnostics.sees_statics;
        }
        self.tick += 1;
        Ok(out)
    }
}

struct GroupView {
    robots: Vec<RobotState>,
    references: Vec<ReferenceState>,
    dynamics: Vec<DynamicObstacle>,
    dense: Vec<bool>,
}

/// Result of a full episode.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: TrajectoryRecord,
    pub violations: Vec<Violation>,
    pub beliefs: Vec<BeliefTrace>,
    pub stats: ControlStats,
    pub metrics: MetricsReport,
}

fn run_inner(scenario: &Scenario, opts: &SimOptions) -> Result<RunOutput> {
    let mut world = World::new(scenario, opts.method, opts.seed)?;
    let steps = scenario.steps();
    let mut record = TrajectoryRecord::new(scenario.dt(), scenario.robot_count());
    let mut violations = Vec::new();
    let mut beliefs = Vec::new();
    let mut stats = ControlStats::default();
    for k in 0..=steps {
        let out = if k < steps { world.step_world()? } else { world.observe()? };
        for v in &out.violations {
            log::warn!("safety violation at t={:.2}: robot {} {:?} at {:.4} m", v.t, v.robot, v.kind, v.distance);
        }
        for (i, d) in out.decisions.iter().enumerate() {
            stats.add(d);
            if opts.trace_beliefs {
                beliefs.push(BeliefTrace {
                    t: out.rows[i].t,
                    robot: i,
                    chosen: d.belief.iter().position(|&q| q == d.mass).unwrap_or(0),
                    mass: d.mass,
                    u: [d.u.x, d.u.y, d.u.z],
                    sweeps: d.diagnostics.sweeps,
                    belief: d.belief.clone(),
                });
            }
        }
        violations.extend(out.violations);
        record.rows.extend(out.rows);
    }
    let metrics = compute_metrics(&record, scenario)?;
    Ok(RunOutput {
        record,
        violations,
        beliefs,
        stats,
        metrics,
    })
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario, opts: &SimOptions) -> Result<RunOutput> {
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| FlockError::InvalidParams(format!("cannot start {n} worker threads: {e}")))?
            .install(|| run_inner(scenario, opts)),
        None => run_inner(scenario, opts),
    }
}
