//! Evaluation metrics and safety bookkeeping, computed from a trajectory
//! record and the scenario that produced it.

use std::collections::BTreeMap;

use serde::Serialize;

use super::record::{TrajectoryRecord, TrajectoryRow};
use super::scenario::Scenario;
use crate::environment::StaticObstacle;
use crate::error::{FlockError, Result};
use crate::model::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Two robots of the same group closer than `2 r_c`.
    Neighbor { other: usize },
    /// A robot within `r_c` of a static obstacle surface (or inside it).
    Static { obstacle: usize },
    /// A robot of another group closer than `r_c + r_beta`.
    OtherRobot { other: usize },
    /// A scripted moving obstacle closer than `r_c + radius`.
    Dynamic { obstacle: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub robot: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
    pub distance: f64,
    pub bound: f64,
}

/// Safety constraint failures in one tick's states. Robot pairs are
/// reported once, from the lower index.
pub fn safety_violations(scenario: &Scenario, tick: &[TrajectoryRow]) -> Vec<Violation> {
    let mut out = Vec::new();
    let dyns = scenario.dynamics_at(tick.first().map_or(0.0, |r| r.t));
    for (i, a) in tick.iter().enumerate() {
        let r_c = scenario.groups[a.group].params.potential.r_c;
        let mut flag = |kind, distance: f64, bound: f64| {
            if distance <= bound {
                out.push(Violation {
                    t: a.t,
                    robot: i,
                    kind,
                    distance,
                    bound,
                });
            }
        };
        for (j, b) in tick.iter().enumerate().skip(i + 1) {
            let d = (a.p - b.p).norm();
            if a.group == b.group {
                flag(ViolationKind::Neighbor { other: j }, d, 2.0 * r_c);
            } else {
                flag(ViolationKind::OtherRobot { other: j }, d, r_c + scenario.r_beta);
            }
        }
        for (k, o) in scenario.statics.iter().enumerate() {
            flag(ViolationKind::Static { obstacle: k }, o.signed_distance(&a.p), r_c);
        }
        for (k, o) in dyns.iter().enumerate() {
            flag(ViolationKind::Dynamic { obstacle: k }, (a.p - o.p).norm(), r_c + o.radius);
        }
    }
    out
}

/// Aggregate metrics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub robots: usize,
    pub ticks: usize,
    /// Mean control computation time per robot per tick (s).
    pub t_cal_avg: f64,
    /// Mean distance of the robots to their reference, per tick (m).
    pub r_dev: Vec<f64>,
    pub r_dev_avg: f64,
    /// Mean input magnitude (m/s^2).
    pub u_avg: f64,
    /// Path length per robot (m).
    pub path_length: Vec<f64>,
    /// Smallest distance of each robot to a neighbour or a perceived
    /// obstacle; absent if it never perceived anything.
    pub r_min: Vec<Option<f64>>,
    /// Smallest distance between two robots of the same group.
    pub r_neighbor_min: Option<f64>,
    pub r_static_min: Option<f64>,
    pub r_dynamic_min: Option<f64>,
    pub violations: usize,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    robots: usize,
    ticks: usize,
    t_cal_avg: f64,
    r_dev_avg: f64,
    u_avg: f64,
    violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_neighbor_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_static_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_dynamic_min: Option<f64>,
    path_length: &'a [f64],
    r_dev: &'a [f64],
    r_min: BTreeMap<String, f64>,
}

impl MetricsReport {
    /// Key-value text form (TOML).
    pub fn to_text(&self) -> String {
        let file = ReportFile {
            robots: self.robots,
            ticks: self.ticks,
            t_cal_avg: self.t_cal_avg,
            r_dev_avg: self.r_dev_avg,
            u_avg: self.u_avg,
            violations: self.violations,
            r_neighbor_min: self.r_neighbor_min,
            r_static_min: self.r_static_min,
            r_dynamic_min: self.r_dynamic_min,
            path_length: &self.path_length,
            r_dev: &self.r_dev,
            r_min: self
                .r_min
                .iter()
                .enumerate()
                .filter_map(|(i, d)| d.map(|d| (format!("robot_{i:03}"), d)))
                .collect(),
        };
        toml::to_string(&file).expect("metrics serialize")
    }
}

fn non_empty(record: &TrajectoryRecord) -> Result<()> {
    if record.is_empty() || record.robot_count == 0 {
        Err(FlockError::EmptyRecord("no trajectory rows"))
    } else {
        Ok(())
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Mean control time over every robot and tick.
pub fn metric_t_cal(record: &TrajectoryRecord) -> Result<f64> {
    non_empty(record)?;
    Ok(mean(record.rows.iter().map(|r| r.tcal_s)))
}

/// Per-tick mean distance to the group reference, and its average.
pub fn metric_r_dev(record: &TrajectoryRecord, scenario: &Scenario) -> Result<(Vec<f64>, f64)> {
    non_empty(record)?;
    let series: Vec<f64> = record
        .tick_iter()
        .map(|tick| {
            mean(tick.iter().map(|r| {
                let p_r = scenario.groups[r.group].reference.at(r.t).p;
                (r.p - p_r).norm()
            }))
        })
        .collect();
    let avg = mean(series.iter().copied());
    Ok((series, avg))
}

pub fn metric_u_avg(record: &TrajectoryRecord) -> Result<f64> {
    non_empty(record)?;
    Ok(mean(record.rows.iter().map(|r| r.u.norm())))
}

/// Polyline length of every robot's path.
pub fn metric_path_length(record: &TrajectoryRecord) -> Result<Vec<f64>> {
    non_empty(record)?;
    let mut len = vec![0.0; record.robot_count];
    for k in 1..record.ticks() {
        for (a, b) in record.tick(k - 1).iter().zip(record.tick(k)) {
            len[a.robot] += (b.p - a.p).norm();
        }
    }
    Ok(len)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMetrics {
    pub r_min: Vec<Option<f64>>,
    pub r_neighbor_min: Option<f64>,
    pub r_static_min: Option<f64>,
    pub r_dynamic_min: Option<f64>,
}

fn keep_min(slot: &mut Option<f64>, d: f64) {
    *slot = Some(slot.map_or(d, |m: f64| m.min(d)));
}

/// Minimum distances over the run. Robot-to-robot distances within a group
/// count for `r_min` when within sensing range; static distances are to
/// the perceived surface point; dynamic distances are centre-to-centre to
/// perceived robots of other groups and scripted obstacles.
pub fn metric_distances(record: &TrajectoryRecord, scenario: &Scenario) -> Result<DistanceMetrics> {
    non_empty(record)?;
    let mut out = DistanceMetrics {
        r_min: vec![None; record.robot_count],
        r_neighbor_min: None,
        r_static_min: None,
        r_dynamic_min: None,
    };
    for tick in record.tick_iter() {
        let dyns = scenario.dynamics_at(tick[0].t);
        for (i, a) in tick.iter().enumerate() {
            let r_s = scenario.groups[a.group].params.potential.r_s;
            for (j, b) in tick.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = (a.p - b.p).norm();
                if a.group == b.group {
                    if j > i {
                        keep_min(&mut out.r_neighbor_min, d);
                    }
                    if d <= r_s {
                        keep_min(&mut out.r_min[i], d);
                    }
                } else if d <= r_s + scenario.r_beta {
                    keep_min(&mut out.r_min[i], d);
                    keep_min(&mut out.r_dynamic_min, d);
                }
            }
            for o in &scenario.statics {
                let d = static_distance(o, &a.p);
                if d <= r_s {
                    keep_min(&mut out.r_min[i], d);
                    keep_min(&mut out.r_static_min, d);
                }
            }
            for o in &dyns {
                let d = (a.p - o.p).norm();
                if d <= r_s + o.radius {
                    keep_min(&mut out.r_min[i], d);
                    keep_min(&mut out.r_dynamic_min, d);
                }
            }
        }
    }
    Ok(out)
}

fn static_distance(o: &StaticObstacle, p: &Vec3) -> f64 {
    (o.closest_surface_point(p) - p).norm()
}

pub fn compute_metrics(record: &TrajectoryRecord, scenario: &Scenario) -> Result<MetricsReport> {
    record.validate()?;
    if record.robot_count != scenario.robot_count() {
        return Err(FlockError::InvalidParams(format!(
            "record has {} robots, scenario has {}",
            record.robot_count,
            scenario.robot_count()
        )));
    }
    let (r_dev, r_dev_avg) = metric_r_dev(record, scenario)?;
    let dist = metric_distances(record, scenario)?;
    Ok(MetricsReport {
        robots: record.robot_count,
        ticks: record.ticks(),
        t_cal_avg: metric_t_cal(record)?,
        r_dev,
        r_dev_avg,
        u_avg: metric_u_avg(record)?,
        path_length: metric_path_length(record)?,
        r_min: dist.r_min,
        r_neighbor_min: dist.r_neighbor_min,
        r_static_min: dist.r_static_min,
        r_dynamic_min: dist.r_dynamic_min,
        violations: record.tick_iter().map(|t| safety_violations(scenario, t).len()).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{open_scenario, ReferenceTrajectory};
    use approx::assert_relative_eq;

    fn row(t: f64, robot: usize, group: usize, p: Vec3, u: Vec3, tcal: f64) -> TrajectoryRow {
        TrajectoryRow {
            t,
            robot,
            group,
            p,
            v: Vec3::zeros(),
            u,
            tcal_s: tcal,
        }
    }

    fn fixed_scenario(n: usize) -> Scenario {
        let mut s = open_scenario();
        s.groups[0].robots.truncate(n);
        s.groups[0].reference = ReferenceTrajectory::Linear {
            p0: Vec3::zeros(),
            v: Vec3::zeros(),
        };
        s
    }

    #[test]
    fn empty_record_is_an_error() {
        let r = TrajectoryRecord::new(0.05, 1);
        assert!(metric_t_cal(&r).is_err());
        assert!(metric_u_avg(&r).is_err());
    }

    #[test]
    fn hand_built_two_rows() {
        // one robot, two ticks
        let s = fixed_scenario(1);
        let mut r = TrajectoryRecord::new(0.05, 1);
        r.rows.push(row(0.0, 0, 0, Vec3::new(3.0, 4.0, 0.0), Vec3::new(0.1, 0.0, 0.0), 0.001));
        r.rows.push(row(0.05, 0, 0, Vec3::new(3.0, 4.0, 1.0), Vec3::new(0.0, 0.3, 0.4), 0.003));
        let m = compute_metrics(&r, &s).unwrap();
        assert_relative_eq!(m.t_cal_avg, 0.002);
        assert_eq!(m.r_dev, vec![5.0, 26f64.sqrt()]);
        assert_relative_eq!(m.r_dev_avg, (5.0 + 26f64.sqrt()) / 2.0);
        assert_relative_eq!(m.u_avg, 0.3);
        assert_eq!(m.path_length, vec![1.0]);
        assert_eq!(m.r_min, vec![None]);
        assert_eq!((m.r_static_min, m.r_dynamic_min, m.r_neighbor_min), (None, None, None));
        assert_eq!(m.violations, 0);
    }

    #[test]
    fn deviation_is_a_mean_of_distances() {
        let s = fixed_scenario(2);
        let mut r = TrajectoryRecord::new(0.05, 2);
        r.rows.push(row(0.0, 0, 0, Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), 0.0));
        r.rows.push(row(0.0, 1, 0, Vec3::new(0.0, -3.0, 0.0), Vec3::zeros(), 0.0));
        assert_eq!(metric_r_dev(&r, &s).unwrap().1, 2.0);
        let d = metric_distances(&r, &s).unwrap();
        assert_eq!(d.r_neighbor_min, Some(10f64.sqrt()));
        // too far apart to be neighbours
        assert_eq!(d.r_min, vec![None, None]);
    }

    #[test]
    fn straight_line_length() {
        let mut r = TrajectoryRecord::new(0.05, 1);
        for k in 0..=200 {
            let t = k as f64 * 0.05;
            r.rows.push(row(t, 0, 0, Vec3::new(0.1 * t, 0.0, 0.0), Vec3::zeros(), 0.0));
        }
        assert_relative_eq!(metric_path_length(&r).unwrap()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn close_pair_is_a_violation() {
        let s = fixed_scenario(2);
        let mut r = TrajectoryRecord::new(0.05, 2);
        r.rows.push(row(0.0, 0, 0, Vec3::zeros(), Vec3::zeros(), 0.0));
        r.rows.push(row(0.0, 1, 0, Vec3::new(0.3, 0.0, 0.0), Vec3::zeros(), 0.0));
        r.rows.push(row(0.05, 0, 0, Vec3::zeros(), Vec3::zeros(), 0.0));
        r.rows.push(row(0.05, 1, 0, Vec3::new(0.2, 0.0, 0.0), Vec3::zeros(), 0.0));
        let m = compute_metrics(&r, &s).unwrap();
        assert_eq!(m.r_min, vec![Some(0.2), Some(0.2)]);
        assert_eq!(m.violations, 1);
        let v = safety_violations(&s, r.tick(1));
        assert_eq!(v[0].kind, ViolationKind::Neighbor { other: 1 });
        assert!(safety_violations(&s, r.tick(0)).is_empty());
    }

    #[test]
    fn report_text_omits_absent_minima() {
        let s = fixed_scenario(1);
        let mut r = TrajectoryRecord::new(0.05, 1);
        r.rows.push(row(0.0, 0, 0, Vec3::zeros(), Vec3::zeros(), 0.0));
        let text = compute_metrics(&r, &s).unwrap().to_text();
        assert!(text.contains("r_dev_avg = 0.0"));
        assert!(!text.contains("r_static_min"));
    }
}
