//! Per-tick trajectory record and its CSV form.
//!
//! Columns: `t,robot,group,px,py,pz,vx,vy,vz,ux,uy,uz,tcal_s`, one row per
//! robot per tick, ticks in order and robots in ascending order within a
//! tick. Floats are written in shortest round-trip form, so a record read
//! back from disk is bit-identical to the one written.

use std::io::{Read, Write};

use crate::error::{FlockError, Result};
use crate::model::{RobotState, Vec3};

pub const CSV_HEADER: [&str; 13] = [
    "t", "robot", "group", "px", "py", "pz", "vx", "vy", "vz", "ux", "uy", "uz", "tcal_s",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub robot: usize,
    pub group: usize,
    pub p: Vec3,
    pub v: Vec3,
    /// Input applied from this tick on.
    pub u: Vec3,
    /// Wall time of the control computation (s).
    pub tcal_s: f64,
}

impl TrajectoryRow {
    pub fn state(&self) -> RobotState {
        RobotState::new(self.p, self.v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub dt: f64,
    pub robot_count: usize,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecord {
    pub fn new(dt: f64, robot_count: usize) -> Self {
        Self {
            dt,
            robot_count,
            rows: Vec::new(),
        }
    }

    pub fn ticks(&self) -> usize {
        self.rows.len().checked_div(self.robot_count).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn tick(&self, k: usize) -> &[TrajectoryRow] {
        &self.rows[k * self.robot_count..(k + 1) * self.robot_count]
    }

    pub fn tick_iter(&self) -> impl Iterator<Item = &[TrajectoryRow]> {
        self.rows.chunks(self.robot_count.max(1))
    }

    /// Group index of every robot.
    pub fn groups(&self) -> Vec<usize> {
        self.rows.iter().take(self.robot_count).map(|r| r.group).collect()
    }

    /// Copy with the wall-time column zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.tcal_s = 0.0;
        }
        r
    }

    /// Checks tick spacing, robot ordering and group consistency.
    pub fn validate(&self) -> Result<()> {
        if self.robot_count == 0 || self.rows.is_empty() {
            return Err(FlockError::EmptyRecord("trajectory has no rows"));
        }
        if !self.rows.len().is_multiple_of(self.robot_count) {
            return Err(FlockError::StateCorruption(format!(
                "{} rows do not split into ticks of {} robots",
                self.rows.len(),
                self.robot_count
            )));
        }
        let groups = self.groups();
        for (k, tick) in self.tick_iter().enumerate() {
            let t = k as f64 * self.dt;
            for (i, row) in tick.iter().enumerate() {
                if row.robot != i || row.group != groups[i] || row.t != t {
                    return Err(FlockError::StateCorruption(format!(
                        "row for tick {k}, robot {i} is out of place (t={}, robot={}, group={})",
                        row.t, row.robot, row.group
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W, strip_timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| FlockError::Io(std::io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            let tcal = if strip_timing { 0.0 } else { r.tcal_s };
            let f = [
                r.t, r.p.x, r.p.y, r.p.z, r.v.x, r.v.y, r.v.z, r.u.x, r.u.y, r.u.z, tcal,
            ];
            let mut fields = Vec::with_capacity(13);
            fields.push(f[0].to_string());
            fields.push(r.robot.to_string());
            fields.push(r.group.to_string());
            fields.extend(f[1..].iter().map(f64::to_string));
            w.write_record(&fields).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, strip_timing: bool) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, strip_timing)?;
        Ok(String::from_utf8(buf).expect("csv output is ascii"))
    }

    /// Parses a trajectory CSV. The time step is taken from the second
    /// tick; single-tick files fall back to `dt_hint`. A file that does not
    /// end in a newline is taken as truncated.
    pub fn read_csv<R: Read>(mut input: R, source_name: &str, dt_hint: f64) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        if !text.ends_with('\n') {
            return Err(FlockError::parse(source_name, "truncated file: missing final newline"));
        }
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let err = |line: Option<u64>, msg: String| match line {
            Some(l) => FlockError::parse(source_name, format!("line {l}: {msg}")),
            None => FlockError::parse(source_name, msg),
        };
        let header = rd.headers().map_err(|e| err(None, e.to_string()))?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(err(Some(1), format!("expected header `{}`", CSV_HEADER.join(","))));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| err(e.position().map(|p| p.line()), e.to_string()))?;
            let line = rec.position().map(|p| p.line());
            if rec.len() != CSV_HEADER.len() {
                return Err(err(line, format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len())));
            }
            let num = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| err(line, format!("column `{}`: `{}` is not a number", CSV_HEADER[k], &rec[k])))
            };
            let idx = |k: usize| -> Result<usize> {
                rec[k]
                    .parse::<usize>()
                    .map_err(|_| err(line, format!("column `{}`: `{}` is not an index", CSV_HEADER[k], &rec[k])))
            };
            rows.push(TrajectoryRow {
                t: num(0)?,
                robot: idx(1)?,
                group: idx(2)?,
                p: Vec3::new(num(3)?, num(4)?, num(5)?),
                v: Vec3::new(num(6)?, num(7)?, num(8)?),
                u: Vec3::new(num(9)?, num(10)?, num(11)?),
                tcal_s: num(12)?,
            });
        }
        if rows.is_empty() {
            return Err(FlockError::EmptyRecord("trajectory has no rows"));
        }
        let robot_count = rows.iter().take_while(|r| r.t == rows[0].t).count();
        let dt = rows.get(robot_count).map_or(dt_hint, |r| r.t);
        let rec = Self { dt, robot_count, rows };
        rec.validate().map_err(|e| err(None, e.to_string()))?;
        Ok(rec)
    }
}
