//! Run logs as CSV. Floats are written with Rust's shortest round-trip
//! formatting, so parsing a written log gives back the same values.

use super::ScenarioError;
use crate::autonomy::{EventKind, MasterState};
use crate::estimator::MeasurementKind;
use std::fmt::Write as _;

pub const RUNLOG_SCHEMA: &str = "# sortie-runlog v1";
pub const FSM_SCHEMA: &str = "# sortie-fsm v1";
pub const NIS_SCHEMA: &str = "# sortie-nis v1";

const RUNLOG_HEADER: &str = "time,true_x,true_y,true_z,true_vx,true_vy,true_vz,true_qw,true_qx,true_qy,true_qz,\
est_x,est_y,est_z,est_vx,est_vy,est_vz,est_qw,est_qx,est_qy,est_qz,state,voltage,charge,f1,f2,f3,f4,events";
const FSM_HEADER: &str = "time,state,event,new_state";
const NIS_HEADER: &str = "time,kind,nis,dof,accepted";

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub time: f64,
    pub true_position: [f64; 3],
    pub true_velocity: [f64; 3],
    /// Scalar-first.
    pub true_attitude: [f64; 4],
    pub est_position: [f64; 3],
    pub est_velocity: [f64; 3],
    pub est_attitude: [f64; 4],
    pub state: MasterState,
    pub voltage: f64,
    pub charge: f64,
    /// Per-motor thrust commands, N.
    pub motor_cmd: [f64; 4],
    /// Events handled by the master since the previous row.
    pub events: Vec<EventKind>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsmRow {
    pub time: f64,
    pub state: MasterState,
    pub event: EventKind,
    pub new_state: MasterState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NisRow {
    pub time: f64,
    pub kind: MeasurementKind,
    pub nis: f64,
    pub dof: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
    pub fsm: Vec<FsmRow>,
    pub nis: Vec<NisRow>,
}

fn join(out: &mut String, xs: &[f64]) {
    for x in xs {
        let _ = write!(out, "{x},");
    }
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::LogParse { file: file.to_string(), line, message: message.into() }
}

/// Data lines after the schema and header lines, with their 1-based numbers.
fn data_lines<'a>(text: &'a str, file: &str, schema: &str, header: &str) -> Result<Vec<(usize, &'a str)>, ScenarioError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == schema => {}
        _ => return Err(parse_err(file, 1, format!("expected `{schema}`"))),
    }
    match lines.next() {
        Some((_, l)) if l == header => {}
        _ => return Err(parse_err(file, 2, "unexpected header")),
    }
    Ok(lines.filter(|(_, l)| !l.is_empty()).map(|(i, l)| (i + 1, l)).collect())
}

fn num<T: std::str::FromStr>(s: &str, file: &str, line: usize) -> Result<T, ScenarioError> {
    s.parse().map_err(|_| parse_err(file, line, format!("bad number `{s}`")))
}

impl RunLog {
    pub fn runlog_csv(&self) -> String {
        let mut out = format!("{RUNLOG_SCHEMA}\n{RUNLOG_HEADER}\n");
        for r in &self.rows {
            join(&mut out, &[r.time]);
            join(&mut out, &r.true_position);
            join(&mut out, &r.true_velocity);
            join(&mut out, &r.true_attitude);
            join(&mut out, &r.est_position);
            join(&mut out, &r.est_velocity);
            join(&mut out, &r.est_attitude);
            let _ = write!(out, "{},", r.state);
            join(&mut out, &[r.voltage, r.charge]);
            join(&mut out, &r.motor_cmd);
            let ev: Vec<&str> = r.events.iter().map(|e| e.name()).collect();
            out.push_str(&ev.join(";"));
            out.push('\n');
        }
        out
    }

    pub fn fsm_csv(&self) -> String {
        let mut out = format!("{FSM_SCHEMA}\n{FSM_HEADER}\n");
        for r in &self.fsm {
            let _ = writeln!(out, "{},{},{},{}", r.time, r.state, r.event, r.new_state);
        }
        out
    }

    pub fn nis_csv(&self) -> String {
        let mut out = format!("{NIS_SCHEMA}\n{NIS_HEADER}\n");
        for r in &self.nis {
            let _ = writeln!(out, "{},{},{},{},{}", r.time, r.kind.name(), r.nis, r.dof, u8::from(r.accepted));
        }
        out
    }

    pub fn parse_runlog(text: &str) -> Result<Vec<LogRow>, ScenarioError> {
        const F: &str = "runlog";
        let mut rows = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for (ln, line) in data_lines(text, F, RUNLOG_SCHEMA, RUNLOG_HEADER)? {
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 29 {
                return Err(parse_err(F, ln, format!("expected 29 fields, got {}", c.len())));
            }
            let f = |i: usize| num::<f64>(c[i], F, ln);
            let arr3 = |i: usize| -> Result<[f64; 3], ScenarioError> { Ok([f(i)?, f(i + 1)?, f(i + 2)?]) };
            let arr4 = |i: usize| -> Result<[f64; 4], ScenarioError> { Ok([f(i)?, f(i + 1)?, f(i + 2)?, f(i + 3)?]) };
            let time = f(0)?;
            if time <= last {
                return Err(parse_err(F, ln, "time not strictly increasing"));
            }
            last = time;
            let events = if c[28].is_empty() {
                Vec::new()
            } else {
                c[28]
                    .split(';')
                    .map(|e| e.parse::<EventKind>().map_err(|err| parse_err(F, ln, err.to_string())))
                    .collect::<Result<_, _>>()?
            };
            rows.push(LogRow {
                time,
                true_position: arr3(1)?,
                true_velocity: arr3(4)?,
                true_attitude: arr4(7)?,
                est_position: arr3(11)?,
                est_velocity: arr3(14)?,
                est_attitude: arr4(17)?,
                state: c[21].parse().map_err(|e: crate::autonomy::AutonomyError| parse_err(F, ln, e.to_string()))?,
                voltage: f(22)?,
                charge: f(23)?,
                motor_cmd: arr4(24)?,
                events,
            });
        }
        Ok(rows)
    }

    pub fn parse_fsm(text: &str) -> Result<Vec<FsmRow>, ScenarioError> {
        const F: &str = "fsm";
        let mut rows = Vec::new();
        for (ln, line) in data_lines(text, F, FSM_SCHEMA, FSM_HEADER)? {
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 4 {
                return Err(parse_err(F, ln, "expected 4 fields"));
            }
            let st = |s: &str| s.parse::<MasterState>().map_err(|e| parse_err(F, ln, e.to_string()));
            rows.push(FsmRow {
                time: num(c[0], F, ln)?,
                state: st(c[1])?,
                event: c[2].parse().map_err(|e: crate::autonomy::AutonomyError| parse_err(F, ln, e.to_string()))?,
                new_state: st(c[3])?,
            });
        }
        Ok(rows)
    }

    pub fn parse_nis(text: &str) -> Result<Vec<NisRow>, ScenarioError> {
        const F: &str = "nis";
        let mut rows = Vec::new();
        for (ln, line) in data_lines(text, F, NIS_SCHEMA, NIS_HEADER)? {
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 5 {
                return Err(parse_err(F, ln, "expected 5 fields"));
            }
            rows.push(NisRow {
                time: num(c[0], F, ln)?,
                kind: MeasurementKind::from_name(c[1]).ok_or_else(|| parse_err(F, ln, format!("unknown kind `{}`", c[1])))?,
                nis: num(c[2], F, ln)?,
                dof: num(c[3], F, ln)?,
                accepted: num::<u8>(c[4], F, ln)? != 0,
            });
        }
        Ok(rows)
    }

    /// Inverse of the three writers.
    pub fn parse(runlog: &str, fsm: &str, nis: &str) -> Result<Self, ScenarioError> {
        Ok(Self { rows: Self::parse_runlog(runlog)?, fsm: Self::parse_fsm(fsm)?, nis: Self::parse_nis(nis)? })
    }

    /// Master states in the order they were entered.
    pub fn state_sequence(&self) -> Vec<MasterState> {
        self.fsm.iter().filter(|r| r.state != r.new_state).map(|r| r.new_state).collect()
    }
}
