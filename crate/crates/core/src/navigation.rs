//! Quasi-static time stepping of the robot along a lumen.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::contact::{
    self, equilibrium_contact, ChamberResponse, ContactProblem, ContactState, RobotGeometry,
    TrackSet, TractionResult,
};
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::lumen::LumenModel;
use crate::transmission::{
    drivetrain_forces, robot_speed, GearheadParams, TransmissionForces, WormGearParams,
};

/// Tether drag that grows with the number of elbows entered.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TetherModel {
    #[serde(rename = "drag_per_flexure_N")]
    pub drag_per_flexure_n: f64,
    #[serde(rename = "cap_N", default = "default_tether_cap")]
    pub cap_n: f64,
}

fn default_tether_cap() -> f64 {
    4.0
}

impl TetherModel {
    pub fn drag(&self, elbows_entered: usize) -> f64 {
        (self.drag_per_flexure_n * elbows_entered as f64).min(self.cap_n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt_s: f64,
    pub tether: TetherModel,
    pub gravity: bool,
    pub slip_exponent: f64,
    pub max_steps: usize,
    /// A stall lasting longer than this ends the run.
    pub stall_timeout_s: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.dt_s, "dt_s")?;
        ensure_finite(self.slip_exponent, "slip_exponent")?;
        ensure_finite(self.stall_timeout_s, "stall_timeout_s")?;
        ensure_finite(self.tether.drag_per_flexure_n, "drag_per_flexure_N")?;
        ensure_finite(self.tether.cap_n, "cap_N")?;
        if self.dt_s <= 0.0 {
            return Err(invalid("dt_s", "must be > 0"));
        }
        if self.slip_exponent < 1.0 {
            return Err(invalid("slip_exponent", "must be >= 1"));
        }
        if self.tether.cap_n < 0.0 || self.tether.drag_per_flexure_n < 0.0 {
            return Err(invalid("cap_N", "tether drag and cap must be >= 0"));
        }
        if self.stall_timeout_s < 0.0 {
            return Err(invalid("stall_timeout_s", "must be >= 0"));
        }
        Ok(())
    }
}

/// How the wall friction splits into resistive terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResistanceParams {
    /// Fraction of the normal load dragged by the returning track run.
    pub sliding_share: f64,
    /// Extra drag share of a collapsed wall draped over the body.
    pub drape_share: f64,
}

/// Everything that defines the robot.
#[derive(Clone, Debug)]
pub struct Robot {
    pub worm: WormGearParams,
    pub gear: GearheadParams,
    pub tracks: TrackSet,
    pub geometry: RobotGeometry,
    pub resistance: ResistanceParams,
    pub chamber: Arc<dyn ChamberResponse>,
}

impl Robot {
    pub fn forces(&self) -> Result<TransmissionForces> {
        drivetrain_forces(&self.gear, &self.worm)
    }

    /// Track speed at a motor speed, mm/s (signed).
    pub fn track_speed(&self, motor_speed_radps: f64) -> Result<f64> {
        robot_speed(self.gear.shaft_speed(motor_speed_radps), self.worm.pitch_mm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub motor_speed_radps: f64,
    pub p1_kpa: f64,
    pub p2_kpa: f64,
}

impl Command {
    pub fn new(motor_speed_radps: f64, p1_kpa: f64, p2_kpa: f64) -> Self {
        Command {
            motor_speed_radps,
            p1_kpa,
            p2_kpa,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedCommand {
    pub t_s: f64,
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub s_mm: f64,
    pub v_mmps: f64,
    pub tilt_deg: f64,
    pub pressures_kpa: [f64; 2],
    pub motor_speed_radps: f64,
    pub stalled: bool,
}

impl RobotState {
    pub fn at(s_mm: f64) -> Self {
        RobotState {
            s_mm,
            v_mmps: 0.0,
            tilt_deg: 0.0,
            pressures_kpa: [0.0, 0.0],
            motor_speed_radps: 0.0,
            stalled: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resistance {
    pub sliding_n: f64,
    pub drape_n: f64,
    pub tether_n: f64,
    pub gravity_n: f64,
    pub total_n: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: RobotState,
    pub contact: ContactState,
    pub traction: TractionResult,
    pub resistance: Resistance,
}

fn contact_problem<'a>(
    lumen: &LumenModel,
    s: f64,
    pressures: [f64; 2],
    robot: &'a Robot,
    config: &SimConfig,
) -> Result<ContactProblem<'a>> {
    Ok(ContactProblem {
        pressures_kpa: pressures,
        lumen_radius_mm: lumen.local_radius(s)?,
        wall: lumen.wall_at(s)?,
        tracks: &robot.tracks,
        geometry: &robot.geometry,
        chamber: robot.chamber.as_ref(),
        gravity: config.gravity,
    })
}

/// Resistive force against motion in direction `dir` (+1 forward, -1 backward).
pub fn resistance(
    s: f64,
    dir: f64,
    contact: &ContactState,
    lumen: &LumenModel,
    robot: &Robot,
    config: &SimConfig,
) -> Resistance {
    let normal = contact.total_normal_n();
    let mu = lumen.sliding_friction();
    let sliding = mu * robot.resistance.sliding_share * normal;
    let drape = if lumen.is_collapsed() {
        // The draped wall is pushed aside as the nose opens the lumen, so the
        // drag ramps up over one body length from either end.
        let reach = s.min(lumen.length() - s).max(0.0);
        let ramp = (reach / robot.geometry.body_length_mm).min(1.0);
        mu * robot.resistance.drape_share * normal * ramp
    } else {
        0.0
    };
    let tether = if dir > 0.0 {
        config.tether.drag(lumen.elbows_entered(s))
    } else {
        0.0
    };
    let gravity = if config.gravity {
        robot.geometry.weight_n() * lumen.incline_deg.to_radians().sin() * dir
    } else {
        0.0
    };
    Resistance {
        sliding_n: sliding,
        drape_n: drape,
        tether_n: tether,
        gravity_n: gravity,
        total_n: (sliding + drape + tether + gravity).max(0.0),
    }
}

fn validate_command(cmd: &Command, robot: &Robot) -> Result<()> {
    ensure_finite(cmd.motor_speed_radps, "motor_speed_radps")?;
    ensure_finite(cmd.p1_kpa, "p1_kPa")?;
    ensure_finite(cmd.p2_kpa, "p2_kPa")?;
    if cmd.p1_kpa < 0.0 || cmd.p2_kpa < 0.0 {
        return Err(invalid("p1_kPa", "pressures must be >= 0"));
    }
    if cmd.motor_speed_radps.abs() > robot.gear.max_motor_speed_radps * (1.0 + 1e-12) {
        return Err(invalid(
            "motor_speed_radps",
            "exceeds max_motor_speed_radps",
        ));
    }
    Ok(())
}

/// Advances the robot by one time step under `cmd`.
pub fn step(
    state: &RobotState,
    cmd: &Command,
    lumen: &LumenModel,
    robot: &Robot,
    config: &SimConfig,
) -> Result<StepOutcome> {
    validate_command(cmd, robot)?;
    let length = lumen.length();
    let s = state.s_mm;
    let pressures = [cmd.p1_kpa, cmd.p2_kpa];
    let contact = equilibrium_contact(&contact_problem(lumen, s, pressures, robot, config)?)?;
    let dir = cmd.motor_speed_radps.signum() * (cmd.motor_speed_radps != 0.0) as i32 as f64;
    let res = resistance(s, dir, &contact, lumen, robot, config);
    let traction = contact::traction(&contact, &robot.tracks, &robot.forces()?, res.total_n);
    let v_t = robot.track_speed(cmd.motor_speed_radps)?;
    let (v, stalled) = if dir == 0.0 {
        (0.0, false)
    } else if traction.available_n > res.total_n {
        let ratio = res.total_n / traction.available_n;
        (
            v_t * (1.0 - ratio.powf(config.slip_exponent)).clamp(0.0, 1.0),
            false,
        )
    } else {
        (0.0, true)
    };
    let s_next = (s + v * config.dt_s).clamp(0.0, length);
    let v_real = if s_next == s + v * config.dt_s {
        v
    } else {
        (s_next - s) / config.dt_s
    };
    Ok(StepOutcome {
        state: RobotState {
            s_mm: s_next,
            v_mmps: v_real,
            tilt_deg: contact.tilt_deg,
            pressures_kpa: pressures,
            motor_speed_radps: cmd.motor_speed_radps,
            stalled,
        },
        contact,
        traction,
        resistance: res,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub state: RobotState,
    pub traction: TractionResult,
    pub contact: ContactState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Stalled,
    MaxSteps,
    /// Ended from outside, e.g. a teleoperation session being shut down.
    Stopped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub duration_s: f64,
    pub start_s_mm: f64,
    pub final_s_mm: f64,
    pub distance_mm: f64,
    pub mean_speed_mmps: f64,
    pub completed: bool,
    pub stall_events: usize,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub lumen_length_mm: f64,
    pub rows: Vec<TraceRow>,
    pub summary: TraceSummary,
}

#[derive(Serialize)]
struct CsvRow {
    time_s: f64,
    s_mm: f64,
    v_mmps: f64,
    tilt_deg: f64,
    #[serde(rename = "p1_kPa")]
    p1_kpa: f64,
    #[serde(rename = "p2_kPa")]
    p2_kpa: f64,
    #[serde(rename = "traction_N")]
    traction_n: f64,
    contacts: usize,
}

impl SimTrace {
    /// Summary over the rows. The first row is the initial state.
    pub fn summarize(rows: &[TraceRow], lumen_length_mm: f64) -> TraceSummary {
        let (first, last) = match (rows.first(), rows.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => {
                return TraceSummary {
                    steps: 0,
                    duration_s: 0.0,
                    start_s_mm: 0.0,
                    final_s_mm: 0.0,
                    distance_mm: 0.0,
                    mean_speed_mmps: 0.0,
                    completed: false,
                    stall_events: 0,
                    termination: Termination::MaxSteps,
                }
            }
        };
        let duration = last.time_s - first.time_s;
        let distance = (last.state.s_mm - first.state.s_mm).abs();
        let mut stall_events = 0;
        let mut prev = false;
        for r in rows {
            if r.state.stalled && !prev {
                stall_events += 1;
            }
            prev = r.state.stalled;
        }
        let dir = last.state.motor_speed_radps;
        let completed = (dir > 0.0 && last.state.s_mm >= lumen_length_mm)
            || (dir < 0.0 && last.state.s_mm <= 0.0);
        let termination = if completed {
            Termination::Completed
        } else if last.state.stalled {
            Termination::Stalled
        } else {
            Termination::MaxSteps
        };
        TraceSummary {
            steps: rows.len() - 1,
            duration_s: duration,
            start_s_mm: first.state.s_mm,
            final_s_mm: last.state.s_mm,
            distance_mm: distance,
            mean_speed_mmps: if duration > 0.0 {
                distance / duration
            } else {
                0.0
            },
            completed,
            stall_events,
            termination,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                time_s: r.time_s,
                s_mm: r.state.s_mm,
                v_mmps: r.state.v_mmps,
                tilt_deg: r.state.tilt_deg,
                p1_kpa: r.state.pressures_kpa[0],
                p2_kpa: r.state.pressures_kpa[1],
                traction_n: r.traction.available_n,
                contacts: r.contact.tracks_in_contact,
            })
            .map_err(|e| Error::Scenario(format!("csv export: {e}")))?;
        }
        w.flush()
            .map_err(|e| Error::Scenario(format!("csv export: {e}")))?;
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// Incremental runner shared by batch runs and the live service.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub lumen: LumenModel,
    pub robot: Robot,
    pub config: SimConfig,
    time_s: f64,
    steps: usize,
    state: RobotState,
    rows: Vec<TraceRow>,
    stalled_since: Option<f64>,
}

impl Simulation {
    pub fn new(
        lumen: LumenModel,
        robot: Robot,
        config: SimConfig,
        start_s_mm: f64,
    ) -> Result<Self> {
        lumen.validate()?;
        config.validate()?;
        robot.tracks.validate()?;
        robot.geometry.validate()?;
        robot.forces()?;
        lumen.local_radius(start_s_mm)?;
        Ok(Simulation {
            lumen,
            robot,
            config,
            time_s: 0.0,
            steps: 0,
            state: RobotState::at(start_s_mm),
            rows: Vec::new(),
            stalled_since: None,
        })
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    /// Solves the contact at the current position without moving and records
    /// it as the initial row.
    pub fn prime(&mut self, cmd: &Command) -> Result<&TraceRow> {
        let still = Command {
            motor_speed_radps: 0.0,
            ..*cmd
        };
        let out =
            step(&self.state, &still, &self.lumen, &self.robot, &self.config).map_err(|e| {
                Error::Step {
                    step: 0,
                    source: Box::new(e),
                }
            })?;
        self.state = RobotState {
            motor_speed_radps: cmd.motor_speed_radps,
            ..out.state
        };
        self.rows.clear();
        self.rows.push(TraceRow {
            time_s: self.time_s,
            state: self.state,
            traction: out.traction,
            contact: out.contact,
        });
        Ok(self.rows.last().expect("row pushed"))
    }

    pub fn advance(&mut self, cmd: &Command) -> Result<&TraceRow> {
        let index = self.steps;
        let out = step(&self.state, cmd, &self.lumen, &self.robot, &self.config).map_err(|e| {
            Error::Step {
                step: index,
                source: Box::new(e),
            }
        })?;
        self.steps += 1;
        self.time_s = self.steps as f64 * self.config.dt_s;
        self.state = out.state;
        self.stalled_since = match (out.state.stalled, self.stalled_since) {
            (true, None) => Some(self.time_s),
            (true, since) => since,
            (false, _) => None,
        };
        self.rows.push(TraceRow {
            time_s: self.time_s,
            state: out.state,
            traction: out.traction,
            contact: out.contact,
        });
        Ok(self.rows.last().expect("row pushed"))
    }

    /// Time the current stall has lasted, s.
    pub fn stall_duration_s(&self) -> f64 {
        self.stalled_since
            .map_or(0.0, |t| self.time_s - t + self.config.dt_s)
    }

    pub fn at_exit(&self) -> bool {
        let m = self.state.motor_speed_radps;
        (m > 0.0 && self.state.s_mm >= self.lumen.length()) || (m < 0.0 && self.state.s_mm <= 0.0)
    }

    pub fn finish(self) -> SimTrace {
        let len = self.lumen.length();
        let summary = SimTrace::summarize(&self.rows, len);
        SimTrace {
            lumen_length_mm: len,
            rows: self.rows,
            summary,
        }
    }
}

fn command_at(schedule: &[TimedCommand], t: f64) -> Command {
    let idx = schedule.partition_point(|c| c.t_s <= t + 1e-9);
    schedule[idx.saturating_sub(1)].command
}

/// Runs `schedule` until the robot leaves the lumen, stalls for longer than
/// the configured timeout, or the step budget is spent.
pub fn run(
    lumen: &LumenModel,
    robot: &Robot,
    config: &SimConfig,
    schedule: &[TimedCommand],
    start_s_mm: Option<f64>,
) -> Result<SimTrace> {
    if schedule.is_empty() {
        return Err(invalid("schedule", "needs at least one command"));
    }
    for w in schedule.windows(2) {
        if !(w[1].t_s > w[0].t_s) {
            return Err(invalid("schedule", "times must be strictly increasing"));
        }
    }
    let first = command_at(schedule, 0.0);
    let start = start_s_mm.unwrap_or_else(|| {
        let dir = schedule
            .iter()
            .map(|c| c.command.motor_speed_radps)
            .find(|&m| m != 0.0)
            .unwrap_or(0.0);
        if dir < 0.0 {
            lumen.length()
        } else {
            0.0
        }
    });
    let mut sim = Simulation::new(lumen.clone(), robot.clone(), *config, start)?;
    sim.prime(&first)?;
    while sim.steps() < config.max_steps {
        let cmd = command_at(schedule, sim.time_s());
        sim.advance(&cmd)?;
        if sim.at_exit() || sim.stall_duration_s() > config.stall_timeout_s {
            break;
        }
    }
    Ok(sim.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TractionRow {
    #[serde(rename = "pressure_kPa")]
    pub pressure_kpa: f64,
    #[serde(rename = "traction_N")]
    pub traction_n: f64,
    #[serde(rename = "friction_limit_N")]
    pub friction_limit_n: f64,
    #[serde(rename = "usable_axial_N")]
    pub usable_axial_n: f64,
    #[serde(rename = "total_normal_N")]
    pub total_normal_n: f64,
    #[serde(rename = "resistance_N")]
    pub resistance_n: f64,
    pub tracks_in_contact: usize,
    pub stalled: bool,
}

/// Static traction with both chambers at each pressure, robot held at `s_mm`
/// and driven forward at full motor speed.
pub fn traction_sweep(
    lumen: &LumenModel,
    robot: &Robot,
    config: &SimConfig,
    pressures_kpa: &[f64],
    s_mm: f64,
) -> Result<Vec<TractionRow>> {
    let forces = robot.forces()?;
    pressures_kpa
        .iter()
        .map(|&p| {
            let contact =
                equilibrium_contact(&contact_problem(lumen, s_mm, [p, p], robot, config)?)?;
            let res = resistance(s_mm, 1.0, &contact, lumen, robot, config);
            let t = contact::traction(&contact, &robot.tracks, &forces, res.total_n);
            Ok(TractionRow {
                pressure_kpa: p,
                traction_n: t.available_n,
                friction_limit_n: t.friction_limit_n,
                usable_axial_n: t.usable_axial_n,
                total_normal_n: contact.total_normal_n(),
                resistance_n: res.total_n,
                tracks_in_contact: contact.tracks_in_contact,
                stalled: t.stalled,
            })
        })
        .collect()
}

/// Lowest common pressure on a `step_kpa` grid at which forward motion at
/// `s_mm` stalls; `None` if none up to the chamber's limit.
pub fn stall_threshold(
    lumen: &LumenModel,
    robot: &Robot,
    config: &SimConfig,
    s_mm: f64,
    step_kpa: f64,
) -> Result<Option<f64>> {
    if !(step_kpa > 0.0) {
        return Err(invalid("step_kpa", "must be > 0"));
    }
    let max = robot.chamber.max_pressure_kpa();
    let n = (max / step_kpa + 1e-9).floor() as usize;
    for k in 0..=n {
        let p = k as f64 * step_kpa;
        if traction_sweep(lumen, robot, config, &[p], s_mm)?[0].stalled {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Smallest common pressure (0.25 kPa grid) putting at least five of the
/// tracks in contact at `s_mm`.
pub fn matched_pressure(
    lumen: &LumenModel,
    robot: &Robot,
    config: &SimConfig,
    s_mm: f64,
) -> Result<Option<f64>> {
    let base = contact_problem(lumen, s_mm, [0.0, 0.0], robot, config)?;
    let need = robot.tracks.n_tracks.saturating_sub(1).max(1);
    contact::matched_inflation(&base, need, 0.25)
}
