//! Teleoperation session: one stepping loop driven by operator commands.
//!
//! Transport-agnostic; the network layer feeds [`CommandFrame`]s in and
//! broadcasts the [`ServerMessage`]s that come out. Every message is a JSON
//! document carrying `proto_version`.

use serde::{Deserialize, Serialize};

use crate::contact::camera_offset_mm;
use crate::error::{Error, Result};
use crate::navigation::{Command, SimTrace, Simulation, Termination, TraceRow};
use crate::scenario::ResolvedScenario;

pub const PROTO_VERSION: u32 = 1;

fn proto() -> u32 {
    PROTO_VERSION
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandFrame {
    #[serde(default = "proto")]
    pub proto_version: u32,
    pub motor_speed_radps: f64,
    #[serde(rename = "p1_kPa")]
    pub p1_kpa: f64,
    #[serde(rename = "p2_kPa")]
    pub p2_kpa: f64,
    #[serde(default)]
    pub pause: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub proto_version: u32,
    pub accepted: bool,
    /// The command as it will be applied, after clamping.
    pub applied: Option<CommandFrame>,
    /// Names of the fields that were clamped.
    pub clamped: Vec<String>,
    pub error: Option<String>,
    /// `step` of the first frame computed with this command; absent when rejected.
    pub effective_step: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub proto_version: u32,
    pub seq: u64,
    /// Steps taken so far; unchanged while paused.
    pub step: usize,
    pub time_s: f64,
    pub s_mm: f64,
    pub v_mmps: f64,
    pub tilt_deg: f64,
    #[serde(rename = "p1_kPa")]
    pub p1_kpa: f64,
    #[serde(rename = "p2_kPa")]
    pub p2_kpa: f64,
    pub motor_speed_radps: f64,
    pub tracks_in_contact: usize,
    #[serde(rename = "per_track_normal_N")]
    pub per_track_normal_n: Vec<f64>,
    #[serde(rename = "traction_margin_N")]
    pub traction_margin_n: f64,
    pub stalled: bool,
    /// Height of the robot axis above the lumen axis at the camera, mm.
    pub camera_offset_mm: f64,
    pub paused: bool,
    pub completed: bool,
    /// Fields clamped in the command currently in effect.
    pub clamped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateFrame),
    Ack(Ack),
    End {
        proto_version: u32,
        seq: u64,
        reason: String,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuatorLimits {
    #[serde(rename = "max_pressure_kPa")]
    pub max_pressure_kpa: f64,
    pub max_motor_speed_radps: f64,
}

/// Lumen geometry for display.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LumenView {
    pub proto_version: u32,
    pub length_mm: f64,
    pub elbows_mm: Vec<(f64, f64)>,
    pub supports_mm: Vec<f64>,
    pub collapsed: bool,
    /// `(s, x, y, radius)` samples along the centerline.
    pub samples: Vec<[f64; 4]>,
    pub limits: ActuatorLimits,
    pub n_tracks: usize,
    pub theoretical_speed_mmps: f64,
}

#[derive(Debug)]
pub struct Session {
    sim: Simulation,
    limits: ActuatorLimits,
    command: Command,
    paused: bool,
    seq: u64,
    active_clamp: Vec<String>,
    latest: StateFrame,
}

fn clamp_field(v: f64, lo: f64, hi: f64, name: &str, clamped: &mut Vec<String>) -> f64 {
    let c = v.clamp(lo, hi);
    if c != v {
        clamped.push(name.to_string());
    }
    c
}

impl Session {
    pub fn new(scenario: &ResolvedScenario) -> Result<Self> {
        let limits = ActuatorLimits {
            max_pressure_kpa: scenario.calibration.limits.max_pressure_kpa,
            max_motor_speed_radps: scenario.robot.gear.max_motor_speed_radps,
        };
        let mut sim = Simulation::new(
            scenario.lumen.clone(),
            scenario.robot.clone(),
            scenario.sim,
            scenario.start_s_mm,
        )?;
        let first = scenario.schedule[0].command;
        let mut scratch = Vec::new();
        let command = Command {
            motor_speed_radps: clamp_field(
                first.motor_speed_radps,
                -limits.max_motor_speed_radps,
                limits.max_motor_speed_radps,
                "motor_speed_radps",
                &mut scratch,
            ),
            p1_kpa: clamp_field(
                first.p1_kpa,
                0.0,
                limits.max_pressure_kpa,
                "p1_kPa",
                &mut scratch,
            ),
            p2_kpa: clamp_field(
                first.p2_kpa,
                0.0,
                limits.max_pressure_kpa,
                "p2_kPa",
                &mut scratch,
            ),
        };
        let row = sim.prime(&command)?.clone();
        let mut session = Session {
            sim,
            limits,
            command,
            paused: false,
            seq: 0,
            active_clamp: scratch,
            latest: placeholder_frame(),
        };
        session.latest = session.frame_from(&row);
        Ok(session)
    }

    pub fn limits(&self) -> ActuatorLimits {
        self.limits
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn command(&self) -> Command {
        self.command
    }

    pub fn dt_s(&self) -> f64 {
        self.sim.config.dt_s
    }

    /// Clamps and stores a command; it takes effect at the next step.
    pub fn apply(&mut self, frame: CommandFrame) -> Ack {
        let reject = |msg: String| Ack {
            proto_version: PROTO_VERSION,
            accepted: false,
            applied: None,
            clamped: Vec::new(),
            error: Some(msg),
            effective_step: None,
        };
        if frame.proto_version != PROTO_VERSION {
            return reject(format!("unsupported proto_version {}", frame.proto_version));
        }
        for (v, name) in [
            (frame.motor_speed_radps, "motor_speed_radps"),
            (frame.p1_kpa, "p1_kPa"),
            (frame.p2_kpa, "p2_kPa"),
        ] {
            if !v.is_finite() {
                return reject(format!("non-finite `{name}`"));
            }
        }
        let l = self.limits;
        let mut clamped = Vec::new();
        let applied = CommandFrame {
            proto_version: PROTO_VERSION,
            motor_speed_radps: clamp_field(
                frame.motor_speed_radps,
                -l.max_motor_speed_radps,
                l.max_motor_speed_radps,
                "motor_speed_radps",
                &mut clamped,
            ),
            p1_kpa: clamp_field(
                frame.p1_kpa,
                0.0,
                l.max_pressure_kpa,
                "p1_kPa",
                &mut clamped,
            ),
            p2_kpa: clamp_field(
                frame.p2_kpa,
                0.0,
                l.max_pressure_kpa,
                "p2_kPa",
                &mut clamped,
            ),
            pause: frame.pause,
        };
        self.command = Command::new(applied.motor_speed_radps, applied.p1_kpa, applied.p2_kpa);
        self.paused = applied.pause;
        self.active_clamp = clamped.clone();
        Ack {
            proto_version: PROTO_VERSION,
            accepted: true,
            applied: Some(applied),
            clamped,
            error: None,
            effective_step: Some(self.sim.steps() + 1),
        }
    }

    /// Parses and applies a JSON command; malformed input is rejected
    /// without touching the session.
    pub fn apply_json(&mut self, text: &str) -> Ack {
        match serde_json::from_str::<CommandFrame>(text) {
            Ok(f) => self.apply(f),
            Err(e) => Ack {
                proto_version: PROTO_VERSION,
                accepted: false,
                applied: None,
                clamped: Vec::new(),
                error: Some(format!("malformed command: {e}")),
                effective_step: None,
            },
        }
    }

    /// Advances one step (unless paused) and returns the new frame.
    pub fn tick(&mut self) -> Result<StateFrame> {
        let row = if self.paused {
            self.sim.rows().last().expect("primed").clone()
        } else {
            self.sim.advance(&self.command)?.clone()
        };
        self.latest = self.frame_from(&row);
        Ok(self.latest.clone())
    }

    pub fn latest(&self) -> &StateFrame {
        &self.latest
    }

    fn frame_from(&mut self, row: &TraceRow) -> StateFrame {
        self.seq += 1;
        let st = &row.state;
        StateFrame {
            proto_version: PROTO_VERSION,
            seq: self.seq,
            step: self.sim.steps(),
            time_s: row.time_s,
            s_mm: st.s_mm,
            v_mmps: st.v_mmps,
            tilt_deg: st.tilt_deg,
            p1_kpa: st.pressures_kpa[0],
            p2_kpa: st.pressures_kpa[1],
            motor_speed_radps: st.motor_speed_radps,
            tracks_in_contact: row.contact.tracks_in_contact,
            per_track_normal_n: row.contact.track_normal_n.clone(),
            traction_margin_n: row.traction.margin_n,
            stalled: st.stalled,
            camera_offset_mm: camera_offset_mm(&row.contact, &self.sim.robot.geometry),
            paused: self.paused,
            completed: self.sim.at_exit(),
            clamped: self.active_clamp.clone(),
        }
    }

    /// Trace of every step taken so far.
    pub fn trace(&self) -> SimTrace {
        let mut trace = self.sim.clone().finish();
        if trace.summary.termination == Termination::MaxSteps {
            trace.summary.termination = Termination::Stopped;
        }
        trace
    }

    pub fn end_message(&self, reason: &str) -> ServerMessage {
        ServerMessage::End {
            proto_version: PROTO_VERSION,
            seq: self.seq + 1,
            reason: reason.to_string(),
        }
    }

    pub fn lumen_view(&self) -> Result<LumenView> {
        let l = &self.sim.lumen;
        let len = l.length();
        let n = (len / 5.0).ceil() as usize;
        let mut samples = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let s = (k as f64 * 5.0).min(len);
            let pose = l.centerline_pose(s)?;
            samples.push([
                s,
                pose.position_mm[0],
                pose.position_mm[1],
                l.local_radius(s)?,
            ]);
        }
        let r = &self.sim.robot;
        Ok(LumenView {
            proto_version: PROTO_VERSION,
            length_mm: len,
            elbows_mm: l.elbow_spans(),
            supports_mm: l.supports.clone(),
            collapsed: l.is_collapsed(),
            samples,
            limits: self.limits,
            n_tracks: r.tracks.n_tracks,
            theoretical_speed_mmps: r
                .track_speed(r.gear.max_motor_speed_radps)
                .map_err(|e| Error::Scenario(e.to_string()))?,
        })
    }
}

fn placeholder_frame() -> StateFrame {
    StateFrame {
        proto_version: PROTO_VERSION,
        seq: 0,
        step: 0,
        time_s: 0.0,
        s_mm: 0.0,
        v_mmps: 0.0,
        tilt_deg: 0.0,
        p1_kpa: 0.0,
        p2_kpa: 0.0,
        motor_speed_radps: 0.0,
        tracks_in_contact: 0,
        per_track_normal_n: Vec::new(),
        traction_margin_n: 0.0,
        stalled: false,
        camera_offset_mm: 0.0,
        paused: false,
        completed: false,
        clamped: Vec::new(),
    }
}
