//! Scenario files: a robot, a lumen, a command schedule and simulation settings.
//!
//! ```toml
//! name = "pipe84 quickstart"
//!
//! [robot]
//! calibration = "default"
//!
//! [lumen]
//! fixture = "pipe84"
//!
//! [[schedule]]
//! t_s = 0.0
//! motor_radps = 1256.6370614359173
//! matched = true
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{Calibration, MembraneConfig, TransmissionConfig};
use crate::contact::{RobotGeometry, TrackSet};
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::lumen::{fixture, LumenModel};
use crate::navigation::{
    self, Command, ResistanceParams, Robot, SimConfig, SimTrace, TimedCommand,
};

/// Robot block: a named calibration plus optional whole-block overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotBlock {
    pub calibration: String,
    pub transmission: Option<TransmissionConfig>,
    pub membrane: Option<MembraneConfig>,
    pub tracks: Option<TrackSet>,
    pub geometry: Option<RobotGeometry>,
    pub resistance: Option<ResistanceParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LumenBlock {
    pub fixture: Option<String>,
    pub inline: Option<LumenModel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub t_s: f64,
    pub motor_radps: f64,
    #[serde(rename = "p1_kPa")]
    pub p1_kpa: Option<f64>,
    #[serde(rename = "p2_kPa")]
    pub p2_kpa: Option<f64>,
    /// Use the lowest pressure that puts all but one track in contact at the start.
    #[serde(default)]
    pub matched: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub robot: RobotBlock,
    pub lumen: LumenBlock,
    pub schedule: Vec<ScheduleEntry>,
    pub sim: Option<SimConfig>,
    pub start_s_mm: Option<f64>,
}

/// A scenario with every reference resolved.
#[derive(Clone, Debug)]
pub struct ResolvedScenario {
    pub name: String,
    pub calibration: Calibration,
    pub lumen: LumenModel,
    pub robot: Robot,
    pub sim: SimConfig,
    pub schedule: Vec<TimedCommand>,
    pub start_s_mm: f64,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    fn lumen(&self) -> Result<LumenModel> {
        match (&self.lumen.fixture, &self.lumen.inline) {
            (Some(name), None) => fixture(name),
            (None, Some(model)) => {
                model.validate()?;
                Ok(model.clone())
            }
            _ => Err(Error::Scenario(
                "lumen: give exactly one of `fixture` or `inline`".into(),
            )),
        }
    }

    /// Effective calibration after applying the robot block overrides.
    pub fn calibration(&self) -> Result<Calibration> {
        let mut cal = Calibration::by_name(&self.robot.calibration)?;
        let r = &self.robot;
        if let Some(t) = r.transmission {
            cal.transmission = t;
        }
        if let Some(m) = &r.membrane {
            cal.membrane = m.clone();
        }
        if let Some(t) = r.tracks {
            cal.tracks = t;
        }
        if let Some(g) = r.geometry {
            cal.geometry = g;
        }
        if let Some(x) = r.resistance {
            cal.resistance = x;
        }
        if let Some(s) = self.sim {
            cal.sim = s;
        }
        cal.validate()?;
        Ok(cal)
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        self.resolve_with(self.calibration()?)
    }

    /// Resolves against an explicit calibration instead of the robot block.
    pub fn resolve_with(&self, calibration: Calibration) -> Result<ResolvedScenario> {
        if self.schedule.is_empty() {
            return Err(Error::Scenario("schedule: needs at least one entry".into()));
        }
        calibration.validate()?;
        let lumen = self.lumen()?;
        let robot = calibration.robot()?;
        let sim = calibration.sim;
        let first_dir = self
            .schedule
            .iter()
            .map(|e| e.motor_radps)
            .find(|&m| m != 0.0)
            .unwrap_or(0.0);
        let start = match self.start_s_mm {
            Some(s) => {
                ensure_finite(s, "start_s_mm")?;
                lumen.local_radius(s)?;
                s
            }
            None if first_dir < 0.0 => lumen.length(),
            None => 0.0,
        };
        let mut matched = None;
        let mut schedule = Vec::with_capacity(self.schedule.len());
        for (i, e) in self.schedule.iter().enumerate() {
            ensure_finite(e.t_s, "t_s")?;
            ensure_finite(e.motor_radps, "motor_radps")?;
            let (p1, p2) = match (e.matched, e.p1_kpa, e.p2_kpa) {
                (true, None, None) => {
                    if matched.is_none() {
                        let p = navigation::matched_pressure(&lumen, &robot, &sim, start)?.ok_or_else(|| {
                            Error::Scenario(format!("schedule[{i}]: no pressure up to the chamber limit reaches matched contact"))
                        })?;
                        matched = Some(p);
                    }
                    let p = matched.expect("set above");
                    (p, p)
                }
                (false, Some(p1), Some(p2)) => (p1, p2),
                _ => {
                    return Err(Error::Scenario(format!(
                        "schedule[{i}]: give either `matched = true` or both `p1_kPa` and `p2_kPa`"
                    )))
                }
            };
            if p1 < 0.0 || p2 < 0.0 {
                return Err(invalid(
                    "p1_kPa",
                    format!("schedule[{i}]: pressures must be >= 0"),
                ));
            }
            schedule.push(TimedCommand {
                t_s: e.t_s,
                command: Command::new(e.motor_radps, p1, p2),
            });
        }
        if schedule[0].t_s != 0.0 {
            return Err(Error::Scenario("schedule[0]: must start at t_s = 0".into()));
        }
        Ok(ResolvedScenario {
            name: self.name.clone(),
            calibration,
            lumen,
            robot,
            sim,
            schedule,
            start_s_mm: start,
        })
    }
}

impl ResolvedScenario {
    pub fn run(&self) -> Result<SimTrace> {
        navigation::run(
            &self.lumen,
            &self.robot,
            &self.sim,
            &self.schedule,
            Some(self.start_s_mm),
        )
    }

    /// Hash over the effective calibration, lumen, schedule and start point.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let doc = serde_json::json!({
            "calibration": self.calibration,
            "lumen": self.lumen,
            "schedule": self.schedule,
            "start_s_mm": self.start_s_mm,
        });
        Sha256::digest(doc.to_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Full-speed straight run through a named fixture at matched inflation.
pub fn quickstart(fixture_name: &str, backward: bool) -> ScenarioSpec {
    let cal = Calibration::default_calibration();
    let m = cal.transmission.max_motor_speed_radps;
    ScenarioSpec {
        name: format!(
            "{fixture_name} {}",
            if backward { "backward" } else { "forward" }
        ),
        robot: RobotBlock {
            calibration: "default".into(),
            transmission: None,
            membrane: None,
            tracks: None,
            geometry: None,
            resistance: None,
        },
        lumen: LumenBlock {
            fixture: Some(fixture_name.into()),
            inline: None,
        },
        schedule: vec![ScheduleEntry {
            t_s: 0.0,
            motor_radps: if backward { -m } else { m },
            p1_kpa: None,
            p2_kpa: None,
            matched: true,
        }],
        sim: None,
        start_s_mm: None,
    }
}
