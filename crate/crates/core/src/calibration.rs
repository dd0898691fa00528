//! Named parameter sets and robot construction.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contact::{ChamberTable, RobotGeometry, TrackSet};
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::membrane::{ChamberProfile, OgdenMaterial, SolverSettings};
use crate::navigation::{ResistanceParams, Robot, SimConfig};
use crate::transmission::{GearheadParams, WormGearParams};

const DEFAULT_TOML: &str = include_str!("../calibration/default_calibration.toml");

pub const CALIBRATION_NAMES: [&str; 1] = ["default"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionConfig {
    pub pitch_mm: f64,
    pub pitch_diameter_mm: f64,
    pub lead_angle_deg: f64,
    pub pressure_angle_deg: f64,
    #[serde(rename = "motor_torque_Nmm")]
    pub motor_torque_nmm: f64,
    pub gear_ratio: f64,
    pub efficiency: f64,
    pub max_motor_speed_radps: f64,
}

impl TransmissionConfig {
    pub fn worm(&self) -> WormGearParams {
        WormGearParams {
            pitch_mm: self.pitch_mm,
            pitch_diameter_mm: self.pitch_diameter_mm,
            lead_angle_rad: self.lead_angle_deg.to_radians(),
            pressure_angle_rad: self.pressure_angle_deg.to_radians(),
        }
    }

    pub fn gear(&self) -> GearheadParams {
        GearheadParams {
            motor_torque_nmm: self.motor_torque_nmm,
            gear_ratio: self.gear_ratio,
            efficiency: self.efficiency,
            max_motor_speed_radps: self.max_motor_speed_radps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneConfig {
    pub profile: ChamberProfile,
    pub material: OgdenMaterial,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Upper end of the tabulated chamber response; the table stops earlier
    /// if the stretch cap is reached.
    #[serde(rename = "table_max_kPa")]
    pub table_max_kpa: f64,
    #[serde(rename = "table_step_kPa")]
    pub table_step_kpa: f64,
}

/// Operator-facing actuator limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(rename = "max_pressure_kPa")]
    pub max_pressure_kpa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub name: String,
    pub transmission: TransmissionConfig,
    pub membrane: MembraneConfig,
    pub tracks: TrackSet,
    pub geometry: RobotGeometry,
    pub resistance: ResistanceParams,
    pub sim: SimConfig,
    pub limits: Limits,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn table_cache() -> &'static Mutex<HashMap<String, Arc<ChamberTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<ChamberTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Calibration {
    pub fn default_calibration() -> Self {
        Self::from_toml(DEFAULT_TOML).expect("embedded calibration parses")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default_calibration()),
            other => Err(Error::UnknownCalibration(other.to_string())),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cal: Calibration = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.transmission.worm().validate()?;
        self.transmission.gear().validate()?;
        self.membrane.profile.validate()?;
        self.membrane.material.validate()?;
        self.tracks.validate()?;
        self.geometry.validate()?;
        self.sim.validate()?;
        ensure_finite(self.limits.max_pressure_kpa, "max_pressure_kPa")?;
        if self.limits.max_pressure_kpa <= 0.0 {
            return Err(invalid("max_pressure_kPa", "must be > 0"));
        }
        if self.limits.max_pressure_kpa > self.membrane.table_max_kpa {
            return Err(invalid("max_pressure_kPa", "must not exceed table_max_kPa"));
        }
        for (v, name) in [
            (self.resistance.sliding_share, "sliding_share"),
            (self.resistance.drape_share, "drape_share"),
        ] {
            ensure_finite(v, name)?;
            if v < 0.0 {
                return Err(invalid(name, "must be >= 0"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of every parameter.
    pub fn config_hash(&self) -> String {
        hex_digest(
            serde_json::to_string(self)
                .expect("calibration serializes")
                .as_bytes(),
        )
    }

    /// Chamber response table, computed once per membrane configuration per process.
    pub fn chamber_table(&self) -> Result<Arc<ChamberTable>> {
        let key = hex_digest(
            serde_json::to_string(&self.membrane)
                .expect("membrane serializes")
                .as_bytes(),
        );
        if let Some(t) = table_cache().lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(t));
        }
        let m = &self.membrane;
        let table = Arc::new(ChamberTable::from_membrane(
            &m.profile,
            &m.material,
            m.solver,
            m.table_max_kpa,
            m.table_step_kpa,
        )?);
        table_cache()
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| Arc::clone(&table));
        Ok(table)
    }

    pub fn robot(&self) -> Result<Robot> {
        self.validate()?;
        Ok(Robot {
            worm: self.transmission.worm(),
            gear: self.transmission.gear(),
            tracks: self.tracks,
            geometry: self.geometry,
            resistance: self.resistance,
            chamber: self.chamber_table()?,
        })
    }
}
