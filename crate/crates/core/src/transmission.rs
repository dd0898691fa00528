//! Worm-gear drivetrain: motor command to track speed and axial force budget.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};

/// Worm geometry. Angles in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WormGearParams {
    pub pitch_mm: f64,
    pub pitch_diameter_mm: f64,
    pub lead_angle_rad: f64,
    pub pressure_angle_rad: f64,
}

impl WormGearParams {
    /// p = 6 mm, D_W = 18 mm, lead 5.5 deg, pressure angle 0.
    pub fn fabricated() -> Self {
        WormGearParams {
            pitch_mm: 6.0,
            pitch_diameter_mm: 18.0,
            lead_angle_rad: 5.5_f64.to_radians(),
            pressure_angle_rad: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.pitch_mm, "pitch_mm")?;
        ensure_finite(self.pitch_diameter_mm, "pitch_diameter_mm")?;
        ensure_finite(self.lead_angle_rad, "lead_angle_rad")?;
        ensure_finite(self.pressure_angle_rad, "pressure_angle_rad")?;
        if self.pitch_mm <= 0.0 {
            return Err(invalid("pitch_mm", "must be > 0"));
        }
        if self.pitch_diameter_mm <= 0.0 {
            return Err(invalid("pitch_diameter_mm", "must be > 0"));
        }
        if !(self.lead_angle_rad > 0.0 && self.lead_angle_rad < FRAC_PI_2) {
            return Err(invalid(
                "lead_angle_rad",
                "must lie in (0, pi/2); axial force is unbounded at 0",
            ));
        }
        if !(self.pressure_angle_rad >= 0.0 && self.pressure_angle_rad < FRAC_PI_2) {
            return Err(invalid("pressure_angle_rad", "must lie in [0, pi/2)"));
        }
        Ok(())
    }
}

/// Motor and gearbox.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GearheadParams {
    pub motor_torque_nmm: f64,
    pub gear_ratio: f64,
    pub efficiency: f64,
    pub max_motor_speed_radps: f64,
}

impl GearheadParams {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.motor_torque_nmm, "motor_torque_nmm")?;
        ensure_finite(self.gear_ratio, "gear_ratio")?;
        ensure_finite(self.efficiency, "efficiency")?;
        ensure_finite(self.max_motor_speed_radps, "max_motor_speed_radps")?;
        if self.motor_torque_nmm < 0.0 {
            return Err(invalid("motor_torque_nmm", "must be >= 0"));
        }
        if self.gear_ratio < 1.0 {
            return Err(invalid("gear_ratio", "must be >= 1"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(invalid("efficiency", "must lie in (0, 1]"));
        }
        if self.max_motor_speed_radps <= 0.0 {
            return Err(invalid("max_motor_speed_radps", "must be > 0"));
        }
        Ok(())
    }

    /// Worm shaft speed for a motor speed, rad/s.
    pub fn shaft_speed(&self, motor_speed_radps: f64) -> f64 {
        motor_speed_radps / self.gear_ratio
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionForces {
    pub tangential_n: f64,
    pub axial_n: f64,
    pub radial_n: f64,
    pub gearhead_torque_nmm: f64,
}

pub fn rpm_to_radps(rpm: f64) -> f64 {
    rpm * 2.0 * PI / 60.0
}

/// Track speed in mm/s for a worm shaft speed; one revolution advances one pitch.
pub fn robot_speed(shaft_speed_radps: f64, pitch_mm: f64) -> Result<f64> {
    ensure_finite(shaft_speed_radps, "shaft_speed_radps")?;
    ensure_finite(pitch_mm, "pitch_mm")?;
    if pitch_mm <= 0.0 {
        return Err(invalid("pitch_mm", "must be > 0"));
    }
    Ok(shaft_speed_radps * pitch_mm / (2.0 * PI))
}

pub fn drivetrain_forces(
    gear: &GearheadParams,
    worm: &WormGearParams,
) -> Result<TransmissionForces> {
    gear.validate()?;
    worm.validate()?;
    let torque = gear.motor_torque_nmm * gear.gear_ratio * gear.efficiency;
    let tangential = 2.0 * torque / worm.pitch_diameter_mm;
    let axial = tangential / worm.lead_angle_rad.tan();
    let radial = if worm.pressure_angle_rad == 0.0 {
        0.0
    } else {
        axial * worm.pressure_angle_rad.tan()
    };
    Ok(TransmissionForces {
        tangential_n: tangential,
        axial_n: axial,
        radial_n: radial,
        gearhead_torque_nmm: torque,
    })
}
