//! Quasi-static contact between the track ring and the lumen wall.
//!
//! Each chamber pushes its set of tracks outward to a free radius set by the
//! chamber inflation. The tracks and chamber act as a radial spring in series
//! with the wall ring; gravity shifts the chamber centre downward until the
//! track normals carry half the robot weight.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::lumen::WallLaw;
use crate::membrane::{ChamberProfile, ChamberSolver, OgdenMaterial, SolverSettings};
use crate::roots::brent;
use crate::transmission::TransmissionForces;

pub const GRAVITY_MPS2: f64 = 9.81;

/// Radial response of one inflated chamber as seen by the tracks.
pub trait ChamberResponse: Send + Sync + std::fmt::Debug {
    /// Free radial growth of the crown at `pressure_kpa`, mm.
    fn free_displacement_mm(&self, pressure_kpa: f64) -> Result<f64>;
    /// Ring stiffness against uniform radial compression, N/mm.
    fn radial_stiffness_n_per_mm(&self, pressure_kpa: f64) -> Result<f64>;
    /// Highest pressure the response is defined for.
    fn max_pressure_kpa(&self) -> f64;
}

/// Linear chamber; handy for tests and benchmarks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearChamber {
    pub mm_per_kpa: f64,
    pub stiffness_n_per_mm: f64,
    pub max_pressure_kpa: f64,
}

fn check_pressure(p: f64, max: f64) -> Result<()> {
    ensure_finite(p, "pressure_kpa")?;
    if p < 0.0 {
        return Err(invalid("pressure_kpa", "must be >= 0"));
    }
    if p > max + 1e-9 {
        return Err(invalid(
            "pressure_kpa",
            format!("{p} exceeds the tabulated range (max {max})"),
        ));
    }
    Ok(())
}

impl ChamberResponse for LinearChamber {
    fn free_displacement_mm(&self, pressure_kpa: f64) -> Result<f64> {
        check_pressure(pressure_kpa, self.max_pressure_kpa)?;
        Ok(self.mm_per_kpa * pressure_kpa)
    }

    fn radial_stiffness_n_per_mm(&self, pressure_kpa: f64) -> Result<f64> {
        check_pressure(pressure_kpa, self.max_pressure_kpa)?;
        Ok(self.stiffness_n_per_mm)
    }

    fn max_pressure_kpa(&self) -> f64 {
        self.max_pressure_kpa
    }
}

/// Chamber response sampled from the membrane model and interpolated linearly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamberTable {
    pub pressures_kpa: Vec<f64>,
    pub displacement_mm: Vec<f64>,
    pub stiffness_n_per_mm: Vec<f64>,
    /// Set when the sweep stopped at the stretch cap: `(pressure, stretch, cap)`.
    pub over_inflation: Option<(f64, f64, f64)>,
}

impl ChamberTable {
    pub fn from_rows(
        pressures_kpa: Vec<f64>,
        displacement_mm: Vec<f64>,
        stiffness_n_per_mm: Vec<f64>,
    ) -> Result<Self> {
        let n = pressures_kpa.len();
        if n < 2 || displacement_mm.len() != n || stiffness_n_per_mm.len() != n {
            return Err(invalid(
                "pressures_kpa",
                "need at least two rows of equal length",
            ));
        }
        if pressures_kpa[0] != 0.0 {
            return Err(invalid("pressures_kpa", "must start at 0"));
        }
        for w in pressures_kpa.windows(2) {
            if !(w[1] > w[0]) {
                return Err(invalid("pressures_kpa", "must be strictly increasing"));
            }
        }
        for (&d, &k) in displacement_mm.iter().zip(&stiffness_n_per_mm) {
            ensure_finite(d, "displacement_mm")?;
            ensure_finite(k, "stiffness_n_per_mm")?;
            if k <= 0.0 {
                return Err(invalid("stiffness_n_per_mm", "must be > 0"));
            }
        }
        Ok(ChamberTable {
            pressures_kpa,
            displacement_mm,
            stiffness_n_per_mm,
            over_inflation: None,
        })
    }

    /// Sweeps the membrane model from 0 to `max_pressure_kpa` in `step_kpa`
    /// increments. The sweep ends early at the stretch cap; queries beyond the
    /// last row then report over-inflation.
    pub fn from_membrane(
        profile: &ChamberProfile,
        material: &OgdenMaterial,
        settings: SolverSettings,
        max_pressure_kpa: f64,
        step_kpa: f64,
    ) -> Result<Self> {
        ensure_finite(max_pressure_kpa, "max_pressure_kpa")?;
        ensure_finite(step_kpa, "step_kpa")?;
        if step_kpa <= 0.0 || max_pressure_kpa < step_kpa {
            return Err(invalid("step_kpa", "need 0 < step <= max pressure"));
        }
        let mut solver = ChamberSolver::new(profile, material, settings)?;
        let count = (max_pressure_kpa / step_kpa + 1e-9).floor() as usize;
        let mut states = Vec::with_capacity(count + 1);
        let mut displacement = Vec::with_capacity(count + 1);
        let mut over_inflation = None;
        for k in 0..=count {
            let p = k as f64 * step_kpa;
            match solver.inflate(p) {
                Ok(shape) => {
                    displacement.push(shape.max_radial_displacement_mm);
                    states.push((p, solver.clone()));
                }
                Err(Error::OverInflation {
                    pressure_kpa,
                    stretch,
                    cap,
                }) if k > 1 => {
                    over_inflation = Some((pressure_kpa, stretch, cap));
                    break;
                }
                Err(e) => {
                    return Err(Error::Sweep {
                        pressure_kpa: p,
                        source: Box::new(e),
                    })
                }
            }
        }
        let stiffness = states
            .into_par_iter()
            .map(|(p, mut s)| {
                s.radial_secant_stiffness(p).map_err(|e| Error::Sweep {
                    pressure_kpa: p,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let pressures = (0..displacement.len())
            .map(|k| k as f64 * step_kpa)
            .collect();
        let mut table = Self::from_rows(pressures, displacement, stiffness)?;
        table.over_inflation = over_inflation;
        Ok(table)
    }

    fn interpolate(&self, pressure_kpa: f64, column: &[f64]) -> Result<f64> {
        let max = self.max_pressure_kpa();
        if pressure_kpa > max + 1e-9 {
            if let Some((_, stretch, cap)) = self.over_inflation {
                return Err(Error::OverInflation {
                    pressure_kpa,
                    stretch,
                    cap,
                });
            }
        }
        check_pressure(pressure_kpa, max)?;
        let p = &self.pressures_kpa;
        let i = match p.partition_point(|&x| x <= pressure_kpa) {
            0 => 0,
            k if k >= p.len() => p.len() - 2,
            k => k - 1,
        };
        let t = (pressure_kpa - p[i]) / (p[i + 1] - p[i]);
        Ok(column[i] + t * (column[i + 1] - column[i]))
    }
}

impl ChamberResponse for ChamberTable {
    fn free_displacement_mm(&self, pressure_kpa: f64) -> Result<f64> {
        self.interpolate(pressure_kpa, &self.displacement_mm)
    }

    fn radial_stiffness_n_per_mm(&self, pressure_kpa: f64) -> Result<f64> {
        self.interpolate(pressure_kpa, &self.stiffness_n_per_mm)
    }

    fn max_pressure_kpa(&self) -> f64 {
        *self.pressures_kpa.last().expect("table has rows")
    }
}

/// Track set and the internal friction path between tracks and chambers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSet {
    pub n_tracks: usize,
    /// Track-to-lumen friction coefficient.
    pub mu_track_lumen: f64,
    /// Track-to-chamber friction coefficient.
    pub mu_track_chamber: f64,
    /// Radial stiffness of one track band, N/mm.
    #[serde(rename = "track_band_stiffness_N_per_mm")]
    pub track_band_stiffness_n_per_mm: f64,
    /// 0 = rigid chassis guides, 1 = fully deployable guides.
    pub guide_compliance: f64,
    pub max_guide_opening_deg: f64,
    /// Share of chamber pressure pressing the tracks onto the chamber.
    pub drag_coefficient: f64,
    pub chamber_contact_area_mm2: f64,
    #[serde(rename = "contact_threshold_N")]
    pub contact_threshold_n: f64,
}

impl TrackSet {
    pub fn validate(&self) -> Result<()> {
        if self.n_tracks < 3 {
            return Err(invalid("n_tracks", "need at least 3 tracks"));
        }
        for (v, name) in [
            (self.mu_track_lumen, "mu_track_lumen"),
            (self.mu_track_chamber, "mu_track_chamber"),
        ] {
            ensure_finite(v, name)?;
            if !(0.0..=2.0).contains(&v) {
                return Err(invalid(name, "must lie in [0, 2]"));
            }
        }
        for (v, name) in [
            (self.drag_coefficient, "drag_coefficient"),
            (self.chamber_contact_area_mm2, "chamber_contact_area_mm2"),
            (self.contact_threshold_n, "contact_threshold_N"),
        ] {
            ensure_finite(v, name)?;
            if v < 0.0 {
                return Err(invalid(name, "must be >= 0"));
            }
        }
        ensure_finite(
            self.track_band_stiffness_n_per_mm,
            "track_band_stiffness_N_per_mm",
        )?;
        if self.track_band_stiffness_n_per_mm <= 0.0 {
            return Err(invalid("track_band_stiffness_N_per_mm", "must be > 0"));
        }
        ensure_finite(self.guide_compliance, "guide_compliance")?;
        if !(0.0..=1.0).contains(&self.guide_compliance) {
            return Err(invalid("guide_compliance", "must lie in [0, 1]"));
        }
        ensure_finite(self.max_guide_opening_deg, "max_guide_opening_deg")?;
        if !(self.max_guide_opening_deg > 0.0 && self.max_guide_opening_deg <= 90.0) {
            return Err(invalid("max_guide_opening_deg", "must lie in (0, 90]"));
        }
        Ok(())
    }

    /// Angle of track `k`, measured from +x with +y up; track 0 is on top.
    pub fn angle(&self, k: usize) -> f64 {
        FRAC_PI_2 + 2.0 * PI * k as f64 / self.n_tracks as f64
    }
}

/// Rigid-body geometry and mass of the robot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotGeometry {
    /// Track outer radius with both chambers deflated.
    pub rest_radius_mm: f64,
    /// Axial distance between the two chamber centres.
    pub chamber_spacing_mm: f64,
    pub body_length_mm: f64,
    /// Camera distance ahead of the front chamber centre.
    pub nose_offset_mm: f64,
    pub mass_kg: f64,
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.rest_radius_mm, "rest_radius_mm"),
            (self.chamber_spacing_mm, "chamber_spacing_mm"),
            (self.body_length_mm, "body_length_mm"),
        ] {
            ensure_finite(v, name)?;
            if v <= 0.0 {
                return Err(invalid(name, "must be > 0"));
            }
        }
        ensure_finite(self.nose_offset_mm, "nose_offset_mm")?;
        ensure_finite(self.mass_kg, "mass_kg")?;
        if self.mass_kg < 0.0 {
            return Err(invalid("mass_kg", "must be >= 0"));
        }
        if self.chamber_spacing_mm > self.body_length_mm {
            return Err(invalid(
                "chamber_spacing_mm",
                "must not exceed body_length_mm",
            ));
        }
        Ok(())
    }

    pub fn weight_n(&self) -> f64 {
        self.mass_kg * GRAVITY_MPS2
    }

    /// Largest pitch angle a cylinder of the rest radius and body length can
    /// take inside a lumen of radius `lumen_radius_mm`, radians.
    pub fn max_tilt_rad(&self, lumen_radius_mm: f64) -> f64 {
        let (l, r) = (self.body_length_mm, self.rest_radius_mm);
        let ratio = 2.0 * lumen_radius_mm / (l * l + 4.0 * r * r).sqrt();
        if ratio >= 1.0 {
            FRAC_PI_2
        } else {
            ratio.asin() - (2.0 * r).atan2(l)
        }
    }
}

/// Everything needed to solve the contact at one cross-section pair.
#[derive(Clone, Copy, Debug)]
pub struct ContactProblem<'a> {
    /// Front and rear chamber pressures.
    pub pressures_kpa: [f64; 2],
    pub lumen_radius_mm: f64,
    pub wall: WallLaw,
    pub tracks: &'a TrackSet,
    pub geometry: &'a RobotGeometry,
    pub chamber: &'a dyn ChamberResponse,
    pub gravity: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    /// Track radius each chamber would reach without a wall.
    pub free_radius_mm: [f64; 2],
    /// Radius of the deformed wall (or of the tracks when not touching).
    pub effective_radius_mm: [f64; 2],
    /// Robot-side radial stiffness (chamber and bands in series).
    pub robot_stiffness_n_per_mm: [f64; 2],
    /// Ring force at the centred configuration.
    pub ring_force_n: [f64; 2],
    /// Downward shift of each chamber centre from the lumen axis.
    pub center_offset_mm: [f64; 2],
    /// Normal force on each track, summed over both chambers.
    pub track_normal_n: Vec<f64>,
    pub tracks_in_contact: usize,
    pub internal_drag_n: f64,
    /// Pitch angle, positive when the front is higher.
    pub tilt_deg: f64,
    /// The deflated robot is larger than the lumen.
    pub jammed: bool,
}

impl ContactState {
    pub fn total_normal_n(&self) -> f64 {
        self.track_normal_n.iter().sum()
    }
}

/// Restoring force of the wall ring for a uniform radial expansion `u`.
pub fn wall_ring_force(hoop_stiffness_n_per_mm: f64, lumen_radius_mm: f64, u_mm: f64) -> f64 {
    let r = lumen_radius_mm;
    let l = 1.0 + u_mm / r;
    hoop_stiffness_n_per_mm * r / 4.0 * (l - l.powi(-3))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingBalance {
    pub force_n: f64,
    pub wall_displacement_mm: f64,
}

/// Ring force transmitted when the free track radius exceeds the lumen radius
/// by `interference_mm`, with a robot of stiffness `robot_stiffness`.
pub fn ring_balance(
    interference_mm: f64,
    robot_stiffness: f64,
    wall: WallLaw,
    lumen_radius_mm: f64,
) -> RingBalance {
    if interference_mm <= 0.0 {
        return RingBalance {
            force_n: 0.0,
            wall_displacement_mm: 0.0,
        };
    }
    match wall {
        WallLaw::Rigid => RingBalance {
            force_n: robot_stiffness * interference_mm,
            wall_displacement_mm: 0.0,
        },
        WallLaw::Elastic {
            hoop_stiffness_n_per_mm: kw,
            ..
        } => {
            let f = |u: f64| {
                robot_stiffness * (interference_mm - u) - wall_ring_force(kw, lumen_radius_mm, u)
            };
            let u = brent(f, 0.0, interference_mm, 1e-12 * (1.0 + interference_mm));
            RingBalance {
                force_n: wall_ring_force(kw, lumen_radius_mm, u),
                wall_displacement_mm: u,
            }
        }
    }
}

/// Distance from a centre shifted down by `e` to the circle of radius `r`
/// along direction `theta`.
fn wall_distance(r: f64, e: f64, theta: f64) -> f64 {
    let c = theta.cos();
    e * theta.sin() + (r * r - e * e * c * c).max(0.0).sqrt()
}

fn series(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

/// Per-track normals of one chamber for a centre offset `e`.
fn chamber_normals(e: f64, free_radius: f64, k_robot: f64, p: &ContactProblem, out: &mut [f64]) {
    let n = p.tracks.n_tracks as f64;
    let preload = match p.wall {
        WallLaw::Elastic { preload_n, .. } => preload_n / (2.0 * n),
        WallLaw::Rigid => 0.0,
    };
    for (k, slot) in out.iter_mut().enumerate() {
        let d = wall_distance(p.lumen_radius_mm, e, p.tracks.angle(k));
        let g = ring_balance(free_radius - d, k_robot, p.wall, p.lumen_radius_mm).force_n;
        *slot = g / n + preload;
    }
}

fn vertical_support(
    e: f64,
    free_radius: f64,
    k_robot: f64,
    p: &ContactProblem,
    buf: &mut [f64],
) -> f64 {
    chamber_normals(e, free_radius, k_robot, p, buf);
    buf.iter()
        .enumerate()
        .map(|(k, nk)| -nk * p.tracks.angle(k).sin())
        .sum()
}

/// Internal drag between tracks and chambers, N.
pub fn internal_drag(pressures_kpa: [f64; 2], tracks: &TrackSet) -> f64 {
    tracks.mu_track_chamber
        * tracks.drag_coefficient
        * (pressures_kpa[0] + pressures_kpa[1])
        * 1e-3
        * tracks.chamber_contact_area_mm2
        * (1.0 - 0.5 * tracks.guide_compliance)
}

pub fn equilibrium_contact(p: &ContactProblem) -> Result<ContactState> {
    p.tracks.validate()?;
    p.geometry.validate()?;
    ensure_finite(p.lumen_radius_mm, "lumen_radius_mm")?;
    if p.lumen_radius_mm <= 0.0 {
        return Err(invalid("lumen_radius_mm", "must be > 0"));
    }
    if let WallLaw::Elastic {
        hoop_stiffness_n_per_mm,
        preload_n,
    } = p.wall
    {
        ensure_finite(hoop_stiffness_n_per_mm, "hoop_stiffness_N_per_mm")?;
        ensure_finite(preload_n, "collapse_preload_N")?;
        if hoop_stiffness_n_per_mm <= 0.0 || preload_n < 0.0 {
            return Err(invalid(
                "hoop_stiffness_N_per_mm",
                "need hoop stiffness > 0 and preload >= 0",
            ));
        }
    }
    let n = p.tracks.n_tracks;
    let r = p.lumen_radius_mm;
    let half_weight = if p.gravity {
        0.5 * p.geometry.weight_n()
    } else {
        0.0
    };
    let mut state = ContactState {
        free_radius_mm: [0.0; 2],
        effective_radius_mm: [0.0; 2],
        robot_stiffness_n_per_mm: [0.0; 2],
        ring_force_n: [0.0; 2],
        center_offset_mm: [0.0; 2],
        track_normal_n: vec![0.0; n],
        tracks_in_contact: 0,
        internal_drag_n: internal_drag(p.pressures_kpa, p.tracks),
        tilt_deg: 0.0,
        jammed: p.geometry.rest_radius_mm > r,
    };
    let mut buf = vec![0.0; n];
    for c in 0..2 {
        let pressure = p.pressures_kpa[c];
        let free = p.geometry.rest_radius_mm + p.chamber.free_displacement_mm(pressure)?;
        let k_robot = series(
            p.chamber.radial_stiffness_n_per_mm(pressure)?,
            n as f64 * p.tracks.track_band_stiffness_n_per_mm,
        );
        let centred = ring_balance(free - r, k_robot, p.wall, r);
        let e = if half_weight > 0.0 {
            let h =
                |e: f64, buf: &mut [f64]| vertical_support(e, free, k_robot, p, buf) - half_weight;
            let cap = 0.999 * r;
            let mut hi = ((r - free).max(0.0) + 1.0).min(cap);
            while h(hi, &mut buf) <= 0.0 && hi < cap {
                hi = (2.0 * hi).min(cap);
            }
            if h(hi, &mut buf) <= 0.0 {
                hi
            } else {
                brent(|e| h(e, &mut buf), 0.0, hi, 1e-10)
            }
        } else {
            0.0
        };
        chamber_normals(e, free, k_robot, p, &mut buf);
        for (total, nk) in state.track_normal_n.iter_mut().zip(&buf) {
            *total += nk;
        }
        state.free_radius_mm[c] = free;
        state.effective_radius_mm[c] = if free > r {
            r + centred.wall_displacement_mm
        } else {
            free
        };
        state.robot_stiffness_n_per_mm[c] = k_robot;
        state.ring_force_n[c] = centred.force_n;
        state.center_offset_mm[c] = e;
    }
    state.tracks_in_contact = state
        .track_normal_n
        .iter()
        .filter(|&&f| f > p.tracks.contact_threshold_n)
        .count();
    if !state.jammed && p.gravity {
        // Chamber axes rest at R - e above the lowest wall point.
        let rise = state.center_offset_mm[1] - state.center_offset_mm[0];
        let tilt = rise.atan2(p.geometry.chamber_spacing_mm);
        let max = p.geometry.max_tilt_rad(r);
        state.tilt_deg = tilt.clamp(-max, max).to_degrees();
    }
    Ok(state)
}

/// Pitch angle of the robot for the given pressures, degrees.
pub fn tilt_angle(p: &ContactProblem) -> Result<f64> {
    Ok(equilibrium_contact(p)?.tilt_deg)
}

/// Vertical offset of the camera from the lumen axis, mm (positive up).
pub fn camera_offset_mm(contact: &ContactState, geometry: &RobotGeometry) -> f64 {
    -contact.center_offset_mm[0] + geometry.nose_offset_mm * contact.tilt_deg.to_radians().tan()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TractionResult {
    /// Axial force the tracks can deliver to the wall.
    pub available_n: f64,
    /// Friction limit mu_t * sum N.
    pub friction_limit_n: f64,
    /// Drivetrain axial force left after internal drag.
    pub usable_axial_n: f64,
    pub required_n: f64,
    pub margin_n: f64,
    pub stalled: bool,
}

/// Traction budget; a tie between available and required force counts as a stall.
pub fn traction(
    contact: &ContactState,
    tracks: &TrackSet,
    forces: &TransmissionForces,
    required_n: f64,
) -> TractionResult {
    let friction_limit = tracks.mu_track_lumen * contact.total_normal_n();
    let usable = (forces.axial_n - contact.internal_drag_n).max(0.0);
    let available = friction_limit.min(usable);
    TractionResult {
        available_n: available,
        friction_limit_n: friction_limit,
        usable_axial_n: usable,
        required_n,
        margin_n: available - required_n,
        stalled: usable <= 0.0 || available <= required_n,
    }
}

/// Smallest pressure on a `step_kpa` grid (both chambers equal) that brings
/// at least `min_tracks` tracks into contact, or `None` below the chamber limit.
pub fn matched_inflation(
    base: &ContactProblem,
    min_tracks: usize,
    step_kpa: f64,
) -> Result<Option<f64>> {
    if step_kpa <= 0.0 {
        return Err(invalid("step_kpa", "must be > 0"));
    }
    let max = base.chamber.max_pressure_kpa();
    let mut k = 0;
    loop {
        let p = k as f64 * step_kpa;
        if p > max + 1e-9 {
            return Ok(None);
        }
        let probe = ContactProblem {
            pressures_kpa: [p, p],
            ..*base
        };
        if equilibrium_contact(&probe)?.tracks_in_contact >= min_tracks {
            return Ok(Some(p));
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tracks() -> TrackSet {
        TrackSet {
            n_tracks: 6,
            mu_track_lumen: 1.2,
            mu_track_chamber: 0.5,
            track_band_stiffness_n_per_mm: 20.0,
            guide_compliance: 1.0,
            max_guide_opening_deg: 60.0,
            drag_coefficient: 1.0,
            chamber_contact_area_mm2: 600.0,
            contact_threshold_n: 0.01,
        }
    }

    pub(crate) fn geometry() -> RobotGeometry {
        RobotGeometry {
            rest_radius_mm: 32.5,
            chamber_spacing_mm: 82.0,
            body_length_mm: 110.0,
            nose_offset_mm: 20.0,
            mass_kg: 0.06,
        }
    }

    const CHAMBER: LinearChamber = LinearChamber {
        mm_per_kpa: 1.0,
        stiffness_n_per_mm: 20.0,
        max_pressure_kpa: 20.0,
    };

    fn problem<'a>(
        p: [f64; 2],
        r: f64,
        wall: WallLaw,
        t: &'a TrackSet,
        g: &'a RobotGeometry,
        gravity: bool,
    ) -> ContactProblem<'a> {
        ContactProblem {
            pressures_kpa: p,
            lumen_radius_mm: r,
            wall,
            tracks: t,
            geometry: g,
            chamber: &CHAMBER,
            gravity,
        }
    }

    #[test]
    fn wall_ring_is_linear_at_small_strain() {
        let f = wall_ring_force(0.15, 42.0, 1e-4);
        assert_relative_eq!(f / 1e-4, 0.15, max_relative = 1e-4);
        assert_eq!(wall_ring_force(0.15, 42.0, 0.0), 0.0);
    }

    #[test]
    fn rigid_wall_takes_the_whole_interference() {
        let b = ring_balance(2.0, 10.0, WallLaw::Rigid, 42.0);
        assert_eq!(b.force_n, 20.0);
        assert_eq!(b.wall_displacement_mm, 0.0);
        assert_eq!(ring_balance(-1.0, 10.0, WallLaw::Rigid, 42.0).force_n, 0.0);
    }

    #[test]
    fn series_springs_split_interference() {
        let wall = WallLaw::Elastic {
            hoop_stiffness_n_per_mm: 10.0,
            preload_n: 0.0,
        };
        let b = ring_balance(1e-3, 10.0, wall, 1e6);
        assert_relative_eq!(b.wall_displacement_mm, 5e-4, max_relative = 1e-6);
        assert_relative_eq!(b.force_n, 5e-3, max_relative = 1e-6);
    }

    #[test]
    fn centred_contact_has_equal_track_loads() {
        let (t, g) = (tracks(), geometry());
        let s = equilibrium_contact(&problem([12.0, 12.0], 42.0, WallLaw::Rigid, &t, &g, false))
            .unwrap();
        let k = series(20.0, 120.0);
        for &f in &s.track_normal_n {
            assert_relative_eq!(f, 2.0 * k * 2.5 / 6.0, max_relative = 1e-12);
        }
        assert_eq!(s.tracks_in_contact, 6);
        assert_eq!(s.effective_radius_mm, [42.0, 42.0]);
        assert_eq!(s.tilt_deg, 0.0);
    }

    #[test]
    fn no_contact_without_interference_or_gravity() {
        let (t, g) = (tracks(), geometry());
        let s =
            equilibrium_contact(&problem([2.0, 2.0], 42.0, WallLaw::Rigid, &t, &g, false)).unwrap();
        assert_eq!(s.total_normal_n(), 0.0);
        assert_eq!(s.tracks_in_contact, 0);
        assert_eq!(s.effective_radius_mm, [34.5, 34.5]);
    }

    #[test]
    fn gravity_is_carried_by_the_wall() {
        let (t, g) = (tracks(), geometry());
        for p in [0.0, 5.0, 12.0] {
            let s =
                equilibrium_contact(&problem([p, p], 42.0, WallLaw::Rigid, &t, &g, true)).unwrap();
            let up: f64 = s
                .track_normal_n
                .iter()
                .enumerate()
                .map(|(k, n)| -n * t.angle(k).sin())
                .sum();
            assert_relative_eq!(up, g.weight_n(), max_relative = 1e-8);
            assert!(s.center_offset_mm[0] > 0.0);
        }
    }

    #[test]
    fn deflated_robot_rests_on_the_bottom() {
        let (t, g) = (tracks(), geometry());
        let s =
            equilibrium_contact(&problem([0.0, 0.0], 42.0, WallLaw::Rigid, &t, &g, true)).unwrap();
        assert_eq!(s.tracks_in_contact, 1);
        assert!(s.center_offset_mm[0] > 42.0 - 32.5);
    }

    #[test]
    fn tilt_follows_the_height_difference_and_is_antisymmetric() {
        let (t, g) = (tracks(), geometry());
        let a = tilt_angle(&problem([14.5, 0.0], 47.0, WallLaw::Rigid, &t, &g, true)).unwrap();
        let b = tilt_angle(&problem([0.0, 14.5], 47.0, WallLaw::Rigid, &t, &g, true)).unwrap();
        assert_eq!(a, -b);
        assert!((a - (14.5f64).atan2(82.0).to_degrees()).abs() < 0.2);
        assert_eq!(
            tilt_angle(&problem([14.5, 0.0], 47.0, WallLaw::Rigid, &t, &g, false)).unwrap(),
            0.0
        );
    }

    #[test]
    fn tilt_is_clamped_by_the_lumen() {
        let (t, mut g) = (tracks(), geometry());
        g.chamber_spacing_mm = 20.0;
        g.body_length_mm = 110.0;
        let a = tilt_angle(&problem([14.5, 0.0], 47.0, WallLaw::Rigid, &t, &g, true)).unwrap();
        assert_relative_eq!(a, g.max_tilt_rad(47.0).to_degrees(), max_relative = 1e-12);
    }

    #[test]
    fn jammed_when_larger_than_the_lumen() {
        let (t, g) = (tracks(), geometry());
        let s =
            equilibrium_contact(&problem([0.0, 10.0], 30.0, WallLaw::Rigid, &t, &g, true)).unwrap();
        assert!(s.jammed);
        assert_eq!(s.tilt_deg, 0.0);
    }

    #[test]
    fn preload_adds_to_every_track() {
        let (t, g) = (tracks(), geometry());
        let wall = WallLaw::Elastic {
            hoop_stiffness_n_per_mm: 0.15,
            preload_n: 0.6,
        };
        let s = equilibrium_contact(&problem([0.0, 0.0], 42.5, wall, &t, &g, false)).unwrap();
        for &f in &s.track_normal_n {
            assert_relative_eq!(f, 0.1, max_relative = 1e-12);
        }
    }

    #[test]
    fn compliant_contact_matches_a_displacement_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (t, g) = (tracks(), geometry());
        for _ in 0..20 {
            let r = rng.gen_range(38.0..48.0);
            let kw = rng.gen_range(0.05..5.0);
            let p = rng.gen_range(0.0..20.0);
            let wall = WallLaw::Elastic {
                hoop_stiffness_n_per_mm: kw,
                preload_n: 0.0,
            };
            let s = equilibrium_contact(&problem([p, p], r, wall, &t, &g, false)).unwrap();
            let delta = s.free_radius_mm[0] - r;
            if delta <= 0.0 {
                continue;
            }
            let u = s.effective_radius_mm[0] - r;
            let kr = s.robot_stiffness_n_per_mm[0];
            let residual = |u: f64| kr * (delta - u) - wall_ring_force(kw, r, u);
            assert!(residual(u).abs() < 1e-3);
            let steps = (delta / 1e-3).ceil() as usize;
            let u_scan = (0..=steps)
                .map(|i| (i as f64 * 1e-3).min(delta))
                .min_by(|a, b| residual(*a).abs().total_cmp(&residual(*b).abs()))
                .unwrap();
            assert!((u - u_scan).abs() <= 1e-3);
        }
    }

    #[test]
    fn drag_is_linear_in_total_pressure() {
        let t = tracks();
        assert_eq!(internal_drag([0.0, 0.0], &t), 0.0);
        assert_relative_eq!(
            internal_drag([10.0, 6.0], &t),
            16.0 * 0.15,
            max_relative = 1e-12
        );
        let mut guided = t;
        guided.guide_compliance = 0.0;
        assert_relative_eq!(
            internal_drag([10.0, 6.0], &guided),
            2.0 * internal_drag([10.0, 6.0], &t),
            max_relative = 1e-12
        );
    }

    #[test]
    fn traction_is_the_lesser_limit_and_ties_stall() {
        let (t, g) = (tracks(), geometry());
        let s = equilibrium_contact(&problem([12.0, 12.0], 42.0, WallLaw::Rigid, &t, &g, false))
            .unwrap();
        let forces = TransmissionForces {
            tangential_n: 0.0,
            axial_n: 5.0,
            radial_n: 0.0,
            gearhead_torque_nmm: 0.0,
        };
        let tr = traction(&s, &t, &forces, 0.0);
        assert_relative_eq!(tr.usable_axial_n, 5.0 - 24.0 * 0.15, max_relative = 1e-12);
        assert_eq!(tr.available_n, tr.usable_axial_n.min(tr.friction_limit_n));
        let tie = traction(&s, &t, &forces, tr.available_n);
        assert!(tie.stalled);
        assert!(!traction(&s, &t, &forces, tr.available_n - 1e-9).stalled);
    }

    #[test]
    fn matched_inflation_finds_the_first_full_contact() {
        let (t, g) = (tracks(), geometry());
        let base = problem([0.0, 0.0], 42.0, WallLaw::Rigid, &t, &g, true);
        let p = matched_inflation(&base, 5, 0.25).unwrap().unwrap();
        let at = equilibrium_contact(&ContactProblem {
            pressures_kpa: [p, p],
            ..base
        })
        .unwrap();
        let below = equilibrium_contact(&ContactProblem {
            pressures_kpa: [p - 0.25, p - 0.25],
            ..base
        })
        .unwrap();
        assert!(at.tracks_in_contact >= 5);
        assert!(below.tracks_in_contact < 5);
        let wide = problem([0.0, 0.0], 60.0, WallLaw::Rigid, &t, &g, true);
        assert_eq!(matched_inflation(&wide, 5, 0.25).unwrap(), None);
    }

    #[test]
    fn table_interpolates_and_reports_limits() {
        let mut table = ChamberTable::from_rows(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 1.0, 3.0],
            vec![10.0, 8.0, 6.0],
        )
        .unwrap();
        assert_relative_eq!(table.free_displacement_mm(1.5).unwrap(), 2.0);
        assert_relative_eq!(table.radial_stiffness_n_per_mm(0.25).unwrap(), 9.5);
        assert_eq!(table.free_displacement_mm(2.0).unwrap(), 3.0);
        assert!(matches!(
            table.free_displacement_mm(3.0),
            Err(Error::InvalidParameter { .. })
        ));
        table.over_inflation = Some((2.5, 3.1, 3.0));
        assert!(matches!(
            table.free_displacement_mm(3.0),
            Err(Error::OverInflation { .. })
        ));
        assert!(table.free_displacement_mm(-1.0).is_err());
        assert!(ChamberTable::from_rows(vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }
}
