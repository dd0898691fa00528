//! Reduced-order axisymmetric model of one toroidal inflatable chamber.
//!
//! The chamber cross-section is a closed polyline of membrane segments. Each
//! segment stores a first-order Ogden strain energy evaluated from its
//! meridional stretch (segment elongation) and circumferential stretch
//! (radius ratio); incompressibility gives the thickness stretch. A small
//! meridional bending term regularizes the otherwise inextensional modes of
//! the unpressurized sheet. Equilibria minimize
//!
//! ```text
//! E = sum W(l1, l2) t A0 + bending - p V + chassis penalty - external work
//! ```
//!
//! with flange nodes pinned and a quadratic penalty keeping nodes outside the
//! chassis cylinder.

mod energy;
mod mesh;
mod newton;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use energy::{EnergyModel, Loading};
use mesh::RestMesh;
use newton::{Newton, NewtonOptions};

/// First-order Ogden material for the chamber silicone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OgdenMaterial {
    /// Initial shear modulus.
    #[serde(rename = "mu_kPa")]
    pub mu_kpa: f64,
    pub alpha: f64,
    pub thickness_mm: f64,
}

impl Default for OgdenMaterial {
    /// Soft thick-walled silicone fit; see the calibration example.
    fn default() -> Self {
        OgdenMaterial {
            mu_kpa: 28.0,
            alpha: 3.5,
            thickness_mm: 6.0,
        }
    }
}

impl OgdenMaterial {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.mu_kpa, "mu_kpa")?;
        ensure_finite(self.alpha, "alpha")?;
        ensure_finite(self.thickness_mm, "thickness_mm")?;
        if self.mu_kpa <= 0.0 {
            return Err(invalid("mu_kpa", "must be > 0"));
        }
        if self.alpha == 0.0 {
            return Err(invalid("alpha", "must be non-zero"));
        }
        if self.thickness_mm <= 0.0 {
            return Err(invalid("thickness_mm", "must be > 0"));
        }
        Ok(())
    }

    /// Strain energy density for principal stretches with l3 = 1/(l1 l2), kPa.
    pub fn strain_energy(&self, l1: f64, l2: f64) -> f64 {
        let a = self.alpha;
        2.0 * self.mu_kpa / (a * a) * (l1.powf(a) + l2.powf(a) + (l1 * l2).powf(-a) - 3.0)
    }
}

/// Where the chamber is clamped to the chassis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlangeStyle {
    /// Central flange: clamped at the middle of the inner wall.
    #[serde(rename = "CF")]
    Cf,
    /// Lateral flanges: clamped at both axial ends of the inner wall.
    #[serde(rename = "LF")]
    Lf,
}

/// Rest geometry of one chamber cross-section.
///
/// Both flange styles share the same rounded-rectangle loop (and therefore
/// the same rest volume); they differ only in which inner-wall nodes are
/// clamped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChamberProfile {
    pub flange_style: FlangeStyle,
    pub footprint_width_mm: f64,
    pub rest_outer_radius_mm: f64,
    pub chassis_radius_mm: f64,
    pub corner_radius_mm: f64,
    pub flange_width_mm: f64,
    pub n_nodes: usize,
}

impl ChamberProfile {
    pub fn default_for(style: FlangeStyle) -> Self {
        ChamberProfile {
            flange_style: style,
            footprint_width_mm: 28.0,
            rest_outer_radius_mm: 29.0,
            chassis_radius_mm: 22.0,
            corner_radius_mm: 2.5,
            flange_width_mm: 4.0,
            n_nodes: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.footprint_width_mm, "footprint_width_mm"),
            (self.rest_outer_radius_mm, "rest_outer_radius_mm"),
            (self.chassis_radius_mm, "chassis_radius_mm"),
            (self.corner_radius_mm, "corner_radius_mm"),
            (self.flange_width_mm, "flange_width_mm"),
        ] {
            ensure_finite(v, name)?;
        }
        if self.chassis_radius_mm <= 0.0 {
            return Err(invalid("chassis_radius_mm", "must be > 0"));
        }
        if self.rest_outer_radius_mm <= self.chassis_radius_mm {
            return Err(invalid(
                "rest_outer_radius_mm",
                "must exceed chassis_radius_mm",
            ));
        }
        if self.n_nodes < 16 {
            return Err(invalid("n_nodes", "must be >= 16"));
        }
        let height = self.rest_outer_radius_mm - self.chassis_radius_mm;
        if self.corner_radius_mm <= 0.0
            || 2.0 * self.corner_radius_mm > height
            || 2.0 * self.corner_radius_mm > self.footprint_width_mm
        {
            return Err(invalid(
                "corner_radius_mm",
                "must be > 0 and at most half the chamber height and width",
            ));
        }
        let flat = 0.5 * self.footprint_width_mm - self.corner_radius_mm;
        if self.flange_width_mm <= 0.0 || self.flange_width_mm >= flat {
            return Err(invalid(
                "flange_width_mm",
                "must be > 0 and fit on the inner wall",
            ));
        }
        Ok(())
    }

    /// Exact rest volume of the rounded-rectangle loop, mm^3.
    pub fn footprint_volume(&self) -> f64 {
        use std::f64::consts::PI;
        let rc = self.chassis_radius_mm;
        let r0 = self.rest_outer_radius_mm;
        let w = self.footprint_width_mm;
        let rho = self.corner_radius_mm;
        // Full rectangle minus the four corner cut-outs (square minus quarter disc).
        let rect = PI * (r0 * r0 - rc * rc) * w;
        let cut_area = rho * rho * (1.0 - PI / 4.0);
        // Centroid of a corner cut-out sits 2 rho / (3 (4 - pi)) * ... from its corner;
        // by symmetry about the corner diagonal the radial offset is rho*(10 - 3 pi)/(3 (4 - pi)).
        let offset = rho * (10.0 - 3.0 * PI) / (3.0 * (4.0 - PI));
        let inner_cut = 2.0 * 2.0 * PI * (rc + offset) * cut_area;
        let outer_cut = 2.0 * 2.0 * PI * (r0 - offset) * cut_area;
        rect - inner_cut - outer_cut
    }
}

/// Equilibrium cross-section at one pressure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamberShape {
    /// (radial_mm, axial_mm) positions along the loop.
    pub nodes: Vec<[f64; 2]>,
    pub pressure_kpa: f64,
    pub enclosed_volume_mm3: f64,
    pub max_radial_displacement_mm: f64,
    pub chassis_contact_pressure_kpa: f64,
    pub chassis_contact_area_mm2: f64,
    pub max_principal_stress_kpa: f64,
    pub max_stretch: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StiffnessResult {
    pub shear_force_n: f64,
    pub lateral_displacement_mm: f64,
    pub axial_stiffness_n_per_mm: f64,
}

/// Numerical settings of the chamber solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Chassis penalty modulus, N/mm^3.
    #[serde(rename = "penalty_N_per_mm3")]
    pub penalty_n_per_mm3: f64,
    /// Largest principal stretch accepted before reporting over-inflation.
    pub stretch_cap: f64,
    pub max_iterations: usize,
    /// Largest pressure increment of the internal continuation, kPa.
    #[serde(rename = "max_pressure_step_kPa")]
    pub max_pressure_step_kpa: f64,
    /// Imposed crown displacement for the radial secant stiffness, mm.
    pub radial_probe_mm: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            penalty_n_per_mm3: 5.0,
            stretch_cap: 3.0,
            max_iterations: 5000,
            max_pressure_step_kpa: 1.0,
            radial_probe_mm: 0.1,
        }
    }
}

const IMPOSED_STIFFNESS: f64 = 1e4;
const DISPLACEMENT_FLOOR_MM: f64 = 1e-9;

/// Stateful chamber solver: keeps the last equilibrium so that successive
/// calls continue along the loading path.
#[derive(Clone, Debug)]
pub struct ChamberSolver {
    model: EnergyModel,
    settings: SolverSettings,
    rest: Vec<[f64; 2]>,
    rest_max_r: f64,
    state: Vec<[f64; 2]>,
    pressure_kpa: f64,
    include_pressure: bool,
}

impl ChamberSolver {
    pub fn new(
        profile: &ChamberProfile,
        material: &OgdenMaterial,
        settings: SolverSettings,
    ) -> Result<Self> {
        profile.validate()?;
        material.validate()?;
        let mesh = RestMesh::build(profile);
        Ok(Self::from_mesh(mesh, *material, settings))
    }

    fn from_mesh(mesh: RestMesh, material: OgdenMaterial, settings: SolverSettings) -> Self {
        let rest = mesh.nodes.clone();
        let rest_max_r = rest.iter().map(|p| p[0]).fold(f64::MIN, f64::max);
        let model = EnergyModel::new(mesh, material, settings.penalty_n_per_mm3);
        ChamberSolver {
            model,
            settings,
            state: rest.clone(),
            rest,
            rest_max_r,
            pressure_kpa: 0.0,
            include_pressure: true,
        }
    }

    /// Drops the pneumatic term; used to isolate the purely elastic response.
    pub fn without_pressure_term(mut self) -> Self {
        self.include_pressure = false;
        self
    }

    pub fn pressure_kpa(&self) -> f64 {
        self.pressure_kpa
    }

    pub fn reset(&mut self) {
        self.state = self.rest.clone();
        self.pressure_kpa = 0.0;
    }

    fn tolerance(&self) -> f64 {
        1e-6 * self.model.material.mu_kpa * self.model.material.thickness_mm
    }

    fn options(&self) -> NewtonOptions {
        NewtonOptions {
            tolerance: self.tolerance(),
            max_iterations: self.settings.max_iterations,
            max_step: 1.0,
        }
    }

    fn loading(&self, pressure_kpa: f64) -> Loading {
        Loading {
            pressure_kpa,
            include_pressure: self.include_pressure,
            ..Loading::default()
        }
    }

    fn solve(&self, x: &mut Vec<[f64; 2]>, load: &Loading) -> Result<(usize, f64)> {
        let report = Newton::new(&self.model).minimize(x, load, &self.options());
        if !report.converged {
            return Err(Error::NonConvergence {
                pressure_kpa: load.pressure_kpa,
                iterations: report.iterations,
                gradient_norm: report.gradient_norm,
                energy: report.energy,
            });
        }
        Ok((report.iterations, report.gradient_norm))
    }

    fn check_stretch(&self, x: &[[f64; 2]], pressure_kpa: f64) -> Result<f64> {
        let stretch = self.model.max_stretch(x);
        if stretch > self.settings.stretch_cap {
            return Err(Error::OverInflation {
                pressure_kpa,
                stretch,
                cap: self.settings.stretch_cap,
            });
        }
        Ok(stretch)
    }

    /// Moves the equilibrium to `pressure_kpa`, continuing from the current state.
    pub fn inflate(&mut self, pressure_kpa: f64) -> Result<ChamberShape> {
        ensure_finite(pressure_kpa, "pressure_kpa")?;
        if pressure_kpa < 0.0 {
            return Err(invalid("pressure_kpa", "must be >= 0"));
        }
        let start = self.pressure_kpa;
        let span = pressure_kpa - start;
        let steps = ((span.abs() / self.settings.max_pressure_step_kpa).ceil() as usize).max(1);
        let mut x = self.state.clone();
        let mut iterations = 0;
        let mut gnorm = 0.0;
        for k in 1..=steps {
            let p = start + span * k as f64 / steps as f64;
            let (it, g) = self.solve(&mut x, &self.loading(p))?;
            iterations += it;
            gnorm = g;
            self.check_stretch(&x, p)?;
        }
        self.state = x;
        self.pressure_kpa = pressure_kpa;
        Ok(self.describe(&self.state, pressure_kpa, iterations, gnorm))
    }

    fn describe(
        &self,
        x: &[[f64; 2]],
        pressure_kpa: f64,
        iterations: usize,
        gnorm: f64,
    ) -> ChamberShape {
        let rc = self.model.mesh.chassis_radius;
        let mut contact_pressure: f64 = 0.0;
        let mut contact_area = 0.0;
        for (i, p) in x.iter().enumerate() {
            if !self.model.mesh.pinned[i] && p[0] < rc {
                contact_pressure = contact_pressure.max(self.model.penalty * (rc - p[0]) * 1e3);
                contact_area += self.model.contact_area(i);
            }
        }
        let max_r = x.iter().map(|p| p[0]).fold(f64::MIN, f64::max);
        ChamberShape {
            nodes: x.to_vec(),
            pressure_kpa,
            enclosed_volume_mm3: EnergyModel::volume(x),
            max_radial_displacement_mm: max_r - self.rest_max_r,
            chassis_contact_pressure_kpa: contact_pressure,
            chassis_contact_area_mm2: contact_area,
            max_principal_stress_kpa: self.model.max_principal_stress(x),
            max_stretch: self.model.max_stretch(x),
            gradient_norm: gnorm,
            iterations,
        }
    }

    /// Total potential energy of the current equilibrium, N*mm.
    pub fn energy(&self) -> f64 {
        self.model
            .eval(&self.state, &self.loading(self.pressure_kpa), None)
    }

    /// Largest deviation of the analytic energy gradient from central
    /// differences with step `h_mm`, relative to the largest gradient
    /// component. Evaluated off equilibrium: the current state is displaced
    /// by a fixed pattern of amplitude `offset_mm`, which also pushes some
    /// nodes into the chassis.
    pub fn gradient_check(&self, offset_mm: f64, h_mm: f64) -> f64 {
        let x: Vec<[f64; 2]> = self
            .state
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let t = i as f64;
                [
                    p[0] + offset_mm * (1.7 * t).sin(),
                    p[1] + offset_mm * (2.3 * t).cos(),
                ]
            })
            .collect();
        let load = self.loading(self.pressure_kpa);
        let mut g = vec![[0.0; 2]; x.len()];
        self.model.eval(&x, &load, Some(&mut g));
        let scale = g
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        let mut xp = x.clone();
        for i in 0..x.len() {
            for c in 0..2 {
                xp[i][c] = x[i][c] + h_mm;
                let up = self.model.eval(&xp, &load, None);
                xp[i][c] = x[i][c] - h_mm;
                let down = self.model.eval(&xp, &load, None);
                xp[i][c] = x[i][c];
                worst = worst.max(((up - down) / (2.0 * h_mm) - g[i][c]).abs() / scale);
            }
        }
        worst
    }

    /// Axial stiffness under a shear force spread evenly over the crown nodes.
    pub fn axial_stiffness(
        &mut self,
        pressure_kpa: f64,
        shear_force_n: f64,
    ) -> Result<StiffnessResult> {
        ensure_finite(shear_force_n, "shear_force_n")?;
        if shear_force_n <= 0.0 {
            return Err(invalid("shear_force_n", "must be > 0"));
        }
        self.inflate(pressure_kpa)?;
        let crown: Vec<usize> = (0..self.model.n())
            .filter(|&i| self.model.mesh.crown[i])
            .collect();
        let mut load = self.loading(pressure_kpa);
        load.crown_axial_force = shear_force_n / crown.len() as f64;
        let mut x = self.state.clone();
        self.solve(&mut x, &load)?;
        let d = crown
            .iter()
            .map(|&i| (x[i][1] - self.state[i][1]).abs())
            .fold(0.0, f64::max);
        if d < DISPLACEMENT_FLOOR_MM {
            return Err(Error::StiffnessNotResolvable { displacement_mm: d });
        }
        Ok(StiffnessResult {
            shear_force_n,
            lateral_displacement_mm: d,
            axial_stiffness_n_per_mm: shear_force_n / d,
        })
    }

    /// Restoring ring force (N) when the crown band is displaced radially by
    /// `offset_mm` (negative = compression) from the current equilibrium,
    /// together with the realized mean displacement.
    fn crown_reaction(&self, offset_mm: f64) -> Result<(f64, f64)> {
        let crown: Vec<usize> = (0..self.model.n())
            .filter(|&i| self.model.mesh.crown[i])
            .collect();
        let mut load = self.loading(self.pressure_kpa);
        load.imposed_stiffness = IMPOSED_STIFFNESS;
        load.imposed_radius = crown
            .iter()
            .map(|&i| (i, self.state[i][0] + offset_mm))
            .collect();
        let mut x = self.state.clone();
        self.solve(&mut x, &load)?;
        let mut force = 0.0;
        let mut moved = 0.0;
        for &(i, target) in &load.imposed_radius {
            force += IMPOSED_STIFFNESS * (x[i][0] - target);
            moved += x[i][0] - self.state[i][0];
        }
        Ok((force, moved / crown.len() as f64))
    }

    /// Radial secant stiffness of the ring (N/mm) for a small compression of
    /// the crown about the free-inflation shape at `pressure_kpa`.
    pub fn radial_secant_stiffness(&mut self, pressure_kpa: f64) -> Result<f64> {
        self.inflate(pressure_kpa)?;
        let (force, moved) = self.crown_reaction(-self.settings.radial_probe_mm)?;
        Ok(force / -moved)
    }

    /// Secant stiffness for a small outward pull of the crown, N/mm.
    pub fn radial_extension_stiffness(&mut self, pressure_kpa: f64) -> Result<f64> {
        self.inflate(pressure_kpa)?;
        let (force, moved) = self.crown_reaction(self.settings.radial_probe_mm)?;
        Ok(-force / moved)
    }
}

/// Equilibrium shape at `pressure_kpa`, loaded monotonically from rest.
pub fn inflate(
    profile: &ChamberProfile,
    material: &OgdenMaterial,
    pressure_kpa: f64,
) -> Result<ChamberShape> {
    ChamberSolver::new(profile, material, SolverSettings::default())?.inflate(pressure_kpa)
}

/// One `(pressure_kpa, max_radial_displacement_mm)` row per pressure,
/// each warm-started from the previous equilibrium.
pub fn pressure_curve(
    profile: &ChamberProfile,
    material: &OgdenMaterial,
    pressures: &[f64],
) -> Result<Vec<(f64, f64)>> {
    validate_sweep(pressures)?;
    let mut solver = ChamberSolver::new(profile, material, SolverSettings::default())?;
    pressures
        .iter()
        .map(|&p| {
            solver
                .inflate(p)
                .map(|s| (p, s.max_radial_displacement_mm))
                .map_err(|e| Error::Sweep {
                    pressure_kpa: p,
                    source: Box::new(e),
                })
        })
        .collect()
}

pub(crate) fn validate_sweep(pressures: &[f64]) -> Result<()> {
    if pressures.is_empty() {
        return Err(invalid("pressures", "must not be empty"));
    }
    for &p in pressures {
        ensure_finite(p, "pressures")?;
    }
    if pressures[0] < 0.0 {
        return Err(invalid("pressures", "must start at or above 0"));
    }
    if pressures.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("pressures", "must be strictly increasing"));
    }
    Ok(())
}

pub fn axial_stiffness(
    profile: &ChamberProfile,
    material: &OgdenMaterial,
    pressure_kpa: f64,
    shear_force_n: f64,
) -> Result<StiffnessResult> {
    ChamberSolver::new(profile, material, SolverSettings::default())?
        .axial_stiffness(pressure_kpa, shear_force_n)
}

pub fn radial_secant_stiffness(
    profile: &ChamberProfile,
    material: &OgdenMaterial,
    pressure_kpa: f64,
) -> Result<f64> {
    ChamberSolver::new(profile, material, SolverSettings::default())?
        .radial_secant_stiffness(pressure_kpa)
}

#[cfg(test)]
mod tests;
