//! Total potential energy of the discretized chamber and its analytic gradient.
//!
//! Units: lengths in mm, forces in N, energies in N*mm. Material moduli and
//! pressures enter in kPa and are scaled by 1e-3 to N/mm^2.

use std::f64::consts::PI;

use super::mesh::RestMesh;
use super::OgdenMaterial;

const KPA: f64 = 1e-3;

/// Loads and constraints applied on top of the membrane and bending energy.
#[derive(Clone, Debug, Default)]
pub(crate) struct Loading {
    pub pressure_kpa: f64,
    pub include_pressure: bool,
    /// Axial force on each crown node, N.
    pub crown_axial_force: f64,
    /// Bilateral radial springs `(node, target_r)` with a shared stiffness.
    pub imposed_radius: Vec<(usize, f64)>,
    pub imposed_stiffness: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct EnergyModel {
    pub mesh: RestMesh,
    pub material: OgdenMaterial,
    /// Chassis penalty modulus, N/mm^3 (contact pressure per mm of penetration).
    pub penalty: f64,
    seg_len0: Vec<f64>,
    seg_rho0: Vec<f64>,
    seg_area0: Vec<f64>,
    node_theta0: Vec<f64>,
    node_bend: Vec<f64>,
    contact_area0: Vec<f64>,
}

#[inline]
fn turning_angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.atan2(dot)
}

#[inline]
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

impl EnergyModel {
    pub fn new(mesh: RestMesh, material: OgdenMaterial, penalty: f64) -> Self {
        let n = mesh.len();
        let x = &mesh.nodes;
        let mut seg_len0 = Vec::with_capacity(n);
        let mut seg_rho0 = Vec::with_capacity(n);
        let mut seg_area0 = Vec::with_capacity(n);
        for i in 0..n {
            let j = (i + 1) % n;
            let d = sub(x[j], x[i]);
            let l0 = d[0].hypot(d[1]);
            let rho0 = 0.5 * (x[i][0] + x[j][0]);
            seg_len0.push(l0);
            seg_rho0.push(rho0);
            seg_area0.push(2.0 * PI * rho0 * l0);
        }
        // Flexural rigidity of an incompressible sheet: E t^3 / 12(1 - 1/4) with E = 3 mu.
        let d_flex = material.mu_kpa * KPA * material.thickness_mm.powi(3) / 3.0;
        let mut node_theta0 = Vec::with_capacity(n);
        let mut node_bend = Vec::with_capacity(n);
        let mut contact_area0 = Vec::with_capacity(n);
        for i in 0..n {
            let p = (i + n - 1) % n;
            let q = (i + 1) % n;
            let lbar = 0.5 * (seg_len0[p] + seg_len0[i]);
            node_theta0.push(turning_angle(sub(x[i], x[p]), sub(x[q], x[i])));
            node_bend.push(PI * d_flex * x[i][0] / lbar);
            contact_area0.push(2.0 * PI * mesh.chassis_radius * lbar);
        }
        EnergyModel {
            mesh,
            material,
            penalty,
            seg_len0,
            seg_rho0,
            seg_area0,
            node_theta0,
            node_bend,
            contact_area0,
        }
    }

    pub fn n(&self) -> usize {
        self.mesh.len()
    }

    pub fn contact_area(&self, i: usize) -> f64 {
        self.contact_area0[i]
    }

    /// Meridional and circumferential stretch of segment `i`.
    pub fn stretches(&self, x: &[[f64; 2]], i: usize) -> (f64, f64) {
        let j = (i + 1) % self.n();
        let d = sub(x[j], x[i]);
        let l1 = d[0].hypot(d[1]) / self.seg_len0[i];
        let l2 = 0.5 * (x[i][0] + x[j][0]) / self.seg_rho0[i];
        (l1, l2)
    }

    /// Enclosed volume by Pappus' theorem, mm^3.
    pub fn volume(x: &[[f64; 2]]) -> f64 {
        let n = x.len();
        let mut v = 0.0;
        for i in 0..n {
            let j = (i + 1) % n;
            let (ra, rb) = (x[i][0], x[j][0]);
            v += (x[j][1] - x[i][1]) * (ra * ra + ra * rb + rb * rb);
        }
        v * PI / 3.0
    }

    /// Energy and (optionally) gradient with respect to every node coordinate.
    /// Gradient entries of pinned nodes are computed but meaningless to callers.
    pub fn eval(&self, x: &[[f64; 2]], load: &Loading, mut grad: Option<&mut [[f64; 2]]>) -> f64 {
        let n = self.n();
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = [0.0, 0.0]);
        }
        let mat = &self.material;
        let alpha = mat.alpha;
        let c_w = 2.0 * mat.mu_kpa / (alpha * alpha);
        let c_dw = 2.0 * mat.mu_kpa / alpha;
        let thick = mat.thickness_mm * KPA;
        let mut energy = 0.0;

        // Segment stretches; derivatives of the energy with respect to them are
        // accumulated first and mapped onto the nodes afterwards.
        let mut l1s = vec![0.0; n];
        let mut l2s = vec![0.0; n];
        let mut l3s = vec![0.0; n];
        for i in 0..n {
            let j = (i + 1) % n;
            let d = sub(x[j], x[i]);
            let l1 = d[0].hypot(d[1]) / self.seg_len0[i];
            let l2 = 0.5 * (x[i][0] + x[j][0]) / self.seg_rho0[i];
            if !(l1 > 0.0 && l2 > 0.0) {
                return f64::INFINITY;
            }
            l1s[i] = l1;
            l2s[i] = l2;
            l3s[i] = 1.0 / (l1 * l2);
        }
        let want_grad = grad.is_some();
        let mut de_dl1 = vec![0.0; if want_grad { n } else { 0 }];
        let mut de_dl2 = vec![0.0; if want_grad { n } else { 0 }];

        // Hyperelastic membrane stretch energy.
        for i in 0..n {
            let (l1, l2) = (l1s[i], l2s[i]);
            let l1a = l1.powf(alpha);
            let l2a = l2.powf(alpha);
            let l3a = 1.0 / (l1a * l2a);
            let w = c_w * (l1a + l2a + l3a - 3.0);
            let scale = thick * self.seg_area0[i];
            energy += w * scale;
            if want_grad {
                de_dl1[i] += scale * c_dw * (l1a - l3a) / l1;
                de_dl2[i] += scale * c_dw * (l2a - l3a) / l2;
            }
        }

        // Meridional bending; the rigidity follows the current wall thickness.
        for i in 0..n {
            let p = (i + n - 1) % n;
            let q = (i + 1) % n;
            let a = sub(x[i], x[p]);
            let b = sub(x[q], x[i]);
            let cross = a[0] * b[1] - a[1] * b[0];
            let dot = a[0] * b[0] + a[1] * b[1];
            let dtheta = cross.atan2(dot) - self.node_theta0[i];
            let tau = 0.5 * (l3s[p] + l3s[i]);
            let k = self.node_bend[i] * tau * tau * tau;
            energy += k * dtheta * dtheta;
            if let Some(g) = grad.as_deref_mut() {
                let denom = cross * cross + dot * dot;
                if denom == 0.0 {
                    return f64::INFINITY;
                }
                let de = 2.0 * k * dtheta / denom;
                // d(theta)/da and d(theta)/db
                let ta = [
                    de * (dot * b[1] - cross * b[0]),
                    de * (-dot * b[0] - cross * b[1]),
                ];
                let tb = [
                    de * (-dot * a[1] - cross * a[0]),
                    de * (dot * a[0] - cross * a[1]),
                ];
                g[i][0] += ta[0] - tb[0];
                g[i][1] += ta[1] - tb[1];
                g[p][0] -= ta[0];
                g[p][1] -= ta[1];
                g[q][0] += tb[0];
                g[q][1] += tb[1];
                // Thickness dependence: dE/dl3 of each adjacent segment.
                let de_dtau = 3.0 * self.node_bend[i] * tau * tau * dtheta * dtheta;
                for s in [p, i] {
                    let de_dl3 = 0.5 * de_dtau;
                    de_dl1[s] -= de_dl3 * l3s[s] / l1s[s];
                    de_dl2[s] -= de_dl3 * l3s[s] / l2s[s];
                }
            }
        }

        if let Some(g) = grad.as_deref_mut() {
            for i in 0..n {
                let j = (i + 1) % n;
                let d = sub(x[j], x[i]);
                let len = d[0].hypot(d[1]);
                let f = de_dl1[i] / (self.seg_len0[i] * len);
                g[j][0] += f * d[0];
                g[j][1] += f * d[1];
                g[i][0] -= f * d[0];
                g[i][1] -= f * d[1];
                let fr = de_dl2[i] / (2.0 * self.seg_rho0[i]);
                g[i][0] += fr;
                g[j][0] += fr;
            }
        }

        // Pressure work.
        if load.include_pressure && load.pressure_kpa != 0.0 {
            let pr = load.pressure_kpa * KPA;
            energy -= pr * Self::volume(x);
            if let Some(g) = grad.as_deref_mut() {
                let c = pr * PI / 3.0;
                for i in 0..n {
                    let j = (i + 1) % n;
                    let (ra, rb) = (x[i][0], x[j][0]);
                    let dz = x[j][1] - x[i][1];
                    let q = ra * ra + ra * rb + rb * rb;
                    g[i][1] += c * q;
                    g[j][1] -= c * q;
                    g[i][0] -= c * dz * (2.0 * ra + rb);
                    g[j][0] -= c * dz * (ra + 2.0 * rb);
                }
            }
        }

        // Chassis contact penalty.
        let rc = self.mesh.chassis_radius;
        for i in 0..n {
            if self.mesh.pinned[i] {
                continue;
            }
            let gap = x[i][0] - rc;
            if gap < 0.0 {
                let k = self.penalty * self.contact_area0[i];
                energy += 0.5 * k * gap * gap;
                if let Some(g) = grad.as_deref_mut() {
                    g[i][0] += k * gap;
                }
            }
        }

        // Axial shear on the crown.
        if load.crown_axial_force != 0.0 {
            for i in 0..n {
                if self.mesh.crown[i] {
                    energy -= load.crown_axial_force * x[i][1];
                    if let Some(g) = grad.as_deref_mut() {
                        g[i][1] -= load.crown_axial_force;
                    }
                }
            }
        }

        // Imposed radial positions.
        for &(i, target) in &load.imposed_radius {
            let e = x[i][0] - target;
            energy += 0.5 * load.imposed_stiffness * e * e;
            if let Some(g) = grad.as_deref_mut() {
                g[i][0] += load.imposed_stiffness * e;
            }
        }

        energy
    }

    /// Largest principal stretch (meridional, circumferential or thickness) over all segments.
    pub fn max_stretch(&self, x: &[[f64; 2]]) -> f64 {
        (0..self.n())
            .map(|i| {
                let (l1, l2) = self.stretches(x, i);
                l1.max(l2).max(1.0 / (l1 * l2))
            })
            .fold(0.0, f64::max)
    }

    /// Largest in-plane Cauchy principal stress, kPa.
    pub fn max_principal_stress(&self, x: &[[f64; 2]]) -> f64 {
        let alpha = self.material.alpha;
        let c = 2.0 * self.material.mu_kpa / alpha;
        (0..self.n())
            .map(|i| {
                let (l1, l2) = self.stretches(x, i);
                let l3a = (l1 * l2).powf(-alpha);
                (c * (l1.powf(alpha) - l3a)).max(c * (l2.powf(alpha) - l3a))
            })
            .fold(f64::MIN, f64::max)
    }
}
