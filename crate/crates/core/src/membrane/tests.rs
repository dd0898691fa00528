use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::energy::{EnergyModel, Loading};
use super::mesh::RestMesh;
use super::*;

fn lf() -> ChamberProfile {
    ChamberProfile::default_for(FlangeStyle::Lf)
}

fn cf() -> ChamberProfile {
    ChamberProfile::default_for(FlangeStyle::Cf)
}

fn solver(profile: &ChamberProfile) -> ChamberSolver {
    ChamberSolver::new(
        profile,
        &OgdenMaterial::default(),
        SolverSettings::default(),
    )
    .unwrap()
}

fn full_loading(model: &EnergyModel) -> Loading {
    let imposed: Vec<(usize, f64)> = (0..model.n())
        .filter(|&i| model.mesh.crown[i])
        .map(|i| (i, model.mesh.nodes[i][0] + 0.3))
        .collect();
    Loading {
        pressure_kpa: 7.5,
        include_pressure: true,
        crown_axial_force: 0.02,
        imposed_radius: imposed,
        imposed_stiffness: 50.0,
    }
}

#[test]
fn zero_pressure_is_the_rest_shape() {
    for profile in [lf(), cf()] {
        let shape = inflate(&profile, &OgdenMaterial::default(), 0.0).unwrap();
        let rest = RestMesh::build(&profile);
        assert_eq!(shape.nodes, rest.nodes);
        assert_eq!(shape.max_radial_displacement_mm, 0.0);
        assert_eq!(shape.chassis_contact_pressure_kpa, 0.0);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for profile in [lf(), cf()] {
        let mesh = RestMesh::build(&profile);
        let model = EnergyModel::new(mesh.clone(), OgdenMaterial::default(), 5.0);
        let load = full_loading(&model);
        for _ in 0..5 {
            // Random feasible configuration, a few nodes pushed into the chassis.
            let x: Vec<[f64; 2]> = mesh
                .nodes
                .iter()
                .map(|p| {
                    [
                        p[0] + rng.gen_range(-0.3..1.5),
                        p[1] + rng.gen_range(-0.8..0.8),
                    ]
                })
                .collect();
            let mut g = vec![[0.0; 2]; x.len()];
            model.eval(&x, &load, Some(&mut g));
            let h = 1e-6;
            let mut worst: f64 = 0.0;
            let scale = g
                .iter()
                .flat_map(|v| v.iter())
                .fold(0.0_f64, |m, v| m.max(v.abs()));
            for i in 0..x.len() {
                for c in 0..2 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i][c] += h;
                    xm[i][c] -= h;
                    let fd =
                        (model.eval(&xp, &load, None) - model.eval(&xm, &load, None)) / (2.0 * h);
                    worst = worst.max((fd - g[i][c]).abs() / scale);
                }
            }
            assert!(worst < 1e-4, "relative gradient error {worst:e}");
        }
    }
}

#[test]
fn refinement_changes_displacement_by_less_than_two_percent() {
    for style in [FlangeStyle::Lf, FlangeStyle::Cf] {
        let coarse = ChamberProfile {
            n_nodes: 48,
            ..ChamberProfile::default_for(style)
        };
        let fine = ChamberProfile {
            n_nodes: 96,
            ..coarse.clone()
        };
        let a = inflate(&coarse, &OgdenMaterial::default(), 10.0)
            .unwrap()
            .max_radial_displacement_mm;
        let b = inflate(&fine, &OgdenMaterial::default(), 10.0)
            .unwrap()
            .max_radial_displacement_mm;
        assert!((a - b).abs() / b < 0.02, "{style:?}: {a} vs {b}");
    }
}

#[test]
fn small_pressure_response_is_linear() {
    let eps = 0.05;
    for profile in [lf(), cf()] {
        let d1 = inflate(&profile, &OgdenMaterial::default(), eps)
            .unwrap()
            .max_radial_displacement_mm;
        let d2 = inflate(&profile, &OgdenMaterial::default(), 2.0 * eps)
            .unwrap()
            .max_radial_displacement_mm;
        assert!(d1 > 0.0);
        assert!((d2 / d1 - 2.0).abs() < 0.1, "ratio {}", d2 / d1);
    }
}

#[test]
fn curve_of_zero_is_zero() {
    assert_eq!(
        pressure_curve(&lf(), &OgdenMaterial::default(), &[0.0]).unwrap(),
        vec![(0.0, 0.0)]
    );
}

#[test]
fn curve_is_monotone_and_reaches_sixteen_millimetres() {
    let pressures: Vec<f64> = (0..=13).map(|k| 2.0 * k as f64).collect();
    let rows = pressure_curve(&lf(), &OgdenMaterial::default(), &pressures).unwrap();
    assert_eq!(rows.len(), pressures.len());
    for w in rows.windows(2) {
        assert!(w[1].1 >= w[0].1);
    }
    assert!(rows.last().unwrap().1 >= 16.0);
}

#[test]
fn curve_rejects_bad_pressure_lists() {
    let m = OgdenMaterial::default();
    assert!(pressure_curve(&lf(), &m, &[]).is_err());
    assert!(pressure_curve(&lf(), &m, &[-1.0, 2.0]).is_err());
    assert!(pressure_curve(&lf(), &m, &[2.0, 2.0]).is_err());
    assert!(pressure_curve(&lf(), &m, &[4.0, 2.0]).is_err());
    assert!(pressure_curve(&lf(), &m, &[0.0, f64::NAN]).is_err());
}

#[test]
fn sweep_failures_carry_the_pressure() {
    let err = pressure_curve(&cf(), &OgdenMaterial::default(), &[0.0, 10.0, 30.0]).unwrap_err();
    match err {
        Error::Sweep {
            pressure_kpa,
            source,
        } => {
            assert_eq!(pressure_kpa, 30.0);
            assert!(matches!(*source, Error::OverInflation { .. }));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn volume_grows_along_a_sweep() {
    let mut s = solver(&lf());
    let mut last = 0.0;
    for p in [0.0, 3.0, 6.0, 9.0, 12.0] {
        let v = s.inflate(p).unwrap().enclosed_volume_mm3;
        assert!(v >= last);
        last = v;
    }
}

#[test]
fn non_convergence_reports_diagnostics() {
    let settings = SolverSettings {
        max_iterations: 1,
        ..SolverSettings::default()
    };
    let mut s = ChamberSolver::new(&lf(), &OgdenMaterial::default(), settings).unwrap();
    match s.inflate(10.0).unwrap_err() {
        Error::NonConvergence {
            iterations,
            gradient_norm,
            energy,
            ..
        } => {
            assert_eq!(iterations, 1);
            assert!(gradient_norm > 0.0 && energy.is_finite());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn rejects_invalid_inputs() {
    let m = OgdenMaterial::default();
    assert!(inflate(&lf(), &m, -1.0).is_err());
    assert!(inflate(&lf(), &m, f64::INFINITY).is_err());
    assert!(inflate(
        &ChamberProfile {
            n_nodes: 12,
            ..lf()
        },
        &m,
        1.0
    )
    .is_err());
    assert!(inflate(
        &ChamberProfile {
            chassis_radius_mm: 30.0,
            ..lf()
        },
        &m,
        1.0
    )
    .is_err());
    assert!(inflate(&lf(), &OgdenMaterial { alpha: 0.0, ..m }, 1.0).is_err());
    assert!(inflate(
        &lf(),
        &OgdenMaterial {
            thickness_mm: 0.0,
            ..m
        },
        1.0
    )
    .is_err());
    assert!(axial_stiffness(&lf(), &m, 5.0, 0.0).is_err());
}

#[test]
fn renumbered_loop_gives_identical_scalars() {
    let profile = lf();
    let mesh = RestMesh::build(&profile);
    let mut a = ChamberSolver::from_mesh(
        mesh.clone(),
        OgdenMaterial::default(),
        SolverSettings::default(),
    );
    let mut b = ChamberSolver::from_mesh(
        mesh.rotated(17),
        OgdenMaterial::default(),
        SolverSettings::default(),
    );
    for p in [4.0, 12.0] {
        let sa = a.inflate(p).unwrap();
        let sb = b.inflate(p).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-6 * x.abs().max(1.0);
        assert!(close(
            sa.max_radial_displacement_mm,
            sb.max_radial_displacement_mm
        ));
        assert!(close(sa.enclosed_volume_mm3, sb.enclosed_volume_mm3));
        assert!(close(
            sa.max_principal_stress_kpa,
            sb.max_principal_stress_kpa
        ));
        assert!(close(
            sa.chassis_contact_area_mm2,
            sb.chassis_contact_area_mm2
        ));
    }
}

#[test]
fn contact_is_complementary() {
    for profile in [lf(), cf()] {
        let mut s = solver(&profile);
        for p in [2.0, 8.0, 16.0] {
            let shape = s.inflate(p).unwrap();
            let rc = profile.chassis_radius_mm;
            for (i, node) in shape.nodes.iter().enumerate() {
                let gap = node[0] - rc;
                let force = if s.model.mesh.pinned[i] {
                    0.0
                } else {
                    s.model.penalty * (-gap).max(0.0)
                };
                assert!(force >= 0.0);
                assert!(gap > -0.05, "penetration {gap} at node {i}");
                // Either separated with no force, or touching within the penalty tolerance.
                assert!(gap.max(0.0) * force == 0.0);
                assert!((gap * force).abs() <= 0.05 * force + 1e-15);
            }
        }
    }
}

#[test]
fn lateral_flanges_anchor_with_larger_contact() {
    let mut a = solver(&lf());
    let mut b = solver(&cf());
    for p in [2.0, 6.0, 10.0, 14.0] {
        let l = a.inflate(p).unwrap();
        let c = b.inflate(p).unwrap();
        assert!(l.chassis_contact_pressure_kpa > 0.0);
        assert!(c.chassis_contact_area_mm2 < l.chassis_contact_area_mm2);
    }
}

#[test]
fn volume_matches_pressure_derivative_of_energy() {
    let mut s = solver(&lf());
    for p in [4.0, 10.0] {
        let shape = s.inflate(p).unwrap();
        let h = 0.01;
        let mut up = s.clone();
        up.inflate(p + h).unwrap();
        let mut down = s.clone();
        down.inflate(p - h).unwrap();
        let de_dp = (up.energy() - down.energy()) / (2.0 * h);
        let implied = -de_dp * 1e3;
        let rel = (implied - shape.enclosed_volume_mm3).abs() / shape.enclosed_volume_mm3;
        assert!(
            rel < 0.01,
            "implied {implied} vs {}",
            shape.enclosed_volume_mm3
        );
    }
}

#[test]
fn flange_styles_share_rest_volume() {
    let a = inflate(&lf(), &OgdenMaterial::default(), 0.0)
        .unwrap()
        .enclosed_volume_mm3;
    let b = inflate(&cf(), &OgdenMaterial::default(), 0.0)
        .unwrap()
        .enclosed_volume_mm3;
    assert!((a - b).abs() <= 1e-12 * a);
    let exact = lf().footprint_volume();
    assert!((a - exact).abs() / exact < 0.005);
}

#[test]
fn lateral_flanges_are_stiffer_and_soften_with_pressure() {
    let mut a = solver(&lf());
    let mut b = solver(&cf());
    let mut last = [f64::INFINITY; 2];
    for p in [2.0, 6.0, 10.0, 14.0] {
        let kl = a.axial_stiffness(p, 0.5).unwrap();
        let kc = b.axial_stiffness(p, 0.5).unwrap();
        assert_eq!(
            kl.axial_stiffness_n_per_mm,
            kl.shear_force_n / kl.lateral_displacement_mm
        );
        assert!(kl.axial_stiffness_n_per_mm > kc.axial_stiffness_n_per_mm);
        assert!(kl.axial_stiffness_n_per_mm < last[0]);
        assert!(kc.axial_stiffness_n_per_mm < last[1]);
        last = [kl.axial_stiffness_n_per_mm, kc.axial_stiffness_n_per_mm];
    }
}

#[test]
fn stiffness_probe_leaves_solver_on_the_loading_path() {
    let mut s = solver(&lf());
    s.axial_stiffness(6.0, 0.5).unwrap();
    let again = s.inflate(6.0).unwrap();
    let fresh = inflate(&lf(), &OgdenMaterial::default(), 6.0).unwrap();
    assert!((again.max_radial_displacement_mm - fresh.max_radial_displacement_mm).abs() < 1e-6);
}

#[test]
fn radial_stiffness_is_positive_and_symmetric() {
    for (profile, from) in [(lf(), 0.0), (cf(), 1.0)] {
        let mut s = solver(&profile);
        let mut p = from;
        while p <= 20.0 {
            let kc = s.radial_secant_stiffness(p).unwrap();
            let ke = s.radial_extension_stiffness(p).unwrap();
            assert!(kc > 0.0 && ke > 0.0);
            assert!(
                (kc - ke).abs() / kc.max(ke) < 0.1,
                "{:?} p={p}: {kc} vs {ke}",
                profile.flange_style
            );
            p += 4.0;
        }
    }
}

#[test]
fn radial_stiffness_at_zero_pressure_is_purely_elastic() {
    let with = solver(&lf()).radial_secant_stiffness(0.0).unwrap();
    let without = solver(&lf())
        .without_pressure_term()
        .radial_secant_stiffness(0.0)
        .unwrap();
    assert_eq!(with, without);
    let inflated = solver(&lf()).radial_secant_stiffness(6.0).unwrap();
    let elastic_only = solver(&lf())
        .without_pressure_term()
        .radial_secant_stiffness(6.0)
        .unwrap();
    assert_ne!(inflated, elastic_only);
}

/// Pressure at which the chamber reaches `target` mm of radial displacement.
fn pressure_for_displacement(profile: &ChamberProfile, target: f64) -> ChamberShape {
    let mut s = solver(profile);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while s.inflate(hi).unwrap().max_radial_displacement_mm < target {
        lo = hi;
        hi += 1.0;
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        let mut t = s.clone();
        t.reset();
        if t.inflate(mid).unwrap().max_radial_displacement_mm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    s.reset();
    s.inflate(hi).unwrap()
}

#[test]
fn central_flange_is_less_stressed_at_matched_deformation() {
    let l = pressure_for_displacement(&lf(), 16.0);
    let c = pressure_for_displacement(&cf(), 16.0);
    assert!((l.max_radial_displacement_mm - 16.0).abs() < 1e-3);
    assert!(c.max_principal_stress_kpa < l.max_principal_stress_kpa);
}
