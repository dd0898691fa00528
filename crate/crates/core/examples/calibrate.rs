//! Calibration helper behind `calibration/default_calibration.toml`.
//!
//! ```text
//! cargo run --release --example calibrate -- membrane   # material / profile screen
//! cargo run --release --example calibrate -- wall       # phantom hoop stiffness and preload
//! cargo run --release --example calibrate -- report     # current calibration against the targets
//! ```

use rayon::prelude::*;
use softscreen_core::contact::{equilibrium_contact, ContactProblem};
use softscreen_core::lumen::{fixture, LumenModel, Wall};
use softscreen_core::membrane::{ChamberProfile, ChamberSolver, FlangeStyle, OgdenMaterial};
use softscreen_core::navigation::{
    matched_pressure, run, stall_threshold, traction_sweep, Command, Robot, SimConfig, TimedCommand,
};
use softscreen_core::suite::{run_paper_suite, HOLD_S_MM};
use softscreen_core::Calibration;

fn mean_speed(lumen: &LumenModel, robot: &Robot, sim: &SimConfig, motor: f64, p: f64) -> f64 {
    let schedule = [TimedCommand {
        t_s: 0.0,
        command: Command::new(motor, p, p),
    }];
    run(lumen, robot, sim, &schedule, None)
        .unwrap()
        .summary
        .mean_speed_mmps
}

/// Keeps materials whose LF chamber reaches 13-19 mm at 16 kPa and whose
/// axial stiffness falls with pressure over the working range.
fn membrane(cal: &Calibration) {
    let mut grid = Vec::new();
    for mu in [24.0, 26.0, 28.0, 30.0] {
        for alpha in [3.4, 3.5, 3.6] {
            for t in [5.5, 6.0, 6.5] {
                for r0 in [28.0, 29.0, 30.0] {
                    grid.push((mu, alpha, t, r0));
                }
            }
        }
    }
    let settings = cal.membrane.solver;
    let lines: Vec<String> = grid
        .par_iter()
        .filter_map(|&(mu, alpha, t, r0)| {
            let material = OgdenMaterial {
                mu_kpa: mu,
                alpha,
                thickness_mm: t,
            };
            let lf = ChamberProfile {
                rest_outer_radius_mm: r0,
                ..ChamberProfile::default_for(FlangeStyle::Lf)
            };
            let cf = ChamberProfile {
                flange_style: FlangeStyle::Cf,
                ..lf.clone()
            };
            let mut s = ChamberSolver::new(&lf, &material, settings).ok()?;
            let mut rows = Vec::new();
            for k in 0..=10 {
                let p = 2.0 * k as f64;
                let d = s.inflate(p).ok()?.max_radial_displacement_mm;
                let ka = s.clone().axial_stiffness(p, 0.5).ok()?.axial_stiffness_n_per_mm;
                rows.push((p, d, ka));
            }
            let d16 = rows[8].1;
            let softening = rows.windows(2).all(|w| w[1].2 < w[0].2);
            if !(13.0..=19.0).contains(&d16) || !softening {
                return None;
            }
            let k_cf = ChamberSolver::new(&cf, &material, settings)
                .ok()?
                .axial_stiffness(8.0, 0.5)
                .ok()?
                .axial_stiffness_n_per_mm;
            Some(format!(
                "mu={mu} alpha={alpha} t={t} r0={r0}  d16={d16:.1} d20={:.1}  k_a(LF)/k_a(CF)@8kPa={:.2}",
                rows[10].1,
                rows[4].2 / k_cf
            ))
        })
        .collect();
    for l in lines {
        println!("{l}");
    }
}

/// Scans the phantom wall law against the collapsed and supported speeds,
/// the traction ratio and the stall threshold.
fn wall(cal: &Calibration) {
    let robot = cal.robot().unwrap();
    let sim = cal.sim;
    let m = cal.transmission.max_motor_speed_radps;
    for hoop in [0.15, 0.175, 0.2] {
        for pre in [0.05, 0.1, 0.2] {
            let mut collapsed = fixture("phantom_collapsed").unwrap();
            collapsed.wall = Wall::Elastic {
                hoop_stiffness_n_per_mm: hoop,
                collapsed: true,
                collapse_preload_n: pre,
            };
            let mut supported = fixture("phantom_supported").unwrap();
            supported.wall = Wall::Elastic {
                hoop_stiffness_n_per_mm: hoop,
                collapsed: false,
                collapse_preload_n: 0.0,
            };
            let rows = traction_sweep(&collapsed, &robot, &sim, &[0.0, 16.0], HOLD_S_MM).unwrap();
            let stall = stall_threshold(&collapsed, &robot, &sim, HOLD_S_MM, 0.25).unwrap();
            let col: Vec<f64> = [0.0, 10.0, 16.0]
                .iter()
                .map(|&p| mean_speed(&collapsed, &robot, &sim, m, p))
                .collect();
            let sup = mean_speed(&supported, &robot, &sim, m, 10.0);
            let sup_back = mean_speed(&supported, &robot, &sim, -m, 0.0);
            println!(
                "hoop={hoop} preload={pre}  traction {:.3}->{:.3} (x{:.2})  stall={stall:?}  collapsed {col:.2?}  supported {sup:.2} / {sup_back:.2}",
                rows[0].traction_n,
                rows[1].traction_n,
                rows[1].traction_n / rows[0].traction_n
            );
        }
    }
}

fn report(cal: &Calibration) {
    let robot = cal.robot().unwrap();
    println!(
        "axial force budget {:.3} N",
        robot.forces().unwrap().axial_n
    );
    for name in ["pipe74", "pipe84", "pipe94"] {
        let l = fixture(name).unwrap();
        println!(
            "{name}: matched pressure {:?} kPa",
            matched_pressure(&l, &robot, &cal.sim, 0.0).unwrap()
        );
    }
    let l = fixture("pipe94").unwrap();
    let top = cal.limits.max_pressure_kpa;
    let s = equilibrium_contact(&ContactProblem {
        pressures_kpa: [top, 0.0],
        lumen_radius_mm: l.local_radius(HOLD_S_MM).unwrap(),
        wall: l.wall_at(HOLD_S_MM).unwrap(),
        tracks: &robot.tracks,
        geometry: &robot.geometry,
        chamber: robot.chamber.as_ref(),
        gravity: true,
    })
    .unwrap();
    println!("pipe94 tilt at {top}/0 kPa: {:.3} deg", s.tilt_deg);
    let r = run_paper_suite(cal).unwrap();
    print!("{}", r.table());
    println!("passed: {}", r.passed());
}

fn main() {
    let cal = Calibration::default_calibration();
    match std::env::args().nth(1).as_deref() {
        Some("membrane") => membrane(&cal),
        Some("wall") => wall(&cal),
        Some("report") | None => report(&cal),
        Some(other) => {
            eprintln!("unknown step `{other}`; expected membrane, wall or report");
            std::process::exit(1);
        }
    }
}
