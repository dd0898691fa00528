//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softscreen_core::contact::{equilibrium_contact, wall_ring_force, ContactProblem};
use softscreen_core::lumen::{fixture, WallLaw};
use softscreen_core::membrane::{ChamberProfile, ChamberSolver, FlangeStyle};
use softscreen_core::scenario::quickstart;
use softscreen_core::suite::{self, SuiteReport, HOLD_S_MM};
use softscreen_core::transmission::robot_speed;
use softscreen_core::{navigation, Calibration};

const TS: f64 = 4.6875;

type Check<'a> = Box<dyn Fn() -> Result<Outcome, String> + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn measured(report: &SuiteReport, id: &str) -> Result<f64, String> {
    let row = report.row(id).ok_or_else(|| format!("no row `{id}`"))?;
    row.measured.ok_or_else(|| format!("`{id}`: {}", row.note))
}

fn theoretical_speed() -> Result<Outcome, String> {
    let motor = 12000.0 * 2.0 * std::f64::consts::PI / 60.0;
    let v = robot_speed(motor / 256.0, 6.0).map_err(|e| e.to_string())?;
    Ok(outcome(
        (v - TS).abs() <= 1e-9,
        format!("{v:.10} mm/s vs {TS} (tol 1e-9)"),
    ))
}

fn rigid_pipes() -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [74, 84, 94] {
        let mut v = [0.0; 2];
        for (i, backward) in [false, true].into_iter().enumerate() {
            let t0 = Instant::now();
            let trace = quickstart(&format!("pipe{d}"), backward)
                .resolve()
                .and_then(|r| r.run())
                .map_err(|e| e.to_string())?;
            let secs = t0.elapsed().as_secs_f64();
            v[i] = trace.summary.mean_speed_mmps;
            pass &= trace.summary.completed && (v[i] - TS).abs() <= 0.15 * TS && secs < 10.0;
        }
        let asym = (v[0] - v[1]).abs() / v[0].max(v[1]);
        pass &= asym < 0.10;
        parts.push(format!(
            "{d} mm {:.3}/{:.3} asym {:.1}%",
            v[0],
            v[1],
            100.0 * asym
        ));
    }
    Ok(outcome(
        pass,
        format!("{} (within 15% of {TS}, asym < 10%)", parts.join("; ")),
    ))
}

fn phantoms(report: &SuiteReport) -> Result<Outcome, String> {
    let within = |v: f64, t: f64| (v - t).abs() <= 0.2 * t;
    let p = ["0kPa", "10kPa", "16kPa"];
    let sup_f: Vec<f64> = p
        .iter()
        .map(|k| measured(report, &format!("phantom_supported.{k}.forward")))
        .collect::<Result<_, _>>()?;
    let col_f: Vec<f64> = p
        .iter()
        .map(|k| measured(report, &format!("phantom_collapsed.{k}.forward")))
        .collect::<Result<_, _>>()?;
    let sup_b = measured(report, "phantom_supported.0kPa.backward")?;
    let rigid: Vec<f64> = [74, 84, 94]
        .iter()
        .map(|d| measured(report, &format!("pipe{d}.forward")))
        .collect::<Result<_, _>>()?;
    let peak = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max);
    let low = |v: &[f64]| v.iter().cloned().fold(f64::MAX, f64::min);
    let pass = within(peak(&sup_f), 3.4)
        && col_f.iter().all(|&v| within(v, 2.35))
        && within(sup_b, 3.9)
        && low(&rigid) > peak(&sup_f)
        && sup_f.iter().zip(&col_f).all(|(s, c)| s > c);
    Ok(outcome(
        pass,
        format!(
            "supported fwd {:.3}/{:.3}/{:.3} (3.4 +-20%), collapsed fwd {:.3}/{:.3}/{:.3} (2.35 +-20%), supported bwd {sup_b:.3} (3.9 +-20%), rigid min {:.3} > supported > collapsed",
            sup_f[0], sup_f[1], sup_f[2], col_f[0], col_f[1], col_f[2], low(&rigid)
        ),
    ))
}

fn traction(cal: &Calibration) -> Result<Outcome, String> {
    let t0 = Instant::now();
    let lumen = fixture("phantom_collapsed").map_err(|e| e.to_string())?;
    let robot = cal.robot().map_err(|e| e.to_string())?;
    let rows = navigation::traction_sweep(
        &lumen,
        &robot,
        &cal.sim,
        &suite::TRACTION_PRESSURES_KPA,
        HOLD_S_MM,
    )
    .map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let pre: Vec<f64> = rows
        .iter()
        .take_while(|r| !r.stalled)
        .map(|r| r.traction_n)
        .collect();
    let monotone = pre.windows(2).all(|w| w[1] >= w[0]);
    let t: Vec<f64> = rows.iter().map(|r| r.traction_n).collect();
    let ratio = t[4] / t[0];
    let peak = pre.iter().cloned().fold(f64::MIN, f64::max);
    let pass = monotone
        && pre.len() == rows.len()
        && (1.7..=2.3).contains(&ratio)
        && (1.5..=2.5).contains(&peak)
        && secs < 30.0;
    Ok(outcome(
        pass,
        format!(
            "{:.3}/{:.3}/{:.3}/{:.3}/{:.3} N, monotone {monotone}, ratio {ratio:.3} in [1.7, 2.3], peak {peak:.3} in [1.5, 2.5], {secs:.2} s",
            t[0], t[1], t[2], t[3], t[4]
        ),
    ))
}

fn stall(cal: &Calibration) -> Result<Outcome, String> {
    let lumen = fixture("phantom_collapsed").map_err(|e| e.to_string())?;
    let robot = cal.robot().map_err(|e| e.to_string())?;
    let cap = robot.chamber.max_pressure_kpa();
    let p = navigation::stall_threshold(&lumen, &robot, &cal.sim, HOLD_S_MM, 0.25)
        .map_err(|e| e.to_string())?;
    Ok(match p {
        Some(p) => outcome(
            p > 16.0 && p < cap,
            format!("threshold {p} kPa in (16, {cap}) (stretch cap pressure)"),
        ),
        None => outcome(
            false,
            format!("no stall below the stretch cap at {cap} kPa"),
        ),
    })
}

fn tilt(cal: &Calibration) -> Result<Outcome, String> {
    let robot = cal.robot().map_err(|e| e.to_string())?;
    let lumen = fixture("pipe94").map_err(|e| e.to_string())?;
    let r = lumen.local_radius(HOLD_S_MM).map_err(|e| e.to_string())?;
    let wall = lumen.wall_at(HOLD_S_MM).map_err(|e| e.to_string())?;
    let at = |p1: f64, p2: f64| {
        equilibrium_contact(&ContactProblem {
            pressures_kpa: [p1, p2],
            lumen_radius_mm: r,
            wall,
            tracks: &robot.tracks,
            geometry: &robot.geometry,
            chamber: robot.chamber.as_ref(),
            gravity: true,
        })
        .map(|c| c.tilt_deg)
        .map_err(|e| e.to_string())
    };
    let top = cal.limits.max_pressure_kpa;
    let grid: Vec<f64> = (0..=(2.0 * top) as usize).map(|k| 0.5 * k as f64).collect();
    let mut max: f64 = 0.0;
    let mut worst_anti: f64 = 0.0;
    for &a in &grid {
        for &b in &grid {
            let (x, y) = (at(a, b)?, at(b, a)?);
            max = max.max(x.abs());
            worst_anti = worst_anti.max((x + y).abs());
        }
    }
    Ok(outcome(
        (max - 10.0).abs() <= 2.0 && worst_anti == 0.0,
        format!("max |tilt| {max:.3} deg over [0, {top}] kPa^2 (10 +-2), max |tilt(a,b) + tilt(b,a)| = {worst_anti:e}"),
    ))
}

fn membrane(cal: &Calibration) -> Result<Outcome, String> {
    let t0 = Instant::now();
    let m = &cal.membrane;
    let solver = |style: FlangeStyle, n: usize| {
        let profile = ChamberProfile {
            n_nodes: n,
            ..ChamberProfile::default_for(style)
        };
        ChamberSolver::new(&profile, &m.material, m.solver)
    };
    let e = |e: softscreen_core::Error| e.to_string();
    let styles = [FlangeStyle::Lf, FlangeStyle::Cf];
    let n0 = m.profile.n_nodes;

    // (a) gradient against central differences.
    let mut grad_err: f64 = 0.0;
    for style in styles {
        let mut s = solver(style, n0).map_err(e)?;
        for p in [0.0, 5.0, 12.0] {
            s.inflate(p).map_err(e)?;
            grad_err = grad_err.max(s.gradient_check(0.4, 1e-6));
        }
    }
    let a = grad_err < 1e-4;

    // (b) and (e): warm-started sweep up to the calibrated limit.
    let top = cal.limits.max_pressure_kpa;
    let mut monotone = true;
    let mut lf_max = 0.0;
    for style in styles {
        let mut s = solver(style, n0).map_err(e)?;
        let mut last = -1.0;
        for k in 0..=(2.0 * top) as usize {
            let d = s
                .inflate(0.5 * k as f64)
                .map_err(e)?
                .max_radial_displacement_mm;
            monotone &= d >= last;
            last = d;
        }
        if style == FlangeStyle::Lf {
            lf_max = last;
        }
    }
    let b = monotone;
    let e_ok = lf_max >= 16.0;

    // (c) and (d): axial stiffness at 0.5 N shear.
    let levels = [2.0, 6.0, 10.0, 14.0];
    let mut lf = solver(FlangeStyle::Lf, n0).map_err(e)?;
    let mut cf = solver(FlangeStyle::Cf, n0).map_err(e)?;
    let mut ratios = Vec::new();
    let mut k_lf = Vec::new();
    let mut k_cf = Vec::new();
    for p in levels {
        let kl = lf
            .axial_stiffness(p, 0.5)
            .map_err(e)?
            .axial_stiffness_n_per_mm;
        let kc = cf
            .axial_stiffness(p, 0.5)
            .map_err(e)?
            .axial_stiffness_n_per_mm;
        ratios.push(kl / kc);
        k_lf.push(kl);
        k_cf.push(kc);
    }
    let c = ratios.iter().all(|&r| r > 1.0);
    let d = k_lf.windows(2).all(|w| w[1] < w[0]) && k_cf.windows(2).all(|w| w[1] < w[0]);

    // (f) mesh refinement.
    let mut refine: f64 = 0.0;
    for style in styles {
        for p in [10.0, top] {
            let coarse = solver(style, n0)
                .map_err(e)?
                .inflate(p)
                .map_err(e)?
                .max_radial_displacement_mm;
            let fine = solver(style, 2 * n0)
                .map_err(e)?
                .inflate(p)
                .map_err(e)?
                .max_radial_displacement_mm;
            refine = refine.max((coarse - fine).abs() / fine);
        }
    }
    let f = refine < 0.02;
    let secs = t0.elapsed().as_secs_f64();
    let flag = |b: bool| if b { "ok" } else { "FAIL" };
    Ok(outcome(
        a && b && c && d && e_ok && f && secs < 300.0,
        format!(
            "(a) grad rel err {grad_err:.1e} < 1e-4 {}; (b) monotone {}; (c) k_a LF/CF {} {}; (d) decreasing {}; (e) LF {lf_max:.2} mm >= 16 {}; (f) n->2n {:.2}% < 2% {}; {secs:.1} s",
            flag(a),
            flag(b),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join("/"),
            flag(c),
            flag(d),
            flag(e_ok),
            100.0 * refine,
            flag(f)
        ),
    ))
}

fn contact_oracle(cal: &Calibration) -> Result<Outcome, String> {
    let robot = cal.robot().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = 0;
    let mut worst_residual: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    while cases < 50 {
        let r = rng.gen_range(36.0..50.0);
        let kw = rng.gen_range(0.05..5.0);
        let p = [rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)];
        let wall = WallLaw::Elastic {
            hoop_stiffness_n_per_mm: kw,
            preload_n: 0.0,
        };
        let s = equilibrium_contact(&ContactProblem {
            pressures_kpa: p,
            lumen_radius_mm: r,
            wall,
            tracks: &robot.tracks,
            geometry: &robot.geometry,
            chamber: robot.chamber.as_ref(),
            gravity: false,
        })
        .map_err(|e| e.to_string())?;
        let mut counted = false;
        for k in 0..2 {
            let delta = s.free_radius_mm[k] - r;
            if delta <= 0.0 {
                continue;
            }
            counted = true;
            let kr = s.robot_stiffness_n_per_mm[k];
            let residual = |u: f64| kr * (delta - u) - wall_ring_force(kw, r, u);
            let u = s.effective_radius_mm[k] - r;
            worst_residual = worst_residual.max(residual(u).abs());
            worst_residual =
                worst_residual.max((s.ring_force_n[k] - wall_ring_force(kw, r, u)).abs());
            // Brute force: walk the wall displacement in 1e-3 mm steps to the sign change.
            let steps = (delta / 1e-3).ceil() as usize;
            let mut prev = residual(0.0);
            let mut u_scan = delta;
            for i in 1..=steps {
                let x = (i as f64 * 1e-3).min(delta);
                let cur = residual(x);
                if cur <= 0.0 {
                    u_scan = x - 1e-3 * cur / (cur - prev);
                    break;
                }
                prev = cur;
            }
            worst_gap = worst_gap.max((u - u_scan).abs());
        }
        if counted {
            cases += 1;
        }
    }
    Ok(outcome(
        worst_residual < 1e-3 && worst_gap <= 1e-3,
        format!("{cases} cases, max force-balance residual {worst_residual:.1e} N < 1e-3, max |u - u_scan| {worst_gap:.1e} mm"),
    ))
}

fn determinism(cal: &Calibration, first: &SuiteReport) -> Result<Outcome, String> {
    let second = suite::run_paper_suite(cal).map_err(|e| e.to_string())?;
    let (a, b) = (first.to_json(), second.to_json());
    Ok(outcome(
        a == b,
        format!(
            "two suite reports, {} bytes, identical: {}",
            a.len(),
            a == b
        ),
    ))
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let cal = Calibration::default_calibration();
    let report = match suite::run_paper_suite(&cal) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL suite setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    let checks: Vec<(&str, Check)> = vec![
        ("theoretical speed", Box::new(theoretical_speed)),
        ("rigid-pipe navigation", Box::new(rigid_pipes)),
        (
            "phantom speed ordering and calibration",
            Box::new(|| phantoms(&report)),
        ),
        ("traction trend", Box::new(|| traction(&cal))),
        ("over-inflation stall", Box::new(|| stall(&cal))),
        ("tilt", Box::new(|| tilt(&cal))),
        ("membrane property suite", Box::new(|| membrane(&cal))),
        ("contact oracle", Box::new(|| contact_oracle(&cal))),
        ("determinism", Box::new(|| determinism(&cal, &report))),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let (tag, detail) = match check() {
            Ok(o) if o.pass => ("PASS", o.detail),
            Ok(o) => ("FAIL", o.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} {name}: {detail}");
    }
    println!(
        "acceptance: {} failed, {:.1} s",
        failed,
        t0.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
