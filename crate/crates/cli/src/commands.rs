//! Batch subcommands. Each writes its artifacts plus a manifest into an
//! output directory.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use softscreen_core::lumen::fixture;
use softscreen_core::membrane::{ChamberProfile, ChamberSolver, FlangeStyle};
use softscreen_core::navigation::{self, TraceSummary, TractionRow};
use softscreen_core::suite::{self, SuiteReport};
use softscreen_core::{Calibration, Error as CoreError, ScenarioSpec, SimTrace};

use crate::manifest::{sha256_hex, Manifest, OutDir};

/// A calibration name, or a path to a calibration TOML file.
pub fn load_calibration(arg: &str) -> Result<Calibration> {
    let path = Path::new(arg);
    if path.extension().is_some_and(|e| e == "toml") || path.is_file() {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Calibration::from_toml(&text).with_context(|| format!("{}", path.display()));
    }
    Ok(Calibration::by_name(arg)?)
}

fn trace_csv(trace: &SimTrace) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    Ok(buf)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

pub fn run(scenario: &Path, out: &Path) -> Result<TraceSummary> {
    let spec = ScenarioSpec::from_path(scenario)?;
    let resolved = spec.resolve()?;
    let trace = resolved.run()?;
    let mut manifest = Manifest::new("run", resolved.config_hash(), &resolved.calibration)
        .arg("scenario", scenario.display());
    manifest.scenario = Some(spec);
    let mut dir = OutDir::create(out, manifest)?;
    dir.write("trace.csv", &trace_csv(&trace)?)?;
    dir.write("summary.json", (trace.summary_json() + "\n").as_bytes())?;
    dir.finish()?;
    Ok(trace.summary)
}

pub const REPORT_FILE: &str = "report.json";

pub fn paper_suite(cal: &Calibration, out: &Path) -> Result<SuiteReport> {
    let report = suite::run_paper_suite(cal)?;
    let manifest =
        Manifest::new("paper-suite", cal.config_hash(), cal).arg("calibration", &cal.name);
    let mut dir = OutDir::create(out, manifest)?;
    dir.write(REPORT_FILE, report.to_json().as_bytes())?;
    dir.write("report.txt", report.table().as_bytes())?;
    #[derive(Serialize)]
    struct CurveRow {
        #[serde(rename = "pressure_kPa")]
        p: f64,
        max_radial_displacement_mm: f64,
    }
    let curve: Vec<CurveRow> = report
        .inflation_curve
        .iter()
        .map(|&(p, d)| CurveRow {
            p,
            max_radial_displacement_mm: d,
        })
        .collect();
    dir.write("inflation_curve.csv", &csv_bytes(&curve)?)?;
    dir.write("traction.csv", &csv_bytes(&report.traction)?)?;
    dir.finish()?;
    Ok(report)
}

/// Re-runs a `paper-suite` report from its manifest and checks the report hash.
pub fn reproduce_suite(manifest_path: &Path) -> Result<(SuiteReport, bool)> {
    let m = Manifest::read(manifest_path)?;
    if m.command != "paper-suite" {
        bail!(
            "{}: manifest is for `{}`, not `paper-suite`",
            manifest_path.display(),
            m.command
        );
    }
    if m.calibration.config_hash() != m.calibration_hash {
        bail!(
            "{}: embedded calibration does not match its recorded hash",
            manifest_path.display()
        );
    }
    let expected = m
        .outputs
        .get(REPORT_FILE)
        .ok_or_else(|| anyhow!("{}: no `{REPORT_FILE}` entry", manifest_path.display()))?;
    let report = suite::run_paper_suite(&m.calibration)?;
    let same = &sha256_hex(report.to_json().as_bytes()) == expected;
    Ok((report, same))
}

#[derive(Clone, Debug, Serialize)]
pub struct InflateRow {
    #[serde(rename = "pressure_kPa")]
    pub pressure_kpa: f64,
    pub max_radial_displacement_mm: f64,
    #[serde(rename = "chassis_contact_pressure_kPa")]
    pub chassis_contact_pressure_kpa: f64,
    #[serde(rename = "max_principal_stress_kPa")]
    pub max_principal_stress_kpa: f64,
    pub enclosed_volume_mm3: f64,
    pub max_stretch: f64,
}

/// Warm-started inflation sweep. Stops early, keeping the rows so far, if
/// the stretch cap is reached.
pub fn inflate_curve(
    cal: &Calibration,
    style: Option<FlangeStyle>,
    max_kpa: f64,
    step_kpa: f64,
    out: &Path,
) -> Result<(Vec<InflateRow>, Option<CoreError>)> {
    if !(step_kpa > 0.0) || !(max_kpa >= 0.0) {
        bail!("--step-kpa must be > 0 and --max-kpa >= 0");
    }
    let m = &cal.membrane;
    let profile = match style {
        Some(s) if s != m.profile.flange_style => ChamberProfile::default_for(s),
        _ => m.profile.clone(),
    };
    let mut solver = ChamberSolver::new(&profile, &m.material, m.solver)?;
    let n = (max_kpa / step_kpa + 1e-9).floor() as usize;
    let mut rows = Vec::with_capacity(n + 1);
    let mut stopped = None;
    for k in 0..=n {
        let p = k as f64 * step_kpa;
        match solver.inflate(p) {
            Ok(s) => rows.push(InflateRow {
                pressure_kpa: p,
                max_radial_displacement_mm: s.max_radial_displacement_mm,
                chassis_contact_pressure_kpa: s.chassis_contact_pressure_kpa,
                max_principal_stress_kpa: s.max_principal_stress_kpa,
                enclosed_volume_mm3: s.enclosed_volume_mm3,
                max_stretch: s.max_stretch,
            }),
            Err(e @ CoreError::OverInflation { .. }) => {
                stopped = Some(e);
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let style_name = match profile.flange_style {
        FlangeStyle::Cf => "CF",
        FlangeStyle::Lf => "LF",
    };
    let manifest = Manifest::new("inflate-curve", cal.config_hash(), cal)
        .arg("calibration", &cal.name)
        .arg("profile", style_name)
        .arg("max_kPa", max_kpa)
        .arg("step_kPa", step_kpa);
    let mut dir = OutDir::create(out, manifest)?;
    dir.write("inflate_curve.csv", &csv_bytes(&rows)?)?;
    dir.finish()?;
    Ok((rows, stopped))
}

pub struct TractionOutput {
    pub rows: Vec<TractionRow>,
    pub stall_threshold_kpa: Option<f64>,
}

pub fn traction(
    cal: &Calibration,
    fixture_name: &str,
    pressures: &[f64],
    s_mm: f64,
    stall_step_kpa: Option<f64>,
    out: &Path,
) -> Result<TractionOutput> {
    let lumen = fixture(fixture_name)?;
    let robot = cal.robot()?;
    let rows = navigation::traction_sweep(&lumen, &robot, &cal.sim, pressures, s_mm)?;
    let stall_threshold_kpa = match stall_step_kpa {
        Some(step) => navigation::stall_threshold(&lumen, &robot, &cal.sim, s_mm, step)?,
        None => None,
    };
    let mut manifest = Manifest::new("traction", cal.config_hash(), cal)
        .arg("calibration", &cal.name)
        .arg("fixture", fixture_name)
        .arg("s_mm", s_mm)
        .arg("pressures_kPa", format!("{pressures:?}"));
    if let Some(step) = stall_step_kpa {
        manifest = manifest.arg("stall_step_kPa", step);
    }
    let mut dir = OutDir::create(out, manifest)?;
    dir.write("traction.csv", &csv_bytes(&rows)?)?;
    if let Some(step) = stall_step_kpa {
        let doc =
            serde_json::json!({ "stall_threshold_kPa": stall_threshold_kpa, "step_kPa": step });
        dir.write(
            "stall.json",
            (serde_json::to_string_pretty(&doc)? + "\n").as_bytes(),
        )?;
    }
    dir.finish()?;
    Ok(TractionOutput {
        rows,
        stall_threshold_kpa,
    })
}

/// Sets a dotted TOML path (e.g. `tracks.mu_track_lumen`) in a calibration.
pub fn with_parameter(cal: &Calibration, path: &str, value: f64) -> Result<Calibration> {
    let mut doc: toml::Value = toml::Value::try_from(cal)?;
    let mut node = &mut doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("`{path}`: `{}` is not a table", keys[..i].join(".")))?;
        node = table
            .get_mut(*key)
            .ok_or_else(|| anyhow!("`{path}`: no parameter `{key}`"))?;
    }
    *node = match node {
        toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
        toml::Value::Float(_) => toml::Value::Float(value),
        other => bail!("`{path}`: not a numeric parameter ({})", other.type_str()),
    };
    let cal: Calibration = doc
        .try_into()
        .with_context(|| format!("`{path}` = {value}"))?;
    cal.validate()
        .with_context(|| format!("`{path}` = {value}"))?;
    Ok(cal)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub config_hash: String,
    pub termination: String,
    pub distance_mm: Option<f64>,
    pub mean_speed_mmps: Option<f64>,
    pub duration_s: Option<f64>,
    pub stall_events: Option<usize>,
    pub error: String,
}

/// Runs one scenario per parameter value on a pool of `jobs` workers.
/// Failed runs become rows with an error message.
pub fn sweep(
    scenario: &Path,
    parameter: &str,
    values: &[f64],
    jobs: usize,
    out: &Path,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        bail!("--values: give at least one value");
    }
    let spec = ScenarioSpec::from_path(scenario)?;
    let base = spec.calibration()?;
    // Surface path errors once, before fanning out.
    with_parameter(&base, parameter, values[0])?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        values
            .par_iter()
            .map(|&v| {
                let attempt = with_parameter(&base, parameter, v)
                    .and_then(|cal| Ok(spec.resolve_with(cal)?))
                    .and_then(|r| Ok((r.config_hash(), r.run()?)));
                match attempt {
                    Ok((hash, trace)) => {
                        let s = trace.summary;
                        SweepRow {
                            parameter: parameter.into(),
                            value: v,
                            config_hash: hash,
                            termination: serde_json::to_value(s.termination)
                                .ok()
                                .and_then(|t| t.as_str().map(str::to_string))
                                .unwrap_or_default(),
                            distance_mm: Some(s.distance_mm),
                            mean_speed_mmps: Some(s.mean_speed_mmps),
                            duration_s: Some(s.duration_s),
                            stall_events: Some(s.stall_events),
                            error: String::new(),
                        }
                    }
                    Err(e) => SweepRow {
                        parameter: parameter.into(),
                        value: v,
                        config_hash: String::new(),
                        termination: "error".into(),
                        distance_mm: None,
                        mean_speed_mmps: None,
                        duration_s: None,
                        stall_events: None,
                        error: format!("{e:#}"),
                    },
                }
            })
            .collect()
    });
    let mut manifest = Manifest::new("sweep", base.config_hash(), &base)
        .arg("scenario", scenario.display())
        .arg("parameter", parameter)
        .arg("values", format!("{values:?}"));
    manifest.scenario = Some(spec);
    let mut dir = OutDir::create(out, manifest)?;
    dir.write("sweep.csv", &csv_bytes(&rows)?)?;
    dir.finish()?;
    Ok(rows)
}
