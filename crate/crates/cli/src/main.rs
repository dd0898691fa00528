use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use softscreen_cli::commands::{self, load_calibration};
use softscreen_cli::server::{self, ServeOptions};
use softscreen_cli::{exit, OUT_DIR_ENV};
use softscreen_core::membrane::FlangeStyle;
use softscreen_core::suite::HOLD_S_MM;
use softscreen_core::{ScenarioSpec, Termination};

#[derive(Parser)]
#[command(
    name = "softscreen",
    version,
    about = "Shape-shifting capsule robot simulator"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "softscreen-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Cf,
    Lf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario file; exits 2 if the robot stalls.
    Run { scenario: PathBuf },
    /// Reproduce the published experiments and compare against their numbers.
    PaperSuite {
        #[arg(long, default_value = "default")]
        calibration: String,
        /// Re-run the suite recorded in a manifest and check the report is identical.
        #[arg(long, conflicts_with = "calibration")]
        manifest: Option<PathBuf>,
        /// Exit 1 if any row fails.
        #[arg(long)]
        strict: bool,
    },
    /// Run a scenario once per value of a calibration parameter.
    Sweep {
        scenario: PathBuf,
        /// Dotted calibration path, e.g. `tracks.mu_track_lumen`.
        #[arg(long)]
        param: String,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        values: Vec<f64>,
        /// Worker threads (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Chamber pressure versus radial growth.
    InflateCurve {
        #[arg(long, default_value = "default")]
        calibration: String,
        #[arg(long, value_enum)]
        profile: Option<Profile>,
        /// Highest pressure (default: the calibrated limit).
        #[arg(long)]
        max_kpa: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        step_kpa: f64,
    },
    /// Static traction against chamber pressure in a fixture.
    Traction {
        #[arg(long, default_value = "default")]
        calibration: String,
        #[arg(long, default_value = "phantom_collapsed")]
        fixture: String,
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,13,16")]
        pressures: Vec<f64>,
        #[arg(long, default_value_t = HOLD_S_MM)]
        s_mm: f64,
        /// Also scan upward for the stall threshold with this step.
        #[arg(long)]
        stall_step_kpa: Option<f64>,
    },
    /// Serve a scenario for live teleoperation.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 20.0)]
        rate_hz: f64,
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
        /// Directory of static console assets served at `/`.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::ERROR)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let out = cli.out;
    match cli.command {
        Cmd::Run { scenario } => {
            let s = commands::run(&scenario, &out)?;
            println!(
                "{:?}: {:.1} mm in {:.2} s, mean {:.3} mm/s, {} stall event(s); outputs in {}",
                s.termination,
                s.distance_mm,
                s.duration_s,
                s.mean_speed_mmps,
                s.stall_events,
                out.display()
            );
            Ok(if s.termination == Termination::Stalled {
                exit::STALL
            } else {
                exit::OK
            })
        }
        Cmd::PaperSuite {
            calibration,
            manifest,
            strict,
        } => {
            let report = match manifest {
                Some(m) => {
                    let (report, same) = commands::reproduce_suite(&m)?;
                    print!("{}", report.table());
                    if !same {
                        eprintln!("report differs from the one recorded in {}", m.display());
                        return Ok(exit::ERROR);
                    }
                    println!("report reproduced bit-identically");
                    report
                }
                None => {
                    let report = commands::paper_suite(&load_calibration(&calibration)?, &out)?;
                    print!("{}", report.table());
                    println!("outputs in {}", out.display());
                    report
                }
            };
            Ok(if strict && !report.passed() {
                exit::ERROR
            } else {
                exit::OK
            })
        }
        Cmd::Sweep {
            scenario,
            param,
            values,
            jobs,
        } => {
            let jobs =
                jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rows = commands::sweep(&scenario, &param, &values, jobs, &out)?;
            for r in &rows {
                match r.mean_speed_mmps {
                    Some(v) => println!(
                        "{} = {}: {} mean {:.3} mm/s",
                        r.parameter, r.value, r.termination, v
                    ),
                    None => println!("{} = {}: error: {}", r.parameter, r.value, r.error),
                }
            }
            Ok(exit::OK)
        }
        Cmd::InflateCurve {
            calibration,
            profile,
            max_kpa,
            step_kpa,
        } => {
            let cal = load_calibration(&calibration)?;
            let max = max_kpa.unwrap_or(cal.limits.max_pressure_kpa);
            let style = profile.map(|p| match p {
                Profile::Cf => FlangeStyle::Cf,
                Profile::Lf => FlangeStyle::Lf,
            });
            let (rows, stopped) = commands::inflate_curve(&cal, style, max, step_kpa, &out)?;
            for r in &rows {
                println!(
                    "{:>6.2} kPa  {:>8.3} mm",
                    r.pressure_kpa, r.max_radial_displacement_mm
                );
            }
            if let Some(e) = stopped {
                println!("stopped: {e}");
            }
            Ok(exit::OK)
        }
        Cmd::Traction {
            calibration,
            fixture,
            pressures,
            s_mm,
            stall_step_kpa,
        } => {
            let cal = load_calibration(&calibration)?;
            let t = commands::traction(&cal, &fixture, &pressures, s_mm, stall_step_kpa, &out)?;
            for r in &t.rows {
                println!(
                    "{:>6.2} kPa  traction {:.3} N  contacts {}{}",
                    r.pressure_kpa,
                    r.traction_n,
                    r.tracks_in_contact,
                    if r.stalled { "  stalled" } else { "" }
                );
            }
            if stall_step_kpa.is_some() {
                match t.stall_threshold_kpa {
                    Some(p) => println!("stall threshold {p} kPa"),
                    None => println!("no stall up to the chamber limit"),
                }
            }
            Ok(exit::OK)
        }
        Cmd::Serve {
            scenario,
            port,
            host,
            rate_hz,
            time_scale,
            assets,
        } => {
            let spec = ScenarioSpec::from_path(&scenario)?;
            let resolved = spec.resolve()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                let opts = ServeOptions {
                    rate_hz,
                    time_scale,
                    out_dir: out,
                    assets,
                };
                let handle = server::start(&spec, &resolved, listener, opts).await?;
                println!("listening on http://{}", handle.addr());
                shutdown_signal().await;
                let outcome = handle.shutdown().await?;
                println!(
                    "{}: {} steps, trace in {}",
                    outcome.end_reason,
                    outcome.trace.summary.steps,
                    outcome.out_dir.display()
                );
                Ok(exit::OK)
            })
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .expect("install SIGTERM handler");
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = ctrl_c.await;
    }
}
