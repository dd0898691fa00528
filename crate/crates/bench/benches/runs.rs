use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use softscreen_core::lumen::fixture;
use softscreen_core::navigation::{step, traction_sweep, Command, RobotState};
use softscreen_core::scenario::quickstart;
use softscreen_core::suite::run_paper_suite;
use softscreen_core::Calibration;

fn navigation(c: &mut Criterion) {
    let cal = Calibration::default_calibration();
    let robot = cal.robot().unwrap();
    let lumen = fixture("phantom_collapsed").unwrap();
    let state = RobotState::at(120.0);
    let cmd = Command::new(cal.transmission.max_motor_speed_radps, 10.0, 10.0);
    c.bench_function("step_collapsed_phantom", |b| {
        b.iter(|| step(black_box(&state), &cmd, &lumen, &robot, &cal.sim).unwrap())
    });
    c.bench_function("traction_sweep", |b| {
        b.iter(|| {
            traction_sweep(
                &lumen,
                &robot,
                &cal.sim,
                &[0.0, 5.0, 10.0, 13.0, 16.0],
                120.0,
            )
            .unwrap()
        })
    });

    let mut g = c.benchmark_group("runs");
    g.sample_size(10);
    let scenario = quickstart("pipe84", false).resolve().unwrap();
    g.bench_function("quickstart_pipe84", |b| b.iter(|| scenario.run().unwrap()));
    g.bench_function("paper_suite", |b| b.iter(|| run_paper_suite(&cal).unwrap()));
    g.finish();
}

criterion_group!(benches, navigation);
criterion_main!(benches);
