use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tes_jitter::analysis::{analyze, AnalysisOptions};
use tes_jitter::device_model::*;
use tes_jitter::pulse_sim::*;
use tes_jitter::timing_fit::*;
use tes_jitter::units::NANO;

fn batch(n: usize) -> TraceBatch {
    simulate_batch(
        &SourceParams::reference(),
        &PulseShapeParams::reference(),
        &DeviceParams::reference(),
        &DigitizerParams::reference(),
        n,
        None,
    )
    .unwrap()
}

fn model(c: &mut Criterion) {
    let dev = DeviceParams::reference();
    let ranges = ParamRange::reference();
    c.bench_function("predicted_jitter_fwhm", |b| b.iter(|| predicted_jitter_fwhm(black_box(&dev))));
    c.bench_function("corner_search", |b| b.iter(|| corner_search(black_box(&ranges)).unwrap()));
    let grid = linear_grid(NANO, 100.0 * NANO, 100).unwrap();
    c.bench_function("jitter_envelope_100", |b| b.iter(|| jitter_envelope(&ranges, black_box(&grid)).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.bench_function("1000_traces", |b| b.iter(|| batch(black_box(1000))));
    g.finish();
}

fn analysis(c: &mut Criterion) {
    let data = batch(20_000);
    let opts = AnalysisOptions::default();
    let hv = DeviceParams::reference().photon_energy;
    let mut g = c.benchmark_group("analyze");
    g.sample_size(10);
    g.bench_function("20000_traces", |b| b.iter(|| analyze(black_box(&data), &opts, hv).unwrap()));
    g.finish();
}

fn fitting(c: &mut Criterion) {
    let p = EmgParams { amplitude: 1e4, t0: 0.0, sigma: 2.0, tau: 0.2 };
    let centers: Vec<f64> = (0..200).map(|i| -10.0 + 0.25 * (i as f64 + 0.5)).collect();
    let counts = centers.iter().map(|&t| emg_eval(&p, t)).collect();
    let h = Histogram { centers, counts };
    c.bench_function("fit_emg_200_bins", |b| b.iter(|| fit_emg(black_box(&h)).unwrap()));
}

criterion_group!(benches, model, simulation, analysis, fitting);
criterion_main!(benches);
