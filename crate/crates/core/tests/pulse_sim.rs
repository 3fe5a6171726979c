use std::sync::LazyLock;

use proptest::prelude::*;
use tes_jitter::device_model::DeviceParams;
use tes_jitter::pulse_sim::*;
use tes_jitter::units::NANO;

static MODEL: LazyLock<PulseModel> =
    LazyLock::new(|| PulseModel::new(&PulseShapeParams::reference()).unwrap());

fn defaults() -> (SourceParams, PulseShapeParams, DeviceParams, DigitizerParams) {
    (
        SourceParams::reference(),
        PulseShapeParams::reference(),
        DeviceParams::reference(),
        DigitizerParams::reference(),
    )
}

/// 10–90 % rise and 1/e decay read off a 0.05 ns sampling of the pulse.
fn measured_shape(model: &PulseModel, n: u32) -> (f64, f64) {
    let dt = 0.05 * NANO;
    let v: Vec<f64> = (0..200_000).map(|i| model.ideal_pulse(n, i as f64 * dt).unwrap()).collect();
    let (ip, &peak) = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let cross = |lo: usize, hi: usize, level: f64| -> f64 {
        let i = (lo..hi).find(|&i| (v[i] - level) * (v[i + 1] - level) <= 0.0).unwrap();
        (i as f64 + (level - v[i]) / (v[i + 1] - v[i])) * dt
    };
    let rise = cross(0, ip, 0.9 * peak) - cross(0, ip, 0.1 * peak);
    let decay = cross(ip, v.len() - 1, peak / std::f64::consts::E) - ip as f64 * dt;
    (rise, decay)
}

#[test]
fn one_photon_profile_matches_measured_shape() {
    let model = PulseModel::new(&PulseShapeParams::reference()).unwrap();
    let (rise, decay) = measured_shape(&model, 1);
    assert!((rise / (24.8 * NANO) - 1.0).abs() < 0.02, "rise {rise:e}");
    assert!((decay / (759.0 * NANO) - 1.0).abs() < 0.02, "decay {decay:e}");
}

#[test]
fn three_photon_profile_matches_measured_shape() {
    let model = PulseModel::new(&PulseShapeParams::reference()).unwrap();
    let (rise, decay) = measured_shape(&model, 3);
    assert!((rise / (27.2 * NANO) - 1.0).abs() < 0.02, "rise {rise:e}");
    assert!((decay / (1692.0 * NANO) - 1.0).abs() < 0.02, "decay {decay:e}");
}

#[test]
fn decay_times_increase_and_amplitudes_are_sublinear() {
    let model = PulseModel::new(&PulseShapeParams::reference()).unwrap();
    let d: Vec<f64> = (1..=3).map(|n| model.metrics(n).decay_1e).collect();
    assert!(d[0] < d[1] && d[1] < d[2]);
    let a: Vec<f64> = (1..=3).map(|n| model.amplitude(n)).collect();
    assert!(a[0] < a[1] && a[1] < a[2]);
    assert!(a[1] < 2.0 * a[0] && a[2] < 3.0 * a[0]);
}

#[test]
fn compression_off_is_identity() {
    let mut p = PulseShapeParams::reference();
    p.compression = 0.0;
    for x in [0.0, 0.3, 1.0, 2.0, 7.5] {
        assert_eq!(p.compress_amplitude(x), x);
    }
}

#[test]
fn no_light_gives_noise_only_traces() {
    let (mut src, shape, dev, digi) = defaults();
    src.mean_photon_number = 0.0;
    let b = simulate_batch(&src, &shape, &dev, &digi, 200, None).unwrap();
    assert!(b.truth.as_ref().unwrap().iter().all(|g| g.n_true == 0));
    // Nothing approaching a one-photon pulse height.
    let max = b.samples.iter().map(|&c| f64::from(c) * digi.lsb()).fold(0.0, f64::max);
    assert!(max < 0.5, "{max}");
}

#[test]
fn same_seed_same_batch() {
    let (src, shape, dev, digi) = defaults();
    let a = simulate_batch(&src, &shape, &dev, &digi, 300, None).unwrap();
    let b = simulate_batch(&src, &shape, &dev, &digi, 300, None).unwrap();
    assert_eq!(a, b);
    let mut other = src;
    other.rng_seed += 1;
    assert_ne!(a.samples, simulate_batch(&other, &shape, &dev, &digi, 300, None).unwrap().samples);
}

#[test]
fn trace_streams_do_not_depend_on_batch_size() {
    let (src, shape, dev, digi) = defaults();
    let a = simulate_batch(&src, &shape, &dev, &digi, 50, None).unwrap();
    let b = simulate_batch(&src, &shape, &dev, &digi, 80, None).unwrap();
    assert_eq!(a.samples[..], b.samples[..a.samples.len()]);
}

#[test]
fn photon_numbers_are_poisson() {
    let (src, shape, dev, mut digi) = defaults();
    digi.trace_length = 128;
    let n = 100_000;
    let b = simulate_batch(&src, &shape, &dev, &digi, n, None).unwrap();
    let mut counts = [0usize; 8];
    for g in b.truth.unwrap() {
        counts[(g.n_true as usize).min(7)] += 1;
    }
    let mu: f64 = 1.3;
    let mut pmf = [0.0; 8];
    let mut term = (-mu).exp();
    for (k, p) in pmf.iter_mut().enumerate().take(7) {
        *p = term;
        term *= mu / (k + 1) as f64;
    }
    pmf[7] = 1.0 - pmf[..7].iter().sum::<f64>();
    for k in 0..8 {
        let expect = n as f64 * pmf[k];
        let sd = (n as f64 * pmf[k] * (1.0 - pmf[k])).sqrt();
        assert!(
            (counts[k] as f64 - expect).abs() <= 3.0 * sd.max(1.0),
            "k={k}: {} vs {expect:.1}",
            counts[k]
        );
    }
}

#[test]
fn quantization_within_half_lsb() {
    let (src, mut shape, dev, digi) = defaults();
    shape.noise_scale = 0.0;
    shape.energy_smearing = 0.0;
    let model = PulseModel::new(&shape).unwrap();
    let b = simulate_batch(&src, &shape, &dev, &digi, 500, None).unwrap();
    let lsb = digi.lsb();
    let top = (1i16 << (digi.bits - 1)) - 1;
    let mut checked = 0;
    for (i, g) in b.truth.as_ref().unwrap().iter().enumerate() {
        if b.codes(i).iter().any(|&c| c == top || c == -top - 1) {
            continue;
        }
        checked += 1;
        for (k, &c) in b.codes(i).iter().enumerate() {
            let t = k as f64 * digi.dt() - g.t0_true;
            let exact = if g.n_true == 0 { 0.0 } else { model.ideal_pulse(u32::from(g.n_true), t).unwrap() };
            assert!((f64::from(c) * lsb - exact).abs() <= 0.5 * lsb * (1.0 + 1e-12));
        }
    }
    assert!(checked > 450);
}

#[test]
fn clipping_is_counted() {
    let (mut src, shape, dev, mut digi) = defaults();
    src.mean_photon_number = 8.0;
    digi.full_scale = 1.0;
    let b = simulate_batch(&src, &shape, &dev, &digi, 50, None).unwrap();
    let top = (1i16 << (digi.bits - 1)) - 1;
    let rails = b.samples.iter().filter(|&&c| c == top || c == -top - 1).count() as u64;
    assert!(b.clipped_samples > 0);
    assert!(b.clipped_samples <= rails);
}

#[test]
fn noise_rms_matches_configuration() {
    // 16-bit digitizer so the check sees the generator, not the quantizer.
    let (mut src, shape, dev, mut digi) = defaults();
    src.mean_photon_number = 0.0;
    digi.bits = 16;
    let b = simulate_batch(&src, &shape, &dev, &digi, 1000, None).unwrap();
    let lsb = digi.lsb();
    let v: Vec<f64> = b.samples.iter().map(|&c| f64::from(c) * lsb).collect();
    assert!(v.len() >= 1_000_000);
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
    let target = trace_noise_rms(&shape, &dev);
    assert!((sd / target - 1.0).abs() < 0.02, "{sd} vs {target}");
}

#[test]
fn invalid_parameters_are_rejected() {
    let (mut src, shape, dev, mut digi) = defaults();
    digi.pre_trigger = digi.trace_length;
    assert!(simulate_batch(&src, &shape, &dev, &digi, 1, None).unwrap_err().is_validation());
    digi = DigitizerParams::reference();
    src.mean_photon_number = -1.0;
    assert!(simulate_batch(&src, &shape, &dev, &digi, 1, None).unwrap_err().is_validation());
}

proptest! {
    #[test]
    fn compression_is_monotone_and_concave(a in 0.0f64..3.0, d in 1e-6f64..1.0, s in 0.1f64..10.0) {
        let lim = s * std::f64::consts::FRAC_PI_2;
        let (x, y) = (a.min(lim - d), (a + d).min(lim));
        prop_assume!(0.0 <= x && x < y);
        prop_assert!(compress_amplitude(y, s) > compress_amplitude(x, s));
        prop_assert!(compress_amplitude(x, s) <= x);
        // Secant slopes shrink along the curve.
        let z = (y + d).min(lim);
        prop_assume!(z > y);
        let s1 = (compress_amplitude(y, s) - compress_amplitude(x, s)) / (y - x);
        let s2 = (compress_amplitude(z, s) - compress_amplitude(y, s)) / (z - y);
        prop_assert!(s2 <= s1 + 1e-12);
    }

    #[test]
    fn pulses_are_causal(n in 1u32..=16, t in -1e-6f64..=0.0) {
        prop_assert_eq!(MODEL.ideal_pulse(n, t).unwrap(), 0.0);
    }
}
