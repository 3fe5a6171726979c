//! Synthetic digitized TES photon-detection traces.
//!
//! Pulse model: a two-exponential current pulse `e^{−t/τ_fall} − e^{−t/τ_r}`
//! passed through a first-order low-pass standing in for the room-temperature
//! amplifier, normalised to unit peak and scaled by the (compressed) pulse
//! amplitude. `τ_r` and `τ_fall` are solved per photon number so the pulse
//! shows the configured 10–90 % rise and 1/e decay times.
//!
//! Each trace gets its own ChaCha stream keyed by `(seed, trace index)`, so a
//! batch is bit-identical however the work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device_model::{self, DeviceParams};
use crate::error::{Error, Result};
use crate::timing_fit::bisect;
use crate::units::{NANO, RISE_10_90_PER_TIME_CONSTANT};

/// Target rise and decay times of an n-photon pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonShape {
    #[serde(rename = "rise_10_90_s")]
    pub rise_10_90: f64,
    #[serde(rename = "decay_1e_s")]
    pub decay_1e: f64,
}

/// Damped sinusoid added after the amplifier filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ringing {
    /// Fraction of the pulse amplitude.
    pub amplitude_fraction: f64,
    #[serde(rename = "frequency_hz")]
    pub frequency: f64,
    #[serde(rename = "damping_time_s")]
    pub damping_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseShapeParams {
    /// Shape targets for n = 1, 2, ...; photon numbers past the end of the
    /// table reuse the last entry.
    pub shapes: Vec<PhotonShape>,
    /// Largest photon number the model accepts.
    pub max_photon_number: u32,
    /// Linear (uncompressed) single-photon pulse height, signal units.
    pub amplitude_per_photon: f64,
    /// Open-loop SQUID compression strength. The response is
    /// `s·sin(x/s)` with `s = amplitude_per_photon / compression`;
    /// zero disables it.
    pub compression: f64,
    /// Gaussian spread of the deposited energy, in units of one photon.
    pub energy_smearing: f64,
    /// Amplifier 10–90 % rise time; the low-pass time constant is
    /// `tau_ext / ln 9`.
    #[serde(rename = "tau_ext_s")]
    pub tau_ext: f64,
    /// Multiplier on the device-model RMS noise when mapped to signal units.
    pub noise_scale: f64,
    /// Pass the noise through the same amplifier low-pass as the signal.
    pub noise_band_limited: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ringing: Option<Ringing>,
}

impl PulseShapeParams {
    /// Profile matching the measured averages: 10–90 % rise 24.8/25.6/27.2 ns
    /// and 1/e decay 759/1278/1692 ns for one to three photons.
    pub fn reference() -> Self {
        PulseShapeParams {
            shapes: vec![
                PhotonShape { rise_10_90: 24.8 * NANO, decay_1e: 759.0 * NANO },
                PhotonShape { rise_10_90: 25.6 * NANO, decay_1e: 1278.0 * NANO },
                PhotonShape { rise_10_90: 27.2 * NANO, decay_1e: 1692.0 * NANO },
            ],
            max_photon_number: 16,
            amplitude_per_photon: 1.0,
            compression: 0.25,
            energy_smearing: 0.15,
            tau_ext: 17.5 * NANO,
            // Trace noise of about 0.065 one-photon heights for the default device.
            noise_scale: 0.176,
            noise_band_limited: true,
            ringing: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::invalid("shape.shapes", "at least one photon shape required"));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            if !(s.rise_10_90 > 0.0 && s.decay_1e > s.rise_10_90 && s.decay_1e.is_finite()) {
                return Err(Error::invalid(
                    format!("shape.shapes[{i}]"),
                    "need 0 < rise_10_90 < decay_1e",
                ));
            }
        }
        if self.max_photon_number == 0 || self.max_photon_number > u8::MAX as u32 {
            return Err(Error::invalid("shape.max_photon_number", "must be in 1..=255"));
        }
        let checks = [
            ("shape.amplitude_per_photon", self.amplitude_per_photon, true),
            ("shape.compression", self.compression, false),
            ("shape.energy_smearing", self.energy_smearing, false),
            ("shape.tau_ext", self.tau_ext, false),
            ("shape.noise_scale", self.noise_scale, false),
        ];
        for (field, v, strict) in checks {
            if !v.is_finite() || v < 0.0 || (strict && v == 0.0) {
                return Err(Error::invalid(field, format!("invalid value {v}")));
            }
        }
        if let Some(r) = &self.ringing {
            if !(r.frequency > 0.0 && r.damping_time > 0.0 && r.amplitude_fraction.is_finite()) {
                return Err(Error::invalid("shape.ringing", "need positive frequency and damping"));
            }
        }
        Ok(())
    }

    /// Compressed pulse height for a linear input height.
    pub fn compress_amplitude(&self, linear: f64) -> f64 {
        let scale = if self.compression > 0.0 {
            self.amplitude_per_photon / self.compression
        } else {
            f64::INFINITY
        };
        compress_amplitude(linear, scale)
    }
}

/// Sinusoidal open-loop SQUID response `s·sin(x/s)`, saturating at `s` past
/// the quarter period. `scale = ∞` is the identity.
pub fn compress_amplitude(linear: f64, scale: f64) -> f64 {
    if !scale.is_finite() {
        return linear;
    }
    let phase = linear / scale;
    if phase >= std::f64::consts::FRAC_PI_2 {
        scale
    } else {
        scale * phase.sin()
    }
}

/// Low-pass-filtered decaying exponential: `e^{−t/a}` switched on at `t = 0`
/// and passed through a first-order filter with time constant `c`.
fn filtered_exp(t: f64, a: f64, c: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return (-t / a).exp();
    }
    let d = a - c;
    if d == 0.0 {
        return t / c * (-t / c).exp();
    }
    // a/(a−c)·(e^{−t/a} − e^{−t/c}), written to survive a ≈ c.
    a / d * (-t / a).exp() * -(-t * d / (a * c)).exp_m1()
}

fn raw_shape(t: f64, tau_rise: f64, tau_fall: f64, lp: f64) -> f64 {
    filtered_exp(t, tau_fall, lp) - filtered_exp(t, tau_rise, lp)
}

/// Rise, decay and peak of a continuous pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    pub rise_10_90: f64,
    pub decay_1e: f64,
    pub peak_time: f64,
    pub peak: f64,
}

fn raw_metrics(tau_rise: f64, tau_fall: f64, lp: f64) -> ShapeMetrics {
    let f = |t: f64| raw_shape(t, tau_rise, tau_fall, lp);
    let span = 20.0 * (tau_rise + lp) + tau_fall;
    let (tp, _) = crate::device_model::golden_section_min(|t| -f(t), 0.0, span, 1e-12 * span);
    let peak = f(tp);
    let tol = 1e-14 * span;
    let t10 = bisect(|t| f(t) - 0.1 * peak, 0.0, tp, tol);
    let t90 = bisect(|t| f(t) - 0.9 * peak, 0.0, tp, tol);
    let mut hi = tp + tau_fall;
    while f(hi) > peak / std::f64::consts::E {
        hi += tau_fall;
    }
    let te = bisect(|t| f(t) - peak / std::f64::consts::E, tp, hi, tol);
    ShapeMetrics {
        rise_10_90: t90 - t10,
        decay_1e: te - tp,
        peak_time: tp,
        peak,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedShape {
    pub tau_rise: f64,
    pub tau_fall: f64,
    pub metrics: ShapeMetrics,
}

/// Solves `(τ_r, τ_fall)` for the target rise and decay by alternating
/// one-dimensional bisections.
pub fn calibrate_shape(target: PhotonShape, tau_ext: f64) -> Result<CalibratedShape> {
    let lp = tau_ext / RISE_10_90_PER_TIME_CONSTANT;
    let (r, d) = (target.rise_10_90, target.decay_1e);
    let fastest = raw_metrics(1e-6 * r, d, lp).rise_10_90;
    if fastest > r {
        return Err(Error::Calibration(format!(
            "rise time {r:e} s is faster than the amplifier alone ({fastest:e} s)"
        )));
    }
    let mut tau_rise = 0.3 * r;
    let mut tau_fall = d;
    for _ in 0..40 {
        let prev = (tau_rise, tau_fall);
        tau_fall = bisect(
            |x| raw_metrics(tau_rise, x, lp).decay_1e - d,
            0.2 * d,
            5.0 * d,
            1e-13 * d,
        );
        tau_rise = bisect(
            |x| raw_metrics(x, tau_fall, lp).rise_10_90 - r,
            1e-6 * r,
            r,
            1e-13 * r,
        );
        if ((tau_rise - prev.0) / tau_rise).abs() < 1e-12
            && ((tau_fall - prev.1) / tau_fall).abs() < 1e-12
        {
            break;
        }
    }
    let metrics = raw_metrics(tau_rise, tau_fall, lp);
    if ((metrics.rise_10_90 - r) / r).abs() > 1e-6 || ((metrics.decay_1e - d) / d).abs() > 1e-6 {
        return Err(Error::Calibration(format!(
            "could not reach rise {r:e} s / decay {d:e} s"
        )));
    }
    Ok(CalibratedShape { tau_rise, tau_fall, metrics })
}

/// Pulse shapes with solved time constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseModel {
    params: PulseShapeParams,
    low_pass: f64,
    calibrated: Vec<CalibratedShape>,
}

impl PulseModel {
    pub fn new(params: &PulseShapeParams) -> Result<Self> {
        params.validate()?;
        let calibrated = params
            .shapes
            .iter()
            .map(|&s| calibrate_shape(s, params.tau_ext))
            .collect::<Result<Vec<_>>>()?;
        Ok(PulseModel {
            params: params.clone(),
            low_pass: params.tau_ext / RISE_10_90_PER_TIME_CONSTANT,
            calibrated,
        })
    }

    pub fn params(&self) -> &PulseShapeParams {
        &self.params
    }

    pub fn calibrated(&self, n: u32) -> &CalibratedShape {
        let i = (n as usize).clamp(1, self.calibrated.len()) - 1;
        &self.calibrated[i]
    }

    /// Unit-peak pulse shape of an n-photon pulse arriving at `t = 0`.
    pub fn unit_shape(&self, n: u32, t: f64) -> f64 {
        let c = self.calibrated(n);
        raw_shape(t, c.tau_rise, c.tau_fall, self.low_pass) / c.metrics.peak
    }

    /// Compressed pulse height of an n-photon pulse without energy smearing.
    pub fn amplitude(&self, n: u32) -> f64 {
        self.params
            .compress_amplitude(n as f64 * self.params.amplitude_per_photon)
    }

    fn ringing(&self, amplitude: f64, t: f64) -> f64 {
        match &self.params.ringing {
            Some(r) if t > 0.0 => {
                amplitude
                    * r.amplitude_fraction
                    * (-t / r.damping_time).exp()
                    * (std::f64::consts::TAU * r.frequency * t).sin()
            }
            _ => 0.0,
        }
    }

    /// Noise-free pulse with pulse height `amplitude` and shape of photon number `n`.
    pub fn pulse_with_amplitude(&self, n: u32, amplitude: f64, t: f64) -> f64 {
        amplitude * self.unit_shape(n, t) + self.ringing(amplitude, t)
    }

    /// Noise-free n-photon pulse arriving at `t = 0`.
    pub fn ideal_pulse(&self, n: u32, t: f64) -> Result<f64> {
        if n == 0 || n > self.params.max_photon_number {
            return Err(Error::PhotonNumberOutOfRange {
                n,
                max: self.params.max_photon_number,
            });
        }
        Ok(self.pulse_with_amplitude(n, self.amplitude(n), t))
    }

    /// Shape metrics of the n-photon pulse (rise and decay exclude ringing).
    pub fn metrics(&self, n: u32) -> ShapeMetrics {
        self.calibrated(n).metrics
    }

    /// Root of `ideal_pulse(n, t) = level` on the rising edge.
    pub fn rising_crossing(&self, n: u32, level: f64) -> Option<f64> {
        let a = self.amplitude(n);
        let m = self.metrics(n);
        if !(level > 0.0 && level < a) {
            return None;
        }
        let f = |t: f64| self.pulse_with_amplitude(n, a, t) - level;
        Some(bisect(f, 0.0, m.peak_time, 1e-16))
    }
}

/// Oscilloscope settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitizerParams {
    #[serde(rename = "sample_rate_hz")]
    pub sample_rate: f64,
    pub bits: u8,
    /// Largest representable positive value, signal units. The range is
    /// bipolar, `[−full_scale, full_scale)`.
    pub full_scale: f64,
    /// Samples per trace.
    pub trace_length: usize,
    /// Samples before the trigger used for the baseline.
    pub pre_trigger: usize,
}

impl DigitizerParams {
    /// 1.25 GS/s, 8 bit.
    pub fn reference() -> Self {
        DigitizerParams {
            sample_rate: 1.25e9,
            bits: 8,
            full_scale: 4.0,
            trace_length: 1024,
            pre_trigger: 100,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Size of one ADC step, signal units.
    pub fn lsb(&self) -> f64 {
        self.full_scale / f64::from(1u32 << (self.bits - 1))
    }

    fn code_range(&self) -> (i32, i32) {
        let half = 1i32 << (self.bits - 1);
        (-half, half - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::invalid("digitizer.sample_rate", "must be positive"));
        }
        if !(1..=16).contains(&self.bits) {
            return Err(Error::invalid("digitizer.bits", "must be in 1..=16"));
        }
        if !(self.full_scale.is_finite() && self.full_scale > 0.0) {
            return Err(Error::invalid("digitizer.full_scale", "must be positive"));
        }
        if self.trace_length <= self.pre_trigger {
            return Err(Error::invalid(
                "digitizer.trace_length",
                "must exceed pre_trigger",
            ));
        }
        if self.trace_length > u32::MAX as usize {
            return Err(Error::invalid("digitizer.trace_length", "too long"));
        }
        Ok(())
    }

    /// Rounds to the nearest code; the flag reports clipping.
    pub fn quantize(&self, value: f64) -> (i16, bool) {
        let (lo, hi) = self.code_range();
        let code = (value / self.lsb()).round();
        if code < lo as f64 {
            (lo as i16, true)
        } else if code > hi as f64 {
            (hi as i16, true)
        } else {
            (code as i16, false)
        }
    }
}

/// Pulsed light source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Poisson mean of the photon number per pulse.
    pub mean_photon_number: f64,
    #[serde(rename = "repetition_rate_hz")]
    pub repetition_rate: f64,
    #[serde(rename = "optical_pulse_duration_s")]
    pub optical_pulse_duration: f64,
    /// Arrival time measured from the first sample of the trace.
    #[serde(rename = "arrival_time_offset_s")]
    pub arrival_time_offset: f64,
    /// Gaussian spread of the arrival time; zero means frame-locked.
    #[serde(rename = "timing_spread_s", default)]
    pub timing_spread: f64,
    pub rng_seed: u64,
}

impl SourceParams {
    /// 1550 nm diode laser, 1 ns pulses at 100 kHz.
    pub fn reference() -> Self {
        SourceParams {
            mean_photon_number: 1.3,
            repetition_rate: 100e3,
            optical_pulse_duration: 1.0 * NANO,
            arrival_time_offset: 100.0 * NANO,
            timing_spread: 0.0,
            rng_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photon_number.is_finite() && self.mean_photon_number >= 0.0) {
            return Err(Error::invalid("source.mean_photon_number", "must be >= 0"));
        }
        if !(self.repetition_rate.is_finite() && self.repetition_rate > 0.0) {
            return Err(Error::invalid("source.repetition_rate", "must be positive"));
        }
        if !(self.optical_pulse_duration >= 0.0 && self.timing_spread >= 0.0) {
            return Err(Error::invalid("source.timing_spread", "must be >= 0"));
        }
        if !self.arrival_time_offset.is_finite() {
            return Err(Error::invalid("source.arrival_time_offset", "must be finite"));
        }
        Ok(())
    }
}

/// Simulator-only truth attached to each trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(rename = "t0_true_s")]
    pub t0_true: f64,
    pub n_true: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub params_hash: String,
}

/// Uniformly sampled real-valued record (mean pulses, templates, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Waveform {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// A batch of quantized traces sharing one digitizer configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBatch {
    pub digitizer: DigitizerParams,
    /// Row-major `n_traces × trace_length` ADC codes.
    pub samples: Vec<i16>,
    pub truth: Option<Vec<GroundTruth>>,
    pub clipped_samples: u64,
    pub provenance: Option<Provenance>,
}

impl TraceBatch {
    pub fn len(&self) -> usize {
        self.samples.len() / self.digitizer.trace_length
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn codes(&self, i: usize) -> &[i16] {
        let n = self.digitizer.trace_length;
        &self.samples[i * n..(i + 1) * n]
    }

    /// Trace `i` in signal units.
    pub fn waveform(&self, i: usize) -> Waveform {
        let lsb = self.digitizer.lsb();
        Waveform {
            dt: self.digitizer.dt(),
            values: self.codes(i).iter().map(|&c| f64::from(c) * lsb).collect(),
        }
    }
}

/// Trace-level noise RMS in signal units: the device current noise mapped
/// through the single-photon gain `amplitude_per_photon / ΔI`.
pub fn trace_noise_rms(shape: &PulseShapeParams, dev: &DeviceParams) -> f64 {
    shape.amplitude_per_photon * device_model::rms_noise(dev) / device_model::delta_current(dev)
        * shape.noise_scale
}

/// Simulates `n_traces` digitized traces.
pub fn simulate_batch(
    src: &SourceParams,
    shape: &PulseShapeParams,
    dev: &DeviceParams,
    digi: &DigitizerParams,
    n_traces: usize,
    params_hash: Option<String>,
) -> Result<TraceBatch> {
    src.validate()?;
    dev.validate()?;
    digi.validate()?;
    let model = PulseModel::new(shape)?;
    let max_decay = shape
        .shapes
        .iter()
        .map(|s| s.decay_1e)
        .fold(0.0, f64::max);
    if 1.0 / src.repetition_rate < 5.0 * max_decay {
        return Err(Error::invalid(
            "source.repetition_rate",
            "period must be at least five decay times for isolated pulses",
        ));
    }

    let noise_rms = trace_noise_rms(shape, dev);
    let len = digi.trace_length;
    let dt = digi.dt();
    let ar = if shape.noise_band_limited && shape.tau_ext > 0.0 {
        (-dt * RISE_10_90_PER_TIME_CONSTANT / shape.tau_ext).exp()
    } else {
        0.0
    };
    let innovation = (1.0 - ar * ar).sqrt();
    let poisson = if src.mean_photon_number > 0.0 {
        Some(Poisson::new(src.mean_photon_number).map_err(|e| {
            Error::invalid("source.mean_photon_number", e.to_string())
        })?)
    } else {
        None
    };

    // Frame-locked arrivals share one sampled shape per photon number.
    let cached: Option<Vec<Vec<f64>>> = (src.timing_spread == 0.0).then(|| {
        (1..=shape.shapes.len() as u32)
            .map(|n| {
                (0..len)
                    .map(|i| model.unit_shape(n, i as f64 * dt - src.arrival_time_offset))
                    .collect()
            })
            .collect()
    });

    let per_trace: Vec<(Vec<i16>, GroundTruth, u64)> = (0..n_traces)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(src.rng_seed);
            rng.set_stream(index as u64);
            let n_draw = poisson.as_ref().map_or(0.0, |p| p.sample(&mut rng));
            let n = (n_draw as u32).min(shape.max_photon_number);
            let arrival = if src.timing_spread > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                src.arrival_time_offset + src.timing_spread * z
            } else {
                src.arrival_time_offset
            };
            let amplitude = if n > 0 {
                let z: f64 = rng.sample(StandardNormal);
                let linear = (n as f64 + shape.energy_smearing * z).max(0.0)
                    * shape.amplitude_per_photon;
                shape.compress_amplitude(linear)
            } else {
                0.0
            };

            let mut codes = Vec::with_capacity(len);
            let mut clipped = 0u64;
            let mut noise: f64 = rng.sample(StandardNormal);
            for i in 0..len {
                if i > 0 {
                    let z: f64 = rng.sample(StandardNormal);
                    noise = ar * noise + innovation * z;
                }
                let t = i as f64 * dt - arrival;
                let signal = if n == 0 {
                    0.0
                } else if let Some(cache) = &cached {
                    let shape_idx = (n as usize).min(cache.len()) - 1;
                    amplitude * cache[shape_idx][i] + model.ringing(amplitude, t)
                } else {
                    model.pulse_with_amplitude(n, amplitude, t)
                };
                let (code, clip) = digi.quantize(signal + noise_rms * noise);
                clipped += u64::from(clip);
                codes.push(code);
            }
            (
                codes,
                GroundTruth {
                    t0_true: arrival,
                    n_true: n as u8,
                },
                clipped,
            )
        })
        .collect();

    let mut samples = Vec::with_capacity(n_traces * len);
    let mut truth = Vec::with_capacity(n_traces);
    let mut clipped_samples = 0;
    for (codes, gt, clipped) in per_trace {
        samples.extend_from_slice(&codes);
        truth.push(gt);
        clipped_samples += clipped;
    }
    Ok(TraceBatch {
        digitizer: *digi,
        samples,
        truth: Some(truth),
        clipped_samples,
        provenance: Some(Provenance {
            seed: src.rng_seed,
            params_hash: params_hash.unwrap_or_default(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compression_identity_and_monotone() {
        assert_eq!(compress_amplitude(3.7, f64::INFINITY), 3.7);
        let mut prev = -1.0;
        for i in 0..600 {
            let x = i as f64 * 0.01;
            let y = compress_amplitude(x, 4.0);
            assert!(y > prev, "x = {x}");
            assert!(y <= x + 1e-15);
            prev = y;
        }
        assert_eq!(compress_amplitude(100.0, 4.0), 4.0);
    }

    #[test]
    fn peak_separations_shrink() {
        let p = PulseShapeParams::reference();
        let model = PulseModel::new(&p).unwrap();
        let amps: Vec<f64> = (0..=5).map(|n| if n == 0 { 0.0 } else { model.amplitude(n) }).collect();
        let seps: Vec<f64> = amps.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(seps.windows(2).all(|w| w[1] < w[0]), "{seps:?}");
    }

    #[test]
    fn filtered_exp_continuous_through_equal_constants() {
        let c = 8e-9;
        for &t in &[1e-9, 8e-9, 40e-9] {
            let at = filtered_exp(t, c, c);
            let near = filtered_exp(t, c * (1.0 + 1e-9), c);
            assert!(((at - near) / at).abs() < 1e-7);
        }
    }

    #[test]
    fn causal() {
        let model = PulseModel::new(&PulseShapeParams::reference()).unwrap();
        assert_eq!(model.ideal_pulse(1, -1e-9).unwrap(), 0.0);
        assert_eq!(model.ideal_pulse(2, 0.0).unwrap(), 0.0);
        assert!(model.ideal_pulse(1, 30e-9).unwrap() > 0.0);
    }

    #[test]
    fn photon_number_range() {
        let model = PulseModel::new(&PulseShapeParams::reference()).unwrap();
        assert!(matches!(
            model.ideal_pulse(17, 1e-8),
            Err(Error::PhotonNumberOutOfRange { n: 17, max: 16 })
        ));
        assert!(model.ideal_pulse(0, 1e-8).is_err());
    }

    #[test]
    fn calibrated_profiles_hit_targets() {
        let p = PulseShapeParams::reference();
        let model = PulseModel::new(&p).unwrap();
        for (n, target) in (1..).zip(&p.shapes) {
            let m = model.metrics(n);
            assert!(((m.rise_10_90 - target.rise_10_90) / target.rise_10_90).abs() < 1e-6);
            assert!(((m.decay_1e - target.decay_1e) / target.decay_1e).abs() < 1e-6);
        }
    }

    #[test]
    fn rise_faster_than_amplifier_is_rejected() {
        let target = PhotonShape { rise_10_90: 10.0 * NANO, decay_1e: 700.0 * NANO };
        assert!(matches!(calibrate_shape(target, 17.5 * NANO), Err(Error::Calibration(_))));
    }

    #[test]
    fn quantizer() {
        let d = DigitizerParams::reference();
        assert_eq!(d.lsb(), 4.0 / 128.0);
        assert_eq!(d.quantize(0.0), (0, false));
        assert_eq!(d.quantize(1.0), (32, false));
        assert_eq!(d.quantize(10.0), (127, true));
        assert_eq!(d.quantize(-10.0), (-128, true));
    }

    #[test]
    fn digitizer_validation() {
        let mut d = DigitizerParams::reference();
        d.bits = 17;
        assert!(d.validate().is_err());
        d = DigitizerParams::reference();
        d.pre_trigger = d.trace_length;
        assert!(d.validate().is_err());
    }
}
