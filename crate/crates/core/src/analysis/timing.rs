//! Class mean pulses, rise/decay metrics and fractional-threshold timing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::{mean_of, pre_trigger_sums};
use super::histogram::PhotonClassAssignment;
use crate::error::{Error, Result};
use crate::pulse_sim::{TraceBatch, Waveform};
use crate::timing_fit::{fit_emg, EmgFit, FitStatus, Histogram};

/// Baseline-subtracted mean of the traces labelled `n`.
pub fn class_mean_pulse(
    batch: &TraceBatch,
    assignment: &PhotonClassAssignment,
    n: u32,
) -> Result<Waveform> {
    let members = assignment.members(n);
    if members.is_empty() {
        return Err(Error::EmptyClass(n));
    }
    mean_of(batch, &pre_trigger_sums(batch), &members, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiseFall {
    #[serde(rename = "rise_10_90_s")]
    pub rise_10_90: f64,
    #[serde(rename = "decay_1e_s")]
    pub decay_1e: f64,
    pub peak: f64,
    #[serde(rename = "peak_time_s")]
    pub peak_time: f64,
}

fn interp(v: &[f64], j: usize, level: f64) -> f64 {
    j as f64 + (level - v[j]) / (v[j + 1] - v[j])
}

/// 10–90 % rise and 1/e decay of a pulse, by linear interpolation.
pub fn rise_fall_metrics(trace: &Waveform) -> Result<RiseFall> {
    let v = &trace.values;
    let (ip, &peak) = v
        .iter()
        .enumerate()
        .rev()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::EmptyInput("empty trace"))?;
    if !(peak > 0.0) {
        return Err(Error::NoCrossing("trace has no positive maximum"));
    }
    // Last sample below the level before the peak.
    let rising = |level: f64| -> Result<f64> {
        let j = v[..ip]
            .iter()
            .rposition(|&x| x < level)
            .ok_or(Error::NoCrossing("no rising-edge crossing before the peak"))?;
        Ok(interp(v, j, level))
    };
    let t10 = rising(0.1 * peak)?;
    let t90 = rising(0.9 * peak)?;
    let e_level = peak / std::f64::consts::E;
    let k = v[ip..]
        .iter()
        .position(|&x| x < e_level)
        .ok_or(Error::NoCrossing("pulse does not decay to 1/e within the trace"))?
        + ip;
    let te = interp(v, k - 1, e_level);
    Ok(RiseFall {
        rise_10_90: (t90 - t10) * trace.dt,
        decay_1e: (te - ip as f64) * trace.dt,
        peak,
        peak_time: ip as f64 * trace.dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub trace: usize,
    pub class: u32,
    pub fraction: f64,
    /// Interpolated crossing time from the first sample; `None` is a miss.
    #[serde(rename = "time_s")]
    pub time: Option<f64>,
}

/// Level and first sample searched for one class and fraction.
fn search_window(mean: &Waveform, fraction: f64) -> Result<(f64, usize)> {
    let max = mean.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::NoCrossing("class mean pulse has no positive maximum"));
    }
    let level = fraction * max;
    let start = mean
        .values
        .iter()
        .position(|&x| x >= 0.5 * level)
        .unwrap_or(0)
        .saturating_sub(1);
    Ok((level, start))
}

pub(crate) fn crossings_for(
    batch: &TraceBatch,
    baselines: &[f64],
    members: &[usize],
    class: u32,
    mean: &Waveform,
    fraction: f64,
) -> Result<Vec<CrossingRecord>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("analysis.thresholds", "fractions must lie in (0, 1)"));
    }
    let (level, start) = search_window(mean, fraction)?;
    let lsb = batch.digitizer.lsb();
    let dt = batch.digitizer.dt();
    Ok(members
        .par_iter()
        .map(|&i| {
            let b = baselines[i];
            let codes = batch.codes(i);
            let x = |k: usize| f64::from(codes[k]) * lsb - b;
            let mut time = None;
            // Already above the level at the window start: use the upward
            // crossing that led there.
            let mut start = start;
            while start > 0 && x(start) >= level {
                start -= 1;
            }
            let mut prev = x(start);
            for k in start + 1..codes.len() {
                let cur = x(k);
                if prev < level && cur >= level {
                    time = Some(((k - 1) as f64 + (level - prev) / (cur - prev)) * dt);
                    break;
                }
                prev = cur;
            }
            CrossingRecord { trace: i, class, fraction, time }
        })
        .collect())
}

/// First upward crossing of `fraction × max(class mean)` for every pulse
/// trace (class 0 holds no pulse and is skipped).
///
/// The search starts one sample before the class mean reaches half the
/// level. Traces that never cross are returned with `time: None`.
pub fn threshold_crossings(
    batch: &TraceBatch,
    assignment: &PhotonClassAssignment,
    fraction: f64,
) -> Result<Vec<CrossingRecord>> {
    let pre = pre_trigger_sums(batch);
    let baselines = super::filter::baselines(batch);
    let mut out = Vec::new();
    for class in assignment.classes().filter(|&c| c > 0) {
        let members = assignment.members(class);
        if members.is_empty() {
            continue;
        }
        let mean = mean_of(batch, &pre, &members, 0)?;
        out.extend(crossings_for(batch, &baselines, &members, class, &mean, fraction)?);
    }
    out.sort_by_key(|r| r.trace);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthMethod {
    EmgFit,
    /// Too few occupied bins to fit: full spread of the crossing times.
    Spread,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterPoint {
    pub fraction: f64,
    pub level: f64,
    pub events: usize,
    pub misses: usize,
    #[serde(rename = "fwhm_s")]
    pub fwhm: Option<f64>,
    #[serde(rename = "fwhm_std_s")]
    pub fwhm_std: Option<f64>,
    pub method: WidthMethod,
    pub fit: Option<EmgFit>,
    pub histogram: Option<Histogram>,
    pub low_statistics: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterCurve {
    pub class: u32,
    pub points: Vec<JitterPoint>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Histogram of crossing times: robust span from the 0.1 % and 99.9 %
/// quantiles, bin width `max(dt/4, span/200)`.
pub fn crossing_histogram(times: &[f64], dt: f64) -> Option<Histogram> {
    if times.is_empty() {
        return None;
    }
    let mut s = times.to_vec();
    s.sort_by(f64::total_cmp);
    let (lo, hi) = (quantile(&s, 0.001), quantile(&s, 0.999));
    let width = (dt / 4.0).max((hi - lo) / 200.0);
    let lo = lo - width;
    let hi = hi + width;
    Some(Histogram::from_values(&s, lo, hi, width).0)
}

pub(crate) fn jitter_point(
    records: &[CrossingRecord],
    fraction: f64,
    level: f64,
    dt: f64,
    min_events: usize,
) -> JitterPoint {
    let times: Vec<f64> = records.iter().filter_map(|r| r.time).collect();
    let misses = records.len() - times.len();
    let hist = crossing_histogram(&times, dt);
    let fit = hist.as_ref().and_then(fit_emg);
    let usable = fit
        .as_ref()
        .filter(|f| f.status != FitStatus::Degenerate && f.fwhm.is_finite());
    let (fwhm, fwhm_std, method) = match usable {
        Some(f) => (Some(f.fwhm), Some(f.fwhm_std), WidthMethod::EmgFit),
        None if !times.is_empty() => {
            let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (Some(hi - lo), None, WidthMethod::Spread)
        }
        None => (None, None, WidthMethod::None),
    };
    JitterPoint {
        fraction,
        level,
        events: times.len(),
        misses,
        fwhm,
        fwhm_std,
        method,
        fit,
        histogram: hist,
        low_statistics: records.len() < min_events,
    }
}

/// Crossing-time FWHM versus threshold fraction for every pulse class.
pub fn jitter_vs_threshold(
    batch: &TraceBatch,
    assignment: &PhotonClassAssignment,
    fractions: &[f64],
    min_events: usize,
) -> Result<Vec<JitterCurve>> {
    let pre = pre_trigger_sums(batch);
    let baselines = super::filter::baselines(batch);
    let mut curves = Vec::new();
    for class in assignment.classes().filter(|&c| c > 0) {
        let members = assignment.members(class);
        if members.is_empty() {
            continue;
        }
        let mean = mean_of(batch, &pre, &members, 0)?;
        curves.push(jitter_curve(batch, &baselines, &members, class, &mean, fractions, min_events)?);
    }
    Ok(curves)
}

pub(crate) fn jitter_curve(
    batch: &TraceBatch,
    baselines: &[f64],
    members: &[usize],
    class: u32,
    mean: &Waveform,
    fractions: &[f64],
    min_events: usize,
) -> Result<JitterCurve> {
    let points = fractions
        .iter()
        .map(|&f| {
            let recs = crossings_for(batch, baselines, members, class, mean, f)?;
            let (level, _) = search_window(mean, f)?;
            Ok(jitter_point(&recs, f, level, batch.digitizer.dt(), min_events))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JitterCurve { class, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_exp(tr: f64, tf: f64, dt: f64, n: usize, t0: f64) -> Waveform {
        Waveform {
            dt,
            values: (0..n)
                .map(|i| {
                    let t = i as f64 * dt - t0;
                    if t > 0.0 { (-t / tf).exp() - (-t / tr).exp() } else { 0.0 }
                })
                .collect(),
        }
    }

    #[test]
    fn decay_of_two_exponential() {
        let w = two_exp(2e-9, 500e-9, 0.1e-9, 40_000, 10e-9);
        let m = rise_fall_metrics(&w).unwrap();
        assert!((m.decay_1e / 500e-9 - 1.0).abs() < 0.01, "{m:?}");
    }

    #[test]
    fn flat_trace_is_an_error() {
        let w = Waveform { dt: 1e-9, values: vec![0.0; 100] };
        assert!(rise_fall_metrics(&w).is_err());
        let w = Waveform { dt: 1e-9, values: vec![1.0; 100] };
        assert!(rise_fall_metrics(&w).is_err());
    }

    #[test]
    fn crossing_histogram_binning() {
        let times: Vec<f64> = (0..1000).map(|i| i as f64 * 1e-11).collect();
        let h = crossing_histogram(&times, 0.8e-9).unwrap();
        assert!((h.bin_width() - 0.2e-9).abs() < 1e-20);
        let wide: Vec<f64> = (0..1000).map(|i| i as f64 * 1e-9).collect();
        let h = crossing_histogram(&wide, 0.8e-9).unwrap();
        assert!((h.bin_width() - (998.001e-9 - 0.999e-9) / 200.0).abs() < 1e-20);
    }
}
