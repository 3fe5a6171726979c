//! Baselines, fixed-lag matched filtering and integer-exact trace averages.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pulse_sim::{TraceBatch, Waveform};

/// Unit-norm filter template aligned with the trace from `offset` onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub dt: f64,
    pub offset: usize,
    pub values: Vec<f64>,
}

impl Template {
    /// Normalizes `shape` (already baseline subtracted) to unit norm.
    pub fn new(shape: &Waveform, offset: usize) -> Result<Self> {
        let norm = shape.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::EmptyInput("template has zero norm"));
        }
        Ok(Template {
            dt: shape.dt,
            offset,
            values: shape.values.iter().map(|v| v / norm).collect(),
        })
    }
}

/// Inner product of a baseline-subtracted trace with a unit-norm template.
pub fn matched_filter(trace: &Waveform, template: &Template) -> Result<f64> {
    if trace.values.len() != template.values.len() {
        return Err(Error::LengthMismatch {
            expected: template.values.len(),
            got: trace.values.len(),
        });
    }
    if ((trace.dt - template.dt) / template.dt).abs() > 1e-12 {
        return Err(Error::SampleIntervalMismatch);
    }
    Ok(dot(&trace.values, &template.values))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sum of the pre-trigger codes of every trace.
pub(crate) fn pre_trigger_sums(batch: &TraceBatch) -> Vec<i64> {
    let pre = batch.digitizer.pre_trigger;
    (0..batch.len())
        .into_par_iter()
        .map(|i| batch.codes(i)[..pre].iter().map(|&c| i64::from(c)).sum())
        .collect()
}

/// Per-trace baseline: mean of the pre-trigger samples, signal units.
pub fn baselines(batch: &TraceBatch) -> Vec<f64> {
    let pre = batch.digitizer.pre_trigger;
    if pre == 0 {
        return vec![0.0; batch.len()];
    }
    let lsb = batch.digitizer.lsb();
    pre_trigger_sums(batch)
        .into_iter()
        .map(|s| s as f64 / pre as f64 * lsb)
        .collect()
}

/// Pooled pre-trigger standard deviation, signal units.
pub fn baseline_noise(batch: &TraceBatch) -> f64 {
    let pre = batch.digitizer.pre_trigger;
    if pre < 2 || batch.is_empty() {
        return 0.0;
    }
    // Exact integer moments keep the result independent of trace order.
    let (ss, n): (i128, i128) = (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let c = &batch.codes(i)[..pre];
            let s: i128 = c.iter().map(|&v| i128::from(v)).sum();
            let s2: i128 = c.iter().map(|&v| i128::from(v) * i128::from(v)).sum();
            (s2 * pre as i128 - s * s, pre as i128 * (pre as i128 - 1))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    (ss as f64 / n as f64).sqrt() * batch.digitizer.lsb()
}

/// Baseline-subtracted mean of the selected traces over `[offset, len)`.
///
/// Sums are accumulated in integers, so the result does not depend on the
/// order of `members`.
pub(crate) fn mean_of(
    batch: &TraceBatch,
    pre_sums: &[i64],
    members: &[usize],
    offset: usize,
) -> Result<Waveform> {
    if members.is_empty() {
        return Err(Error::EmptyInput("no traces to average"));
    }
    let len = batch.digitizer.trace_length;
    let pre = batch.digitizer.pre_trigger;
    let mut sums = vec![0i64; len - offset];
    let mut base: i64 = 0;
    for &i in members {
        for (s, &c) in sums.iter_mut().zip(&batch.codes(i)[offset..]) {
            *s += i64::from(c);
        }
        base += pre_sums[i];
    }
    let m = members.len() as f64;
    let lsb = batch.digitizer.lsb();
    let base = if pre > 0 { base as f64 / pre as f64 } else { 0.0 };
    Ok(Waveform {
        dt: batch.digitizer.dt(),
        values: sums.iter().map(|&s| (s as f64 - base) / m * lsb).collect(),
    })
}

/// Filter scores of the given traces against `template`.
pub(crate) fn scores(
    batch: &TraceBatch,
    baselines: &[f64],
    template: &Template,
    traces: &[usize],
) -> Vec<f64> {
    let lsb = batch.digitizer.lsb();
    traces
        .par_iter()
        .map(|&i| {
            let b = baselines[i];
            batch.codes(i)[template.offset..]
                .iter()
                .zip(&template.values)
                .map(|(&c, t)| (f64::from(c) * lsb - b) * t)
                .sum()
        })
        .collect()
}

/// Unweighted sum of the baseline-subtracted samples after the trigger.
pub fn plain_areas(batch: &TraceBatch, baselines: &[f64]) -> Vec<f64> {
    let lsb = batch.digitizer.lsb();
    let pre = batch.digitizer.pre_trigger;
    (0..batch.len())
        .into_par_iter()
        .map(|i| {
            batch.codes(i)[pre..]
                .iter()
                .map(|&c| f64::from(c) * lsb - baselines[i])
                .sum()
        })
        .collect()
}
