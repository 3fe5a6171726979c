//! Measurement pipeline: matched filtering, photon-number classification,
//! energy linearization, class mean pulses and threshold timing.
//!
//! [`analyze`] runs the whole chain on a [`TraceBatch`]. Ground truth carried
//! by simulated batches is never read by the pipeline itself; it is only
//! compared against afterwards in [`Closure`].

mod calibration;
mod filter;
mod histogram;
mod timing;

pub use calibration::{energy_calibration, robust_fwhm, EnergyCalibration, Pchip};
pub use filter::{baseline_noise, baselines, matched_filter, plain_areas, Template};
pub use histogram::{
    build_area_histogram, classify, AreaHistogram, Peak, PeakFinder, PhotonClassAssignment,
};
pub use timing::{
    class_mean_pulse, crossing_histogram, jitter_vs_threshold, rise_fall_metrics,
    threshold_crossings, CrossingRecord, JitterCurve, JitterPoint, RiseFall, WidthMethod,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse_sim::{TraceBatch, Waveform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Threshold fractions of the class mean-pulse maximum.
    pub thresholds: Vec<f64>,
    pub peak_finder: PeakFinder,
    /// Valley-to-peak ratio above which neighbouring classes are reported
    /// as overlapping.
    pub overlap_fraction: f64,
    /// Classes with fewer traces are flagged as low statistics.
    pub min_class_events: usize,
    /// Highest photon number included in the timing analysis.
    pub max_timing_class: u32,
    /// Traces whose post-trigger maximum exceeds this many baseline-noise
    /// standard deviations build the first-pass template.
    pub template_threshold_sigmas: f64,
    /// Second pass with per-class templates.
    pub refine_templates: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            thresholds: (1..=9).map(|k| k as f64 / 10.0).collect(),
            peak_finder: PeakFinder::default(),
            overlap_fraction: 0.2,
            min_class_events: 100,
            max_timing_class: 3,
            template_threshold_sigmas: 5.0,
            refine_templates: true,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::invalid("analysis.thresholds", "at least one fraction required"));
        }
        if let Some(f) = self.thresholds.iter().find(|&&f| !(f > 0.0 && f < 1.0)) {
            return Err(Error::invalid(
                "analysis.thresholds",
                format!("fraction {f} outside (0, 1)"),
            ));
        }
        if self.peak_finder.bins < 3 {
            return Err(Error::invalid("analysis.peak_finder.bins", "need at least 3 bins"));
        }
        if !(self.peak_finder.smoothing_fraction >= 0.0 && self.peak_finder.significance >= 0.0) {
            return Err(Error::invalid("analysis.peak_finder", "negative setting"));
        }
        if !(self.overlap_fraction > 0.0) {
            return Err(Error::invalid("analysis.overlap_fraction", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: u32,
    pub count: usize,
    pub mean_score: f64,
    pub mean_pulse: Waveform,
    pub metrics: Option<RiseFall>,
}

/// Measured-versus-true comparison for simulated batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Closure {
    /// `confusion[true][label]` for photon numbers up to the last class.
    pub confusion: Vec<Vec<usize>>,
    /// Fraction of traces with `n_true <= max_timing_class` labelled correctly.
    pub accuracy: f64,
    pub timing: Vec<ClosureTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureTiming {
    pub class: u32,
    pub fraction: f64,
    /// Mean of `crossing − t0_true` over correctly labelled traces, s.
    #[serde(rename = "mean_delay_s")]
    pub mean_delay: f64,
    #[serde(rename = "std_delay_s")]
    pub std_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub n_traces: usize,
    #[serde(rename = "baseline_noise")]
    pub noise: f64,
    pub template: Vec<f64>,
    pub histogram: AreaHistogram,
    pub classification_available: bool,
    pub assignment: Option<PhotonClassAssignment>,
    pub calibration: Option<EnergyCalibration>,
    pub classes: Vec<ClassSummary>,
    pub jitter: Vec<JitterCurve>,
    pub closure: Option<Closure>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub scores: Vec<f64>,
}

fn all_traces(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Runs the full pipeline. When fewer than two histogram peaks are found the
/// result carries `classification_available = false` and stops after the
/// histogram.
pub fn analyze(
    batch: &TraceBatch,
    opts: &AnalysisOptions,
    photon_energy: f64,
) -> Result<AnalysisResult> {
    opts.validate()?;
    batch.digitizer.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyInput("trace batch holds no traces"));
    }
    let n = batch.len();
    let pre = batch.digitizer.pre_trigger;
    let lsb = batch.digitizer.lsb();
    let pre_sums = filter::pre_trigger_sums(batch);
    let base = filter::baselines(batch);
    let noise = filter::baseline_noise(batch);
    let mut warnings = Vec::new();

    // First pass: one template from every trace well above the noise.
    let cut = opts.template_threshold_sigmas * noise.max(lsb);
    let pulsed: Vec<usize> = (0..n)
        .filter(|&i| {
            let max = batch.codes(i)[pre..].iter().copied().max().unwrap_or(0);
            f64::from(max) * lsb - base[i] > cut
        })
        .collect();
    if pulsed.is_empty() {
        return Err(Error::EmptyInput("no trace rises above the noise"));
    }
    let global_shape = filter::mean_of(batch, &pre_sums, &pulsed, pre)?;
    let global = Template::new(&global_shape, pre)?;
    let everyone = all_traces(n);
    let global_scale = amplitude_scale(&global_shape);
    let first_pass = |t: &Template| -> Vec<f64> {
        filter::scores(batch, &base, t, &everyone)
            .into_iter()
            .map(|s| s * global_scale)
            .collect()
    };
    let mut scores = first_pass(&global);
    let mut hist = build_area_histogram(&scores, &opts.peak_finder)?;

    if hist.classification_available && opts.refine_templates {
        let first = classify(&scores, &hist, opts.overlap_fraction)?;
        scores = refined_scores(batch, &pre_sums, &base, &first, &scores)?;
        let refined = build_area_histogram(&scores, &opts.peak_finder)?;
        if refined.classification_available {
            hist = refined;
        } else {
            warnings.push("per-class templates lost the peak structure; kept the first pass".into());
            scores = first_pass(&global);
        }
    }

    let mut result = AnalysisResult {
        n_traces: n,
        noise,
        template: global.values.clone(),
        classification_available: hist.classification_available,
        histogram: hist,
        assignment: None,
        calibration: None,
        classes: Vec::new(),
        jitter: Vec::new(),
        closure: None,
        warnings,
        scores,
    };
    if !result.classification_available {
        result
            .warnings
            .push(format!("only {} histogram peak(s); classification unavailable", result.histogram.peaks.len()));
        return Ok(result);
    }

    let assignment = classify(&result.scores, &result.histogram, opts.overlap_fraction)?;
    result.warnings.extend(assignment.warnings.iter().cloned());

    match energy_calibration(&result.histogram, photon_energy) {
        Ok(mut cal) => {
            let of = |n: u32| -> Vec<f64> {
                assignment.members(n).iter().map(|&i| result.scores[i]).collect()
            };
            cal.set_resolution(&of(0), &of(1));
            result.calibration = Some(cal);
        }
        Err(e) => result.warnings.push(format!("energy calibration skipped: {e}")),
    }

    for class in assignment.classes() {
        let members = assignment.members(class);
        if members.is_empty() {
            result.warnings.push(format!("class {class} is empty"));
            continue;
        }
        let mean_pulse = filter::mean_of(batch, &pre_sums, &members, 0)?;
        let metrics = if class > 0 { rise_fall_metrics(&mean_pulse).ok() } else { None };
        if class > 0 && metrics.is_none() {
            result
                .warnings
                .push(format!("class {class}: rise/decay not measurable within the trace"));
        }
        let mean_score = members.iter().map(|&i| result.scores[i]).sum::<f64>() / members.len() as f64;
        if class > 0 && class <= opts.max_timing_class {
            if members.len() < opts.min_class_events {
                result.warnings.push(format!(
                    "class {class}: {} events, below {} (low statistics)",
                    members.len(),
                    opts.min_class_events
                ));
            }
            result.jitter.push(timing::jitter_curve(
                batch,
                &base,
                &members,
                class,
                &mean_pulse,
                &opts.thresholds,
                opts.min_class_events,
            )?);
        }
        result.classes.push(ClassSummary {
            class,
            count: members.len(),
            mean_score,
            mean_pulse,
            metrics,
        });
    }

    if let Some(truth) = &batch.truth {
        result.closure = Some(closure(batch, truth, &assignment, &result.classes, &base, opts)?);
    }
    result.assignment = Some(assignment);
    Ok(result)
}

/// Scores each trace with the mean pulse of its first-pass class.
fn refined_scores(
    batch: &TraceBatch,
    pre_sums: &[i64],
    base: &[f64],
    first: &PhotonClassAssignment,
    old: &[f64],
) -> Result<Vec<f64>> {
    let pre = batch.digitizer.pre_trigger;
    let mut out = old.to_vec();
    for class in first.classes().filter(|&c| c > 0) {
        let members = first.members(class);
        if members.len() < 10 {
            continue;
        }
        let shape = filter::mean_of(batch, pre_sums, &members, pre)?;
        let t = Template::new(&shape, pre)?;
        let k = amplitude_scale(&shape);
        for (&i, s) in members.iter().zip(filter::scores(batch, base, &t, &members)) {
            out[i] = k * s;
        }
    }
    Ok(out)
}

/// Converts a unit-template filter output into pulse-height units: a trace
/// equal to `shape` scores `max(shape)`.
fn amplitude_scale(shape: &Waveform) -> f64 {
    let max = shape.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = shape.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    max / norm
}

fn closure(
    batch: &TraceBatch,
    truth: &[crate::pulse_sim::GroundTruth],
    assignment: &PhotonClassAssignment,
    classes: &[ClassSummary],
    base: &[f64],
    opts: &AnalysisOptions,
) -> Result<Closure> {
    let top = *assignment.classes().end() as usize;
    let mut confusion = vec![vec![0usize; top + 1]; top + 1];
    let (mut good, mut total) = (0usize, 0usize);
    for (gt, &label) in truth.iter().zip(&assignment.labels) {
        let t = (gt.n_true as usize).min(top);
        confusion[t][label as usize] += 1;
        if u32::from(gt.n_true) <= opts.max_timing_class {
            total += 1;
            good += usize::from(u32::from(gt.n_true) == label);
        }
    }
    let mut timing = Vec::new();
    for c in classes.iter().filter(|c| c.class > 0 && c.class <= opts.max_timing_class) {
        let members: Vec<usize> = assignment
            .members(c.class)
            .into_iter()
            .filter(|&i| u32::from(truth[i].n_true) == c.class)
            .collect();
        if members.is_empty() {
            continue;
        }
        for &f in &opts.thresholds {
            let recs = timing::crossings_for(batch, base, &members, c.class, &c.mean_pulse, f)?;
            let d: Vec<f64> = recs
                .iter()
                .filter_map(|r| r.time.map(|t| t - truth[r.trace].t0_true))
                .collect();
            if d.is_empty() {
                continue;
            }
            let m = d.iter().sum::<f64>() / d.len() as f64;
            let v = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d.len() as f64;
            timing.push(ClosureTiming {
                class: c.class,
                fraction: f,
                mean_delay: m,
                std_delay: v.sqrt(),
            });
        }
    }
    Ok(Closure {
        confusion,
        accuracy: if total > 0 { good as f64 / total as f64 } else { f64::NAN },
        timing,
    })
}
