//! Structured run reports and CSV plot tables.
//!
//! Report tables are SI; plot tables use ns and nH so they can be drawn
//! directly. Every column carries a unit (empty for counts and ratios).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::AnalysisResult;
use crate::device_model::{self as dm, CornerSearch, DeviceParams, Interval, JitterEnvelope, ParamRange};
use crate::error::Result;
use crate::timing_fit::emg_eval;
use crate::units::{ELECTRON_VOLT, NANO};

/// Signal units of the digitizer input.
const SIGNAL: &str = "signal";

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.0.to_string()).collect(),
            units: columns.iter().map(|c| c.1.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of one column (`NaN` for empty cells).
    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64().unwrap_or(f64::NAN)).collect())
    }

    /// CSV with `name_unit` headers; empty cells for missing values.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let header = self.columns.iter().zip(&self.units).map(|(c, u)| {
            if u.is_empty() { c.clone() } else { format!("{c}_{u}") }
        });
        out.write_record(header).map_err(csv_err)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| match v {
                Value::Null => String::new(),
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }))
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    pub value: Option<f64>,
    pub unit: String,
}

impl Quantity {
    fn new(name: &str, value: f64, unit: &str) -> Self {
        Quantity {
            name: name.into(),
            value: value.is_finite().then_some(value),
            unit: unit.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the effective configuration.
    pub config_hash: String,
    pub seed: u64,
    /// SHA-256 of the analysed trace file.
    pub input_sha256: Option<String>,
    /// Wall-clock creation time; the only field allowed to differ between
    /// identical runs.
    pub timestamp_unix_s: Option<u64>,
}

impl ReportProvenance {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        ReportProvenance {
            tool: "tesjit".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            seed,
            input_sha256: None,
            timestamp_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub device: DeviceParams,
    pub quantities: Vec<Quantity>,
    /// Extremes over the corners of the configured parameter ranges.
    pub corners: CornerSearch,
}

impl Prediction {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.quantities.iter().find(|q| q.name == name)?.value
    }
}

/// Closed-form quantities for `device` plus the range-corner extremes.
pub fn prediction(device: &DeviceParams, ranges: &ParamRange) -> Result<Prediction> {
    device.validate()?;
    let l_star = dm::analytic_optimal_inductance(device);
    let opt = dm::optimal_inductance(device, Interval::new(l_star / 100.0, l_star * 100.0)?)?;
    let di = dm::delta_current(device);
    let irms = dm::rms_noise(device);
    let quantities = vec![
        Quantity::new("jitter_fwhm", dm::predicted_jitter_fwhm(device), "s"),
        Quantity::new("tau_el", dm::electrical_rise_time(device), "s"),
        Quantity::new("tau_ext", dm::external_rise_time(device), "s"),
        Quantity::new("tau_rise", dm::combined_rise_time(device), "s"),
        Quantity::new("delta_i", di, "A"),
        Quantity::new("i_rms", irms, "A"),
        Quantity::new("noise_to_signal", irms / di, ""),
        Quantity::new("bias_power", dm::equilibrium_power(device), "W"),
        Quantity::new("heat_capacity", dm::heat_capacity(device), "J/K"),
        Quantity::new("optimal_inductance", l_star, "H"),
        Quantity::new("optimal_inductance_numeric", opt.inductance, "H"),
        Quantity::new("jitter_fwhm_at_optimum", opt.jitter_fwhm, "s"),
    ];
    Ok(Prediction {
        device: *device,
        quantities,
        corners: dm::corner_search(ranges)?,
    })
}

/// A measured jitter point to overlay on the envelope plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredPoint {
    pub inductance: f64,
    pub fraction: f64,
    pub fwhm: f64,
}

/// Envelope plot table: `L [nH]`, `lower [ns]`, `upper [ns]`, and the
/// measured points (one per row from the top) when given.
pub fn envelope_table(env: &JitterEnvelope, measured: &[MeasuredPoint]) -> Table {
    let mut cols = vec![("inductance", "nH"), ("lower", "ns"), ("upper", "ns")];
    if !measured.is_empty() {
        cols.extend([("measured_inductance", "nH"), ("measured_fraction", ""), ("measured_fwhm", "ns")]);
    }
    let mut t = Table::new(&cols);
    let rows = env.inductance.len().max(measured.len());
    for i in 0..rows {
        let mut row = if i < env.inductance.len() {
            vec![
                num(env.inductance[i] / NANO),
                num(env.lower[i] / NANO),
                num(env.upper[i] / NANO),
            ]
        } else {
            vec![Value::Null; 3]
        };
        if !measured.is_empty() {
            match measured.get(i) {
                Some(m) => row.extend([num(m.inductance / NANO), num(m.fraction), num(m.fwhm / NANO)]),
                None => row.extend([Value::Null, Value::Null, Value::Null]),
            }
        }
        t.push(row);
    }
    t
}

/// Envelope table in SI for the report.
pub fn envelope_table_si(env: &JitterEnvelope) -> Table {
    let mut t = Table::new(&[("inductance", "H"), ("lower", "s"), ("upper", "s")]);
    for i in 0..env.inductance.len() {
        t.push(vec![num(env.inductance[i]), num(env.lower[i]), num(env.upper[i])]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n_traces: usize,
    pub baseline_noise: Quantity,
    pub classification_available: bool,
    pub first_photon_number: u32,
    pub peaks: Table,
    pub classes: Table,
    pub calibration: Option<CalibrationReport>,
    pub jitter: Table,
    pub closure: Option<ClosureReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub knots: Table,
    pub resolution: Vec<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub accuracy: Option<f64>,
    /// `confusion[true][label]`.
    pub confusion: Vec<Vec<usize>>,
    pub timing: Table,
}

impl AnalysisReport {
    pub fn from_result(r: &AnalysisResult) -> Self {
        let mut peaks = Table::new(&[("center", SIGNAL), ("height", ""), ("prominence", "")]);
        for p in &r.histogram.peaks {
            peaks.push(vec![num(p.center), num(p.height), num(p.prominence)]);
        }

        let mut classes = Table::new(&[
            ("class", ""),
            ("count", ""),
            ("fraction", ""),
            ("mean_score", SIGNAL),
            ("peak", SIGNAL),
            ("rise_10_90", "s"),
            ("decay_1e", "s"),
        ]);
        for c in &r.classes {
            let m = c.metrics;
            classes.push(vec![
                c.class.into(),
                c.count.into(),
                num(c.count as f64 / r.n_traces as f64),
                num(c.mean_score),
                opt(m.map(|m| m.peak)),
                opt(m.map(|m| m.rise_10_90)),
                opt(m.map(|m| m.decay_1e)),
            ]);
        }

        let calibration = r.calibration.as_ref().map(|cal| {
            let mut knots = Table::new(&[
                ("photon_number", ""),
                ("score", SIGNAL),
                ("energy", "J"),
                ("linearity_residual", "J"),
            ]);
            for (k, &n) in cal.photon_numbers.iter().enumerate() {
                knots.push(vec![
                    n.into(),
                    num(cal.map.x[k]),
                    num(cal.map.y[k]),
                    num(cal.linearity_residuals[k]),
                ]);
            }
            let ev = |x: Option<f64>| x.map_or(f64::NAN, |v| v / ELECTRON_VOLT);
            CalibrationReport {
                knots,
                resolution: vec![
                    Quantity::new("one_photon_fwhm", ev(cal.one_photon_fwhm), "eV"),
                    Quantity::new("baseline_fwhm", ev(cal.baseline_fwhm), "eV"),
                    Quantity::new("intrinsic_fwhm", ev(cal.intrinsic_fwhm), "eV"),
                ],
            }
        });

        let mut jitter = Table::new(&[
            ("class", ""),
            ("fraction", ""),
            ("level", SIGNAL),
            ("events", ""),
            ("misses", ""),
            ("fwhm", "s"),
            ("fwhm_std", "s"),
            ("method", ""),
            ("fit_t0", "s"),
            ("fit_sigma", "s"),
            ("fit_tail", "s"),
            ("reduced_chi2", ""),
            ("fit_status", ""),
            ("low_statistics", ""),
        ]);
        for curve in &r.jitter {
            for p in &curve.points {
                let f = p.fit.as_ref();
                jitter.push(vec![
                    curve.class.into(),
                    num(p.fraction),
                    num(p.level),
                    p.events.into(),
                    p.misses.into(),
                    opt(p.fwhm),
                    opt(p.fwhm_std),
                    serde_json::to_value(p.method).unwrap_or(Value::Null),
                    opt(f.map(|f| f.params.t0)),
                    opt(f.map(|f| f.params.sigma)),
                    opt(f.map(|f| f.params.tail())),
                    opt(f.map(|f| f.reduced_chi2)),
                    f.map_or(Value::Null, |f| serde_json::to_value(f.status).unwrap_or(Value::Null)),
                    p.low_statistics.into(),
                ]);
            }
        }

        let closure = r.closure.as_ref().map(|c| {
            let mut timing = Table::new(&[
                ("class", ""),
                ("fraction", ""),
                ("mean_delay", "s"),
                ("std_delay", "s"),
            ]);
            for t in &c.timing {
                timing.push(vec![t.class.into(), num(t.fraction), num(t.mean_delay), num(t.std_delay)]);
            }
            ClosureReport {
                accuracy: c.accuracy.is_finite().then_some(c.accuracy),
                confusion: c.confusion.clone(),
                timing,
            }
        });

        AnalysisReport {
            n_traces: r.n_traces,
            baseline_noise: Quantity::new("baseline_noise_rms", r.noise, SIGNAL),
            classification_available: r.classification_available,
            first_photon_number: r.histogram.first_photon_number,
            peaks,
            classes,
            calibration,
            jitter,
            closure,
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: ReportProvenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
}

impl Report {
    pub fn new(provenance: ReportProvenance) -> Self {
        Report {
            provenance,
            prediction: None,
            envelope: None,
            analysis: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Class-1 jitter points, for overlays on the envelope plot.
    pub fn measured_points(&self, inductance: f64) -> Vec<MeasuredPoint> {
        let Some(a) = &self.analysis else { return Vec::new() };
        let (Some(c), Some(f), Some(w)) = (
            a.jitter.values("class"),
            a.jitter.values("fraction"),
            a.jitter.values("fwhm"),
        ) else {
            return Vec::new();
        };
        (0..c.len())
            .filter(|&i| c[i] == 1.0 && w[i].is_finite())
            .map(|i| MeasuredPoint { inductance, fraction: f[i], fwhm: w[i] })
            .collect()
    }
}

/// Plot tables for an analysis run, keyed by file stem.
pub fn analysis_plot_tables(r: &AnalysisResult) -> Vec<(&'static str, Table)> {
    let mut out = Vec::new();

    let mut hist = Table::new(&[("score", SIGNAL), ("count", ""), ("smoothed", "")]);
    for (i, c) in r.histogram.centers().iter().enumerate() {
        hist.push(vec![num(*c), r.histogram.counts[i].into(), num(r.histogram.smoothed[i])]);
    }
    out.push(("score_histogram", hist));

    if let Some(first) = r.classes.first() {
        let names: Vec<String> = r.classes.iter().map(|c| format!("class_{}", c.class)).collect();
        let mut cols = vec![("time", "ns")];
        cols.extend(names.iter().map(|n| (n.as_str(), SIGNAL)));
        let mut pulses = Table::new(&cols);
        for k in 0..first.mean_pulse.values.len() {
            let mut row = vec![num(first.mean_pulse.time(k) / NANO)];
            row.extend(r.classes.iter().map(|c| num(c.mean_pulse.values[k])));
            pulses.push(row);
        }
        out.push(("mean_pulses", pulses));
    }

    let mut crossings = Table::new(&[
        ("class", ""),
        ("fraction", ""),
        ("time", "ns"),
        ("count", ""),
        ("emg_fit", ""),
    ]);
    let mut curve = Table::new(&[
        ("class", ""),
        ("fraction", ""),
        ("fwhm", "ns"),
        ("fwhm_std", "ns"),
        ("events", ""),
        ("misses", ""),
        ("reduced_chi2", ""),
    ]);
    for c in &r.jitter {
        for p in &c.points {
            if let Some(h) = &p.histogram {
                for (t, n) in h.centers.iter().zip(&h.counts) {
                    let fit = p.fit.as_ref().map(|f| emg_eval(&f.params, *t));
                    crossings.push(vec![c.class.into(), num(p.fraction), num(t / NANO), num(*n), opt(fit)]);
                }
            }
            curve.push(vec![
                c.class.into(),
                num(p.fraction),
                opt(p.fwhm.map(|w| w / NANO)),
                opt(p.fwhm_std.map(|w| w / NANO)),
                p.events.into(),
                p.misses.into(),
                opt(p.fit.as_ref().map(|f| f.reduced_chi2)),
            ]);
        }
    }
    out.push(("crossing_histograms", crossings));
    out.push(("jitter_vs_threshold", curve));
    out
}
