use std::io::Write;
use std::path::Path;

use anyhow::Context;
use tes_jitter::analysis::{analyze as run_pipeline, AnalysisOptions};
use tes_jitter::device_model::jitter_envelope;
use tes_jitter::io::{
    analysis_plot_tables, envelope_table, envelope_table_si, parse_grid, prediction, read_batch,
    save_batch, sha256_hex, AnalysisReport, Report, ReportProvenance, RunConfig,
};
use tes_jitter::pulse_sim::simulate_batch;
use tes_jitter::units::NANO;

use crate::display::{si, si_exact};
use crate::EXIT_PARTIAL;

fn provenance(command: &str, cfg: &RunConfig) -> ReportProvenance {
    let mut p = ReportProvenance::new(command, cfg.hash(), cfg.seed);
    // Reproducible builds convention: a fixed epoch pins the timestamp.
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        p.timestamp_unix_s = Some(t);
    }
    p
}

pub fn predict(cfg: &RunConfig, out: Option<&Path>) -> anyhow::Result<u8> {
    let p = prediction(&cfg.device, &cfg.ranges)?;
    let rows = [
        ("jitter_fwhm", "predicted jitter FWHM"),
        ("tau_el", "electrical rise time τ_el"),
        ("tau_ext", "amplifier rise time τ_ext"),
        ("tau_rise", "combined rise time"),
        ("delta_i", "signal current ΔI"),
        ("i_rms", "noise current I_RMS"),
        ("noise_to_signal", "I_RMS / ΔI"),
        ("bias_power", "bias power P₀"),
        ("heat_capacity", "heat capacity C"),
        ("optimal_inductance", "optimal inductance L*"),
        ("optimal_inductance_numeric", "numeric optimum"),
        ("jitter_fwhm_at_optimum", "jitter FWHM at optimum"),
    ];
    let mut so = std::io::stdout().lock();
    for (key, label) in rows {
        let q = p.quantities.iter().find(|q| q.name == key).expect("quantity present");
        let v = q.value.map_or("n/a".into(), |v| si_exact(v, &q.unit));
        writeln!(so, "{label:<28} {v}")?;
    }
    let c = &p.corners;
    writeln!(so, "over the parameter ranges ({} corners):", c.corners_evaluated)?;
    writeln!(so, "  best corner  {:<28} {}", si(c.min_fwhm, "s"), corner(&c.min_params))?;
    writeln!(so, "  worst corner {:<28} {}", si(c.max_fwhm, "s"), corner(&c.max_params))?;
    if let Some(path) = out {
        let mut r = Report::new(provenance("predict", cfg));
        r.prediction = Some(p);
        r.save(path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn corner(d: &tes_jitter::DeviceParams) -> String {
    format!(
        "(α={}, β={}, M_J={}, η={}, L={})",
        d.alpha,
        d.beta,
        d.m_j,
        d.eta,
        si(d.inductance, "H")
    )
}

pub fn sweep(
    cfg: &RunConfig,
    grid: &str,
    report: Option<&Path>,
    out: Option<&Path>,
) -> anyhow::Result<u8> {
    let grid = parse_grid(grid)?;
    let env = jitter_envelope(&cfg.ranges, &grid)?;
    let measured = match report {
        Some(p) => {
            let r = Report::load(p).with_context(|| format!("reading {}", p.display()))?;
            r.measured_points(cfg.device.inductance)
        }
        None => Vec::new(),
    };
    let table = envelope_table(&env, &measured);
    match out {
        Some(path) => {
            table.save_csv(path).with_context(|| format!("writing {}", path.display()))?;
            let mut r = Report::new(provenance("sweep", cfg));
            r.envelope = Some(envelope_table_si(&env));
            r.save(&path.with_extension("json"))?;
        }
        None => table.write_csv(std::io::stdout().lock())?,
    }
    eprintln!(
        "lower bound minimal at {}, upper bound minimal at {}",
        si(env.lower_argmin, "H"),
        si(env.upper_argmin, "H")
    );
    Ok(0)
}

pub fn simulate(cfg: &RunConfig, traces: usize, out: &Path) -> anyhow::Result<u8> {
    let batch = simulate_batch(
        &cfg.source_for_run(),
        &cfg.shape,
        &cfg.device,
        &cfg.digitizer,
        traces,
        Some(cfg.hash()),
    )?;
    save_batch(out, &batch).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {} traces × {} samples to {} ({} clipped samples, seed {})",
        batch.len(),
        cfg.digitizer.trace_length,
        out.display(),
        batch.clipped_samples,
        cfg.seed
    );
    Ok(0)
}

pub fn analyze(
    cfg: &RunConfig,
    input: &Path,
    out: &Path,
    thresholds: Option<&[f64]>,
) -> anyhow::Result<u8> {
    let mut opts: AnalysisOptions = cfg.analysis.clone();
    if let Some(t) = thresholds {
        opts.thresholds = t.to_vec();
    }
    opts.validate()?;
    let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let batch = read_batch(bytes.as_slice(), cfg.digitizer.pre_trigger)?;
    let result = run_pipeline(&batch, &opts, cfg.device.photon_energy)?;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut prov = provenance("analyze", cfg);
    prov.input_sha256 = Some(sha256_hex(&bytes));
    let mut report = Report::new(prov);
    report.analysis = Some(AnalysisReport::from_result(&result));
    report.save(&out.join("report.json"))?;
    for (stem, table) in analysis_plot_tables(&result) {
        table.save_csv(&out.join(format!("{stem}.csv")))?;
    }

    let mut so = std::io::stdout().lock();
    writeln!(so, "{} traces, baseline noise {:.4}", result.n_traces, result.noise)?;
    for c in &result.classes {
        writeln!(so, "class {}: {} traces", c.class, c.count)?;
    }
    for curve in &result.jitter {
        let cells: Vec<String> = curve
            .points
            .iter()
            .map(|p| match p.fwhm {
                Some(w) => format!("{:.0}%={:.2}", p.fraction * 100.0, w / NANO),
                None => format!("{:.0}%=n/a", p.fraction * 100.0),
            })
            .collect();
        writeln!(so, "class {} jitter FWHM [ns]: {}", curve.class, cells.join(" "))?;
    }
    if let Some(c) = &result.closure {
        writeln!(so, "classification accuracy vs truth: {:.4}", c.accuracy)?;
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    writeln!(so, "report written to {}", out.join("report.json").display())?;
    // A partial report: classification failed, timing was not attempted.
    Ok(if result.classification_available { 0 } else { EXIT_PARTIAL })
}
