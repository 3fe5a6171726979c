//! Command-line front end of `tesjit`: predict, sweep, simulate and analyze
//! TES timing jitter.
//!
//! Values are resolved in this order, later winning: built-in defaults,
//! `--config` file, command-line overrides.

mod commands;
mod display;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tes_jitter::io::RunConfig;
use tes_jitter::units::{parse_quantity, Dimension};

/// Exit status: bad input.
pub const EXIT_VALIDATION: u8 = 1;
/// Exit status: failure while running.
pub const EXIT_RUNTIME: u8 = 2;
/// Exit status: report written but classification was unavailable.
pub const EXIT_PARTIAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "tesjit", version, about = "Timing-jitter toolkit for transition-edge sensors")]
struct Cli {
    /// JSON run configuration; omitted sections take the built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Simulation seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form jitter prediction for the configured device.
    Predict {
        /// Write the report as JSON.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Jitter envelope over the parameter ranges versus inductance, as CSV.
    Sweep {
        /// Inductance grid: `lo:hi:n` or a comma list, e.g. `1nH:100nH:100`.
        #[arg(long, default_value = "1nH:100nH:100")]
        grid: String,
        /// Analysis report whose one-photon points are overlaid.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        /// CSV destination; standard output when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Simulate digitized traces into a TESB file.
    Simulate {
        /// Number of traces.
        #[arg(long, default_value_t = 10_000)]
        traces: usize,
        /// TESB destination.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Run the measurement pipeline on a TESB file.
    Analyze {
        /// TESB trace file.
        input: PathBuf,
        /// Output directory for `report.json` and the plot CSVs.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Threshold fractions, e.g. `0.1,0.2,0.5`.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
}

/// Per-parameter overrides. Unit suffixes are accepted (`24nH`, `20MHz`);
/// bare numbers are SI.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Operating temperature, e.g. `90mK`.
    #[arg(long, global = true)]
    temperature: Option<String>,
    /// Operating resistance, e.g. `0.2Ohm`.
    #[arg(long, global = true)]
    resistance: Option<String>,
    /// Temperature sensitivity α = d ln R / d ln T.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Current sensitivity β = d ln R / d ln I.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Excess Johnson noise factor.
    #[arg(long, global = true)]
    m_j: Option<f64>,
    /// Energy collection fraction.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// SQUID input inductance, e.g. `24nH`.
    #[arg(long, global = true)]
    inductance: Option<String>,
    /// Amplifier bandwidth; also sets the simulated amplifier rise time.
    #[arg(long, global = true)]
    bandwidth: Option<String>,
    /// Photon energy, e.g. `0.8eV`.
    #[arg(long, global = true)]
    photon_energy: Option<String>,
    /// Mean photon number per optical pulse.
    #[arg(long, global = true)]
    mean_photon_number: Option<f64>,
    /// Trace noise relative to the device noise-to-signal ratio.
    #[arg(long, global = true)]
    noise_scale: Option<f64>,
    /// Digitizer sample rate, e.g. `1.25GHz`.
    #[arg(long, global = true)]
    sample_rate: Option<String>,
    /// Samples per trace.
    #[arg(long, global = true)]
    trace_length: Option<usize>,
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) -> tes_jitter::Result<()> {
        let q = |s: &Option<String>, d| s.as_deref().map(|v| parse_quantity(v, d)).transpose();
        if let Some(v) = q(&self.temperature, Dimension::Temperature)? {
            c.device.t0 = v;
        }
        if let Some(v) = q(&self.resistance, Dimension::Resistance)? {
            c.device.r0 = v;
        }
        if let Some(v) = q(&self.inductance, Dimension::Inductance)? {
            c.device.inductance = v;
        }
        if let Some(v) = q(&self.bandwidth, Dimension::Frequency)? {
            c.device.amp_bandwidth = v;
            c.shape.tau_ext = 0.35 / v;
        }
        if let Some(v) = q(&self.photon_energy, Dimension::Energy)? {
            c.device.photon_energy = v;
        }
        if let Some(v) = q(&self.sample_rate, Dimension::Frequency)? {
            c.digitizer.sample_rate = v;
        }
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut c.device.alpha, self.alpha);
        set(&mut c.device.beta, self.beta);
        set(&mut c.device.m_j, self.m_j);
        set(&mut c.device.eta, self.eta);
        set(&mut c.source.mean_photon_number, self.mean_photon_number);
        set(&mut c.shape.noise_scale, self.noise_scale);
        if let Some(n) = self.trace_length {
            c.digitizer.trace_length = n;
        }
        Ok(())
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::from_json(&std::fs::read_to_string(p).map_err(|e| {
            tes_jitter::Error::invalid("--config", format!("cannot read {}: {e}", p.display()))
        })?)?,
        None => RunConfig::reference(),
    };
    cli.overrides.apply(&mut c)?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    c.validate()?;
    Ok(c)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<tes_jitter::Error>() {
        Some(te) if te.is_validation() => EXIT_VALIDATION,
        Some(tes_jitter::Error::Json(_)) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    let go = || -> anyhow::Result<u8> {
        let cfg = load_config(&cli)?;
        match &cli.command {
            Command::Predict { out } => commands::predict(&cfg, out.as_deref()),
            Command::Sweep { grid, report, out } => {
                commands::sweep(&cfg, grid, report.as_deref(), out.as_deref())
            }
            Command::Simulate { traces, out } => commands::simulate(&cfg, *traces, out),
            Command::Analyze { input, out, thresholds } => {
                commands::analyze(&cfg, input, out, thresholds.as_deref())
            }
        }
    };
    match go() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
