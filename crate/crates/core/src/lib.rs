//! Transition-edge-sensor timing toolkit.
//!
//! The crate is organised around the measurement chain of a TES single-photon
//! detector:
//!
//! * [`device_model`]: closed-form signal amplitude, noise, rise time and
//!   predicted FWHM timing jitter, with sweeps over parameter uncertainty.
//! * [`pulse_sim`]: synthetic digitized photon-detection traces.
//! * [`analysis`]: matched filtering, photon-number classification, energy
//!   linearization and fractional-threshold time of arrival.
//! * [`timing_fit`]: exponentially modified Gaussian fits of crossing-time
//!   histograms.
//! * [`io`]: run configuration, the binary trace-batch format, reports and
//!   plot tables.
//!
//! Everything inside the crate is SI. Table-style units (ns, nH, eV, mK, µm³)
//! are only accepted through [`units`].

pub mod analysis;
pub mod device_model;
pub mod error;
pub mod io;
pub mod pulse_sim;
pub mod timing_fit;
pub mod units;

pub use device_model::{DeviceParams, Interval, JitterEnvelope, ParamRange};
pub use error::{Error, Result};
pub use pulse_sim::{
    DigitizerParams, GroundTruth, PulseModel, PulseShapeParams, SourceParams, TraceBatch,
    Waveform,
};
pub use timing_fit::{EmgFit, EmgParams, FitStatus};
