//! Run configuration and inductance grid specs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::AnalysisOptions;
use crate::device_model::{linear_grid, DeviceParams, ParamRange};
use crate::error::{Error, Result};
use crate::pulse_sim::{DigitizerParams, PulseShapeParams, SourceParams};
use crate::units::{parse_quantity, Dimension};

/// Everything a run needs. Sections missing from a config file take the
/// measured-device defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceParams,
    pub ranges: ParamRange,
    pub shape: PulseShapeParams,
    pub digitizer: DigitizerParams,
    pub source: SourceParams,
    pub analysis: AnalysisOptions,
    /// Simulation seed; replaces `source.rng_seed` at run time.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::reference()
    }
}

impl RunConfig {
    pub fn reference() -> Self {
        RunConfig {
            device: DeviceParams::reference(),
            ranges: ParamRange::reference(),
            shape: PulseShapeParams::reference(),
            digitizer: DigitizerParams::reference(),
            source: SourceParams::reference(),
            analysis: AnalysisOptions::default(),
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.ranges.validate()?;
        self.shape.validate()?;
        self.digitizer.validate()?;
        self.source.validate()?;
        self.analysis.validate()
    }

    /// Source parameters with the run seed applied.
    pub fn source_for_run(&self) -> SourceParams {
        SourceParams {
            rng_seed: self.seed,
            ..self.source
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses an inductance grid: `lo:hi:n` (linear, inclusive) or a comma
/// list. Values accept unit suffixes, e.g. `5nH:100nH:96` or `10nH,24nH`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::GridSpec(spec.to_string());
    let q = |s: &str| parse_quantity(s, Dimension::Inductance).map_err(|_| bad());
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        linear_grid(q(lo)?, q(hi)?, n).map_err(|_| bad())?
    } else {
        spec.split(',').map(q).collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty()
        || grid.iter().any(|l| !(l.is_finite() && *l > 0.0))
        || grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(bad());
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut c = RunConfig::reference();
        c.device.alpha = 0.1 + 0.2;
        c.source.mean_photon_number = std::f64::consts::PI / 7.0;
        c.seed = u64::MAX;
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c = RunConfig::from_json(r#"{"seed": 9}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.device, DeviceParams::reference());
        assert!(RunConfig::from_json(r#"{"sede": 9}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::reference();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn grids() {
        let g = parse_grid("5nH:50nH:10").unwrap();
        assert_eq!(g.len(), 10);
        assert!((g[0] - 5e-9).abs() < 1e-24 && (g[9] - 50e-9).abs() < 1e-22);
        assert_eq!(parse_grid("10nH, 24nH").unwrap().len(), 2);
        for bad in ["", "5nH:50nH", "5nH:50nH:x", "50nH:5nH:4", "24nH,10nH", "-1nH", "5kHz:6kHz:3"] {
            assert!(matches!(parse_grid(bad), Err(Error::GridSpec(_))), "{bad}");
        }
    }
}
