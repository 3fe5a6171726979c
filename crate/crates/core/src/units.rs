//! Physical constants and the unit conversions accepted at the config and
//! command-line boundary.
//!
//! Inside the crate every quantity is SI. The helpers here convert the
//! table-style units used on detector data sheets (mK, nH, ns, eV, µm³, ...)
//! with exact factors.

use crate::error::{Error, Result};

/// Boltzmann constant, J/K (exact, 2019 SI).
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Elementary charge, C; also joules per electron-volt (exact, 2019 SI).
pub const ELECTRON_VOLT: f64 = 1.602176634e-19;
/// Planck constant, J·s (exact, 2019 SI).
pub const PLANCK: f64 = 6.62607015e-34;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 2√(2 ln 2): ratio of FWHM to standard deviation for a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Ratio between the 10–90 % rise time of a first-order low-pass and its
/// time constant (ln 9).
pub const RISE_10_90_PER_TIME_CONSTANT: f64 = 2.197_224_577_336_219_6;

pub const NANO: f64 = 1e-9;
pub const MICRO: f64 = 1e-6;
pub const MILLI: f64 = 1e-3;
/// Cubic micrometres per cubic metre.
pub const CUBIC_MICROMETRE: f64 = 1e-18;

/// Photon energy in joules for a vacuum wavelength in metres.
pub fn photon_energy_from_wavelength(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

/// Dimension of a quantity parsed from user input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Inductance,
    Energy,
    Temperature,
    Frequency,
    Volume,
    Resistance,
    Current,
    Dimensionless,
}

impl Dimension {
    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Time => &[
                ("s", 1.0),
                ("ms", MILLI),
                ("us", MICRO),
                ("µs", MICRO),
                ("ns", NANO),
                ("ps", 1e-12),
            ],
            Dimension::Inductance => &[
                ("H", 1.0),
                ("mH", MILLI),
                ("uH", MICRO),
                ("µH", MICRO),
                ("nH", NANO),
                ("pH", 1e-12),
            ],
            Dimension::Energy => &[("J", 1.0), ("aJ", 1e-18), ("eV", ELECTRON_VOLT)],
            Dimension::Temperature => &[("K", 1.0), ("mK", MILLI)],
            Dimension::Frequency => &[
                ("Hz", 1.0),
                ("kHz", 1e3),
                ("MHz", 1e6),
                ("GHz", 1e9),
            ],
            Dimension::Volume => &[
                ("m3", 1.0),
                ("um3", CUBIC_MICROMETRE),
                ("µm3", CUBIC_MICROMETRE),
            ],
            Dimension::Resistance => &[("Ohm", 1.0), ("ohm", 1.0), ("mOhm", MILLI)],
            Dimension::Current => &[
                ("A", 1.0),
                ("mA", MILLI),
                ("uA", MICRO),
                ("µA", MICRO),
                ("nA", NANO),
            ],
            Dimension::Dimensionless => &[],
        }
    }
}

/// Parses `"24nH"`, `"24 nH"`, `"2.4e-8"` (bare numbers are SI) into SI.
///
/// Scaled values are computed as `value * factor`, so `"24nH"` and
/// `"24e-9"` may differ in the last bit.
pub fn parse_quantity(input: &str, dim: Dimension) -> Result<f64> {
    let s = input.trim();
    let split = s
        .char_indices()
        .find(|&(i, c)| {
            c.is_alphabetic() && c != 'e' && c != 'E' || (c == 'e' || c == 'E') && is_unit_start(s, i)
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::invalid(input, "not a number"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    dim.suffixes()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| value * f)
        .ok_or_else(|| Error::invalid(input, format!("unknown unit `{unit}` for {dim:?}")))
}

// "eV" starts with 'e'; an exponent 'e' is always followed by a digit or sign.
fn is_unit_start(s: &str, i: usize) -> bool {
    !matches!(s[i + 1..].chars().next(), Some(c) if c.is_ascii_digit() || c == '+' || c == '-')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fwhm_constant() {
        assert_eq!(FWHM_PER_SIGMA, 2.0 * (2.0 * 2f64.ln()).sqrt());
        assert!((RISE_10_90_PER_TIME_CONSTANT - 9f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn parses_table_units() {
        assert_eq!(parse_quantity("24nH", Dimension::Inductance).unwrap(), 24.0 * NANO);
        assert_eq!(parse_quantity("24 nH", Dimension::Inductance).unwrap(), 24.0 * NANO);
        assert_eq!(parse_quantity("2.4e-8", Dimension::Inductance).unwrap(), 2.4e-8);
        assert_eq!(parse_quantity("20e6", Dimension::Frequency).unwrap(), 20e6);
        assert_eq!(parse_quantity("20MHz", Dimension::Frequency).unwrap(), 20e6);
        assert_eq!(
            parse_quantity("0.8eV", Dimension::Energy).unwrap(),
            0.8 * ELECTRON_VOLT
        );
        assert_eq!(parse_quantity("150mK", Dimension::Temperature).unwrap(), 0.15);
        assert_eq!(parse_quantity("-1e-3 s", Dimension::Time).unwrap(), -1e-3);
    }

    #[test]
    fn rejects_wrong_units() {
        assert!(parse_quantity("24nH", Dimension::Time).is_err());
        assert!(parse_quantity("abc", Dimension::Time).is_err());
        assert!(parse_quantity("3 furlongs", Dimension::Time).is_err());
    }

    #[test]
    fn telecom_photon_energy() {
        let e = photon_energy_from_wavelength(1550e-9) / ELECTRON_VOLT;
        assert!((e - 0.7999).abs() < 1e-3);
    }
}
