//! Energy-scale linearization through the photon-number peaks.

use serde::{Deserialize, Serialize};

use super::histogram::AreaHistogram;
use crate::error::{Error, Result};
use crate::units::FWHM_PER_SIGMA;

/// Scale factor turning a median absolute deviation into a Gaussian σ.
const MAD_TO_SIGMA: f64 = 1.482_602_218_505_602;

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes),
/// extended linearly beyond the end knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pchip {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::EmptyInput("need two or more knots"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotonePeaks);
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Pchip { x: x.to_vec(), y: y.to_vec(), slopes: d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.slopes[0] * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.slopes[n - 1] * (t - self.x[n - 1]);
        }
        let k = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (h00, h10) = ((1.0 + 2.0 * s) * (1.0 - s).powi(2), s * (1.0 - s).powi(2));
        let (h01, h11) = (s * s * (3.0 - 2.0 * s), s * s * (s - 1.0));
        h00 * self.y[k] + h10 * h * self.slopes[k] + h01 * self.y[k + 1] + h11 * h * self.slopes[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCalibration {
    pub map: Pchip,
    /// Photon number of each knot.
    pub photon_numbers: Vec<u32>,
    /// Knot energies minus the least-squares straight line through them, J.
    pub linearity_residuals: Vec<f64>,
    /// FWHM of the calibrated one-photon peak, J.
    pub one_photon_fwhm: Option<f64>,
    /// Zero-photon score spread expressed at the one-photon energy scale, J.
    pub baseline_fwhm: Option<f64>,
    /// One-photon FWHM with the baseline contribution removed in quadrature, J.
    pub intrinsic_fwhm: Option<f64>,
}

impl EnergyCalibration {
    pub fn energy(&self, score: f64) -> f64 {
        self.map.eval(score)
    }

    /// Local slope of the map at photon number `n`, J per score unit.
    pub fn slope_at(&self, n: u32) -> Option<f64> {
        let k = self.photon_numbers.iter().position(|&m| m == n)?;
        Some(self.map.slopes[k])
    }

    /// Fills the resolution fields from the zero- and one-photon scores.
    pub fn set_resolution(&mut self, zero: &[f64], one: &[f64]) {
        self.one_photon_fwhm = self.resolution_fwhm(one);
        self.baseline_fwhm = match (robust_fwhm(zero), self.slope_at(1)) {
            (Some(w), Some(s)) => Some(w * s),
            _ => None,
        };
        self.intrinsic_fwhm = match (self.one_photon_fwhm, self.baseline_fwhm) {
            (Some(t), Some(b)) => Some((t * t - b * b).max(0.0).sqrt()),
            (t, None) => t,
            _ => None,
        };
    }

    /// Robust FWHM (2.3548 × 1.4826 × MAD) of the calibrated energies.
    pub fn resolution_fwhm(&self, scores: &[f64]) -> Option<f64> {
        let e: Vec<f64> = scores.iter().map(|&s| self.energy(s)).collect();
        robust_fwhm(&e)
    }
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn robust_fwhm(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    Some(FWHM_PER_SIGMA * MAD_TO_SIGMA * median(&mut dev))
}

/// Maps the histogram peak centres onto `n·photon_energy`.
pub fn energy_calibration(hist: &AreaHistogram, photon_energy: f64) -> Result<EnergyCalibration> {
    if hist.peaks.len() < 3 {
        return Err(Error::TooFewPeaks(hist.peaks.len(), 3));
    }
    let x: Vec<f64> = hist.peaks.iter().map(|p| p.center).collect();
    let photon_numbers: Vec<u32> = (0..x.len() as u32)
        .map(|k| hist.first_photon_number + k)
        .collect();
    let y: Vec<f64> = photon_numbers
        .iter()
        .map(|&n| n as f64 * photon_energy)
        .collect();
    let map = Pchip::new(&x, &y)?;

    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let linearity_residuals = x
        .iter()
        .zip(&y)
        .map(|(a, b)| b - (my + slope * (a - mx)))
        .collect();
    Ok(EnergyCalibration {
        map,
        photon_numbers,
        linearity_residuals,
        one_photon_fwhm: None,
        baseline_fwhm: None,
        intrinsic_fwhm: None,
    })
}
