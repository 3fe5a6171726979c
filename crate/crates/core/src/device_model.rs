//! Closed-form TES signal and jitter model.
//!
//! A photon of energy `hν` absorbed in a voltage-biased TES produces a current
//! step `ΔI`; the readout sees it on top of a white current noise `I_RMS` and
//! rises with the combined electrical and amplifier rise time. Threshold timing
//! jitter is `noise / slope`, which for a linear rise gives
//!
//! ```text
//! Δt_FWHM ≈ 2√(2 ln 2) · I_RMS · τ_rise / ΔI
//! ```
//!
//! Two closures make the model self-contained: the bias power is the
//! electron–phonon power at low bath temperature, `P₀ = Σ·V·T₀⁵`, and the heat
//! capacity is electronic, `C = γ·V·T₀`. Under these closures the composed
//! expression and the fully expanded one ([`predicted_jitter_fwhm`]) agree to
//! rounding error, and `T₀` drops out of the jitter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{BOLTZMANN, CUBIC_MICROMETRE, ELECTRON_VOLT, FWHM_PER_SIGMA, MILLI, NANO};

/// Physical and material parameters of a TES + SQUID readout chain, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Operating temperature T₀.
    #[serde(rename = "t0_k")]
    pub t0: f64,
    /// Operating-point resistance R₀.
    #[serde(rename = "r0_ohm")]
    pub r0: f64,
    /// Absorber volume V.
    #[serde(rename = "volume_m3")]
    pub volume: f64,
    /// Electron–phonon coupling Σ (P = Σ·V·T⁵).
    #[serde(rename = "sigma_ep_w_per_m3_k5")]
    pub sigma_ep: f64,
    /// Sommerfeld coefficient γ (C = γ·V·T).
    #[serde(rename = "gamma_j_per_m3_k2")]
    pub gamma: f64,
    /// Temperature sensitivity α = (T₀/R₀)·∂R/∂T.
    pub alpha: f64,
    /// Current sensitivity β = (I₀/R₀)·∂R/∂I.
    pub beta: f64,
    /// Excess Johnson noise parameter M_J.
    pub m_j: f64,
    /// SQUID input inductance including wiring and parasitics.
    #[serde(rename = "inductance_h")]
    pub inductance: f64,
    /// Energy collection fraction η.
    pub eta: f64,
    /// Absorbed photon energy hν.
    #[serde(rename = "photon_energy_j")]
    pub photon_energy: f64,
    /// Room-temperature amplifier bandwidth Δf.
    #[serde(rename = "amp_bandwidth_hz")]
    pub amp_bandwidth: f64,
    /// Operating-point current; enters only through the definition of β.
    #[serde(rename = "i0_a")]
    pub i0: f64,
    /// Bias power P₀. When absent it is derived from the electron–phonon law.
    #[serde(rename = "p0_override_w", default, skip_serializing_if = "Option::is_none")]
    pub p0_override: Option<f64>,
}

/// [`DeviceParams`] expressed in data-sheet units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableUnits {
    pub t0_mk: f64,
    pub r0_ohm: f64,
    pub volume_um3: f64,
    pub sigma_nw_per_um3_k5: f64,
    pub gamma_aj_per_um3_k2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub m_j: f64,
    pub inductance_nh: f64,
    pub eta: f64,
    pub photon_energy_ev: f64,
    pub tau_ext_ns: f64,
}

const SIGMA_TABLE_FACTOR: f64 = NANO / CUBIC_MICROMETRE;
const GAMMA_TABLE_FACTOR: f64 = 1e-18 / CUBIC_MICROMETRE;

impl TableUnits {
    /// The tungsten TES measured at 1550 nm, with ranged quantities at the
    /// centre of their interval.
    pub const PAPER_DEFAULT: TableUnits = TableUnits {
        t0_mk: 150.0,
        r0_ohm: 1.0,
        volume_um3: 12.5,
        sigma_nw_per_um3_k5: 0.4,
        gamma_aj_per_um3_k2: 340.2,
        alpha: 475.0,
        beta: 1.5,
        m_j: 2.5,
        inductance_nh: 24.0,
        eta: 0.65,
        photon_energy_ev: 0.8,
        tau_ext_ns: 17.5,
    };
}

impl DeviceParams {
    /// Nominal device (reference profile).
    pub fn reference() -> Self {
        Self::from_table_units(&TableUnits::PAPER_DEFAULT)
    }

    pub fn from_table_units(t: &TableUnits) -> Self {
        let mut p = DeviceParams {
            t0: t.t0_mk * MILLI,
            r0: t.r0_ohm,
            volume: t.volume_um3 * CUBIC_MICROMETRE,
            sigma_ep: t.sigma_nw_per_um3_k5 * SIGMA_TABLE_FACTOR,
            gamma: t.gamma_aj_per_um3_k2 * GAMMA_TABLE_FACTOR,
            alpha: t.alpha,
            beta: t.beta,
            m_j: t.m_j,
            inductance: t.inductance_nh * NANO,
            eta: t.eta,
            photon_energy: t.photon_energy_ev * ELECTRON_VOLT,
            amp_bandwidth: 0.35 / (t.tau_ext_ns * NANO),
            i0: 0.0,
            p0_override: None,
        };
        p.i0 = (equilibrium_power(&p) / p.r0).sqrt();
        p
    }

    pub fn to_table_units(&self) -> TableUnits {
        TableUnits {
            t0_mk: self.t0 / MILLI,
            r0_ohm: self.r0,
            volume_um3: self.volume / CUBIC_MICROMETRE,
            sigma_nw_per_um3_k5: self.sigma_ep / SIGMA_TABLE_FACTOR,
            gamma_aj_per_um3_k2: self.gamma / GAMMA_TABLE_FACTOR,
            alpha: self.alpha,
            beta: self.beta,
            m_j: self.m_j,
            inductance_nh: self.inductance / NANO,
            eta: self.eta,
            photon_energy_ev: self.photon_energy / ELECTRON_VOLT,
            tau_ext_ns: external_rise_time(self) / NANO,
        }
    }

    /// Copy with a different inductance.
    pub fn with_inductance(mut self, inductance: f64) -> Self {
        self.inductance = inductance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t0", self.t0),
            ("r0", self.r0),
            ("volume", self.volume),
            ("sigma_ep", self.sigma_ep),
            ("gamma", self.gamma),
            ("inductance", self.inductance),
            ("photon_energy", self.photon_energy),
            ("amp_bandwidth", self.amp_bandwidth),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return Err(Error::invalid("alpha", format!("must be >= 1, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid("beta", format!("must be >= 0, got {}", self.beta)));
        }
        if !(self.m_j.is_finite() && self.m_j >= 0.0) {
            return Err(Error::invalid("m_j", format!("must be >= 0, got {}", self.m_j)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta", format!("must be in (0, 1], got {}", self.eta)));
        }
        if !(self.i0.is_finite() && self.i0 >= 0.0) {
            return Err(Error::invalid("i0", format!("must be >= 0, got {}", self.i0)));
        }
        if let Some(p0) = self.p0_override {
            if !(p0.is_finite() && p0 > 0.0) {
                return Err(Error::invalid("p0_override", format!("must be positive, got {p0}")));
            }
        }
        Ok(())
    }
}

/// Bias power in the low-bath-temperature limit, `P₀ = Σ·V·T₀⁵`.
pub fn equilibrium_power(p: &DeviceParams) -> f64 {
    p.sigma_ep * p.volume * p.t0.powi(5)
}

fn bias_power(p: &DeviceParams) -> f64 {
    p.p0_override.unwrap_or_else(|| equilibrium_power(p))
}

/// Electronic heat capacity `C = γ·V·T₀`.
pub fn heat_capacity(p: &DeviceParams) -> f64 {
    p.gamma * p.volume * p.t0
}

/// Current pulse height for one absorbed photon,
/// `ΔI = √(P₀/R₀)·α·η·hν / (C·T₀·(1+β))`.
pub fn delta_current(p: &DeviceParams) -> f64 {
    (bias_power(p) / p.r0).sqrt() * p.alpha * p.eta * p.photon_energy
        / (heat_capacity(p) * p.t0 * (1.0 + p.beta))
}

/// RMS current noise from Johnson and thermal-fluctuation noise,
/// `I_RMS = √(√2·k_B·T₀·(1+2β)(1+M_J²) / (L(1+β)))`.
pub fn rms_noise(p: &DeviceParams) -> f64 {
    (std::f64::consts::SQRT_2 * BOLTZMANN * p.t0 * (1.0 + 2.0 * p.beta) * (1.0 + p.m_j * p.m_j)
        / (p.inductance * (1.0 + p.beta)))
        .sqrt()
}

/// `τ_el = L / (R₀(1+β))`.
pub fn electrical_rise_time(p: &DeviceParams) -> f64 {
    p.inductance / (p.r0 * (1.0 + p.beta))
}

/// `τ_ext = 0.35 / Δf`.
pub fn external_rise_time(p: &DeviceParams) -> f64 {
    0.35 / p.amp_bandwidth
}

pub fn combine_rise_times(tau_el: f64, tau_ext: f64) -> f64 {
    tau_el.hypot(tau_ext)
}

/// `τ_rise = √(τ_el² + τ_ext²)`.
pub fn combined_rise_time(p: &DeviceParams) -> f64 {
    combine_rise_times(electrical_rise_time(p), external_rise_time(p))
}

/// Jitter composed from the individual model pieces,
/// `2√(2 ln 2)·I_RMS·τ_rise/ΔI`. Valid for any `P₀`.
pub fn composed_jitter_fwhm(p: &DeviceParams) -> f64 {
    FWHM_PER_SIGMA * rms_noise(p) * combined_rise_time(p) / delta_current(p)
}

/// Predicted FWHM timing jitter.
///
/// Uses the fully expanded expression, in which `T₀`, `P₀` and `C` have been
/// eliminated. With an explicit `p0_override` that elimination no longer
/// holds and the composed form is returned instead.
pub fn predicted_jitter_fwhm(p: &DeviceParams) -> f64 {
    if p.p0_override.is_some() {
        return composed_jitter_fwhm(p);
    }
    let b = p.beta;
    let noise_shape = (8.0
        * std::f64::consts::LN_2
        * std::f64::consts::SQRT_2
        * (1.0 + b)
        * (1.0 + 2.0 * b)
        * (1.0 + p.m_j * p.m_j))
        .sqrt();
    let signal = p.gamma / (p.alpha * p.eta * p.photon_energy);
    let material = (p.r0 * p.volume * BOLTZMANN / (p.inductance * p.sigma_ep)).sqrt();
    let tau_ext = external_rise_time(p);
    let tau_el = p.inductance / (p.r0 * (1.0 + b));
    let rise = (tau_ext * tau_ext + tau_el * tau_el).sqrt();
    noise_shape * signal * material * rise
}

/// Threshold-crossing jitter of a signal with noise `sigma` and local `slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdJitter {
    /// Standard deviation of the crossing time.
    pub std: f64,
    pub fwhm: f64,
}

/// `Δt_σ = σ / (dA/dt)`.
pub fn threshold_jitter_estimate(sigma: f64, slope: f64) -> Result<ThresholdJitter> {
    if !(slope.is_finite() && slope > 0.0) {
        return Err(Error::ZeroSlope);
    }
    let std = sigma / slope;
    Ok(ThresholdJitter {
        std,
        fwhm: FWHM_PER_SIGMA * std,
    })
}

/// Closed interval `[lo, hi]`; `lo == hi` is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::invalid("interval", format!("lower {lo} > upper {hi}")));
        }
        Ok(Interval { lo, hi })
    }

    pub const fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

const RANGE_FIELDS: usize = 12;

/// Uncertainty intervals for every model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub t0: Interval,
    pub r0: Interval,
    pub volume: Interval,
    pub sigma_ep: Interval,
    pub gamma: Interval,
    pub alpha: Interval,
    pub beta: Interval,
    pub m_j: Interval,
    pub inductance: Interval,
    pub eta: Interval,
    pub photon_energy: Interval,
    pub amp_bandwidth: Interval,
}

impl ParamRange {
    /// Ranges of the measured tungsten device: α ∈ [150, 800], β ∈ [0.8, 2.2],
    /// M_J ∈ [1.5, 3.5], η ∈ [0.4, 0.9], L = 24 ± 5 nH; everything else fixed.
    pub fn reference() -> Self {
        let mut r = ParamRange::point(&DeviceParams::reference());
        r.alpha = Interval { lo: 150.0, hi: 800.0 };
        r.beta = Interval { lo: 0.8, hi: 2.2 };
        r.m_j = Interval { lo: 1.5, hi: 3.5 };
        r.eta = Interval { lo: 0.4, hi: 0.9 };
        r.inductance = Interval {
            lo: 19.0 * NANO,
            hi: 29.0 * NANO,
        };
        r
    }

    /// Degenerate ranges pinned at `p`.
    pub fn point(p: &DeviceParams) -> Self {
        ParamRange {
            t0: Interval::point(p.t0),
            r0: Interval::point(p.r0),
            volume: Interval::point(p.volume),
            sigma_ep: Interval::point(p.sigma_ep),
            gamma: Interval::point(p.gamma),
            alpha: Interval::point(p.alpha),
            beta: Interval::point(p.beta),
            m_j: Interval::point(p.m_j),
            inductance: Interval::point(p.inductance),
            eta: Interval::point(p.eta),
            photon_energy: Interval::point(p.photon_energy),
            amp_bandwidth: Interval::point(p.amp_bandwidth),
        }
    }

    fn intervals(&self) -> [(&'static str, Interval); RANGE_FIELDS] {
        [
            ("t0", self.t0),
            ("r0", self.r0),
            ("volume", self.volume),
            ("sigma_ep", self.sigma_ep),
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("m_j", self.m_j),
            ("inductance", self.inductance),
            ("eta", self.eta),
            ("photon_energy", self.photon_energy),
            ("amp_bandwidth", self.amp_bandwidth),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, iv) in self.intervals() {
            if !(iv.lo <= iv.hi) {
                return Err(Error::invalid(
                    format!("ranges.{name}"),
                    format!("lower {} > upper {}", iv.lo, iv.hi),
                ));
            }
        }
        self.params_at(&[false; RANGE_FIELDS]).validate()?;
        self.params_at(&[true; RANGE_FIELDS]).validate()
    }

    pub fn contains(&self, p: &DeviceParams) -> bool {
        let v = values(p);
        self.intervals()
            .iter()
            .zip(v)
            .all(|((_, iv), x)| iv.contains(x))
    }

    /// Mid-point parameters; `i0` follows from the derived bias power.
    pub fn midpoint(&self) -> DeviceParams {
        let mut p = DeviceParams::reference();
        for (slot, (_, iv)) in fields_mut(&mut p).into_iter().zip(self.intervals()) {
            *slot = iv.midpoint();
        }
        p.i0 = (equilibrium_power(&p) / p.r0).sqrt();
        p
    }

    fn params_at(&self, upper: &[bool; RANGE_FIELDS]) -> DeviceParams {
        let mut p = self.midpoint();
        for ((slot, (_, iv)), &hi) in fields_mut(&mut p)
            .into_iter()
            .zip(self.intervals())
            .zip(upper)
        {
            *slot = if hi { iv.hi } else { iv.lo };
        }
        p
    }

    /// Every distinct corner of the box. Degenerate intervals contribute a
    /// single value, so the count is `2^k` for `k` non-degenerate fields.
    pub fn corners(&self) -> Vec<DeviceParams> {
        let free: Vec<usize> = self
            .intervals()
            .iter()
            .enumerate()
            .filter(|(_, (_, iv))| !iv.is_degenerate())
            .map(|(i, _)| i)
            .collect();
        (0u32..1 << free.len())
            .map(|mask| {
                let mut upper = [false; RANGE_FIELDS];
                for (bit, &field) in free.iter().enumerate() {
                    upper[field] = mask >> bit & 1 == 1;
                }
                self.params_at(&upper)
            })
            .collect()
    }

    /// Uniform random point inside the box from 12 unit-interval draws.
    pub fn sample(&self, unit: &[f64; RANGE_FIELDS]) -> DeviceParams {
        let mut p = self.midpoint();
        for ((slot, (_, iv)), u) in fields_mut(&mut p)
            .into_iter()
            .zip(self.intervals())
            .zip(unit)
        {
            *slot = iv.lo + u * (iv.hi - iv.lo);
        }
        p.i0 = (equilibrium_power(&p) / p.r0).sqrt();
        p
    }
}

fn values(p: &DeviceParams) -> [f64; RANGE_FIELDS] {
    [
        p.t0,
        p.r0,
        p.volume,
        p.sigma_ep,
        p.gamma,
        p.alpha,
        p.beta,
        p.m_j,
        p.inductance,
        p.eta,
        p.photon_energy,
        p.amp_bandwidth,
    ]
}

fn fields_mut(p: &mut DeviceParams) -> [&mut f64; RANGE_FIELDS] {
    [
        &mut p.t0,
        &mut p.r0,
        &mut p.volume,
        &mut p.sigma_ep,
        &mut p.gamma,
        &mut p.alpha,
        &mut p.beta,
        &mut p.m_j,
        &mut p.inductance,
        &mut p.eta,
        &mut p.photon_energy,
        &mut p.amp_bandwidth,
    ]
}

/// Extremal jitter over the corners of a parameter box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerSearch {
    pub min_fwhm: f64,
    pub min_params: DeviceParams,
    pub max_fwhm: f64,
    pub max_params: DeviceParams,
    pub corners_evaluated: usize,
}

/// Exhaustive search of [`predicted_jitter_fwhm`] over [`ParamRange::corners`].
pub fn corner_search(ranges: &ParamRange) -> Result<CornerSearch> {
    ranges.validate()?;
    let corners = ranges.corners();
    let mut best = (f64::INFINITY, corners[0]);
    let mut worst = (f64::NEG_INFINITY, corners[0]);
    for c in &corners {
        let j = predicted_jitter_fwhm(c);
        if j < best.0 {
            best = (j, *c);
        }
        if j > worst.0 {
            worst = (j, *c);
        }
    }
    Ok(CornerSearch {
        min_fwhm: best.0,
        min_params: best.1,
        max_fwhm: worst.0,
        max_params: worst.1,
        corners_evaluated: corners.len(),
    })
}

/// Lowest and highest predicted jitter versus inductance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterEnvelope {
    pub inductance: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Grid inductance at which `lower` is smallest.
    pub lower_argmin: f64,
    /// Grid inductance at which `upper` is smallest.
    pub upper_argmin: f64,
}

impl JitterEnvelope {
    /// Linear interpolation of both bounds at `l` (clamped to the grid).
    pub fn bounds_at(&self, l: f64) -> (f64, f64) {
        let g = &self.inductance;
        if l <= g[0] || g.len() == 1 {
            return (self.lower[0], self.upper[0]);
        }
        let last = g.len() - 1;
        if l >= g[last] {
            return (self.lower[last], self.upper[last]);
        }
        let i = g.partition_point(|&x| x <= l) - 1;
        let w = (l - g[i]) / (g[i + 1] - g[i]);
        (
            self.lower[i] + w * (self.lower[i + 1] - self.lower[i]),
            self.upper[i] + w * (self.upper[i + 1] - self.upper[i]),
        )
    }
}

/// Evaluates the jitter envelope on `l_grid`.
///
/// The inductance range in `ranges` is ignored; every other field is
/// extremized over its interval endpoints. The expression is monotone in
/// α, η, hν, M_J, γ, Σ, V and R₀-free terms, and increasing in β once the
/// two β-dependent factors are combined, so the extremes sit on corners.
pub fn jitter_envelope(ranges: &ParamRange, l_grid: &[f64]) -> Result<JitterEnvelope> {
    if l_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if l_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::UnsortedGrid);
    }
    if let Some(&bad) = l_grid.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::invalid("inductance grid", format!("{bad} is not positive")));
    }
    let mut r = *ranges;
    r.inductance = Interval::point(l_grid[0]);
    r.validate()?;
    let corners = r.corners();
    let (lower, upper): (Vec<f64>, Vec<f64>) = l_grid
        .par_iter()
        .map(|&l| {
            corners
                .iter()
                .map(|c| predicted_jitter_fwhm(&c.with_inductance(l)))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
                    (lo.min(j), hi.max(j))
                })
        })
        .unzip();
    let argmin = |v: &[f64]| {
        let i = v
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        l_grid[i]
    };
    Ok(JitterEnvelope {
        lower_argmin: argmin(&lower),
        upper_argmin: argmin(&upper),
        inductance: l_grid.to_vec(),
        lower,
        upper,
    })
}

/// `n` points linearly spaced over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyGrid);
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    if !(lo < hi) {
        return Err(Error::UnsortedGrid);
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

/// Analytic stationary point of the jitter in `L`: `L* = τ_ext·R₀·(1+β)`.
pub fn analytic_optimal_inductance(p: &DeviceParams) -> f64 {
    external_rise_time(p) * p.r0 * (1.0 + p.beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalInductance {
    pub inductance: f64,
    pub jitter_fwhm: f64,
    /// The minimum lies on (or beyond) an end of the search bracket.
    pub at_bracket_edge: bool,
}

/// Numerical argmin of the jitter in `L` by golden-section search.
pub fn optimal_inductance(p: &DeviceParams, bracket: Interval) -> Result<OptimalInductance> {
    if !(bracket.lo > 0.0 && bracket.lo < bracket.hi && bracket.hi.is_finite()) {
        return Err(Error::invalid(
            "bracket",
            format!("need 0 < lower < upper, got [{}, {}]", bracket.lo, bracket.hi),
        ));
    }
    p.validate()?;
    let f = |l: f64| predicted_jitter_fwhm(&p.with_inductance(l));
    let tol = 1e-6;
    let (l, _) = golden_section_min(f, bracket.lo, bracket.hi, tol * bracket.lo);
    let width = bracket.hi - bracket.lo;
    let (lo_edge, hi_edge) = (bracket.lo + 1e-4 * width, bracket.hi - 1e-4 * width);
    let at_edge = (l <= lo_edge && f(bracket.lo) <= f(lo_edge))
        || (l >= hi_edge && f(bracket.hi) <= f(hi_edge));
    let l = if at_edge {
        if f(bracket.lo) <= f(bracket.hi) {
            bracket.lo
        } else {
            bracket.hi
        }
    } else {
        l
    };
    Ok(OptimalInductance {
        inductance: l,
        jitter_fwhm: f(l),
        at_bracket_edge: at_edge,
    })
}

/// Golden-section minimization of a unimodal `f` on `[a, b]` until the
/// bracket is narrower than `abs_tol`.
pub(crate) fn golden_section_min(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    abs_tol: f64,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..500 {
        if (b - a).abs() <= abs_tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
