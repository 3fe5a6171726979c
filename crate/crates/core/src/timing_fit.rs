//! Exponentially modified Gaussian (EMG) fits of crossing-time histograms.
//!
//! The model is a Gaussian of height `A`, centre `t0` and width `σ` convolved
//! with a one-sided exponential `u(t)·e^{−τt}`:
//!
//! ```text
//! f(t) = A·σ·√(π/2) · e^{τ²σ²/2} · e^{−τ(t−t0)} · erfc((t0 − t + τσ²) / (√2·σ))
//! ```
//!
//! `τ` is a rate: large `τ` means a short tail, and `τ → ∞` recovers the bare
//! Gaussian (scaled by `√(2π)/τ`). The product `e^{x²}·erfc(x)` is evaluated
//! through `erfcx` so that the expression stays finite for any `τσ`.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::units::FWHM_PER_SIGMA;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const SQRT_PI_OVER_2: f64 = 1.253_314_137_315_500_3;

/// Scaled complementary error function `e^{x²}·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 8.0 {
        return (x * x).exp() * erfc(x);
    }
    // Laplace continued fraction; at x >= 8 forty terms reach full precision.
    let mut t = x;
    for n in (1..=40).rev() {
        t = x + 0.5 * n as f64 / t;
    }
    1.0 / (SQRT_PI * t)
}

/// Parameters of the EMG in the form it appears in the model above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmgParams {
    pub amplitude: f64,
    /// Gaussian centre, s.
    pub t0: f64,
    /// Gaussian width, s.
    pub sigma: f64,
    /// Exponential decay rate, 1/s.
    pub tau: f64,
}

impl EmgParams {
    /// Tail length `1/τ`, s.
    pub fn tail(&self) -> f64 {
        1.0 / self.tau
    }
}

/// `ln(e^{k²/2 − k·u}·erfc((k − u)/√2))`, the shape of the EMG in units of σ
/// with `k = τσ`.
fn ln_shape(u: f64, k: f64) -> f64 {
    let z = (k - u) / std::f64::consts::SQRT_2;
    if z > 0.0 {
        -0.5 * u * u + erfcx(z).ln()
    } else {
        0.5 * k * k - k * u + erfc(z).ln()
    }
}

/// Evaluates the EMG at `t`.
pub fn emg_eval(p: &EmgParams, t: f64) -> f64 {
    let u = (t - p.t0) / p.sigma;
    let k = p.tau * p.sigma;
    p.amplitude * p.sigma * SQRT_PI_OVER_2 * ln_shape(u, k).exp()
}

/// Area under the EMG, `A·σ·√(2π)/τ`.
pub fn emg_area(p: &EmgParams) -> f64 {
    p.amplitude * p.sigma * (2.0 * std::f64::consts::PI).sqrt() / p.tau
}

/// Full width at half maximum of the EMG, found numerically: golden-section
/// search for the mode, then bisection for each half-maximum point.
pub fn emg_fwhm(p: &EmgParams) -> f64 {
    shape_fwhm(p.sigma, 1.0 / p.tau)
}

/// FWHM for Gaussian width `sigma` and tail length `tail` (= 1/τ).
pub fn shape_fwhm(sigma: f64, tail: f64) -> f64 {
    if tail == 0.0 {
        return FWHM_PER_SIGMA * sigma;
    }
    if !tail.is_finite() {
        return f64::INFINITY;
    }
    if sigma == 0.0 {
        return std::f64::consts::LN_2 * tail;
    }
    let k = sigma / tail;
    // Work in t − t0 with σ-independent scale so both limits stay resolved.
    let f = |x: f64| ln_shape(x / sigma, k);
    let scale = sigma + tail;
    let (mode, _) = crate::device_model::golden_section_min(
        |x| -f(x),
        -5.0 * sigma,
        5.0 * sigma + 5.0 * tail,
        1e-13 * scale,
    );
    let half = f(mode) - std::f64::consts::LN_2;
    let mut left = mode - 2.0 * scale;
    while f(left) > half {
        left -= 2.0 * scale;
    }
    let mut right = mode + 2.0 * scale;
    while f(right) > half {
        right += 2.0 * scale;
    }
    let lo = bisect(|x| f(x) - half, left, mode, 1e-13 * scale);
    let hi = bisect(|x| f(x) - half, mode, right, 1e-13 * scale);
    hi - lo
}

/// Root of `g` on `[a, b]` where `g(a)` and `g(b)` have opposite signs.
pub(crate) fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ga = g(a);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Binned data to fit: bin centres and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Histogram {
    /// Bins `values` with uniform width over `[lo, hi)`; values outside are
    /// ignored and reported in the second return value.
    pub fn from_values(values: &[f64], lo: f64, hi: f64, width: f64) -> (Self, usize) {
        let n = (((hi - lo) / width).ceil() as usize).max(1);
        let mut counts = vec![0.0; n];
        let mut outside = 0;
        for &v in values {
            let i = ((v - lo) / width).floor();
            if i >= 0.0 && (i as usize) < n {
                counts[i as usize] += 1.0;
            } else {
                outside += 1;
            }
        }
        let centers = (0..n).map(|i| lo + (i as f64 + 0.5) * width).collect();
        (Histogram { centers, counts }, outside)
    }

    pub fn bin_width(&self) -> f64 {
        if self.centers.len() > 1 {
            self.centers[1] - self.centers[0]
        } else {
            1.0
        }
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    MaxIter,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgFit {
    pub params: EmgParams,
    /// Covariance of `(H, t0, σ, 1/τ)` where `H = A/τ` is the Gaussian-limit
    /// peak height. Weighted by the Poisson variances, not rescaled by χ².
    pub covariance: [[f64; 4]; 4],
    pub fwhm: f64,
    /// One-sigma FWHM uncertainty propagated from `covariance`.
    pub fwhm_std: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub status: FitStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub step_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 500,
            step_tol: 1e-10,
        }
    }
}

/// Fit model with parameters `x = (H, t0, σ, λ)`, `λ = 1/τ`. Equal to the
/// EMG with `A = H/λ`; reduces to `H·e^{−u²/2}` as `λ → 0`.
fn model(x: &Vector4<f64>, t: f64) -> f64 {
    let (h, t0, sigma, tail) = (x[0], x[1], x[2], x[3]);
    let k = sigma / tail;
    let u = (t - t0) / sigma;
    h * k * SQRT_PI_OVER_2 * ln_shape(u, k).exp()
}

struct Problem<'a> {
    t: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
    min_tail: f64,
}

impl Problem<'_> {
    fn residuals(&self, x: &Vector4<f64>) -> Vec<f64> {
        self.t
            .iter()
            .zip(self.y)
            .zip(&self.w)
            .map(|((&t, &y), &w)| (y - model(x, t)) * w)
            .collect()
    }

    fn cost(&self, x: &Vector4<f64>) -> f64 {
        self.residuals(x).iter().map(|r| r * r).sum()
    }

    fn feasible(&self, x: &Vector4<f64>) -> bool {
        x[0] > 0.0 && x[2] > 0.0 && x[3] >= self.min_tail && x.iter().all(|v| v.is_finite())
    }

    /// Forward-difference Jacobian of the model (not the residual), weighted.
    fn jacobian(&self, x: &Vector4<f64>) -> Vec<[f64; 4]> {
        let base: Vec<f64> = self.t.iter().map(|&t| model(x, t)).collect();
        let scales = [x[0], x[2], x[2], x[2].max(x[3])];
        let mut jac = vec![[0.0; 4]; self.t.len()];
        for j in 0..4 {
            // Forward steps only; increasing λ never leaves the feasible set.
            let h = 1e-7 * scales[j].abs().max(f64::MIN_POSITIVE);
            let mut xp = *x;
            xp[j] += h;
            for (i, &t) in self.t.iter().enumerate() {
                jac[i][j] = (model(&xp, t) - base[i]) / h * self.w[i];
            }
        }
        jac
    }
}

fn normal_equations(jac: &[[f64; 4]], r: &[f64]) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for (row, &ri) in jac.iter().zip(r) {
        for a in 0..4 {
            jtr[a] += row[a] * ri;
            for b in a..4 {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..4 {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
    }
    (jtj, jtr)
}

struct LmResult {
    x: Vector4<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

/// Levenberg–Marquardt (damped Gauss–Newton) with strictly monotone cost.
fn levenberg_marquardt(prob: &Problem, x0: Vector4<f64>, opts: &FitOptions) -> LmResult {
    let mut x = x0;
    let mut cost = prob.cost(&x);
    let mut mu = 1e-3;
    for it in 1..=opts.max_iter {
        let r = prob.residuals(&x);
        let jac = prob.jacobian(&x);
        let (jtj, jtr) = normal_equations(&jac, &r);
        let mut accepted = false;
        while mu < 1e20 {
            let mut a = jtj;
            for d in 0..4 {
                a[(d, d)] += mu * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let mut xn = x + step;
            if xn[3] < prob.min_tail {
                xn[3] = prob.min_tail;
            }
            if !prob.feasible(&xn) {
                mu *= 4.0;
                continue;
            }
            let cn = prob.cost(&xn);
            if cn < cost {
                let rel_step = (0..4)
                    .map(|d| ((xn[d] - x[d]) / scale_of(&x, d)).abs())
                    .fold(0.0, f64::max);
                x = xn;
                cost = cn;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if rel_step < opts.step_tol {
                    return LmResult { x, cost, iterations: it, converged: true };
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // No descent direction at any damping: stationary point.
            return LmResult { x, cost, iterations: it, converged: true };
        }
    }
    LmResult {
        x,
        cost,
        iterations: opts.max_iter,
        converged: false,
    }
}

fn scale_of(x: &Vector4<f64>, d: usize) -> f64 {
    match d {
        0 => x[0].abs(),
        1 | 2 => x[2].abs(),
        _ => x[2].abs().max(x[3].abs()),
    }
}

/// Weighted least-squares EMG fit of a histogram.
///
/// Weights are Poisson, `1/max(count, 1)`. Returns `None` when fewer than
/// eight bins are occupied.
pub fn fit_emg(hist: &Histogram) -> Option<EmgFit> {
    fit_emg_with(hist, &FitOptions::default())
}

pub fn fit_emg_with(hist: &Histogram, opts: &FitOptions) -> Option<EmgFit> {
    if hist.occupied_bins() < 8 {
        return None;
    }
    let width = hist.bin_width();
    let (t, y) = (&hist.centers, &hist.counts);
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty histogram");
    let mode = t[imax];

    // Left half width at half maximum, interpolated.
    let mut hwhm = width;
    for i in (0..imax).rev() {
        if y[i] < 0.5 * ymax {
            let frac = (0.5 * ymax - y[i]) / (y[i + 1] - y[i]);
            hwhm = (mode - (t[i] + frac * width)).max(0.5 * width);
            break;
        }
    }
    let total: f64 = y.iter().sum();
    let mean = t.iter().zip(y).map(|(t, y)| t * y).sum::<f64>() / total;
    let sigma0 = hwhm / (2.0 * std::f64::consts::LN_2).sqrt();
    let tail0 = (mean - mode).clamp(1e-3 * width, 1e3 * width);

    let prob = Problem {
        t,
        y,
        w: y.iter().map(|&c| 1.0 / c.max(1.0).sqrt()).collect(),
        min_tail: 1e-4 * sigma0.min(width),
    };
    let starts = [
        Vector4::new(ymax, mode, sigma0, tail0.max(prob.min_tail)),
        Vector4::new(ymax, mode - 0.5 * sigma0, sigma0, sigma0.max(prob.min_tail)),
    ];
    let best = starts
        .iter()
        .map(|&x0| levenberg_marquardt(&prob, x0, opts))
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("two starts");

    let x = best.x;
    let dof = (t.len() as f64 - 4.0).max(1.0);
    let jac = prob.jacobian(&x);
    let r = prob.residuals(&x);
    let (jtj, _) = normal_equations(&jac, &r);
    let cov = jtj.try_inverse().unwrap_or_else(|| Matrix4::from_element(f64::NAN));
    let mut covariance = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            covariance[a][b] = cov[(a, b)];
        }
    }

    let (sigma, tail) = (x[2], x[3]);
    let fwhm = shape_fwhm(sigma, tail);
    let ds = 1e-6 * sigma;
    let dl = 1e-6 * sigma.max(tail);
    let g_sigma = (shape_fwhm(sigma + ds, tail) - shape_fwhm(sigma - ds, tail)) / (2.0 * ds);
    let g_tail = (shape_fwhm(sigma, tail + dl) - shape_fwhm(sigma, (tail - dl).max(0.0)))
        / (tail + dl - (tail - dl).max(0.0));
    let fwhm_var = g_sigma * g_sigma * cov[(2, 2)]
        + 2.0 * g_sigma * g_tail * cov[(2, 3)]
        + g_tail * g_tail * cov[(3, 3)];

    let status = if sigma < 1e-3 * width {
        FitStatus::Degenerate
    } else if best.converged {
        FitStatus::Converged
    } else {
        FitStatus::MaxIter
    };
    Some(EmgFit {
        params: EmgParams {
            amplitude: x[0] / tail,
            t0: x[1],
            sigma,
            tau: 1.0 / tail,
        },
        covariance,
        fwhm,
        fwhm_std: fwhm_var.max(0.0).sqrt(),
        reduced_chi2: best.cost / dof,
        iterations: best.iterations,
        status,
    })
}
