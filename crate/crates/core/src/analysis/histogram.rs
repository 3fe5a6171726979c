//! Filter-score histogram, peak finding and photon-number classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFinder {
    pub bins: usize,
    /// Moving-average width as a fraction of the occupied score range.
    pub smoothing_fraction: f64,
    /// Minimum prominence in units of the Poisson noise `√height`.
    pub significance: f64,
}

impl Default for PeakFinder {
    fn default() -> Self {
        PeakFinder {
            bins: 400,
            smoothing_fraction: 0.01,
            significance: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Parabolic-vertex estimate on the smoothed histogram.
    pub center: f64,
    pub height: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub smoothed: Vec<f64>,
    pub peaks: Vec<Peak>,
    /// Score at the smoothed minimum between consecutive peaks.
    pub valleys: Vec<f64>,
    pub valley_heights: Vec<f64>,
    /// Photon number of the first peak (0 when it sits at zero score).
    pub first_photon_number: u32,
    /// False when fewer than two peaks were found.
    pub classification_available: bool,
}

impl AreaHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }
}

fn moving_average(counts: &[u64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = counts.len();
    let mut prefix = vec![0u64; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + counts[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) as f64 / (hi - lo) as f64
        })
        .collect()
}

/// Indices of local maxima with their topographic prominence.
fn prominent_maxima(s: &[f64]) -> Vec<(usize, f64)> {
    let n = s.len();
    let mut out = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || s[i] > s[i - 1];
        let right_ok = i + 1 == n || s[i] >= s[i + 1];
        if !(left_ok && right_ok) || s[i] <= 0.0 {
            continue;
        }
        // Lowest point on each side before the profile rises above s[i].
        let mut left_min = s[i];
        let mut left_bounded = false;
        for j in (0..i).rev() {
            if s[j] > s[i] {
                left_bounded = true;
                break;
            }
            left_min = left_min.min(s[j]);
        }
        let mut right_min = s[i];
        let mut right_bounded = false;
        for &v in &s[i + 1..] {
            if v > s[i] {
                right_bounded = true;
                break;
            }
            right_min = right_min.min(v);
        }
        let base = match (left_bounded, right_bounded) {
            (true, true) => left_min.max(right_min),
            (true, false) => left_min,
            (false, true) => right_min,
            (false, false) => left_min.min(right_min),
        };
        out.push((i, s[i] - base));
    }
    out
}

/// Histograms the scores and locates peaks and the valleys between them.
pub fn build_area_histogram(scores: &[f64], finder: &PeakFinder) -> Result<AreaHistogram> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scores to histogram"));
    }
    if finder.bins < 3 {
        return Err(Error::invalid("analysis.peak_finder.bins", "need at least 3 bins"));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let width = span * (1.0 + 1e-9) / finder.bins as f64;
    let edges: Vec<f64> = (0..=finder.bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; finder.bins];
    for &s in scores {
        let i = (((s - lo) / width) as usize).min(finder.bins - 1);
        counts[i] += 1;
    }

    let first = counts.iter().position(|&c| c > 0).unwrap_or(0);
    let last = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
    let occupied = last - first + 1;
    let window = ((finder.smoothing_fraction * occupied as f64).round() as usize).max(1) | 1;
    let smoothed = moving_average(&counts, window);

    let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut peak_bins = Vec::new();
    let mut peaks = Vec::new();
    for (i, prom) in prominent_maxima(&smoothed) {
        let h = smoothed[i];
        if prom < finder.significance * h.sqrt() {
            continue;
        }
        let mut center = centers[i];
        if i > 0 && i + 1 < smoothed.len() {
            let (a, b, c) = (smoothed[i - 1], h, smoothed[i + 1]);
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                center += 0.5 * (a - c) / denom * width;
            }
        }
        peak_bins.push(i);
        peaks.push(Peak { center, height: h, prominence: prom });
    }

    let mut valleys = Vec::new();
    let mut valley_heights = Vec::new();
    for w in peak_bins.windows(2) {
        let inner = &smoothed[w[0] + 1..w[1]];
        let (at, best) = inner
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |a, (j, v)| if v < a.1 { (j, v) } else { a });
        // Floor of the valley: the run of bins around the minimum that stay
        // within counting noise of it. Its midpoint is the boundary.
        let tol = best.sqrt() + 2.0 / window as f64;
        let mut lo = at;
        while lo > 0 && inner[lo - 1] <= best + tol {
            lo -= 1;
        }
        let mut hi = at;
        while hi + 1 < inner.len() && inner[hi + 1] <= best + tol {
            hi += 1;
        }
        let off = w[0] + 1;
        valleys.push(0.5 * (centers[lo + off] + centers[hi + off]));
        valley_heights.push(best);
    }

    let first_photon_number = match peaks.as_slice() {
        [p0, p1, ..] if p0.center.abs() < 0.25 * (p1.center - p0.center) => 0,
        [p0] if p0.center.abs() < 0.05 * span => 0,
        _ => 1,
    };
    Ok(AreaHistogram {
        edges,
        counts,
        smoothed,
        classification_available: peaks.len() >= 2,
        peaks,
        valleys,
        valley_heights,
        first_photon_number,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonClassAssignment {
    pub labels: Vec<u32>,
    pub boundaries: Vec<f64>,
    pub first_class: u32,
    pub warnings: Vec<String>,
}

impl PhotonClassAssignment {
    pub fn label_of(&self, score: f64) -> u32 {
        self.first_class + self.boundaries.partition_point(|&b| b <= score) as u32
    }

    pub fn classes(&self) -> std::ops::RangeInclusive<u32> {
        self.first_class..=self.first_class + self.boundaries.len() as u32
    }

    pub fn members(&self, class: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Labels every score by the histogram valley interval it falls in.
///
/// Scores above the last valley join the highest resolved class.
pub fn classify(
    scores: &[f64],
    hist: &AreaHistogram,
    overlap_fraction: f64,
) -> Result<PhotonClassAssignment> {
    if hist.peaks.len() < 2 {
        return Err(Error::TooFewPeaks(hist.peaks.len(), 2));
    }
    let mut warnings = Vec::new();
    for (k, &v) in hist.valley_heights.iter().enumerate() {
        let lower = hist.peaks[k].height.min(hist.peaks[k + 1].height);
        if v > overlap_fraction * lower {
            warnings.push(format!(
                "peaks {} and {} overlap: valley height {:.1} exceeds {:.0}% of the smaller peak",
                hist.first_photon_number + k as u32,
                hist.first_photon_number + k as u32 + 1,
                v,
                overlap_fraction * 100.0
            ));
        }
    }
    let mut a = PhotonClassAssignment {
        labels: Vec::new(),
        boundaries: hist.valleys.clone(),
        first_class: hist.first_photon_number,
        warnings,
    };
    a.labels = scores.iter().map(|&s| a.label_of(s)).collect();
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    fn clusters(centres: &[f64], sd: f64, each: usize) -> (Vec<f64>, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = Vec::new();
        let mut truth = Vec::new();
        for (k, &c) in centres.iter().enumerate() {
            let d = Normal::new(c, sd).unwrap();
            for _ in 0..each {
                s.push(d.sample(&mut rng));
                truth.push(k as u32);
            }
        }
        (s, truth)
    }

    #[test]
    fn two_clusters_two_peaks() {
        let (s, _) = clusters(&[0.0, 1.0], 0.08, 5000);
        let h = build_area_histogram(&s, &PeakFinder::default()).unwrap();
        assert_eq!(h.peaks.len(), 2);
        assert_eq!(h.valleys.len(), 1);
        assert!(h.valleys[0] > 0.2 && h.valleys[0] < 0.8);
        assert!(h.classification_available);
        assert_eq!(h.first_photon_number, 0);
    }

    #[test]
    fn three_clusters_classified_exactly() {
        let (s, truth) = clusters(&[0.0, 1.0, 2.0], 0.1, 4000);
        let h = build_area_histogram(&s, &PeakFinder::default()).unwrap();
        let a = classify(&s, &h, 0.2).unwrap();
        let bad = a.labels.iter().zip(&truth).filter(|(x, y)| x != y).count();
        assert_eq!(bad, 0, "{:?} {:?}", h.peaks, h.valleys);
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn uniform_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = Uniform::new(0.0, 1.0).unwrap();
        let s: Vec<f64> = (0..100_000).map(|_| u.sample(&mut rng)).collect();
        let h = build_area_histogram(&s, &PeakFinder::default()).unwrap();
        assert!(h.peaks.len() <= 1, "{:?}", h.peaks);
        assert!(!h.classification_available);
        assert!(matches!(classify(&s, &h, 0.2), Err(Error::TooFewPeaks(_, 2))));
    }

    #[test]
    fn empty_scores() {
        assert!(build_area_histogram(&[], &PeakFinder::default()).is_err());
    }

    #[test]
    fn first_peak_away_from_zero_is_one_photon() {
        let (s, _) = clusters(&[1.0, 1.9, 2.7], 0.05, 3000);
        let h = build_area_histogram(&s, &PeakFinder::default()).unwrap();
        assert_eq!(h.first_photon_number, 1);
        let a = classify(&s, &h, 0.2).unwrap();
        assert_eq!(a.classes(), 1..=3);
    }
}
