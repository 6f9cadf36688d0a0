//! Gaussian kernel density estimate over pair distances, and the similarity
//! threshold read off its first local maximum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BandwidthRule;

/// Kernel terms beyond this many bandwidths underflow to exactly zero in
/// f64 (`exp(-800)`), so skipping them leaves every sum bit-identical.
const KERNEL_REACH: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeThreshold {
    pub delta: f64,
    pub bandwidth: f64,
    pub peak_index: usize,
    /// No local maximum existed and the global maximum was used instead.
    pub fallback: bool,
    pub warning: Option<String>,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb, `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, using
/// the sample standard deviation. When the IQR is zero but the spread is not,
/// the standard deviation alone is used.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let spread = match sd.min(iqr / 1.34) {
        s if s > 0.0 => s,
        _ => sd,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Evaluates the density of `sorted` samples at each grid point. Each point
/// is summed in sample order, so the result does not depend on threading.
pub fn evaluate_density(sorted: &[f64], bandwidth: f64, grid: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (sorted.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let reach = KERNEL_REACH * bandwidth;
    grid.par_iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&s| s < x - reach);
            let hi = sorted.partition_point(|&s| s <= x + reach);
            let sum: f64 = sorted[lo..hi]
                .iter()
                .map(|&s| {
                    let z = (x - s) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum();
            sum * scale
        })
        .collect()
}

/// Index of the first local maximum. Interior points qualify when
/// `d[i-1] < d[i] >= d[i+1]`; the left end qualifies when `d[0] > d[1]`.
/// A maximum at the right end does not count.
pub fn first_local_max(density: &[f64]) -> Option<usize> {
    if density.len() < 2 {
        return None;
    }
    if density[0] > density[1] {
        return Some(0);
    }
    (1..density.len() - 1).find(|&i| density[i - 1] < density[i] && density[i] >= density[i + 1])
}

/// Uniform grid of `points` abscissae over `[lo, hi]`, endpoints exact.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo + (hi - lo) * (i as f64 / last)
            }
        })
        .collect()
}

/// Similarity threshold: the grid abscissa of the first local maximum of the
/// distance density. Falls back to the global maximum, with a warning, when
/// the density is monotone increasing over the grid.
pub fn kde_threshold(
    distances: &[f64],
    rule: BandwidthRule,
    grid_points: usize,
) -> Result<KdeThreshold> {
    if distances.len() < 2 {
        return Err(Error::TooFewSamples(distances.len()));
    }
    if grid_points < 3 {
        return Err(Error::Config("kde grid needs at least 3 points".into()));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::Statistic("non-finite distance sample".into()));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    let bandwidth = match rule {
        BandwidthRule::Silverman => silverman_bandwidth(&sorted),
        BandwidthRule::Fixed(h) => h,
    };
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::ZeroBandwidth);
    }

    let grid = uniform_grid(sorted[0], sorted[sorted.len() - 1], grid_points);
    let density = evaluate_density(&sorted, bandwidth, &grid);

    let (peak_index, fallback, warning) = match first_local_max(&density) {
        Some(i) => (i, false, None),
        None => {
            let global =
                density
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, &d)| if d > density[best] { i } else { best });
            let msg = format!(
                "distance density has no local maximum; using the global maximum at {:.6}",
                grid[global]
            );
            log::warn!("{msg}");
            (global, true, Some(msg))
        }
    };

    Ok(KdeThreshold {
        delta: grid[peak_index],
        bandwidth,
        peak_index,
        fallback,
        warning,
        grid,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert_eq!(quantile(&x, 0.25), 1.75);
        assert_eq!(quantile(&x, 0.75), 3.25);
    }

    #[test]
    fn silverman_matches_hand_computation() {
        // sd = 1.2909944, IQR / 1.34 = 1.1194030 -> 0.9 * 1.1194030 * 4^-0.2
        let h = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0]);
        assert!((h - 0.9 * (1.5 / 1.34) * 4f64.powf(-0.2)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            kde_threshold(&[0.5], BandwidthRule::Silverman, 64),
            Err(Error::TooFewSamples(1))
        ));
        assert!(matches!(
            kde_threshold(&[0.5, 0.5, 0.5], BandwidthRule::Silverman, 64),
            Err(Error::ZeroBandwidth)
        ));
    }

    #[test]
    fn monotone_increasing_density_falls_back() {
        // A rising ramp plus half the mass piled on the right end; the grid is
        // coarse enough that the pile dominates the last step.
        let mut samples = vec![1.0; 500];
        samples.extend((0..500).map(|i| (i as f64 / 500.0).sqrt()));
        let t = kde_threshold(&samples, BandwidthRule::Silverman, 64).unwrap();
        assert!(t.fallback);
        assert!(t.warning.is_some());
        assert_eq!(t.peak_index, 63);
        assert_eq!(t.delta, 1.0);
    }

    #[test]
    fn duplicate_heavy_sample_peaks_at_zero() {
        let mut samples = vec![0.0; 50];
        samples.extend(vec![1.0; 950]);
        let t = kde_threshold(&samples, BandwidthRule::Silverman, 2048).unwrap();
        assert!(!t.fallback);
        assert_eq!(t.delta, 0.0);
    }

    #[test]
    fn local_max_rules() {
        assert_eq!(first_local_max(&[1.0, 2.0, 2.0, 1.0]), Some(1));
        assert_eq!(first_local_max(&[3.0, 2.0, 4.0, 1.0]), Some(0));
        assert_eq!(first_local_max(&[1.0, 2.0, 3.0]), None);
        assert_eq!(first_local_max(&[1.0, 1.0, 1.0]), None);
    }

    #[test]
    fn windowed_sum_equals_full_sum() {
        let samples: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 / 50.0).collect();
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let h = 0.01;
        let grid = uniform_grid(0.0, 2.0, 97);
        let fast = evaluate_density(&sorted, h, &grid);
        let scale = 1.0 / (sorted.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        for (x, f) in grid.iter().zip(&fast) {
            let full: f64 = sorted
                .iter()
                .map(|s| (-0.5 * ((x - s) / h).powi(2)).exp())
                .sum::<f64>()
                * scale;
            assert_eq!(full.to_bits(), f.to_bits());
        }
    }
}
