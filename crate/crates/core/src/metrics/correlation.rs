use std::collections::BTreeSet;

use super::ranking::Ranking;
use crate::error::{Error, Result};

/// Number of pairs within runs of equal values in sorted data.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `values` ascending, returning the number of strict inversions.
fn merge_count(values: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut values[..mid]) + merge_count(&mut values[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if values[j] < values[i] {
            swaps += (mid - i) as u64;
            merged.push(values[j]);
            j += 1;
        } else {
            merged.push(values[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&values[i..mid]);
    merged.extend_from_slice(&values[j..]);
    values.copy_from_slice(&merged);
    swaps
}

/// Kendall's tau-b between paired observations, in O(n log n) (Knight's
/// merge-sort method).
pub fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Statistic(format!(
            "kendall tau needs paired samples, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as u64;
    if n < 2 {
        return Err(Error::Statistic(
            "kendall tau needs at least 2 items".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::Statistic("kendall tau input contains NaN".into()));
    }
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = n * (n - 1) / 2;
    let xs_sorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let tied_x = tied_pairs(&xs_sorted);
    let tied_xy = tied_pairs(&pairs);
    let mut ys_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let discordant = merge_count(&mut ys_sorted);
    let tied_y = tied_pairs(&ys_sorted);

    let denom = ((n0 - tied_x) as f64 * (n0 - tied_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Statistic(
            "kendall tau undefined: a ranking is entirely tied".into(),
        ));
    }
    let numerator =
        n0 as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * discordant as f64;
    Ok((numerator / denom).clamp(-1.0, 1.0))
}

/// Kendall's tau-b between two rankings of the same models.
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64> {
    let models_a: BTreeSet<&str> = a.models().collect();
    let models_b: BTreeSet<&str> = b.models().collect();
    if models_a != models_b || models_a.len() != a.entries.len() {
        return Err(Error::Statistic("rankings cover different models".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = models_a
        .iter()
        .map(|m| {
            (
                a.rank_of(m).expect("model in a") as f64,
                b.rank_of(m).expect("model in b") as f64,
            )
        })
        .unzip();
    kendall_tau_b(&xs, &ys)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Statistic(format!(
            "pearson needs paired samples, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Statistic("pearson needs at least 2 points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Statistic("pearson undefined: zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
