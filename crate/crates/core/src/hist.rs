//! One-dimensional histograms and CDF-based distribution matching.

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 128;

/// Fixed-width histogram with its normalized cumulative distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1D {
    pub range_min: f32,
    pub range_max: f32,
    pub counts: Vec<u64>,
    /// `cdf[b]` is the fraction of samples in bins `0..=b`.
    pub cdf: Vec<f64>,
}

impl Histogram1D {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self) -> f32 {
        (self.range_max - self.range_min) / self.bins() as f32
    }

    fn cdf_below(&self, bin: usize) -> f64 {
        if bin == 0 {
            0.0
        } else {
            self.cdf[bin - 1]
        }
    }

    /// Inverse CDF with linear interpolation inside the selected bin.
    ///
    /// The selected bin is the first one whose cumulative mass exceeds `u`,
    /// so a quantile sitting exactly on a step lands at the lower edge of
    /// the next occupied bin.
    pub fn quantile(&self, u: f64) -> f32 {
        let bins = self.bins();
        let j = self.cdf.partition_point(|&c| c <= u);
        if j >= bins {
            return self.range_max;
        }
        let lo = self.cdf_below(j);
        let mass = self.cdf[j] - lo;
        let frac = if mass > 0.0 { ((u - lo) / mass).clamp(0.0, 1.0) } else { 0.0 };
        let span = f64::from(self.range_max) - f64::from(self.range_min);
        (f64::from(self.range_min) + (j as f64 + frac) / bins as f64 * span) as f32
    }
}

fn min_max(values: &[f32]) -> (f32, f32) {
    values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Tallies `values` into `bins` equal-width bins over `[range_min, range_max]`.
///
/// Values outside the range are clamped into the first or last bin. A
/// degenerate range puts every sample in bin 0.
pub fn build_histogram(values: &[f32], bins: usize, range_min: f32, range_max: f32) -> Result<Histogram1D> {
    if values.is_empty() {
        return Err(Error::EmptyDistribution("histogram input"));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    if !(range_max >= range_min) {
        return Err(Error::InvalidParameter(format!("bad range [{range_min}, {range_max}]")));
    }
    let mut counts = vec![0u64; bins];
    let span = f64::from(range_max) - f64::from(range_min);
    for &v in values {
        let bin = if span > 0.0 {
            let pos = (f64::from(v) - f64::from(range_min)) / span * bins as f64;
            (pos.floor().max(0.0) as usize).min(bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    let total = values.len() as f64;
    let mut running = 0u64;
    let mut cdf: Vec<f64> = counts
        .iter()
        .map(|&c| {
            running += c;
            running as f64 / total
        })
        .collect();
    // exact 1.0 at the top regardless of rounding
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    Ok(Histogram1D { range_min, range_max, counts, cdf })
}

/// Remaps `source` so its distribution follows `target`.
///
/// Each source value is placed on the source CDF at the midpoint of its rank
/// (ties ordered by index), then sent through the inverse CDF of a
/// `bins`-bin histogram of `target` over the target's own value range. The
/// map is monotone non-decreasing and output order matches input order. A
/// constant target maps everything to that constant.
pub fn match_histogram(source: &[f32], target: &[f32], bins: usize) -> Result<Vec<f32>> {
    if source.is_empty() {
        return Err(Error::EmptyDistribution("match_histogram source"));
    }
    if target.is_empty() {
        return Err(Error::EmptyDistribution("match_histogram target"));
    }
    let (tmin, tmax) = min_max(target);
    if tmin == tmax {
        return Ok(vec![tmin; source.len()]);
    }
    let tgt = build_histogram(target, bins, tmin, tmax)?;
    let mut order: Vec<usize> = (0..source.len()).collect();
    order.sort_unstable_by(|&a, &b| source[a].total_cmp(&source[b]).then(a.cmp(&b)));
    let m = source.len() as f64;
    let mut out = vec![0.0; source.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = tgt.quantile((rank as f64 + 0.5) / m);
    }
    Ok(out)
}

/// Exact rank matching: the k-th smallest source value is replaced by the
/// k-th smallest target value. Ties are ordered by original index.
pub fn match_sorted(source: &[f32], target: &[f32]) -> Result<Vec<f32>> {
    if source.len() != target.len() {
        return Err(Error::dim(format!(
            "match_sorted needs equal lengths, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    let mut order: Vec<usize> = (0..source.len()).collect();
    order.sort_by(|&a, &b| source[a].total_cmp(&source[b]).then(a.cmp(&b)));
    let mut sorted_target = target.to_vec();
    sorted_target.sort_by(f32::total_cmp);
    let mut out = vec![0.0; source.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = sorted_target[rank];
    }
    Ok(out)
}
