//! Small shared numeric helpers: medians and percentiles over f64 samples.

/// Median of a sample. Even-sized samples take the mean of the two central
/// values. Returns `None` on empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let n = sorted.len();
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0)
    }
}

/// Percentile with linear interpolation between order statistics
/// (the same convention as numpy's default): for p in [0, 100] the value at
/// fractional rank `(n - 1) * p / 100`.
///
/// `sorted` must be ascending. Returns `None` on empty input.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        Some(sorted[lo])
    } else {
        let frac = h - lo as f64;
        Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
    }
}
