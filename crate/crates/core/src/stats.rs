//! Descriptive statistics used throughout feature extraction.
//!
//! Empty or degenerate inputs yield zeros rather than NaN so every feature
//! stays finite.

use serde::Serialize;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator), 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DescStats {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub kurtosis: f64,
    pub skewness: f64,
}

impl DescStats {
    pub const NAMES: [&'static str; 8] = ["mean", "sd", "median", "min", "max", "range", "kurtosis", "skewness"];

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.mean,
            self.sd,
            self.median,
            self.min,
            self.max,
            self.range,
            self.kurtosis,
            self.skewness,
        ]
    }
}

/// Mean, sample SD, median, extremes, excess kurtosis `m4/m2^2 - 3` and
/// skewness `m3/m2^1.5` (central moments with an n denominator).
/// Skewness needs three values and kurtosis four; both are 0 when the
/// values are constant.
pub fn desc_stats(xs: &[f64]) -> DescStats {
    let n = xs.len();
    if n == 0 {
        return DescStats::default();
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let (min, max) = (sorted[0], sorted[n - 1]);

    let nf = n as f64;
    // corrected two-pass mean
    let m0 = mean(xs);
    let m = m0 + xs.iter().map(|x| x - m0).sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let sd = if n > 1 { (m2 / (nf - 1.0)).sqrt() } else { 0.0 };
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let skewness = if n >= 3 && m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    let kurtosis = if n >= 4 && m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };

    DescStats {
        mean: m,
        sd,
        median,
        min,
        max,
        range: max - min,
        kurtosis,
        skewness,
    }
}
