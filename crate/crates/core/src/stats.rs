//! Small statistics toolbox for the stationary suites: autocorrelation-aware
//! standard errors, two-sample Kolmogorov-Smirnov distance, fixed-edge
//! histograms, and least-squares line fits.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Integrated autocorrelation time by Geyer's initial positive sequence:
/// τ = 1 + 2 Σ ρ_j, truncated at the first even lag where the paired sums
/// ρ_{2m} + ρ_{2m+1} stop being positive. Returns at least 1.
pub fn integrated_autocorrelation_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 8 {
        return 1.0;
    }
    let m = mean(xs);
    let c0: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 1.0;
    }
    let max_lag = (n / 4).min(2000);
    let rho = |j: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - j {
            acc += (xs[i] - m) * (xs[i + j] - m);
        }
        acc / (n as f64 * c0)
    };
    let mut tau = 1.0;
    let mut j = 1;
    while j < max_lag {
        let pair = rho(j) + rho(j + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        j += 2;
    }
    tau.max(1.0)
}

/// Mean with an autocorrelation-corrected standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanWithError {
    pub mean: f64,
    pub se: f64,
    pub tau_int: f64,
    pub n: usize,
    pub n_effective: f64,
}

pub fn mean_with_error(xs: &[f64]) -> MeanWithError {
    let n = xs.len();
    let tau = integrated_autocorrelation_time(xs);
    let n_eff = (n as f64 / tau).max(1.0);
    MeanWithError {
        mean: mean(xs),
        se: (variance(xs) / n_eff).sqrt(),
        tau_int: tau,
        n,
        n_effective: n_eff,
    }
}

/// Two-sample Kolmogorov-Smirnov distance sup |F₁ - F₂|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at significance `alpha`:
/// c(α)·sqrt(1/n₁ + 1/n₂) with c(α) = sqrt(-ln(α/2)/2).
pub fn ks_critical_value(alpha: f64, n1: f64, n2: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * (1.0 / n1 + 1.0 / n2).sqrt()
}

/// Fixed-edge histogram with out-of-range counters (samples are never
/// clamped into the end bins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(hi > lo && bins > 0, "empty histogram domain");
        Histogram { lo, hi, counts: vec![0; bins], underflow: 0, overflow: 0 }
    }

    /// Equal-width bins spanning the observed range of the data.
    pub fn from_data(xs: &[f64], bins: usize) -> Self {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() || hi <= lo {
            (lo.min(0.0), lo.min(0.0) + 1.0)
        } else {
            (lo, hi + (hi - lo) * 1e-12 + f64::MIN_POSITIVE)
        };
        let mut h = Histogram::new(lo, hi, bins);
        for &x in xs {
            h.push(x);
        }
        h
    }

    pub fn push(&mut self, x: f64) {
        if x < self.lo {
            self.underflow += 1;
        } else if x >= self.hi {
            self.overflow += 1;
        } else {
            let b = ((x - self.lo) / (self.hi - self.lo) * self.counts.len() as f64) as usize;
            let last = self.counts.len() - 1;
            self.counts[b.min(last)] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    pub fn merge(&mut self, other: &Histogram) {
        assert!(
            self.lo == other.lo && self.hi == other.hi && self.counts.len() == other.counts.len(),
            "histogram shapes differ"
        );
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (0..=self.counts.len()).map(|i| self.lo + w * i as f64).collect()
    }

    /// Count of samples with value <= x, at bin resolution.
    pub fn count_below(&self, x: f64) -> u64 {
        if x < self.lo {
            return 0;
        }
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        let full = (((x - self.lo) / w).floor() as usize).min(self.counts.len());
        self.underflow + self.counts[..full].iter().sum::<u64>()
    }

    pub fn max_bin_fraction(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        *self.counts.iter().max().unwrap() as f64 / t as f64
    }
}

/// Least-squares slope and intercept of y against x.
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// 2x2 sample covariance of paired series.
pub fn covariance2(a: &[f64], b: &[f64]) -> [[f64; 2]; 2] {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return [[0.0; 2]; 2];
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut caa = 0.0;
    let mut cbb = 0.0;
    let mut cab = 0.0;
    for i in 0..n {
        caa += (a[i] - ma) * (a[i] - ma);
        cbb += (b[i] - mb) * (b[i] - mb);
        cab += (a[i] - ma) * (b[i] - mb);
    }
    let d = (n - 1) as f64;
    [[caa / d, cab / d], [cab / d, cbb / d]]
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym2_eigenvalues(m: [[f64; 2]; 2]) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 - disc, tr / 2.0 + disc)
}
