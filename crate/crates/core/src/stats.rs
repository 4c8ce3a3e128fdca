//! Monte Carlo summaries and two-sample tests.

use std::fmt::Debug;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::scalar::Real;

/// Kurtosis above which the standard error is flagged unreliable.
pub const HEAVY_TAIL_KURTOSIS: f64 = 100.0;

/// Monte Carlo mean with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateWithError<T> {
    pub mean: T,
    pub stderr: T,
    pub n: usize,
    pub fingerprint: String,
    /// Sample kurtosis `m4 / m2²` of the per-path values (3 for Gaussian samples).
    pub kurtosis: T,
    pub heavy_tailed: bool,
    /// Fraction of exponential clock draws rejected for exceeding the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection_rate: Option<f64>,
}

impl<T: Real> EstimateWithError<T> {
    /// Summarizes per-path samples. With `paired`, consecutive samples are
    /// antithetic partners and the error is computed from pair averages.
    pub fn from_samples(samples: &[T], paired: bool, fingerprint: String) -> Self {
        let n = samples.len();
        let units: Vec<T> = if paired {
            samples.chunks(2).map(|c| c.iter().copied().sum::<T>() / T::count(c.len())).collect()
        } else {
            samples.to_vec()
        };
        let m = units.len();
        if !samples.is_empty() && samples.iter().all(|&s| s == samples[0]) {
            return Self::exact(samples[0], n, fingerprint);
        }
        let mean = samples.iter().copied().sum::<T>() / T::count(n.max(1));
        let (mut m2, mut m4) = (T::zero(), T::zero());
        for &u in &units {
            let d = u - mean;
            let d2 = d * d;
            m2 = m2 + d2;
            m4 = m4 + d2 * d2;
        }
        let stderr = if m > 1 { (m2 / T::count(m - 1) / T::count(m)).sqrt() } else { T::zero() };
        let kurtosis = if m2 > T::zero() {
            let mm2 = m2 / T::count(m);
            m4 / T::count(m) / (mm2 * mm2)
        } else {
            T::zero()
        };
        let heavy_tailed = kurtosis > T::lit(HEAVY_TAIL_KURTOSIS);
        if heavy_tailed {
            log::warn!("sample kurtosis {kurtosis} exceeds {HEAVY_TAIL_KURTOSIS}: standard error unreliable");
        }
        Self { mean, stderr, n, fingerprint, kurtosis, heavy_tailed, rejection_rate: None }
    }

    /// Estimate of a value known exactly (no sampling error).
    pub fn exact(mean: T, n: usize, fingerprint: String) -> Self {
        Self { mean, stderr: T::zero(), n, fingerprint, kurtosis: T::zero(), heavy_tailed: false, rejection_rate: None }
    }
}

/// First 16 hex digits of the SHA-256 of the debug renderings of `parts`.
pub fn fingerprint(parts: &[&dyn Debug]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(format!("{p:?}").as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())[..16].to_string()
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic<T: Real>(a: &[T], b: &[T]) -> T {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    let (na, nb) = (T::count(a.len()), T::count(b.len()));
    let (mut i, mut j) = (0, 0);
    let mut d = T::zero();
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((T::count(i) / na - T::count(j) / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct<T: Real>(n: usize, m: usize) -> T {
    let (n, m) = (n as f64, m as f64);
    T::lit(1.628 * ((n + m) / (n * m)).sqrt())
}

/// Mean and standard error of paired differences `a_i - b_i`.
pub fn paired_difference<T: Real>(a: &[T], b: &[T], paired: bool) -> (T, T) {
    let d: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let e = EstimateWithError::from_samples(&d, paired, String::new());
    (e.mean, e.stderr)
}
