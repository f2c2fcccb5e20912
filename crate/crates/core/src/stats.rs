//! Binomial estimates with Wilson score intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (lo, hi) = wilson(successes, trials, Z95);
        let p = if trials == 0 {
            f64::NAN
        } else {
            successes as f64 / trials as f64
        };
        Estimate {
            successes,
            trials,
            p,
            lo,
            hi,
        }
    }

    /// Largest distance from the point estimate to an interval end.
    pub fn radius(&self) -> f64 {
        (self.p - self.lo).max(self.hi - self.p)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Standard error of a binomial proportion at probability `p`.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_point_estimate() {
        let e = Estimate::new(30, 100);
        assert!(e.lo < 0.3 && 0.3 < e.hi);
        // known value: Wilson 95% for 30/100 is [0.2189, 0.3958]
        assert!((e.lo - 0.21886).abs() < 1e-4);
        assert!((e.hi - 0.39585).abs() < 1e-4);
    }

    #[test]
    fn wilson_edges() {
        let e = Estimate::new(0, 50);
        assert_eq!(e.lo, 0.0);
        assert!(e.hi > 0.0 && e.hi < 0.1);
        let e = Estimate::new(50, 50);
        assert_eq!(e.hi, 1.0);
    }
}
