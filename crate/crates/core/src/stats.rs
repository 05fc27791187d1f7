//! Moment accumulators and Monte-Carlo estimates.

use serde::{Deserialize, Serialize};

use crate::exec::tree_reduce;
use crate::sum::CompensatedSum;

/// First and second raw moments of a sample, compensated.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub n: u64,
    s1: CompensatedSum,
    s2: CompensatedSum,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.s1.add(x);
        self.s2.add(x * x);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        let mut out = *self;
        out.n += other.n;
        out.s1.merge(&other.s1);
        out.s2.merge(&other.s2);
        out
    }

    pub fn merge_all(parts: Vec<Moments>) -> Moments {
        tree_reduce(parts, Moments::merge).unwrap_or_default()
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.s1.value() / self.n as f64
        }
    }

    pub fn mean_sq(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.s2.value() / self.n as f64
        }
    }

    /// Unbiased sample variance, clamped at zero.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.mean();
        ((self.s2.value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    /// Estimate of the mean with standard error sd/sqrt(n).
    pub fn mean_estimate(&self) -> EstimateWithError {
        EstimateWithError {
            value: self.mean(),
            stderr: (self.variance() / self.n.max(1) as f64).sqrt(),
            trials: self.n,
        }
    }
}

/// A Monte-Carlo estimate (or an exact value with `stderr = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl EstimateWithError {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, trials: 0 }
    }

    pub fn is_exact(&self) -> bool {
        self.trials == 0
    }

    /// |value - target| measured in standard errors. Infinite when the
    /// estimate has zero spread but misses the target.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else if self.stderr == 0.0 {
            f64::INFINITY
        } else {
            d / self.stderr
        }
    }
}

/// L2 norm estimate sqrt(E[Y^2]) from moments of Y, with the delta-method
/// standard error sd(Y^2) / (2 sqrt(n E[Y^2])).
pub fn l2_norm_estimate(sq: &Moments) -> EstimateWithError {
    let m2 = sq.mean();
    let value = m2.max(0.0).sqrt();
    let stderr = if value > 0.0 { (sq.variance() / sq.n.max(1) as f64).sqrt() / (2.0 * value) } else { 0.0 };
    EstimateWithError { value, stderr, trials: sq.n }
}
