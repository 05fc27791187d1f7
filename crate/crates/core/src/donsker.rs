//! Desk-scale check of the Gaussian limit of `(1/sqrt n) S_{floor(tn)}`.
//!
//! The normalizing variance comes from the exact arc-overlap formula, never
//! from the sample, so the shape test (KS) and the variance test are separate.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exec::{map_trial_chunks, Execution, StreamSeed};
use crate::projector::LagGram;
use crate::stats::{EstimateWithError, Moments};
use crate::system::{eval_f_unchecked, sample_state, SystemModel};

pub const MIN_PATHS: usize = 100;

/// Asymptotic 1% critical value of the one-sample KS statistic, times `sqrt(trials)`.
pub const KS_CRITICAL: f64 = 1.63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub n: u64,
    /// Time fractions `g / grid_size`, `g = 1..=grid_size`.
    pub grid: Vec<f64>,
    /// `floor(t n)` for each grid time.
    pub steps: Vec<u64>,
    /// One row per path: `S_{floor(tn)} / sqrt(n)` at each grid time.
    pub paths: Vec<Vec<f64>>,
    pub stream: StreamSeed,
}

impl TrajectoryEnsemble {
    pub fn trials(&self) -> usize {
        self.paths.len()
    }

    pub fn endpoints(&self) -> Vec<f64> {
        self.paths.iter().map(|p| *p.last().expect("grid_size >= 1")).collect()
    }

    /// `(trial, grid index, value)` rows in trial-major order, 0-based.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.paths.iter().enumerate().flat_map(|(t, p)| p.iter().enumerate().map(move |(g, &v)| (t, g, v)))
    }
}

/// Simulate `trials` independent paths of `S_m = sum_{i<m} f o T^i`, each
/// from its own freshly sampled state.
pub fn simulate_paths(
    model: &SystemModel,
    n: u64,
    grid_size: usize,
    trials: usize,
    stream: StreamSeed,
    exec: Execution,
) -> Result<TrajectoryEnsemble> {
    if trials < MIN_PATHS {
        return Err(Error::Precondition(format!("at least {MIN_PATHS} paths required, got {trials}")));
    }
    if n == 0 || grid_size == 0 {
        return Err(Error::Precondition("n and grid_size must be >= 1".into()));
    }
    let window = model.window();
    window.check(-(*model.delays().last().expect("K >= 1") as i64))?;
    window.check(n as i64 - 1 - model.delay(1) as i64)?;

    let g = grid_size as u64;
    let grid: Vec<f64> = (1..=g).map(|j| j as f64 / g as f64).collect();
    let steps: Vec<u64> = (1..=g).map(|j| (j as u128 * n as u128 / g as u128) as u64).collect();
    let scale = (n as f64).sqrt();

    let chunks = map_trial_chunks(exec, stream, trials, |rng, range| {
        range
            .map(|_| {
                let state = sample_state(model, rng);
                let mut row = Vec::with_capacity(steps.len());
                let mut acc = 0.0;
                let mut t = 0u64;
                for &stop in &steps {
                    while t < stop {
                        acc += eval_f_unchecked(model, &state, t as i64);
                        t += 1;
                    }
                    row.push(acc / scale);
                }
                row
            })
            .collect::<Vec<_>>()
    });
    let paths = chunks.into_iter().flatten().collect();
    Ok(TrajectoryEnsemble { n, grid, steps, paths, stream })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMethod {
    Exact,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitVariance {
    pub sigma2: f64,
    pub method: VarianceMethod,
}

/// `sigma^2 = sum_{k,k'} theta_k theta_k' mu(T^{-N_k} A_k cap T^{-N_k'} A_k')`.
pub fn limit_variance_exact(model: &SystemModel) -> LimitVariance {
    LimitVariance { sigma2: LagGram::new(model).total(), method: VarianceMethod::Exact }
}

/// Monte-Carlo `E[(sum_k theta_k e_0 1[T^{N_k} x in A_k])^2]`; `e_0^2 = 1`, so
/// only the rotation coordinate is sampled.
pub fn limit_variance_mc(model: &SystemModel, trials: usize, stream: StreamSeed, exec: Execution) -> EstimateWithError {
    use rand::Rng;
    let parts = map_trial_chunks(exec, stream, trials, |rng, range| {
        let mut m = Moments::default();
        for _ in range {
            let pos = rng.random_range(0..model.m());
            let mut v = 0.0;
            for k in 1..=model.k() {
                let x = model.position(pos, model.delay(k) as i64);
                if model.arc(k).contains(x, model.m()) {
                    v += model.theta(k);
                }
            }
            m.push(v * v);
        }
        m
    });
    let est = Moments::merge_all(parts).mean_estimate();
    EstimateWithError { trials: trials as u64, ..est }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KsStatus {
    Pass,
    Fail,
    /// `sigma^2 = 0` and every endpoint is 0: the limit is the point mass at 0.
    Degenerate,
    /// `sigma^2 = 0` but some endpoint is not 0.
    DegenerateNonzero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub trials: usize,
    pub sigma2: f64,
    pub distance: f64,
    pub threshold: f64,
    pub status: KsStatus,
}

impl KsReport {
    pub fn passed(&self) -> bool {
        matches!(self.status, KsStatus::Pass | KsStatus::Degenerate)
    }
}

/// One-sample Kolmogorov-Smirnov distance of `endpoint / sigma` from N(0, 1).
pub fn ks_distance(samples: &[f64], sigma: f64) -> f64 {
    let normal = Normal::standard();
    let mut z: Vec<f64> = samples.iter().map(|x| x / sigma).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_normality(ensemble: &TrajectoryEnsemble, sigma2: f64) -> Result<KsReport> {
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(Error::Precondition(format!("sigma^2 must be >= 0, got {sigma2}")));
    }
    let ends = ensemble.endpoints();
    let trials = ends.len();
    let threshold = KS_CRITICAL / (trials as f64).sqrt();
    if sigma2 == 0.0 {
        let status = if ends.iter().all(|&x| x == 0.0) { KsStatus::Degenerate } else { KsStatus::DegenerateNonzero };
        return Ok(KsReport { trials, sigma2, distance: f64::NAN, threshold, status });
    }
    let distance = ks_distance(&ends, sigma2.sqrt());
    let status = if distance < threshold { KsStatus::Pass } else { KsStatus::Fail };
    Ok(KsReport { trials, sigma2, distance, threshold, status })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementCovariance {
    /// Grid indices (0-based, -1 meaning time 0) bounding the two increments.
    pub first: (i64, i64),
    pub second: (i64, i64),
    pub estimate: EstimateWithError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub grid: Vec<f64>,
    pub sigma2: f64,
    pub empirical: Vec<Vec<f64>>,
    /// `sigma^2 min(s, t)` with `s, t` the realized times `floor(tn)/n`.
    pub expected: Vec<Vec<f64>>,
    pub endpoint_variance: f64,
    /// `|Var(S_n / sqrt n) / sigma^2 - 1|`; infinite when `sigma^2 = 0` and the variance is not.
    pub endpoint_relative_error: f64,
    /// Covariance of `[0, t_mid]` and `(t_mid, 1]` increments.
    pub halves: IncrementCovariance,
    /// Covariance of each pair of adjacent grid increments.
    pub adjacent: Vec<IncrementCovariance>,
}

impl CovarianceReport {
    pub fn endpoint_within(&self, tolerance: f64) -> bool {
        self.endpoint_relative_error <= tolerance
    }

    pub fn halves_within(&self, z_max: f64) -> bool {
        self.halves.estimate.z_score(0.0) <= z_max
    }
}

fn covariance(xs: &[f64], ys: &[f64]) -> EstimateWithError {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut m = Moments::default();
    for (x, y) in xs.iter().zip(ys) {
        m.push((x - mx) * (y - my));
    }
    let value = m.mean() * n / (n - 1.0);
    let stderr = (m.variance() / n).sqrt();
    EstimateWithError { value, stderr, trials: xs.len() as u64 }
}

pub fn fdd_covariance(ensemble: &TrajectoryEnsemble, sigma2: f64) -> Result<CovarianceReport> {
    let g = ensemble.grid.len();
    if g < 2 {
        return Err(Error::Precondition("fdd_covariance needs grid_size >= 2".into()));
    }
    let column = |j: i64| -> Vec<f64> {
        if j < 0 {
            vec![0.0; ensemble.paths.len()]
        } else {
            ensemble.paths.iter().map(|p| p[j as usize]).collect()
        }
    };
    let cols: Vec<Vec<f64>> = (0..g as i64).map(column).collect();
    let empirical: Vec<Vec<f64>> =
        (0..g).map(|a| (0..g).map(|b| covariance(&cols[a], &cols[b]).value).collect()).collect();
    let times: Vec<f64> = ensemble.steps.iter().map(|&s| s as f64 / ensemble.n as f64).collect();
    let expected = (0..g).map(|a| (0..g).map(|b| sigma2 * times[a].min(times[b])).collect()).collect();

    let increment = |a: i64, b: i64| -> Vec<f64> { column(b).iter().zip(column(a)).map(|(y, x)| y - x).collect() };
    let pair = |first: (i64, i64), second: (i64, i64)| IncrementCovariance {
        first,
        second,
        estimate: covariance(&increment(first.0, first.1), &increment(second.0, second.1)),
    };
    let mid = g as i64 / 2 - 1;
    let last = g as i64 - 1;
    let halves = pair((-1, mid), (mid, last));
    let adjacent = (0..last).map(|j| pair((j - 1, j), (j, j + 1))).collect();

    let endpoint_variance = empirical[g - 1][g - 1];
    let endpoint_relative_error = if sigma2 > 0.0 {
        (endpoint_variance / sigma2 - 1.0).abs()
    } else if endpoint_variance == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(CovarianceReport {
        grid: ensemble.grid.clone(),
        sigma2,
        empirical,
        expected,
        endpoint_variance,
        endpoint_relative_error,
        halves,
        adjacent,
    })
}
