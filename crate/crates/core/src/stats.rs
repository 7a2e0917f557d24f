//! Goodness-of-fit tests, regression and the residence-time estimator.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    /// Upper `level` quantile of the null distribution.
    pub fn critical_value(&self, level: f64) -> f64 {
        chi_square_critical(self.dof, level)
    }

    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

pub fn chi_square_critical(dof: usize, level: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - level)
}

/// Pearson test of bin counts against bin probabilities summing to one.
pub fn chi_square_goodness_of_fit(observed: &[u64], probabilities: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probabilities.len() || observed.len() < 2 {
        return Err(Error::InvalidConfig(
            "chi-square test needs at least two bins with matching probabilities".into(),
        ));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::InvalidConfig("chi-square test on an empty sample".into()));
    }
    let mut statistic = 0.0;
    for (&o, &p) in observed.iter().zip(probabilities) {
        if !(p > 0.0) {
            return Err(Error::InvalidConfig("bin probabilities must be positive".into()));
        }
        let e = n as f64 * p;
        statistic += (o as f64 - e).powi(2) / e;
    }
    Ok(finish(statistic, observed.len() - 1))
}

/// Two-sample test of homogeneity for two histograms on the same bins.
/// Bins empty in both samples are skipped.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidConfig("histograms have different bin counts".into()));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidConfig("chi-square test on an empty sample".into()));
    }
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut statistic = 0.0;
    let mut used = 0;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        used += 1;
        statistic += (ka * x as f64 - kb * y as f64).powi(2) / (x + y) as f64;
    }
    if used < 2 {
        return Err(Error::InvalidConfig("need at least two non-empty bins".into()));
    }
    Ok(finish(statistic, used - 1))
}

fn finish(statistic: f64, dof: usize) -> ChiSquareTest {
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    }
}

/// One-sample Kolmogorov–Smirnov test against `U[0, 1)`.
/// Returns `(D, asymptotic p-value)`.
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / nf).max((i + 1) as f64 / nf - x)
        })
        .fold(0.0, f64::max);
    let sqrt_n = nf.sqrt();
    (d, kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d))
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * t * t).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidConfig("log-log fit needs at least two points".into()));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidConfig("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("log-log fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Standard error of a binomial proportion estimated from `n` trials.
pub fn binomial_se(rate: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (rate * (1.0 - rate) / n as f64).sqrt()
}

/// Tracks switches between the wells around `x = ±threshold`.
///
/// The state starts in the well `Θ = +1`; step `n` is a switch when
/// `Θ xⁿ < −threshold`, after which `Θ` flips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidenceTracker {
    threshold: f64,
    side: f64,
    last_switch: u64,
    switches: u64,
}

impl ResidenceTracker {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            side: 1.0,
            last_switch: 0,
            switches: 0,
        }
    }

    /// Feeds the coordinate at step `n` (steps are counted from 1).
    pub fn observe(&mut self, n: u64, x: f64) {
        if self.side * x < -self.threshold {
            self.side = -self.side;
            self.last_switch = n;
            self.switches += 1;
        }
    }

    pub fn switches(&self) -> u64 {
        self.switches
    }

    /// Step index of the last switch, `τ^K`.
    pub fn last_switch(&self) -> u64 {
        self.last_switch
    }

    /// `τ^K / K`, or `None` without switches.
    pub fn mean_residence(&self) -> Option<f64> {
        (self.switches > 0).then(|| self.last_switch as f64 / self.switches as f64)
    }
}

/// Pools several independent trackers: `Σ τ^K_i / Σ K_i`.
pub fn pooled_mean_residence(trackers: &[ResidenceTracker]) -> Option<f64> {
    let k: u64 = trackers.iter().map(|t| t.switches).sum();
    let t: u64 = trackers.iter().map(|t| t.last_switch).sum();
    (k > 0).then(|| t as f64 / k as f64)
}
