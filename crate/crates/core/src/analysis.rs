//! Closed-form failure, privacy and converse bounds, and a Monte Carlo
//! estimator of the group-failure probability.

use serde::{Deserialize, Serialize};

use crate::ff::{Prg, Seed};
use crate::grouping::{balanced_sizes, kl_bernoulli, GroupingError};

/// `D(a || b)`, with `b = 0` taken as the limit `+inf` (for `a > 0`).
fn kl_or_inf(a: f64, b: f64) -> Result<f64, GroupingError> {
    if b == 0.0 && a > 0.0 {
        Ok(f64::INFINITY)
    } else {
        kl_bernoulli(a, b)
    }
}

fn union_bound(n: usize, group_size: usize, c: f64) -> f64 {
    let ratio = n as f64 / group_size as f64;
    (ratio * (-c * group_size as f64).exp()).clamp(0.0, 1.0)
}

/// Exponent `c_p = D((floor(N_g/2) + 1) / N_g || p)`.
pub fn failure_exponent(group_size: usize, p: f64) -> Result<f64, GroupingError> {
    if !(0.0..0.5).contains(&p) {
        return Err(GroupingError::DomainError(format!("p = {p} must lie in [0, 0.5)")));
    }
    let a = (group_size / 2 + 1) as f64 / group_size as f64;
    kl_or_inf(a, p)
}

/// `min(1, (N / N_g) exp(-c_p N_g))`.
pub fn failure_bound(n: usize, group_size: usize, p: f64) -> Result<f64, GroupingError> {
    Ok(union_bound(n, group_size, failure_exponent(group_size, p)?))
}

/// Exponent `c_T = D(0.5 || T / N)`.
pub fn privacy_exponent(n: usize, collusion: usize) -> Result<f64, GroupingError> {
    if 2 * collusion >= n {
        return Err(GroupingError::DomainError(format!(
            "T = {collusion} must be below N / 2 = {}",
            n as f64 / 2.0
        )));
    }
    kl_or_inf(0.5, collusion as f64 / n as f64)
}

/// `min(1, (N / N_g) exp(-c_T N_g))`.
pub fn privacy_bound(n: usize, group_size: usize, collusion: usize) -> Result<f64, GroupingError> {
    Ok(union_bound(n, group_size, privacy_exponent(n, collusion)?))
}

/// `(1 - N^(-c') / (ln N + 1))^(N / ln N)` with `c' = D(0.5 || p)`, defined
/// for `0 < c' < 1`.
pub fn robustness_converse_bound(n: usize, p: f64) -> Result<f64, GroupingError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GroupingError::DomainError(format!("p = {p} must lie in (0, 1)")));
    }
    let c = kl_bernoulli(0.5, p)?;
    if !(c > 0.0 && c < 1.0) {
        return Err(GroupingError::DomainError(format!(
            "D(0.5 || {p}) = {c} is outside (0, 1)"
        )));
    }
    if n < 2 {
        return Err(GroupingError::DomainError(format!("need N >= 2, got {n}")));
    }
    let ln_n = (n as f64).ln();
    let base = 1.0 - (n as f64).powf(-c) / (ln_n + 1.0);
    Ok(base.powf(n as f64 / ln_n).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub trials: usize,
    pub failures: usize,
    pub estimate: f64,
    /// Half-width of the 95% Wilson interval.
    pub ci95: f64,
    pub low: f64,
    pub high: f64,
}

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Fraction of trials in which some group loses at least `floor(N_l/2) + 1`
/// members when every user drops independently with probability `p`.
pub fn monte_carlo_failure(n: usize, group_size: usize, p: f64, trials: usize, seed: Seed) -> MonteCarloEstimate {
    assert!(trials >= 1, "at least one trial");
    let sizes = balanced_sizes(n, group_size);
    let failures = (0..trials)
        .filter(|&trial| {
            let mut prg = Prg::new(seed.derive(trial as u64));
            sizes.iter().any(|&size| {
                let dropped = (0..size).filter(|_| prg.unit_f64() < p).count();
                dropped > size / 2
            })
        })
        .count();
    let (low, high) = wilson_interval(failures, trials);
    MonteCarloEstimate {
        trials,
        failures,
        estimate: failures as f64 / trials as f64,
        ci95: (high - low) / 2.0,
        low,
        high,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_g")]
    pub group_size: usize,
    pub p: f64,
    #[serde(rename = "T")]
    pub collusion: usize,
    pub c_p: f64,
    pub c_t: f64,
    pub b_failure: f64,
    pub b_privacy: f64,
    /// `None` when `D(0.5 || p)` is outside `(0, 1)`.
    pub b_robustness_converse: Option<f64>,
    pub empirical_failure: Option<MonteCarloEstimate>,
}

pub fn bounds_report(
    n: usize,
    group_size: usize,
    p: f64,
    collusion: usize,
    trials: usize,
    seed: Seed,
) -> Result<BoundsReport, GroupingError> {
    if group_size == 0 || n < group_size {
        return Err(GroupingError::TooFewUsers { n, group_size });
    }
    Ok(BoundsReport {
        n,
        group_size,
        p,
        collusion,
        c_p: failure_exponent(group_size, p)?,
        c_t: privacy_exponent(n, collusion)?,
        b_failure: failure_bound(n, group_size, p)?,
        b_privacy: privacy_bound(n, group_size, collusion)?,
        b_robustness_converse: robustness_converse_bound(n, p).ok(),
        empirical_failure: (trials > 0).then(|| monte_carlo_failure(n, group_size, p, trials, seed)),
    })
}
