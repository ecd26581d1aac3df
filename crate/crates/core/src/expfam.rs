//! One-parameter exponential families `p_η(x) = h(x) exp(η T(x) − A(η))`.
//!
//! The KL divergence is the Bregman divergence of the cumulant `A`, and the
//! maximum-likelihood estimate solves `T(x) = A'(η)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::family::Family;
use crate::numeric::special::{ln_choose, ln_factorial};

pub trait ExponentialFamily: Send + Sync {
    fn name(&self) -> String;
    fn log_h(&self, x: &[f64]) -> f64;
    /// Sufficient statistic `T(x)`.
    fn sufficient_stat(&self, x: &[f64]) -> f64;
    /// Cumulant `A(η)`.
    fn log_partition(&self, eta: f64) -> f64;
    /// `A'(η) = E_η T(X)`.
    fn mean_stat(&self, eta: f64) -> f64;
    fn to_canonical(&self, theta: f64) -> f64;
    fn from_canonical(&self, eta: f64) -> f64;
    /// Open interval of canonical parameters.
    fn canonical_range(&self) -> (f64, f64);

    fn log_density(&self, theta: f64, x: &[f64]) -> f64 {
        let eta = self.to_canonical(theta);
        self.log_h(x) + eta * self.sufficient_stat(x) - self.log_partition(eta)
    }

    /// `KL(P_θ₁ ‖ P_θ₂) = A(η₂) − A(η₁) − A'(η₁)(η₂ − η₁)`.
    fn kl(&self, theta1: f64, theta2: f64) -> f64 {
        let (e1, e2) = (self.to_canonical(theta1), self.to_canonical(theta2));
        (self.log_partition(e2) - self.log_partition(e1) - self.mean_stat(e1) * (e2 - e1)).max(0.0)
    }

    /// Solves the likelihood equation numerically by bisection on `A'`.
    fn mle(&self, x: &[f64]) -> Result<f64> {
        solve_likelihood_eq(self, self.sufficient_stat(x))
    }
}

fn solve_likelihood_eq<E: ExponentialFamily + ?Sized>(desc: &E, target: f64) -> Result<f64> {
    let (lo_lim, hi_lim) = desc.canonical_range();
    let probe = |a: f64, b: f64| if a.is_finite() && b.is_finite() { 0.5 * (a + b) } else if a.is_finite() { a + 1.0 } else if b.is_finite() { b - 1.0 } else { 0.0 };
    let start = probe(lo_lim, hi_lim);
    // Bracket by stepping outward geometrically towards each limit.
    let mut lo = start;
    let mut step = 1.0;
    let mut tries = 0;
    while desc.mean_stat(lo) > target {
        lo = if lo_lim.is_finite() { lo_lim + 0.5 * (lo - lo_lim) } else { lo - step };
        step *= 2.0;
        tries += 1;
        if tries > 1100 || !(lo > lo_lim) {
            return Err(Error::BoundaryMle);
        }
    }
    let mut hi = start;
    step = 1.0;
    tries = 0;
    while desc.mean_stat(hi) < target {
        hi = if hi_lim.is_finite() { hi_lim - 0.5 * (hi_lim - hi) } else { hi + step };
        step *= 2.0;
        tries += 1;
        if tries > 1100 || !(hi < hi_lim) {
            return Err(Error::BoundaryMle);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if desc.mean_stat(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = 0.5 * (lo + hi);
    // A saturated A' means the solution was pushed to the edge of the canonical range.
    let flat = |d: f64| {
        let e = eta + d;
        e > lo_lim && e < hi_lim && desc.mean_stat(e) == desc.mean_stat(eta)
    };
    if flat(-1.0) || flat(1.0) {
        return Err(Error::BoundaryMle);
    }
    Ok(desc.from_canonical(eta))
}

/// MLE in the standard parametrisation, or [`Error::BoundaryMle`] when the
/// likelihood equation has no interior solution.
pub fn mle_likelihood_eq(desc: &dyn ExponentialFamily, x: &[f64]) -> Result<f64> {
    desc.mle(x)
}

#[derive(Debug, Clone, Copy)]
pub struct PoissonExp;

impl ExponentialFamily for PoissonExp {
    fn name(&self) -> String {
        "poisson".into()
    }
    fn log_h(&self, x: &[f64]) -> f64 {
        -ln_factorial(x[0] as u64)
    }
    fn sufficient_stat(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn log_partition(&self, eta: f64) -> f64 {
        eta.exp()
    }
    fn mean_stat(&self, eta: f64) -> f64 {
        eta.exp()
    }
    fn to_canonical(&self, theta: f64) -> f64 {
        theta.ln()
    }
    fn from_canonical(&self, eta: f64) -> f64 {
        eta.exp()
    }
    fn canonical_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn mle(&self, x: &[f64]) -> Result<f64> {
        if x[0] > 0.0 {
            Ok(x[0])
        } else {
            Err(Error::BoundaryMle)
        }
    }
}

/// `N(μ, 1)^n` with `T = Σx`.
#[derive(Debug, Clone, Copy)]
pub struct NormalMeanExp {
    pub n: u32,
}

impl ExponentialFamily for NormalMeanExp {
    fn name(&self) -> String {
        format!("normal_mean(n={})", self.n)
    }
    fn log_h(&self, x: &[f64]) -> f64 {
        -0.5 * self.n as f64 * (2.0 * PI).ln() - 0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn sufficient_stat(&self, x: &[f64]) -> f64 {
        x.iter().sum()
    }
    fn log_partition(&self, eta: f64) -> f64 {
        0.5 * self.n as f64 * eta * eta
    }
    fn mean_stat(&self, eta: f64) -> f64 {
        self.n as f64 * eta
    }
    fn to_canonical(&self, theta: f64) -> f64 {
        theta
    }
    fn from_canonical(&self, eta: f64) -> f64 {
        eta
    }
    fn canonical_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn mle(&self, x: &[f64]) -> Result<f64> {
        Ok(self.sufficient_stat(x) / self.n as f64)
    }
}

/// `N(0, σ²)^n` with `η = 1/σ²` and `T = −‖x‖²/2`.
#[derive(Debug, Clone, Copy)]
pub struct NormalVarianceExp {
    pub n: u32,
}

impl ExponentialFamily for NormalVarianceExp {
    fn name(&self) -> String {
        format!("normal_variance(n={})", self.n)
    }
    fn log_h(&self, _x: &[f64]) -> f64 {
        -0.5 * self.n as f64 * (2.0 * PI).ln()
    }
    fn sufficient_stat(&self, x: &[f64]) -> f64 {
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn log_partition(&self, eta: f64) -> f64 {
        -0.5 * self.n as f64 * eta.ln()
    }
    fn mean_stat(&self, eta: f64) -> f64 {
        -0.5 * self.n as f64 / eta
    }
    fn to_canonical(&self, theta: f64) -> f64 {
        1.0 / theta
    }
    fn from_canonical(&self, eta: f64) -> f64 {
        1.0 / eta
    }
    fn canonical_range(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn mle(&self, x: &[f64]) -> Result<f64> {
        let ss: f64 = x.iter().map(|v| v * v).sum();
        if ss > 0.0 {
            Ok(ss / self.n as f64)
        } else {
            Err(Error::BoundaryMle)
        }
    }
}

/// `Bin(n, p)` with `η = logit p`.
#[derive(Debug, Clone, Copy)]
pub struct BinomialExp {
    pub n: u32,
}

impl ExponentialFamily for BinomialExp {
    fn name(&self) -> String {
        format!("binomial(n={})", self.n)
    }
    fn log_h(&self, x: &[f64]) -> f64 {
        ln_choose(self.n as u64, x[0] as u64)
    }
    fn sufficient_stat(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn log_partition(&self, eta: f64) -> f64 {
        // n log(1 + e^η), stable for large |η|.
        self.n as f64 * (eta.max(0.0) + (-eta.abs()).exp().ln_1p())
    }
    fn mean_stat(&self, eta: f64) -> f64 {
        self.n as f64 / (1.0 + (-eta).exp())
    }
    fn to_canonical(&self, theta: f64) -> f64 {
        (theta / (1.0 - theta)).ln()
    }
    fn from_canonical(&self, eta: f64) -> f64 {
        1.0 / (1.0 + (-eta).exp())
    }
    fn canonical_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn mle(&self, x: &[f64]) -> Result<f64> {
        if x[0] > 0.0 && x[0] < self.n as f64 {
            Ok(x[0] / self.n as f64)
        } else {
            Err(Error::BoundaryMle)
        }
    }
}

/// The exponential-family view of a built-in family, if it has one.
pub fn descriptor(family: &Family) -> Option<Box<dyn ExponentialFamily>> {
    match *family {
        Family::Poisson => Some(Box::new(PoissonExp)),
        Family::NormalMean { n } => Some(Box::new(NormalMeanExp { n })),
        Family::NormalVariance { n } => Some(Box::new(NormalVarianceExp { n })),
        Family::Binomial { n } => Some(Box::new(BinomialExp { n })),
        _ => None,
    }
}
