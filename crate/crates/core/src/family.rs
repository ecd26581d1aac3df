//! The seven one-parameter families, their divergences and the law of the
//! reduced statistic `g(x)` that every estimator acts on.
//!
//! A sample is a `&[f64]` of length [`Family::sample_dim`]; discrete families
//! store the integer count as its single coordinate. All densities are in log
//! space and return `-inf` off the support.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Cauchy, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Cell;
use crate::numeric::special::{
    beta_inc, gamma_p, gamma_q, ln_choose, ln_factorial, ln_gamma, norm_cdf, norm_interval, norm_sf, xlogy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyId {
    Binomial,
    DiscreteUniform,
    Poisson,
    ContinuousUniform,
    NormalMean,
    NormalVariance,
    Cauchy,
}

impl FamilyId {
    pub const ALL: [FamilyId; 7] = [
        FamilyId::Binomial,
        FamilyId::DiscreteUniform,
        FamilyId::Poisson,
        FamilyId::ContinuousUniform,
        FamilyId::NormalMean,
        FamilyId::NormalVariance,
        FamilyId::Cauchy,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyId::Binomial => "binomial",
            FamilyId::DiscreteUniform => "discrete_uniform",
            FamilyId::Poisson => "poisson",
            FamilyId::ContinuousUniform => "continuous_uniform",
            FamilyId::NormalMean => "normal_mean",
            FamilyId::NormalVariance => "normal_variance",
            FamilyId::Cauchy => "cauchy",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            FamilyId::Binomial => "Bin(n, p), p in (0,1)",
            FamilyId::DiscreteUniform => "U({0,...,N}), N in N",
            FamilyId::Poisson => "Pois(lambda), lambda > 0",
            FamilyId::ContinuousUniform => "U([0, theta]), theta > 0",
            FamilyId::NormalMean => "N(mu, 1)^n, mu in R",
            FamilyId::NormalVariance => "N(0, sigma^2)^n, sigma^2 > 0",
            FamilyId::Cauchy => "Cauchy(x0, 1), x0 in R",
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        FamilyId::ALL.into_iter().find(|id| id.as_str() == norm).ok_or_else(|| {
            let valid: Vec<_> = FamilyId::ALL.iter().map(|id| id.as_str()).collect();
            Error::Domain(format!("unknown family '{s}'; valid ids: {}", valid.join(", ")))
        })
    }
}

/// Parameter space Θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamSpace {
    /// Open interval `(lo, hi)`; infinite ends allowed.
    Open { lo: f64, hi: f64 },
    /// Integers `>= min`.
    Integers { min: i64 },
}

impl ParamSpace {
    pub fn contains(&self, theta: f64) -> bool {
        match *self {
            ParamSpace::Open { lo, hi } => theta > lo && theta < hi,
            ParamSpace::Integers { min } => theta.fract() == 0.0 && theta >= min as f64 && theta.is_finite(),
        }
    }
}

/// Sample-space descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    /// Integers in `[lo, hi]`; `hi = None` for unbounded, with `bounded_by_param` when the
    /// upper end is the parameter itself.
    IntegerRange { lo: i64, hi: Option<i64>, bounded_by_param: bool },
    /// `(0, theta]`.
    ParamInterval,
    RealLine,
    /// `n` i.i.d. copies of a scalar real coordinate.
    RealProduct { n: u32 },
}

/// Which side of a window a tail lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum Family {
    Binomial { n: u32 },
    DiscreteUniform,
    Poisson,
    ContinuousUniform,
    NormalMean { n: u32 },
    NormalVariance { n: u32 },
    Cauchy,
}

impl Family {
    pub fn id(&self) -> FamilyId {
        match self {
            Family::Binomial { .. } => FamilyId::Binomial,
            Family::DiscreteUniform => FamilyId::DiscreteUniform,
            Family::Poisson => FamilyId::Poisson,
            Family::ContinuousUniform => FamilyId::ContinuousUniform,
            Family::NormalMean { .. } => FamilyId::NormalMean,
            Family::NormalVariance { .. } => FamilyId::NormalVariance,
            Family::Cauchy => FamilyId::Cauchy,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Family::Binomial { n } => format!("binomial(n={n})"),
            Family::NormalMean { n } => format!("normal_mean(n={n})"),
            Family::NormalVariance { n } => format!("normal_variance(n={n})"),
            other => other.id().as_str().to_string(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Family::Binomial { .. } | Family::DiscreteUniform | Family::Poisson)
    }

    pub fn sample_dim(&self) -> usize {
        match *self {
            Family::NormalMean { n } | Family::NormalVariance { n } => n as usize,
            _ => 1,
        }
    }

    pub fn param_space(&self) -> ParamSpace {
        match self {
            Family::Binomial { .. } => ParamSpace::Open { lo: 0.0, hi: 1.0 },
            Family::DiscreteUniform => ParamSpace::Integers { min: 0 },
            Family::Poisson | Family::ContinuousUniform | Family::NormalVariance { .. } => {
                ParamSpace::Open { lo: 0.0, hi: f64::INFINITY }
            }
            Family::NormalMean { .. } | Family::Cauchy => {
                ParamSpace::Open { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
            }
        }
    }

    pub fn support(&self) -> Support {
        match *self {
            Family::Binomial { n } => Support::IntegerRange { lo: 0, hi: Some(n as i64), bounded_by_param: false },
            Family::DiscreteUniform => Support::IntegerRange { lo: 0, hi: None, bounded_by_param: true },
            Family::Poisson => Support::IntegerRange { lo: 0, hi: None, bounded_by_param: false },
            Family::ContinuousUniform => Support::ParamInterval,
            Family::Cauchy => Support::RealLine,
            Family::NormalMean { n } | Family::NormalVariance { n } => {
                if n == 1 {
                    Support::RealLine
                } else {
                    Support::RealProduct { n }
                }
            }
        }
    }

    pub fn check_param(&self, theta: f64) -> Result<()> {
        if self.param_space().contains(theta) {
            Ok(())
        } else {
            Err(Error::OutsideParamSpace { family: self.id().as_str(), value: theta })
        }
    }

    pub fn check_sample(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.sample_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.sample_dim(), got: x.len() })
        }
    }

    /// Whether the log-likelihood identity `log p_θ/p_s = d(g‖s) − d(g‖θ)` is
    /// how this family is handled; the uniform families have direct proofs instead.
    pub fn uses_divergence_identity(&self) -> bool {
        !matches!(self, Family::DiscreteUniform | Family::ContinuousUniform)
    }

    fn atom(x: f64) -> Option<u64> {
        (x >= 0.0 && x.fract() == 0.0 && x.is_finite()).then_some(x as u64)
    }

    /// Log-density of a full sample. Parameters on the closure of Θ
    /// (e.g. `λ = 0`) are accepted where the limit law is well defined.
    pub fn log_density(&self, theta: f64, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.sample_dim());
        match *self {
            Family::Binomial { n } => match Self::atom(x[0]) {
                Some(k) if k <= n as u64 => {
                    ln_choose(n as u64, k) + xlogy(k as f64, theta) + xlogy((n as u64 - k) as f64, 1.0 - theta)
                }
                _ => f64::NEG_INFINITY,
            },
            Family::DiscreteUniform => match Self::atom(x[0]) {
                Some(k) if (k as f64) <= theta => -(theta + 1.0).ln(),
                _ => f64::NEG_INFINITY,
            },
            Family::Poisson => match Self::atom(x[0]) {
                Some(k) => xlogy(k as f64, theta) - theta - ln_factorial(k),
                None => f64::NEG_INFINITY,
            },
            Family::ContinuousUniform => {
                if x[0] > 0.0 && x[0] <= theta {
                    -theta.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::NormalMean { n } => {
                let ss: f64 = x.iter().map(|xi| (xi - theta) * (xi - theta)).sum();
                -0.5 * n as f64 * (2.0 * PI).ln() - 0.5 * ss
            }
            Family::NormalVariance { n } => {
                let ss: f64 = x.iter().map(|xi| xi * xi).sum();
                -0.5 * n as f64 * (2.0 * PI * theta).ln() - ss / (2.0 * theta)
            }
            Family::Cauchy => {
                let d = x[0] - theta;
                -PI.ln() - d.mul_add(d, 1.0).ln()
            }
        }
    }

    /// The divergence `d(θ₁‖θ₂)`; both parameters must lie in Θ.
    pub fn divergence(&self, theta1: f64, theta2: f64) -> Result<f64> {
        self.check_param(theta1)?;
        self.check_param(theta2)?;
        Ok(self.divergence_ext(theta1, theta2))
    }

    /// The divergence extended continuously to the closure of Θ in the first
    /// argument, where boundary maximum-likelihood estimates live.
    pub fn divergence_ext(&self, theta1: f64, theta2: f64) -> f64 {
        if theta1 == theta2 {
            return 0.0;
        }
        match *self {
            Family::Binomial { n } => {
                let (p, q) = (theta1, theta2);
                let kl = xlogy(p, p) - xlogy(p, q) + xlogy(1.0 - p, 1.0 - p) - xlogy(1.0 - p, 1.0 - q);
                n as f64 * kl.max(0.0)
            }
            Family::DiscreteUniform => {
                if theta1 <= theta2 {
                    ((theta2 + 1.0) / (theta1 + 1.0)).ln()
                } else {
                    f64::INFINITY
                }
            }
            Family::Poisson => {
                if theta1 == 0.0 {
                    theta2
                } else {
                    (theta1 * (theta1 / theta2).ln() - (theta1 - theta2)).max(0.0)
                }
            }
            Family::ContinuousUniform => {
                if theta1 <= theta2 {
                    (theta2 / theta1).ln()
                } else {
                    f64::INFINITY
                }
            }
            Family::NormalMean { n } => 0.5 * n as f64 * (theta1 - theta2) * (theta1 - theta2),
            Family::NormalVariance { n } => {
                if theta1 == 0.0 {
                    return f64::INFINITY;
                }
                let r = theta1 / theta2;
                (0.5 * n as f64 * (r - r.ln() - 1.0)).max(0.0)
            }
            Family::Cauchy => (theta1 - theta2).mul_add(theta1 - theta2, 1.0).ln(),
        }
    }

    /// The reduced statistic `g(x)` the estimators act on.
    pub fn statistic(&self, x: &[f64]) -> f64 {
        match *self {
            Family::Binomial { n } => x[0] / n as f64,
            Family::NormalMean { n } => x.iter().sum::<f64>() / n as f64,
            Family::NormalVariance { n } => x.iter().map(|v| v * v).sum::<f64>() / n as f64,
            _ => x[0],
        }
    }

    /// A full sample whose statistic equals `g`.
    pub fn sample_with_statistic(&self, g: f64) -> Vec<f64> {
        match *self {
            Family::Binomial { n } => vec![(g * n as f64).round()],
            Family::NormalMean { n } => vec![g; n as usize],
            Family::NormalVariance { n } => vec![g.max(0.0).sqrt(); n as usize],
            _ => vec![g],
        }
    }

    /// A representative value of the statistic under `θ`, used to seed windows.
    pub fn typical_statistic(&self, theta: f64) -> f64 {
        match self {
            Family::DiscreteUniform | Family::ContinuousUniform => 0.5 * theta,
            _ => theta,
        }
    }

    // ---- discrete atoms -------------------------------------------------------

    /// Statistic value of the integer atom `k` (discrete families only).
    pub fn atom_statistic(&self, k: i64) -> f64 {
        match *self {
            Family::Binomial { n } => k as f64 / n as f64,
            _ => k as f64,
        }
    }

    fn atom_scale(&self) -> f64 {
        match *self {
            Family::Binomial { n } => n as f64,
            _ => 1.0,
        }
    }

    /// Integer atoms whose statistic lies in `cell`, before clipping to a support.
    pub fn atoms_in_cell(&self, cell: &Cell) -> (i64, i64) {
        let scale = self.atom_scale();
        let clamp = |v: f64| v.clamp(-(1i64 << 52) as f64, (1i64 << 52) as f64);
        let lo = clamp((cell.lo * scale).ceil()) as i64;
        let hi = clamp((cell.hi * scale).floor()) as i64;
        let mut lo = lo - 1;
        while !cell.contains(self.atom_statistic(lo)) && lo <= hi + 1 {
            lo += 1;
        }
        let mut hi = hi + 1;
        while !cell.contains(self.atom_statistic(hi)) && hi >= lo {
            hi -= 1;
        }
        (lo, hi)
    }

    /// Atoms with positive probability under `θ`.
    pub fn atom_support(&self, theta: f64) -> (i64, Option<i64>) {
        match *self {
            Family::Binomial { n } => (0, Some(n as i64)),
            Family::DiscreteUniform => (0, Some(theta.floor() as i64)),
            Family::Poisson if theta == 0.0 => (0, Some(0)),
            _ => (0, None),
        }
    }

    pub fn atom_log_pmf(&self, theta: f64, k: i64) -> f64 {
        if k < 0 {
            return f64::NEG_INFINITY;
        }
        self.log_density(theta, &[k as f64])
    }

    // ---- law of the statistic ---------------------------------------------------

    /// Range of the statistic with positive density under `θ`.
    pub fn stat_support(&self, theta: f64) -> (f64, f64) {
        match *self {
            Family::ContinuousUniform => (0.0, theta),
            Family::NormalVariance { .. } => (0.0, f64::INFINITY),
            Family::NormalMean { .. } | Family::Cauchy => (f64::NEG_INFINITY, f64::INFINITY),
            _ => {
                let (lo, hi) = self.atom_support(theta);
                (self.atom_statistic(lo), hi.map_or(f64::INFINITY, |h| self.atom_statistic(h)))
            }
        }
    }

    /// Log-density (continuous) or log-pmf (discrete) of the statistic at `g`.
    ///
    /// For the sufficient statistics used here, ratios of this density equal
    /// ratios of the full-sample density.
    pub fn stat_log_density(&self, theta: f64, g: f64) -> f64 {
        match *self {
            Family::Binomial { n } => {
                let k = g * n as f64;
                if (k - k.round()).abs() > 1e-9 {
                    return f64::NEG_INFINITY;
                }
                self.log_density(theta, &[k.round()])
            }
            Family::NormalMean { n } => {
                let n = n as f64;
                0.5 * (n / (2.0 * PI)).ln() - 0.5 * n * (g - theta) * (g - theta)
            }
            Family::NormalVariance { n } => {
                if g <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let k = n as f64;
                let y = k * g / theta;
                (k / theta).ln() + (0.5 * k - 1.0) * y.ln() - 0.5 * y - 0.5 * k * LN_2 - ln_gamma(0.5 * k)
            }
            _ => self.log_density(theta, &[g]),
        }
    }

    /// `P_θ(G <= g)`.
    pub fn stat_cdf(&self, theta: f64, g: f64) -> f64 {
        match *self {
            Family::Binomial { n } => {
                let k = (g * n as f64 + 1e-9).floor();
                if k < 0.0 {
                    0.0
                } else if k >= n as f64 {
                    1.0
                } else {
                    beta_inc(n as f64 - k, k + 1.0, 1.0 - theta)
                }
            }
            Family::DiscreteUniform => {
                let k = g.floor();
                if k < 0.0 {
                    0.0
                } else {
                    ((k + 1.0) / (theta + 1.0)).min(1.0)
                }
            }
            Family::Poisson => {
                let k = g.floor();
                if k < 0.0 {
                    0.0
                } else {
                    gamma_q(k + 1.0, theta)
                }
            }
            Family::ContinuousUniform => (g / theta).clamp(0.0, 1.0),
            Family::NormalMean { n } => norm_cdf((n as f64).sqrt() * (g - theta)),
            Family::NormalVariance { n } => gamma_p(0.5 * n as f64, 0.5 * n as f64 * g / theta),
            Family::Cauchy => 0.5 + (g - theta).atan() / PI,
        }
    }

    /// `P_θ(G >= g)`.
    pub fn stat_sf(&self, theta: f64, g: f64) -> f64 {
        match *self {
            Family::Binomial { n } => {
                let k = (g * n as f64 - 1e-9).ceil();
                if k <= 0.0 {
                    1.0
                } else if k > n as f64 {
                    0.0
                } else {
                    beta_inc(k, n as f64 - k + 1.0, theta)
                }
            }
            Family::DiscreteUniform => {
                let k = g.ceil().max(0.0);
                ((theta - k + 1.0) / (theta + 1.0)).clamp(0.0, 1.0)
            }
            Family::Poisson => {
                let k = g.ceil();
                if k <= 0.0 {
                    1.0
                } else {
                    gamma_p(k, theta)
                }
            }
            Family::ContinuousUniform => (1.0 - g / theta).clamp(0.0, 1.0),
            Family::NormalMean { n } => norm_sf((n as f64).sqrt() * (g - theta)),
            Family::NormalVariance { n } => gamma_q(0.5 * n as f64, 0.5 * n as f64 * g / theta),
            Family::Cauchy => {
                let d = g - theta;
                if d > 0.0 {
                    (1.0 / d).atan() / PI
                } else {
                    0.5 - d.atan() / PI
                }
            }
        }
    }

    /// `P_θ(G ∈ cell)` in closed form (discrete families sum their atoms).
    pub fn stat_prob(&self, theta: f64, cell: &Cell) -> f64 {
        if self.is_discrete() {
            let (lo, hi) = self.atoms_in_cell(cell);
            let (slo, shi) = self.atom_support(theta);
            let lo = lo.max(slo);
            let hi = shi.map_or(hi, |h| hi.min(h));
            if hi < lo {
                return 0.0;
            }
            if let Family::DiscreteUniform = self {
                return (hi - lo + 1) as f64 / (theta + 1.0);
            }
            if let Family::Poisson = self {
                if theta > 0.0 && hi - lo > 64 {
                    let upper = gamma_q(hi as f64 + 1.0, theta);
                    let lower = if lo == 0 { 0.0 } else { gamma_q(lo as f64, theta) };
                    return (upper - lower).max(0.0);
                }
            }
            let mut s = crate::numeric::CompensatedSum::new();
            for k in lo..=hi {
                s.add(self.atom_log_pmf(theta, k).exp());
            }
            return s.value();
        }
        let (slo, shi) = self.stat_support(theta);
        let lo = cell.lo.max(slo);
        let hi = cell.hi.min(shi);
        if hi <= lo {
            return 0.0;
        }
        match *self {
            Family::ContinuousUniform => (hi - lo) / theta,
            Family::NormalMean { n } => {
                let r = (n as f64).sqrt();
                norm_interval(r * (lo - theta), r * (hi - theta))
            }
            Family::NormalVariance { .. } => {
                let below = self.stat_cdf(theta, lo);
                if below > 0.5 {
                    (self.stat_sf(theta, lo) - self.stat_sf(theta, hi)).max(0.0)
                } else {
                    (self.stat_cdf(theta, hi) - below).max(0.0)
                }
            }
            Family::Cauchy => (((hi - theta).atan() - (lo - theta).atan()) / PI).max(0.0),
            _ => unreachable!("discrete families handled above"),
        }
    }

    /// `∫_a^b (g − a)/(b − a) p_θ(g) dg`, the mass of a rising linear ramp, in
    /// closed form where one is available.
    pub fn ramp_mass(&self, theta: f64, a: f64, b: f64) -> Option<f64> {
        if !(b > a) {
            return Some(0.0);
        }
        let cell = Cell { lo: a, hi: b, lo_closed: true, hi_closed: true };
        // ∫_a^b (g − θ) p_θ(g) dg
        let moment = match *self {
            Family::NormalMean { n } => {
                let n = n as f64;
                let dens = |g: f64| (n / (2.0 * PI)).sqrt() * (-0.5 * n * (g - theta) * (g - theta)).exp();
                (dens(a) - dens(b)) / n
            }
            Family::Cauchy => {
                let (u, v) = (a - theta, b - theta);
                ((v - u) * (v + u) / u.mul_add(u, 1.0)).ln_1p() / (2.0 * PI)
            }
            _ => return None,
        };
        let mass = self.stat_prob(theta, &cell);
        Some(((moment + (theta - a) * mass) / (b - a)).clamp(0.0, mass))
    }

    /// `sup_{g ∈ cell} log(p_θ(g) / p_s(g))` over the part of the cell where
    /// `p_θ > 0`; `-inf` if `P_θ(cell) = 0`.
    pub fn log_ratio_sup(&self, theta: f64, s: f64, cell: &Cell) -> f64 {
        let ratio = |g: f64| self.stat_log_density(theta, g) - self.stat_log_density(s, g);
        if self.is_discrete() {
            let (lo, hi) = self.atoms_in_cell(cell);
            let (slo, shi) = self.atom_support(theta);
            let lo = lo.max(slo);
            let hi = shi.map_or(hi, |h| hi.min(h));
            if hi < lo {
                return f64::NEG_INFINITY;
            }
            // Monotone (or constant) in the atom for every discrete family here.
            return ratio(self.atom_statistic(lo)).max(ratio(self.atom_statistic(hi)));
        }
        let (slo, shi) = self.stat_support(theta);
        let lo = cell.lo.max(slo);
        let hi = cell.hi.min(shi);
        if hi <= lo {
            return f64::NEG_INFINITY;
        }
        if !lo.is_finite() || !hi.is_finite() {
            return f64::INFINITY;
        }
        // Avoid the boundary singularities of the variance family's density at 0.
        let lo_eval = if lo == 0.0 && matches!(self, Family::NormalVariance { .. }) { f64::MIN_POSITIVE } else { lo };
        let mut best = ratio(lo_eval).max(ratio(hi));
        if let Family::Cauchy = self {
            // Stationary points of (1+(g−s)²)/(1+(g−θ)²) solve (g−s)(g−θ) = 1.
            let disc = ((s - theta) * (s - theta) + 4.0).sqrt();
            for g in [0.5 * (s + theta - disc), 0.5 * (s + theta + disc)] {
                if g > lo && g < hi {
                    best = best.max(ratio(g));
                }
            }
        }
        best
    }

    /// Closed-form bound on `Σ sup_cell p_θ/p_s` over every cell beyond `boundary`,
    /// for families whose tails are too heavy for iteration. `reach` bounds
    /// `|g - s|` inside any cell.
    pub fn tail_ratio_remainder(&self, theta: f64, boundary: f64, side: Side, reach: f64) -> Option<f64> {
        match self {
            Family::Cauchy => {
                // Cells beyond `boundary` have centres at distance >= D = |boundary − θ| + reach... we use
                // the conservative D = dist(boundary, θ) − reach, and unit spacing of the centres.
                let dist = match side {
                    Side::Above => boundary - theta,
                    Side::Below => theta - boundary,
                } - 2.0 * reach;
                if dist <= 1.0 {
                    return None;
                }
                let amp = 1.0 + reach * reach;
                // Σ_{j>=0} amp / (1 + (dist + j)^2) <= amp (1/(1+dist²) + ∫_dist^∞ du/(1+u²)).
                Some(amp * (1.0 / (1.0 + dist * dist) + (0.5 * PI - dist.atan())))
            }
            _ => None,
        }
    }

    // ---- sampling ---------------------------------------------------------------

    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Vec<f64> {
        match *self {
            Family::Binomial { n } => {
                vec![Binomial::new(n as u64, theta).expect("valid binomial").sample(rng) as f64]
            }
            Family::DiscreteUniform => vec![rng.random_range(0..=theta as u64) as f64],
            Family::Poisson => vec![Poisson::new(theta).expect("valid rate").sample(rng)],
            Family::ContinuousUniform => vec![theta * (1.0 - rng.random::<f64>())],
            Family::NormalMean { n } => {
                let d = Normal::new(theta, 1.0).expect("valid normal");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Family::NormalVariance { n } => {
                let d = Normal::new(0.0, theta.sqrt()).expect("valid normal");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Family::Cauchy => vec![Cauchy::new(theta, 1.0).expect("valid cauchy").sample(rng)],
        }
    }
}

/// `log(p_θ(x) / p_s(x))`, failing when either density vanishes at `x`.
pub fn log_likelihood_ratio(family: &Family, theta: f64, s: f64, x: &[f64]) -> Result<f64> {
    family.check_sample(x)?;
    let a = family.log_density(theta, x);
    if a == f64::NEG_INFINITY {
        return Err(Error::SupportMismatch(theta));
    }
    let b = family.log_density(s, x);
    if b == f64::NEG_INFINITY {
        return Err(Error::SupportMismatch(s));
    }
    if theta == s {
        return Ok(0.0);
    }
    Ok(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{integrate, QuadOptions};

    #[test]
    fn ramp_mass_matches_quadrature() {
        use crate::numeric::{integrate, QuadOptions};
        for fam in [Family::NormalMean { n: 1 }, Family::NormalMean { n: 16 }, Family::Cauchy] {
            for (theta, a, b) in [(0.0, -0.3, 0.1), (2.0, 0.5, 0.9), (-40.0, 10.3, 10.7), (0.25, 0.25, 0.65)] {
                let q = integrate(
                    |g| (g - a) / (b - a) * fam.stat_log_density(theta, g).exp(),
                    a,
                    b,
                    &QuadOptions::default(),
                );
                let r = fam.ramp_mass(theta, a, b).unwrap();
                assert!((r - q.value).abs() <= 1e-14 + 1e-10 * q.value, "{fam:?} {theta} {a} {b}: {r} vs {}", q.value);
            }
        }
        assert_eq!(Family::Poisson.ramp_mass(1.0, 0.0, 1.0), None);
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(Family::Poisson.divergence(4.0, 4.0).unwrap(), 0.0);
        assert_eq!(Family::NormalMean { n: 4 }.divergence(0.0, 1.0).unwrap(), 2.0);
        assert!((Family::Cauchy.divergence(0.0, 1.0).unwrap() - LN_2).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((Family::Poisson.divergence(1.0, e).unwrap() - (e - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn divergence_rejects_outside_param_space() {
        assert!(matches!(Family::Poisson.divergence(-1.0, 2.0), Err(Error::OutsideParamSpace { .. })));
        assert!(Family::Binomial { n: 4 }.divergence(0.5, 1.0).is_err());
        assert!(Family::DiscreteUniform.divergence(2.5, 4.0).is_err());
    }

    #[test]
    fn boundary_extension() {
        assert_eq!(Family::Poisson.divergence_ext(0.0, 3.5), 3.5);
        let b = Family::Binomial { n: 10 };
        assert!((b.divergence_ext(0.0, 0.2) + 10.0 * 0.8f64.ln()).abs() < 1e-13);
        assert_eq!(Family::ContinuousUniform.divergence_ext(2.0, 1.0), f64::INFINITY);
        assert_eq!((-Family::ContinuousUniform.divergence_ext(2.0, 1.0)).exp(), 0.0);
    }

    #[test]
    fn parse_ids() {
        assert_eq!("normal-mean".parse::<FamilyId>().unwrap(), FamilyId::NormalMean);
        let err = "gamma".parse::<FamilyId>().unwrap_err().to_string();
        assert!(err.contains("poisson") && err.contains("cauchy"));
    }

    #[test]
    fn discrete_masses_sum_to_one() {
        for (fam, theta, upper) in [
            (Family::Binomial { n: 17 }, 0.3, 17),
            (Family::DiscreteUniform, 12.0, 12),
            (Family::Poisson, 7.5, 200),
        ] {
            let total: f64 = (0..=upper).map(|k| fam.atom_log_pmf(theta, k).exp()).sum();
            assert!((total - 1.0).abs() < 1e-12, "{fam:?}: {total}");
        }
    }

    #[test]
    fn statistic_densities_integrate_to_one() {
        let opts = QuadOptions::default();
        for (fam, theta) in [
            (Family::ContinuousUniform, 2.5),
            (Family::NormalMean { n: 4 }, 0.7),
            (Family::NormalVariance { n: 4 }, 3.0),
            (Family::NormalVariance { n: 64 }, 0.2),
        ] {
            let (lo, hi) = fam.stat_support(theta);
            let (lo, hi) = (lo.max(theta - 40.0), hi.min(theta * 20.0 + 40.0));
            let r = integrate(|g| fam.stat_log_density(theta, g).exp(), lo, hi, &opts);
            assert!((r.value - 1.0).abs() < 1e-10, "{fam:?}: {r:?}");
        }
        // Cauchy: heavy tails, compare against the closed-form CDF instead.
        let r = integrate(|g| Family::Cauchy.stat_log_density(1.0, g).exp(), -99.0, 101.0, &opts);
        assert!((r.value - Family::Cauchy.stat_prob(1.0, &Cell { lo: -99.0, hi: 101.0, lo_closed: true, hi_closed: true })).abs() < 1e-12);
    }

    #[test]
    fn cdf_and_sf_are_consistent() {
        for fam in [Family::Poisson, Family::Binomial { n: 20 }, Family::DiscreteUniform] {
            let theta = if matches!(fam, Family::Binomial { .. }) { 0.35 } else { 9.0 };
            for k in 0..10 {
                let g = fam.atom_statistic(k);
                let p = fam.atom_log_pmf(theta, k).exp();
                let total = fam.stat_cdf(theta, g) + fam.stat_sf(theta, g) - p;
                assert!((total - 1.0).abs() < 1e-12, "{fam:?} k={k}: {total}");
            }
        }
        for fam in [Family::NormalMean { n: 3 }, Family::NormalVariance { n: 5 }, Family::Cauchy, Family::ContinuousUniform] {
            for g in [0.1, 0.9, 2.0, 7.0] {
                let total = fam.stat_cdf(4.0, g) + fam.stat_sf(4.0, g);
                assert!((total - 1.0).abs() < 1e-13, "{fam:?} g={g}");
            }
        }
    }

    #[test]
    fn log_likelihood_ratio_examples() {
        let v = log_likelihood_ratio(&Family::Poisson, 2.0, 4.0, &[4.0]).unwrap();
        assert!((v - (4.0 * 0.5f64.ln() + 2.0)).abs() < 1e-13);
        assert_eq!(log_likelihood_ratio(&Family::NormalMean { n: 1 }, 0.0, 1.0, &[0.5]).unwrap(), 0.0);
        assert_eq!(log_likelihood_ratio(&Family::Cauchy, 3.0, 3.0, &[-8.0]).unwrap(), 0.0);
        assert!(matches!(
            log_likelihood_ratio(&Family::ContinuousUniform, 1.0, 4.0, &[2.0]),
            Err(Error::SupportMismatch(t)) if t == 1.0
        ));
        assert!(matches!(
            log_likelihood_ratio(&Family::NormalMean { n: 2 }, 0.0, 1.0, &[0.5]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn log_ratio_sup_dominates_interior() {
        let cells = [Cell { lo: 2.5, hi: 6.5, lo_closed: true, hi_closed: false }];
        for fam in [Family::Poisson, Family::Cauchy, Family::NormalMean { n: 2 }, Family::NormalVariance { n: 3 }] {
            for theta in [0.7, 4.0, 11.0] {
                for cell in &cells {
                    let sup = fam.log_ratio_sup(theta, 4.0, cell);
                    for i in 0..=40 {
                        let g = if fam.is_discrete() { (3 + i % 4) as f64 } else { 2.5 + 4.0 * i as f64 / 40.0 };
                        let r = fam.stat_log_density(theta, g) - fam.stat_log_density(4.0, g);
                        assert!(r <= sup + 1e-12, "{fam:?} θ={theta} g={g}");
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_respects_support() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = Family::ContinuousUniform.sample(2.0, &mut rng);
            assert!(x[0] > 0.0 && x[0] <= 2.0);
            let k = Family::DiscreteUniform.sample(5.0, &mut rng);
            assert!(k[0] <= 5.0);
        }
        assert_eq!(Family::NormalVariance { n: 7 }.sample(1.0, &mut rng).len(), 7);
    }
}
