//! Concrete bundles pairing each family with its net, estimator and factor `C`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::estimator::{Cell, Estimator, TieRule, MAX_EPSILON};
use crate::factor::{factor_lemma4, FactorInputs};
use crate::family::{Family, FamilyId};
use crate::net::{Net, NetPoint};

/// Which argument certifies the factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaRoute {
    /// Conditions (p i)–(p iv); `C = exp(c')(7 + 2/α)`.
    Lemma4,
    /// Conditions (p i′), (p ii′); `C = exp(c')(5 + 2/(e^c − 1))`.
    Lemma5,
    /// A family-specific argument with an explicit constant.
    DirectProof,
    /// No valid factor exists; used only to exhibit failures.
    Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Round,
    REpsilon,
}

/// Fixed quantities for [`make_bundle`]. Unset fields take family defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    /// Sample size (binomial trials, or normal sample length).
    #[serde(deserialize_with = "crate::numstr::opt_u32")]
    pub n: Option<u32>,
    /// Normal-mean net scale.
    #[serde(deserialize_with = "crate::numstr::opt_f64")]
    pub alpha: Option<f64>,
    /// Half-width of the tie neighbourhoods of `r^ε`.
    #[serde(deserialize_with = "crate::numstr::opt_f64")]
    pub epsilon: Option<f64>,
    pub ties: Option<TieRule>,
    pub estimator: Option<EstimatorKind>,
}

pub const DEFAULT_BINOMIAL_N: u32 = 64;
pub const DEFAULT_EPSILON: f64 = 0.2;
/// Sample sizes over which the binomial constants are estimated.
pub const BINOMIAL_ESTIMATION_NS: [u32; 4] = [4, 16, 64, 256];
pub const BINOMIAL_SAFETY_MARGIN: f64 = 1.1;

/// How the binomial factor was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorEstimation {
    pub sample_sizes: Vec<u32>,
    pub c_prime: f64,
    pub alpha: f64,
    pub lemma_factor: f64,
    pub safety_margin: f64,
}

#[derive(Debug, Clone)]
pub struct FamilyBundle {
    pub family: Family,
    pub net: Net,
    pub estimator: Estimator,
    pub factor_inputs: Option<FactorInputs>,
    pub factor_c: f64,
    pub lemma_route: LemmaRoute,
    pub factor_estimation: Option<FactorEstimation>,
}

impl FamilyBundle {
    pub fn id(&self) -> String {
        match (&self.family, &self.net) {
            (Family::NormalMean { n }, Net::ScaledLattice { alpha, .. }) => {
                format!("normal_mean(n={n}, alpha={alpha}, {})", self.estimator.name())
            }
            (Family::Cauchy, _) => format!("cauchy({})", self.estimator.name()),
            (Family::Poisson, Net::IntegerLattice { .. }) => "poisson_mle".into(),
            (fam, _) => fam.label(),
        }
    }

    /// `ŝ(x)`.
    pub fn estimate(&self, x: &[f64]) -> Result<NetPoint> {
        self.family.check_sample(x)?;
        Ok(self.estimate_statistic(self.family.statistic(x)))
    }

    /// `ŝ` as a function of the reduced statistic.
    pub fn estimate_statistic(&self, g: f64) -> NetPoint {
        self.estimator.apply(&self.net, g)
    }

    /// The cell `ŝ⁻¹(s)` in statistic space.
    pub fn cell(&self, s: NetPoint) -> Option<Cell> {
        self.estimator.cell(&self.net, s)
    }

    /// Replaces the estimator; the factor is kept.
    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    /// Poisson with the identity estimator on `{0, 1, 2, ...}`: the maximum
    /// likelihood choice for which no finite factor works.
    pub fn poisson_mle() -> Self {
        FamilyBundle {
            family: Family::Poisson,
            net: Net::IntegerLattice { min: Some(0) },
            estimator: Estimator::RoundToNet,
            factor_inputs: None,
            factor_c: 1.0,
            lemma_route: LemmaRoute::Counterexample,
            factor_estimation: None,
        }
    }
}

fn lemma_bundle(family: Family, net: Net, estimator: Estimator, inputs: FactorInputs) -> Result<FamilyBundle> {
    let lemma_route = match inputs {
        FactorInputs::Growth { .. } => LemmaRoute::Lemma4,
        FactorInputs::Step { .. } => LemmaRoute::Lemma5,
    };
    Ok(FamilyBundle {
        family,
        net,
        estimator,
        factor_c: inputs.factor()?,
        factor_inputs: Some(inputs),
        lemma_route,
        factor_estimation: None,
    })
}

fn direct_bundle(family: Family, net: Net, factor_c: f64) -> FamilyBundle {
    FamilyBundle {
        family,
        net,
        estimator: Estimator::CeilToNet,
        factor_inputs: None,
        factor_c,
        lemma_route: LemmaRoute::DirectProof,
        factor_estimation: None,
    }
}

fn sample_size(cfg: &FamilyConfig, default: u32) -> Result<u32> {
    match cfg.n.unwrap_or(default) {
        0 => Err(domain("n must be >= 1")),
        n => Ok(n),
    }
}

fn epsilon(cfg: &FamilyConfig) -> Result<f64> {
    let eps = cfg.epsilon.unwrap_or(DEFAULT_EPSILON);
    if !(eps > 0.0 && eps <= MAX_EPSILON) {
        return Err(domain(format!("epsilon must lie in (0, 1/5], got {eps}")));
    }
    Ok(eps)
}

pub fn make_bundle(id: FamilyId, cfg: &FamilyConfig) -> Result<FamilyBundle> {
    if let Some(a) = cfg.alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(domain(format!("alpha must be > 0, got {a}")));
        }
    }
    if cfg.epsilon.is_some() {
        epsilon(cfg)?;
    }
    match id {
        FamilyId::Binomial => {
            let n = sample_size(cfg, DEFAULT_BINOMIAL_N)?;
            if n < 4 {
                return Err(domain(format!("binomial net needs n >= 4, got {n}")));
            }
            let mut ns = BINOMIAL_ESTIMATION_NS.to_vec();
            if !ns.contains(&n) {
                ns.push(n);
            }
            let (c_prime, alpha) = estimate_binomial_constants(&ns);
            let lemma_factor = factor_lemma4(c_prime, alpha)?;
            Ok(FamilyBundle {
                family: Family::Binomial { n },
                net: Net::BinomialSine { n },
                estimator: Estimator::RoundToNet,
                factor_inputs: Some(FactorInputs::Growth { c_prime, alpha }),
                factor_c: BINOMIAL_SAFETY_MARGIN * lemma_factor,
                lemma_route: LemmaRoute::Lemma4,
                factor_estimation: Some(FactorEstimation {
                    sample_sizes: ns,
                    c_prime,
                    alpha,
                    lemma_factor,
                    safety_margin: BINOMIAL_SAFETY_MARGIN,
                }),
            })
        }
        FamilyId::DiscreteUniform => Ok(direct_bundle(Family::DiscreteUniform, Net::DyadicInt, 3.0)),
        FamilyId::ContinuousUniform => Ok(direct_bundle(Family::ContinuousUniform, Net::DyadicReal, 3.0)),
        FamilyId::Poisson => lemma_bundle(
            Family::Poisson,
            Net::Squares,
            Estimator::RoundToNet,
            FactorInputs::Step { c_prime: 1.0, c: 1.0 },
        ),
        FamilyId::NormalMean => {
            let n = sample_size(cfg, 1)?;
            let alpha = cfg.alpha.unwrap_or(1.0);
            let net = Net::ScaledLattice { alpha, n };
            let estimator = match cfg.estimator.unwrap_or(EstimatorKind::Round) {
                EstimatorKind::Round => Estimator::RoundToNet,
                EstimatorKind::REpsilon => {
                    if !net.is_unit_integer_lattice() {
                        return Err(domain("r^eps needs the integer net (alpha / sqrt(n) = 1)"));
                    }
                    Estimator::r_epsilon(epsilon(cfg)?, cfg.ties.unwrap_or_default())?
                }
            };
            let a2 = alpha * alpha;
            lemma_bundle(Family::NormalMean { n }, net, estimator, FactorInputs::Step { c_prime: a2 / 8.0, c: a2 / 2.0 })
        }
        FamilyId::NormalVariance => {
            let n = sample_size(cfg, 1)?;
            lemma_bundle(
                Family::NormalVariance { n },
                Net::Geometric { n },
                Estimator::RoundToNet,
                FactorInputs::Step { c_prime: 0.5, c: 1.0 / 32.0 },
            )
        }
        FamilyId::Cauchy => {
            let estimator = match cfg.estimator.unwrap_or(EstimatorKind::REpsilon) {
                EstimatorKind::Round => Estimator::RoundToNet,
                EstimatorKind::REpsilon => Estimator::r_epsilon(epsilon(cfg)?, cfg.ties.unwrap_or_default())?,
            };
            lemma_bundle(
                Family::Cauchy,
                Net::integers(),
                estimator,
                FactorInputs::Growth { c_prime: 2f64.ln(), alpha: 1.0 },
            )
        }
    }
}

/// Numerical `(c', α)` for the binomial sine nets over the given sample sizes.
///
/// `c'` is the largest `d(k/n ‖ ŝ(k/n))`. For `α`, a pair `θ₁ < θ₂` enclosing
/// `k` net points has divergence at least that between the outermost enclosed
/// points, so the infimum over such pairs is attained in the limit at net points.
pub fn estimate_binomial_constants(ns: &[u32]) -> (f64, f64) {
    let mut c_prime = 0.0f64;
    let mut alpha = f64::INFINITY;
    for &n in ns {
        let family = Family::Binomial { n };
        let net = Net::BinomialSine { n };
        let (Some(lo), Some(hi)) = net.index_bounds() else { continue };
        if hi < lo {
            continue;
        }
        for k in 0..=n {
            let g = k as f64 / n as f64;
            let s = net.round(g);
            c_prime = c_prime.max(family.divergence_ext(g, s.value));
        }
        let pts: Vec<f64> = (lo..=hi).filter_map(|i| net.value(i)).collect();
        for i in 0..pts.len() {
            for j in i + 2..pts.len() {
                let count = (j - i + 1) as f64;
                let d = family.divergence_ext(pts[i], pts[j]).min(family.divergence_ext(pts[j], pts[i]));
                alpha = alpha.min(d / (count - 1.0).ln() - 1.0);
            }
        }
    }
    (c_prime, alpha)
}
