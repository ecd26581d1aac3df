//! Per-parameter e-variables and sources that supply one per net point.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimator::Cell;
use crate::factor::calibrate_p_to_e;
use crate::families::FamilyBundle;
use crate::family::Family;
use crate::net::NetPoint;

/// A non-negative test function on the sample space.
pub trait EVariable: Send + Sync + fmt::Debug {
    fn eval(&self, x: &[f64]) -> f64;

    /// The value as a function of the family's reduced statistic, when the
    /// e-variable depends on the sample only through it.
    fn eval_statistic(&self, _g: f64) -> Option<f64> {
        None
    }

    /// Statistic values where [`EVariable::eval_statistic`] may jump or kink.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// The exact value when constant on `cell`.
    fn constant_on(&self, _cell: &Cell) -> Option<f64> {
        None
    }

    /// The simple hypothesis this is an e-variable for; `None` if valid for every parameter.
    fn valid_for(&self) -> Option<f64>;

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    value: f64,
}

impl Constant {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(domain(format!("a constant e-variable must lie in [0, 1], got {value}")));
        }
        Ok(Self { value })
    }

    pub const ONE: Constant = Constant { value: 1.0 };
    pub const ZERO: Constant = Constant { value: 0.0 };
}

impl EVariable for Constant {
    fn eval(&self, _x: &[f64]) -> f64 {
        self.value
    }
    fn eval_statistic(&self, _g: f64) -> Option<f64> {
        Some(self.value)
    }
    fn constant_on(&self, _cell: &Cell) -> Option<f64> {
        Some(self.value)
    }
    fn valid_for(&self) -> Option<f64> {
        None
    }
    fn describe(&self) -> String {
        format!("constant({})", self.value)
    }
}

/// `𝕀{g(x) ∈ cell} / P_s(cell)`: all of the e-variable budget of `s` placed on one cell.
#[derive(Debug, Clone)]
pub struct Spike {
    family: Family,
    s: f64,
    cell: Cell,
    mass: f64,
}

impl Spike {
    pub fn new(family: Family, s: f64, cell: Cell) -> Result<Self> {
        let mass = family.stat_prob(s, &cell);
        if !(mass > 0.0) {
            return Err(Error::ZeroProbabilityCell(s));
        }
        Ok(Self { family, s, cell, mass })
    }

    pub fn cell(&self) -> Cell {
        self.cell
    }

    /// `P_s(cell)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// The value on the cell.
    pub fn height(&self) -> f64 {
        1.0 / self.mass
    }
}

impl EVariable for Spike {
    fn eval(&self, x: &[f64]) -> f64 {
        self.eval_statistic(self.family.statistic(x)).unwrap_or(0.0)
    }
    fn eval_statistic(&self, g: f64) -> Option<f64> {
        Some(if self.cell.contains(g) { self.height() } else { 0.0 })
    }
    fn breakpoints(&self) -> Vec<f64> {
        [self.cell.lo, self.cell.hi].into_iter().filter(|v| v.is_finite()).collect()
    }
    fn constant_on(&self, cell: &Cell) -> Option<f64> {
        if *cell == self.cell {
            Some(self.height())
        } else if cell.hi < self.cell.lo || cell.lo > self.cell.hi {
            Some(0.0)
        } else {
            None
        }
    }
    fn valid_for(&self) -> Option<f64> {
        Some(self.s)
    }
    fn describe(&self) -> String {
        format!("spike(s={}, mass={:.6e})", self.s, self.mass)
    }
}

/// `p_a(x) / p_s(x)` for a fixed alternative `a`.
#[derive(Debug, Clone)]
pub struct LikelihoodRatio {
    family: Family,
    null: f64,
    alternative: f64,
}

impl LikelihoodRatio {
    pub fn new(family: Family, null: f64, alternative: f64) -> Result<Self> {
        family.check_param(alternative)?;
        Ok(Self { family, null, alternative })
    }

    fn ratio(a: f64, b: f64) -> f64 {
        match (a == f64::NEG_INFINITY, b == f64::NEG_INFINITY) {
            (true, _) => 0.0,
            (false, true) => f64::INFINITY,
            _ => (a - b).exp(),
        }
    }
}

impl EVariable for LikelihoodRatio {
    fn eval(&self, x: &[f64]) -> f64 {
        Self::ratio(self.family.log_density(self.alternative, x), self.family.log_density(self.null, x))
    }
    fn eval_statistic(&self, g: f64) -> Option<f64> {
        Some(Self::ratio(
            self.family.stat_log_density(self.alternative, g),
            self.family.stat_log_density(self.null, g),
        ))
    }
    fn valid_for(&self) -> Option<f64> {
        Some(self.null)
    }
    fn describe(&self) -> String {
        format!("likelihood_ratio(null={}, alternative={})", self.null, self.alternative)
    }
}

/// `κ p^{κ−1}` applied to the two-sided p-value `min(1, 2 min(F_s(g), S_s(g)))`.
#[derive(Debug, Clone)]
pub struct CalibratedP {
    family: Family,
    null: f64,
    kappa: f64,
}

impl CalibratedP {
    pub fn new(family: Family, null: f64, kappa: f64) -> Result<Self> {
        calibrate_p_to_e(kappa, 1.0)?;
        Ok(Self { family, null, kappa })
    }

    pub fn p_value(&self, g: f64) -> f64 {
        let tail = self.family.stat_cdf(self.null, g).min(self.family.stat_sf(self.null, g));
        (2.0 * tail).min(1.0)
    }
}

impl EVariable for CalibratedP {
    fn eval(&self, x: &[f64]) -> f64 {
        self.eval_statistic(self.family.statistic(x)).unwrap_or(f64::NAN)
    }
    fn eval_statistic(&self, g: f64) -> Option<f64> {
        Some(calibrate_p_to_e(self.kappa, self.p_value(g)).unwrap_or(f64::NAN))
    }
    fn breakpoints(&self) -> Vec<f64> {
        // The p-value kinks where the two tails cross, at the median of the null law.
        if self.family.is_discrete() {
            return Vec::new();
        }
        let (slo, shi) = self.family.stat_support(self.null);
        let mut lo = (self.family.typical_statistic(self.null) - 1e3).max(slo);
        let mut hi = (self.family.typical_statistic(self.null) + 1e3).min(shi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.family.stat_cdf(self.null, mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        vec![0.5 * (lo + hi)]
    }
    fn valid_for(&self) -> Option<f64> {
        Some(self.null)
    }
    fn describe(&self) -> String {
        format!("calibrated_p(null={}, kappa={})", self.null, self.kappa)
    }
}

/// `e(x) · w(g(x))` for a bounded weight `0 <= w <= 1`.
#[derive(Clone)]
pub struct Weighted {
    family: Family,
    inner: Arc<dyn EVariable>,
    weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    knots: Vec<f64>,
    label: String,
}

impl fmt::Debug for Weighted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Weighted({}, {:?})", self.label, self.inner)
    }
}

impl Weighted {
    pub fn new(
        family: Family,
        inner: Arc<dyn EVariable>,
        weight: impl Fn(f64) -> f64 + Send + Sync + 'static,
        knots: Vec<f64>,
        label: impl Into<String>,
    ) -> Self {
        Self { family, inner, weight: Arc::new(weight), knots, label: label.into() }
    }
}

impl EVariable for Weighted {
    fn eval(&self, x: &[f64]) -> f64 {
        let w = (self.weight)(self.family.statistic(x));
        if w == 0.0 {
            0.0
        } else {
            self.inner.eval(x) * w
        }
    }
    fn eval_statistic(&self, g: f64) -> Option<f64> {
        let w = (self.weight)(g);
        if w == 0.0 {
            return Some(0.0);
        }
        self.inner.eval_statistic(g).map(|v| v * w)
    }
    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.inner.breakpoints();
        b.extend_from_slice(&self.knots);
        b
    }
    fn valid_for(&self) -> Option<f64> {
        self.inner.valid_for()
    }
    fn describe(&self) -> String {
        format!("{} * {}", self.inner.describe(), self.label)
    }
}

/// `e_s(x)` from [`spike_evar`] for the bundle's own cells.
pub fn spike_evar(bundle: &FamilyBundle, s: NetPoint) -> Result<Spike> {
    let cell = bundle
        .cell(s)
        .ok_or_else(|| Error::Unsupported(format!("estimator {} has no closed-form cells", bundle.estimator.name())))?;
    Spike::new(bundle.family, s.value, cell)
}

/// Declarative description of one component per net point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentSpec {
    Constant {
        #[serde(deserialize_with = "crate::numstr::f64")]
        value: f64,
    },
    Spike,
    LikelihoodRatio {
        #[serde(deserialize_with = "crate::numstr::f64")]
        alternative: f64,
    },
    CalibratedP {
        #[serde(deserialize_with = "crate::numstr::f64")]
        kappa: f64,
    },
}

impl ComponentSpec {
    pub fn build(&self, bundle: &FamilyBundle, s: NetPoint) -> Result<Arc<dyn EVariable>> {
        Ok(match *self {
            ComponentSpec::Constant { value } => Arc::new(Constant::new(value)?),
            ComponentSpec::Spike => Arc::new(spike_evar(bundle, s)?),
            ComponentSpec::LikelihoodRatio { alternative } => {
                Arc::new(LikelihoodRatio::new(bundle.family, s.value, alternative)?)
            }
            ComponentSpec::CalibratedP { kappa } => Arc::new(CalibratedP::new(bundle.family, s.value, kappa)?),
        })
    }
}

/// Supplies the e-variable for each net point.
pub trait ComponentSource: Send + Sync + fmt::Debug {
    fn component(&self, s: NetPoint) -> Result<Arc<dyn EVariable>>;
    fn describe(&self) -> String;
}

/// Builds the same [`ComponentSpec`] at every net point on demand.
#[derive(Debug, Clone)]
pub struct Suite {
    bundle: FamilyBundle,
    spec: ComponentSpec,
}

impl Suite {
    pub fn new(bundle: &FamilyBundle, spec: ComponentSpec) -> Result<Self> {
        if let ComponentSpec::Constant { value } = spec {
            Constant::new(value)?;
        }
        Ok(Self { bundle: bundle.clone(), spec })
    }

    /// The full spike suite.
    pub fn spikes(bundle: &FamilyBundle) -> Self {
        Self { bundle: bundle.clone(), spec: ComponentSpec::Spike }
    }

    pub fn constant(bundle: &FamilyBundle, value: f64) -> Result<Self> {
        Self::new(bundle, ComponentSpec::Constant { value })
    }
}

impl ComponentSource for Suite {
    fn component(&self, s: NetPoint) -> Result<Arc<dyn EVariable>> {
        self.spec.build(&self.bundle, s)
    }
    fn describe(&self) -> String {
        match &self.spec {
            ComponentSpec::Spike => "spike_suite".into(),
            other => format!("suite({other:?})"),
        }
    }
}

/// Spikes on the bump supports `[n − 1/2 − ε, n + 1/2 + ε]` of an integer net:
/// the widest set each interpolated component is evaluated on.
#[derive(Debug, Clone)]
pub struct BumpSpikes {
    family: Family,
    epsilon: f64,
}

impl BumpSpikes {
    pub fn new(family: Family, epsilon: f64) -> Self {
        Self { family, epsilon }
    }
}

impl ComponentSource for BumpSpikes {
    fn component(&self, s: NetPoint) -> Result<Arc<dyn EVariable>> {
        let n = s.value;
        let cell = Cell { lo: n - 0.5 - self.epsilon, hi: n + 0.5 + self.epsilon, lo_closed: true, hi_closed: true };
        Ok(Arc::new(Spike::new(self.family, n, cell)?))
    }
    fn describe(&self) -> String {
        format!("bump_spike_suite(eps={})", self.epsilon)
    }
}

/// Explicit components keyed by net index; missing entries are the constant 1.
#[derive(Debug, Clone, Default)]
pub struct ComponentMap {
    map: BTreeMap<i64, Arc<dyn EVariable>>,
}

impl ComponentMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, index: i64, e: Arc<dyn EVariable>) -> &mut Self {
        self.map.insert(index, e);
        self
    }

    pub fn with(mut self, index: i64, e: Arc<dyn EVariable>) -> Self {
        self.map.insert(index, e);
        self
    }
}

impl ComponentSource for ComponentMap {
    fn component(&self, s: NetPoint) -> Result<Arc<dyn EVariable>> {
        Ok(self.map.get(&s.index).cloned().unwrap_or_else(|| Arc::new(Constant::ONE)))
    }
    fn describe(&self) -> String {
        format!("component_map({} entries)", self.map.len())
    }
}
