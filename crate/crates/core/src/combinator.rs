//! Composite e-variables: `e(x) = e_{ŝ(x)}(x) / C`, its interpolated variant
//! over integer nets, and the i.i.d. product form.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimator::{Estimator, TieRule, MAX_EPSILON};
use crate::evar::{ComponentSource, Constant, EVariable, Weighted};
use crate::families::FamilyBundle;
use crate::family::Family;
use crate::net::{Net, NetPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Discrete,
    Interpolated {
        #[serde(deserialize_with = "crate::numstr::f64")]
        epsilon: f64,
    },
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= MAX_EPSILON {
        Ok(())
    } else {
        Err(domain(format!("epsilon must lie in (0, 1/5], got {epsilon}")))
    }
}

/// `clamp((x − (m − ε)) / 2ε, 0, 1)`: the rising ramp centred on `m`.
fn ramp(x: f64, m: f64, epsilon: f64) -> f64 {
    ((x - (m - epsilon)) / (2.0 * epsilon)).clamp(0.0, 1.0)
}

/// Trapezoid weight of `center`: 1 on `[n − 1/2 + ε, n + 1/2 − ε]`, 0 outside
/// `[n − 1/2 − ε, n + 1/2 + ε]`, linear in between.
///
/// Both neighbours of a half-integer use the same ramp value `t`, as `t` and
/// `1 − t`, so the weights sum to exactly 1 in floating point.
pub fn bump_weight(center: i64, epsilon: f64, x: f64) -> f64 {
    let c = center as f64;
    if x < c {
        ramp(x, c - 0.5, epsilon)
    } else {
        1.0 - ramp(x, c + 0.5, epsilon)
    }
}

/// Ramp knots of `center`'s bump.
pub fn bump_knots(center: i64, epsilon: f64) -> [f64; 4] {
    let c = center as f64;
    [c - 0.5 - epsilon, c - 0.5 + epsilon, c + 0.5 - epsilon, c + 0.5 + epsilon]
}

#[derive(Clone)]
pub struct CompositeEVariable {
    bundle: FamilyBundle,
    components: Arc<dyn ComponentSource>,
    factor_c: f64,
    mode: Mode,
}

impl fmt::Debug for CompositeEVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeEVariable")
            .field("bundle", &self.bundle.id())
            .field("components", &self.components.describe())
            .field("factor_c", &self.factor_c)
            .field("mode", &self.mode)
            .finish()
    }
}

/// `e(x) = components[ŝ(x)](x) / C` with the bundle's factor.
pub fn combine_discrete(bundle: &FamilyBundle, components: Arc<dyn ComponentSource>) -> CompositeEVariable {
    CompositeEVariable { bundle: bundle.clone(), components, factor_c: bundle.factor_c, mode: Mode::Discrete }
}

/// `e^ε(x) = Σ_n e_n(x) w_n(g(x)) / C` over an integer net.
pub fn combine_interpolated(
    bundle: &FamilyBundle,
    components: Arc<dyn ComponentSource>,
    epsilon: f64,
    factor_c: f64,
) -> Result<CompositeEVariable> {
    check_epsilon(epsilon)?;
    if !bundle.net.is_unit_integer_lattice() {
        return Err(Error::Unsupported(format!("interpolated mode needs the integer net, got {}", bundle.net.name())));
    }
    CompositeEVariable { bundle: bundle.clone(), components, factor_c: 1.0, mode: Mode::Interpolated { epsilon } }
        .with_factor(factor_c)
}

fn checked(v: f64, s: NetPoint) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::ContractViolation(format!("component at net point {} evaluated to {v}", s.value)))
    }
}

impl CompositeEVariable {
    pub fn bundle(&self) -> &FamilyBundle {
        &self.bundle
    }

    pub fn family(&self) -> Family {
        self.bundle.family
    }

    pub fn net(&self) -> &Net {
        &self.bundle.net
    }

    pub fn components(&self) -> &Arc<dyn ComponentSource> {
        &self.components
    }

    pub fn factor_c(&self) -> f64 {
        self.factor_c
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Same composite with a different factor; `C >= 1` is required.
    pub fn with_factor(mut self, factor_c: f64) -> Result<Self> {
        if !(factor_c >= 1.0 && factor_c.is_finite()) {
            return Err(domain(format!("factor C must be finite and >= 1, got {factor_c}")));
        }
        self.factor_c = factor_c;
        Ok(self)
    }

    pub fn describe(&self) -> String {
        let mode = match self.mode {
            Mode::Discrete => "discrete".to_string(),
            Mode::Interpolated { epsilon } => format!("interpolated(eps={epsilon})"),
        };
        format!("{} / {} / {} / C={}", self.bundle.id(), self.components.describe(), mode, self.factor_c)
    }

    /// Net points whose components can be non-zero at statistic `g`, with their weights.
    pub fn active(&self, g: f64) -> Vec<(NetPoint, f64)> {
        match self.mode {
            Mode::Discrete => vec![(self.bundle.estimate_statistic(g), 1.0)],
            Mode::Interpolated { epsilon } => {
                let r = g.round() as i64;
                (r - 1..=r + 1)
                    .filter_map(|n| {
                        let w = bump_weight(n, epsilon, g);
                        let k = self.bundle.net.index_of(n as f64)?;
                        (w > 0.0).then(|| (self.bundle.net.point(k).expect("valid index"), w))
                    })
                    .collect()
            }
        }
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        self.bundle.family.check_sample(x)?;
        let g = self.bundle.family.statistic(x);
        let mut total = 0.0;
        for (s, w) in self.active(g) {
            let v = checked(self.components.component(s)?.eval(x), s)?;
            total += w * v;
        }
        Ok(total / self.factor_c)
    }

    /// Value through the reduced statistic, when every active component supports it.
    pub fn try_eval_statistic(&self, g: f64) -> Result<Option<f64>> {
        let mut total = 0.0;
        for (s, w) in self.active(g) {
            let Some(v) = self.components.component(s)?.eval_statistic(g) else { return Ok(None) };
            total += w * checked(v, s)?;
        }
        Ok(Some(total / self.factor_c))
    }

    /// The component at `s` as it enters the composite (weighted by its bump in
    /// interpolated mode), before division by `C`.
    pub fn weighted_component(&self, s: NetPoint) -> Result<Arc<dyn EVariable>> {
        let inner = self.components.component(s)?;
        Ok(match self.mode {
            Mode::Discrete => inner,
            Mode::Interpolated { epsilon } => {
                let n = s.value as i64;
                Arc::new(Weighted::new(
                    self.bundle.family,
                    inner,
                    move |g| bump_weight(n, epsilon, g),
                    bump_knots(n, epsilon).to_vec(),
                    format!("bump({n}, {epsilon})"),
                ))
            }
        })
    }
}

impl EVariable for CompositeEVariable {
    fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
    fn eval_statistic(&self, g: f64) -> Option<f64> {
        self.try_eval_statistic(g).unwrap_or(Some(f64::NAN))
    }
    fn valid_for(&self) -> Option<f64> {
        None
    }
    fn describe(&self) -> String {
        CompositeEVariable::describe(self)
    }
}

/// The components `e_n · w_n` for centres of one parity, zero for the other.
#[derive(Debug, Clone)]
pub struct ParityComponents {
    inner: Arc<dyn ComponentSource>,
    family: Family,
    epsilon: f64,
    even: bool,
}

impl ComponentSource for ParityComponents {
    fn component(&self, s: NetPoint) -> Result<Arc<dyn EVariable>> {
        let n = s.value as i64;
        if (n.rem_euclid(2) == 0) != self.even {
            return Ok(Arc::new(Constant::ZERO));
        }
        let eps = self.epsilon;
        Ok(Arc::new(Weighted::new(
            self.family,
            self.inner.component(s)?,
            move |g| bump_weight(n, eps, g),
            bump_knots(n, eps).to_vec(),
            format!("bump({n}, {eps})"),
        )))
    }
    fn describe(&self) -> String {
        format!("{}({})", if self.even { "even" } else { "odd" }, self.inner.describe())
    }
}

/// The two discrete-rule families whose average is the interpolated combiner.
///
/// `even` is read through `r^ε` with ties sent to the even neighbour, `odd`
/// through `r^ε` with ties sent to the odd one.
#[derive(Debug, Clone)]
pub struct EvenOddSplit {
    pub even: ParityComponents,
    pub odd: ParityComponents,
    even_bundle: FamilyBundle,
    odd_bundle: FamilyBundle,
}

pub fn even_odd_split(bundle: &FamilyBundle, components: Arc<dyn ComponentSource>, epsilon: f64) -> Result<EvenOddSplit> {
    check_epsilon(epsilon)?;
    if !bundle.net.is_unit_integer_lattice() {
        return Err(Error::Unsupported("even/odd split needs the integer net".into()));
    }
    let part = |even| ParityComponents { inner: components.clone(), family: bundle.family, epsilon, even };
    Ok(EvenOddSplit {
        even: part(true),
        odd: part(false),
        even_bundle: bundle.clone().with_estimator(Estimator::r_epsilon(epsilon, TieRule::Even)?),
        odd_bundle: bundle.clone().with_estimator(Estimator::r_epsilon(epsilon, TieRule::Odd)?),
    })
}

impl EvenOddSplit {
    /// `e^even_{ŝ_even(x)}(x)`, unnormalized.
    pub fn eval_even(&self, x: &[f64]) -> Result<f64> {
        let s = self.even_bundle.estimate(x)?;
        Ok(self.even.component(s)?.eval(x))
    }

    /// `e^odd_{ŝ_odd(x)}(x)`, unnormalized.
    pub fn eval_odd(&self, x: &[f64]) -> Result<f64> {
        let s = self.odd_bundle.estimate(x)?;
        Ok(self.odd.component(s)?.eval(x))
    }

    /// `(e^even/C₀ + e^odd/C₀) / 2` with `C = 2 C₀`.
    pub fn reconstruct(&self, x: &[f64], factor_c: f64) -> Result<f64> {
        Ok((self.eval_even(x)? + self.eval_odd(x)?) / factor_c)
    }

    /// Both halves as discrete composites with factor `C₀ = C / 2`.
    pub fn halves(&self, factor_c: f64) -> (CompositeEVariable, CompositeEVariable) {
        let half = |b: &FamilyBundle, comps: &ParityComponents| CompositeEVariable {
            bundle: b.clone(),
            components: Arc::new(comps.clone()),
            factor_c: 0.5 * factor_c,
            mode: Mode::Discrete,
        };
        (half(&self.even_bundle, &self.even), half(&self.odd_bundle, &self.odd))
    }
}

/// `(1/C) ∏_k e_{ŝ(x)}(x_k)` for i.i.d. normal-mean samples, with each factor a
/// single-observation e-variable.
#[derive(Clone)]
pub struct ProductEVariable {
    bundle: FamilyBundle,
    per_obs: Arc<dyn ComponentSource>,
}

impl fmt::Debug for ProductEVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProductEVariable({}, {})", self.bundle.id(), self.per_obs.describe())
    }
}

impl ProductEVariable {
    /// Requires the normal-mean bundle on the net `(1/√n)Z`.
    pub fn new(bundle: &FamilyBundle, per_obs: Arc<dyn ComponentSource>) -> Result<Self> {
        match (bundle.family, &bundle.net) {
            (Family::NormalMean { n }, Net::ScaledLattice { alpha, n: m }) if *alpha == 1.0 && *m == n => {
                Ok(Self { bundle: bundle.clone(), per_obs })
            }
            _ => Err(Error::Unsupported(format!("product e-variables need normal_mean on (1/sqrt(n))Z, got {}", bundle.id()))),
        }
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        let s = self.bundle.estimate(x)?;
        let e = self.per_obs.component(s)?;
        let mut prod = 1.0;
        for &xi in x {
            prod *= checked(e.eval(&[xi]), s)?;
        }
        Ok(prod / self.bundle.factor_c)
    }
}

/// Convenience wrapper for [`ProductEVariable::try_eval`].
pub fn product_evar(per_obs: Arc<dyn ComponentSource>, bundle: &FamilyBundle, x: &[f64]) -> Result<f64> {
    ProductEVariable::new(bundle, per_obs)?.try_eval(x)
}

impl EVariable for ProductEVariable {
    fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
    fn valid_for(&self) -> Option<f64> {
        None
    }
    fn describe(&self) -> String {
        format!("product({}, {})", self.bundle.id(), self.per_obs.describe())
    }
}
