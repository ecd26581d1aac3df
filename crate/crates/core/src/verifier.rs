//! Certification of `sup_θ E_θ[e] <= 1` over parameter grids.
//!
//! Expectations of composites are accumulated cell by cell (or bump by bump in
//! interpolated mode), walking outward from the cell of a typical statistic
//! value. Whatever component sits on the cell of `s`, its contribution under
//! `θ` is at most `sup_cell p_θ/p_s` as long as it is an e-variable for `s`.
//! Those per-cell bounds decide when a walk may stop and what it leaves behind.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinator::{bump_knots, bump_weight, CompositeEVariable, Mode};
use crate::error::{domain, Error, Result};
use crate::estimator::{Cell, Estimator};
use crate::evar::EVariable;
use crate::factor::calibrate_p_to_e;
use crate::families::FamilyBundle;
use crate::family::{Family, Side};
use crate::net::{Net, NetPoint};
use crate::numeric::{integrate_piecewise, CompensatedSum, QuadOptions};

pub const EXACT_TAIL_MASS: f64 = 1e-12;
pub const QUAD_ABS_TOL: f64 = 1e-10;
pub const QUAD_TAIL_TOL: f64 = 1e-10;
/// Cells walked on each side before a continuous walk settles for its
/// remainder bound. Only heavy tails (Cauchy) get this far.
pub const QUAD_MAX_CELLS: u64 = 2000;
/// z-value of a two-sided 99% normal interval.
pub const Z99: f64 = 2.575_829_303_548_901;
const MAX_UNITS_PER_SIDE: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactSum,
    Quadrature,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ExactSum => "exact_sum",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ExpectationPlan {
    /// Exact summation over atoms; the walk stops once the bound on what is
    /// left falls below `tail_mass` (on the scale of the normalized e-value).
    ExactSum {
        #[serde(deserialize_with = "crate::numstr::f64")]
        tail_mass: f64,
    },
    /// Closed forms where available, adaptive Gauss–Kronrod otherwise. At most
    /// `max_cells` cells are visited on either side of the start.
    Quadrature {
        #[serde(deserialize_with = "crate::numstr::f64")]
        abs_tol: f64,
        #[serde(deserialize_with = "crate::numstr::f64")]
        tail_tol: f64,
        #[serde(deserialize_with = "crate::numstr::u64")]
        max_cells: u64,
    },
    /// Sample mean with a 99% normal half-width as the error bound.
    MonteCarlo {
        #[serde(deserialize_with = "crate::numstr::u64")]
        samples: u64,
        #[serde(deserialize_with = "crate::numstr::u64")]
        seed: u64,
    },
}

impl ExpectationPlan {
    pub fn exact_sum() -> Self {
        ExpectationPlan::ExactSum { tail_mass: EXACT_TAIL_MASS }
    }

    pub fn quadrature() -> Self {
        ExpectationPlan::Quadrature { abs_tol: QUAD_ABS_TOL, tail_tol: QUAD_TAIL_TOL, max_cells: QUAD_MAX_CELLS }
    }

    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        ExpectationPlan::MonteCarlo { samples, seed }
    }

    /// Exact sums for discrete families, quadrature for continuous ones.
    pub fn default_for(family: &Family) -> Self {
        if family.is_discrete() {
            Self::exact_sum()
        } else {
            Self::quadrature()
        }
    }

    pub fn method(&self) -> Method {
        match self {
            ExpectationPlan::ExactSum { .. } => Method::ExactSum,
            ExpectationPlan::Quadrature { .. } => Method::Quadrature,
            ExpectationPlan::MonteCarlo { .. } => Method::MonteCarlo,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            ExpectationPlan::MonteCarlo { seed, .. } => seed,
            _ => 0,
        }
    }

    pub fn check(&self, family: &Family) -> Result<()> {
        match *self {
            ExpectationPlan::ExactSum { tail_mass } => {
                if !family.is_discrete() {
                    return Err(Error::NotApplicable(format!("exact_sum needs a discrete family, got {}", family.label())));
                }
                if !(tail_mass > 0.0 && tail_mass <= EXACT_TAIL_MASS) {
                    return Err(domain(format!("exact_sum tail mass must lie in (0, {EXACT_TAIL_MASS}], got {tail_mass}")));
                }
            }
            ExpectationPlan::Quadrature { abs_tol, tail_tol, max_cells } => {
                if max_cells == 0 {
                    return Err(domain("quadrature needs max_cells >= 1"));
                }
                if family.is_discrete() {
                    return Err(Error::NotApplicable(format!("quadrature needs a continuous family, got {}", family.label())));
                }
                if !(abs_tol > 0.0 && tail_tol > 0.0) {
                    return Err(domain("quadrature tolerances must be positive"));
                }
            }
            ExpectationPlan::MonteCarlo { samples, .. } => {
                if samples < 2 {
                    return Err(domain("monte_carlo needs at least 2 samples"));
                }
            }
        }
        Ok(())
    }

    fn tail_tol(&self) -> f64 {
        match *self {
            ExpectationPlan::ExactSum { tail_mass } => tail_mass,
            ExpectationPlan::Quadrature { tail_tol, .. } => tail_tol,
            ExpectationPlan::MonteCarlo { .. } => f64::INFINITY,
        }
    }

    fn max_cells(&self) -> usize {
        match *self {
            ExpectationPlan::Quadrature { max_cells, .. } => max_cells as usize,
            _ => MAX_UNITS_PER_SIDE,
        }
    }

    fn quad_options(&self) -> QuadOptions {
        match *self {
            ExpectationPlan::Quadrature { abs_tol, .. } => QuadOptions { abs_tol, rel_tol: 1e-12, max_subdivisions: 2000 },
            _ => QuadOptions { abs_tol: QUAD_ABS_TOL, rel_tol: 1e-12, max_subdivisions: 2000 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub estimate: f64,
    pub error_bound: f64,
    pub method: Method,
}

fn non_negative(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::ContractViolation(format!("{} evaluated to {v}", what())))
    }
}

/// Value of an e-variable at statistic `g`, going through a representative
/// sample only when that sample determines the value.
fn value_at(e: &dyn EVariable, family: &Family, g: f64) -> Result<f64> {
    match e.eval_statistic(g) {
        Some(v) => Ok(v),
        None if family.sample_dim() == 1 => Ok(e.eval(&family.sample_with_statistic(g))),
        None => Err(Error::Unsupported(format!(
            "{} is not a function of the statistic; use monte_carlo",
            e.describe()
        ))),
    }
}

#[derive(Default)]
struct Totals {
    sum: CompensatedSum,
    infinite: bool,
    error: f64,
    remainder: f64,
    terms: usize,
}

impl Totals {
    fn push(&mut self, (v, err): (f64, f64)) {
        self.terms += 1;
        if v.is_infinite() {
            self.infinite = true;
        } else {
            self.sum.add(v);
            self.error += err;
        }
    }
}

/// One parameter value of one composite shape: the cell (or bump) walk.
struct Walker<'a> {
    bundle: &'a FamilyBundle,
    mode: Mode,
    factor_c: f64,
    theta: f64,
    tail_tol: f64,
    max_cells: usize,
    quad: QuadOptions,
}

impl<'a> Walker<'a> {
    fn family(&self) -> Family {
        self.bundle.family
    }

    fn net(&self) -> &Net {
        &self.bundle.net
    }

    fn region(&self, s: NetPoint) -> Result<Cell> {
        match self.mode {
            Mode::Discrete => self.bundle.cell(s).ok_or_else(|| {
                Error::Unsupported(format!("estimator {} has no closed-form cells", self.bundle.estimator.name()))
            }),
            Mode::Interpolated { epsilon } => {
                let [a, _, _, d] = bump_knots(s.value as i64, epsilon);
                Ok(Cell { lo: a, hi: d, lo_closed: true, hi_closed: true })
            }
        }
    }

    fn reach(&self) -> Option<f64> {
        match self.mode {
            Mode::Discrete => self.bundle.estimator.max_reach(self.net()),
            Mode::Interpolated { epsilon } => Some(0.5 + epsilon),
        }
    }

    fn start(&self) -> NetPoint {
        let g = self.family().typical_statistic(self.theta);
        match self.mode {
            Mode::Discrete => self.bundle.estimate_statistic(g),
            Mode::Interpolated { .. } => self.net().round(g.round()),
        }
    }

    fn beyond_support(&self, cell: &Cell, side: Side) -> bool {
        let (lo, hi) = self.family().stat_support(self.theta);
        match side {
            Side::Above => cell.lo > hi || (cell.lo == hi && !cell.lo_closed),
            Side::Below => cell.hi < lo || (cell.hi == lo && !cell.hi_closed),
        }
    }

    fn walk(&self, mut unit: impl FnMut(NetPoint, &Cell) -> Result<(f64, f64)>) -> Result<Totals> {
        let mut totals = Totals::default();
        let s0 = self.start();
        let c0 = self.region(s0)?;
        totals.push(unit(s0, &c0)?);
        for side in [Side::Above, Side::Below] {
            let r = self.walk_side(s0, side, &mut unit, &mut totals)?;
            totals.remainder += r;
        }
        Ok(totals)
    }

    /// Walks one side and returns the bound on the unvisited remainder
    /// (unnormalized).
    fn walk_side(
        &self,
        s0: NetPoint,
        side: Side,
        unit: &mut impl FnMut(NetPoint, &Cell) -> Result<(f64, f64)>,
        totals: &mut Totals,
    ) -> Result<f64> {
        let fam = self.family();
        let dir = if side == Side::Above { 1 } else { -1 };
        let target = self.tail_tol * self.factor_c;
        let reach = self.reach();
        let mut prev_b: Option<f64> = None;
        let mut fallback = f64::INFINITY;
        let mut k = s0.index;
        for _ in 0..self.max_cells {
            k += dir;
            let Some(s) = self.net().point(k) else { return Ok(0.0) };
            let cell = self.region(s)?;
            if self.beyond_support(&cell, side) {
                return Ok(0.0);
            }
            totals.push(unit(s, &cell)?);
            let b = fam.log_ratio_sup(self.theta, s.value, &cell).exp();
            let boundary = if side == Side::Above { cell.hi } else { cell.lo };
            if let Some(a) = reach.and_then(|r| fam.tail_ratio_remainder(self.theta, boundary, side, r)) {
                if a <= target {
                    return Ok(a);
                }
                fallback = a;
                continue;
            }
            if let Some(bp) = prev_b {
                if b == 0.0 && bp == 0.0 {
                    return Ok(0.0);
                }
                // Beyond this point the bounds are taken to keep shrinking at
                // least geometrically, which holds for every family here.
                if b < bp {
                    let r = b / bp;
                    let rem = b * r / (1.0 - r);
                    if rem <= target {
                        return Ok(rem);
                    }
                    fallback = rem;
                } else {
                    fallback = f64::INFINITY;
                }
            }
            prev_b = Some(b);
        }
        Ok(fallback)
    }

    fn scaled(v: f64, mass: f64, s: NetPoint) -> Result<(f64, f64)> {
        let v = non_negative(v, || format!("component at net point {}", s.value))?;
        if !(mass > 0.0) {
            return Ok((0.0, 0.0));
        }
        if v.is_infinite() {
            return Ok((f64::INFINITY, 0.0));
        }
        let t = v * mass;
        Ok((t, 4.0 * f64::EPSILON * t))
    }

    fn sum_atoms(&self, e: &dyn EVariable, s: NetPoint, cell: &Cell) -> Result<(f64, f64)> {
        let fam = self.family();
        let (lo, hi) = fam.atoms_in_cell(cell);
        let (slo, shi) = fam.atom_support(self.theta);
        let lo = lo.max(slo);
        let hi = shi.map_or(hi, |h| hi.min(h));
        let mut sum = CompensatedSum::new();
        let mut count = 0usize;
        for a in lo..=hi {
            let g = fam.atom_statistic(a);
            let owner = self.bundle.estimate_statistic(g);
            if owner.index != s.index {
                return Err(Error::ContractViolation(format!(
                    "atom {g} lies in the cell of {} but estimates to {}",
                    s.value, owner.value
                )));
            }
            let v = non_negative(value_at(e, &fam, g)?, || format!("component at net point {}", s.value))?;
            let p = fam.atom_log_pmf(self.theta, a).exp();
            if p > 0.0 {
                if v.is_infinite() {
                    return Ok((f64::INFINITY, 0.0));
                }
                sum.add(v * p);
                count += 1;
            }
        }
        let total = sum.value();
        Ok((total, 4.0 * f64::EPSILON * count as f64 * total))
    }

    fn integrate(&self, e: &dyn EVariable, s: NetPoint, cell: &Cell, weight: Option<(i64, f64)>) -> Result<(f64, f64)> {
        let fam = self.family();
        let (slo, shi) = fam.stat_support(self.theta);
        let lo = cell.lo.max(slo);
        let hi = cell.hi.min(shi);
        if !(hi > lo) {
            return Ok((0.0, 0.0));
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Unsupported(format!("unbounded cell [{lo}, {hi}] needs monte_carlo")));
        }
        let mut knots = e.breakpoints();
        if let Some((n, eps)) = weight {
            knots.extend(bump_knots(n, eps));
        }
        let mut failure: Option<Error> = None;
        let theta = self.theta;
        let r = integrate_piecewise(
            |g| {
                let w = weight.map_or(1.0, |(n, eps)| bump_weight(n, eps, g));
                if w == 0.0 {
                    return 0.0;
                }
                let v = match value_at(e, &fam, g) {
                    Ok(v) if v >= 0.0 => v,
                    Ok(v) => {
                        failure.get_or_insert(Error::ContractViolation(format!(
                            "component at net point {} evaluated to {v}",
                            s.value
                        )));
                        0.0
                    }
                    Err(err) => {
                        failure.get_or_insert(err);
                        0.0
                    }
                };
                let p = fam.stat_log_density(theta, g).exp();
                if p == 0.0 {
                    0.0
                } else {
                    w * v * p
                }
            },
            lo,
            hi,
            &knots,
            &self.quad,
        );
        if let Some(err) = failure {
            return Err(err);
        }
        Ok((r.value, r.error))
    }

    /// `∫ w_n p_θ` for the trapezoid bump of `n`, in closed form where the family has one.
    fn bump_mass(&self, n: i64, epsilon: f64) -> Option<f64> {
        let fam = self.family();
        let [a, b, c, d] = bump_knots(n, epsilon);
        let rising = fam.ramp_mass(self.theta, a, b)?;
        let flat = fam.stat_prob(self.theta, &Cell { lo: b, hi: c, lo_closed: true, hi_closed: true });
        let falling = fam.stat_prob(self.theta, &Cell { lo: c, hi: d, lo_closed: true, hi_closed: true })
            - fam.ramp_mass(self.theta, c, d)?;
        Some(rising + flat + falling.max(0.0))
    }

    fn composite_unit(&self, comp: &CompositeEVariable, s: NetPoint, cell: &Cell) -> Result<(f64, f64)> {
        let fam = self.family();
        let e = comp.components().component(s)?;
        match self.mode {
            Mode::Discrete => {
                if let Some(v) = e.constant_on(cell) {
                    return Self::scaled(v, fam.stat_prob(self.theta, cell), s);
                }
                if fam.is_discrete() {
                    self.sum_atoms(&*e, s, cell)
                } else {
                    self.integrate(&*e, s, cell, None)
                }
            }
            Mode::Interpolated { epsilon } => {
                let n = s.value as i64;
                if let Some(h) = e.constant_on(cell) {
                    if let Some(m) = self.bump_mass(n, epsilon) {
                        return Self::scaled(h, m, s);
                    }
                }
                self.integrate(&*e, s, cell, Some((n, epsilon)))
            }
        }
    }
}

fn composite_walker<'a>(comp: &'a CompositeEVariable, theta: f64, plan: &ExpectationPlan) -> Walker<'a> {
    Walker {
        bundle: comp.bundle(),
        mode: comp.mode(),
        factor_c: comp.factor_c(),
        theta,
        tail_tol: plan.tail_tol(),
        max_cells: plan.max_cells(),
        quad: plan.quad_options(),
    }
}

fn finish(t: Totals, factor_c: f64, method: Method) -> Expectation {
    if t.infinite {
        return Expectation { estimate: f64::INFINITY, error_bound: 0.0, method };
    }
    let estimate = t.sum.value() / factor_c;
    let error_bound = (t.error + t.remainder) / factor_c + 2.0 * f64::EPSILON * t.terms as f64 * estimate;
    Expectation { estimate, error_bound, method }
}

fn monte_carlo(
    mut e: impl FnMut(&[f64]) -> Result<f64>,
    family: &Family,
    theta: f64,
    samples: u64,
    seed: u64,
    stream: u64,
) -> Result<Expectation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for i in 0..samples {
        let x = family.sample(theta, &mut rng);
        let v = e(&x)?;
        if v.is_infinite() {
            return Ok(Expectation { estimate: f64::INFINITY, error_bound: 0.0, method: Method::MonteCarlo });
        }
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(Expectation { estimate: mean, error_bound: Z99 * (var / samples as f64).sqrt(), method: Method::MonteCarlo })
}

/// `E_θ[e]` for a composite. `stream` selects the Monte Carlo substream.
pub fn expectation_with_stream(
    composite: &CompositeEVariable,
    theta: f64,
    plan: &ExpectationPlan,
    stream: u64,
) -> Result<Expectation> {
    let family = composite.family();
    family.check_param(theta)?;
    plan.check(&family)?;
    if let ExpectationPlan::MonteCarlo { samples, seed } = *plan {
        return monte_carlo(|x| composite.try_eval(x), &family, theta, samples, seed, stream);
    }
    let w = composite_walker(composite, theta, plan);
    let totals = w.walk(|s, cell| w.composite_unit(composite, s, cell))?;
    Ok(finish(totals, composite.factor_c(), plan.method()))
}

pub fn expectation(composite: &CompositeEVariable, theta: f64, plan: &ExpectationPlan) -> Result<Expectation> {
    expectation_with_stream(composite, theta, plan, 0)
}

/// `Σ_cells sup_cell p_θ/p_s` in discrete mode, or the same over bump supports:
/// the largest unnormalized `E_θ[e]` over every choice of valid components.
/// Attained for discrete families; an upper bound for continuous ones.
pub fn adversarial_bound(bundle: &FamilyBundle, mode: Mode, theta: f64, tail_tol: f64) -> Result<Expectation> {
    bundle.family.check_param(theta)?;
    let w = Walker { bundle, mode, factor_c: 1.0, theta, tail_tol, max_cells: MAX_UNITS_PER_SIDE, quad: QuadOptions::default() };
    let fam = bundle.family;
    let totals = w.walk(|s, cell| {
        let b = fam.log_ratio_sup(theta, s.value, cell).exp();
        Ok((b, 4.0 * f64::EPSILON * b))
    })?;
    let method = if fam.is_discrete() { Method::ExactSum } else { Method::Quadrature };
    Ok(finish(totals, 1.0, method))
}

/// `E_θ[e]` for a single e-variable. Exact sums and quadrature cover the
/// region outside which `P_θ` has mass at most the tail tolerance; that mass
/// times the largest `e` seen at the region's edge is added to the error,
/// which assumes `e` does not grow beyond it.
pub fn expectation_of(e: &dyn EVariable, family: &Family, theta: f64, plan: &ExpectationPlan) -> Result<Expectation> {
    family.check_param(theta)?;
    plan.check(family)?;
    let tol = plan.tail_tol();
    match *plan {
        ExpectationPlan::MonteCarlo { samples, seed } => {
            monte_carlo(|x| Ok(e.eval(x)), family, theta, samples, seed, 0)
        }
        ExpectationPlan::ExactSum { .. } => {
            let (slo, shi) = family.atom_support(theta);
            let mid = ((family.typical_statistic(theta) * scale_of(family)).floor() as i64).max(slo);
            let mut hi = mid;
            while shi.is_none_or(|h| hi < h) && family.stat_sf(theta, family.atom_statistic(hi + 1)) > 0.5 * tol {
                hi += 1;
            }
            let mut lo = mid;
            while lo > slo && family.stat_cdf(theta, family.atom_statistic(lo - 1)) > 0.5 * tol {
                lo -= 1;
            }
            let mut sum = CompensatedSum::new();
            let mut edge = 0.0f64;
            for a in lo..=hi {
                let g = family.atom_statistic(a);
                let v = non_negative(value_at(e, family, g)?, || e.describe())?;
                let p = family.atom_log_pmf(theta, a).exp();
                if p > 0.0 && v.is_infinite() {
                    return Ok(Expectation { estimate: f64::INFINITY, error_bound: 0.0, method: Method::ExactSum });
                }
                if a == lo || a == hi {
                    edge = edge.max(v);
                }
                sum.add(v * p);
            }
            let est = sum.value();
            Ok(Expectation { estimate: est, error_bound: tol * edge + 4.0 * f64::EPSILON * est, method: Method::ExactSum })
        }
        ExpectationPlan::Quadrature { .. } => {
            let (slo, shi) = family.stat_support(theta);
            let mid = family.typical_statistic(theta);
            let expand = |dir: f64| {
                let mut r = 1.0;
                loop {
                    let x = mid + dir * r;
                    let mass = if dir > 0.0 { 1.0 - family.stat_cdf(theta, x) } else { family.stat_cdf(theta, x) };
                    if mass <= 0.5 * tol || r > 1e12 {
                        return x;
                    }
                    r *= 2.0;
                }
            };
            let lo = if slo.is_finite() { slo } else { expand(-1.0) };
            let hi = if shi.is_finite() { shi } else { expand(1.0) };
            let lo_eval = if lo == 0.0 && slo == 0.0 { f64::MIN_POSITIVE } else { lo };
            // Geometric knots keep each piece within reach of the adaptive rule on long ranges.
            let mut knots = e.breakpoints();
            let mut r = 1.0;
            while mid - r > lo_eval || mid + r < hi {
                knots.extend([mid - r, mid + r]);
                r *= 2.0;
            }
            let mut failure = None;
            let r = integrate_piecewise(
                |g| match value_at(e, family, g) {
                    Ok(v) if v >= 0.0 => {
                        let p = family.stat_log_density(theta, g).exp();
                        if p == 0.0 {
                            0.0
                        } else {
                            v * p
                        }
                    }
                    Ok(v) => {
                        failure.get_or_insert(Error::ContractViolation(format!("{} evaluated to {v}", e.describe())));
                        0.0
                    }
                    Err(err) => {
                        failure.get_or_insert(err);
                        0.0
                    }
                },
                lo_eval,
                hi,
                &knots,
                &plan.quad_options(),
            );
            if let Some(err) = failure {
                return Err(err);
            }
            let edge = [lo_eval, hi].iter().filter_map(|&g| value_at(e, family, g).ok()).fold(0.0, f64::max);
            let truncated = if slo.is_finite() && shi.is_finite() { 0.0 } else { tol * edge };
            Ok(Expectation { estimate: r.value, error_bound: r.error + truncated, method: Method::Quadrature })
        }
    }
}

fn scale_of(family: &Family) -> f64 {
    match *family {
        Family::Binomial { n } => n as f64,
        _ => 1.0,
    }
}

/// `E_λ[exp(X) X! / X^X]` for `X ~ Poisson(λ)`: the expectation of the
/// maximum-likelihood spike composite with `C = 1`. Terms are summed in log
/// space; `0^0 = 1`.
pub fn mle_counterexample_poisson(lambda: f64) -> Result<Expectation> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    // log of e^{-λ} λ^x / x! · e^x x! / x^x
    let term = |x: f64| {
        if x == 0.0 {
            (-lambda).exp()
        } else {
            (-lambda + x * (1.0 + lambda.ln() - x.ln())).exp()
        }
    };
    let x_max = (lambda + 20.0 * lambda.sqrt() + 40.0).ceil();
    let mut sum = CompensatedSum::new();
    let mut x = 0.0;
    while x <= x_max {
        sum.add(term(x));
        x += 1.0;
    }
    // Consecutive ratios λ e (x/(x+1))^x / (x+1) decrease beyond the mode.
    let last = term(x_max);
    let r = term(x_max + 1.0) / last;
    let tail = if r < 1.0 { last * r / (1.0 - r) } else { f64::INFINITY };
    let est = sum.value();
    Ok(Expectation { estimate: est, error_bound: tail + 4.0 * f64::EPSILON * x_max * est, method: Method::ExactSum })
}

/// Monte Carlo estimate of `E[κ P^(κ−1)]` for `P` uniform on `(0, 1]`.
/// For `κ <= 1/2` the variance is infinite and the half-width is not a valid bound.
pub fn calibrator_null_mc(kappa: f64, samples: u64, seed: u64) -> Result<Expectation> {
    calibrate_p_to_e(kappa, 0.5)?;
    if samples < 2 {
        return Err(domain("monte_carlo needs at least 2 samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for i in 0..samples {
        let p = 1.0 - rng.random::<f64>();
        let v = kappa * p.powf(kappa - 1.0);
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(Expectation { estimate: mean, error_bound: Z99 * (var / samples as f64).sqrt(), method: Method::MonteCarlo })
}

// ---- sweeps ----------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRow {
    pub theta: f64,
    pub estimate: f64,
    pub error_bound: f64,
    pub method: Method,
}

impl ExpectationRow {
    pub fn passes(&self) -> bool {
        self.estimate <= 1.0 + 3.0 * self.error_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Worst {
    pub theta: f64,
    pub value: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub bundle: String,
    pub components: String,
    pub mode: Mode,
    pub factor_c: f64,
    pub plan: ExpectationPlan,
    pub rng_seed: u64,
    pub theta_grid: Vec<f64>,
    pub expectations: Vec<ExpectationRow>,
    /// The row with the least room, `estimate − 3·error_bound` largest.
    pub worst: Worst,
    pub max_estimate: f64,
    pub max_error_bound: f64,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// The smallest factor that would still pass on this grid:
    /// `max(1, max_θ C·(estimate − 3·error_bound))`.
    pub fn tightest_factor(&self) -> f64 {
        self.expectations
            .iter()
            .map(|r| self.factor_c * (r.estimate - 3.0 * r.error_bound))
            .fold(1.0, f64::max)
    }
}

/// Expectations at every grid point, in grid order. Point `i` uses Monte
/// Carlo substream `i`, so results do not depend on scheduling.
pub fn sweep(composite: &CompositeEVariable, theta_grid: &[f64], plan: &ExpectationPlan) -> Result<VerificationReport> {
    if theta_grid.is_empty() {
        return Err(domain("empty parameter grid"));
    }
    let family = composite.family();
    plan.check(&family)?;
    let rows: Vec<ExpectationRow> = theta_grid
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| {
            let e = expectation_with_stream(composite, theta, plan, i as u64)?;
            Ok(ExpectationRow { theta, estimate: e.estimate, error_bound: e.error_bound, method: e.method })
        })
        .collect::<Result<_>>()?;
    let margin = |r: &ExpectationRow| r.estimate - 3.0 * r.error_bound;
    let mut worst = &rows[0];
    for r in &rows[1..] {
        if margin(r) > margin(worst) || margin(r).is_nan() {
            worst = r;
        }
    }
    let verdict = if worst.passes() { Verdict::Pass } else { Verdict::Fail };
    Ok(VerificationReport {
        bundle: composite.bundle().id(),
        components: composite.components().describe(),
        mode: composite.mode(),
        factor_c: composite.factor_c(),
        plan: *plan,
        rng_seed: plan.seed(),
        theta_grid: theta_grid.to_vec(),
        worst: Worst { theta: worst.theta, value: worst.estimate, error_bound: worst.error_bound },
        max_estimate: rows.iter().map(|r| r.estimate).fold(f64::NEG_INFINITY, f64::max),
        max_error_bound: rows.iter().map(|r| r.error_bound).fold(0.0, f64::max),
        verdict,
        expectations: rows,
    })
}

// ---- parameter grids ---------------------------------------------------------

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn geomspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    // Endpoints exactly, whatever exp(ln(x)) rounds to.
    linspace(lo.ln(), hi.ln(), n).enumerate().map(move |(i, v)| match i {
        0 => lo,
        _ if i == n - 1 => hi,
        _ => v.exp(),
    })
}

fn finalize(family: &Family, mut grid: Vec<f64>) -> Vec<f64> {
    grid.retain(|&t| family.param_space().contains(t));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Net points and cell boundaries with values in `[lo, hi]`.
fn net_and_boundaries(bundle: &FamilyBundle, lo: f64, hi: f64) -> Vec<f64> {
    let net = &bundle.net;
    let (Some(a), Some(b)) = (net.index_of(lo).or_else(|| net.succ(lo).map(|p| p.index)), net.pred(hi).map(|p| p.index))
    else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for k in a..=b {
        let Some(s) = net.point(k) else { continue };
        out.push(s.value);
        if let Some(c) = bundle.cell(s) {
            out.extend([c.lo, c.hi].into_iter().filter(|v| v.is_finite() && *v >= lo && *v <= hi));
        }
    }
    out
}

/// `1..=64`, then every power of two up to `2^20` with its neighbours.
pub fn discrete_uniform_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (1..=64).map(|n| n as f64).collect();
    for k in 6..=20 {
        let p = (1u64 << k) as f64;
        g.extend([p - 2.0, p - 1.0, p, p + 1.0, p + 2.0, 1.5 * p]);
    }
    g.retain(|&n| n <= (1u64 << 20) as f64);
    finalize(&Family::DiscreteUniform, g)
}

/// The adversarial sweep grid for a bundle in discrete mode.
pub fn default_theta_grid(bundle: &FamilyBundle) -> Vec<f64> {
    let fam = bundle.family;
    let mut g: Vec<f64> = match fam {
        Family::Binomial { .. } => {
            let mut v: Vec<f64> = linspace(1e-3, 1.0 - 1e-3, 999).collect();
            v.extend(geomspace(1e-6, 1e-3, 16));
            v.extend(geomspace(1e-6, 1e-3, 16).map(|t| 1.0 - t));
            v.extend(net_and_boundaries(bundle, 0.0, 1.0));
            v
        }
        Family::DiscreteUniform => return discrete_uniform_grid(),
        Family::Poisson => {
            let mut v: Vec<f64> = geomspace(1e-2, 1e4, 601).collect();
            v.extend(net_and_boundaries(bundle, 1e-2, 1e4));
            v
        }
        Family::ContinuousUniform | Family::NormalVariance { .. } => {
            let mut v: Vec<f64> = geomspace(1e-3, 1e3, 601).collect();
            let pts = net_and_boundaries(bundle, 1e-3, 1e3);
            v.extend(pts.iter().flat_map(|&t| [t, t * (1.0 - 1e-12), t * (1.0 + 1e-12)]));
            v
        }
        Family::NormalMean { .. } | Family::Cauchy => {
            let h = bundle.net.spacing().unwrap_or(1.0);
            let steps = (2000.0 / (0.5 * h)).round() as usize;
            let mut v: Vec<f64> = linspace(-1000.0, 1000.0, steps + 1).collect();
            if let Estimator::REpsilon { epsilon, .. } = bundle.estimator {
                v.extend((-100..=100).flat_map(|n| {
                    let m = n as f64 + 0.5;
                    [m - epsilon, m + epsilon]
                }));
            }
            if h < 1.0 {
                v.extend(net_and_boundaries(bundle, -10.0, 10.0));
            }
            v
        }
    };
    g = finalize(&fam, g);
    g
}

/// Location grid for interpolated sweeps: half-integers over `[−1000, 1000]`
/// plus every ramp knot near the origin.
pub fn interpolated_theta_grid(family: &Family, epsilon: f64) -> Vec<f64> {
    let mut v: Vec<f64> = linspace(-1000.0, 1000.0, 4001).collect();
    v.extend((-100..=100).flat_map(|n| bump_knots(n, epsilon)));
    finalize(family, v)
}
