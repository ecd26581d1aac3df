//! Numerical checks of the conditions behind the normalizing factors.
//!
//! Sample points are values of the reduced statistic `g(x)`. Every check is
//! deterministic given its inputs; random triples come from a seeded ChaCha stream.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{FamilyBundle, LemmaRoute};
use crate::factor::FactorInputs;
use crate::family::{log_likelihood_ratio, Family};

pub const IDENTITY_TOL: f64 = 1e-9;
pub const INEQUALITY_TOL: f64 = 1e-7;
const MAX_WITNESSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `log p_θ/p_s = d(g‖s) − d(g‖θ)`.
    P1,
    /// `d(g(x)‖ŝ(x)) < c'`.
    P2,
    /// `pred(s) <= pred(g) <= succ(g) <= succ(s)`.
    P3,
    /// `d(θ₁‖θ₂) >= (1+α) log(k−1)`, `k = |S ∩ (θ₁, θ₂)|`.
    P4,
    /// `d(θ₁‖θ₃) >= d(θ₁‖θ₂) + d(θ₂‖θ₃)` for monotone triples.
    P1Prime,
    /// `d(s‖s') > c` for consecutive net points.
    P2Prime,
}

/// A point where a condition was evaluated. For `P1` the fields are
/// `(θ, s, g)`; for `P3` only `x` (the statistic) is used; for the
/// divergence conditions they hold the parameters involved, in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub theta: f64,
    pub s: f64,
    pub x: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub family: String,
    /// Largest amount by which the condition fails; `<= 0` when it holds with room.
    pub max_violation: f64,
    pub tolerance: f64,
    pub passing: bool,
    /// The worst offenders, largest violation first.
    pub witnesses: Vec<Witness>,
    pub checked: usize,
    /// Grid points skipped because a density vanished there.
    pub skipped: usize,
    pub estimated_constant: Option<f64>,
    pub note: Option<String>,
}

impl ConditionReport {
    fn from_witnesses(
        condition: Condition,
        family: &Family,
        tolerance: f64,
        mut all: Vec<Witness>,
        skipped: usize,
    ) -> Self {
        let checked = all.len();
        all.sort_by(|a, b| b.violation.total_cmp(&a.violation));
        let max_violation = all.first().map_or(f64::NEG_INFINITY, |w| w.violation);
        let witnesses: Vec<Witness> = all.into_iter().filter(|w| w.violation > tolerance).take(MAX_WITNESSES).collect();
        ConditionReport {
            condition,
            family: family.label(),
            max_violation,
            tolerance,
            passing: !(max_violation > tolerance),
            witnesses,
            checked,
            skipped,
            estimated_constant: None,
            note: None,
        }
    }

    fn with_constant(mut self, c: f64) -> Self {
        self.estimated_constant = Some(c);
        self
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per grid axis.
    pub points: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 100, seed: 0 }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

/// Default `(θ grid, statistic grid)` for the identity check: geometric in
/// scale parameters, arithmetic in location parameters.
pub fn identity_grid(family: &Family, points: usize) -> (Vec<f64>, Vec<f64>) {
    match *family {
        Family::Binomial { n } => {
            let xs: Vec<f64> = if (n as usize) < points {
                (0..=n).map(|k| k as f64 / n as f64).collect()
            } else {
                linspace(0.0, n as f64, points).into_iter().map(|k| k.round() / n as f64).collect()
            };
            (linspace(0.01, 0.99, points), xs)
        }
        Family::Poisson => (geomspace(0.1, 10.0, points), (0..points).map(|k| k as f64).collect()),
        Family::NormalMean { .. } | Family::Cauchy => (linspace(-10.0, 10.0, points), linspace(-10.0, 10.0, points)),
        Family::NormalVariance { .. } => (geomspace(0.1, 10.0, points), geomspace(0.01, 100.0, points)),
        Family::DiscreteUniform => ((1..=points).map(|k| k as f64).collect(), (0..points).map(|k| k as f64).collect()),
        Family::ContinuousUniform => (geomspace(0.1, 10.0, points), geomspace(0.01, 10.0, points)),
    }
}

/// (p i) with an explicit divergence, so that wrong divergences can be shown to fail.
pub fn check_identity_with(
    family: &Family,
    divergence: impl Fn(f64, f64) -> f64 + Sync,
    thetas: &[f64],
    stats: &[f64],
) -> ConditionReport {
    let rows: Vec<(Vec<Witness>, usize)> = thetas
        .par_iter()
        .map(|&theta| {
            let mut out = Vec::with_capacity(thetas.len() * stats.len());
            let mut skipped = 0;
            for &s in thetas {
                for &g in stats {
                    let x = family.sample_with_statistic(g);
                    let gx = family.statistic(&x);
                    match log_likelihood_ratio(family, theta, s, &x) {
                        Ok(lhs) => {
                            let rhs = divergence(gx, s) - divergence(gx, theta);
                            let r = if rhs.is_finite() { (lhs - rhs).abs() } else { f64::INFINITY };
                            out.push(Witness { theta, s, x: gx, violation: r });
                        }
                        Err(_) => skipped += 1,
                    }
                }
            }
            (out, skipped)
        })
        .collect();
    let skipped = rows.iter().map(|r| r.1).sum();
    let all = rows.into_iter().flat_map(|r| r.0).collect();
    ConditionReport::from_witnesses(Condition::P1, family, IDENTITY_TOL, all, skipped)
}

/// (p i) on the default grid; only for families handled through the divergence lemmas.
pub fn check_identity_p1(bundle: &FamilyBundle, grid: &GridSpec) -> Result<ConditionReport> {
    let family = bundle.family;
    if !family.uses_divergence_identity() {
        return Err(Error::NotApplicable(format!("{} is handled by a direct argument", family.label())));
    }
    let (thetas, stats) = identity_grid(&family, grid.points);
    let mut report = check_identity_with(&family, |a, b| family.divergence_ext(a, b), &thetas, &stats);
    if matches!(family, Family::Cauchy) {
        report = report.with_note("the Cauchy d is defined so that the identity holds");
    }
    Ok(report)
}

/// Statistic values in and around the cells with net indices in `indices`:
/// the clipped cell endpoints plus evenly spaced interior points (or every atom
/// of small discrete cells), `per_cell` in total.
pub fn cell_samples(bundle: &FamilyBundle, indices: RangeInclusive<i64>, per_cell: usize) -> Result<Vec<f64>> {
    let family = &bundle.family;
    let per_cell = per_cell.max(2);
    let mut out = Vec::new();
    for k in indices {
        let Some(s) = bundle.net.point(k) else { continue };
        let cell = bundle
            .cell(s)
            .ok_or_else(|| Error::Unsupported(format!("estimator {} has no closed-form cells", bundle.estimator.name())))?;
        if family.is_discrete() {
            let (mut lo, mut hi) = family.atoms_in_cell(&cell);
            lo = lo.max(0);
            if let Family::Binomial { n } = *family {
                hi = hi.min(n as i64);
            }
            if hi < lo {
                continue;
            }
            let count = (hi - lo + 1) as usize;
            if count <= per_cell {
                out.extend((lo..=hi).map(|a| family.atom_statistic(a)));
            } else {
                for i in 0..per_cell {
                    let a = lo + ((hi - lo) as f64 * i as f64 / (per_cell - 1) as f64).round() as i64;
                    out.push(family.atom_statistic(a));
                }
            }
        } else {
            let (slo, shi) = match family {
                // The support of the statistic across all parameters.
                Family::ContinuousUniform | Family::NormalVariance { .. } => (0.0, f64::INFINITY),
                _ => (f64::NEG_INFINITY, f64::INFINITY),
            };
            let lo = cell.lo.max(slo);
            let hi = cell.hi.min(shi);
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                continue;
            }
            let lo = if lo == 0.0 { f64::MIN_POSITIVE } else { lo };
            out.extend(linspace(lo, hi, per_cell));
        }
    }
    Ok(out)
}

/// Net indices used by default for each family.
pub fn default_cell_window(bundle: &FamilyBundle) -> RangeInclusive<i64> {
    match bundle.family {
        Family::Binomial { .. } => {
            let (lo, hi) = bundle.net.index_bounds();
            lo.unwrap_or(1)..=hi.unwrap_or(1)
        }
        Family::Poisson => 1..=100,
        Family::DiscreteUniform => 0..=20,
        Family::ContinuousUniform => -20..=20,
        _ => -50..=50,
    }
}

/// `sup d(g‖ŝ(g))` over the samples.
pub fn estimate_c_prime(bundle: &FamilyBundle, samples: &[f64]) -> f64 {
    samples
        .par_iter()
        .map(|&g| bundle.family.divergence_ext(g, bundle.estimate_statistic(g).value))
        .reduce(|| 0.0, f64::max)
}

/// (p ii) against a declared `c'`.
pub fn check_cell_bound_p2(bundle: &FamilyBundle, samples: &[f64], c_prime: f64) -> ConditionReport {
    let all: Vec<Witness> = samples
        .par_iter()
        .map(|&g| {
            let s = bundle.estimate_statistic(g).value;
            let d = bundle.family.divergence_ext(g, s);
            Witness { theta: g, s, x: g, violation: d - c_prime }
        })
        .collect();
    let est = all.iter().map(|w| w.violation + c_prime).fold(0.0, f64::max);
    ConditionReport::from_witnesses(Condition::P2, &bundle.family, INEQUALITY_TOL, all, 0).with_constant(est)
}

/// (p iii): the cell of `s` lies between the neighbours of `s`.
pub fn check_sandwich_p3(bundle: &FamilyBundle, samples: &[f64]) -> ConditionReport {
    let net = &bundle.net;
    let all: Vec<Witness> = samples
        .par_iter()
        .map(|&g| {
            let s = bundle.estimate_statistic(g).value;
            let mut violation = f64::NEG_INFINITY;
            if let (Some(ps), Some(pg)) = (net.pred(s), net.pred(g)) {
                violation = violation.max(ps.value - pg.value);
            }
            if let (Some(sg), Some(ss)) = (net.succ(g), net.succ(s)) {
                violation = violation.max(sg.value - ss.value);
            }
            Witness { theta: s, s, x: g, violation }
        })
        .collect();
    ConditionReport::from_witnesses(Condition::P3, &bundle.family, 0.0, all, 0)
}

/// Pairs `(θ₁, θ₂)` just outside runs of `k` consecutive net points, for
/// start indices in `starts` and run lengths `k` in `ks`.
pub fn growth_pairs(bundle: &FamilyBundle, starts: &[i64], ks: &[i64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &i in starts {
        for &k in ks {
            let (Some(a), Some(b)) = (bundle.net.value(i), bundle.net.value(i + k - 1)) else { continue };
            let below = bundle.net.value(i - 1).map_or(a - 1e-6 * a.abs().max(1e-300), |p| a - 1e-9 * (a - p));
            let above = bundle.net.value(i + k).map_or(b + 1e-6 * b.abs().max(1e-300), |q| b + 1e-9 * (q - b));
            let (lo, hi) = match bundle.family.param_space() {
                crate::family::ParamSpace::Open { lo, hi } => (lo, hi),
                crate::family::ParamSpace::Integers { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            };
            if below > lo && above < hi {
                out.push((below, above));
            }
        }
    }
    out
}

/// `k` values `2, 3, ..., 20` then roughly geometric up to `max_k`.
pub fn default_run_lengths(max_k: i64) -> Vec<i64> {
    let mut ks: Vec<i64> = (2..=20.min(max_k)).collect();
    let mut k = 20.0f64;
    while (k as i64) < max_k {
        k *= 1.25;
        ks.push((k as i64).min(max_k));
    }
    ks.dedup();
    ks
}

/// (p iv) on the given pairs.
pub fn check_growth_p4(bundle: &FamilyBundle, pairs: &[(f64, f64)], alpha: f64) -> ConditionReport {
    let fam = &bundle.family;
    let all: Vec<Witness> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            let k = bundle.net.count_between(a, b);
            // log of a non-positive number is −∞, so k <= 1 is vacuous.
            let bound = if k <= 1 { f64::NEG_INFINITY } else { (1.0 + alpha) * ((k - 1) as f64).ln() };
            let d = fam.divergence_ext(a, b).min(fam.divergence_ext(b, a));
            Witness { theta: a, s: b, x: k as f64, violation: bound - d }
        })
        .collect();
    ConditionReport::from_witnesses(Condition::P4, fam, INEQUALITY_TOL, all, 0)
}

/// `n` random monotone triples drawn over the family's moderate parameter range.
pub fn random_triples(family: &Family, n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 {
        let u: f64 = rng.random();
        match family {
            Family::Binomial { .. } => 0.005 + 0.99 * u,
            Family::NormalMean { .. } | Family::Cauchy => -20.0 + 40.0 * u,
            Family::DiscreteUniform => (u * 100.0).floor(),
            _ => (0.01f64.ln() + u * (100.0f64.ln() - 0.01f64.ln())).exp(),
        }
    };
    (0..n)
        .map(|_| {
            let mut t = [draw(), draw(), draw()];
            t.sort_by(f64::total_cmp);
            (t[0], t[1], t[2])
        })
        .collect()
}

/// (p i′) in both directions along each monotone triple.
pub fn check_reverse_triangle(bundle: &FamilyBundle, triples: &[(f64, f64, f64)]) -> ConditionReport {
    let d = |a, b| bundle.family.divergence_ext(a, b);
    let all: Vec<Witness> = triples
        .par_iter()
        .map(|&(a, b, c)| {
            let up = d(a, b) + d(b, c) - d(a, c);
            let down = d(c, b) + d(b, a) - d(c, a);
            Witness { theta: a, s: b, x: c, violation: up.max(down) }
        })
        .collect();
    ConditionReport::from_witnesses(Condition::P1Prime, &bundle.family, IDENTITY_TOL, all, 0)
}

/// Minimum divergence between consecutive net points, separately for
/// `d(s‖s')` (upward) and `d(s'‖s)` (downward), with `s < s'`.
pub fn step_divergences(bundle: &FamilyBundle, window: RangeInclusive<i64>) -> (f64, f64) {
    let idx: Vec<i64> = window.collect();
    idx.par_iter()
        .filter_map(|&k| Some((bundle.net.value(k)?, bundle.net.value(k + 1)?)))
        .map(|(s, t)| (bundle.family.divergence_ext(s, t), bundle.family.divergence_ext(t, s)))
        .reduce(|| (f64::INFINITY, f64::INFINITY), |a, b| (a.0.min(b.0), a.1.min(b.1)))
}

/// `min over consecutive pairs of min(d(s‖s'), d(s'‖s))`.
pub fn estimate_step_c(bundle: &FamilyBundle, window: RangeInclusive<i64>) -> f64 {
    let (up, down) = step_divergences(bundle, window);
    up.min(down)
}

/// (p ii′) against a declared `c`.
pub fn check_step_p2prime(bundle: &FamilyBundle, window: RangeInclusive<i64>, c: f64) -> ConditionReport {
    let idx: Vec<i64> = window.collect();
    let all: Vec<Witness> = idx
        .par_iter()
        .filter_map(|&k| Some((bundle.net.value(k)?, bundle.net.value(k + 1)?)))
        .map(|(s, t)| {
            let d = bundle.family.divergence_ext(s, t).min(bundle.family.divergence_ext(t, s));
            Witness { theta: s, s: t, x: d, violation: c - d }
        })
        .collect();
    let est = all.iter().map(|w| w.x).fold(f64::INFINITY, f64::min);
    ConditionReport::from_witnesses(Condition::P2Prime, &bundle.family, INEQUALITY_TOL, all, 0).with_constant(est)
}

/// Every condition relevant to the bundle's route, with default grids.
pub fn check_all(bundle: &FamilyBundle, grid: &GridSpec) -> Result<Vec<ConditionReport>> {
    let mut out = Vec::new();
    if bundle.family.uses_divergence_identity() {
        out.push(check_identity_p1(bundle, grid)?);
    }
    let window = default_cell_window(bundle);
    let samples = cell_samples(bundle, window.clone(), grid.points.max(2) * 10)?;
    out.push(check_sandwich_p3(bundle, &samples));
    match (bundle.lemma_route, bundle.factor_inputs) {
        (LemmaRoute::Lemma4, Some(FactorInputs::Growth { c_prime, alpha })) => {
            out.push(check_cell_bound_p2(bundle, &samples, c_prime));
            let starts: Vec<i64> = window.clone().collect();
            let max_k = bundle.net.len().map_or(1000, |l| l as i64);
            let pairs = growth_pairs(bundle, &starts, &default_run_lengths(max_k));
            out.push(check_growth_p4(bundle, &pairs, alpha));
        }
        (LemmaRoute::Lemma5, Some(FactorInputs::Step { c_prime, c })) => {
            out.push(check_cell_bound_p2(bundle, &samples, c_prime));
            out.push(check_reverse_triangle(bundle, &random_triples(&bundle.family, 1000, grid.seed)));
            out.push(check_step_p2prime(bundle, window, c));
        }
        _ => {}
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{CustomEstimator, Estimator};
    use crate::families::{make_bundle, FamilyConfig};
    use crate::family::FamilyId;
    use proptest::prelude::*;

    fn bundle(id: FamilyId) -> FamilyBundle {
        make_bundle(id, &FamilyConfig::default()).unwrap()
    }

    fn nbundle(id: FamilyId, n: u32) -> FamilyBundle {
        make_bundle(id, &FamilyConfig { n: Some(n), ..Default::default() }).unwrap()
    }

    #[test]
    fn identity_holds_for_divergence_families() {
        let grid = GridSpec { points: 50, seed: 0 };
        for b in [bundle(FamilyId::Poisson), nbundle(FamilyId::NormalMean, 4), nbundle(FamilyId::NormalVariance, 4), bundle(FamilyId::Cauchy), bundle(FamilyId::Binomial)] {
            let r = check_identity_p1(&b, &grid).unwrap();
            assert!(r.passing, "{}: {:?}", b.id(), r);
            assert!(r.max_violation <= 1e-10, "{}: {}", b.id(), r.max_violation);
            assert_eq!(r.checked + r.skipped, 50 * 50 * 50);
        }
    }

    #[test]
    fn identity_diagonal_is_exact() {
        let fam = Family::Poisson;
        let thetas = [2.5];
        let r = check_identity_with(&fam, |a, b| fam.divergence_ext(a, b), &thetas, &[0.0, 1.0, 7.0]);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn identity_not_applicable_to_uniforms() {
        let r = check_identity_p1(&bundle(FamilyId::DiscreteUniform), &GridSpec::default());
        assert!(matches!(r, Err(Error::NotApplicable(_))));
    }

    #[test]
    fn identity_detects_a_wrong_divergence() {
        let fam = Family::Cauchy;
        let (t, x) = identity_grid(&fam, 20);
        let kl = |a: f64, b: f64| (1.0 + 0.25 * (a - b) * (a - b)).ln();
        let r = check_identity_with(&fam, kl, &t, &x);
        assert!(!r.passing && !r.witnesses.is_empty());
    }

    #[test]
    fn cell_bounds_match_declared_constants() {
        let p = bundle(FamilyId::Poisson);
        let samples = cell_samples(&p, 1..=200, 50).unwrap();
        let c = estimate_c_prime(&p, &samples);
        assert!(c <= 1.0 && c > 0.5, "{c}");
        let nm = nbundle(FamilyId::NormalMean, 16);
        let c = estimate_c_prime(&nm, &cell_samples(&nm, -100..=100, 1000).unwrap());
        assert!((c - 0.125).abs() < 1e-9, "{c}");
        let ca = bundle(FamilyId::Cauchy);
        let c = estimate_c_prime(&ca, &cell_samples(&ca, -100..=100, 1000).unwrap());
        assert!(c <= 2f64.ln() && (c - 1.49f64.ln()).abs() < 1e-9, "{c}");
    }

    #[test]
    fn cell_bound_detects_small_declared_constant() {
        let p = bundle(FamilyId::Poisson);
        let r = check_cell_bound_p2(&p, &cell_samples(&p, 1..=50, 20).unwrap(), 0.5);
        assert!(!r.passing);
        assert!(r.witnesses.iter().all(|w| w.violation > 0.0));
    }

    #[test]
    fn sandwich_passes_for_rounding_and_fails_when_corrupted() {
        for id in FamilyId::ALL {
            let b = bundle(id);
            let samples = cell_samples(&b, default_cell_window(&b), 20).unwrap();
            assert!(check_sandwich_p3(&b, &samples).passing, "{id}");
        }
        let good = bundle(FamilyId::Poisson);
        let samples = cell_samples(&good, 1..=30, 20).unwrap();
        let bad = good.clone().with_estimator(Estimator::Custom(CustomEstimator::new("off_by_one", |net, g| {
            let r = net.round(g);
            net.point(r.index + 1).unwrap_or(r)
        })));
        let r = check_sandwich_p3(&bad, &samples);
        assert!(!r.passing && !r.witnesses.is_empty());
    }

    #[test]
    fn sandwich_on_single_cell_net_is_vacuous() {
        let b = nbundle(FamilyId::Binomial, 4);
        assert_eq!(b.net.len(), Some(1));
        let r = check_sandwich_p3(&b, &[0.0, 0.25, 0.5, 1.0]);
        assert!(r.passing);
    }

    #[test]
    fn growth_for_cauchy_and_poisson() {
        let c = bundle(FamilyId::Cauchy);
        let pairs = growth_pairs(&c, &(-20..=20).collect::<Vec<_>>(), &default_run_lengths(1000));
        assert!(pairs.iter().any(|&(a, b)| c.net.count_between(a, b) >= 1000));
        assert!(check_growth_p4(&c, &pairs, 1.0).passing);
        let vacuous = check_growth_p4(&c, &[(0.5, 1.5), (0.1, 0.9)], 1.0);
        assert_eq!(vacuous.max_violation, f64::NEG_INFINITY);
        let p = bundle(FamilyId::Poisson);
        let pairs = growth_pairs(&p, &(1..=30).collect::<Vec<_>>(), &default_run_lengths(100));
        let r = check_growth_p4(&p, &pairs, 10.0);
        assert!(!r.passing && !r.witnesses.is_empty());
    }

    #[test]
    fn reverse_triangle() {
        for id in [FamilyId::Poisson, FamilyId::NormalMean, FamilyId::NormalVariance, FamilyId::Binomial] {
            let b = bundle(id);
            let r = check_reverse_triangle(&b, &random_triples(&b.family, 1000, 11));
            assert!(r.passing, "{id}: {r:?}");
        }
        let p = bundle(FamilyId::Poisson);
        assert_eq!(check_reverse_triangle(&p, &[(3.0, 3.0, 3.0)]).max_violation, 0.0);
        let nm = bundle(FamilyId::NormalMean);
        let r = check_reverse_triangle(&nm, &[(-1.0, 0.5, 4.0)]);
        assert!(r.max_violation < 0.0);
        // Cauchy's d is not a Bregman divergence and fails far apart.
        assert!(!check_reverse_triangle(&bundle(FamilyId::Cauchy), &[(0.0, 5.0, 10.0)]).passing);
    }

    #[test]
    fn step_constants() {
        let p = bundle(FamilyId::Poisson);
        assert!(estimate_step_c(&p, 1..=10_000) >= 1.0 - 1e-7);
        for n in [4, 16, 64] {
            let nv = nbundle(FamilyId::NormalVariance, n);
            let (up, down) = step_divergences(&nv, -1000..=1000);
            assert!(up >= 1.0 / 32.0 && down >= 0.125, "n={n}: {up} {down}");
        }
        let nm = bundle(FamilyId::NormalMean);
        assert!((estimate_step_c(&nm, -100..=100) - 0.5).abs() < 1e-12);
        assert!(!check_step_p2prime(&p, 1..=100, 2.0).passing);
        assert!(check_step_p2prime(&p, 1..=100, 1.0).passing);
    }

    #[test]
    fn check_all_passes_for_every_bundle() {
        let grid = GridSpec { points: 30, seed: 1 };
        for id in FamilyId::ALL {
            let b = bundle(id);
            for r in check_all(&b, &grid).unwrap() {
                assert!(r.passing, "{id}: {r:?}");
            }
        }
    }

    #[test]
    fn checks_are_deterministic() {
        let b = bundle(FamilyId::Poisson);
        let a = check_all(&b, &GridSpec { points: 20, seed: 5 }).unwrap();
        let c = check_all(&b, &GridSpec { points: 20, seed: 5 }).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    }

    proptest! {
        #[test]
        fn estimates_are_monotone_under_refinement(split in 1usize..400, lo in 1i64..50, len in 2i64..50) {
            let b = bundle(FamilyId::Poisson);
            let samples = cell_samples(&b, 1..=40, 20).unwrap();
            let split = split.min(samples.len());
            prop_assert!(estimate_c_prime(&b, &samples) >= estimate_c_prime(&b, &samples[..split]));
            prop_assert!(estimate_step_c(&b, lo..=lo + len) <= estimate_step_c(&b, lo..=lo + len / 2));
        }
    }
}
