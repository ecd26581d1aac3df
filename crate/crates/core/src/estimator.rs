//! Estimators: maps from the reduced statistic `g(x)` to a net point, and the
//! cells `ŝ⁻¹(s)` they induce.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::net::{Net, NetPoint};

/// Largest admissible half-width of the tie neighbourhoods of `r^ε`.
pub const MAX_EPSILON: f64 = 0.2;

/// How `r^ε` resolves the ε-neighbourhood of the half-integer `n + 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TieRule {
    Down,
    #[default]
    Up,
    /// Towards whichever of `n`, `n + 1` is even.
    Even,
    Odd,
    /// Pseudo-random but fixed choice per half-integer.
    Hashed { seed: u64 },
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl TieRule {
    /// Whether the neighbourhood of `n + 1/2` is sent to `n + 1`.
    pub fn goes_up(&self, n: i64) -> bool {
        match *self {
            TieRule::Down => false,
            TieRule::Up => true,
            TieRule::Even => n.rem_euclid(2) == 1,
            TieRule::Odd => n.rem_euclid(2) == 0,
            TieRule::Hashed { seed } => splitmix64(seed ^ (n as u64)) & 1 == 1,
        }
    }
}

/// A half-open or closed interval of the reduced statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Cell {
    pub fn contains(&self, g: f64) -> bool {
        let above = if self.lo_closed { g >= self.lo } else { g > self.lo };
        let below = if self.hi_closed { g <= self.hi } else { g < self.hi };
        above && below
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

type EstimatorFn = dyn Fn(&Net, f64) -> NetPoint + Send + Sync;

/// User-supplied estimator. It has no cell description, so only the
/// condition checks and Monte Carlo expectations can use it.
#[derive(Clone)]
pub struct CustomEstimator {
    pub name: String,
    map: Arc<EstimatorFn>,
}

impl CustomEstimator {
    pub fn new(name: impl Into<String>, map: impl Fn(&Net, f64) -> NetPoint + Send + Sync + 'static) -> Self {
        Self { name: name.into(), map: Arc::new(map) }
    }
}

impl fmt::Debug for CustomEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomEstimator({})", self.name)
    }
}

/// The statistic `ŝ`, applied to the reduced statistic `g(x)`.
///
/// Families supply the reduction (sample mean, `‖x‖²/n`, `x/n`, ...), so the
/// "mean then round" and "norm² then round" estimators are [`Estimator::RoundToNet`]
/// composed with the family statistic.
#[derive(Debug, Clone)]
pub enum Estimator {
    RoundToNet,
    /// Smallest net element `>= g` (`2^⌈log₂ g⌉` on dyadic nets).
    CeilToNet,
    /// Integer rounding, with each ε-neighbourhood of a half-integer resolved by `ties`.
    REpsilon { epsilon: f64, ties: TieRule },
    Custom(CustomEstimator),
}

impl Estimator {
    pub fn r_epsilon(epsilon: f64, ties: TieRule) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= MAX_EPSILON) {
            return Err(domain(format!("r^eps requires 0 < eps <= 1/5, got {epsilon}")));
        }
        Ok(Estimator::REpsilon { epsilon, ties })
    }

    pub fn name(&self) -> String {
        match self {
            Estimator::RoundToNet => "round_to_net".into(),
            Estimator::CeilToNet => "ceil_to_net".into(),
            Estimator::REpsilon { epsilon, ties } => format!("r_epsilon({epsilon}, {ties:?})"),
            Estimator::Custom(c) => c.name.clone(),
        }
    }

    pub fn apply(&self, net: &Net, g: f64) -> NetPoint {
        match self {
            Estimator::RoundToNet => net.round(g),
            Estimator::CeilToNet => match net.index_of(g) {
                Some(k) => net.point(k).expect("valid index"),
                None => net.succ(g).unwrap_or_else(|| net.round(g)),
            },
            Estimator::REpsilon { epsilon, ties } => {
                let n = g.floor();
                let mid = n + 0.5;
                // Compare against the same boundary expressions `cell` uses.
                let target = if g > mid - epsilon && g < mid + epsilon {
                    if ties.goes_up(n as i64) {
                        n + 1.0
                    } else {
                        n
                    }
                } else if g < mid {
                    n
                } else {
                    n + 1.0
                };
                match net.index_of(target) {
                    Some(k) => net.point(k).expect("valid index"),
                    None => net.round(target),
                }
            }
            Estimator::Custom(c) => (c.map)(net, g),
        }
    }

    /// The cell `ŝ⁻¹(s)` in statistic space, when the estimator has one in closed form.
    pub fn cell(&self, net: &Net, s: NetPoint) -> Option<Cell> {
        match self {
            Estimator::RoundToNet => {
                let lo = net.point(s.index - 1).map_or(f64::NEG_INFINITY, |p| 0.5 * (p.value + s.value));
                let hi = net.point(s.index + 1).map_or(f64::INFINITY, |p| 0.5 * (s.value + p.value));
                Some(Cell { lo, hi, lo_closed: true, hi_closed: false })
            }
            Estimator::CeilToNet => Some(match net.point(s.index - 1) {
                Some(p) => Cell { lo: p.value, hi: s.value, lo_closed: false, hi_closed: true },
                None => Cell { lo: f64::NEG_INFINITY, hi: s.value, lo_closed: true, hi_closed: true },
            }),
            Estimator::REpsilon { epsilon, ties } => {
                let n = s.value;
                let k = n as i64;
                let below_exists = net.point(s.index - 1).is_some();
                let above_exists = net.point(s.index + 1).is_some();
                let (lo, lo_closed) = if !below_exists {
                    (f64::NEG_INFINITY, true)
                } else if ties.goes_up(k - 1) {
                    ((n - 0.5) - epsilon, false)
                } else {
                    ((n - 0.5) + epsilon, true)
                };
                let (hi, hi_closed) = if !above_exists {
                    (f64::INFINITY, false)
                } else if ties.goes_up(k) {
                    ((n + 0.5) - epsilon, true)
                } else {
                    ((n + 0.5) + epsilon, false)
                };
                Some(Cell { lo, hi, lo_closed, hi_closed })
            }
            Estimator::Custom(_) => None,
        }
    }

    /// Upper bound on `|g - s|` over the cell of `s`, for lattice nets.
    pub fn max_reach(&self, net: &Net) -> Option<f64> {
        match self {
            Estimator::RoundToNet => net.spacing().map(|h| 0.5 * h),
            Estimator::REpsilon { epsilon, .. } => Some(0.5 + epsilon),
            _ => None,
        }
    }
}
