//! Countable parameter grids ("nets") with predecessor/successor/rounding access.

use serde::{Deserialize, Serialize};

use crate::numeric::ddouble::one_plus_inv_sqrt_pow;

/// An element of a net together with its position in the net's ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetPoint {
    pub index: i64,
    pub value: f64,
}

/// The three neighbours of a parameter value inside a net.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbors {
    pub pred: Option<NetPoint>,
    pub round: NetPoint,
    pub succ: Option<NetPoint>,
}

/// Ordered, at most countable parameter grid.
///
/// `value(k)` is strictly increasing in the index `k`. Indices outside
/// [`Net::index_bounds`] do not exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Net {
    /// `{k : k in Z, k >= min}`.
    IntegerLattice { min: Option<i64> },
    /// `(alpha / sqrt(n)) Z`.
    ScaledLattice { alpha: f64, n: u32 },
    /// `{2^k : k >= 0}`.
    DyadicInt,
    /// `{2^k : k in Z}`.
    DyadicReal,
    /// `{t^2 : t >= 1}`.
    Squares,
    /// `{(1 + 1/sqrt(n))^k : k in Z}`.
    Geometric { n: u32 },
    /// `{sin^2(pi t / (2 m)) : 0 < t < m}` with `m = floor(sqrt(n))`.
    BinomialSine { n: u32 },
}

// Exponents beyond this overflow or underflow the dyadic and geometric nets.
const MAX_EXPONENT: i64 = 1000;
const GEOMETRIC_MAX_LOG: f64 = 700.0;

impl Net {
    pub fn integers() -> Self {
        Net::IntegerLattice { min: None }
    }

    pub fn name(&self) -> String {
        match self {
            Net::IntegerLattice { min: None } => "Z".into(),
            Net::IntegerLattice { min: Some(m) } => format!("Z>={m}"),
            Net::ScaledLattice { alpha, n } => format!("({alpha}/sqrt({n}))Z"),
            Net::DyadicInt => "2^N".into(),
            Net::DyadicReal => "2^Z".into(),
            Net::Squares => "squares".into(),
            Net::Geometric { n } => format!("(1+1/sqrt({n}))^Z"),
            Net::BinomialSine { n } => format!("sin^2 net (n={n})"),
        }
    }

    /// Spacing of a lattice net, if it is one.
    pub fn spacing(&self) -> Option<f64> {
        match *self {
            Net::IntegerLattice { .. } => Some(1.0),
            Net::ScaledLattice { alpha, n } => Some(alpha / (n as f64).sqrt()),
            _ => None,
        }
    }

    /// Whether the elements are exactly the integers `Z`.
    pub fn is_unit_integer_lattice(&self) -> bool {
        match *self {
            Net::IntegerLattice { min } => min.is_none(),
            Net::ScaledLattice { alpha, n } => alpha / (n as f64).sqrt() == 1.0,
            _ => false,
        }
    }

    // Keeps every geometric net value and its cell within the normal f64 range.
    fn geometric_max_exponent(n: u32) -> i64 {
        (GEOMETRIC_MAX_LOG / (1.0 / (n as f64).sqrt()).ln_1p()).floor() as i64
    }

    fn sine_m(n: u32) -> i64 {
        ((n as f64).sqrt().floor() as i64).max(0)
    }

    pub fn index_bounds(&self) -> (Option<i64>, Option<i64>) {
        match *self {
            Net::IntegerLattice { min } => (min, None),
            Net::ScaledLattice { .. } => (None, None),
            Net::DyadicInt => (Some(0), Some(MAX_EXPONENT)),
            Net::DyadicReal => (Some(-MAX_EXPONENT), Some(MAX_EXPONENT)),
            Net::Squares => (Some(1), None),
            Net::Geometric { n } => {
                let k = Self::geometric_max_exponent(n);
                (Some(-k), Some(k))
            }
            Net::BinomialSine { n } => (Some(1), Some(Self::sine_m(n) - 1)),
        }
    }

    pub fn contains_index(&self, k: i64) -> bool {
        let (lo, hi) = self.index_bounds();
        lo.is_none_or(|l| k >= l) && hi.is_none_or(|h| k <= h)
    }

    /// Number of elements, when finite.
    pub fn len(&self) -> Option<u64> {
        match self.index_bounds() {
            (Some(lo), Some(hi)) => Some((hi - lo + 1).max(0) as u64),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn value(&self, k: i64) -> Option<f64> {
        if !self.contains_index(k) {
            return None;
        }
        Some(match *self {
            Net::IntegerLattice { .. } => k as f64,
            Net::ScaledLattice { alpha, n } => k as f64 * alpha / (n as f64).sqrt(),
            Net::DyadicInt | Net::DyadicReal => 2f64.powi(k as i32),
            Net::Squares => (k * k) as f64,
            Net::Geometric { n } => one_plus_inv_sqrt_pow(n, k),
            Net::BinomialSine { n } => {
                let m = Self::sine_m(n) as f64;
                let s = (std::f64::consts::PI * k as f64 / (2.0 * m)).sin();
                s * s
            }
        })
    }

    pub fn point(&self, k: i64) -> Option<NetPoint> {
        self.value(k).map(|value| NetPoint { index: k, value })
    }

    fn min_index(&self) -> Option<i64> {
        self.index_bounds().0
    }

    fn max_index(&self) -> Option<i64> {
        self.index_bounds().1
    }

    fn index_guess(&self, theta: f64) -> f64 {
        match *self {
            Net::IntegerLattice { .. } => theta.floor(),
            Net::ScaledLattice { alpha, n } => (theta * (n as f64).sqrt() / alpha).floor(),
            Net::DyadicInt | Net::DyadicReal => theta.log2().floor(),
            Net::Squares => theta.max(0.0).sqrt().floor(),
            Net::Geometric { n } => (theta.ln() / (1.0 + 1.0 / (n as f64).sqrt()).ln()).floor(),
            Net::BinomialSine { n } => {
                let m = Self::sine_m(n) as f64;
                (2.0 * m * theta.clamp(0.0, 1.0).sqrt().asin() / std::f64::consts::PI).floor()
            }
        }
    }

    /// Largest index `k` with `value(k) <= theta`, or `None` when `theta` is
    /// below every element.
    pub fn floor_index(&self, theta: f64) -> Option<i64> {
        if theta.is_nan() {
            return None;
        }
        if let Some(lo) = self.min_index() {
            if theta < self.value(lo)? {
                return None;
            }
        }
        if let Some(hi) = self.max_index() {
            if theta >= self.value(hi)? {
                return Some(hi);
            }
        }
        let guess = self.index_guess(theta);
        let mut k = if guess.is_finite() {
            guess.clamp(-(1i64 << 52) as f64, (1i64 << 52) as f64) as i64
        } else if guess > 0.0 {
            return self.max_index();
        } else {
            return None;
        };
        if let Some(lo) = self.min_index() {
            k = k.max(lo);
        }
        if let Some(hi) = self.max_index() {
            k = k.min(hi);
        }
        while let Some(v) = self.value(k + 1) {
            if v <= theta {
                k += 1;
            } else {
                break;
            }
        }
        loop {
            match self.value(k) {
                Some(v) if v > theta => k -= 1,
                Some(_) => return Some(k),
                None => return None,
            }
        }
    }

    /// Index of `theta` if it is an element of the net.
    pub fn index_of(&self, theta: f64) -> Option<i64> {
        let k = self.floor_index(theta)?;
        (self.value(k)? == theta).then_some(k)
    }

    /// `max{s in S : s < theta}`.
    pub fn pred(&self, theta: f64) -> Option<NetPoint> {
        let k = self.floor_index(theta)?;
        let k = if self.value(k)? == theta { k - 1 } else { k };
        self.point(k)
    }

    /// `min{s in S : theta < s}`.
    pub fn succ(&self, theta: f64) -> Option<NetPoint> {
        match self.floor_index(theta) {
            Some(k) => self.point(k + 1),
            None => self.min_index().and_then(|lo| self.point(lo)),
        }
    }

    /// Nearest element; exact ties go to the successor.
    pub fn round(&self, theta: f64) -> NetPoint {
        if let Some(k) = self.index_of(theta) {
            return self.point(k).expect("index_of returns a valid index");
        }
        match (self.pred(theta), self.succ(theta)) {
            (Some(p), Some(s)) => {
                // Compare with the midpoint exactly as `Estimator::cell` computes it.
                if theta < 0.5 * (p.value + s.value) {
                    p
                } else {
                    s
                }
            }
            (Some(p), None) => p,
            (None, Some(s)) => s,
            (None, None) => panic!("round on an empty net"),
        }
    }

    pub fn neighbors(&self, theta: f64) -> Neighbors {
        Neighbors { pred: self.pred(theta), round: self.round(theta), succ: self.succ(theta) }
    }

    /// `|S ∩ (a, b)|`.
    pub fn count_between(&self, a: f64, b: f64) -> u64 {
        if !(b > a) {
            return 0;
        }
        let first = match self.floor_index(a) {
            Some(k) => k + 1,
            None => match self.min_index() {
                Some(lo) => lo,
                None => return u64::MAX,
            },
        };
        let last = match self.pred(b) {
            Some(p) => p.index,
            None => return 0,
        };
        if last < first {
            0
        } else {
            (last - first + 1) as u64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(p: Option<NetPoint>) -> Option<f64> {
        p.map(|p| p.value)
    }

    #[test]
    fn dyadic_neighbors() {
        let n = Net::DyadicInt.neighbors(5.0);
        assert_eq!((v(n.pred), n.round.value, v(n.succ)), (Some(4.0), 4.0, Some(8.0)));
    }

    #[test]
    fn squares_neighbors() {
        let n = Net::Squares.neighbors(10.0);
        assert_eq!((v(n.pred), n.round.value, v(n.succ)), (Some(9.0), 9.0, Some(16.0)));
    }

    #[test]
    fn scaled_lattice_neighbors() {
        let n = Net::ScaledLattice { alpha: 1.0, n: 4 }.neighbors(0.3);
        assert_eq!((v(n.pred), n.round.value, v(n.succ)), (Some(0.0), 0.5, Some(0.5)));
    }

    #[test]
    fn ties_round_up() {
        assert_eq!(Net::integers().round(2.5).value, 3.0);
        assert_eq!(Net::integers().round(-2.5).value, -2.0);
        assert_eq!(Net::DyadicInt.round(6.0).value, 8.0);
    }

    #[test]
    fn extremes_have_no_neighbors() {
        let n = Net::DyadicInt.neighbors(0.0);
        assert_eq!(n.pred, None);
        assert_eq!(n.round.value, 1.0);
        assert_eq!(v(n.succ), Some(1.0));
        assert_eq!(Net::DyadicInt.pred(1.0), None);
        let b = Net::BinomialSine { n: 64 };
        assert_eq!(b.succ(0.99), None);
        assert_eq!(b.len(), Some(7));
        assert_eq!(Net::BinomialSine { n: 4 }.len(), Some(1));
    }

    #[test]
    fn member_points_are_strict_neighbours() {
        let n = Net::Squares.neighbors(16.0);
        assert_eq!((v(n.pred), n.round.value, v(n.succ)), (Some(9.0), 16.0, Some(25.0)));
    }

    #[test]
    fn counting() {
        assert_eq!(Net::integers().count_between(0.5, 3.5), 3);
        assert_eq!(Net::integers().count_between(0.0, 3.0), 2);
        assert_eq!(Net::Squares.count_between(0.0, 10.0), 3);
        assert_eq!(Net::integers().count_between(1.0, 1.0), 0);
    }

    #[test]
    fn geometric_values() {
        let g = Net::Geometric { n: 4 };
        assert_eq!(g.value(2), Some(2.25));
        assert_eq!(g.floor_index(2.25), Some(2));
        assert_eq!(g.floor_index(2.2499), Some(1));
    }

    fn nets() -> Vec<Net> {
        vec![
            Net::integers(),
            Net::IntegerLattice { min: Some(0) },
            Net::ScaledLattice { alpha: 0.7, n: 9 },
            Net::DyadicInt,
            Net::DyadicReal,
            Net::Squares,
            Net::Geometric { n: 16 },
            Net::BinomialSine { n: 100 },
        ]
    }

    proptest! {
        #[test]
        fn bracket_and_round_invariants(theta in -50.0f64..5000.0, which in 0usize..8) {
            let net = &nets()[which];
            let theta = if matches!(net, Net::BinomialSine { .. }) { theta.abs() / 5000.0 } else { theta };
            let nb = net.neighbors(theta);
            if let Some(p) = nb.pred { prop_assert!(p.value < theta); }
            if let Some(s) = nb.succ { prop_assert!(theta < s.value); }
            if let (Some(p), Some(s)) = (nb.pred, nb.succ) {
                let best = (theta - p.value).min(s.value - theta);
                prop_assert!((nb.round.value - theta).abs() <= best);
            }
            if let Some(k) = net.floor_index(theta) {
                prop_assert!(net.value(k).unwrap() <= theta);
                if let Some(next) = net.value(k + 1) { prop_assert!(next > theta); }
            }
        }

        #[test]
        fn values_strictly_increase(k in -300i64..300, which in 0usize..8) {
            let net = &nets()[which];
            if let (Some(a), Some(b)) = (net.value(k), net.value(k + 1)) {
                prop_assert!(a < b);
            }
        }
    }
}
