//! Minimal double-double arithmetic, used to evaluate geometric net points
//! `r^k` without accumulating rounding error across many multiplications.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Self { hi, lo }
    }

    pub fn mul(self, other: Self) -> Self {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + (self.hi * other.lo + self.lo * other.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    pub fn div(self, other: Self) -> Self {
        let q1 = self.hi / other.hi;
        let r = self.add(other.mul(Self::from_f64(-q1)));
        let q2 = r.hi / other.hi;
        let r = r.add(other.mul(Self::from_f64(-q2)));
        let q3 = r.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }.add(Self::from_f64(q3))
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(0.0);
        }
        let x = self.hi.sqrt();
        let xx = Self::from_f64(x).mul(Self::from_f64(x));
        let correction = self.add(Self { hi: -xx.hi, lo: -xx.lo }).hi / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, correction);
        Self { hi, lo }
    }

    /// Integer power by repeated squaring; negative exponents invert at the end.
    pub fn powi(self, k: i64) -> Self {
        let mut base = self;
        let mut e = k.unsigned_abs();
        let mut acc = Self::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        if k < 0 {
            Self::ONE.div(acc)
        } else {
            acc
        }
    }
}

/// `(1 + 1/sqrt(n))^k` rounded once to `f64`.
pub fn one_plus_inv_sqrt_pow(n: u32, k: i64) -> f64 {
    let root = DoubleDouble::from_f64(n as f64).sqrt();
    let ratio = DoubleDouble::ONE.add(DoubleDouble::ONE.div(root));
    ratio.powi(k).to_f64()
}
