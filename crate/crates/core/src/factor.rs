//! Normalizing factors and the p-to-e calibrator.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Constants feeding one of the two normalizing-factor formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum FactorInputs {
    /// Cell bound `c'` and growth exponent `alpha`.
    Growth { c_prime: f64, alpha: f64 },
    /// Cell bound `c'` and lower bound `c` on divergences between consecutive net points.
    Step { c_prime: f64, c: f64 },
}

impl FactorInputs {
    pub fn c_prime(&self) -> f64 {
        match *self {
            FactorInputs::Growth { c_prime, .. } | FactorInputs::Step { c_prime, .. } => c_prime,
        }
    }

    pub fn factor(&self) -> Result<f64> {
        match *self {
            FactorInputs::Growth { c_prime, alpha } => factor_lemma4(c_prime, alpha),
            FactorInputs::Step { c_prime, c } => factor_lemma5(c_prime, c),
        }
    }
}

fn check_c_prime(c_prime: f64) -> Result<()> {
    if c_prime >= 0.0 && c_prime.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("c' must be finite and >= 0, got {c_prime}")))
    }
}

/// `exp(c')(7 + 2/alpha)`.
pub fn factor_lemma4(c_prime: f64, alpha: f64) -> Result<f64> {
    check_c_prime(c_prime)?;
    if !(alpha > 0.0) {
        return Err(domain(format!("alpha must be > 0, got {alpha}")));
    }
    Ok(c_prime.exp() * (7.0 + 2.0 / alpha))
}

/// `exp(c')(5 + 2/(e^c - 1))`.
pub fn factor_lemma5(c_prime: f64, c: f64) -> Result<f64> {
    check_c_prime(c_prime)?;
    if !(c > 0.0) {
        return Err(domain(format!("c must be > 0, got {c}")));
    }
    Ok(c_prime.exp() * (5.0 + 2.0 / c.exp_m1()))
}

/// `kappa * p^(kappa - 1)`, an e-variable whenever `p` is a p-variable.
pub fn calibrate_p_to_e(kappa: f64, p: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(domain(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(kappa * p.powf(kappa - 1.0))
}
