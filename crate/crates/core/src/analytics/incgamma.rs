//! Lower incomplete gamma function `γ(z, u) = ∫₀ᵘ e^{-t} t^{z-1} dt`.
//!
//! The power series is used for `u <= z + 1`, where it converges quickly and
//! every term is positive. Above that the upper function `Γ(z, u)` is
//! evaluated by a continued fraction (modified Lentz) and subtracted from
//! `Γ(z)`; in that region `γ(z, u) >= Γ(z)/2`, so the subtraction is benign.

use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, require_positive, PtwError, Result};

const MAX_ITER: usize = 1_000_000;
const TINY: f64 = 1e-300;

/// `ln γ(z, u)`. Returns `-inf` for `u = 0`.
pub fn ln_lower_incomplete_gamma(z: f64, u: f64) -> Result<f64> {
    let z = require_positive("z", z)?;
    if !(u >= 0.0) || u.is_nan() {
        return Err(invalid("u", format!("must be >= 0, got {u}")));
    }
    if u == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if u.is_infinite() {
        return Ok(ln_gamma(z));
    }

    let log_prefactor = -u + z * u.ln();
    if u <= z + 1.0 {
        Ok(log_prefactor + series_sum(z, u)?.ln())
    } else {
        let ln_gamma_z = ln_gamma(z);
        let upper_ratio = (log_prefactor - ln_gamma_z).exp() * continued_fraction(z, u)?;
        Ok(ln_gamma_z + (-upper_ratio).ln_1p())
    }
}

/// `γ(z, u)`.
pub fn lower_incomplete_gamma(z: f64, u: f64) -> Result<f64> {
    ln_lower_incomplete_gamma(z, u).map(f64::exp)
}

// Σ_{n>=0} u^n / (z (z+1) ... (z+n))
fn series_sum(z: f64, u: f64) -> Result<f64> {
    let mut term = 1.0 / z;
    let mut sum = term;
    let mut denom = z;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= u / denom;
        sum += term;
        if term < sum * f64::EPSILON * 0.25 {
            return Ok(sum);
        }
    }
    Err(PtwError::NonConvergence {
        estimate: term / sum,
        target: f64::EPSILON,
    })
}

// Continued fraction for e^{u} u^{-z} Γ(z, u):
// 1/(u+1-z- 1(1-z)/(u+3-z- 2(2-z)/(u+5-z- ...)))
fn continued_fraction(z: f64, u: f64) -> Result<f64> {
    let mut b = u + 1.0 - z;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - z);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < f64::EPSILON * 0.5 {
            return Ok(h);
        }
    }
    Err(PtwError::NonConvergence {
        estimate: f64::NAN,
        target: f64::EPSILON,
    })
}
