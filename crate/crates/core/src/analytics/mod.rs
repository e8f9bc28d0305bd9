//! Closed-form and quadrature evaluation of the walker's analytic laws.
//!
//! The central quantity is the large-time diffusion coefficient
//!
//! ```text
//! D(alpha) = ∫₀^∞ exp(-alpha² (s - 1 + e^{-s})) ds
//!          = (e / alpha²)^{alpha²} γ(alpha², alpha²)
//!          = e^{alpha²} Σ (-1)^n alpha^{2n} / (n! (n + alpha²))
//! ```
//!
//! which is available through all three routes so they can cross-check one
//! another. `Var{x(t)} ~ 2 D t` as `t -> ∞`.

mod incgamma;
pub mod quadrature;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub use incgamma::{ln_lower_incomplete_gamma, lower_incomplete_gamma};
use quadrature::{integrate, Tolerance};

use crate::error::{invalid, require_nonnegative, require_positive, PtwError, Result};

/// Below this `t` the shape function `t - 1 + e^{-t}` uses a four-term Taylor
/// polynomial.
pub const TAYLOR_SWITCH: f64 = 1e-4;

/// Largest `alpha²` for which the alternating series is summed directly.
/// Beyond it the terms exceed the result by more than ~1e5 and the sum is
/// delegated to the closed form.
pub const SERIES_MAX_ALPHA_SQ: f64 = 6.0;

const QUAD_REL_TOL: f64 = 1e-12;
const TAIL_REL_TOL: f64 = 1e-13;
const SERIES_REL_STOP: f64 = 1e-15;
const VARIANCE_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Quadrature,
    ClosedForm,
    Series,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Quadrature, Method::ClosedForm, Method::Series];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::ClosedForm => "closed_form",
            Method::Series => "series",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = PtwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" | "quad" => Ok(Method::Quadrature),
            "closed_form" | "closed-form" | "closed" => Ok(Method::ClosedForm),
            "series" => Ok(Method::Series),
            other => Err(invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Value of the diffusion coefficient together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionResult {
    pub value: f64,
    /// Route actually used. A series request above [`SERIES_MAX_ALPHA_SQ`]
    /// reports `ClosedForm`.
    pub method: Method,
    /// Absolute error bound of the evaluation.
    pub est_error: f64,
}

/// `t - 1 + e^{-t}`, accurate to a few ulps for every `t >= 0`.
pub(crate) fn turning_shape(t: f64) -> f64 {
    if t < TAYLOR_SWITCH {
        turning_shape_taylor(t)
    } else if t < 1.0 {
        turning_shape_series(t)
    } else {
        t - 1.0 + (-t).exp()
    }
}

fn turning_shape_taylor(t: f64) -> f64 {
    let t2 = t * t;
    t2 * (0.5 - t / 6.0 + t2 / 24.0 - t2 * t / 120.0)
}

// Σ_{k>=2} (-t)^k / k!, summed until the terms drop below an ulp.
fn turning_shape_series(t: f64) -> f64 {
    let mut term = 0.5 * t * t;
    let mut sum = term;
    let mut k = 2.0;
    while term.abs() > sum * f64::EPSILON * 0.1 {
        k += 1.0;
        term *= -t / k;
        sum += term;
    }
    sum
}

/// Variance of the heading change over a window of length `t`:
/// `beta_t² = 2 alpha² (t - 1 + e^{-t})`.
pub fn theta_variance(t: f64, alpha: f64) -> Result<f64> {
    let t = require_nonnegative("t", t)?;
    let alpha = require_positive("alpha", alpha)?;
    Ok(2.0 * alpha * alpha * turning_shape(t))
}

/// `E[cos Z] = exp(-sigma²/2)` for `Z ~ N(0, sigma²)`.
pub fn gaussian_cos_expectation(sigma: f64) -> Result<f64> {
    let sigma = require_nonnegative("sigma", sigma)?;
    Ok((-0.5 * sigma * sigma).exp())
}

/// Stationary curvature density, the normal law `N(0, alpha²)`.
pub fn equilibrium_m(kappa: f64, alpha: f64) -> Result<f64> {
    let alpha = require_positive("alpha", alpha)?;
    Ok((-kappa * kappa / (2.0 * alpha * alpha)).exp() / ((2.0 * PI).sqrt() * alpha))
}

/// Exact mean squared displacement
/// `Var{x(t)} = 2 ∫₀ᵗ (t - s) exp(-alpha² (s - 1 + e^{-s})) ds`.
pub fn variance_law(t: f64, alpha: f64) -> Result<f64> {
    let t = require_nonnegative("t", t)?;
    let alpha = require_positive("alpha", alpha)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let a2 = alpha * alpha;
    let r = integrate(
        |s| (t - s) * (-a2 * turning_shape(s)).exp(),
        0.0,
        t,
        Tolerance::relative(VARIANCE_REL_TOL),
    )?;
    Ok(2.0 * r.value)
}

/// The large-time diffusion coefficient by the requested route.
pub fn diffusion_coefficient(alpha: f64, method: Method) -> Result<DiffusionResult> {
    let alpha = require_positive("alpha", alpha)?;
    match method {
        Method::Quadrature => diffusion_quadrature(alpha),
        Method::ClosedForm => diffusion_closed_form(alpha),
        Method::Series => diffusion_series(alpha),
    }
}

fn diffusion_quadrature(alpha: f64) -> Result<DiffusionResult> {
    let a2 = alpha * alpha;
    // Since s - 1 + e^{-s} <= s²/2, D >= sqrt(pi/2)/alpha. Using that lower
    // bound in place of D keeps the truncation independent of other routes.
    let lower_bound = (PI / 2.0).sqrt() / alpha;
    // Tail beyond S is at most e^{alpha²(1 - S)} / alpha².
    let cut = 1.0 + (1.0 / (TAIL_REL_TOL * lower_bound * a2)).ln().max(0.0) / a2;
    let tail = (a2 * (1.0 - cut)).exp() / a2;

    let r = integrate(
        |s| (-a2 * turning_shape(s)).exp(),
        0.0,
        cut,
        Tolerance::relative(QUAD_REL_TOL),
    )?;
    Ok(DiffusionResult {
        value: r.value + 0.5 * tail,
        method: Method::Quadrature,
        est_error: r.abs_error + 0.5 * tail,
    })
}

fn diffusion_closed_form(alpha: f64) -> Result<DiffusionResult> {
    let a2 = alpha * alpha;
    let prefactor = a2 * (1.0 - a2.ln());
    let ln_gamma_part = ln_lower_incomplete_gamma(a2, a2)?;
    let ln_value = prefactor + ln_gamma_part;
    let value = ln_value.exp();
    // exp amplifies the absolute error of its argument.
    let est_error =
        value * 8.0 * f64::EPSILON * (1.0 + prefactor.abs() + ln_gamma_part.abs() + ln_value.abs());
    Ok(DiffusionResult {
        value,
        method: Method::ClosedForm,
        est_error,
    })
}

fn diffusion_series(alpha: f64) -> Result<DiffusionResult> {
    let a2 = alpha * alpha;
    if a2 > SERIES_MAX_ALPHA_SQ {
        return diffusion_closed_form(alpha);
    }
    // power = (-alpha²)^n / n!
    let mut power = 1.0f64;
    let mut sum = 1.0 / a2;
    let mut max_term = sum.abs();
    let mut n = 0u32;
    loop {
        n += 1;
        power *= -a2 / n as f64;
        let term = power / (n as f64 + a2);
        sum += term;
        max_term = max_term.max(term.abs());
        if term.abs() < SERIES_REL_STOP * sum.abs() {
            let scale = a2.exp();
            let roundoff = max_term * f64::EPSILON * n as f64;
            return Ok(DiffusionResult {
                value: scale * sum,
                method: Method::Series,
                est_error: scale * (roundoff + term.abs()),
            });
        }
        if n > 10_000 {
            return Err(PtwError::NonConvergence {
                estimate: term.abs() / sum.abs(),
                target: SERIES_REL_STOP,
            });
        }
    }
}

/// Scalar diffusivity and elapsed time of the limiting heat equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernelParams {
    pub d_scalar: f64,
    pub t: f64,
}

impl HeatKernelParams {
    pub fn new(d_scalar: f64, t: f64) -> Result<Self> {
        Ok(Self {
            d_scalar: require_positive("d_scalar", d_scalar)?,
            t: require_positive("t", t)?,
        })
    }

    /// Kernel of the diffusion limit for coefficient `dcoef`, whose
    /// diffusivity tensor is `(dcoef / 2) Id`.
    pub fn from_diffusion(dcoef: f64, t: f64) -> Result<Self> {
        Self::new(0.5 * dcoef, t)
    }

    /// Standard deviation of each coordinate, `sqrt(2 d t)`.
    pub fn axis_std(&self) -> f64 {
        (2.0 * self.d_scalar * self.t).sqrt()
    }

    /// `E|x|² = 4 d t`.
    pub fn second_moment(&self) -> f64 {
        4.0 * self.d_scalar * self.t
    }
}

/// Fundamental solution of `∂_t n = d Δn` in the plane, started from a unit
/// point mass at the origin.
pub fn heat_kernel_density(x1: f64, x2: f64, hk: &HeatKernelParams) -> f64 {
    let four_dt = 4.0 * hk.d_scalar * hk.t;
    (-(x1 * x1 + x2 * x2) / four_dt).exp() / (PI * four_dt)
}
