//! Model parameters in dimensional and dimensionless form.
//!
//! Everything downstream works in scaled units: time in multiples of the
//! relaxation time `1/a` and length in multiples of `c/a`. In those units the
//! only remaining parameter is the noise strength `alpha`, with
//! `alpha^2 = b^2 c^2 / (2 a^3)`.

use crate::error::{require_positive, Result};

/// Parameters of the walker in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalParams {
    /// Curvature relaxation frequency (1/time).
    pub a: f64,
    /// Curvature noise intensity (1/(length * sqrt(time))).
    pub b: f64,
    /// Swimming speed (length/time).
    pub c: f64,
}

impl DimensionalParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        Ok(Self {
            a: require_positive("a", a)?,
            b: require_positive("b", b)?,
            c: require_positive("c", c)?,
        })
    }

    /// Time unit `t0 = 1/a`.
    pub fn time_unit(&self) -> f64 {
        1.0 / self.a
    }

    /// Length unit `x0 = c/a`.
    pub fn length_unit(&self) -> f64 {
        self.c / self.a
    }
}

/// The single dimensionless parameter of the scaled model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams {
    alpha: f64,
    alpha_sq: f64,
}

impl ScaledParams {
    pub fn new(alpha: f64) -> Result<Self> {
        let alpha = require_positive("alpha", alpha)?;
        Ok(Self {
            alpha,
            alpha_sq: alpha * alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha_sq
    }
}

/// Scaled parameters together with the unit factors used to map results
/// back to physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nondimensionalized {
    pub scaled: ScaledParams,
    pub time_unit: f64,
    pub length_unit: f64,
}

/// Converts physical parameters to the dimensionless `alpha`.
pub fn nondimensionalize(p: &DimensionalParams) -> Result<Nondimensionalized> {
    let p = DimensionalParams::new(p.a, p.b, p.c)?;
    let alpha_sq = (p.b * p.b * p.c * p.c) / (2.0 * p.a * p.a * p.a);
    Ok(Nondimensionalized {
        scaled: ScaledParams::new(alpha_sq.sqrt())?,
        time_unit: p.time_unit(),
        length_unit: p.length_unit(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn alpha_of(a: f64, b: f64, c: f64) -> f64 {
        nondimensionalize(&DimensionalParams { a, b, c })
            .unwrap()
            .scaled
            .alpha()
    }

    #[test]
    fn reference_points() {
        assert!((alpha_of(1.0, 2f64.sqrt(), 1.0) - 1.0).abs() < 1e-15);
        assert!((alpha_of(1.0, 1.0, 1.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((alpha_of(2.0, 2.0, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        for (a, b, c) in [
            (0.0, 1.0, 1.0),
            (1.0, -1.0, 1.0),
            (1.0, 1.0, f64::NAN),
            (f64::INFINITY, 1.0, 1.0),
        ] {
            assert!(nondimensionalize(&DimensionalParams { a, b, c }).is_err());
        }
        assert!(ScaledParams::new(0.0).is_err());
        assert!(ScaledParams::new(-2.0).is_err());
    }

    proptest! {
        #[test]
        fn alpha_identity(a in 1e-2f64..1e2, b in 1e-2f64..1e2, c in 1e-2f64..1e2) {
            let n = nondimensionalize(&DimensionalParams { a, b, c }).unwrap();
            let lhs = n.scaled.alpha_sq() * 2.0 * a * a * a;
            let rhs = b * b * c * c;
            prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs);
        }

        #[test]
        fn unit_round_trip(a in 1e-3f64..1e3, b in 1e-3f64..1e3, c in 1e-3f64..1e3) {
            let n = nondimensionalize(&DimensionalParams { a, b, c }).unwrap();
            prop_assert!((n.length_unit / n.time_unit - c).abs() <= 1e-14 * c);
            prop_assert!((n.time_unit * a - 1.0).abs() <= 1e-15);
        }
    }
}
