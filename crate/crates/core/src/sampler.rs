//! Exact-in-law simulation of the scaled walker
//!
//! ```text
//! dx/dt = (cos θ, sin θ),   dθ/dt = κ,   dκ = -κ dt + sqrt(2) α dB
//! ```
//!
//! Over a step of length `dt` the curvature follows the exact
//! Ornstein-Uhlenbeck transition `κ' = e^{-dt} κ + G`, and integrating
//! `dθ = κ dt = -dκ + sqrt(2) α dB` gives `θ' = θ + (κ - κ') + sqrt(2) α ΔB`.
//! The pair `(G, ΔB)` is jointly Gaussian with covariance
//!
//! ```text
//! C11 = α² (1 - e^{-2 dt})
//! C12 = sqrt(2) α (1 - e^{-dt})
//! C22 = dt
//! ```
//!
//! so `(κ, θ, B)` are sampled exactly at grid times for any `dt`. Only the
//! position uses an approximation (trapezoid rule on the heading).

use std::f64::consts::{SQRT_2, TAU};
use std::io::{self, Write};

use crate::error::{require_positive, PtwError, Result};
use crate::rng::RngStream;

pub type Mat2 = [[f64; 2]; 2];

/// Instantaneous state of one walker. The heading is not reduced modulo 2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtwState {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub theta: f64,
    pub kappa: f64,
    pub b_accum: f64,
}

impl PtwState {
    pub fn is_finite(&self) -> bool {
        [self.t, self.x1, self.x2, self.theta, self.kappa, self.b_accum]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn displacement_sq(&self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2
    }
}

/// Covariance of `(G, ΔB)` over a step of length `dt`.
pub fn step_covariance(alpha: f64, dt: f64) -> Result<Mat2> {
    let alpha = require_positive("alpha", alpha)?;
    let dt = require_positive("dt", dt)?;
    let c11 = -alpha * alpha * (-2.0 * dt).exp_m1();
    let c12 = -SQRT_2 * alpha * (-dt).exp_m1();
    Ok([[c11, c12], [c12, dt]])
}

/// Lower Cholesky factor of a symmetric positive-definite 2x2 matrix.
pub fn cholesky_2x2(c: &Mat2) -> Result<Mat2> {
    let c11 = c[0][0];
    if !(c11 > 0.0) {
        return Err(PtwError::NotPositiveDefinite);
    }
    let l11 = c11.sqrt();
    let l21 = c[1][0] / l11;
    let schur = c[1][1] - l21 * l21;
    if !(schur > 0.0) {
        return Err(PtwError::NotPositiveDefinite);
    }
    Ok([[l11, 0.0], [l21, schur.sqrt()]])
}

/// Per-step constants for a fixed `(alpha, dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepKernel {
    pub alpha: f64,
    pub dt: f64,
    pub gamma: f64,
    pub cov: Mat2,
    pub chol: Mat2,
}

impl StepKernel {
    pub fn new(alpha: f64, dt: f64) -> Result<Self> {
        let cov = step_covariance(alpha, dt)?;
        let chol = cholesky_2x2(&cov)?;
        Ok(Self {
            alpha,
            dt,
            gamma: (-dt).exp(),
            cov,
            chol,
        })
    }

    /// Maps two independent standard normals to a draw of `(G, ΔB)`.
    pub fn correlate(&self, z1: f64, z2: f64) -> (f64, f64) {
        let l = &self.chol;
        (l[0][0] * z1, l[1][0] * z1 + l[1][1] * z2)
    }
}

/// Draws the initial state: origin, uniform heading, stationary curvature.
pub fn sample_initial(alpha: f64, rng: &mut RngStream) -> Result<PtwState> {
    let alpha = require_positive("alpha", alpha)?;
    Ok(PtwState {
        t: 0.0,
        x1: 0.0,
        x2: 0.0,
        theta: TAU * rng.heading_uniform(),
        kappa: alpha * rng.curvature_normal(),
        b_accum: 0.0,
    })
}

/// Applies one step with the given noise increments `(G, ΔB)`.
pub fn advance(s: &PtwState, k: &StepKernel, g: f64, db: f64) -> PtwState {
    let kappa = k.gamma * s.kappa + g;
    let theta = s.theta + (s.kappa - kappa) + SQRT_2 * k.alpha * db;
    let (sin0, cos0) = s.theta.sin_cos();
    let (sin1, cos1) = theta.sin_cos();
    let half = 0.5 * k.dt;
    PtwState {
        t: s.t + k.dt,
        x1: s.x1 + half * (cos0 + cos1),
        x2: s.x2 + half * (sin0 + sin1),
        theta,
        kappa,
        b_accum: s.b_accum + db,
    }
}

pub fn step(s: &PtwState, k: &StepKernel, rng: &mut RngStream) -> PtwState {
    let z1 = rng.standard_normal();
    let z2 = rng.standard_normal();
    let (g, db) = k.correlate(z1, z2);
    advance(s, k, g, db)
}

/// A trajectory of `n_steps + 1` states starting from [`sample_initial`].
pub fn simulate_path(alpha: f64, dt: f64, n_steps: usize, rng: &mut RngStream) -> Result<Vec<PtwState>> {
    if n_steps == 0 {
        return Err(crate::error::invalid("n_steps", "must be >= 1"));
    }
    let kernel = StepKernel::new(alpha, dt)?;
    let mut path = Vec::with_capacity(n_steps + 1);
    let mut state = sample_initial(alpha, rng)?;
    path.push(state);
    for _ in 0..n_steps {
        state = step(&state, &kernel, rng);
        path.push(state);
    }
    Ok(path)
}

/// Total arc length over net displacement. Close to 1 for nearly straight
/// paths and large for tightly wound ones.
pub fn tortuosity(path: &[PtwState]) -> f64 {
    let length: f64 = path
        .windows(2)
        .map(|w| ((w[1].x1 - w[0].x1).powi(2) + (w[1].x2 - w[0].x2).powi(2)).sqrt())
        .sum();
    match (path.first(), path.last()) {
        (Some(a), Some(b)) => length / ((b.x1 - a.x1).powi(2) + (b.x2 - a.x2).powi(2)).sqrt(),
        _ => f64::NAN,
    }
}

pub const PATH_CSV_HEADER: &str = "t,x1,x2,theta,kappa";

/// Writes one row per state with 17 significant digits.
pub fn write_path_csv<W: Write>(mut w: W, path: &[PtwState]) -> io::Result<()> {
    writeln!(w, "{PATH_CSV_HEADER}")?;
    for s in path {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.t, s.x1, s.x2, s.theta, s.kappa
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &Mat2, b: &Mat2) -> f64 {
        (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (a[i][j] - b[i][j]).abs())
            .fold(0.0, f64::max)
    }

    fn reconstruct(l: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (0..2).map(|k| l[i][k] * l[j][k]).sum();
            }
        }
        out
    }

    #[test]
    fn covariance_reference_values() {
        // 1 - e^{-0.1} and sqrt(2)(1 - e^{-0.05}) to 20 digits
        let c = step_covariance(1.0, 0.05).unwrap();
        assert!((c[0][0] - 0.095_162_581_964_040_431_86).abs() < 1e-16);
        assert!((c[0][1] - 0.068_972_009_315_831_233_64).abs() < 1e-16);
        assert_eq!(c[0][1], c[1][0]);
        assert_eq!(c[1][1], 0.05);
    }

    #[test]
    fn covariance_limits() {
        let c = step_covariance(1.0, 1e-12).unwrap();
        assert!(c.iter().flatten().all(|v| v.abs() < 1e-11));
        let c = step_covariance(1.7, 60.0).unwrap();
        assert!((c[0][0] - 1.7 * 1.7).abs() < 1e-14);
    }

    #[test]
    fn covariance_positive_definite() {
        for alpha in [0.01, 0.1, 1.0, 5.0] {
            for dt in [1e-3, 0.01, 0.05, 0.5, 2.0, 10.0] {
                let c = step_covariance(alpha, dt).unwrap();
                let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
                assert!(det > 0.0, "alpha={alpha} dt={dt}");
                let l = cholesky_2x2(&c).unwrap();
                let scale = c[0][0].abs().max(c[1][1].abs());
                assert!(max_abs_diff(&reconstruct(&l), &c) < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn small_step_determinant() {
        let (alpha, dt) = (1.3, 1e-3);
        let c = step_covariance(alpha, dt).unwrap();
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let leading = alpha * alpha * dt.powi(4) / 6.0;
        assert!((det / leading - 1.0).abs() < 1e-2);
    }

    #[test]
    fn cholesky_examples() {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(cholesky_2x2(&id).unwrap(), id);
        assert_eq!(cholesky_2x2(&[[4.0, 0.0], [0.0, 9.0]]).unwrap(), [[2.0, 0.0], [0.0, 3.0]]);
        let c = step_covariance(1.0, 0.05).unwrap();
        let l = cholesky_2x2(&c).unwrap();
        assert_eq!(l[0][1], 0.0);
        assert!(max_abs_diff(&reconstruct(&l), &c) < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert_eq!(cholesky_2x2(&[[0.0, 0.0], [0.0, 1.0]]), Err(PtwError::NotPositiveDefinite));
        assert_eq!(cholesky_2x2(&[[1.0, 2.0], [2.0, 1.0]]), Err(PtwError::NotPositiveDefinite));
        assert_eq!(cholesky_2x2(&[[f64::NAN, 0.0], [0.0, 1.0]]), Err(PtwError::NotPositiveDefinite));
    }

    #[test]
    fn rejects_bad_step_parameters() {
        assert!(step_covariance(0.0, 0.1).is_err());
        assert!(step_covariance(1.0, 0.0).is_err());
        assert!(step_covariance(1.0, -0.1).is_err());
        assert!(simulate_path(1.0, 0.05, 0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn straight_line_without_noise() {
        let k = StepKernel::new(1.0, 0.05).unwrap();
        let s = PtwState { t: 1.0, x1: 0.5, x2: -0.25, theta: 0.7, kappa: 0.0, b_accum: 0.3 };
        let n = advance(&s, &k, 0.0, 0.0);
        assert_eq!(n.theta, s.theta);
        assert!((n.x1 - (s.x1 + 0.05 * 0.7f64.cos())).abs() < 1e-16);
        assert!((n.x2 - (s.x2 + 0.05 * 0.7f64.sin())).abs() < 1e-16);
        assert_eq!(n.t, 1.05);
        assert_eq!(n.b_accum, s.b_accum);
    }

    #[test]
    fn deterministic_curvature_relaxation() {
        let k = StepKernel::new(0.8, 0.2).unwrap();
        let s = PtwState { t: 0.0, x1: 0.0, x2: 0.0, theta: 0.1, kappa: 1.5, b_accum: 0.0 };
        let n = advance(&s, &k, 0.0, 0.0);
        let gamma = (-0.2f64).exp();
        assert!((n.kappa - gamma * 1.5).abs() < 1e-15);
        assert!((n.theta - (0.1 + 1.5 * (1.0 - gamma))).abs() < 1e-15);
    }

    #[test]
    fn initial_state_contract() {
        for id in 0..100 {
            let mut rng = RngStream::new(5, id);
            let s = sample_initial(0.7, &mut rng).unwrap();
            assert_eq!((s.t, s.x1, s.x2, s.b_accum), (0.0, 0.0, 0.0, 0.0));
            assert!((0.0..TAU).contains(&s.theta));
            assert!(s.kappa.is_finite());
        }
    }

    #[test]
    fn single_step_path() {
        let path = simulate_path(1.0, 0.05, 1, &mut RngStream::new(3, 1)).unwrap();
        assert_eq!(path.len(), 2);
        let again = simulate_path(1.0, 0.05, 1, &mut RngStream::new(3, 1)).unwrap();
        assert_eq!(path, again);
        assert_eq!(path[1].t, 0.05);
        let chord = (path[1].x1.powi(2) + path[1].x2.powi(2)).sqrt();
        assert!(chord <= 0.05 + 1e-15);
    }

    #[test]
    fn csv_layout() {
        let path = simulate_path(1.0, 0.05, 3, &mut RngStream::new(1, 0)).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &path).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], PATH_CSV_HEADER);
        assert_eq!(lines.len(), 5);
        let parsed: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(parsed, vec![path[1].t, path[1].x1, path[1].x2, path[1].theta, path[1].kappa]);
    }
}
