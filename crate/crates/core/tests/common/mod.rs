//! Test-only oracles, independent of the library's numerical routes.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Double-exponential (tanh-sinh) quadrature on `[0, u]`, refined by
/// halving the step until successive estimates agree to `rel`.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, u: f64, rel: f64) -> f64 {
    let eval = |h: f64| -> f64 {
        let kmax = (6.5 / h).ceil() as i64;
        let mut sum = 0.0;
        for k in -kmax..=kmax {
            let tau = k as f64 * h;
            let y = PI * tau.sinh();
            // x = u * logistic(y), distances to both ends computed without cancellation
            let left = u / (1.0 + (-y).exp());
            let right = u / (1.0 + y.exp());
            if left <= 0.0 || right <= 0.0 || !left.is_finite() {
                continue;
            }
            let w = left * right / u * PI * tau.cosh();
            let v = f(left) * w;
            if v.is_finite() {
                sum += v;
            }
        }
        sum * h
    };
    let mut h = 0.5;
    let mut prev = eval(h);
    loop {
        h *= 0.5;
        let next = eval(h);
        if ((next - prev) / next).abs() < rel || h < 1.0 / 4096.0 {
            return next;
        }
        prev = next;
    }
}

/// γ(z, u) by brute-force quadrature of `t^{z-1} e^{-t}`.
pub fn incomplete_gamma_oracle(z: f64, u: f64) -> f64 {
    tanh_sinh(|t| (z - 1.0).mul_add(t.ln(), -t).exp(), u, 1e-14)
}

/// Expected `|x(T)|²` of the trapezoid position scheme. The headings at grid
/// times are exact, so `E cos(θ_n - θ_m) = exp(-alpha² (τ - 1 + e^{-τ}))`
/// with `τ = |n - m| dt`, and the expectation is a finite double sum.
pub fn trapezoid_scheme_msd(alpha: f64, dt: f64, n_steps: usize) -> f64 {
    let corr: Vec<f64> = (0..=n_steps)
        .map(|k| {
            let tau = k as f64 * dt;
            (-alpha * alpha * (tau - 1.0 + (-tau).exp())).exp()
        })
        .collect();
    let w = |i: usize| if i == 0 || i == n_steps { 0.5 * dt } else { dt };
    let mut total = 0.0;
    for i in 0..=n_steps {
        for j in 0..=n_steps {
            total += w(i) * w(j) * corr[i.abs_diff(j)];
        }
    }
    total
}

/// Sample mean and the standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance with its standard error under a normal-ish law,
/// estimated from the fourth central moment.
pub fn variance_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2) / n).sqrt())
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
