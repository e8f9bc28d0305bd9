//! Acceptance suite. Each test prints one PASS/FAIL line; run with
//! `cargo test -p ptw-core --test acceptance -- --nocapture`.

mod common;

use common::{incomplete_gamma_oracle, rel, variance_and_stderr, mean_and_stderr};
use ptw_core::analytics::*;
use ptw_core::ensemble::*;
use ptw_core::rng::RngStream;
use ptw_core::sampler::{cholesky_2x2, sample_initial, step, StepKernel};

const SEED: u64 = 0x5eed_2009;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {name} | {detail}");
    assert!(pass, "criterion {id} failed: {detail}");
}

#[test]
fn c1_diffusion_coefficient_routes() {
    let mut worst = 0.0f64;
    for alpha in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let v: Vec<f64> = Method::ALL
            .iter()
            .map(|&m| diffusion_coefficient(alpha, m).unwrap().value)
            .collect();
        for i in 0..3 {
            for j in i + 1..3 {
                worst = worst.max(rel(v[i], v[j]));
            }
        }
    }
    let e_minus_one = std::f64::consts::E - 1.0;
    let unit = Method::ALL
        .iter()
        .map(|&m| rel(diffusion_coefficient(1.0, m).unwrap().value, e_minus_one))
        .fold(0.0, f64::max);
    let d01 = diffusion_coefficient(0.1, Method::ClosedForm).unwrap().value;
    let d2 = diffusion_coefficient(2.0, Method::ClosedForm).unwrap().value;
    let table = format!("{:.0}", d01) == "101" && format!("{:.3}", d2) == "0.725";
    report(
        1,
        "D triple agreement and table values",
        worst < 1e-9 && unit < 1e-12 && table,
        &format!("max pairwise rel {worst:.2e}, |D(1)-(e-1)| rel {unit:.2e}, D(0.1)={d01:.3}, D(2)={d2:.4}"),
    );
}

fn table_fit(alpha: f64, t_end: f64) -> FitReport {
    let cfg = EnsembleConfig {
        n_traj: 2000,
        alpha,
        dt: 0.05,
        t_end,
        output_stride: 20,
        master_seed: SEED,
    };
    let series = run_variance_ensemble(&cfg).unwrap();
    let d = diffusion_coefficient(alpha, Method::ClosedForm).unwrap().value;
    fit_diffusion(&series, d).unwrap()
}

#[test]
fn c2_long_run_fit() {
    let mut pass = true;
    let mut detail = String::new();
    for alpha in [0.1, 2.0] {
        let f = table_fit(alpha, 1200.0);
        pass &= f.rel_error <= 0.05 && f.window == (600.0, 1200.0);
        detail += &format!(
            "alpha={alpha}: d_hat={:.4} theory={:.4} rel={:.2}%; ",
            f.d_hat,
            f.d_theory,
            100.0 * f.rel_error
        );
    }
    report(2, "slope fit on [600,1200] within 5%", pass, &detail);
}

#[test]
fn c3_transient_underestimate() {
    let f = table_fit(0.1, 120.0);
    report(
        3,
        "T=120 fit underestimates D by >30%",
        f.d_hat < f.d_theory && f.rel_error > 0.30,
        &format!("d_hat={:.2} theory={:.2} rel={:.1}%", f.d_hat, f.d_theory, 100.0 * f.rel_error),
    );
}

/// Variance of κ across an ensemble after relaxing for `horizon` time units.
fn relaxed_kappa_variance(kernel: &StepKernel, n: usize, horizon: f64) -> (f64, f64) {
    let steps = (horizon / kernel.dt).ceil() as usize;
    let kappas: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = RngStream::new(SEED, i as u64);
            let mut s = sample_initial(kernel.alpha, &mut rng).unwrap();
            for _ in 0..steps {
                s = step(&s, kernel, &mut rng);
            }
            s.kappa
        })
        .collect();
    variance_and_stderr(&kappas)
}

#[test]
fn c4_exact_law_sampler() {
    let alpha = 1.2;
    let n = 10_000;
    let mut pass = true;
    let mut detail = String::new();

    for dt in [0.01, 0.05, 0.5, 2.0] {
        let kernel = StepKernel::new(alpha, dt).unwrap();
        let (v, se) = relaxed_kappa_variance(&kernel, n, 10.0);
        let ok = (v - alpha * alpha).abs() < 4.0 * se;
        pass &= ok;
        detail += &format!("var(kappa)@dt={dt}: {v:.4}±{se:.4}; ");

        // The doubled variance of G would inflate the stationary law; the
        // same check must reject it.
        let mut doubled = kernel;
        doubled.cov[0][0] *= 2.0;
        doubled.chol = cholesky_2x2(&doubled.cov).unwrap();
        let (vd, sed) = relaxed_kappa_variance(&doubled, n, 10.0);
        pass &= (vd - alpha * alpha).abs() >= 4.0 * sed;
    }

    let dt = 0.05;
    let kernel = StepKernel::new(alpha, dt).unwrap();
    let checkpoints = [10usize, 20, 40, 100];
    let mut cosines = vec![Vec::with_capacity(n); checkpoints.len()];
    for i in 0..n {
        let mut rng = RngStream::new(SEED ^ 1, i as u64);
        let s0 = sample_initial(alpha, &mut rng).unwrap();
        let mut s = s0;
        let mut done = 0;
        for (j, &c) in checkpoints.iter().enumerate() {
            while done < c {
                s = step(&s, &kernel, &mut rng);
                done += 1;
            }
            cosines[j].push((s.theta - s0.theta).cos());
        }
    }
    for (j, &c) in checkpoints.iter().enumerate() {
        let t = c as f64 * dt;
        let want = gaussian_cos_expectation(theta_variance(t, alpha).unwrap().sqrt()).unwrap();
        let (m, se) = mean_and_stderr(&cosines[j]);
        pass &= (m - want).abs() < 4.0 * se;
        detail += &format!("E cos@t={t}: {m:.4} vs {want:.4}; ");
    }
    report(4, "exact-law curvature and heading correlation", pass, &detail);
}

#[test]
fn c5_msd_against_exact_law() {
    let mut pass = true;
    let mut detail = String::new();
    for alpha in [0.1, 2.0] {
        let cfg = EnsembleConfig {
            n_traj: 2000,
            alpha,
            dt: 0.05,
            t_end: 120.0,
            output_stride: 1,
            master_seed: SEED,
        };
        let series = run_variance_ensemble(&cfg).unwrap();
        // 20 checkpoints at t = 6, 12, ..., 120
        let hits = (1..=20)
            .map(|j| j * 120)
            .filter(|&i| {
                let exact = variance_law(series.times[i], alpha).unwrap();
                (series.msd[i] - exact).abs() < 4.0 * series.stderr[i]
            })
            .count();
        pass &= hits >= 18;
        detail += &format!("alpha={alpha}: {hits}/20; ");
    }
    report(5, "ensemble MSD within 4 stderr of exact law", pass, &detail);
}

#[test]
fn c6_diffusion_limit() {
    let alpha = 1.0;
    let t = 5.0;
    let l1_at = |epsilon: f64| {
        let cfg = L1Config {
            alpha,
            epsilon,
            t_macro: vec![t],
            n_traj: 10_000,
            dt: 0.05,
            master_seed: SEED,
            grid: GridSpec::default(),
        };
        l1_vs_diffusion_limit(&cfg).unwrap()[0].l1
    };
    let coarse = l1_at(1.0);
    let fine = l1_at(0.1);

    let d = diffusion_coefficient(alpha, Method::ClosedForm).unwrap().value;
    let st = kernel_self_test(d, t, 10_000, &GridSpec::default(), SEED).unwrap();
    let ratio = st.ratio();
    report(
        6,
        "L1 decreases with epsilon; self-test at noise floor",
        fine < coarse && ratio > 1.0 / 1.5 && ratio < 1.5,
        &format!(
            "L1(eps=1)={coarse:.4} L1(eps=0.1)={fine:.4}; self={:.4} floor={:.4} ratio={ratio:.3}",
            st.l1_self, st.noise_floor
        ),
    );
}

#[test]
fn c7_numerical_hygiene() {
    let zs = [0.1, 0.3, 0.7, 1.0, 1.5, 2.5, 4.0, 7.0, 12.0, 25.0];
    let us = [0.01, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 15.0, 30.0, 60.0];
    let mut worst = 0.0f64;
    for &z in &zs {
        for &u in &us {
            worst = worst.max(rel(lower_incomplete_gamma(z, u).unwrap(), incomplete_gamma_oracle(z, u)));
        }
    }

    let below = theta_variance(TAYLOR_SWITCH * (1.0 - 1e-12), 1.0).unwrap();
    let above = theta_variance(TAYLOR_SWITCH * (1.0 + 1e-12), 1.0).unwrap();
    let expected = ((1.0f64 + 1e-12) / (1.0 - 1e-12)).powi(2);
    let jump = rel(above / below, expected);
    report(
        7,
        "incomplete gamma vs quadrature; Taylor guard continuity",
        worst < 1e-10 && jump < 1e-12,
        &format!("max rel gamma error {worst:.2e} on 100 points, switch jump {jump:.2e}"),
    );
}
