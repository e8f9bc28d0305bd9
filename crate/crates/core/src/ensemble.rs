//! Monte-Carlo ensembles of independent walkers.
//!
//! Trajectory `i` always draws from stream `i` of the master seed, and
//! reductions run over fixed-size blocks of trajectories that are merged in
//! block order. Results are therefore bit-identical for any thread count.

use std::f64::consts::SQRT_2;
use std::io::{self, Write};

use log::warn;
use rayon::prelude::*;

use crate::analytics::{diffusion_coefficient, heat_kernel_density, HeatKernelParams, Method};
use crate::error::{invalid, require_positive, PtwError, Result};
use crate::rng::RngStream;
use crate::sampler::{sample_initial, step, StepKernel};

/// Trajectories per reduction block.
const BLOCK: usize = 64;

const STEP_COUNT_TOL: f64 = 1e-9;

/// Smallest acceptable number of bins per kernel standard deviation.
pub const MIN_BINS_PER_STD: f64 = 5.0;

/// Fraction of particles outside the histogram domain above which a warning
/// is emitted.
pub const OUTSIDE_WARN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub alpha: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded samples.
    pub output_stride: usize,
    pub master_seed: u64,
}

impl EnsembleConfig {
    /// Number of steps needed to reach `t_end`.
    pub fn n_steps(&self) -> Result<usize> {
        self.validate()?;
        Ok((self.t_end / self.dt).round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj < 2 {
            return Err(invalid("n_traj", format!("need at least 2 trajectories, got {}", self.n_traj)));
        }
        require_positive("alpha", self.alpha)?;
        require_positive("dt", self.dt)?;
        require_positive("t_end", self.t_end)?;
        if self.output_stride == 0 {
            return Err(invalid("output_stride", "must be >= 1"));
        }
        let ratio = self.t_end / self.dt;
        if (ratio - ratio.round()).abs() > STEP_COUNT_TOL * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(invalid(
                "t_end",
                format!("t_end / dt = {ratio} is not a positive integer"),
            ));
        }
        Ok(())
    }

    /// Step indices at which the ensemble is recorded: every
    /// `output_stride` steps, always including the first and last.
    pub fn record_steps(&self) -> Result<Vec<usize>> {
        let n = self.n_steps()?;
        let mut steps: Vec<usize> = (0..=n).step_by(self.output_stride).collect();
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        Ok(steps)
    }
}

/// Ensemble position statistics on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSeries {
    pub n_traj: usize,
    pub times: Vec<f64>,
    pub mean_x1: Vec<f64>,
    pub mean_x2: Vec<f64>,
    /// Ensemble average of `x1² + x2²`.
    pub msd: Vec<f64>,
    /// Standard error of `msd`.
    pub stderr: Vec<f64>,
    /// Standard errors of `mean_x1` and `mean_x2`.
    pub stderr_x1: Vec<f64>,
    pub stderr_x2: Vec<f64>,
}

impl VarianceSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone)]
struct MomentSums {
    x1: Vec<f64>,
    x2: Vec<f64>,
    x1_sq: Vec<f64>,
    x2_sq: Vec<f64>,
    r2: Vec<f64>,
    r4: Vec<f64>,
}

impl MomentSums {
    fn zeros(n: usize) -> Self {
        Self {
            x1: vec![0.0; n],
            x2: vec![0.0; n],
            x1_sq: vec![0.0; n],
            x2_sq: vec![0.0; n],
            r2: vec![0.0; n],
            r4: vec![0.0; n],
        }
    }

    fn add_point(&mut self, i: usize, x1: f64, x2: f64) {
        let r2 = x1 * x1 + x2 * x2;
        self.x1[i] += x1;
        self.x2[i] += x2;
        self.x1_sq[i] += x1 * x1;
        self.x2_sq[i] += x2 * x2;
        self.r2[i] += r2;
        self.r4[i] += r2 * r2;
    }

    fn merge(&mut self, other: &Self) {
        let pairs = [
            (&mut self.x1, &other.x1),
            (&mut self.x2, &other.x2),
            (&mut self.x1_sq, &other.x1_sq),
            (&mut self.x2_sq, &other.x2_sq),
            (&mut self.r2, &other.r2),
            (&mut self.r4, &other.r4),
        ];
        for (acc, add) in pairs {
            acc.iter_mut().zip(add).for_each(|(a, b)| *a += b);
        }
    }
}

fn stderr_of_mean(sum: f64, sum_sq: f64, n: usize) -> f64 {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (var / nf).sqrt()
}

/// Runs `body(i, stream)` for trajectories in fixed-order blocks and folds
/// the per-block results in block order.
fn block_reduce<T, F, M>(n_traj: usize, seed: u64, init: impl Fn() -> T + Sync, body: F, merge: M) -> T
where
    T: Send,
    F: Fn(&mut T, RngStream) + Sync,
    M: Fn(&mut T, &T),
{
    let n_blocks = n_traj.div_ceil(BLOCK);
    let partials: Vec<T> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n_traj) {
                body(&mut acc, RngStream::new(seed, i as u64));
            }
            acc
        })
        .collect();
    let mut iter = partials.into_iter();
    let mut total = iter.next().unwrap_or_else(&init);
    for p in iter {
        merge(&mut total, &p);
    }
    total
}

/// Simulates `cfg.n_traj` walkers and records position moments.
pub fn run_variance_ensemble(cfg: &EnsembleConfig) -> Result<VarianceSeries> {
    let records = cfg.record_steps()?;
    let kernel = StepKernel::new(cfg.alpha, cfg.dt)?;
    let n_rec = records.len();

    let sums = block_reduce(
        cfg.n_traj,
        cfg.master_seed,
        || MomentSums::zeros(n_rec),
        |acc, mut rng| {
            let mut s = sample_initial(cfg.alpha, &mut rng).expect("alpha validated");
            let mut k = 0usize;
            for (i, &target) in records.iter().enumerate() {
                while k < target {
                    s = step(&s, &kernel, &mut rng);
                    k += 1;
                }
                acc.add_point(i, s.x1, s.x2);
            }
        },
        MomentSums::merge,
    );

    let n = cfg.n_traj;
    let nf = n as f64;
    let series = VarianceSeries {
        n_traj: n,
        times: records.iter().map(|&k| k as f64 * cfg.dt).collect(),
        mean_x1: sums.x1.iter().map(|s| s / nf).collect(),
        mean_x2: sums.x2.iter().map(|s| s / nf).collect(),
        msd: sums.r2.iter().map(|s| s / nf).collect(),
        stderr: (0..n_rec).map(|i| stderr_of_mean(sums.r2[i], sums.r4[i], n)).collect(),
        stderr_x1: (0..n_rec).map(|i| stderr_of_mean(sums.x1[i], sums.x1_sq[i], n)).collect(),
        stderr_x2: (0..n_rec).map(|i| stderr_of_mean(sums.x2[i], sums.x2_sq[i], n)).collect(),
    };
    Ok(series)
}

/// Result of the straight-line fit of the MSD curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub d_hat: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    pub residual_rms: f64,
    pub d_theory: f64,
    pub rel_error: f64,
}

pub const MIN_FIT_POINTS: usize = 10;

/// Least-squares line through the MSD on `[T/2, T]`, `T` the last recorded
/// time. Since `MSD ~ 2 D t`, the estimate is half the slope.
pub fn fit_diffusion(series: &VarianceSeries, d_theory: f64) -> Result<FitReport> {
    let t_end = *series
        .times
        .last()
        .ok_or_else(|| PtwError::InsufficientData("empty series".into()))?;
    fit_diffusion_window(series, 0.5 * t_end, t_end, d_theory)
}

pub fn fit_diffusion_window(series: &VarianceSeries, t_lo: f64, t_hi: f64, d_theory: f64) -> Result<FitReport> {
    let slack = 1e-9 * t_hi.abs().max(1.0);
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.msd)
        .filter(|(&t, _)| t >= t_lo - slack && t <= t_hi + slack)
        .map(|(&t, &m)| (t, m))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(PtwError::InsufficientData(format!(
            "{} points in [{t_lo}, {t_hi}], need {MIN_FIT_POINTS}",
            pts.len()
        )));
    }

    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let m_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    if !(stt > 0.0) {
        return Err(PtwError::InsufficientData("fit window has zero time spread".into()));
    }
    let stm: f64 = pts.iter().map(|p| (p.0 - t_mean) * (p.1 - m_mean)).sum();
    let slope = stm / stt;
    let intercept = m_mean - slope * t_mean;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();

    let d_hat = 0.5 * slope;
    Ok(FitReport {
        d_hat,
        window: (t_lo, t_hi),
        n_points: pts.len(),
        residual_rms: (rss / n).sqrt(),
        d_theory,
        rel_error: (d_hat - d_theory).abs() / d_theory,
    })
}

/// Square histogram domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_bins: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_bins: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(invalid("grid", format!("need finite x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n_bins == 0 {
            return Err(invalid("n_bins", "must be >= 1"));
        }
        Ok(Self { x_min, x_max, n_bins })
    }

    pub fn bin_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.bin_width()
    }

    fn index(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x < self.x_max) {
            return None;
        }
        let i = ((x - self.x_min) / self.bin_width()) as usize;
        Some(i.min(self.n_bins - 1))
    }
}

/// How to choose the histogram domain for a given kernel width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Fixed(Grid),
    /// `[-k sigma, k sigma]` with `sigma = sqrt(D t)`, the per-axis standard
    /// deviation of the limiting kernel.
    Scaled { half_width_sigmas: f64, n_bins: usize },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Scaled {
            half_width_sigmas: 6.0,
            n_bins: 61,
        }
    }
}

impl GridSpec {
    pub fn resolve(&self, sigma: f64) -> Result<Grid> {
        match *self {
            GridSpec::Fixed(g) => Ok(g),
            GridSpec::Scaled { half_width_sigmas, n_bins } => {
                let h = require_positive("half_width_sigmas", half_width_sigmas)? * sigma;
                Grid::new(-h, h, n_bins)
            }
        }
    }
}

/// Fraction of particles per bin of a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistogram {
    pub grid: Grid,
    /// Row-major `mass[ix * n_bins + iy]`.
    pub mass: Vec<f64>,
    pub n_outside: usize,
    pub n_traj: usize,
}

impl DensityHistogram {
    pub fn from_points(grid: Grid, points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(PtwError::InsufficientData("no points to histogram".into()));
        }
        let n = grid.n_bins;
        let mut counts = vec![0u64; n * n];
        let mut n_outside = 0;
        for &(x1, x2) in points {
            match (grid.index(x1), grid.index(x2)) {
                (Some(i), Some(j)) => counts[i * n + j] += 1,
                _ => n_outside += 1,
            }
        }
        let total = points.len() as f64;
        Ok(Self {
            grid,
            mass: counts.iter().map(|&c| c as f64 / total).collect(),
            n_outside,
            n_traj: points.len(),
        })
    }

    pub fn bin_area(&self) -> f64 {
        self.grid.bin_width().powi(2)
    }

    pub fn mass_at(&self, ix: usize, iy: usize) -> f64 {
        self.mass[ix * self.grid.n_bins + iy]
    }

    pub fn density_at(&self, ix: usize, iy: usize) -> f64 {
        self.mass_at(ix, iy) / self.bin_area()
    }

    pub fn outside_fraction(&self) -> f64 {
        self.n_outside as f64 / self.n_traj as f64
    }

    /// Masses in the quadrants `(+,+), (-,+), (-,-), (+,-)`. Bins whose
    /// center lies on an axis are skipped.
    pub fn quadrant_masses(&self) -> [f64; 4] {
        let mut q = [0.0; 4];
        let n = self.grid.n_bins;
        for ix in 0..n {
            for iy in 0..n {
                let (cx, cy) = (self.grid.center(ix), self.grid.center(iy));
                let tol = 1e-12 * self.grid.bin_width();
                if cx.abs() < tol || cy.abs() < tol {
                    continue;
                }
                let k = match (cx > 0.0, cy > 0.0) {
                    (true, true) => 0,
                    (false, true) => 1,
                    (false, false) => 2,
                    (true, false) => 3,
                };
                q[k] += self.mass_at(ix, iy);
            }
        }
        q
    }

    /// `E|x|²` over the binned mass (normalized to the in-domain mass) with
    /// Sheppard's correction `h²/6` for the two axes.
    pub fn second_moment(&self) -> f64 {
        let n = self.grid.n_bins;
        let mut m0 = 0.0;
        let mut m2 = 0.0;
        for ix in 0..n {
            for iy in 0..n {
                let w = self.mass_at(ix, iy);
                let (cx, cy) = (self.grid.center(ix), self.grid.center(iy));
                m0 += w;
                m2 += w * (cx * cx + cy * cy);
            }
        }
        m2 / m0 - self.grid.bin_width().powi(2) / 6.0
    }

    /// `Σ |density - kernel(center)| * area` over the grid.
    pub fn l1_against_kernel(&self, hk: &HeatKernelParams) -> f64 {
        let n = self.grid.n_bins;
        let area = self.bin_area();
        let mut total = 0.0;
        for ix in 0..n {
            let cx = self.grid.center(ix);
            for iy in 0..n {
                let k = heat_kernel_density(cx, self.grid.center(iy), hk);
                total += (self.density_at(ix, iy) - k).abs() * area;
            }
        }
        total
    }

    /// `Σ |mass_a - mass_b|` for two histograms on the same grid.
    pub fn l1_between(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(invalid("grid", "histograms use different grids"));
        }
        Ok(self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{HISTOGRAM_CSV_HEADER}")?;
        let n = self.grid.n_bins;
        for ix in 0..n {
            for iy in 0..n {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e}",
                    self.grid.center(ix),
                    self.grid.center(iy),
                    self.density_at(ix, iy)
                )?;
            }
        }
        Ok(())
    }
}

fn kernel_sigma(dcoef: f64, t: f64) -> f64 {
    (dcoef * t).sqrt()
}

fn warn_if_coarse(grid: &Grid, sigma: f64) -> bool {
    let per_std = sigma / grid.bin_width();
    if per_std < MIN_BINS_PER_STD {
        warn!("histogram resolves the kernel with only {per_std:.2} bins per standard deviation (< {MIN_BINS_PER_STD})");
        true
    } else {
        false
    }
}

/// Histogram of the walkers' positions at `cfg.t_end`.
pub fn run_density(cfg: &EnsembleConfig, grid: &GridSpec) -> Result<DensityHistogram> {
    let n_steps = cfg.n_steps()?;
    let dcoef = diffusion_coefficient(cfg.alpha, Method::ClosedForm)?.value;
    let grid = grid.resolve(kernel_sigma(dcoef, cfg.t_end))?;
    let kernel = StepKernel::new(cfg.alpha, cfg.dt)?;

    let points: Vec<(f64, f64)> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(cfg.master_seed, i as u64);
            let mut s = sample_initial(cfg.alpha, &mut rng).expect("alpha validated");
            for _ in 0..n_steps {
                s = step(&s, &kernel, &mut rng);
            }
            (s.x1, s.x2)
        })
        .collect();

    let hist = DensityHistogram::from_points(grid, &points)?;
    if hist.outside_fraction() > OUTSIDE_WARN_FRACTION {
        warn!(
            "{:.2}% of particles fall outside the histogram domain",
            100.0 * hist.outside_fraction()
        );
    }
    Ok(hist)
}

/// Parameters of the comparison against the diffusion limit.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Config {
    pub alpha: f64,
    pub epsilon: f64,
    /// Macroscopic output times, strictly positive.
    pub t_macro: Vec<f64>,
    pub n_traj: usize,
    /// Microscopic step size.
    pub dt: f64,
    pub master_seed: u64,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Point {
    pub t: f64,
    pub l1: f64,
    pub epsilon: f64,
}

/// Distance between the rescaled particle density `n^eps(t)` and the heat
/// kernel with diffusivity `D/2`, for each macroscopic time.
///
/// Time `t` maps to microscopic time `t / eps²` and positions are shrunk
/// by `eps`.
pub fn l1_vs_diffusion_limit(cfg: &L1Config) -> Result<Vec<L1Point>> {
    let alpha = require_positive("alpha", cfg.alpha)?;
    let eps = require_positive("epsilon", cfg.epsilon)?;
    if eps > 1.0 {
        return Err(invalid("epsilon", format!("must lie in (0, 1], got {eps}")));
    }
    if cfg.n_traj < 2 {
        return Err(invalid("n_traj", "need at least 2 trajectories"));
    }
    if cfg.t_macro.is_empty() {
        return Err(invalid("t_macro", "need at least one output time"));
    }
    for &t in &cfg.t_macro {
        require_positive("t_macro", t)?;
    }
    let kernel = StepKernel::new(alpha, cfg.dt)?;
    let dcoef = diffusion_coefficient(alpha, Method::ClosedForm)?.value;

    let steps: Vec<usize> = cfg
        .t_macro
        .iter()
        .map(|&t| ((t / (eps * eps) / cfg.dt).round() as usize).max(1))
        .collect();
    let max_step = *steps.iter().max().unwrap();

    // positions[i][j]: trajectory i at output time j
    let positions: Vec<Vec<(f64, f64)>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(cfg.master_seed, i as u64);
            let mut s = sample_initial(alpha, &mut rng).expect("alpha validated");
            let mut out = vec![(0.0, 0.0); steps.len()];
            for k in 1..=max_step {
                s = step(&s, &kernel, &mut rng);
                for (j, &target) in steps.iter().enumerate() {
                    if target == k {
                        out[j] = (eps * s.x1, eps * s.x2);
                    }
                }
            }
            out
        })
        .collect();

    let mut result = Vec::with_capacity(cfg.t_macro.len());
    for (j, &t) in cfg.t_macro.iter().enumerate() {
        let sigma = kernel_sigma(dcoef, t);
        let grid = cfg.grid.resolve(sigma)?;
        warn_if_coarse(&grid, sigma);
        let pts: Vec<(f64, f64)> = positions.iter().map(|p| p[j]).collect();
        let hist = DensityHistogram::from_points(grid, &pts)?;
        let hk = HeatKernelParams::from_diffusion(dcoef, t)?;
        result.push(L1Point {
            t,
            l1: hist.l1_against_kernel(&hk),
            epsilon: eps,
        });
    }
    Ok(result)
}

/// L¹ distance of a histogram sampled from the heat kernel itself, with the
/// sampling noise floor estimated from two independent samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfTestReport {
    pub l1_self: f64,
    /// `L1(sample_a, sample_b) / sqrt(2)`.
    pub noise_floor: f64,
}

impl SelfTestReport {
    pub fn ratio(&self) -> f64 {
        self.l1_self / self.noise_floor
    }
}

fn sample_kernel(hk: &HeatKernelParams, n: usize, seed: u64, offset: u64) -> Vec<(f64, f64)> {
    let s = hk.axis_std();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, offset + i as u64);
            (s * rng.standard_normal(), s * rng.standard_normal())
        })
        .collect()
}

pub fn kernel_self_test(dcoef: f64, t: f64, n_traj: usize, grid: &GridSpec, master_seed: u64) -> Result<SelfTestReport> {
    if n_traj < 2 {
        return Err(invalid("n_traj", "need at least 2 samples"));
    }
    let hk = HeatKernelParams::from_diffusion(dcoef, t)?;
    let grid = grid.resolve(kernel_sigma(dcoef, t))?;
    let a = DensityHistogram::from_points(grid, &sample_kernel(&hk, n_traj, master_seed, 0))?;
    let b = DensityHistogram::from_points(grid, &sample_kernel(&hk, n_traj, master_seed, n_traj as u64))?;
    Ok(SelfTestReport {
        l1_self: a.l1_against_kernel(&hk),
        noise_floor: a.l1_between(&b)? / SQRT_2,
    })
}

pub const VARIANCE_CSV_HEADER: &str = "t,mean_x1,mean_x2,msd,stderr";
pub const FIT_CSV_HEADER: &str = "d_hat,t_lo,t_hi,n_points,residual_rms,d_theory,rel_error";
pub const HISTOGRAM_CSV_HEADER: &str = "x_center,y_center,density";
pub const L1_CSV_HEADER: &str = "t,l1,epsilon";

pub fn write_variance_csv<W: Write>(mut w: W, s: &VarianceSeries) -> io::Result<()> {
    writeln!(w, "{VARIANCE_CSV_HEADER}")?;
    for i in 0..s.len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.times[i], s.mean_x1[i], s.mean_x2[i], s.msd[i], s.stderr[i]
        )?;
    }
    Ok(())
}

pub fn write_fit_csv<W: Write>(mut w: W, f: &FitReport) -> io::Result<()> {
    writeln!(w, "{FIT_CSV_HEADER}")?;
    writeln!(
        w,
        "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
        f.d_hat, f.window.0, f.window.1, f.n_points, f.residual_rms, f.d_theory, f.rel_error
    )
}

pub fn write_l1_csv<W: Write>(mut w: W, points: &[L1Point]) -> io::Result<()> {
    writeln!(w, "{L1_CSV_HEADER}")?;
    for p in points {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", p.t, p.l1, p.epsilon)?;
    }
    Ok(())
}
