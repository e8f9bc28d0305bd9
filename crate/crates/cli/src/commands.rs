use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use ptw_core::analytics::{diffusion_coefficient, variance_law, Method};
use ptw_core::ensemble::{
    fit_diffusion, kernel_self_test, l1_vs_diffusion_limit, run_density, run_variance_ensemble, write_fit_csv,
    write_l1_csv, write_variance_csv, EnsembleConfig, Grid, GridSpec, L1Config,
};
use ptw_core::params::{nondimensionalize, DimensionalParams, ScaledParams};
use ptw_core::rng::RngStream;
use ptw_core::sampler::{simulate_path, tortuosity, write_path_csv};

use crate::manifest::{manifest_path, KeyValues, RunManifest};
use crate::{CliError, DcoefArgs, DensityArgs, GridArgs, L1Args, ModelArgs, SimulateArgs, VarianceArgs};

const DEFAULT_ALPHA: f64 = 1.0;
const LARGE_DT: f64 = 0.5;

/// Human-readable number at 6 significant digits.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn effective_seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var("PTW_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("PTW_SEED must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

impl ModelArgs {
    /// Resolves alpha from whichever parameter style was given and records
    /// the inputs under their flag names.
    fn resolve(&self, default: Option<f64>, params: &mut KeyValues) -> Result<f64, CliError> {
        match (self.alpha, self.a, self.b, self.c) {
            (Some(alpha), None, None, None) => {
                ScaledParams::new(alpha)?;
                params.push("alpha", alpha);
                Ok(alpha)
            }
            (None, Some(a), Some(b), Some(c)) => {
                let n = nondimensionalize(&DimensionalParams { a, b, c })?;
                params.push("a", a);
                params.push("b", b);
                params.push("c", c);
                Ok(n.scaled.alpha())
            }
            (None, None, None, None) => match default {
                Some(alpha) => {
                    params.push("alpha", alpha);
                    Ok(alpha)
                }
                None => Err(CliError::Usage("supply either --alpha or all of --a --b --c".into())),
            },
            _ => Err(CliError::Usage("use either --alpha or --a --b --c, not both".into())),
        }
    }
}

impl GridArgs {
    fn spec(&self, params: &mut KeyValues) -> Result<GridSpec, CliError> {
        params.push("bins", self.bins);
        match (self.x_min, self.x_max) {
            (Some(lo), Some(hi)) => {
                params.push("x-min", lo);
                params.push("x-max", hi);
                Ok(GridSpec::Fixed(Grid::new(lo, hi, self.bins)?))
            }
            _ => {
                params.push("half-width", self.half_width);
                if self.bins == 0 || !(self.half_width > 0.0) {
                    return Err(CliError::Usage("--bins and --half-width must be positive".into()));
                }
                Ok(GridSpec::Scaled {
                    half_width_sigmas: self.half_width,
                    n_bins: self.bins,
                })
            }
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

fn finish(
    command: &str,
    params: KeyValues,
    seed: Option<u64>,
    started: Instant,
    outputs: Vec<PathBuf>,
) -> Result<(), CliError> {
    let Some(primary) = outputs.first() else {
        return Ok(());
    };
    let path = manifest_path(primary);
    RunManifest {
        command: command.to_string(),
        params,
        master_seed: seed,
        duration: started.elapsed(),
        outputs,
    }
    .write(&path)?;
    println!("manifest: {}", path.display());
    Ok(())
}

pub fn dcoef(args: &DcoefArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut params = KeyValues::default();
    let alpha = args.model.resolve(None, &mut params)?;
    params.push("method", &args.method);
    let methods: Vec<Method> = if args.method == "all" {
        Method::ALL.to_vec()
    } else {
        vec![args.method.parse()?]
    };

    println!("alpha = {}", sig6(alpha));
    let mut rows = Vec::new();
    for m in methods {
        let r = diffusion_coefficient(alpha, m)?;
        println!("D = {}  method = {}  est_error = {:.2e}", sig6(r.value), r.method, r.est_error);
        rows.push(r);
    }

    if let Some(out) = &args.out {
        params.push("out", out.display());
        let mut w = create(out)?;
        writeln!(w, "alpha,method,value,est_error")?;
        for r in &rows {
            writeln!(w, "{alpha:.16e},{},{:.16e},{:.16e}", r.method, r.value, r.est_error)?;
        }
        w.flush()?;
        finish("dcoef", params, None, started, vec![out.clone()])?;
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut params = KeyValues::default();
    let alpha = args.model.resolve(Some(DEFAULT_ALPHA), &mut params)?;
    let seed = effective_seed(args.seed)?;
    let cfg = EnsembleConfig {
        n_traj: 2,
        alpha,
        dt: args.dt,
        t_end: args.t_end,
        output_stride: 1,
        master_seed: seed,
    };
    let n_steps = cfg.n_steps()?;
    if args.dt > LARGE_DT {
        warn!("dt = {} exceeds {LARGE_DT}; the position quadrature loses accuracy", args.dt);
    }
    for (k, v) in [("dt", args.dt), ("t-end", args.t_end)] {
        params.push(k, v);
    }
    params.push("seed", seed);
    params.push("stream", args.stream);
    params.push("out", args.out.display());

    let path = simulate_path(alpha, args.dt, n_steps, &mut RngStream::new(seed, args.stream))?;
    let mut w = create(&args.out)?;
    write_path_csv(&mut w, &path)?;
    w.flush()?;

    println!("wrote {} states to {}", path.len(), args.out.display());
    println!("path length / net displacement = {}", sig6(tortuosity(&path)));
    finish("simulate", params, Some(seed), started, vec![args.out.clone()])
}

fn default_fit_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "variance".into());
    out.with_file_name(format!("{stem}.fit.csv"))
}

pub fn variance(args: &VarianceArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut params = KeyValues::default();
    let alpha = args.model.resolve(Some(DEFAULT_ALPHA), &mut params)?;
    let seed = effective_seed(args.seed)?;
    let cfg = EnsembleConfig {
        n_traj: args.n_traj,
        alpha,
        dt: args.dt,
        t_end: args.t_end,
        output_stride: args.stride,
        master_seed: seed,
    };
    cfg.validate()?;
    if args.dt > LARGE_DT {
        warn!("dt = {} exceeds {LARGE_DT}; the position quadrature loses accuracy", args.dt);
    }
    let fit_out = args.fit_out.clone().unwrap_or_else(|| default_fit_path(&args.out));
    params.push("n-traj", args.n_traj);
    params.push("dt", args.dt);
    params.push("t-end", args.t_end);
    params.push("stride", args.stride);
    params.push("seed", seed);
    params.push("out", args.out.display());
    params.push("fit-out", fit_out.display());

    let series = run_variance_ensemble(&cfg)?;
    let d_theory = diffusion_coefficient(alpha, Method::ClosedForm)?.value;
    let fit = fit_diffusion(&series, d_theory)?;

    let mut w = create(&args.out)?;
    write_variance_csv(&mut w, &series)?;
    w.flush()?;
    let mut w = create(&fit_out)?;
    write_fit_csv(&mut w, &fit)?;
    w.flush()?;

    println!("alpha = {}  N = {}  T = {}", sig6(alpha), args.n_traj, sig6(args.t_end));
    println!("fit window = [{}, {}] ({} points)", sig6(fit.window.0), sig6(fit.window.1), fit.n_points);
    println!("D simulated  = {}", sig6(fit.d_hat));
    println!("D theory     = {}", sig6(fit.d_theory));
    println!("rel. error   = {}%", sig6(100.0 * fit.rel_error));
    println!("residual rms = {}", sig6(fit.residual_rms));
    finish("variance", params, Some(seed), started, vec![args.out.clone(), fit_out])
}

pub fn density(args: &DensityArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut params = KeyValues::default();
    let alpha = args.model.resolve(Some(DEFAULT_ALPHA), &mut params)?;
    let seed = effective_seed(args.seed)?;
    let grid = args.grid.spec(&mut params)?;
    let cfg = EnsembleConfig {
        n_traj: args.n_traj,
        alpha,
        dt: args.dt,
        t_end: args.t_end,
        output_stride: 1,
        master_seed: seed,
    };
    cfg.validate()?;
    params.push("n-traj", args.n_traj);
    params.push("dt", args.dt);
    params.push("t-end", args.t_end);
    params.push("seed", seed);
    params.push("out", args.out.display());

    let n_bins = args.grid.bins;
    if args.n_traj < n_bins * n_bins {
        warn!(
            "{} particles for {} bins: statistically meaningless grid occupancy",
            args.n_traj,
            n_bins * n_bins
        );
    }

    let hist = run_density(&cfg, &grid)?;
    let mut w = create(&args.out)?;
    hist.write_csv(&mut w)?;
    w.flush()?;

    let q = hist.quadrant_masses();
    let q_mean = q.iter().sum::<f64>() / 4.0;
    let sigma = (q_mean * (1.0 - q_mean) / args.n_traj as f64).sqrt();
    let worst = q.iter().map(|m| (m - q_mean).abs()).fold(0.0, f64::max);
    println!(
        "quadrant masses = {}, {}, {}, {}",
        sig6(q[0]),
        sig6(q[1]),
        sig6(q[2]),
        sig6(q[3])
    );
    if sigma > 0.0 {
        println!("max quadrant deviation = {} sigma", sig6(worst / sigma));
    }
    println!("outside fraction = {}", sig6(hist.outside_fraction()));
    println!(
        "second moment = {} (exact law {})",
        sig6(hist.second_moment()),
        sig6(variance_law(args.t_end, alpha)?)
    );
    finish("density", params, Some(seed), started, vec![args.out.clone()])
}

pub fn l1(args: &L1Args) -> Result<(), CliError> {
    let started = Instant::now();
    let mut params = KeyValues::default();
    let alpha = args.model.resolve(Some(DEFAULT_ALPHA), &mut params)?;
    let seed = effective_seed(args.seed)?;
    let grid = args.grid.spec(&mut params)?;
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    params.push("epsilons", join(&args.epsilons));
    params.push("times", join(&args.times));
    params.push("n-traj", args.n_traj);
    params.push("dt", args.dt);
    params.push("seed", seed);
    params.push("self-test", args.self_test);
    params.push("out", args.out.display());

    let mut rows = Vec::new();
    for &epsilon in &args.epsilons {
        let cfg = L1Config {
            alpha,
            epsilon,
            t_macro: args.times.clone(),
            n_traj: args.n_traj,
            dt: args.dt,
            master_seed: seed,
            grid,
        };
        let pts = l1_vs_diffusion_limit(&cfg)?;
        for p in &pts {
            println!("eps = {}  t = {}  L1 = {}", sig6(p.epsilon), sig6(p.t), sig6(p.l1));
        }
        rows.extend(pts);
    }
    let mut w = create(&args.out)?;
    write_l1_csv(&mut w, &rows)?;
    w.flush()?;

    if args.self_test {
        let d = diffusion_coefficient(alpha, Method::ClosedForm)?.value;
        for &t in &args.times {
            let r = kernel_self_test(d, t, args.n_traj, &grid, seed)?;
            println!(
                "self-test t = {}: L1 = {}  noise floor = {}  ratio = {}",
                sig6(t),
                sig6(r.l1_self),
                sig6(r.noise_floor),
                sig6(r.ratio())
            );
        }
    }
    finish("l1", params, Some(seed), started, vec![args.out.clone()])
}
