mod commands;
mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use manifest::{config_to_args, KeyValues};

#[derive(Debug, Parser)]
#[command(name = "ptw", version, about = "Persistent Turning Walker simulation and analysis")]
struct Cli {
    /// Maximum number of worker threads for ensembles (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// key=value file with default flag values; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the diffusion coefficient D(alpha).
    #[command(allow_negative_numbers = true)]
    Dcoef(DcoefArgs),
    /// Simulate one trajectory and write it as CSV.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Ensemble mean squared displacement and slope fit of D.
    #[command(allow_negative_numbers = true)]
    Variance(VarianceArgs),
    /// Histogram of positions at the final time.
    #[command(allow_negative_numbers = true)]
    Density(DensityArgs),
    /// L1 distance to the diffusion limit for several epsilons.
    #[command(allow_negative_numbers = true)]
    L1(L1Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Dcoef(_) => "dcoef",
            Command::Simulate(_) => "simulate",
            Command::Variance(_) => "variance",
            Command::Density(_) => "density",
            Command::L1(_) => "l1",
        }
    }
}

const COMMANDS: [&str; 5] = ["dcoef", "simulate", "variance", "density", "l1"];

/// Either the scaled `--alpha` or the physical `--a --b --c`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Dimensionless noise strength.
    #[arg(long, conflicts_with_all = ["a", "b", "c"])]
    pub alpha: Option<f64>,
    /// Curvature relaxation frequency (1/time).
    #[arg(long, requires_all = ["b", "c"])]
    pub a: Option<f64>,
    /// Curvature noise intensity.
    #[arg(long, requires_all = ["a", "c"])]
    pub b: Option<f64>,
    /// Speed (length/time).
    #[arg(long, requires_all = ["a", "b"])]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DcoefArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// closed_form, quadrature, series or all.
    #[arg(long, default_value = "closed_form")]
    pub method: String,
    /// Optional CSV with alpha,method,value,est_error.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long = "t-end", default_value_t = 120.0)]
    pub t_end: f64,
    /// Master seed; PTW_SEED overrides it when set.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Trajectory index within the seed.
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    #[arg(long, default_value = "path.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "n-traj", default_value_t = 2000)]
    pub n_traj: usize,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long = "t-end", default_value_t = 1200.0)]
    pub t_end: f64,
    /// Steps between recorded samples.
    #[arg(long, default_value_t = 20)]
    pub stride: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "variance.csv")]
    pub out: PathBuf,
    /// Fit report CSV (default: `<out stem>.fit.csv`).
    #[arg(long = "fit-out")]
    pub fit_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Bins per axis.
    #[arg(long, default_value_t = 61)]
    pub bins: usize,
    /// Half-width of the domain in kernel standard deviations sqrt(D t).
    #[arg(long = "half-width", default_value_t = 6.0, conflicts_with_all = ["x_min", "x_max"])]
    pub half_width: f64,
    /// Fixed domain lower edge (both axes).
    #[arg(long = "x-min", requires = "x_max", allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    /// Fixed domain upper edge (both axes).
    #[arg(long = "x-max", requires = "x_min", allow_hyphen_values = true)]
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "n-traj", default_value_t = 10_000)]
    pub n_traj: usize,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long = "t-end", default_value_t = 30.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "density.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct L1Args {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated scaling parameters in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.2,0.1")]
    pub epsilons: Vec<f64>,
    /// Comma-separated macroscopic output times.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,3,4,5")]
    pub times: Vec<f64>,
    #[arg(long = "n-traj", default_value_t = 10_000)]
    pub n_traj: usize,
    /// Microscopic step size.
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also report the sampling noise floor of the histogram comparison.
    #[arg(long = "self-test")]
    pub self_test: bool,
    #[arg(long, default_value = "l1.csv")]
    pub out: PathBuf,
}

pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ptw_core::PtwError> for CliError {
    fn from(e: ptw_core::PtwError) -> Self {
        match e {
            ptw_core::PtwError::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Splices values from `--config` into the argument list right after the
/// subcommand, so explicit flags are parsed last and win.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(cmd_pos) = args.iter().position(|a| COMMANDS.contains(&a.as_str())) else {
        return Ok(args);
    };
    let mut config_path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            config_path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            config_path = Some(p.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };
    let config = KeyValues::read(std::path::Path::new(&path)).map_err(CliError::Usage)?;
    let injected = config_to_args(&config, &args[cmd_pos], &args[cmd_pos + 1..]).map_err(CliError::Usage)?;
    let mut out = args[..=cmd_pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[cmd_pos + 1..]);
    Ok(out)
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| {
            let level = match record.level() {
                log::Level::Warn => "warning".to_string(),
                other => other.as_str().to_lowercase(),
            };
            writeln!(buf, "{level}: {}", record.args())
        })
        .init();
}

fn run(raw: Vec<OsString>) -> Result<(), CliError> {
    let args: Vec<String> = raw.into_iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let args = expand_config(args)?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            eprint!("{e}");
            return Err(CliError::Usage(String::new()));
        }
        Err(e) => {
            let rendered = e.to_string();
            let summary = rendered
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect::<Vec<_>>()
                .join(" ");
            let summary = summary.strip_prefix("error: ").unwrap_or(&summary).to_string();
            return Err(CliError::Usage(format!("{summary} (see `ptw --help`)")));
        }
    };

    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }

    let name = cli.command.name();
    match cli.command {
        Command::Dcoef(a) => commands::dcoef(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Variance(a) => commands::variance(&a),
        Command::Density(a) => commands::density(&a),
        Command::L1(a) => commands::l1(&a),
    }
    .map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{name}: {m}")),
        other => other,
    })
}

fn main() -> ExitCode {
    init_logging();
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message().is_empty() {
                eprintln!("error: {}", e.message());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
