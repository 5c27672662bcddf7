use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use langevin_core::harness::{self, output, Config, HarnessError, PRESETS};
use langevin_core::resnet::{generate_ellipses, probability_grid, Architecture, EllipseSpec, Scheme, VerletNet};
use langevin_core::smoothing::{self, ColeHopfSign, SmoothingConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "langevin",
    version,
    about = "Langevin-dynamics optimizers: experiments and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or bundled preset and write CSV artifacts.
    Run(RunArgs),
    /// Train the ellipse classifier (same as `run` on an ellipse config).
    EllipseTrain(RunArgs),
    /// Kernel / Cole-Hopf / mean-field diagnostics of a 1D objective.
    SmoothDiagnose(SmoothArgs),
    /// Generate the two-ellipse dataset as CSV.
    EllipseGen(GenArgs),
    /// Evaluate class probabilities of saved parameters on a grid.
    GridExport(GridArgs),
    /// List or print bundled presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Preset name or path to a TOML config.
    target: String,
    /// Config integers are signed 64-bit, so seeds stop at 2^63 - 1.
    #[arg(long, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Output directory (default: the config's `output`, else `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Override a config key, e.g. `--set lambda=2.0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SmoothArgs {
    #[arg(long, default_value = "doublewell1d")]
    objective: String,
    #[arg(long)]
    osc_delta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Kernel variance.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Use the `+(1/beta) log` form of the Cole-Hopf potential.
    #[arg(long)]
    literal_cole_hopf: bool,
    #[arg(long, default_value = "out/smoothing")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 500)]
    n_per_class: usize,
    #[arg(long, default_value_t = 0.05)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "dataset.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// `params.csv` written by `ellipse-train`.
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value = "verlet")]
    scheme: Scheme,
    #[arg(long, num_args = 2, default_values_t = [-2.0, 2.0], allow_hyphen_values = true)]
    x_range: Vec<f64>,
    #[arg(long, num_args = 2, default_values_t = [-4.0, 4.0], allow_hyphen_values = true)]
    y_range: Vec<f64>,
    #[arg(long, default_value_t = 161)]
    resolution: usize,
    #[arg(long, default_value = "grid.csv")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }
}

fn config_failure(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: error.into(),
    }
}

fn parse_overrides(args: &RunArgs) -> Result<Vec<(String, String)>, Failure> {
    let mut overrides = Vec::new();
    for item in &args.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| config_failure(anyhow!("--set expects KEY=VALUE, got {item:?}")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    Ok(overrides)
}

fn run(args: &RunArgs, require_ellipse: bool) -> Result<u8, Failure> {
    let overrides = parse_overrides(args)?;
    let config = harness::resolve(&args.target, &overrides).map_err(config_failure)?;
    if require_ellipse && !matches!(config, Config::Ellipse(_)) {
        return Err(config_failure(anyhow!("{} is not an ellipse config", args.target)));
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(config.name()));
    let report = match harness::run_config(&config, args.workers, &out) {
        Ok(r) => r,
        Err(HarnessError::Config(e)) => return Err(config_failure(e)),
        Err(HarnessError::Io(e)) => return Err(anyhow::Error::from(e).context("writing artifacts").into()),
    };
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    if report.failures.is_empty() {
        return Ok(0);
    }
    for (run, iteration, message) in &report.failures {
        eprintln!("run {run} aborted at iteration {iteration}: {message}");
    }
    eprintln!("{} run(s) aborted; partial artifacts kept", report.failures.len());
    Ok(EXIT_NUMERICAL)
}

fn smooth(args: &SmoothArgs) -> Result<u8, Failure> {
    let d = SmoothingConfig::default();
    let cfg = SmoothingConfig {
        objective: args.objective.clone(),
        osc_delta: args.osc_delta.unwrap_or(d.osc_delta),
        beta: args.beta.unwrap_or(d.beta),
        lambda: args.lambda.unwrap_or(d.lambda),
        gamma: args.gamma.unwrap_or(d.gamma),
        h: args.h.unwrap_or(d.h),
        lo: args.lo.unwrap_or(d.lo),
        hi: args.hi.unwrap_or(d.hi),
        points: args.points.unwrap_or(d.points),
        cole_hopf_sign: if args.literal_cole_hopf {
            ColeHopfSign::Literal
        } else {
            ColeHopfSign::Regularized
        },
        ..d
    };
    let (report, curves) = smoothing::diagnose(&cfg).map_err(config_failure)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let json = serde_json::to_string_pretty(&report).context("serializing report")?;
    let report_path = args.out.join("report.json");
    std::fs::write(&report_path, json + "\n").with_context(|| format!("writing {}", report_path.display()))?;
    let rows = curves.iter().map(|c| {
        vec![
            output::real(c.x),
            output::real(c.phi),
            output::real(c.phi_kernel_h),
            output::real(c.phi_colehopf_gamma),
        ]
    });
    let curves_path = output::write_csv(
        &args.out.join("curves.csv"),
        &["x", "phi", "phi_kernel_h", "phi_colehopf_gamma"],
        rows,
    )
    .context("writing curves")?;
    println!("wrote {}", report_path.display());
    println!("wrote {}", curves_path.display());
    Ok(0)
}

fn generate(args: &GenArgs) -> Result<u8, Failure> {
    if args.n_per_class == 0 || args.noise_sigma.is_nan() || args.noise_sigma < 0.0 {
        return Err(config_failure(anyhow!("need n_per_class >= 1 and noise_sigma >= 0")));
    }
    let spec = EllipseSpec {
        n_per_class: args.n_per_class,
        noise_sigma: args.noise_sigma,
        ..EllipseSpec::default()
    };
    let data = generate_ellipses(&spec, args.seed);
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let path = output::write_dataset(&data, &args.out).context("writing dataset")?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn grid(args: &GridArgs) -> Result<u8, Failure> {
    let (x, y) = ((args.x_range[0], args.x_range[1]), (args.y_range[0], args.y_range[1]));
    if args.resolution < 2 || x.0 >= x.1 || y.0 >= y.1 {
        return Err(config_failure(anyhow!("need resolution >= 2 and non-empty ranges")));
    }
    let params = output::read_params(&args.params).map_err(config_failure)?;
    let net = VerletNet::new(Architecture::standard(args.scheme), params).map_err(config_failure)?;
    let g = probability_grid(&net, x, y, (args.resolution, args.resolution));
    let path = output::write_grid(&g, &args.out).context("writing grid")?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn presets(action: &PresetAction) -> Result<u8, Failure> {
    match action {
        PresetAction::List => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
        }
        PresetAction::Show { name } => {
            let src = harness::preset_source(name).ok_or_else(|| config_failure(anyhow!("unknown preset {name:?}")))?;
            print!("{src}");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args, false),
        Command::EllipseTrain(args) => run(args, true),
        Command::SmoothDiagnose(args) => smooth(args),
        Command::EllipseGen(args) => generate(args),
        Command::GridExport(args) => grid(args),
        Command::Presets { action } => presets(action),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
