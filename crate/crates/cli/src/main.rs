use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use num_complex::Complex64;

use nearunit::analysis::{analyze, difference, ingest_csv, pacf_order, AnalyzeOptions, Column};
use nearunit::montecarlo::{run_power_study, theorem1_calibration, McConfig};
use nearunit::process::{build_theta_n, simulate};
use nearunit::report::{
    emit_report, estimate_report, plot_tables, test_run, Format, Report, SimulationReport,
};
use nearunit::rng::replication_rng;
use nearunit::urtest::{resolve_sign, select_alpha_max};
use nearunit::{
    ArPath, Error, Grid, ModelConfig, NoiseSpec, Result, RootSign, SecondaryRoots, SignMode,
};

#[derive(Parser)]
#[command(name = "near-unit", version, about = "Extent-of-instability inference for nearly unstable AR(p) series")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed for simulation and Monte Carlo streams.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Constant c in rho_n = 1 - c n^(-alpha).
    #[arg(long, global = true, default_value_t = 1.0)]
    c: f64,

    /// Type-I risk of each test.
    #[arg(long, global = true, default_value_t = 0.05)]
    epsilon: f64,

    /// Sign of the unit root lambda_1.
    #[arg(long, global = true, value_enum, default_value_t = SignArg::Pos)]
    sign: SignArg,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,

    /// Write results into this directory instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Pos,
    Neg,
    Auto,
}

impl From<SignArg> for SignMode {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Pos => SignMode::Positive,
            SignArg::Neg => SignMode::Negative,
            SignArg::Auto => SignMode::Auto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    StudentT,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path of the model.
    Simulate(ModelArgs),
    /// Raw least-squares fit, plus the hierarchical fit when --alpha0 is given.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        alpha0: Option<f64>,
    },
    /// Test H0: alpha = alpha0 against alpha > alpha0.
    Test {
        #[command(flatten)]
        input: InputArgs,
        /// Test values, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        alpha0: Vec<f64>,
    },
    /// Select alpha_max over a grid of test values.
    Select {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Monte Carlo rejection frequencies over a grid.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Z^2 values kept per test value for the boxplot table.
        #[arg(long, default_value_t = nearunit::montecarlo::DEFAULT_RESERVOIR_CAP)]
        reservoir_cap: usize,
        /// Report moments of the standardized alpha errors instead.
        #[arg(long)]
        calibrate: bool,
    },
    /// Full pipeline on an observed series: order choice, selection, intervals.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Largest PACF lag inspected when choosing p.
        #[arg(long, default_value_t = 10)]
        max_lag: usize,
        /// PACF band multiplier (band = multiplier / sqrt(n)).
        #[arg(long, default_value_t = 1.96)]
        threshold: f64,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Secondary eigenvalues (e.g. 0.5 or 0.3+0.2i), comma separated;
    /// drawn at random when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<Complex64>,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    noise: NoiseArg,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    /// Degrees of freedom of Student-t noise.
    #[arg(long, default_value_t = 5.0)]
    df: f64,
}

#[derive(Args)]
struct InputArgs {
    /// Delimited text file holding the series.
    #[arg(long)]
    input: PathBuf,
    /// Column name or 0-based index (default: last column).
    #[arg(long)]
    column: Option<Column>,
    /// Autoregressive order.
    #[arg(long, conflicts_with = "auto_p")]
    p: Option<usize>,
    /// Choose p from the PACF of the differenced series.
    #[arg(long)]
    auto_p: bool,
}

#[derive(Args)]
struct GridArgs {
    /// Grid as a comma list or start:stop:step (default 0.5:0.98:0.02).
    #[arg(long)]
    grid: Option<String>,
}

impl GridArgs {
    fn grid(&self) -> Result<Grid> {
        match &self.grid {
            None => Ok(Grid::standard()),
            Some(spec) => parse_grid(spec),
        }
    }
}

fn parse_grid(spec: &str) -> Result<Grid> {
    let bad = || Error::InvalidGrid(format!("cannot parse grid {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=count).map(|k| start + k as f64 * step).collect()
        }
        [list] if !list.trim().is_empty() => {
            list.split(',').map(num).collect::<Result<Vec<_>>>()?
        }
        [_] => Vec::new(),
        _ => return Err(bad()),
    };
    Grid::new(values)
}

fn fixed_sign(mode: SignArg) -> Result<RootSign> {
    match mode {
        SignArg::Pos => Ok(RootSign::Positive),
        SignArg::Neg => Ok(RootSign::Negative),
        SignArg::Auto => Err(Error::InvalidConfig(
            "--sign auto needs observed data; use pos or neg".into(),
        )),
    }
}

fn model_config(g: &Global, m: &ModelArgs) -> Result<ModelConfig> {
    let secondary = if m.lambda.is_empty() && m.p > 1 {
        SecondaryRoots::Random
    } else {
        SecondaryRoots::Fixed(m.lambda.clone())
    };
    let noise = match m.noise {
        NoiseArg::Gaussian => NoiseSpec::Gaussian {
            variance: m.variance,
        },
        NoiseArg::StudentT => NoiseSpec::StudentT {
            df: m.df,
            variance: m.variance,
        },
    };
    let cfg = ModelConfig::new(m.n, m.alpha)
        .with_order(m.p, secondary)
        .with_sign(fixed_sign(g.sign)?)
        .with_c(g.c)
        .with_seed(g.seed)
        .with_noise(noise);
    cfg.validate()?;
    Ok(cfg)
}

fn load(input: &InputArgs) -> Result<(ArPath, usize)> {
    let series = ingest_csv(&input.input, input.column.as_ref())?;
    info!("read {} values of {} from {}", series.n(), series.name, input.input.display());
    let p = order(input, &series.values)?;
    Ok((series.to_path(), p))
}

fn order(input: &InputArgs, values: &[f64]) -> Result<usize> {
    match (input.p, input.auto_p) {
        (Some(p), _) => Ok(p),
        (None, true) => pacf_order(&difference(values)?, 10, 1.96),
        (None, false) => Ok(1),
    }
}

struct Output {
    format: Format,
    dir: Option<PathBuf>,
}

impl Output {
    fn extension(&self) -> &'static str {
        match self.format {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }

    fn write_files(&self, dir: &Path, files: Vec<(String, Vec<u8>)>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in files {
            let path = dir.join(name);
            std::fs::write(&path, bytes)?;
            info!("wrote {}", path.display());
        }
        Ok(())
    }

    /// Emits a report plus any extra named tables, all after computation.
    fn emit<R: Report>(&self, report: &R, extra: Vec<(String, Vec<u8>)>) -> Result<()> {
        let bytes = emit_report(report, self.format)?;
        match &self.dir {
            Some(dir) => {
                let mut files = vec![(format!("{}.{}", R::KIND, self.extension()), bytes)];
                files.extend(extra);
                self.write_files(dir, files)
            }
            None => {
                use std::io::Write;
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(&bytes)?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let out = Output {
        format: match g.format {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        },
        dir: g.out.clone(),
    };
    match &cli.command {
        Command::Simulate(m) => {
            let cfg = model_config(g, m)?;
            let mut rng = replication_rng(cfg.seed, 0);
            let theta = build_theta_n(&cfg, &mut rng)?;
            let path = simulate(&cfg, &theta, &mut rng)?;
            out.emit(&SimulationReport::from(&path), Vec::new())
        }
        Command::Estimate { input, alpha0 } => {
            let (path, p) = load(input)?;
            let hier = match alpha0 {
                Some(a) => Some((*a, g.c, resolve_sign(g.sign.into(), &path, p)?)),
                None => None,
            };
            out.emit(&estimate_report(&path, p, hier)?, Vec::new())
        }
        Command::Test { input, alpha0 } => {
            let (path, p) = load(input)?;
            let sign = resolve_sign(g.sign.into(), &path, p)?;
            out.emit(&test_run(&path, p, alpha0, g.c, sign, g.epsilon)?, Vec::new())
        }
        Command::Select { input, grid } => {
            let (path, p) = load(input)?;
            let sign = resolve_sign(g.sign.into(), &path, p)?;
            let sel = select_alpha_max(&path, p, &grid.grid()?, g.c, sign, g.epsilon)?;
            out.emit(&sel, Vec::new())
        }
        Command::Mc {
            model,
            grid,
            replications,
            workers,
            reservoir_cap,
            calibrate,
        } => {
            let mut cfg = McConfig::new(model_config(g, model)?, *replications)
                .with_grid(grid.grid()?)
                .with_epsilon(g.epsilon);
            cfg.workers = *workers;
            cfg.reservoir_cap = *reservoir_cap;
            if *calibrate {
                out.emit(&theorem1_calibration(&cfg)?, Vec::new())
            } else {
                let summary = run_power_study(&cfg)?;
                let extra = if out.dir.is_some() {
                    plot_tables(&summary)?
                        .into_iter()
                        .map(|(name, bytes)| (name.to_string(), bytes))
                        .collect()
                } else {
                    Vec::new()
                };
                out.emit(&summary, extra)
            }
        }
        Command::Analyze {
            input,
            grid,
            max_lag,
            threshold,
        } => {
            let series = ingest_csv(&input.input, input.column.as_ref())?;
            let options = AnalyzeOptions {
                c: g.c,
                epsilon: g.epsilon,
                grid: grid.grid()?,
                sign: g.sign.into(),
                p: input.p,
                max_lag: *max_lag,
                threshold_multiplier: *threshold,
            };
            let report = analyze(&series, &options)?;
            eprintln!("{}", report.summary_line());
            out.emit(&report, Vec::new())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
