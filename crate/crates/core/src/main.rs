use clap::{Args, Parser, Subcommand};
use metasub::cli::{self, commands, ExperimentConfig, Scale, Scenario, TestMode};
use metasub::model::Kernel;
use metasub::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "metasub",
    about = "Bayesian meta-learning with a shared predictor subspace"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file, or a manifest.json from an earlier run
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset instead of a config file
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// bingham or cs
    #[arg(long)]
    kernel: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate training tasks, meta-test tasks and the truth files
    Simulate(Common),
    /// Run the meta-training Gibbs sampler
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue the chain saved in the output directory
        #[arg(long)]
        resume: bool,
    },
    /// Meta-test against the trained draws
    Test {
        #[command(flatten)]
        common: Common,
        /// Use the Frechet-mean point estimate instead of the full mixture
        #[arg(long)]
        point_estimate: bool,
    },
    /// Run a reproduction grid: fig1, table1 or trace-fixed
    Reproduce {
        scenario: Option<String>,
        #[arg(long, default_value = "desk")]
        scale: String,
        /// A reproduction manifest to re-run
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "U64")]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        kernel: Option<String>,
    },
    /// Print the version
    Version,
    /// List the named presets
    Presets,
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(name)) => cli::preset(name)?,
        (None, None) => {
            return Err(Error::Config(
                "one of --config or --preset is required".into(),
            ))
        }
    };
    if let Some(s) = c.seed {
        cfg.set_seed(s);
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(k) = &c.kernel {
        cfg.sampler.kernel = k.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => cli::cmd_simulate(&load(&c)?),
        Command::Train { common, resume } => cli::cmd_train(&load(&common)?, resume),
        Command::Test {
            common,
            point_estimate,
        } => {
            let mut cfg = load(&common)?;
            if point_estimate {
                cfg.metatest.mode = TestMode::Point;
            }
            cli::cmd_test(&cfg)
        }
        Command::Reproduce {
            scenario,
            scale,
            config,
            seed,
            out,
            kernel,
        } => {
            let (sc, sl, s0, k0) = match &config {
                Some(p) => commands::reproduce_args_from_manifest(p)?,
                None => {
                    let sc: Scenario = scenario
                        .as_deref()
                        .ok_or_else(|| {
                            Error::Config("reproduce needs a scenario or --config".into())
                        })?
                        .parse()?;
                    (sc, scale.parse::<Scale>()?, 0, Kernel::Bingham)
                }
            };
            let kernel = match kernel {
                Some(k) => k.parse()?,
                None => k0,
            };
            let out = match (out, &config) {
                (Some(o), _) => o,
                // a manifest lives in <out>/<scenario>/manifest.json
                (None, Some(p)) => p
                    .parent()
                    .and_then(|d| d.parent())
                    .map(PathBuf::from)
                    .unwrap_or_else(commands::default_reproduce_out),
                (None, None) => commands::default_reproduce_out(),
            };
            let report = cli::reproduce(sc, sl, seed.unwrap_or(s0), &out, kernel)?;
            for r in &report.rows {
                println!(
                    "{} seed{} median_sin2={:.4e} r2={} coverage={} trace={}",
                    r.cell,
                    r.seed_index,
                    r.median_sin2,
                    r.r_squared.map_or("-".into(), |v| format!("{v:.4}")),
                    r.coverage.map_or("-".into(), |v| format!("{v:.3}")),
                    r.trace_sigma_y.map_or("-".into(), |v| format!("{v:.3}")),
                );
            }
            Ok(())
        }
        Command::Version => {
            println!("{}", commands::version_string());
            Ok(())
        }
        Command::Presets => {
            for n in cli::preset_names() {
                println!("{n}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
