use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gossip_age_cli::{commands, exit, CliError, Config, Report};

/// Age of gossip networks: exact solver, simulator and experiments.
#[derive(Debug, Parser)]
#[command(name = "gossip-age", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Main CSV output; extra artifacts go next to it. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact stationary ages from the subset recursion.
    Exact,
    /// Replicated Monte Carlo run of one network and protocol.
    Simulate,
    /// Named experiment (see `--list`) or the custom size sweep.
    Sweep {
        name: Option<String>,
        #[arg(long)]
        list: bool,
    },
    /// Solve the energy-harvesting caching MDP.
    Mdp,
    /// GP-UCB source-rate allocation.
    Bayesopt,
    /// Log-log fit of two columns of a CSV.
    Fit {
        input: PathBuf,
        #[arg(long, default_value = "n")]
        x: String,
        #[arg(long, default_value = "v_hat")]
        y: String,
    },
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(report: &Report, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            write(path, &report.csv())?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
            for (suffix, text) in &report.files {
                write(&path.with_file_name(format!("{stem}_{suffix}.csv")), text)?;
            }
        }
        None => {
            print!("{}", report.csv());
            for (suffix, text) in &report.files {
                println!("# {suffix}");
                print!("{text}");
            }
        }
    }
    eprint!("{}", report.summary());
    Ok(())
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let base = commands::config_base(cli.config.as_deref());
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let report = match cli.command {
        Command::Exact => commands::exact(&cfg, &base)?,
        Command::Simulate => commands::simulate(&cfg, &base, seed)?,
        Command::Sweep { list: true, .. } => {
            for name in gossip_age_cli::EXPERIMENTS {
                println!("{name}");
            }
            return Ok(exit::OK);
        }
        Command::Sweep { name, .. } => commands::sweep(&cfg, &base, name.as_deref(), seed)?,
        Command::Mdp => commands::mdp(&cfg)?,
        Command::Bayesopt => commands::bayesopt(&cfg, &base, seed)?,
        Command::Fit { input, x, y } => {
            let text = std::fs::read_to_string(&input).map_err(|source| CliError::Io {
                path: input.clone(),
                source,
            })?;
            let f = commands::fit_csv(&text, &x, &y)?;
            println!("slope,intercept,r2\n{},{},{}", f.slope, f.intercept, f.r2);
            return Ok(exit::OK);
        }
    };
    emit(&report, cli.out.as_deref())?;
    Ok(if report.passed() {
        exit::OK
    } else {
        exit::TOLERANCE
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::USAGE as u8)
        }
    }
}
