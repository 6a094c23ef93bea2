mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use commands::{Ctx, Summary};
use config::{lint, ManifestInfo, SimConfig};

#[derive(Parser, Debug)]
#[command(name = "mhdbfed", version, about = "Damped MHD pseudospectral solver and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory [default: `out`, or the input directory for `report`].
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for random initial conditions and perturbations; overrides `ic.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for independent sweep cells.
    #[arg(long, global = true, env = "MHDBFED_THREADS")]
    threads: Option<usize>,

    /// Treat warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation with monitors.
    Run,
    /// Convergence study against a manufactured solution.
    Mms,
    /// Runs over the product of the `[sweep]` parameter lists.
    Sweep,
    /// Sensitivity of the final state to small perturbations of the initial one.
    Dependence,
    /// Summarise stored time series.
    Report {
        /// Directory searched (recursively) for time-series files.
        dir: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Mms => "mms",
            Command::Sweep => "sweep",
            Command::Dependence => "dependence",
            Command::Report { .. } => "report",
        }
    }
}

fn threads(cli: &Cli) -> Result<usize> {
    match cli.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn execute(cli: &Cli, out: &Path, warnings: &mut Vec<String>) -> Result<Summary> {
    let command = cli.command.name();
    let threads = threads(cli)?;
    if let Command::Report { dir } = &cli.command {
        let info = ManifestInfo {
            command: command.into(),
            config_path: dir.clone(),
            out: out.to_path_buf(),
            seed: cli.seed.unwrap_or(0),
            threads,
            version: env!("CARGO_PKG_VERSION").into(),
        };
        let text = toml::to_string(&toml::Table::from_iter([(
            "manifest".to_string(),
            toml::Value::try_from(&info)?,
        )]))?;
        std::fs::write(out.join("manifest.toml"), text)?;
        return commands::report(dir, out);
    }

    let Some(config_path) = &cli.config else {
        bail!("`{command}` needs --config");
    };
    let config = SimConfig::load(config_path)?;
    for w in lint(&config, command) {
        eprintln!("warning: {w}");
        warnings.push(w);
    }
    if cli.strict && !warnings.is_empty() {
        bail!("{} warning(s) with --strict", warnings.len());
    }
    let seed = cli.seed.unwrap_or(config.ic.seed);
    let resolved = config.resolved(ManifestInfo {
        command: command.into(),
        config_path: config_path.clone(),
        out: out.to_path_buf(),
        seed,
        threads,
        version: env!("CARGO_PKG_VERSION").into(),
    });
    let manifest = out.join("manifest.toml");
    std::fs::write(&manifest, resolved.to_toml()?).with_context(|| format!("writing {}", manifest.display()))?;

    let ctx = Ctx {
        config: resolved,
        out: out.to_path_buf(),
        seed,
        threads,
    };
    match cli.command {
        Command::Run => commands::run(&ctx),
        Command::Mms => commands::mms(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Dependence => commands::dependence(&ctx),
        Command::Report { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    let out = cli.out.clone().unwrap_or_else(|| match &cli.command {
        Command::Report { dir } => dir.clone(),
        _ => PathBuf::from("out"),
    });
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: creating {}: {e}", out.display());
        return ExitCode::from(2);
    }

    let mut warnings = Vec::new();
    let (summary, code) = match execute(&cli, &out, &mut warnings) {
        Ok(mut s) => {
            s.warnings = warnings;
            let code = if s.passed { 0 } else { 1 };
            (s, code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            (Summary::failed(command, format!("{e:#}"), warnings), 2)
        }
    };
    for c in &summary.contracts {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Err(e) = summary.write(&out) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
