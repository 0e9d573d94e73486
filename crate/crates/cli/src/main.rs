//! `faeq`: finite-alphabet equalizer design, bit-exact equalization, BER
//! sweeps, hardware cost exploration and self-test.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use commands::{Job, RunManifest, UsageError};

#[derive(Parser, Debug)]
#[command(name = "faeq", version, about = "Finite-alphabet massive MU-MIMO equalization toolkit")]
struct Cli {
    /// Master seed for random channels and Monte-Carlo trials [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory receiving all outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// JSON config for the subcommand, or a run manifest to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design a finite-alphabet equalizer and write it as JSON.
    Design(commands::DesignArgs),
    /// Equalize sample vectors with a designed equalizer.
    Equalize(commands::EqualizeArgs),
    /// Monte-Carlo BER sweep; one CSV per equalizer curve.
    Ber(commands::BerArgs),
    /// Area and power of the datapath variants from a calibration file.
    Hw(commands::HwArgs),
    /// Run the acceptance checks.
    Selftest(commands::SelftestArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Design(_) => "design",
            Command::Equalize(_) => "equalize",
            Command::Ber(_) => "ber",
            Command::Hw(_) => "hw",
            Command::Selftest(_) => "selftest",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("FAEQ_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("FAEQ_THREADS must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(())
}

fn resolve(cli: &Cli) -> anyhow::Result<Job> {
    let Some(path) = &cli.config else {
        let Some(cmd) = &cli.command else {
            return Err(UsageError("a subcommand or --config is required (see --help)".into()).into());
        };
        let seed = cli.seed.unwrap_or(0);
        return Ok(match cmd {
            Command::Design(a) => Job::Design(a.resolve(seed)?),
            Command::Equalize(a) => Job::Equalize(a.resolve()?),
            Command::Ber(a) => Job::Ber(a.resolve(seed)?),
            Command::Hw(a) => Job::Hw(a.resolve()?),
            Command::Selftest(a) => Job::Selftest(a.resolve(cli.seed)),
        });
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let (command, config) = match value.get("command").and_then(|c| c.as_str()) {
        // a run manifest
        Some(c) => (c.to_string(), value.get("config").cloned().unwrap_or_default()),
        None => match &cli.command {
            Some(cmd) => (cmd.name().to_string(), value),
            None => {
                return Err(UsageError(format!(
                    "{} is not a run manifest; name the subcommand it configures",
                    path.display()
                ))
                .into())
            }
        },
    };
    if let Some(cmd) = &cli.command {
        if cmd.name() != command {
            return Err(UsageError(format!("config is for '{command}' but '{}' was requested", cmd.name())).into());
        }
    }
    let mut job = Job::from_config(&command, config)?;
    if let Some(seed) = cli.seed {
        job.set_seed(seed);
    }
    Ok(job)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    configure_threads()?;
    let job = resolve(&cli)?;
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let outcome = job.execute(&cli.out_dir)?;
    let manifest = RunManifest::new(&job, outcome.outputs.clone())?;
    let manifest_name = format!("{}_manifest.json", job.command());
    std::fs::write(cli.out_dir.join(&manifest_name), manifest.to_json()?)
        .with_context(|| format!("writing {manifest_name}"))?;
    Ok(if outcome.success { ExitCode::SUCCESS } else { ExitCode::from(3) })
}
