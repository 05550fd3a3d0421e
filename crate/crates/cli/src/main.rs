mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::RunConfig;
use run::{output_dir, Command, Failure, Run};

/// Lattice solver and ε-Nash certifier for two-player stochastic
/// differential games with BSDE payoffs.
#[derive(Debug, Parser)]
#[command(name = "sdg", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration (not needed for demo-fixedpoint).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides SDG_OUT_DIR and run.output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Only errors on stderr, nothing on stdout.
    #[arg(long)]
    quiet: bool,
}

fn load(path: &PathBuf) -> Result<(RunConfig, String, PathBuf), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let dir = path.parent().map(PathBuf::from).unwrap_or_default();
    Ok((cfg, text, dir))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();

    let loaded = match cli.config.as_ref().map(load).transpose() {
        Ok(l) => l,
        Err(f) => return report(f),
    };
    if loaded.is_none() && cli.command != Command::DemoFixedpoint {
        return report(Failure::Usage("--config is required for this command".into()));
    }
    let cfg = loaded.as_ref().map(|(c, _, _)| c);
    let out = output_dir(cli.out.as_deref(), std::env::var_os("SDG_OUT_DIR").map(PathBuf::from), cfg);
    let seed = cli.seed.or(cfg.map(|c| c.run.seed)).unwrap_or(0);

    match Run::new(cli.command, loaded, seed, out, cli.quiet).execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match &f {
        Failure::Usage(m) => eprintln!("error: {m}"),
        Failure::Check(m) => eprintln!("check failed: {m}"),
    }
    ExitCode::from(f.code())
}
