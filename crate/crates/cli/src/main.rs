use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nlspec::cli_io::{parse_config, run, ExperimentKind, RunOptions, EXIT_CONFIG};
use nlspec::Error;

/// Principal eigenvalue experiments for nonlocal dispersal operators.
#[derive(Debug, Parser)]
#[command(name = "nlspec", version)]
struct Cli {
    /// Experiment kind; must match `kind` in the config.
    #[arg(value_parser = parse_kind)]
    kind: ExperimentKind,
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `output` from the config, else ./nlspec-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; NLSPEC_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
    /// Exit 2 on any warning.
    #[arg(long)]
    strict: bool,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse()
}

fn threads(cli: Option<usize>) -> Result<Option<usize>, String> {
    let n = match std::env::var("NLSPEC_THREADS") {
        Ok(v) if !v.trim().is_empty() => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("NLSPEC_THREADS must be a positive integer, got '{v}'"))?,
        ),
        _ => cli,
    };
    match n {
        Some(0) => Err("thread count must be positive".into()),
        n => Ok(n),
    }
}

fn main_inner(cli: Cli) -> Result<i32, String> {
    let threads = threads(cli.threads)?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| format!("cannot read {}: {e}", cli.config.display()))?;
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(Error::Config(errors)) => {
            let lines: Vec<String> = errors
                .iter()
                .map(|e| format!("{}: {e}", cli.config.display()))
                .collect();
            return Err(lines.join("\n"));
        }
        Err(e) => return Err(e.to_string()),
    };
    if cfg.kind != cli.kind {
        return Err(format!(
            "{}: config kind '{}' does not match the requested kind '{}'",
            cli.config.display(),
            cfg.kind,
            cli.kind
        ));
    }
    let opts = RunOptions {
        out_dir: cli.out,
        strict: cli.strict,
        threads,
    };
    let outcome = run(&cfg, &opts).map_err(|e| e.to_string())?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for v in outcome
        .violations
        .iter()
        .chain(&outcome.nonconverged)
        .chain(&outcome.failures)
    {
        eprintln!("error: {v}");
    }
    eprintln!(
        "{} files written to {} (exit {})",
        outcome.files.len(),
        outcome.out_dir.display(),
        outcome.exit_code
    );
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("off")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let code = match main_inner(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("{msg}");
            EXIT_CONFIG
        }
    };
    ExitCode::from(code as u8)
}
