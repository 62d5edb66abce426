use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ulab::harness::{self, ExperimentConfig, Kind};

#[derive(Parser)]
#[command(name = "ulab", version, about = "Seeded experiments on Diophantine approximation over F_q((1/X))")]
#[command(after_help = harness::CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the `kind` key of a config file
    Run(Common),
    /// Partial-quotient degree law and convergent identities
    CfracStats(Common),
    /// Khintchine–Groshev dichotomy on sampled matrices
    Kg(Common),
    /// Logarithm-law statistic of cusp excursions
    Loglaw(Common),
    /// Tail exponent of the depth distribution
    Tail(Common),
    /// Borel–Cantelli and counting statistics for hit families
    Sprindzhuk(Common),
    /// Exponential divergence certificate
    Ed(Common),
    /// Siegel mean value check in dimension 2
    Siegel(Common),
    /// Fast consistency checks of the arithmetic kernels
    Selftest {
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<String>,
    /// Worker threads, 0 = all cores; results do not depend on it
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Further `key=value` settings, applied after the config file
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("ulab: {msg}");
    ExitCode::from(1)
}

fn build(kind: Option<Kind>, c: &Common) -> Result<ExperimentConfig, String> {
    let text = match &c.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = match (kind, text.trim().is_empty()) {
        (Some(k), true) => ExperimentConfig::new(k),
        _ => harness::parse_config_for(&text, kind).map_err(|e| e.to_string())?,
    };
    for o in &c.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{o}`"))?;
        cfg.set(k.trim(), v).map_err(|e| format!("argument `{o}`: {e}"))?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    cfg.validate().map_err(|(_, e)| e)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, common) = match &cli.command {
        Command::Selftest { workers } => {
            let results = harness::selftest(*workers);
            let mut ok = true;
            for (name, pass) in &results {
                println!("{} {name}", if *pass { "PASS" } else { "FAIL" });
                ok &= pass;
            }
            return ExitCode::from(if ok { 0 } else { 2 });
        }
        Command::Run(c) => (None, c),
        Command::CfracStats(c) => (Some(Kind::CfracStats), c),
        Command::Kg(c) => (Some(Kind::Kg), c),
        Command::Loglaw(c) => (Some(Kind::Loglaw), c),
        Command::Tail(c) => (Some(Kind::Tail), c),
        Command::Sprindzhuk(c) => (Some(Kind::Sprindzhuk), c),
        Command::Ed(c) => (Some(Kind::Ed), c),
        Command::Siegel(c) => (Some(Kind::Siegel), c),
    };
    if kind.is_none() && common.config.is_none() {
        return usage("`run` needs --config");
    }
    let cfg = match build(kind, common) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let result = harness::run(&cfg, common.workers);
    match &result {
        Ok(o) => print!("{}", o.report),
        Err(e) => eprintln!("ulab: {e}"),
    }
    ExitCode::from(harness::exit_code(&result) as u8)
}
