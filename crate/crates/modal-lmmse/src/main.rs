use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use modal_lmmse::config::CliConfig;
use modal_lmmse::{output, run_experiment, trace};

/// Tracking-in-clutter benchmark: LMMSE vs NN vs PDA.
///
/// Settings come from the defaults, then `--config`, then the flags.
#[derive(Debug, Parser)]
#[command(name = "modal-lmmse", version)]
struct Args {
    /// Key-value configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Clutter densities, comma separated.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    rho: Option<String>,
    #[arg(long, value_name = "N")]
    runs: Option<String>,
    #[arg(long, value_name = "N")]
    horizon: Option<String>,
    /// Detection probability.
    #[arg(long, value_name = "P", allow_hyphen_values = true)]
    pd: Option<String>,
    /// Gate probability.
    #[arg(long, value_name = "P", allow_hyphen_values = true)]
    pg: Option<String>,
    #[arg(long, value_name = "N")]
    seed: Option<String>,
    /// Any of lmmse, nn, pda, comma separated.
    #[arg(long, value_name = "LIST")]
    filters: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<String>,
    /// csv or json.
    #[arg(long, value_name = "FORMAT")]
    format: Option<String>,
    /// Write a per-step trace of this run (first density) instead of the sweep.
    #[arg(long, value_name = "RUN_INDEX")]
    trace: Option<String>,
    /// paper, standard or none.
    #[arg(long, value_name = "MODEL")]
    miss_weight: Option<String>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn resolve(args: &Args) -> anyhow::Result<CliConfig> {
    let mut cfg = CliConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        cfg.apply_text(&text)?;
    }
    let flags = [
        ("rho", &args.rho),
        ("runs", &args.runs),
        ("horizon", &args.horizon),
        ("pd", &args.pd),
        ("pg", &args.pg),
        ("seed", &args.seed),
        ("filters", &args.filters),
        ("out", &args.out),
        ("format", &args.format),
        ("trace", &args.trace),
        ("miss_weight", &args.miss_weight),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.verbosity = cfg.verbosity.max(args.verbose);
    cfg.validate()?;
    Ok(cfg)
}

fn sink(cfg: &CliConfig) -> anyhow::Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(args: Args) -> anyhow::Result<()> {
    let cfg = resolve(&args)?;
    let level = match cfg.verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    log::debug!("resolved configuration:\n{}", cfg.to_text());

    let experiment = cfg.experiment();
    let out = sink(&cfg)?;
    match cfg.trace {
        Some(run_index) => {
            let t = trace::trace(&experiment, run_index)?;
            trace::write_trace(&t, cfg.format, out)?;
        }
        None => {
            let result = run_experiment(&experiment)?;
            output::write_rows(&output::rows(&result), cfg.format, out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
