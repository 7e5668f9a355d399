//! `squeeze`: simulate squeezing traces, sweep preparations, tabulate peaks,
//! and run the self-check suite.
//!
//! Exit codes: 0 success, 1 validation failure, 2 config or I/O error,
//! 3 numeric guard.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use squeeze_core::protocol::{compare_preparations, run_protocol};
use squeeze_core::validate::run_all;
use squeeze_core::{ChannelConfig, Error, ProtocolConfig};

use config::RunConfigFile;
use output::{peak_rows, preamble, trace_rows, Trace, PEAK_HEADER, TRACE_HEADER};

#[derive(Parser)]
#[command(name = "squeeze", version, about = "Collective spin squeezing of qudit ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Squeezing trace for the `[run]` section.
    Simulate(RunArgs),
    /// Traces for every point of the `[sweep]` axes.
    Sweep(RunArgs),
    /// Peak squeezing per `f` and preparation, with and without the Yurke map.
    Peak(RunArgs),
    /// Self-check suite; prints a JSON report.
    Validate {
        /// Take the channel coefficients from this file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
}

enum Failure {
    Validation,
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn load(args: &RunArgs) -> Result<RunConfigFile, Error> {
    let mut c = RunConfigFile::load(&args.config)?;
    if let Some(dt) = args.dt {
        c.run.dt = dt;
    }
    if let Some(d) = args.duration {
        c.run.duration = d;
    }
    Ok(c)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dedup_sorted<T: PartialOrd + Copy>(mut v: Vec<T>, axis: &str) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite axis values"));
    let before = v.len();
    v.dedup();
    if v.len() != before {
        warn!("dropped {} duplicate {axis} values", before - v.len());
    }
    v
}

fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let file = load(args)?;
    let cfg = file.protocol();
    let trace = run_protocol(&cfg)?;
    let mut text = preamble(&file);
    text.push_str(TRACE_HEADER);
    text.push('\n');
    trace_rows(
        &mut text,
        &Trace { f: cfg.f, prep: cfg.prep, od: cfg.od, final_map: cfg.final_map, samples: &trace.samples },
    );
    info!("peak {:.3} dB at t = {:.4}", trace.peak.zeta_db, trace.peak.t);
    Ok(emit(args.out.as_deref(), &text)?)
}

fn sweep(args: &RunArgs) -> Result<(), Failure> {
    let file = load(args)?;
    let axes = file.axes()?;
    let fs = dedup_sorted(axes.f, "f");
    let preps = dedup_sorted(axes.prep, "prep");
    let ods = dedup_sorted(axes.od, "od");
    let base = file.protocol();
    let mut points = Vec::new();
    for &f in &fs {
        for &prep in &preps {
            for &od in &ods {
                points.push(ProtocolConfig { f, prep, od, ..base.clone() });
            }
        }
    }
    let traces = points.par_iter().map(run_protocol).collect::<Result<Vec<_>, _>>()?;

    let mut text = preamble(&file);
    text.push_str(TRACE_HEADER);
    text.push('\n');
    for (cfg, tr) in points.iter().zip(&traces) {
        trace_rows(
            &mut text,
            &Trace { f: cfg.f, prep: cfg.prep, od: cfg.od, final_map: cfg.final_map, samples: &tr.samples },
        );
    }
    Ok(emit(args.out.as_deref(), &text)?)
}

fn peak(args: &RunArgs) -> Result<(), Failure> {
    let file = load(args)?;
    let axes = file.axes()?;
    let ods = dedup_sorted(axes.od, "od");
    if ods.len() != 1 {
        return Err(Error::Config(format!("peak takes a single od, got {}", ods.len())).into());
    }
    let base = ProtocolConfig { od: ods[0], ..file.protocol() };
    let rows = compare_preparations(&base, &axes.prep, &axes.f)?;
    let mut text = preamble(&file);
    text.push_str(PEAK_HEADER);
    text.push('\n');
    peak_rows(&mut text, &rows);
    Ok(emit(args.out.as_deref(), &text)?)
}

fn validate(config: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let channel = match config {
        Some(p) => RunConfigFile::load(p)?.channel,
        None => ChannelConfig::default(),
    };
    let report = run_all(&channel);
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(out, &text)?;
    if report.passed {
        Ok(())
    } else {
        for c in report.checks.iter().filter(|c| !c.passed) {
            eprintln!("FAILED {}: {}", c.name, c.detail);
        }
        Err(Failure::Validation)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Peak(a) => peak(a),
        Command::Validate { config, out } => validate(config.as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Guard(_) | Error::Degenerate(_) => 3,
                _ => 2,
            })
        }
    }
}
