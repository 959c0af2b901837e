//! `oncovir` command-line front end.
//!
//! Every subcommand reads one JSON configuration (`--config`), applies
//! `--set key=value` overrides, writes its tables to the output directory
//! and finishes with a `manifest.json` describing the run.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::error::CliError;
use crate::output::Output;

#[derive(Parser)]
#[command(
    name = "oncovir",
    version,
    about = "Oncolytic virotherapy model analyses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration entry, e.g. `--set params.xi=0.06`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print errors as JSON on stdout.
    #[arg(long)]
    error_json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and classify its outcome.
    Simulate(Common),
    /// List the three equilibria with eigenvalues and classification.
    Equilibria(Common),
    /// Stability region scan, U* slices and threshold contour.
    Region(Common),
    /// One-parameter equilibrium branches and their bifurcations.
    Branch(Common),
    /// Two-parameter Hopf curve.
    HopfCurve(Common),
    /// Limit-cycle extrema and period along one parameter.
    Cycles(Common),
    /// Injection protocol run and interval sweep.
    Protocol(Common),
    /// Outcome against the initial viral load.
    DosageSweep(Common),
    /// Outcome over a grid of initial tumour and viral loads.
    Basin(Common),
    /// Regenerate the data behind every figure family.
    Repro(Common),
}

fn dispatch(name: &str, doc: Value, out_dir: Option<&PathBuf>) -> Result<PathBuf, CliError> {
    let mut doc = doc;
    if let Some(dir) = out_dir {
        config::apply_override(
            &mut doc,
            &format!("output.dir={}", Value::String(dir.display().to_string())),
        )?;
    }
    let cfg: config::RunConfig = serde_json::from_value(doc.clone())
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    cfg.integrator.validate()?;
    let mut out = Output::new(&cfg.output.dir, cfg.output.format)?;
    match name {
        "simulate" => commands::simulate(&cfg, &mut out)?,
        "equilibria" => commands::equilibria_cmd(&cfg, &mut out)?,
        "region" => commands::region(&cfg, &mut out)?,
        "branch" => commands::branch(&cfg, &mut out)?,
        "hopf-curve" => commands::hopf_curve(&cfg, &mut out)?,
        "cycles" => commands::cycles(&cfg, &mut out)?,
        "protocol" => commands::protocol(&cfg, &mut out)?,
        "dosage-sweep" => commands::dosage(&cfg, &mut out)?,
        "basin" => commands::basin(&cfg, &mut out)?,
        other => unreachable!("unknown command {other}"),
    }
    out.finish(name, &doc)
}

fn run(cli: Cli) -> Result<(), (CliError, bool)> {
    let (name, common) = match cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::Equilibria(c) => ("equilibria", c),
        Command::Region(c) => ("region", c),
        Command::Branch(c) => ("branch", c),
        Command::HopfCurve(c) => ("hopf-curve", c),
        Command::Cycles(c) => ("cycles", c),
        Command::Protocol(c) => ("protocol", c),
        Command::DosageSweep(c) => ("dosage-sweep", c),
        Command::Basin(c) => ("basin", c),
        Command::Repro(c) => ("repro", c),
    };
    let json_errors = common.error_json;
    let fail = |e| (e, json_errors);
    let (_, doc) = config::load(common.config.as_deref(), &common.set).map_err(fail)?;

    if name == "repro" {
        let root = common
            .out
            .clone()
            .or_else(|| doc["output"]["dir"].as_str().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("repro"));
        for (dir, command, cfg) in commands::repro_suite() {
            let target = root.join(dir);
            eprintln!("repro: {dir} ({command})");
            let manifest = dispatch(command, cfg, Some(&target)).map_err(fail)?;
            println!("{}", manifest.display());
        }
        return Ok(());
    }
    let manifest = dispatch(name, doc, common.out.as_ref()).map_err(fail)?;
    println!("{}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, json)) => {
            if json {
                println!("{}", e.to_json());
            } else {
                eprintln!("oncovir: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
