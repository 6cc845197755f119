use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use eatsc_core::experiment::report::{boundary_report, format_table1, table1};
use eatsc_core::experiment::{self, Replication, RunConfig};
use eatsc_core::penalty::DEFAULT_MAX_RATE;

#[derive(Parser)]
#[command(
    name = "eatsc",
    version,
    about = "Interest-rate driven adaptive traffic signal control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the learned controller (eatsc, or null with zero rates).
    Train(RunArgs),
    /// Run a non-learning controller (fixed-cyclic, fixed-penalty, null).
    Baseline(RunArgs),
    /// Interest rate at which two queues owe the same penalty.
    Boundary(BoundaryArgs),
    /// Recompute the three worked penalty cases.
    Table1,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// eatsc | null | fixed-cyclic | fixed-penalty
    #[arg(long)]
    variant: Option<String>,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct BoundaryArgs {
    /// Waits of the first queue, comma separated (seconds).
    #[arg(long)]
    q1: String,
    /// Waits of the second queue, comma separated (seconds).
    #[arg(long)]
    q2: String,
    #[arg(long, default_value_t = DEFAULT_MAX_RATE)]
    i_max: f64,
    /// Grid points for the D(i) curve.
    #[arg(long, default_value_t = 201)]
    samples: usize,
    /// Write the D(i) curve here instead of stdout.
    #[arg(long)]
    curve: Option<PathBuf>,
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut text = match &args.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
        None => String::new(),
    };
    // Flags are appended as config lines so validation and gate defaults
    // follow the same path as the file.
    let mut extra = |k: &str, v: String| {
        text.push('\n');
        text.push_str(&format!("{k} = {v}"));
    };
    if let Some(s) = args.seed {
        extra("seed", s.to_string());
    }
    if let Some(r) = args.replications {
        extra("replications", r.to_string());
    }
    if let Some(o) = &args.out {
        extra("out", o.display().to_string());
    }
    if let Some(v) = &args.variant {
        extra("variant", v.clone());
    }
    for s in &args.sets {
        let Some((k, v)) = s.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{s}`");
        };
        extra(k.trim(), v.trim().to_string());
    }
    Ok(RunConfig::parse(&text)?)
}

fn print_summary(dir: &std::path::Path, reps: &[Replication]) {
    println!("wrote {}", dir.display());
    for r in reps {
        let last = r.log.episodes.last();
        println!(
            "replicate {} seed {}: {} episodes, last mean queue {:.3}, last mean wait {:.3} s",
            r.index,
            r.seed,
            r.log.episodes.len(),
            last.map_or(0.0, |e| e.mean_queue_size),
            last.map_or(0.0, |e| e.mean_waiting_time),
        );
    }
}

fn parse_waits(s: &str) -> Result<Vec<f64>> {
    let waits = s
        .split(',')
        .map(|w| {
            let v: f64 = w.trim().parse().with_context(|| format!("bad wait `{w}`"))?;
            if !(v >= 0.0 && v.is_finite()) {
                bail!("waits must be finite and nonnegative, got `{w}`");
            }
            Ok(v)
        })
        .collect::<Result<Vec<f64>>>()?;
    if waits.is_empty() {
        bail!("wait list is empty");
    }
    Ok(waits)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = load_config(&args)?;
            let (dir, reps) = experiment::train(&cfg)?;
            print_summary(&dir, &reps);
        }
        Command::Baseline(args) => {
            let cfg = load_config(&args)?;
            let (dir, reps) = experiment::baseline(&cfg)?;
            print_summary(&dir, &reps);
        }
        Command::Boundary(args) => {
            let q1 = parse_waits(&args.q1)?;
            let q2 = parse_waits(&args.q2)?;
            if !(args.i_max > 0.0 && args.i_max.is_finite()) {
                bail!("--i-max must be positive");
            }
            let report = boundary_report(&q1, &q2, args.i_max, args.samples);
            println!("boundary: {}", report.headline());
            match &args.curve {
                Some(p) => std::fs::write(p, report.curve_csv()).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{}", report.curve_csv()),
            }
        }
        Command::Table1 => print!("{}", format_table1(&table1())),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
