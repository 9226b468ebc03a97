//! `hit`: run trials, ablation batches, live sessions and log accuracy.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use hit_core::harness::batch::{run_batch, summarize, write_csv, Stat, VariantSummary};
use hit_core::harness::live::{LiveParams, Server};
use hit_core::harness::scenarios;
use hit_core::intent::Level;
use hit_core::{compute_metrics, frame_accuracy, run_trial, Error, Metrics, Result, ScenarioConfig, TrialLog, Variant};

#[derive(Parser)]
#[command(name = "hit", version, about = "Hierarchical intention tracking: simulated trials and live sessions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario over a seed range; writes per-trial logs and metrics.csv.
    Run {
        /// Scenario config (JSON). Defaults to the built-in HIT scenario.
        #[arg(long, conflicts_with = "scenario")]
        config: Option<PathBuf>,
        /// Built-in scenario: nominal, two-failures or approach-robot.
        #[arg(long)]
        scenario: Option<String>,
        /// Seed range `a..b` (end exclusive) or a single seed.
        #[arg(long, default_value = "0..1", value_parser = parse_seeds)]
        seeds: Range<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ablation: every listed variant over seeds 0..reps.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "coex,coop,hit")]
        variants: Vec<Variant>,
        #[arg(long, default_value_t = 30)]
        reps: u64,
        /// Base config; variant and seed are overridden per trial.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for metrics.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve live sessions over TCP (length-prefixed JSON frames).
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Live session parameters (JSON).
        #[arg(long)]
        live: Option<PathBuf>,
    },
    /// Frame-wise accuracy of a recorded trial log.
    Accuracy {
        #[arg(long)]
        log: PathBuf,
    },
}

fn parse_seeds(s: &str) -> std::result::Result<Range<u64>, String> {
    let bad = || format!("expected `a..b` or a single seed, got `{s}`");
    let r = match s.split_once("..") {
        Some((a, b)) => a.trim().parse().map_err(|_| bad())?..b.trim().parse().map_err(|_| bad())?,
        None => {
            let a: u64 = s.trim().parse().map_err(|_| bad())?;
            a..a + 1
        }
    };
    if r.is_empty() {
        return Err(format!("seed range `{s}` is empty"));
    }
    Ok(r)
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn fmt_stat(s: &Option<Stat>) -> String {
    match s {
        Some(s) => format!("{:.3} ± {:.3}", s.mean, s.std),
        None => "-".into(),
    }
}

fn print_summary(rows: &[VariantSummary]) {
    println!(
        "{:<12} {:>6} {:>18} {:>16} {:>16} {:>16} {:>16} {:>14} {:>14} {:>14}",
        "variant", "done", "completion_time", "automated_path", "guided_path", "human_force", "human_energy", "n_failures", "low_acc", "high_acc"
    );
    for r in rows {
        println!(
            "{:<12} {:>6} {:>18} {:>16} {:>16} {:>16} {:>16} {:>14} {:>14} {:>14}",
            r.variant.name(),
            format!("{}/{}", r.completed, r.trials),
            fmt_stat(&r.completion_time),
            fmt_stat(&r.automated_path),
            fmt_stat(&r.guided_path),
            fmt_stat(&r.human_force),
            fmt_stat(&r.human_energy),
            fmt_stat(&r.n_failures),
            fmt_stat(&r.low_accuracy),
            fmt_stat(&r.high_accuracy),
        );
    }
}

fn write_metrics(dir: &Path, rows: &[Metrics]) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join("metrics.csv"))?);
    write_csv(rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_run(config: Option<PathBuf>, scenario: Option<String>, seeds: Range<u64>, out: PathBuf) -> Result<()> {
    let base = match &scenario {
        Some(name) => scenarios::by_name(name, 0).ok_or_else(|| {
            Error::config("scenario", format!("unknown scenario `{name}`, expected one of {:?}", scenarios::NAMES))
        })?,
        None => load_config(config.as_deref())?,
    };
    std::fs::create_dir_all(&out)?;
    let seeds: Vec<u64> = seeds.collect();
    let rows = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = match &scenario {
                Some(name) => scenarios::by_name(name, seed).expect("checked above"),
                None => ScenarioConfig { seed, ..base.clone() },
            };
            let log = run_trial(&cfg)?;
            let path = out.join(format!("trial_{}_{seed}.jsonl", cfg.variant.name()));
            let mut w = BufWriter::new(File::create(path)?);
            log.write_jsonl(&mut w)?;
            w.flush()?;
            Ok(compute_metrics(&log))
        })
        .collect::<Result<Vec<_>>>()?;
    write_metrics(&out, &rows)?;
    print_summary(&summarize(&rows));
    Ok(())
}

fn cmd_bench(variants: Vec<Variant>, reps: u64, config: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    if reps == 0 {
        return Err(Error::config("reps", "must be >= 1"));
    }
    let base = load_config(config.as_deref())?;
    let seeds: Vec<u64> = (0..reps).collect();
    let rows = run_batch(&base, &variants, &seeds)?;
    let summary = summarize(&rows);
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        write_metrics(&dir, &rows)?;
        let w = BufWriter::new(File::create(dir.join("summary.json"))?);
        serde_json::to_writer_pretty(w, &summary)?;
    }
    print_summary(&summary);
    Ok(())
}

fn cmd_serve(port: u16, host: String, config: Option<PathBuf>, live: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config.as_deref())?;
    let params: LiveParams = match live {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => LiveParams::default(),
    };
    let server = Server::bind((host.as_str(), port), cfg, params)?;
    println!("listening on {}", server.local_addr()?);
    server.run()
}

fn cmd_accuracy(log: PathBuf) -> Result<()> {
    let log = TrialLog::read_jsonl(BufReader::new(File::open(log)?))?;
    let show = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into());
    println!("low  {}", show(frame_accuracy(&log, Level::Task)));
    println!("high {}", show(frame_accuracy(&log, Level::Interactive)));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run {
            config,
            scenario,
            seeds,
            out,
        } => cmd_run(config, scenario, seeds, out),
        Cmd::Bench {
            variants,
            reps,
            config,
            out,
        } => cmd_bench(variants, reps, config, out),
        Cmd::Serve { port, host, config, live } => cmd_serve(port, host, config, live),
        Cmd::Accuracy { log } => cmd_accuracy(log),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
