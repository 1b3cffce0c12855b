use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hymad::batch::{run_batch, scenario_trace};
use hymad::scenario::{parse_scenario, Protocol};
use hymad::sim::run_protocol;
use hymad::topology::{generate_trace, load_trace, write_trace, TraceModel, PRESETS};
use hymad::SimTime;

#[derive(Parser)]
#[command(name = "hymad", version, about = "Hybrid DTN-MANET routing simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every seed of a scenario for each protocol and write CSV results.
    Run {
        scenario: PathBuf,
        /// Protocols to run (epidemic, spray_and_wait, hymad); defaults to the scenario's list.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        protocols: Vec<Protocol>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, short = 'j', default_value_t = default_workers())]
        jobs: usize,
        /// Override the scenario's seed list with 1..=N.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Generate a contact trace from a preset name or a TOML model file.
    GenTrace {
        model: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Seconds of mobility to sample.
        #[arg(long, default_value_t = 2000.0)]
        duration: f64,
        /// Seconds between position snapshots.
        #[arg(long, default_value_t = 15.0)]
        sample: f64,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check a contact trace and print a short summary.
    ValidateTrace { file: PathBuf },
    /// Print each node's group view once per sample interval as CSV.
    DumpGroups {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
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

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { scenario, protocols, out, jobs, seeds } => cmd_run(&scenario, protocols, &out, jobs, seeds),
        Cmd::GenTrace { model, seed, duration, sample, out } => cmd_gen_trace(&model, seed, duration, sample, out),
        Cmd::ValidateTrace { file } => cmd_validate(&file),
        Cmd::DumpGroups { scenario, seed } => cmd_dump_groups(&scenario, seed),
    }
}

fn cmd_run(path: &Path, protocols: Vec<Protocol>, out: &Path, jobs: usize, seeds: Option<u64>) -> Result<()> {
    let mut cfg = parse_scenario(path)?;
    if let Some(n) = seeds {
        if n == 0 {
            bail!("--seeds must be positive");
        }
        cfg.seeds = (1..=n).collect();
    }
    let protocols = if protocols.is_empty() { cfg.protocols() } else { protocols };
    let batch = run_batch(&cfg, &protocols, jobs)?;
    batch.write_csvs(out).with_context(|| format!("writing {}", out.display()))?;
    let mut so = io::stdout().lock();
    writeln!(so, "{}: {} runs -> {}", cfg.name, batch.runs.len(), out.display())?;
    for &p in &batch.protocols {
        let s = batch.summary(p);
        let delay = match (s.mean_delay_s, s.ci_halfwidth_s) {
            (Some(m), Some(h)) => format!("{m:.1} ± {h:.1} s"),
            (Some(m), None) => format!("{m:.1} s"),
            _ => "-".into(),
        };
        writeln!(so, "  {:15} delivery {:.3}  delay {delay}", p.as_str(), s.delivery_ratio)?;
    }
    if !batch.failed.is_empty() {
        bail!("{} runs failed, see failed.csv", batch.failed.len());
    }
    Ok(())
}

fn cmd_gen_trace(model: &str, seed: u64, duration: f64, sample: f64, out: Option<PathBuf>) -> Result<()> {
    if !(duration > 0.0 && sample > 0.0) {
        bail!("duration and sample must be positive");
    }
    let m = match TraceModel::preset(model) {
        Some(m) => m,
        None => {
            let text = std::fs::read_to_string(model)
                .with_context(|| format!("{model} is neither a preset ({}) nor a readable file", PRESETS.join(", ")))?;
            toml::from_str(&text).with_context(|| format!("parsing {model}"))?
        }
    };
    let events = generate_trace(&m, seed, SimTime::from_secs_f64(duration), SimTime::from_secs_f64(sample));
    let header = format!("{model} seed {seed} duration {duration} sample {sample} nodes {}", m.nodes());
    match out {
        Some(p) => {
            let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
            write_trace(BufWriter::new(f), &header, &events)?;
        }
        None => write_trace(BufWriter::new(io::stdout().lock()), &header, &events)?,
    }
    Ok(())
}

fn cmd_validate(file: &Path) -> Result<()> {
    let events = load_trace(file).with_context(|| format!("{}", file.display()))?;
    let nodes = events.iter().map(|e| e.a.max(e.b) + 1).max().unwrap_or(0);
    let ups = events.iter().filter(|e| e.kind == hymad::topology::ContactKind::Up).count();
    let end = events.last().map_or(0.0, |e| e.time.as_secs_f64());
    println!("ok: {} events ({ups} up), {nodes} nodes, last event at {end:.3} s", events.len());
    Ok(())
}

fn cmd_dump_groups(path: &Path, seed: u64) -> Result<()> {
    let cfg = parse_scenario(path)?;
    let trace = scenario_trace(&cfg)?;
    let run = run_protocol(&cfg, Protocol::Hymad, seed, &trace, true)?;
    let mut w = BufWriter::new(io::stdout().lock());
    writeln!(w, "time,node,group_leaderless_id,members...")?;
    for (t, views) in &run.groups {
        for (node, members) in views.iter().enumerate() {
            let id = members.iter().next().copied().unwrap_or(node as u32);
            write!(w, "{:.3},{node},{id}", t.as_secs_f64())?;
            for m in members {
                write!(w, ",{m}")?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
