use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use wifivr::engine::{run_seeds, run_sweep, Simulation};
use wifivr::report::{
    compare, comparison_text, summarize_runs, sweep_table, write_comparison, write_ecdf, write_samples,
    write_sweep_table, QosThresholds, Report, JITTER_THRESHOLD_MS, LOSS_THRESHOLD, RTT_THRESHOLD_MS,
};
use wifivr::trace::{analyze, parse_trace, records_from_packets, write_trace, AnalyzeOptions, ExportTime};
use wifivr::{RunResult, SimConfig, SweepAxis};

#[derive(Parser)]
#[command(name = "wifivr", version, about = "Wi-Fi 6 VR streaming simulator and trace analyzer")]
struct Cli {
    /// Worker threads for parallel runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of one configuration and write pooled statistics.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Also write the first run's delivered packets as a trace CSV.
        #[arg(long)]
        export_trace: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Vary one parameter over a list of values.
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
        /// fps, inter_batch_time (tau), bitrate, mcs_index (mcs) or per.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; may be empty.
        #[arg(long, default_value = "")]
        values: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Analyze a packet trace CSV.
    Analyze {
        trace: PathBuf,
        /// Inter-packet gap that starts a new batch, ms.
        #[arg(long, default_value_t = 1.0)]
        gap_threshold: f64,
        /// Require frame-level analysis (fails without RTP timestamps).
        #[arg(long)]
        frames: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compare the shared metrics of two output directories.
    Compare {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct SimArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs, overriding the configuration.
    #[arg(long)]
    runs: Option<u32>,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, env = "WIFIVR_OUTPUT", default_value = "wifivr-out")]
    output: PathBuf,
    #[arg(long, default_value_t = RTT_THRESHOLD_MS)]
    rtt_threshold_ms: f64,
    #[arg(long, default_value_t = JITTER_THRESHOLD_MS)]
    jitter_threshold_ms: f64,
    #[arg(long, default_value_t = LOSS_THRESHOLD)]
    loss_threshold: f64,
}

impl OutArgs {
    fn qos(&self) -> QosThresholds {
        QosThresholds {
            rtt_ms: self.rtt_threshold_ms,
            jitter_ms: self.jitter_threshold_ms,
            loss_rate: self.loss_threshold,
        }
    }
}

impl SimArgs {
    fn load(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        Ok(cfg.validate()?)
    }
}

/// Files produced by one command, written together or not at all.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    fn commit(self) -> Result<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            if let Err(e) = fs::write(&path, bytes) {
                for p in written {
                    let _ = fs::remove_file(p);
                }
                return Err(e).with_context(|| format!("writing {}", path.display()));
            }
            written.push(path);
        }
        Ok(())
    }
}

/// Command line as echoed into reports, without the output location so that
/// identical runs produce identical files wherever they are written.
fn command_echo() -> Vec<String> {
    let mut out = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--output" {
            args.next();
        } else if !a.starts_with("--output=") {
            out.push(a);
        }
    }
    out
}

fn finish(mut outputs: Outputs, mut report: Report) -> Result<()> {
    outputs.add("summary.txt", report.to_text().into_bytes());
    let mut names = outputs.names();
    names.push("summary.json".into());
    report.outputs = names;
    outputs.add("summary.json", report.to_json().into_bytes());
    print!("{}", report.to_text());
    let dir = outputs.dir.clone();
    outputs.commit()?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn simulate(sim: &SimArgs, export_trace: bool, out: &OutArgs) -> Result<()> {
    let cfg = sim.load()?;
    let seeds = run_seeds(cfg.seed, cfg.runs);
    let results: Vec<RunResult> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let run = Simulation::new(&cfg, s)?;
            Ok(if export_trace && i == 0 { run.capture_packets() } else { run }.run())
        })
        .collect::<wifivr::Result<_>>()?;
    let summary = summarize_runs(&results)?;
    let report = Report::for_simulation(command_echo(), &cfg, &summary, &out.qos());

    let mut outputs = Outputs::new(&out.output);
    let mut samples = Vec::new();
    write_samples(&results, &mut samples)?;
    outputs.add("samples.csv", samples);
    if export_trace {
        let records = records_from_packets(&results[0].delivered, cfg.traffic.fps, ExportTime::Delivery);
        let mut buf = Vec::new();
        write_trace(&records, &mut buf)?;
        outputs.add("trace.csv", buf);
    }
    finish(outputs, report)
}

fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().with_context(|| format!("bad sweep value {v:?}")))
        .collect()
}

fn sweep(sim: &SimArgs, axis: &str, values: &str, out: &OutArgs) -> Result<()> {
    let axis: SweepAxis = axis.parse()?;
    let values = parse_values(values)?;
    let cfg = sim.load()?;
    let points = run_sweep(&cfg, axis, &values, &run_seeds(cfg.seed, cfg.runs))?;
    let rows = sweep_table(axis, &points)?;

    let mut outputs = Outputs::new(&out.output);
    let mut table = Vec::new();
    write_sweep_table(&rows, &mut table)?;
    outputs.add("sweep.csv", table);
    outputs.add("sweep.json", serde_json::to_vec_pretty(&rows)?);
    let mut report = Report { command: command_echo(), config: Some(cfg), ..Report::default() };
    report.notes.push(format!("{} value(s) along {}", rows.len(), axis));
    for r in &rows {
        println!(
            "{}={:<8} dl {:>8.3} ms  vf {:>8.3} ms  ampdu {:>7.2}  airtime {:.3}",
            axis,
            r.value,
            r.dl_delay_mean_ms.unwrap_or(f64::NAN),
            r.vf_delay_mean_ms.unwrap_or(f64::NAN),
            r.ampdu_mean.unwrap_or(f64::NAN),
            r.airtime
        );
    }
    finish(outputs, report)
}

fn analyze_cmd(trace: &Path, gap_ms: f64, frames: bool, out: &OutArgs) -> Result<()> {
    if !gap_ms.is_finite() || gap_ms < 0.0 {
        bail!("gap threshold must be a non-negative number of ms");
    }
    let parsed = parse_trace(trace)?;
    for s in parsed.skipped.iter().take(10) {
        eprintln!("skipped line {}: {}", s.line, s.reason);
    }
    let opts = AnalyzeOptions {
        gap_threshold: Duration::from_secs_f64(gap_ms / 1e3),
        require_frames: frames,
        ..AnalyzeOptions::default()
    };
    let analysis = analyze(&parsed.records, &opts)?;
    let report = Report::for_trace(command_echo(), &analysis, parsed.skipped.len(), &out.qos());

    let mut outputs = Outputs::new(&out.output);
    for (name, samples) in [
        ("video_packet_size_bytes", analysis.video_packet_sizes.clone()),
        ("video_inter_packet_ms", analysis.video_inter_packet_ms.clone()),
        ("batch_spacing_ms", analysis.batches.start_spacings_ms.clone()),
        ("frame_size_bytes", analysis.frame_sizes()),
        ("inter_frame_ms", analysis.inter_frame_ms()),
        ("assembly_delay_ms", analysis.assembly_delays_ms()),
    ] {
        if !samples.is_empty() {
            let mut buf = Vec::new();
            write_ecdf(&samples, &mut buf)?;
            outputs.add(format!("ecdf_{name}.csv"), buf);
        }
    }
    outputs.add("streams.json", serde_json::to_vec_pretty(&analysis.streams)?);
    finish(outputs, report)
}

fn load_report(p: &Path) -> Result<Report> {
    let file = if p.is_dir() { p.join("summary.json") } else { p.to_path_buf() };
    Ok(Report::load(&file)?)
}

fn compare_cmd(left: &Path, right: &Path, out: &OutArgs) -> Result<()> {
    let (l, r) = (load_report(left)?, load_report(right)?);
    let rows = compare(&l.comparable, &r.comparable);
    let mut outputs = Outputs::new(&out.output);
    let mut csv = Vec::new();
    write_comparison(&rows, &mut csv)?;
    outputs.add("comparison.csv", csv);
    outputs.add("comparison.json", serde_json::to_vec_pretty(&rows)?);
    outputs.add("comparison.txt", comparison_text(&rows).into_bytes());
    print!("{}", comparison_text(&rows));
    outputs.commit()
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Simulate { sim, export_trace, out } => simulate(sim, *export_trace, out),
        Command::Sweep { sim, axis, values, out } => sweep(sim, axis, values, out),
        Command::Analyze { trace, gap_threshold, frames, out } => analyze_cmd(trace, *gap_threshold, *frames, out),
        Command::Compare { left, right, out } => compare_cmd(left, right, out),
    }
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
