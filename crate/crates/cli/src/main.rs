use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use egotrack::eval::{compute_errors, write_plots, CompareReport, ErrorReport};
use egotrack::sim::{default_urban_scenario, simulate, Scenario, SimFrameRecord};
use egotrack::{Error, FrameLog, Modality, Tracker, TrackerConfig};
use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "egotrack", version, about = "Simulate, track and score ego-relative multi-object tracking")]
struct Cli {
    /// Print the default tracker configuration as JSON and exit.
    #[arg(long)]
    print_default_config: bool,

    /// Print the default urban scenario as JSON and exit.
    #[arg(long)]
    print_default_scenario: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario into a JSON Lines log of truth and measurements.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the tracker over a simulation log.
    Track {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_modality)]
        modality: Modality,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a track log against the truth of a simulation log.
    Evaluate {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all three modalities over several seeds of a scenario.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-agent error CSVs and SVG charts from an evaluate report.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_modality(s: &str) -> Result<Modality, String> {
    s.parse::<Modality>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are bad input; exit code 2 is kept for numeric failures.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or(1, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.print_default_config {
        return print_json(&TrackerConfig::default());
    }
    if cli.print_default_scenario {
        return print_json(&default_urban_scenario());
    }
    let Some(command) = cli.command else {
        return Err(Error::InvalidInput("no subcommand given; see --help".into()).into());
    };
    match command {
        Command::Simulate { scenario, out } => {
            let scenario = read_scenario(&scenario)?;
            let records = simulate(&scenario);
            write_jsonl(&out, &records)?;
            info!("wrote {} frames to {}", records.len(), out.display());
        }
        Command::Track { input, config, modality, out } => {
            let records: Vec<SimFrameRecord> = read_jsonl(&input)?;
            let config = read_config(&config)?;
            check_frame_spacing(&records, config.ts)?;
            let mut tracker = Tracker::new(config, modality)?;
            let logs: Vec<FrameLog> =
                records.iter().map(|r| tracker.step(&r.lidar_meas, &r.camera_meas, &r.ego.motion())).collect();
            write_jsonl(&out, &logs)?;
            let failures: usize = logs.iter().map(|l| l.decisions.numeric_failures.len()).sum();
            if failures > 0 {
                return Err(Error::Numeric(format!("{failures} tracks were dropped after non-finite predictions")).into());
            }
        }
        Command::Evaluate { tracks, truth, out } => {
            let logs: Vec<FrameLog> = read_jsonl(&tracks)?;
            let records: Vec<SimFrameRecord> = read_jsonl(&truth)?;
            let report = compute_errors(&logs, &records)?;
            if report.agents.iter().any(|a| !a.position_m.rmse.is_finite()) {
                return Err(Error::Numeric("non-finite error statistics".into()).into());
            }
            write_json(&out, &report)?;
        }
        Command::Compare { scenario, config, seeds, out } => {
            if seeds == 0 {
                return Err(Error::InvalidInput("--seeds must be at least 1".into()).into());
            }
            let scenario = read_scenario(&scenario)?;
            let config = read_config(&config)?;
            let report = CompareReport::run(&scenario, &config, seeds)?;
            write_json(&out, &report)?;
        }
        Command::Plot { report, out } => {
            let report: ErrorReport = read_json(&report)?;
            let files = write_plots(&report, &out)?;
            info!("wrote {} charts to {}", files.svg.len(), out.display());
        }
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut stdout = io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).map_err(|e| anyhow!(Error::Io(e))).with_context(|| format!("cannot open {}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).map_err(Error::Io).with_context(|| format!("cannot read {}", path.display()))?;
    let value = serde_json::from_str(&text).map_err(Error::Json).with_context(|| format!("cannot parse {}", path.display()))?;
    Ok(value)
}

fn read_scenario(path: &Path) -> anyhow::Result<Scenario> {
    let text = fs::read_to_string(path).map_err(Error::Io).with_context(|| format!("cannot read {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("bad scenario {}", path.display()))
}

fn read_config(path: &Path) -> anyhow::Result<TrackerConfig> {
    let config: TrackerConfig = read_json(path)?;
    config.validate().with_context(|| format!("bad config {}", path.display()))?;
    Ok(config)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidInput(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(value);
    }
    Ok(out)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::Io)?;
    }
    let file = File::create(path).map_err(Error::Io).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(Error::Json)?;
        w.write_all(b"\n").map_err(Error::Io)?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::Json)?;
    w.write_all(b"\n").map_err(Error::Io)?;
    w.flush().map_err(Error::Io)?;
    Ok(())
}

/// The tracker's sampling time must match the log it runs on.
fn check_frame_spacing(records: &[SimFrameRecord], ts: f64) -> anyhow::Result<()> {
    for pair in records.windows(2) {
        let dt = pair[1].t - pair[0].t;
        if (dt - ts).abs() > 1e-6 * ts {
            return Err(Error::InvalidInput(format!(
                "frames {} and {} are {dt} s apart but the config has ts = {ts}",
                pair[0].frame, pair[1].frame
            ))
            .into());
        }
    }
    if records.is_empty() {
        warn!("input log is empty");
    }
    Ok(())
}
