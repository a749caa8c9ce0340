use std::fs;
use std::io::IsTerminal;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use tinyjam_core::analytics::{build_report, ReportOptions};
use tinyjam_core::corpus::{load_corpus, write_performance};
use tinyjam_core::perf::{parse_events_csv, Instrument, Metadata, TinyPerformance};
use tinyjam_core::synth::{render, write_wav, DEFAULT_SAMPLE_RATE};
use tinyjam_core::synthetic::generate_corpus;
use tinyjam_core::trace::{render_heatmap, render_trace, ColorMode, DEFAULT_TRACE_SIZE};

#[derive(Parser)]
#[command(name = "tinyjam", version, about = "Validate, render, analyze and serve tiny touchscreen performances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a performance CSV and list any violations.
    Validate { csv: PathBuf },
    /// Render a performance CSV to a WAV file.
    RenderAudio {
        csv: PathBuf,
        #[arg(long, default_value = "chirp")]
        instrument: Instrument,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        sample_rate: u32,
    },
    /// Draw a performance CSV as a PNG trace.
    RenderTrace {
        csv: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Give each swipe its own colour.
        #[arg(long)]
        per_swipe: bool,
        #[arg(long, default_value_t = DEFAULT_TRACE_SIZE)]
        size: u32,
    },
    /// Compute the corpus report for a directory of performances.
    Analyze {
        dir: PathBuf,
        /// Report JSON destination; printed to stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Touch-density heatmap PNG.
        #[arg(long)]
        heatmap: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TRACE_SIZE)]
        heatmap_size: u32,
        /// Density grid as CSV.
        #[arg(long)]
        kde_csv: Option<PathBuf>,
        /// Swipe statistics table as CSV.
        #[arg(long)]
        swipe_table: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a seeded synthetic corpus as CSV + JSON pairs.
    GenCorpus {
        #[arg(short, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "JAM_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "JAM_STORE", default_value = "data")]
        store_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

fn read_events(path: &Path) -> Result<TinyPerformance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let events = parse_events_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(TinyPerformance::new(Metadata::anonymous(Instrument::Chirp), events))
}

fn read_valid(path: &Path) -> Result<TinyPerformance> {
    let perf = read_events(path)?;
    if let Err(violations) = perf.validate().into_result() {
        for v in &violations {
            eprintln!("{}: {v}", path.display());
        }
        bail!("{} is not a valid performance ({} violations)", path.display(), violations.len());
    }
    Ok(perf)
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { csv } => {
            let perf = read_valid(&csv)?;
            println!("{}: ok, {} events", csv.display(), perf.events.len());
        }
        Command::RenderAudio {
            csv,
            instrument,
            output,
            sample_rate,
        } => {
            let mut perf = read_valid(&csv)?;
            perf.meta.instrument = instrument;
            let buffer = render(&perf, sample_rate)?;
            write_wav(&output, &buffer)?;
        }
        Command::RenderTrace {
            csv,
            output,
            per_swipe,
            size,
        } => {
            let perf = read_valid(&csv)?;
            let mode = if per_swipe { ColorMode::PerSwipe } else { ColorMode::Single };
            let png = render_trace(&perf, size, mode)?.encode_png()?;
            write_output(&output, &png)?;
        }
        Command::Analyze {
            dir,
            output,
            heatmap,
            heatmap_size,
            kde_csv,
            swipe_table,
            seed,
        } => {
            if !dir.is_dir() {
                bail!("{} is not a directory", dir.display());
            }
            let corpus = load_corpus(&dir)?;
            let report = build_report(
                &corpus,
                &ReportOptions {
                    seed,
                    ..ReportOptions::default()
                },
            );
            let json = serde_json::to_string_pretty(&report)?;
            match &output {
                Some(path) => write_output(path, json.as_bytes())?,
                None => println!("{json}"),
            }
            if let Some(path) = swipe_table {
                write_output(&path, report.swipe_table.to_csv().as_bytes())?;
            }
            if heatmap.is_some() || kde_csv.is_some() {
                let Some(kde) = &report.kde else {
                    bail!("corpus has no touches to estimate a density from");
                };
                if let Some(path) = heatmap {
                    write_output(&path, &render_heatmap(kde, heatmap_size)?.encode_png()?)?;
                }
                if let Some(path) = kde_csv {
                    write_output(&path, kde.to_csv().as_bytes())?;
                }
            }
            if output.is_some() {
                println!(
                    "{} performances, {} events, {} swipes ({} valid), {} taps",
                    report.n_performances, report.n_events, report.n_swipes, report.n_valid_swipes, report.n_taps
                );
            }
        }
        Command::GenCorpus { n, seed, output } => {
            fs::create_dir_all(&output).with_context(|| format!("creating {}", output.display()))?;
            for perf in generate_corpus(n, seed) {
                write_performance(&output, perf.id(), &perf)?;
            }
        }
        Command::Serve { port, store_dir, host } => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(tinyjam_server::run(SocketAddr::new(host, port), store_dir))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
