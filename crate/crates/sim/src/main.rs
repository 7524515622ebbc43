use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::Ordering;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use waveshot_core::depth::LossWeights;
use waveshot_sim::depth_eval::{self, EvalInputs};
use waveshot_sim::metrics::MetricsReport;
use waveshot_sim::runner::{report_from_trace, run_scenario};
use waveshot_sim::scenario::{self, builtin_names};
use waveshot_sim::server::{self, ServeOptions, DEFAULT_TCP_PORT, DEFAULT_WS_PORT};
use waveshot_sim::trace;

#[derive(Parser)]
#[command(name = "waveshot", version, about = "Software-in-the-loop simulator for a differential-thrust camera USV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless and report metrics. Exit code 0 only if every threshold passes.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the per-tick trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the per-tick trace as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the metrics report as JSON.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// List bundled scenarios.
    ListScenarios,
    /// Print a bundled scenario's file, as a starting point for your own.
    ShowScenario { name: String },
    /// Recompute the metrics report of a saved trace.
    Report { trace: PathBuf },
    /// Run a scenario in real time and serve the telemetry protocol.
    Serve {
        scenario: String,
        #[arg(long, default_value_t = DEFAULT_TCP_PORT)]
        tcp: u16,
        #[arg(long, default_value_t = DEFAULT_WS_PORT)]
        ws: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the session trace on shutdown.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate predicted depth maps against references and colorize them.
    DepthEval {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long = "lambda")]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pseudo: Option<PathBuf>,
        #[arg(long)]
        mixed: Option<PathBuf>,
        #[arg(long = "pseudo-b")]
        pseudo_b: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        feats: Option<PathBuf>,
        #[arg(long = "pre-feats")]
        pre_feats: Option<PathBuf>,
        #[arg(long, requires = "height")]
        width: Option<usize>,
        #[arg(long, requires = "width")]
        height: Option<usize>,
    },
}

fn verdict(report: &MetricsReport) -> ExitCode {
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            trace,
            csv,
            metrics,
        } => {
            let mut s = scenario::resolve(&scenario)?;
            if let Some(seed) = seed {
                s = s.with_seed(seed);
            }
            let out = run_scenario(&s)?;
            if let Some(p) = &trace {
                out.write_trace(p).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = &csv {
                out.write_csv(p).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = &metrics {
                std::fs::write(p, serde_json::to_string_pretty(&out.metrics)?)
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            println!("scenario {} (seed {})", s.name, s.seed);
            print!("{}", out.metrics);
            Ok(verdict(&out.metrics))
        }
        Command::ListScenarios => {
            let mut stdout = std::io::stdout().lock();
            for name in builtin_names() {
                let s = scenario::builtin(name).expect("bundled");
                writeln!(stdout, "{name:<16} {}", s.description)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ShowScenario { name } => {
            let text = scenario::builtin_source(&name).with_context(|| format!("no bundled scenario `{name}`"))?;
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { trace } => {
            let report = report_from_trace(&trace).with_context(|| format!("reading {}", trace.display()))?;
            print!("{report}");
            Ok(verdict(&report))
        }
        Command::Serve {
            scenario,
            tcp,
            ws,
            bind,
            speed,
            seed,
            trace: trace_path,
        } => {
            let mut s = scenario::resolve(&scenario)?;
            if let Some(seed) = seed {
                s = s.with_seed(seed);
            }
            let opts = ServeOptions {
                tcp: SocketAddr::new(bind, tcp),
                ws: SocketAddr::new(bind, ws),
                speed,
                stop_at_end: false,
            };
            let handle = server::serve(&s, &opts)?;
            let stop = handle.stop_flag();
            ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)).context("installing interrupt handler")?;
            let summary = handle.wait()?;
            if let Some(p) = &trace_path {
                let f = std::io::BufWriter::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?);
                trace::write_jsonl(f, &summary.header, &summary.rows)?;
            }
            print!("{}", summary.metrics);
            Ok(verdict(&summary.metrics))
        }
        Command::DepthEval {
            frames,
            refs,
            lambda,
            alpha,
            out,
            pseudo,
            mixed,
            pseudo_b,
            masks,
            feats,
            pre_feats,
            width,
            height,
        } => {
            let weights = LossWeights::new(lambda, alpha)?;
            let inputs = EvalInputs {
                frames,
                refs,
                pseudo,
                mixed,
                pseudo_b,
                masks,
                feats,
                pre_feats,
                size: width.zip(height),
            };
            let rows = depth_eval::run(&inputs, &weights, &out)?;
            println!("{} frame(s) evaluated; results in {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
