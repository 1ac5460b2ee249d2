use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anicurate::config::{GuideMode, PipelineConfig};
use anicurate::conformance::run_checks;
use anicurate::error::{CliError, Result};
use anicurate::pool::{connect, remote_options};
use anicurate::stages::{self, CorpusSpec, Ctx};
use anicurate_core::providers::{wire, Endpoint, ReferenceProvider};
use anicurate_core::report::Format;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anicurate", version, about = "Animation clip curation, conditioning and evaluation pipeline")]
struct Cli {
    /// TOML config file; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (overrides `workers`).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split input videos into clips at hard cuts; writes clips.jsonl.
    Scenes {
        /// .y4m files or .ppm frame directories (default: `inputs`).
        inputs: Vec<PathBuf>,
    },
    /// Score every clip; writes scores.jsonl.
    Score,
    /// Fit the filter rule to a retention target; writes rule.json.
    Calibrate {
        #[arg(long)]
        target: Option<f64>,
        /// Calibrate on N synthetic score records instead of scores.jsonl.
        #[arg(long)]
        synthetic: Option<usize>,
    },
    /// Apply the filter rule; writes verdicts.jsonl.
    Filter {
        /// Rule file (default: rule.json in the output directory, else `[filter]`).
        #[arg(long)]
        rule: Option<PathBuf>,
    },
    /// Caption passing clips; writes manifest.jsonl.
    Manifest,
    /// Build conditioned training inputs; writes condition/.
    Condition {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Score generated clips against a benchmark; writes samples.jsonl.
    Evaluate {
        #[arg(long)]
        benchmark: PathBuf,
        /// Directory with <entry id>.y4m files or <entry id>/ frame directories.
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Aggregate samples into the score table and print it.
    Report {
        /// Sample files (default: samples.jsonl in the output directory).
        #[arg(long = "samples", num_args = 1..)]
        samples: Vec<PathBuf>,
        /// Human ratings CSV.
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
    },
    /// Provider endpoint tools.
    Providers {
        #[command(subcommand)]
        command: ProvidersCommand,
    },
    /// Per-dimension score histograms; writes histogram.csv.
    Histogram {
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Generate synthetic inputs.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
    /// scenes, score, calibrate (when a target is configured), filter, manifest and condition.
    Run,
}

#[derive(Subcommand)]
enum ProvidersCommand {
    /// Check that an endpoint answers every operation with well-formed results.
    Test {
        #[arg(long)]
        endpoint: String,
    },
    /// Serve the reference provider on stdin/stdout, or on a TCP address.
    Serve {
        #[arg(long)]
        tcp: Option<String>,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Multi-scene videos in <out>/corpus/.
    Corpus {
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 12)]
        fps: u32,
    },
    /// A small benchmark with a perfect generated set in <out>/bench/.
    Benchmark {
        #[arg(long, default_value_t = 6)]
        entries: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Keyframe,
    #[value(name = "motion_area")]
    MotionArea,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Scenes { .. } => "scenes",
            Command::Score => "score",
            Command::Calibrate { .. } => "calibrate",
            Command::Filter { .. } => "filter",
            Command::Manifest => "manifest",
            Command::Condition { .. } => "condition",
            Command::Evaluate { .. } => "evaluate",
            Command::Report { .. } => "report",
            Command::Providers { .. } => "providers",
            Command::Histogram { .. } => "histogram",
            Command::Synth { .. } => "synth",
            Command::Run => "run",
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.out_dir = o.clone();
    }
    if let Command::Condition { mode: Some(m) } = &cli.command {
        config.conditioning.mode = match m {
            ModeArg::Keyframe => GuideMode::Keyframe,
            ModeArg::MotionArea => GuideMode::MotionArea,
        };
    }
    config.validate()?;
    Ok(config)
}

fn providers_command(config: &PipelineConfig, command: &ProvidersCommand) -> Result<()> {
    match command {
        ProvidersCommand::Test { endpoint } => {
            let endpoint: Endpoint = endpoint.parse()?;
            let provider = connect(endpoint.clone(), &remote_options(config), 1)?;
            let checks = run_checks(provider.get());
            for c in &checks {
                println!("{}", serde_json::to_string(c).expect("checks serialize"));
            }
            let failed: Vec<_> = checks.iter().filter(|c| !c.ok).collect();
            if failed.is_empty() {
                log::info!("providers: {endpoint} passed {} checks", checks.len());
                Ok(())
            } else {
                Err(CliError::Conformance {
                    failed: failed.len(),
                    checked: checks.len(),
                    class: failed[0].class.clone(),
                })
            }
        }
        ProvidersCommand::Serve { tcp: None } => {
            let stdin = std::io::stdin();
            wire::serve(&ReferenceProvider::default(), stdin.lock(), std::io::stdout().lock())
                .map_err(|e| CliError::io(Path::new("<stdio>"), e))
        }
        ProvidersCommand::Serve { tcp: Some(addr) } => {
            let listener = std::net::TcpListener::bind(addr).map_err(|e| CliError::io(Path::new(addr), e))?;
            log::info!("providers: serving on {}", listener.local_addr().map_err(|e| CliError::io(Path::new(addr), e))?);
            wire::serve_tcp(Arc::new(ReferenceProvider::default()), listener)
                .map_err(|e| CliError::io(Path::new(addr), e))
        }
    }
}

fn run_all(ctx: &Ctx) -> Result<()> {
    stages::timed("scenes", || stages::scenes(ctx, &[]))?;
    stages::timed("score", || stages::score(ctx))?;
    if ctx.config.calibration.target.is_some() {
        stages::timed("calibrate", || stages::calibrate(ctx, None, None))?;
    }
    stages::timed("filter", || stages::filter(ctx, None))?;
    stages::timed("manifest", || stages::manifest(ctx))?;
    stages::timed("condition", || stages::condition(ctx))?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let stage = cli.command.stage();
    if let Command::Providers { command } = &cli.command {
        return providers_command(&config, command);
    }
    let ctx = Ctx::new(config)?;
    stages::timed(stage, || match &cli.command {
        Command::Scenes { inputs } => stages::scenes(&ctx, inputs).map(drop),
        Command::Score => stages::score(&ctx).map(drop),
        Command::Calibrate { target, synthetic } => stages::calibrate(&ctx, *target, *synthetic).map(drop),
        Command::Filter { rule } => stages::filter(&ctx, rule.as_deref()).map(drop),
        Command::Manifest => stages::manifest(&ctx).map(drop),
        Command::Condition { .. } => stages::condition(&ctx).map(drop),
        Command::Evaluate {
            benchmark,
            generated,
            model,
            output,
        } => stages::evaluate(&ctx, benchmark, generated, model, output.as_deref()).map(drop),
        Command::Report {
            samples,
            ratings,
            format,
        } => {
            let format = match format {
                FormatArg::Markdown => Format::Markdown,
                FormatArg::Csv => Format::Csv,
            };
            print!("{}", stages::report(&ctx, samples, ratings.as_deref(), format)?);
            Ok(())
        }
        Command::Histogram { bins } => stages::histogram(&ctx, *bins),
        Command::Synth {
            command: SynthCommand::Corpus {
                count,
                width,
                height,
                fps,
            },
        } => {
            let spec = CorpusSpec {
                count: *count,
                width: *width,
                height: *height,
                fps: *fps,
            };
            for p in stages::synth_corpus(&ctx, &spec)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Synth {
            command: SynthCommand::Benchmark { entries },
        } => {
            println!("{}", stages::synth_benchmark(&ctx, *entries)?.display());
            Ok(())
        }
        Command::Run => run_all(&ctx),
        Command::Providers { .. } => unreachable!("handled above"),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json(cli.command.stage()));
            ExitCode::FAILURE
        }
    }
}
