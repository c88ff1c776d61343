use std::net::SocketAddr;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use fieldvoice::api::{router, AppState};
use fieldvoice::setup::{job_options, services, JobChoices};
use fieldvoice_core::asr::load_replay_fixture;
use fieldvoice_core::config::Config;
use fieldvoice_core::eval::{run_benchmark, BenchmarkSetup};
use fieldvoice_core::extraction::RawSemanticReport;
use fieldvoice_core::noise::{build_manifest, discover_manifests, inject_noise_file, NoiseKind, Snr};
use fieldvoice_core::pipeline::{process, Halt, JobInput, Pipeline};
use fieldvoice_core::validation::run_validation;
use fieldvoice_core::{canonical_string, parse_report};

/// Turns emergency radio traffic into structured, geo-referenced reports.
#[derive(Parser)]
#[command(name = "fieldvoice", version)]
struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true, env = "FIELDVOICE_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one recording or transcript through the pipeline.
    Run(RunArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Benchmark every scenario under a directory.
    Eval(EvalArgs),
    /// Write a noisy copy of a WAV file at a target SNR.
    Noise(NoiseArgs),
    /// Re-run validation on a stored report.
    Validate(ValidateArgs),
    /// Build manifest.json for a scenario directory.
    Manifest {
        dir: PathBuf,
    },
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["audio", "transcript"])))]
struct RunArgs {
    #[arg(long)]
    audio: Option<PathBuf>,
    /// JSONL transcript; skips speech recognition.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long, default_value = "replay")]
    asr: String,
    #[arg(long, default_value = "scripted")]
    llm: String,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Country code (`pt`) or `min_lat,min_lon,max_lat,max_lon`.
    #[arg(long)]
    region: Option<String>,
    /// Re-prompt once when units and speakers disagree.
    #[arg(long)]
    rectify: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// Worker threads; the configured concurrency when omitted.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "replay")]
    asr: String,
    #[arg(long, default_value = "scripted")]
    llm: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    White,
    Pink,
    Babble,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file; `<input>_<kind>_<snr>db.wav` when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Target SNR in dB, or `clean`.
    #[arg(long)]
    snr: Snr,
    #[arg(long, value_enum, default_value = "white")]
    kind: Kind,
    /// Background recording for `--kind babble`.
    #[arg(long)]
    babble: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Stored report (canonical JSON).
    #[arg(long)]
    report: PathBuf,
    /// Transcript the report was extracted from.
    #[arg(long)]
    transcript: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Run(a) => run(&config, a),
        Command::Serve(a) => serve(config, a),
        Command::Eval(a) => eval(&config, a),
        Command::Noise(a) => noise(a),
        Command::Validate(a) => validate(&config, a),
        Command::Manifest { dir } => {
            let m = build_manifest(&dir)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
            Ok(())
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(config: &Config, a: RunArgs) -> anyhow::Result<()> {
    let input = match (a.audio, a.transcript) {
        (Some(p), _) => JobInput::Audio(p),
        (None, Some(p)) => JobInput::Transcript(p),
        (None, None) => bail!("pass --audio or --transcript"),
    };
    if !input.path().is_file() {
        bail!("{} does not exist", input.path().display());
    }
    let options = job_options(
        config,
        &JobChoices {
            asr: Some(a.asr),
            llm: Some(a.llm),
            region: a.region,
            rectify: a.rectify,
        },
    )?;
    let services = services(config)?;
    let out = process(&input, &options, &services, &mut |_| ControlFlow::Continue(())).map_err(|h| match h {
        Halt::Failed(e) => anyhow::anyhow!("job failed at {e}"),
        Halt::Aborted => anyhow::anyhow!("job aborted"),
    })?;
    let t = out.timing;
    tracing::info!(
        transcription_s = t.transcription_s,
        llm_s = t.llm_s,
        validation_s = t.validation_s,
        geocoding_s = t.geocoding_s,
        total_s = t.total_s,
        flags = out.report.flags.len(),
        "done"
    );
    emit(a.out.as_deref(), &canonical_string(&out.report)?)
}

fn serve(config: Config, a: ServeArgs) -> anyhow::Result<()> {
    let services = services(&config)?;
    let workers = a.workers.unwrap_or(config.concurrency);
    let (pipeline, recovery) = Pipeline::open(&a.data, services, workers)
        .with_context(|| format!("opening data directory {}", a.data.display()))?;
    if recovery != Default::default() {
        tracing::warn!(?recovery, "recovered from an unclean shutdown");
    }
    let state = AppState {
        pipeline: Arc::new(pipeline),
        config: Arc::new(config),
    };
    let app = router(state.clone());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.addr).await?;
        tracing::info!(addr = %a.addr, data = %a.data.display(), workers, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    state.pipeline.shutdown();
    Ok(())
}

fn eval(config: &Config, a: EvalArgs) -> anyhow::Result<()> {
    let manifests = discover_manifests(&a.manifest_dir)?;
    if manifests.is_empty() {
        bail!("no scenarios under {}", a.manifest_dir.display());
    }
    let options = job_options(
        config,
        &JobChoices {
            asr: Some(a.asr),
            llm: Some(a.llm),
            ..JobChoices::default()
        },
    )?;
    let setup = BenchmarkSetup {
        services: services(config)?,
        options,
        runs_per_scenario: a.runs,
    };
    let tables = run_benchmark(&manifests, &setup);
    tables.write_to(&a.out_dir)?;
    println!("{}", tables.markdown());
    Ok(())
}

fn noise(a: NoiseArgs) -> anyhow::Result<()> {
    let (kind, label) = match a.kind {
        Kind::White => (NoiseKind::White, "white"),
        Kind::Pink => (NoiseKind::Pink, "pink"),
        Kind::Babble => match a.babble {
            Some(p) => (NoiseKind::Babble(p), "babble"),
            None => bail!("--kind babble needs --babble <wav>"),
        },
    };
    let out = a.out.unwrap_or_else(|| {
        let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("audio");
        let snr = match a.snr {
            Snr::Clean => "clean".to_string(),
            Snr::Db(db) => format!("{db}db"),
        };
        a.input.with_file_name(format!("{stem}_{label}_{snr}.wav"))
    });
    let noisy = inject_noise_file(&a.input, &out, a.snr, &kind, a.seed)?;
    println!(
        "{} achieved {:.2} dB, {:.4}% clipped",
        out.display(),
        noisy.achieved_snr_db,
        100.0 * noisy.clipped_ratio
    );
    Ok(())
}

fn validate(config: &Config, a: ValidateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let report = parse_report(&text)?;
    let transcript = load_replay_fixture(&a.transcript)?;
    let ner = config.ner()?.recognize(transcript.full_text())?;
    let checked = run_validation(
        &RawSemanticReport::from_report(report),
        &transcript,
        &ner,
        &config.calibration,
        None,
    )?;
    for f in &checked.flags {
        tracing::info!(kind = ?f.kind, subject = f.subject.as_deref().unwrap_or(""), "{}", f.detail);
    }
    emit(a.out.as_deref(), &canonical_string(&checked)?)
}
