use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cqgen::catalog::Catalog;
use cqgen::chat::{BackendConfig, ChatBackend, RecordingBackend, RemoteBackend, ScriptedBackend};
use cqgen::config::{Profile, RunConfig};
use cqgen::pipeline::{run_dataset, PipelineError};
use cqgen::report::{aggregate_labels, parse_labels, render_table, TableFormat};

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "cqgen",
    version,
    about = "Generate and rank critical questions for argumentative texts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    /// OpenAI-compatible chat-completions endpoint.
    Remote,
    /// Digest-keyed replay store captured from earlier runs.
    Replay,
    /// Ordered per-intervention script.
    Scripted,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a dataset.
    Run(Box<RunArgs>),
    /// Load and validate a catalog file.
    ValidateCatalog { path: PathBuf },
    /// Aggregate evaluation labels into a distribution table.
    Report {
        #[arg(long)]
        labels: PathBuf,
        /// Comma-separated run labels; first-appearance order by default.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
        #[arg(long, default_value = "text")]
        format: TableFormat,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "con+ss+rank-er")]
    profile: String,
    #[arg(long, value_enum, default_value = "remote")]
    backend: BackendKind,
    /// Script or replay store for the offline backends.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    rank_k: Option<usize>,
    /// JSON-lines run log.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Catalog file; the shipped catalog is used when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    system_prompt: Option<String>,
    /// Prompt file with an `{intervention}` placeholder (baseline profile).
    #[arg(long)]
    baseline_prompt: Option<PathBuf>,
    /// Append every exchange to this replay store.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    run_label: Option<String>,
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn read_text(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn build_backend(
    kind: BackendKind,
    script: Option<&Path>,
    config: &BackendConfig,
) -> Result<Box<dyn ChatBackend>, String> {
    match kind {
        BackendKind::Remote => RemoteBackend::new(config.clone())
            .map(|b| Box::new(b) as Box<dyn ChatBackend>)
            .map_err(|e| e.to_string()),
        BackendKind::Replay | BackendKind::Scripted => {
            let path = script.ok_or("--script is required for offline backends")?;
            ScriptedBackend::load(path)
                .map(|b| Box::new(b) as Box<dyn ChatBackend>)
                .map_err(|e| e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::ValidateCatalog { path } => match Catalog::load(&path) {
            Ok(catalog) => {
                println!("{}: {} schemes", path.display(), catalog.len());
                for scheme in catalog.iter() {
                    let cqs = if scheme.has_cqs() {
                        format!("{} CQs", scheme.cq_templates.len())
                    } else {
                        "no CQs".to_string()
                    };
                    println!("  {} ({cqs})", scheme.name);
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_CONFIG, e),
        },
        Command::Report {
            labels,
            order,
            format,
        } => {
            let items = match read_text(&labels)
                .and_then(|t| parse_labels(&t).map_err(|e| e.to_string()))
            {
                Ok(items) => items,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let distributions = aggregate_labels(&items);
            let order =
                order.unwrap_or_else(|| distributions.iter().map(|d| d.run.clone()).collect());
            match render_table(&distributions, &order, format) {
                Ok(table) => {
                    print!("{table}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_CONFIG, e),
            }
        }
        Command::Run(args) => run(*args),
    }
}

fn run(args: RunArgs) -> ExitCode {
    let RunArgs {
        dataset,
        out,
        profile,
        backend,
        script,
        model,
        endpoint,
        api_key_env,
        temperature,
        parallelism,
        rank_k,
        log,
        catalog,
        system_prompt,
        baseline_prompt,
        record,
        run_label,
    } = args;
    let profile: Profile = match profile.parse() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut config = RunConfig::from_profile(profile);
    if let Some(model) = model {
        config.backend.model = model;
    }
    if let Some(endpoint) = endpoint {
        config.backend.endpoint = endpoint;
    }
    if let Some(var) = api_key_env {
        config.backend.api_key_env = var;
    }
    if let Some(t) = temperature {
        config.backend.temperature = t;
    }
    if let Some(n) = parallelism {
        config.parallelism = n;
    }
    if let Some(k) = rank_k {
        config.rank_k = k;
    }
    if let Some(prompt) = system_prompt {
        config.system_prompt = prompt;
    }
    if let Some(label) = run_label {
        config.run_label = label;
    }
    if let Some(path) = baseline_prompt {
        match read_text(&path) {
            Ok(text) => config.baseline_prompt = Some(text),
            Err(e) => return fail(EXIT_CONFIG, e),
        }
    }
    if let Err(e) = config.validate() {
        return fail(EXIT_CONFIG, e);
    }
    let catalog = match catalog {
        Some(path) => match Catalog::load(&path) {
            Ok(c) => c,
            Err(e) => return fail(EXIT_CONFIG, e),
        },
        None => Catalog::builtin(),
    };
    let mut chat = match build_backend(backend, script.as_deref(), &config.backend) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Some(path) = record {
        chat = match RecordingBackend::new(chat, &path) {
            Ok(r) => Box::new(r),
            Err(e) => return fail(EXIT_CONFIG, e),
        };
    }
    match run_dataset(
        &dataset,
        &out,
        log.as_deref(),
        &catalog,
        &config,
        chat.as_ref(),
    ) {
        Ok(summary) => {
            eprintln!(
                "{}: {} succeeded, {} failed, {} warning(s) in {:.2}s",
                config.run_label,
                summary.succeeded,
                summary.failed,
                summary.warnings,
                summary.wall_time.as_secs_f64()
            );
            if summary.failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_PARTIAL)
            }
        }
        Err(e @ (PipelineError::Config(_) | PipelineError::Dataset(_))) => fail(EXIT_CONFIG, e),
        Err(e) => fail(EXIT_PARTIAL, e),
    }
}
