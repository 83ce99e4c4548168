use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use crowdsense::ingestion::{read_dump, SourceKind};
use crowdsense::{Config, ProviderKind, Workspace};
use crowdsense_server::{providers, sus_csv};

#[derive(Parser)]
#[command(name = "crowdsense", version, about = "Complaint pooling and collaborative problem-solving service")]
struct Cli {
    /// JSON config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `data_dir` from the config.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Restore state and serve the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u32>,
    },
    /// Ingest a newline-delimited JSON dump.
    Ingest(IngestArgs),
    /// Pipeline operations.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
    /// System Usability Scale utilities.
    Sus {
        #[command(subcommand)]
        command: SusCommand,
    },
    /// Write a state snapshot next to the event log.
    Snapshot,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum)]
    source_kind: KindArg,
    #[arg(long)]
    source_name: String,
    #[arg(long)]
    file: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Subreddit,
    AppStoreReview,
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Categorize, summarize and draft solutions now, then commit.
    Run {
        #[arg(long, value_enum)]
        provider: Option<ProviderArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Live,
    Mock,
    Recorded,
}

impl From<ProviderArg> for ProviderKind {
    fn from(p: ProviderArg) -> Self {
        match p {
            ProviderArg::Live => ProviderKind::Live,
            ProviderArg::Mock => ProviderKind::Mock,
            ProviderArg::Recorded => ProviderKind::Recorded,
        }
    }
}

#[derive(Subcommand)]
enum SusCommand {
    /// Score a CSV of 10-answer rows.
    Score {
        #[arg(long)]
        file: PathBuf,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    Ok(config)
}

fn open(config: &Config) -> anyhow::Result<Workspace> {
    Workspace::open(&config.data_dir).with_context(|| format!("cannot open {}", config.data_dir.display()))
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Serve { port } => {
            if let Some(port) = port {
                config.http_port = port;
            }
            config.validate()?;
            tokio::runtime::Runtime::new()?.block_on(crowdsense_server::serve(config))
        }
        Command::Ingest(args) => {
            let kind = match args.source_kind {
                KindArg::Subreddit => SourceKind::Subreddit,
                KindArg::AppStoreReview => SourceKind::AppStoreReview,
            };
            let file = File::open(&args.file).with_context(|| format!("cannot read {}", args.file.display()))?;
            let records = read_dump(BufReader::new(file))?;
            let mut ws = open(&config)?;
            print_json(&ws.ingest(kind, &args.source_name, &records)?)
        }
        Command::Pipeline {
            command: PipelineCommand::Run { provider },
        } => {
            let provider = providers::build(&config.provider, provider.map(Into::into))?;
            let mut ws = open(&config)?;
            let run = ws.run_pipeline(provider.as_ref(), &config.pipeline())?;
            print_json(&serde_json::json!({
                "run": run.header(),
                "request_count": run.requests.len(),
                "problems": ws.zoom_out(),
            }))
        }
        Command::Sus {
            command: SusCommand::Score { file },
        } => {
            let input = File::open(&file).with_context(|| format!("cannot read {}", file.display()))?;
            for row in sus_csv::score_csv(input)? {
                println!("{}\t{:.1}\t{}", row.label, row.score, row.rating);
            }
            Ok(())
        }
        Command::Snapshot => {
            let ws = open(&config)?;
            let path = ws.snapshot()?;
            println!("{}", path.display());
            Ok(())
        }
    }
}
