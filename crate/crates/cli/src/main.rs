use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use crewroom_core::conversation::ConversationStore;
use crewroom_core::replay::run_replay;
use crewroom_core::studio::{bundled_presets, load_presets};
use crewroom_service::{build_engine, serve, ProviderMode, ServiceConfig};

#[derive(Parser)]
#[command(name = "crewroom", version, about = "Multi-agent group chat service")]
struct Cli {
    /// Directory holding agents, knowledge and conversations.
    #[arg(long, global = true, default_value = "data")]
    data_dir: PathBuf,
    /// `live` reads CREWROOM_* variables; `scripted` needs --provider-script.
    #[arg(long, global = true, default_value = "live")]
    mode: ProviderMode,
    #[arg(long, global = true)]
    provider_script: Option<PathBuf>,
    /// Base seed for per-round shuffles.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen_addr: SocketAddr,
    },
    /// Manage the bundled preset agents.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Add a text document to an agent's private knowledge.
    Ingest {
        agent: String,
        file: PathBuf,
        /// Defaults to the file name without extension.
        #[arg(long)]
        doc_id: Option<String>,
    },
    /// Run a replay file headlessly and print its transcript.
    Replay {
        script: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write the transcript here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a stored conversation.
    Export {
        conversation: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Create the preset agents and ingest their documents.
    Install {
        /// Read presets from this fixture root instead of the built-in copies.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

fn config(cli: &Cli) -> ServiceConfig {
    ServiceConfig {
        data_dir: cli.data_dir.clone(),
        mode: cli.mode,
        provider_script: cli.provider_script.clone(),
        seed: cli.seed,
    }
}

fn write_output(out: Option<&PathBuf>, body: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "warn,crewroom=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Serve { listen_addr } => {
            let engine = build_engine(&config(&cli)).context("cannot start service")?;
            serve(Arc::new(engine), *listen_addr).await?;
        }
        Command::Presets {
            action: PresetAction::Install { fixtures },
        } => {
            let presets = match fixtures {
                Some(root) => load_presets(root)?,
                None => bundled_presets(),
            };
            let engine = build_engine(&config(&cli))?;
            for agent in engine.install_presets(&presets).await? {
                println!("{}\t{}", agent.agent_id, agent.name());
            }
        }
        Command::Ingest {
            agent,
            file,
            doc_id,
        } => {
            let text = std::fs::read_to_string(file)
                .with_context(|| format!("reading {}", file.display()))?;
            let doc_id = match doc_id {
                Some(id) => id.clone(),
                None => file
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .map(str::to_string)
                    .context("cannot derive a document id from the file name; pass --doc-id")?,
            };
            let engine = build_engine(&config(&cli))?;
            let chunks = engine.upload_knowledge(agent, &doc_id, &text).await?;
            println!("{chunks} chunks added to {agent} as {doc_id}");
        }
        Command::Replay {
            script,
            format,
            out,
        } => {
            if !script.exists() {
                bail!("replay file {} does not exist", script.display());
            }
            let scratch = tempfile::tempdir()?;
            let output = run_replay(script, scratch.path()).await?;
            let body = match format {
                Format::Text => output.text,
                Format::Structured => output.structured,
            };
            write_output(out.as_ref(), &body)?;
        }
        Command::Export {
            conversation,
            format,
        } => {
            // Reading history needs no provider.
            let store = ConversationStore::open(cli.data_dir.join("conversations"))?;
            let body = match format {
                Format::Text => store.export_text(conversation)?,
                Format::Structured => store.export_structured(conversation)?,
            };
            print!("{body}");
        }
    }
    Ok(())
}
