use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use adapt_core::roguelike::{self, Corpus};
use adapt_core::SessionRng;
use adapt_harness::{run_experiment, write_outputs, ExperimentConfig};
use adapt_service::{router, Service, ServiceConfig};
use anyhow::Context;
use clap::{Parser, Subcommand};
use rand::SeedableRng;

#[derive(Parser)]
#[command(name = "adapt", version, about = "Adaptive content serving and offline experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulated-player experiment and write its reports.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Comma-separated policies to assign at random.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        /// Level corpus file; generated from `--corpus-seed` when absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        corpus_seed: u64,
        #[arg(long, default_value = "playtraces.jsonl")]
        log: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a roguelike level corpus.
    Corpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = roguelike::CORPUS_SIZE)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn generate_corpus(seed: u64, size: usize) -> anyhow::Result<Corpus> {
    let mut rng = SessionRng::seed_from_u64(seed);
    Ok(roguelike::build_corpus(size, &mut rng)?)
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .init();
    match Cli::parse().command {
        Command::Experiment { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: ExperimentConfig = text.parse()?;
            let run = run_experiment(&cfg)?;
            write_outputs(&run, &out)?;
            for policy in &cfg.policies {
                if let Some(row) = run.report.overall(policy) {
                    println!("{policy}: mae {:.3} s over {} results", row.mae, row.n);
                }
            }
            println!("wrote reports to {}", out.display());
        }
        Command::Serve {
            port,
            host,
            policies,
            corpus,
            corpus_seed,
            log,
            seed,
        } => {
            let corpus = match corpus {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    Corpus::from_text(&text)?
                }
                None => generate_corpus(corpus_seed, roguelike::CORPUS_SIZE)?,
            };
            let mut cfg = ServiceConfig::new(seed, Arc::new(corpus));
            cfg.policies = policies;
            cfg.log_path = Some(log.clone());
            let svc = Service::start(cfg)?;
            tracing::info!(
                sessions = svc.session_count(),
                log = %log.display(),
                "replayed playtrace log"
            );
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                tracing::info!(%addr, "listening");
                axum::serve(listener, router(Arc::new(svc)))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
        Command::Corpus { seed, size, out } => {
            let corpus = generate_corpus(seed, size)?;
            fs::write(&out, corpus.to_text())
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} levels to {}", corpus.len(), out.display());
        }
    }
    Ok(())
}
