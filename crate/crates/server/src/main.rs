use clap::Parser;
use wordcraft_server::{run, Cli};

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    if let Err(e) = run(Cli::parse()).await {
        eprintln!("{e}");
        std::process::exit(2);
    }
}
