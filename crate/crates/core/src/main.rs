use std::net::SocketAddr;
use std::process::ExitCode;

use clap::Parser;
use frugal_core::cli::{self, Cli, Command, RunConfig};
use frugal_core::service::{self, AppState, DatasetRegistry};
use frugal_core::{Error, Result};

fn main() -> ExitCode {
    let filter = tracing_subscriber::EnvFilter::try_from_env("FRUGAL_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();

    let args = Cli::parse();
    match dispatch(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let config = RunConfig::from_args(&args)?;
            let written = cli::cmd_run(&config)?;
            println!("wrote {} files to {}", written.0.len(), config.out.display());
        }
        Command::Compare(args) => {
            let config = RunConfig::from_args(&args)?;
            cli::cmd_compare(&config)?;
            let table = std::fs::read_to_string(config.out.join("comparison.txt"))
                .map_err(|e| Error::io("reading comparison.txt", e))?;
            print!("{table}");
        }
        Command::Ablate(args) => {
            let config = RunConfig::from_args(&args)?;
            let (_, grids) = cli::cmd_ablate(&config)?;
            for (seed, grid) in config.seeds.iter().zip(grids) {
                println!("seed {seed}\n{grid}");
            }
        }
        Command::Generate(args) => cli::cmd_generate(&args)?,
        Command::Extract(args) => {
            let n = cli::cmd_extract(&args)?;
            println!("extracted {n} patch pairs to {}", args.out.display());
        }
        Command::Serve(args) => {
            let addr: SocketAddr = format!("{}:{}", args.host, args.serve_port)
                .parse()
                .map_err(|_| Error::config("host", format!("cannot parse {:?}", args.host)))?;
            let mut registry = DatasetRegistry::with_synthetic()?;
            if let Some(dir) = &args.data_dir {
                registry.load_dir(dir)?;
            }
            let runtime = tokio::runtime::Runtime::new()
                .map_err(|e| Error::io("starting runtime", e))?;
            runtime.block_on(async {
                let state = AppState::open(registry, Some(args.state_dir.clone()))?;
                service::serve(addr, state).await
            })?;
        }
    }
    Ok(())
}
