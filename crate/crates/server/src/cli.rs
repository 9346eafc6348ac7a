use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use scis_core::{Clinic, Permission, Store, SystemClock};
use tracing_subscriber::EnvFilter;

use crate::config::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "scis", version, about = "Skin cancer clinic information system")]
pub struct Cli {
    /// Service config file.
    #[arg(long, global = true, default_value = "scis.toml")]
    pub config: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create the first administrator account.
    InitAdmin {
        #[arg(long)]
        username: String,
        /// Read from stdin when absent.
        #[arg(long, env = "SCIS_ADMIN_PASSWORD", hide_env_values = true)]
        password: Option<String>,
        #[arg(long, default_value = "System")]
        given: String,
        #[arg(long, default_value = "Administrator")]
        family: String,
    },
    /// Run the HTTP service.
    Serve,
    /// Write the datastore as a snapshot stream. Needs administrator
    /// credentials.
    Export {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        username: String,
        #[arg(long, env = "SCIS_ADMIN_PASSWORD", hide_env_values = true)]
        password: Option<String>,
    },
    /// Load a snapshot stream into an empty datastore.
    Import {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Validate the config file without starting anything.
    ConfigCheck,
}

fn read_password(given: Option<String>) -> anyhow::Result<String> {
    if let Some(p) = given {
        return Ok(p);
    }
    eprint!("password: ");
    io::stderr().flush()?;
    let mut line = String::new();
    io::stdin().lock().read_line(&mut line)?;
    let password = line.trim_end_matches(['\r', '\n']).to_owned();
    if password.is_empty() {
        bail!("no password given");
    }
    Ok(password)
}

pub fn open_clinic(config: &ServiceConfig) -> anyhow::Result<Clinic> {
    let store = Store::open(&config.datastore)
        .with_context(|| format!("cannot open datastore {}", config.datastore.display()))?;
    Ok(Clinic::new(store, config.clinic_config()?, Arc::new(SystemClock))?)
}

fn load(path: &Path) -> anyhow::Result<ServiceConfig> {
    Ok(ServiceConfig::load(path)?)
}

/// Runs one command and returns the line to print on success.
pub fn run(cli: Cli) -> anyhow::Result<String> {
    let config = load(&cli.config)?;
    match cli.command {
        Command::InitAdmin {
            username,
            password,
            given,
            family,
        } => {
            let clinic = open_clinic(&config)?;
            let password = read_password(password)?;
            let id = clinic.bootstrap_admin(&username, &password, &given, &family)?;
            Ok(format!("created administrator {username} ({id})"))
        }
        Command::Serve => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(config))?;
            Ok("stopped".to_owned())
        }
        Command::Export {
            out,
            username,
            password,
        } => {
            let clinic = open_clinic(&config)?;
            let password = read_password(password)?;
            clinic.authenticate(&username, &password, Permission::ManageRole)?;
            let stream = clinic.store().export();
            fs::write(&out, &stream).with_context(|| format!("cannot write {}", out.display()))?;
            Ok(format!("exported {} lines to {}", stream.lines().count(), out.display()))
        }
        Command::Import { input } => {
            let stream =
                fs::read_to_string(&input).with_context(|| format!("cannot read {}", input.display()))?;
            let clinic = open_clinic(&config)?;
            let count = clinic.import_snapshot(&stream)?;
            Ok(format!("imported {count} records into {}", config.datastore.display()))
        }
        Command::ConfigCheck => {
            let clinic = config.clinic_config()?;
            Ok(format!(
                "config ok: {} procedure kinds, encryption key {}, datastore {}",
                clinic.fee_schedule.catalogue().count(),
                if clinic.encryption_key.is_some() { "set" } else { "not set" },
                config.datastore.display()
            ))
        }
    }
}

pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .try_init();
    let clinic = Arc::new(open_clinic(&config)?);
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .with_context(|| format!("cannot listen on {}", config.listen))?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, crate::api::router(clinic))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
