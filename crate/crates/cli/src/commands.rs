use std::fs::File;
use std::io::{self, BufWriter, IsTerminal, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use citadel_api::AppState;
use citadel_core::blob::BlobStore;
use citadel_core::config::Config;
use citadel_core::fixture;
use citadel_core::service::Settings;
use citadel_core::store::{Store, StoreError, StoreOptions};
use citadel_core::time::{Clock, ManualClock, SystemClock};
use citadel_core::{Citadel, CoreError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Internal(m) => CliError::Internal(m),
            other => CliError::User(format!("{}: {other}", other.code())),
        }
    }
}

fn store_error(e: StoreError) -> CliError {
    match e {
        StoreError::Locked(_) | StoreError::Io { .. } => CliError::User(e.to_string()),
        other => CliError::Internal(other.to_string()),
    }
}

fn open(config: &Config, clock: Arc<dyn Clock>) -> Result<Citadel, CliError> {
    let store = Store::open(&config.data_dir, clock, StoreOptions::default()).map_err(store_error)?;
    let blob_dir = config.data_dir.join("blobs");
    let blobs = BlobStore::on_disk(&blob_dir)
        .map_err(|e| CliError::User(format!("cannot open {}: {e}", blob_dir.display())))?;
    Ok(Citadel::new(store, Arc::new(blobs), Settings::from_config(config)))
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(io::stderr)
        .with_ansi(io::stderr().is_terminal())
        .try_init();
}

async fn termination() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = match signal(SignalKind::terminate()) {
            Ok(s) => s,
            Err(e) => {
                tracing::warn!(error = %e, "cannot watch SIGTERM");
                let _ = tokio::signal::ctrl_c().await;
                return;
            }
        };
        tokio::select! {
            _ = term.recv() => {}
            _ = tokio::signal::ctrl_c() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

pub fn serve(config: &Config) -> Result<(), CliError> {
    init_logging();
    let citadel = Arc::new(open(config, Arc::new(SystemClock))?);
    let state = AppState::new(citadel, Duration::from_secs(u64::from(config.chat_longpoll_seconds)));
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(format!("runtime: {e}")))?;
    rt.block_on(async {
        let addr = &config.listen_address;
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| {
            let port = addr.rsplit(':').next().unwrap_or(addr);
            CliError::User(format!("cannot listen on {addr} (port {port}): {e}"))
        })?;
        let local = listener
            .local_addr()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        println!("citadel listening on http://{local}");
        let _ = io::stdout().flush();
        tracing::info!(%local, data_dir = %config.data_dir.display(), "serving");
        citadel_api::serve(listener, state, termination())
            .await
            .map_err(|e| CliError::Internal(format!("server: {e}")))
    })
}

pub fn bootstrap(config: &Config, username: &str, password: &str, full_name: &str) -> Result<(), CliError> {
    let citadel = open(config, Arc::new(SystemClock))?;
    let user = citadel.bootstrap_registrar(username, password, full_name)?;
    println!("registrar {} created ({})", user.username, user.id);
    Ok(())
}

/// Fixtures run on a manual clock so their timestamps are reproducible.
pub fn seed(config: &Config, name: &str) -> Result<(), CliError> {
    let clock = Arc::new(ManualClock::new(fixture::demo_epoch()));
    let citadel = open(config, clock.clone())?;
    let s = fixture::seed(&citadel, &clock, name)?;
    if s.already_present {
        println!("fixture {} already loaded; nothing changed", s.fixture);
    } else {
        println!(
            "fixture {} loaded: {} faculties, {} departments, {} lecturers, {} students, {} courses",
            s.fixture, s.faculties, s.departments, s.lecturers, s.students, s.courses
        );
    }
    Ok(())
}

pub fn dump(config: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let citadel = open(config, Arc::new(SystemClock))?;
    let n = match out {
        Some(path) => {
            let fail = |e: io::Error| CliError::User(format!("cannot write {}: {e}", path.display()));
            let mut w = BufWriter::new(File::create(path).map_err(fail)?);
            let n = citadel.store().dump(&mut w).map_err(fail)?;
            w.flush().map_err(fail)?;
            n
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            let n = citadel
                .store()
                .dump(&mut w)
                .and_then(|n| w.flush().map(|_| n))
                .map_err(|e| CliError::User(format!("cannot write standard output: {e}")))?;
            n
        }
    };
    eprintln!("dumped {n} records");
    Ok(())
}
