//! `citadel` operator command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use citadel_core::config::Config;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "citadel", version, about = "Citadel e-learning service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every subcommand accepts.
#[derive(Debug, Clone, Default, Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory holding the store log and blobs.
    #[arg(long, value_name = "PATH")]
    data_dir: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
struct ServeFlags {
    /// host:port to listen on.
    #[arg(long, value_name = "ADDR")]
    listen_address: Option<String>,
    #[arg(long, value_name = "HOURS")]
    session_ttl_hours: Option<String>,
    #[arg(long, value_name = "MIB")]
    max_upload_mib: Option<String>,
    #[arg(long, value_name = "SECONDS")]
    chat_longpoll_seconds: Option<String>,
    /// Whether students may register for courses themselves.
    #[arg(long, value_name = "BOOL")]
    self_enrollment: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP API until interrupted.
    Serve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: ServeFlags,
    },
    /// Create the first registrar account.
    Bootstrap {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "STAFF_ID")]
        registrar_username: String,
        #[arg(long, value_name = "PASSWORD", env = "CITADEL_REGISTRAR_PASSWORD", hide_env_values = true)]
        registrar_password: String,
        #[arg(long, default_value = "Registrar")]
        full_name: String,
    },
    /// Load a named demo fixture.
    Seed {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "demo")]
        fixture: String,
    },
    /// Write every stored record as one JSON object per line.
    Dump {
        #[command(flatten)]
        common: Common,
        /// Output file; standard output when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

/// Defaults, then the config file, then `CITADEL_*` variables, then flags.
fn resolve_config<I>(common: &Common, flags: &ServeFlags, env: I) -> Result<Config, commands::CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut config = Config::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| commands::CliError::User(format!("cannot read config {}: {e}", path.display())))?;
        config
            .apply_file(&text)
            .map_err(|e| commands::CliError::User(format!("{}: {e}", path.display())))?;
    }
    config
        .apply_env(env)
        .map_err(|e| commands::CliError::User(format!("environment: {e}")))?;
    let overrides = [
        ("data_dir", &common.data_dir),
        ("listen_address", &flags.listen_address),
        ("session_ttl_hours", &flags.session_ttl_hours),
        ("max_upload_mib", &flags.max_upload_mib),
        ("chat_longpoll_seconds", &flags.chat_longpoll_seconds),
        ("self_enrollment", &flags.self_enrollment),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config
                .set(key, v)
                .map_err(|e| commands::CliError::User(format!("--{}: {e}", key.replace('_', "-"))))?;
        }
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env = || std::env::vars();
    let result = match cli.command {
        Command::Serve { common, flags } => {
            resolve_config(&common, &flags, env()).and_then(|c| commands::serve(&c))
        }
        Command::Bootstrap {
            common,
            registrar_username,
            registrar_password,
            full_name,
        } => resolve_config(&common, &ServeFlags::default(), env())
            .and_then(|c| commands::bootstrap(&c, &registrar_username, &registrar_password, &full_name)),
        Command::Seed { common, fixture } => {
            resolve_config(&common, &ServeFlags::default(), env()).and_then(|c| commands::seed(&c, &fixture))
        }
        Command::Dump { common, out } => {
            resolve_config(&common, &ServeFlags::default(), env()).and_then(|c| commands::dump(&c, out.as_deref()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("citadel: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
