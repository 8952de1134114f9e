//! Runtime configuration.
//!
//! The file format is one `key = value` pair per line; blank lines and lines
//! starting with `#` are ignored. Keys are the field names below. Each source
//! overrides the previous one: defaults, then the file, then `CITADEL_*`
//! environment variables, then command-line flags.

use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub listen_address: String,
    pub data_dir: PathBuf,
    pub session_ttl_hours: u32,
    pub max_upload_mib: u32,
    pub chat_longpoll_seconds: u32,
    pub self_enrollment: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen_address: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("./citadel-data"),
            session_ttl_hours: 12,
            max_upload_mib: 50,
            chat_longpoll_seconds: 25,
            self_enrollment: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for {key}: `{value}`")]
    BadValue { key: String, value: String },
}

pub const KEYS: &[&str] = &[
    "listen_address",
    "data_dir",
    "session_ttl_hours",
    "max_upload_mib",
    "chat_longpoll_seconds",
    "self_enrollment",
];

fn parse_num(key: &str, value: &str) -> Result<u32, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
        }),
    }
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "listen_address" => self.listen_address = value.to_owned(),
            "data_dir" => self.data_dir = PathBuf::from(value),
            "session_ttl_hours" => {
                self.session_ttl_hours = parse_num(key, value)?;
                if self.session_ttl_hours == 0 {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        value: value.into(),
                    });
                }
            }
            "max_upload_mib" => self.max_upload_mib = parse_num(key, value)?,
            "chat_longpoll_seconds" => self.chat_longpoll_seconds = parse_num(key, value)?,
            "self_enrollment" => self.self_enrollment = parse_bool(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_owned())),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            let v = v.trim();
            let v = v
                .strip_prefix('"')
                .and_then(|s| s.strip_suffix('"'))
                .unwrap_or(v);
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Applies `CITADEL_<KEY>` variables from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(key) = k.as_ref().strip_prefix("CITADEL_") else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            if KEYS.contains(&key.as_str()) {
                self.set(&key, v.as_ref())?;
            }
        }
        Ok(())
    }

    pub fn max_upload_bytes(&self) -> u64 {
        u64::from(self.max_upload_mib) * 1024 * 1024
    }
}
