use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    pub ttl_s: u64,
    /// `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    /// Poll interval advertised to devices on `/health`.
    pub poll_interval_s: f64,
    /// Journal tokens so they survive a restart.
    pub persist_tokens: bool,
    /// Static dashboard files served under `/app`.
    pub app_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            ttl_s: mediflow_auth::DEFAULT_TTL_SECS as u64,
            data_dir: None,
            poll_interval_s: 60.0,
            persist_tokens: false,
            app_dir: None,
        }
    }
}
