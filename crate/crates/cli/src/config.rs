//! The effective run configuration: defaults, then the config file, then flags.

use std::path::{Path, PathBuf};

use mediflow_core::{SyringeKinematics, DEFAULT_DROP_QUANTUM_UL};
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "MEDIFLOW_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub server_url: Option<String>,

    pub bind: String,
    pub port: u16,
    pub data_dir: Option<PathBuf>,
    pub ttl_s: u64,
    pub poll_interval_s: f64,
    pub persist_tokens: bool,
    pub app_dir: Option<PathBuf>,
    pub workers: usize,
    /// Demo devices to create when `serve` starts on an empty store.
    pub seed_demo: u8,

    pub username: Option<String>,
    pub password: Option<String>,
    pub mac: Option<String>,
    pub patient_id: Option<String>,
    pub realtime: bool,
    pub devices: u8,
    pub trace_out: Option<PathBuf>,

    pub full_step_mm: f64,
    pub inner_diameter_mm: f64,
    pub fluid_density_g_ml: f64,
    pub drop_quantum_ul: f64,
    pub noise_sigma: f64,
    pub dead_volume_max_ul: Option<f64>,
    pub zero_noise: bool,
    pub seed: u64,

    pub volume_ml: f64,
    pub rate_ml_h: f64,
    pub runs: Option<usize>,
    pub seeds: Option<Vec<u64>>,

    pub users: usize,
    pub duration_s: f64,
    pub think_ms: u64,
    pub include_records: bool,

    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let k = SyringeKinematics::default();
        let server = mediflow_server::ServerConfig::default();
        Self {
            server_url: None,
            bind: server.bind,
            port: server.port,
            data_dir: None,
            ttl_s: server.ttl_s,
            poll_interval_s: server.poll_interval_s,
            persist_tokens: false,
            app_dir: None,
            workers: 2,
            seed_demo: 0,
            username: None,
            password: None,
            mac: None,
            patient_id: None,
            realtime: false,
            devices: 1,
            trace_out: None,
            full_step_mm: k.full_step_mm,
            inner_diameter_mm: k.inner_diameter_mm,
            fluid_density_g_ml: k.fluid_density_g_ml,
            drop_quantum_ul: DEFAULT_DROP_QUANTUM_UL,
            noise_sigma: mediflow_core::dispense::DEFAULT_EFFICIENCY_SIGMA,
            dead_volume_max_ul: None,
            zero_noise: false,
            seed: 42,
            volume_ml: 2.0,
            rate_ml_h: 4.0,
            runs: None,
            seeds: None,
            users: 20,
            duration_s: 600.0,
            think_ms: 0,
            include_records: false,
            out: None,
            format: None,
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        } else {
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
    }

    pub fn kinematics(&self) -> Result<SyringeKinematics, String> {
        SyringeKinematics::new(self.full_step_mm, self.inner_diameter_mm, self.fluid_density_g_ml)
            .map_err(|e| e.to_string())
    }

    pub fn server_config(&self) -> mediflow_server::ServerConfig {
        mediflow_server::ServerConfig {
            bind: self.bind.clone(),
            port: self.port,
            ttl_s: self.ttl_s,
            data_dir: self.data_dir.clone(),
            poll_interval_s: self.poll_interval_s,
            persist_tokens: self.persist_tokens,
            app_dir: self.app_dir.clone(),
        }
    }

    pub fn require_server_url(&self) -> Result<String, String> {
        self.server_url
            .clone()
            .ok_or_else(|| "--server (or server_url in the config file) is required".to_owned())
    }

    /// Seeds for an accuracy run: explicit list, else `1..=runs`.
    pub fn accuracy_seeds(&self) -> Result<Vec<u64>, String> {
        match (&self.seeds, self.runs) {
            (Some(seeds), Some(runs)) if seeds.len() != runs => {
                Err(format!("--runs {runs} does not match {} seeds", seeds.len()))
            }
            (Some(seeds), _) if seeds.is_empty() => Err("--seeds is empty".into()),
            (Some(seeds), _) => Ok(seeds.clone()),
            (None, runs) => Ok((1..=runs.unwrap_or(10) as u64).collect()),
        }
    }

    /// The config as printed at startup, with the password masked.
    pub fn printable(&self) -> String {
        let mut shown = self.clone();
        if shown.password.is_some() {
            shown.password = Some("***".into());
        }
        serde_json::to_string(&shown).expect("config serializes")
    }
}
