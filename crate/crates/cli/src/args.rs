//! Command-line flags. Each flag overrides the config-file key of the same name.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, CONFIG_ENV};

#[derive(Debug, Parser)]
#[command(name = "mediflow", version, about = "Remote-controlled infusion pump system")]
pub struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP server.
    Serve {
        #[command(flatten)]
        server: ServerArgs,
        /// Create doc1 and N demo devices when the store is empty.
        #[arg(long, value_name = "N")]
        seed_demo: Option<u8>,
    },
    /// Write demo accounts and prescriptions into a data directory.
    SeedData {
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        devices: Option<u8>,
    },
    /// Simulate one pump against a running server.
    Device {
        #[command(flatten)]
        client: ClientArgs,
        #[command(flatten)]
        account: AccountArgs,
        #[command(flatten)]
        pump: PumpArgs,
        /// Drop-by-drop CSV of the infusion.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Simulate demo devices 1..=N concurrently.
    Fleet {
        #[command(flatten)]
        client: ClientArgs,
        #[arg(long, value_name = "N")]
        devices: Option<u8>,
        #[arg(long)]
        password: Option<String>,
        #[command(flatten)]
        pump: PumpArgs,
    },
    /// Load and accuracy benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Closed-loop load test against a running server.
    Load {
        #[command(flatten)]
        client: ClientArgs,
        #[arg(long)]
        users: Option<usize>,
        /// Seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        think_ms: Option<u64>,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        include_records: Option<bool>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Repeated in-process infusions, one per seed.
    Accuracy {
        #[arg(long)]
        volume: Option<f64>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        pump: PumpArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
pub struct ServerArgs {
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Token lifetime in seconds.
    #[arg(long)]
    pub ttl: Option<u64>,
    #[arg(long)]
    pub poll_interval: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub persist_tokens: Option<bool>,
    /// Directory served under /app.
    #[arg(long)]
    pub app_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    /// Base URL, e.g. http://127.0.0.1:8080
    #[arg(long = "server")]
    pub server_url: Option<String>,
}

#[derive(Debug, Args)]
pub struct AccountArgs {
    #[arg(long)]
    pub username: Option<String>,
    #[arg(long)]
    pub password: Option<String>,
    #[arg(long)]
    pub mac: Option<String>,
    /// Defaults to pN for username devN.
    #[arg(long)]
    pub patient_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct PumpArgs {
    /// Pace events by the wall clock.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub realtime: Option<bool>,
    #[arg(long)]
    pub full_step_mm: Option<f64>,
    #[arg(long)]
    pub inner_diameter_mm: Option<f64>,
    #[arg(long)]
    pub fluid_density: Option<f64>,
    #[arg(long)]
    pub drop_quantum_ul: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub dead_volume_max_ul: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub zero_noise: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub poll_interval: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json; defaults from the --out extension.
    #[arg(long)]
    pub format: Option<String>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl ServerArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.bind, self.bind);
        set(&mut c.port, self.port);
        set_opt(&mut c.data_dir, self.data_dir);
        set(&mut c.ttl_s, self.ttl);
        set(&mut c.poll_interval_s, self.poll_interval);
        set(&mut c.persist_tokens, self.persist_tokens);
        set_opt(&mut c.app_dir, self.app_dir);
        set(&mut c.workers, self.workers);
    }
}

impl PumpArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.realtime, self.realtime);
        set(&mut c.full_step_mm, self.full_step_mm);
        set(&mut c.inner_diameter_mm, self.inner_diameter_mm);
        set(&mut c.fluid_density_g_ml, self.fluid_density);
        set(&mut c.drop_quantum_ul, self.drop_quantum_ul);
        set(&mut c.noise_sigma, self.noise_sigma);
        set_opt(&mut c.dead_volume_max_ul, self.dead_volume_max_ul);
        set(&mut c.zero_noise, self.zero_noise);
        set(&mut c.seed, self.seed);
        set(&mut c.poll_interval_s, self.poll_interval);
    }
}

impl OutArgs {
    fn apply(self, c: &mut RunConfig) {
        set_opt(&mut c.out, self.out);
        set_opt(&mut c.format, self.format);
    }
}

/// What to run, with flags folded into the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Serve,
    SeedData,
    Device,
    Fleet,
    BenchLoad,
    BenchAccuracy,
}

impl Command {
    pub fn apply(self, c: &mut RunConfig) -> Action {
        match self {
            Command::Serve { server, seed_demo } => {
                server.apply(c);
                set(&mut c.seed_demo, seed_demo);
                Action::Serve
            }
            Command::SeedData { data_dir, devices } => {
                set_opt(&mut c.data_dir, data_dir);
                set(&mut c.devices, devices);
                Action::SeedData
            }
            Command::Device {
                client,
                account,
                pump,
                trace_out,
            } => {
                set_opt(&mut c.server_url, client.server_url);
                set_opt(&mut c.username, account.username);
                set_opt(&mut c.password, account.password);
                set_opt(&mut c.mac, account.mac);
                set_opt(&mut c.patient_id, account.patient_id);
                pump.apply(c);
                set_opt(&mut c.trace_out, trace_out);
                Action::Device
            }
            Command::Fleet {
                client,
                devices,
                password,
                pump,
            } => {
                set_opt(&mut c.server_url, client.server_url);
                set(&mut c.devices, devices);
                set_opt(&mut c.password, password);
                pump.apply(c);
                Action::Fleet
            }
            Command::Bench(BenchCommand::Load {
                client,
                users,
                duration,
                think_ms,
                include_records,
                out,
            }) => {
                set_opt(&mut c.server_url, client.server_url);
                set(&mut c.users, users);
                set(&mut c.duration_s, duration);
                set(&mut c.think_ms, think_ms);
                set(&mut c.include_records, include_records);
                out.apply(c);
                Action::BenchLoad
            }
            Command::Bench(BenchCommand::Accuracy {
                volume,
                rate,
                runs,
                seeds,
                pump,
                out,
            }) => {
                set(&mut c.volume_ml, volume);
                set(&mut c.rate_ml_h, rate);
                set_opt(&mut c.runs, runs);
                set_opt(&mut c.seeds, seeds);
                pump.apply(c);
                out.apply(c);
                Action::BenchAccuracy
            }
        }
    }
}
