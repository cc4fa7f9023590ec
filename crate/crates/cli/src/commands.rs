use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use mediflow_bench::{emit_report, run_accuracy, run_load_blocking, AccuracyOptions, Format, LoadConfig, Report};
use mediflow_core::clock::SystemClock;
use mediflow_core::NoiseModel;
use mediflow_pump::{run_fleet, run_session, DeviceConfig, HttpTransport, Pacing, Phase, SessionReport};
use mediflow_server::seed::{demo_device, seed_demo, DEMO_PASSWORD};
use mediflow_server::Service;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug)]
pub enum Failure {
    /// Bad or inconsistent configuration. Exit code 2.
    Usage(String),
    /// The run itself failed. Exit code 1.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn noise(c: &RunConfig, seed: u64) -> NoiseModel {
    if c.zero_noise {
        return NoiseModel::zero();
    }
    let mut n = NoiseModel::standard(seed, c.drop_quantum_ul);
    n.efficiency_sigma = c.noise_sigma;
    if let Some(d) = c.dead_volume_max_ul {
        n.dead_volume_max_ul = d;
    }
    n
}

fn device_config(
    c: &RunConfig,
    username: &str,
    password: &str,
    mac: &str,
    patient_id: &str,
    seed: u64,
) -> Result<DeviceConfig, Failure> {
    let mut d = DeviceConfig::new(username, password, mac, patient_id).with_noise(noise(c, seed));
    d.kinematics = c.kinematics().map_err(Failure::Usage)?;
    d.drop_quantum_ul = c.drop_quantum_ul;
    d.poll_interval_s = c.poll_interval_s;
    d.pacing = if c.realtime {
        Pacing::Realtime
    } else {
        Pacing::Simulated
    };
    d.check().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(d)
}

/// `devN` maps to patient `pN`.
fn default_patient(username: &str) -> Option<String> {
    let n = username.strip_prefix("dev")?;
    (!n.is_empty() && n.bytes().all(|b| b.is_ascii_digit())).then(|| format!("p{n}"))
}

fn output_format(c: &RunConfig) -> Result<Format, Failure> {
    match (&c.format, &c.out) {
        (Some(f), _) => f.parse().map_err(Failure::Usage),
        (None, Some(p)) => Ok(Format::for_path(p)),
        (None, None) => Ok(Format::Csv),
    }
}

fn write_report<R: Report>(c: &RunConfig, report: &R) -> Outcome {
    let format = output_format(c)?;
    match &c.out {
        Some(path) => {
            emit_report(report, format, path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            eprintln!("report written to {}", path.display());
            Ok(())
        }
        None => print_stdout(&report.render(format)),
    }
}

fn print_stdout(s: &str) -> Outcome {
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes()).and_then(|_| out.flush()).map_err(runtime)
}

pub fn serve(c: &RunConfig) -> Outcome {
    let service = Service::open(c.server_config(), Arc::new(SystemClock)).map_err(runtime)?;
    if c.seed_demo > 0 && service.usernames().is_empty() {
        seed_demo(&service, c.seed_demo).map_err(runtime)?;
    }
    let service = Arc::new(service);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(c.workers.max(1))
        .enable_all()
        .build()
        .map_err(runtime)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((c.bind.as_str(), c.port))
            .await
            .map_err(|e| runtime(format!("bind {}:{}: {e}", c.bind, c.port)))?;
        let addr = listener.local_addr().map_err(runtime)?;
        print_stdout(&format!("listening on http://{addr}\n"))?;
        tracing::info!(%addr, "serving");
        mediflow_server::serve(listener, service, shutdown_signal())
            .await
            .map_err(runtime)?;
        tracing::info!("stopped");
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    {
        let term = async {
            match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
                Ok(mut s) => {
                    s.recv().await;
                }
                Err(_) => std::future::pending().await,
            }
        };
        tokio::select! {
            _ = ctrl_c => {}
            _ = term => {}
        }
    }
    #[cfg(not(unix))]
    ctrl_c.await;
}

pub fn seed_data(c: &RunConfig) -> Outcome {
    if c.data_dir.is_none() {
        return Err(Failure::Usage("seed-data needs --data-dir".into()));
    }
    let service = Service::open(c.server_config(), Arc::new(SystemClock)).map_err(runtime)?;
    if !service.usernames().is_empty() {
        return Err(runtime("data directory already holds accounts"));
    }
    seed_demo(&service, c.devices).map_err(runtime)?;
    service.write_snapshot().map_err(runtime)?;
    eprintln!("seeded doc1 and {} device(s)", c.devices.max(1));
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    username: &'a str,
    phase: Phase,
    outcome: Option<mediflow_core::InfusionOutcome>,
    fault: Option<&'a str>,
    delivered_volume_ml: Option<f64>,
    mean_rate_ml_h: Option<f64>,
    duration_s: Option<f64>,
    drops: usize,
    polls: u32,
    relogins: u32,
    versions: &'a [u64],
    record_posted: bool,
}

impl<'a> Summary<'a> {
    fn of(username: &'a str, r: &'a SessionReport) -> Self {
        Self {
            username,
            phase: r.phase,
            outcome: r.outcome,
            fault: r.fault.as_deref(),
            delivered_volume_ml: r.trace.as_ref().map(|t| t.delivered_volume_ml),
            mean_rate_ml_h: r.trace.as_ref().map(|t| t.mean_rate_ml_h),
            duration_s: r.trace.as_ref().map(|t| t.duration_s),
            drops: r.drops_dispensed(),
            polls: r.polls,
            relogins: r.relogins,
            versions: &r.versions,
            record_posted: r.record_posted,
        }
    }
}

fn write_trace(path: &Path, r: &SessionReport) -> Outcome {
    let Some(trace) = &r.trace else {
        eprintln!("no infusion, no trace written");
        return Ok(());
    };
    let file = std::fs::File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    trace
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

pub fn device(c: &RunConfig) -> Outcome {
    let url = c.require_server_url().map_err(Failure::Usage)?;
    let need = |v: &Option<String>, flag: &str| {
        v.clone()
            .ok_or_else(|| Failure::Usage(format!("device needs --{flag}")))
    };
    let username = need(&c.username, "username")?;
    let password = need(&c.password, "password")?;
    let mac = need(&c.mac, "mac")?;
    let patient_id = c
        .patient_id
        .clone()
        .or_else(|| default_patient(&username))
        .ok_or_else(|| Failure::Usage("device needs --patient-id".into()))?;
    let cfg = device_config(c, &username, &password, &mac, &patient_id, c.seed)?;
    let report = run_session(cfg, HttpTransport::new(&url), Utc::now()).map_err(runtime)?;
    if let Some(path) = &c.trace_out {
        write_trace(path, &report)?;
    }
    let json = serde_json::to_string_pretty(&Summary::of(&username, &report)).map_err(runtime)?;
    print_stdout(&(json + "\n"))?;
    match report.phase {
        Phase::Completed => Ok(()),
        _ => Err(runtime(format!(
            "device ended in fault: {}",
            report.fault.as_deref().unwrap_or("unknown")
        ))),
    }
}

pub fn fleet(c: &RunConfig) -> Outcome {
    let url = c.require_server_url().map_err(Failure::Usage)?;
    if c.devices == 0 {
        return Err(Failure::Usage("fleet needs at least one device".into()));
    }
    let password = c.password.clone().unwrap_or_else(|| DEMO_PASSWORD.to_owned());
    let mut names = Vec::new();
    let mut configs = Vec::new();
    for n in 1..=c.devices {
        let (username, patient_id, mac) = demo_device(n);
        let seed = c.seed.wrapping_add(u64::from(n) - 1);
        configs.push(device_config(
            c,
            &username,
            &password,
            &mac.to_string(),
            &patient_id,
            seed,
        )?);
        names.push(username);
    }
    let results = run_fleet(configs, Utc::now(), |_| HttpTransport::new(&url));
    let mut failed = 0;
    let mut summaries = Vec::new();
    let mut reports = Vec::new();
    for (name, r) in names.iter().zip(results) {
        match r {
            Ok(r) => reports.push((name, r)),
            Err(e) => return Err(runtime(format!("{name}: {e}"))),
        }
    }
    for (name, r) in &reports {
        if r.phase != Phase::Completed {
            failed += 1;
        }
        summaries.push(Summary::of(name, r));
    }
    let json = serde_json::to_string_pretty(&summaries).map_err(runtime)?;
    print_stdout(&(json + "\n"))?;
    if failed > 0 {
        return Err(runtime(format!("{failed} of {} devices faulted", reports.len())));
    }
    Ok(())
}

pub fn bench_load(c: &RunConfig) -> Outcome {
    let url = c.require_server_url().map_err(Failure::Usage)?;
    if c.users == 0 || c.duration_s.is_nan() || c.duration_s <= 0.0 {
        return Err(Failure::Usage(
            "bench load needs users >= 1 and a positive duration".into(),
        ));
    }
    output_format(c)?;
    let mut cfg = LoadConfig::new(&url, c.users, Duration::from_secs_f64(c.duration_s));
    cfg.think_time = Duration::from_millis(c.think_ms);
    cfg.include_records = c.include_records;
    let report = run_load_blocking(&cfg).map_err(runtime)?;
    eprintln!(
        "{} users: {} requests, {:.1} rps, {:.2} ms avg, {} errors",
        report.user_count, report.total_requests, report.avg_throughput_rps, report.avg_response_ms, report.error_count
    );
    write_report(c, &report)
}

pub fn bench_accuracy(c: &RunConfig) -> Outcome {
    let seeds = c.accuracy_seeds().map_err(Failure::Usage)?;
    output_format(c)?;
    let opts = AccuracyOptions {
        kinematics: c.kinematics().map_err(Failure::Usage)?,
        drop_quantum_ul: c.drop_quantum_ul,
        efficiency_sigma: Some(c.noise_sigma),
        dead_volume_max_ul: c.dead_volume_max_ul,
        zero_noise: c.zero_noise,
        poll_interval_s: c.poll_interval_s,
    };
    let report = run_accuracy(c.volume_ml, c.rate_ml_h, &seeds, &opts).map_err(|e| match e {
        mediflow_bench::BenchError::Config(m) => Failure::Usage(m),
        other => runtime(other),
    })?;
    eprintln!(
        "{} runs: {}% volume error, {}% rate error",
        report.rows.len(),
        report.avg_pct_error_volume,
        report.avg_pct_error_rate
    );
    write_report(c, &report)
}
