//! Closed-loop load generation.
//!
//! Each virtual user logs in once, then polls the index API with its token
//! chain for the whole run, re-logging in whenever a request is refused.
//! Latency is measured client-side from send to fully read response.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::Utc;
use mediflow_core::wire::{IndexRequest, IndexResponse, LoginRequest, LoginResponse, TokenResponse};
use mediflow_core::{InfusionOutcome, InfusionRecord};
use mediflow_server::seed::{demo_device, DEMO_PASSWORD};
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub username: String,
    pub password: String,
    pub mac: Option<String>,
    pub patient_id: String,
}

impl Account {
    /// Demo device `n` as created by `seed_demo`.
    pub fn demo(n: u8) -> Self {
        let (username, patient_id, mac) = demo_device(n);
        Self {
            username,
            password: DEMO_PASSWORD.to_owned(),
            mac: Some(mac.to_string()),
            patient_id,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadConfig {
    pub base_url: String,
    pub users: usize,
    pub duration: Duration,
    /// Pause after each response before the next request.
    pub think_time: Duration,
    /// User `i` logs in as `accounts[i % accounts.len()]`.
    pub accounts: Vec<Account>,
    /// Every 30th request of a user posts an infusion record instead.
    pub include_records: bool,
    pub request_timeout: Duration,
}

impl LoadConfig {
    pub fn new(base_url: &str, users: usize, duration: Duration) -> Self {
        let accounts = (1..=users.clamp(1, 255)).map(|n| Account::demo(n as u8)).collect();
        Self {
            base_url: base_url.trim_end_matches('/').to_owned(),
            users,
            duration,
            think_time: Duration::ZERO,
            accounts,
            include_records: false,
            request_timeout: Duration::from_secs(10),
        }
    }

    fn check(&self) -> Result<(), BenchError> {
        if self.users == 0 {
            return Err(BenchError::Config("users must be >= 1".into()));
        }
        if self.duration.is_zero() {
            return Err(BenchError::Config("duration must be positive".into()));
        }
        if self.accounts.is_empty() {
            return Err(BenchError::Config("no accounts to log in with".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondSample {
    pub second: u64,
    pub throughput_rps: f64,
    pub avg_response_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub user_count: usize,
    pub duration_s: f64,
    pub think_time_ms: f64,
    pub total_requests: u64,
    pub error_count: u64,
    pub avg_response_ms: f64,
    pub max_response_ms: f64,
    pub min_response_ms: f64,
    pub avg_throughput_rps: f64,
    pub per_user_requests: Vec<u64>,
    pub series: Vec<SecondSample>,
}

impl LoadReport {
    /// The report's internal consistency conditions.
    pub fn check_invariants(&self) -> Result<(), String> {
        let summed: u64 = self.per_user_requests.iter().sum();
        if summed != self.total_requests {
            return Err(format!("per-user sum {summed} != total {}", self.total_requests));
        }
        if self.total_requests > 0
            && !(self.min_response_ms <= self.avg_response_ms && self.avg_response_ms <= self.max_response_ms)
        {
            return Err(format!(
                "min {} <= avg {} <= max {} violated",
                self.min_response_ms, self.avg_response_ms, self.max_response_ms
            ));
        }
        let rps = self.total_requests as f64 / self.duration_s;
        if (rps - self.avg_throughput_rps).abs() > 1e-9 * rps.max(1.0) {
            return Err(format!("throughput {} != {rps}", self.avg_throughput_rps));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct UserStats {
    requests: u64,
    errors: u64,
    sum_ms: f64,
    min_ms: f64,
    max_ms: f64,
    buckets: Vec<(u64, f64)>,
}

impl UserStats {
    fn new(seconds: usize) -> Self {
        Self {
            requests: 0,
            errors: 0,
            sum_ms: 0.0,
            min_ms: f64::INFINITY,
            max_ms: 0.0,
            buckets: vec![(0, 0.0); seconds],
        }
    }

    fn add(&mut self, second: usize, ms: f64) {
        self.requests += 1;
        self.sum_ms += ms;
        self.min_ms = self.min_ms.min(ms);
        self.max_ms = self.max_ms.max(ms);
        let last = self.buckets.len() - 1;
        let b = &mut self.buckets[second.min(last)];
        b.0 += 1;
        b.1 += ms;
    }
}

enum Outcome {
    Token(String),
    Refused,
    Failed,
}

struct User {
    client: reqwest::Client,
    base: String,
    account: Account,
}

impl User {
    async fn post<B: Serialize, R: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        token: Option<&str>,
        body: &B,
    ) -> Result<R, Outcome> {
        let mut req = self.client.post(format!("{}{path}", self.base)).json(body);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.map_err(|_| Outcome::Failed)?;
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|_| Outcome::Failed)?;
        if status.is_success() {
            serde_json::from_slice(&bytes).map_err(|_| Outcome::Failed)
        } else if status.as_u16() == 401 || status.as_u16() == 403 {
            Err(Outcome::Refused)
        } else {
            Err(Outcome::Failed)
        }
    }

    async fn login(&self) -> Outcome {
        let req = LoginRequest {
            username: self.account.username.clone(),
            password: self.account.password.clone(),
            mac: self.account.mac.clone(),
        };
        match self.post::<_, LoginResponse>("/api/login", None, &req).await {
            Ok(r) => Outcome::Token(r.token),
            Err(o) => o,
        }
    }

    async fn index(&self, token: &str) -> Outcome {
        let req = IndexRequest {
            patient_id: self.account.patient_id.clone(),
        };
        match self.post::<_, IndexResponse>("/api/index", Some(token), &req).await {
            Ok(r) => Outcome::Token(r.token),
            Err(o) => o,
        }
    }

    async fn record(&self, token: &str) -> Outcome {
        let now = Utc::now();
        let record = InfusionRecord {
            record_id: None,
            patient_id: self.account.patient_id.clone(),
            prescription_id: "load".into(),
            version: 0,
            started_at: now,
            finished_at: now,
            delivered_volume_ml: 0.0,
            mean_rate_ml_h: 0.0,
            outcome: InfusionOutcome::Fault,
        };
        match self
            .post::<_, TokenResponse>("/api/infusions", Some(token), &record)
            .await
        {
            Ok(r) => Outcome::Token(r.token),
            Err(o) => o,
        }
    }
}

async fn user_loop(
    user: User,
    think: Duration,
    include_records: bool,
    start: Instant,
    deadline: Instant,
    seconds: usize,
    counter: Arc<AtomicU64>,
) -> UserStats {
    let mut stats = UserStats::new(seconds);
    let mut token: Option<String> = None;
    let mut issued = 0u64;
    loop {
        let sent = Instant::now();
        if sent >= deadline {
            break;
        }
        issued += 1;
        let outcome = match token.take() {
            None => user.login().await,
            Some(t) if include_records && issued.is_multiple_of(30) => user.record(&t).await,
            Some(t) => user.index(&t).await,
        };
        let done = Instant::now();
        let ms = (done - sent).as_secs_f64() * 1000.0;
        stats.add((done - start).as_secs() as usize, ms);
        counter.fetch_add(1, Ordering::Relaxed);
        let failed = match outcome {
            Outcome::Token(t) => {
                token = Some(t);
                false
            }
            Outcome::Refused | Outcome::Failed => {
                stats.errors += 1;
                true
            }
        };
        let pause = if failed {
            think.max(Duration::from_millis(10))
        } else {
            think
        };
        if !pause.is_zero() {
            tokio::time::sleep(pause).await;
        }
    }
    stats
}

/// Drives `users` concurrent closed-loop clients for `duration`. Fails only
/// if the server cannot be reached before the run starts.
pub async fn run_load(cfg: &LoadConfig) -> Result<LoadReport, BenchError> {
    cfg.check()?;
    let client = reqwest::Client::builder()
        .timeout(cfg.request_timeout)
        .pool_max_idle_per_host(cfg.users)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let health = format!("{}/health", cfg.base_url);
    let unreachable = |reason: String| BenchError::Unreachable {
        url: cfg.base_url.clone(),
        reason,
    };
    let resp = client
        .get(&health)
        .send()
        .await
        .map_err(|e| unreachable(e.to_string()))?;
    if !resp.status().is_success() {
        return Err(unreachable(format!("health returned {}", resp.status())));
    }

    let seconds = cfg.duration.as_secs_f64().ceil().max(1.0) as usize;
    let counter = Arc::new(AtomicU64::new(0));
    let start = Instant::now();
    let deadline = start + cfg.duration;
    let tasks: Vec<_> = (0..cfg.users)
        .map(|i| {
            let user = User {
                client: client.clone(),
                base: cfg.base_url.clone(),
                account: cfg.accounts[i % cfg.accounts.len()].clone(),
            };
            tokio::spawn(user_loop(
                user,
                cfg.think_time,
                cfg.include_records,
                start,
                deadline,
                seconds,
                Arc::clone(&counter),
            ))
        })
        .collect();
    let mut per_user = Vec::with_capacity(tasks.len());
    for t in tasks {
        per_user.push(
            t.await
                .map_err(|e| BenchError::Config(format!("user task failed: {e}")))?,
        );
    }
    Ok(aggregate(cfg, &per_user, counter.load(Ordering::SeqCst)))
}

fn aggregate(cfg: &LoadConfig, users: &[UserStats], counted: u64) -> LoadReport {
    let duration_s = cfg.duration.as_secs_f64();
    let seconds = users.first().map_or(0, |u| u.buckets.len());
    let sum_ms: f64 = users.iter().map(|u| u.sum_ms).sum();
    let min_ms = users.iter().map(|u| u.min_ms).fold(f64::INFINITY, f64::min);
    let max_ms = users.iter().map(|u| u.max_ms).fold(0.0, f64::max);
    let series = (0..seconds)
        .map(|s| {
            let (n, ms) = users
                .iter()
                .fold((0u64, 0.0), |(n, ms), u| (n + u.buckets[s].0, ms + u.buckets[s].1));
            let width = (duration_s - s as f64).clamp(0.0, 1.0);
            SecondSample {
                second: s as u64,
                throughput_rps: if width > 0.0 { n as f64 / width } else { 0.0 },
                avg_response_ms: if n > 0 { ms / n as f64 } else { 0.0 },
            }
        })
        .collect();
    LoadReport {
        user_count: cfg.users,
        duration_s,
        think_time_ms: cfg.think_time.as_secs_f64() * 1000.0,
        total_requests: counted,
        error_count: users.iter().map(|u| u.errors).sum(),
        avg_response_ms: if counted > 0 { sum_ms / counted as f64 } else { 0.0 },
        max_response_ms: max_ms,
        min_response_ms: if counted > 0 { min_ms } else { 0.0 },
        avg_throughput_rps: counted as f64 / duration_s,
        per_user_requests: users.iter().map(|u| u.requests).collect(),
        series,
    }
}

/// [`run_load`] on a fresh multi-threaded runtime.
pub fn run_load_blocking(cfg: &LoadConfig) -> Result<LoadReport, BenchError> {
    let workers = std::thread::available_parallelism().map_or(2, |n| n.get()).max(2);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(workers)
        .enable_all()
        .build()?;
    rt.block_on(run_load(cfg))
}
