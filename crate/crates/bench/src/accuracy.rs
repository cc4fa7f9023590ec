//! End-to-end infusion accuracy runs, one row per seeded experiment.

use std::sync::Arc;

use mediflow_core::accuracy::{mean, reported_percent_error, round_to, REPORT_DECIMALS};
use mediflow_core::clock::{fixed_epoch, ManualClock};
use mediflow_core::{NoiseModel, SyringeKinematics, DEFAULT_DROP_QUANTUM_UL};
use mediflow_pump::{run_session, DeviceConfig, LocalTransport, Phase};
use mediflow_server::seed::{demo_device, seed_demo, DEMO_PASSWORD};
use mediflow_server::{ServerConfig, Service};
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub experiment: usize,
    pub seed: u64,
    pub delivered_volume_ml: f64,
    pub pct_error_volume: f64,
    pub avg_rate_ml_h: f64,
    pub pct_error_rate: f64,
}

impl AccuracyRow {
    /// A row from a measured pair, with errors computed as reported.
    pub fn from_measurement(
        experiment: usize,
        seed: u64,
        volume_ml: f64,
        rate_ml_h: f64,
        delivered_volume_ml: f64,
        avg_rate_ml_h: f64,
    ) -> Self {
        Self {
            experiment,
            seed,
            delivered_volume_ml,
            pct_error_volume: reported_percent_error(delivered_volume_ml, volume_ml),
            avg_rate_ml_h,
            pct_error_rate: reported_percent_error(avg_rate_ml_h, rate_ml_h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub volume_ml: f64,
    pub rate_ml_h: f64,
    pub rows: Vec<AccuracyRow>,
    pub avg_pct_error_volume: f64,
    pub avg_pct_error_rate: f64,
}

impl AccuracyReport {
    pub fn from_rows(volume_ml: f64, rate_ml_h: f64, rows: Vec<AccuracyRow>) -> Self {
        let vol: Vec<f64> = rows.iter().map(|r| r.pct_error_volume).collect();
        let rate: Vec<f64> = rows.iter().map(|r| r.pct_error_rate).collect();
        Self {
            volume_ml,
            rate_ml_h,
            avg_pct_error_volume: round_to(mean(&vol), REPORT_DECIMALS),
            avg_pct_error_rate: round_to(mean(&rate), REPORT_DECIMALS),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyOptions {
    pub kinematics: SyringeKinematics,
    pub drop_quantum_ul: f64,
    /// Efficiency spread; `None` keeps the default.
    pub efficiency_sigma: Option<f64>,
    /// Dead-volume ceiling in µL; `None` uses one drop quantum.
    pub dead_volume_max_ul: Option<f64>,
    /// Disables all noise when set.
    pub zero_noise: bool,
    pub poll_interval_s: f64,
}

impl Default for AccuracyOptions {
    fn default() -> Self {
        Self {
            kinematics: SyringeKinematics::default(),
            drop_quantum_ul: DEFAULT_DROP_QUANTUM_UL,
            efficiency_sigma: None,
            dead_volume_max_ul: None,
            zero_noise: false,
            poll_interval_s: mediflow_pump::DEFAULT_POLL_INTERVAL_S,
        }
    }
}

impl AccuracyOptions {
    fn noise(&self, seed: u64) -> NoiseModel {
        if self.zero_noise {
            return NoiseModel::zero();
        }
        let mut n = NoiseModel::standard(seed, self.drop_quantum_ul);
        if let Some(s) = self.efficiency_sigma {
            n.efficiency_sigma = s;
        }
        if let Some(d) = self.dead_volume_max_ul {
            n.dead_volume_max_ul = d;
        }
        n
    }
}

/// One in-process server and simulated pump per seed.
pub fn run_accuracy(
    volume_ml: f64,
    rate_ml_h: f64,
    seeds: &[u64],
    opts: &AccuracyOptions,
) -> Result<AccuracyReport, BenchError> {
    if seeds.is_empty() {
        return Err(BenchError::Config("at least one seed is required".into()));
    }
    let mut rows = Vec::with_capacity(seeds.len());
    for (i, &seed) in seeds.iter().enumerate() {
        let fail = |reason: String| BenchError::Run { seed, reason };
        let clock = ManualClock::at_fixed_epoch();
        let svc = Arc::new(Service::in_memory(ServerConfig::default(), clock.clone()));
        seed_demo(&svc, 1).map_err(|e| fail(e.to_string()))?;
        let (username, patient_id, mac) = demo_device(1);
        svc.prescribe(&patient_id, volume_ml, rate_ml_h)
            .map_err(|e| fail(e.to_string()))?;
        let mut cfg = DeviceConfig::new(&username, DEMO_PASSWORD, &mac.to_string(), &patient_id);
        cfg.kinematics = opts.kinematics;
        cfg.drop_quantum_ul = opts.drop_quantum_ul;
        cfg.poll_interval_s = opts.poll_interval_s;
        cfg.noise = opts.noise(seed);
        let transport = LocalTransport::with_clock(svc, clock);
        let report = run_session(cfg, transport, fixed_epoch()).map_err(|e| fail(e.to_string()))?;
        if report.phase != Phase::Completed {
            return Err(fail(format!("session ended in {} ({:?})", report.phase, report.fault)));
        }
        let record = report.record.ok_or_else(|| fail("no infusion record".into()))?;
        rows.push(AccuracyRow::from_measurement(
            i + 1,
            seed,
            volume_ml,
            rate_ml_h,
            record.delivered_volume_ml,
            record.mean_rate_ml_h,
        ));
    }
    Ok(AccuracyReport::from_rows(volume_ml, rate_ml_h, rows))
}
