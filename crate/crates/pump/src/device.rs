//! The pump firmware as a discrete-event simulation.
//!
//! Time is seconds since the session began. Events are logins, index
//! fetches, motor steps and polls; a step and a poll due at the same instant
//! run step first. The infusion trace uses seconds since the infusion began.

use std::time::Instant;

use mediflow_core::clock::offset_seconds;
use mediflow_core::wire::{IndexResponse, InfusionIndex, LoginRequest};
use mediflow_core::{
    plan_schedule, CoreError, Dispenser, InfusionOutcome, InfusionRecord, InfusionTrace, NoiseDraw, NoiseModel,
    SyringeKinematics, Timestamp, DEFAULT_DROP_QUANTUM_UL,
};
use serde::{Deserialize, Serialize};

use crate::phase::Phase;
use crate::transport::{Transport, TransportError};

pub const DEFAULT_POLL_INTERVAL_S: f64 = 60.0;

#[derive(Debug, thiserror::Error)]
pub enum PumpError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("invalid device config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    /// Events run back to back.
    #[default]
    Simulated,
    /// Events wait for the wall clock to catch up with simulated time.
    Realtime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub username: String,
    pub password: String,
    pub mac: String,
    pub patient_id: String,
    pub kinematics: SyringeKinematics,
    pub noise: NoiseModel,
    pub drop_quantum_ul: f64,
    pub poll_interval_s: f64,
    /// Consecutive rejected logins or re-logins before giving up.
    pub max_auth_failures: u32,
    /// Consecutive unreachable attempts before giving up, outside infusion.
    pub max_transport_retries: u32,
    pub retry_backoff_s: f64,
    pub pacing: Pacing,
}

impl DeviceConfig {
    pub fn new(username: &str, password: &str, mac: &str, patient_id: &str) -> Self {
        Self {
            username: username.to_owned(),
            password: password.to_owned(),
            mac: mac.to_owned(),
            patient_id: patient_id.to_owned(),
            kinematics: SyringeKinematics::default(),
            noise: NoiseModel::standard(0, DEFAULT_DROP_QUANTUM_UL),
            drop_quantum_ul: DEFAULT_DROP_QUANTUM_UL,
            poll_interval_s: DEFAULT_POLL_INTERVAL_S,
            max_auth_failures: 3,
            max_transport_retries: 5,
            retry_backoff_s: 5.0,
            pacing: Pacing::Simulated,
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn check(&self) -> Result<(), PumpError> {
        self.kinematics.check()?;
        self.noise.check()?;
        if !(self.drop_quantum_ul.is_finite() && self.drop_quantum_ul > 0.0) {
            return Err(PumpError::Config("drop_quantum_ul must be positive"));
        }
        if !(self.poll_interval_s.is_finite() && self.poll_interval_s > 0.0) {
            return Err(PumpError::Config("poll_interval_s must be positive"));
        }
        if !(self.retry_backoff_s.is_finite() && self.retry_backoff_s >= 0.0) {
            return Err(PumpError::Config("retry_backoff_s must be >= 0"));
        }
        if self.max_auth_failures == 0 {
            return Err(PumpError::Config("max_auth_failures must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub token: Option<String>,
    pub patient_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveInfusion {
    pub prescription_id: String,
    pub version: u64,
    pub volume_ml: f64,
    pub rate_ml_h: f64,
    pub steps_total: u64,
    pub steps_done: u64,
    pub step_interval_s: f64,
    /// When the current constant-rate segment began.
    pub segment_start_s: f64,
    /// `steps_done` when the current segment began.
    pub segment_base_steps: u64,
    pub next_poll_at: f64,
}

impl ActiveInfusion {
    pub fn next_step_at(&self) -> f64 {
        let n = self.steps_done - self.segment_base_steps + 1;
        self.segment_start_s + n as f64 * self.step_interval_s
    }

    pub fn is_done(&self) -> bool {
        self.steps_done >= self.steps_total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub phase: Phase,
    pub session: Option<SessionInfo>,
    pub active: Option<ActiveInfusion>,
}

impl DeviceState {
    pub fn idle() -> Self {
        Self {
            phase: Phase::Idle,
            session: None,
            active: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adaptation {
    Unchanged,
    Rescheduled,
    /// The new order's volume is already delivered; the motor stops.
    Superseded,
}

/// Applies a poll response. A newer version replaces the schedule with one
/// for the volume still owed under the new order, at its rate, starting now.
pub fn poll_and_adapt(
    state: &mut DeviceState,
    resp: IndexResponse,
    now_s: f64,
    poll_interval_s: f64,
    k: &SyringeKinematics,
) -> Result<Adaptation, CoreError> {
    if let Some(session) = state.session.as_mut() {
        session.token = Some(resp.token);
    }
    let Some(a) = state.active.as_mut() else {
        return Ok(Adaptation::Unchanged);
    };
    a.next_poll_at = now_s + poll_interval_s;
    let idx = resp.infusion_index;
    if idx.version <= a.version {
        return Ok(Adaptation::Unchanged);
    }
    let remaining = idx.volume_ml - k.steps_to_volume_ml(a.steps_done);
    let plan = if remaining > 0.0 {
        Some(plan_schedule(remaining, idx.rate_ml_h, k)?)
    } else {
        k.rate_to_step_interval(idx.rate_ml_h)?;
        None
    };
    a.prescription_id = idx.prescription_id;
    a.version = idx.version;
    a.volume_ml = idx.volume_ml;
    a.rate_ml_h = idx.rate_ml_h;
    match plan {
        None => {
            a.steps_total = a.steps_done;
            Ok(Adaptation::Superseded)
        }
        Some(plan) => {
            a.steps_total = a.steps_done + plan.steps_total;
            a.step_interval_s = plan.step_interval_s;
            a.segment_start_s = now_s;
            a.segment_base_steps = a.steps_done;
            Ok(Adaptation::Rescheduled)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t_s: f64,
    pub from: Phase,
    pub to: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub phase: Phase,
    pub outcome: Option<InfusionOutcome>,
    pub fault: Option<String>,
    pub transitions: Vec<Transition>,
    pub trace: Option<InfusionTrace>,
    pub record: Option<InfusionRecord>,
    pub record_posted: bool,
    pub polls: u32,
    pub relogins: u32,
    pub unreachable_polls: u32,
    /// Every prescription version the motor ran under, in order.
    pub versions: Vec<u64>,
    pub ended_at_s: f64,
}

impl SessionReport {
    pub fn drops_dispensed(&self) -> usize {
        self.trace.as_ref().map_or(0, |t| t.drops.len())
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Login,
    Index,
    Step,
    Poll,
    Finish,
}

pub struct Session<T> {
    cfg: DeviceConfig,
    transport: T,
    epoch: Timestamp,
    state: DeviceState,
    draw: NoiseDraw,
    t_s: f64,
    retry_at: f64,
    infusion_start_s: f64,
    last_step_s: f64,
    dispenser: Option<Dispenser>,
    auth_failures: u32,
    transport_failures: u32,
    superseded: bool,
    report: SessionReport,
    wall_start: Option<Instant>,
}

impl<T: Transport> Session<T> {
    /// `epoch` is the wall time that session second 0 maps to.
    pub fn new(cfg: DeviceConfig, transport: T, epoch: Timestamp) -> Result<Self, PumpError> {
        cfg.check()?;
        let draw = cfg.noise.draw()?;
        let wall_start = (cfg.pacing == Pacing::Realtime).then(Instant::now);
        Ok(Self {
            cfg,
            transport,
            epoch,
            state: DeviceState::idle(),
            draw,
            t_s: 0.0,
            retry_at: 0.0,
            infusion_start_s: 0.0,
            last_step_s: 0.0,
            dispenser: None,
            auth_failures: 0,
            transport_failures: 0,
            superseded: false,
            report: SessionReport {
                phase: Phase::Idle,
                outcome: None,
                fault: None,
                transitions: Vec::new(),
                trace: None,
                record: None,
                record_posted: false,
                polls: 0,
                relogins: 0,
                unreachable_polls: 0,
                versions: Vec::new(),
                ended_at_s: 0.0,
            },
            wall_start,
        })
    }

    pub fn state(&self) -> &DeviceState {
        &self.state
    }

    pub fn now_s(&self) -> f64 {
        self.t_s
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Volume the motor has pushed so far, in mL, ignoring noise.
    pub fn commanded_ml(&self) -> f64 {
        let steps = self.state.active.as_ref().map_or(0, |a| a.steps_done);
        self.cfg.kinematics.steps_to_volume_ml(steps)
    }

    /// Volume the scale has seen so far, in mL.
    pub fn measured_ml(&self) -> f64 {
        match (&self.dispenser, &self.report.trace) {
            (Some(d), _) => d.measured_ml(),
            (None, Some(t)) => t.delivered_volume_ml,
            _ => 0.0,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.state.phase.is_terminal()
    }

    fn next_event(&self) -> Option<(f64, Event)> {
        match self.state.phase {
            Phase::Idle | Phase::Authenticating => Some((self.retry_at, Event::Login)),
            Phase::AcquiringIndex => Some((self.retry_at, Event::Index)),
            Phase::Infusing => {
                let a = self.state.active.as_ref()?;
                if a.is_done() {
                    return Some((self.t_s, Event::Finish));
                }
                let step_at = a.next_step_at();
                if step_at <= a.next_poll_at {
                    Some((step_at, Event::Step))
                } else {
                    Some((a.next_poll_at, Event::Poll))
                }
            }
            Phase::Completed | Phase::Fault => None,
        }
    }

    /// Processes every event due strictly before `t_s`. Returns whether the
    /// session has ended.
    pub fn run_until(&mut self, t_s: f64) -> bool {
        while let Some((at, event)) = self.next_event() {
            if at >= t_s {
                return false;
            }
            self.pace(at);
            self.t_s = self.t_s.max(at);
            match event {
                Event::Login => self.on_login(),
                Event::Index => self.on_index(),
                Event::Step => self.on_step(),
                Event::Poll => self.on_poll(),
                Event::Finish => self.on_finish(),
            }
        }
        true
    }

    pub fn run(mut self) -> SessionReport {
        self.run_until(f64::INFINITY);
        self.into_report()
    }

    pub fn into_report(mut self) -> SessionReport {
        self.report.phase = self.state.phase;
        self.report.ended_at_s = self.t_s;
        self.report
    }

    fn pace(&self, at: f64) {
        if let Some(start) = self.wall_start {
            let target = start + std::time::Duration::from_secs_f64(at.max(0.0));
            let now = Instant::now();
            if target > now {
                std::thread::sleep(target - now);
            }
        }
    }

    fn transition(&mut self, to: Phase) {
        let from = self.state.phase;
        assert!(from.can_transition(to), "illegal transition {from} -> {to}");
        self.state.phase = to;
        self.report.transitions.push(Transition {
            t_s: self.t_s,
            from,
            to,
        });
    }

    fn sync(&mut self) {
        let now = offset_seconds(self.epoch, self.t_s);
        self.transport.sync(now);
    }

    fn login_request(&self) -> LoginRequest {
        LoginRequest {
            username: self.cfg.username.clone(),
            password: self.cfg.password.clone(),
            mac: Some(self.cfg.mac.clone()),
        }
    }

    fn set_token(&mut self, token: Option<String>) {
        let patient_id = self.cfg.patient_id.clone();
        self.state
            .session
            .get_or_insert(SessionInfo {
                token: None,
                patient_id,
            })
            .token = token;
    }

    fn take_token(&mut self) -> Option<String> {
        self.state.session.as_mut().and_then(|s| s.token.take())
    }

    fn on_login(&mut self) {
        if self.state.phase == Phase::Idle {
            self.transition(Phase::Authenticating);
        }
        self.sync();
        let req = self.login_request();
        match self.transport.login(&req) {
            Ok(resp) => {
                self.transport_failures = 0;
                self.set_token(Some(resp.token));
                self.transition(Phase::AcquiringIndex);
                self.retry_at = self.t_s;
            }
            Err(e) => self.setup_failure(e, self.cfg.retry_backoff_s),
        }
    }

    fn on_index(&mut self) {
        let Some(token) = self.take_token() else {
            self.transition(Phase::Authenticating);
            self.retry_at = self.t_s;
            return;
        };
        self.sync();
        let patient_id = self.cfg.patient_id.clone();
        match self.transport.index(&token, &patient_id) {
            Ok(resp) => {
                self.auth_failures = 0;
                self.transport_failures = 0;
                self.set_token(Some(resp.token));
                self.start_infusion(resp.infusion_index);
            }
            Err(e @ TransportError::Unreachable(_)) => {
                self.set_token(Some(token));
                self.setup_failure(e, self.cfg.retry_backoff_s);
            }
            Err(e) => self.setup_failure(e, 0.0),
        }
    }

    /// Failure while logging in or fetching the first index.
    fn setup_failure(&mut self, e: TransportError, auth_delay_s: f64) {
        match e {
            TransportError::Unreachable(_) => {
                self.transport_failures += 1;
                if self.transport_failures > self.cfg.max_transport_retries {
                    self.fault("unreachable");
                } else {
                    self.retry_at = self.t_s + self.cfg.retry_backoff_s;
                }
            }
            ref api if api.is_auth() => {
                self.auth_failures += 1;
                if self.auth_failures >= self.cfg.max_auth_failures {
                    self.fault(api.code());
                } else {
                    self.set_token(None);
                    self.transition(Phase::Authenticating);
                    self.retry_at = self.t_s + auth_delay_s;
                }
            }
            other => self.fault(other.code()),
        }
    }

    fn start_infusion(&mut self, idx: InfusionIndex) {
        let k = self.cfg.kinematics;
        let plan = match plan_schedule(idx.volume_ml, idx.rate_ml_h, &k) {
            Ok(p) => p,
            Err(_) => return self.fault("invalid_prescription"),
        };
        let dispenser = match Dispenser::new(&k, self.draw, self.cfg.drop_quantum_ul) {
            Ok(d) => d,
            Err(_) => return self.fault("invalid_kinematics"),
        };
        self.dispenser = Some(dispenser);
        self.infusion_start_s = self.t_s;
        self.last_step_s = self.t_s;
        self.report.versions.push(idx.version);
        self.state.active = Some(ActiveInfusion {
            prescription_id: idx.prescription_id,
            version: idx.version,
            volume_ml: idx.volume_ml,
            rate_ml_h: idx.rate_ml_h,
            steps_total: plan.steps_total,
            steps_done: 0,
            step_interval_s: plan.step_interval_s,
            segment_start_s: self.t_s,
            segment_base_steps: 0,
            next_poll_at: self.t_s + self.cfg.poll_interval_s,
        });
        self.transition(Phase::Infusing);
    }

    fn on_step(&mut self) {
        let rel = self.t_s - self.infusion_start_s;
        if let (Some(a), Some(d)) = (self.state.active.as_mut(), self.dispenser.as_mut()) {
            debug_assert!(a.steps_done < a.steps_total);
            a.steps_done += 1;
            d.step(rel);
            self.last_step_s = self.t_s;
        }
    }

    fn on_poll(&mut self) {
        self.report.polls += 1;
        if let Some(a) = self.state.active.as_mut() {
            a.next_poll_at = self.t_s + self.cfg.poll_interval_s;
        }
        let Some(token) = self.take_token() else {
            return self.reauth_mid_infusion();
        };
        self.sync();
        let patient_id = self.cfg.patient_id.clone();
        match self.transport.index(&token, &patient_id) {
            Ok(resp) => {
                self.auth_failures = 0;
                self.adapt(resp);
            }
            Err(TransportError::Unreachable(_)) => {
                self.set_token(Some(token));
                self.report.unreachable_polls += 1;
            }
            Err(e) if e.is_auth() => self.reauth_mid_infusion(),
            // no active order server-side: keep running the current one
            Err(TransportError::Api { status: 404, .. }) => {}
            Err(e) => self.fault(e.code()),
        }
    }

    fn adapt(&mut self, resp: IndexResponse) {
        let k = self.cfg.kinematics;
        match poll_and_adapt(&mut self.state, resp, self.t_s, self.cfg.poll_interval_s, &k) {
            Ok(Adaptation::Unchanged) => {}
            Ok(Adaptation::Rescheduled) => {
                let v = self.state.active.as_ref().map(|a| a.version).unwrap_or_default();
                self.report.versions.push(v);
                self.transition(Phase::Infusing);
            }
            Ok(Adaptation::Superseded) => {
                let v = self.state.active.as_ref().map(|a| a.version).unwrap_or_default();
                self.report.versions.push(v);
                self.superseded = true;
            }
            Err(_) => self.fault("invalid_prescription"),
        }
    }

    /// Login then index, while the motor keeps its current schedule.
    fn reauth_mid_infusion(&mut self) {
        self.report.relogins += 1;
        self.transition(Phase::Authenticating);
        self.sync();
        let req = self.login_request();
        let login = match self.transport.login(&req) {
            Ok(resp) => resp,
            Err(e) => return self.mid_infusion_failure(e, None),
        };
        self.transition(Phase::AcquiringIndex);
        let patient_id = self.cfg.patient_id.clone();
        match self.transport.index(&login.token, &patient_id) {
            Ok(resp) => {
                self.auth_failures = 0;
                self.set_token(None);
                self.transition(Phase::Infusing);
                self.adapt(resp);
            }
            Err(e) => self.mid_infusion_failure(e, Some(login.token)),
        }
    }

    fn mid_infusion_failure(&mut self, e: TransportError, token: Option<String>) {
        match e {
            TransportError::Unreachable(_) => {
                self.report.unreachable_polls += 1;
                self.set_token(token);
                self.transition(Phase::Infusing);
            }
            ref api if api.is_auth() => {
                self.auth_failures += 1;
                if self.auth_failures >= self.cfg.max_auth_failures {
                    self.fault(api.code());
                } else {
                    self.set_token(None);
                    self.transition(Phase::Infusing);
                }
            }
            TransportError::Api { status: 404, .. } => {
                self.set_token(None);
                self.transition(Phase::Infusing);
            }
            other => self.fault(other.code()),
        }
    }

    fn close_trace(&mut self) -> Option<InfusionTrace> {
        let d = self.dispenser.take()?;
        Some(d.finish(self.last_step_s - self.infusion_start_s))
    }

    fn build_record(&self, trace: &InfusionTrace, outcome: InfusionOutcome) -> Option<InfusionRecord> {
        let a = self.state.active.as_ref()?;
        Some(InfusionRecord {
            record_id: None,
            patient_id: self.cfg.patient_id.clone(),
            prescription_id: a.prescription_id.clone(),
            version: a.version,
            started_at: offset_seconds(self.epoch, self.infusion_start_s),
            finished_at: offset_seconds(self.epoch, self.last_step_s),
            delivered_volume_ml: trace.delivered_volume_ml,
            mean_rate_ml_h: trace.mean_rate_ml_h,
            outcome,
        })
    }

    fn on_finish(&mut self) {
        let outcome = if self.superseded {
            InfusionOutcome::SupersededMidInfusion
        } else {
            InfusionOutcome::Completed
        };
        let trace = self.close_trace();
        if let Some(trace) = &trace {
            self.report.record = self.build_record(trace, outcome);
        }
        self.report.trace = trace;
        self.report.outcome = Some(outcome);
        self.post_record();
        self.transition(Phase::Completed);
    }

    /// Posts the finished record, re-logging in on 401.
    fn post_record(&mut self) {
        let Some(record) = self.report.record.clone() else {
            return;
        };
        let mut unreachable = 0;
        let mut rejected = 0;
        loop {
            self.sync();
            let token = match self.take_token() {
                Some(t) => t,
                None => {
                    self.report.relogins += 1;
                    let req = self.login_request();
                    match self.transport.login(&req) {
                        Ok(resp) => resp.token,
                        Err(TransportError::Unreachable(_)) => {
                            unreachable += 1;
                            if unreachable > self.cfg.max_transport_retries {
                                return;
                            }
                            self.t_s += self.cfg.retry_backoff_s;
                            continue;
                        }
                        Err(_) => return,
                    }
                }
            };
            match self.transport.record(&token, &record) {
                Ok(resp) => {
                    self.set_token(Some(resp.token));
                    self.report.record_posted = true;
                    return;
                }
                Err(e) if e.is_auth() => {
                    rejected += 1;
                    if rejected >= self.cfg.max_auth_failures {
                        return;
                    }
                }
                Err(TransportError::Unreachable(_)) => {
                    self.set_token(Some(token));
                    unreachable += 1;
                    if unreachable > self.cfg.max_transport_retries {
                        return;
                    }
                    self.t_s += self.cfg.retry_backoff_s;
                }
                Err(_) => return,
            }
        }
    }

    fn fault(&mut self, reason: &str) {
        self.report.fault = Some(reason.to_owned());
        if let Some(trace) = self.close_trace() {
            self.report.record = self.build_record(&trace, InfusionOutcome::Fault);
            self.report.trace = Some(trace);
            self.report.outcome = Some(InfusionOutcome::Fault);
        }
        self.transition(Phase::Fault);
    }
}

/// Runs one device session to its end.
pub fn run_session<T: Transport>(
    cfg: DeviceConfig,
    transport: T,
    epoch: Timestamp,
) -> Result<SessionReport, PumpError> {
    Ok(Session::new(cfg, transport, epoch)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn infusing(volume: f64, rate: f64) -> DeviceState {
        let k = SyringeKinematics::default();
        let plan = plan_schedule(volume, rate, &k).unwrap();
        DeviceState {
            phase: Phase::Infusing,
            session: Some(SessionInfo {
                token: Some("t0".into()),
                patient_id: "p1".into(),
            }),
            active: Some(ActiveInfusion {
                prescription_id: "rx-1".into(),
                version: 1,
                volume_ml: volume,
                rate_ml_h: rate,
                steps_total: plan.steps_total,
                steps_done: 0,
                step_interval_s: plan.step_interval_s,
                segment_start_s: 0.0,
                segment_base_steps: 0,
                next_poll_at: 60.0,
            }),
        }
    }

    fn resp(version: u64, volume: f64, rate: f64, token: &str) -> IndexResponse {
        IndexResponse {
            infusion_index: InfusionIndex {
                prescription_id: format!("rx-{version}"),
                version,
                volume_ml: volume,
                rate_ml_h: rate,
            },
            token: token.into(),
        }
    }

    #[test]
    fn same_version_only_rotates_token_and_poll() {
        let k = SyringeKinematics::default();
        let mut s = infusing(2.0, 4.0);
        let before = s.active.clone().unwrap();
        let out = poll_and_adapt(&mut s, resp(1, 2.0, 4.0, "t1"), 60.0, 60.0, &k).unwrap();
        assert_eq!(out, Adaptation::Unchanged);
        assert_eq!(s.session.as_ref().unwrap().token.as_deref(), Some("t1"));
        let after = s.active.unwrap();
        assert_eq!(after.next_poll_at, 120.0);
        assert_eq!(
            ActiveInfusion {
                next_poll_at: 60.0,
                ..after
            },
            before
        );
    }

    #[test]
    fn rate_change_reschedules_remaining_volume() {
        let k = SyringeKinematics::default();
        let mut s = infusing(2.0, 4.0);
        s.active.as_mut().unwrap().steps_done = 3364;
        let out = poll_and_adapt(&mut s, resp(2, 2.0, 5.0, "t1"), 900.0, 60.0, &k).unwrap();
        assert_eq!(out, Adaptation::Rescheduled);
        let a = s.active.unwrap();
        assert_eq!(a.version, 2);
        assert_eq!(a.steps_total, 3364 + 3365);
        assert_eq!(a.segment_start_s, 900.0);
        let end = a.segment_start_s + (a.steps_total - a.segment_base_steps) as f64 * a.step_interval_s;
        assert!((end - 1620.0).abs() < 1.0, "{end}");
    }

    #[test]
    fn smaller_order_than_delivered_supersedes() {
        let k = SyringeKinematics::default();
        let mut s = infusing(2.0, 4.0);
        let done = k.volume_to_steps(1.2).unwrap();
        s.active.as_mut().unwrap().steps_done = done;
        let out = poll_and_adapt(&mut s, resp(2, 1.0, 4.0, "t1"), 1080.0, 60.0, &k).unwrap();
        assert_eq!(out, Adaptation::Superseded);
        let a = s.active.unwrap();
        assert!(a.is_done());
        assert_eq!(a.steps_done, done);
    }

    #[test]
    fn older_version_is_ignored() {
        let k = SyringeKinematics::default();
        let mut s = infusing(2.0, 4.0);
        s.active.as_mut().unwrap().version = 3;
        let out = poll_and_adapt(&mut s, resp(2, 5.0, 5.0, "t1"), 60.0, 60.0, &k).unwrap();
        assert_eq!(out, Adaptation::Unchanged);
        assert_eq!(s.active.unwrap().volume_ml, 2.0);
    }

    #[test]
    fn config_checks() {
        let mut c = DeviceConfig::new("dev1", "pw", "AA:BB:CC:DD:EE:01", "p1");
        assert!(c.check().is_ok());
        c.poll_interval_s = 0.0;
        assert!(c.check().is_err());
    }
}
