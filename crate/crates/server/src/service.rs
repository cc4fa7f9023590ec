//! Request handling independent of the HTTP transport.
//!
//! [`Service`] owns the token store, the in-memory state and its journal.
//! Every authenticated call burns the presented token first and, on success,
//! hands back the next one.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::Hash;
use std::sync::Arc;

use chrono::Duration;
use mediflow_auth::{hash_password, verify_password, AuthToken, TokenStore};
use mediflow_core::clock::Clock;
use mediflow_core::wire::{
    Decision, DecisionRequest, DecisionResponse, HistoryResponse, IndexRequest, IndexResponse, InfusionIndex,
    LimitsRequest, LimitsResponse, LiveInfusion, LoginRequest, LoginResponse, ProposalRequest, StatusResponse,
    TokenResponse,
};
use mediflow_core::{
    check_limits, AdjustmentProposal, DeviceIdentity, InfusionRecord, MacAddress, PatientProfile, Prescription,
    PrescriptionStatus, ProposalState, Role, Timestamp, UserAccount,
};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::config::ServerConfig;
use crate::error::{ApiError, ApiResult};
use crate::journal::{Family, Journal};

pub const LIMIT_EXCEEDED: &str = "limit_exceeded";
pub const WARN_ACTIVE_EXCEEDS_LIMITS: &str = "active_prescription_exceeds_limits";

/// Hash compared against when the username is unknown, so both failure
/// paths cost the same.
static DUMMY_HASH: std::sync::LazyLock<String> = std::sync::LazyLock::new(|| hash_password("dummy"));

#[derive(Debug, Clone)]
pub struct NewPhysician {
    pub username: String,
    pub password: String,
    pub first_name: String,
    pub last_name: String,
    pub institute: String,
}

#[derive(Debug, Clone)]
pub struct NewPatient {
    pub username: String,
    pub password: String,
    pub first_name: String,
    pub last_name: String,
    pub institute: String,
    pub patient_id: String,
    pub mac: MacAddress,
    pub physician_username: String,
    pub max_volume_ml: f64,
    pub max_rate_ml_h: f64,
}

/// Everything that survives a restart, in stable order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub users: Vec<UserAccount>,
    pub devices: Vec<DeviceIdentity>,
    pub profiles: Vec<PatientProfile>,
    pub prescriptions: Vec<Prescription>,
    pub proposals: Vec<AdjustmentProposal>,
    pub records: Vec<InfusionRecord>,
}

/// Linear-schedule estimate of a running infusion, kept from index fetches.
#[derive(Debug, Clone)]
struct LiveTrack {
    version: u64,
    started_at: Timestamp,
    segment_start: Timestamp,
    segment_base_ml: f64,
    volume_ml: f64,
    rate_ml_h: f64,
}

impl LiveTrack {
    fn delivered_at(&self, now: Timestamp) -> f64 {
        if self.segment_base_ml >= self.volume_ml {
            return self.segment_base_ml;
        }
        let secs = (now - self.segment_start).num_milliseconds().max(0) as f64 / 1000.0;
        (self.segment_base_ml + self.rate_ml_h * secs / 3600.0).min(self.volume_ml)
    }
}

#[derive(Debug, Default)]
struct State {
    users: BTreeMap<String, UserAccount>,
    devices: BTreeMap<MacAddress, DeviceIdentity>,
    profiles: BTreeMap<String, PatientProfile>,
    prescriptions: Vec<Prescription>,
    proposals: Vec<AdjustmentProposal>,
    records: Vec<InfusionRecord>,
    live: HashMap<String, LiveTrack>,
}

impl State {
    fn active(&self, patient_id: &str) -> Option<&Prescription> {
        self.prescriptions
            .iter()
            .rev()
            .find(|p| p.patient_id == patient_id && p.status == PrescriptionStatus::Active)
    }

    fn active_version(&self, patient_id: &str) -> u64 {
        self.active(patient_id).map_or(0, |p| p.version)
    }

    fn latest_version(&self, patient_id: &str) -> u64 {
        self.prescriptions
            .iter()
            .filter(|p| p.patient_id == patient_id)
            .map(|p| p.version)
            .max()
            .unwrap_or(0)
    }

    fn profile(&self, patient_id: &str) -> ApiResult<&PatientProfile> {
        self.profiles
            .get(patient_id)
            .ok_or(ApiError::NotFound("unknown_patient"))
    }

    fn require_physician_of(&self, user: &UserAccount, patient_id: &str) -> ApiResult<()> {
        let profile = self.profile(patient_id)?;
        if user.role != Role::Physician || profile.physician_username != user.username {
            return Err(ApiError::Forbidden);
        }
        Ok(())
    }

    fn track_live(&mut self, rx: &Prescription, now: Timestamp) {
        match self.live.get_mut(&rx.patient_id) {
            None => {
                self.live.insert(
                    rx.patient_id.clone(),
                    LiveTrack {
                        version: rx.version,
                        started_at: now,
                        segment_start: now,
                        segment_base_ml: 0.0,
                        volume_ml: rx.volume_ml,
                        rate_ml_h: rx.rate_ml_h,
                    },
                );
            }
            Some(track) if track.version != rx.version => {
                let delivered = track.delivered_at(now);
                track.version = rx.version;
                track.segment_start = now;
                track.segment_base_ml = delivered;
                track.volume_ml = rx.volume_ml;
                track.rate_ml_h = rx.rate_ml_h;
            }
            Some(_) => {}
        }
    }

    fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            users: self.users.values().cloned().collect(),
            devices: self.devices.values().cloned().collect(),
            profiles: self.profiles.values().cloned().collect(),
            prescriptions: self.prescriptions.clone(),
            proposals: self.proposals.clone(),
            records: self.records.clone(),
        }
    }
}

/// Keeps the last state per key, in order of first appearance.
fn fold_last<T, K: Eq + Hash + Clone>(items: Vec<T>, key: impl Fn(&T) -> K) -> Vec<T> {
    let mut slot: HashMap<K, usize> = HashMap::new();
    let mut out: Vec<T> = Vec::new();
    for item in items {
        let k = key(&item);
        match slot.get(&k) {
            Some(&i) => out[i] = item,
            None => {
                slot.insert(k, out.len());
                out.push(item);
            }
        }
    }
    out
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

pub struct Service {
    config: ServerConfig,
    clock: Arc<dyn Clock>,
    tokens: TokenStore,
    state: Mutex<State>,
    journal: Option<Journal>,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service")
            .field("config", &self.config)
            .field("tokens", &self.tokens.len())
            .finish_non_exhaustive()
    }
}

impl Service {
    /// Opens the service, replaying the journal in `config.data_dir` if set.
    pub fn open(config: ServerConfig, clock: Arc<dyn Clock>) -> std::io::Result<Self> {
        let tokens = TokenStore::new(Duration::seconds(config.ttl_s.max(1) as i64));
        let journal = config.data_dir.as_ref().map(Journal::open).transpose()?;
        let mut state = State::default();
        if let Some(j) = &journal {
            for u in fold_last(j.read_all::<UserAccount>(Family::Users)?, |u| u.username.clone()) {
                state.users.insert(u.username.clone(), u);
            }
            for d in fold_last(j.read_all::<DeviceIdentity>(Family::Devices)?, |d| d.mac) {
                state.devices.insert(d.mac, d);
            }
            for p in fold_last(j.read_all::<PatientProfile>(Family::Profiles)?, |p| {
                p.patient_id.clone()
            }) {
                state.profiles.insert(p.patient_id.clone(), p);
            }
            state.prescriptions = fold_last(j.read_all(Family::Prescriptions)?, |p: &Prescription| {
                p.prescription_id.clone()
            });
            state.proposals = fold_last(j.read_all(Family::Proposals)?, |p: &AdjustmentProposal| {
                p.proposal_id.clone()
            });
            state.records = j.read_all(Family::Records)?;
            if config.persist_tokens {
                tokens.restore(fold_last(j.read_all(Family::Tokens)?, |t: &AuthToken| t.value.clone()));
            }
        }
        for u in state.users.keys() {
            tokens.register_principal(u.clone());
        }
        Ok(Self {
            config,
            clock,
            tokens,
            state: Mutex::new(state),
            journal,
        })
    }

    pub fn in_memory(config: ServerConfig, clock: Arc<dyn Clock>) -> Self {
        let config = ServerConfig {
            data_dir: None,
            ..config
        };
        Self::open(config, clock).expect("no I/O without a data directory")
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn tokens(&self) -> &TokenStore {
        &self.tokens
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    fn persist<T: Serialize>(&self, family: Family, record: &T) -> ApiResult<()> {
        if let Some(j) = &self.journal {
            j.append(family, record)?;
        }
        Ok(())
    }

    fn persist_token(&self, token: &AuthToken) -> ApiResult<()> {
        if self.config.persist_tokens {
            self.persist(Family::Tokens, token)?;
        }
        Ok(())
    }

    fn issue_token(&self, username: &str) -> ApiResult<String> {
        let token = self.tokens.issue(username, self.now())?;
        self.persist_token(&token)?;
        Ok(token.value)
    }

    fn authenticate(&self, token: &str) -> ApiResult<UserAccount> {
        let burnt = self.tokens.consume_token(token, self.now())?;
        self.persist_token(&burnt)?;
        let state = self.state.lock();
        state
            .users
            .get(&burnt.principal)
            .cloned()
            .ok_or(ApiError::Token(mediflow_auth::TokenError::Invalid))
    }

    // ---- administration (seeding, not exposed over HTTP) ----

    pub fn register_physician(&self, p: NewPhysician) -> ApiResult<()> {
        if p.username.is_empty() {
            return Err(ApiError::BadRequest("empty_username"));
        }
        let mut state = self.state.lock();
        if state.users.contains_key(&p.username) {
            return Err(ApiError::Conflict("username_taken"));
        }
        let user = UserAccount {
            username: p.username.clone(),
            password_hash: hash_password(&p.password),
            role: Role::Physician,
            first_name: p.first_name,
            last_name: p.last_name,
            institute: p.institute,
            patient_id: None,
        };
        self.persist(Family::Users, &user)?;
        state.users.insert(p.username.clone(), user);
        self.tokens.register_principal(p.username);
        Ok(())
    }

    pub fn register_patient(&self, p: NewPatient) -> ApiResult<()> {
        if p.username.is_empty() || p.patient_id.is_empty() {
            return Err(ApiError::BadRequest("empty_identifier"));
        }
        if !positive(p.max_volume_ml) || !positive(p.max_rate_ml_h) {
            return Err(ApiError::BadRequest("invalid_limits"));
        }
        let mut state = self.state.lock();
        if state.users.contains_key(&p.username) {
            return Err(ApiError::Conflict("username_taken"));
        }
        if state.devices.contains_key(&p.mac) {
            return Err(ApiError::Conflict("mac_taken"));
        }
        if state.profiles.contains_key(&p.patient_id) {
            return Err(ApiError::Conflict("patient_taken"));
        }
        match state.users.get(&p.physician_username) {
            Some(doc) if doc.role == Role::Physician => {}
            _ => return Err(ApiError::NotFound("unknown_physician")),
        }
        let user = UserAccount {
            username: p.username.clone(),
            password_hash: hash_password(&p.password),
            role: Role::PatientDevice,
            first_name: p.first_name,
            last_name: p.last_name,
            institute: p.institute,
            patient_id: Some(p.patient_id.clone()),
        };
        let device = DeviceIdentity {
            mac: p.mac,
            owner_username: p.username.clone(),
        };
        let profile = PatientProfile {
            patient_id: p.patient_id.clone(),
            max_volume_ml: p.max_volume_ml,
            max_rate_ml_h: p.max_rate_ml_h,
            physician_username: p.physician_username,
        };
        self.persist(Family::Users, &user)?;
        self.persist(Family::Devices, &device)?;
        self.persist(Family::Profiles, &profile)?;
        state.users.insert(p.username.clone(), user);
        state.devices.insert(p.mac, device);
        state.profiles.insert(p.patient_id, profile);
        self.tokens.register_principal(p.username);
        Ok(())
    }

    /// Administrative prescription, subject to the same limits as approvals.
    pub fn prescribe(&self, patient_id: &str, volume_ml: f64, rate_ml_h: f64) -> ApiResult<Prescription> {
        if !positive(volume_ml) || !positive(rate_ml_h) {
            return Err(ApiError::BadRequest("invalid_prescription"));
        }
        let mut state = self.state.lock();
        let profile = state.profile(patient_id)?;
        if check_limits(volume_ml, rate_ml_h, profile).is_some() {
            return Err(ApiError::BadRequest(LIMIT_EXCEEDED));
        }
        self.activate(&mut state, patient_id, volume_ml, rate_ml_h)
    }

    fn activate(&self, state: &mut State, patient_id: &str, volume_ml: f64, rate_ml_h: f64) -> ApiResult<Prescription> {
        let version = state.latest_version(patient_id) + 1;
        let rx = Prescription {
            prescription_id: format!("rx-{}", state.prescriptions.len() + 1),
            patient_id: patient_id.to_owned(),
            version,
            volume_ml,
            rate_ml_h,
            status: PrescriptionStatus::Active,
        };
        self.persist(Family::Prescriptions, &rx)?;
        for old in state.prescriptions.iter_mut() {
            if old.patient_id == patient_id && old.status == PrescriptionStatus::Active {
                old.status = PrescriptionStatus::Superseded;
                if let Some(j) = &self.journal {
                    j.append(Family::Prescriptions, &*old)?;
                }
            }
        }
        state.prescriptions.push(rx.clone());
        Ok(rx)
    }

    // ---- device API ----

    pub fn login(&self, req: &LoginRequest) -> ApiResult<LoginResponse> {
        let user = self.state.lock().users.get(&req.username).cloned();
        let Some(user) = user else {
            verify_password(&req.password, &DUMMY_HASH);
            return Err(ApiError::InvalidCredentials);
        };
        if !verify_password(&req.password, &user.password_hash) {
            return Err(ApiError::InvalidCredentials);
        }
        if user.role == Role::PatientDevice {
            let mac: MacAddress = req
                .mac
                .as_deref()
                .and_then(|m| m.parse().ok())
                .ok_or(ApiError::DeviceNotRegistered)?;
            let state = self.state.lock();
            match state.devices.get(&mac) {
                Some(d) if d.owner_username == user.username => {}
                _ => return Err(ApiError::DeviceNotRegistered),
            }
        }
        let token = self.issue_token(&user.username)?;
        Ok(LoginResponse {
            first_name: user.first_name,
            last_name: user.last_name,
            institute: user.institute,
            token,
        })
    }

    pub fn get_index(&self, token: &str, req: &IndexRequest) -> ApiResult<IndexResponse> {
        let user = self.authenticate(token)?;
        if user.role != Role::PatientDevice || user.patient_id.as_deref() != Some(req.patient_id.as_str()) {
            return Err(ApiError::ForbiddenPatient);
        }
        let now = self.now();
        let rx = {
            let mut state = self.state.lock();
            let rx = state
                .active(&req.patient_id)
                .cloned()
                .ok_or(ApiError::NotFound("no_active_prescription"))?;
            state.track_live(&rx, now);
            rx
        };
        Ok(IndexResponse {
            infusion_index: InfusionIndex::from(&rx),
            token: self.issue_token(&user.username)?,
        })
    }

    pub fn record_infusion(&self, token: &str, mut record: InfusionRecord) -> ApiResult<TokenResponse> {
        let user = self.authenticate(token)?;
        if user.role != Role::PatientDevice || user.patient_id.as_deref() != Some(record.patient_id.as_str()) {
            return Err(ApiError::ForbiddenPatient);
        }
        record.check().map_err(|_| ApiError::BadRequest("invalid_record"))?;
        {
            let mut state = self.state.lock();
            match &record.record_id {
                Some(id) if state.records.iter().any(|r| r.record_id.as_ref() == Some(id)) => {
                    return Err(ApiError::Conflict("duplicate_record"));
                }
                Some(_) => {}
                None => record.record_id = Some(format!("rec-{}", state.records.len() + 1)),
            }
            self.persist(Family::Records, &record)?;
            state.live.remove(&record.patient_id);
            state.records.push(record);
        }
        Ok(TokenResponse {
            token: self.issue_token(&user.username)?,
        })
    }

    // ---- physician API ----

    pub fn history(&self, token: &str, patient_id: &str) -> ApiResult<HistoryResponse> {
        let user = self.authenticate(token)?;
        let records = {
            let state = self.state.lock();
            state.require_physician_of(&user, patient_id)?;
            state
                .records
                .iter()
                .filter(|r| r.patient_id == patient_id)
                .cloned()
                .collect()
        };
        Ok(HistoryResponse {
            patient_id: patient_id.to_owned(),
            records,
            token: self.issue_token(&user.username)?,
        })
    }

    pub fn status(&self, token: &str, patient_id: &str) -> ApiResult<StatusResponse> {
        let user = self.authenticate(token)?;
        let now = self.now();
        let (profile, active, live, proposals) = {
            let state = self.state.lock();
            state.require_physician_of(&user, patient_id)?;
            let live = state.live.get(patient_id).map(|t| LiveInfusion {
                version: t.version,
                delivered_volume_ml: t.delivered_at(now),
                elapsed_s: (now - t.started_at).num_milliseconds().max(0) as f64 / 1000.0,
            });
            (
                state.profile(patient_id)?.clone(),
                state.active(patient_id).map(InfusionIndex::from),
                live,
                Self::proposals_of(&state, patient_id),
            )
        };
        Ok(StatusResponse {
            patient_id: patient_id.to_owned(),
            profile,
            active,
            live,
            proposals,
            token: self.issue_token(&user.username)?,
        })
    }

    fn proposals_of(state: &State, patient_id: &str) -> Vec<AdjustmentProposal> {
        let mut out: Vec<_> = state
            .proposals
            .iter()
            .filter(|p| p.patient_id == patient_id)
            .cloned()
            .collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.seq.cmp(&b.seq)));
        out
    }

    pub fn set_limits(&self, token: &str, patient_id: &str, req: &LimitsRequest) -> ApiResult<LimitsResponse> {
        let user = self.authenticate(token)?;
        let (profile, warning, auto_rejected) = {
            let mut state = self.state.lock();
            state.require_physician_of(&user, patient_id)?;
            if !positive(req.max_volume_ml) || !positive(req.max_rate_ml_h) {
                return Err(ApiError::BadRequest("invalid_limits"));
            }
            let mut profile = state.profile(patient_id)?.clone();
            profile.max_volume_ml = req.max_volume_ml;
            profile.max_rate_ml_h = req.max_rate_ml_h;
            self.persist(Family::Profiles, &profile)?;
            state.profiles.insert(patient_id.to_owned(), profile.clone());

            let warning = state
                .active(patient_id)
                .filter(|rx| check_limits(rx.volume_ml, rx.rate_ml_h, &profile).is_some())
                .map(|_| WARN_ACTIVE_EXCEEDS_LIMITS.to_owned());

            let mut auto_rejected = Vec::new();
            for prop in state.proposals.iter_mut() {
                if prop.patient_id == patient_id
                    && prop.is_pending()
                    && check_limits(prop.proposed_volume_ml, prop.proposed_rate_ml_h, &profile).is_some()
                {
                    prop.state = ProposalState::Rejected;
                    prop.reason = Some(LIMIT_EXCEEDED.to_owned());
                    if let Some(j) = &self.journal {
                        j.append(Family::Proposals, &*prop)?;
                    }
                    auto_rejected.push(prop.proposal_id.clone());
                }
            }
            (profile, warning, auto_rejected)
        };
        Ok(LimitsResponse {
            profile,
            warning,
            auto_rejected,
            token: self.issue_token(&user.username)?,
        })
    }

    /// Entry point for the dosage algorithm. Proposals outside the limits are
    /// stored already rejected and never reach the physician.
    pub fn propose_adjustment(&self, req: &ProposalRequest) -> ApiResult<AdjustmentProposal> {
        let now = self.now();
        let mut state = self.state.lock();
        let profile = state.profile(&req.patient_id)?.clone();
        if !positive(req.volume_ml) || !positive(req.rate_ml_h) {
            return Err(ApiError::BadRequest("invalid_proposal"));
        }
        let violates = check_limits(req.volume_ml, req.rate_ml_h, &profile).is_some();
        let seq = state.proposals.len() as u64 + 1;
        let proposal = AdjustmentProposal {
            proposal_id: format!("prop-{seq}"),
            patient_id: req.patient_id.clone(),
            proposed_volume_ml: req.volume_ml,
            proposed_rate_ml_h: req.rate_ml_h,
            state: if violates {
                ProposalState::Rejected
            } else {
                ProposalState::Pending
            },
            decided_by: None,
            reason: violates.then(|| LIMIT_EXCEEDED.to_owned()),
            base_version: state.active_version(&req.patient_id),
            created_at: now,
            seq,
        };
        self.persist(Family::Proposals, &proposal)?;
        state.proposals.push(proposal.clone());
        Ok(proposal)
    }

    pub fn decide_adjustment(
        &self,
        token: &str,
        proposal_id: &str,
        req: &DecisionRequest,
    ) -> ApiResult<DecisionResponse> {
        let user = self.authenticate(token)?;
        let (proposal, active) = {
            let mut state = self.state.lock();
            let idx = state
                .proposals
                .iter()
                .position(|p| p.proposal_id == proposal_id)
                .ok_or(ApiError::NotFound("unknown_proposal"))?;
            let patient_id = state.proposals[idx].patient_id.clone();
            state.require_physician_of(&user, &patient_id)?;
            if !state.proposals[idx].is_pending() {
                return Err(ApiError::Conflict("already_decided"));
            }
            match req.decision {
                Decision::Reject => {
                    let p = &mut state.proposals[idx];
                    p.state = ProposalState::Rejected;
                    p.decided_by = Some(user.username.clone());
                    self.persist(Family::Proposals, &*p)?;
                }
                Decision::Approve => {
                    if state.active_version(&patient_id) != state.proposals[idx].base_version {
                        return Err(ApiError::Conflict("stale_proposal"));
                    }
                    let (volume, rate) = {
                        let p = &state.proposals[idx];
                        (p.proposed_volume_ml, p.proposed_rate_ml_h)
                    };
                    if check_limits(volume, rate, state.profile(&patient_id)?).is_some() {
                        let p = &mut state.proposals[idx];
                        p.state = ProposalState::Rejected;
                        p.reason = Some(LIMIT_EXCEEDED.to_owned());
                        self.persist(Family::Proposals, &*p)?;
                        return Err(ApiError::Conflict(LIMIT_EXCEEDED));
                    }
                    self.activate(&mut state, &patient_id, volume, rate)?;
                    let p = &mut state.proposals[idx];
                    p.state = ProposalState::Approved;
                    p.decided_by = Some(user.username.clone());
                    self.persist(Family::Proposals, &*p)?;
                }
            }
            let active = state.active(&patient_id).map(InfusionIndex::from);
            (state.proposals[idx].clone(), active)
        };
        Ok(DecisionResponse {
            proposal,
            active,
            token: self.issue_token(&user.username)?,
        })
    }

    // ---- inspection and maintenance ----

    pub fn active_prescription(&self, patient_id: &str) -> Option<Prescription> {
        self.state.lock().active(patient_id).cloned()
    }

    pub fn profile(&self, patient_id: &str) -> Option<PatientProfile> {
        self.state.lock().profiles.get(patient_id).cloned()
    }

    pub fn proposals(&self, patient_id: &str) -> Vec<AdjustmentProposal> {
        Self::proposals_of(&self.state.lock(), patient_id)
    }

    pub fn user(&self, username: &str) -> Option<UserAccount> {
        self.state.lock().users.get(username).cloned()
    }

    pub fn export_state(&self) -> StateSnapshot {
        self.state.lock().snapshot()
    }

    /// Drops tokens that expired more than one TTL ago, so a late presenter
    /// still gets `token_expired` rather than `token_invalid`.
    pub fn purge_expired_tokens(&self) -> usize {
        self.tokens.purge_expired(self.now() - self.tokens.ttl())
    }

    /// Compacts the journal to current state. Called on clean shutdown.
    pub fn write_snapshot(&self) -> std::io::Result<()> {
        let Some(j) = &self.journal else {
            return Ok(());
        };
        let state = self.state.lock();
        let snap = state.snapshot();
        j.rewrite(Family::Users, &snap.users)?;
        j.rewrite(Family::Devices, &snap.devices)?;
        j.rewrite(Family::Profiles, &snap.profiles)?;
        j.rewrite(Family::Prescriptions, &snap.prescriptions)?;
        j.rewrite(Family::Proposals, &snap.proposals)?;
        j.rewrite(Family::Records, &snap.records)?;
        if self.config.persist_tokens {
            let now = self.now();
            let live: Vec<_> = self.tokens.snapshot().into_iter().filter(|t| t.is_live(now)).collect();
            j.rewrite(Family::Tokens, &live)?;
        }
        Ok(())
    }

    /// Usernames of all registered accounts.
    pub fn usernames(&self) -> HashSet<String> {
        self.state.lock().users.keys().cloned().collect()
    }
}
