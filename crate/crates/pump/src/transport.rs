//! How the device reaches the server.

use std::sync::Arc;
use std::time::Duration;

use mediflow_core::clock::ManualClock;
use mediflow_core::wire::{ErrorBody, IndexRequest, IndexResponse, LoginRequest, LoginResponse, TokenResponse};
use mediflow_core::{InfusionRecord, Timestamp};
use mediflow_server::{ApiError, Service};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// The server answered with an error status.
    #[error("{status} {code}")]
    Api { status: u16, code: String },
    #[error("server unreachable: {0}")]
    Unreachable(String),
}

impl TransportError {
    pub fn is_auth(&self) -> bool {
        matches!(self, TransportError::Api { status: 401, .. })
    }

    pub fn code(&self) -> &str {
        match self {
            TransportError::Api { code, .. } => code,
            TransportError::Unreachable(_) => "unreachable",
        }
    }
}

impl From<ApiError> for TransportError {
    fn from(e: ApiError) -> Self {
        TransportError::Api {
            status: e.status().as_u16(),
            code: e.code().to_owned(),
        }
    }
}

pub type TransportResult<T> = Result<T, TransportError>;

pub trait Transport {
    fn login(&mut self, req: &LoginRequest) -> TransportResult<LoginResponse>;
    fn index(&mut self, token: &str, patient_id: &str) -> TransportResult<IndexResponse>;
    fn record(&mut self, token: &str, record: &InfusionRecord) -> TransportResult<TokenResponse>;
    /// Told the device's current time before every call.
    fn sync(&mut self, _now: Timestamp) {}
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn login(&mut self, req: &LoginRequest) -> TransportResult<LoginResponse> {
        (**self).login(req)
    }
    fn index(&mut self, token: &str, patient_id: &str) -> TransportResult<IndexResponse> {
        (**self).index(token, patient_id)
    }
    fn record(&mut self, token: &str, record: &InfusionRecord) -> TransportResult<TokenResponse> {
        (**self).record(token, record)
    }
    fn sync(&mut self, now: Timestamp) {
        (**self).sync(now)
    }
}

/// Calls a [`Service`] in-process. With a clock attached, the service's
/// time follows the device's simulated time.
#[derive(Clone)]
pub struct LocalTransport {
    service: Arc<Service>,
    clock: Option<Arc<ManualClock>>,
}

impl LocalTransport {
    pub fn new(service: Arc<Service>) -> Self {
        Self { service, clock: None }
    }

    pub fn with_clock(service: Arc<Service>, clock: Arc<ManualClock>) -> Self {
        Self {
            service,
            clock: Some(clock),
        }
    }

    pub fn service(&self) -> &Arc<Service> {
        &self.service
    }
}

impl Transport for LocalTransport {
    fn login(&mut self, req: &LoginRequest) -> TransportResult<LoginResponse> {
        Ok(self.service.login(req)?)
    }

    fn index(&mut self, token: &str, patient_id: &str) -> TransportResult<IndexResponse> {
        let req = IndexRequest {
            patient_id: patient_id.to_owned(),
        };
        Ok(self.service.get_index(token, &req)?)
    }

    fn record(&mut self, token: &str, record: &InfusionRecord) -> TransportResult<TokenResponse> {
        Ok(self.service.record_infusion(token, record.clone())?)
    }

    fn sync(&mut self, now: Timestamp) {
        if let Some(clock) = &self.clock {
            clock.set(now);
        }
    }
}

/// Blocking HTTP client for the device API.
#[derive(Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
    base: String,
}

impl HttpTransport {
    pub fn new(base_url: &str) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(10))
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            agent,
            base: base_url.trim_end_matches('/').to_owned(),
        }
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, token: Option<&str>, body: &B) -> TransportResult<R> {
        let mut req = self.agent.post(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        if (200..300).contains(&status) {
            resp.body_mut()
                .read_json::<R>()
                .map_err(|e| TransportError::Unreachable(format!("bad response body: {e}")))
        } else {
            let code = resp
                .body_mut()
                .read_json::<ErrorBody>()
                .map(|b| b.error)
                .unwrap_or_else(|_| "unknown".to_owned());
            Err(TransportError::Api { status, code })
        }
    }
}

impl Transport for HttpTransport {
    fn login(&mut self, req: &LoginRequest) -> TransportResult<LoginResponse> {
        self.post("/api/login", None, req)
    }

    fn index(&mut self, token: &str, patient_id: &str) -> TransportResult<IndexResponse> {
        let req = IndexRequest {
            patient_id: patient_id.to_owned(),
        };
        self.post("/api/index", Some(token), &req)
    }

    fn record(&mut self, token: &str, record: &InfusionRecord) -> TransportResult<TokenResponse> {
        self.post("/api/infusions", Some(token), record)
    }
}
