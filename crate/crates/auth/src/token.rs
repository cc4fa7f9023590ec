//! One-time-use, time-expiring tokens.
//!
//! A token authenticates exactly one request. It is valid on the half-open
//! window `[issued_at, expires_at)` and is burnt by the first successful
//! [`TokenStore::consume`]; the check and the burn happen under one lock so
//! concurrent presenters of the same value see exactly one success.

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Duration, Utc};
use parking_lot::{Mutex, RwLock};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::TokenError;

/// 256-bit token values.
pub const TOKEN_BYTES: usize = 32;
pub const DEFAULT_TTL_SECS: i64 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthToken {
    /// 64 lowercase hex characters.
    pub value: String,
    pub principal: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
    pub consumed: bool,
}

impl AuthToken {
    pub fn is_live(&self, now: DateTime<Utc>) -> bool {
        !self.consumed && now < self.expires_at
    }
}

pub fn generate_value() -> String {
    let mut bytes = [0u8; TOKEN_BYTES];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

#[derive(Debug)]
pub struct TokenStore {
    ttl: Duration,
    tokens: Mutex<HashMap<String, AuthToken>>,
    principals: RwLock<HashSet<String>>,
}

impl TokenStore {
    /// Panics if `ttl` is not strictly positive.
    pub fn new(ttl: Duration) -> Self {
        assert!(ttl > Duration::zero(), "token TTL must be positive");
        Self {
            ttl,
            tokens: Mutex::new(HashMap::new()),
            principals: RwLock::new(HashSet::new()),
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    /// Makes `principal` eligible for tokens.
    pub fn register_principal(&self, principal: impl Into<String>) {
        self.principals.write().insert(principal.into());
    }

    pub fn has_principal(&self, principal: &str) -> bool {
        self.principals.read().contains(principal)
    }

    pub fn issue(&self, principal: &str, now: DateTime<Utc>) -> Result<AuthToken, TokenError> {
        if !self.has_principal(principal) {
            return Err(TokenError::UnknownPrincipal(principal.to_owned()));
        }
        let mut tokens = self.tokens.lock();
        let value = loop {
            let v = generate_value();
            if !tokens.contains_key(&v) {
                break v;
            }
        };
        let token = AuthToken {
            value: value.clone(),
            principal: principal.to_owned(),
            issued_at: now,
            expires_at: now + self.ttl,
            consumed: false,
        };
        tokens.insert(value, token.clone());
        Ok(token)
    }

    /// Burns the token and returns its principal.
    pub fn consume(&self, value: &str, now: DateTime<Utc>) -> Result<String, TokenError> {
        self.consume_token(value, now).map(|t| t.principal)
    }

    /// As [`consume`](Self::consume) but returns the burnt token.
    pub fn consume_token(&self, value: &str, now: DateTime<Utc>) -> Result<AuthToken, TokenError> {
        let mut tokens = self.tokens.lock();
        let token = tokens.get_mut(value).ok_or(TokenError::Invalid)?;
        if token.consumed {
            return Err(TokenError::Reused);
        }
        if now >= token.expires_at {
            return Err(TokenError::Expired);
        }
        token.consumed = true;
        Ok(token.clone())
    }

    /// Drops every token with `expires_at <= now`.
    pub fn purge_expired(&self, now: DateTime<Utc>) -> usize {
        let mut tokens = self.tokens.lock();
        let before = tokens.len();
        tokens.retain(|_, t| t.expires_at > now);
        before - tokens.len()
    }

    pub fn len(&self) -> usize {
        self.tokens.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, value: &str) -> Option<AuthToken> {
        self.tokens.lock().get(value).cloned()
    }

    pub fn snapshot(&self) -> Vec<AuthToken> {
        let mut all: Vec<_> = self.tokens.lock().values().cloned().collect();
        all.sort_by(|a, b| a.issued_at.cmp(&b.issued_at).then_with(|| a.value.cmp(&b.value)));
        all
    }

    /// Loads previously persisted tokens; later entries win.
    pub fn restore(&self, tokens: impl IntoIterator<Item = AuthToken>) {
        let mut map = self.tokens.lock();
        for t in tokens {
            map.insert(t.value.clone(), t);
        }
    }
}

impl Default for TokenStore {
    fn default() -> Self {
        Self::new(Duration::seconds(DEFAULT_TTL_SECS))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Barrier};

    use chrono::TimeZone;

    use super::*;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
    }

    fn store() -> TokenStore {
        let s = TokenStore::default();
        s.register_principal("dev1");
        s
    }

    #[test]
    fn fresh_token_consumes_once() {
        let s = store();
        let tok = s.issue("dev1", t0()).unwrap();
        assert_eq!(
            s.consume(&tok.value, t0() + Duration::seconds(1)),
            Ok("dev1".to_owned())
        );
        assert_eq!(
            s.consume(&tok.value, t0() + Duration::seconds(2)),
            Err(TokenError::Reused)
        );
    }

    #[test]
    fn values_are_distinct_hex() {
        let s = store();
        let a = s.issue("dev1", t0()).unwrap();
        let b = s.issue("dev1", t0()).unwrap();
        assert_ne!(a.value, b.value);
        assert_eq!(a.value.len(), 64);
        assert!(a.value.bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f')));
    }

    #[test]
    fn expiry_is_issue_plus_ttl() {
        let tok = store().issue("dev1", t0()).unwrap();
        assert_eq!(tok.expires_at, t0() + Duration::seconds(300));
        assert!(!tok.consumed);
    }

    #[test]
    fn expiry_boundary_is_exclusive() {
        let s = store();
        let a = s.issue("dev1", t0()).unwrap();
        let b = s.issue("dev1", t0()).unwrap();
        let ttl = s.ttl();
        assert!(s.consume(&a.value, t0() + ttl - Duration::milliseconds(1)).is_ok());
        assert_eq!(s.consume(&b.value, t0() + ttl), Err(TokenError::Expired));
    }

    #[test]
    fn unknown_principal_and_value() {
        let s = store();
        assert_eq!(
            s.issue("ghost", t0()),
            Err(TokenError::UnknownPrincipal("ghost".into()))
        );
        assert_eq!(s.consume("deadbeef", t0()), Err(TokenError::Invalid));
    }

    #[test]
    fn purge_counts_and_spares_live_tokens() {
        let s = store();
        assert_eq!(s.purge_expired(t0()), 0);
        let short = TokenStore::new(Duration::seconds(10));
        short.register_principal("dev1");
        for _ in 0..3 {
            short.issue("dev1", t0()).unwrap();
        }
        let live: Vec<_> = (0..2)
            .map(|_| short.issue("dev1", t0() + Duration::seconds(5)).unwrap())
            .collect();
        assert_eq!(short.purge_expired(t0() + Duration::seconds(10)), 3);
        for tok in live {
            assert!(short.consume(&tok.value, t0() + Duration::seconds(11)).is_ok());
        }
    }

    #[test]
    fn purge_removes_token_expiring_now() {
        let s = store();
        let tok = s.issue("dev1", t0()).unwrap();
        assert_eq!(s.purge_expired(tok.expires_at), 1);
        assert_eq!(s.consume(&tok.value, tok.expires_at), Err(TokenError::Invalid));
    }

    #[test]
    fn concurrent_consumers_see_one_success() {
        let s = Arc::new(store());
        for _ in 0..20 {
            let tok = s.issue("dev1", t0()).unwrap();
            let barrier = Arc::new(Barrier::new(32));
            let handles: Vec<_> = (0..32)
                .map(|_| {
                    let s = Arc::clone(&s);
                    let v = tok.value.clone();
                    let barrier = Arc::clone(&barrier);
                    std::thread::spawn(move || {
                        barrier.wait();
                        s.consume(&v, t0())
                    })
                })
                .collect();
            let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
            assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
            assert!(results
                .iter()
                .filter(|r| r.is_err())
                .all(|r| *r == Err(TokenError::Reused)));
        }
    }

    #[test]
    fn snapshot_restores() {
        let s = store();
        let a = s.issue("dev1", t0()).unwrap();
        s.consume(&a.value, t0()).unwrap();
        let b = s.issue("dev1", t0()).unwrap();
        let other = store();
        other.restore(s.snapshot());
        assert_eq!(other.consume(&a.value, t0()), Err(TokenError::Reused));
        assert!(other.consume(&b.value, t0()).is_ok());
    }
}
