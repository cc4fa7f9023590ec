use chrono::{Duration, TimeZone, Utc};
use mediflow_auth::{TokenError, TokenStore};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Issue(i64),
    Consume(usize, i64),
    Purge(i64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0i64..2_000).prop_map(Op::Issue),
        (0usize..16, 0i64..2_000).prop_map(|(i, t)| Op::Consume(i, t)),
        (0i64..2_000).prop_map(Op::Purge),
    ]
}

proptest! {
    // consume never succeeds at or after expiry and never twice, whatever
    // purges are interleaved
    #[test]
    fn temporal_soundness(ops in proptest::collection::vec(op(), 1..60)) {
        let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let store = TokenStore::new(Duration::milliseconds(300));
        store.register_principal("dev1");
        let mut issued = Vec::new();
        let mut used = std::collections::HashSet::new();
        for op in ops {
            match op {
                Op::Issue(ms) => issued.push(store.issue("dev1", t0 + Duration::milliseconds(ms)).unwrap()),
                Op::Purge(ms) => { store.purge_expired(t0 + Duration::milliseconds(ms)); }
                Op::Consume(i, ms) => {
                    let Some(tok) = issued.get(i % issued.len().max(1)) else { continue };
                    let now = t0 + Duration::milliseconds(ms);
                    match store.consume(&tok.value, now) {
                        Ok(p) => {
                            prop_assert_eq!(p, "dev1");
                            prop_assert!(now < tok.expires_at);
                            prop_assert!(used.insert(tok.value.clone()));
                        }
                        Err(TokenError::Reused) => prop_assert!(used.contains(&tok.value)),
                        Err(_) => {}
                    }
                }
            }
        }
    }
}
