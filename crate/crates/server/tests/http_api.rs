use std::sync::Arc;

use mediflow_core::clock::SystemClock;
use mediflow_server::seed::seed_demo;
use mediflow_server::{ServerConfig, ServerHandle, Service};
use serde_json::{json, Value};

struct Client {
    agent: ureq::Agent,
    base: String,
}

impl Client {
    fn new(base: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent, base }
    }

    fn post(&self, path: &str, token: Option<&str>, body: Value) -> (u16, Value) {
        let mut req = self.agent.post(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send_json(body).unwrap();
        (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
    }

    fn get(&self, path: &str, token: Option<&str>) -> (u16, String) {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.call().unwrap();
        (resp.status().as_u16(), resp.body_mut().read_to_string().unwrap())
    }
}

fn start(config: ServerConfig) -> (ServerHandle, Client) {
    let svc = Service::in_memory(config, Arc::new(SystemClock));
    seed_demo(&svc, 2).unwrap();
    let handle = ServerHandle::start(Arc::new(svc), "127.0.0.1", 0, 2).unwrap();
    let client = Client::new(handle.base_url());
    (handle, client)
}

fn login_dev1(c: &Client) -> (u16, Value) {
    c.post(
        "/api/login",
        None,
        json!({"username": "dev1", "password": "pw", "mac": "AA:BB:CC:DD:EE:01"}),
    )
}

#[test]
fn device_flow_over_http() {
    let (_h, c) = start(ServerConfig::default());
    let (status, body) = login_dev1(&c);
    assert_eq!(status, 200);
    let keys: Vec<&str> = body.as_object().unwrap().keys().map(String::as_str).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(sorted, ["first_name", "institute", "last_name", "token"]);
    let t1 = body["token"].as_str().unwrap().to_owned();

    let (status, idx) = c.post("/api/index", Some(&t1), json!({"patient_id": "p1"}));
    assert_eq!(status, 200);
    assert_eq!(
        idx["infusion_index"],
        json!({"prescription_id": "rx-1", "version": 1, "volume_ml": 2.0, "rate_ml_h": 4.0})
    );
    let t2 = idx["token"].as_str().unwrap();
    assert_ne!(t2, t1);

    let (status, err) = c.post("/api/index", Some(&t1), json!({"patient_id": "p1"}));
    assert_eq!((status, err), (401, json!({"error": "token_reused"})));

    let (status, err) = c.post("/api/index", Some(t2), json!({"patient_id": "p2"}));
    assert_eq!((status, err), (403, json!({"error": "forbidden_patient"})));

    let (status, err) = c.post("/api/index", None, json!({"patient_id": "p1"}));
    assert_eq!((status, err), (401, json!({"error": "token_invalid"})));
}

#[test]
fn login_errors_over_http() {
    let (_h, c) = start(ServerConfig::default());
    let (status, err) = c.post(
        "/api/login",
        None,
        json!({"username": "dev1", "password": "pw", "mac": "AA:BB:CC:DD:EE:02"}),
    );
    assert_eq!((status, err), (403, json!({"error": "device_not_registered"})));
    let (status, err) = c.post(
        "/api/login",
        None,
        json!({"username": "dev1", "password": "bad", "mac": "AA:BB:CC:DD:EE:01"}),
    );
    assert_eq!((status, err), (401, json!({"error": "invalid_credentials"})));
    let (status, err) = c.post("/api/login", None, json!({"user": "dev1"}));
    assert_eq!((status, err), (400, json!({"error": "bad_request"})));
}

#[test]
fn short_ttl_expires_over_http() {
    let (_h, c) = start(ServerConfig {
        ttl_s: 1,
        ..ServerConfig::default()
    });
    let token = login_dev1(&c).1["token"].as_str().unwrap().to_owned();
    std::thread::sleep(std::time::Duration::from_millis(1100));
    let (status, err) = c.post("/api/index", Some(&token), json!({"patient_id": "p1"}));
    assert_eq!((status, err), (401, json!({"error": "token_expired"})));
    let token = login_dev1(&c).1["token"].as_str().unwrap().to_owned();
    assert_eq!(c.post("/api/index", Some(&token), json!({"patient_id": "p1"})).0, 200);
}

#[test]
fn physician_flow_over_http() {
    let (_h, c) = start(ServerConfig::default());
    let (_, body) = c.post("/api/login", None, json!({"username": "doc1", "password": "pw"}));
    let mut token = body["token"].as_str().unwrap().to_owned();

    let (status, prop) = c.post(
        "/api/proposals",
        None,
        json!({"patient_id": "p1", "volume_ml": 5.0, "rate_ml_h": 5.0}),
    );
    assert_eq!(status, 200);
    assert_eq!(prop["state"], "pending");
    let id = prop["proposal_id"].as_str().unwrap();

    let (status, resp) = c.post(
        &format!("/api/proposals/{id}/decision"),
        Some(&token),
        json!({"decision": "approve"}),
    );
    assert_eq!(status, 200);
    assert_eq!(resp["active"]["version"], 2);
    assert_eq!(resp["proposal"]["state"], "approved");
    token = resp["token"].as_str().unwrap().to_owned();

    let (status, err) = c.post(
        &format!("/api/proposals/{id}/decision"),
        Some(&token),
        json!({"decision": "reject"}),
    );
    assert_eq!((status, err), (409, json!({"error": "already_decided"})));

    let (_, body) = c.post("/api/login", None, json!({"username": "doc1", "password": "pw"}));
    token = body["token"].as_str().unwrap().to_owned();
    let (status, resp) = c.post(
        "/api/patients/p1/limits",
        Some(&token),
        json!({"max_volume_ml": 10.0, "max_rate_ml_h": 10.0}),
    );
    assert_eq!(status, 200);
    assert_eq!(resp["profile"]["max_volume_ml"], 10.0);
    token = resp["token"].as_str().unwrap().to_owned();

    let (status, text) = c.get("/api/patients/p1/status", Some(&token));
    assert_eq!(status, 200);
    let st: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(st["active"]["version"], 2);
    token = st["token"].as_str().unwrap().to_owned();

    let (status, text) = c.get("/api/patients/p1/history", Some(&token));
    assert_eq!(status, 200);
    let hist: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(hist["records"], json!([]));

    let (status, _) = c.get("/api/patients/p1/history", None);
    assert_eq!(status, 401);
}

#[test]
fn health_and_static_app() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>dash</h1>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let (_h, c) = start(ServerConfig {
        app_dir: Some(dir.path().to_owned()),
        ..ServerConfig::default()
    });
    let (status, text) = c.get("/health", None);
    assert_eq!(status, 200);
    assert_eq!(
        serde_json::from_str::<Value>(&text).unwrap(),
        json!({"status": "ok", "poll_interval_s": 60.0})
    );
    assert_eq!(c.get("/app/", None), (200, "<h1>dash</h1>".to_owned()));
    assert_eq!(c.get("/app", None), (200, "<h1>dash</h1>".to_owned()));
    assert_eq!(c.get("/app/app.js", None), (200, "console.log(1)".to_owned()));
    assert_eq!(c.get("/app/missing.css", None).0, 404);
    assert_eq!(c.get("/app/%2E%2E/secret", None).0, 404);
}

#[test]
fn clean_stop_writes_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServerConfig {
        data_dir: Some(dir.path().to_owned()),
        ..ServerConfig::default()
    };
    let svc = Service::open(config.clone(), Arc::new(SystemClock)).unwrap();
    seed_demo(&svc, 1).unwrap();
    let before = svc.export_state();
    let handle = ServerHandle::start(Arc::new(svc), "127.0.0.1", 0, 1).unwrap();
    handle.stop().unwrap();
    let users = std::fs::read_to_string(dir.path().join("users.jsonl")).unwrap();
    assert_eq!(users.lines().count(), 2);
    let after = Service::open(config, Arc::new(SystemClock)).unwrap().export_state();
    assert_eq!(before, after);
}
