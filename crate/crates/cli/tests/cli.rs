use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

fn mediflow() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mediflow"));
    c.env_remove("MEDIFLOW_CONFIG").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    mediflow().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(run(&["serve", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["bench", "accuracy", "--runs", "many"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn inconsistent_config_exits_2() {
    let o = run(&[
        "device",
        "--username",
        "dev1",
        "--password",
        "pw",
        "--mac",
        "AA:BB:CC:DD:EE:01",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("--server"));
    assert_eq!(run(&["bench", "load", "--users", "2"]).status.code(), Some(2));
    assert_eq!(run(&["fleet", "--devices", "2"]).status.code(), Some(2));
    let o = run(&["bench", "accuracy", "--runs", "3", "--seeds", "1,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        run(&["bench", "accuracy", "--seeds", "1", "--format", "xml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["seed-data"]).status.code(), Some(2));
}

#[test]
fn unreachable_server_is_a_runtime_failure() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let url = format!("http://127.0.0.1:{port}");
    let o = run(&["bench", "load", "--server", &url, "--users", "1", "--duration", "1"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn accuracy_writes_rows_and_average() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("acc.csv");
    let o = run(&[
        "bench",
        "accuracy",
        "--volume",
        "2",
        "--rate",
        "4",
        "--seeds",
        "1,2,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5, "{csv}");
    assert!(lines[0].starts_with("volume_ml,rate_ml_h,experiment"));
    assert!(lines[1].starts_with("2,4,1,"));
    assert!(lines[4].starts_with("2,4,avg,"));

    let o = run(&["bench", "accuracy", "--seeds", "1,2,3", "--format", "json"]);
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_env_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("run.toml");
    std::fs::write(
        &toml,
        "volume_ml = 5.0\nrate_ml_h = 5.0\nseeds = [1, 2]\nzero_noise = true\n",
    )
    .unwrap();

    let o = mediflow()
        .env("MEDIFLOW_CONFIG", &toml)
        .args(["bench", "accuracy", "--format", "json"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["volume_ml"], 5.0);
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);

    let o = mediflow()
        .env("MEDIFLOW_CONFIG", &toml)
        .args(["bench", "accuracy", "--format", "json", "--seeds", "9", "--rate", "4"])
        .output()
        .unwrap();
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["rate_ml_h"], 4.0);
    assert_eq!(json["volume_ml"], 5.0);
    assert_eq!(json["rows"][0]["seed"], 9);

    let js = dir.path().join("run.json");
    std::fs::write(&js, r#"{"volume_ml": 2.0, "seeds": [4], "password": "hunter2"}"#).unwrap();
    let o = run(&["--config", js.to_str().unwrap(), "bench", "accuracy"]);
    assert!(o.status.success());
    let err = stderr(&o);
    assert!(err.contains("\"seeds\":[4]"), "{err}");
    assert!(!err.contains("hunter2"));

    std::fs::write(&toml, "volume = 5.0\n").unwrap();
    let o = run(&["--config", toml.to_str().unwrap(), "bench", "accuracy"]);
    assert_eq!(o.status.code(), Some(2));
}

fn start_server(data: &Path) -> (Child, String) {
    let mut child = mediflow()
        .args(["serve", "--port", "0", "--data-dir", data.to_str().unwrap()])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let url = line.trim().strip_prefix("listening on ").expect(&line).to_owned();
    (child, url)
}

fn terminate(mut child: Child) {
    let status = Command::new("kill")
        .args(["-TERM", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(child.wait().unwrap().success());
}

#[test]
fn seed_serve_device_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = run(&["seed-data", "--data-dir", data.to_str().unwrap(), "--devices", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        run(&["seed-data", "--data-dir", data.to_str().unwrap()]).status.code(),
        Some(1)
    );

    let (server, url) = start_server(&data);
    let trace = dir.path().join("trace.csv");
    let o = run(&[
        "device",
        "--server",
        &url,
        "--username",
        "dev2",
        "--password",
        "pw",
        "--mac",
        "AA:BB:CC:DD:EE:02",
        "--seed",
        "3",
        "--trace-out",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["phase"], "completed");
    assert_eq!(summary["record_posted"], true);
    let delivered = summary["delivered_volume_ml"].as_f64().unwrap();
    assert!((delivered - 2.0).abs() < 0.25);
    assert!(std::fs::read_to_string(&trace)
        .unwrap()
        .starts_with("t_s,drop_volume_ul,cumulative_ml\n"));

    let o = run(&[
        "device",
        "--server",
        &url,
        "--username",
        "dev1",
        "--password",
        "pw",
        "--mac",
        "AA:BB:CC:DD:EE:09",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["fault"], "device_not_registered");
    assert_eq!(summary["drops"], 0);

    let o = run(&["fleet", "--server", &url, "--devices", "2", "--zero-noise"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fleet: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(fleet.as_array().unwrap().len(), 2);

    terminate(server);
    let records = std::fs::read_to_string(data.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 3, "{records}");
    assert!(records
        .lines()
        .any(|l| l.contains("\"patient_id\":\"p2\"") && l.contains(&delivered.to_string())));

    let (server, url) = start_server(&data);
    let o = run(&[
        "bench",
        "load",
        "--server",
        &url,
        "--users",
        "2",
        "--duration",
        "1",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let load: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(load["total_requests"].as_u64().unwrap() > 0);
    assert_eq!(load["error_count"], 0);
    terminate(server);
}
