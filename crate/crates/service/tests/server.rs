use std::net::TcpStream;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use twistarm::collision::{min_arm_distance, ArmSkeleton};
use twistarm::teleop::read_trace;
use twistarm_service::headless::run_headless;
use twistarm_service::protocol::ClientMessage;
use twistarm_service::server::{spawn, ServerHandle};
use twistarm_service::session::{Mode, SessionConfig};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

const PATIENCE: Duration = Duration::from_secs(30);

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn config() -> SessionConfig {
    let mut c = SessionConfig::new(Mode::Interactive, scenarios().join("reference.toml"));
    c.listen = "127.0.0.1:0".into();
    c.tick_rate = 400.0;
    c
}

fn connect(server: &ServerHandle) -> Client {
    let (ws, _) = tungstenite::connect(format!("ws://{}/", server.local_addr())).expect("connects");
    if let MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    }
    ws
}

fn next_json(ws: &mut Client) -> Value {
    loop {
        match ws.read().expect("server keeps talking") {
            Message::Text(t) => return serde_json::from_str(t.as_str()).expect("valid json"),
            Message::Close(_) => panic!("server closed the connection"),
            _ => {}
        }
    }
}

fn wait_for(ws: &mut Client, what: &str, pred: impl Fn(&Value) -> bool) -> Value {
    let start = Instant::now();
    while start.elapsed() < PATIENCE {
        let v = next_json(ws);
        if pred(&v) {
            return v;
        }
    }
    panic!("timed out waiting for {what}");
}

fn is_snapshot(v: &Value) -> bool {
    v["type"] == "snapshot"
}

fn send(ws: &mut Client, v: Value) {
    ws.send(Message::text(v.to_string())).unwrap();
}

fn welcome(ws: &mut Client) -> String {
    let v = wait_for(ws, "welcome", |v| v["type"] == "welcome");
    assert_eq!(v["v"], 1);
    v["role"].as_str().unwrap().to_owned()
}

#[test]
fn first_client_operates_and_others_observe() {
    let server = spawn(&config()).unwrap();
    let mut a = connect(&server);
    assert_eq!(welcome(&mut a), "operator");
    let mut b = connect(&server);
    assert_eq!(welcome(&mut b), "observer");
    for ws in [&mut a, &mut b] {
        let first = wait_for(ws, "snapshot", is_snapshot)["tick"].as_u64().unwrap();
        let later = wait_for(ws, "later snapshot", |v| is_snapshot(v) && v["tick"].as_u64().unwrap() > first);
        assert_eq!(later["v"], 1);
    }
    drop((a, b));
    server.stop().unwrap();
}

#[test]
fn malformed_messages_get_an_error_frame() {
    let server = spawn(&config()).unwrap();
    let mut op = connect(&server);
    welcome(&mut op);
    for bad in [
        "not json".to_string(),
        json!({"type": "command", "v": 1}).to_string(),
        json!({"type": "control", "v": 9, "action": "reset"}).to_string(),
        json!({"type": "command", "v": 1, "position": [0, 0, 0], "orientation": [2, 0, 0, 0], "gripper": 0, "clutch": true}).to_string(),
    ] {
        op.send(Message::text(bad.clone())).unwrap();
        let err = wait_for(&mut op, "error frame", |v| v["type"] == "error");
        assert_eq!(err["v"], 1);
        assert!(!err["message"].as_str().unwrap().is_empty(), "{bad}");
    }
    // the session is still alive
    wait_for(&mut op, "snapshot", is_snapshot);
    drop(op);
    server.stop().unwrap();
}

#[test]
fn observers_are_read_only() {
    let server = spawn(&config()).unwrap();
    let mut op = connect(&server);
    welcome(&mut op);
    let mut obs = connect(&server);
    welcome(&mut obs);
    send(&mut obs, json!({"type": "control", "v": 1, "action": "reset"}));
    let err = wait_for(&mut obs, "error frame", |v| v["type"] == "error");
    assert!(err["message"].as_str().unwrap().contains("read-only"));
    // no reset happened: ticks keep growing for the operator
    let t = wait_for(&mut op, "snapshot", is_snapshot)["tick"].as_u64().unwrap();
    assert!(t > 0);
    drop((op, obs));
    server.stop().unwrap();
}

#[test]
fn operator_disconnect_releases_the_clutch() {
    let server = spawn(&config()).unwrap();
    let mut op = connect(&server);
    welcome(&mut op);
    let mut obs = connect(&server);
    welcome(&mut obs);
    let snap = wait_for(&mut op, "alignment", |v| is_snapshot(v) && v["phase"] == "align_left");
    // engage at the current slave pose
    let ee = &snap["left"]["ee"];
    let q = ee["orientation"].as_array().unwrap();
    send(
        &mut op,
        json!({"type": "command", "v": 1, "position": ee["position"], "orientation": [q[3], q[0], q[1], q[2]], "gripper": 0.0, "clutch": true}),
    );
    wait_for(&mut obs, "clutch engaged", |v| is_snapshot(v) && v["clutch"] == true);
    drop(op);
    wait_for(&mut obs, "clutch released", |v| is_snapshot(v) && v["clutch"] == false);
    // the operator seat is free again
    let mut next = connect(&server);
    assert_eq!(welcome(&mut next), "operator");
    drop((obs, next));
    server.stop().unwrap();
}

#[test]
fn snapshots_are_self_consistent() {
    let server = spawn(&config()).unwrap();
    let mut op = connect(&server);
    welcome(&mut op);
    for _ in 0..20 {
        let v = wait_for(&mut op, "snapshot", is_snapshot);
        let points = |arm: &str| -> Vec<nalgebra::Vector3<f64>> {
            serde_json::from_value(v[arm]["points"].clone()).unwrap()
        };
        let (l, r) = (points("left"), points("right"));
        let d = min_arm_distance(&ArmSkeleton::new(l.clone()), &ArmSkeleton::new(r), true).unwrap().d_min;
        assert!((d - v["metrics"]["d_min"].as_f64().unwrap()).abs() < 1e-9);
        let ee: Vec<f64> = serde_json::from_value(v["left"]["ee"]["position"].clone()).unwrap();
        assert!((nalgebra::Vector3::from_vec(ee) - l.last().unwrap()).norm() < 1e-9);
        assert_eq!(v["limits"]["d_thr"], 0.2);
    }
    drop(op);
    server.stop().unwrap();
}

#[test]
fn reset_restarts_the_world_deterministically() {
    let server = spawn(&config()).unwrap();
    let mut op = connect(&server);
    welcome(&mut op);
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("last_verdict");
        v
    };
    let at = |ws: &mut Client, tick: u64| strip(wait_for(ws, "tick", |v| is_snapshot(v) && v["tick"].as_u64() == Some(tick)));
    let first = at(&mut op, 30);
    wait_for(&mut op, "later", |v| is_snapshot(v) && v["tick"].as_u64().unwrap() > 60);
    send(&mut op, json!({"type": "control", "v": 1, "action": "reset"}));
    wait_for(&mut op, "restart", |v| is_snapshot(v) && v["tick"].as_u64().unwrap() < 30);
    let again = at(&mut op, 30);
    assert_eq!(first, again);
    drop(op);
    server.stop().unwrap();
}

#[test]
fn record_without_a_path_is_refused() {
    let server = spawn(&config()).unwrap();
    let mut op = connect(&server);
    welcome(&mut op);
    send(&mut op, json!({"type": "control", "v": 1, "action": "record", "enabled": true}));
    let err = wait_for(&mut op, "error frame", |v| v["type"] == "error");
    assert!(err["message"].as_str().unwrap().contains("record"));
    drop(op);
    server.stop().unwrap();
}

#[test]
fn recorded_session_replays_to_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config();
    cfg.record = Some(dir.path().join("session.trace"));
    cfg.metrics_out = Some(dir.path().join("live.csv"));
    let server = spawn(&cfg).unwrap();
    let mut op = connect(&server);
    welcome(&mut op);

    // drive the session with the golden operator, one command per snapshot
    let golden = read_trace(scenarios().join("reference_golden.trace")).unwrap();
    wait_for(&mut op, "alignment", |v| is_snapshot(v) && v["phase"] == "align_left");
    let mut pending = golden.iter();
    let mut finished = false;
    let start = Instant::now();
    while start.elapsed() < PATIENCE {
        let v = wait_for(&mut op, "snapshot", is_snapshot);
        if v["phase"] == "done" || v["phase"] == "aborted" {
            finished = true;
            break;
        }
        if let Some(cmd) = pending.next() {
            op.send(Message::text(ClientMessage::command(cmd).to_json())).unwrap();
        }
    }
    assert!(finished, "live session did not finish");
    drop(op);
    let summary = server.stop().unwrap();

    let recorded = read_trace(dir.path().join("session.trace")).unwrap();
    assert!(!recorded.is_empty());
    let mut replay = SessionConfig::new(Mode::Headless, scenarios().join("reference.toml"));
    replay.trace = cfg.record.clone();
    replay.metrics_out = Some(dir.path().join("replay.csv"));
    let run = run_headless(&replay).unwrap();
    assert_eq!(run.summary.ticks, summary.ticks);
    assert_eq!(run.summary.final_phase, summary.final_phase);
    let live = std::fs::read(dir.path().join("live.csv")).unwrap();
    let again = std::fs::read(dir.path().join("replay.csv")).unwrap();
    assert_eq!(live, again);
}
