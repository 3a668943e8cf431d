use std::io::Write;
use std::net::TcpStream;

use phyq::files::{generate_task_set, ObservationFrame, TaskSet};
use phyq::server::{Client, Envelope, RunningServer, Server, ServerConfig, PROTOCOL_VERSION};
use phyq_core::game::{replay, Action, EpisodeOutcome};
use phyq_core::taskgen::find_template;
use serde_json::{json, Value};

fn tasks() -> TaskSet {
    let t = ["1.1", "3.1", "12.1"].map(|id| find_template(id).unwrap());
    generate_task_set(&t, 3, 21).unwrap()
}

fn start(max_sessions: usize) -> (RunningServer, TaskSet) {
    let set = tasks();
    let server = Server::bind(&ServerConfig { addr: "127.0.0.1:0".into(), max_sessions }, set.clone()).unwrap();
    (server.spawn().unwrap(), set)
}

fn load(c: &mut Client, template: &str, index: u32) -> u64 {
    let r = c.request("LoadTask", None, json!({ "template_id": template, "index": index })).unwrap();
    assert_eq!(r.kind, "LoadTask", "{r:?}");
    r.session.unwrap()
}

fn act(c: &mut Client, s: u64, a: &Action) -> Envelope {
    c.request("Act", Some(s), serde_json::to_value(a).unwrap()).unwrap()
}

#[test]
fn hello_negotiates_the_version() {
    let (srv, _) = start(4);
    let mut c = Client::connect(srv.addr).unwrap();
    let r = c.request("Hello", None, json!({ "versions": [PROTOCOL_VERSION, 99] })).unwrap();
    assert_eq!(r.payload["version"], PROTOCOL_VERSION);
    let r = c.request("Hello", None, json!({ "version": 99 })).unwrap();
    assert_eq!(r.error_code(), Some("version"));
    srv.stop().unwrap();
}

#[test]
fn reference_shot_passes_a_direct_task() {
    let (srv, set) = start(4);
    let mut c = Client::connect(srv.addr).unwrap();
    let s = load(&mut c, "1.1", 0);
    let task = set.get("1.1", 0).unwrap();
    let r = act(&mut c, s, &task.reference_solution[0]);
    assert_eq!(r.kind, "EpisodeEnd");
    assert_eq!(r.payload["result"], "passed");
    assert_eq!(r.payload["outcome"]["passed"], true);
    srv.stop().unwrap();
}

#[test]
fn two_clients_play_concurrently_without_interference() {
    let (srv, set) = start(8);
    let addr = srv.addr;
    let handles: Vec<_> = [("3.1", 1u32), ("12.1", 2u32)]
        .into_iter()
        .map(|(t, i)| {
            let task = set.get(t, i).unwrap().clone();
            std::thread::spawn(move || {
                let mut c = Client::connect(addr).unwrap();
                let mut results = Vec::new();
                for _ in 0..3 {
                    let s = load(&mut c, &task.template_id, task.index);
                    let mut last = None;
                    for a in &task.reference_solution {
                        last = Some(act(&mut c, s, a));
                    }
                    let end = last.unwrap();
                    assert_eq!(end.kind, "EpisodeEnd");
                    assert_eq!(end.session, Some(s));
                    let outcome: EpisodeOutcome = serde_json::from_value(end.payload["outcome"].clone()).unwrap();
                    results.push(outcome);
                }
                (task, results)
            })
        })
        .collect();
    for h in handles {
        let (task, results) = h.join().unwrap();
        let expect = replay(&task.level, &task.reference_solution).unwrap();
        for r in results {
            assert_eq!(r, expect);
        }
    }
    srv.stop().unwrap();
}

#[test]
fn malformed_and_unknown_messages_keep_the_connection() {
    let (srv, _) = start(4);
    let mut c = Client::connect(srv.addr).unwrap();
    let s = load(&mut c, "3.1", 0);
    assert_eq!(c.request_raw(b"{not json").unwrap().error_code(), Some("malformed"));
    assert_eq!(c.request_raw(&[0xff, 0xfe]).unwrap().error_code(), Some("malformed"));
    assert_eq!(c.request("TapNow", Some(s), json!({})).unwrap().error_code(), Some("unknown_type"));
    assert_eq!(c.request("Act", Some(s), json!({ "oops": 1 })).unwrap().error_code(), Some("bad_request"));
    assert_eq!(
        c.request("Act", Some(777), json!({ "release": {"x": -1.0, "y": 0.0} })).unwrap().error_code(),
        Some("no_session")
    );
    let r = c.request("GetObservation", Some(s), json!({ "kind": "symbolic" })).unwrap();
    assert_eq!(r.kind, "GetObservation", "session survives");
    srv.stop().unwrap();
}

#[test]
fn acting_after_the_end_is_an_error() {
    let (srv, set) = start(4);
    let mut c = Client::connect(srv.addr).unwrap();
    let s = load(&mut c, "1.1", 1);
    let a = set.get("1.1", 1).unwrap().reference_solution[0];
    assert_eq!(act(&mut c, s, &a).kind, "EpisodeEnd");
    assert_eq!(act(&mut c, s, &a).error_code(), Some("episode_over"));
    assert_eq!(c.request("Reset", Some(s), json!({})).unwrap().kind, "Reset");
    assert_eq!(act(&mut c, s, &a).kind, "EpisodeEnd");
    srv.stop().unwrap();
}

#[test]
fn transcript_replays_to_the_same_outcome() {
    let (srv, set) = start(4);
    let mut c = Client::connect(srv.addr).unwrap();
    let s = load(&mut c, "12.1", 0);
    // A miss first, then whatever is left of the reference.
    let mut end = act(&mut c, s, &Action::new(phyq_core::math::Vec2::new(-0.5, -1.0)));
    for a in &set.get("12.1", 0).unwrap().reference_solution {
        if end.kind == "EpisodeEnd" {
            break;
        }
        end = act(&mut c, s, a);
    }
    assert_eq!(end.kind, "EpisodeEnd");
    let t = &end.payload["transcript"];
    let actions: Vec<Action> = serde_json::from_value(t["actions"].clone()).unwrap();
    let task = set.get(t["template_id"].as_str().unwrap(), t["index"].as_u64().unwrap() as u32).unwrap();
    let outcome: EpisodeOutcome = serde_json::from_value(end.payload["outcome"].clone()).unwrap();
    assert_eq!(replay(&task.level, &actions).unwrap(), outcome);
    srv.stop().unwrap();
}

#[test]
fn observations_and_plans_have_their_documented_shape() {
    let (srv, _) = start(4);
    let mut c = Client::connect(srv.addr).unwrap();
    let s = load(&mut c, "3.1", 2);
    for kind in ["image", "symbolic", "tensor"] {
        let r = c.request("GetObservation", Some(s), json!({ "kind": kind })).unwrap();
        let f: ObservationFrame = serde_json::from_value(r.payload).unwrap();
        match (kind, f) {
            ("symbolic", ObservationFrame::Symbolic { frame }) => {
                assert!(frame.objects.iter().any(|o| o.object_class == "pig"));
            }
            ("image", ObservationFrame::Image { .. }) | ("tensor", ObservationFrame::Tensor { .. }) => {}
            (k, f) => panic!("{k}: {f:?}"),
        }
    }
    let r = c.request("PlanTrajectory", Some(s), json!({ "target": { "x": 40.0, "y": 3.0 } })).unwrap();
    let arcs = r.payload["arcs"].as_array().unwrap();
    assert_eq!(arcs.len(), 2);
    assert_eq!(arcs[0]["arc"], "low");
    let r = c.request("PlanTrajectory", Some(s), json!({ "target": { "x": 83.0, "y": 47.0 }, "speed": 5.0 })).unwrap();
    assert_eq!(r.error_code(), Some("unreachable"));
    let r = c.request("PlanTrajectory", Some(s), json!({ "release": { "x": -1.4, "y": -1.4 } })).unwrap();
    assert!(r.payload["path"].as_array().unwrap().len() > 10);
    let r = c
        .request(
            "Act",
            Some(s),
            json!({ "release": { "x": -1.9, "y": -0.3 }, "observe": ["symbolic"], "frames_hz": 10.0 }),
        )
        .unwrap();
    assert!(r.kind == "StepResult" || r.kind == "EpisodeEnd");
    assert_eq!(r.payload["observations"].as_array().unwrap().len(), 1);
    assert!(!r.payload["flight_frames"].as_array().unwrap().is_empty());
    srv.stop().unwrap();
}

#[test]
fn session_limit_is_enforced_and_released_on_disconnect() {
    let (srv, _) = start(2);
    let mut a = Client::connect(srv.addr).unwrap();
    load(&mut a, "3.1", 0);
    load(&mut a, "3.1", 1);
    let mut b = Client::connect(srv.addr).unwrap();
    let r = b.request("LoadTask", None, json!({ "template_id": "3.1", "index": 0 })).unwrap();
    assert_eq!(r.error_code(), Some("session_limit"));
    drop(a);
    let mut ok = false;
    for _ in 0..100 {
        std::thread::sleep(std::time::Duration::from_millis(20));
        let r = b.request("LoadTask", None, json!({ "template_id": "3.1", "index": 0 })).unwrap();
        if r.kind == "LoadTask" {
            ok = true;
            break;
        }
    }
    assert!(ok);
    srv.stop().unwrap();
}

#[test]
fn set_speed_throttles_to_the_multiplier() {
    let (srv, set) = start(2);
    let mut c = Client::connect(srv.addr).unwrap();
    let s = load(&mut c, "1.1", 0);
    let r = c.request("SetSpeed", Some(s), json!({ "multiplier": 50.0 })).unwrap();
    assert_eq!(r.payload["multiplier"], 50.0);
    assert_eq!(c.request("SetSpeed", Some(s), json!({ "multiplier": -1 })).unwrap().error_code(), Some("bad_request"));
    let t0 = std::time::Instant::now();
    let end = act(&mut c, s, &set.get("1.1", 0).unwrap().reference_solution[0]);
    let wall = t0.elapsed().as_secs_f64();
    let sim = end.payload["simulated_seconds"].as_f64().unwrap();
    assert!(wall >= sim / 50.0 * 0.99, "wall {wall} sim {sim}");
    assert!(wall < sim / 50.0 + 0.5);
    srv.stop().unwrap();
}

#[test]
fn oversized_frame_is_answered_then_closed() {
    let (srv, _) = start(2);
    let mut s = TcpStream::connect(srv.addr).unwrap();
    s.write_all(&(u32::MAX).to_be_bytes()).unwrap();
    let body = phyq::server::read_frame(&mut s).unwrap().unwrap();
    let e: Envelope = serde_json::from_slice(&body).unwrap();
    assert_eq!(e.error_code(), Some("frame_too_large"));
    assert!(phyq::server::read_frame(&mut s).unwrap().is_none());
    srv.stop().unwrap();
}

#[test]
fn websocket_transport_speaks_the_same_protocol() {
    use tungstenite::Message;
    let (srv, _) = start(2);
    let stream = TcpStream::connect(srv.addr).unwrap();
    let (mut ws, _) = tungstenite::client(format!("ws://{}/", srv.addr), stream).unwrap();
    let send = |ws: &mut tungstenite::WebSocket<TcpStream>, v: Value| -> Envelope {
        ws.send(Message::text(v.to_string())).unwrap();
        loop {
            if let Message::Text(t) = ws.read().unwrap() {
                return serde_json::from_str(t.as_str()).unwrap();
            }
        }
    };
    assert_eq!(send(&mut ws, json!({ "type": "Hello", "payload": { "version": 1 } })).kind, "Hello");
    let r = send(&mut ws, json!({ "type": "LoadTask", "payload": { "template_id": "3.1", "index": 0 } }));
    let s = r.session.unwrap();
    let r = send(&mut ws, json!({ "type": "GetObservation", "session": s, "payload": { "kind": "symbolic" } }));
    assert_eq!(r.payload["kind"], "symbolic");
    ws.send(Message::text("garbage")).unwrap();
    let r = loop {
        if let Message::Text(t) = ws.read().unwrap() {
            break serde_json::from_str::<Envelope>(t.as_str()).unwrap();
        }
    };
    assert_eq!(r.error_code(), Some("malformed"));
    let _ = ws.close(None);
    srv.stop().unwrap();
}

#[test]
fn shutdown_completes_with_idle_connections_open() {
    let (srv, _) = start(2);
    let mut c = Client::connect(srv.addr).unwrap();
    load(&mut c, "3.1", 0);
    let t0 = std::time::Instant::now();
    srv.stop().unwrap();
    assert!(t0.elapsed().as_secs_f64() < 2.0);
    assert!(c.request("Hello", None, json!({})).is_err());
}

#[test]
fn bind_failure_is_reported() {
    let (srv, set) = start(1);
    let err = Server::bind(&ServerConfig { addr: srv.addr.to_string(), max_sessions: 1 }, set);
    assert!(matches!(err, Err(phyq::server::ServerError::Bind { .. })));
    srv.stop().unwrap();
}
