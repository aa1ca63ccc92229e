//! Wire-protocol tests against a scripted local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use voxagent::agent::{
    run_episode, Backends, EnvInfoSet, EpisodeConfig, EpisodeVerdict, FailureKind, Parser, PlanInput, Planner,
    RemoteParser, RemotePlanner, SubObjective, WorldSetup,
};
use voxagent::bench::find_task;
use voxagent::memory::KnowledgeStore;
use voxagent::observation::{Brightness, EntryKind, Frame, FrameEntry, Scene, StatusObservation, VoxelNeighborhood};
use voxagent::percipient::{
    BackendConfig, BackendError, Category, FallbackPercipient, FallbackPolicy, Percipient, Query, RemotePercipient,
    Verdict,
};
use voxagent::world::{Biome, BlockKind, GenConfig, Inventory, Item, RecipeBook, TimeOfDay, Weather, WorldProfile};

#[derive(Clone)]
struct Scripted {
    status: u16,
    body: String,
    delay: Duration,
}

fn ok(body: &str) -> Scripted {
    Scripted {
        status: 200,
        body: serde_json::json!({ "answer": body }).to_string(),
        delay: Duration::ZERO,
    }
}

/// Records `(path, body)` of every request and answers with `reply`.
struct MockServer {
    url: String,
    requests: Arc<Mutex<Vec<(String, serde_json::Value)>>>,
}

impl MockServer {
    fn start(reply: Scripted) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = requests.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let reply = reply.clone();
                let seen = seen.clone();
                thread::spawn(move || serve(stream, &reply, &seen));
            }
        });
        MockServer { url, requests }
    }

    fn config(&self) -> BackendConfig {
        let mut c = BackendConfig::new(self.url.clone());
        c.timeout_ms = 2_000;
        c.fallback = FallbackPolicy::Fail;
        c
    }

    fn hits(&self) -> Vec<(String, serde_json::Value)> {
        self.requests.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, reply: &Scripted, seen: &Mutex<Vec<(String, serde_json::Value)>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut length = 0usize;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).unwrap();
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).unwrap();
    seen.lock()
        .unwrap()
        .push((path, serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null)));
    thread::sleep(reply.delay);
    let mut out = stream;
    let _ = write!(
        out,
        "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    );
}

fn frame() -> Frame {
    Frame {
        entries: vec![FrameEntry {
            kind: EntryKind::Mob,
            identity: "pig".into(),
            distance: 4.0,
            bearing: 3.0,
            elevation: 0.0,
        }],
        scene: Scene {
            biome: Biome::Plains,
            time: TimeOfDay::Day,
            weather: Weather::Sunny,
            brightness: Brightness::Sufficient,
            sky_visible: true,
        },
        tick_stamp: 7,
    }
}

#[test]
fn percipient_request_has_the_wire_shape() {
    let server = MockServer::start(ok("Yes, a pig is visible."));
    let p = RemotePercipient::new(&server.config());
    let q = Query::new(Category::Mob, "pig", vec![]);
    let a = p.answer(&q, &frame()).unwrap();
    assert_eq!(a.verdict, Verdict::Yes);
    let hits = server.hits();
    assert_eq!(hits.len(), 1);
    let (path, body) = &hits[0];
    assert_eq!(path, "/v1/percipient");
    assert_eq!(body["question"], q.text.as_str());
    assert_eq!(body["history"], serde_json::json!([]));
    assert_eq!(body["frame"], serde_json::from_str::<serde_json::Value>(&frame().to_json()).unwrap());
}

#[test]
fn scene_value_replies_are_normalized() {
    let server = MockServer::start(ok("Plains."));
    let p = RemotePercipient::new(&server.config());
    let a = p.answer(&Query::new(Category::Ecology, "", vec![]), &frame()).unwrap();
    assert_eq!(a.verdict, Verdict::Value("plains".into()));
}

#[test]
fn http_errors_surface_and_retry_counts_attempts() {
    let server = MockServer::start(Scripted {
        status: 500,
        body: "oops".into(),
        delay: Duration::ZERO,
    });
    let q = Query::new(Category::Mob, "pig", vec![]);
    let p = RemotePercipient::new(&server.config());
    assert_eq!(p.answer(&q, &frame()), Err(BackendError::Status(500)));
    assert_eq!(server.hits().len(), 1);

    let retry = FallbackPercipient::new(RemotePercipient::new(&server.config()), FallbackPolicy::Retry { attempts: 2 });
    assert_eq!(retry.answer(&q, &frame()), Err(BackendError::Status(500)));
    assert_eq!(server.hits().len(), 4);

    let oracle = FallbackPercipient::new(RemotePercipient::new(&server.config()), FallbackPolicy::Oracle);
    assert_eq!(oracle.answer(&q, &frame()).unwrap().verdict, Verdict::Yes);
}

#[test]
fn malformed_replies_are_reported() {
    let server = MockServer::start(Scripted {
        status: 200,
        body: "{\"text\": 1}".into(),
        delay: Duration::ZERO,
    });
    let p = RemotePercipient::new(&server.config());
    let r = p.answer(&Query::new(Category::Mob, "pig", vec![]), &frame());
    assert!(matches!(r, Err(BackendError::Malformed(_))), "{r:?}");
}

#[test]
fn slow_servers_time_out() {
    let server = MockServer::start(Scripted {
        delay: Duration::from_millis(800),
        ..ok("yes")
    });
    let mut cfg = server.config();
    cfg.timeout_ms = 150;
    let p = RemotePercipient::new(&cfg);
    let r = p.answer(&Query::new(Category::Mob, "pig", vec![]), &frame());
    assert_eq!(r, Err(BackendError::Timeout));
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut cfg = BackendConfig::new(format!("http://127.0.0.1:{port}"));
    cfg.timeout_ms = 500;
    let r = RemotePercipient::new(&cfg).answer(&Query::new(Category::Mob, "pig", vec![]), &frame());
    assert!(matches!(r, Err(BackendError::Transport(_))), "{r:?}");
}

#[test]
fn remote_parser_decodes_subobjectives() {
    let reply = r#"[{"description":"mine log","item":"log","count":1},{"description":"craft planks","item":"planks","count":4}]"#;
    let server = MockServer::start(ok(reply));
    let book = RecipeBook::standard();
    let p = RemoteParser::new(&server.config(), book.clone());
    let subs = p.parse(&find_task("planks").unwrap(), &KnowledgeStore::standard(&book)).unwrap();
    assert_eq!(subs.len(), 2);
    assert_eq!(subs[1].item(), Some((&Item::new("planks"), 4)));
    let (path, body) = &server.hits()[0];
    assert_eq!(path, "/v1/parse");
    assert!(body["messages"].as_array().is_some_and(|m| m.len() == 2));
}

#[test]
fn remote_parser_rejects_unknown_items() {
    let server = MockServer::start(ok(r#"[{"description":"get gold","item":"gold"}]"#));
    let book = RecipeBook::standard();
    let p = RemoteParser::new(&server.config(), book.clone());
    assert!(p.parse(&find_task("planks").unwrap(), &KnowledgeStore::standard(&book)).is_err());
}

#[test]
fn remote_planner_decodes_steps() {
    let reply = r#"[{"name":"Find","arguments":{"object":"log"}},{"name":"Mine","arguments":{"object":"log","tool":null}}]"#;
    let server = MockServer::start(ok(reply));
    let planner = RemotePlanner::new(&server.config());
    let status = StatusObservation {
        gps: [0.5, 60.0, 0.5],
        yaw: 0.0,
        pitch: 0.0,
        health: 20,
        inventory: Inventory::new(),
        equipment: None,
    };
    let cube = VoxelNeighborhood {
        cells: [[[BlockKind::Air; 3]; 3]; 3],
        mobs: Vec::new(),
    };
    let env = EnvInfoSet::default();
    let input = PlanInput {
        env_info: &env,
        status: &status,
        neighborhood: &cube,
        feedback: None,
        memory: None,
    };
    let sub = SubObjective::obtain("mine log", Item::new("log"), 1, 0);
    let seq = planner.plan(&sub, &input).unwrap();
    assert_eq!(seq.steps.len(), 2);
    assert_eq!(server.hits()[0].0, "/v1/plan");
}

#[test]
fn failing_backend_ends_the_episode_as_a_backend_error() {
    let server = MockServer::start(Scripted {
        status: 503,
        body: String::new(),
        delay: Duration::ZERO,
    });
    let be = Backends::remote(RecipeBook::standard(), &server.config());
    let cfg = EpisodeConfig::new(WorldSetup {
        seed: 0,
        profile: WorldProfile::Process,
        gen: GenConfig::default(),
    });
    let r = run_episode(&find_task("log").unwrap(), &cfg, &be);
    assert_eq!(r.verdict, EpisodeVerdict::Failure(FailureKind::BackendError));
}
