//! The annotation service over real HTTP on an ephemeral port.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::mpsc;
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use serde_json::{json, Value};
use wolgof::annotation::{server, AnnotationStore};

struct Server {
    base: String,
    stop: Option<mpsc::Sender<()>>,
    thread: Option<JoinHandle<()>>,
    agent: ureq::Agent,
}

impl Server {
    fn start(store: AnnotationStore) -> Self {
        let shared = Arc::new(RwLock::new(store));
        let (addr_tx, addr_rx) = mpsc::channel::<SocketAddr>();
        let (stop_tx, stop_rx) = mpsc::channel::<()>();
        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(1)
                .enable_all()
                .build()
                .unwrap();
            runtime
                .block_on(server::serve(
                    shared,
                    "127.0.0.1:0".parse().unwrap(),
                    move |bound| addr_tx.send(bound).unwrap(),
                    async move {
                        let _ = tokio::task::spawn_blocking(move || stop_rx.recv()).await;
                    },
                ))
                .unwrap();
        });
        let addr = addr_rx.recv().unwrap();
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Server {
            base: format!("http://{addr}"),
            stop: Some(stop_tx),
            thread: Some(thread),
            agent,
        }
    }

    fn get(&self, path: &str) -> (u16, Value) {
        let mut resp = self.agent.get(&format!("{}{path}", self.base)).call().unwrap();
        (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
    }

    fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let mut resp = self
            .agent
            .post(&format!("{}{path}", self.base))
            .send_json(body)
            .unwrap();
        (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
    }

    fn post_raw(&self, path: &str, body: &str) -> (u16, Value) {
        let mut resp = self
            .agent
            .post(&format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        drop(self.stop.take());
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn annotators() -> Vec<String> {
    ["ann-a", "ann-b", "ann-c"].map(String::from).to_vec()
}

fn store_with(path: &Path, words: &[&str]) -> AnnotationStore {
    let mut store = AnnotationStore::create(path, &annotators()).unwrap();
    store.import_words(words.iter().copied(), 1).unwrap();
    store
}

fn label(server: &Server, item: &str, annotator: &str, tag: &str) -> (u16, Value) {
    server.post(
        "/api/labels",
        &json!({"item_id": item, "annotator": annotator, "tag": tag}),
    )
}

#[test]
fn fresh_store_reports_zero_progress() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(store_with(&dir.path().join("s.jsonl"), &[]));
    let (status, body) = server.get("/api/progress");
    assert_eq!(status, 200);
    assert_eq!(body["total_items"], 0);
    assert_eq!(
        body["status_counts"],
        json!({"open": 0, "decided": 0, "needs_adjudication": 0})
    );
    let (status, body) = server.get("/api/disagreements");
    assert_eq!((status, body), (200, json!([])));
}

#[test]
fn labeling_split_and_adjudication() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let server = Server::start(store_with(&path, &["asa", "hintte", "kaallidi"]));

    let (status, items) = server.get("/api/items/next?annotator=ann-a&limit=10");
    assert_eq!(status, 200);
    let ids: Vec<String> = items
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["item_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids.len(), 3);
    assert_eq!(items[0]["word"], "asa");

    // Unanimous item.
    for a in annotators() {
        assert_eq!(label(&server, &ids[0], &a, "wal").0, 200);
    }
    // Three-way split.
    let (_, d) = label(&server, &ids[2], "ann-a", "wal");
    assert_eq!(d["status"], "open");
    label(&server, &ids[2], "ann-b", "gof");
    let (_, d) = label(&server, &ids[2], "ann-c", "wal-gof");
    assert_eq!(d["status"], "needs_adjudication");

    // Already-voted items drop out of the annotator's queue.
    let (_, items) = server.get("/api/items/next?annotator=ann-a");
    assert_eq!(items.as_array().unwrap().len(), 1);
    assert_eq!(items[0]["item_id"], ids[1].as_str());

    let (_, queue) = server.get("/api/disagreements");
    assert_eq!(queue.as_array().unwrap().len(), 1);
    assert_eq!(queue[0]["item_id"], ids[2].as_str());
    assert_eq!(queue[0]["word"], "kaallidi");
    assert_eq!(queue[0]["votes"].as_array().unwrap().len(), 3);

    let (_, progress) = server.get("/api/progress");
    assert_eq!(
        progress["status_counts"],
        json!({"open": 1, "decided": 1, "needs_adjudication": 1})
    );

    let (status, d) = server.post(
        "/api/adjudicate",
        &json!({"item_id": ids[2], "tag": "wal-gof", "adjudicator": "lead"}),
    );
    assert_eq!(status, 200);
    assert_eq!(d["status"], "decided");
    assert_eq!(d["outcome"], "wal-gof");
    let (_, queue) = server.get("/api/disagreements");
    assert_eq!(queue, json!([]));
    let (_, progress) = server.get("/api/progress");
    assert_eq!(progress["status_counts"]["decided"], 2);
    drop(server);

    // Every vote went to the log.
    let reopened = AnnotationStore::open(&path).unwrap();
    assert_eq!(reopened.records().len(), 6);
    assert_eq!(reopened.progress().decided, 2);
}

#[test]
fn invalid_requests_get_client_errors() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(store_with(&dir.path().join("s.jsonl"), &["asa"]));
    let (_, items) = server.get("/api/items/next?annotator=ann-a");
    let id = items[0]["item_id"].as_str().unwrap().to_string();

    let (status, body) = label(&server, &id, "ann-a", "amharic");
    assert_eq!(status, 400);
    assert_eq!(body["error"], "unknown_tag");

    let (status, body) = label(&server, "nope", "ann-a", "wal");
    assert_eq!(status, 404);
    assert_eq!(body["error"], "unknown_item");

    let (status, body) = label(&server, &id, "stranger", "wal");
    assert_eq!(status, 400);
    assert_eq!(body["error"], "unknown_annotator");

    assert_eq!(label(&server, &id, "ann-a", "wal").0, 200);
    let (status, body) = label(&server, &id, "ann-a", "gof");
    assert_eq!(status, 409);
    assert_eq!(body["error"], "duplicate_vote");
    let (status, _) = server.post(
        "/api/labels",
        &json!({"item_id": id, "annotator": "ann-a", "tag": "gof", "overwrite": true}),
    );
    assert_eq!(status, 200);

    let (status, body) = server.post(
        "/api/adjudicate",
        &json!({"item_id": id, "tag": "wal", "adjudicator": "lead"}),
    );
    assert_eq!(status, 409);
    assert_eq!(body["error"], "item_not_in_adjudication");

    let (status, body) = server.post_raw("/api/labels", "{not json");
    assert_eq!(status, 400);
    assert_eq!(body["error"], "bad_request");

    let (status, _) = server.get("/api/items/next");
    assert_eq!(status, 400);
    let (status, body) = server.get("/api/nowhere");
    assert_eq!(status, 404);
    assert_eq!(body["error"], "not_found");
}
