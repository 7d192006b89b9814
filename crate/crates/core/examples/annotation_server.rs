//! The annotation HTTP service.
//!
//! Without arguments the example binds an ephemeral port, labels a word
//! through the API and shuts down. With `--serve` it keeps running on
//! port 8080 until Ctrl-C:
//!
//! ```bash
//! cargo run --example annotation_server
//! cargo run --example annotation_server -- --serve
//! curl 'http://127.0.0.1:8080/api/items/next?annotator=almaz&limit=2'
//! ```

use std::error::Error;
use std::net::SocketAddr;
use std::sync::{mpsc, Arc, RwLock};

use serde_json::{json, Value};
use wolgof::annotation::{server, AnnotationStore};

fn demo_store() -> Result<AnnotationStore, Box<dyn Error>> {
    let annotators: Vec<String> = ["almaz", "dawit", "hana"].map(String::from).to_vec();
    let mut store = AnnotationStore::in_memory(&annotators)?;
    store.import_words(["asa", "hintte", "kaallidi"], 1)?;
    Ok(store)
}

pub fn run() -> Result<(), Box<dyn Error>> {
    let shared = Arc::new(RwLock::new(demo_store()?));
    let (addr_tx, addr_rx) = mpsc::channel::<SocketAddr>();
    let (stop_tx, stop_rx) = mpsc::channel::<()>();
    let thread = std::thread::spawn(move || -> std::io::Result<()> {
        tokio::runtime::Runtime::new()?.block_on(server::serve(
            shared,
            "127.0.0.1:0".parse().expect("valid address"),
            move |addr| {
                let _ = addr_tx.send(addr);
            },
            async move {
                let _ = tokio::task::spawn_blocking(move || stop_rx.recv()).await;
            },
        ))
    });
    let base = format!("http://{}", addr_rx.recv()?);
    println!("serving on {base}");

    let next: Value = ureq::get(&format!("{base}/api/items/next?annotator=almaz&limit=1"))
        .call()?
        .body_mut()
        .read_json()?;
    println!("next for almaz: {next}");
    let id = next[0]["item_id"].as_str().unwrap_or_default().to_string();
    for (who, tag) in [("almaz", "wal"), ("dawit", "wal"), ("hana", "gof")] {
        let decision: Value = ureq::post(&format!("{base}/api/labels"))
            .send_json(json!({"item_id": id, "annotator": who, "tag": tag}))?
            .body_mut()
            .read_json()?;
        println!("{who} -> {tag}: status {}", decision["status"]);
    }
    let progress: Value = ureq::get(&format!("{base}/api/progress")).call()?.body_mut().read_json()?;
    println!("progress: {progress}");

    drop(stop_tx);
    thread.join().expect("server thread")?;
    Ok(())
}

fn serve_forever() -> Result<(), Box<dyn Error>> {
    let shared = Arc::new(RwLock::new(demo_store()?));
    tokio::runtime::Runtime::new()?.block_on(server::serve(
        shared,
        "127.0.0.1:8080".parse()?,
        |addr| println!("serving on http://{addr}, Ctrl-C to stop"),
        async {
            let _ = tokio::signal::ctrl_c().await;
        },
    ))?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    if std::env::args().any(|a| a == "--serve") {
        serve_forever()
    } else {
        run()
    }
}
