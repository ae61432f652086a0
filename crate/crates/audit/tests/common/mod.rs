#![allow(dead_code)]

#[path = "../../../core/tests/common/sem.rs"]
pub mod sem;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use causal_audit::gateway::{
    Gateway, ReplayBackend, RetryPolicy, ScriptedBackend, Sleeper, TranscriptStore,
};

pub const FIXTURE_MODEL: &str = "scripted-fixture";
pub const PFPH: &str = "percent fair or poor health";
pub const LE: &str = "life expectancy";
pub const FEI: &str = "food environment index";
pub const VCR: &str = "violent crime rate";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn counties_csv() -> Vec<u8> {
    std::fs::read(fixtures().join("counties_synthetic.csv")).unwrap()
}

pub fn scripted(store: TranscriptStore) -> Gateway {
    let backend = ScriptedBackend::load(&fixtures().join("script.json")).unwrap();
    Gateway::new(Arc::new(backend), store, FIXTURE_MODEL).with_retry(fast_retry(), Arc::new(RecordingSleeper::default()))
}

pub fn replay(store: TranscriptStore) -> Gateway {
    Gateway::new(Arc::new(ReplayBackend), store, FIXTURE_MODEL)
}

pub fn fast_retry() -> RetryPolicy {
    RetryPolicy { max_attempts: 5, base: Duration::from_millis(1), factor: 2.0 }
}

/// Records requested waits without sleeping.
#[derive(Default)]
pub struct RecordingSleeper {
    pub waits: Mutex<Vec<Duration>>,
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.waits.lock().unwrap().push(d);
    }
}

/// Minimal HTTP server answering each connection with the next queued
/// (status, body); the last entry repeats. Captures raw requests.
pub struct FakeLlm {
    pub addr: SocketAddr,
    pub requests: Arc<Mutex<Vec<String>>>,
}

impl FakeLlm {
    pub fn start(responses: Vec<(u16, String)>) -> FakeLlm {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = requests.clone();
        std::thread::spawn(move || {
            for (i, stream) in listener.incoming().enumerate() {
                let Ok(mut stream) = stream else { break };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut head = String::new();
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                    head.push_str(&line);
                }
                let mut body = vec![0; len];
                let _ = reader.read_exact(&mut body);
                head.push_str(&String::from_utf8_lossy(&body));
                seen.lock().unwrap().push(head);
                let (status, body) = responses[i.min(responses.len() - 1)].clone();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        FakeLlm { addr, requests }
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

pub fn chat_body(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}
