//! Mounts the simulation API inside a program, drives one session over
//! HTTP and prints the streamed frames.
//!
//! ```text
//! cargo run -p abm-service --example embedded_server          # scripted client
//! cargo run -p abm-service --example embedded_server -- hold  # keep serving
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use abm_service::api::{router, AppState, ServiceConfig};
use serde_json::Value;

fn request(addr: &str, method: &str, path: &str, body: &str) -> std::io::Result<String> {
    let mut s = TcpStream::connect(addr)?;
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    let mut resp = String::new();
    s.read_to_string(&mut resp)?;
    Ok(resp.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default())
}

/// Reads `n` `frame` events from the session stream.
fn frames(addr: &str, id: u64, n: usize) -> std::io::Result<Vec<Value>> {
    let mut s = TcpStream::connect(addr)?;
    write!(s, "GET /api/sessions/{id}/stream HTTP/1.1\r\nHost: {addr}\r\n\r\n")?;
    let mut out = Vec::new();
    let mut event = String::new();
    for line in BufReader::new(s).lines() {
        let line = line?;
        if let Some(e) = line.strip_prefix("event: ") {
            event = e.to_string();
        } else if let Some(d) = line.strip_prefix("data: ") {
            if event == "frame" {
                out.push(serde_json::from_str(d).map_err(std::io::Error::other)?);
                if out.len() == n {
                    break;
                }
            }
        }
    }
    Ok(out)
}

fn client(addr: &str) -> std::io::Result<()> {
    let info: Value = serde_json::from_str(&request(addr, "POST", "/api/sessions", r#"{"model": "ising", "seed": 3}"#)?)
        .map_err(std::io::Error::other)?;
    let id = info["id"].as_u64().unwrap_or_default();
    println!("session {id}: {} with controls {}", info["model"], info["controls"]);
    println!("set temp: {}", request(addr, "POST", &format!("/api/sessions/{id}/params"), r#"{"temp": 0.5}"#)?);
    request(addr, "POST", &format!("/api/sessions/{id}/run"), r#"{"frames": 20}"#)?;
    for f in frames(addr, id, 21)? {
        println!("tick {:>2}  magnetisation {:+.3}", f["tick"].as_u64().unwrap_or_default(), f["plots"]["magnetisation"].as_f64().unwrap_or(f64::NAN));
    }
    request(addr, "DELETE", &format!("/api/sessions/{id}"), "")?;
    Ok(())
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hold = std::env::args().nth(1).as_deref() == Some("hold");
    let state = AppState::new(ServiceConfig {
        step_delay: Duration::from_millis(if hold { 50 } else { 0 }),
        ..ServiceConfig::default()
    })?;
    let app = router(state.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?.to_string();
    let server = tokio::spawn(async move { axum::serve(listener, app).await });
    println!("serving on http://{addr}/");

    if hold {
        tokio::signal::ctrl_c().await?;
    } else {
        let a = addr.clone();
        tokio::task::spawn_blocking(move || client(&a)).await??;
    }
    state.shutdown();
    server.abort();
    Ok(())
}
