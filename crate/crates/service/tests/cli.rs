use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use abm::datacollect::TableFrame;
use serde_json::Value;

fn abm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abm"))
        .args(args)
        .env_remove("ABM_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = abm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_echoes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f7");
    let stdout = ok(&["run", "flocking", "--steps", "20", "--seed", "7", "--out", p(&out)]);
    let echoed: Value = serde_json::from_str(&stdout).unwrap();
    let stored: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(echoed, stored);
    assert_eq!(stored["seed"], 7);
    assert_eq!(stored["steps"], 20);
    let params = &stored["params"];
    assert_eq!(params["min_dis"]["real"], 0.3);
    assert_eq!(params["coh_fac"]["real"], 0.05);
    assert_eq!(params["sep_fac"]["real"], 0.5);
    assert_eq!(params["aln_fac"]["real"], 0.35);
    assert_eq!(params["vis_range"]["real"], 2.0);
    assert_eq!(params["dt"]["real"], 0.1);
    assert_eq!(params["n_boids"]["int"], 200);
    assert_eq!(params["seed"]["int"], 7);
    for f in ["tapes/records.json", "tapes/agents.csv", "exports/plots.csv", "exports/plots.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn ising_run_has_magnetisation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cold");
    ok(&["run", "ising", "--param", "temp=0.1", "--steps", "200", "--out", p(&out)]);
    let t = TableFrame::from_csv(&std::fs::read_to_string(out.join("exports/plots.csv")).unwrap()).unwrap();
    let m = t.f64_column("magnetisation").unwrap();
    assert_eq!(m.len(), 201);
    assert!(m.iter().all(|x| (-1.0..=1.0).contains(x)));
    assert!(out.join("tapes/nodes.csv").is_file());
}

#[test]
fn usage_errors_exit_2() {
    let o = abm(&["run", "flocking", "--param", "bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("bogus") && e.contains("min_dis") && e.contains("vis_range"), "{e}");

    let o = abm(&["run", "boids"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schelling3d"));

    let o = abm(&["run", "flocking", "--param", "min_dis=abc"]);
    assert_eq!(o.status.code(), Some(2));

    let o = abm(&["run", "flocking", "--steps", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = abm(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let o = abm(&["export", "somewhere"]);
    assert_eq!(o.status.code(), Some(2), "a query flag is required");
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = abm(&["animate", p(&dir.path().join("missing"))]);
    assert_eq!(o.status.code(), Some(1));
    let o = abm(&["run", "flocking", "--steps", "1", "--config", p(&dir.path().join("nope.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn models_lists_gallery() {
    let s = ok(&["models"]);
    for m in ["flocking", "schelling3d", "ising", "min_alike", "temp"] {
        assert!(s.contains(m), "{m}");
    }
}

#[test]
fn export_queries() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("s");
    ok(&["run", "schelling3d", "--steps", "15", "--seed", "4", "--out", p(&run)]);

    let path = ok(&["export", p(&run), "--agent", "1"]);
    let t = TableFrame::from_csv(&std::fs::read_to_string(path.trim()).unwrap()).unwrap();
    assert_eq!(t.num_rows(), 16);
    assert!(t.column("mood").is_some());

    let path = ok(&["export", p(&run), "--counts", "happy,sad"]);
    let t = TableFrame::from_csv(&std::fs::read_to_string(path.trim()).unwrap()).unwrap();
    let (h, s) = (t.f64_column("happy").unwrap(), t.f64_column("sad").unwrap());
    assert_eq!(h.len(), 16);
    assert!(h.iter().zip(&s).all(|(a, b)| a + b == 200.0));

    let path = ok(&["export", p(&run), "--agent", "2", "--format", "json"]);
    assert!(path.trim().ends_with("agent_2.json"));
    let t = TableFrame::from_json(&std::fs::read_to_string(path.trim()).unwrap()).unwrap();
    assert_eq!(t.num_rows(), 16);

    let o = abm(&["export", p(&run), "--agent", "999"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("999"));

    let o = abm(&["export", p(&run), "--counts", "left"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn animate_and_rerun_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["run", "flocking", "--steps", "30", "--seed", "9", "--param", "n_boids=40", "--out", p(d)]);
        ok(&["animate", p(d), "--fps", "20"]);
        ok(&["animate", p(d), "--format", "frames"]);
    }
    for f in ["tapes/agents.csv", "exports/plots.csv", "tapes/records.json", "anim.gif", "frames/00030.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let n = std::fs::read_dir(a.join("frames")).unwrap().count();
    assert_eq!(n, 31);
    assert!(a.join("frames/00000.svg").is_file());

    // re-animating the same directory reproduces the file
    let first = std::fs::read(a.join("anim.gif")).unwrap();
    ok(&["animate", p(&a), "--fps", "20"]);
    assert_eq!(first, std::fs::read(a.join("anim.gif")).unwrap());
}

#[test]
fn schelling_projections_render() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("s");
    ok(&["run", "schelling3d", "--steps", "3", "--out", p(&run)]);
    let s = ok(&["animate", p(&run), "--projection", "xz", "--canvas", "120"]);
    assert!(s.contains("4 frames"), "{s}");
}

#[test]
fn config_file_replays_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["run", "ising", "--steps", "12", "--seed", "3", "--param", "n=80", "--param", "temp=1.5", "--out", p(&a)]);
    ok(&["run", "--config", p(&a.join("manifest.json")), "--out", p(&b)]);
    assert_eq!(
        std::fs::read(a.join("manifest.json")).unwrap(),
        std::fs::read(b.join("manifest.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("tapes/nodes.csv")).unwrap(),
        std::fs::read(b.join("tapes/nodes.csv")).unwrap()
    );

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"model": "schelling3d", "seed": 11, "steps": 4, "params": {"min_alike": 5}}"#).unwrap();
    let c = dir.path().join("c");
    let s = ok(&["run", "--config", p(&cfg), "--steps", "6", "--out", p(&c)]);
    let m: Value = serde_json::from_str(&s).unwrap();
    assert_eq!((m["seed"].as_u64(), m["steps"].as_u64()), (Some(11), Some(6)));
    assert_eq!(m["params"]["min_alike"]["int"], 5);
}

#[test]
fn default_out_dir_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_abm"))
        .args(["run", "schelling3d", "--steps", "2", "--seed", "5"])
        .env("ABM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("schelling3d-s5/manifest.json").is_file());
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn http_get(addr: &str, path: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    resp
}

#[test]
fn serve_healthz_and_bundle() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_abm"))
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let _server = Server(child);
    let addr = line
        .trim()
        .strip_prefix("serving on http://")
        .and_then(|s| s.strip_suffix('/'))
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .to_string();
    let r = http_get(&addr, "/healthz");
    assert!(r.starts_with("HTTP/1.1 200"), "{r}");
    assert!(r.ends_with("ok"), "{r}");
    let r = http_get(&addr, "/");
    assert!(r.starts_with("HTTP/1.1 200") && r.contains("<canvas"), "{r}");
}

#[test]
fn serve_on_busy_port_fails_clearly() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = abm(&["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("already in use"), "{}", stderr(&o));
}
