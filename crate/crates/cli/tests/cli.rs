//! End-to-end runs of the `crowdtone` binary.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_crowdtone"));
    // keep the caller's environment from leaking into the defaults
    for var in ["CROWDTONE_ADDR", "CROWDTONE_STORE", "CROWDTONE_URL", "CROWDTONE_TOKEN_FILE", "CROWDTONE_CORS"] {
        c.env_remove(var);
    }
    c
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn json_out(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn run(cmd: &mut Command) -> (i32, Value) {
    let out = cmd.output().unwrap();
    (out.status.code().unwrap(), json_out(&out))
}

fn simulate(seed: &str, iterations: &str) -> Command {
    let mut c = bin();
    c.args(["simulate", "--seed", seed, "--iterations", iterations])
        .arg("--emails")
        .arg(fixtures().join("emails"))
        .arg("--bots")
        .arg(fixtures().join("bots.json"));
    c
}

/// Compares against a checked-in file; `CROWDTONE_BLESS=1` rewrites it.
fn assert_golden(name: &str, actual: &Value) {
    let path = golden(name);
    let rendered = serde_json::to_string_pretty(actual).unwrap() + "\n";
    if std::env::var_os("CROWDTONE_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &rendered).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(rendered, expected, "output differs from {}", path.display());
}

#[test]
fn simulate_matches_golden_reports() {
    for (iterations, name) in [("2", "simulate-seed7-it2.json"), ("3", "simulate-seed7-it3.json")] {
        let (code, report) = run(&mut simulate("7", iterations));
        assert_eq!(code, 0);
        assert_golden(name, &report);
    }
}

#[test]
fn simulate_writes_report_file_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let (code, summary) = run(simulate("7", "2").arg("--out").arg(&out));
    assert_eq!(code, 0);
    assert_eq!(summary["emails"], 29);
    assert_eq!(summary["complete"], 29);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let (_, stdout_report) = run(&mut simulate("7", "2"));
    assert_eq!(written, stdout_report);
}

#[test]
fn simulate_via_http_equals_in_process() {
    let (_, local) = run(&mut simulate("11", "3"));
    let (code, remote) = run(simulate("11", "3").arg("--via-http"));
    assert_eq!(code, 0);
    assert_eq!(local, remote);
}

#[test]
fn two_hundred_bots_twice_identical() {
    let dir = tempfile::tempdir().unwrap();
    let bots: Vec<Value> = (0..200)
        .map(|i| {
            let verdict = match i % 3 {
                0 => json!({ "rule": "always_yes" }),
                1 => json!({ "rule": "always_no" }),
                _ => json!({ "rule": "keyword", "lexicon": "builtin" }),
            };
            let edit = match i % 4 {
                0 => json!({ "rule": "append_signoff" }),
                1 => json!({ "rule": "soften_exclamations" }),
                _ => json!({ "rule": "template_rewrite", "template": "Hi {recipient},\n\n{body}\n\nBest,\n{sender}" }),
            };
            json!({
                "worker_id": format!("crowd-{i:03}"),
                "approval_rating": 0.95 + (i % 5) as f64 / 100.0,
                "locale": "US",
                "verdict_rule": verdict,
                "edit_rule": edit,
                "latency_steps": i % 3,
            })
        })
        .collect();
    let roster = dir.path().join("bots.json");
    std::fs::write(&roster, serde_json::to_string(&bots).unwrap()).unwrap();

    let go = || {
        let out = bin()
            .args(["simulate", "--seed", "2024"])
            .arg("--emails")
            .arg(fixtures().join("emails"))
            .arg("--bots")
            .arg(&roster)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let first = go();
    assert_eq!(first, go());
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["aggregate"]["complete"], 29);
}

#[test]
fn store_submit_status_result_replay() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path();
    let email = fixtures().join("emails/01-opportunity.json");

    let (code, submitted) = run(bin().args(["submit", "--iterations", "3"]).arg("--file").arg(&email).arg("--store").arg(store));
    assert_eq!(code, 0);
    assert_eq!(submitted, json!({ "task_id": "ct-000001" }));

    // the store can also come from the environment
    let (code, second) = run(bin().arg("submit").arg("--file").arg(&email).env("CROWDTONE_STORE", store));
    assert_eq!(code, 0);
    assert_eq!(second["task_id"], "ct-000002");

    let (code, status) = run(bin().args(["status", "ct-000001"]).arg("--store").arg(store));
    assert_eq!(code, 0);
    assert_eq!(status["state"], "scaffolding");
    assert_eq!(status["completed"], 0);

    let (code, pending) = run(bin().args(["result", "ct-000001"]).arg("--store").arg(store));
    assert_eq!(code, 1);
    assert_eq!(pending["code"], "result_pending");

    let (code, unknown) = run(bin().args(["result", "ct-000404"]).arg("--store").arg(store));
    assert_eq!(code, 1);
    assert_eq!(unknown["code"], "unknown_task");

    let (code, report) = run(bin().arg("replay").arg("--store").arg(store));
    assert_eq!(code, 0);
    assert_eq!(report["pipelines"], 2);
    assert_eq!(report["last_seq"], 2);
}

#[test]
fn replay_reports_corrupt_logs() {
    let dir = tempfile::tempdir().unwrap();
    let email = fixtures().join("emails/01-opportunity.json");
    for _ in 0..3 {
        let (code, _) = run(bin().arg("submit").arg("--file").arg(&email).arg("--store").arg(dir.path()));
        assert_eq!(code, 0);
    }
    let log = dir.path().join("events.jsonl");
    let text = std::fs::read_to_string(&log).unwrap();
    let kept: Vec<&str> = text.lines().enumerate().filter(|(i, _)| *i != 1).map(|(_, l)| l).collect();
    std::fs::write(&log, kept.join("\n") + "\n").unwrap();

    let (code, err) = run(bin().arg("replay").arg("--store").arg(dir.path()));
    assert_eq!(code, 1);
    assert_eq!(err["code"], "corrupt_log");

    let (code, err) = run(bin().arg("replay").arg("--store").arg(dir.path().join("absent")));
    assert_eq!(code, 1);
    assert_eq!(err["code"], "store_error");
}

#[test]
fn invalid_input_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let (code, err) = run(bin().arg("submit").arg("--file").arg(&bad).arg("--store").arg(dir.path()));
    assert_eq!(code, 1);
    assert_eq!(err["code"], "invalid_input");

    let bodiless = dir.path().join("bodiless.json");
    std::fs::write(&bodiless, r#"{"subject": "no body"}"#).unwrap();
    let (code, err) = run(bin().arg("submit").arg("--file").arg(&bodiless).arg("--store").arg(dir.path()));
    assert_eq!(code, 1);
    assert_eq!(err["code"], "invalid_submission");

    let blank = dir.path().join("blank.json");
    std::fs::write(
        &blank,
        r#"{"sender_relationship":"a","recipient_relationship":"b","subject":" ","body":"x","context_note":"c"}"#,
    )
    .unwrap();
    let (code, err) = run(bin().arg("submit").arg("--file").arg(&blank).arg("--store").arg(dir.path()));
    assert_eq!(code, 1);
    assert_eq!(err["code"], "invalid_submission");

    let (code, err) = run(bin()
        .args(["simulate", "--bots", "/nonexistent/bots.json"])
        .arg("--emails")
        .arg(fixtures().join("emails")));
    assert_eq!(code, 1);
    assert_eq!(err["code"], "invalid_input");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["result"],
        vec!["status", "ct-000001", "--store", "a", "--url", "http://x"],
        vec!["simulate", "--emails", "e", "--bots", "b", "--iterations", "4"],
        vec!["frobnicate"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?} wrote to stdout");
    }
}

struct Server(Child, String);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(extra: &[&str]) -> Server {
    let mut child = bin()
        .args(["serve", "--addr", "127.0.0.1:0", "--log", "info"])
        .args(extra)
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let stderr = child.stderr.take().unwrap();
    let mut lines = BufReader::new(stderr).lines();
    let url = loop {
        let line = lines.next().expect("server exited before listening").unwrap();
        if let Some(rest) = line.split("listening on ").nth(1) {
            break rest.trim().to_string();
        }
    };
    // keep draining so the child never blocks on a full pipe
    std::thread::spawn(move || for _ in lines {});
    Server(child, url)
}

#[test]
fn serve_and_talk_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let server = serve(&["--store", dir.path().to_str().unwrap()]);
    let email = fixtures().join("emails/03-invoice-4411.json");

    let (code, sub) = run(bin().arg("submit").arg("--file").arg(&email).args(["--url", &server.1]));
    assert_eq!(code, 0, "{sub}");
    let id = sub["task_id"].as_str().unwrap().to_string();

    let (code, status) = run(bin().args(["status", &id, "--url", &server.1]));
    assert_eq!(code, 0);
    assert_eq!(status["state"], "scaffolding");

    let (code, pending) = run(bin().args(["result", &id, "--url", &server.1]));
    assert_eq!(code, 1);
    assert_eq!(pending["code"], "result_pending");

    let (code, unknown) = run(bin().args(["status", "ct-999999", "--url", &server.1]));
    assert_eq!(code, 1);
    assert_eq!(unknown["code"], "unknown_task");

    // the log written by the server replays cleanly
    let (code, report) = run(bin().arg("replay").arg("--store").arg(dir.path()));
    assert_eq!(code, 0);
    assert_eq!(report["pipelines"], 1);
}

#[test]
fn serve_with_token_file_requires_bearer() {
    let dir = tempfile::tempdir().unwrap();
    let tokens = dir.path().join("tokens");
    std::fs::write(&tokens, "# requesters\ns3cret\n").unwrap();
    let server = serve(&["--token-file", tokens.to_str().unwrap()]);
    let email = fixtures().join("emails/03-invoice-4411.json");

    let (code, err) = run(bin().arg("submit").arg("--file").arg(&email).args(["--url", &server.1]));
    assert_eq!(code, 1);
    assert_eq!(err["code"], "unauthorized");

    let (code, ok) = run(bin()
        .arg("submit")
        .arg("--file")
        .arg(&email)
        .args(["--url", &server.1])
        .env("CROWDTONE_TOKEN_FILE", &tokens));
    assert_eq!(code, 0, "{ok}");
}

#[test]
fn manual_clock_server_runs_a_remote_simulation() {
    let server = serve(&["--manual-clock"]);
    let (_, local) = run(&mut simulate("5", "2"));
    let (code, remote) = run(simulate("5", "2").args(["--via-http", "--url", &server.1]));
    assert_eq!(code, 0, "{remote}");
    assert_eq!(local, remote);
}
