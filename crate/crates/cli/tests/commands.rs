use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use kbqa_core::model::{CellValue, Value};
use kbqa_core::store::{read_documents, write_documents};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> PathBuf {
    root().join("fixtures").join(name)
}

fn kbqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbqa"))
        .args(args)
        .env_remove("KBQA_KB_DIR")
        .env_remove("KBQA_WEIGHTS")
        .env_remove("KBQA_PORT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Compares against `tests/golden/<name>`; set `KBQA_UPDATE_GOLDEN=1` to rewrite.
fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("KBQA_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "golden {name} differs");
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stats_prints_table_row() {
    let dir = fixture("scenario2");
    let out = kbqa(&["stats", path_str(&dir), "--qa-count", "776"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("Compr1 10.63")));
    golden("scenario2_stats.txt", &text);
    // Falls back to meta.json when no count is given.
    assert_eq!(stdout(&kbqa(&["stats", path_str(&dir)])), text);
}

#[test]
fn stats_without_any_count_is_an_environment_failure() {
    let out = kbqa(&["stats", path_str(&fixture("fig6"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("qa-count"));
}

#[test]
fn validate_pristine_fixtures() {
    for name in ["fig2", "fig5", "fig6", "fig7", "scenario1", "scenario2", "scenario3"] {
        let out = kbqa(&["validate", path_str(&fixture(name))]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        assert_eq!(stdout(&out), "0 violations\n");
    }
}

#[test]
fn validate_reports_violations_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut docs = read_documents(&fixture("fig6")).unwrap();
    docs.entities[0].instance_of = "NoSuchClass".into();
    write_documents(&docs, dir.path()).unwrap();
    let out = kbqa(&["validate", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("NoSuchClass"));
    assert!(text.trim_end().ends_with("violations") && !text.contains("0 violations"));

    let json = kbqa(&["validate", path_str(dir.path()), "--json"]);
    let parsed: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert!(!parsed.as_array().unwrap().is_empty());
}

#[test]
fn missing_or_broken_directory_exits_two() {
    let out = kbqa(&["ask", "/definitely/not/here", "优惠券"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    write_documents(&read_documents(&fixture("fig6")).unwrap(), dir.path()).unwrap();
    std::fs::write(dir.path().join("values.json"), "{").unwrap();
    assert_eq!(kbqa(&["validate", path_str(dir.path())]).status.code(), Some(2));
    assert_eq!(
        kbqa(&["stats", path_str(dir.path()), "--qa-count", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn ask_conjunction_matches_golden_in_both_locales() {
    let dir = fixture("fig6");
    let q = "优惠券和单品宝能不能一起使用";
    let zh = kbqa(&["ask", path_str(&dir), q]);
    assert_eq!(zh.status.code(), Some(0));
    golden("fig6_ask_zh.txt", &stdout(&zh));
    let en = kbqa(&["ask", path_str(&dir), q, "--locale", "en"]);
    let text = stdout(&en);
    golden("fig6_ask_en.txt", &text);
    assert!(text.contains("[YES]"));
    let steps: Vec<&str> = text.lines().skip_while(|l| *l != "explanation:").skip(1).collect();
    assert_eq!(steps.iter().filter(|l| l.contains("is a kind of")).count(), 2);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = fixture("fig7");
    for q in ["双十一的活动规则", "618", "怎么参加双十一的淘抢购"] {
        let a = kbqa(&["ask", path_str(&dir), q]);
        let b = kbqa(&["ask", path_str(&dir), q]);
        assert_eq!(a.stdout, b.stdout, "{q}");
    }
    golden(
        "fig7_activity_rules.txt",
        &stdout(&kbqa(&["ask", path_str(&dir), "双十一的活动规则"])),
    );
    golden("fig7_618.txt", &stdout(&kbqa(&["ask", path_str(&dir), "618"])));
}

#[test]
fn json_output_has_http_shape() {
    let out = kbqa(&[
        "ask",
        path_str(&fixture("fig6")),
        "优惠券和单品宝能不能一起使用",
        "--json",
        "--debug",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "answered");
    assert_eq!(v["answer"]["kind"], "table_answer");
    assert_eq!(v["debug"]["kb_version"], 1);
    for key in ["status", "answer", "recommendations", "debug"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn unanswerable_question_exits_one() {
    // The floor-price table defaults `participated_goods` to true; with every
    // row flipped to false no row can survive the filter.
    let dir = tempfile::tempdir().unwrap();
    let mut docs = read_documents(&fixture("fig7")).unwrap();
    for v in &mut docs.values {
        if let Value::CvtTable { rows, .. } = &mut v.value {
            for row in rows {
                if let Some(cell) = row.cells.get_mut("participated_goods") {
                    *cell = CellValue::Boolean(false);
                }
            }
        }
    }
    write_documents(&docs, dir.path()).unwrap();
    let out = kbqa(&["ask", path_str(dir.path()), "淘抢购是否计入双十一最低价"]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(1), "{text}");
    assert!(text.starts_with("status: no_match\nanswer: none ("), "{text}");
}

#[test]
fn weights_file_is_honoured_and_bad_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.json");
    std::fs::write(&weights, r#"{"property_score": 2.0}"#).unwrap();
    let kb = fixture("fig6");
    let q = "优惠券和单品宝能不能一起使用";
    let out = kbqa(&["ask", path_str(&kb), q, "--weights", path_str(&weights)]);
    assert_eq!(out.status.code(), Some(0));
    std::fs::write(&weights, r#"{"property_score": "x"}"#).unwrap();
    let out = kbqa(&["ask", path_str(&kb), q, "--weights", path_str(&weights)]);
    assert_eq!(out.status.code(), Some(2));
    let with_env = |args: &[&str], key: &str, value: &Path| {
        Command::new(env!("CARGO_BIN_EXE_kbqa"))
            .args(args)
            .env_remove("KBQA_KB_DIR")
            .env_remove("KBQA_WEIGHTS")
            .env(key, value)
            .output()
            .unwrap()
    };
    let env = with_env(&["ask", path_str(&kb), q], "KBQA_WEIGHTS", &weights);
    assert_eq!(env.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&env.stderr).contains("w.json"));
    let env = with_env(&["validate"], "KBQA_KB_DIR", &kb);
    assert_eq!(env.status.code(), Some(0));
    assert_eq!(stdout(&env), "0 violations\n");
}

#[test]
fn repl_keeps_one_session() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_kbqa"))
        .args(["repl", path_str(&fixture("fig7"))])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all("淘抢购是什么\n\n你好\nquit\n双十一的活动规则\n".as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let turns: Vec<&str> = text.split("\n\n").filter(|t| !t.is_empty()).collect();
    assert_eq!(turns.len(), 2, "{text}");
    assert!(turns[0].starts_with("status: answered"));
    assert!(turns[1].contains("recommendations:\n  1. 淘抢购"), "{}", turns[1]);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(kbqa(&[]).status.code(), Some(2));
    assert_eq!(kbqa(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn serve_answers_healthz() {
    use std::io::Read;
    use std::net::{TcpListener, TcpStream};
    use std::time::{Duration, Instant};

    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_kbqa"))
        .args(["serve", path_str(&fixture("fig6"))])
        .env("KBQA_PORT", port.to_string())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let mut body = String::new();
    while Instant::now() < deadline {
        if let Ok(mut stream) = TcpStream::connect(("127.0.0.1", port)) {
            stream
                .write_all(b"GET /healthz HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
                .unwrap();
            body.clear();
            stream.read_to_string(&mut body).unwrap();
            if body.starts_with("HTTP/1.1 200") {
                break;
            }
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains(r#"{"status":"ok","kb_version":1}"#), "{body}");
}
