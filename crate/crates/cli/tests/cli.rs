use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

fn hsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsim")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(hsim(&["gen", "--seed", "1", "--out", "a"], tmp.path()).status.success());
    assert!(hsim(&["forge", "gen", "--seed", "1", "--out", "b"], tmp.path()).status.success());
    let a = read_tree(&tmp.path().join("a"));
    assert_eq!(a.len(), 61);
    assert_eq!(a, read_tree(&tmp.path().join("b")));
    assert!(hsim(&["gen", "--seed", "2", "--out", "c"], tmp.path()).status.success());
    assert_ne!(a, read_tree(&tmp.path().join("c")));
}

#[test]
fn seed_is_mandatory() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(!hsim(&["gen", "--out", "a"], tmp.path()).status.success());
    assert!(hsim(&["gen", "--seed", "3", "--out", "s", "--category", "ideal", "--count", "2"], tmp.path())
        .status
        .success());
    let o = hsim(&["run", "--suite", "s", "--archive", "arch", "--planner", "gt"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
}

#[test]
fn run_replay_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(hsim(&["gen", "--seed", "5", "--out", "suite", "--count", "2"], dir).status.success());
    std::fs::write(
        dir.join("config.json"),
        r#"{"suite": "suite", "archive": "archive", "planner": "scripted", "trials": 2, "seed": 9}"#,
    )
    .unwrap();
    let o = hsim(&["bench", "run", "--config", "config.json"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("Ran."));
    let line = text.lines().find(|l| l.starts_with("archive: ")).unwrap();
    let archive = dir.join(line.trim_start_matches("archive: "));
    assert_eq!(archive.parent().unwrap(), dir.join("archive"));

    let o = hsim(&["replay", "--archive", archive.to_str().unwrap()], dir);
    assert!(o.status.success());
    assert!(stdout(&o).contains("replayed 24 episodes: 0 diffs"));

    let episode = std::fs::read_dir(archive.join("episodes")).unwrap().next().unwrap().unwrap().path();
    let o = hsim(&["bench", "replay", "--trace", episode.to_str().unwrap()], dir);
    assert!(o.status.success());

    let csv = stdout(&hsim(&["report", "--archive", archive.to_str().unwrap(), "--format", "csv"], dir));
    assert_eq!(csv, std::fs::read_to_string(archive.join("report.csv")).unwrap());

    // Same config again: same content-addressed directory, same report bytes.
    let before = std::fs::read(archive.join("report.json")).unwrap();
    let o = hsim(&["run", "--config", "config.json"], dir);
    assert!(o.status.success());
    assert_eq!(std::fs::read(archive.join("report.json")).unwrap(), before);

    // A flag override changes the config hash.
    let o = hsim(&["run", "--config", "config.json", "--planner", "random", "--trials", "1"], dir);
    assert!(o.status.success());
    let other =
        dir.join(stdout(&o).lines().find(|l| l.starts_with("archive: ")).unwrap().trim_start_matches("archive: "));
    assert_ne!(other, archive);
    let cmp = hsim(&["report", "--compare", other.to_str().unwrap(), archive.to_str().unwrap()], dir);
    assert!(cmp.status.success());
    assert!(stdout(&cmp).starts_with("Δ (random → scripted)"));

    // Tampering with a stored trace makes replay fail.
    let stored = std::fs::read_to_string(&episode).unwrap();
    std::fs::write(&episode, stored.replacen("\"t\":1,", "\"t\":2,", 1)).unwrap();
    assert_eq!(hsim(&["replay", "--archive", archive.to_str().unwrap()], dir).status.code(), Some(1));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), r#"{"suite": "s", "archive": "a", "planner": "gt", "colour": 1}"#)
        .unwrap();
    let o = hsim(&["run", "--config", "c.json", "--seed", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn aborted_episodes_fail_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(hsim(&["gen", "--seed", "3", "--out", "s", "--category", "ideal", "--count", "1"], dir).status.success());
    let dead = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("external:http://{}/", dead.local_addr().unwrap());
    drop(dead);
    let o = hsim(&["run", "--suite", "s", "--archive", "a", "--planner", &url, "--seed", "1", "--trials", "1"], dir);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("Aborted episodes"));
}

#[test]
fn verify_reports_the_failing_step() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(hsim(&["gen", "--seed", "3", "--out", "s", "--category", "ideal", "--count", "1"], dir).status.success());
    let file = dir.join("s/tasks/ideal-00.json");
    assert!(hsim(&["forge", "verify", "--task", file.to_str().unwrap()], dir).status.success());
    let mut task: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    task["gt_plan"].as_array_mut().unwrap().swap(0, 1);
    std::fs::write(&file, task.to_string()).unwrap();
    let o = hsim(&["verify", "--task", file.to_str().unwrap()], dir);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAILED"));
}

fn stub(body: &'static str) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
            let mut req = vec![0; len];
            let _ = reader.read_exact(&mut req);
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    url
}

#[test]
fn probe_echoes_the_parsed_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let url = stub(r#"{"plan": ["open the microwave", "close the microwave"]}"#);
    let o = hsim(&["probe", "--url", &url], tmp.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.starts_with("health OK"));
    assert!(text.contains("1. open the microwave") && text.contains("2. close the microwave"));

    let bad = stub(r#"{"plan": ["levitate the kettle"]}"#);
    let o = hsim(&["probe", "--url", &bad], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("health FAILED"));
}
