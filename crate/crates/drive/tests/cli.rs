use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drive::io::write_ppm;
use drive::source::synthetic_frame;

fn drive() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_drive"));
    c.env_remove("DRIVE_SEED").env_remove("DRIVE_BROKER_ADDR");
    c
}

fn run(args: &[&str]) -> Output {
    drive().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// A port nothing listens on.
fn closed_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// Manifest of `n` synthetic PPM frames at 30 fps.
fn replay_fixture(dir: &Path, n: u64) -> PathBuf {
    let mut text = String::new();
    for i in 0..n {
        let name = format!("f{i:03}.ppm");
        write_ppm(&dir.join(&name), &synthetic_frame(i + 1, 0, 80, 60)).unwrap();
        text.push_str(&format!("{name}\t{}\n", i * 33_333_333));
    }
    let m = dir.join("manifest.tsv");
    std::fs::write(&m, text).unwrap();
    m
}

fn sha_line(o: &Output) -> String {
    let s = stdout(o);
    s.lines().find(|l| l.starts_with("frames=")).unwrap_or_else(|| panic!("no hash line in {s:?}")).to_string()
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    for sub in ["run", "replay", "bench", "eval", "sample", "worker-mock", "broker"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", stderr(&o));
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&["bench", "--no-such-flag"]).status.code(), Some(64));
    assert_eq!(run(&["bench", "--resolution", "640by480"]).status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&[]).status.code(), Some(64));
}

#[test]
fn missing_track_exits_3_and_names_the_path() {
    let o = run(&["run", "--track", "/nonexistent/track.json", "--duration", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("/nonexistent/track.json"), "{}", stderr(&o));
}

#[test]
fn occupied_port_exits_2() {
    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port().to_string();
    let o = run(&["run", "--console-port", &port, "--broker-listen", "127.0.0.1:0", "--duration", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run(&["worker-mock", "--listen", &format!("127.0.0.1:{port}"), "--duration", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unreachable_worker_exits_4() {
    let o = run(&["bench", "--frames", "3", "--stylizer", "remote", "--worker", &format!("127.0.0.1:{}", closed_port())]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn eval_failures_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.csv");
    let o = run(&[
        "eval",
        "--sessions",
        "/nonexistent",
        "--racing-line",
        fixture("eval/track.json").to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(5));
    // a session that never completes a lap
    let sessions = dir.path().join("s");
    std::fs::create_dir(&sessions).unwrap();
    std::fs::write(sessions.join("p1_A.csv"), "t_ns,x_m,y_m,speed_mps\n0,0,0,1\n10000000,0.1,0,1\n").unwrap();
    std::fs::write(sessions.join("p1_B.csv"), "t_ns,x_m,y_m,speed_mps\n0,0,0,1\n10000000,0.1,0,1\n").unwrap();
    let track = fixture("eval/track.json");
    let t = track.to_str().unwrap();
    let o = run(&["eval", "--sessions", sessions.to_str().unwrap(), "--racing-line", t, "--track", t, "--out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("p1_A"), "{}", stderr(&o));
}

#[test]
fn eval_writes_the_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let t = fixture("eval/track.json");
    let o = run(&[
        "eval",
        "--sessions",
        fixture("eval/sessions").to_str().unwrap(),
        "--racing-line",
        t.to_str().unwrap(),
        "--track",
        t.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("frechet_m"));
    let got = std::fs::read_to_string(&out).unwrap();
    let want = std::fs::read_to_string(fixture("eval/golden_report.csv")).unwrap();
    for (g, w) in got.lines().zip(want.lines()).skip(1) {
        let g: Vec<&str> = g.split(',').collect();
        let w: Vec<&str> = w.split(',').collect();
        assert_eq!(g[..2], w[..2]);
        for k in 2..4 {
            let (a, b): (f64, f64) = (g[k].parse().unwrap(), w[k].parse().unwrap());
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{g:?} vs {w:?}");
        }
    }
    assert_eq!(got.lines().count(), want.lines().count());
}

#[test]
fn bench_with_zero_frames_reports_nothing() {
    let o = run(&["bench", "--frames", "0", "--resolution", "64x64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["frames_out"], 0);
    assert!(v["p99_ms"].is_null());
}

#[test]
fn bench_writes_a_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bench.json");
    let o = run(&["bench", "--frames", "20", "--resolution", "64x64", "--report", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["frames"], 20);
    assert_eq!(v["frames_out"], 20);
    assert_eq!(v["dropped"], 0);
    assert_eq!((v["width"].as_u64(), v["height"].as_u64()), (Some(64), Some(64)));
    assert!(v["achieved_fps"].as_f64().unwrap() > 0.0);
    assert!(v["p99_ms"].as_f64().unwrap() >= v["p50_ms"].as_f64().unwrap());
}

#[test]
fn sample_picks_evenly_spaced_entries() {
    let dir = tempfile::tempdir().unwrap();
    let m = replay_fixture(dir.path(), 10);
    let out = dir.path().join("picked");
    let o = run(&["sample", "--manifest", m.to_str().unwrap(), "-k", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "sampled 5 of 10: 0,2,4,6,8");
    let listed = std::fs::read_to_string(out.join("manifest.tsv")).unwrap();
    assert_eq!(listed.lines().count(), 5);
    assert!(out.join("000004_f004.ppm").exists());
    let o = run(&["sample", "--manifest", m.to_str().unwrap(), "-k", "11", "--out", out.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn replay_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let m = replay_fixture(dir.path(), 12);
    let m = m.to_str().unwrap();
    let go = |seed: &str| run(&["replay", "--manifest", m, "--pacing", "lockstep", "--resolution", "64x64", "--seed", seed]);
    let (a, b, c) = (go("42"), go("42"), go("43"));
    for o in [&a, &b, &c] {
        assert_eq!(o.status.code(), Some(0), "{}", stderr(o));
    }
    assert_eq!(sha_line(&a), sha_line(&b));
    assert_ne!(sha_line(&a), sha_line(&c));
    assert!(sha_line(&a).starts_with("frames=12 "));

    // the seed can also come from the environment
    let e = drive().args(["replay", "--manifest", m, "--pacing", "lockstep", "--resolution", "64x64"]).env("DRIVE_SEED", "43").output().unwrap();
    assert_eq!(sha_line(&e), sha_line(&c));
}

#[test]
fn replay_writes_styled_frames() {
    let dir = tempfile::tempdir().unwrap();
    let m = replay_fixture(dir.path(), 4);
    let out = dir.path().join("styled");
    let o = run(&["replay", "--manifest", m.to_str().unwrap(), "--pacing", "lockstep", "--resolution", "64x64", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for id in 1..=4 {
        let f = drive::io::read_ppm(&out.join(format!("{id:06}.ppm")), id, 0, "t").unwrap();
        assert_eq!((f.width(), f.height()), (64, 64));
    }
}

fn autopilot(dir: &Path, extra: &[&str]) -> (Output, String) {
    let traj = dir.join(format!("traj{}.csv", extra.join("_").replace(['-', ' '], "")));
    let track = fixture("eval/track.json");
    let mut args = vec![
        "run",
        "--autopilot",
        "--track",
        track.to_str().unwrap(),
        "--resolution",
        "64x64",
        "--broker-listen",
        "127.0.0.1:0",
        "--console-port",
        "0",
        "--trajectory",
        traj.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    (o, std::fs::read_to_string(traj).unwrap())
}

#[test]
fn autopilot_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, ta) = autopilot(dir.path(), &["--seed", "7"]);
    let (b, tb) = autopilot(dir.path(), &["--seed", "7", "--laps", "2"]);
    assert_eq!(sha_line(&a), sha_line(&b));
    assert_eq!(ta, tb);
    assert!(ta.starts_with("t_ns,x_m,y_m,speed_mps\n"));
    let (c, tc) = autopilot(dir.path(), &["--seed", "8"]);
    assert_ne!(sha_line(&a), sha_line(&c));
    assert_eq!(ta, tc);
}

#[test]
fn no_enhance_passes_frames_through() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = autopilot(dir.path(), &["--no-enhance", "--laps", "1"]);
    let err = stderr(&o);
    let line = err.lines().find(|l| l.starts_with("frames in=")).unwrap();
    let field = |k: &str| -> u64 {
        line.split_whitespace().find_map(|w| w.strip_prefix(k)).unwrap().parse().unwrap()
    };
    assert!(field("out=") > 0);
    assert_eq!(field("passthrough="), field("out="));
    assert_eq!(field("dropped="), 0);
}

#[test]
fn worker_mock_serves_bench() {
    let port = closed_port();
    let addr = format!("127.0.0.1:{port}");
    let mut w = drive().args(["worker-mock", "--listen", &addr, "--duration", "20"]).spawn().unwrap();
    let t0 = std::time::Instant::now();
    while std::net::TcpStream::connect(&addr).is_err() {
        assert!(t0.elapsed().as_secs() < 10, "worker never came up");
        std::thread::sleep(std::time::Duration::from_millis(20));
    }
    let o = run(&["bench", "--frames", "10", "--resolution", "64x64", "--stylizer", "remote", "--worker", &addr]);
    let _ = w.kill();
    let _ = w.wait();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["stylizer"], "remote");
    assert_eq!(v["frames_out"], 10);
}
