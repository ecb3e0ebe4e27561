use std::net::TcpListener;
use std::process::{Command, Output};

fn dfft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfft")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

#[test]
fn json_report_on_stdout() {
    let out = dfft(&["--dims", "8,8,8", "--grid", "2,2", "--reps", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["verified"], true);
    assert_eq!(v["config"]["decomposition"], "pencil");
    assert_eq!(v["config"]["exchange"], "staged");
    assert_eq!(v["repetitions"].as_array().unwrap().len(), 2);
}

#[test]
fn costmodel_flags_reach_the_report() {
    let out = dfft(&[
        "--dims", "8,8,8", "--np", "4", "--backend", "costmodel", "--pipelined", "true", "--chunks", "2",
        "--staging-buffers", "3", "--latency", "2e-6", "--inv-bw", "1e-9", "--staging-inv-bw", "3e-9",
        "--kind", "r2c", "--seed", "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let c = &v["config"];
    assert_eq!(c["exchange"], "pipelined");
    assert_eq!(c["chunks"], 2);
    assert_eq!(c["staging_buffers"], 3);
    assert_eq!(c["grid"], serde_json::json!([2, 2]));
    assert_eq!(c["cost_model"]["latency"], 2e-6);
    assert_eq!(c["cost_model"]["staging_inv_bandwidth"], 3e-9);
    assert_eq!(c["kind"], "r2c");
    let gflops = v["flops"].as_f64().unwrap() / v["timing_min"]["total"].as_f64().unwrap() / 1e9;
    assert_eq!(v["gflops"].as_f64().unwrap(), gflops);
}

#[test]
fn csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let out = dfft(&[
        "--dims", "4,4,4,4", "--np", "8", "--format", "csv", "--reps", "3", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 + 3);
    assert!(lines[0].starts_with("row,dims,grid,"));
    assert!(lines[1].starts_with("min,4x4x4x4,2x2x2,c2c,general,"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("GFLOPS"));
}

#[test]
fn errors_exit_with_one() {
    let out = dfft(&["--dims", "4,8,8", "--np", "8", "--decomp", "slab"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("slab"));
    assert_eq!(dfft(&["--dims", "8,8,8", "--reps", "0"]).status.code(), Some(1));
    assert_eq!(dfft(&["--dims", "8,8,8", "--kind", "r2r"]).status.code(), Some(1));
    assert_eq!(dfft(&["--dims", "8,8,8", "--grid", "2,2", "--np", "4"]).status.code(), Some(1));
    assert_eq!(dfft(&["--help"]).status.code(), Some(0));
}

/// Input validation is off by default, so a NaN sample reaches the
/// transform and the oracle comparison fails.
#[test]
fn verification_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.dtns");
    let mut bytes = b"DTNS".to_vec();
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.push(0);
    bytes.extend_from_slice(&3u32.to_le_bytes());
    for d in [4u64, 4, 4] {
        bytes.extend_from_slice(&d.to_le_bytes());
    }
    for i in 0..64 {
        let v = if i == 17 { f64::NAN } else { i as f64 };
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&path, bytes).unwrap();
    let out = dfft(&["--dims", "4,4,4", "--grid", "2,2", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"status\": \"failed\""), "{text}");
}

#[test]
fn tensor_output_round_trips_through_input() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.dtns");
    let back = dir.path().join("back.dtns");
    let out = dfft(&["--dims", "6,4,5", "--np", "2", "--kind", "r2c", "--output", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let out = dfft(&[
        "--dims", "6,4,5", "--np", "4", "--kind", "c2r", "--input", spec.to_str().unwrap(), "--output",
        back.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["verified"], true);
    let bytes = std::fs::read(&back).unwrap();
    assert_eq!(&bytes[..4], b"DTNS");
    assert_eq!(bytes[8], 0, "real f64 output");
}

#[test]
fn multi_process_socket_run() {
    let ports: Vec<u16> = (0..2)
        .map(|_| TcpListener::bind("127.0.0.1:0").unwrap())
        .collect::<Vec<_>>()
        .iter()
        .map(|l| l.local_addr().unwrap().port())
        .collect();
    let hosts = format!("127.0.0.1:{},127.0.0.1:{}", ports[0], ports[1]);
    let spawn = |rank: &str| {
        Command::new(env!("CARGO_BIN_EXE_dfft"))
            .args(["--dims", "4,4,4", "--grid", "2", "--decomp", "slab", "--backend", "socket"])
            .args(["--hosts", &hosts, "--rank", rank, "--reps", "1", "--timeout", "20"])
            .output()
    };
    let (a, b) = std::thread::scope(|s| {
        let a = s.spawn(|| spawn("0"));
        let b = s.spawn(|| spawn("1"));
        (a.join().unwrap().unwrap(), b.join().unwrap().unwrap())
    });
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0), "{}", String::from_utf8_lossy(&b.stderr));
    assert_eq!(json(&a)["verified"], true);
    assert!(b.stdout.is_empty());
}

#[test]
fn prediction_is_printed() {
    let out = dfft(&["--dims", "8,8,8", "--np", "2", "--backend", "costmodel", "--predict", "torus3d"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("predicted"));
}
