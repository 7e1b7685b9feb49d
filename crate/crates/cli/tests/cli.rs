use std::fs;

use collatz_cli::{read_checkpoint, write_checkpoint, CheckpointRecord, CHECKPOINT_VERSION};
use num_bigint::BigUint;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = collatz_cli::run_cli(std::iter::once("collatz").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> serde_json::Value {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn traj_of_29() {
    let v = json(&["traj", "--n0", "29", "--format", "json", "--path"]);
    assert_eq!(v["length"], 13);
    assert_eq!(v["max_value"], "44");
    assert_eq!(v["outcome"]["loop_min"], "1");
    let path: Vec<&str> = v["path"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
    assert_eq!(path, ["29", "44", "22", "11", "17", "26", "13", "20", "10", "5", "8", "4", "2", "1"]);
}

#[test]
fn traj_csv_path_rows() {
    let (code, out, _) = run(&["traj", "--n0", "5", "--path", "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(out, "step,value\n0,5\n1,8\n2,4\n3,2\n4,1\n");
}

#[test]
fn traj_counts_to_an_unlisted_loop_minimum() {
    // 9 enters L7 of P2 with no minima seeded
    let v = json(&["--program", "p2", "traj", "--n0", "9", "--format", "json"]);
    assert_eq!(v["outcome"]["kind"], "converged");
    assert_eq!(v["outcome"]["loop_min"], "7");
}

#[test]
fn usage_errors_exit_2() {
    let cases: [&[&str]; 8] = [
        &["--program", "p4:14", "traj", "--n0", "3"],
        &["--program", "dsl:even:/2; else:(3n+)/2", "traj", "--n0", "3"],
        &["basin", "--odd-range", "9-1"],
        &["traj", "--n0", "0x1f"],
        &["frobnicate"],
        &["nullmodel", "--profile", "p5"],
        &["--format", "dot", "traj", "--n0", "3"],
        &["--max-iter", "0", "traj", "--n0", "3"],
    ];
    for args in cases {
        let (code, out, err) = run(args);
        assert_eq!(code, 2, "{args:?}: {err}");
        assert!(out.is_empty(), "{args:?}");
        assert!(!err.is_empty());
    }
    let (_, _, err) = run(&["--program", "p4:14", "traj", "--n0", "3"]);
    assert!(err.contains("m must be odd"), "{err}");
}

#[test]
fn domain_errors_exit_1() {
    let (code, _, err) = run(&["--program", "p4:53", "tree", "--loop", "57"]);
    assert_eq!(code, 1, "{err}");
    let (code, _, _) = run(&["--max-iter", "10", "hunt", "--n0", "27", "--stop-after", "5", "--checkpoint-every", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn help_goes_to_stdout() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("hunt"));
}

#[test]
fn scans_are_shard_invariant() {
    let scans: [&[&str]; 4] = [
        &["--program", "p2", "basin", "--odd-range", "1:30001", "--format", "csv"],
        &["picket", "--count", "30001", "--format", "csv"],
        &["family", "--base", "3", "--exp", "1:200", "--format", "csv"],
        &["--program", "p4:53", "loops", "--scan-to", "3000", "--format", "json"],
    ];
    for args in scans {
        let outputs: Vec<String> = ["1", "4", "16"]
            .iter()
            .map(|s| {
                let mut a = args.to_vec();
                a.extend(["--shards", s]);
                let (code, out, err) = run(&a);
                assert_eq!(code, 0, "{err}");
                out
            })
            .collect();
        assert!(outputs.iter().all(|o| o == &outputs[0]), "{args:?}");
    }
}

#[test]
fn out_flag_writes_file_and_progress_stays_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basin.csv");
    let (code, out, err) = run(&[
        "--program",
        "p2",
        "--out",
        path.to_str().unwrap(),
        "basin",
        "--odd-range",
        "1:999",
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    assert!(err.contains("basin:"));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("loop_min,count,percent\n1,"), "{text}");
}

#[test]
fn loops_csv_for_p4_53() {
    let (code, out, _) = run(&["--program", "p4:53", "loops", "--scan-to", "25000", "--format", "csv"]);
    assert_eq!(code, 0);
    let minima: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(minima, ["1", "25", "35", "43", "55", "63", "2125", "15871"]);
}

#[test]
fn family_json_reports_islands() {
    let v = json(&["family", "--base", "3", "--exp", "120:140", "--format", "json"]);
    assert_eq!(v["points"].as_array().unwrap().len(), 21);
    let k130 = v["points"].as_array().unwrap().iter().find(|p| p["k"] == 130).unwrap();
    assert_eq!(k130["length"], 1143);
    assert!(!v["islands"]["islands"].as_array().unwrap().is_empty());
}

#[test]
fn nullmodel_boundaries() {
    let v = json(&["nullmodel", "--profile", "p4-eta1:63", "--format", "json"]);
    assert!((v["stability_boundary"].as_f64().unwrap() - 63.2099).abs() < 1e-3);
    let v = json(&["nullmodel", "--profile", "p4-eta2:41", "--n0", "1000000", "--format", "json"]);
    assert!(v["predictions"]["window"].is_number());
    let v = json(&["nullmodel", "--profile", "p4-eta2:61", "--n0", "1000000", "--format", "json"]);
    assert!(v["predictions"]["window"].is_null(), "above the boundary the model diverges");
}

#[test]
fn tree_outputs() {
    let (code, dot, _) = run(&["--program", "p4:53", "tree", "--loop", "55", "--first-exiters", "10"]);
    assert_eq!(code, 0);
    assert!(dot.starts_with("digraph"));
    for n in [3, 5, 7, 9, 11, 13, 15, 17, 19] {
        assert!(dot.contains(&format!("\"{n}\" [label=\"{n}\", style=filled")), "{n}");
    }
    let v = json(&["tree", "--root", "1", "--depth", "5", "--format", "json"]);
    let nodes: Vec<&str> = v["nodes"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
    assert!(nodes.contains(&"5") && nodes.contains(&"32"));
    let (code, _, _) = run(&["tree"]);
    assert_eq!(code, 2);
}

fn hunt(checkpoint: &str, extra: &[&str]) -> (i32, String, String) {
    let mut args = vec![
        "--program",
        "p4:73",
        "--format",
        "json",
        "hunt",
        "--n0",
        "665",
        "--checkpoint",
        checkpoint,
        "--checkpoint-every",
        "400000",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn hunt_resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let whole = dir.path().join("whole.json");
    let (code, reference, _) = hunt(whole.to_str().unwrap(), &[]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&reference).unwrap();
    assert_eq!(v["iterations"], 7_052_258);
    assert_eq!(v["terms"], 7_052_259);

    let ckpt = dir.path().join("part.json");
    let ckpt = ckpt.to_str().unwrap();
    for stop in ["1000000", "3500017"] {
        let (code, out, _) = hunt(ckpt, &["--stop-after", stop]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["outcome"]["kind"], "interrupted");
        assert_eq!(v["iterations"].to_string(), stop);
    }
    let (code, resumed, err) = hunt(ckpt, &[]);
    assert_eq!(code, 0);
    assert!(err.contains("resuming at 3500017"), "{err}");
    assert_eq!(resumed, reference);
}

#[test]
fn hunt_refuses_foreign_or_old_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let mut rec = CheckpointRecord {
        format_version: CHECKPOINT_VERSION,
        program: "p4:73".into(),
        n0: BigUint::from(667u32),
        iterations_done: 10,
        current: BigUint::from(5u32),
        max_bits_seen: 10,
        rule_fire_counts: vec![5, 1, 4],
    };
    write_checkpoint(&rec, &path).unwrap();
    let (code, _, err) = hunt(path.to_str().unwrap(), &[]);
    assert_eq!(code, 1);
    assert!(err.contains("refusing to resume"), "{err}");

    rec.n0 = BigUint::from(665u32);
    rec.format_version = CHECKPOINT_VERSION + 1;
    write_checkpoint(&rec, &path).unwrap();
    let (code, _, err) = hunt(path.to_str().unwrap(), &[]);
    assert_eq!(code, 1);
    assert!(err.contains("format version"), "{err}");
    assert_eq!(read_checkpoint(&path).unwrap_err().exit_code(), 1);
}

#[test]
fn hunt_reports_caps() {
    let (code, out, _) = run(&["--program", "p4:73", "--max-iter", "50000", "hunt", "--n0", "665", "--checkpoint-every", "10000"]);
    assert_eq!(code, 0);
    assert!(out.contains("iteration cap reached"), "{out}");
    assert!(out.contains("iterations: 50000"));
}
