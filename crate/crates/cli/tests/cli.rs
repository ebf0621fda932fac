use std::path::Path;
use std::process::{Command, Output};

fn posediff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posediff"))
        .args(args)
        .env_remove("POSEDIFF_RUN_ROOT")
        .output()
        .expect("spawn posediff")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_passes() {
    let out = posediff(&["verify", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(!text.contains("FAIL"));
    assert!(text.contains("21 properties, 0 failed"));
}

#[test]
fn verify_detects_injected_fault() {
    let out = posediff(&["verify", "--seed", "7", "--fault", "right-for-left", "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let failed: Vec<&str> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| !r["pass"].as_bool().unwrap())
        .map(|r| r["property"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"so3_left_equals_right_transpose"), "{failed:?}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(posediff(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(posediff(&["verify", "--bogus"]).status.code(), Some(2));
    // seed is mandatory
    assert_eq!(posediff(&["verify"]).status.code(), Some(2));
    assert_eq!(posediff(&["verify", "--seed", "x"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let o = posediff(&["gen-data", "--seed", "1", "--shapes", "sphere", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let o = posediff(&[
            "gen-data", "--shapes", "tet,cube", "--n", "2000", "--seed", "1", "--out", path(p),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
    assert_eq!(std::str::from_utf8(&x).unwrap().lines().count(), 4001);
}

#[test]
fn config_precedence_and_run_root() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("c.txt");
    std::fs::write(&cfg, "seed = 3\nn = 50\nshapes = cone\n").unwrap();
    let out = root.path().join("d.jsonl");
    let o = Command::new(env!("CARGO_BIN_EXE_posediff"))
        .args(["gen-data", "--config", path(&cfg), "--n", "20", "--run-dir", "run1", "--out", path(&out)])
        .env("POSEDIFF_RUN_ROOT", root.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let effective = std::fs::read_to_string(root.path().join("run1/config.txt")).unwrap();
    assert!(effective.contains("n = 20\n"));
    assert!(effective.contains("seed = 3\n"));
    assert!(effective.contains("shapes = cone\n"));
    assert!(effective.contains("views = 1\n"));
    let data = std::fs::read_to_string(&out).unwrap();
    assert_eq!(data.lines().count(), 21);

    std::fs::write(&cfg, "seed = 3\nwat = 1\n").unwrap();
    let o = posediff(&["gen-data", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("d.jsonl");
    let run = d.join("run");
    let ok = |o: Output| {
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    ok(posediff(&[
        "gen-data", "--seed", "2", "--shapes", "tet", "--n", "64", "--mode", "se3", "--out", path(&data),
    ]));
    let train = |run: &Path| {
        ok(posediff(&[
            "train", "--seed", "5", "--data", path(&data), "--run-dir", path(run), "--steps", "30",
            "--batch-size", "4", "--fan-out", "4", "--levels", "10", "--width", "16", "--log-every", "10",
            "--checkpoint-every", "15",
        ]))
    };
    train(&run);
    assert!(run.join("config.txt").exists());
    assert!(run.join("checkpoints/step_00000015.ckpt").exists());
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("step,loss,lr,wall_time_s"));
    assert_eq!(lines.count(), 4);
    let ckpt = run.join("final.ckpt");

    let run2 = d.join("run2");
    train(&run2);
    assert_eq!(std::fs::read(&ckpt).unwrap(), std::fs::read(run2.join("final.ckpt")).unwrap());

    let poses = d.join("p.jsonl");
    ok(posediff(&[
        "sample", "--seed", "1", "--checkpoint", path(&ckpt), "--n", "25", "--out", path(&poses),
    ]));
    assert_eq!(std::fs::read_to_string(&poses).unwrap().lines().count(), 26);
    let o = posediff(&["sample", "--seed", "1", "--checkpoint", path(&ckpt), "--cond", "9", "--out", path(&poses)]);
    assert_eq!(o.status.code(), Some(2));

    let e1 = ok(posediff(&["eval", "--seed", "1", "--checkpoint", path(&ckpt), "--data", path(&data), "--n", "20"]));
    let e2 = ok(posediff(&["eval", "--seed", "1", "--checkpoint", path(&ckpt), "--data", path(&data), "--n", "20"]));
    assert_eq!(e1.stdout, e2.stdout);
    let report: serde_json::Value = serde_json::from_slice(&e1.stdout).unwrap();
    assert_eq!(report["shapes"][0]["shape"], "tet");

    let a = ok(posediff(&[
        "ablate-steps", "--seed", "1", "--checkpoint", path(&ckpt), "--data", path(&data), "--n", "10",
        "--steps", "10,5,2",
    ]));
    let csv = stdout(&a);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "score_kind,steps,shape,spread_deg,trans_err");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("surrogate,10,tet,"));
    assert!(rows[3].starts_with("surrogate,2,tet,"));
    let o = posediff(&[
        "ablate-steps", "--seed", "1", "--checkpoint", path(&ckpt), "--data", path(&data), "--steps", "100",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let viz = d.join("v.csv");
    ok(posediff(&["export-viz", "--samples", path(&poses), "--out", path(&viz)]));
    let v = std::fs::read_to_string(&viz).unwrap();
    assert!(v.starts_with("lon,lat,roll,gimbal_flag\n"));
    assert_eq!(v.lines().count(), 26);
}
