use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::thread;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deskscale"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn deskscale")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().expect("exit code")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn gen_dense(dir: &Path, name: &str, rows: &str) {
    ok(dir, &["gen", "--rows", rows, "--features", "20", "--separation", "4", "--seed", "7", "--out", name]);
}

#[test]
fn gen_then_cv_reports_five_folds() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--rows", "1000", "--features", "50", "--separation", "4", "--seed", "7", "--out", "d.csv"]);
    ok(d, &["cv", "--algo", "logreg", "--k", "5", "--data", "d.csv", "--out", "cv"]);
    let report = json(d.join("cv/cv-report.json"));
    let folds = report["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 5);
    let rows: u64 = folds.iter().map(|f| f["rows"].as_u64().unwrap()).sum();
    assert_eq!(rows, 1000);
    assert!(report["mean"]["auc_roc"].as_f64().unwrap() > 0.9);
    let csv = fs::read_to_string(d.join("cv/cv-report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 + 1);
    assert!(d.join("cv/effective-config.json").is_file());
}

#[test]
fn plan_matches_assignment_table() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["plan", "--partitions", "5", "--out", "p"]);
    let plan = json(tmp.path().join("p/plan.json"));
    let got: Vec<(String, String, String, u64)> = plan["instances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| {
            (
                i["id"].as_str().unwrap().to_owned(),
                i["algorithms"][0].as_str().unwrap().to_owned(),
                i["algorithms"][1].as_str().unwrap().to_owned(),
                i["partition"].as_u64().unwrap(),
            )
        })
        .collect();
    let want = [
        ("A", "LR", "RF", 0),
        ("B", "MLP", "LR", 1),
        ("C", "XGB", "MLP", 2),
        ("D", "SVM", "XGB", 3),
        ("E", "SVM", "RF", 4),
    ];
    assert_eq!(got.len(), 5);
    for (g, w) in got.iter().zip(want) {
        assert_eq!((g.0.as_str(), g.1.as_str(), g.2.as_str(), g.3), w);
    }
}

#[test]
fn plan_runs_against_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_dense(d, "d.csv", "500");
    ok(d, &["split", "--data", "d.csv", "--parts", "5", "--out", "parts"]);
    ok(
        d,
        &[
            "plan", "--manifest", "parts/manifest.json", "--epochs", "3", "--hidden", "8",
            "--batch-size", "16", "--learning-rate", "0.01", "--num-round", "10", "--max-depth", "3",
            "--out", "p",
        ],
    );
    let outcome = json(d.join("p/plan-report.json"));
    assert_eq!(outcome["unbound"], serde_json::json!(["RF"]));
    // Two instances use RF, which is skipped.
    assert_eq!(outcome["instances"].as_array().unwrap().len(), 8);
    let table = fs::read_to_string(d.join("p/summary-table.csv")).unwrap();
    let models: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["LR", "MLP", "XGB", "SVM"]);
}

#[test]
fn master_and_three_worker_processes_write_a_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_dense(d, "d.csv", "2000");
    ok(d, &["split", "--data", "d.csv", "--parts", "4", "--out", "parts"]);
    let mut train = String::new();
    for i in 0..3 {
        train.push_str(&fs::read_to_string(d.join(format!("parts/part-{i}.csv"))).unwrap());
    }
    fs::write(d.join("train.csv"), train).unwrap();

    let mut master = bin()
        .current_dir(d)
        .args([
            "bench-master", "--listen", "127.0.0.1:0", "--workers", "3", "--rounds", "5",
            "--holdout", "parts/part-3.csv", "--train-data", "train.csv", "--out", "m",
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(master.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let addr = first.strip_prefix("listening on ").expect("address line").to_owned();
    let workers: Vec<_> = (0..3)
        .map(|i| {
            bin()
                .current_dir(d)
                .args(["bench-worker", "--connect", &addr, "--worker-id", &i.to_string()])
                .args(["--data", &format!("parts/part-{i}.csv"), "--out", &format!("w{i}")])
                .stderr(Stdio::piped())
                .spawn()
                .unwrap()
        })
        .collect();
    for w in workers {
        let w = w.wait_with_output().unwrap();
        assert!(w.status.success(), "{}", String::from_utf8_lossy(&w.stderr));
    }
    let echoed: Vec<String> = lines.map(Result::unwrap).collect();
    assert!(master.wait().unwrap().success());
    assert!(echoed[0].starts_with("algorithm,mode"));

    let csv = fs::read_to_string(d.join("m/comparison.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "algorithm,mode,wall_clock_s,auc_roc,speedup,note");
    assert!(lines[1].starts_with("logistic,local,"));
    let dist: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(&dist[..2], ["logistic", "distributed-3"]);
    assert!(dist[3].parse::<f64>().unwrap() > 0.9);
    let record = json(d.join("m/bench-record.json"));
    assert_eq!(record["rounds"].as_array().unwrap().len(), 5);
    assert_eq!(record["completed"], true);
    for i in 0..3 {
        assert_eq!(json(d.join(format!("w{i}/worker-report.json")))["rounds_completed"], 5);
    }
}

#[test]
fn workers_started_one_by_one_still_converge() {
    // Sequential spawning here checks that the master waits for late joiners.
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_dense(d, "d.csv", "300");
    ok(d, &["split", "--data", "d.csv", "--parts", "2", "--out", "parts"]);
    let mut master = bin()
        .current_dir(d)
        .args(["bench-master", "--listen", "127.0.0.1:0", "--workers", "2", "--rounds", "2", "--algo", "svm", "--out", "m"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdout = BufReader::new(master.stdout.take().unwrap());
    let mut first = String::new();
    stdout.read_line(&mut first).unwrap();
    let addr = first.trim().strip_prefix("listening on ").unwrap().to_owned();
    let mut children = Vec::new();
    for i in 0..2 {
        children.push(
            bin()
                .current_dir(d)
                .args(["bench-worker", "--connect", &addr, "--worker-id", &i.to_string()])
                .args(["--data", &format!("parts/part-{i}.csv"), "--out", &format!("w{i}")])
                .spawn()
                .unwrap(),
        );
        thread::sleep(std::time::Duration::from_millis(200));
    }
    for mut c in children {
        assert!(c.wait().unwrap().success());
    }
    let mut rest = String::new();
    stdout.read_to_string(&mut rest).unwrap();
    assert!(master.wait().unwrap().success());
    let csv = fs::read_to_string(d.join("m/comparison.csv")).unwrap();
    assert!(csv.contains("svm,distributed-2,"));
    assert!(csv.contains("no local baseline"));
}

#[test]
fn bench_local_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_dense(d, "d.csv", "600");
    ok(d, &["bench-local", "--data", "d.csv", "--algos", "logreg,svm", "--k", "3", "--out", "l"]);
    let table = fs::read_to_string(d.join("l/summary-table.csv")).unwrap();
    assert!(table.starts_with("Model,Average Accuracy (%),Macro F1-Score (%),AUC-ROC (%),Training Time (s)\n"));
    assert_eq!(table.lines().count(), 3);
    let local = json(d.join("l/local-results.json"));
    assert_eq!(local.as_array().unwrap().len(), 2);

    let record = serde_json::json!({
        "algorithm": "svm", "workers": 2, "total_rows": 480,
        "handshake_bytes_sent": 0, "handshake_bytes_received": 0, "rounds": [],
        "wall_clock_s": 2.0, "holdout_auc": 0.9, "manifest": "d", "completed": true
    });
    fs::write(d.join("rec.json"), record.to_string()).unwrap();
    ok(d, &["report", "--local", "l/local-results.json", "--distributed", "rec.json", "--out", "r"]);
    let csv = fs::read_to_string(d.join("r/comparison.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("svm,distributed-2,2.00,0.9000,")));

    fs::write(d.join("rec.json"), record.to_string().replace("\"d\"", "\"other\"")).unwrap();
    assert_eq!(code(d, &["report", "--local", "l/local-results.json", "--distributed", "rec.json"]), 2);
}

#[test]
fn effective_config_reproduces_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_dense(d, "d.csv", "400");
    ok(d, &["train", "--algo", "svm", "--data", "d.csv", "--epochs", "2", "--seed", "3", "--out", "a"]);
    // Replay from a different working directory: paths in the file are absolute.
    let elsewhere = tempfile::tempdir().unwrap();
    let cfg = d.join("a/effective-config.json");
    let b = d.join("b");
    ok(elsewhere.path(), &["train", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(fs::read(d.join("a/model.json")).unwrap(), fs::read(b.join("model.json")).unwrap());
    assert_eq!(json(d.join("a/effective-config.json"))["out"], Value::from(d.join("a").to_str().unwrap()));

    // A flag beats the file.
    ok(d, &["train", "--config", "a/effective-config.json", "--seed", "4", "--out", "c"]);
    assert_eq!(json(d.join("c/effective-config.json"))["seed"], 4);
    assert_ne!(fs::read(d.join("a/model.json")).unwrap(), fs::read(d.join("c/model.json")).unwrap());
}

#[test]
fn config_paths_resolve_against_the_config_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::create_dir(d.join("conf")).unwrap();
    gen_dense(&d.join("conf"), "d.csv", "200");
    fs::write(
        d.join("conf/run.json"),
        r#"{"algo": "logreg", "data": "d.csv", "k": 4, "out": "res", "epochs": 2}"#,
    )
    .unwrap();
    ok(d, &["cv", "--config", "conf/run.json"]);
    assert_eq!(json(d.join("conf/res/cv-report.json"))["folds"].as_array().unwrap().len(), 4);
}

#[test]
fn pipeline_and_balance_write_their_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--kind", "movies", "--rows", "200", "--out", "movies.csv"]);
    fs::write(d.join("lex.txt"), "love,pos\nfamily,pos\nmurder,neg\nwar,neg\n").unwrap();
    ok(
        d,
        &[
            "pipeline", "--movies", "movies.csv", "--lexicon", "lex.txt", "--hash-dim", "500",
            "--num-round", "30", "--max-depth", "4", "--out", "pipe",
        ],
    );
    let report = json(d.join("pipe/pipeline-report.json"));
    assert_eq!(report["rows"], 200);
    assert_eq!(report["num_features"], 505);
    assert_eq!(report["sentiment"]["total"], 200);
    assert!(report["imputed"]["reviews_from_users"].as_u64().unwrap() > 0);
    assert!(report["cv_mean"]["rmse"].as_f64().unwrap() > 0.0);
    let vectors = fs::read_to_string(d.join("pipe/vectors.jsonl")).unwrap();
    assert_eq!(vectors.lines().count(), 200);

    ok(d, &["gen", "--kind", "reviews", "--rows", "800", "--out", "reviews.csv"]);
    ok(d, &["balance", "--reviews", "reviews.csv", "--target", "60", "--out", "bal"]);
    let rep = json(d.join("bal/balance-report.json"));
    for c in rep["classes"].as_array().unwrap() {
        let (before, after) = (c["before"].as_u64().unwrap(), c["after"].as_u64().unwrap());
        match c["action"].as_str().unwrap() {
            "undersampled" => assert_eq!(after, 60),
            "augmented" => assert!(after > before && after <= 3 * before),
            _ => assert_eq!(after, before),
        }
    }
    let balanced = fs::read_to_string(d.join("bal/balanced.csv")).unwrap();
    let total: u64 = rep["classes"].as_array().unwrap().iter().map(|c| c["after"].as_u64().unwrap()).sum();
    assert_eq!(balanced.lines().count() as u64, total + 1);
}

#[test]
fn gridsearch_reads_a_grid_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_dense(d, "d.csv", "300");
    fs::write(d.join("grid.json"), r#"{"lambda": [0.001, 0.01], "epochs": [2]}"#).unwrap();
    ok(d, &["gridsearch", "--algo", "logreg", "--data", "d.csv", "--grid", "grid.json", "--out", "g"]);
    let csv = fs::read_to_string(d.join("g/grid-results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epochs,lambda,score");
    assert_eq!(lines.len(), 3);
    assert!(json(d.join("g/best-params.json"))["lambda"].is_f64());

    fs::write(d.join("bad-grid.json"), r#"{"nonsense": [1]}"#).unwrap();
    assert_eq!(code(d, &["gridsearch", "--algo", "logreg", "--data", "d.csv", "--grid", "bad-grid.json"]), 1);
}

#[test]
fn exit_codes_follow_the_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_dense(d, "d.csv", "100");

    // usage and configuration
    assert_eq!(code(d, &["frobnicate"]), 1);
    assert_eq!(code(d, &["cv", "--algo", "logreg", "--data", "d.csv", "--no-such-flag"]), 1);
    assert_eq!(code(d, &["cv", "--algo", "logreg", "--data", "d.csv", "--k", "1"]), 1);
    assert_eq!(code(d, &["plan", "--partitions", "4"]), 1);
    fs::write(d.join("broken.json"), "{ not json").unwrap();
    assert_eq!(code(d, &["cv", "--config", "broken.json"]), 1);
    assert_eq!(code(d, &["--help"]), 0);

    // data
    fs::write(d.join("bad.csv"), "1,0.5,0.25\n0,oops,1\n").unwrap();
    let out = run(d, &["cv", "--algo", "logreg", "--data", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(code(d, &["cv", "--algo", "logreg", "--data", "missing.csv"]), 2);
    fs::write(d.join("ragged.csv"), "1,0.5,0.25\n0,1\n").unwrap();
    assert_eq!(code(d, &["train", "--algo", "logreg", "--data", "ragged.csv"]), 2);

    // protocol / runtime: nothing listening
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let addr = format!("127.0.0.1:{port}");
    let worker = ["bench-worker", "--connect", &addr, "--data", "d.csv", "--connect-attempts", "1", "--retry-delay-ms", "1"];
    assert_eq!(code(d, &worker), 3);

    // protocol / runtime: a peer that answers HELLO with a zero-length frame
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let fake = thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        let mut hello = [0u8; 4];
        s.read_exact(&mut hello).unwrap();
        s.write_all(&[0, 0, 0, 0]).unwrap();
        thread::sleep(std::time::Duration::from_millis(200));
    });
    let out = run(d, &["bench-worker", "--connect", &addr, "--data", "d.csv"]);
    fake.join().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero-length"));
}
