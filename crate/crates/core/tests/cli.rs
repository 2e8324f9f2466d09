mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use serde_json::Value;

fn kinship(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinship"))
        .args(args)
        .env_remove("KINSHIP_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const PRIORS_ARG: &str = "0.1,0.2,0.3,0.4";

#[test]
fn simulate_single_subpopulation() {
    let dir = tempfile::tempdir().unwrap();
    let freq = dir.path().join("one.csv");
    std::fs::write(&freq, "allele,locus,all\n1,A,0.5\n2,A,0.5\n7,B,0.1\n8,B,0.9\n").unwrap();
    let out = dir.path().join("p.csv");
    let o = kinship(&["simulate", "--freq", s(&freq), "--n", "10", "--seed", "1", "--out", s(&out)]);
    ok(&o);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "id,subpop,A_a,A_b,B_a,B_b");
    assert_eq!(rows.len(), 11);
    assert!(rows[1..].iter().all(|r| r.split(',').nth(1) == Some("all")));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "subpop,count\nall,10\n");
}

#[test]
fn simulate_is_byte_identical_on_rerun_and_seed_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let freq = fixture("freq_completed.csv");
    let run = |name: &str, seed_env: bool| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kinship"));
        cmd.args(["simulate", "--freq", s(&freq), "--priors", PRIORS_ARG, "--n", "500", "--out", s(&out)]);
        if seed_env {
            cmd.env("KINSHIP_SEED", "42");
        } else {
            cmd.args(["--seed", "42"]).env_remove("KINSHIP_SEED");
        }
        ok(&cmd.output().unwrap());
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", false);
    assert_eq!(a, run("b.csv", false));
    assert_eq!(a, run("c.csv", true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let freq = fixture("freq_completed.csv");
    // missing file
    let o = kinship(&["simulate", "--freq", "/nonexistent.csv", "--priors", PRIORS_ARG, "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    // columns that do not sum to one
    let o = kinship(&["simulate", "--freq", s(&fixture("freq_excerpt.csv")), "--priors", PRIORS_ARG, "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("TPOX"));
    // no seed anywhere
    let o = kinship(&["simulate", "--freq", s(&freq), "--priors", PRIORS_ARG, "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    // priors that do not sum to one
    let o = kinship(&["simulate", "--freq", s(&freq), "--priors", "0.5,0.5,0.5,0.5", "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    // unwritable output
    let o = kinship(&["simulate", "--freq", s(&freq), "--priors", PRIORS_ARG, "--seed", "1", "--out", "/nonexistent/dir/o.csv"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_file_with_flag_override_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let freq = fixture("freq_completed.csv");
    std::fs::write(
        &cfg,
        format!("freq = {:?}\npriors = [0.1, 0.2, 0.3, 0.4]\nseed = 5\nn = 20\nworkers = 2\n", s(&freq)),
    )
    .unwrap();
    let out = dir.path().join("p.csv");
    ok(&kinship(&["--config", s(&cfg), "--dump-config", "simulate", "--n", "7", "--out", s(&out)]));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 8);
    let dumped = std::fs::read_to_string(dir.path().join("resolved-config.toml")).unwrap();
    assert!(dumped.contains("n = 7"));
    assert!(dumped.contains("seed = 5"));
    assert!(!dumped.contains("workers"));
    // the dump is itself a valid config reproducing the run
    let again = dir.path().join("again");
    std::fs::create_dir(&again).unwrap();
    let out2 = again.join("p.csv");
    ok(&kinship(&["--config", s(&dir.path().join("resolved-config.toml")), "simulate", "--out", s(&out2)]));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&out2).unwrap());
}

#[test]
fn power_sweep_and_batch_output() {
    let dir = tempfile::tempdir().unwrap();
    let freq = fixture("freq_completed.csv");
    let (report, curves, lrs) = (dir.path().join("r.json"), dir.path().join("c.csv"), dir.path().join("lr.csv"));
    ok(&kinship(&[
        "power", "--freq", s(&freq), "--priors", PRIORS_ARG, "--relationship", "pc",
        "--n-null", "1000000", "--n-alt", "2000", "--alpha", "1.7e-5", "--sweep", "1e-6:4e-5:20",
        "--seed", "3", "--out", s(&report), "--curves", s(&curves),
    ]));
    let r = read_json(&report);
    assert_eq!(r["powers"].as_array().unwrap().len(), 5);
    for e in r["powers"].as_array().unwrap() {
        assert_eq!(e["alpha"], 1.7e-5);
        assert!(e["ci_lo"].as_f64().unwrap() <= e["power"].as_f64().unwrap());
    }
    let text = std::fs::read_to_string(&curves).unwrap();
    assert_eq!(text.lines().next().unwrap(), "statistic,alpha,threshold_log10,power,ci_lo,ci_hi");
    for stat in ["LRLAF", "LRAVG", "LRMAX", "LRMIN", "LRCLASS"] {
        assert_eq!(text.lines().filter(|l| l.starts_with(&format!("{stat},"))).count(), 20);
    }

    ok(&kinship(&[
        "power", "--freq", s(&freq), "--priors", PRIORS_ARG, "--relationship", "sb",
        "--n-null", "1000", "--n-alt", "1000", "--seed", "3", "--out", s(&report), "--lr-out", s(&lrs), "--linear",
    ]));
    let text = std::fs::read_to_string(&lrs).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "pair_id,hypothesis,lr_laf,lr_avg,lr_max,lr_min,lr_class,class_index");
    assert_eq!(lines.clone().count(), 2000);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..2], &["0", "H0"]);
    assert!(first[2..7].iter().all(|v| v.parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn null_versus_null_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    ok(&kinship(&[
        "power", "--freq", s(&fixture("freq_completed.csv")), "--priors", PRIORS_ARG,
        "--relationship", "custom", "--theta", "1,0,0", "--n-null", "10000", "--n-alt", "10000",
        "--alpha", "1e-3", "--seed", "1", "--out", s(&report),
    ]));
    for e in read_json(&report)["powers"].as_array().unwrap() {
        assert_eq!(e["threshold"], 0.0);
        assert_eq!(e["power"], 0.0);
    }
}

#[test]
fn thresholds_only() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("t.json");
    ok(&kinship(&[
        "thresholds", "--freq", s(&fixture("freq_completed.csv")), "--priors", PRIORS_ARG,
        "--relationship", "sb", "--n-null", "1000", "--alpha", "0.01,0.05", "--seed", "1", "--out", s(&report),
    ]));
    let r = read_json(&report);
    assert_eq!(r["thresholds"].as_array().unwrap().len(), 10);
    // an alpha below 1/n is raised to 1/n
    ok(&kinship(&[
        "thresholds", "--freq", s(&fixture("freq_completed.csv")), "--priors", PRIORS_ARG,
        "--n-null", "100", "--seed", "1", "--out", s(&report),
    ]));
    assert_eq!(read_json(&report)["thresholds"][0]["alpha"], 0.01);
}

#[test]
fn classify_eval_from_prediction_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("e.json");
    ok(&kinship(&["classify-eval", "--test", s(&fixture("nb_predictions.csv")), "--out", s(&report)]));
    let p = &read_json(&report)["predictions"];
    assert!((p["summary"]["overall_accuracy"].as_f64().unwrap() - 0.4693).abs() < 5e-5);
    assert_eq!(p["matrix"]["excluded"], 2);
    assert_eq!(p["summary"]["total"], 927);
}

#[test]
fn classify_eval_fold_too_small() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    std::fs::write(
        &train,
        "id,subpop,TPOX_a,TPOX_b,vWA_a,vWA_b,D13S317_a,D13S317_b\n\
         a,subpop1,10,10,15,17,9,10\nb,subpop2,10,11,15,15,9,10\nc,subpop3,11,11,16,17,9,11\n",
    )
    .unwrap();
    let o = kinship(&[
        "classify-eval", "--freq", s(&fixture("freq_completed.csv")), "--priors", PRIORS_ARG,
        "--train", s(&train), "--k", "2", "--seed", "1", "--out", s(&dir.path().join("e.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no sample of class"));
}

#[test]
fn classify_eval_kfold_and_holdout() {
    let dir = tempfile::tempdir().unwrap();
    let freq = fixture("freq_completed.csv");
    let test = dir.path().join("test.csv");
    ok(&kinship(&["simulate", "--freq", s(&freq), "--priors", PRIORS_ARG, "--n", "300", "--seed", "8", "--out", s(&test)]));
    let report = dir.path().join("e.json");
    ok(&kinship(&[
        "classify-eval", "--freq", s(&freq), "--priors", PRIORS_ARG, "--methods", "nb,lrA,lrB",
        "--k", "5", "--train-size", "2000", "--test", s(&test), "--seed", "2", "--out", s(&report),
    ]));
    let r = read_json(&report);
    let kfold = r["kfold"]["methods"].as_array().unwrap();
    assert_eq!(kfold.len(), 3);
    assert_eq!(kfold[0]["folds"].as_array().unwrap().len(), 5);
    let test = r["test"]["methods"].as_array().unwrap();
    for m in test {
        let pooled = &m["pooled"];
        let total: u64 = pooled["counts"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
        assert_eq!(total + pooled["excluded"].as_u64().unwrap(), 300);
    }
}
