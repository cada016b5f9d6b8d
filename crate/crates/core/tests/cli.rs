use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn cts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cts-forge")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn error_kind(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has an error line");
    let v: serde_json::Value = serde_json::from_str(line).expect("error is JSON");
    v["error"]["kind"].as_str().expect("kind").to_string()
}

fn generate(dir: &Path, n: &str, seed: &str) -> String {
    let out = cts(&["gen", "--n", n, "--hours", "24", "--seed", seed, "--out", &s(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    s(&dir.join("corpus.ndjson"))
}

#[test]
fn manifest_lists_every_artifact_with_its_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = generate(&tmp.path().join("gen"), "30", "1");
    let out_dir = tmp.path().join("syn");
    let out = cts(&["synthesize", "--input", &corpus, "--k", "12", "--budget", "3x", "--out", &s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<String> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| {
            let name = a["name"].as_str().unwrap().to_string();
            let bytes = fs::read(out_dir.join(&name)).unwrap();
            assert_eq!(a["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
            assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
            name
        })
        .collect();
    let mut on_disk: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let lines = fs::read_to_string(out_dir.join("synthetic.ndjson")).unwrap();
    assert_eq!(lines.lines().count(), 90);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["lineage"]["method"], "cds");
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = generate(&tmp.path().join("gen"), "20", "2");
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# symbolizer\nk = 5\ndelta=3\n").unwrap();

    let a = tmp.path().join("a");
    assert!(cts(&["symbolize", "--config", &s(&cfg), "--input", &corpus, "--out", &s(&a)]).status.success());
    let space: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("space.json")).unwrap()).unwrap();
    assert_eq!(space["k"], 5);

    let b = tmp.path().join("b");
    assert!(cts(&["symbolize", "--config", &s(&cfg), "--input", &corpus, "--k", "7", "--out", &s(&b)]).status.success());
    let space: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("space.json")).unwrap()).unwrap();
    assert_eq!(space["k"], 7);

    fs::write(&cfg, "colour=blue\n").unwrap();
    let out = cts(&["symbolize", "--config", &s(&cfg), "--input", &corpus, "--out", &s(&b)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failures_report_json_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = s(&tmp.path().join("o"));

    let usage = cts(&["synthesize", "--mode", "fancy", "--input", "x", "--out", &out_dir]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_kind(&usage), "usage");

    let missing = cts(&["cutmix", "--input", &s(&tmp.path().join("absent.ndjson")), "--out", &out_dir]);
    assert_eq!(missing.status.code(), Some(3));

    let corpus = generate(&tmp.path().join("gen"), "10", "3");
    let bad_budget = cts(&["cutmix", "--input", &corpus, "--budget", "none", "--out", &out_dir]);
    assert_eq!(bad_budget.status.code(), Some(2));

    let diverge = cts(&[
        "train", "--input", &corpus, "--optimizer", "sgd", "--lr", "1e12", "--hidden", "4", "--epochs", "5", "--context", "6", "--horizon", "6", "--out", &out_dir,
    ]);
    assert_eq!(diverge.status.code(), Some(4), "{}", String::from_utf8_lossy(&diverge.stderr));
    assert_eq!(error_kind(&diverge), "numeric");

    let overlap = cts(&["eval-test1", "--train", &corpus, "--test", &corpus, "--k", "4", "--out", &out_dir]);
    assert_eq!(overlap.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&overlap.stderr).contains("both the training and the test set"));
}

#[test]
fn test_reports_embed_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let train = generate(&tmp.path().join("tr"), "24", "4");
    let test = generate(&tmp.path().join("te"), "8", "5");
    let out_dir = tmp.path().join("t2");
    let out = cts(&[
        "eval-test2", "--train", &train, "--test", &test, "--augment", "identical", "--models", "2", "--hidden", "4",
        "--epochs", "2", "--context", "6", "--horizon", "6", "--out", &s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("test2.json")).unwrap()).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(report["test"], "2");
    assert_eq!(report["ratio"], 1.0);
    assert_eq!(report["config_hash"], manifest["config_hash"]);
}

#[test]
fn ingest_and_sofa_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("records.csv");
    let mut text = String::from("stay_id,feature_id,time_hours,value\n");
    for stay in 0..4 {
        for h in 0..6 {
            text.push_str(&format!("s{stay},hr,{}.5,{}\n", h, 70 + stay * 3 + h));
            text.push_str(&format!("s{stay},rr,{}.2,{}\n", h, 14 + (stay + h) % 5));
        }
    }
    fs::write(&csv, text).unwrap();
    let ing = tmp.path().join("ing");
    let out = cts(&["ingest", "--input", &s(&csv), "--hours", "6", "--out", &s(&ing)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let series = fs::read_to_string(ing.join("series.ndjson")).unwrap();
    assert_eq!(series.lines().count(), 4);
    let catalog: serde_json::Value = serde_json::from_str(&fs::read_to_string(ing.join("catalog.json")).unwrap()).unwrap();
    assert_eq!(catalog["features"].as_array().unwrap().len(), 2);

    let sofa_in = tmp.path().join("sofa.ndjson");
    fs::write(&sofa_in, "{\"stay_id\":\"x\",\"dopamine\":16,\"platelets\":120}\n").unwrap();
    let sofa = tmp.path().join("sofa");
    assert!(cts(&["sofa", "--input", &s(&sofa_in), "--out", &s(&sofa)]).status.success());
    let table = fs::read_to_string(sofa.join("sofa.csv")).unwrap();
    assert_eq!(table, "stay_id,cns,cardio,resp,coag,liver,renal,total\nx,0,4,0,1,0,0,5\n");
}
