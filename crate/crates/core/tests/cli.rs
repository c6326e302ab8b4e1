use std::process::{Command, Output};

fn sqfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqfree"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn variance_prints_report() {
    let out = sqfree(&["variance", "--x", "1000000", "--q", "1009"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["q"], 1009);
    assert_eq!(v["phi"], 1008);
    assert_eq!(v["T"], v["T_convolution"]);
    assert!(v["V"].as_f64().unwrap() > 0.0);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["variance", "--x", "1000", "--q", "0"][..],
        &["variance", "--x", "1000", "--q", "1001"],
        &["gamma", "--x", "1000", "--q", "7", "--gamma", "mul:3:4"],
        &["sweep", "--nope"],
        &["sweep", "--x", "1000", "--eps", "0.25"],
        &["profile", "--q", "7"],
    ] {
        let out = sqfree(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn gamma_reports_all_quantities() {
    let out = sqfree(&["gamma", "--x", "10000", "--q", "101", "--gamma", "inv"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let t = v["T"].as_u64().unwrap() as f64;
    let tg = v["T_gamma"].as_u64().unwrap() as f64;
    let (vv, vg) = (v["V"].as_f64().unwrap(), v["V_gamma"].as_f64().unwrap());
    assert!(((t - tg) - (vv - vg)).abs() <= 1e-8 * t);
    assert!(t - tg >= 0.0 && t - tg <= 2.0 * vv);
}

#[test]
fn selfcheck_passes_and_fault_is_named() {
    let out = sqfree(&["selfcheck", "--threads", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 12);

    let out = sqfree(&["selfcheck", "--inject-fault", "mu"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("FAIL ")).unwrap();
    assert!(
        line.contains("mobius_divisor_sum") && line.contains("n=30"),
        "{line}"
    );
}

#[test]
fn sweep_writes_out_file_and_json_schema() {
    let dir = std::env::temp_dir().join(format!("sqfree-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("rows.csv");
    let out = sqfree(&[
        "sweep",
        "--x",
        "10000",
        "--q",
        "100,200,400",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let rows = sqfree::experiments::parse_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|r| r.mn_ratio.is_finite() && r.mn_ratio > 0.0));

    let out = sqfree(&[
        "sweep",
        "--x",
        "10000",
        "--q",
        "100,200",
        "--format",
        "json",
        "--deterministic",
    ]);
    let v = json(&out);
    assert!(v["meta"].get("timestamp").is_none());
    assert_eq!(v["meta"]["eps"], 0.05);
    let header: Vec<&str> = sqfree::experiments::CSV_HEADER.split(',').collect();
    for row in v["rows"].as_array().unwrap() {
        let keys: Vec<&str> = row
            .as_object()
            .unwrap()
            .keys()
            .map(|k| k.as_str())
            .collect();
        assert_eq!(keys.len(), header.len());
        assert!(header.iter().all(|h| keys.contains(h)));
    }

    let out = sqfree(&["sweep", "--x", "10000", "--q", "100", "--format", "json"]);
    assert!(json(&out)["meta"]["timestamp"].is_u64());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = std::env::temp_dir().join(format!("sqfree-cfgtest-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "x = 10000\nq = 7\n").unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(json(&sqfree(&["variance", "--config", c]))["q"], 7);
    assert_eq!(
        json(&sqfree(&["variance", "--config", c, "--q", "9"]))["q"],
        9
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sieve_dump_is_reusable() {
    let dir = std::env::temp_dir().join(format!("sqfree-dump-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let dump = dir.join("mu.bin");
    let d = dump.to_str().unwrap();
    let out = sqfree(&["sieve", "--x", "100000", "--out", d]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["squarefree_count"], 60794);
    assert_eq!(v["squarefree_count"], v["segmented_count"]);
    let fresh = sqfree(&["variance", "--x", "100000", "--q", "97"]);
    let loaded = sqfree(&["variance", "--x", "100000", "--q", "97", "--table", d]);
    assert_eq!(fresh.stdout, loaded.stdout);
    let short = sqfree(&["variance", "--x", "200000", "--q", "97", "--table", d]);
    assert_eq!(short.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn lemma_commands() {
    let v = json(&sqfree(&["lemma2", "--v1", "5", "--v2", "5", "--q", "3"]));
    assert_eq!(v["N"], 8);
    let v = json(&sqfree(&["lemma2", "--v1", "3", "--v2", "3", "--q", "2"]));
    assert_eq!(v["M"], "12");
    let out = sqfree(&["lemma1", "--w-max", "4", "--u-max", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["violations"].as_array().unwrap().len(), 0);
    let v = json(&sqfree(&["lemma3", "--q", "101", "--f1", "3", "--f2", "4"]));
    assert_eq!(v["exact"], true);
}

#[test]
fn fit_flags_band() {
    let out = sqfree(&[
        "fit",
        "--x",
        "100000",
        "--q-min",
        "1000",
        "--q-max",
        "100000",
        "--q-steps",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["fit"]["beta"].is_number());
    assert!(v["beta_in_band"].is_boolean());
}
