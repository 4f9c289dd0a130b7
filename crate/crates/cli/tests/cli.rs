use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use modnet::ensembles::sample_goe;
use modnet::netio::save_matrix_csv;
use modnet::Seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn modnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modnet"))
        .args(args)
        .env_remove("MODNET_TW1_TABLE")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn test_command_emits_json_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("w.csv");
    save_matrix_csv(&input, &sample_goe(60, Seed::new(4)).unwrap(), None).unwrap();
    let o = modnet(&[
        "test",
        "--input",
        path_str(&input),
        "--method",
        "modularity2",
        "--alpha",
        "0.05",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    for key in ["version", "seed", "inputs", "results", "warnings"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let r = &v["results"];
    assert_eq!(r["test"], "ModularityII");
    assert_eq!(r["n"], 60);
    let stat = r["statistic"].as_f64().unwrap();
    let crit = r["critical_value"].as_f64().unwrap();
    assert_eq!(r["reject"].as_bool().unwrap(), stat > crit);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&modnet(&["frobnicate"])), 1);
    assert_eq!(code(&modnet(&["test"])), 1);
    assert_eq!(
        code(&modnet(&["simulate", "--n", "10", "--format", "xml"])),
        1
    );
    // Too few replicates is a parameter error.
    assert_eq!(code(&modnet(&["--reps", "10", "simulate", "--n", "10"])), 1);
    assert_eq!(code(&modnet(&["--help"])), 0);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&modnet(&["test", "--input", path_str(&missing)])), 2);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "0,1,2\n1,0,oops\n2,3,0\n").unwrap();
    let o = modnet(&["test", "--input", path_str(&bad)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("column 3"), "{err}");

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "0,1\n1,0,2\n").unwrap();
    assert_eq!(code(&modnet(&["test", "--input", path_str(&ragged)])), 2);
}

#[test]
fn asymmetric_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("w.csv");
    let mut text = String::new();
    for i in 0..5 {
        let row: Vec<String> = (0..5)
            .map(|j| {
                let v = ((i * 7 + j * 3) % 5) as f64 + if i > j { 1e-3 } else { 0.0 };
                let v = if i == j {
                    0.0
                } else {
                    v.min(((j * 7 + i * 3) % 5) as f64 + 1e-3)
                };
                v.to_string()
            })
            .collect();
        writeln!(text, "{}", row.join(",")).unwrap();
    }
    std::fs::write(&input, text).unwrap();
    let o = modnet(&["test", "--input", path_str(&input), "--method", "entrywise"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let warnings = v["warnings"].as_array().unwrap();
    assert!(warnings
        .iter()
        .any(|w| w.as_str().unwrap().contains("asymmetric")));
}

#[test]
fn tw1_table_can_be_overridden_by_environment() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("shifted.txt");
    let mut text = String::from("# tracy-widom beta=1 m=0 n_gen=0 seed=0\nx cdf\n");
    for k in 1..100 {
        let p = k as f64 / 100.0;
        writeln!(text, "{} {}", 10.0 + (p - 0.5) * 4.0, p).unwrap();
    }
    std::fs::write(&table, text).unwrap();
    let run = |env: Option<&Path>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_modnet"));
        cmd.args([
            "--format",
            "json",
            "quantiles",
            "--law",
            "tw1",
            "--probs",
            "0.5",
        ]);
        match env {
            Some(p) => cmd.env("MODNET_TW1_TABLE", p),
            None => cmd.env_remove("MODNET_TW1_TABLE"),
        };
        cmd.output().unwrap()
    };
    let bundled = stdout_json(&run(None))["results"]["rows"][0]["quantile"]
        .as_f64()
        .unwrap();
    assert!((bundled + 1.27).abs() < 0.05, "{bundled}");
    let o = run(Some(&table));
    let v = stdout_json(&o);
    assert!((v["results"]["rows"][0]["quantile"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    assert!(!v["warnings"].as_array().unwrap().is_empty());
    assert_eq!(code(&run(Some(&dir.path().join("absent.txt")))), 2);
}

#[test]
fn simulate_writes_calibration_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal.csv");
    let o = modnet(&[
        "--seed",
        "7",
        "--reps",
        "100",
        "--out",
        path_str(&out),
        "simulate",
        "--ensemble",
        "goe",
        "--n",
        "20",
        "--law",
        "f",
        "--conv-samples",
        "20000",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "ensemble,law,orientation,n,alpha,quantile,probability,se,reps"
    );
    assert_eq!(lines.count(), 4);
}

/// Two parties; one of them has two factions that split on a block of
/// votes.
fn synthetic_roll_call(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (per_party, votes) = (30, 240);
    let mut header = Vec::new();
    for k in 0..per_party {
        header.push(format!("D{k}"));
    }
    for k in 0..per_party {
        let faction = if k < per_party / 2 { "a" } else { "b" };
        header.push(format!("R{faction}{k}"));
    }
    let mut text = header.join(",") + "\n";
    for t in 0..votes {
        let dem: bool = rng.random();
        let rep_a = !dem;
        // A third of the votes divide the Republican factions.
        let rep_b = if t % 3 == 0 { dem } else { rep_a };
        let row: Vec<String> = (0..2 * per_party)
            .map(|m| {
                let line = if m < per_party {
                    dem
                } else if m < per_party + per_party / 2 {
                    rep_a
                } else {
                    rep_b
                };
                if rng.random::<f64>() < 0.05 {
                    "NA".to_string()
                } else {
                    let vote = if rng.random::<f64>() < 0.1 {
                        !line
                    } else {
                        line
                    };
                    (if vote { "y" } else { "n" }).to_string()
                }
            })
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

#[test]
fn analyze_recovers_parties_and_factions() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("votes.csv");
    std::fs::write(&obs, synthetic_roll_call(1984)).unwrap();
    let o = modnet(&[
        "analyze",
        "--obs",
        path_str(&obs),
        "--alpha",
        "0.01",
        "--max-depth",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let root = &v["results"]["tree"];
    assert_eq!(root["test"]["p_value"], "<1e-4");
    assert_eq!(root["test"]["reject"], true);
    let children = root["children"].as_array().unwrap();
    assert_eq!(children.len(), 2);

    let members = |node: &Value| -> Vec<String> {
        node["members"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m.as_str().unwrap().to_string())
            .collect()
    };
    let purity = |node: &Value, prefix: &str| {
        let m = members(node);
        m.iter().filter(|x| x.starts_with(prefix)).count() as f64 / m.len() as f64
    };
    let rep = children
        .iter()
        .find(|c| purity(c, "R") > 0.5)
        .expect("a Republican-majority child");
    let dem = children
        .iter()
        .find(|c| purity(c, "D") > 0.5)
        .expect("a Democrat-majority child");
    assert!(purity(rep, "R") >= 0.95 && purity(dem, "D") >= 0.95);
    assert_eq!(rep["test"]["reject"], true, "factions should be detected");
    let factions = rep["children"].as_array().unwrap();
    assert_eq!(factions.len(), 2);
    for f in factions {
        let share_a = purity(f, "Ra");
        assert!(share_a >= 0.9 || share_a <= 0.1, "faction purity {share_a}");
    }
}

#[test]
fn analyze_on_goe_rejects_at_about_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let runs = 200;
    let mut rejections = 0;
    for r in 0..runs {
        let path = dir.path().join(format!("goe{r}.csv"));
        save_matrix_csv(
            &path,
            &sample_goe(40, Seed::new(31).replicate(r)).unwrap(),
            None,
        )
        .unwrap();
        let o = modnet(&[
            "analyze",
            "--matrix",
            path_str(&path),
            "--alpha",
            "0.05",
            "--max-depth",
            "1",
            "--method",
            "modularity2",
            "--conv-samples",
            "20000",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        if stdout_json(&o)["results"]["tree"]["test"]["reject"] == true {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / runs as f64;
    let se = (0.05 * 0.95 / runs as f64).sqrt();
    assert!((rate - 0.05).abs() <= 0.03f64.max(3.0 * se), "rate {rate}");
}

#[test]
fn reports_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("power{threads}.json"));
        let o = modnet(&[
            "--seed",
            "11",
            "--reps",
            "100",
            "--threads",
            threads,
            "--format",
            "json",
            "--out",
            path_str(&out),
            "power",
            "--n",
            "16,24",
            "--conv-samples",
            "20000",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
