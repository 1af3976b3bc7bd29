// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::Command as Process;

use epiq_cli::{load_scenario, parse_scenario, run, run_file, CliError, Command, Overrides, OUT_DIR_ENV};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn bundled() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn scenario(name: &str) -> PathBuf {
    scenarios_dir().join(format!("{name}.json"))
}

fn probabilities(name: &str, overrides: &Overrides) -> Vec<f64> {
    let r = run_file(&scenario(name), overrides).unwrap();
    r.details["probabilities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn outputs_match_golden_files() {
    for path in bundled() {
        let r = run_file(&path, &Overrides::default()).unwrap();
        let stem = format!("{}.{}", r.scenario, r.command);
        let csv = std::fs::read_to_string(golden_dir().join(format!("{stem}.csv"))).unwrap();
        let json = std::fs::read_to_string(golden_dir().join(format!("{stem}.json"))).unwrap();
        assert_eq!(r.table.to_csv().unwrap(), csv, "{stem}.csv");
        assert_eq!(r.to_json().unwrap(), json, "{stem}.json");
    }
}

#[test]
fn every_bundled_scenario_validates() {
    let paths = bundled();
    assert!(paths.len() >= 15);
    for path in paths {
        let s = load_scenario(&path).unwrap();
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), s.name);
        let r = run(
            &s,
            &Overrides {
                command: Some(Command::Validate),
                ..Overrides::default()
            },
        )
        .unwrap();
        assert!(r.passed(), "{}: {:?}", s.name, r.checks);
    }
}

#[test]
fn interferometer_distributions() {
    let open = probabilities("mach-zehnder-open", &Overrides::default());
    assert_eq!(open, vec![1.0, 0.0]);
    let detected = probabilities("mach-zehnder-detected", &Overrides::default());
    assert_eq!(detected, vec![0.5, 0.5]);
    let branches = probabilities("three-branches", &Overrides::default());
    assert_eq!(branches, vec![0.5, 0.5, 0.0]);
}

#[test]
fn eraser_flag_alone_flips_the_outcome() {
    let reachable = Overrides {
        reachable: Some(true),
        ..Overrides::default()
    };
    let erased = Overrides {
        reachable: Some(false),
        ..Overrides::default()
    };
    assert_eq!(probabilities("twin-eraser", &reachable), vec![0.25, 0.25, 0.5]);
    assert_eq!(probabilities("twin-eraser", &erased), vec![0.5, 0.5, 0.0]);
    assert_eq!(
        probabilities("twin-eraser-erased", &Overrides::default()),
        vec![0.5, 0.5, 0.0]
    );
}

#[test]
fn statespace_distributions_are_exact() {
    let r = run_file(&scenario("raptor"), &Overrides::default()).unwrap();
    assert_eq!(r.details["exact"], serde_json::json!(["1/4", "1/4", "1/2"]));
    let r = run_file(&scenario("split-3-5"), &Overrides::default()).unwrap();
    assert_eq!(r.details["exact"], serde_json::json!(["3/8", "5/8"]));
    assert!(r.checks.iter().any(|c| c.name == "volume invariance" && c.pass));
}

#[test]
fn montecarlo_is_deterministic_per_seed() {
    let o = |seed| Overrides {
        seed: Some(seed),
        ..Overrides::default()
    };
    let a = run_file(&scenario("coin-montecarlo"), &o(3)).unwrap();
    let b = run_file(&scenario("coin-montecarlo"), &o(3)).unwrap();
    let c = run_file(&scenario("coin-montecarlo"), &o(4)).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_ne!(a.details["outcomes"], c.details["outcomes"]);
    for row in a.details["outcomes"].as_array().unwrap() {
        let f = row["frequency"].as_f64().unwrap();
        assert!((0.4953..=0.5047).contains(&f), "{f}");
    }
}

#[test]
fn degenerate_distribution_samples_exactly() {
    for n in [1, 100, 12_345] {
        let r = run_file(
            &scenario("degenerate-montecarlo"),
            &Overrides {
                n: Some(n),
                ..Overrides::default()
            },
        )
        .unwrap();
        let f: Vec<f64> = r.details["outcomes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["frequency"].as_f64().unwrap())
            .collect();
        assert_eq!(f, vec![1.0, 0.0]);
    }
}

#[test]
fn hilbert_reports() {
    let r = run_file(&scenario("hilbert-type-b-2x3"), &Overrides::default()).unwrap();
    assert_eq!(r.details["dimension"], 6);
    assert_eq!(r.details["bases"][0]["subspace_dimensions"], serde_json::json!([3, 3]));
    assert_eq!(
        r.details["bases"][1]["subspace_dimensions"],
        serde_json::json!([2, 2, 2])
    );
    assert_eq!(r.details["commuting"], true);
    let r = run_file(&scenario("hilbert-type-c-45"), &Overrides::default()).unwrap();
    for row in r.details["overlaps"].as_array().unwrap() {
        for x in row.as_array().unwrap() {
            assert!((x.as_f64().unwrap() - 0.5).abs() < 1e-12);
        }
    }
    let r = run_file(&scenario("hilbert-contracted"), &Overrides::default()).unwrap();
    assert_eq!(
        r.details["contracted"]["operator"]["multiplicities"],
        serde_json::json!([2, 1])
    );
}

#[test]
fn missing_command_is_a_schema_error() {
    let s = parse_scenario(r#"{"name": "x", "distribution": [1, 0]}"#).unwrap();
    let err = run(&s, &Overrides::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn contingent_layers_need_a_resolution() {
    let text = std::fs::read_to_string(scenario("twin-eraser")).unwrap();
    let text = text.replace(
        "\"path_knowledge_reachable\": true",
        "\"path_knowledge_reachable\": null",
    );
    let s = parse_scenario(&text).unwrap();
    let err = run(&s, &Overrides::default()).unwrap_err();
    assert!(matches!(err, CliError::Domain(ref m) if m.contains("level-2")), "{err}");
}

fn write_temp(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn binary_exit_codes_and_outputs() {
    let bin = env!("CARGO_BIN_EXE_epiq");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let ok = Process::new(bin)
        .arg(scenario("mach-zehnder-open"))
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("mach-zehnder-open.propagate.csv")).unwrap();
    assert_eq!(csv, "outcome,label,probability,exact\n0,1,1,1\n1,2,0,0\n");
    assert!(out.join("mach-zehnder-open.propagate.json").exists());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("[PASS] normalized"));

    let env_out = tmp.path().join("from-env");
    let ok = Process::new(bin)
        .arg(scenario("raptor"))
        .env(OUT_DIR_ENV, &env_out)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(env_out.join("raptor.propagate.csv").exists());

    let bad_field = write_temp(
        tmp.path(),
        "bad.json",
        r#"{"name": "bad", "context": {"layers": [], "initial": [], "edges": [], "colour": 1}}"#,
    );
    let schema = Process::new(bin)
        .arg(&bad_field)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(schema.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&schema.stderr);
    assert!(msg.contains("context") && msg.contains("colour"), "{msg}");

    let unnormalized = write_temp(
        tmp.path(),
        "row.json",
        r#"{"name": "row", "run": {"command": "propagate"}, "context": {
            "layers": [{"property": "p", "level": 3, "labels": [0, 1]},
                       {"property": "q", "level": 3, "labels": [0, 1]}],
            "initial": ["1/sqrt2", "1/sqrt2"],
            "edges": [[[0.8, 0], [0, 1]]]}}"#,
    );
    let domain = Process::new(bin)
        .arg(&unnormalized)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(domain.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&domain.stderr).contains("not normalized"));

    let missing = Process::new(bin).arg(tmp.path().join("nope.json")).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn uniqueness_command_guards_the_born_rule() {
    let r = run_file(&scenario("uniqueness-padding"), &Overrides::default()).unwrap();
    let rows = r.details["rows"].as_array().unwrap();
    assert_eq!(rows[0]["verdict"], "fail");
    assert_eq!(rows[1]["verdict"], "pass");
    assert!(r.passed());

    // A regression guard over a grid where another candidate passes fails the run.
    let s = parse_scenario(
        r#"{"name": "g", "run": {"command": "uniqueness"},
            "uniqueness": {"shapes": [[2, 2]], "candidates": ["|a|^2", {"polynomial": [[2, 0, 1], [0, 2, 1]]}], "starts": 16}}"#,
    )
    .unwrap();
    let r = run(&s, &Overrides::default()).unwrap();
    assert!(!r.passed());
}

#[test]
fn shipped_schema_covers_bundled_scenarios() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema/scenario.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let top = schema["properties"].as_object().unwrap();
    let sections = schema["$defs"].as_object().unwrap();
    for p in bundled() {
        let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        for (key, value) in s.as_object().unwrap() {
            assert!(top.contains_key(key), "{}: {key}", p.display());
            if let (Some(def), Some(obj)) = (sections.get(key), value.as_object()) {
                let allowed = def["properties"].as_object().unwrap();
                for k in obj.keys() {
                    assert!(allowed.contains_key(k), "{}: {key}.{k}", p.display());
                }
            }
        }
    }
}
