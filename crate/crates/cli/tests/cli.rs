use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const CORPUS: &[&str] = &[
    "BI", "BI_BII", "BI_prime", "BIII", "CisR", "Frame1", "MI", "MII", "MIII", "MIIIb", "MIV", "MV", "NonAut-I-2",
    "NonAut-I-3", "NonAut-II-1", "NonAut-II-2",
];

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(format!("{name}.crn"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crn-capacity")).args(args).env_remove("CRN_CAPACITY_JOBS").output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn analyze_json(name: &str, extra: &[&str]) -> (i32, Value) {
    let path = model(name);
    let mut args = vec!["analyze", path.to_str().unwrap(), "--format", "json"];
    args.extend_from_slice(extra);
    let out = run(&args);
    (out.status.code().unwrap(), serde_json::from_str(&stdout(&out)).unwrap())
}

fn write(dir: &tempfile::TempDir, name: &str, content: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["analyze", model("BI").to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["analyze", model("Frame1").to_str().unwrap()]).status.code(), Some(3));
    let bad = write(&dir, "bad.crn", "A -> -> B\n");
    assert_eq!(run(&["analyze", &bad]).status.code(), Some(2));
    let bad_symmetry = write(&dir, "sym.crn", "A -> B @ 1\nsymmetry: A <-> C\n");
    assert_eq!(run(&["analyze", &bad_symmetry]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(12));
    assert_eq!(run(&["analyze", "/no/such/file.crn"]).status.code(), Some(12));
    assert_eq!(run(&["analyze", model("MI").to_str().unwrap(), "--frozen", "Q"]).status.code(), Some(12));
    assert_eq!(run(&["bifurcate", model("BI").to_str().unwrap(), "--witness-segment"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn reports_match_schema() {
    let schema: Value =
        serde_json::from_str(&fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json")).unwrap())
            .unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for name in CORPUS {
        for extra in [&[][..], &["--validate"][..], &["--symmetry", "none"][..]] {
            let (_, report) = analyze_json(name, extra);
            let errors: Vec<String> = validator.iter_errors(&report).map(|e| format!("{e} at {}", e.instance_path)).collect();
            assert!(errors.is_empty(), "{name} {extra:?}: {errors:#?}");
        }
    }
}

#[test]
fn verdicts_and_statuses() {
    let expect = [
        ("BI", "NoCapacity"),
        ("BI_prime", "NoCapacity"),
        ("BI_BII", "Capable"),
        ("BIII", "Capable"),
        ("MI", "Capable"),
        ("MII", "NoCapacity"),
        ("MIII", "Capable"),
        ("MIV", "NoCapacity"),
        ("MV", "NoCapacity"),
        ("NonAut-II-2", "Capable"),
    ];
    for (name, verdict) in expect {
        let (code, report) = analyze_json(name, &[]);
        assert_eq!(code, 0, "{name}");
        assert_eq!(report["status"], "ok");
        assert_eq!(report["capacity"]["verdict"], verdict, "{name}");
    }
    let (code, report) = analyze_json("Frame1", &[]);
    assert_eq!(code, 3);
    assert_eq!(report["status"], "inconsistent");
    assert_eq!(report["feedbacks"].as_array().unwrap().len(), 1);

    let (_, report) = analyze_json("BI_BII", &["--validate"]);
    assert_eq!(report["validation"]["symbols"], "witness");
    assert_eq!(report["validation"]["zero_eigenvalue"], true);
    assert_eq!(report["motif_classes"], 3);
}

/// Golden reports; regenerate with `UPDATE_GOLDEN=1 cargo test -p crn-cli`.
#[test]
fn golden_reports() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for name in CORPUS {
        let path = model(name);
        for (suffix, args) in [
            ("json", vec!["analyze", path.to_str().unwrap(), "--format", "json"]),
            ("motifs.txt", vec!["motifs", path.to_str().unwrap()]),
        ] {
            let actual = stdout(&run(&args));
            let file = golden.join(format!("{name}.{suffix}"));
            if update {
                fs::create_dir_all(&golden).unwrap();
                fs::write(&file, &actual).unwrap();
            } else {
                let expected = fs::read_to_string(&file).unwrap_or_else(|_| panic!("missing {}", file.display()));
                assert_eq!(actual, expected, "{} differs from golden", file.display());
            }
        }
    }
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let path = model("BI_BII");
    let p = path.to_str().unwrap();
    let one = stdout(&run(&["--jobs", "1", "analyze", p, "--format", "json", "--validate"]));
    let four = stdout(&run(&["--jobs", "4", "analyze", p, "--format", "json", "--validate"]));
    let again = stdout(&run(&["analyze", p, "--format", "json", "--validate"]));
    assert_eq!(one, four);
    assert_eq!(one, again);
}

#[test]
fn simulate_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let kinetics = write(&dir, "mi.kin", "default: mi k=1 beta=3\n");
    let out = dir.path().join("traj.csv");
    let status = run(&[
        "simulate",
        model("MI").to_str().unwrap(),
        "--kinetics",
        &kinetics,
        "--x0",
        "0.8,0.2",
        "--t-end",
        "2000",
        "--points",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0));
    let csv = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,x_0,x_1");
    assert_eq!(lines.len(), 12);
    let last: Vec<f64> = lines[11].split(',').map(|v| v.parse().unwrap()).collect();
    let upper = 0.5 + (0.25f64 - 1.0 / 9.0).sqrt();
    assert_eq!(last[0], 2000.0);
    assert!((last[1] - upper).abs() < 1e-6 && (last[1] + last[2] - 1.0).abs() < 1e-9, "{last:?}");

    let bad_x0 = run(&["simulate", model("MI").to_str().unwrap(), "--kinetics", &kinetics, "--x0", "1", "--t-end", "1"]);
    assert_eq!(bad_x0.status.code(), Some(12));
    let bad_spec = write(&dir, "bad.kin", "default: nonsense\n");
    let bad = run(&["simulate", model("MI").to_str().unwrap(), "--kinetics", &bad_spec, "--x0", "1,1", "--t-end", "1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bifurcate_writes_branch_csv() {
    let dir = tempfile::tempdir().unwrap();
    let kinetics = write(&dir, "mi.kin", "default: mi k=1 beta=$p\n");
    let out = run(&[
        "bifurcate",
        model("MI").to_str().unwrap(),
        "--kinetics",
        &kinetics,
        "--range",
        "0:4",
        "--grid",
        "81",
        "--x0",
        "0.5,0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("param,state_index,value,stability"));
    let rows: Vec<(f64, f64, String)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap(), f[3].to_string())
        })
        .collect();
    // The symmetric state is stable up to beta = 2 and unstable beyond.
    for (p, v, s) in &rows {
        if (v - 0.5).abs() < 1e-9 && (p - 2.0).abs() > 0.05 {
            assert_eq!(s, if *p < 2.0 { "stable" } else { "unstable" }, "beta {p}");
        }
    }
    assert_eq!(rows.iter().filter(|r| (r.0 - 3.0).abs() < 1e-12).count(), 5);

    let seg = run(&["bifurcate", model("MIII").to_str().unwrap(), "--witness-segment", "--grid", "5"]);
    assert_eq!(seg.status.code(), Some(0));
    assert!(stdout(&seg).starts_with("param,state_index,value,stability\n"));
    let missing = run(&["bifurcate", model("MI").to_str().unwrap(), "--kinetics", &kinetics]);
    assert_eq!(missing.status.code(), Some(12));
}
