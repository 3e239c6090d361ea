use std::path::Path;
use std::process::{Command, Output};

use jumplab_cli::report::{validate_report, validate_spec, verdict_report};
use jumplab_cli::specfile::SpecFile;
use jumplab_core::{classify, gallery};
use serde_json::Value;

fn jumplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumplab"))
        .args(args)
        .env_remove("JUMPLAB_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn assert_valid(v: &Value) {
    if let Err(errs) = validate_report(v) {
        panic!("report does not match the schema: {errs:?}");
    }
}

#[test]
fn classify_examples() {
    let out = jumplab(&["classify", "gallery:integrable-slm"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["regime"], "integrable_strict_local_martingale");
    assert_eq!(v["direction"], "supermartingale");
    assert!((v["delta_mu"].as_f64().unwrap() + 1.0).abs() <= 1e-9);
    assert_valid(&v);

    let out = jumplab(&["classify", "gallery:h1-bounded"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["regime"], "h1_martingale");
}

#[test]
fn integrate_cherny() {
    let dir = tempfile::tempdir().unwrap();
    let derived = dir.path().join("derived.json");
    let out = jumplab(&[
        "integrate",
        "gallery:ui-not-h1",
        "--integrand",
        "cherny",
        "--export",
        derived.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_valid(&v);
    assert_eq!(v["regime"], "nonintegrable_local_martingale");
    assert_eq!(v["certificate_id"], "cherny-blocks");
    assert!(v["harness"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["chain_holds"] == true));

    let again = jumplab(&["classify", derived.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(json(&again)["regime"], "nonintegrable_local_martingale");
}

#[test]
fn integrate_step_file() {
    let dir = tempfile::tempdir().unwrap();
    let j = write(
        dir.path(),
        "j.json",
        r#"{"steps": [{"lo": 0.0, "hi": 0.5, "value": 2.0}], "bound": 2.0}"#,
    );
    let out = jumplab(&["integrate", "gallery:h1-bounded", "--integrand", &j]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_valid(&v);
    assert_eq!(v["regime"], "h1_martingale");
    assert!(v["harness"].is_null());

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"steps": [{"lo": 0.5, "hi": 0.1, "value": 1.0}], "bound": 1.0}"#,
    );
    assert_eq!(
        jumplab(&["integrate", "gallery:h1-bounded", "--integrand", &bad])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn witnesses_and_budget() {
    let out = jumplab(&["witness", "gallery:not-semimartingale", "--n", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_valid(&v);
    assert!(v["reevaluated"]["sup_norm"].as_f64().unwrap() <= 0.2);
    assert!(v["reevaluated"]["elementary_integral"].as_f64().unwrap() >= 1.0);

    let dir = tempfile::tempdir().unwrap();
    let control = write(
        dir.path(),
        "control.json",
        r#"{"version": 1,
            "law": {"kind": "custom", "pieces": [{"lower": 0, "upper": 1, "density": "0.5"}], "atoms": [{"at": 1, "mass": 0.5}]},
            "drift": {"F0": 0, "density": "1"}}"#,
    );
    let out = jumplab(&["witness", &control, "--n", "2"]);
    assert_eq!(out.status.code(), Some(4));
    let v = json(&out);
    assert_valid(&v);
    assert_eq!(v["status"], "budget_exhausted");
    assert!(v["achieved"].as_f64().unwrap() <= 0.25 + 1e-12);

    assert_eq!(
        jumplab(&["witness", "gallery:h1-bounded"]).status.code(),
        Some(3)
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(
        dir.path(),
        "unknown.json",
        r#"{"version": 1, "law": {"kind": "uniform"},
            "drift": {"F0": 0.8414709848078965, "density": "cos(1/(1-t))/(1-t)^2", "closed_form": "sin(1/(1-t))"},
            "run": {"tolerances": {"max_depth": 20}}}"#,
    );
    let out = jumplab(&["classify", &unknown]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_valid(&v);
    assert_eq!(v["regime"], "unknown");
    assert_eq!(v["blocking"], "op_abs");

    let numerical = write(
        dir.path(),
        "numerical.json",
        r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "log(t - 2)"}}"#,
    );
    assert_eq!(jumplab(&["classify", &numerical]).status.code(), Some(4));

    for (name, text) in [
        (
            "key.json",
            r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1", "f1": 2}}"#,
        ),
        (
            "tol.json",
            r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1"}, "run": {"tolerances": {"tol_rel": 0}}}"#,
        ),
        (
            "expr.json",
            r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1 + * t"}}"#,
        ),
        (
            "ident.json",
            r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "x"}}"#,
        ),
        (
            "law.json",
            r#"{"version": 1, "law": {"kind": "exponential", "rate": -1}, "drift": {"F0": 0, "density": "1"}}"#,
        ),
        ("json.json", "{"),
    ] {
        let p = write(dir.path(), name, text);
        let out = jumplab(&["classify", &p]);
        assert_eq!(
            out.status.code(),
            Some(3),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(
        jumplab(&["classify", "gallery:missing"]).status.code(),
        Some(3)
    );
    assert_eq!(jumplab(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(
        jumplab(&["simulate", "gallery:h1-bounded", "--grid", "0.5,0.2"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn simulate_csv_and_seed() {
    let base = [
        "simulate",
        "gallery:integrable-slm",
        "--paths",
        "50",
        "--grid",
        "0,0.5,1",
    ];
    let seeded = jumplab(&[&base[..], &["--seed", "11"]].concat());
    assert_eq!(seeded.status.code(), Some(0));
    let text = String::from_utf8(seeded.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path_id,t,gamma,value"));
    assert_eq!(lines.count(), 150);

    let from_env = Command::new(env!("CARGO_BIN_EXE_jumplab"))
        .args(base)
        .env("JUMPLAB_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(from_env.stdout, seeded.stdout);
    let other = jumplab(&[&base[..], &["--seed", "12"]].concat());
    assert_ne!(other.stdout, seeded.stdout);
}

#[test]
fn gallery_commands() {
    let out = jumplab(&["gallery", "list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), gallery::list().len());
    assert!(text
        .lines()
        .any(|l| l.starts_with("integrable-slm\tintegrable_strict_local_martingale")));
    assert_eq!(
        jumplab(&["gallery", "export", "nope"]).status.code(),
        Some(3)
    );
}

#[test]
fn verify_an_entry() {
    let out = jumplab(&["verify", "integrable-slm", "--paths", "20000"]);
    let v = json(&out);
    assert_valid(&v);
    assert_eq!(out.status.code(), Some(0), "{v:#}");
    let suites: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["suite"].as_str().unwrap())
        .collect();
    for s in [
        "classify",
        "spec_round_trip",
        "integral_formula",
        "decomposition",
        "monte_carlo",
        "localizing",
    ] {
        assert!(suites.contains(&s), "missing suite {s}");
    }
}

/// Export, ingest and classify every entry; reports validate against the schema.
#[test]
fn gallery_round_trip_and_schemas() {
    let dir = tempfile::tempdir().unwrap();
    for name in gallery::list() {
        let e = gallery::load(name).unwrap();
        let direct = classify(&e.spec, &e.law).unwrap();
        let report = verdict_report(&format!("gallery:{name}"), &direct);
        assert_valid(&report);

        let path = dir.path().join(format!("{name}.json"));
        let out = jumplab(&["gallery", "export", name, "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(
            validate_spec(&serde_json::from_str(&text).unwrap()).is_ok(),
            "{name}"
        );
        let file = SpecFile::from_json(&text).unwrap();
        assert_eq!(file.to_json(), text, "{name}: export is not a fixed point");

        let out = jumplab(&["classify", path.to_str().unwrap()]);
        let ingested = json(&out);
        assert_valid(&ingested);
        assert_eq!(ingested["regime"], report["regime"], "{name}");
        assert_eq!(ingested["delta_mu"], report["delta_mu"], "{name}");
        assert_eq!(ingested["evidence"], report["evidence"], "{name}");
    }
}

#[test]
fn run_all_report() {
    let out = jumplab(&["gallery", "run-all"]);
    let v = json(&out);
    assert_valid(&v);
    assert_eq!(out.status.code(), Some(0), "{v:#}");
    assert!(v["entries"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["matches"] == true));
}
