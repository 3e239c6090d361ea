//! JSON reports and the schemas they are validated against.

use std::sync::OnceLock;
use std::time::Instant;

use jsonschema::{Draft, JSONSchema};
use jumplab_core::stochint::HarnessReport;
use jumplab_core::{
    classify, gallery, GalleryEntry, IntegralVerdict, Regime, Result, Verdict, Witness,
};
use serde_json::{json, Value};

use crate::specfile::SpecFile;

pub const REPORT_VERSION: u32 = 1;

pub const SPEC_SCHEMA: &str = include_str!("../../../schemas/spec.schema.json");
pub const REPORT_SCHEMA: &str = include_str!("../../../schemas/report.schema.json");

/// Tolerance on `Δμ` for an expected value of zero.
pub const ZERO_MASS_TOL: f64 = 1e-6;
/// Relative tolerance on a nonzero expected `Δμ`.
pub const MASS_REL_TOL: f64 = 1e-9;

const SPEC_SCHEMA_ID: &str = "https://jumplab.invalid/schemas/spec.schema.json";

fn parsed(text: &str) -> Value {
    serde_json::from_str(text).expect("shipped schema is JSON")
}

fn compiled(cell: &'static OnceLock<JSONSchema>, text: &str) -> &'static JSONSchema {
    cell.get_or_init(|| {
        JSONSchema::options()
            .with_draft(Draft::Draft7)
            .with_document(SPEC_SCHEMA_ID.into(), parsed(SPEC_SCHEMA))
            .compile(&parsed(text))
            .expect("shipped schema compiles")
    })
}

fn check(schema: &JSONSchema, value: &Value) -> std::result::Result<(), Vec<String>> {
    schema
        .validate(value)
        .map_err(|errs| errs.map(|e| format!("{}: {e}", e.instance_path)).collect())
}

pub fn validate_spec(value: &Value) -> std::result::Result<(), Vec<String>> {
    static CELL: OnceLock<JSONSchema> = OnceLock::new();
    check(compiled(&CELL, SPEC_SCHEMA), value)
}

pub fn validate_report(value: &Value) -> std::result::Result<(), Vec<String>> {
    static CELL: OnceLock<JSONSchema> = OnceLock::new();
    check(compiled(&CELL, REPORT_SCHEMA), value)
}

fn envelope(kind: &str, source: &str, body: Value) -> Value {
    let mut v = json!({"report": kind, "version": REPORT_VERSION, "source": source});
    if let (Some(map), Value::Object(body)) = (v.as_object_mut(), body) {
        map.extend(body);
    }
    v
}

pub fn verdict_report(source: &str, verdict: &Verdict) -> Value {
    envelope(
        "verdict",
        source,
        serde_json::to_value(verdict).expect("verdicts serialise"),
    )
}

pub fn witness_report(source: &str, w: &Witness, sup: f64, integral: f64) -> Value {
    envelope(
        "witness",
        source,
        json!({
            "status": "found",
            "n": w.n,
            "witness": w,
            "reevaluated": {"sup_norm": sup, "elementary_integral": integral},
        }),
    )
}

pub fn witness_exhausted(source: &str, n: usize, achieved: f64) -> Value {
    envelope(
        "witness",
        source,
        json!({"status": "budget_exhausted", "n": n, "achieved": achieved}),
    )
}

pub fn integrate_report(
    source: &str,
    integrand: &str,
    derived: &SpecFile,
    verdict: &Verdict,
    harness: Option<&HarnessReport>,
) -> Value {
    let certificate_id = match &verdict.evidence.op_abs {
        IntegralVerdict::Divergent {
            certificate: Some(id),
            ..
        } => Some(id.clone()),
        _ => harness.map(|h| h.certificate_id.clone()),
    };
    envelope(
        "integrate",
        source,
        json!({
            "integrand": integrand,
            "derived_spec": derived,
            "regime": verdict.regime.name(),
            "certificate_id": certificate_id,
            "verdict": verdict,
            "harness": harness,
        }),
    )
}

/// Regime and `Δμ` agree with an expectation.
pub fn matches_expected(expected: &Regime, expected_dm: Option<f64>, verdict: &Verdict) -> bool {
    let regime_ok = match (expected, &verdict.regime) {
        (
            Regime::IntegrableStrictLocalMartingale {
                direction: d0,
                delta_mu: m0,
            },
            Regime::IntegrableStrictLocalMartingale {
                direction: d1,
                delta_mu: m1,
            },
        ) => d0 == d1 && (m0 - m1).abs() <= MASS_REL_TOL * m0.abs().max(1.0),
        (a, b) => a.name() == b.name(),
    };
    let mass_ok = match expected_dm {
        None => true,
        Some(dm) => verdict.delta_mu().is_some_and(|got| {
            let tol = if dm == 0.0 {
                ZERO_MASS_TOL
            } else {
                MASS_REL_TOL * dm.abs()
            };
            (got - dm).abs() <= tol
        }),
    };
    regime_ok && mass_ok
}

pub fn gallery_row(entry: &GalleryEntry) -> Result<Value> {
    let start = Instant::now();
    let verdict = classify(&entry.spec, &entry.law)?;
    Ok(json!({
        "name": entry.name,
        "expected": entry.expected.name(),
        "regime": verdict.regime.name(),
        "delta_mu": verdict.delta_mu(),
        "expected_delta_mu": entry.expected_delta_mu,
        "matches": matches_expected(&entry.expected, entry.expected_delta_mu, &verdict),
        "consistency_passed": verdict.evidence.all_passed(),
        "seconds": start.elapsed().as_secs_f64(),
    }))
}

pub fn gallery_run_all() -> Result<Vec<Value>> {
    gallery::list()
        .into_iter()
        .map(|n| gallery_row(&gallery::load(n)?))
        .collect()
}
