//! Invariant suites applicable to one spec, run by `jumplab verify`.

use std::sync::Arc;

use jumplab_core::compensator::{decomposition_check, integral_formula_check};
use jumplab_core::process::{
    conditional_mass_check, localizing_check, mc_mean, path_uniform, pathwise_decomposition,
};
use jumplab_core::stochint::{cherny_harness, nonsemimartingale_witness, pathwise_integral_check};
use jumplab_core::{
    classify_with, simulate_paths, CompensatedJump, Error, Regime, Result, SimOptions, Verdict,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::report::{matches_expected, REPORT_VERSION};
use crate::specfile::{Loaded, SpecFile};
use crate::{
    exit_code, DEFAULT_TRUNCATIONS, EXIT_INVARIANT, EXIT_NUMERICAL, EXIT_OK, EXIT_UNKNOWN,
};

pub const FORMULA_INTERVALS: usize = 100;
pub const DECOMPOSITION_POINTS: usize = 256;
pub const DECOMPOSITION_TOL: f64 = 1e-8;
pub const PATHWISE_TOL: f64 = 2e-8;
pub const PATHWISE_PATHS: usize = 1000;
pub const MC_PATHS: usize = 100_000;
pub const MC_SIGMAS: f64 = 4.0;
pub const LOCALIZING_STEPS: usize = 5;
pub const WITNESS_INDICES: [usize; 3] = [1, 2, 3];
pub const INTEGRAL_PATHS: usize = 200;
pub const INTEGRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: Value,
    /// Exit code class of an error raised by the check, if any.
    #[serde(skip)]
    pub error_code: Option<i32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub report: &'static str,
    pub version: u32,
    pub source: String,
    pub regime: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn exit_code(&self) -> i32 {
        if self
            .checks
            .iter()
            .any(|c| !c.passed && c.error_code.is_none())
        {
            EXIT_INVARIANT
        } else if self
            .checks
            .iter()
            .any(|c| c.error_code == Some(EXIT_NUMERICAL))
        {
            EXIT_NUMERICAL
        } else if self.checks.iter().any(|c| !c.passed) {
            EXIT_INVARIANT
        } else if self.regime == "unknown" {
            EXIT_UNKNOWN
        } else {
            EXIT_OK
        }
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn push(&mut self, suite: &'static str, name: impl Into<String>, passed: bool, detail: Value) {
        self.checks.push(Check {
            suite,
            name: name.into(),
            passed,
            detail,
            error_code: None,
        });
    }

    /// Records an error as a failed check; hypothesis errors mean the suite does not apply.
    fn error(&mut self, suite: &'static str, name: impl Into<String>, e: Error) {
        if matches!(
            e,
            Error::HypothesisViolation(_) | Error::EventuallyConstant { .. }
        ) {
            return;
        }
        self.checks.push(Check {
            suite,
            name: name.into(),
            passed: false,
            detail: json!({"error": e.to_string()}),
            error_code: Some(exit_code(&e)),
        });
    }

    fn attempt(
        &mut self,
        suite: &'static str,
        name: &str,
        f: impl FnOnce(&mut Suite) -> Result<()>,
    ) {
        if let Err(e) = f(self) {
            self.error(suite, name, e);
        }
    }
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialise")
}

/// Interior window: `(0, t_G)` for a finite endpoint, `(0, 16]` otherwise.
fn window(loaded: &Loaded) -> f64 {
    let tg = loaded.law.right_endpoint();
    if tg.is_finite() {
        tg
    } else {
        loaded.law.horizon().min(16.0)
    }
}

fn classification(s: &mut Suite, loaded: &Loaded, verdict: &Verdict) {
    let detail = json!({"regime": verdict.regime.name(), "delta_mu": verdict.delta_mu()});
    match &loaded.entry {
        Some(e) => s.push(
            "classify",
            format!("expected {}", e.expected.name()),
            matches_expected(&e.expected, e.expected_delta_mu, verdict),
            detail,
        ),
        None => s.push("classify", "classified", true, detail),
    }
    for c in verdict.evidence.consistency.iter().filter(|c| c.applicable) {
        s.push(
            "probe_equivalence",
            c.name.clone(),
            c.passed,
            json!(c.detail),
        );
    }
}

fn round_trip(s: &mut Suite, loaded: &Loaded, verdict: &Verdict) {
    let file = match SpecFile::export(loaded.name.as_deref(), &loaded.law, &loaded.spec) {
        Ok(f) => f,
        Err(_) => return,
    };
    s.attempt("spec_round_trip", "export then ingest", |s| {
        let back = SpecFile::from_json(&file.to_json())?.load()?;
        let again = classify_with(&back.spec, &back.law, &loaded.options)?;
        let same = again.regime == verdict.regime && again.delta_mu() == verdict.delta_mu();
        s.push(
            "spec_round_trip",
            "export then ingest",
            same,
            json!({"regime": again.regime.name(), "delta_mu": again.delta_mu()}),
        );
        Ok(())
    });
}

fn compensator_suites(s: &mut Suite, loaded: &Loaded, comp: &Arc<CompensatedJump>, seed: u64) {
    let w = window(loaded);
    s.attempt("integral_formula", "random intervals", |s| {
        let mut failed = Vec::new();
        for i in 0..FORMULA_INTERVALS as u64 {
            let u = path_uniform(seed ^ 0x1f0a, 2 * i);
            let v = path_uniform(seed ^ 0x1f0a, 2 * i + 1);
            let (a, b) = (w * u.min(v), w * u.max(v));
            let c = integral_formula_check(comp, a, b)?;
            if !c.passed {
                failed.push(json!({"a": a, "b": b, "detail": c.detail}));
            }
        }
        s.push(
            "integral_formula",
            format!("{FORMULA_INTERVALS} random intervals"),
            failed.is_empty(),
            json!({"failures": failed}),
        );
        Ok(())
    });
    s.attempt("decomposition", "pointwise identities", |s| {
        let d = decomposition_check(
            &loaded.spec,
            &loaded.law,
            DECOMPOSITION_POINTS,
            DECOMPOSITION_TOL,
        )?;
        s.push(
            "decomposition",
            "pointwise identities",
            d.passed,
            to_json(&d),
        );
        Ok(())
    });
    s.attempt("decomposition", "pathwise identity", |s| {
        let grid: Vec<f64> = (0..=16).map(|i| w * i as f64 / 16.0).collect();
        let p = pathwise_decomposition(&loaded.spec, &loaded.law, &grid, PATHWISE_PATHS, seed)?;
        s.push(
            "decomposition",
            "pathwise identity",
            p.max_deviation <= PATHWISE_TOL,
            json!({"max_deviation": p.max_deviation, "tolerance": PATHWISE_TOL, "paths": PATHWISE_PATHS}),
        );
        Ok(())
    });
}

fn monte_carlo(
    s: &mut Suite,
    loaded: &Loaded,
    comp: &Arc<CompensatedJump>,
    verdict: &Verdict,
    paths: usize,
    seed: u64,
) {
    let tg = loaded.law.right_endpoint();
    let mid = 0.5 * window(loaded);
    s.attempt("monte_carlo", "means", |s| {
        let mut grid = vec![0.0, mid];
        if tg.is_finite() {
            grid.push(tg);
        }
        let bundle = simulate_paths(comp, &grid, paths, seed, &SimOptions::default())?;
        for &t in &grid[1..] {
            let r = mc_mean(&bundle, t)?;
            if r.target.is_some() {
                s.push(
                    "monte_carlo",
                    format!("E[M_{t}]"),
                    r.within(MC_SIGMAS),
                    to_json(&r),
                );
            }
        }
        Ok(())
    });
    if verdict.delta_mu().is_some() {
        s.attempt("monte_carlo", "conditional mass", |s| {
            let r = conditional_mass_check(comp, mid, paths, seed)?;
            s.push(
                "monte_carlo",
                format!("conditional mass at s = {mid}"),
                r.within(MC_SIGMAS),
                to_json(&r),
            );
            Ok(())
        });
    }
    let strict = matches!(
        verdict.regime,
        Regime::NonintegrableLocalMartingale | Regime::IntegrableStrictLocalMartingale { .. }
    );
    if strict && loaded.law.endpoint_atom() == 0.0 {
        s.attempt("localizing", "stopped means", |s| {
            let r = localizing_check(comp, LOCALIZING_STEPS, paths, seed)?;
            let means = r.steps.iter().all(|st| st.stopped_mean.within(MC_SIGMAS));
            s.push("localizing", "stopped means", means, to_json(&r.steps));
            s.push(
                "localizing",
                "endpoint probability nondecreasing",
                r.endpoint_probability_nondecreasing(),
                json!(r
                    .steps
                    .iter()
                    .map(|st| st.reaches_endpoint)
                    .collect::<Vec<_>>()),
            );
            Ok(())
        });
    }
}

fn stochastic_integrals(s: &mut Suite, loaded: &Loaded, verdict: &Verdict, seed: u64) {
    if verdict.regime == Regime::NotSemimartingale {
        for n in WITNESS_INDICES {
            s.attempt("witness", &format!("n = {n}"), |s| {
                let w = nonsemimartingale_witness(&loaded.spec, &loaded.law, n)?;
                let (sup, integral) = w.reevaluate(&loaded.spec, &loaded.law)?;
                s.push(
                    "witness",
                    format!("n = {n}"),
                    sup <= 1.0 / n as f64 && integral >= 1.0,
                    json!({"sup_norm": sup, "elementary_integral": integral}),
                );
                Ok(())
            });
        }
    }
    if verdict.regime == Regime::UiMartingaleNotH1 {
        let eps = loaded
            .run
            .truncations
            .clone()
            .unwrap_or(DEFAULT_TRUNCATIONS.to_vec());
        s.attempt("cherny", "harness", |s| {
            let h = cherny_harness(&loaded.spec, &eps)?;
            s.push(
                "cherny",
                "chain inequality",
                h.rows.iter().all(|r| r.chain_holds),
                to_json(&h.rows),
            );
            let expected = loaded
                .entry
                .as_ref()
                .and_then(|e| e.integrand_expected.clone())
                .unwrap_or(Regime::NonintegrableLocalMartingale);
            s.push(
                "cherny",
                format!("F^J is {}", expected.name()),
                h.integrated.regime == expected,
                json!({"regime": h.integrated.regime.name(), "certificate_id": h.certificate_id}),
            );
            Ok(())
        });
    }
    if let Some(j) = loaded.entry.as_ref().and_then(|e| e.integrand.as_ref()) {
        s.attempt("stochastic_integral", "pathwise", |s| {
            let grid: Vec<f64> = (0..=16).map(|i| window(loaded) * i as f64 / 16.0).collect();
            let worst =
                pathwise_integral_check(j, &loaded.spec, &loaded.law, &grid, INTEGRAL_PATHS, seed)?;
            s.push(
                "stochastic_integral",
                "pathwise integral matches M^(G,F^J)",
                worst <= INTEGRAL_TOL,
                json!({"max_deviation": worst, "tolerance": INTEGRAL_TOL}),
            );
            Ok(())
        });
    }
}

pub fn run(source: &str, loaded: &Loaded, paths: Option<usize>, seed: u64) -> Result<VerifyReport> {
    let paths = paths.or(loaded.run.paths).unwrap_or(MC_PATHS);
    let comp = Arc::new(CompensatedJump::with_options(
        &loaded.spec,
        &loaded.law,
        loaded.options,
    )?);
    let verdict = classify_with(&loaded.spec, &loaded.law, &loaded.options)?;
    let mut s = Suite { checks: Vec::new() };
    classification(&mut s, loaded, &verdict);
    round_trip(&mut s, loaded, &verdict);
    if verdict.evidence.op_abs.is_finite() {
        compensator_suites(&mut s, loaded, &comp, seed);
    }
    monte_carlo(&mut s, loaded, &comp, &verdict, paths, seed);
    stochastic_integrals(&mut s, loaded, &verdict, seed);
    let passed = s.checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        report: "verify",
        version: REPORT_VERSION,
        source: source.to_string(),
        regime: verdict.regime.name().to_string(),
        passed,
        checks: s.checks,
    })
}
