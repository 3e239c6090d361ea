//! The compensated jump `𝒦F`, the change in mass `Δμ` and the integrability
//! report that feeds the classifier.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::drift::{
    check_grid, variation_decompose, DriftFunction, DriftSpec, LimitHint, ProbeKind, Tri,
};
use crate::error::{Error, Result};
use crate::measure::{
    improper_integral, tail_limit, IntegralVerdict, JumpLaw, LimitVerdict, ProbeAids, ProbeOptions,
};

/// Agreement required between a declared limit and a conclusive probe.
const HINT_LIMIT_TOL: f64 = 1e-6;
const FORMULA_TOL: f64 = 1e-8;
const MASS_TOL: f64 = 1e-6;
const SELF_TEST_INTERVALS: usize = 3;
const SELF_TEST_SEED: u64 = 0x5eed_0f0c;
const CANCELLATION_ULPS: f64 = 8.0;

/// A limit after combining the probe with any declared value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Resolved {
    Value(f64),
    NoFiniteLimit,
    Unknown,
}

impl Resolved {
    pub fn value(self) -> Option<f64> {
        match self {
            Resolved::Value(v) => Some(v),
            _ => None,
        }
    }
}

/// `𝒦F` for a drift bound to its law, with memoised probes.
pub struct CompensatedJump {
    drift: DriftFunction,
    opts: ProbeOptions,
    total_variation: OnceLock<Result<DriftFunction>>,
    probes: [OnceLock<Result<IntegralVerdict>>; 6],
    signed: OnceLock<Result<IntegralVerdict>>,
    left_limit: OnceLock<Result<LimitVerdict>>,
    survival_limit: OnceLock<Result<LimitVerdict>>,
}

impl std::fmt::Debug for CompensatedJump {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompensatedJump")
            .field("drift", &self.drift)
            .finish()
    }
}

fn slot(kind: ProbeKind) -> usize {
    ProbeKind::ALL.iter().position(|k| *k == kind).unwrap()
}

impl CompensatedJump {
    pub fn new(spec: &DriftSpec, law: &JumpLaw) -> Result<CompensatedJump> {
        CompensatedJump::with_options(spec, law, ProbeOptions::default())
    }

    pub fn with_options(
        spec: &DriftSpec,
        law: &JumpLaw,
        opts: ProbeOptions,
    ) -> Result<CompensatedJump> {
        opts.validate()?;
        Ok(CompensatedJump::from_drift(spec.bind(law)?, opts))
    }

    pub fn from_drift(drift: DriftFunction, opts: ProbeOptions) -> CompensatedJump {
        CompensatedJump {
            drift,
            opts,
            total_variation: OnceLock::new(),
            probes: Default::default(),
            signed: OnceLock::new(),
            left_limit: OnceLock::new(),
            survival_limit: OnceLock::new(),
        }
    }

    pub fn drift(&self) -> &DriftFunction {
        &self.drift
    }

    pub fn law(&self) -> &JumpLaw {
        self.drift.law()
    }

    pub fn spec(&self) -> &DriftSpec {
        self.drift.spec()
    }

    pub fn options(&self) -> &ProbeOptions {
        &self.opts
    }

    /// `|F|`, the total variation of `F` started at zero.
    pub fn total_variation(&self) -> Result<&DriftFunction> {
        self.total_variation
            .get_or_init(|| variation_decompose(self.spec()).abs.bind(self.law()))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `𝒦F(v)` on `(0, t_G)`: `F(v-) - f(v) Ḡ(v)`. A difference below the
    /// rounding noise of its two terms is reported as zero.
    fn interior(&self, v: f64) -> Result<f64> {
        let left = self.drift.left(v)?;
        let drift = self.drift.density_times(v, self.law().survival(v))?;
        let d = left - drift;
        if d.abs() <= CANCELLATION_ULPS * f64::EPSILON * left.abs().max(drift.abs()) {
            return Ok(0.0);
        }
        Ok(d)
    }

    /// `𝒦F(v)` for any `v > 0`.
    pub fn op(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "𝒦F is defined for v > 0, got {v}"
            )));
        }
        let law = self.law();
        if v < law.right_endpoint() {
            return self.interior(v);
        }
        if law.endpoint_atom() == 0.0 {
            return Ok(0.0);
        }
        self.endpoint_value()
    }

    /// `𝒦F(t_G)` when `ΔG(t_G) > 0`: `F(t_G-)` if that limit exists, else 0.
    pub fn endpoint_value(&self) -> Result<f64> {
        match self.resolved_left_limit()?.0 {
            Resolved::Value(x) => Ok(x),
            Resolved::NoFiniteLimit => Ok(0.0),
            Resolved::Unknown => Err(Error::InconclusiveLimit),
        }
    }

    fn integrand(&self, kind: ProbeKind) -> Result<Box<dyn Fn(f64) -> Result<f64> + Sync + '_>> {
        Ok(match kind {
            ProbeKind::OpAbs => Box::new(move |v| Ok(self.interior(v)?.abs())),
            ProbeKind::OpSq => Box::new(move |v| Ok(self.interior(v)?.powi(2))),
            ProbeKind::FLeftAbs => Box::new(move |v| Ok(self.drift.left(v)?.abs())),
            ProbeKind::FAbs => Box::new(move |v| Ok(self.drift.value(v)?.abs())),
            ProbeKind::FgAbs => {
                Box::new(move |v| Ok(self.drift.density_times(v, self.law().survival(v))?.abs()))
            }
            ProbeKind::FabsLeft => {
                let tv = self.total_variation()?;
                Box::new(move |v| tv.left(v))
            }
        })
    }

    /// Three-valued verdict on `∫_(0,t_G) phi dG` for the named integrand,
    /// using the certificate and tail bound declared for it.
    pub fn probe(&self, kind: ProbeKind) -> Result<&IntegralVerdict> {
        self.probes[slot(kind)]
            .get_or_init(|| {
                let hints = &self.spec().hints;
                let aids = ProbeAids {
                    certificate: hints.certificates.get(&kind),
                    tail_bound: hints.tail_bounds.get(&kind),
                };
                let phi = self.integrand(kind)?;
                improper_integral(self.law(), &*phi, aids, &self.opts)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `∫_(0,t_G) 𝒦F dG` (signed).
    pub fn signed_integral(&self) -> Result<&IntegralVerdict> {
        self.signed
            .get_or_init(|| {
                let aids = ProbeAids {
                    certificate: None,
                    tail_bound: self.spec().hints.tail_bounds.get(&ProbeKind::OpAbs),
                };
                improper_integral(self.law(), &|v| self.interior(v), aids, &self.opts)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `lim_{t↑t_G} F(t) Ḡ(t)`.
    pub fn survival_limit(&self) -> Result<&LimitVerdict> {
        self.survival_limit
            .get_or_init(|| {
                let law = self.law();
                tail_limit(
                    law,
                    &|t| Ok(self.drift.value(t)? * law.survival(t)),
                    &self.opts,
                )
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `lim_{t↑t_G} F(t)`.
    pub fn left_limit(&self) -> Result<&LimitVerdict> {
        self.left_limit
            .get_or_init(|| tail_limit(self.law(), &|t| self.drift.value(t), &self.opts))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Resolved `lim F Ḡ` and whether a hint decided it.
    pub fn resolved_survival_limit(&self) -> Result<(Resolved, bool)> {
        resolve_limit(
            self.survival_limit()?,
            self.spec().hints.limit_f_survival,
            "limit_F_survival",
            self.opts.zero_tol,
        )
    }

    pub fn resolved_left_limit(&self) -> Result<(Resolved, bool)> {
        resolve_limit(
            self.left_limit()?,
            self.spec().hints.f_left_limit,
            "F_left_limit",
            self.opts.zero_tol,
        )
    }

    /// Whether `𝒦F ∈ L¹(dG)`, and whether a hint decided it.
    pub fn op_integrable(&self) -> Result<(Option<bool>, bool)> {
        resolve_integral(
            self.probe(ProbeKind::OpAbs)?,
            self.spec().hints.op_integrable,
            "op_integrable",
        )
    }

    /// Whether `F(·-) ∈ L¹(dG)`, and whether a hint decided it.
    pub fn f_left_integrable(&self) -> Result<(Option<bool>, bool)> {
        resolve_integral(
            self.probe(ProbeKind::FLeftAbs)?,
            self.spec().hints.f_leftlimit_integrable,
            "F_leftlimit_integrable",
        )
    }
}

fn resolve_limit(
    verdict: &LimitVerdict,
    hint: LimitHint,
    name: &str,
    zero_tol: f64,
) -> Result<(Resolved, bool)> {
    let clash = |declared: String, found: String| {
        Err(Error::Contradiction(format!(
            "hint {name} = {declared} but the probe found {found}"
        )))
    };
    match verdict {
        LimitVerdict::Limit { value, .. } => {
            let v = if value.abs() <= zero_tol { 0.0 } else { *value };
            match hint {
                LimitHint::Value(x) if (x - v).abs() > HINT_LIMIT_TOL * x.abs().max(1.0) => {
                    clash(x.to_string(), format!("limit {value}"))
                }
                LimitHint::Divergent => clash("divergent".into(), format!("limit {value}")),
                _ => Ok((Resolved::Value(v), false)),
            }
        }
        LimitVerdict::DivergesToInfinity { .. } | LimitVerdict::NoLimit { .. } => match hint {
            LimitHint::Value(x) => clash(x.to_string(), verdict.label().into()),
            _ => Ok((Resolved::NoFiniteLimit, false)),
        },
        LimitVerdict::Inconclusive { .. } => Ok(match hint {
            LimitHint::Value(x) => (Resolved::Value(x), true),
            LimitHint::Divergent => (Resolved::NoFiniteLimit, true),
            LimitHint::Unknown => (Resolved::Unknown, false),
        }),
    }
}

fn resolve_integral(
    verdict: &IntegralVerdict,
    hint: Tri,
    name: &str,
) -> Result<(Option<bool>, bool)> {
    match (verdict, hint) {
        (IntegralVerdict::Finite { value, .. }, Tri::No) => Err(Error::Contradiction(format!(
            "hint {name} = no but the probe found a finite integral {value}"
        ))),
        (IntegralVerdict::Divergent { .. }, Tri::Yes) => Err(Error::Contradiction(format!(
            "hint {name} = yes but the probe proved divergence"
        ))),
        (IntegralVerdict::Finite { .. }, _) => Ok((Some(true), false)),
        (IntegralVerdict::Divergent { .. }, _) => Ok((Some(false), false)),
        (IntegralVerdict::Inconclusive { .. }, h) => Ok((h.known(), h.known().is_some())),
    }
}

/// `𝒦F(v)`.
pub fn op_gf(comp: &CompensatedJump, v: f64) -> Result<f64> {
    comp.op(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassSource {
    EndpointAtom,
    Limit,
    Hint,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralCheck {
    /// `∫_(0,t_G] 𝒦F dG - F(0)`.
    pub from_integral: f64,
    pub abs_error: f64,
    pub deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassChange {
    pub value: Option<f64>,
    pub source: MassSource,
    pub integral_check: Option<IntegralCheck>,
}

/// `Δμ = -lim F(t)Ḡ(t) 1{ΔG(t_G) = 0}`, cross-checked against
/// `∫_(0,t_G] 𝒦F dG - F(0)` when that integral is resolved.
pub fn change_in_mass(comp: &CompensatedJump) -> Result<MassChange> {
    match comp.op_integrable()?.0 {
        Some(true) => {}
        Some(false) => {
            return Err(Error::InvalidArgument(
                "the change in mass is only defined when 𝒦F is dG-integrable".into(),
            ))
        }
        None => {
            return Ok(MassChange {
                value: None,
                source: MassSource::Unknown,
                integral_check: None,
            })
        }
    }
    let law = comp.law();
    let (value, source) = if law.endpoint_atom() > 0.0 {
        (Some(0.0), MassSource::EndpointAtom)
    } else {
        match comp.resolved_survival_limit()? {
            (Resolved::Value(l), hinted) => (
                Some(if l == 0.0 { 0.0 } else { -l }),
                if hinted {
                    MassSource::Hint
                } else {
                    MassSource::Limit
                },
            ),
            (Resolved::NoFiniteLimit, _) => {
                return Err(Error::Contradiction(
                    "𝒦F is integrable but F Ḡ has no finite limit at t_G".into(),
                ))
            }
            (Resolved::Unknown, _) => (None, MassSource::Unknown),
        }
    };
    let integral_check = match (value, comp.signed_integral()?) {
        (
            Some(dm),
            IntegralVerdict::Finite {
                value: s,
                abs_error,
                ..
            },
        ) if *abs_error <= MASS_TOL => {
            let endpoint = if law.endpoint_atom() > 0.0 {
                comp.endpoint_value().ok().map(|x| x * law.endpoint_atom())
            } else {
                Some(0.0)
            };
            endpoint.map(|e| {
                let from_integral = s + e - comp.drift().f0();
                let deviation = (from_integral - dm).abs();
                IntegralCheck {
                    from_integral,
                    abs_error: *abs_error,
                    deviation,
                    passed: deviation <= MASS_TOL + abs_error,
                }
            })
        }
        _ => None,
    };
    Ok(MassChange {
        value,
        source,
        integral_check,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyCheck {
    pub name: String,
    pub applicable: bool,
    pub passed: bool,
    pub detail: String,
}

impl ConsistencyCheck {
    fn skipped(name: &str, why: &str) -> ConsistencyCheck {
        ConsistencyCheck {
            name: name.into(),
            applicable: false,
            passed: true,
            detail: why.into(),
        }
    }

    fn outcome(name: &str, passed: bool, detail: String) -> ConsistencyCheck {
        ConsistencyCheck {
            name: name.into(),
            applicable: true,
            passed,
            detail,
        }
    }
}

/// What the probes and hints settle, in the order the classifier consumes it.
#[derive(Debug, Clone, Serialize)]
pub struct Resolution {
    pub op_integrable: Option<bool>,
    #[serde(rename = "F_leftlimit_integrable")]
    pub f_left_integrable: Option<bool>,
    #[serde(rename = "limit_F_survival")]
    pub limit_f_survival: Resolved,
    #[serde(rename = "F_left_limit")]
    pub f_left_limit: Option<Resolved>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityReport {
    pub op_abs: IntegralVerdict,
    #[serde(rename = "F_left_abs")]
    pub f_left_abs: IntegralVerdict,
    #[serde(rename = "fG_abs")]
    pub fg_abs: IntegralVerdict,
    #[serde(rename = "Fabs_left")]
    pub fabs_left: IntegralVerdict,
    #[serde(rename = "F_abs")]
    pub f_abs: IntegralVerdict,
    #[serde(rename = "limit_F_survival")]
    pub limit_f_survival: LimitVerdict,
    #[serde(rename = "F_left_limit", skip_serializing_if = "Option::is_none")]
    pub f_left_limit: Option<LimitVerdict>,
    #[serde(rename = "deltaG_tG")]
    pub delta_g_tg: f64,
    pub resolved: Resolution,
    pub hints_used: Vec<String>,
    pub consistency: Vec<ConsistencyCheck>,
}

impl IntegrabilityReport {
    pub fn verdict(&self, kind: ProbeKind) -> Option<&IntegralVerdict> {
        match kind {
            ProbeKind::OpAbs => Some(&self.op_abs),
            ProbeKind::FLeftAbs => Some(&self.f_left_abs),
            ProbeKind::FgAbs => Some(&self.fg_abs),
            ProbeKind::FabsLeft => Some(&self.fabs_left),
            ProbeKind::FAbs => Some(&self.f_abs),
            ProbeKind::OpSq => None,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.consistency.iter().all(|c| c.passed)
    }
}

fn aid_usage(kind: ProbeKind, v: &IntegralVerdict, used: &mut Vec<String>) {
    match v {
        IntegralVerdict::Divergent {
            certificate: Some(id),
            ..
        } => used.push(format!("certificate {id} for {kind}")),
        IntegralVerdict::Finite {
            method: crate::measure::FiniteMethod::TailBound,
            ..
        } => used.push(format!("tail bound for {kind}")),
        _ => {}
    }
}

fn finite(v: &IntegralVerdict) -> Option<bool> {
    v.is_conclusive().then(|| v.is_finite())
}

/// Interior window used by the self-tests.
fn test_window(law: &JumpLaw) -> f64 {
    if law.right_endpoint().is_finite() {
        law.truncation(6)
    } else {
        law.horizon().min(16.0)
    }
}

/// `∫_(a,b] 𝒦F dG` against `F(a)Ḡ(a) - F(b)Ḡ(b)`.
pub fn integral_formula_check(comp: &CompensatedJump, a: f64, b: f64) -> Result<ConsistencyCheck> {
    let law = comp.law();
    let lhs = law.stieltjes_integral(&|v| comp.op(v), a, b)?;
    let fa = comp.drift().value(a)? * law.survival(a);
    let fb = comp.drift().value(b)? * law.survival(b);
    let rhs = fa - fb;
    let tol = FORMULA_TOL * fa.abs().max(fb.abs()).max(1.0);
    Ok(ConsistencyCheck::outcome(
        "integral_formula",
        (lhs - rhs).abs() <= tol,
        format!("(a, b] = ({a}, {b}]: ∫ 𝒦F dG = {lhs}, F(a)Ḡ(a) - F(b)Ḡ(b) = {rhs}"),
    ))
}

pub fn integrability_report(comp: &CompensatedJump) -> Result<IntegrabilityReport> {
    let law = comp.law();
    let atom_at_end = law.endpoint_atom() > 0.0;
    let mut hints_used = Vec::new();
    let mut verdicts = Vec::new();
    for kind in [
        ProbeKind::OpAbs,
        ProbeKind::FLeftAbs,
        ProbeKind::FgAbs,
        ProbeKind::FabsLeft,
        ProbeKind::FAbs,
    ] {
        let v = comp.probe(kind)?.clone();
        aid_usage(kind, &v, &mut hints_used);
        verdicts.push(v);
    }
    let (op, op_hint) = comp.op_integrable()?;
    let (fl, fl_hint) = comp.f_left_integrable()?;
    let (lim, lim_hint) = comp.resolved_survival_limit()?;
    if op_hint {
        hints_used.push("op_integrable".into());
    }
    if fl_hint {
        hints_used.push("F_leftlimit_integrable".into());
    }
    if lim_hint {
        hints_used.push("limit_F_survival".into());
    }
    let (left_limit, left_resolved) = if atom_at_end {
        let (r, hinted) = comp.resolved_left_limit()?;
        if hinted {
            hints_used.push("F_left_limit".into());
        }
        (Some(comp.left_limit()?.clone()), Some(r))
    } else {
        (None, None)
    };

    let mut consistency = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SELF_TEST_SEED);
    let w = test_window(law);
    for _ in 0..SELF_TEST_INTERVALS {
        let (x, y): (f64, f64) = (rng.gen::<f64>() * w, rng.gen::<f64>() * w);
        let (a, b) = (x.min(y), x.max(y));
        if a < b {
            consistency.push(integral_formula_check(comp, a, b)?);
        }
    }

    let [op_abs, f_left_abs, fg_abs, fabs_left, f_abs] =
        <[IntegralVerdict; 5]>::try_from(verdicts).unwrap();
    let violated = |name: &str, detail: String| -> Result<ConsistencyCheck> {
        Err(Error::Contradiction(format!("{name}: {detail}")))
    };
    if atom_at_end {
        match (finite(&op_abs), finite(&fg_abs)) {
            (Some(a), Some(b)) if a != b => {
                violated(
                    "op_abs ⇔ fG_abs",
                    format!("op_abs {} but fG_abs {}", op_abs.label(), fg_abs.label()),
                )?;
            }
            (Some(a), Some(_)) => consistency.push(ConsistencyCheck::outcome(
                "op_abs ⇔ fG_abs",
                true,
                format!("both {}", if a { "finite" } else { "divergent" }),
            )),
            _ => consistency.push(ConsistencyCheck::skipped(
                "op_abs ⇔ fG_abs",
                "a probe is inconclusive",
            )),
        }
        if op == Some(true) && left_resolved == Some(Resolved::NoFiniteLimit) {
            violated(
                "op_abs ⇒ F(t_G-) exists",
                "𝒦F is integrable but F has no finite left limit".into(),
            )?;
        }
    } else {
        let (a, b, d, e) = (
            finite(&op_abs),
            finite(&f_left_abs),
            finite(&fg_abs),
            finite(&fabs_left),
        );
        match (a, b, d, e) {
            (Some(a), Some(b), Some(d), Some(e)) => {
                let first = a && b;
                if first != d || d != e {
                    violated(
                        "(F_left_abs ∧ op_abs) ⇔ fG_abs ⇔ Fabs_left",
                        format!("{first}, {d}, {e}"),
                    )?;
                }
                consistency.push(ConsistencyCheck::outcome(
                    "(F_left_abs ∧ op_abs) ⇔ fG_abs ⇔ Fabs_left",
                    true,
                    format!("all {}", if d { "finite" } else { "not finite" }),
                ));
            }
            _ => consistency.push(ConsistencyCheck::skipped(
                "(F_left_abs ∧ op_abs) ⇔ fG_abs ⇔ Fabs_left",
                "a probe is inconclusive",
            )),
        }
    }
    if op == Some(true) && lim == Resolved::NoFiniteLimit {
        violated(
            "op_abs ⇒ lim F Ḡ exists",
            "𝒦F is integrable but F Ḡ has no finite limit".into(),
        )?;
    }
    consistency.push(open_interval_check(comp, op, lim)?);

    Ok(IntegrabilityReport {
        op_abs,
        f_left_abs,
        fg_abs,
        fabs_left,
        f_abs,
        limit_f_survival: comp.survival_limit()?.clone(),
        f_left_limit: left_limit,
        delta_g_tg: law.endpoint_atom(),
        resolved: Resolution {
            op_integrable: op,
            f_left_integrable: fl,
            limit_f_survival: lim,
            f_left_limit: left_resolved,
        },
        hints_used,
        consistency,
    })
}

/// `∫_(a,t_G) 𝒦F dG = F(a)Ḡ(a) - lim F Ḡ` for integrable `𝒦F`.
fn open_interval_check(
    comp: &CompensatedJump,
    op: Option<bool>,
    lim: Resolved,
) -> Result<ConsistencyCheck> {
    const NAME: &str = "open_interval_formula";
    let (Some(true), Resolved::Value(l)) = (op, lim) else {
        return Ok(ConsistencyCheck::skipped(
            NAME,
            "needs integrable 𝒦F and a resolved limit",
        ));
    };
    let IntegralVerdict::Finite {
        value: total,
        abs_error,
        ..
    } = comp.signed_integral()?
    else {
        return Ok(ConsistencyCheck::skipped(
            NAME,
            "signed integral unresolved",
        ));
    };
    if *abs_error > MASS_TOL {
        return Ok(ConsistencyCheck::skipped(
            NAME,
            "signed integral not resolved to 1e-6",
        ));
    }
    let law = comp.law();
    let a = if law.right_endpoint().is_finite() {
        law.truncation(2)
    } else {
        1.0
    };
    let head = law.stieltjes_integral(&|v| comp.op(v), 0.0, a)?;
    let lhs = total - head;
    let rhs = comp.drift().value(a)? * law.survival(a) - l;
    let tol = MASS_TOL + abs_error + FORMULA_TOL * rhs.abs();
    Ok(ConsistencyCheck::outcome(
        NAME,
        (lhs - rhs).abs() <= tol,
        format!("a = {a}: ∫_(a,t_G) 𝒦F dG = {lhs}, F(a)Ḡ(a) - lim F Ḡ = {rhs}"),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionCheck {
    pub points: usize,
    /// `F = F(0) + F↑ - F↓` and `|F| = F↑ + F↓`.
    pub drift_deviation: f64,
    /// `𝒦F = F(0) + 𝒦F↑ - 𝒦F↓`.
    pub op_deviation: f64,
    /// `𝒦|F| = 𝒦F↑ + 𝒦F↓`.
    pub abs_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Decomposition identities on an interior grid of `n` points plus every
/// materialised atom below the end of the grid. Deviations are relative to the
/// magnitude of the terms once that exceeds one.
pub fn decomposition_check(
    spec: &DriftSpec,
    law: &JumpLaw,
    n: usize,
    tol: f64,
) -> Result<DecompositionCheck> {
    let parts = variation_decompose(spec);
    let comp = CompensatedJump::new(spec, law)?;
    let up = CompensatedJump::new(&parts.up, law)?;
    let down = CompensatedJump::new(&parts.down, law)?;
    let abs = CompensatedJump::new(&parts.abs, law)?;
    let mut grid = if law.right_endpoint().is_finite() {
        check_grid(law, n)
    } else {
        let end = law.horizon().min(16.0);
        (1..=n).map(|i| end * i as f64 / (n + 1) as f64).collect()
    };
    let last = grid.last().copied().unwrap_or(0.0);
    grid.extend(
        law.atoms()
            .iter()
            .map(|a| a.at)
            .filter(|&a| a <= last && a < law.right_endpoint()),
    );
    let f0 = spec.f0;
    let rel = |dev: f64, scale: f64| dev / scale.max(1.0);
    let (mut dd, mut od, mut ad) = (0.0f64, 0.0f64, 0.0f64);
    for &t in &grid {
        let (f, u, d, a) = (
            comp.drift().value(t)?,
            up.drift().value(t)?,
            down.drift().value(t)?,
            abs.drift().value(t)?,
        );
        let scale = f.abs().max(u).max(d);
        dd = dd
            .max(rel((f - f0 - u + d).abs(), scale))
            .max(rel((a - u - d).abs(), scale));
        let (k, ku, kd, ka) = (comp.op(t)?, up.op(t)?, down.op(t)?, abs.op(t)?);
        let s = law.survival(t);
        let scale = k
            .abs()
            .max(ku.abs())
            .max(kd.abs())
            .max(up.drift().left(t)?)
            .max(down.drift().left(t)?)
            .max(comp.drift().density_times(t, s)?.abs());
        od = od.max(rel((k - f0 - ku + kd).abs(), scale));
        ad = ad.max(rel((ka - ku - kd).abs(), scale));
    }
    Ok(DecompositionCheck {
        points: grid.len(),
        drift_deviation: dd,
        op_deviation: od,
        abs_deviation: ad,
        tolerance: tol,
        passed: dd <= tol && od <= tol && ad <= tol,
    })
}
