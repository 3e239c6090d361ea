//! Deterministic integrands against single-jump martingales: `J • M^{G,F} =
//! M^{G,F^J}`, the block integrand turning a UI martingale into a strict local
//! martingale, and step-function witnesses of infinite variation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::{classify_with, Regime, Verdict};
use crate::compensator::CompensatedJump;
use crate::drift::{DriftSpec, Monotone, ProbeKind};
use crate::error::{Error, Result};
use crate::exprlang::{Expr, Func};
use crate::func::RealFn;
use crate::measure::{Certificate, IntegralVerdict, JumpLaw, ProbeOptions};
use crate::process::{simulate_paths, SimOptions};

/// `c` on `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// Left-continuous step function: sorted, disjoint `(lo, hi]` pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepIntegrand {
    steps: Vec<Step>,
    bound: f64,
}

impl StepIntegrand {
    pub fn new(steps: Vec<Step>, bound: f64) -> Result<StepIntegrand> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "integrand bound must be finite and nonnegative, got {bound}"
            )));
        }
        for (i, s) in steps.iter().enumerate() {
            if !(s.lo >= 0.0 && s.lo < s.hi && s.hi.is_finite() && s.value.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "step {i} is not a finite interval (lo, hi] with 0 <= lo < hi"
                )));
            }
            if s.value.abs() > bound {
                return Err(Error::InvalidArgument(format!(
                    "step {i} has |value| {} above the bound {bound}",
                    s.value.abs()
                )));
            }
            if i > 0 && steps[i - 1].hi > s.lo {
                return Err(Error::InvalidArgument(format!(
                    "steps {} and {i} overlap or are out of order",
                    i - 1
                )));
            }
        }
        Ok(StepIntegrand { steps, bound })
    }

    /// `c` on `(0, hi]`.
    pub fn constant(c: f64, hi: f64) -> Result<StepIntegrand> {
        StepIntegrand::new(
            vec![Step {
                lo: 0.0,
                hi,
                value: c,
            }],
            c.abs(),
        )
    }

    pub fn zero() -> StepIntegrand {
        StepIntegrand {
            steps: Vec::new(),
            bound: 0.0,
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.steps.partition_point(|s| s.hi < t);
        match self.steps.get(i) {
            Some(s) if s.lo < t => s.value,
            _ => 0.0,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.steps.iter().flat_map(|s| [s.lo, s.hi]).collect();
        b.dedup();
        b
    }

    /// `Σ c·indicator(lo, hi)`.
    pub fn to_expr(&self) -> Expr {
        let mut terms = self.steps.iter().filter(|s| s.value != 0.0).map(|s| {
            let ind = Expr::indicator(s.lo, s.hi);
            if s.value == 1.0 {
                ind
            } else {
                Expr::lit(s.value) * ind
            }
        });
        match terms.next() {
            None => Expr::num(0.0),
            Some(first) => terms.fold(first, |acc, t| acc + t),
        }
    }

    /// `alpha·self + beta·other` on the common refinement.
    pub fn combine(&self, alpha: f64, other: &StepIntegrand, beta: f64) -> Result<StepIntegrand> {
        let mut cuts: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .chain(other.breakpoints())
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut steps = Vec::new();
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let v = alpha * self.value(mid) + beta * other.value(mid);
            if v != 0.0 {
                steps.push(Step {
                    lo: w[0],
                    hi: w[1],
                    value: v,
                });
            }
        }
        StepIntegrand::new(steps, alpha.abs() * self.bound + beta.abs() * other.bound)
    }

    /// `1 - J` on `(0, end]`, for `J` with values in {0, 1}.
    pub fn complement(&self, end: f64) -> Result<StepIntegrand> {
        StepIntegrand::constant(1.0, end)?.combine(1.0, self, -1.0)
    }
}

/// Blocks `(1 - 2^{-2n}, 1 - 2^{-(2n+1)}]` with value 1, for every `n` whose
/// block is still resolved below 1 in double precision.
pub fn cherny_integrand() -> StepIntegrand {
    let steps = (0..=26)
        .map(|n| Step {
            lo: 1.0 - 2f64.powi(-2 * n),
            hi: 1.0 - 2f64.powi(-(2 * n + 1)),
            value: 1.0,
        })
        .collect();
    StepIntegrand { steps, bound: 1.0 }
}

/// `min(max(t, a), b)`.
fn clamp_expr(a: f64, b: f64) -> Expr {
    Expr::call(
        Func::Min,
        vec![
            Expr::call(Func::Max, vec![Expr::var(), Expr::lit(a)]),
            Expr::lit(b),
        ],
    )
}

/// `F^J(t) = Σ c (F(min(max(t, lo), hi)) - F(lo))`, symbolic when `F` is.
fn integrated_closed_form(j: &StepIntegrand, cf: &RealFn) -> Result<RealFn> {
    match cf {
        RealFn::Expr(e) => {
            let mut acc: Option<Expr> = None;
            for s in j.steps().iter().filter(|s| s.value != 0.0) {
                let piece = e.substitute(&clamp_expr(s.lo, s.hi)) - Expr::lit(e.eval(s.lo)?);
                let piece = if s.value == 1.0 {
                    piece
                } else {
                    Expr::lit(s.value) * piece
                };
                acc = Some(match acc {
                    None => piece,
                    Some(a) => a + piece,
                });
            }
            Ok(RealFn::Expr(acc.unwrap_or_else(|| Expr::num(0.0))))
        }
        RealFn::Native { .. } => {
            let (j, cf) = (j.clone(), cf.clone());
            Ok(RealFn::native(
                format!("∫ J dF for {}", cf.describe()),
                move |t| {
                    let mut acc = 0.0;
                    for s in j.steps().iter().filter(|s| s.value != 0.0 && s.lo < t) {
                        acc += s.value * (cf.eval(t.min(s.hi))? - cf.eval(s.lo)?);
                    }
                    Ok(acc)
                },
            ))
        }
    }
}

fn product(a: &RealFn, j: &StepIntegrand) -> RealFn {
    match a {
        RealFn::Expr(e) => RealFn::Expr(e.clone() * j.to_expr()),
        RealFn::Native { label, f } => {
            let (f, j) = (f.clone(), j.clone());
            RealFn::native(format!("J·{label}"), move |t| {
                let c = j.value(t);
                if c == 0.0 {
                    return Ok(0.0);
                }
                Ok(c * f(t)?)
            })
        }
    }
}

/// `F^J` with `F^J(0) = 0` and local density `J·f`.
pub fn integrate_deterministic(
    j: &StepIntegrand,
    spec: &DriftSpec,
    law: &JumpLaw,
) -> Result<DriftSpec> {
    if law.endpoint_atom() > 0.0 {
        return Err(Error::UnsupportedAtomAtEndpoint);
    }
    let mut out = DriftSpec::new(0.0, product(&spec.density, j));
    out.atom_jumps = spec.atom_jumps.as_ref().map(|a| product(a, j));
    out.closed_form = match &spec.closed_form {
        Some(cf) => Some(integrated_closed_form(j, cf)?),
        None => None,
    };
    let mut bp = spec.breakpoints.clone();
    bp.extend(j.breakpoints());
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    out.breakpoints = bp;
    let nonneg = j.steps().iter().all(|s| s.value >= 0.0);
    out.hints.monotone = match spec.hints.monotone {
        Monotone::Nondecreasing if nonneg => Monotone::Nondecreasing,
        Monotone::Nonincreasing if nonneg => Monotone::Nonincreasing,
        _ => Monotone::None,
    };
    Ok(out)
}

/// `∫_(0,t] J dF` for `t < γ`, and `∫_(0,γ) J dF + J(γ)(𝒦F(γ) - F(γ-))` for
/// `t >= γ`, evaluated from `F` alone.
fn pathwise_integral(j: &StepIntegrand, comp: &CompensatedJump, t: f64, gamma: f64) -> Result<f64> {
    let f = comp.drift();
    let mut acc = 0.0;
    if t < gamma {
        for s in j.steps().iter().filter(|s| s.lo < t) {
            acc += s.value * (f.value(t.min(s.hi))? - f.value(s.lo)?);
        }
        return Ok(acc);
    }
    for s in j.steps().iter().filter(|s| s.lo < gamma) {
        let end = if gamma <= s.hi {
            f.left(gamma)?
        } else {
            f.value(s.hi)?
        };
        acc += s.value * (end - f.value(s.lo)?);
    }
    let c = j.value(gamma);
    if c != 0.0 {
        acc += c * (comp.op(gamma)? - f.left(gamma)?);
    }
    Ok(acc)
}

/// Largest deviation between the pathwise integral of `J` against simulated
/// `M^{G,F}` paths and the `M^{G,F^J}` paths sharing the same jump times.
pub fn pathwise_integral_check(
    j: &StepIntegrand,
    spec: &DriftSpec,
    law: &JumpLaw,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    let fj = integrate_deterministic(j, spec, law)?;
    let comp = Arc::new(CompensatedJump::new(spec, law)?);
    let comp_j = Arc::new(CompensatedJump::new(&fj, law)?);
    let opts = SimOptions::default();
    let base = simulate_paths(&comp, grid, n_paths, seed, &opts)?;
    let derived = simulate_paths(&comp_j, grid, n_paths, seed, &opts)?;
    let mut worst = 0.0f64;
    for p in 0..n_paths {
        let gamma = base.gammas()[p];
        debug_assert_eq!(gamma, derived.gammas()[p]);
        for (i, &t) in grid.iter().enumerate() {
            let direct = pathwise_integral(j, &comp, t, gamma)?;
            worst = worst.max((direct - derived.value(p, i)).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessRow {
    pub epsilon: f64,
    /// `∫_0^{1-ε} ((1-J)F^J + J F^{1-J}) dt`.
    pub a: f64,
    /// `(1/6) Σ_{t_{2n+1} <= 1-ε} F(t_{2n+1})(t_{2n+1} - t_{2n-1})`.
    pub b: f64,
    pub chain_holds: bool,
    /// `∫_(0,1-ε) F dG` by quadrature.
    pub f_integral: f64,
    /// Certified lower bound for the same integral, when the drift carries one.
    pub certified_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessReport {
    /// Constant removed from `F` so that it starts at zero.
    pub shift: f64,
    pub rows: Vec<HarnessRow>,
    /// `∫ J |𝒦F| dG` when its own probe settles; it never exceeds `op_abs`
    /// since `0 <= J <= 1`.
    pub j_op_abs: Option<f64>,
    pub op_abs: f64,
    pub certificate_id: String,
    pub integrated: Verdict,
    pub original: Verdict,
}

const CHAIN_TOL: f64 = 1e-8;
pub const CHERNY_CERTIFICATE: &str = "cherny-blocks";

/// Dyadic points `t_n = 1 - 2^{-n}`, with `t_{-1} = -1`.
fn dyadic(n: i32) -> f64 {
    if n < 0 {
        -1.0
    } else {
        1.0 - 2f64.powi(-n)
    }
}

/// `F^J` for the block integrand, with the divergence certificate for
/// `∫ |𝒦F^J| dG` attached. `spec` must be nondecreasing on the uniform law.
pub fn cherny_pair(spec: &DriftSpec) -> Result<DriftSpec> {
    let law = JumpLaw::uniform();
    let j = cherny_integrand();
    let shifted = shifted_to_zero(spec);
    let mut fj = integrate_deterministic(&j, &shifted, &law)?;
    let cf = match (&fj.closed_form, &shifted.closed_form) {
        (Some(RealFn::Expr(a)), Some(RealFn::Expr(b))) => Some((a.clone(), b.clone())),
        _ => None,
    };
    let minorant = match (cf, shifted.density.as_expr()) {
        (Some((fj_cf, f_cf)), Some(dens)) => {
            // (1-J)F^J + J(F^{1-J} - 𝒦F̃), with F^{1-J} = F̃ - F^J
            let jx = j.to_expr();
            let op = f_cf.clone() - dens.clone() * (Expr::num(1.0) - Expr::var());
            let body = (Expr::num(1.0) - jx.clone()) * fj_cf.clone() + jx * (f_cf - fj_cf - op);
            RealFn::Expr(Expr::num(0.0).max(body))
        }
        _ => {
            let fjf = fj.bind(&law)?;
            let sf = CompensatedJump::new(&shifted, &law)?;
            let j2 = j.clone();
            let sf = Arc::new(sf);
            RealFn::native("cherny block minorant", move |v| {
                let c = j2.value(v);
                let a = fjf.value(v)?;
                let body = (1.0 - c) * a + c * (sf.drift().value(v)? - a - sf.op(v)?);
                Ok(body.max(0.0))
            })
        }
    };
    fj.hints.certificates.insert(
        ProbeKind::OpAbs,
        Certificate {
            id: CHERNY_CERTIFICATE.into(),
            minorant,
            lower_bound: RealFn::Expr(
                crate::exprlang::parse("log(log(e/(1-t)))/12 - 1").expect("static expression"),
            ),
            claim: "∫ |𝒦F^J| dG ≥ (1/6) ∫ F dG - ∫ |𝒦F| dG, and ∫ F dG diverges".into(),
            series: None,
        },
    );
    Ok(fj)
}

fn shifted_to_zero(spec: &DriftSpec) -> DriftSpec {
    let mut s = spec.clone();
    let f0 = spec.f0;
    s.f0 = 0.0;
    s.closed_form = spec.closed_form.as_ref().map(|cf| match cf {
        RealFn::Expr(e) => RealFn::Expr(e.clone() - Expr::lit(f0)),
        RealFn::Native { label, f } => {
            let f = f.clone();
            RealFn::native(format!("{label} - F(0)"), move |t| Ok(f(t)? - f0))
        }
    });
    s.hints = Default::default();
    s.hints.monotone = spec.hints.monotone;
    s
}

/// Reproduces the proof chain showing that the block integrand turns a UI
/// martingale that is not in H¹ into a strict local martingale.
pub fn cherny_harness(spec: &DriftSpec, epsilons: &[f64]) -> Result<HarnessReport> {
    let law = JumpLaw::uniform();
    let opts = ProbeOptions::default();
    let original = classify_with(spec, &law, &opts)?;
    if !matches!(original.regime, Regime::UiMartingaleNotH1) {
        return Err(Error::HypothesisViolation(format!(
            "M^{{G,F}} must be a UI martingale that is not in H¹, but it classifies as {}",
            original.regime.name()
        )));
    }
    let comp = CompensatedJump::new(spec, &law)?;
    let f = comp.drift();
    if spec.hints.monotone != Monotone::Nondecreasing {
        for i in 1..=256 {
            let v = i as f64 / 257.0;
            if f.density(v)? < 0.0 {
                return Err(Error::HypothesisViolation(format!(
                    "F decreases at t = {v}"
                )));
            }
        }
    }
    let shift = spec.f0;
    let j = cherny_integrand();
    let not_j = j.complement(1.0)?;
    let shifted = shifted_to_zero(spec);
    let fj = integrate_deterministic(&j, &shifted, &law)?.bind(&law)?;
    let fnj = integrate_deterministic(&not_j, &shifted, &law)?.bind(&law)?;
    let g = |t: f64| -> Result<f64> {
        let c = j.value(t);
        Ok((1.0 - c) * fj.value(t)? + c * fnj.value(t)?)
    };
    let cert = spec.hints.certificates.get(&ProbeKind::FLeftAbs);
    let mut rows = Vec::new();
    for &eps in epsilons {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation ε must lie in (0, 1), got {eps}"
            )));
        }
        let end = 1.0 - eps;
        let a = law.stieltjes_integral(&g, 0.0, end)?;
        let mut b = 0.0;
        let mut n = 0;
        while dyadic(2 * n + 1) <= end {
            let t = dyadic(2 * n + 1);
            b += (f.value(t)? - shift) * (t - dyadic(2 * n - 1)) / 6.0;
            n += 1;
        }
        let f_integral = law.stieltjes_integral(&|t| f.value(t), 0.0, end)?;
        rows.push(HarnessRow {
            epsilon: eps,
            a,
            b,
            chain_holds: a >= b - CHAIN_TOL,
            f_integral,
            certified_bound: cert.map(|c| c.lower_bound.eval(end)).transpose()?,
        });
    }
    let op_abs = match comp.probe(ProbeKind::OpAbs)? {
        IntegralVerdict::Finite { value, .. } => *value,
        other => {
            return Err(Error::HypothesisViolation(format!(
                "∫ |𝒦F| dG must be finite, probe says {}",
                other.label()
            )))
        }
    };
    let j_op = crate::measure::improper_integral(
        &law,
        &|v| Ok(j.value(v) * comp.op(v)?.abs()),
        Default::default(),
        &opts,
    )?;
    let j_op_abs = j_op.value();
    if j_op_abs.is_some_and(|v| v > op_abs * (1.0 + 1e-8) + 1e-10) {
        return Err(Error::Contradiction(format!(
            "∫ J |𝒦F| dG = {} exceeds ∫ |𝒦F| dG = {op_abs} although 0 <= J <= 1",
            j_op_abs.unwrap()
        )));
    }
    let derived = cherny_pair(spec)?;
    let integrated = classify_with(&derived, &law, &opts)?;
    Ok(HarnessReport {
        shift,
        rows,
        j_op_abs,
        op_abs,
        certificate_id: CHERNY_CERTIFICATE.into(),
        integrated,
        original,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub n: usize,
    pub step: StepIntegrand,
    pub sup_norm: f64,
    pub elementary_integral_value: f64,
    /// `t_G - δ`, the end of the partition.
    pub horizon: f64,
    /// `P[γ = t_G]`, the event on which the paths follow `F` throughout.
    pub event_probability: f64,
}

impl Witness {
    /// `(sup |L|, ∫ L dF)` evaluated directly from the step function.
    pub fn reevaluate(&self, spec: &DriftSpec, law: &JumpLaw) -> Result<(f64, f64)> {
        let f = spec.bind(law)?;
        let mut integral = 0.0;
        let mut sup = 0.0f64;
        for s in self.step.steps() {
            sup = sup.max(s.value.abs());
            integral += s.value * (f.value(s.hi)? - f.value(s.lo)?);
        }
        Ok((sup, integral))
    }
}

const WITNESS_MAX_POINTS: usize = 1 << 20;
const WITNESS_BASE_POINTS: usize = 64;

/// Greedy step function `L_n` with `sup |L_n| <= 1/n` and `∫ L_n dF >= 1`.
pub fn nonsemimartingale_witness(spec: &DriftSpec, law: &JumpLaw, n: usize) -> Result<Witness> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "witness index n must be at least 1".into(),
        ));
    }
    if !(law.endpoint_atom() > 0.0) {
        return Err(Error::HypothesisViolation(
            "the witness lives on the event γ = t_G, which needs ΔG(t_G) > 0".into(),
        ));
    }
    let f = spec.bind(law)?;
    let tg = law.right_endpoint();
    let scale = 1.0 / n as f64;
    let target = n as f64;
    let mut pts = vec![0.0];
    let mut values = vec![f.value(0.0)?];
    let mut variation = 0.0;
    // dyadic bands (t_k, t_{k+1}] toward t_G, each refined until its variation settles
    for k in 0..60 {
        let lo = if k == 0 { 0.0 } else { tg - tg * 2f64.powi(-k) };
        let hi = tg - tg * 2f64.powi(-(k + 1));
        if !(hi < tg && hi > lo) {
            break;
        }
        let start = *values.last().unwrap();
        let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        let mut per_band = WITNESS_BASE_POINTS;
        while pts.len() + per_band <= WITNESS_MAX_POINTS {
            let band: Vec<f64> = (1..=per_band)
                .map(|i| lo + (hi - lo) * i as f64 / per_band as f64)
                .collect();
            let vals: Vec<f64> = band.iter().map(|&t| f.value(t)).collect::<Result<_>>()?;
            let mut v = (vals[0] - start).abs();
            v += vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
            let settled = best.as_ref().is_some_and(|b| v <= b.2 * (1.0 + 1e-9));
            best = Some((band, vals, v));
            if settled || variation + v >= target {
                break;
            }
            per_band *= 2;
        }
        let Some((band, vals, v)) = best else { break };
        pts.extend(band);
        values.extend(vals);
        variation += v;
        if variation >= target {
            return build_witness(spec, law, n, &pts, &values, hi);
        }
    }
    let achieved = scale * variation;
    Err(Error::BudgetExhausted { achieved })
}

fn build_witness(
    spec: &DriftSpec,
    law: &JumpLaw,
    n: usize,
    pts: &[f64],
    values: &[f64],
    end: f64,
) -> Result<Witness> {
    let scale = 1.0 / n as f64;
    let mut steps: Vec<Step> = Vec::new();
    for i in 1..pts.len() {
        let d = values[i] - values[i - 1];
        let c = if d > 0.0 {
            scale
        } else if d < 0.0 {
            -scale
        } else {
            0.0
        };
        match steps.last_mut() {
            Some(s) if s.value == c && s.hi == pts[i - 1] => s.hi = pts[i],
            _ => steps.push(Step {
                lo: pts[i - 1],
                hi: pts[i],
                value: c,
            }),
        }
    }
    steps.retain(|s| s.value != 0.0);
    let step = StepIntegrand::new(steps, scale)?;
    let mut w = Witness {
        n,
        step,
        sup_norm: 0.0,
        elementary_integral_value: 0.0,
        horizon: end,
        event_probability: law.endpoint_atom(),
    };
    let (sup, integral) = w.reevaluate(spec, law)?;
    w.sup_norm = sup;
    w.elementary_integral_value = integral;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn cherny_blocks() {
        let j = cherny_integrand();
        assert_eq!(
            j.steps()[0],
            Step {
                lo: 0.0,
                hi: 0.5,
                value: 1.0
            }
        );
        assert_eq!(
            j.steps()[1],
            Step {
                lo: 0.75,
                hi: 0.875,
                value: 1.0
            }
        );
        assert_eq!(j.value(0.6), 0.0);
        assert_eq!(j.value(0.5), 1.0);
        assert_eq!(j.value(0.8), 1.0);
        assert!(j.steps().last().unwrap().hi < 1.0);
        let not_j = j.complement(1.0).unwrap();
        for t in [0.1, 0.6, 0.8, 0.9, 0.99, 0.999999] {
            assert_eq!(j.value(t) + not_j.value(t), 1.0, "t = {t}");
        }
    }

    #[test]
    fn step_validation() {
        assert!(StepIntegrand::new(
            vec![Step {
                lo: 0.5,
                hi: 0.4,
                value: 1.0
            }],
            1.0
        )
        .is_err());
        assert!(StepIntegrand::new(
            vec![Step {
                lo: 0.0,
                hi: 0.4,
                value: 2.0
            }],
            1.0
        )
        .is_err());
        let overlap = vec![
            Step {
                lo: 0.0,
                hi: 0.5,
                value: 1.0,
            },
            Step {
                lo: 0.4,
                hi: 0.6,
                value: 1.0,
            },
        ];
        assert!(StepIntegrand::new(overlap, 1.0).is_err());
    }

    #[test]
    fn integrate_examples() {
        let u = JumpLaw::uniform();
        let lin = DriftSpec::new(0.0, e("1")).with_closed_form(e("t"));
        let fj = integrate_deterministic(&cherny_integrand(), &lin, &u)
            .unwrap()
            .bind(&u)
            .unwrap();
        assert!((fj.value(0.75).unwrap() - 0.5).abs() < 1e-15);
        assert!((fj.integrated_value(0.8).unwrap() - 0.55).abs() < 1e-13);
        let one = StepIntegrand::constant(1.0, 1.0).unwrap();
        let sin = DriftSpec::new(1f64.sin(), e("cos(1/(1-t))/(1-t)^2"))
            .with_closed_form(e("sin(1/(1-t))"));
        let f1 = integrate_deterministic(&one, &sin, &u)
            .unwrap()
            .bind(&u)
            .unwrap();
        for t in [0.3, 0.9] {
            assert!((f1.value(t).unwrap() - ((1.0 / (1.0 - t)).sin() - 1f64.sin())).abs() < 1e-12);
        }
        let f0 = integrate_deterministic(&StepIntegrand::zero(), &sin, &u)
            .unwrap()
            .bind(&u)
            .unwrap();
        assert_eq!(f0.value(0.9).unwrap(), 0.0);
        let m = crate::gallery::half_uniform_with_atom();
        assert!(matches!(
            integrate_deterministic(&one, &sin, &m),
            Err(Error::UnsupportedAtomAtEndpoint)
        ));
    }

    #[test]
    fn pathwise_integrals_agree() {
        let u = JumpLaw::uniform();
        let lin = DriftSpec::new(0.0, e("1")).with_closed_form(e("t"));
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let dev = pathwise_integral_check(&cherny_integrand(), &lin, &u, &grid, 1000, 7).unwrap();
        assert!(dev <= 1e-10, "{dev}");
        let one = StepIntegrand::constant(1.0, 1.0).unwrap();
        let islm = DriftSpec::new(1.0, e("1/(1-t)^2")).with_closed_form(e("1/(1-t)"));
        let dev = pathwise_integral_check(&one, &islm, &u, &grid, 200, 3).unwrap();
        assert!(dev <= 1e-9, "{dev}");
        let dev = pathwise_integral_check(&StepIntegrand::zero(), &islm, &u, &grid, 50, 3).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn witnesses() {
        let m = crate::gallery::half_uniform_with_atom();
        let sin = DriftSpec::new(1f64.sin(), e("2*cos(1/(1-t))/(1-t)^2"))
            .with_closed_form(e("sin(1/(1-t))"));
        for n in [1, 10] {
            let w = nonsemimartingale_witness(&sin, &m, n).unwrap();
            let (sup, integral) = w.reevaluate(&sin, &m).unwrap();
            assert!(
                sup <= 1.0 / n as f64 && integral >= 1.0,
                "n = {n}: {sup} {integral}"
            );
            assert_eq!(w.event_probability, 0.5);
        }
        let lin = DriftSpec::new(0.0, e("1"));
        match nonsemimartingale_witness(&lin, &m, 2) {
            Err(Error::BudgetExhausted { achieved }) => {
                assert!(achieved <= 0.5 / 2.0 + 1e-12, "{achieved}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn harness_needs_a_ui_martingale_outside_h1() {
        let lin = DriftSpec::new(0.0, e("1")).with_closed_form(e("t"));
        assert!(matches!(
            cherny_harness(&lin, &[1e-2]),
            Err(Error::HypothesisViolation(_))
        ));
    }

    fn steps_from(cuts: &[(u8, i8)]) -> StepIntegrand {
        let mut steps = Vec::new();
        let mut lo = 0.0;
        for &(w, c) in cuts {
            let hi = lo + (w as f64 + 1.0) / 1024.0;
            steps.push(Step {
                lo,
                hi,
                value: c as f64 / 8.0,
            });
            lo = hi;
        }
        StepIntegrand::new(steps, 16.0).unwrap()
    }

    proptest::proptest! {
        #[test]
        fn linear_in_the_integrand(
            a in proptest::collection::vec((0u8..32, -8i8..=8), 1..8),
            b in proptest::collection::vec((0u8..32, -8i8..=8), 1..8),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
            t in 0.0f64..0.99,
        ) {
            let u = JumpLaw::uniform();
            let spec = DriftSpec::new(0.5, e("cos(3*t)/(1-t)"));
            let (j1, j2) = (steps_from(&a), steps_from(&b));
            let mix = j1.combine(alpha, &j2, beta).unwrap();
            let f = |j: &StepIntegrand| integrate_deterministic(j, &spec, &u).unwrap().bind(&u).unwrap().value(t).unwrap();
            let lhs = f(&mix);
            let rhs = alpha * f(&j1) + beta * f(&j2);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
        }
    }
}
