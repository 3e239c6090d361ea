//! Drift functions `F ≪loc G`, given canonically by `F(0)` and the local
//! density `f = dF/dG`: evaluation of `F` and `F(·-)`, variation parts, and
//! construction from a jump target `H`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprlang::Expr;
use crate::func::RealFn;
use crate::measure::{Certificate, Integrand, JumpLaw, RunningIntegral, TailBound};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    Yes,
    No,
    #[default]
    Unknown,
}

impl Tri {
    pub fn known(self) -> Option<bool> {
        match self {
            Tri::Yes => Some(true),
            Tri::No => Some(false),
            Tri::Unknown => None,
        }
    }
}

/// Declared value of a limit at `t_G`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitHint {
    Value(f64),
    Divergent,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotone {
    Nondecreasing,
    Nonincreasing,
    #[default]
    None,
}

/// The improper integrals probed for a drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProbeKind {
    /// `∫ |𝒦F| dG`
    #[serde(rename = "op_abs")]
    OpAbs,
    /// `∫ |F(v-)| dG`
    #[serde(rename = "F_left_abs")]
    FLeftAbs,
    /// `∫ |f| Ḡ dG`
    #[serde(rename = "fG_abs")]
    FgAbs,
    /// `∫ |F|(v-) dG`
    #[serde(rename = "Fabs_left")]
    FabsLeft,
    /// `∫ |F| dG`
    #[serde(rename = "F_abs")]
    FAbs,
    /// `∫ (𝒦F)² dG`, used to choose the Monte Carlo estimator
    #[serde(rename = "op_sq")]
    OpSq,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 6] = [
        ProbeKind::OpAbs,
        ProbeKind::FLeftAbs,
        ProbeKind::FgAbs,
        ProbeKind::FabsLeft,
        ProbeKind::FAbs,
        ProbeKind::OpSq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::OpAbs => "op_abs",
            ProbeKind::FLeftAbs => "F_left_abs",
            ProbeKind::FgAbs => "fG_abs",
            ProbeKind::FabsLeft => "Fabs_left",
            ProbeKind::FAbs => "F_abs",
            ProbeKind::OpSq => "op_sq",
        }
    }

    pub fn from_name(s: &str) -> Option<ProbeKind> {
        ProbeKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Hints {
    pub op_integrable: Tri,
    pub limit_f_survival: LimitHint,
    pub f_leftlimit_integrable: Tri,
    /// `lim_{t↑t_G} F(t)`, needed for `𝒦F` at `t_G`.
    pub f_left_limit: LimitHint,
    pub monotone: Monotone,
    pub certificates: BTreeMap<ProbeKind, Certificate>,
    pub tail_bounds: BTreeMap<ProbeKind, TailBound>,
}

#[derive(Debug, Clone)]
pub struct DriftSpec {
    pub f0: f64,
    pub density: RealFn,
    /// `ΔF(a)` at atoms of the law; when absent, `f(a)·ΔG(a)` is used.
    pub atom_jumps: Option<RealFn>,
    /// Independent formula for `F`, cross-validated when the spec is bound.
    pub closed_form: Option<RealFn>,
    pub hints: Hints,
    /// Points where the density may jump.
    pub breakpoints: Vec<f64>,
}

impl DriftSpec {
    pub fn new(f0: f64, density: impl Into<RealFn>) -> DriftSpec {
        DriftSpec {
            f0,
            density: density.into(),
            atom_jumps: None,
            closed_form: None,
            hints: Hints::default(),
            breakpoints: Vec::new(),
        }
    }

    pub fn constant(c: f64) -> DriftSpec {
        let mut s = DriftSpec::new(c, Expr::num(0.0));
        s.closed_form = Some(RealFn::constant(c));
        s.atom_jumps = Some(RealFn::constant(0.0));
        s
    }

    pub fn with_closed_form(mut self, f: impl Into<RealFn>) -> DriftSpec {
        self.closed_form = Some(f.into());
        self
    }

    pub fn with_atom_jumps(mut self, f: impl Into<RealFn>) -> DriftSpec {
        self.atom_jumps = Some(f.into());
        self
    }

    pub fn bind(&self, law: &JumpLaw) -> Result<DriftFunction> {
        DriftFunction::new(self.clone(), law)
    }

    /// True when the spec can be written to a spec file.
    pub fn is_symbolic(&self) -> bool {
        self.density.as_expr().is_some()
            && self
                .atom_jumps
                .as_ref()
                .map_or(true, |f| f.as_expr().is_some())
            && self
                .closed_form
                .as_ref()
                .map_or(true, |f| f.as_expr().is_some())
            && self
                .hints
                .certificates
                .values()
                .all(|c| c.minorant.as_expr().is_some() && c.lower_bound.as_expr().is_some())
            && self.hints.tail_bounds.values().all(|b| match b {
                TailBound::Sup(_) => true,
                TailBound::Explicit(f) => f.as_expr().is_some(),
            })
    }
}

/// `F(t) = F0 + ∫_(0,t] f dG` and `F(t-)`.
pub fn eval_f(spec: &DriftSpec, law: &JumpLaw, t: f64) -> Result<(f64, f64)> {
    spec.bind(law)?.eval(t)
}

/// A drift bound to its law, with cached running integrals.
#[derive(Clone)]
pub struct DriftFunction {
    inner: Arc<Bound>,
}

struct Bound {
    spec: DriftSpec,
    law: JumpLaw,
    running: RunningIntegral,
    use_closed_form: bool,
}

impl fmt::Debug for DriftFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftFunction")
            .field("f0", &self.inner.spec.f0)
            .field("density", &self.inner.spec.density)
            .finish()
    }
}

const CLOSED_FORM_TOL: f64 = 1e-8;
const CHECK_POINTS: usize = 64;

/// Interior check grid: 64 points in `(0, t_G)` (or up to a finite window for an infinite endpoint).
pub(crate) fn check_grid(law: &JumpLaw, n: usize) -> Vec<f64> {
    let tg = law.right_endpoint();
    let end = if tg.is_finite() {
        tg
    } else {
        law.horizon().min(32.0)
    };
    (1..=n).map(|i| end * i as f64 / (n + 1) as f64).collect()
}

impl DriftFunction {
    fn new(spec: DriftSpec, law: &JumpLaw) -> Result<DriftFunction> {
        if !spec.f0.is_finite() {
            return Err(Error::InvalidDrift("F(0) must be finite".into()));
        }
        let density = spec.density.clone();
        let phi: Integrand = Arc::new(move |v| density.eval(v));
        let jumps = spec.atom_jumps.clone();
        let density = spec.density.clone();
        let tg = law.right_endpoint();
        let atom_value = move |a: f64, m: f64| -> Result<f64> {
            if a >= tg {
                return Ok(0.0);
            }
            match &jumps {
                Some(j) => j.eval(a),
                None => Ok(density.eval(a)? * m),
            }
        };
        let running = RunningIntegral::new(law, phi, &atom_value, &spec.breakpoints)
            .map_err(|e| Error::InvalidDrift(format!("atom jumps: {e}")))?;
        let mut bound = Bound {
            spec,
            law: law.clone(),
            running,
            use_closed_form: false,
        };
        if let Some(cf) = &bound.spec.closed_form {
            for t in check_grid(law, CHECK_POINTS) {
                let quad = bound.spec.f0 + bound.running.upto(t)?;
                let closed = cf.eval(t)?;
                if (quad - closed).abs() > CLOSED_FORM_TOL * quad.abs().max(1.0) {
                    return Err(Error::InvalidDrift(format!(
                        "closed form {} gives {closed} at t = {t}, but F(0) + ∫ f dG = {quad}",
                        cf.describe()
                    )));
                }
            }
            bound.use_closed_form = true;
        }
        Ok(DriftFunction {
            inner: Arc::new(bound),
        })
    }

    pub fn spec(&self) -> &DriftSpec {
        &self.inner.spec
    }

    pub fn law(&self) -> &JumpLaw {
        &self.inner.law
    }

    pub fn f0(&self) -> f64 {
        self.inner.spec.f0
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let tg = self.inner.law.right_endpoint();
        if !(t >= 0.0) || t >= tg {
            return Err(Error::InvalidArgument(format!(
                "F is evaluated on [0, t_G) only; got t = {t} with t_G = {tg}"
            )));
        }
        Ok(())
    }

    /// `ΔF(t)`.
    pub fn jump(&self, t: f64) -> f64 {
        self.inner.running.atom_at(t)
    }

    /// Local density `f(v) = dF/dG(v)`; at atoms it is `ΔF(v)/ΔG(v)`.
    pub fn density(&self, v: f64) -> Result<f64> {
        let m = self.inner.law.atom_mass(v);
        if m > 0.0 && self.inner.spec.atom_jumps.is_some() {
            return Ok(self.jump(v) / m);
        }
        self.inner.spec.density.eval(v)
    }

    /// `f(v)·w`, formed without the intermediate `ΔF/ΔG` at tiny atoms.
    pub fn density_times(&self, v: f64, w: f64) -> Result<f64> {
        let m = self.inner.law.atom_mass(v);
        if m > 0.0 && self.inner.spec.atom_jumps.is_some() {
            return Ok(self.jump(v) * (w / m));
        }
        Ok(self.inner.spec.density.eval(v)? * w)
    }

    /// `F(t)`.
    pub fn value(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        if t == 0.0 {
            return Ok(self.f0());
        }
        if self.inner.use_closed_form {
            return self.inner.spec.closed_form.as_ref().unwrap().eval(t);
        }
        Ok(self.f0() + self.inner.running.upto(t)?)
    }

    /// `F(t-)`, with `F(0-) = F(0)`.
    pub fn left(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        if t == 0.0 {
            return Ok(self.f0());
        }
        if self.inner.use_closed_form {
            return Ok(self.value(t)? - self.jump(t));
        }
        Ok(self.f0() + self.inner.running.before(t)?)
    }

    /// `(F(t), F(t-))`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        Ok((self.value(t)?, self.left(t)?))
    }

    /// `F(t)` computed from the density alone, ignoring any closed form.
    pub fn integrated_value(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.f0() + self.inner.running.upto(t)?)
    }
}

/// `F↑`, `F↓` and `|F|`, each started at zero.
#[derive(Debug, Clone)]
pub struct VariationParts {
    pub up: DriftSpec,
    pub down: DriftSpec,
    pub abs: DriftSpec,
}

pub fn variation_decompose(spec: &DriftSpec) -> VariationParts {
    let part = |label: &str, sym: fn(Expr) -> Expr, num: fn(f64) -> f64| {
        let mut s = DriftSpec::new(0.0, spec.density.map(label, sym, num));
        s.atom_jumps = spec.atom_jumps.as_ref().map(|j| j.map(label, sym, num));
        s.breakpoints = spec.breakpoints.clone();
        s.hints.monotone = Monotone::Nondecreasing;
        s
    };
    let mut up = part("pos", |e| Expr::max(Expr::num(0.0), e), |x| x.max(0.0));
    let mut down = part("neg", |e| Expr::max(Expr::num(0.0), -e), |x| (-x).max(0.0));
    let mut abs = part("abs", Expr::abs, f64::abs);
    let shifted = |cf: &RealFn, sign: f64| {
        let f0 = spec.f0;
        match cf {
            RealFn::Expr(e) => {
                let d = e.clone() - Expr::lit(f0);
                RealFn::Expr(if sign < 0.0 { -d } else { d })
            }
            RealFn::Native { label, f } => {
                let f = f.clone();
                RealFn::native(format!("shift({label})"), move |t| Ok(sign * (f(t)? - f0)))
            }
        }
    };
    match (spec.hints.monotone, &spec.closed_form) {
        (Monotone::Nondecreasing, Some(cf)) => {
            up.closed_form = Some(shifted(cf, 1.0));
            abs.closed_form = Some(shifted(cf, 1.0));
            down = DriftSpec::constant(0.0);
            down.hints.monotone = Monotone::Nondecreasing;
        }
        (Monotone::Nonincreasing, Some(cf)) => {
            down.closed_form = Some(shifted(cf, -1.0));
            abs.closed_form = Some(shifted(cf, -1.0));
            up = DriftSpec::constant(0.0);
            up.hints.monotone = Monotone::Nondecreasing;
        }
        _ => {}
    }
    VariationParts { up, down, abs }
}

const TARGET_CHECK_POINTS: usize = 32;
const TARGET_TOL: f64 = 1e-8;

/// Drift whose compensated jump equals `target` dG-a.e.:
/// `F(t) = -(1/Ḡ(t)) ∫_(0,t] H dG`.
pub fn from_jump_target(target: &Expr, law: &JumpLaw) -> Result<DriftSpec> {
    let h = target.clone();
    let phi: Integrand = Arc::new(move |v| h.eval(v));
    let h = target.clone();
    let running = Arc::new(
        RunningIntegral::new(law, phi, &|a, m| Ok(h.eval(a)? * m), &[]).map_err(|e| {
            Error::ProbeFailure(format!("jump target is not locally integrable: {e}"))
        })?,
    );
    // local integrability of |H| on (0, b] for b along the truncation grid
    let h_abs = target.clone();
    let depth = 20.min(law.bands().interior_truncations().saturating_sub(1));
    for k in 0..=depth {
        let b = law.truncation(k);
        if b > law.horizon() {
            break;
        }
        let v = law
            .stieltjes_integral(&|v| Ok(h_abs.eval(v)?.abs()), 0.0, b)
            .map_err(|e| Error::ProbeFailure(format!("∫_(0,{b}] |H| dG: {e}")))?;
        if !v.is_finite() {
            return Err(Error::ProbeFailure(format!(
                "∫_(0,{b}] |H| dG is not finite"
            )));
        }
    }

    let (l1, r1) = (law.clone(), running.clone());
    let value = move |t: f64| -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        Ok(-r1.upto(t)? / l1.survival(t))
    };
    let (l2, r2, h2) = (law.clone(), running.clone(), target.clone());
    let density = move |v: f64| -> Result<f64> {
        let surv_left = l2.survival_left(v);
        let left = -r2.before(v)? / surv_left;
        Ok((left - h2.eval(v)?) / l2.survival(v))
    };
    let (l3, r3, h3) = (law.clone(), running.clone(), target.clone());
    let jumps = move |a: f64| -> Result<f64> {
        let m = l3.atom_mass(a);
        let left = -r3.before(a)? / l3.survival_left(a);
        Ok((left - h3.eval(a)?) / l3.survival(a) * m)
    };
    let label = format!("jump target {target}");
    let mut spec = DriftSpec::new(0.0, RealFn::native(format!("density for {label}"), density));
    spec.closed_form = Some(RealFn::native(format!("F for {label}"), value));
    if !law.atoms().is_empty() {
        spec.atom_jumps = Some(RealFn::native(format!("jumps for {label}"), jumps));
    }
    let f = spec.bind(law)?;
    for v in check_grid(law, TARGET_CHECK_POINTS) {
        let op = f.left(v)? - f.density_times(v, law.survival(v))?;
        let want = target.eval(v)?;
        if (op - want).abs() > TARGET_TOL * want.abs().max(1.0) {
            return Err(Error::ProbeFailure(format!(
                "compensated jump {op} differs from the target {want} at v = {v}"
            )));
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn eval_f_examples() {
        let u = JumpLaw::uniform();
        let spec = DriftSpec::new(1.0, e("1/(1-t)^2"));
        let (f, fl) = eval_f(&spec, &u, 0.5).unwrap();
        assert!((f - 2.0).abs() < 1e-13 && (fl - 2.0).abs() < 1e-13);
        let c = DriftSpec::new(3.5, e("0"));
        for t in [0.0, 0.3, 0.99] {
            assert_eq!(eval_f(&c, &u, t).unwrap(), (3.5, 3.5));
        }
        let fact = JumpLaw::factorial();
        let spec = DriftSpec::new(0.0, e("0"))
            .with_atom_jumps(e("gamma(t) - indicator(1, 1e308)*gamma(max(t - 1, 1))"));
        let f = spec.bind(&fact).unwrap();
        assert_eq!(f.eval(2.0).unwrap(), (1.0, 1.0));
        assert_eq!(f.eval(1.0).unwrap(), (1.0, 0.0));
        assert_eq!(f.eval(4.5).unwrap(), (6.0, 6.0));
        assert_eq!(f.eval(5.0).unwrap(), (24.0, 6.0));
        assert_eq!(f.value(0.5).unwrap(), 0.0);
        assert!(matches!(
            f.value(f64::INFINITY),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            DriftSpec::new(0.0, e("1")).bind(&u).unwrap().value(1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn closed_forms_are_cross_validated() {
        let u = JumpLaw::uniform();
        let good = DriftSpec::new(1.0, e("1/(1-t)^2")).with_closed_form(e("1/(1-t)"));
        let f = good.bind(&u).unwrap();
        assert_eq!(f.value(1.0 - 2f64.powi(-40)).unwrap(), 2f64.powi(40));
        let bad = DriftSpec::new(1.0, e("1/(1-t)^2")).with_closed_form(e("1/(1-t) + 1e-6"));
        assert!(matches!(bad.bind(&u), Err(Error::InvalidDrift(_))));
        let sin = DriftSpec::new(1f64.sin(), e("cos(1/(1-t))/(1-t)^2"))
            .with_closed_form(e("sin(1/(1-t))"));
        sin.bind(&u).unwrap();
    }

    #[test]
    fn jump_consistency_at_atoms() {
        let m = crate::gallery::half_uniform_with_atom();
        let spec = DriftSpec::new(0.0, e("t"));
        let f = spec.bind(&m).unwrap();
        // the atom sits at t_G, so F is only evaluated below it
        let (v, l) = f.eval(0.75).unwrap();
        assert_eq!(v, l);
        let two = JumpLaw::new(
            vec![crate::measure::DensityPiece {
                lower: 0.0,
                upper: 1.0,
                density: e("0.5"),
            }],
            vec![crate::measure::Atom { at: 0.5, mass: 0.5 }],
            None,
        )
        .unwrap();
        let f = DriftSpec::new(0.0, e("1 + t")).bind(&two).unwrap();
        let (v, l) = f.eval(0.5).unwrap();
        assert!((v - l - 1.5 * 0.5).abs() < 1e-15);
        assert!((f.density(0.5).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn variation_parts() {
        let u = JumpLaw::uniform();
        let sin = DriftSpec::new(1f64.sin(), e("cos(1/(1-t))/(1-t)^2"));
        let parts = variation_decompose(&sin);
        let (up, down, abs) = (
            parts.up.bind(&u).unwrap(),
            parts.down.bind(&u).unwrap(),
            parts.abs.bind(&u).unwrap(),
        );
        let f = sin.bind(&u).unwrap();
        for t in [0.1, 0.5, 0.75, 0.9, 0.97] {
            let (a, b, c) = (
                up.value(t).unwrap(),
                down.value(t).unwrap(),
                abs.value(t).unwrap(),
            );
            assert!(
                (f.value(t).unwrap() - (sin.f0 + a - b)).abs() < 1e-9,
                "t = {t}"
            );
            assert!((c - a - b).abs() < 1e-9);
            assert!(a >= 0.0 && b >= 0.0);
        }
        // F_abs(0.5) against an independent trapezoid oracle
        let n = 200_000;
        let h = 0.5 / n as f64;
        let g = |v: f64| (1.0 / (1.0 - v)).cos().abs() / (1.0 - v).powi(2);
        let trap: f64 = (0..n)
            .map(|i| 0.5 * h * (g(i as f64 * h) + g((i + 1) as f64 * h)))
            .sum();
        assert!((abs.value(0.5).unwrap() - trap).abs() < 1e-8);
        // growing without bound towards 1
        assert!(up.value(0.999).unwrap() > 100.0 && down.value(0.999).unwrap() > 100.0);

        let mono = DriftSpec {
            hints: Hints {
                monotone: Monotone::Nondecreasing,
                ..Hints::default()
            },
            ..DriftSpec::new(1.0, e("1/(1-t)^2")).with_closed_form(e("1/(1-t)"))
        };
        let p = variation_decompose(&mono);
        let (up, down) = (p.up.bind(&u).unwrap(), p.down.bind(&u).unwrap());
        assert_eq!(down.value(0.7).unwrap(), 0.0);
        assert!((up.value(0.5).unwrap() - 1.0).abs() < 1e-12);
        let zero = variation_decompose(&DriftSpec::new(0.0, e("0")));
        assert_eq!(zero.abs.bind(&u).unwrap().value(0.3).unwrap(), 0.0);
    }

    #[test]
    fn jump_target_examples() {
        let u = JumpLaw::uniform();
        let zero = from_jump_target(&e("0"), &u).unwrap().bind(&u).unwrap();
        assert_eq!(zero.value(0.4).unwrap(), 0.0);
        let one = from_jump_target(&e("1"), &u).unwrap().bind(&u).unwrap();
        for t in [0.2, 0.5, 0.9] {
            assert!((one.value(t).unwrap() + t / (1.0 - t)).abs() < 1e-12);
            assert!((one.integrated_value(t).unwrap() + t / (1.0 - t)).abs() < 1e-9);
        }
        let lin = from_jump_target(&e("t"), &u).unwrap().bind(&u).unwrap();
        for t in [0.2, 0.5, 0.9] {
            assert!((lin.value(t).unwrap() + t * t / (2.0 * (1.0 - t))).abs() < 1e-12);
        }
        let m = crate::gallery::half_uniform_with_atom();
        let spec = from_jump_target(&e("cos(t)"), &m).unwrap();
        let f = spec.bind(&m).unwrap();
        for v in [0.1, 0.6, 0.95] {
            let op = f.left(v).unwrap() - f.density(v).unwrap() * m.survival(v);
            assert!((op - v.cos()).abs() < 1e-9);
        }
        assert!(matches!(
            from_jump_target(&e("1/t"), &u),
            Err(Error::ProbeFailure(_))
        ));
    }
}
