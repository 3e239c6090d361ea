//! Built-in laws and drifts, one per regime, each with the hints and
//! divergence certificates its classification needs.

use crate::classifier::{Direction, Regime};
use crate::drift::{DriftSpec, LimitHint, Monotone, ProbeKind};
use crate::error::{Error, Result};
use crate::exprlang::{parse, Expr};
use crate::func::RealFn;
use crate::measure::{Atom, Certificate, DensityPiece, JumpLaw, SeriesCheck, TailBound};
use crate::stochint::{cherny_integrand, StepIntegrand};

/// Half of the mass uniform on `(0, 1)`, half an atom at 1.
pub fn half_uniform_with_atom() -> JumpLaw {
    JumpLaw::new(
        vec![DensityPiece {
            lower: 0.0,
            upper: 1.0,
            density: Expr::num(0.5),
        }],
        vec![Atom { at: 1.0, mass: 0.5 }],
        None,
    )
    .expect("valid law")
}

#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub law: JumpLaw,
    pub spec: DriftSpec,
    pub expected: Regime,
    pub expected_delta_mu: Option<f64>,
    pub note: &'static str,
    /// Deterministic integrand shipped with the entry, and the regime of `F^J`.
    pub integrand: Option<StepIntegrand>,
    pub integrand_expected: Option<Regime>,
}

pub const NAMES: [&str; 9] = [
    "not-semimartingale",
    "nonintegrable-slm",
    "integrable-slm",
    "ui-not-h1",
    "h1-bounded",
    "h1-factorial",
    "hazard-reciprocal",
    "hazard-compensated",
    "cherny-pair",
];

pub fn list() -> Vec<&'static str> {
    NAMES.to_vec()
}

fn x(s: &str) -> Expr {
    parse(s).unwrap_or_else(|e| panic!("gallery expression `{s}`: {e}"))
}

fn cert(id: &str, minorant: &str, lower: &str, claim: &str) -> Certificate {
    Certificate {
        id: id.into(),
        minorant: RealFn::Expr(x(minorant)),
        lower_bound: RealFn::Expr(x(lower)),
        claim: claim.into(),
        series: None,
    }
}

fn entry(
    name: &'static str,
    law: JumpLaw,
    spec: DriftSpec,
    expected: Regime,
    note: &'static str,
) -> GalleryEntry {
    GalleryEntry {
        name,
        law,
        spec,
        expected,
        expected_delta_mu: None,
        note,
        integrand: None,
        integrand_expected: None,
    }
}

fn islm(delta_mu: f64) -> Regime {
    Regime::IntegrableStrictLocalMartingale {
        direction: if delta_mu > 0.0 {
            Direction::Submartingale
        } else {
            Direction::Supermartingale
        },
        delta_mu,
    }
}

const UI_DENSITY: &str = "(log(e/(1-t)) - 1)/((1-t)^2*log(e/(1-t))^2)";
const UI_F: &str = "1/((1-t)*log(e/(1-t)))";

fn ui_not_h1_spec() -> DriftSpec {
    let mut s = DriftSpec::new(1.0, x(UI_DENSITY)).with_closed_form(x(UI_F));
    s.hints.monotone = Monotone::Nondecreasing;
    let h = &mut s.hints.certificates;
    let loglog = "∫_(0,T] F dG = log log(e/(1-T))";
    h.insert(
        ProbeKind::FLeftAbs,
        cert("loglog", UI_F, "log(log(e/(1-t)))", loglog),
    );
    h.insert(
        ProbeKind::FAbs,
        cert("loglog", UI_F, "log(log(e/(1-t)))", loglog),
    );
    h.insert(
        ProbeKind::FgAbs,
        cert(
            "loglog-density",
            UI_DENSITY,
            "log(log(e/(1-t))) + 1/log(e/(1-t)) - 1",
            "∫_(0,T] f Ḡ dG = log log(e/(1-T)) + 1/log(e/(1-T)) - 1",
        ),
    );
    h.insert(
        ProbeKind::FabsLeft,
        cert(
            "loglog-shifted",
            &format!("{UI_F} - 1"),
            "log(log(e/(1-t))) - t",
            "F - 1 <= |F|, integrated",
        ),
    );
    s
}

pub fn load(name: &str) -> Result<GalleryEntry> {
    let uniform = JumpLaw::uniform;
    let name: &'static str = NAMES
        .iter()
        .copied()
        .find(|n| *n == name)
        .ok_or_else(|| Error::UnknownEntry(name.into()))?;
    Ok(match name {
        "not-semimartingale" => {
            let mut s = DriftSpec::new(1f64.sin(), x("2*cos(1/(1-t))/(1-t)^2"))
                .with_closed_form(x("sin(1/(1-t))"));
            let c = cert(
                "cos-blocks-atom",
                "max(0, abs(cos(1/(1-t)))/(1-t)^2 - 1)",
                "(1/(1-t) - 1)/pi - 2.5",
                "|cos x| x² - 1 <= |𝒦F| with x = 1/(1-t); its integral grows like x/π",
            );
            s.hints.certificates.insert(ProbeKind::OpAbs, c.clone());
            s.hints.certificates.insert(ProbeKind::FgAbs, c);
            s.hints
                .tail_bounds
                .insert(ProbeKind::FLeftAbs, TailBound::Sup(1.0));
            s.hints
                .tail_bounds
                .insert(ProbeKind::FAbs, TailBound::Sup(1.0));
            s.hints
                .tail_bounds
                .insert(ProbeKind::FabsLeft, TailBound::Sup(1.0));
            entry(
                name,
                half_uniform_with_atom(),
                s,
                Regime::NotSemimartingale,
                "F = sin(1/(1-t)) against half uniform mass plus an atom at 1. F has no left limit at 1, so \
                 𝒦F(1) is set to 0; any other choice gives the same process up to the null set. The related \
                 pathology of a drift that is not càdlàg at t_G shows up here too: F(1) cannot be defined \
                 so that F is right-continuous with a left limit at 1.",
            )
        }
        "nonintegrable-slm" => {
            let mut s = DriftSpec::new(1f64.sin(), x("cos(1/(1-t))/(1-t)^2"))
                .with_closed_form(x("sin(1/(1-t))"));
            let mut c = cert(
                "harmonic-blocks",
                "max(0, abs(cos(1/(1-t)))/(1-t) - 1)",
                "(2/pi)*log(2/(3*pi*(1-t))) - t",
                "|x cos x| - 1 <= |𝒦F|; the block sums of |cos x|/x over half periods dominate Σ 2/((2k+1)π/2)",
            );
            c.series = Some(SeriesCheck {
                term: x("2/((2*t+1)*pi/2)"),
                target: 8.0,
                max_terms: 1_000_000,
            });
            s.hints.certificates.insert(ProbeKind::OpAbs, c.clone());
            s.hints.certificates.insert(ProbeKind::FgAbs, c);
            s.hints.certificates.insert(
                ProbeKind::FabsLeft,
                cert(
                    "sup-minus-one",
                    "max(0,(2/pi)*(1/(1-t)-1)-4)",
                    "(2/pi)*log((1/(1-t))/(1+2*pi)) - (2/pi+4)/(1+2*pi)",
                    "the running total variation of sin grows like 2x/π",
                ),
            );
            s.hints
                .tail_bounds
                .insert(ProbeKind::FLeftAbs, TailBound::Sup(1.0));
            s.hints
                .tail_bounds
                .insert(ProbeKind::FAbs, TailBound::Sup(1.0));
            entry(
                name,
                uniform(),
                s,
                Regime::NonintegrableLocalMartingale,
                "F = sin(1/(1-t)) under the uniform law: 𝒦F(v) = sin x - x cos x with x = 1/(1-v) is not integrable.",
            )
        }
        "integrable-slm" => {
            let mut s = DriftSpec::new(1.0, x("1/(1-t)^2")).with_closed_form(x("1/(1-t)"));
            s.hints.monotone = Monotone::Nondecreasing;
            let log = cert(
                "log",
                "1/(1-t)",
                "log(1/(1-t))",
                "∫_(0,T] dt/(1-t) = log(1/(1-T))",
            );
            s.hints
                .certificates
                .insert(ProbeKind::FLeftAbs, log.clone());
            s.hints.certificates.insert(ProbeKind::FAbs, log.clone());
            s.hints.certificates.insert(ProbeKind::FgAbs, log);
            s.hints.certificates.insert(
                ProbeKind::FabsLeft,
                cert(
                    "log-shifted",
                    "1/(1-t) - 1",
                    "log(1/(1-t)) - t",
                    "F - 1 <= |F|, integrated",
                ),
            );
            let mut e = entry(
                name,
                uniform(),
                s,
                islm(-1.0),
                "F = 1/(1-t) under the uniform law: 𝒦F = 0, so every path ends at 0 while E[M_0] = 1.",
            );
            e.expected_delta_mu = Some(-1.0);
            e
        }
        "ui-not-h1" => {
            let mut e = entry(
                name,
                uniform(),
                ui_not_h1_spec(),
                Regime::UiMartingaleNotH1,
                "F = 1/((1-t)log(e/(1-t))): 𝒦F = 1/((1-t)log²(e/(1-t))) is integrable and F Ḡ → 0, \
                 yet ∫ F dG = ∞.",
            );
            e.expected_delta_mu = Some(0.0);
            e
        }
        "h1-bounded" => {
            let mut s = DriftSpec::new(0.0, x("1")).with_closed_form(x("t"));
            s.hints.monotone = Monotone::Nondecreasing;
            entry(
                name,
                uniform(),
                s,
                Regime::H1Martingale,
                "A bounded drift with bounded 𝒦F.",
            )
        }
        "h1-factorial" => {
            let mut s = DriftSpec::new(1.0, x("0"))
                .with_atom_jumps(x("gamma(t) - indicator(1, 1e308)*gamma(max(t - 1, 1))"));
            s.hints.monotone = Monotone::Nondecreasing;
            let tb = |e: &str| TailBound::Explicit(RealFn::Expr(x(e)));
            s.hints
                .tail_bounds
                .insert(ProbeKind::OpAbs, tb("(1+e)/((e-1)*(t-1))"));
            s.hints
                .tail_bounds
                .insert(ProbeKind::FLeftAbs, tb("1/((e-1)*(t-1))"));
            s.hints
                .tail_bounds
                .insert(ProbeKind::FabsLeft, tb("1/((e-1)*(t-1))"));
            s.hints
                .tail_bounds
                .insert(ProbeKind::FgAbs, tb("e/((e-1)*(t-1))"));
            let mut c = cert(
                "harmonic",
                "gamma(t)",
                "log(t)/(e-1)",
                "F(k) ΔG(k) = 1/(k (e-1)): harmonic divergence",
            );
            c.series = Some(SeriesCheck {
                term: x("1/t"),
                target: 20.0,
                max_terms: 1_000_000_000,
            });
            s.hints.certificates.insert(ProbeKind::FAbs, c);
            s.hints.limit_f_survival = LimitHint::Value(0.0);
            entry(
                name,
                JumpLaw::factorial(),
                s,
                Regime::H1Martingale,
                "Atoms at k = 1, 2, ... with masses 1/((e-1) k!) and F(k) = (k-1)!: F(·-) is integrable, F is not.",
            )
        }
        "hazard-reciprocal" => {
            let mut s = DriftSpec::new(1.0, x("exp(2*t)")).with_closed_form(x("exp(t)"));
            s.hints.monotone = Monotone::Nondecreasing;
            let lin = cert("linear", "exp(t)", "t - 1e-6", "∫_(0,T] e^t e^{-t} dt = T");
            s.hints
                .certificates
                .insert(ProbeKind::FLeftAbs, lin.clone());
            s.hints.certificates.insert(ProbeKind::FAbs, lin.clone());
            s.hints.certificates.insert(ProbeKind::FgAbs, lin);
            s.hints.certificates.insert(
                ProbeKind::FabsLeft,
                cert(
                    "linear-shifted",
                    "exp(t) - 1",
                    "t - 1",
                    "F - 1 <= |F|, integrated",
                ),
            );
            let mut e = entry(
                name,
                JumpLaw::exponential(1.0)?,
                s,
                islm(-1.0),
                "F = 1/Ḡ for the unit exponential law: 𝒦F = 0 and F Ḡ = 1.",
            );
            e.expected_delta_mu = Some(-1.0);
            e
        }
        "hazard-compensated" => {
            let mut s = DriftSpec::new(0.0, x("-exp(t)")).with_closed_form(x("-t"));
            s.hints.monotone = Monotone::Nonincreasing;
            entry(
                name,
                JumpLaw::exponential(1.0)?,
                s,
                Regime::H1Martingale,
                "F(t) = -∫_(0,t] dG/Ḡ(v-) = -t for the unit exponential law, so 𝒦F = F + 1: the compensated default indicator.",
            )
        }
        "cherny-pair" => {
            let mut e = entry(
                name,
                uniform(),
                ui_not_h1_spec(),
                Regime::UiMartingaleNotH1,
                "The UI martingale of ui-not-h1 with the block integrand J = Σ 1_(1-4^{-n}, 1-2·4^{-n}]: \
                 J • M is a strict local martingale.",
            );
            e.expected_delta_mu = Some(0.0);
            e.integrand = Some(cherny_integrand());
            e.integrand_expected = Some(Regime::NonintegrableLocalMartingale);
            e
        }
        _ => unreachable!("every listed name has an entry"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_load() {
        for name in list() {
            let e = load(name).unwrap();
            assert_eq!(e.name, name);
        }
        assert!(matches!(load("nope"), Err(Error::UnknownEntry(_))));
        assert_eq!(
            load("integrable-slm").unwrap().expected_delta_mu,
            Some(-1.0)
        );
    }

    #[test]
    fn harmonic_blocks_exceed_any_bound() {
        let c = &load("nonintegrable-slm").unwrap().spec.hints.certificates[&ProbeKind::OpAbs];
        let series = c.series.as_ref().unwrap();
        let mut acc = 0.0;
        let mut checkpoints = Vec::new();
        for k in 1..=1_000_000u64 {
            acc += series.term.eval(k as f64).unwrap();
            if k.is_power_of_two() {
                checkpoints.push(acc);
            }
        }
        assert!(checkpoints.windows(2).all(|w| w[1] - w[0] > 0.25));
        assert!(acc > series.target);
    }
}
