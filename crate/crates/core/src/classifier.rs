//! The decision diagram for single-jump local martingales.

use serde::{Serialize, Serializer};

use crate::compensator::{
    change_in_mass, integrability_report, CompensatedJump, IntegrabilityReport, MassChange,
    Resolved,
};
use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::measure::{JumpLaw, ProbeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Submartingale,
    Supermartingale,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    NotSemimartingale,
    NonintegrableLocalMartingale,
    IntegrableStrictLocalMartingale {
        direction: Direction,
        delta_mu: f64,
    },
    UiMartingaleNotH1,
    H1Martingale,
    /// Name of the first probe that stayed inconclusive.
    Unknown {
        blocking: String,
    },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::NotSemimartingale => "not_semimartingale",
            Regime::NonintegrableLocalMartingale => "nonintegrable_local_martingale",
            Regime::IntegrableStrictLocalMartingale { .. } => "integrable_strict_local_martingale",
            Regime::UiMartingaleNotH1 => "ui_martingale_not_h1",
            Regime::H1Martingale => "h1_martingale",
            Regime::Unknown { .. } => "unknown",
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Regime::Unknown { .. })
    }

    fn unknown(blocking: &str) -> Regime {
        Regime::Unknown {
            blocking: blocking.into(),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::IntegrableStrictLocalMartingale {
                direction,
                delta_mu,
            } => {
                write!(f, "{} ({direction:?}, Δμ = {delta_mu})", self.name())
            }
            Regime::Unknown { blocking } => write!(f, "unknown (blocked by {blocking})"),
            _ => f.write_str(self.name()),
        }
    }
}

/// Everything the diagram looks at, after probes and hints are combined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facts {
    pub endpoint_atom_positive: bool,
    pub op_integrable: Option<bool>,
    pub limit_f_survival: Resolved,
    pub f_left_integrable: Option<bool>,
}

/// Walks the diagram. Pure, so the full truth table can be tested directly.
pub fn decide(facts: &Facts) -> Result<Regime> {
    let op = match facts.op_integrable {
        None => return Ok(Regime::unknown("op_abs")),
        Some(op) => op,
    };
    if facts.endpoint_atom_positive {
        return Ok(if op {
            Regime::H1Martingale
        } else {
            Regime::NotSemimartingale
        });
    }
    if !op {
        return Ok(Regime::NonintegrableLocalMartingale);
    }
    let limit = match facts.limit_f_survival {
        Resolved::Value(l) => l,
        Resolved::Unknown => return Ok(Regime::unknown("limit_F_survival")),
        Resolved::NoFiniteLimit => {
            return Err(Error::Contradiction(
                "𝒦F is integrable but F Ḡ has no finite limit at t_G".into(),
            ))
        }
    };
    if limit != 0.0 {
        let delta_mu = -limit;
        let direction = if delta_mu > 0.0 {
            Direction::Submartingale
        } else {
            Direction::Supermartingale
        };
        return Ok(Regime::IntegrableStrictLocalMartingale {
            direction,
            delta_mu,
        });
    }
    Ok(match facts.f_left_integrable {
        Some(false) => Regime::UiMartingaleNotH1,
        Some(true) => Regime::H1Martingale,
        None => Regime::unknown("F_left_abs"),
    })
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub regime: Regime,
    pub mass: Option<MassChange>,
    pub evidence: IntegrabilityReport,
    pub hint_usage: Vec<String>,
}

impl Verdict {
    /// `Δμ` when it is known: from the regime, or from the mass computation.
    pub fn delta_mu(&self) -> Option<f64> {
        match &self.regime {
            Regime::IntegrableStrictLocalMartingale { delta_mu, .. } => Some(*delta_mu),
            _ => self.mass.as_ref().and_then(|m| m.value),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            regime: &'static str,
            #[serde(skip_serializing_if = "Option::is_none")]
            direction: Option<Direction>,
            #[serde(skip_serializing_if = "Option::is_none")]
            blocking: Option<&'a str>,
            delta_mu: Option<f64>,
            mass: &'a Option<MassChange>,
            evidence: &'a IntegrabilityReport,
            hint_usage: &'a [String],
        }
        let (direction, blocking) = match &self.regime {
            Regime::IntegrableStrictLocalMartingale { direction, .. } => (Some(*direction), None),
            Regime::Unknown { blocking } => (None, Some(blocking.as_str())),
            _ => (None, None),
        };
        Out {
            regime: self.regime.name(),
            direction,
            blocking,
            delta_mu: self.delta_mu(),
            mass: &self.mass,
            evidence: &self.evidence,
            hint_usage: &self.hint_usage,
        }
        .serialize(s)
    }
}

pub fn classify(spec: &DriftSpec, law: &JumpLaw) -> Result<Verdict> {
    classify_with(spec, law, &ProbeOptions::default())
}

pub fn classify_with(spec: &DriftSpec, law: &JumpLaw, opts: &ProbeOptions) -> Result<Verdict> {
    let comp = CompensatedJump::with_options(spec, law, *opts)?;
    classify_compensated(&comp)
}

/// Classifies an already bound process, reusing its memoised probes.
pub fn classify_compensated(comp: &CompensatedJump) -> Result<Verdict> {
    let evidence = integrability_report(comp)?;
    let facts = Facts {
        endpoint_atom_positive: evidence.delta_g_tg > 0.0,
        op_integrable: evidence.resolved.op_integrable,
        limit_f_survival: evidence.resolved.limit_f_survival,
        f_left_integrable: evidence.resolved.f_left_integrable,
    };
    let regime = decide(&facts)?;
    let mass = match facts.op_integrable {
        Some(true) => Some(change_in_mass(comp)?),
        _ => None,
    };
    Ok(Verdict {
        regime,
        mass,
        hint_usage: evidence.hints_used.clone(),
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    fn facts(atom: bool, op: Option<bool>, limit: Resolved, left: Option<bool>) -> Facts {
        Facts {
            endpoint_atom_positive: atom,
            op_integrable: op,
            limit_f_survival: limit,
            f_left_integrable: left,
        }
    }

    #[test]
    fn truth_table() {
        use Resolved::*;
        let limits = [Value(0.0), Value(1.0), Value(-2.0), Unknown];
        let lefts = [Some(true), Some(false), None];
        for limit in limits {
            for left in lefts {
                let r = |atom, op| decide(&facts(atom, op, limit, left)).unwrap();
                assert_eq!(r(true, Some(false)), Regime::NotSemimartingale);
                assert_eq!(r(true, Some(true)), Regime::H1Martingale);
                assert_eq!(r(false, Some(false)), Regime::NonintegrableLocalMartingale);
                assert!(
                    matches!(r(true, None), Regime::Unknown { ref blocking } if blocking == "op_abs")
                );
                assert!(r(false, None).is_unknown());
            }
        }
        let leaf = |limit, left| decide(&facts(false, Some(true), limit, left)).unwrap();
        assert_eq!(
            leaf(Value(1.0), None),
            Regime::IntegrableStrictLocalMartingale {
                direction: Direction::Supermartingale,
                delta_mu: -1.0
            }
        );
        assert_eq!(
            leaf(Value(-2.0), Some(true)),
            Regime::IntegrableStrictLocalMartingale {
                direction: Direction::Submartingale,
                delta_mu: 2.0
            }
        );
        assert_eq!(leaf(Value(0.0), Some(false)), Regime::UiMartingaleNotH1);
        assert_eq!(leaf(Value(0.0), Some(true)), Regime::H1Martingale);
        assert!(
            matches!(leaf(Value(0.0), None), Regime::Unknown { ref blocking } if blocking == "F_left_abs")
        );
        assert!(
            matches!(leaf(Unknown, Some(true)), Regime::Unknown { ref blocking } if blocking == "limit_F_survival")
        );
        assert!(matches!(
            decide(&facts(false, Some(true), NoFiniteLimit, None)),
            Err(Error::Contradiction(_))
        ));
    }

    #[test]
    fn zero_process_is_h1_for_every_law() {
        let laws = [
            JumpLaw::uniform(),
            JumpLaw::exponential(2.0).unwrap(),
            JumpLaw::factorial(),
            crate::gallery::half_uniform_with_atom(),
        ];
        for law in laws {
            let v = classify(&DriftSpec::constant(0.0), &law).unwrap();
            assert_eq!(v.regime, Regime::H1Martingale, "{law:?}");
        }
    }

    #[test]
    fn integrable_strict_local() {
        let spec = DriftSpec::new(1.0, parse("1/(1-t)^2").unwrap())
            .with_closed_form(parse("1/(1-t)").unwrap());
        let v = classify(&spec, &JumpLaw::uniform()).unwrap();
        match v.regime {
            Regime::IntegrableStrictLocalMartingale {
                direction,
                delta_mu,
            } => {
                assert_eq!(direction, Direction::Supermartingale);
                assert!((delta_mu + 1.0).abs() <= 1e-9, "{delta_mu}");
            }
            other => panic!("{other}"),
        }
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["regime"], "integrable_strict_local_martingale");
        assert_eq!(json["direction"], "supermartingale");
    }

    #[test]
    fn hazard_compensated_is_h1() {
        let mut spec =
            DriftSpec::new(0.0, parse("-exp(t)").unwrap()).with_closed_form(parse("-t").unwrap());
        spec.hints.monotone = crate::drift::Monotone::Nonincreasing;
        let v = classify(&spec, &JumpLaw::exponential(1.0).unwrap()).unwrap();
        assert_eq!(v.regime, Regime::H1Martingale);
    }
}
