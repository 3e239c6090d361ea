//! JSON spec files: a law block, a drift block with hints, and optional run
//! parameters. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::Path;

use jumplab_core::drift::{LimitHint, Monotone, ProbeKind, Tri};
use jumplab_core::measure::{
    Atom, AtomGenerator, Certificate, DensityPiece, SeriesCheck, TailBound,
};
use jumplab_core::{
    gallery, DriftSpec, Error, Expr, JumpLaw, ProbeOptions, RealFn, Result, StepIntegrand,
};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub law: LawBlock,
    pub drift: DriftBlock,
    #[serde(default, skip_serializing_if = "RunBlock::is_empty")]
    pub run: RunBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawBlock {
    Uniform {
        #[serde(default = "one")]
        upper: f64,
    },
    Exponential {
        rate: f64,
    },
    Factorial,
    Custom {
        #[serde(default)]
        pieces: Vec<PieceBlock>,
        #[serde(default)]
        atoms: Vec<AtomBlock>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generator: Option<String>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceBlock {
    pub lower: f64,
    /// Absent for a piece reaching infinity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub density: Expr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomBlock {
    pub at: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftBlock {
    #[serde(rename = "F0")]
    pub f0: f64,
    pub density: Expr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_jumps: Option<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<Expr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakpoints: Vec<f64>,
    #[serde(default)]
    pub hints: HintsBlock,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintsBlock {
    #[serde(default)]
    pub op_integrable: Tri,
    #[serde(default, rename = "limit_F_survival")]
    pub limit_f_survival: LimitHint,
    #[serde(default, rename = "F_leftlimit_integrable")]
    pub f_leftlimit_integrable: Tri,
    #[serde(default, rename = "F_left_limit")]
    pub f_left_limit: LimitHint,
    #[serde(default)]
    pub monotone: Monotone,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub certificates: BTreeMap<ProbeKind, CertificateBlock>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tail_bounds: BTreeMap<ProbeKind, TailBoundBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateBlock {
    pub id: String,
    pub minorant: Expr,
    pub lower_bound: Expr,
    #[serde(default)]
    pub claim: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesBlock {
    pub term: Expr,
    pub target: f64,
    pub max_terms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TailBoundBlock {
    Sup(f64),
    Explicit(Expr),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Truncations `ε` for the block-integrand harness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesBlock>,
}

impl RunBlock {
    fn is_empty(&self) -> bool {
        *self == RunBlock::default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_abs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_tol: Option<f64>,
}

/// A spec file turned into library values.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub name: Option<String>,
    pub law: JumpLaw,
    pub spec: DriftSpec,
    pub run: RunBlock,
    pub options: ProbeOptions,
    /// Set when the spec came from the gallery.
    pub entry: Option<gallery::GalleryEntry>,
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::SpecFile(msg.into())
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<SpecFile> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| spec_err(e.to_string()))?;
        crate::report::validate_spec(&value).map_err(|errs| spec_err(errs.join("; ")))?;
        let file: SpecFile = serde_json::from_value(value).map_err(|e| spec_err(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(spec_err(format!(
                "unsupported version {}, expected {FORMAT_VERSION}",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec files always serialise")
    }

    pub fn law(&self) -> Result<JumpLaw> {
        match &self.law {
            LawBlock::Uniform { upper } => {
                if !(*upper > 0.0 && upper.is_finite()) {
                    return Err(spec_err(format!(
                        "uniform upper end must be positive, got {upper}"
                    )));
                }
                Ok(JumpLaw::uniform_on(*upper))
            }
            LawBlock::Exponential { rate } => JumpLaw::exponential(*rate),
            LawBlock::Factorial => Ok(JumpLaw::factorial()),
            LawBlock::Custom {
                pieces,
                atoms,
                generator,
            } => {
                let generator = match generator {
                    None => None,
                    Some(g) => Some(
                        AtomGenerator::from_name(g)
                            .ok_or_else(|| spec_err(format!("unknown atom generator `{g}`")))?,
                    ),
                };
                JumpLaw::new(
                    pieces
                        .iter()
                        .map(|p| DensityPiece {
                            lower: p.lower,
                            upper: p.upper.unwrap_or(f64::INFINITY),
                            density: p.density.clone(),
                        })
                        .collect(),
                    atoms
                        .iter()
                        .map(|a| Atom {
                            at: a.at,
                            mass: a.mass,
                        })
                        .collect(),
                    generator,
                )
            }
        }
    }

    pub fn drift(&self) -> Result<DriftSpec> {
        let d = &self.drift;
        let mut spec = DriftSpec::new(d.f0, d.density.clone());
        spec.atom_jumps = d.atom_jumps.clone().map(RealFn::Expr);
        spec.closed_form = d.closed_form.clone().map(RealFn::Expr);
        spec.breakpoints = d.breakpoints.clone();
        let h = &d.hints;
        spec.hints.op_integrable = h.op_integrable;
        spec.hints.limit_f_survival = h.limit_f_survival;
        spec.hints.f_leftlimit_integrable = h.f_leftlimit_integrable;
        spec.hints.f_left_limit = h.f_left_limit;
        spec.hints.monotone = h.monotone;
        for (kind, c) in &h.certificates {
            spec.hints.certificates.insert(
                *kind,
                Certificate {
                    id: c.id.clone(),
                    minorant: RealFn::Expr(c.minorant.clone()),
                    lower_bound: RealFn::Expr(c.lower_bound.clone()),
                    claim: c.claim.clone(),
                    series: c.series.as_ref().map(|s| SeriesCheck {
                        term: s.term.clone(),
                        target: s.target,
                        max_terms: s.max_terms,
                    }),
                },
            );
        }
        for (kind, b) in &h.tail_bounds {
            let bound = match b {
                TailBoundBlock::Sup(c) => TailBound::Sup(*c),
                TailBoundBlock::Explicit(e) => TailBound::Explicit(RealFn::Expr(e.clone())),
            };
            spec.hints.tail_bounds.insert(*kind, bound);
        }
        Ok(spec)
    }

    pub fn options(&self) -> Result<ProbeOptions> {
        let mut o = ProbeOptions::default();
        if let Some(t) = &self.run.tolerances {
            o.tol_abs = t.tol_abs.unwrap_or(o.tol_abs);
            o.tol_rel = t.tol_rel.unwrap_or(o.tol_rel);
            o.divergence_cap = t.divergence_cap.unwrap_or(o.divergence_cap);
            o.max_depth = t.max_depth.unwrap_or(o.max_depth);
            o.band_budget = t.band_budget.unwrap_or(o.band_budget);
            o.zero_tol = t.zero_tol.unwrap_or(o.zero_tol);
        }
        o.validate().map_err(|e| spec_err(e.to_string()))?;
        Ok(o)
    }

    pub fn load(&self) -> Result<Loaded> {
        if let Some(ts) = &self.run.truncations {
            if ts.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                return Err(spec_err("truncations must lie in (0, 1)"));
            }
        }
        if self.run.paths == Some(0) {
            return Err(spec_err("paths must be positive"));
        }
        Ok(Loaded {
            name: self.name.clone(),
            law: self.law()?,
            spec: self.drift()?,
            run: self.run.clone(),
            options: self.options()?,
            entry: None,
        })
    }

    /// A spec file for a law and a drift given entirely by expressions.
    pub fn export(name: Option<&str>, law: &JumpLaw, spec: &DriftSpec) -> Result<SpecFile> {
        let sym = |f: &RealFn, what: &str| -> Result<Expr> {
            f.as_expr().cloned().ok_or_else(|| {
                spec_err(format!(
                    "{what} is a native function and cannot be exported"
                ))
            })
        };
        let law_block = LawBlock::Custom {
            pieces: law
                .pieces()
                .iter()
                .map(|p| PieceBlock {
                    lower: p.lower,
                    upper: p.upper.is_finite().then_some(p.upper),
                    density: p.density.clone(),
                })
                .collect(),
            atoms: law
                .explicit_atoms()
                .iter()
                .map(|a| AtomBlock {
                    at: a.at,
                    mass: a.mass,
                })
                .collect(),
            generator: law.generator().map(|g| g.name().to_string()),
        };
        let h = &spec.hints;
        let mut certificates = BTreeMap::new();
        for (kind, c) in &h.certificates {
            certificates.insert(
                *kind,
                CertificateBlock {
                    id: c.id.clone(),
                    minorant: sym(&c.minorant, "certificate minorant")?,
                    lower_bound: sym(&c.lower_bound, "certificate lower bound")?,
                    claim: c.claim.clone(),
                    series: c.series.as_ref().map(|s| SeriesBlock {
                        term: s.term.clone(),
                        target: s.target,
                        max_terms: s.max_terms,
                    }),
                },
            );
        }
        let mut tail_bounds = BTreeMap::new();
        for (kind, b) in &h.tail_bounds {
            let block = match b {
                TailBound::Sup(c) => TailBoundBlock::Sup(*c),
                TailBound::Explicit(f) => TailBoundBlock::Explicit(sym(f, "tail bound")?),
            };
            tail_bounds.insert(*kind, block);
        }
        Ok(SpecFile {
            version: FORMAT_VERSION,
            name: name.map(str::to_string),
            law: law_block,
            drift: DriftBlock {
                f0: spec.f0,
                density: sym(&spec.density, "density")?,
                atom_jumps: spec
                    .atom_jumps
                    .as_ref()
                    .map(|f| sym(f, "atom jumps"))
                    .transpose()?,
                closed_form: spec
                    .closed_form
                    .as_ref()
                    .map(|f| sym(f, "closed form"))
                    .transpose()?,
                breakpoints: spec.breakpoints.clone(),
                hints: HintsBlock {
                    op_integrable: h.op_integrable,
                    limit_f_survival: h.limit_f_survival,
                    f_leftlimit_integrable: h.f_leftlimit_integrable,
                    f_left_limit: h.f_left_limit,
                    monotone: h.monotone,
                    certificates,
                    tail_bounds,
                },
            },
            run: RunBlock::default(),
        })
    }
}

/// `gallery:<name>` or a path to a spec file.
pub fn resolve(source: &str) -> Result<Loaded> {
    if let Some(name) = source.strip_prefix("gallery:") {
        let entry = gallery::load(name)?;
        return Ok(Loaded {
            name: Some(name.to_string()),
            law: entry.law.clone(),
            spec: entry.spec.clone(),
            run: RunBlock::default(),
            options: ProbeOptions::default(),
            entry: Some(entry),
        });
    }
    let text = std::fs::read_to_string(Path::new(source))
        .map_err(|e| spec_err(format!("{source}: {e}")))?;
    SpecFile::from_json(&text)?.load()
}

/// Step integrand file: `{"steps": [{"lo", "hi", "value"}], "bound"}`.
pub fn read_integrand(path: &str) -> Result<StepIntegrand> {
    let text = std::fs::read_to_string(path).map_err(|e| spec_err(format!("{path}: {e}")))?;
    let raw: StepIntegrand =
        serde_json::from_str(&text).map_err(|e| spec_err(format!("{path}: {e}")))?;
    StepIntegrand::new(raw.steps().to_vec(), raw.bound())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys() {
        let good =
            r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1"}}"#;
        assert!(SpecFile::from_json(good).unwrap().load().is_ok());
        for bad in [
            r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1"}, "extra": 1}"#,
            r#"{"version": 1, "law": {"kind": "uniform", "lower": 0}, "drift": {"F0": 0, "density": "1"}}"#,
            r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1", "hints": {"mono": 1}}}"#,
            r#"{"version": 2, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1"}}"#,
            r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1 +"}}"#,
        ] {
            assert!(
                matches!(SpecFile::from_json(bad), Err(Error::SpecFile(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn rejects_bad_tolerances() {
        let text = r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1"},
                       "run": {"tolerances": {"tol_abs": -1}}}"#;
        assert!(matches!(SpecFile::from_json(text), Err(Error::SpecFile(_))));
        let mut file = SpecFile::from_json(
            r#"{"version": 1, "law": {"kind": "uniform"}, "drift": {"F0": 0, "density": "1"}}"#,
        )
        .unwrap();
        file.run.tolerances = Some(TolerancesBlock {
            zero_tol: Some(f64::INFINITY),
            ..TolerancesBlock::default()
        });
        assert!(matches!(file.load(), Err(Error::SpecFile(_))));
    }

    #[test]
    fn gallery_exports_round_trip() {
        for name in gallery::list() {
            let e = gallery::load(name).unwrap();
            let file = SpecFile::export(Some(name), &e.law, &e.spec).unwrap();
            let back = SpecFile::from_json(&file.to_json()).unwrap();
            assert_eq!(back.to_json(), file.to_json(), "{name}");
            let loaded = back.load().unwrap();
            assert_eq!(loaded.spec.f0, e.spec.f0);
            assert_eq!(loaded.law.atoms().len(), e.law.atoms().len());
        }
    }
}
