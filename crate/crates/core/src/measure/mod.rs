//! The jump-time law `G`: absolutely continuous pieces plus atoms, with
//! Lebesgue–Stieltjes integration on half-open intervals `(a, b]`,
//! improper-integral and tail-limit probes, and generalized-inverse sampling.

mod bands;
mod cumulative;
pub mod probe;
mod running;

use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprlang::Expr;
use crate::quadrature::{self, QuadConfig};

pub(crate) use bands::Bands;
pub(crate) use cumulative::{Cumulative, Integrand};
pub use probe::{
    improper_integral, tail_limit, Certificate, CertificateCheck, FiniteMethod, IntegralVerdict,
    LimitVerdict, ProbeAids, ProbeEvidence, ProbeOptions, SeriesCheck, StopReason, TailBound,
    TracePoint,
};
pub(crate) use running::RunningIntegral;

/// Density `g` on the half-open interval `(lower, upper]`; `upper` may be `+∞`.
#[derive(Debug, Clone)]
pub struct DensityPiece {
    pub lower: f64,
    pub upper: f64,
    pub density: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub at: f64,
    pub mass: f64,
}

/// Generated atom sequences for laws with infinitely many atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomGenerator {
    /// Atom `(e-1)^-1 / k!` at every integer `k >= 1`.
    Factorial,
}

impl AtomGenerator {
    pub fn name(self) -> &'static str {
        match self {
            AtomGenerator::Factorial => "factorial",
        }
    }

    pub fn from_name(name: &str) -> Option<AtomGenerator> {
        match name {
            "factorial" => Some(AtomGenerator::Factorial),
            _ => None,
        }
    }

    /// The `k`-th atom, `k >= 1`.
    pub fn atom(self, k: usize) -> Atom {
        match self {
            AtomGenerator::Factorial => {
                let lnm = -(std::f64::consts::E - 1.0).ln()
                    - statrs::function::gamma::ln_gamma(k as f64 + 1.0);
                Atom {
                    at: k as f64,
                    mass: lnm.exp(),
                }
            }
        }
    }

    /// Upper bound on the mass of all atoms after the `k`-th.
    pub fn tail_mass_bound(self, k: usize) -> f64 {
        match self {
            AtomGenerator::Factorial => {
                let e = std::f64::consts::E;
                (e / (e - 1.0)) * (-statrs::function::gamma::ln_gamma(k as f64 + 2.0)).exp()
            }
        }
    }
}

/// Smallest atom mass that is materialized from a generator.
const MIN_GENERATED_MASS: f64 = 1e-300;

/// `(G(t), Ḡ(t), ΔG(t))` at a single time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LawPoint {
    pub cdf: f64,
    pub survival: f64,
    pub atom: f64,
}

struct LawData {
    pieces: Vec<DensityPiece>,
    atoms: Vec<Atom>,
    atom_prefix: Vec<f64>,
    atom_suffix: Vec<f64>,
    explicit_atoms: usize,
    generator: Option<AtomGenerator>,
    generated_tail: f64,
    right_endpoint: f64,
    horizon: f64,
    mass: Cumulative,
    structural_band: usize,
}

/// Law of the jump time. Cheap to clone; immutable after construction.
#[derive(Clone)]
pub struct JumpLaw {
    data: Arc<LawData>,
}

impl std::fmt::Debug for JumpLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpLaw")
            .field("pieces", &self.data.pieces)
            .field("atoms", &self.data.explicit_atoms)
            .field("generator", &self.data.generator)
            .field("right_endpoint", &self.data.right_endpoint)
            .finish()
    }
}

pub(crate) fn law_quad() -> QuadConfig {
    QuadConfig {
        rel_tol: 1e-14,
        abs_tol: 1e-300,
        max_intervals: 1 << 12,
        scale_share: 0.0,
    }
}

fn piece_density_at(pieces: &[DensityPiece], v: f64) -> Result<f64> {
    let i = pieces.partition_point(|p| p.upper < v);
    match pieces.get(i) {
        Some(p) if p.lower < v => p.density.eval(v),
        _ => Ok(0.0),
    }
}

impl JumpLaw {
    pub fn new(
        pieces: Vec<DensityPiece>,
        atoms: Vec<Atom>,
        generator: Option<AtomGenerator>,
    ) -> Result<JumpLaw> {
        let bad = |m: String| Err(Error::InvalidLaw(m));
        for p in &pieces {
            if !(p.lower >= 0.0 && p.lower < p.upper) || p.lower.is_infinite() {
                return bad(format!(
                    "piece ({}, {}] is not a valid interval in [0, ∞]",
                    p.lower, p.upper
                ));
            }
        }
        for w in pieces.windows(2) {
            if w[1].lower < w[0].upper {
                return bad("density pieces must be sorted and non-overlapping".into());
            }
        }
        for a in &atoms {
            if !(a.at > 0.0 && a.at.is_finite()) {
                return bad(format!(
                    "atom location {} must be positive and finite",
                    a.at
                ));
            }
            if !(a.mass > 0.0 && a.mass <= 1.0) {
                return bad(format!("atom mass {} must lie in (0, 1]", a.mass));
            }
        }
        for w in atoms.windows(2) {
            if w[1].at <= w[0].at {
                return bad("atom locations must be strictly increasing".into());
            }
        }
        let explicit_atoms = atoms.len();
        let mut all_atoms = atoms;
        let mut generated_tail = 0.0;
        if let Some(g) = generator {
            if explicit_atoms > 0 {
                return bad("explicit atoms cannot be combined with a generator".into());
            }
            let mut k = 1;
            loop {
                let a = g.atom(k);
                if a.mass < MIN_GENERATED_MASS {
                    break;
                }
                all_atoms.push(a);
                k += 1;
            }
            generated_tail = g.tail_mass_bound(k - 1);
        }
        let right_endpoint = if generator.is_some() {
            f64::INFINITY
        } else {
            let p = pieces.last().map_or(0.0, |p| p.upper);
            let a = all_atoms.last().map_or(0.0, |a| a.at);
            p.max(a)
        };
        if right_endpoint <= 0.0 {
            return bad("the law has no mass".into());
        }
        let bands = Bands::new(right_endpoint);
        let cutoff: Arc<OnceLock<f64>> = Arc::new(OnceLock::new());
        let density_pieces = pieces.clone();
        let cut = cutoff.clone();
        let density: Integrand = Arc::new(move |v: f64| {
            let r = piece_density_at(&density_pieces, v);
            match (r, cut.get()) {
                (Err(_), Some(&c)) if v > c => Ok(0.0),
                (r, _) => r,
            }
        });
        let segments: Vec<(f64, f64)> = pieces.iter().map(|p| (p.lower, p.upper)).collect();
        let mut splits: Vec<f64> = all_atoms.iter().map(|a| a.at).collect();
        splits.extend(pieces.iter().flat_map(|p| [p.lower, p.upper]));
        splits.retain(|x| x.is_finite());
        splits.sort_by(f64::total_cmp);
        splits.dedup();
        let constants = pieces.iter().map(|p| p.density.constant_value()).collect();
        let mass = Cumulative::new(bands.clone(), segments, splits.clone(), density, law_quad())
            .with_constants(constants);

        let mut structural_band = 0;
        for &x in splits.iter().filter(|&&x| x < right_endpoint && x > 0.0) {
            if generator.is_none() {
                structural_band = structural_band.max(bands.locate(x));
            }
        }
        for p in &pieces {
            if p.lower > 0.0 {
                structural_band = structural_band.max(bands.locate(p.lower));
            }
        }

        // continuous mass, band by band, validating nonnegativity as we go
        let mut continuous = 0.0;
        let mut quiet = 0;
        let mut last_band = 0;
        for j in 0..bands.count() {
            let table = mass
                .table(j)
                .map_err(|e| Error::InvalidLaw(format!("density not integrable: {e}")))?;
            for l in &table.leaves {
                if l.value < -1e-300 || l.value < (1.0 - 1e-9) * l.abs_value {
                    return bad(format!(
                        "density is negative somewhere on ({}, {}]",
                        l.lo, l.hi
                    ));
                }
            }
            let t = table.total();
            continuous += t;
            last_band = j;
            if right_endpoint.is_infinite() {
                let (lo, _) = bands.bounds(j);
                let beyond_pieces = pieces.iter().all(|p| p.upper.is_finite() && p.upper <= lo);
                if beyond_pieces {
                    break;
                }
                if j > structural_band && t <= 1e-17 * continuous {
                    quiet += 1;
                    if quiet >= 2 {
                        break;
                    }
                } else {
                    quiet = 0;
                }
            }
        }
        let validated_end = bands.bounds(last_band).1;
        let _ = cutoff.set(validated_end);

        let atom_mass: f64 = all_atoms.iter().map(|a| a.mass).sum();
        let total = continuous + atom_mass + generated_tail;
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("total mass is {total}, expected 1 within 1e-12"));
        }
        let mut atom_prefix = Vec::with_capacity(all_atoms.len() + 1);
        let mut acc = 0.0;
        atom_prefix.push(0.0);
        for a in &all_atoms {
            acc += a.mass;
            atom_prefix.push(acc);
        }
        let mut atom_suffix = vec![0.0; all_atoms.len() + 1];
        for i in (0..all_atoms.len()).rev() {
            atom_suffix[i] = atom_suffix[i + 1] + all_atoms[i].mass;
        }
        let horizon = if generator.is_some() {
            all_atoms.last().map_or(0.0, |a| a.at)
        } else if right_endpoint.is_infinite() {
            validated_end
        } else {
            right_endpoint
        };
        Ok(JumpLaw {
            data: Arc::new(LawData {
                pieces,
                atoms: all_atoms,
                atom_prefix,
                atom_suffix,
                explicit_atoms,
                generator,
                generated_tail,
                right_endpoint,
                horizon,
                mass,
                structural_band,
            }),
        })
    }

    /// Uniform law on `(0, 1)`.
    pub fn uniform() -> JumpLaw {
        JumpLaw::uniform_on(1.0)
    }

    pub fn uniform_on(b: f64) -> JumpLaw {
        JumpLaw::new(
            vec![DensityPiece {
                lower: 0.0,
                upper: b,
                density: Expr::lit(1.0 / b),
            }],
            vec![],
            None,
        )
        .expect("uniform law is valid")
    }

    /// Exponential law with survival `exp(-rate·t)`.
    pub fn exponential(rate: f64) -> Result<JumpLaw> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidLaw(format!("rate {rate} must be positive")));
        }
        let density = if rate == 1.0 {
            crate::exprlang::parse("exp(-t)")?
        } else {
            crate::exprlang::parse(&format!("{rate:?} * exp(-{rate:?} * t)"))?
        };
        JumpLaw::new(
            vec![DensityPiece {
                lower: 0.0,
                upper: f64::INFINITY,
                density,
            }],
            vec![],
            None,
        )
    }

    /// Atoms `(e-1)^-1 / k!` at `k = 1, 2, ...`.
    pub fn factorial() -> JumpLaw {
        JumpLaw::new(vec![], vec![], Some(AtomGenerator::Factorial))
            .expect("factorial law is valid")
    }

    pub fn pieces(&self) -> &[DensityPiece] {
        &self.data.pieces
    }

    /// All atoms, including the materialized part of a generator.
    pub fn atoms(&self) -> &[Atom] {
        &self.data.atoms
    }

    /// Atoms given explicitly at construction (excluding generated ones).
    pub fn explicit_atoms(&self) -> &[Atom] {
        &self.data.atoms[..self.data.explicit_atoms]
    }

    pub fn generator(&self) -> Option<AtomGenerator> {
        self.data.generator
    }

    /// Upper bound on generated atom mass that was not materialized.
    pub fn unmaterialized_mass(&self) -> f64 {
        self.data.generated_tail
    }

    /// `t_G`, possibly `+∞`.
    pub fn right_endpoint(&self) -> f64 {
        self.data.right_endpoint
    }

    /// Largest time up to which the law is resolved numerically.
    pub fn horizon(&self) -> f64 {
        self.data.horizon
    }

    /// `ΔG(t_G)`.
    pub fn endpoint_atom(&self) -> f64 {
        let tg = self.data.right_endpoint;
        if tg.is_finite() {
            self.atom_mass(tg)
        } else {
            0.0
        }
    }

    pub(crate) fn bands(&self) -> &Bands {
        self.data.mass.bands()
    }

    /// Highest band index holding a piece boundary or an explicit atom.
    pub(crate) fn structural_band(&self) -> usize {
        self.data.structural_band
    }

    /// Truncation point `T_k`.
    pub fn truncation(&self, k: usize) -> f64 {
        self.bands().truncation(k)
    }

    pub fn atom_mass(&self, t: f64) -> f64 {
        let i = self.data.atoms.partition_point(|a| a.at < t);
        match self.data.atoms.get(i) {
            Some(a) if a.at == t => a.mass,
            _ => 0.0,
        }
    }

    /// Atoms located in `(a, b]`.
    pub fn atoms_in(&self, a: f64, b: f64) -> &[Atom] {
        let lo = self.data.atoms.partition_point(|x| x.at <= a);
        let hi = self.data.atoms.partition_point(|x| x.at <= b);
        &self.data.atoms[lo..hi.max(lo)]
    }

    /// Continuous density `g(v)` (zero outside the pieces).
    pub fn density(&self, v: f64) -> Result<f64> {
        piece_density_at(&self.data.pieces, v)
    }

    pub(crate) fn has_continuous_mass_at(&self, v: f64) -> bool {
        self.density(v).map(|g| g > 0.0).unwrap_or(false)
    }

    /// Sorted continuous supports `(lo, hi]`.
    pub(crate) fn segments(&self) -> Vec<(f64, f64)> {
        self.data
            .pieces
            .iter()
            .map(|p| (p.lower, p.upper))
            .collect()
    }

    /// Sorted piece boundaries and atom locations.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.data.atoms.iter().map(|a| a.at).collect();
        v.extend(self.data.pieces.iter().flat_map(|p| [p.lower, p.upper]));
        v.retain(|x| x.is_finite());
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    fn atoms_upto(&self, t: f64) -> f64 {
        let i = self.data.atoms.partition_point(|a| a.at <= t);
        self.data.atom_prefix[i]
    }

    fn atoms_above(&self, t: f64) -> f64 {
        let i = self.data.atoms.partition_point(|a| a.at <= t);
        self.data.atom_suffix[i]
    }

    pub fn evaluate(&self, t: f64) -> LawPoint {
        let atom = if t.is_finite() {
            self.atom_mass(t)
        } else {
            0.0
        };
        if t <= 0.0 || t.is_nan() {
            return LawPoint {
                cdf: 0.0,
                survival: 1.0,
                atom: 0.0,
            };
        }
        if t >= self.data.right_endpoint {
            return LawPoint {
                cdf: 1.0,
                survival: 0.0,
                atom,
            };
        }
        LawPoint {
            cdf: self.cdf(t),
            survival: self.survival(t),
            atom,
        }
    }

    /// `G(t)`, accumulated from the left.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.data.right_endpoint {
            return 1.0;
        }
        let c = self
            .data
            .mass
            .prefix(t)
            .expect("law quadrature validated at construction");
        (c + self.atoms_upto(t)).min(1.0)
    }

    /// `Ḡ(t)`, accumulated from the right (never formed as `1 - G`).
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if t >= self.data.right_endpoint {
            return 0.0;
        }
        let c = self
            .data
            .mass
            .suffix(t)
            .expect("law quadrature validated at construction");
        (c + self.atoms_above(t)).clamp(0.0, 1.0)
    }

    /// `Ḡ(t-)`.
    pub fn survival_left(&self, t: f64) -> f64 {
        self.survival(t) + self.atom_mass(t)
    }

    /// Continuous-part integral of `phi·g` over `(a, b]`, split at bands, piece
    /// boundaries and atoms. Returns `(value, error estimate)`.
    pub(crate) fn continuous_integral(
        &self,
        phi: &(dyn Fn(f64) -> Result<f64> + Sync),
        a: f64,
        b: f64,
        cfg: &QuadConfig,
    ) -> Result<(f64, f64)> {
        let mut value = 0.0;
        let mut error = 0.0;
        if !(a < b) {
            return Ok((0.0, 0.0));
        }
        let bands = self.bands();
        let mut cuts = vec![a];
        let (ja, jb) = (bands.locate(a.max(f64::MIN_POSITIVE)), bands.locate(b));
        for j in ja..=jb {
            let hi = bands.bounds(j).1;
            if hi > a && hi < b {
                cuts.push(hi);
            }
        }
        for x in self.breakpoints() {
            if x > a && x < b {
                cuts.push(x);
            }
        }
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let i = self.data.pieces.partition_point(|p| p.upper < mid);
            let Some(piece) = self.data.pieces.get(i).filter(|p| p.lower < mid) else {
                continue;
            };
            let mut integrand = |v: f64| -> Result<f64> {
                let g = piece.density.eval(v)?;
                if g == 0.0 {
                    return Ok(0.0);
                }
                Ok(phi(v)? * g)
            };
            let (v, e) = quadrature::integrate(&mut integrand, w[0], w[1], cfg)?;
            value += v;
            error += e;
        }
        Ok((value, error))
    }

    /// `∫_(a,b] phi dG` with the default tolerances.
    pub fn stieltjes_integral(
        &self,
        phi: &(dyn Fn(f64) -> Result<f64> + Sync),
        a: f64,
        b: f64,
    ) -> Result<f64> {
        let cfg = QuadConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_intervals: 1 << 15,
            scale_share: 0.0,
        };
        Ok(self.stieltjes_integral_with(phi, a, b, &cfg)?.0)
    }

    /// `∫_(a,b] phi dG` and its error estimate.
    pub fn stieltjes_integral_with(
        &self,
        phi: &(dyn Fn(f64) -> Result<f64> + Sync),
        a: f64,
        b: f64,
        cfg: &QuadConfig,
    ) -> Result<(f64, f64)> {
        if !(a >= 0.0 && a <= b && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "integration interval ({a}, {b}] must satisfy 0 <= a <= b < ∞"
            )));
        }
        let (mut value, error) = self.continuous_integral(phi, a, b, cfg)?;
        for atom in self.atoms_in(a, b) {
            value += phi(atom.at)? * atom.mass;
        }
        Ok((value, error))
    }

    /// Generalized inverse `inf{t : G(t) >= u}`.
    pub fn sample(&self, u: f64) -> f64 {
        assert!(u > 0.0 && u < 1.0, "sample needs u in (0, 1), got {u}");
        if u <= 0.5 {
            self.invert(Level::Cdf(u))
        } else {
            self.invert(Level::Survival(1.0 - u))
        }
    }

    /// `inf{t : Ḡ(t) <= s}` for `s` in `(0, 1)`; accurate for tiny `s`.
    pub fn sample_survival(&self, s: f64) -> f64 {
        assert!(
            s > 0.0 && s < 1.0,
            "sample_survival needs s in (0, 1), got {s}"
        );
        self.invert(Level::Survival(s))
    }

    fn reached(&self, level: Level, t: f64) -> bool {
        match level {
            Level::Cdf(u) => self.cdf(t) >= u,
            Level::Survival(s) => self.survival(t) <= s,
        }
    }

    fn invert(&self, level: Level) -> f64 {
        let bands = self.bands();
        let tg = self.data.right_endpoint;
        let mut band = None;
        for j in 0..bands.count() {
            let hi = bands.bounds(j).1;
            if hi >= tg || hi > self.data.horizon * 2.0 || self.reached(level, hi) {
                band = Some(j);
                break;
            }
        }
        let j = band.unwrap_or(bands.count() - 1);
        let (lo, hi) = bands.bounds(j);
        let hi = hi.min(tg);
        let mut checkpoints = vec![lo];
        if let Ok(table) = self.data.mass.table(j) {
            for l in &table.leaves {
                checkpoints.push(l.lo);
                checkpoints.push(l.hi);
            }
        }
        checkpoints.extend(self.atoms_in(lo, hi).iter().map(|a| a.at));
        checkpoints.push(hi);
        checkpoints.retain(|&x| x >= lo && x <= hi);
        checkpoints.sort_by(f64::total_cmp);
        checkpoints.dedup();
        // first checkpoint at which the level is reached
        let first = checkpoints.partition_point(|&c| !self.reached(level, c));
        if first == 0 {
            return lo;
        }
        if first >= checkpoints.len() {
            return hi;
        }
        let (x0, x1) = (checkpoints[first - 1], checkpoints[first]);
        let m = self.atom_mass(x1);
        if m > 0.0 {
            let before = match level {
                Level::Cdf(u) => self.cdf(x1) - m >= u,
                Level::Survival(s) => self.survival(x1) + m <= s,
            };
            if !before {
                return x1;
            }
        }
        self.solve_continuous(level, x0, x1)
    }

    /// Root of the continuous part of the level equation inside `(x0, x1)`,
    /// where no atoms lie strictly inside.
    fn solve_continuous(&self, level: Level, x0: f64, x1: f64) -> f64 {
        if let Some(c) = self.data.mass.constant_over(x0, x1).filter(|c| *c > 0.0) {
            let t = match level {
                Level::Cdf(u) => x0 + (u - self.cdf(x0)) / c,
                Level::Survival(s) => x1 - (s - (self.survival(x1) + self.atom_mass(x1))) / c,
            };
            return t.clamp(x0, x1);
        }
        let g = |v: f64| self.density(v).unwrap_or(0.0);
        let part = |a: f64, b: f64| -> f64 {
            let mut f = |v: f64| Ok(g(v));
            match quadrature::gk21(&mut f, a, b) {
                Ok(s) if s.error <= 1e-14 * s.abs_value.max(1e-300) => s.value,
                _ => quadrature::integrate(&mut f, a, b, &law_quad())
                    .map(|r| r.0)
                    .unwrap_or(0.0),
            }
        };
        // phi is increasing in t with phi(x0) < 0 <= phi(x1)
        let phi: Box<dyn Fn(f64) -> f64> = match level {
            Level::Cdf(u) => {
                let r = u - self.cdf(x0);
                Box::new(move |t: f64| part(x0, t) - r)
            }
            Level::Survival(s) => {
                let q = s - (self.survival(x1) + self.atom_mass(x1));
                Box::new(move |t: f64| q - part(t, x1))
            }
        };
        let (mut a, mut b) = (x0, x1);
        let total = part(x0, x1);
        let mut t = if total > 0.0 {
            let p0 = -phi(x0).min(0.0);
            x0 + (x1 - x0) * (p0 / total).clamp(0.0, 1.0)
        } else {
            0.5 * (x0 + x1)
        };
        for _ in 0..200 {
            if !(t > a && t < b) {
                t = 0.5 * (a + b);
            }
            let v = phi(t);
            if v >= 0.0 {
                b = t;
                if v <= 1e-16 * total.max(1e-300) {
                    break;
                }
            } else {
                a = t;
            }
            let mid = 0.5 * (a + b);
            if !(a < mid && mid < b) {
                break;
            }
            let d = g(t);
            let next = if d > 0.0 { t - v / d } else { mid };
            t = if next > a && next < b { next } else { mid };
        }
        b
    }
}

#[derive(Clone, Copy)]
enum Level {
    Cdf(f64),
    Survival(f64),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    pub(crate) fn half_uniform_with_atom() -> JumpLaw {
        JumpLaw::new(
            vec![DensityPiece {
                lower: 0.0,
                upper: 1.0,
                density: parse("0.5").unwrap(),
            }],
            vec![Atom { at: 1.0, mass: 0.5 }],
            None,
        )
        .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let u = JumpLaw::uniform();
        let half = u.evaluate(0.5);
        assert!((half.cdf - 0.5).abs() < 1e-15 && (half.survival - 0.5).abs() < 1e-15);
        assert_eq!(half.atom, 0.0);
        let m = half_uniform_with_atom();
        assert_eq!(
            m.evaluate(1.0),
            LawPoint {
                cdf: 1.0,
                survival: 0.0,
                atom: 0.5
            }
        );
        assert!((m.cdf(0.999) - 0.4995).abs() < 1e-15);
        assert_eq!(m.endpoint_atom(), 0.5);
        let f = JumpLaw::factorial();
        let p = f.evaluate(1.0);
        assert!((p.cdf - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!((p.cdf - 0.581_976_706_869_326_4).abs() < 1e-15);
        assert!((p.cdf + p.survival - 1.0).abs() < 1e-14);
        assert!(f.right_endpoint().is_infinite());
        assert_eq!(f.evaluate(f64::INFINITY).cdf, 1.0);
    }

    #[test]
    fn survival_is_accurate_near_the_endpoint() {
        let u = JumpLaw::uniform();
        for k in [10, 30, 50] {
            let t = 1.0 - 2f64.powi(-k);
            assert!((u.survival(t) / 2f64.powi(-k) - 1.0).abs() < 1e-14);
        }
        let t = 1.0 - 3e-15;
        assert!((u.survival(t) / (1.0 - t) - 1.0).abs() < 1e-12);
        let e = JumpLaw::exponential(1.0).unwrap();
        for t in [0.3, 5.0, 31.9, 100.0, 300.0] {
            let want = f64::exp(-t);
            assert!(
                (e.survival(t) / want - 1.0).abs() < 1e-11,
                "t = {t}: {} vs {want}",
                e.survival(t)
            );
        }
        let f = JumpLaw::factorial();
        let e1 = std::f64::consts::E - 1.0;
        // Ḡ(3) = Σ_{k>3} 1/((e-1)k!) = (e - 1 - 1 - 1/2 - 1/6)/(e-1)
        let want = (std::f64::consts::E - 1.0 - 1.0 - 0.5 - 1.0 / 6.0) / e1;
        assert!((f.survival(3.0) / want - 1.0).abs() < 1e-13);
        assert!((f.survival(3.5) / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn invalid_laws_are_rejected() {
        let piece = |lo: f64, hi: f64, d: &str| DensityPiece {
            lower: lo,
            upper: hi,
            density: parse(d).unwrap(),
        };
        assert!(JumpLaw::new(vec![piece(0.0, 1.0, "0.9")], vec![], None).is_err());
        assert!(JumpLaw::new(
            vec![piece(0.0, 1.0, "2*t - 0.5 + 0.5")],
            vec![Atom { at: 0.0, mass: 0.0 }],
            None
        )
        .is_err());
        assert!(JumpLaw::new(vec![piece(0.0, 2.0, "1.5 - t")], vec![], None).is_err());
        assert!(JumpLaw::new(
            vec![piece(0.0, 1.0, "1"), piece(0.5, 2.0, "0")],
            vec![],
            None
        )
        .is_err());
        assert!(JumpLaw::new(
            vec![],
            vec![Atom { at: 2.0, mass: 0.5 }, Atom { at: 1.0, mass: 0.5 }],
            None
        )
        .is_err());
        assert!(JumpLaw::new(vec![], vec![Atom { at: 1.0, mass: 1.0 }], None).is_ok());
        let two = JumpLaw::new(
            vec![piece(0.0, 0.25, "2"), piece(0.75, 1.0, "2")],
            vec![],
            None,
        )
        .unwrap();
        assert!((two.cdf(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stieltjes_examples_and_atom_convention() {
        let u = JumpLaw::uniform();
        let v = u.stieltjes_integral(&|v| Ok(v), 0.0, 1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        let m = half_uniform_with_atom();
        let one = |_v: f64| Ok(1.0);
        assert!((m.stieltjes_integral(&one, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((m.stieltjes_integral(&one, 0.0, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(m.stieltjes_integral(&|_| Ok(0.0), 0.0, 1.0).unwrap(), 0.0);
        let phi = |v: f64| Ok(3.0 + v * v);
        let full = m.stieltjes_integral(&phi, 0.2, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-9] {
            let gap = full - m.stieltjes_integral(&phi, 0.2, 1.0 - eps).unwrap() - 4.0 * 0.5;
            assert!(gap.abs() < prev);
            prev = gap.abs();
        }
        assert!(prev < 1e-8);
        // atom at the left end is excluded
        let only_atom = m.stieltjes_integral(&phi, 1.0, 1.0).unwrap();
        assert_eq!(only_atom, 0.0);
    }

    #[test]
    fn sampling_examples() {
        let u = JumpLaw::uniform();
        assert!((u.sample(0.25) - 0.25).abs() < 1e-15);
        assert!((u.sample(0.75) - 0.75).abs() < 1e-15);
        let m = half_uniform_with_atom();
        assert_eq!(m.sample(0.75), 1.0);
        assert_eq!(m.sample(0.5000001), 1.0);
        assert!((m.sample(0.4) - 0.8).abs() < 1e-14);
        let f = JumpLaw::factorial();
        assert_eq!(f.sample(0.5), 1.0);
        assert_eq!(f.sample(0.59), 2.0);
        let e = JumpLaw::exponential(1.0).unwrap();
        for u in [1e-9, 0.1, 0.5, 0.9, 1.0 - 1e-12] {
            let t = e.sample(u);
            assert!(
                ((-(-u).ln_1p()) / t - 1.0).abs() < 1e-11,
                "u = {u}, t = {t}"
            );
        }
        let deep = u.sample_survival(1e-12);
        // resolved to the spacing of doubles just below 1
        assert!((u.survival(deep) - 1e-12).abs() <= f64::EPSILON);
        assert!(u.survival(deep) <= 1e-12);
    }

    #[test]
    fn sampling_matches_cdf_on_low_discrepancy_grid() {
        let laws = [
            JumpLaw::uniform(),
            half_uniform_with_atom(),
            JumpLaw::exponential(1.0).unwrap(),
        ];
        let n = 100_000;
        for law in &laws {
            let mut xs: Vec<f64> = (0..n)
                .map(|i| law.sample((i as f64 + 0.5) / n as f64))
                .collect();
            xs.sort_by(f64::total_cmp);
            let mut ks: f64 = 0.0;
            let mut i = 0;
            while i < n {
                let mut j = i;
                while j < n && xs[j] == xs[i] {
                    j += 1;
                }
                let g = law.cdf(xs[i]);
                let below = i as f64 / n as f64;
                let upto = j as f64 / n as f64;
                let g_left = g - law.atom_mass(xs[i]);
                ks = ks.max((upto - g).abs()).max((below - g_left).abs());
                i = j;
            }
            assert!(ks <= 0.005, "Kolmogorov distance {ks}");
        }
    }
}
