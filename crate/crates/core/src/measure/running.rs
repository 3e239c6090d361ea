//! Running Stieltjes integrals `t ↦ ∫_(0,t] phi dG` against a fixed law,
//! cached band by band so that evaluation along increasing `t` stays cheap.

use std::sync::Arc;

use super::{piece_density_at, Cumulative, Integrand, JumpLaw};
use crate::error::Result;
use crate::quadrature::QuadConfig;

#[derive(Debug)]
pub(crate) struct RunningIntegral {
    law: JumpLaw,
    continuous: Cumulative,
    /// Contribution of each law atom, in atom order.
    atom_values: Vec<f64>,
    atom_prefix: Vec<f64>,
}

pub(crate) fn running_quad() -> QuadConfig {
    QuadConfig {
        rel_tol: 1e-13,
        abs_tol: 1e-300,
        max_intervals: 1 << 15,
        scale_share: 1e-13,
    }
}

impl RunningIntegral {
    /// `phi` is the integrand on the continuous part; `atom_value(a)` gives the
    /// whole contribution `phi(a)·ΔG(a)` of the atom at `a`.
    pub(crate) fn new(
        law: &JumpLaw,
        phi: Integrand,
        atom_value: &dyn Fn(f64, f64) -> Result<f64>,
        extra_splits: &[f64],
    ) -> Result<RunningIntegral> {
        let pieces = law.data.pieces.clone();
        let integrand: Integrand = Arc::new(move |v: f64| {
            let g = piece_density_at(&pieces, v)?;
            if g == 0.0 {
                return Ok(0.0);
            }
            Ok(phi(v)? * g)
        });
        let mut splits = law.breakpoints();
        splits.extend(
            extra_splits
                .iter()
                .copied()
                .filter(|x| x.is_finite() && *x > 0.0),
        );
        splits.sort_by(f64::total_cmp);
        splits.dedup();
        let continuous = Cumulative::new(
            law.bands().clone(),
            law.segments(),
            splits,
            integrand,
            running_quad(),
        );
        let atom_values = law
            .atoms()
            .iter()
            .map(|a| atom_value(a.at, a.mass))
            .collect::<Result<Vec<_>>>()?;
        let mut atom_prefix = Vec::with_capacity(atom_values.len() + 1);
        let mut acc = 0.0;
        atom_prefix.push(0.0);
        for v in &atom_values {
            acc += v;
            atom_prefix.push(acc);
        }
        Ok(RunningIntegral {
            law: law.clone(),
            continuous,
            atom_values,
            atom_prefix,
        })
    }

    /// `∫_(0,t]`.
    pub(crate) fn upto(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let i = self.law.data.atoms.partition_point(|a| a.at <= t);
        Ok(self.continuous.prefix(t)? + self.atom_prefix[i])
    }

    /// `∫_(0,t)`.
    pub(crate) fn before(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let i = self.law.data.atoms.partition_point(|a| a.at < t);
        Ok(self.continuous.prefix(t)? + self.atom_prefix[i])
    }

    /// Contribution of the atom at `t` (zero if none).
    pub(crate) fn atom_at(&self, t: f64) -> f64 {
        let atoms = &self.law.data.atoms;
        let i = atoms.partition_point(|a| a.at < t);
        match atoms.get(i) {
            Some(a) if a.at == t => self.atom_values[i],
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_integral_matches_closed_forms() {
        let u = JumpLaw::uniform();
        let r = RunningIntegral::new(&u, Arc::new(Ok), &|a, m| Ok(a * m), &[]).unwrap();
        for t in [0.1, 0.5, 0.9, 1.0 - 1e-9] {
            assert!((r.upto(t).unwrap() - 0.5 * t * t).abs() < 1e-14);
        }
        let m = super::super::tests::half_uniform_with_atom();
        let r = RunningIntegral::new(&m, Arc::new(|_| Ok(1.0)), &|_, m| Ok(m), &[]).unwrap();
        assert!((r.upto(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((r.before(1.0).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(r.atom_at(1.0), 0.5);
        let f = JumpLaw::factorial();
        let r = RunningIntegral::new(&f, Arc::new(|_| Ok(1.0)), &|_, m| Ok(m), &[]).unwrap();
        assert!((r.upto(2.5).unwrap() - f.cdf(2.5)).abs() < 1e-15);
        assert!((r.before(2.0).unwrap() - f.cdf(1.0)).abs() < 1e-15);
    }
}
