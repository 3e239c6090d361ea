//! Lazily built, band-by-band cache of `∫_(0,t] h(v) dv` over the continuous
//! support of a law. Each band is integrated once into accepted leaves;
//! lookups cost a binary search plus one short Kronrod pass.

use std::sync::{Arc, OnceLock};

use super::bands::Bands;
use crate::error::Result;
use crate::quadrature::{self, QuadConfig, Segment};

pub type Integrand = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

#[derive(Debug)]
pub(crate) struct BandTable {
    pub(crate) leaves: Vec<Segment>,
    /// `prefix[i]` = sum of leaf values before leaf `i`; one extra entry for the total.
    pub(crate) prefix: Vec<f64>,
    /// `suffix[i]` = sum of leaf values from leaf `i` on; one extra zero entry.
    pub(crate) suffix: Vec<f64>,
}

impl BandTable {
    pub(crate) fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }
}

pub(crate) struct Cumulative {
    bands: Bands,
    segments: Vec<(f64, f64)>,
    splits: Vec<f64>,
    integrand: Integrand,
    quad: QuadConfig,
    tables: Vec<OnceLock<Result<BandTable>>>,
    starts: Vec<OnceLock<Result<f64>>>,
    tails: Vec<OnceLock<Result<f64>>>,
    support_band: usize,
    /// Per segment, the integrand's value when it is constant there.
    constants: Vec<Option<f64>>,
}

impl std::fmt::Debug for Cumulative {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cumulative")
            .field("segments", &self.segments)
            .finish()
    }
}

impl Cumulative {
    /// `segments` are the sorted, disjoint `(lo, hi]` pieces carrying the
    /// integrand; `splits` are extra points where it may jump.
    pub(crate) fn new(
        bands: Bands,
        segments: Vec<(f64, f64)>,
        splits: Vec<f64>,
        integrand: Integrand,
        quad: QuadConfig,
    ) -> Cumulative {
        let n = bands.count();
        let mut support_band = 0;
        for &(lo, hi) in &segments {
            for x in [lo, hi] {
                if x.is_finite() && x > 0.0 {
                    support_band = support_band.max(bands.locate(x));
                }
            }
        }
        Cumulative {
            bands,
            segments,
            splits,
            integrand,
            quad,
            tables: (0..n).map(|_| OnceLock::new()).collect(),
            starts: (0..n).map(|_| OnceLock::new()).collect(),
            tails: (0..n).map(|_| OnceLock::new()).collect(),
            support_band,
            constants: Vec::new(),
        }
    }

    /// Marks segments on which the integrand is a known constant; their
    /// integrals are then exact products instead of quadrature sums.
    pub(crate) fn with_constants(mut self, constants: Vec<Option<f64>>) -> Cumulative {
        debug_assert_eq!(constants.len(), self.segments.len());
        self.constants = constants;
        self
    }

    fn constant_on(&self, lo: f64, hi: f64) -> Option<f64> {
        let mid = 0.5 * (lo + hi);
        let i = self.segments.partition_point(|s| s.1 < mid);
        match self.segments.get(i) {
            Some(s) if s.0 < mid => self.constants.get(i).copied().flatten(),
            _ => None,
        }
    }

    /// The constant density on `[lo, hi]` when one segment covers it.
    pub(crate) fn constant_over(&self, lo: f64, hi: f64) -> Option<f64> {
        let i = self.segments.partition_point(|s| s.1 < hi);
        match self.segments.get(i) {
            Some(s) if s.0 <= lo && hi <= s.1 => self.constants.get(i).copied().flatten(),
            _ => None,
        }
    }

    pub(crate) fn bands(&self) -> &Bands {
        &self.bands
    }

    pub(crate) fn table(&self, j: usize) -> Result<&BandTable> {
        self.tables[j]
            .get_or_init(|| self.build(j))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn build(&self, j: usize) -> Result<BandTable> {
        let (blo, bhi) = self.bands.bounds(j);
        let mut leaves = Vec::new();
        let f = &self.integrand;
        for (si, &(slo, shi)) in self.segments.iter().enumerate() {
            let constant = self.constants.get(si).copied().flatten();
            let lo = slo.max(blo);
            let hi = shi.min(bhi);
            if !(lo < hi) {
                continue;
            }
            let mut cuts = vec![lo];
            for &s in &self.splits {
                if s > lo && s < hi {
                    cuts.push(s);
                }
            }
            cuts.push(hi);
            for w in cuts.windows(2) {
                if let Some(c) = constant {
                    let width = w[1] - w[0];
                    leaves.push(Segment {
                        lo: w[0],
                        hi: w[1],
                        value: c * width,
                        error: 0.0,
                        abs_value: c.abs() * width,
                    });
                    continue;
                }
                let mut g = |x: f64| f(x);
                let mut segs = quadrature::adaptive_local(&mut g, w[0], w[1], &self.quad)?;
                leaves.append(&mut segs);
            }
        }
        let mut prefix = Vec::with_capacity(leaves.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for l in &leaves {
            acc += l.value;
            prefix.push(acc);
        }
        let mut suffix = vec![0.0; leaves.len() + 1];
        for i in (0..leaves.len()).rev() {
            suffix[i] = suffix[i + 1] + leaves[i].value;
        }
        Ok(BandTable {
            leaves,
            prefix,
            suffix,
        })
    }

    pub(crate) fn total(&self, j: usize) -> Result<f64> {
        Ok(self.table(j)?.total())
    }

    /// `∫` over bands `0..j`.
    pub(crate) fn start(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return Ok(0.0);
        }
        self.starts[j]
            .get_or_init(|| Ok(self.start(j - 1)? + self.total(j - 1)?))
            .as_ref()
            .map(|v| *v)
            .map_err(Clone::clone)
    }

    /// `∫` over bands after `j`.
    pub(crate) fn tail_after(&self, j: usize) -> Result<f64> {
        self.tails[j]
            .get_or_init(|| {
                let n = self.bands.count();
                match self.bands {
                    Bands::Finite { .. } => {
                        let mut acc = 0.0;
                        for i in (j + 1..n).rev() {
                            acc += self.total(i)?;
                        }
                        Ok(acc)
                    }
                    Bands::Infinite => {
                        let mut acc = 0.0;
                        let mut quiet = 0;
                        for i in j + 1..n {
                            let t = self.total(i)?;
                            acc += t;
                            if i > self.support_band && t.abs() <= 1e-17 * acc.abs() {
                                quiet += 1;
                                if quiet >= 2 {
                                    break;
                                }
                            } else {
                                quiet = 0;
                            }
                        }
                        Ok(acc)
                    }
                }
            })
            .as_ref()
            .map(|v| *v)
            .map_err(Clone::clone)
    }

    fn remainder(&self, lo: f64, hi: f64) -> Result<f64> {
        if let Some(c) = self.constant_on(lo, hi) {
            return Ok(c * (hi - lo));
        }
        let f = &self.integrand;
        let mut g = |x: f64| f(x);
        let seg = quadrature::gk21(&mut g, lo, hi)?;
        let tol = self
            .quad
            .abs_tol
            .max(self.quad.rel_tol * seg.value.abs())
            .max(1e-13 * seg.abs_value);
        if seg.error <= tol {
            return Ok(seg.value);
        }
        Ok(quadrature::integrate(&mut g, lo, hi, &self.quad)?.0)
    }

    /// Position of `t` inside band `j`: `(index, inside)` where leaves before
    /// `index` end at or below `t` and `inside` says `t` falls strictly inside leaf `index`.
    fn position(table: &BandTable, t: f64) -> (usize, bool) {
        let idx = table.leaves.partition_point(|l| l.hi < t);
        if idx < table.leaves.len() {
            let l = &table.leaves[idx];
            if l.hi == t {
                return (idx + 1, false);
            }
            if l.lo < t {
                return (idx, true);
            }
        }
        (idx, false)
    }

    /// `∫_(0,t]`; `t` beyond the last band returns the full integral.
    pub(crate) fn prefix(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let j = self.bands.locate(t);
        let table = self.table(j)?;
        let base = self.start(j)?;
        let (idx, inside) = Self::position(table, t);
        let mut v = base + table.prefix[idx];
        if inside {
            v += self.remainder(table.leaves[idx].lo, t)?;
        }
        Ok(v)
    }

    /// `∫_(t, end)`.
    pub(crate) fn suffix(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(self.tail_after(0)? + self.total(0)?);
        }
        let j = self.bands.locate(t);
        let table = self.table(j)?;
        let (idx, inside) = Self::position(table, t);
        let mut v = self.tail_after(j)?;
        if inside {
            v += table.suffix[idx + 1] + self.remainder(t, table.leaves[idx].hi)?;
        } else {
            v += table.suffix[idx];
        }
        Ok(v)
    }
}
