//! Adaptive Gauss–Kronrod (10/21 point) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{DomainKind, Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_172_830,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Extra tolerance per leaf, as a share of the whole run's `∫|f|` spread
    /// evenly over width. Zero keeps every leaf relatively accurate.
    pub scale_share: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-13,
            abs_tol: 1e-300,
            max_intervals: 1 << 15,
            scale_share: 0.0,
        }
    }
}

/// One accepted subinterval `(lo, hi]` of an adaptive run.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
    pub error: f64,
    pub abs_value: f64,
}

/// Legendre polynomials `P_0..P_{n-1}` at `x`.
fn legendre_row(x: f64, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[0] = 1.0;
    if n > 1 {
        p[1] = x;
    }
    for k in 2..n {
        let kf = k as f64;
        p[k] = ((2.0 * kf - 1.0) * x * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
    }
    p
}

/// Interpolatory weights on `[-1, 1]` for the given nodes, or `None` when
/// the nodes are (numerically) not distinct.
fn interpolatory_weights(nodes: &[f64]) -> Option<Vec<f64>> {
    let n = nodes.len();
    // rows: polynomial degree; columns: node
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, &x) in nodes.iter().enumerate() {
        for (k, v) in legendre_row(x, n).into_iter().enumerate() {
            a[k][i] = v;
        }
    }
    a[0][n] = 2.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..n {
            let m = a[r][col] / a[col][col];
            if m != 0.0 {
                for c in col..=n {
                    a[r][c] -= m * a[col][c];
                }
            }
        }
    }
    let mut w = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = a[r][n];
        for c in r + 1..n {
            acc -= a[r][c] * w[c];
        }
        w[r] = acc / a[r][r];
    }
    w.iter().all(|x| x.is_finite()).then_some(w)
}

/// Node displacement (relative to the half-width) above which the rule is
/// rebuilt on the rounded nodes.
const REBUILD_DRIFT: f64 = 1e-12;

/// Gauss-Kronrod 21/10 on `[lo, hi]`.
///
/// When the interval is so short relative to its position that the nodes
/// round visibly, the rule is rebuilt on the rounded nodes so that the
/// integrand is only ever sampled where its values are exact.
pub fn gk21<F>(f: &mut F, lo: f64, hi: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut eval = |x: f64| -> Result<f64> {
        let y = f(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Domain {
                kind: DomainKind::NonFinite,
                t: x,
            })
        }
    };
    // node order: 0..10 left, 10 centre, 11..21 right (mirrored)
    let mut x = [0.0; 21];
    let mut nominal = [0.0; 21];
    for j in 0..10 {
        let dx = half * XGK[j];
        x[j] = center - dx;
        x[20 - j] = center + dx;
        nominal[j] = -XGK[j];
        nominal[20 - j] = XGK[j];
    }
    x[10] = center;
    let mut fx = [0.0; 21];
    for i in 0..21 {
        fx[i] = eval(x[i])?;
    }
    let reference: Vec<f64> = x.iter().map(|&xi| (xi - center) / half).collect();
    let drift = reference
        .iter()
        .zip(nominal.iter())
        .fold(0.0f64, |m, (r, n)| m.max((r - n).abs()));
    let mut wk = [0.0; 21];
    let mut wg = [0.0; 21];
    let nominal_weights = |wk: &mut [f64; 21], wg: &mut [f64; 21]| {
        for j in 0..10 {
            wk[j] = WGK[j];
            wk[20 - j] = WGK[j];
            if j % 2 == 1 {
                wg[j] = WG[j / 2];
                wg[20 - j] = WG[j / 2];
            }
        }
        wk[10] = WGK[10];
    };
    // first-order error from sampling off the nominal nodes
    let mut perturbation = 0.0;
    let (fmin, fmax) = fx
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let spread = fmax - fmin;
    if drift <= REBUILD_DRIFT {
        nominal_weights(&mut wk, &mut wg);
        if drift > 16.0 * f64::EPSILON {
            perturbation = drift * spread * 2.0 * half.abs();
        }
    } else {
        let gauss_idx: Vec<usize> = (0..21)
            .filter(|i| (*i < 10 && i % 2 == 1) || (*i > 10 && (20 - i) % 2 == 1))
            .collect();
        let gnodes: Vec<f64> = gauss_idx.iter().map(|&i| reference[i]).collect();
        match (
            interpolatory_weights(&reference),
            interpolatory_weights(&gnodes),
        ) {
            (Some(k), Some(g)) => {
                wk.copy_from_slice(&k);
                for (slot, &i) in gauss_idx.iter().enumerate() {
                    wg[i] = g[slot];
                }
            }
            _ => {
                nominal_weights(&mut wk, &mut wg);
                perturbation = drift * spread * 2.0 * half.abs();
            }
        }
    }
    let mut resk = 0.0;
    let mut resg = 0.0;
    let mut resabs = 0.0;
    for i in 0..21 {
        resk += wk[i] * fx[i];
        resg += wg[i] * fx[i];
        resabs += wk[i].abs() * fx[i].abs();
    }
    let mean = resk * 0.5;
    let mut resasc = 0.0;
    for i in 0..21 {
        resasc += wk[i].abs() * (fx[i] - mean).abs();
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    error += perturbation;
    Ok(Segment {
        lo,
        hi,
        value,
        error,
        abs_value: resabs,
    })
}

struct Queued(Segment);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.0.error == other.0.error
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}

/// Globally adaptive bisection until the summed error meets
/// `max(abs_tol, rel_tol·|I|)`. Returns the accepted segments sorted by position.
pub fn adaptive<F>(f: &mut F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<Vec<Segment>>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Ok(Vec::new());
    }
    let first = gk21(f, lo, hi)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    let mut done: Vec<Segment> = Vec::new();
    heap.push(Queued(first));
    let tolerance = |value: f64, abs_sum: f64| {
        cfg.abs_tol
            .max(cfg.rel_tol * value.abs())
            .max(1e-13 * abs_sum)
    };
    let mut abs_sum = first.abs_value;
    while error > tolerance(value, abs_sum) {
        let Some(Queued(worst)) = heap.pop() else {
            return Err(Error::QuadratureFailure {
                lo,
                hi,
                reason: format!("roundoff limits accuracy (error {error:.3e})"),
            });
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(worst.lo < mid && mid < worst.hi) {
            done.push(worst);
            continue;
        }
        if heap.len() + done.len() + 2 > cfg.max_intervals {
            return Err(Error::QuadratureFailure {
                lo,
                hi,
                reason: format!(
                    "subdivision budget of {} intervals exhausted (error {error:.3e})",
                    cfg.max_intervals
                ),
            });
        }
        let left = gk21(f, worst.lo, mid)?;
        let right = gk21(f, mid, worst.hi)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        abs_sum += left.abs_value + right.abs_value - worst.abs_value;
        heap.push(Queued(left));
        heap.push(Queued(right));
        if heap.len() % 64 == 0 {
            value = heap.iter().map(|q| q.0.value).sum::<f64>()
                + done.iter().map(|s| s.value).sum::<f64>();
            error = heap.iter().map(|q| q.0.error).sum::<f64>()
                + done.iter().map(|s| s.error).sum::<f64>();
        }
    }
    done.extend(heap.into_iter().map(|q| q.0));
    done.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    Ok(done)
}

/// Locally adaptive bisection: every returned segment satisfies
/// `error <= max(abs_tol, rel_tol·|value|, 1e-13·∫|f|)` on its own, so prefix and
/// suffix sums over the segments are accurate relative to themselves.
const LOCAL_MIN_WIDTH: f64 = 1.0 / (1u64 << 46) as f64;

pub fn adaptive_local<F>(f: &mut F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<Vec<Segment>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut out = Vec::new();
    if !(lo < hi) {
        return Ok(out);
    }
    // leaves straddling a kink next to a region of zero mass never meet a
    // relative criterion; they stop at this width instead
    let min_width = (hi - lo) * LOCAL_MIN_WIDTH;
    let root = gk21(f, lo, hi)?;
    let density_floor = cfg.scale_share * root.abs_value / (hi - lo);
    let mut stack = vec![root];
    while let Some(seg) = stack.pop() {
        let tol = cfg
            .abs_tol
            .max(cfg.rel_tol * seg.value.abs())
            .max(1e-13 * seg.abs_value)
            .max(density_floor * (seg.hi - seg.lo));
        let mid = 0.5 * (seg.lo + seg.hi);
        if seg.error <= tol || seg.hi - seg.lo <= min_width || !(seg.lo < mid && mid < seg.hi) {
            out.push(seg);
            continue;
        }
        if out.len() + stack.len() + 2 > cfg.max_intervals {
            return Err(Error::QuadratureFailure {
                lo,
                hi,
                reason: format!(
                    "subdivision budget of {} intervals exhausted",
                    cfg.max_intervals
                ),
            });
        }
        let right = gk21(f, mid, seg.hi)?;
        let left = gk21(f, seg.lo, mid)?;
        stack.push(right);
        stack.push(left);
    }
    Ok(out)
}

/// Sum of an adaptive run: `(value, error estimate)`.
pub fn integrate<F>(f: &mut F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let segs = adaptive(f, lo, hi, cfg)?;
    Ok(sum_segments(&segs))
}

pub fn sum_segments(segs: &[Segment]) -> (f64, f64) {
    let mut v = 0.0;
    let mut e = 0.0;
    for s in segs {
        v += s.value;
        e += s.error;
    }
    (v, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_polynomials() {
        for deg in 0..=30 {
            let mut f = |x: f64| Ok(x.powi(deg));
            let s = gk21(&mut f, 0.0, 1.0).unwrap();
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((s.value - exact).abs() < 1e-15, "degree {deg}");
        }
    }

    #[test]
    fn rounded_abscissae_keep_the_rule_exact() {
        let eps = f64::EPSILON;
        let x = [-0.9, -0.3, 0.0, 0.4, 0.95];
        let w = interpolatory_weights(&x).unwrap();
        for deg in 0..5 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let want = if deg % 2 == 0 {
                2.0 / (deg as f64 + 1.0)
            } else {
                0.0
            };
            assert!((got - want).abs() < 1e-13, "degree {deg}");
        }
        assert!(interpolatory_weights(&[0.1, 0.1]).is_none());
        // a leaf 4096 ulps wide just below 1, integrand 1/(1-t)
        let hi = 1.0 - 2f64.powi(-41);
        let lo = 1.0 - 2f64.powi(-40);
        let mut g = |t: f64| Ok(1.0 / (1.0 - t));
        let seg = gk21(&mut g, lo, hi).unwrap();
        assert!(
            (seg.value / std::f64::consts::LN_2 - 1.0).abs() < 1e-12,
            "{}",
            seg.value
        );
        let mut g = |t: f64| Ok(1.0 / (1.0 - t));
        let tiny = gk21(&mut g, 1.0 - 8.0 * eps, 1.0 - 4.0 * eps).unwrap();
        assert!(tiny.error > 0.1 * tiny.value.abs());
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let k: f64 = WGK[10] + 2.0 * WGK[..10].iter().sum::<f64>();
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let cfg = QuadConfig {
            rel_tol: 1e-12,
            ..QuadConfig::default()
        };
        let (v, _) = integrate(&mut |x: f64| Ok(1.0 / x.sqrt()), 0.0, 1.0, &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
        let (v, _) = integrate(&mut |x: f64| Ok(x.ln()), 0.0, 1.0, &cfg).unwrap();
        assert!((v + 1.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_handles_oscillation_and_jumps() {
        let cfg = QuadConfig::default();
        let (v, _) = integrate(&mut |x: f64| Ok((50.0 * x).sin()), 0.0, 3.0, &cfg).unwrap();
        let exact = (1.0 - (150.0f64).cos()) / 50.0;
        assert!((v - exact).abs() < 1e-13);
        let (v, _) = integrate(
            &mut |x: f64| Ok(if x > 0.3 { 1.0 } else { 0.0 }),
            0.0,
            1.0,
            &cfg,
        )
        .unwrap();
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn budget_and_domain_failures() {
        let cfg = QuadConfig {
            max_intervals: 8,
            ..QuadConfig::default()
        };
        let r = integrate(&mut |x: f64| Ok((1.0 / x).sin()), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
        let r = integrate(
            &mut |_x: f64| Ok(f64::INFINITY),
            0.0,
            1.0,
            &QuadConfig::default(),
        );
        assert!(matches!(
            r,
            Err(Error::Domain {
                kind: DomainKind::NonFinite,
                ..
            })
        ));
    }

    #[test]
    fn local_segments_terminate_at_kinks_into_zero_mass() {
        let cfg = QuadConfig {
            rel_tol: 1e-13,
            abs_tol: 1e-300,
            max_intervals: 4096,
            scale_share: 1e-13,
        };
        let mut g = |v: f64| Ok((1.0 / (1.0 - v)).cos().max(0.0) / (1.0 - v).powi(2));
        let segs = adaptive_local(&mut g, 0.0, 0.5, &cfg).unwrap();
        let (v, _) = sum_segments(&segs);
        // ∫ cos(x) dx over x in [1, π/2]
        assert!((v - (1.0 - 1f64.sin())).abs() < 1e-12, "{v}");
    }

    #[test]
    fn local_segments_are_individually_accurate() {
        let segs = adaptive_local(
            &mut |x: f64| Ok((-x).exp()),
            0.0,
            40.0,
            &QuadConfig::default(),
        )
        .unwrap();
        for w in segs.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
        let tail: f64 = segs.iter().filter(|s| s.lo >= 30.0).map(|s| s.value).sum();
        let exact = (-30.0f64).exp() - (-40.0f64).exp();
        assert!(((tail - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn segments_tile_the_interval() {
        let segs = adaptive(
            &mut |x: f64| Ok(1.0 / (1e-3 + x * x)),
            -1.0,
            2.0,
            &QuadConfig::default(),
        )
        .unwrap();
        assert_eq!(segs.first().unwrap().lo, -1.0);
        assert_eq!(segs.last().unwrap().hi, 2.0);
        for w in segs.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
    }
}
