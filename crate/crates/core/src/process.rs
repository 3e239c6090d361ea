//! `ζ^F`, simulated paths of `M^{G,F}` and Monte Carlo checks of the
//! martingale identities.

use std::io::Write;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::compensator::{change_in_mass, CompensatedJump};
use crate::drift::{variation_decompose, DriftSpec, ProbeKind};
use crate::error::{Error, Result};
use crate::measure::{IntegralVerdict, JumpLaw};

/// `F(t)` before the jump time `v`, `𝒦F(v)` from it on.
pub fn zeta(comp: &CompensatedJump, t: f64, v: f64) -> Result<f64> {
    if !(t >= 0.0) || !(v > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ζ needs t >= 0 and v > 0, got t = {t}, v = {v}"
        )));
    }
    if t < v {
        comp.drift().value(t)
    } else {
        comp.op(v)
    }
}

/// Uniform in the open interval (0, 1) from the path's own stream.
pub fn path_uniform(seed: u64, path: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Worker count; `None` uses the global pool. Output never depends on it.
    pub threads: Option<usize>,
}

/// Paths of `M^{G,F}` on a fixed grid, row-major by path.
#[derive(Debug, Clone)]
pub struct PathBundle {
    comp: Arc<CompensatedJump>,
    grid: Vec<f64>,
    gammas: Vec<f64>,
    values: Vec<f64>,
    seed: u64,
}

impl PathBundle {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn paths(&self) -> usize {
        self.gammas.len()
    }

    pub fn compensated(&self) -> &Arc<CompensatedJump> {
        &self.comp
    }

    pub fn value(&self, path: usize, i: usize) -> f64 {
        self.values[path * self.grid.len() + i]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[path * n..(path + 1) * n]
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.paths()).map(move |p| self.value(p, i))
    }

    pub fn grid_index(&self, t: f64) -> Result<usize> {
        self.grid
            .iter()
            .position(|&g| g == t)
            .ok_or_else(|| Error::InvalidArgument(format!("t = {t} is not a grid time")))
    }

    /// One row per grid time per path: `path_id,t,gamma,value`.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "path_id,t,gamma,value")?;
        for p in 0..self.paths() {
            for (i, t) in self.grid.iter().enumerate() {
                writeln!(out, "{p},{t},{},{}", self.gammas[p], self.value(p, i))?;
            }
        }
        Ok(())
    }
}

fn check_grid_times(law: &JumpLaw, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid must not be empty".into()));
    }
    let tg = law.right_endpoint();
    for (i, &t) in grid.iter().enumerate() {
        if !(t >= 0.0 && t.is_finite() && t <= tg) {
            return Err(Error::InvalidArgument(format!(
                "grid time {t} lies outside [0, t_G]"
            )));
        }
        if i > 0 && !(t > grid[i - 1]) {
            return Err(Error::InvalidArgument(
                "grid must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

fn on_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

pub fn simulate_paths(
    comp: &Arc<CompensatedJump>,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<PathBundle> {
    let law = comp.law();
    check_grid_times(law, grid)?;
    if n_paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let tg = law.right_endpoint();
    let f_grid: Vec<f64> = grid
        .iter()
        .map(|&t| {
            if t < tg {
                comp.drift().value(t)
            } else {
                Ok(f64::NAN)
            }
        })
        .collect::<Result<_>>()?;
    let width = grid.len();
    let rows: Vec<Result<(f64, Vec<f64>)>> = on_pool(opts.threads, || {
        (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let gamma = law.sample(path_uniform(seed, p as u64));
                let mut row = Vec::with_capacity(width);
                let mut jumped = None;
                for (i, &t) in grid.iter().enumerate() {
                    if t < gamma {
                        row.push(f_grid[i]);
                    } else {
                        let v = match jumped {
                            Some(v) => v,
                            None => {
                                let v = comp.op(gamma)?;
                                jumped = Some(v);
                                v
                            }
                        };
                        row.push(v);
                    }
                }
                Ok((gamma, row))
            })
            .collect()
    })?;
    let mut gammas = Vec::with_capacity(n_paths);
    let mut values = Vec::with_capacity(n_paths * width);
    for r in rows {
        let (g, row) = r?;
        gammas.push(g);
        values.extend(row);
    }
    Ok(PathBundle {
        comp: comp.clone(),
        grid: grid.to_vec(),
        gammas,
        values,
        seed,
    })
}

/// Mean over the retained sample plus an exact correction for what was clipped.
#[derive(Debug, Clone, Serialize)]
pub struct ClippedEstimate {
    pub quantile: f64,
    /// Jump times above this value were replaced by the analytic tail.
    pub threshold: f64,
    pub tail_correction: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z_score: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MCReport {
    pub statistic: String,
    pub estimate: f64,
    pub std_error: f64,
    pub paths: usize,
    pub target: Option<f64>,
    pub z_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clipped: Option<ClippedEstimate>,
}

impl MCReport {
    /// `|z| <= k`, preferring the clipped estimator when there is one.
    pub fn within(&self, k: f64) -> bool {
        let z = self.clipped.as_ref().map_or(self.z_score, |c| c.z_score);
        z.is_some_and(|z| z.abs() <= k)
    }
}

const CLIP_QUANTILE: f64 = 1.0 - 1e-4;

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    if n < 2 {
        return (mean, 0.0, n);
    }
    let var = m2 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}

/// Differences this many ulps of the target's scale count as an exact match.
const ROUNDING_ULPS: f64 = 1024.0;

fn z(estimate: f64, se: f64, target: Option<f64>) -> Option<f64> {
    target.map(|t| {
        let scale = t.abs().max(estimate.abs()).max(1.0);
        let d = estimate - t;
        if d.abs() <= ROUNDING_ULPS * f64::EPSILON * scale {
            0.0
        } else if se > 0.0 {
            d / se
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    })
}

fn heavy_tailed(comp: &CompensatedJump) -> Result<bool> {
    Ok(!matches!(
        comp.probe(ProbeKind::OpSq)?,
        IntegralVerdict::Finite { .. }
    ))
}

/// `∫_(q, t_G] 𝒦F dG = F(q)Ḡ(q) - lim F Ḡ + 𝒦F(t_G)ΔG(t_G)`.
fn op_tail(comp: &CompensatedJump, q: f64) -> Result<Option<f64>> {
    let law = comp.law();
    let atom = law.endpoint_atom();
    let base = comp.drift().value(q)? * law.survival(q);
    if atom > 0.0 {
        let Some(left) = comp.resolved_left_limit()?.0.value() else {
            return Ok(None);
        };
        return Ok(Some(base - left * atom + comp.endpoint_value()? * atom));
    }
    Ok(comp.resolved_survival_limit()?.0.value().map(|l| base - l))
}

/// Clipped mean of `𝒦F(γ)` over paths, `weight` scaling the analytic tail.
fn clipped_jump_mean(
    comp: &CompensatedJump,
    gammas: &[f64],
    offset: f64,
    weight: f64,
    target: Option<f64>,
) -> Result<Option<ClippedEstimate>> {
    let mut sorted = gammas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((CLIP_QUANTILE * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    let q = sorted[idx];
    let Some(tail) = op_tail(comp, q)? else {
        return Ok(None);
    };
    let kept: Vec<f64> = gammas
        .iter()
        .map(|&g| if g <= q { comp.op(g) } else { Ok(0.0) })
        .collect::<Result<_>>()?;
    let (mean, se, _) = mean_se(kept.into_iter());
    let tail_correction = tail * weight;
    let estimate = mean + tail_correction - offset;
    Ok(Some(ClippedEstimate {
        quantile: CLIP_QUANTILE,
        threshold: q,
        tail_correction,
        estimate,
        std_error: se,
        z_score: z(estimate, se, target),
    }))
}

/// Sample mean of `M_t`; the target is `F(0)` before `t_G` and `F(0) + Δμ` at it.
pub fn mc_mean(bundle: &PathBundle, t: f64) -> Result<MCReport> {
    let i = bundle.grid_index(t)?;
    let comp = bundle.compensated();
    let law = comp.law();
    let terminal = t >= law.right_endpoint();
    let f0 = comp.drift().f0();
    let target = if terminal {
        match comp.op_integrable()?.0 {
            Some(true) => change_in_mass(comp)?.value.map(|dm| f0 + dm),
            _ => None,
        }
    } else {
        Some(f0)
    };
    let (estimate, std_error, paths) = mean_se(bundle.column(i));
    let clipped = if terminal && target.is_some() && heavy_tailed(comp)? {
        clipped_jump_mean(comp, bundle.gammas(), 0.0, 1.0, target)?
    } else {
        None
    };
    Ok(MCReport {
        statistic: format!("E[M_{t}]"),
        estimate,
        std_error,
        paths,
        target,
        z_score: z(estimate, std_error, target),
        clipped,
    })
}

/// `E[M_{t_G} | γ > s] - F(s)` against `Δμ / Ḡ(s)`.
pub fn conditional_mass_check(
    comp: &Arc<CompensatedJump>,
    s: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MCReport> {
    let law = comp.law();
    let sbar = law.survival(s);
    if !(s >= 0.0 && s < law.right_endpoint() && sbar > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "conditioning time s = {s} must lie in [0, t_G)"
        )));
    }
    if n_paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let dm = match comp.op_integrable()?.0 {
        Some(true) => change_in_mass(comp)?.value,
        _ => None,
    }
    .ok_or_else(|| Error::InvalidArgument("the conditional mass check needs a known Δμ".into()))?;
    let target = dm / sbar;
    let fs = comp.drift().value(s)?;
    let gammas: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|p| law.sample_survival(path_uniform(seed, p as u64) * sbar))
        .collect();
    let jumps: Vec<f64> = gammas
        .par_iter()
        .map(|&g| comp.op(g))
        .collect::<Result<_>>()?;
    let (mean, std_error, paths) = mean_se(jumps.into_iter());
    let estimate = mean - fs;
    let clipped = if heavy_tailed(comp)? {
        clipped_jump_mean(comp, &gammas, fs, 1.0 / sbar, Some(target))?
    } else {
        None
    };
    Ok(MCReport {
        statistic: format!("E[M_tG | γ > {s}] - F({s})"),
        estimate,
        std_error,
        paths,
        target: Some(target),
        z_score: z(estimate, std_error, Some(target)),
        clipped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizingStep {
    pub n: usize,
    pub t_n: f64,
    /// Empirical `P[τ_n = t_G]`.
    pub reaches_endpoint: f64,
    pub stopped_mean: MCReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizingReport {
    pub steps: Vec<LocalizingStep>,
    pub unstopped_mean: Option<MCReport>,
}

impl LocalizingReport {
    pub fn endpoint_probability_nondecreasing(&self) -> bool {
        self.steps
            .windows(2)
            .all(|w| w[1].reaches_endpoint >= w[0].reaches_endpoint)
    }
}

const LOCALIZING_DEPTH: i32 = 48;

/// Times `t_0 = 0 < t_1 < ...` toward `t_G` with `F(t_n) != F(t_{n-1})`,
/// taken from the survival levels `Ḡ(t) = 2^-k`.
fn localizing_times(comp: &CompensatedJump, count: usize) -> Result<Vec<f64>> {
    let law = comp.law();
    let point = |k: i32| law.sample_survival(2f64.powi(-k));
    let f = comp.drift();
    let mut times = vec![0.0];
    let mut last = f.value(0.0)?;
    let mut k = 1;
    while times.len() <= count {
        if k > LOCALIZING_DEPTH {
            return Err(Error::EventuallyConstant {
                t_star: *times.last().unwrap(),
            });
        }
        let t = point(k);
        let v = f.value(t)?;
        if v != last {
            times.push(t);
            last = v;
        }
        k += 1;
    }
    Ok(times)
}

/// Stopping times `τ_n = t_n` when `M` moved over `(t_{n-1}, t_n]`, else `t_G`.
pub fn localizing_check(
    comp: &Arc<CompensatedJump>,
    n_stopping: usize,
    n_paths: usize,
    seed: u64,
) -> Result<LocalizingReport> {
    let law = comp.law();
    if law.endpoint_atom() > 0.0 {
        return Err(Error::HypothesisViolation(
            "localizing needs ΔG(t_G) = 0".into(),
        ));
    }
    let tg = law.right_endpoint();
    let mut grid = localizing_times(comp, n_stopping)?;
    let terminal = tg.is_finite();
    if terminal {
        grid.push(tg);
    }
    let bundle = simulate_paths(comp, &grid, n_paths, seed, &SimOptions::default())?;
    let f0 = comp.drift().f0();
    let mut steps = Vec::new();
    for n in 1..=n_stopping {
        let mut reached = 0usize;
        let last = grid.len() - 1;
        let stopped = (0..bundle.paths()).map(|p| {
            if bundle.value(p, n) != bundle.value(p, n - 1) {
                bundle.value(p, n)
            } else {
                reached += 1;
                bundle.value(p, last)
            }
        });
        let (estimate, std_error, paths) = mean_se(stopped.collect::<Vec<_>>().into_iter());
        steps.push(LocalizingStep {
            n,
            t_n: grid[n],
            reaches_endpoint: reached as f64 / paths as f64,
            stopped_mean: MCReport {
                statistic: format!("E[M_(t_G ∧ τ_{n})]"),
                estimate,
                std_error,
                paths,
                target: Some(f0),
                z_score: z(estimate, std_error, Some(f0)),
                clipped: None,
            },
        });
    }
    let unstopped_mean = if terminal {
        Some(mc_mean(&bundle, tg)?)
    } else {
        None
    };
    Ok(LocalizingReport {
        steps,
        unstopped_mean,
    })
}

/// `M = M_0 + M↑ - M↓` along every simulated path.
#[derive(Debug, Clone, Serialize)]
pub struct PathwiseDecomposition {
    pub max_deviation: f64,
    /// Per grid time: means of the increasing and decreasing parts.
    pub up_means: Vec<MCReport>,
    pub down_means: Vec<MCReport>,
}

impl PathwiseDecomposition {
    /// Both part means are nonincreasing in time within `k` standard errors.
    pub fn supermartingale_direction(&self, k: f64) -> bool {
        let ok = |ms: &[MCReport]| {
            ms.windows(2).all(|w| {
                let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
                w[1].estimate <= w[0].estimate + k * se
            })
        };
        ok(&self.up_means) && ok(&self.down_means)
    }
}

pub fn pathwise_decomposition(
    spec: &DriftSpec,
    law: &JumpLaw,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<PathwiseDecomposition> {
    let parts = variation_decompose(spec);
    let comp = Arc::new(CompensatedJump::new(spec, law)?);
    let up = Arc::new(CompensatedJump::new(&parts.up, law)?);
    let down = Arc::new(CompensatedJump::new(&parts.down, law)?);
    let opts = SimOptions::default();
    let m = simulate_paths(&comp, grid, n_paths, seed, &opts)?;
    let mu = simulate_paths(&up, grid, n_paths, seed, &opts)?;
    let md = simulate_paths(&down, grid, n_paths, seed, &opts)?;
    let m0 = spec.f0;
    let mut worst = 0.0f64;
    for p in 0..n_paths {
        for i in 0..grid.len() {
            let d = m.value(p, i) - (m0 + mu.value(p, i) - md.value(p, i));
            worst = worst.max(d.abs());
        }
    }
    let summarise = |b: &PathBundle, label: &str| -> Vec<MCReport> {
        (0..grid.len())
            .map(|i| {
                let (estimate, std_error, paths) = mean_se(b.column(i));
                MCReport {
                    statistic: format!("E[{label}_{}]", grid[i]),
                    estimate,
                    std_error,
                    paths,
                    target: None,
                    z_score: None,
                    clipped: None,
                }
            })
            .collect()
    };
    Ok(PathwiseDecomposition {
        max_deviation: worst,
        up_means: summarise(&mu, "M↑"),
        down_means: summarise(&md, "M↓"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    fn islm() -> Arc<CompensatedJump> {
        let spec = DriftSpec::new(1.0, parse("1/(1-t)^2").unwrap())
            .with_closed_form(parse("1/(1-t)").unwrap());
        Arc::new(CompensatedJump::new(&spec, &JumpLaw::uniform()).unwrap())
    }

    #[test]
    fn zeta_examples() {
        let c = islm();
        assert!((zeta(&c, 0.5, 0.8).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(zeta(&c, 0.9, 0.8).unwrap(), 0.0);
        let k = CompensatedJump::new(&DriftSpec::constant(3.0), &JumpLaw::uniform()).unwrap();
        for (t, v) in [(0.0, 0.5), (0.7, 0.2), (0.2, 0.7)] {
            assert_eq!(zeta(&k, t, v).unwrap(), 3.0);
        }
        assert!(zeta(&c, 0.1, 0.0).is_err());
    }

    #[test]
    fn paths_follow_then_flatten() {
        let c = islm();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let b = simulate_paths(&c, &grid, 50, 11, &SimOptions::default()).unwrap();
        for p in 0..b.paths() {
            let g = b.gammas()[p];
            assert!(g > 0.0 && g < 1.0);
            for (i, &t) in grid.iter().enumerate() {
                let want = if t < g { 1.0 / (1.0 - t) } else { 0.0 };
                assert!((b.value(p, i) - want).abs() < 1e-12);
            }
        }
        let again = simulate_paths(&c, &grid, 50, 11, &SimOptions { threads: Some(1) }).unwrap();
        assert_eq!(again.gammas(), b.gammas());
        let mut csv = Vec::new();
        b.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv)
            .unwrap()
            .starts_with("path_id,t,gamma,value\n0,0,"));
    }

    #[test]
    fn constant_process_has_zero_variance() {
        let k =
            Arc::new(CompensatedJump::new(&DriftSpec::constant(2.5), &JumpLaw::uniform()).unwrap());
        let b = simulate_paths(&k, &[0.0, 0.5, 1.0], 100, 1, &SimOptions::default()).unwrap();
        for t in [0.5, 1.0] {
            let r = mc_mean(&b, t).unwrap();
            assert_eq!((r.estimate, r.std_error), (2.5, 0.0));
        }
        assert!(matches!(
            localizing_check(&k, 3, 10, 1),
            Err(Error::EventuallyConstant { .. })
        ));
    }

    #[test]
    fn conditional_mass_is_exact_for_the_integrable_example() {
        let c = islm();
        let r = conditional_mass_check(&c, 0.5, 2000, 5).unwrap();
        assert_eq!(r.estimate, -2.0);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.target, Some(-2.0));
        let r = conditional_mass_check(&c, 0.0, 100, 5).unwrap();
        assert_eq!((r.estimate, r.target), (-1.0, Some(-1.0)));
    }

    #[test]
    fn localizing_means() {
        let c = islm();
        let r = localizing_check(&c, 5, 20_000, 3).unwrap();
        assert!(r.endpoint_probability_nondecreasing());
        for s in &r.steps {
            assert!(s.stopped_mean.within(4.0), "{s:?}");
        }
        let u = r.unstopped_mean.unwrap();
        assert_eq!((u.estimate, u.std_error), (0.0, 0.0));
    }
}
