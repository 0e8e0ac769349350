//! Gap metrics and Monte-Carlo checks of the batching lemmas and rate shapes.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{lazy_for_mixing_time, mixing_time, stationary, ChainCursor, TransitionKernel, MIXING_THRESHOLD};
use crate::error::{check_dim, Error, Result};
use crate::estimators::{batch_mean, mlmc_geometric, MlmcConfig, Oracle};
use crate::geometry::Geometry;
use crate::linalg::{dot, sub};
use crate::problems::{linear_max, stationary_mean, MinProblem, ViProblem};

/// Gaps at or below this are treated as numerically zero by [`rate_fit`].
pub const GAP_FLOOR: f64 = 1e-13;
/// Largest stationary mean norm accepted by [`lemma1_scaling`].
pub const STATIONARY_MEAN_TOL: f64 = 1e-10;

/// Squared-error level below which estimator variances are rounding noise.
const ROUNDING_VARIANCE: f64 = 1e-24;
const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0x9e37_79b9_7f4a_7c15;
const Z95: f64 = 1.959_963_984_540_054;

/// `f(x) − f*`, with values within `1e-12` of zero (or below it) clamped to 0.
pub fn subopt_gap(p: &MinProblem, x: &[f64]) -> f64 {
    let v = p.value(x) - p.f_star();
    if v <= 1e-12 {
        0.0
    } else {
        v
    }
}

/// Exact `Err_VI(x) = max_{u ∈ X} ⟨F(u), x − u⟩` for `F(u) = Qu + c` with
/// skew `Q`. Then `uᵀQu = 0`, so the objective equals
/// `⟨Qᵀx − c, u⟩ + ⟨c, x⟩`, which is linear in `u` and maximized at a vertex.
pub fn err_vi(p: &ViProblem, x: &[f64]) -> Result<f64> {
    check_dim("point", p.geometry().dim(), x.len())?;
    if !p.is_skew() {
        return Err(Error::UnsupportedMetric(
            "exact Err_VI needs a skew-symmetric operator; use weak_vi_gap with probe points".into(),
        ));
    }
    let c = p.affine_term();
    let w = sub(&p.matrix().vec_mul(x), c);
    let (m, _) = linear_max(p.geometry(), &w);
    Ok((m + dot(c, x)).max(0.0))
}

/// `⟨F(u), x − u⟩` for a single probe `u`.
pub fn vi_probe_value(p: &ViProblem, x: &[f64], u: &[f64]) -> f64 {
    dot(&p.operator(u), &sub(x, u))
}

/// Probe-restricted merit function averaged over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakGap {
    /// For each probe `u`, the across-run mean of `⟨F(u), x̂ − u⟩`.
    pub per_probe: Vec<f64>,
    /// Largest entry of `per_probe`; a lower bound on the full criterion.
    pub max: f64,
}

pub fn weak_vi_gap(p: &ViProblem, runs: &[Vec<f64>], probes: &[Vec<f64>]) -> Result<WeakGap> {
    if runs.is_empty() || probes.is_empty() {
        return Err(Error::Input("weak VI gap needs at least one run and one probe".into()));
    }
    let d = p.geometry().dim();
    for x in runs.iter().chain(probes) {
        check_dim("point", d, x.len())?;
    }
    let per_probe: Vec<f64> = probes
        .iter()
        .map(|u| runs.iter().map(|x| vi_probe_value(p, x, u)).sum::<f64>() / runs.len() as f64)
        .collect();
    let max = per_probe.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(WeakGap { per_probe, max })
}

/// All vertices of a product-of-simplexes or box feasible set (used as a
/// probe set). Balls have no vertices and yield an error.
pub fn vertices(g: &Geometry) -> Result<Vec<Vec<f64>>> {
    use crate::geometry::FeasibleSet;
    let d = g.dim();
    match g.set() {
        FeasibleSet::Box { lo, hi } => {
            if d > 20 {
                return Err(Error::Input(format!("refusing to enumerate 2^{d} box corners")));
            }
            Ok((0..1usize << d)
                .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect())
                .collect())
        }
        FeasibleSet::Ball { .. } => Err(Error::Input("a ball has no vertices".into())),
        FeasibleSet::Simplex { .. } | FeasibleSet::ProductSimplex { .. } => {
            let mut out = vec![vec![0.0; d]];
            for r in g.blocks() {
                let mut next = Vec::with_capacity(out.len() * r.len());
                for v in &out {
                    for i in r.clone() {
                        let mut w = v.clone();
                        w[i] = 1.0;
                        next.push(w);
                    }
                }
                out = next;
            }
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// Descriptive statistics

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Linear-interpolation quantile (`q ∈ [0, 1]`) of a nonempty sample.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Mean and its standard error by batch means: the samples are split into
/// `groups` contiguous replications whose means are treated as independent.
pub fn batch_means_se(samples: &[f64], groups: usize) -> Result<(f64, f64)> {
    let g = groups.min(samples.len());
    if g < 2 {
        return Err(Error::Statistics(format!(
            "standard error needs at least 2 trials, got {}",
            samples.len()
        )));
    }
    let n = samples.len();
    let means: Vec<f64> = (0..g).map(|k| mean(&samples[k * n / g..(k + 1) * n / g])).collect();
    let m = mean(&means);
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (g - 1) as f64;
    Ok((mean(samples), (var / g as f64).sqrt()))
}

/// SplitMix64 finalizer over `(base, stream)`, for independent per-trial seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Log-log fits

/// Least-squares slope of `log y` against `log x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// 95% interval.
    pub ci: (f64, f64),
    pub intercept: f64,
    /// Abscissae dropped because the value sat at the numerical floor.
    pub excluded: Vec<f64>,
}

fn ls_weights(lx: &[f64]) -> Vec<f64> {
    let mx = mean(lx);
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    lx.iter().map(|v| (v - mx) / sxx).collect()
}

fn ls_slope(lx: &[f64], ly: &[f64]) -> (f64, f64) {
    let w = ls_weights(lx);
    let slope = dot(&w, ly);
    (slope, mean(ly) - slope * mean(lx))
}

/// Slope with a CI propagated from per-point standard errors (`se/y` is the
/// standard error of `log y` to first order).
fn fit_with_se(xs: &[f64], ys: &[f64], ses: &[f64]) -> Option<SlopeFit> {
    if xs.len() < 2 || ys.iter().any(|y| !(*y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = ls_slope(&lx, &ly);
    let w = ls_weights(&lx);
    let var: f64 = w.iter().zip(ys.iter().zip(ses)).map(|(w, (y, s))| (w * s / y).powi(2)).sum();
    let h = Z95 * var.sqrt();
    Some(SlopeFit { slope, ci: (slope - h, slope + h), intercept, excluded: Vec::new() })
}

/// Final gaps of several seeds at a grid of budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub metric: String,
    budgets: Vec<f64>,
    /// `values[i][s]`: gap at `budgets[i]` for seed `s`.
    values: Vec<Vec<f64>>,
    /// Budgets strictly below this are ignored by [`rate_fit`].
    pub warmup: f64,
}

impl GapReport {
    pub fn new(metric: impl Into<String>, budgets: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if budgets.len() != values.len() {
            return Err(Error::Input("one value row per budget required".into()));
        }
        if budgets.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Input("budgets must be strictly increasing".into()));
        }
        let seeds = values.first().map_or(0, Vec::len);
        if seeds == 0 || values.iter().any(|r| r.len() != seeds) {
            return Err(Error::Input("every budget needs the same positive number of seeds".into()));
        }
        if values.iter().flatten().any(|v| !(*v >= 0.0)) {
            return Err(Error::Input("gap values must be nonnegative".into()));
        }
        Ok(Self { metric: metric.into(), budgets, values, warmup: 0.0 })
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn n_seeds(&self) -> usize {
        self.values[0].len()
    }

    pub fn medians(&self) -> Vec<f64> {
        self.values.iter().map(|r| median(r)).collect()
    }
}

/// Least-squares slope of `log(median gap)` against `log(budget)` with a
/// bootstrap interval over seeds. Budgets below the warm-up and medians at
/// or below [`GAP_FLOOR`] are left out; the latter are listed in
/// [`SlopeFit::excluded`]. Needs at least 4 remaining points spanning a
/// factor of 8.
pub fn rate_fit(report: &GapReport) -> Result<SlopeFit> {
    let med = report.medians();
    let mut keep = Vec::new();
    let mut excluded = Vec::new();
    for (i, &b) in report.budgets.iter().enumerate() {
        if b < report.warmup {
            continue;
        }
        if med[i] <= GAP_FLOOR {
            excluded.push(b);
        } else {
            keep.push(i);
        }
    }
    if keep.len() < 4 {
        return Err(Error::Config(format!(
            "rate fit needs at least 4 usable budgets, got {} ({} at the numerical floor)",
            keep.len(),
            excluded.len()
        )));
    }
    let span = report.budgets[*keep.last().unwrap()] / report.budgets[keep[0]];
    if span < 8.0 {
        return Err(Error::Config(format!("rate fit budgets span only {span:.3}x (need 8x)")));
    }
    let lx: Vec<f64> = keep.iter().map(|&i| report.budgets[i].ln()).collect();
    let ly: Vec<f64> = keep.iter().map(|&i| med[i].ln()).collect();
    let (slope, intercept) = ls_slope(&lx, &ly);

    let seeds = report.n_seeds();
    let ci = if seeds < 2 {
        (slope, slope)
    } else {
        let idx: Vec<usize> = (0..seeds).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
        let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        let mut sample = vec![0.0; seeds];
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let pick: Vec<usize> = (0..seeds).map(|_| *idx.choose(&mut rng).unwrap()).collect();
            let ly: Vec<f64> = keep
                .iter()
                .map(|&i| {
                    for (s, &k) in sample.iter_mut().zip(&pick) {
                        *s = report.values[i][k];
                    }
                    median(&sample).max(f64::MIN_POSITIVE).ln()
                })
                .collect();
            slopes.push(ls_slope(&lx, &ly).0);
        }
        (quantile(&slopes, 0.025), quantile(&slopes, 0.975))
    };
    Ok(SlopeFit { slope, ci, intercept, excluded })
}

// ---------------------------------------------------------------------------
// Scaling reports

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCell {
    /// Values of the report's parameters, in the order of `param_names`.
    pub params: Vec<f64>,
    pub value: f64,
    pub se: f64,
    /// Trials aggregated (0 for exactly computed cells).
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub statistic: String,
    pub param_names: Vec<String>,
    pub cells: Vec<ScalingCell>,
    /// Fitted exponent; `None` when every cell is zero.
    pub exponent: Option<SlopeFit>,
    pub constant: Option<f64>,
}

fn geometric_mean(v: &[f64]) -> f64 {
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Config {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    /// Independent replications used for batch-means standard errors.
    pub replications: usize,
    pub seed: u64,
    /// Also measure a lazy copy of the chain with twice the mixing time.
    pub tau_sweep: bool,
}

impl Default for Lemma1Config {
    fn default() -> Self {
        Self {
            n_grid: (4..=12).map(|k| 1usize << k).collect(),
            trials: 2000,
            replications: 20,
            seed: 1,
            tau_sweep: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    pub base: ScalingReport,
    pub tau_mix: usize,
    /// Lazy chain report, its mixing time and laziness.
    pub lazy: Option<(ScalingReport, usize, f64)>,
    /// Fitted constant of the lazy chain over that of the base chain.
    pub constant_ratio: Option<f64>,
}

/// Monte-Carlo estimate of `E‖N^{−1} Σ_{t=1}^N ξ_{Z_t}‖_*²` from stationary
/// starts, for each `N` in the grid. The fitted constant is the geometric
/// mean over cells of `value · N / σ²`.
pub fn lemma1_scaling(
    kernel: &TransitionKernel,
    noise: &[Vec<f64>],
    geometry: &Geometry,
    cfg: &Lemma1Config,
) -> Result<Lemma1Report> {
    if noise.len() != kernel.n_states() {
        return Err(Error::Input(format!(
            "{} noise vectors for {} states",
            noise.len(),
            kernel.n_states()
        )));
    }
    for v in noise {
        check_dim("noise vector", geometry.dim(), v.len())?;
    }
    if cfg.trials < 2 {
        return Err(Error::Statistics(format!("need at least 2 trials per cell, got {}", cfg.trials)));
    }
    if cfg.n_grid.is_empty() || cfg.n_grid.contains(&0) {
        return Err(Error::Config("sample-size grid must be nonempty and positive".into()));
    }
    kernel.check_ergodic()?;
    let pi = stationary(kernel)?;
    let m = stationary_mean(noise, &pi);
    let m_norm = geometry.dual_norm(&m);
    if m_norm > STATIONARY_MEAN_TOL {
        return Err(Error::Input(format!("noise has nonzero stationary mean ({m_norm:e})")));
    }
    let tau = mixing_time(kernel, MIXING_THRESHOLD)?;
    let base = lemma1_cells(kernel, &pi, noise, geometry, cfg, cfg.seed)?;

    let (lazy, constant_ratio) = if cfg.tau_sweep && kernel.n_states() > 1 {
        let (lk, alpha) = lazy_for_mixing_time(kernel, 2 * tau)?;
        let lazy_tau = mixing_time(&lk, MIXING_THRESHOLD)?;
        let rep = lemma1_cells(&lk, &pi, noise, geometry, cfg, derive_seed(cfg.seed, LAZY_STREAM))?;
        let ratio = match (base.constant, rep.constant) {
            (Some(a), Some(b)) if a > 0.0 => Some(b / a),
            _ => None,
        };
        (Some((rep, lazy_tau, alpha)), ratio)
    } else {
        (None, None)
    };
    Ok(Lemma1Report { base, tau_mix: tau, lazy, constant_ratio })
}

/// Seed stream of the lazy-chain trials, kept apart from the base chain's.
const LAZY_STREAM: u64 = 0x1a27;

fn lemma1_cells(
    kernel: &TransitionKernel,
    pi: &[f64],
    noise: &[Vec<f64>],
    geometry: &Geometry,
    cfg: &Lemma1Config,
    seed: u64,
) -> Result<ScalingReport> {
    let sigma = noise.iter().map(|v| geometry.dual_norm(v)).fold(0.0, f64::max);
    let kernel = Arc::new(kernel.clone());
    let d = geometry.dim();
    let mut cells = Vec::with_capacity(cfg.n_grid.len());
    for (ci, &n) in cfg.n_grid.iter().enumerate() {
        let mut samples = Vec::with_capacity(cfg.trials);
        for trial in 0..cfg.trials {
            let s = derive_seed(derive_seed(seed, ci as u64), trial as u64);
            let mut cur = ChainCursor::stationary(kernel.clone(), pi, s)?;
            let mut sum = vec![0.0; d];
            for _ in 0..n {
                let z = cur.step();
                for (a, b) in sum.iter_mut().zip(&noise[z]) {
                    *a += b;
                }
            }
            let inv = 1.0 / n as f64;
            sum.iter_mut().for_each(|v| *v *= inv);
            samples.push(geometry.dual_norm(&sum).powi(2));
        }
        let (value, se) = batch_means_se(&samples, cfg.replications)?;
        cells.push(ScalingCell { params: vec![n as f64], value, se, trials: cfg.trials });
    }
    let xs: Vec<f64> = cells.iter().map(|c| c.params[0]).collect();
    let ys: Vec<f64> = cells.iter().map(|c| c.value).collect();
    let ses: Vec<f64> = cells.iter().map(|c| c.se).collect();
    let exponent = fit_with_se(&xs, &ys, &ses);
    let constant = if sigma == 0.0 {
        Some(0.0)
    } else if ys.iter().all(|v| *v > 0.0) {
        let scaled: Vec<f64> = xs.iter().zip(&ys).map(|(n, v)| v * n / (sigma * sigma)).collect();
        Some(geometric_mean(&scaled))
    } else {
        None
    };
    Ok(ScalingReport {
        statistic: "mean_sq_dual_norm".into(),
        param_names: vec!["n".into()],
        cells,
        exponent,
        constant,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Config {
    /// Paired trials of the unbiasedness check and its `(B, M)`.
    pub unbiased_trials: usize,
    pub unbiased_batch: u64,
    pub unbiased_limit: u64,
    /// Batch limits of the exact bias curve (at `B = bias_batch`).
    pub bias_limits: Vec<u64>,
    pub bias_batch: u64,
    /// Variance grid.
    pub var_batches: Vec<u64>,
    pub var_limits: Vec<u64>,
    pub var_trials: usize,
    /// Repeat the variance grid on a lazy copy with twice the mixing time.
    pub tau_sweep: bool,
    pub replications: usize,
    pub seed: u64,
}

impl Default for Lemma2Config {
    fn default() -> Self {
        Self {
            unbiased_trials: 100_000,
            unbiased_batch: 1,
            unbiased_limit: 64,
            bias_limits: vec![4, 16, 64, 256],
            bias_batch: 1,
            var_batches: vec![1, 2, 4],
            var_limits: vec![4, 16, 64],
            var_trials: 2000,
            tau_sweep: true,
            replications: 20,
            seed: 1,
        }
    }
}

/// Paired comparison of the estimator against the deepest-level batch mean
/// computed on the same chain path.
#[derive(Debug, Clone, PartialEq)]
pub struct Unbiasedness {
    pub trials: usize,
    /// Per coordinate, `mean(g) − mean(g_K)`.
    pub mean_diff: Vec<f64>,
    /// Per coordinate, standard error of the paired difference.
    pub se: Vec<f64>,
    /// `max_i |mean_diff_i| / se_i` (0 when the differences vanish identically).
    pub max_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Report {
    pub unbiased: Unbiasedness,
    /// Exact squared bias `max_{z₀} ‖∇f(x) − E[g | Z₀ = z₀]‖_*²` versus `M`.
    pub bias: ScalingReport,
    /// Monte-Carlo `E‖g − ∇f(x)‖_*²` over `(B, M, τ_mix)`; the exponent is
    /// the slope in `B` averaged over `(M, τ_mix)` groups and the constant is
    /// the geometric mean of `value · B / (τ_mix · log₂ M · σ²)`.
    pub variance: ScalingReport,
    /// Variance nonincreasing in `B` at fixed `(M, τ_mix)`, up to 2 SE and
    /// rounding.
    pub variance_monotone_in_b: bool,
}

/// Monte-Carlo and exact checks of the multilevel estimator at a frozen point.
pub fn lemma2_check(p: &MinProblem, x: &[f64], kernel: &TransitionKernel, cfg: &Lemma2Config) -> Result<Lemma2Report> {
    check_dim("point", p.geometry().dim(), x.len())?;
    if kernel.n_states() != p.n_states() {
        return Err(Error::Input("chain and problem disagree on the number of states".into()));
    }
    if cfg.unbiased_trials < 2 || cfg.var_trials < 2 {
        return Err(Error::Statistics("need at least 2 trials per cell".into()));
    }
    kernel.check_ergodic()?;
    let pi = stationary(kernel)?;
    let tau = mixing_time(kernel, MIXING_THRESHOLD)?;
    let truth = p.grad(x);
    let g = p.geometry();

    let unbiased = lemma2_unbiasedness(p, x, kernel, cfg)?;
    let bias = lemma2_bias_curve(p, kernel, cfg)?;

    let mut chains = vec![(kernel.clone(), tau)];
    if cfg.tau_sweep && kernel.n_states() > 1 {
        let (lk, _) = lazy_for_mixing_time(kernel, 2 * tau)?;
        let lt = mixing_time(&lk, MIXING_THRESHOLD)?;
        chains.push((lk, lt));
    }
    let sigma = p.sigma();
    let mut cells = Vec::new();
    let mut stream = 0u64;
    for (k, t) in &chains {
        let k = Arc::new(k.clone());
        for &m in &cfg.var_limits {
            for &b in &cfg.var_batches {
                let mc = MlmcConfig::new(b, m)?;
                stream += 1;
                let base = derive_seed(cfg.seed, 0x7a00 + stream);
                let mut samples = Vec::with_capacity(cfg.var_trials);
                for trial in 0..cfg.var_trials {
                    let s = derive_seed(base, trial as u64);
                    let mut cur = ChainCursor::stationary(k.clone(), &pi, s)?;
                    let mut lr = ChaCha8Rng::seed_from_u64(derive_seed(s, 1));
                    let e = mlmc_geometric(p, x, &mut cur, &mc, &mut lr)?;
                    samples.push(g.dual_norm(&sub(&e.g, &truth)).powi(2));
                }
                let (value, se) = batch_means_se(&samples, cfg.replications)?;
                cells.push(ScalingCell { params: vec![b as f64, m as f64, *t as f64], value, se, trials: cfg.var_trials });
            }
        }
    }

    let nb = cfg.var_batches.len();
    let mut monotone = true;
    let mut slopes = Vec::new();
    for group in cells.chunks(nb) {
        for w in group.windows(2) {
            let slack = 2.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt() + ROUNDING_VARIANCE;
            if w[1].value > w[0].value + slack {
                monotone = false;
            }
        }
        let xs: Vec<f64> = group.iter().map(|c| c.params[0]).collect();
        let ys: Vec<f64> = group.iter().map(|c| c.value).collect();
        let ses: Vec<f64> = group.iter().map(|c| c.se).collect();
        if let Some(f) = fit_with_se(&xs, &ys, &ses) {
            slopes.push(f);
        }
    }
    let exponent = (!slopes.is_empty()).then(|| {
        let k = slopes.len() as f64;
        let slope = slopes.iter().map(|f| f.slope).sum::<f64>() / k;
        let half = (slopes.iter().map(|f| ((f.ci.1 - f.ci.0) / 2.0).powi(2)).sum::<f64>()).sqrt() / k;
        let intercept = slopes.iter().map(|f| f.intercept).sum::<f64>() / k;
        SlopeFit { slope, ci: (slope - half, slope + half), intercept, excluded: Vec::new() }
    });
    let constant = if sigma == 0.0 {
        Some(0.0)
    } else {
        let scaled: Vec<f64> = cells
            .iter()
            .filter(|c| c.params[1] >= 2.0 && c.value > 0.0)
            .map(|c| c.value * c.params[0] / (c.params[2] * c.params[1].log2().floor() * sigma * sigma))
            .collect();
        (!scaled.is_empty()).then(|| geometric_mean(&scaled))
    };
    let variance = ScalingReport {
        statistic: "mse".into(),
        param_names: vec!["batch".into(), "limit".into(), "tau_mix".into()],
        cells,
        exponent,
        constant,
    };
    Ok(Lemma2Report { unbiased, bias, variance, variance_monotone_in_b: monotone })
}

/// Paired check `E[g] = E[g_{⌊log₂ M⌋}]`: each trial runs the estimator and
/// the deepest-level batch mean on clones of one stationary-start cursor.
pub fn lemma2_unbiasedness(p: &MinProblem, x: &[f64], kernel: &TransitionKernel, cfg: &Lemma2Config) -> Result<Unbiasedness> {
    check_dim("point", p.geometry().dim(), x.len())?;
    if cfg.unbiased_trials < 2 {
        return Err(Error::Statistics("need at least 2 paired trials".into()));
    }
    let pi = stationary(kernel)?;
    let pi = pi.as_slice();
    let mc = MlmcConfig::new(cfg.unbiased_batch, cfg.unbiased_limit)?;
    let deep = mc.batch() << mc.max_level();
    let k = Arc::new(kernel.clone());
    let d = p.dim();
    let n = cfg.unbiased_trials;
    let mut diffs = vec![Vec::with_capacity(n); d];
    let base = derive_seed(cfg.seed, 0x0b1a5);
    for trial in 0..n {
        let s = derive_seed(base, trial as u64);
        let mut cur = ChainCursor::stationary(k.clone(), pi, s)?;
        let mut twin = cur.clone();
        let mut lr = ChaCha8Rng::seed_from_u64(derive_seed(s, 1));
        let g = mlmc_geometric(p, x, &mut cur, &mc, &mut lr)?;
        let gk = batch_mean(p, x, &mut twin, deep)?;
        for ((col, a), b) in diffs.iter_mut().zip(&g.g).zip(&gk.g) {
            col.push(a - b);
        }
    }
    let mut mean_diff = Vec::with_capacity(d);
    let mut se = Vec::with_capacity(d);
    let mut max_z = 0.0_f64;
    for col in &diffs {
        let (m, s) = batch_means_se(col, cfg.replications)?;
        if s > 0.0 {
            max_z = max_z.max(m.abs() / s);
        } else if m != 0.0 {
            max_z = f64::INFINITY;
        }
        mean_diff.push(m);
        se.push(s);
    }
    Ok(Unbiasedness { trials: n, mean_diff, se, max_z })
}

/// `E[g | Z₀ = z₀] − ∇f(x)` is the mean of `−c_{Z_t}` over the first
/// `n = B·2^{⌊log₂ M⌋}` states after `z₀`, which is computed exactly by
/// propagating the start distribution through the kernel.
pub fn lemma2_bias_curve(p: &MinProblem, kernel: &TransitionKernel, cfg: &Lemma2Config) -> Result<ScalingReport> {
    if kernel.n_states() != p.n_states() {
        return Err(Error::Input("chain and problem disagree on the number of states".into()));
    }
    let s = kernel.n_states();
    let d = p.dim();
    let g = p.geometry();
    let mut cells = Vec::with_capacity(cfg.bias_limits.len());
    for &m in &cfg.bias_limits {
        let mc = MlmcConfig::new(cfg.bias_batch, m)?;
        let n = (mc.batch() << mc.max_level()) as usize;
        let mut worst = 0.0_f64;
        for z0 in 0..s {
            let mut mu = vec![0.0; s];
            mu[z0] = 1.0;
            let mut acc = vec![0.0; d];
            for _ in 0..n {
                mu = kernel.matrix().vec_mul(&mu);
                for (z, w) in mu.iter().enumerate() {
                    for (a, c) in acc.iter_mut().zip(&p.shifts()[z]) {
                        *a += w * c;
                    }
                }
            }
            acc.iter_mut().for_each(|v| *v /= n as f64);
            worst = worst.max(g.dual_norm(&acc).powi(2));
        }
        cells.push(ScalingCell { params: vec![m as f64], value: worst, se: 0.0, trials: 0 });
    }
    let xs: Vec<f64> = cells.iter().map(|c| c.params[0]).collect();
    let ys: Vec<f64> = cells.iter().map(|c| c.value).collect();
    let zeros = vec![0.0; ys.len()];
    let exponent = if ys.iter().all(|v| *v > 1e-300) { fit_with_se(&xs, &ys, &zeros) } else { None };
    let constant = exponent.as_ref().map(|f| f.intercept.exp());
    Ok(ScalingReport {
        statistic: "sq_bias".into(),
        param_names: vec!["limit".into()],
        cells,
        exponent,
        constant,
    })
}
