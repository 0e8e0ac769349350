//! Accelerated mirror descent (MAMD) and mirror-prox (MMP) under Markovian
//! noise, each with and without multilevel batching.
//!
//! Every solver owns nothing but its arguments: the chain cursor carries the
//! sample index `N_t`, and the batched variants take a separate level stream
//! for `J_t`. Trajectories are recorded through a caller-supplied gap
//! callback, so the solver itself never sees `f*` or `x*`.

use std::time::Instant;

use rand::RngCore;

use crate::chain::ChainCursor;
use crate::error::{Error, Result};
use crate::estimators::{batch_mean, mlmc_geometric, single_sample, Estimate, MlmcConfig, Oracle};
use crate::geometry::{Geometry, Point};
use crate::problems::{MinProblem, ViProblem};

/// Relative slack when checking the schedule inequalities.
const SCHEDULE_TOL: f64 = 1e-12;

/// How `β_t` and `γ_t` are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleRule {
    /// `β_t = max{(t − τ)/2 + 1, 1}`, `γ_t = β_t · scale`.
    Shifted { scale: f64 },
    /// Explicit per-iteration values (indexed from `t = 0`).
    Explicit { beta: Vec<f64>, gamma: Vec<f64> },
}

/// Momentum/stepsize schedule of MAMD. `tau` is the warm-up offset at which
/// `β_τ = 1` (the mixing time for the unbatched method, 0 for the batched one).
#[derive(Debug, Clone, PartialEq)]
pub struct MamdSchedule {
    rule: ScheduleRule,
    tau: usize,
}

impl MamdSchedule {
    pub fn explicit(beta: Vec<f64>, gamma: Vec<f64>, tau: usize) -> Result<Self> {
        if beta.len() != gamma.len() || beta.is_empty() {
            return Err(Error::Config("explicit schedule needs equally long, nonempty β and γ".into()));
        }
        Ok(Self { rule: ScheduleRule::Explicit { beta, gamma }, tau })
    }

    /// `β_t = max{(t − τ)/2 + 1, 1}`, `γ_t = β_t · scale`.
    pub fn shifted(scale: f64, tau: usize) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("stepsize scale {scale} must be positive")));
        }
        Ok(Self { rule: ScheduleRule::Shifted { scale }, tau })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn rule(&self) -> &ScheduleRule {
        &self.rule
    }

    pub fn beta(&self, t: usize) -> f64 {
        match &self.rule {
            ScheduleRule::Shifted { .. } => ((t as f64 - self.tau as f64) / 2.0 + 1.0).max(1.0),
            ScheduleRule::Explicit { beta, .. } => beta[t.min(beta.len() - 1)],
        }
    }

    pub fn gamma(&self, t: usize) -> f64 {
        match &self.rule {
            ScheduleRule::Shifted { scale } => self.beta(t) * scale,
            ScheduleRule::Explicit { gamma, .. } => gamma[t.min(gamma.len() - 1)],
        }
    }

    /// Checks over `t ∈ [0, horizon)`: `β_t ≥ 1`, `γ_t > 0`,
    /// `0 ≤ (β_{t+1} − 1)γ_{t+1} ≤ β_t γ_t`, `β_t ≥ 2γ_t L` (for every `t`,
    /// including the warm-up) and `β_τ = 1`.
    pub fn verify(&self, lipschitz: f64, horizon: usize) -> Result<()> {
        if let ScheduleRule::Explicit { beta, .. } = &self.rule {
            if beta.len() < horizon {
                return Err(Error::Config(format!(
                    "explicit schedule has {} entries for {horizon} iterations",
                    beta.len()
                )));
            }
        }
        if (self.beta(self.tau) - 1.0).abs() > SCHEDULE_TOL {
            return Err(Error::Config(format!("β at τ = {} must equal 1", self.tau)));
        }
        for t in 0..horizon {
            let (b, g) = (self.beta(t), self.gamma(t));
            if !(b >= 1.0 && g > 0.0 && b.is_finite() && g.is_finite()) {
                return Err(Error::Config(format!("invalid schedule at t = {t}: β = {b}, γ = {g}")));
            }
            if b < 2.0 * g * lipschitz * (1.0 - SCHEDULE_TOL) {
                return Err(Error::Config(format!("β_t ≥ 2γ_t L violated at t = {t}")));
            }
            let lhs = (self.beta(t + 1) - 1.0) * self.gamma(t + 1);
            if lhs > b * g * (1.0 + SCHEDULE_TOL) {
                return Err(Error::Config(format!("(β_{{t+1}} − 1)γ_{{t+1}} ≤ β_t γ_t violated at t = {t}")));
            }
        }
        Ok(())
    }
}

/// Schedule for unbatched MAMD: `β_t = max{(t − τ)/2 + 1, 1}` and
/// `γ_t = β_t · min{1/(2L), D / ((T − τ)^{3/2} σ τ^{3/2})}`; with `σ = 0`
/// the second term is dropped.
pub fn corollary1_schedule(l: f64, d: f64, sigma: f64, tau_mix: usize, horizon: usize) -> Result<MamdSchedule> {
    check_constants(l, d, sigma)?;
    if horizon <= tau_mix {
        return Err(Error::Config(format!("horizon T = {horizon} must exceed τ_mix = {tau_mix}")));
    }
    let det = 0.5 / l;
    let noise = d / ((horizon - tau_mix) as f64).powf(1.5) / sigma / (tau_mix as f64).powf(1.5);
    MamdSchedule::shifted(min_defined(det, noise, sigma), tau_mix)
}

/// Schedule for batched MAMD: `β_t = t/2 + 1`,
/// `γ_t = β_t · min{1/(2L), D / (T^{3/2} σ τ^{1/2})}`, `M = T`, `B = 1`.
pub fn corollary2_schedule(
    l: f64,
    d: f64,
    sigma: f64,
    tau_mix: usize,
    horizon: usize,
) -> Result<(MamdSchedule, MlmcConfig)> {
    check_constants(l, d, sigma)?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let det = 0.5 / l;
    let noise = d / (horizon as f64).powf(1.5) / sigma / (tau_mix as f64).sqrt();
    let sched = MamdSchedule::shifted(min_defined(det, noise, sigma), 0)?;
    Ok((sched, MlmcConfig::new(1, horizon as u64)?))
}

/// `γ = min{1/(2L̃), D / ((T − τ)^{1/2} σ τ)}`.
pub fn corollary3_gamma(l_tilde: f64, d: f64, sigma: f64, tau_mix: usize, horizon: usize) -> Result<f64> {
    check_constants(l_tilde, d, sigma)?;
    if horizon <= tau_mix {
        return Err(Error::Config(format!("horizon T = {horizon} must exceed τ_mix = {tau_mix}")));
    }
    let noise = d / ((horizon - tau_mix) as f64).sqrt() / sigma / tau_mix as f64;
    Ok(min_defined(0.5 / l_tilde, noise, sigma))
}

/// `γ = min{1/(2L), D / (T^{1/2} σ τ^{1/2})}`, `M = T`, `B = 1`.
pub fn corollary4_params(l: f64, d: f64, sigma: f64, tau_mix: usize, horizon: usize) -> Result<(f64, MlmcConfig)> {
    check_constants(l, d, sigma)?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let noise = d / (horizon as f64).sqrt() / sigma / (tau_mix as f64).sqrt();
    Ok((min_defined(0.5 / l, noise, sigma), MlmcConfig::new(1, horizon as u64)?))
}

fn check_constants(l: f64, d: f64, sigma: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) || !(d > 0.0 && d.is_finite()) || !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("schedule constants must satisfy L > 0, D > 0, σ ≥ 0 (got {l}, {d}, {sigma})")));
    }
    Ok(())
}

/// `min{det, noise}`, ignoring the noise term when it is undefined (`σ = 0`).
fn min_defined(det: f64, noise: f64, sigma: f64) -> f64 {
    if sigma == 0.0 || !noise.is_finite() {
        det
    } else {
        det.min(noise)
    }
}

/// Recording options shared by all solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Record a row every `stride` iterations.
    pub stride: usize,
    /// Starting point; defaults to the mirror-map minimizer of the geometry.
    pub x0: Option<Point>,
    /// Keep every iterate pair in [`RunRecord::trajectory`].
    pub keep_trajectory: bool,
    /// Fill `wall_ms`; off by default so records are reproducible byte for byte.
    pub wall_time: bool,
    /// Start of the averaging window of unbatched MMP (the mixing time).
    pub avg_start: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { stride: 1, x0: None, keep_trajectory: false, wall_time: false, avg_start: 0 }
    }
}

/// One recorded row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: usize,
    pub oracle_calls: u64,
    pub chain_steps: u64,
    pub gap: f64,
    pub wall_ms: f64,
}

/// Per-iteration iterate pair: `(x^{t+1}, x_f^{t+1})` for MAMD and
/// `(x^{t+1/2}, x^{t+1})` for MMP.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub primary: Vec<f64>,
    pub secondary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    /// `x_f^T` for MAMD, `x̂^T` for MMP.
    pub final_point: Point,
    pub oracle_calls: u64,
    pub chain_steps: u64,
    pub iterations: usize,
    pub trajectory: Vec<TrajectoryStep>,
}

struct Recorder {
    stride: usize,
    rows: Vec<RunRow>,
    oracle_calls: u64,
    chain_steps: u64,
    start: Option<Instant>,
}

impl Recorder {
    fn new(opts: &RunOptions) -> Result<Self> {
        if opts.stride == 0 {
            return Err(Error::Config("record stride must be positive".into()));
        }
        Ok(Self {
            stride: opts.stride,
            rows: Vec::new(),
            oracle_calls: 0,
            chain_steps: 0,
            start: opts.wall_time.then(Instant::now),
        })
    }

    fn charge(&mut self, e: &Estimate) {
        self.oracle_calls += e.oracle_calls;
        self.chain_steps += e.chain_steps;
    }

    fn maybe_record(&mut self, t: usize, point: &[f64], gap: &mut dyn FnMut(&[f64]) -> f64) {
        if t.is_multiple_of(self.stride) {
            let wall_ms = self.start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3);
            self.rows.push(RunRow {
                t,
                oracle_calls: self.oracle_calls,
                chain_steps: self.chain_steps,
                gap: gap(point),
                wall_ms,
            });
        }
    }
}

fn start_point(g: &Geometry, opts: &RunOptions) -> Result<Point> {
    match &opts.x0 {
        Some(p) => g.point(p.to_vec()),
        None => Ok(g.center()),
    }
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

fn check_norm(g: &Geometry) -> Result<()> {
    let p = g.norm_pair().p();
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::Config(format!("batched methods need p ∈ [1, 2], got {p}")));
    }
    Ok(())
}

/// Shared MAMD loop; `estimate` produces the gradient estimate at `x_g`.
fn mamd_loop(
    p: &MinProblem,
    sched: &MamdSchedule,
    horizon: usize,
    opts: &RunOptions,
    gap: &mut dyn FnMut(&[f64]) -> f64,
    estimate: &mut dyn FnMut(&[f64]) -> Result<Estimate>,
) -> Result<RunRecord> {
    let g = p.geometry();
    let mut rec = Recorder::new(opts)?;
    let mut x = start_point(g, opts)?;
    let mut xf = x.clone();
    let mut trajectory = Vec::new();
    for t in 0..horizon {
        let inv_beta = 1.0 / sched.beta(t);
        let gamma = sched.gamma(t);
        let xg = Point::blend(&x, inv_beta, &xf);
        let est = estimate(&xg)?;
        rec.charge(&est);
        let next = g.prox_map(&x, &scaled(&est.g, gamma))?;
        xf = Point::blend(&next, inv_beta, &xf);
        x = next;
        if opts.keep_trajectory {
            trajectory.push(TrajectoryStep { primary: x.to_vec(), secondary: xf.to_vec() });
        }
        rec.maybe_record(t + 1, &xf, gap);
    }
    Ok(RunRecord {
        rows: rec.rows,
        final_point: xf,
        oracle_calls: rec.oracle_calls,
        chain_steps: rec.chain_steps,
        iterations: horizon,
        trajectory,
    })
}

/// MAMD without batching: one chain sample and one oracle call per iteration.
/// Reports `x_f^T`.
pub fn mamd_unbatched(
    p: &MinProblem,
    sched: &MamdSchedule,
    cursor: &mut ChainCursor,
    horizon: usize,
    opts: &RunOptions,
    gap: &mut dyn FnMut(&[f64]) -> f64,
) -> Result<RunRecord> {
    if horizon < sched.tau() {
        return Err(Error::Config(format!("T = {horizon} is below τ_mix = {}", sched.tau())));
    }
    sched.verify(p.lipschitz(), horizon)?;
    mamd_loop(p, sched, horizon, opts, gap, &mut |xg| single_sample(p, xg, cursor))
}

/// MAMD with the truncated-geometric estimator. The schedule must start
/// with `β_0 = 1` (`tau = 0`).
#[allow(clippy::too_many_arguments)]
pub fn mamd_batched(
    p: &MinProblem,
    sched: &MamdSchedule,
    cursor: &mut ChainCursor,
    cfg: &MlmcConfig,
    horizon: usize,
    level_rng: &mut dyn RngCore,
    opts: &RunOptions,
    gap: &mut dyn FnMut(&[f64]) -> f64,
) -> Result<RunRecord> {
    check_norm(p.geometry())?;
    if sched.tau() != 0 {
        return Err(Error::Config("batched MAMD needs a schedule with β_0 = 1 (tau = 0)".into()));
    }
    sched.verify(p.lipschitz(), horizon)?;
    mamd_loop(p, sched, horizon, opts, gap, &mut |xg| mlmc_geometric(p, xg, cursor, cfg, level_rng))
}

fn check_gamma(gamma: f64, lipschitz: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("stepsize {gamma} must be positive")));
    }
    if gamma * 2.0 * lipschitz > 1.0 + SCHEDULE_TOL {
        return Err(Error::Config(format!("stepsize {gamma} exceeds 1/(2L) = {}", 0.5 / lipschitz)));
    }
    Ok(())
}

/// Incremental mean of the extrapolated iterates over `[window_start, t)`.
struct RunningAverage {
    sum: Vec<f64>,
    mean: Vec<f64>,
    count: usize,
}

impl RunningAverage {
    fn new(d: usize) -> Self {
        Self { sum: vec![0.0; d], mean: vec![0.0; d], count: 0 }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for ((s, m), v) in self.sum.iter_mut().zip(self.mean.iter_mut()).zip(x) {
            *s += v;
            *m = *s * inv;
        }
    }
}

/// MMP without batching: one chain state `Z_t` per iteration, used in both
/// prox steps, both anchored at `x^t`. Reports the mean of `x^{t+1/2}` over
/// `t ∈ [opts.avg_start, T)`.
pub fn mmp_unbatched(
    p: &ViProblem,
    gamma: f64,
    cursor: &mut ChainCursor,
    horizon: usize,
    opts: &RunOptions,
    gap: &mut dyn FnMut(&[f64]) -> f64,
) -> Result<RunRecord> {
    check_gamma(gamma, p.lipschitz_tilde())?;
    if horizon <= opts.avg_start {
        return Err(Error::Config(format!(
            "T = {horizon} must exceed the averaging start τ_mix = {}",
            opts.avg_start
        )));
    }
    let g = p.geometry();
    let mut rec = Recorder::new(opts)?;
    let mut x = start_point(g, opts)?;
    let mut avg = RunningAverage::new(g.dim());
    let mut trajectory = Vec::new();
    for t in 0..horizon {
        let z = cursor.step();
        let f = p.eval(&x, z)?;
        let half = g.prox_map(&x, &scaled(&f, gamma))?;
        let f = p.eval(&half, z)?;
        let next = g.prox_map(&x, &scaled(&f, gamma))?;
        rec.charge(&Estimate { g: Vec::new(), oracle_calls: 2, chain_steps: 1, level: None });
        if t >= opts.avg_start {
            avg.push(&half);
        }
        if opts.keep_trajectory {
            trajectory.push(TrajectoryStep { primary: half.to_vec(), secondary: next.to_vec() });
        }
        x = next;
        let report = if avg.count > 0 { avg.mean.as_slice() } else { x.coords() };
        rec.maybe_record(t + 1, report, gap);
    }
    Ok(RunRecord {
        rows: rec.rows,
        final_point: Point::from_vec_unchecked(avg.mean),
        oracle_calls: rec.oracle_calls,
        chain_steps: rec.chain_steps,
        iterations: horizon,
        trajectory,
    })
}

/// MMP with batching: batch mean of `B` samples at `x^t` for the
/// extrapolation, truncated-geometric estimate at `x^{t+1/2}` for the
/// update. Reports the mean of `x^{t+1/2}` over `t ∈ [0, T)`.
#[allow(clippy::too_many_arguments)]
pub fn mmp_batched(
    p: &ViProblem,
    gamma: f64,
    cursor: &mut ChainCursor,
    cfg: &MlmcConfig,
    horizon: usize,
    level_rng: &mut dyn RngCore,
    opts: &RunOptions,
    gap: &mut dyn FnMut(&[f64]) -> f64,
) -> Result<RunRecord> {
    check_norm(p.geometry())?;
    check_gamma(gamma, p.lipschitz())?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let g = p.geometry();
    let mut rec = Recorder::new(opts)?;
    let mut x = start_point(g, opts)?;
    let mut avg = RunningAverage::new(g.dim());
    let mut trajectory = Vec::new();
    for t in 0..horizon {
        let e_half = batch_mean(p, &x, cursor, cfg.batch())?;
        rec.charge(&e_half);
        let half = g.prox_map(&x, &scaled(&e_half.g, gamma))?;
        let e = mlmc_geometric(p, &half, cursor, cfg, level_rng)?;
        rec.charge(&e);
        let next = g.prox_map(&x, &scaled(&e.g, gamma))?;
        avg.push(&half);
        if opts.keep_trajectory {
            trajectory.push(TrajectoryStep { primary: half.to_vec(), secondary: next.to_vec() });
        }
        x = next;
        rec.maybe_record(t + 1, &avg.mean, gap);
    }
    Ok(RunRecord {
        rows: rec.rows,
        final_point: Point::from_vec_unchecked(avg.mean),
        oracle_calls: rec.oracle_calls,
        chain_steps: rec.chain_steps,
        iterations: horizon,
        trajectory,
    })
}

/// Gap callback for runs that only need the trajectory.
pub fn no_gap(_: &[f64]) -> f64 {
    f64::NAN
}
