//! Finite-state Markov chains: kernels, sampling cursors, stationary
//! distributions and total-variation mixing diagnostics.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default TV threshold defining the mixing time.
pub const MIXING_THRESHOLD: f64 = 0.25;

const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITER: usize = 1_000_000;
const MIXING_MAX_T: usize = 1_000_000;
/// Advances longer than this are sampled from `P^k` directly.
const SKIP_THRESHOLD: u64 = 1 << 12;
/// Entry floor of [`random_ergodic`] kernels.
pub const RANDOM_KERNEL_FLOOR: f64 = 0.01;

/// Row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    p: Matrix,
    cumulative: Vec<Vec<f64>>,
}

impl TransitionKernel {
    /// Validates nonnegativity and row sums (`1 ± 1e-12`). Ergodicity is
    /// checked separately by [`TransitionKernel::check_ergodic`], so that
    /// deterministic periodic kernels remain usable for sampling.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Input("kernel needs at least one state".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Input(format!("kernel row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Input(format!("kernel row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Input(format!("kernel row {i} sums to {s}, not 1")));
            }
        }
        let p = Matrix::from_rows(&rows);
        let cumulative = rows.iter().map(|r| cumulative_row(r)).collect();
        Ok(Self { p, cumulative })
    }

    pub fn n_states(&self) -> usize {
        self.p.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.p[(from, to)]
    }

    /// Irreducible and aperiodic iff some power is entrywise positive; a
    /// primitive `n`-state matrix has `P^k > 0` for all `k ≥ (n−1)² + 1`.
    pub fn is_ergodic(&self) -> bool {
        let n = self.n_states();
        let mut reach: Vec<Vec<bool>> =
            (0..n).map(|i| (0..n).map(|j| self.p[(i, j)] > 0.0).collect()).collect();
        let mut power = 1usize;
        let target = n * n;
        while power < target {
            reach = bool_square(&reach);
            power *= 2;
        }
        reach.iter().all(|r| r.iter().all(|&b| b))
    }

    pub fn check_ergodic(&self) -> Result<()> {
        if self.is_ergodic() {
            Ok(())
        } else {
            Err(Error::Ergodicity(format!(
                "{}-state kernel is reducible or periodic",
                self.n_states()
            )))
        }
    }

    /// `αI + (1 − α)P`.
    pub fn make_lazy(&self, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Config(format!("laziness {alpha} outside [0, 1)")));
        }
        let n = self.n_states();
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let id = if i == j { alpha } else { 0.0 };
                        id + (1.0 - alpha) * self.p[(i, j)]
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Self::new(rows)
    }

    /// `P^k` by binary exponentiation.
    pub fn power(&self, mut k: u64) -> Matrix {
        let n = self.n_states();
        let mut result = Matrix::identity(n);
        let mut base = self.p.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.matmul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }

    fn sample_row(&self, state: usize, u: f64) -> usize {
        sample_cumulative(&self.cumulative[state], u)
    }
}

fn renormalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
    row
}

fn cumulative_row(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = row
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    // Last state with positive mass absorbs rounding so that `u < 1` always lands.
    if let Some(last) = row.iter().rposition(|&v| v > 0.0) {
        for v in &mut c[last..] {
            *v = f64::INFINITY;
        }
    }
    c
}

fn sample_cumulative(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u)
}

fn bool_square(m: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = m.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).any(|k| m[i][k] && m[k][j])).collect())
        .collect()
}

/// Random kernel with every entry at least [`RANDOM_KERNEL_FLOOR`], hence
/// ergodic. Rows are `floor + (1 − n·floor)·w` with `w ~ Dirichlet(1)`.
pub fn random_ergodic(n_states: usize, seed: u64) -> Result<TransitionKernel> {
    if n_states < 2 {
        return Err(Error::Input("random kernel needs at least two states".into()));
    }
    let slack = 1.0 - RANDOM_KERNEL_FLOOR * n_states as f64;
    if slack <= 0.0 {
        return Err(Error::Input(format!(
            "cannot keep all entries ≥ {RANDOM_KERNEL_FLOOR} with {n_states} states"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n_states)
        .map(|_| {
            let w: Vec<f64> = (0..n_states).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = w.iter().sum();
            let row: Vec<f64> = w.iter().map(|x| RANDOM_KERNEL_FLOOR + slack * x / s).collect();
            renormalize(row)
        })
        .collect();
    TransitionKernel::new(rows)
}

/// Laziness applied by [`default_chain`].
pub const DEFAULT_LAZINESS: f64 = 0.6;

/// The reference 8-state chain: [`random_ergodic`] made lazy with
/// [`DEFAULT_LAZINESS`], which puts its mixing time at 3 to 6 steps.
pub fn default_chain(seed: u64) -> Result<TransitionKernel> {
    random_ergodic(8, seed)?.make_lazy(DEFAULT_LAZINESS)
}

/// Stationary distribution by power iteration from the uniform vector.
pub fn stationary(k: &TransitionKernel) -> Result<Vec<f64>> {
    k.check_ergodic()?;
    let n = k.n_states();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..STATIONARY_MAX_ITER {
        let mut next = k.matrix().vec_mul(&pi);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta <= STATIONARY_TOL {
            return Ok(pi);
        }
    }
    Err(Error::Diagnostics(format!(
        "power iteration did not converge in {STATIONARY_MAX_ITER} iterations"
    )))
}

/// Stationary distribution, mixing time and worst-start TV curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub pi: Vec<f64>,
    pub tau_mix: usize,
    /// `(t, max_z TV(P^t(z, ·), π))` for `t = 1, 2, …`.
    pub tv_curve: Vec<(usize, f64)>,
}

/// `max_z TV(row_z, π)`.
pub fn worst_tv(pt: &Matrix, pi: &[f64]) -> f64 {
    (0..pt.rows())
        .map(|z| 0.5 * pt.row(z).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max_{z, z'} TV(row_z, row_z')`, the submultiplicative distance.
pub fn worst_pair_tv(pt: &Matrix) -> f64 {
    let n = pt.rows();
    let mut m = 0.0_f64;
    for a in 0..n {
        for b in a + 1..n {
            let d = 0.5 * pt.row(a).iter().zip(pt.row(b)).map(|(x, y)| (x - y).abs()).sum::<f64>();
            m = m.max(d);
        }
    }
    m
}

/// Smallest `t` with worst-start TV at most `threshold`.
pub fn mixing_time(k: &TransitionKernel, threshold: f64) -> Result<usize> {
    Ok(diagnose_with_horizon(k, threshold, 0)?.tau_mix)
}

/// Full diagnostics; the TV curve extends to `max(2·τ_mix, 8)`.
pub fn diagnose(k: &TransitionKernel, threshold: f64) -> Result<ChainDiagnostics> {
    diagnose_with_horizon(k, threshold, 8)
}

fn diagnose_with_horizon(k: &TransitionKernel, threshold: f64, min_len: usize) -> Result<ChainDiagnostics> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("TV threshold {threshold} outside (0, 1)")));
    }
    let pi = stationary(k)?;
    let mut pt = k.matrix().clone();
    let mut curve = Vec::new();
    let mut tau = None;
    for t in 1..=MIXING_MAX_T {
        let tv = worst_tv(&pt, &pi);
        curve.push((t, tv));
        if tau.is_none() && tv <= threshold {
            tau = Some(t);
        }
        if let Some(tau) = tau {
            if t >= (2 * tau).max(min_len) {
                break;
            }
        }
        pt = pt.matmul(k.matrix());
    }
    let tau_mix = tau.ok_or_else(|| {
        Error::Diagnostics(format!("mixing time exceeds {MIXING_MAX_T} steps"))
    })?;
    Ok(ChainDiagnostics { pi, tau_mix, tv_curve: curve })
}

/// Smallest laziness on a `1e-3` grid whose lazy chain has mixing time at
/// least `target`. Returns the lazy kernel and its laziness.
pub fn lazy_for_mixing_time(k: &TransitionKernel, target: usize) -> Result<(TransitionKernel, f64)> {
    for i in 0..1000 {
        let alpha = i as f64 * 1e-3;
        let lazy = k.make_lazy(alpha)?;
        if mixing_time(&lazy, MIXING_THRESHOLD)? >= target {
            return Ok((lazy, alpha));
        }
    }
    Err(Error::Config(format!("no laziness below 1 reaches mixing time {target}")))
}

/// A single consuming trajectory through a kernel.
///
/// Every single step draws exactly one uniform from the cursor's stream, so
/// two cursors with equal seeds and equal advance schedules agree bit for bit.
#[derive(Debug, Clone)]
pub struct ChainCursor {
    kernel: Arc<TransitionKernel>,
    state: usize,
    consumed: u64,
    rng: ChaCha8Rng,
}

impl ChainCursor {
    /// Starts at a fixed state.
    pub fn at_state(kernel: Arc<TransitionKernel>, state: usize, seed: u64) -> Result<Self> {
        if state >= kernel.n_states() {
            return Err(Error::Input(format!(
                "start state {state} out of range for {} states",
                kernel.n_states()
            )));
        }
        Ok(Self { kernel, state, consumed: 0, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// Starts from a draw of `pi` (stationary start).
    pub fn stationary(kernel: Arc<TransitionKernel>, pi: &[f64], seed: u64) -> Result<Self> {
        if pi.len() != kernel.n_states() {
            return Err(Error::Input("stationary vector length mismatch".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cum = cumulative_row(pi);
        let state = sample_cumulative(&cum, rng.random::<f64>());
        Ok(Self { kernel, state, consumed: 0, rng })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Cumulative number of samples consumed (`N_t`).
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    /// One transition; returns the new state.
    pub fn step(&mut self) -> usize {
        let u = self.rng.random::<f64>();
        self.state = self.kernel.sample_row(self.state, u);
        self.consumed += 1;
        self.state
    }

    /// `steps` transitions, returning the visited states in order.
    pub fn advance(&mut self, steps: usize) -> Vec<usize> {
        (0..steps).map(|_| self.step()).collect()
    }

    /// Moves `steps` transitions ahead without reporting intermediate
    /// states. Long skips sample the endpoint from `P^steps` directly, which
    /// has the same law as stepping one by one.
    pub fn skip(&mut self, steps: u64) {
        if steps <= SKIP_THRESHOLD {
            for _ in 0..steps {
                self.step();
            }
            return;
        }
        let pk = self.kernel.power(steps);
        let cum = cumulative_row(pk.row(self.state));
        self.state = sample_cumulative(&cum, self.rng.random::<f64>());
        self.consumed += steps;
    }
}
