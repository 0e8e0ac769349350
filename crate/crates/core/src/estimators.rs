//! Gradient/operator estimators drawing samples from one shared chain cursor.

use rand::RngCore;

use crate::chain::ChainCursor;
use crate::error::{Error, Result};
use crate::problems::{MinProblem, ViProblem};

/// Levels are capped here so that `2^J·B` fits in a `u64`. The cap merges a
/// tail of probability `2^{-40}` into the last level; any practical `M` lies
/// far below it, so the truncated branch is taken either way.
pub const MAX_LEVEL: u32 = 40;

/// Noisy first-order oracle `x, z ↦ G(x, z)`.
pub trait Oracle {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], state: usize) -> Result<Vec<f64>>;
}

impl Oracle for MinProblem {
    fn dim(&self) -> usize {
        self.geometry().dim()
    }
    fn eval(&self, x: &[f64], state: usize) -> Result<Vec<f64>> {
        self.grad_oracle(x, state)
    }
}

impl Oracle for ViProblem {
    fn dim(&self) -> usize {
        self.geometry().dim()
    }
    fn eval(&self, x: &[f64], state: usize) -> Result<Vec<f64>> {
        self.op_oracle(x, state)
    }
}

/// Base batch `B` and batch limit `M` of the truncated-geometric estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlmcConfig {
    batch: u64,
    limit: u64,
}

impl MlmcConfig {
    pub fn new(batch: u64, limit: u64) -> Result<Self> {
        if batch < 1 || limit < 1 {
            return Err(Error::Config(format!("MLMC needs B ≥ 1 and M ≥ 1 (got B = {batch}, M = {limit})")));
        }
        Ok(Self { batch, limit })
    }

    pub fn batch(&self) -> u64 {
        self.batch
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// `⌊log₂ M⌋`, the deepest level that is not truncated.
    pub fn max_level(&self) -> u32 {
        63 - self.limit.leading_zeros()
    }

    /// `E[oracle calls] = B·(⌊log₂ M⌋ + 2^{−⌊log₂ M⌋})`: each untruncated
    /// level contributes `2^{-j}·2^j·B`, the truncation mass contributes `B`.
    pub fn expected_oracle_calls(&self) -> f64 {
        let k = self.max_level() as i32;
        self.batch as f64 * (k as f64 + 2f64.powi(-k))
    }
}

/// One gradient/operator estimate with its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub g: Vec<f64>,
    pub oracle_calls: u64,
    pub chain_steps: u64,
    /// Sampled level `J` (MLMC only).
    pub level: Option<u32>,
}

/// `J ~ Geom(1/2)` on `{1, 2, …}`, i.e. `P{J = i} = 2^{−i}`.
pub fn draw_level<R: RngCore + ?Sized>(rng: &mut R) -> u32 {
    (rng.next_u64().trailing_zeros() + 1).min(MAX_LEVEL)
}

/// One sample: advance the cursor once and query the oracle there.
pub fn single_sample<O: Oracle + ?Sized>(oracle: &O, x: &[f64], cursor: &mut ChainCursor) -> Result<Estimate> {
    let z = cursor.step();
    Ok(Estimate { g: oracle.eval(x, z)?, oracle_calls: 1, chain_steps: 1, level: None })
}

/// Mean of `B` consecutive samples.
pub fn batch_mean<O: Oracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    cursor: &mut ChainCursor,
    batch: u64,
) -> Result<Estimate> {
    if batch < 1 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut sum = vec![0.0; oracle.dim()];
    for _ in 0..batch {
        let z = cursor.step();
        add_into(&mut sum, &oracle.eval(x, z)?);
    }
    let inv = 1.0 / batch as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    Ok(Estimate { g: sum, oracle_calls: batch, chain_steps: batch, level: None })
}

/// Truncated-geometric multilevel estimator.
///
/// Draws `J`, advances the cursor by `2^J·B` samples, and returns
/// `g₀ + 2^J (g_J − g_{J−1})` where `g_j` is the mean of the first `2^j·B`
/// oracle outputs, or just `g₀` when `2^J > M`. In the truncated case only
/// the first `B` samples are evaluated; the remaining chain steps are still
/// consumed so the sample index advances by exactly `2^J·B`.
pub fn mlmc_geometric<O: Oracle + ?Sized, R: RngCore + ?Sized>(
    oracle: &O,
    x: &[f64],
    cursor: &mut ChainCursor,
    cfg: &MlmcConfig,
    level_rng: &mut R,
) -> Result<Estimate> {
    let level = draw_level(level_rng);
    mlmc_at_level(oracle, x, cursor, cfg, level)
}

/// [`mlmc_geometric`] with the level supplied by the caller.
pub fn mlmc_at_level<O: Oracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    cursor: &mut ChainCursor,
    cfg: &MlmcConfig,
    level: u32,
) -> Result<Estimate> {
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(Error::Input(format!("level {level} outside [1, {MAX_LEVEL}]")));
    }
    let b = cfg.batch;
    let steps = (1u64 << level) * b;
    let d = oracle.dim();

    if level > cfg.max_level() {
        let mut est = batch_mean(oracle, x, cursor, b)?;
        cursor.skip(steps - b);
        est.chain_steps = steps;
        est.level = Some(level);
        return Ok(est);
    }

    // Running sum, snapshotted at the prefix lengths B, 2B, …, 2^J·B.
    let mut sum = vec![0.0; d];
    let mut g0 = Vec::new();
    let mut g_prev = Vec::new();
    let mut next_mark = b;
    let mut j = 0u32;
    for count in 1..=steps {
        let z = cursor.step();
        add_into(&mut sum, &oracle.eval(x, z)?);
        if count == next_mark {
            let mean: Vec<f64> = sum.iter().map(|v| v / count as f64).collect();
            if j == 0 {
                g0 = mean.clone();
            }
            if j + 1 == level {
                g_prev = mean;
            } else if j == level {
                let scale = (1u64 << level) as f64;
                let g = g0
                    .iter()
                    .zip(&mean)
                    .zip(&g_prev)
                    .map(|((a, hi), lo)| a + scale * (hi - lo))
                    .collect();
                return Ok(Estimate { g, oracle_calls: steps, chain_steps: steps, level: Some(level) });
            }
            j += 1;
            next_mark *= 2;
        }
    }
    unreachable!("the final prefix mark equals the number of steps")
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::TransitionKernel;
    use crate::geometry::Geometry;
    use crate::linalg::Matrix;
    use std::sync::Arc;

    /// `G(x, z) = x + (z as f64)` on one coordinate, with distinct values per state.
    struct StateEcho;
    impl Oracle for StateEcho {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64], state: usize) -> Result<Vec<f64>> {
            Ok(vec![x[0] + state as f64])
        }
    }

    fn counter_cursor() -> ChainCursor {
        // Deterministic 3-cycle: 0 → 1 → 2 → 0.
        let k = TransitionKernel::new(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        ChainCursor::at_state(Arc::new(k), 0, 0).unwrap()
    }

    #[test]
    fn level_one_returns_second_sample() {
        // B = 1, J = 1: g = s₁ + 2((s₁ + s₂)/2 − s₁) = s₂.
        let cfg = MlmcConfig::new(1, 8).unwrap();
        let mut c = counter_cursor();
        let e = mlmc_at_level(&StateEcho, &[0.0], &mut c, &cfg, 1).unwrap();
        assert_eq!(e.g, vec![2.0]);
        assert_eq!((e.oracle_calls, e.chain_steps), (2, 2));
    }

    #[test]
    fn limit_one_always_truncates_to_batch_mean() {
        let cfg = MlmcConfig::new(3, 1).unwrap();
        let mut a = counter_cursor();
        let mut b = counter_cursor();
        for level in 1..6 {
            let e = mlmc_at_level(&StateEcho, &[0.5], &mut a, &cfg, level).unwrap();
            let want = batch_mean(&StateEcho, &[0.5], &mut b, 3).unwrap();
            b.skip((1u64 << level) * 3 - 3);
            assert_eq!(e.g, want.g);
            assert_eq!(e.oracle_calls, 3);
            assert_eq!(e.chain_steps, (1u64 << level) * 3);
            assert_eq!(a.consumed(), b.consumed());
        }
    }

    #[test]
    fn level_formula_matches_prefix_means() {
        let cfg = MlmcConfig::new(2, 64).unwrap();
        let mut c = counter_cursor();
        let e = mlmc_at_level(&StateEcho, &[0.0], &mut c, &cfg, 3).unwrap();
        // Samples along 0→1→2→0…: 1, 2, 0, 1, 2, 0, …; 16 of them.
        let s: Vec<f64> = (1..=16).map(|i| (i % 3) as f64).collect();
        let mean = |n: usize| s[..n].iter().sum::<f64>() / n as f64;
        let want = mean(2) + 8.0 * (mean(16) - mean(8));
        assert!((e.g[0] - want).abs() < 1e-14);
    }

    #[test]
    fn batch_of_one_is_single_sample() {
        let mut a = counter_cursor();
        let mut b = counter_cursor();
        let x = [0.25];
        assert_eq!(
            batch_mean(&StateEcho, &x, &mut a, 1).unwrap(),
            single_sample(&StateEcho, &x, &mut b).unwrap()
        );
    }

    #[test]
    fn deterministic_problem_estimates_exact_gradient() {
        let g = Geometry::unit_box(2).unwrap();
        let p = MinProblem::new(
            g,
            Matrix::identity(2),
            vec![0.1, 0.2],
            vec![vec![0.0; 2]; 3],
            vec![1.0 / 3.0; 3],
            None,
        )
        .unwrap();
        let x = [0.4, 0.7];
        let truth = p.grad(&x);
        let mut c = counter_cursor();
        assert_eq!(single_sample(&p, &x, &mut c).unwrap().g, truth);
        for bsz in [1, 4, 7] {
            let e = batch_mean(&p, &x, &mut c, bsz).unwrap();
            assert!(crate::linalg::max_abs_diff(&e.g, &truth) < 1e-15);
        }
        let n0 = c.consumed();
        single_sample(&p, &x, &mut c).unwrap();
        single_sample(&p, &x, &mut c).unwrap();
        assert_eq!(c.consumed(), n0 + 2);
    }

    #[test]
    fn config_validation_and_levels() {
        assert!(MlmcConfig::new(0, 4).is_err());
        assert!(MlmcConfig::new(1, 0).is_err());
        assert_eq!(MlmcConfig::new(1, 1).unwrap().max_level(), 0);
        assert_eq!(MlmcConfig::new(1, 64).unwrap().max_level(), 6);
        assert_eq!(MlmcConfig::new(1, 100).unwrap().max_level(), 6);
        let e = MlmcConfig::new(2, 64).unwrap().expected_oracle_calls();
        assert!((e - 2.0 * (6.0 + 1.0 / 64.0)).abs() < 1e-15);
    }
}
