use std::sync::Arc;

use markov_mirror::chain::{
    default_chain, diagnose, mixing_time, random_ergodic, stationary, worst_pair_tv, worst_tv, ChainCursor,
    TransitionKernel, MIXING_THRESHOLD, RANDOM_KERNEL_FLOOR,
};
use markov_mirror::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn to_na(k: &TransitionKernel) -> DMatrix<f64> {
    let n = k.n_states();
    DMatrix::from_fn(n, n, |i, j| k.prob(i, j))
}

/// π from the linear system (Pᵀ − I)π = 0 with one equation replaced by Σπ = 1.
fn lu_stationary(k: &TransitionKernel) -> Vec<f64> {
    let n = k.n_states();
    let mut a = to_na(k).transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).unwrap().iter().copied().collect()
}

/// Mixing time by explicit repeated multiplication in nalgebra.
fn power_mixing_time(k: &TransitionKernel, pi: &[f64], threshold: f64) -> usize {
    let p = to_na(k);
    let n = k.n_states();
    let mut pt = p.clone();
    for t in 1..100_000 {
        let worst = (0..n)
            .map(|i| 0.5 * (0..n).map(|j| (pt[(i, j)] - pi[j]).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if worst <= threshold {
            return t;
        }
        pt = &pt * &p;
    }
    panic!("no mixing");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stationary_matches_linear_solve(n in 2usize..12, seed in any::<u64>()) {
        let k = random_ergodic(n, seed).unwrap();
        let pi = stationary(&k).unwrap();
        let oracle = lu_stationary(&k);
        for (a, b) in pi.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn mixing_time_matches_matrix_powers(n in 2usize..9, seed in any::<u64>(), alpha in 0.0..0.95f64) {
        let k = random_ergodic(n, seed).unwrap().make_lazy(alpha).unwrap();
        let pi = lu_stationary(&k);
        prop_assert_eq!(mixing_time(&k, MIXING_THRESHOLD).unwrap(), power_mixing_time(&k, &pi, MIXING_THRESHOLD));
    }

    #[test]
    fn doeblin_bound_holds(n in 2usize..9, seed in any::<u64>(), t in 1u64..20) {
        // Every entry ≥ ε gives TV(t) ≤ (1 − nε)^t.
        let k = random_ergodic(n, seed).unwrap();
        let pi = stationary(&k).unwrap();
        let rate = 1.0 - n as f64 * RANDOM_KERNEL_FLOOR;
        prop_assert!(worst_tv(&k.power(t), &pi) <= rate.powi(t as i32) + 1e-12);
    }

    #[test]
    fn tv_curve_is_nonincreasing_and_submultiplicative(seed in any::<u64>(), alpha in 0.0..0.9f64) {
        let k = random_ergodic(6, seed).unwrap().make_lazy(alpha).unwrap();
        let diag = diagnose(&k, MIXING_THRESHOLD).unwrap();
        for w in diag.tv_curve.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-12);
        }
        let pi = &diag.pi;
        for t in 1..6u64 {
            let dbar = worst_pair_tv(&k.power(t));
            prop_assert!(worst_tv(&k.power(2 * t), pi) <= dbar * dbar + 1e-12);
        }
    }

    #[test]
    fn laziness_keeps_stationary_law(seed in any::<u64>(), alpha in 0.0..0.99f64) {
        let k = random_ergodic(5, seed).unwrap();
        let lazy = k.make_lazy(alpha).unwrap();
        let a = stationary(&k).unwrap();
        let b = stationary(&lazy).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn transition_frequencies_match_kernel() {
    // Transitions out of a fixed state are i.i.d. draws from its row, so
    // binomial standard errors apply exactly.
    let k = Arc::new(random_ergodic(5, 11).unwrap());
    let mut c = ChainCursor::at_state(k.clone(), 0, 3).unwrap();
    let n = k.n_states();
    let mut counts = vec![vec![0u64; n]; n];
    let mut prev = c.state();
    for _ in 0..400_000 {
        let s = c.step();
        counts[prev][s] += 1;
        prev = s;
    }
    for (i, row) in counts.iter().enumerate() {
        let visits: u64 = row.iter().sum();
        for (j, &c) in row.iter().enumerate() {
            let p = k.prob(i, j);
            let f = c as f64 / visits as f64;
            let se = (p * (1.0 - p) / visits as f64).sqrt();
            assert!((f - p).abs() <= 4.0 * se + 1e-12, "P[{i}][{j}] = {p}, empirical {f}");
        }
    }
}

#[test]
fn long_skip_has_the_law_of_the_matrix_power() {
    let k = Arc::new(default_chain(2).unwrap());
    let steps = 5000u64;
    let row = k.power(steps).row(1).to_vec();
    let trials = 20_000;
    let mut hist = vec![0u64; k.n_states()];
    for s in 0..trials {
        let mut c = ChainCursor::at_state(k.clone(), 1, s).unwrap();
        c.skip(steps);
        assert_eq!(c.consumed(), steps);
        hist[c.state()] += 1;
    }
    for (h, p) in hist.iter().zip(&row) {
        let f = *h as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * se, "{f} vs {p}");
    }
}

#[test]
fn equal_seeds_give_equal_paths() {
    let k = Arc::new(default_chain(0).unwrap());
    let mut a = ChainCursor::at_state(k.clone(), 3, 99).unwrap();
    let mut b = ChainCursor::at_state(k, 3, 99).unwrap();
    assert_eq!(a.advance(1000), b.advance(1000));
}

#[test]
fn reference_chain_mixes_in_three_to_six_steps() {
    for seed in 0..4 {
        let t = mixing_time(&default_chain(seed).unwrap(), MIXING_THRESHOLD).unwrap();
        assert!((3..=6).contains(&t), "seed {seed}: τ = {t}");
    }
}

#[test]
fn kernel_validation_errors() {
    assert!(matches!(TransitionKernel::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]]), Err(Error::Input(_))));
    let periodic = TransitionKernel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert!(matches!(stationary(&periodic), Err(Error::Ergodicity(_))));
    assert!(matches!(diagnose(&periodic, MIXING_THRESHOLD), Err(Error::Ergodicity(_))));
    let reducible = TransitionKernel::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
    assert!(!reducible.is_ergodic());
    assert!(matches!(periodic.make_lazy(1.0), Err(Error::Config(_))));
}
