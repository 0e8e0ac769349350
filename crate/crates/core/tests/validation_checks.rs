use markov_mirror::chain::{default_chain, stationary, TransitionKernel};
use markov_mirror::geometry::Geometry;
use markov_mirror::linalg::Matrix;
use markov_mirror::problems::{
    make_vi_instance, matching_pennies, zero_mean_shifts, MinProblem, ViGeometryKind, ViSpec,
};
use markov_mirror::validation::*;
use markov_mirror::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `max_u ⟨F(u), x − u⟩` over a `step`-grid of `Δ₂ × Δ₂`.
fn grid_err_vi(p: &markov_mirror::problems::ViProblem, x: &[f64], step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let a = i as f64 * step;
        for j in 0..=n {
            let b = j as f64 * step;
            let u = [a, 1.0 - a, b, 1.0 - b];
            best = best.max(vi_probe_value(p, x, &u));
        }
    }
    best
}

#[test]
fn err_vi_matches_grid_brute_force() {
    let p = matching_pennies(2, 0.0, &[1.0], 0).unwrap();
    for x in [[1.0, 0.0, 1.0, 0.0], [0.3, 0.7, 0.8, 0.2], [0.5, 0.5, 0.5, 0.5]] {
        let exact = err_vi(&p, &x).unwrap();
        let grid = grid_err_vi(&p, &x, 1e-3);
        assert!((exact - grid.max(0.0)).abs() <= 2e-3, "{exact} vs {grid}");
    }
    for seed in 0..5 {
        let spec = ViSpec { rows: 2, cols: 2, geometry: ViGeometryKind::Simplexes, noise: 0.0, seed };
        let p = make_vi_instance(&spec, &[1.0]).unwrap();
        let x = [0.9, 0.1, 0.25, 0.75];
        let exact = err_vi(&p, &x).unwrap();
        let grid = grid_err_vi(&p, &x, 1e-3);
        assert!((exact - grid.max(0.0)).abs() <= 2e-3, "seed {seed}: {exact} vs {grid}");
    }
}

#[test]
fn err_vi_vanishes_at_generated_solutions() {
    for seed in 0..6 {
        for geometry in [ViGeometryKind::Simplexes, ViGeometryKind::Box] {
            let spec = ViSpec { rows: 3, cols: 5, geometry, noise: 0.0, seed };
            let p = make_vi_instance(&spec, &[1.0]).unwrap();
            assert!(err_vi(&p, p.x_star()).unwrap() <= 1e-8);
        }
    }
    let p = matching_pennies(4, 0.0, &[1.0], 0).unwrap();
    assert!(err_vi(&p, p.x_star()).unwrap() <= 1e-12);
    let w = weak_vi_gap(&p, &[p.x_star().to_vec(), p.x_star().to_vec()], &vertices(p.geometry()).unwrap()).unwrap();
    assert!(w.per_probe.iter().all(|v| *v <= 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn err_vi_dominates_every_probe(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, e in 0.0..1.0f64, seed in 0u64..20) {
        let spec = ViSpec { rows: 2, cols: 2, geometry: ViGeometryKind::Simplexes, noise: 0.0, seed };
        let p = make_vi_instance(&spec, &[1.0]).unwrap();
        let x = [a, 1.0 - a, b, 1.0 - b];
        let u = vec![c, 1.0 - c, e, 1.0 - e];
        let full = err_vi(&p, &x).unwrap();
        prop_assert!(full >= vi_probe_value(&p, &x, &u) - 1e-12);
        let w = weak_vi_gap(&p, &[x.to_vec()], &[u]).unwrap();
        prop_assert!(full >= w.max - 1e-12);
    }

    #[test]
    fn subopt_gap_is_direct_difference(x in prop::collection::vec(0.0..1.0f64, 3)) {
        let g = Geometry::unit_box(3).unwrap();
        let a = Matrix::from_rows(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.0], vec![0.0, 0.0, 0.5]]);
        let target = [0.4, 0.6, 0.5];
        let b = a.mul_vec(&target);
        let x_star = Some(g.point(target.to_vec()).unwrap());
        let p = MinProblem::new(g, a, b, vec![vec![0.0; 3]], vec![1.0], x_star).unwrap();
        let direct = p.value(&x) - p.value(&target);
        let gap = subopt_gap(&p, &x);
        prop_assert!(gap >= 0.0);
        prop_assert!((gap - direct).abs() <= 1e-12);
    }
}

fn lemma1_cfg(trials: usize) -> Lemma1Config {
    Lemma1Config { n_grid: vec![16, 64, 256, 1024], trials, replications: 20, seed: 5, tau_sweep: false }
}

#[test]
fn lemma1_iid_chain_matches_classical_variance() {
    let pi = vec![0.1, 0.2, 0.3, 0.4];
    let k = TransitionKernel::new(vec![pi.clone(); 4]).unwrap();
    let g = Geometry::unit_box(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = zero_mean_shifts(&g, &pi, 1.0, &mut rng).unwrap();
    let sigma_eff: f64 = noise.iter().zip(&pi).map(|(v, p)| p * v.iter().map(|x| x * x).sum::<f64>()).sum();
    let rep = lemma1_scaling(&k, &noise, &g, &lemma1_cfg(4000)).unwrap();
    for c in &rep.base.cells {
        let want = sigma_eff / c.params[0];
        assert!((c.value - want).abs() <= 3.0 * c.se, "N = {}: {} vs {want} (se {})", c.params[0], c.value, c.se);
    }
}

#[test]
fn lemma1_trivial_and_error_cases() {
    let single = TransitionKernel::new(vec![vec![1.0]]).unwrap();
    let g = Geometry::unit_box(2).unwrap();
    let rep = lemma1_scaling(&single, &[vec![0.0, 0.0]], &g, &lemma1_cfg(10)).unwrap();
    assert!(rep.base.cells.iter().all(|c| c.value == 0.0 && c.se == 0.0));
    assert!(rep.base.exponent.is_none());

    let k = default_chain(0).unwrap();
    let biased = vec![vec![1.0, 0.0]; 8];
    assert!(matches!(lemma1_scaling(&k, &biased, &g, &lemma1_cfg(10)), Err(Error::Input(_))));
    let zero = vec![vec![0.0, 0.0]; 8];
    assert!(matches!(lemma1_scaling(&k, &zero, &g, &lemma1_cfg(1)), Err(Error::Statistics(_))));
}

#[test]
fn lemma1_slope_on_reference_chain() {
    let k = default_chain(1).unwrap();
    let pi = stationary(&k).unwrap();
    let g = Geometry::simplex(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = zero_mean_shifts(&g, &pi, 1.0, &mut rng).unwrap();
    let rep = lemma1_scaling(&k, &noise, &g, &lemma1_cfg(1000)).unwrap();
    let slope = rep.base.exponent.unwrap().slope;
    assert!((-1.2..=-0.8).contains(&slope), "slope {slope}");
}

fn small_lemma2(trials: usize) -> Lemma2Config {
    Lemma2Config {
        unbiased_trials: trials,
        var_trials: trials,
        var_limits: vec![4, 16],
        tau_sweep: false,
        ..Default::default()
    }
}

fn lemma2_problem(noise: f64) -> (TransitionKernel, MinProblem) {
    let k = default_chain(0).unwrap();
    let pi = stationary(&k).unwrap();
    let spec = markov_mirror::problems::MinSpec::new(4, markov_mirror::problems::MinGeometryKind::Box, noise, 2);
    (k, markov_mirror::problems::make_min_instance(&spec, &pi).unwrap())
}

#[test]
fn lemma2_noiseless_cells_vanish() {
    let (k, p) = lemma2_problem(0.0);
    let rep = lemma2_check(&p, &p.geometry().center(), &k, &small_lemma2(200)).unwrap();
    assert!(rep.bias.cells.iter().all(|c| c.value == 0.0));
    assert!(rep.variance.cells.iter().all(|c| c.value <= 1e-24));
    // Only rounding differences remain between the two estimators.
    assert!(rep.unbiased.mean_diff.iter().all(|m| m.abs() <= 1e-12));
}

#[test]
fn lemma2_single_trial_is_a_statistics_error() {
    let (k, p) = lemma2_problem(1.0);
    let r = lemma2_check(&p, &p.geometry().center(), &k, &small_lemma2(1));
    assert!(matches!(r, Err(Error::Statistics(_))));
}

#[test]
fn lemma2_variance_is_monotone_in_batch_and_estimator_is_unbiased() {
    let (k, p) = lemma2_problem(1.0);
    let rep = lemma2_check(&p, &p.geometry().center(), &k, &small_lemma2(4000)).unwrap();
    assert!(rep.variance_monotone_in_b);
    assert!(rep.unbiased.max_z <= 4.0, "z = {}", rep.unbiased.max_z);
    // Bias decays with M.
    let v: Vec<f64> = rep.bias.cells.iter().map(|c| c.value).collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn rate_fit_of_noiseless_batched_mamd_is_accelerated() {
    use markov_mirror::chain::{mixing_time, ChainCursor, MIXING_THRESHOLD};
    use markov_mirror::problems::{make_min_instance, MinGeometryKind, MinSpec};
    use markov_mirror::solvers::{corollary2_schedule, mamd_batched, no_gap, RunOptions};
    use std::sync::Arc;

    let k = Arc::new(default_chain(0).unwrap());
    let pi = stationary(&k).unwrap();
    let tau = mixing_time(&k, MIXING_THRESHOLD).unwrap();
    let p = make_min_instance(&MinSpec::new(20, MinGeometryKind::Box, 0.0, 1), &pi).unwrap();
    let budgets: Vec<usize> = (6..=12).map(|e| 1 << e).collect();
    let mut vals = Vec::new();
    for &t in &budgets {
        let (s, cfg) = corollary2_schedule(p.lipschitz(), p.geometry().diameter(), 0.0, tau, t).unwrap();
        let mut cur = ChainCursor::stationary(k.clone(), &pi, 1).unwrap();
        let mut lr = ChaCha8Rng::seed_from_u64(1);
        let r = mamd_batched(&p, &s, &mut cur, &cfg, t, &mut lr, &RunOptions::default(), &mut no_gap).unwrap();
        vals.push(vec![subopt_gap(&p, &r.final_point)]);
    }
    let report = GapReport::new("subopt", budgets.iter().map(|&t| t as f64).collect(), vals).unwrap();
    let slope = rate_fit(&report).unwrap().slope;
    assert!((-2.3..=-1.7).contains(&slope), "slope {slope}");
}
