use markov_mirror::geometry::{Geometry, MirrorMap, NormPair};
use markov_mirror::linalg::{dot, max_abs_diff, sub};
use proptest::prelude::*;

/// The four shipped setups at dimension `d` (product simplex uses two blocks).
fn setups(d: usize) -> Vec<Geometry> {
    let half = (d / 2).max(1);
    let mut out = vec![
        Geometry::boxed(vec![-1.0; d], vec![2.0; d]).unwrap(),
        Geometry::ball(vec![0.5; d], 1.5).unwrap(),
        Geometry::simplex(d).unwrap(),
    ];
    if d >= 2 {
        out.push(Geometry::product_simplex(&[half, d - half]).unwrap());
    }
    out
}

/// Maps unit-interval draws to an interior point of the set.
fn interior(g: &Geometry, u: &[f64]) -> Vec<f64> {
    let c = g.center();
    match g.mirror() {
        MirrorMap::HalfSquaredEuclidean => {
            let dir: Vec<f64> = u.iter().map(|v| 2.0 * v - 1.0).collect();
            let mut y = c.to_vec();
            for (yi, di) in y.iter_mut().zip(&dir) {
                *yi += 0.3 * di;
            }
            y
        }
        MirrorMap::NegativeEntropy => {
            let mut y = vec![0.0; g.dim()];
            for r in g.blocks() {
                let s: f64 = r.clone().map(|i| 0.05 + u[i]).sum();
                for i in r.clone() {
                    y[i] = (0.05 + u[i]) / s;
                }
            }
            y
        }
    }
}

fn unit_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, d)
}

fn signed_vec(d: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bregman_dominates_half_squared_norm(d in 2usize..7, a in unit_vec(6), b in unit_vec(6)) {
        for g in setups(d) {
            let x = interior(&g, &a[..d]);
            let y = interior(&g, &b[..d]);
            let v = g.bregman(&x, &y).unwrap();
            let n = g.norm(&sub(&x, &y));
            prop_assert!(v >= 0.5 * n * n - 1e-12, "V = {v}, ½‖x−y‖² = {}", 0.5 * n * n);
        }
    }

    #[test]
    fn prox_with_zero_step_is_identity(u in unit_vec(5)) {
        for g in setups(5) {
            let x = interior(&g, &u);
            let y = g.prox_map(&x, &[0.0; 5]).unwrap();
            prop_assert!(max_abs_diff(&x, &y) <= 1e-12);
        }
    }

    #[test]
    fn closed_form_prox_matches_generic_solver(u in unit_vec(4), xi in signed_vec(4, 3.0)) {
        for g in setups(4) {
            let x = interior(&g, &u);
            let fast = g.prox_map(&x, &xi).unwrap();
            let slow = g.prox_map_generic(&x, &xi).unwrap();
            prop_assert!(max_abs_diff(&fast, &slow) <= 1e-6, "{:?} vs {:?}", fast.to_vec(), slow);
        }
    }

    #[test]
    fn prox_is_nonexpansive(u in unit_vec(6), eta in signed_vec(6, 5.0), zeta in signed_vec(6, 5.0)) {
        for g in setups(6) {
            let x = interior(&g, &u);
            prop_assert!(g.prox_nonexpansive_check(&x, &eta, &zeta).unwrap());
        }
    }

    #[test]
    fn prox_output_is_feasible_and_optimal(u in unit_vec(5), xi in signed_vec(5, 4.0), w in unit_vec(5)) {
        for g in setups(5) {
            let x = interior(&g, &u);
            let y = g.prox_map(&x, &xi).unwrap();
            prop_assert!(g.contains(&y, 1e-12));
            // The prox point minimizes V(x, ·) + ⟨ξ, ·⟩, so no interior probe does better.
            let probe = interior(&g, &w);
            let obj = |z: &[f64]| g.bregman(&x, z).unwrap() + dot(&xi, z);
            prop_assert!(obj(&y) <= obj(&probe) + 1e-9);
        }
    }

    #[test]
    fn dual_norm_bounds_pairings(g in signed_vec(6, 10.0), z in signed_vec(6, 10.0)) {
        for geo in setups(6) {
            prop_assert!(dot(&g, &z).abs() <= geo.dual_norm(&g) * geo.norm(&z) * (1.0 + 1e-12) + 1e-12);
        }
        for p in [1.0, 1.5, 2.0] {
            let np = NormPair::new(p).unwrap();
            let m = np.dual_maximizer(&g);
            prop_assert!((np.primal(&m) - 1.0).abs() < 1e-9);
            prop_assert!((dot(&g, &m) - np.dual(&g)).abs() < 1e-9 * (1.0 + np.dual(&g)));
        }
    }
}

#[test]
fn diameters_match_closed_forms() {
    assert!((Geometry::unit_box(8).unwrap().diameter_sq() - 1.0).abs() < 1e-15);
    assert!((Geometry::ball(vec![0.0; 3], 2.0).unwrap().diameter_sq() - 2.0).abs() < 1e-15);
    for d in [2usize, 5, 50] {
        let g = Geometry::simplex(d).unwrap();
        assert!((g.diameter_sq() - (d as f64).ln()).abs() < 1e-7);
        // D² dominates V(x_c, ·) at every (floored) vertex.
        let mut v = vec![1e-9 / d as f64; d];
        v[0] = 1.0 - (d - 1) as f64 * 1e-9 / d as f64;
        let vert = g.bregman(&g.center(), &v).unwrap();
        assert!(vert <= g.diameter_sq() + 1e-12);
    }
}

#[test]
fn norm_exponent_outside_range_is_a_config_error() {
    for p in [0.5, 2.5, f64::NAN] {
        assert!(matches!(NormPair::new(p), Err(markov_mirror::Error::Config(_))));
    }
}
