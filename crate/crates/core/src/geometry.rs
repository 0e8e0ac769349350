//! Norm pairs, Bregman divergences and prox mappings over compact feasible sets.
//!
//! Two setups are supported: the half-squared Euclidean mirror map on boxes and
//! balls (`p = 2`), and negative entropy on a simplex or a product of simplexes
//! (`p = 1`). For products the primal norm is `sqrt(Σ_b ‖x_b‖_1²)` and the dual
//! norm is `sqrt(Σ_b ‖g_b‖_∞²)`; with a single block these reduce to `ℓ1`/`ℓ∞`.

use std::ops::{Deref, Range};

use crate::error::{check_dim, check_finite, Error, Result};

/// Floor used to keep simplex iterates away from the boundary. Each simplex
/// block of size `d` keeps every coordinate at least `SIMPLEX_FLOOR / d`.
pub const SIMPLEX_FLOOR: f64 = 1e-9;

/// Tolerance on the KKT residual of the generic prox solver.
pub const GENERIC_PROX_TOL: f64 = 1e-10;

/// Iteration cap of the generic prox solver.
pub const GENERIC_PROX_MAX_ITER: usize = 1_000_000;

/// Primal/dual exponent pair with `1/p + 1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormPair {
    p: f64,
    q: f64,
}

impl NormPair {
    /// Rejects exponents outside `[1, 2]`.
    pub fn new(p: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::Config(format!("norm exponent p = {p} outside [1, 2]")));
        }
        let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
        Ok(Self { p, q })
    }

    pub fn euclidean() -> Self {
        Self { p: 2.0, q: 2.0 }
    }

    pub fn l1() -> Self {
        Self { p: 1.0, q: f64::INFINITY }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn primal(&self, x: &[f64]) -> f64 {
        lp_norm(x, self.p)
    }

    pub fn dual(&self, g: &[f64]) -> f64 {
        lp_norm(g, self.q)
    }

    /// The unit-`p`-norm vector attaining `⟨g, z⟩ = ‖g‖_q` (Hölder equality case).
    pub fn dual_maximizer(&self, g: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; g.len()];
        if g.iter().all(|&x| x == 0.0) {
            return z;
        }
        if self.q.is_infinite() {
            let (i, _) = g
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bi, bv), (i, &x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) });
            z[i] = g[i].signum();
            return z;
        }
        if self.p == 1.0 {
            unreachable!("q is infinite when p = 1");
        }
        let gq = self.dual(g);
        for (zi, &gi) in z.iter_mut().zip(g) {
            *zi = gi.signum() * (gi.abs() / gq).powf(self.q - 1.0);
        }
        z
    }
}

fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Compact convex feasible set.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex { dim: usize },
    ProductSimplex { blocks: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MirrorMap {
    /// `ω(x) = ½‖x‖₂²`
    HalfSquaredEuclidean,
    /// `ω(x) = Σ xᵢ ln xᵢ`
    NegativeEntropy,
}

/// A feasible set together with its mirror map and norm pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    set: FeasibleSet,
    mirror: MirrorMap,
    norm: NormPair,
    dim: usize,
    blocks: Vec<Range<usize>>,
}

/// A feasible iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    /// Wraps coordinates without a membership check. Use [`Geometry::point`]
    /// for validated construction.
    pub fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    /// `w·a + (1 − w)·b`; stays feasible for `w ∈ [0, 1]` on convex sets.
    pub fn blend(a: &Point, w: f64, b: &Point) -> Point {
        let coords = a.coords.iter().zip(&b.coords).map(|(x, y)| w * x + (1.0 - w) * y).collect();
        Point { coords }
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.coords
    }
}

impl Geometry {
    /// Box `[lo, hi]` with the Euclidean setup.
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim("box bounds", lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::Input("box must have positive dimension".into()));
        }
        check_finite("box lo", &lo)?;
        check_finite("box hi", &hi)?;
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::Input("box lower bound exceeds upper bound".into()));
        }
        let dim = lo.len();
        Ok(Self {
            set: FeasibleSet::Box { lo, hi },
            mirror: MirrorMap::HalfSquaredEuclidean,
            norm: NormPair::euclidean(),
            dim,
            blocks: std::iter::once(0..dim).collect(),
        })
    }

    /// `[0, 1]^d`
    pub fn unit_box(dim: usize) -> Result<Self> {
        Self::boxed(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Input("ball must have positive dimension".into()));
        }
        check_finite("ball center", &center)?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Input(format!("ball radius {radius} must be positive")));
        }
        let dim = center.len();
        Ok(Self {
            set: FeasibleSet::Ball { center, radius },
            mirror: MirrorMap::HalfSquaredEuclidean,
            norm: NormPair::euclidean(),
            dim,
            blocks: std::iter::once(0..dim).collect(),
        })
    }

    /// Probability simplex `Δ_d` with the entropy setup.
    pub fn simplex(dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::Input("simplex must have positive dimension".into()));
        }
        Ok(Self {
            set: FeasibleSet::Simplex { dim },
            mirror: MirrorMap::NegativeEntropy,
            norm: NormPair::l1(),
            dim,
            blocks: std::iter::once(0..dim).collect(),
        })
    }

    /// Product `Δ_{d₁} × … × Δ_{d_k}` with the summed entropy mirror map.
    pub fn product_simplex(blocks: &[usize]) -> Result<Self> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(Error::Input("product simplex needs nonempty blocks".into()));
        }
        let mut ranges = Vec::with_capacity(blocks.len());
        let mut start = 0;
        for &b in blocks {
            ranges.push(start..start + b);
            start += b;
        }
        Ok(Self {
            set: FeasibleSet::ProductSimplex { blocks: blocks.to_vec() },
            mirror: MirrorMap::NegativeEntropy,
            norm: NormPair::l1(),
            dim: start,
            blocks: ranges,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn mirror(&self) -> MirrorMap {
        self.mirror
    }

    pub fn norm_pair(&self) -> NormPair {
        self.norm
    }

    /// Coordinate ranges of the independent blocks (a single range unless the
    /// set is a product of simplexes).
    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    fn is_entropy(&self) -> bool {
        self.mirror == MirrorMap::NegativeEntropy
    }

    fn floor_for(block_len: usize) -> f64 {
        SIMPLEX_FLOOR / block_len as f64
    }

    /// Primal norm `‖x‖` of the setup.
    pub fn norm(&self, x: &[f64]) -> f64 {
        self.blockwise(x, |b| self.norm.primal(b))
    }

    /// Dual norm `‖g‖_*` of the setup.
    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        self.blockwise(g, |b| self.norm.dual(b))
    }

    fn blockwise(&self, v: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
        if self.blocks.len() == 1 {
            return f(v);
        }
        self.blocks.iter().map(|r| f(&v[r.clone()]).powi(2)).sum::<f64>().sqrt()
    }

    /// Minimizer of the mirror map on the set: box/ball center, uniform point.
    pub fn center(&self) -> Point {
        let coords = match &self.set {
            FeasibleSet::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            FeasibleSet::Ball { center, .. } => center.clone(),
            FeasibleSet::Simplex { .. } | FeasibleSet::ProductSimplex { .. } => {
                let mut c = vec![0.0; self.dim];
                for r in &self.blocks {
                    let w = 1.0 / r.len() as f64;
                    c[r.clone()].iter_mut().for_each(|x| *x = w);
                }
                c
            }
        };
        Point { coords }
    }

    /// Membership test with absolute tolerance `tol` (simplex sums use
    /// `1e-12`, coordinates must clear the floor up to `tol`).
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.set {
            FeasibleSet::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
            }
            FeasibleSet::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
                d <= radius + tol
            }
            FeasibleSet::Simplex { .. } | FeasibleSet::ProductSimplex { .. } => {
                self.blocks.iter().all(|r| {
                    let b = &x[r.clone()];
                    let floor = Self::floor_for(r.len());
                    let s: f64 = b.iter().sum();
                    (s - 1.0).abs() <= 1e-12 && b.iter().all(|v| *v >= floor - tol)
                })
            }
        }
    }

    /// Validated point construction (tolerance `1e-10`).
    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        check_dim("point", self.dim, coords.len())?;
        check_finite("point", &coords)?;
        if !self.contains(&coords, 1e-10) {
            return Err(Error::Input("point lies outside the feasible set".into()));
        }
        Ok(Point { coords })
    }

    fn check_interior(&self, x: &[f64]) -> Result<()> {
        if !self.is_entropy() {
            return Ok(());
        }
        for r in &self.blocks {
            let floor = Self::floor_for(r.len());
            if let Some(i) = x[r.clone()].iter().position(|&v| !(v >= floor * (1.0 - 1e-6))) {
                return Err(Error::Domain(format!(
                    "entropy gradient undefined: coordinate {} = {} below floor {floor:e}",
                    r.start + i,
                    x[r.start + i]
                )));
            }
        }
        Ok(())
    }

    /// Mirror map value `ω(x)`.
    pub fn mirror_value(&self, x: &[f64]) -> f64 {
        match self.mirror {
            MirrorMap::HalfSquaredEuclidean => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            MirrorMap::NegativeEntropy => x.iter().map(|&v| xlogx(v)).sum(),
        }
    }

    /// `V(x, y) = ω(y) − ω(x) − ⟨ω'(x), y − x⟩`.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim("bregman x", self.dim, x.len())?;
        check_dim("bregman y", self.dim, y.len())?;
        check_finite("bregman x", x)?;
        check_finite("bregman y", y)?;
        self.check_interior(x)?;
        let v = match self.mirror {
            MirrorMap::HalfSquaredEuclidean => {
                0.5 * x.iter().zip(y).map(|(a, b)| (b - a).powi(2)).sum::<f64>()
            }
            // Generalized KL; equals KL(y‖x) when both sum to one blockwise.
            MirrorMap::NegativeEntropy => x
                .iter()
                .zip(y)
                .map(|(&a, &b)| {
                    if b <= 0.0 {
                        a
                    } else {
                        b * (b / a).ln() - b + a
                    }
                })
                .sum(),
        };
        Ok(v.max(0.0))
    }

    /// `P_x(ξ) = argmin_{y ∈ X} { V(x, y) + ⟨ξ, y⟩ }` in closed form.
    pub fn prox_map(&self, x: &[f64], xi: &[f64]) -> Result<Point> {
        check_dim("prox x", self.dim, x.len())?;
        check_dim("prox xi", self.dim, xi.len())?;
        check_finite("prox xi", xi)?;
        check_finite("prox x", x)?;
        self.check_interior(x)?;
        let mut y: Vec<f64> = x.iter().zip(xi).map(|(a, g)| a - g).collect();
        match &self.set {
            FeasibleSet::Box { lo, hi } => {
                for ((v, l), h) in y.iter_mut().zip(lo).zip(hi) {
                    *v = v.clamp(*l, *h);
                }
            }
            FeasibleSet::Ball { center, radius } => project_ball(&mut y, center, *radius),
            FeasibleSet::Simplex { .. } | FeasibleSet::ProductSimplex { .. } => {
                for r in &self.blocks {
                    entropy_step(&x[r.clone()], &xi[r.clone()], &mut y[r.clone()]);
                    apply_floor(&mut y[r.clone()]);
                }
            }
        }
        Ok(Point { coords: y })
    }

    /// Euclidean projection onto the set (onto the floored simplex for entropy setups).
    pub fn project(&self, v: &mut [f64]) {
        match &self.set {
            FeasibleSet::Box { lo, hi } => {
                for ((x, l), h) in v.iter_mut().zip(lo).zip(hi) {
                    *x = x.clamp(*l, *h);
                }
            }
            FeasibleSet::Ball { center, radius } => project_ball(v, center, *radius),
            FeasibleSet::Simplex { .. } | FeasibleSet::ProductSimplex { .. } => {
                for r in &self.blocks {
                    let floor = Self::floor_for(r.len());
                    project_floored_simplex(&mut v[r.clone()], floor);
                }
            }
        }
    }

    /// Prox mapping by projected gradient on `y ↦ V(x, y) + ⟨ξ, y⟩`. Used to
    /// certify the closed forms; stops when the KKT residual
    /// `‖y − Π(y − ∇φ(y))‖_∞` drops to [`GENERIC_PROX_TOL`].
    pub fn prox_map_generic(&self, x: &[f64], xi: &[f64]) -> Result<Point> {
        check_dim("prox x", self.dim, x.len())?;
        check_dim("prox xi", self.dim, xi.len())?;
        check_finite("prox xi", xi)?;
        self.check_interior(x)?;

        let grad = |y: &[f64]| -> Vec<f64> {
            match self.mirror {
                MirrorMap::HalfSquaredEuclidean => {
                    y.iter().zip(x).zip(xi).map(|((b, a), g)| b - a + g).collect()
                }
                MirrorMap::NegativeEntropy => {
                    y.iter().zip(x).zip(xi).map(|((b, a), g)| (b / a).ln() + g).collect()
                }
            }
        };
        let residual = |y: &[f64], g: &[f64]| -> f64 {
            let mut z: Vec<f64> = y.iter().zip(g).map(|(a, b)| a - b).collect();
            self.project(&mut z);
            y.iter().zip(&z).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        };

        let mut y = x.to_vec();
        self.project(&mut y);
        let mut step = 1.0;
        let mut g = grad(&y);
        for _ in 0..GENERIC_PROX_MAX_ITER {
            if residual(&y, &g) <= GENERIC_PROX_TOL {
                return Ok(Point { coords: y });
            }
            // Backtrack on the local curvature ⟨∇φ(c) − ∇φ(y), c − y⟩ ≤ ‖c − y‖²/step,
            // which avoids comparing nearly equal function values.
            loop {
                let mut cand: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
                self.project(&mut cand);
                let gc = grad(&cand);
                let d: Vec<f64> = cand.iter().zip(&y).map(|(a, b)| a - b).collect();
                let curv: f64 = d.iter().zip(gc.iter().zip(&g)).map(|(a, (p, q))| a * (p - q)).sum();
                let sq: f64 = d.iter().map(|v| v * v).sum();
                if curv <= sq / step || step < 1e-16 {
                    y = cand;
                    g = gc;
                    break;
                }
                step *= 0.5;
            }
            step = (step * 2.0).min(1.0);
        }
        let g = grad(&y);
        let r = residual(&y, &g);
        if r <= GENERIC_PROX_TOL {
            Ok(Point { coords: y })
        } else {
            Err(Error::Solver(format!("generic prox stalled at KKT residual {r:e}")))
        }
    }

    /// Whether `‖P_x(η) − P_x(ζ)‖ ≤ ‖η − ζ‖_* + 1e-9`.
    pub fn prox_nonexpansive_check(&self, x: &[f64], eta: &[f64], zeta: &[f64]) -> Result<bool> {
        let a = self.prox_map(x, eta)?;
        let b = self.prox_map(x, zeta)?;
        let lhs = self.norm(&crate::linalg::sub(&a, &b));
        let rhs = self.dual_norm(&crate::linalg::sub(eta, zeta));
        Ok(lhs <= rhs + 1e-9)
    }

    /// `D² := max_y V(x_c, y)` with `x_c` the mirror-map minimizer.
    ///
    /// For the entropy setups the maximum over the floored simplex is used,
    /// which is `ln d` up to `O(ν ln ν)`.
    pub fn diameter_sq(&self) -> f64 {
        match &self.set {
            FeasibleSet::Box { lo, hi } => {
                0.5 * lo.iter().zip(hi).map(|(l, h)| (0.5 * (h - l)).powi(2)).sum::<f64>()
            }
            FeasibleSet::Ball { radius, .. } => 0.5 * radius * radius,
            FeasibleSet::Simplex { .. } | FeasibleSet::ProductSimplex { .. } => self
                .blocks
                .iter()
                .map(|r| {
                    let d = r.len() as f64;
                    if r.len() == 1 {
                        return 0.0;
                    }
                    let floor = SIMPLEX_FLOOR / d;
                    let top = 1.0 - (d - 1.0) * floor;
                    // KL(y ‖ uniform) at the floored vertex.
                    top * (d * top).ln() + (d - 1.0) * floor * (d * floor).ln()
                })
                .sum(),
        }
    }

    /// `sqrt(D²)`.
    pub fn diameter(&self) -> f64 {
        self.diameter_sq().sqrt()
    }
}

fn xlogx(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

fn project_ball(v: &mut [f64], center: &[f64], radius: f64) {
    let d: f64 = v.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    if d > radius {
        let s = radius / d;
        for (x, c) in v.iter_mut().zip(center) {
            *x = c + s * (*x - c);
        }
    }
}

/// `yᵢ ∝ xᵢ exp(−ξᵢ)`, evaluated in log space.
fn entropy_step(x: &[f64], xi: &[f64], out: &mut [f64]) {
    for ((o, a), g) in out.iter_mut().zip(x).zip(xi) {
        *o = a.ln() - g;
    }
    let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for o in out.iter_mut() {
        *o = (*o - m).exp();
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

/// Mixes a probability vector with the uniform point just enough to lift
/// every coordinate to `ν/d`. Interior points are left untouched.
fn apply_floor(y: &mut [f64]) {
    let d = y.len() as f64;
    let floor = SIMPLEX_FLOOR / d;
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= floor {
        return;
    }
    let u = 1.0 / d;
    let lambda = (floor - min) / (u - min);
    for v in y.iter_mut() {
        *v = (1.0 - lambda) * *v + lambda * u;
    }
    // Pin the minimum exactly at the floor against round-off.
    for v in y.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }
    let s: f64 = y.iter().sum();
    y.iter_mut().for_each(|v| *v /= s);
}

/// Euclidean projection onto `{y : yᵢ ≥ a, Σ y = 1}` (sort-based).
fn project_floored_simplex(v: &mut [f64], a: f64) {
    let d = v.len();
    let mass = 1.0 - a * d as f64;
    let mut z: Vec<f64> = v.iter().map(|x| x - a).collect();
    let mut sorted = z.clone();
    sorted.sort_by(|p, q| q.partial_cmp(p).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - mass) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for (x, zi) in v.iter_mut().zip(z.iter_mut()) {
        *zi = (*zi - theta).max(0.0);
        *x = *zi + a;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn euclidean_bregman_is_half_squared_distance() {
        let g = Geometry::ball(vec![0.0, 0.0], 10.0).unwrap();
        assert!(close(g.bregman(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5, 1e-15));
    }

    #[test]
    fn entropy_bregman_examples() {
        let g = Geometry::simplex(2).unwrap();
        assert_eq!(g.bregman(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let kl = 0.9 * (1.8f64).ln() + 0.1 * (0.2f64).ln();
        let v = g.bregman(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        assert!(close(v, kl, 1e-15));
        assert!(close(v, 0.368, 5e-4));
    }

    #[test]
    fn entropy_bregman_rejects_boundary_anchor() {
        let g = Geometry::simplex(2).unwrap();
        assert!(matches!(g.bregman(&[1.0, 0.0], &[0.5, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(g.prox_map(&[1.0, 0.0], &[0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn prox_closed_form_examples() {
        let b = Geometry::unit_box(2).unwrap();
        let y = b.prox_map(&[0.5, 0.5], &[0.2, -0.2]).unwrap();
        assert!(close(y[0], 0.3, 1e-15) && close(y[1], 0.7, 1e-15));

        let s = Geometry::simplex(3).unwrap();
        let third = 1.0 / 3.0;
        let y = s.prox_map(&[third; 3], &[0.0; 3]).unwrap();
        assert!(y.iter().all(|v| close(*v, third, 1e-15)));

        let y = s.prox_map(&[0.5, 0.3, 0.2], &[2f64.ln(), 0.0, 0.0]).unwrap();
        let want = [1.0 / 3.0, 0.4, 4.0 / 15.0];
        for (a, b) in y.iter().zip(want) {
            assert!(close(*a, b, 1e-15), "{a} vs {b}");
        }
    }

    #[test]
    fn prox_rejects_nonfinite_dual() {
        let b = Geometry::unit_box(2).unwrap();
        assert!(matches!(b.prox_map(&[0.5, 0.5], &[f64::NAN, 0.0]), Err(Error::Input(_))));
        assert!(matches!(b.prox_map(&[0.5, 0.5], &[f64::INFINITY, 0.0]), Err(Error::Input(_))));
    }

    #[test]
    fn entropy_prox_applies_floor() {
        let s = Geometry::simplex(3).unwrap();
        let y = s.prox_map(&[1.0 / 3.0; 3], &[0.0, 80.0, 80.0]).unwrap();
        assert!(s.contains(&y, 0.0));
        assert!(y[1] >= SIMPLEX_FLOOR / 3.0);
    }

    #[test]
    fn nonexpansive_examples() {
        let b = Geometry::unit_box(2).unwrap();
        assert!(b.prox_nonexpansive_check(&[0.2, 0.9], &[0.3, 0.1], &[0.3, 0.1]).unwrap());
        let ball = Geometry::ball(vec![0.0, 0.0], 1.0).unwrap();
        let a = ball.prox_map(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let c = ball.prox_map(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(close(ball.norm(&crate::linalg::sub(&a, &c)), 1.0, 1e-15));
        assert!(ball.prox_nonexpansive_check(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]).unwrap());
    }

    #[test]
    fn diameter_examples() {
        for d in [1, 3, 7] {
            let g = Geometry::unit_box(d).unwrap();
            assert!(close(g.diameter_sq(), d as f64 / 8.0, 1e-15));
        }
        for d in [2usize, 5, 10] {
            let g = Geometry::simplex(d).unwrap();
            assert!(close(g.diameter_sq(), (d as f64).ln(), 1e-6));
        }
        let g = Geometry::ball(vec![1.0, -1.0, 2.0], 3.0).unwrap();
        assert!(close(g.diameter_sq(), 4.5, 1e-15));
        let p = Geometry::product_simplex(&[2, 4]).unwrap();
        assert!(close(p.diameter_sq(), 2f64.ln() + 4f64.ln(), 1e-6));
    }

    #[test]
    fn norm_pair_rejects_large_p() {
        assert!(NormPair::new(2.5).is_err());
        assert!(NormPair::new(0.5).is_err());
        let n = NormPair::new(1.5).unwrap();
        assert!(close(n.q(), 3.0, 1e-15));
        assert!(NormPair::new(1.0).unwrap().q().is_infinite());
    }

    #[test]
    fn product_norms_reduce_blockwise() {
        let g = Geometry::product_simplex(&[2, 2]).unwrap();
        let v = [1.0, -2.0, 0.5, 0.5];
        assert!(close(g.norm(&v), (9.0f64 + 1.0).sqrt(), 1e-15));
        assert!(close(g.dual_norm(&v), (4.0f64 + 0.25).sqrt(), 1e-15));
    }

    #[test]
    fn floored_projection_respects_floor_and_mass() {
        let mut v = vec![2.0, -1.0, 0.3];
        project_floored_simplex(&mut v, 1e-3);
        assert!(close(v.iter().sum::<f64>(), 1.0, 1e-15));
        assert!(v.iter().all(|x| *x >= 1e-3 - 1e-18));
    }
}
