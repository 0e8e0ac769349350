//! Stochastic problem instances with Markov-modulated additive noise.
//!
//! Every oracle is `mean_field(x) ± shift[z]` where the per-state shifts have
//! zero mean under the stationary distribution. This keeps `L`, `L̃` and `σ`
//! exact: the noise is constant in `x`, so every `F(·, z)` shares the
//! Lipschitz constant of the mean field and the deviation bound holds
//! uniformly in `x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::geometry::{FeasibleSet, Geometry, MirrorMap, Point};
use crate::linalg::{dot, random_orthogonal, Matrix};

const REFERENCE_MIN_TOL: f64 = 1e-10;
const REFERENCE_VI_TOL: f64 = 1e-9;
const REFERENCE_MAX_ITER: usize = 1_000_000;

/// Lipschitz constant of `x ↦ Q x` from the primal norm to the dual norm of
/// `geometry`. Exact for the Euclidean setup (spectral norm) and for one
/// simplex (`max |Q_ij|`); for products it is the spectral norm of the
/// matrix of blockwise `max |Q_bc|`, an upper bound that is tight for
/// two-player games.
pub fn operator_norm(geometry: &Geometry, q: &Matrix) -> f64 {
    match geometry.mirror() {
        MirrorMap::HalfSquaredEuclidean => q.spectral_norm(),
        MirrorMap::NegativeEntropy => {
            let blocks = geometry.blocks();
            let k = Matrix::from_fn(blocks.len(), blocks.len(), |b, c| {
                let mut m = 0.0_f64;
                for i in blocks[b].clone() {
                    for j in blocks[c].clone() {
                        m = m.max(q[(i, j)].abs());
                    }
                }
                m
            });
            if k.rows() == 1 {
                k[(0, 0)]
            } else {
                k.spectral_norm()
            }
        }
    }
}

/// `max_{u ∈ X} ⟨w, u⟩` and a maximizer. Simplex blocks use the exact
/// simplex (vertices), not the floored one.
pub fn linear_max(geometry: &Geometry, w: &[f64]) -> (f64, Vec<f64>) {
    let mut u = vec![0.0; geometry.dim()];
    match geometry.set() {
        FeasibleSet::Box { lo, hi } => {
            for i in 0..u.len() {
                u[i] = if w[i] >= 0.0 { hi[i] } else { lo[i] };
            }
        }
        FeasibleSet::Ball { center, radius } => {
            let n = crate::linalg::norm2(w);
            for i in 0..u.len() {
                u[i] = if n > 0.0 { center[i] + radius * w[i] / n } else { center[i] };
            }
        }
        FeasibleSet::Simplex { .. } | FeasibleSet::ProductSimplex { .. } => {
            for r in geometry.blocks() {
                let best = r
                    .clone()
                    .fold(r.start, |bi, i| if w[i] > w[bi] { i } else { bi });
                u[best] = 1.0;
            }
        }
    }
    (dot(w, &u), u)
}

fn check_shifts(shifts: &[Vec<f64>], pi: &[f64], dim: usize) -> Result<()> {
    if shifts.len() != pi.len() {
        return Err(Error::Input(format!(
            "{} shift vectors for {} chain states",
            shifts.len(),
            pi.len()
        )));
    }
    let s: f64 = pi.iter().sum();
    if (s - 1.0).abs() > 1e-10 || pi.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Input("stationary vector is not a probability vector".into()));
    }
    for c in shifts {
        check_dim("shift", dim, c.len())?;
        check_finite("shift", c)?;
    }
    let mean = stationary_mean(shifts, pi);
    let worst = mean.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if worst > 1e-12 {
        return Err(Error::Input(format!("shifts have nonzero stationary mean ({worst:e})")));
    }
    Ok(())
}

/// `Σ_z π_z v_z`
pub fn stationary_mean(vectors: &[Vec<f64>], pi: &[f64]) -> Vec<f64> {
    let dim = vectors.first().map_or(0, Vec::len);
    let mut m = vec![0.0; dim];
    for (v, &p) in vectors.iter().zip(pi) {
        crate::linalg::axpy(p, v, &mut m);
    }
    m
}

/// Zero-π-mean random shifts with `max_z ‖v_z‖_* = scale` exactly.
pub fn zero_mean_shifts<R: Rng + ?Sized>(
    geometry: &Geometry,
    pi: &[f64],
    scale: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let d = geometry.dim();
    if scale == 0.0 {
        return Ok(vec![vec![0.0; d]; pi.len()]);
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Input(format!("noise scale {scale} must be finite and nonnegative")));
    }
    if pi.len() < 2 {
        return Err(Error::Input("positive noise needs at least two chain states".into()));
    }
    let mut v: Vec<Vec<f64>> =
        (0..pi.len()).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let mean = stationary_mean(&v, pi);
    for vz in &mut v {
        for (a, m) in vz.iter_mut().zip(&mean) {
            *a -= m;
        }
    }
    let worst = v.iter().map(|vz| geometry.dual_norm(vz)).fold(0.0_f64, f64::max);
    for vz in &mut v {
        vz.iter_mut().for_each(|a| *a *= scale / worst);
    }
    // Re-centre after scaling so the mean is zero to round-off.
    let mean = stationary_mean(&v, pi);
    for vz in &mut v {
        for (a, m) in vz.iter_mut().zip(&mean) {
            *a -= m;
        }
    }
    Ok(v)
}

/// `min_{x ∈ X} f(x) = ½ xᵀAx − bᵀx` with oracle `∇F(x, z) = Ax − b − c_z`.
#[derive(Debug, Clone)]
pub struct MinProblem {
    geometry: Geometry,
    a: Matrix,
    b: Vec<f64>,
    shifts: Vec<Vec<f64>>,
    pi: Vec<f64>,
    lipschitz: f64,
    sigma: f64,
    x_star: Point,
    f_star: f64,
}

impl MinProblem {
    /// Validates the data and records `L`, `σ` and a reference solution
    /// (computed by [`reference_min`] when `x_star` is not supplied).
    pub fn new(
        geometry: Geometry,
        a: Matrix,
        b: Vec<f64>,
        shifts: Vec<Vec<f64>>,
        pi: Vec<f64>,
        x_star: Option<Point>,
    ) -> Result<Self> {
        let d = geometry.dim();
        check_dim("A rows", d, a.rows())?;
        check_dim("A cols", d, a.cols())?;
        check_dim("b", d, b.len())?;
        check_finite("b", &b)?;
        for i in 0..d {
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * (1.0 + a[(i, j)].abs()) {
                    return Err(Error::Input("A is not symmetric".into()));
                }
            }
        }
        check_shifts(&shifts, &pi, d)?;
        let lipschitz = operator_norm(&geometry, &a);
        let sigma = shifts.iter().map(|c| geometry.dual_norm(c)).fold(0.0_f64, f64::max);
        let mut p = Self {
            geometry,
            a,
            b,
            shifts,
            pi,
            lipschitz,
            sigma,
            x_star: Point::from_vec_unchecked(vec![]),
            f_star: 0.0,
        };
        let x_star = match x_star {
            Some(x) => p.geometry.point(x.into_vec())?,
            None => reference_min(&p)?.0,
        };
        p.f_star = p.value(&x_star);
        p.x_star = x_star;
        Ok(p)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.b
    }

    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn n_states(&self) -> usize {
        self.shifts.len()
    }

    /// Smoothness constant in the geometry's norm pair.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `max_z ‖c_z‖_*`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn x_star(&self) -> &Point {
        &self.x_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.a.mul_vec(x)) - dot(&self.b, x)
    }

    /// `∇f(x) = Ax − b`.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.a.mul_vec(x);
        g.iter_mut().zip(&self.b).for_each(|(gi, bi)| *gi -= bi);
        g
    }

    /// `∇F(x, z) = Ax − b − c_z`.
    pub fn grad_oracle(&self, x: &[f64], z: usize) -> Result<Vec<f64>> {
        check_dim("grad_oracle x", self.geometry.dim(), x.len())?;
        let c = self.shifts.get(z).ok_or_else(|| {
            Error::Input(format!("state {z} out of range for {} states", self.shifts.len()))
        })?;
        let mut g = self.grad(x);
        g.iter_mut().zip(c).for_each(|(gi, ci)| *gi -= ci);
        Ok(g)
    }

    /// Structured text dump (dotted keys, 17 significant digits).
    pub fn export_text(&self, chain_ref: &str) -> String {
        let mut out = String::from("# markov-mirror instance\nkind = quadratic\n");
        write_geometry(&mut out, &self.geometry);
        out.push_str(&format!("chain = {chain_ref}\n"));
        write_vec(&mut out, "pi", &self.pi);
        for i in 0..self.a.rows() {
            write_vec(&mut out, &format!("matrix.{i}"), self.a.row(i));
        }
        write_vec(&mut out, "linear", &self.b);
        for (z, c) in self.shifts.iter().enumerate() {
            write_vec(&mut out, &format!("shift.{z}"), c);
        }
        write_vec(&mut out, "x_star", &self.x_star);
        out
    }
}

/// `F(x) = Qx + c` on a product of simplexes or a box, with oracle
/// `F(x, z) = Qx + c + e_z`.
#[derive(Debug, Clone)]
pub struct ViProblem {
    geometry: Geometry,
    q: Matrix,
    c: Vec<f64>,
    shifts: Vec<Vec<f64>>,
    pi: Vec<f64>,
    lipschitz: f64,
    sigma: f64,
    skew: bool,
    x_star: Point,
}

impl ViProblem {
    /// `Q` must be monotone (`Q + Qᵀ ⪰ 0`); only the skew case is checked
    /// exactly and unlocks the exact merit function. Without `x_star`, a
    /// reference is computed by [`reference_vi`], which needs a skew `Q`.
    pub fn new(
        geometry: Geometry,
        q: Matrix,
        c: Vec<f64>,
        shifts: Vec<Vec<f64>>,
        pi: Vec<f64>,
        x_star: Option<Point>,
    ) -> Result<Self> {
        let d = geometry.dim();
        check_dim("Q rows", d, q.rows())?;
        check_dim("Q cols", d, q.cols())?;
        check_dim("c", d, c.len())?;
        check_finite("c", &c)?;
        check_shifts(&shifts, &pi, d)?;
        let mut skew = true;
        for i in 0..d {
            for j in 0..=i {
                if (q[(i, j)] + q[(j, i)]).abs() > 1e-12 {
                    skew = false;
                }
            }
        }
        let lipschitz = operator_norm(&geometry, &q);
        let sigma = shifts.iter().map(|e| geometry.dual_norm(e)).fold(0.0_f64, f64::max);
        let mut p = Self {
            geometry,
            q,
            c,
            shifts,
            pi,
            lipschitz,
            sigma,
            skew,
            x_star: Point::from_vec_unchecked(vec![]),
        };
        p.x_star = match x_star {
            Some(x) => p.geometry.point(x.into_vec())?,
            None => reference_vi(&p)?.0,
        };
        Ok(p)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn affine_term(&self) -> &[f64] {
        &self.c
    }

    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn n_states(&self) -> usize {
        self.shifts.len()
    }

    /// Lipschitz constant of `F`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `sup_z` Lipschitz constant of `F(·, z)`; equal to `L` since shifts are constant in `x`.
    pub fn lipschitz_tilde(&self) -> f64 {
        self.lipschitz
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_skew(&self) -> bool {
        self.skew
    }

    pub fn x_star(&self) -> &Point {
        &self.x_star
    }

    /// `F(x) = Qx + c`.
    pub fn operator(&self, x: &[f64]) -> Vec<f64> {
        let mut f = self.q.mul_vec(x);
        f.iter_mut().zip(&self.c).for_each(|(fi, ci)| *fi += ci);
        f
    }

    /// `F(x, z) = Qx + c + e_z`.
    pub fn op_oracle(&self, x: &[f64], z: usize) -> Result<Vec<f64>> {
        check_dim("op_oracle x", self.geometry.dim(), x.len())?;
        let e = self.shifts.get(z).ok_or_else(|| {
            Error::Input(format!("state {z} out of range for {} states", self.shifts.len()))
        })?;
        let mut f = self.operator(x);
        f.iter_mut().zip(e).for_each(|(fi, ei)| *fi += ei);
        Ok(f)
    }

    pub fn export_text(&self, chain_ref: &str) -> String {
        let mut out = String::from("# markov-mirror instance\nkind = bilinear\n");
        write_geometry(&mut out, &self.geometry);
        out.push_str(&format!("chain = {chain_ref}\n"));
        write_vec(&mut out, "pi", &self.pi);
        for i in 0..self.q.rows() {
            write_vec(&mut out, &format!("matrix.{i}"), self.q.row(i));
        }
        write_vec(&mut out, "linear", &self.c);
        for (z, e) in self.shifts.iter().enumerate() {
            write_vec(&mut out, &format!("shift.{z}"), e);
        }
        write_vec(&mut out, "x_star", &self.x_star);
        out
    }
}

fn write_vec(out: &mut String, key: &str, v: &[f64]) {
    let body: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
    out.push_str(&format!("{key} = {}\n", body.join(", ")));
}

fn write_geometry(out: &mut String, g: &Geometry) {
    match g.set() {
        FeasibleSet::Box { lo, hi } => {
            out.push_str("geometry = box\n");
            write_vec(out, "geometry.lo", lo);
            write_vec(out, "geometry.hi", hi);
        }
        FeasibleSet::Ball { center, radius } => {
            out.push_str("geometry = ball\n");
            write_vec(out, "geometry.center", center);
            out.push_str(&format!("geometry.radius = {radius:.16e}\n"));
        }
        FeasibleSet::Simplex { dim } => {
            out.push_str(&format!("geometry = simplex\ngeometry.blocks = {dim}\n"));
        }
        FeasibleSet::ProductSimplex { blocks } => {
            let b: Vec<String> = blocks.iter().map(usize::to_string).collect();
            out.push_str(&format!("geometry = simplex\ngeometry.blocks = {}\n", b.join(", ")));
        }
    }
}

/// Reads back a dump produced by `export_text`. Returns the problem and the
/// recorded chain reference.
pub fn import_text(text: &str) -> Result<(Instance, String)> {
    use std::collections::BTreeMap;
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Input(format!("instance line {}: expected `key = value`", lineno + 1))
        })?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| kv.get(k).cloned().ok_or_else(|| Error::Input(format!("instance: missing key `{k}`")));
    let floats = |k: &str| -> Result<Vec<f64>> {
        get(k)?
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Input(format!("instance `{k}`: {e}"))))
            .collect()
    };
    let geometry = match get("geometry")?.as_str() {
        "box" => Geometry::boxed(floats("geometry.lo")?, floats("geometry.hi")?)?,
        "ball" => {
            let r = floats("geometry.radius")?;
            Geometry::ball(floats("geometry.center")?, r[0])?
        }
        "simplex" => {
            let blocks: Vec<usize> = get("geometry.blocks")?
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|e| Error::Input(format!("geometry.blocks: {e}"))))
                .collect::<Result<_>>()?;
            if blocks.len() == 1 {
                Geometry::simplex(blocks[0])?
            } else {
                Geometry::product_simplex(&blocks)?
            }
        }
        other => return Err(Error::Input(format!("instance: unknown geometry `{other}`"))),
    };
    let d = geometry.dim();
    let rows: Vec<Vec<f64>> = (0..d).map(|i| floats(&format!("matrix.{i}"))).collect::<Result<_>>()?;
    let pi = floats("pi")?;
    let shifts: Vec<Vec<f64>> =
        (0..pi.len()).map(|z| floats(&format!("shift.{z}"))).collect::<Result<_>>()?;
    let linear = floats("linear")?;
    let x_star = Point::from_vec_unchecked(floats("x_star")?);
    let chain = get("chain")?;
    let m = Matrix::from_rows(&rows);
    let inst = match get("kind")?.as_str() {
        "quadratic" => Instance::Min(MinProblem::new(geometry, m, linear, shifts, pi, Some(x_star))?),
        "bilinear" => Instance::Vi(ViProblem::new(geometry, m, linear, shifts, pi, Some(x_star))?),
        other => return Err(Error::Input(format!("instance: unknown kind `{other}`"))),
    };
    Ok((inst, chain))
}

/// Either problem family.
#[derive(Debug, Clone)]
pub enum Instance {
    Min(MinProblem),
    Vi(ViProblem),
}

/// Feasible set choices for generated minimization instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinGeometryKind {
    /// `[0, 1]^d`
    Box,
    /// Unit ball at the origin.
    Ball,
    /// `Δ_d` with entropy.
    Simplex,
}

/// Generator parameters for [`make_min_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinSpec {
    pub dim: usize,
    pub geometry: MinGeometryKind,
    /// Requested `σ = max_z ‖c_z‖_*`.
    pub noise: f64,
    pub seed: u64,
    /// Largest eigenvalue of `A`.
    pub lmax: f64,
    /// Eigenvalues are `lmax · 10^{−decades·i/(d−1)}`: a log-uniform spectrum.
    pub spectrum_decades: f64,
}

impl MinSpec {
    pub fn new(dim: usize, geometry: MinGeometryKind, noise: f64, seed: u64) -> Self {
        Self { dim, geometry, noise, seed, lmax: 1.0, spectrum_decades: 9.0 }
    }
}

/// Random quadratic with a log-uniform spectrum, an interior minimizer and
/// zero-mean per-state gradient shifts.
pub fn make_min_instance(spec: &MinSpec, pi: &[f64]) -> Result<MinProblem> {
    let d = spec.dim;
    if d == 0 {
        return Err(Error::Input("dimension must be positive".into()));
    }
    if !(spec.lmax > 0.0) || !(spec.spectrum_decades >= 0.0) {
        return Err(Error::Input("spectrum parameters must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let geometry = match spec.geometry {
        MinGeometryKind::Box => Geometry::unit_box(d)?,
        MinGeometryKind::Ball => Geometry::ball(vec![0.0; d], 1.0)?,
        MinGeometryKind::Simplex => Geometry::simplex(d)?,
    };
    let eig: Vec<f64> = (0..d)
        .map(|i| {
            let frac = if d == 1 { 0.0 } else { i as f64 / (d - 1) as f64 };
            spec.lmax * 10f64.powf(-spec.spectrum_decades * frac)
        })
        .collect();
    let q = random_orthogonal(d, &mut rng);
    let mut a = Matrix::from_fn(d, d, |i, j| (0..d).map(|k| q[(i, k)] * eig[k] * q[(j, k)]).sum());
    // Exact symmetry.
    for i in 0..d {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let target: Vec<f64> = match spec.geometry {
        MinGeometryKind::Box => (0..d).map(|_| 0.5 + 0.25 * rng.random_range(-1.0..1.0)).collect(),
        MinGeometryKind::Ball => {
            let mut g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            crate::linalg::normalize(&mut g);
            let r = 0.5 * rng.random::<f64>();
            g.iter().map(|v| r * v).collect()
        }
        MinGeometryKind::Simplex => interior_simplex_point(d, &mut rng),
    };
    let b = a.mul_vec(&target);
    let shifts = zero_mean_shifts(&geometry, pi, spec.noise, &mut rng)?;
    let x_star = geometry.point(target)?;
    MinProblem::new(geometry, a, b, shifts, pi.to_vec(), Some(x_star))
}

fn interior_simplex_point<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = w.iter().sum();
    let mut x: Vec<f64> = w.iter().map(|v| 0.5 / d as f64 + 0.5 * v / s).collect();
    let t: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= t);
    x
}

/// Feasible set choices for generated VI instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViGeometryKind {
    /// `Δ_m × Δ_n` with entropy.
    Simplexes,
    /// `[0, 1]^{m+n}` with the Euclidean setup.
    Box,
}

/// Generator parameters for [`make_vi_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct ViSpec {
    pub rows: usize,
    pub cols: usize,
    pub geometry: ViGeometryKind,
    pub noise: f64,
    pub seed: u64,
}

fn game_operator(a: &Matrix) -> Matrix {
    let (m, n) = (a.rows(), a.cols());
    Matrix::from_fn(m + n, m + n, |i, j| {
        if i < m && j >= m {
            a[(i, j - m)]
        } else if i >= m && j < m {
            -a[(j, i - m)]
        } else {
            0.0
        }
    })
}

/// Random zero-sum game `min_u max_v uᵀAv + …` written as the skew VI
/// `F(x) = Qx + c` with `Q = [[0, A], [−Aᵀ, 0]]`, normalised to `L = 1`.
/// `c` is chosen so that a random interior point is the solution.
pub fn make_vi_instance(spec: &ViSpec, pi: &[f64]) -> Result<ViProblem> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::Input("game blocks must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (m, n) = (spec.rows, spec.cols);
    let geometry = match spec.geometry {
        ViGeometryKind::Simplexes => Geometry::product_simplex(&[m, n])?,
        ViGeometryKind::Box => Geometry::unit_box(m + n)?,
    };
    let a = Matrix::random_gaussian(m, n, &mut rng);
    let mut q = game_operator(&a);
    let l = operator_norm(&geometry, &q);
    for i in 0..m + n {
        for j in 0..m + n {
            q[(i, j)] /= l;
        }
    }
    let target: Vec<f64> = match spec.geometry {
        ViGeometryKind::Simplexes => {
            let mut t = interior_simplex_point(m, &mut rng);
            t.extend(interior_simplex_point(n, &mut rng));
            t
        }
        ViGeometryKind::Box => (0..m + n).map(|_| 0.5 + 0.25 * rng.random_range(-1.0..1.0)).collect(),
    };
    let c: Vec<f64> = q.mul_vec(&target).iter().map(|v| -v).collect();
    let shifts = zero_mean_shifts(&geometry, pi, spec.noise, &mut rng)?;
    let x_star = geometry.point(target)?;
    ViProblem::new(geometry, q, c, shifts, pi.to_vec(), Some(x_star))
}

/// Generalised matching pennies on `Δ_k × Δ_k`: payoff `A_ii = 1`,
/// `A_ij = −1/(k−1)`; the unique equilibrium is uniform play. With `k = 2`
/// this is classical matching pennies.
pub fn matching_pennies(k: usize, noise: f64, pi: &[f64], seed: u64) -> Result<ViProblem> {
    if k < 2 {
        return Err(Error::Input("matching pennies needs at least two actions".into()));
    }
    let off = -1.0 / (k as f64 - 1.0);
    let a = Matrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { off });
    let geometry = Geometry::product_simplex(&[k, k])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts = zero_mean_shifts(&geometry, pi, noise, &mut rng)?;
    let x_star = geometry.center();
    ViProblem::new(geometry, game_operator(&a), vec![0.0; 2 * k], shifts, pi.to_vec(), Some(x_star))
}

/// Frank–Wolfe gap `max_{u ∈ X} ⟨∇f(x), x − u⟩ ≥ f(x) − f*`.
pub fn frank_wolfe_gap(p: &MinProblem, x: &[f64]) -> f64 {
    let g = p.grad(x);
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    let (m, _) = linear_max(p.geometry(), &neg);
    dot(&g, x) + m
}

/// High-accuracy minimizer: accelerated projected gradient with adaptive
/// restarts, stopped once the Frank–Wolfe gap certifies `f(x) − f* ≤ 1e-10`.
pub fn reference_min(p: &MinProblem) -> Result<(Point, f64)> {
    let g = p.geometry();
    let step = 1.0 / p.matrix().spectral_norm().max(f64::MIN_POSITIVE);
    let mut x = g.center().into_vec();
    let mut y = x.clone();
    let mut k = 0.0_f64;
    let mut prev_val = p.value(&x);
    for it in 0..REFERENCE_MAX_ITER {
        let grad = p.grad(&y);
        let mut next: Vec<f64> = y.iter().zip(&grad).map(|(a, b)| a - step * b).collect();
        g.project(&mut next);
        let val = p.value(&next);
        if val > prev_val {
            // Function-value restart.
            k = 0.0;
            y = x.clone();
            continue;
        }
        let mom = k / (k + 3.0);
        y = next.iter().zip(&x).map(|(a, b)| a + mom * (a - b)).collect();
        x = next;
        prev_val = val;
        k += 1.0;
        if it % 16 == 0 && frank_wolfe_gap(p, &x) <= REFERENCE_MIN_TOL {
            let v = p.value(&x);
            return Ok((Point::from_vec_unchecked(x), v));
        }
    }
    Err(Error::Solver(format!(
        "reference minimizer not certified within {REFERENCE_MAX_ITER} iterations"
    )))
}

/// High-accuracy VI solution: deterministic mirror-prox with `γ = 1/(2L)`,
/// stopped once the exact merit function of the last iterate is `≤ 1e-9`.
pub fn reference_vi(p: &ViProblem) -> Result<(Point, f64)> {
    if !p.is_skew() {
        return Err(Error::UnsupportedMetric(
            "reference VI solution needs a skew operator to certify the merit function".into(),
        ));
    }
    let g = p.geometry();
    let gamma = if p.lipschitz() > 0.0 { 0.5 / p.lipschitz() } else { 1.0 };
    let mut x = g.center();
    for it in 0..REFERENCE_MAX_ITER {
        if it % 16 == 0 {
            let e = crate::validation::err_vi(p, &x)?;
            if e <= REFERENCE_VI_TOL {
                return Ok((x, e));
            }
        }
        let f: Vec<f64> = p.operator(&x).iter().map(|v| gamma * v).collect();
        let half = g.prox_map(&x, &f)?;
        let f: Vec<f64> = p.operator(&half).iter().map(|v| gamma * v).collect();
        x = g.prox_map(&x, &f)?;
    }
    Err(Error::Solver(format!(
        "reference VI solution not certified within {REFERENCE_MAX_ITER} iterations"
    )))
}
