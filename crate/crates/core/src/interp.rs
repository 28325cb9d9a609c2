//! Complex interpolation norms of finite-dimensional compatible couples.
//!
//! Analytic families on the strip `0 <= Re z <= 1` are spanned by `1` and
//! `e^{lambda_k (z - theta)}`, `lambda_k = k delta`, `0 < |k| <= N`. Every such
//! family is `2 pi / delta` periodic in `Im z`, so each boundary is one period
//! sampled on a grid. Reported sups are certified: on a grid of `M` nodes a
//! trigonometric polynomial of exponential type `Lambda` satisfies
//! `sup <= grid max / (1 - (h Lambda)^2 / 8)` with `h` the node spacing.
//!
//! Lower bounds pair `x` (bilinearly) with `g(theta)` for a family `g` in the
//! dual couple; the three lines lemma gives `|<x, g(theta)>| <= |x|_theta M(g)`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{schatten_with_grad, ComplexMatrix, C64, ZERO};
use crate::opspace::{MatrixNormFamily, OhSpace};
use crate::optim::lbfgs;

/// A norm on `C^dim` with a gradient `G`, `d|x| = Re sum conj(G_i) dx_i`.
pub type NormOracle = Arc<dyn Fn(&[C64]) -> (f64, Vec<C64>) + Send + Sync>;

/// Two norms on the same coordinates, with optional dual norms for the
/// bilinear pairing `sum x_i y_i`.
#[derive(Clone)]
pub struct CompatibleCouple {
    pub dim: usize,
    pub label: String,
    pub norm0: NormOracle,
    pub norm1: NormOracle,
    pub dual0: Option<NormOracle>,
    pub dual1: Option<NormOracle>,
}

impl std::fmt::Debug for CompatibleCouple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CompatibleCouple({}, dim {})", self.label, self.dim)
    }
}

impl CompatibleCouple {
    pub fn new(dim: usize, label: impl Into<String>, norm0: NormOracle, norm1: NormOracle) -> Self {
        Self { dim, label: label.into(), norm0, norm1, dual0: None, dual1: None }
    }

    pub fn with_duals(mut self, dual0: NormOracle, dual1: NormOracle) -> Self {
        self.dual0 = Some(dual0);
        self.dual1 = Some(dual1);
        self
    }

    pub fn dual(&self) -> Option<CompatibleCouple> {
        Some(CompatibleCouple {
            dim: self.dim,
            label: format!("dual of {}", self.label),
            norm0: self.dual0.clone()?,
            norm1: self.dual1.clone()?,
            dual0: Some(self.norm0.clone()),
            dual1: Some(self.norm1.clone()),
        })
    }

    /// `(S_p0^d, S_p1^d)` on row-major `d x d` matrices.
    pub fn schatten(d: usize, p0: f64, p1: f64) -> Self {
        let pos: Vec<(usize, usize)> = (0..d * d).map(|i| (i / d, i % d)).collect();
        let pos = Arc::new(pos);
        Self::new(
            d * d,
            format!("(S_{p0}, S_{p1}) on M_{d}"),
            reshaped_schatten(d, d, pos.clone(), p0),
            reshaped_schatten(d, d, pos.clone(), p1),
        )
        .with_duals(reshaped_schatten(d, d, pos.clone(), conjugate(p0)), reshaped_schatten(d, d, pos, conjugate(p1)))
    }

    /// `(M_m(R_n), M_m(C_n))`; coordinates are `n` row-major `m x m` blocks.
    pub fn row_column(m: usize, n: usize) -> Self {
        let row: Vec<(usize, usize)> = (0..n * m * m).map(|c| (c % (m * m) / m, (c / (m * m)) * m + c % m)).collect();
        let col: Vec<(usize, usize)> = (0..n * m * m).map(|c| ((c / (m * m)) * m + c % (m * m) / m, c % m)).collect();
        let (row, col) = (Arc::new(row), Arc::new(col));
        Self::new(
            n * m * m,
            format!("(M_{m}(R_{n}), M_{m}(C_{n}))"),
            reshaped_schatten(m, n * m, row.clone(), f64::INFINITY),
            reshaped_schatten(n * m, m, col.clone(), f64::INFINITY),
        )
        .with_duals(reshaped_schatten(m, n * m, row, 1.0), reshaped_schatten(n * m, m, col, 1.0))
    }
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Schatten `p` norm of the `rows x cols` matrix whose entry `pos[i]` is `x_i`.
pub fn reshaped_schatten(rows: usize, cols: usize, pos: Arc<Vec<(usize, usize)>>, p: f64) -> NormOracle {
    Arc::new(move |x: &[C64]| {
        let mut m = ComplexMatrix::zeros(rows, cols);
        for (v, &(r, c)) in x.iter().zip(pos.iter()) {
            m[(r, c)] = *v;
        }
        match schatten_with_grad(&m, p) {
            Ok((v, g)) => (v, pos.iter().map(|&(r, c)| g[(r, c)]).collect()),
            Err(_) => (f64::NAN, vec![ZERO; x.len()]),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpConfig {
    /// `N`: frequencies `k delta` for `0 < |k| <= N`.
    pub degree: usize,
    /// Boundary nodes per period used by the optimizer.
    pub grid: usize,
    /// `delta`.
    pub spacing: f64,
    /// Certification grid is `refine * grid` nodes.
    pub refine: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self { degree: 12, grid: 64, spacing: 0.25, refine: 16, max_iter: 60, seed: 0 }
    }
}

const TEMPERATURES: [f64; 3] = [0.02, 2e-3, 2e-4];

/// `base + sum_k c_k w_k(z)`; `w_k = e^{lambda_k (z - theta)} - shift`.
struct Family<'a> {
    couple: &'a CompatibleCouple,
    theta: f64,
    base: Vec<C64>,
    lambdas: Vec<f64>,
    shift: f64,
    spacing: f64,
}

impl Family<'_> {
    fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.spacing
    }

    fn weights(&self, side: f64, t: f64) -> Vec<C64> {
        self.lambdas.iter().map(|&l| (C64::new(side - self.theta, t) * l).exp() - self.shift).collect()
    }

    fn at(&self, w: &[C64], c: &[Vec<C64>]) -> Vec<C64> {
        let mut f = self.base.clone();
        for (wk, ck) in w.iter().zip(c) {
            for (fi, ci) in f.iter_mut().zip(ck) {
                *fi += wk * ci;
            }
        }
        f
    }

    fn nodes(&self, count: usize) -> Vec<(usize, Vec<C64>)> {
        let h = self.period() / count as f64;
        let mut out = Vec::with_capacity(2 * count);
        for side in 0..2 {
            for j in 0..count {
                out.push((side, self.weights(side as f64, j as f64 * h)));
            }
        }
        out
    }

    fn norm(&self, side: usize, f: &[C64]) -> (f64, Vec<C64>) {
        if side == 0 {
            (self.couple.norm0)(f)
        } else {
            (self.couple.norm1)(f)
        }
    }

    /// Certified `max(sup_t |f(it)|_0, sup_t |f(1+it)|_1)`.
    fn certified(&self, c: &[Vec<C64>], refine: usize, grid: usize) -> f64 {
        let top = self.lambdas.iter().zip(c).filter(|(_, ck)| ck.iter().any(|z| *z != ZERO)).map(|(l, _)| l.abs()).fold(0.0, f64::max);
        if top == 0.0 {
            let f = self.at(&self.weights(0.0, 0.0), c);
            return self.norm(0, &f).0.max(self.norm(1, &f).0);
        }
        let m = refine * grid;
        let h = self.period() / m as f64;
        let ht = h * top;
        if ht * ht >= 8.0 {
            return f64::INFINITY;
        }
        let mut best: f64 = 0.0;
        for (side, w) in self.nodes(m) {
            best = best.max(self.norm(side, &self.at(&w, c)).0);
        }
        best / (1.0 - ht * ht / 8.0)
    }

    fn pack(c: &[Vec<C64>]) -> Vec<f64> {
        c.iter().flatten().flat_map(|z| [z.re, z.im]).collect()
    }

    fn unpack(&self, x: &[f64], dim: usize) -> Vec<Vec<C64>> {
        x.chunks(2 * dim).map(|ch| ch.chunks(2).map(|p| C64::new(p[0], p[1])).collect()).collect()
    }

    /// `tau log sum exp(log |f(z_j)| / tau)` and its gradient in the coefficients.
    fn smooth(&self, nodes: &[(usize, Vec<C64>)], c: &[Vec<C64>], tau: f64) -> Option<(f64, Vec<Vec<C64>>)> {
        let mut logs = Vec::with_capacity(nodes.len());
        let mut grads = Vec::with_capacity(nodes.len());
        for (side, w) in nodes {
            let (v, g) = self.norm(*side, &self.at(w, c));
            if !(v > 0.0) || !v.is_finite() {
                return None;
            }
            logs.push(v.ln());
            grads.push((v, g));
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ws: Vec<f64> = logs.iter().map(|l| ((l - top) / tau).exp()).collect();
        let total: f64 = ws.iter().sum();
        let value = top + tau * total.ln();
        let dim = self.base.len();
        let mut grad = vec![vec![ZERO; dim]; c.len()];
        for ((_, w), ((v, g), wt)) in nodes.iter().zip(grads.iter().zip(&ws)) {
            let s = wt / (total * v);
            for (k, wk) in w.iter().enumerate() {
                let f = wk.conj() * s;
                for (gi, g0) in grad[k].iter_mut().zip(g) {
                    *gi += f * g0;
                }
            }
        }
        Some((value, grad))
    }
}

/// Best analytic family found and its certified value.
#[derive(Debug, Clone, Serialize)]
pub struct InterpUpper {
    pub value: f64,
    /// Degree at which `value` was reached.
    pub degree: usize,
}

fn lambdas(degree: usize, spacing: f64, with_zero: bool) -> Vec<f64> {
    let mut out = Vec::new();
    if with_zero {
        out.push(0.0);
    }
    for k in 1..=degree {
        out.push(k as f64 * spacing);
        out.push(-(k as f64) * spacing);
    }
    out
}

fn check_theta(theta: f64, couple: &CompatibleCouple, x: &[C64]) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::domain(format!("theta must lie in [0, 1], got {theta}")));
    }
    if x.len() != couple.dim {
        return Err(Error::shape(format!("{} coordinates for a {}-dimensional couple", x.len(), couple.dim)));
    }
    Ok(())
}

/// Minimize the certified boundary sup over families with `f(theta) = x`.
///
/// Degrees `0..=N` are optimized in turn, each warm-started from the last, and
/// the smallest certified value is kept, so the result never increases with `N`.
pub fn interp_upper(couple: &CompatibleCouple, theta: f64, x: &[C64], cfg: &InterpConfig) -> Result<InterpUpper> {
    check_theta(theta, couple, x)?;
    if theta == 0.0 {
        return Ok(InterpUpper { value: (couple.norm0)(x).0, degree: 0 });
    }
    if theta == 1.0 {
        return Ok(InterpUpper { value: (couple.norm1)(x).0, degree: 0 });
    }
    let dim = couple.dim;
    let constant = (couple.norm0)(x).0.max((couple.norm1)(x).0);
    let mut best = InterpUpper { value: constant, degree: 0 };
    if constant == 0.0 {
        return Ok(best);
    }
    let mut c: Vec<Vec<C64>> = Vec::new();
    for n in 1..=cfg.degree {
        c.push(vec![ZERO; dim]);
        c.push(vec![ZERO; dim]);
        let fam = Family { couple, theta, base: x.to_vec(), lambdas: lambdas(n, cfg.spacing, false), shift: 1.0, spacing: cfg.spacing };
        let nodes = fam.nodes(cfg.grid);
        for &tau in &TEMPERATURES {
            let res = lbfgs(
                |v, out| {
                    let cc = fam.unpack(v, dim);
                    match fam.smooth(&nodes, &cc, tau) {
                        Some((val, g)) => {
                            out.copy_from_slice(&Family::pack(&g));
                            val
                        }
                        None => f64::INFINITY,
                    }
                },
                Family::pack(&c),
                cfg.max_iter,
                1e-12,
            );
            c = fam.unpack(&res.x, dim);
        }
        let v = fam.certified(&c, cfg.refine, cfg.grid);
        if v < best.value {
            best = InterpUpper { value: v, degree: n };
        }
    }
    Ok(best)
}

/// A dual family value `y = g(theta)` and the lower bound it certifies.
#[derive(Debug, Clone, Serialize)]
pub struct InterpLower {
    pub value: f64,
    pub witness: Vec<C64>,
}

fn pairing(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `|<x, g(theta)>| / M(g)` maximized over families `g` in the dual couple.
pub fn interp_lower(couple: &CompatibleCouple, theta: f64, x: &[C64], cfg: &InterpConfig) -> Result<InterpLower> {
    check_theta(theta, couple, x)?;
    let dual = couple.dual().ok_or_else(|| Error::Unsupported("couple has no dual norm oracles".into()))?;
    let dim = couple.dim;
    if x.iter().all(|z| *z == ZERO) {
        return Ok(InterpLower { value: 0.0, witness: vec![ZERO; dim] });
    }
    let g0: Vec<C64> = (couple.norm0)(x).1.iter().map(|z| z.conj()).collect();
    let g1: Vec<C64> = (couple.norm1)(x).1.iter().map(|z| z.conj()).collect();
    let ratio = |y: &[C64], m: f64| pairing(x, y).norm() / m;
    if theta == 0.0 || theta == 1.0 {
        let (y, d) = if theta == 0.0 { (g0, &dual.norm0) } else { (g1, &dual.norm1) };
        let m = d(&y).0;
        return Ok(InterpLower { value: ratio(&y, m), witness: y });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mid: Vec<C64> = g0.iter().zip(&g1).map(|(a, b)| a + b).collect();
    let spread = mid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() * 0.3 / (dim as f64).sqrt();
    let noise = ComplexMatrix::random_gaussian(dim, 1, &mut rng);
    let noisy: Vec<C64> = mid.iter().zip(noise.data()).map(|(a, r)| a + r * spread).collect();
    let fam = Family {
        couple: &dual,
        theta,
        base: vec![ZERO; dim],
        lambdas: lambdas(cfg.degree, cfg.spacing, true),
        shift: 0.0,
        spacing: cfg.spacing,
    };
    let nodes = fam.nodes(cfg.grid);
    let mut best = InterpLower { value: 0.0, witness: vec![ZERO; dim] };
    for start in [g0.clone(), g1.clone(), mid, noisy] {
        let mut c = vec![vec![ZERO; dim]; fam.lambdas.len()];
        c[0] = start;
        for &tau in &TEMPERATURES {
            let res = lbfgs(
                |v, out| {
                    let cc = fam.unpack(v, dim);
                    let y = sum_coeffs(&cc, dim);
                    let r = pairing(x, &y).re;
                    if r <= 0.0 {
                        return f64::INFINITY;
                    }
                    match fam.smooth(&nodes, &cc, tau) {
                        Some((val, mut g)) => {
                            for gk in g.iter_mut() {
                                for (gi, xi) in gk.iter_mut().zip(x) {
                                    *gi -= xi.conj() / r;
                                }
                            }
                            out.copy_from_slice(&Family::pack(&g));
                            val - r.ln()
                        }
                        None => f64::INFINITY,
                    }
                },
                Family::pack(&c),
                cfg.max_iter,
                1e-12,
            );
            c = fam.unpack(&res.x, dim);
        }
        let y = sum_coeffs(&c, dim);
        let v = ratio(&y, fam.certified(&c, cfg.refine, cfg.grid));
        if v > best.value {
            best = InterpLower { value: v, witness: y };
        }
    }
    Ok(best)
}

fn sum_coeffs(c: &[Vec<C64>], dim: usize) -> Vec<C64> {
    let mut y = vec![ZERO; dim];
    for ck in c {
        for (yi, ci) in y.iter_mut().zip(ck) {
            *yi += ci;
        }
    }
    y
}

/// Interpolation bracket `[interp_lower, interp_upper]`.
pub fn interp_bracket(couple: &CompatibleCouple, theta: f64, x: &[C64], cfg: &InterpConfig) -> Result<(f64, f64)> {
    let up = interp_upper(couple, theta, x, cfg)?;
    let low = interp_lower(couple, theta, x, cfg)?;
    Ok((low.value, up.value))
}

/// Which couple `couples_theorem_check` runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoupleChoice {
    /// `E_0 = E_1 = C`: `(S_p0^d, S_p1^d)_theta = S_p^d`.
    Scalar { d: usize, p0: f64, p1: f64 },
    /// `p0 = p1 = inf`, `E_0 = R_n`, `E_1 = C_n`: the midpoint is `M_m(OH_n)`.
    RowColumn { m: usize, n: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupleSample {
    pub lower: f64,
    pub upper: f64,
    pub direct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplesReport {
    pub choice: CoupleChoice,
    pub theta: f64,
    pub samples: Vec<CoupleSample>,
    /// Largest `max(direct - lower, upper - direct) / direct`.
    pub max_relative_gap: f64,
    pub pass: bool,
}

/// Interpolate the endpoint norms and compare with the directly computed norm
/// of the interpolated space on random samples.
pub fn couples_theorem_check(choice: &CoupleChoice, theta: f64, samples: usize, cfg: &InterpConfig, tol: f64) -> Result<CouplesReport> {
    let (couple, direct): (CompatibleCouple, Box<dyn Fn(&[C64]) -> Result<f64>>) = match *choice {
        CoupleChoice::Scalar { d, p0, p1 } => {
            let inv = (1.0 - theta) / p0 + theta / p1;
            let p = if inv == 0.0 { f64::INFINITY } else { 1.0 / inv };
            (
                CompatibleCouple::schatten(d, p0, p1),
                Box::new(move |x: &[C64]| ComplexMatrix::new(d, d, x.to_vec())?.schatten_norm(p)),
            )
        }
        CoupleChoice::RowColumn { m, n } => {
            if theta != 0.5 {
                return Err(Error::Unsupported("the row/column couple is only computable at theta = 1/2".into()));
            }
            let oh = OhSpace::new(n)?;
            (
                CompatibleCouple::row_column(m, n),
                Box::new(move |x: &[C64]| {
                    let blocks: Vec<ComplexMatrix> = x.chunks(m * m).map(|b| ComplexMatrix::new(m, m, b.to_vec())).collect::<Result<_>>()?;
                    oh.level_norm(&blocks)
                }),
            )
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = ComplexMatrix::random_gaussian(couple.dim, 1, &mut rng).into_data();
        let (lower, upper) = interp_bracket(&couple, theta, &x, cfg)?;
        out.push(CoupleSample { lower, upper, direct: direct(&x)? });
    }
    let max_relative_gap = out
        .iter()
        .map(|s| ((s.direct - s.lower).max(s.upper - s.direct)) / s.direct)
        .fold(0.0, f64::max);
    Ok(CouplesReport { choice: choice.clone(), theta, samples: out, max_relative_gap, pass: max_relative_gap <= tol })
}
