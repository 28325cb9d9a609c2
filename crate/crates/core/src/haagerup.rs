//! Haagerup tensor norms on `M_n(E (x)_h F)`.
//!
//! `x = sum X_ij (x) e_i (x) f_j` is factored as `X_ij = Y_i Z_j` with
//! `y = sum Y_i (x) e_i` in `M_{n,r}(E)` and `z = sum Z_j (x) f_j` in
//! `M_{r,n}(F)`. Stacking `Y = [Y_1; ..; Y_k]` and `Z = [Z_1 .. Z_l]` turns the
//! constraint into `Y Z = X`. Any factorization can be compressed to inner
//! rank `rho = rank X` without increasing either norm, so every minimal one is
//! `Y = P G`, `Z = G^-1 Q` for a fixed rank factorization `X = P Q` and an
//! invertible `G`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bracket::{NormBracket, Witness};
use crate::config::SearchConfig;
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64, ONE, ZERO};
use crate::opspace::{min_tensor_norm, oh_space, scalar_space, MatrixNormFamily, Space, TensorCoeffs};
use crate::optim::{lbfgs, pack, unpack, write_grad};
use crate::schatten::{
    best_in_ball, chain_lower, factorize, sp_matrix_norm, BlockSpec, Chain, Leg, SpElement, SpMatrixElement, CONTINUATION,
};

/// `x = y (.) z` with `‖y‖ ‖z‖ = value`.
#[derive(Debug, Clone, Serialize)]
pub struct HaagerupFactorization {
    /// `n x r` coefficients, one per basis vector of `E`.
    pub y: Vec<ComplexMatrix>,
    /// `r x n` coefficients, one per basis vector of `F`.
    pub z: Vec<ComplexMatrix>,
    pub inner_rank: usize,
    pub value: f64,
    pub reconstruction_error: f64,
}

fn level(e: &Space, f: &Space, x: &TensorCoeffs) -> Result<usize> {
    if x.len() != e.dim() || x.iter().any(|row| row.len() != f.dim()) {
        return Err(Error::shape("tensor coefficients do not match dim(E) x dim(F)"));
    }
    let n = x[0][0].rows();
    if x.iter().flatten().any(|m| m.shape() != (n, n)) {
        return Err(Error::shape("tensor coefficients must be square and share one size"));
    }
    Ok(n)
}

fn stack(x: &TensorCoeffs, n: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(x.len() * n, x[0].len() * n);
    for (i, row) in x.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            s.set_block(i * n, j * n, m);
        }
    }
    s
}

fn split_rows(m: &ComplexMatrix, k: usize, n: usize) -> Vec<ComplexMatrix> {
    (0..k).map(|i| m.block(i * n, 0, n, m.cols())).collect()
}

fn split_cols(m: &ComplexMatrix, l: usize, n: usize) -> Vec<ComplexMatrix> {
    (0..l).map(|j| m.block(0, j * n, m.rows(), n)).collect()
}

fn join_rows(parts: &[ComplexMatrix]) -> ComplexMatrix {
    let (n, c) = parts[0].shape();
    let mut s = ComplexMatrix::zeros(parts.len() * n, c);
    for (i, p) in parts.iter().enumerate() {
        s.set_block(i * n, 0, p);
    }
    s
}

fn join_cols(parts: &[ComplexMatrix]) -> ComplexMatrix {
    let (r, n) = parts[0].shape();
    let mut s = ComplexMatrix::zeros(r, parts.len() * n);
    for (j, p) in parts.iter().enumerate() {
        s.set_block(0, j * n, p);
    }
    s
}

struct Problem<'a> {
    e: &'a Space,
    f: &'a Space,
    p: ComplexMatrix,
    q: ComplexMatrix,
    n: usize,
}

impl Problem<'_> {
    fn legs(&self, g: &ComplexMatrix) -> Result<(Vec<ComplexMatrix>, Vec<ComplexMatrix>)> {
        let gi = g.inverse()?;
        Ok((split_rows(&(&self.p * g), self.e.dim(), self.n), split_cols(&(&gi * &self.q), self.f.dim(), self.n)))
    }

    fn exact(&self, g: &ComplexMatrix) -> f64 {
        match self.legs(g) {
            Ok((y, z)) => match (self.e.level_norm(&y), self.f.level_norm(&z)) {
                (Ok(a), Ok(b)) if (a * b).is_finite() => a * b,
                _ => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        }
    }

    /// `log s_E(y) + log s_F(z)` at surrogate order `r`, gradient in `G`.
    fn objective(&self, g: &ComplexMatrix, r: f64) -> Result<(f64, ComplexMatrix)> {
        let gi = g.inverse()?;
        let yy = &self.p * g;
        let zz = &gi * &self.q;
        let (se, gy) = self.e.surrogate_with_grad(&split_rows(&yy, self.e.dim(), self.n), r)?;
        let (sf, gz) = self.f.surrogate_with_grad(&split_cols(&zz, self.f.dim(), self.n), r)?;
        if se <= 0.0 || sf <= 0.0 {
            return Err(Error::Numerical { what: "degenerate Haagerup leg".into(), residual: se.min(sf) });
        }
        let gy = join_rows(&gy).scale_real(1.0 / se);
        let gz = join_cols(&gz).scale_real(1.0 / sf);
        // dZ = -G^-1 dG Z
        let grad = &(&self.p.adjoint() * &gy) - &(&(&gi.adjoint() * &gz) * &zz.adjoint());
        Ok((se.ln() + sf.ln(), grad))
    }

    fn run(&self, mut g: ComplexMatrix, max_iter: usize) -> (f64, ComplexMatrix) {
        let rho = g.rows();
        let mut best = (self.exact(&g), g.clone());
        for &r in &CONTINUATION {
            let mut x0 = Vec::new();
            pack(&g, &mut x0);
            let res = lbfgs(
                |x, out| {
                    let mut off = 0;
                    let gm = unpack(x, &mut off, rho, rho);
                    match self.objective(&gm, r) {
                        Ok((v, gr)) if v.is_finite() => {
                            let mut off = 0;
                            write_grad(&gr, out, &mut off);
                            v
                        }
                        _ => f64::INFINITY,
                    }
                },
                x0,
                max_iter,
                1e-12,
            );
            let mut off = 0;
            g = unpack(&res.x, &mut off, rho, rho);
            let scale = g.frobenius_norm() / (rho as f64).sqrt();
            if scale > 0.0 && scale.is_finite() {
                g = g.scale_real(1.0 / scale);
            }
            let v = self.exact(&g);
            if v < best.0 {
                best = (v, g.clone());
            }
        }
        best
    }
}

/// Best factorization `x = y (.) z` found; inner rank is `rank X`, which must
/// not exceed `max_inner_rank` (default `n min(dim E, dim F)`).
pub fn haagerup_norm_upper(
    e: &Space,
    f: &Space,
    x: &TensorCoeffs,
    max_inner_rank: Option<usize>,
    search: &SearchConfig,
) -> Result<HaagerupFactorization> {
    let n = level(e, f, x)?;
    let big = stack(x, n);
    let cap = max_inner_rank.unwrap_or(n * e.dim().min(f.dim()));
    let s = big.svd()?;
    let top = s.sigma.first().copied().unwrap_or(0.0);
    let rho = s.sigma.iter().filter(|&&v| v > 1e-12 * top).count();
    if rho == 0 {
        return Ok(HaagerupFactorization {
            y: vec![ComplexMatrix::zeros(n, 1); e.dim()],
            z: vec![ComplexMatrix::zeros(1, n); f.dim()],
            inner_rank: 0,
            value: 0.0,
            reconstruction_error: 0.0,
        });
    }
    if rho > cap {
        return Err(Error::Input(format!("tensor has rank {rho}, above the inner rank cap {cap}")));
    }
    let root: Vec<f64> = s.sigma[..rho].iter().map(|v| v.sqrt()).collect();
    let p = ComplexMatrix::from_fn(big.rows(), rho, |i, k| s.u[(i, k)] * root[k]);
    let q = ComplexMatrix::from_fn(rho, big.cols(), |k, j| s.v[(j, k)].conj() * root[k]);
    let prob = Problem { e, f, p, q, n };
    let runs: Vec<(f64, ComplexMatrix)> = (0..search.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut g = ComplexMatrix::identity(rho);
            if r > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(search.restart_seed(r));
                g = &g + &ComplexMatrix::random_gaussian(rho, rho, &mut rng).scale_real(0.3 / (rho as f64).sqrt());
            }
            prob.run(g, search.max_iter)
        })
        .collect();
    let (value, g) = runs.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("at least one restart");
    if !value.is_finite() {
        return Err(Error::Numerical { what: "no invertible Haagerup factorization".into(), residual: value });
    }
    let (y, z) = prob.legs(&g)?;
    let t = (f.level_norm(&z)? / e.level_norm(&y)?).sqrt();
    let y: Vec<ComplexMatrix> = y.iter().map(|m| m.scale_real(t)).collect();
    let z: Vec<ComplexMatrix> = z.iter().map(|m| m.scale_real(1.0 / t)).collect();
    let mut err = 0.0;
    for (i, row) in x.iter().enumerate() {
        for (j, xij) in row.iter().enumerate() {
            err += (&(&y[i] * &z[j]) - xij).frobenius_norm().powi(2);
        }
    }
    Ok(HaagerupFactorization {
        value: e.level_norm(&y)? * f.level_norm(&z)?,
        y,
        z,
        inner_rank: rho,
        reconstruction_error: err.sqrt() / big.frobenius_norm(),
    })
}

/// A lower bound and what attains it.
#[derive(Debug, Clone, Serialize)]
pub struct HaagerupLower {
    pub value: f64,
    pub witness: Option<Witness>,
}

/// `‖sum_ij X_ij (x) (b_i (x) I_s) W (b'_j (x) I_s)‖` over contractions `W`:
/// every such product map is a complete contraction on `E (x)_h F`.
fn multiplier_lower(e: &Space, f: &Space, x: &TensorCoeffs, search: &SearchConfig) -> Result<HaagerupLower> {
    const S: usize = 2;
    let (Some(ce), Some(cf)) = (e.as_concrete(), f.as_concrete()) else {
        return Ok(HaagerupLower { value: 0.0, witness: None });
    };
    let n = x[0][0].rows();
    let is = ComplexMatrix::identity(S);
    let bl: Vec<ComplexMatrix> = ce.basis().iter().map(|b| b.kron(&is)).collect();
    let br: Vec<ComplexMatrix> = cf.basis().iter().map(|b| b.kron(&is)).collect();
    let (d1, d2) = (bl[0].rows(), br[0].rows());
    let apply = |w: &ComplexMatrix| {
        let mut out = ComplexMatrix::zeros(n * d1, n * d2);
        for (i, row) in x.iter().enumerate() {
            for (j, xij) in row.iter().enumerate() {
                out.axpy(ONE, &xij.kron(&(&(&bl[i] * w) * &br[j])));
            }
        }
        out
    };
    // gradient of Re<H, M(W)> in W
    let adjoint = |h: &ComplexMatrix| {
        let mut g = ComplexMatrix::zeros(d1, d2);
        for (i, row) in x.iter().enumerate() {
            for (j, xij) in row.iter().enumerate() {
                let mut hij = ComplexMatrix::zeros(d1, d2);
                for a in 0..n {
                    for b in 0..n {
                        if xij[(a, b)] != ZERO {
                            hij.axpy(xij[(a, b)].conj(), &h.block(a * d1, b * d2, d1, d2));
                        }
                    }
                }
                g.axpy(ONE, &(&(&bl[i].adjoint() * &hij) * &br[j].adjoint()));
            }
        }
        g
    };
    let runs: Vec<(f64, ComplexMatrix)> = (0..search.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut w = if r == 0 {
                ComplexMatrix::from_fn(d1, d2, |i, j| if i == j { ONE } else { ZERO })
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(search.restart_seed(r));
                let g = ComplexMatrix::random_gaussian(d1, d2, &mut rng);
                best_in_ball(&g.adjoint(), f64::INFINITY).unwrap_or(g)
            };
            let mut best = (apply(&w).operator_norm(), w.clone());
            for _ in 0..search.max_iter {
                let m = apply(&w);
                let Ok(s) = m.svd() else { break };
                let h = &s.u.block(0, 0, s.u.rows(), 1) * &s.v.block(0, 0, s.v.rows(), 1).adjoint();
                let Ok(next) = best_in_ball(&adjoint(&h).adjoint(), f64::INFINITY) else { break };
                w = next;
                let v = apply(&w).operator_norm();
                let gain = v - best.0;
                if gain > 0.0 {
                    best = (v, w.clone());
                }
                if gain <= 1e-13 * v.max(1e-300) {
                    break;
                }
            }
            best
        })
        .collect();
    let (value, w) = runs.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("at least one restart");
    Ok(HaagerupLower { value, witness: Some(Witness::Multiplier { w }) })
}

/// Slice against a unit vector `beta` on an OH side: `id (x) beta` is a
/// complete contraction `E (x)_h OH -> E`. `oh_left` slices the `E` side.
fn slice_lower(e: &Space, f: &Space, x: &TensorCoeffs, oh_left: bool, search: &SearchConfig) -> Result<HaagerupLower> {
    let (k, l) = (e.dim(), f.dim());
    let len = if oh_left { k } else { l };
    let other = if oh_left { f } else { e };
    let slice = |beta: &[C64]| -> Vec<ComplexMatrix> {
        if oh_left {
            (0..l)
                .map(|j| {
                    let mut s = ComplexMatrix::zeros(x[0][0].rows(), x[0][0].cols());
                    for i in 0..k {
                        s.axpy(beta[i], &x[i][j]);
                    }
                    s
                })
                .collect()
        } else {
            (0..k)
                .map(|i| {
                    let mut s = ComplexMatrix::zeros(x[0][0].rows(), x[0][0].cols());
                    for j in 0..l {
                        s.axpy(beta[j], &x[i][j]);
                    }
                    s
                })
                .collect()
        }
    };
    let normalize = |b: Vec<C64>| -> Option<Vec<C64>> {
        let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (nb > 0.0).then(|| b.into_iter().map(|z| z / nb).collect())
    };
    let runs: Vec<(f64, Vec<C64>)> = (0..search.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(search.restart_seed(r) ^ 0x51ce);
            let g = ComplexMatrix::random_gaussian(len, 1, &mut rng);
            let mut beta = normalize(g.data().to_vec()).unwrap_or_else(|| vec![ONE; len]);
            let mut best = (0.0, beta.clone());
            for _ in 0..search.max_iter {
                let Ok((v, grads)) = other.surrogate_with_grad(&slice(&beta), f64::INFINITY) else { break };
                let gain = v - best.0;
                if gain > 0.0 {
                    best = (v, beta.clone());
                }
                if gain <= 1e-13 * v.max(1e-300) {
                    break;
                }
                let g: Vec<C64> = (0..len)
                    .map(|t| {
                        grads
                            .iter()
                            .enumerate()
                            .map(|(s, gs)| if oh_left { x[t][s].inner(gs) } else { x[s][t].inner(gs) })
                            .sum()
                    })
                    .collect();
                match normalize(g) {
                    Some(b) => beta = b,
                    None => break,
                }
            }
            best
        })
        .collect();
    let (value, beta) = runs.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("at least one restart");
    let coeffs = beta.iter().map(|&z| ComplexMatrix::from_fn(1, 1, |_, _| z)).collect();
    Ok(HaagerupLower { value, witness: Some(Witness::Functional { coeffs }) })
}

/// Largest of the minimal tensor norm, the multiplier bound (two concrete
/// spaces) and OH slices.
pub fn haagerup_norm_lower(e: &Space, f: &Space, x: &TensorCoeffs, search: &SearchConfig) -> Result<HaagerupLower> {
    level(e, f, x)?;
    let mut best = HaagerupLower { value: 0.0, witness: None };
    if x.iter().flatten().all(|m| m.max_abs() == 0.0) {
        return Ok(best);
    }
    let mut candidates = Vec::new();
    if e.is_concrete() && f.is_concrete() {
        candidates.push(HaagerupLower { value: min_tensor_norm(e, f, x)?, witness: Some(Witness::Exact) });
        candidates.push(multiplier_lower(e, f, x, search)?);
    }
    if matches!(f, Space::Oh(_)) {
        candidates.push(slice_lower(e, f, x, false, search)?);
    }
    if matches!(e, Space::Oh(_)) {
        candidates.push(slice_lower(e, f, x, true, search)?);
    }
    for c in candidates {
        if c.value > best.value {
            best = c;
        }
    }
    Ok(best)
}

/// Bracket on `‖x‖_{M_n(E (x)_h F)}`.
pub fn haagerup_norm(e: &Space, f: &Space, x: &TensorCoeffs, search: &SearchConfig) -> Result<NormBracket> {
    let n = level(e, f, x)?;
    let up = haagerup_norm_upper(e, f, x, None, search)?;
    if up.value == 0.0 {
        return Ok(NormBracket::zero());
    }
    if n == 1 && up.inner_rank == 1 {
        return Ok(NormBracket::exact(up.value, "elementary tensor: cross norm"));
    }
    let low = haagerup_norm_lower(e, f, x, search)?;
    Ok(NormBracket {
        lower: low.value,
        upper: up.value,
        lower_witness: low.witness,
        upper_certificate: format!(
            "x = y (.) z with inner rank {}, reconstruction error {:.2e}",
            up.inner_rank, up.reconstruction_error
        ),
    })
}

/// `‖u‖` in `OH_m (x)_h E (x)_h OH_m`, with `u` in `S_2^m[E]` read as a
/// three-fold tensor.
pub fn theorem1_s2_norm(u: &SpElement, search: &SearchConfig) -> Result<NormBracket> {
    if u.p != 2.0 {
        return Err(Error::domain(format!("three-fold OH norm needs p = 2, got {}", u.p)));
    }
    if u.is_zero() {
        return Ok(NormBracket::zero());
    }
    let chain = Chain { legs: vec![Leg::fixed(u.m)], block: BlockSpec::for_exponent(0, u.m, 2.0) };
    let up = factorize(&u.space, &u.coeffs, &chain, search)?;
    let low = chain_lower(&u.space, &u.coeffs, &chain, &up, search)?;
    Ok(NormBracket {
        lower: low.value,
        upper: up.value,
        lower_witness: Some(Witness::Functional { coeffs: low.functional }),
        upper_certificate: format!(
            "u = 𝔄 v 𝔅 with OH_m-valued legs, reconstruction error {:.2e}",
            up.reconstruction_error
        ),
    })
}

/// One matched sample of `M_k(S_2^n[E])` against `M_k(OH)`.
#[derive(Debug, Clone, Serialize)]
pub struct IsometrySample {
    pub lower: f64,
    pub upper: f64,
    pub oh: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryReport {
    pub n: usize,
    pub k: usize,
    pub space: String,
    pub samples: Vec<IsometrySample>,
    pub max_relative_gap: f64,
    pub pass: bool,
}

/// OH coordinates of `x` in `M_k(S_2^n[E])`: index `(r, c, e)` holds the
/// `k x k` matrix `x_e[r k + a, c k + b]`.
pub fn oh_coordinates(coeffs: &[ComplexMatrix], n: usize, k: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(n * n * coeffs.len());
    for r in 0..n {
        for c in 0..n {
            for x in coeffs {
                out.push(x.block(r * k, c * k, k, k));
            }
        }
    }
    out
}

/// Compare `M_k(S_2^n[E])` with `M_k(OH_{n^2 dim E})` on random samples, for
/// `E` scalar or `OH_j`.
pub fn s2_oh_isometry_check(
    n: usize,
    k: usize,
    space: &Space,
    samples: usize,
    search: &SearchConfig,
    tol: f64,
) -> Result<IsometryReport> {
    if !(matches!(space, Space::Oh(_)) || *space == scalar_space()) {
        return Err(Error::Unsupported("isometry check takes E scalar or OH_j".into()));
    }
    let d = space.dim();
    let oh = oh_space(n * n * d);
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let coeffs: Vec<ComplexMatrix> = (0..d).map(|_| ComplexMatrix::random_gaussian(n * k, n * k, &mut rng)).collect();
        let x = SpMatrixElement::new(2.0, n, k, space.clone(), coeffs.clone())?;
        let b = sp_matrix_norm(&x, 0, search)?;
        let o = oh.level_norm(&oh_coordinates(&coeffs, n, k))?;
        let gap = (b.upper - o).abs().max((b.lower - o).abs()) / o;
        out.push(IsometrySample { lower: b.lower, upper: b.upper, oh: o, relative_gap: gap });
    }
    let max_relative_gap = out.iter().map(|s| s.relative_gap).fold(0.0, f64::max);
    Ok(IsometryReport { n, k, space: space.label(), samples: out, max_relative_gap, pass: max_relative_gap <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspace::{column_space, diag_space, row_space};

    fn identity_pattern(n: usize) -> TensorCoeffs {
        (0..n)
            .map(|i| (0..n).map(|j| ComplexMatrix::from_fn(1, 1, |_, _| if i == j { ONE } else { ZERO })).collect())
            .collect()
    }

    #[test]
    fn column_row_gives_operator_norm() {
        let x = identity_pattern(2);
        let b = haagerup_norm(&column_space(2), &row_space(2), &x, &SearchConfig::new(4, 1)).unwrap();
        assert!(b.contains(1.0, 1e-6), "{b:?}");
    }

    #[test]
    fn row_column_gives_trace_norm() {
        let x = identity_pattern(2);
        let b = haagerup_norm(&row_space(2), &column_space(2), &x, &SearchConfig::new(4, 1)).unwrap();
        assert!(b.lower >= 2.0 - 1e-6 && b.upper <= 2.0 + 1e-6, "{b:?}");
    }

    #[test]
    fn elementary_tensor_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ComplexMatrix::random_gaussian(2, 1, &mut rng);
        let c = ComplexMatrix::random_gaussian(3, 1, &mut rng);
        let x: TensorCoeffs =
            (0..2).map(|i| (0..3).map(|j| ComplexMatrix::from_fn(1, 1, |_, _| a[(i, 0)] * c[(j, 0)])).collect()).collect();
        let (e, f) = (diag_space(2), oh_space(3));
        let b = haagerup_norm(&e, &f, &x, &SearchConfig::new(2, 0)).unwrap();
        let ne = e.level_norm(&[a.block(0, 0, 1, 1), a.block(1, 0, 1, 1)]).unwrap();
        let nf = c.frobenius_norm();
        assert!((b.lower - ne * nf).abs() < 1e-9 && b.width() == 0.0, "{b:?}");
    }

}
