//! Factorization upper bounds `U_i = T V_i S`.
//!
//! The coefficient index space is a product of legs (first leg outermost).
//! `T = A 𝔄` and `S = 𝔅 B` where `A`, `B` are Kronecker products of per-leg
//! factors (a free leg of exponent `q` costs `|a|_q |b|_q`, a fixed leg is the
//! identity) and the optional block factors `𝔄`, `𝔅` are charged the level
//! norm of their blocks along one leg in a row/column/OH family. The bound is
//! `prod |a_l| |b_l| * N_left(𝔄) N_right(𝔅) * |V|_{M_M(E)}`.
//!
//! With the block on the `S_q` leg and families `C, OH, R` for `q = inf, 2, 1`
//! (and `R, OH, C` on the right) this is the Haagerup description of matrix
//! levels of `S_q[E]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::SearchConfig;
use crate::error::{Error, Result};
use crate::matrix::{schatten_with_grad, ComplexMatrix, C64, ONE, ZERO};
use crate::opspace::{column_space, oh_space, row_space, MatrixNormFamily, Space};
use crate::optim::{lbfgs, pack, unpack, write_grad};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub size: usize,
    /// Exponent on the leg factors (`2p` for an `S_p` leg).
    pub exponent: f64,
    pub free: bool,
}

impl Leg {
    pub fn free(size: usize, exponent: f64) -> Self {
        Self { size, exponent, free: true }
    }

    pub fn fixed(size: usize) -> Self {
        Self { size, exponent: f64::INFINITY, free: false }
    }
}

/// Block factor along `leg`, charged in `left` / `right`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub leg: usize,
    /// The `S_q` exponent the families realize.
    pub q: f64,
    pub left: Space,
    pub right: Space,
}

impl BlockSpec {
    /// Families for an `S_q` leg of size `m`; only `q` in `{1, 2, inf}` has one.
    pub fn for_exponent(leg: usize, m: usize, q: f64) -> Option<Self> {
        let (left, right) = if q.is_infinite() {
            (column_space(m), row_space(m))
        } else if q == 1.0 {
            (row_space(m), column_space(m))
        } else if q == 2.0 {
            (oh_space(m), oh_space(m))
        } else {
            return None;
        };
        Some(Self { leg, q, left, right })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub legs: Vec<Leg>,
    pub block: Option<BlockSpec>,
}

impl Chain {
    pub fn legs(legs: Vec<Leg>) -> Self {
        Self { legs, block: None }
    }

    pub fn total(&self) -> usize {
        self.legs.iter().map(|l| l.size).product()
    }

    fn sizes(&self) -> Vec<usize> {
        self.legs.iter().map(|l| l.size).collect()
    }
}

#[derive(Debug, Clone)]
pub struct LegFactorization {
    pub a: Vec<ComplexMatrix>,
    pub b: Vec<ComplexMatrix>,
    /// `(𝔄, 𝔅)` when the chain has a block factor.
    pub block: Option<(ComplexMatrix, ComplexMatrix)>,
    pub v: Vec<ComplexMatrix>,
    pub value: f64,
    pub reconstruction_error: f64,
}

impl LegFactorization {
    /// `(T, S)` with `U = T V S`.
    pub fn outer_factors(&self) -> (ComplexMatrix, ComplexMatrix) {
        let mut t = kron_all(&self.a);
        let mut s = kron_all(&self.b);
        if let Some((ba, bb)) = &self.block {
            t = &t * ba;
            s = bb * &s;
        }
        (t, s)
    }
}

/// Smoothing orders for operator norms.
pub(crate) const CONTINUATION: [f64; 9] = [8.0, 32.0, 128.0, 512.0, 2048.0, 8192.0, 32768.0, 131072.0, 1048576.0];

pub(crate) fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1);
    for f in factors {
        out = out.kron(f);
    }
    out
}

fn split(mut idx: usize, sizes: &[usize], out: &mut [usize]) {
    for l in (0..sizes.len()).rev() {
        out[l] = idx % sizes[l];
        idx /= sizes[l];
    }
}

/// Gradient of `X -> Re <H, f_1 (x) .. X .. (x) f_L>` at leg `j`.
pub(crate) fn leg_gradient(h: &ComplexMatrix, factors: &[ComplexMatrix], j: usize) -> ComplexMatrix {
    let sizes: Vec<usize> = factors.iter().map(|f| f.rows()).collect();
    let total: usize = sizes.iter().product();
    let mut g = ComplexMatrix::zeros(sizes[j], sizes[j]);
    let mut ri = vec![0usize; sizes.len()];
    let mut ci = vec![0usize; sizes.len()];
    for row in 0..total {
        split(row, &sizes, &mut ri);
        for col in 0..total {
            let hv = h[(row, col)];
            if hv == ZERO {
                continue;
            }
            split(col, &sizes, &mut ci);
            let mut w = ONE;
            for (l, f) in factors.iter().enumerate() {
                if l != j {
                    w *= f[(ri[l], ci[l])].conj();
                }
            }
            g[(ri[j], ci[j])] += w * hv;
        }
    }
    g
}

/// Row index of `(leg value r, position i among the remaining legs)`.
fn block_rows(sizes: &[usize], leg: usize) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    let mut out = vec![Vec::new(); sizes[leg]];
    let mut idx = vec![0; sizes.len()];
    for row in 0..total {
        split(row, sizes, &mut idx);
        out[idx[leg]].push(row);
    }
    out
}

/// Blocks `alpha_r` (rows of `t` whose `leg` index is `r`).
pub(crate) fn row_blocks(t: &ComplexMatrix, sizes: &[usize], leg: usize) -> Vec<ComplexMatrix> {
    block_rows(sizes, leg)
        .iter()
        .map(|rows| ComplexMatrix::from_fn(rows.len(), t.cols(), |i, j| t[(rows[i], j)]))
        .collect()
}

fn merge_row_blocks(blocks: &[ComplexMatrix], sizes: &[usize], leg: usize, cols: usize) -> ComplexMatrix {
    let total: usize = sizes.iter().product();
    let mut out = ComplexMatrix::zeros(total, cols);
    for (b, rows) in blocks.iter().zip(block_rows(sizes, leg)) {
        for (i, &r) in rows.iter().enumerate() {
            for j in 0..cols {
                out[(r, j)] = b[(i, j)];
            }
        }
    }
    out
}

/// Blocks `gamma_c` (columns of `s` whose `leg` index is `c`).
pub(crate) fn col_blocks(s: &ComplexMatrix, sizes: &[usize], leg: usize) -> Vec<ComplexMatrix> {
    block_rows(sizes, leg)
        .iter()
        .map(|cols| ComplexMatrix::from_fn(s.rows(), cols.len(), |i, j| s[(i, cols[j])]))
        .collect()
}

fn merge_col_blocks(blocks: &[ComplexMatrix], sizes: &[usize], leg: usize, rows: usize) -> ComplexMatrix {
    let total: usize = sizes.iter().product();
    let mut out = ComplexMatrix::zeros(rows, total);
    for (b, cols) in blocks.iter().zip(block_rows(sizes, leg)) {
        for (j, &c) in cols.iter().enumerate() {
            for i in 0..rows {
                out[(i, c)] = b[(i, j)];
            }
        }
    }
    out
}

/// `N_left(t)` with its gradient, smoothed at order `r`.
pub(crate) fn left_block_norm(spec: &BlockSpec, sizes: &[usize], t: &ComplexMatrix, r: f64) -> Result<(f64, ComplexMatrix)> {
    let blocks = row_blocks(t, sizes, spec.leg);
    let (v, g) = spec.left.surrogate_with_grad(&blocks, r)?;
    Ok((v, merge_row_blocks(&g, sizes, spec.leg, t.cols())))
}

pub(crate) fn right_block_norm(spec: &BlockSpec, sizes: &[usize], s: &ComplexMatrix, r: f64) -> Result<(f64, ComplexMatrix)> {
    let blocks = col_blocks(s, sizes, spec.leg);
    let (v, g) = spec.right.surrogate_with_grad(&blocks, r)?;
    Ok((v, merge_col_blocks(&g, sizes, spec.leg, s.rows())))
}

/// `|x|_q`, with a Schatten-`r` surrogate standing in when `q` is infinite.
pub(crate) fn leg_norm(x: &ComplexMatrix, q: f64, r: f64) -> Result<(f64, ComplexMatrix)> {
    schatten_with_grad(x, if q.is_infinite() { r } else { q })
}

/// Start from the quarter power of the leg marginals of `sum U U*` and `sum U* U`.
fn marginal_start(coeffs: &[ComplexMatrix], legs: &[Leg]) -> Result<(Vec<ComplexMatrix>, Vec<ComplexMatrix>)> {
    let total: usize = legs.iter().map(|l| l.size).product();
    let mut left = ComplexMatrix::zeros(total, total);
    let mut right = ComplexMatrix::zeros(total, total);
    for u in coeffs {
        left.axpy(ONE, &(u * &u.adjoint()));
        right.axpy(ONE, &(&u.adjoint() * u));
    }
    let ids: Vec<ComplexMatrix> = legs.iter().map(|l| ComplexMatrix::identity(l.size)).collect();
    let marginal = |h: &ComplexMatrix, j: usize| -> Result<ComplexMatrix> {
        let m = leg_gradient(h, &ids, j).hermitian_part();
        let top = m.operator_norm().max(1e-300);
        let reg = &m + &ComplexMatrix::identity(m.rows()).scale_real(1e-6 * top);
        let q = reg.psd_power(0.25)?;
        let nq = q.operator_norm();
        Ok(q.scale_real(1.0 / nq))
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (j, leg) in legs.iter().enumerate() {
        if leg.free {
            a.push(marginal(&left, j)?);
            b.push(marginal(&right, j)?);
        } else {
            a.push(ComplexMatrix::identity(leg.size));
            b.push(ComplexMatrix::identity(leg.size));
        }
    }
    Ok((a, b))
}

#[derive(Clone)]
struct State {
    a: Vec<ComplexMatrix>,
    b: Vec<ComplexMatrix>,
    ba: ComplexMatrix,
    bb: ComplexMatrix,
}

struct Problem<'a> {
    space: &'a Space,
    coeffs: &'a [ComplexMatrix],
    chain: &'a Chain,
    sizes: Vec<usize>,
}

impl Problem<'_> {
    fn unpack(&self, x: &[f64], st: &mut State) {
        let mut off = 0;
        for (l, leg) in self.chain.legs.iter().enumerate() {
            if leg.free {
                st.a[l] = unpack(x, &mut off, leg.size, leg.size);
                st.b[l] = unpack(x, &mut off, leg.size, leg.size);
            }
        }
        if self.chain.block.is_some() {
            let m = self.chain.total();
            st.ba = unpack(x, &mut off, m, m);
            st.bb = unpack(x, &mut off, m, m);
        }
    }

    fn pack(&self, st: &State) -> Vec<f64> {
        let mut v = Vec::new();
        for (l, leg) in self.chain.legs.iter().enumerate() {
            if leg.free {
                pack(&st.a[l], &mut v);
                pack(&st.b[l], &mut v);
            }
        }
        if self.chain.block.is_some() {
            pack(&st.ba, &mut v);
            pack(&st.bb, &mut v);
        }
        v
    }

    fn outer(&self, st: &State) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix, ComplexMatrix) {
        let big_a = kron_all(&st.a);
        let big_b = kron_all(&st.b);
        let (t, s) = if self.chain.block.is_some() { (&big_a * &st.ba, &st.bb * &big_b) } else { (big_a.clone(), big_b.clone()) };
        (big_a, big_b, t, s)
    }

    fn middle(&self, t: &ComplexMatrix, s: &ComplexMatrix) -> Result<(Vec<ComplexMatrix>, ComplexMatrix, ComplexMatrix)> {
        let tinv = t.inverse()?;
        let sinv = s.inverse()?;
        let v = self.coeffs.iter().map(|u| &(&tinv * u) * &sinv).collect();
        Ok((v, tinv, sinv))
    }

    /// Log of the smoothed bound and its gradient.
    fn objective(&self, x: &[f64], g: &mut [f64], base: &State, r: f64) -> f64 {
        let mut st = base.clone();
        self.unpack(x, &mut st);
        let (big_a, big_b, t, s) = self.outer(&st);
        let Ok((v, tinv, sinv)) = self.middle(&t, &s) else { return f64::NAN };
        let Ok((sv, gv)) = self.space.surrogate_with_grad(&v, r) else { return f64::NAN };
        if !(sv > 0.0) || !sv.is_finite() {
            return f64::NAN;
        }
        let total = t.rows();
        let mut ht = ComplexMatrix::zeros(total, total);
        let mut hs = ComplexMatrix::zeros(total, total);
        let tinv_h = tinv.adjoint();
        let sinv_h = sinv.adjoint();
        for (gi, vi) in gv.iter().zip(&v) {
            ht.axpy(C64::new(-1.0 / sv, 0.0), &(&(&tinv_h * gi) * &vi.adjoint()));
            hs.axpy(C64::new(-1.0 / sv, 0.0), &(&(&vi.adjoint() * gi) * &sinv_h));
        }
        // T = A 𝔄, S = 𝔅 B
        let (ha, hb) = if self.chain.block.is_some() {
            (&ht * &st.ba.adjoint(), &st.bb.adjoint() * &hs)
        } else {
            (ht.clone(), hs.clone())
        };
        let mut f = sv.ln();
        let mut off = 0;
        for (l, leg) in self.chain.legs.iter().enumerate() {
            if !leg.free {
                continue;
            }
            for (fac, h) in [(&st.a, &ha), (&st.b, &hb)] {
                let Ok((nv, ng)) = leg_norm(&fac[l], leg.exponent, r) else { return f64::NAN };
                if !(nv > 0.0) {
                    return f64::NAN;
                }
                f += nv.ln();
                let mut grad = leg_gradient(h, fac, l);
                grad.axpy(C64::new(1.0 / nv, 0.0), &ng);
                write_grad(&grad, g, &mut off);
            }
        }
        if let Some(spec) = &self.chain.block {
            let (Ok((nl, gl)), Ok((nr, gr))) =
                (left_block_norm(spec, &self.sizes, &st.ba, r), right_block_norm(spec, &self.sizes, &st.bb, r))
            else {
                return f64::NAN;
            };
            if !(nl > 0.0 && nr > 0.0) {
                return f64::NAN;
            }
            f += nl.ln() + nr.ln();
            let mut g_ba = &big_a.adjoint() * &ht;
            g_ba.axpy(C64::new(1.0 / nl, 0.0), &gl);
            let mut g_bb = &hs * &big_b.adjoint();
            g_bb.axpy(C64::new(1.0 / nr, 0.0), &gr);
            write_grad(&g_ba, g, &mut off);
            write_grad(&g_bb, g, &mut off);
        }
        f
    }

    fn exact(&self, st: &State) -> Result<(f64, Vec<ComplexMatrix>)> {
        let (_, _, t, s) = self.outer(st);
        let (v, _, _) = self.middle(&t, &s)?;
        let mut value = self.space.level_norm(&v)?;
        for (l, leg) in self.chain.legs.iter().enumerate() {
            if leg.free {
                value *= st.a[l].schatten_norm(leg.exponent)? * st.b[l].schatten_norm(leg.exponent)?;
            }
        }
        if let Some(spec) = &self.chain.block {
            value *= spec.left.level_norm(&row_blocks(&st.ba, &self.sizes, spec.leg))?;
            value *= spec.right.level_norm(&col_blocks(&st.bb, &self.sizes, spec.leg))?;
        }
        Ok((value, v))
    }

    fn normalize(&self, st: &mut State) {
        for (l, leg) in self.chain.legs.iter().enumerate() {
            if leg.free {
                for f in [&mut st.a[l], &mut st.b[l]] {
                    let n = f.frobenius_norm();
                    if n > 0.0 && n.is_finite() {
                        *f = f.scale_real(1.0 / n);
                    }
                }
            }
        }
        if self.chain.block.is_some() {
            for f in [&mut st.ba, &mut st.bb] {
                let n = f.frobenius_norm();
                if n > 0.0 && n.is_finite() {
                    *f = f.scale_real(1.0 / n);
                }
            }
        }
    }

    fn has_params(&self) -> bool {
        self.chain.block.is_some() || self.chain.legs.iter().any(|l| l.free)
    }
}

fn run(p: &Problem<'_>, mut st: State, max_iter: usize) -> (f64, State) {
    let mut best = (p.exact(&st).map(|t| t.0).unwrap_or(f64::INFINITY), st.clone());
    if !p.has_params() {
        return best;
    }
    for &r in &CONTINUATION {
        let x0 = p.pack(&st);
        let base = st.clone();
        let res = lbfgs(|x, g| p.objective(x, g, &base, r), x0, max_iter, 1e-12);
        p.unpack(&res.x, &mut st);
        p.normalize(&mut st);
        if let Ok((val, _)) = p.exact(&st) {
            if val < best.0 {
                best = (val, st.clone());
            }
        }
    }
    best
}

/// Minimize the factorization bound of `chain`.
pub fn factorize(space: &Space, coeffs: &[ComplexMatrix], chain: &Chain, search: &SearchConfig) -> Result<LegFactorization> {
    let total = chain.total();
    if coeffs.len() != space.dim() || coeffs.iter().any(|c| c.shape() != (total, total)) {
        return Err(Error::shape(format!("coefficients must be {} matrices of size {total}x{total}", space.dim())));
    }
    let p = Problem { space, coeffs, chain, sizes: chain.sizes() };
    let (a0, b0) = marginal_start(coeffs, &chain.legs)?;
    let start = State { a: a0, b: b0, ba: ComplexMatrix::identity(total), bb: ComplexMatrix::identity(total) };
    let restarts = search.restarts.max(1);
    let runs: Vec<(f64, State)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut st = start.clone();
            if r > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(search.restart_seed(r));
                let mut jitter = |m: &ComplexMatrix| &m.scale_real(1.0 / m.frobenius_norm()) + &ComplexMatrix::random_gaussian(m.rows(), m.cols(), &mut rng).scale_real(0.3 / (m.rows() as f64).sqrt());
                for (l, leg) in chain.legs.iter().enumerate() {
                    if leg.free {
                        st.a[l] = jitter(&st.a[l]);
                        st.b[l] = jitter(&st.b[l]);
                    }
                }
                if chain.block.is_some() {
                    st.ba = jitter(&st.ba);
                    st.bb = jitter(&st.bb);
                }
            }
            run(&p, st, search.max_iter)
        })
        .collect();
    let mut best: Option<(f64, State)> = None;
    for r in runs {
        if best.as_ref().is_none_or(|b| r.0 < b.0) {
            best = Some(r);
        }
    }
    let (value, mut st) = best.expect("at least one restart");
    if !value.is_finite() {
        return Err(Error::Numerical { what: "no invertible factorization found".into(), residual: value });
    }
    // unit-norm outer factors; V carries the value
    for (l, leg) in chain.legs.iter().enumerate() {
        if leg.free {
            let na = st.a[l].schatten_norm(leg.exponent)?;
            let nb = st.b[l].schatten_norm(leg.exponent)?;
            st.a[l] = st.a[l].scale_real(1.0 / na);
            st.b[l] = st.b[l].scale_real(1.0 / nb);
        }
    }
    if let Some(spec) = &chain.block {
        let nl = spec.left.level_norm(&row_blocks(&st.ba, &p.sizes, spec.leg))?;
        let nr = spec.right.level_norm(&col_blocks(&st.bb, &p.sizes, spec.leg))?;
        st.ba = st.ba.scale_real(1.0 / nl);
        st.bb = st.bb.scale_real(1.0 / nr);
    }
    let (value, v) = p.exact(&st)?;
    let (_, _, t, s) = p.outer(&st);
    let mut err = 0.0;
    let mut norm = 0.0;
    for (u, vi) in coeffs.iter().zip(&v) {
        err += (&(&(&t * vi) * &s) - u).frobenius_norm().powi(2);
        norm += u.frobenius_norm().powi(2);
    }
    let reconstruction_error = if norm > 0.0 { (err / norm).sqrt() } else { err.sqrt() };
    let block = chain.block.as_ref().map(|_| (st.ba.clone(), st.bb.clone()));
    Ok(LegFactorization { a: st.a, b: st.b, block, v, value, reconstruction_error })
}
