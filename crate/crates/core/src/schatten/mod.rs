//! Vector-valued Schatten classes `S_p^m[E]`.
//!
//! An element `u = sum_i U_i (x) e_i` is stored as one `m x m` matrix per basis
//! vector of `E`. Upper bounds come from factorizations
//! `u = (a (x) I) v (b (x) I)` with `|u| <= |a|_{2p} |v|_{M_m(E)} |b|_{2p}`;
//! lower bounds from explicit norming functionals.

mod dual;
mod factor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bracket::{NormBracket, Witness};
use crate::config::SearchConfig;
use crate::error::{Error, Result};
use crate::matrix::{check_exponent, ComplexMatrix, C64};
use crate::opspace::{check_coeffs, MatrixNormFamily, Space};

pub use dual::DualBound;
pub use factor::{factorize, BlockSpec, Chain, Leg, LegFactorization};

pub(crate) use dual::{best_in_ball, pairing};
pub(crate) use factor::CONTINUATION;

/// Element of `S_p^m[E]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpElement {
    pub p: f64,
    pub m: usize,
    pub space: Space,
    pub coeffs: Vec<ComplexMatrix>,
}

impl SpElement {
    pub fn new(p: f64, space: Space, coeffs: Vec<ComplexMatrix>) -> Result<Self> {
        check_exponent(p)?;
        let (m, c) = check_coeffs(space.dim(), &coeffs)?;
        if m != c {
            return Err(Error::shape("coefficients must be square"));
        }
        Ok(Self { p, m, space, coeffs })
    }

    /// Build from `entries[k][l]`, the coordinate vector (in the basis of `E`)
    /// of the `(k, l)` entry.
    pub fn from_entries(p: f64, space: Space, entries: &[Vec<Vec<C64>>]) -> Result<Self> {
        let m = entries.len();
        let k = space.dim();
        if entries.iter().any(|row| row.len() != m || row.iter().any(|v| v.len() != k)) {
            return Err(Error::shape(format!("entries must be {m}x{m} vectors of length {k}")));
        }
        let coeffs = (0..k).map(|i| ComplexMatrix::from_fn(m, m, |r, c| entries[r][c][i])).collect();
        Self::new(p, space, coeffs)
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(p, self.space.clone(), self.coeffs.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.max_abs() == 0.0)
    }

    /// `|u|_{S_inf^m[E]} = |u|_{M_m(E)}`.
    pub fn sup_norm(&self) -> Result<f64> {
        self.space.level_norm(&self.coeffs)
    }
}

/// `u = (a (x) I) v (b (x) I)`, so `|u| <= |a|_{2p} |v|_{M_m(E)} |b|_{2p} = value`.
#[derive(Debug, Clone, Serialize)]
pub struct FactorizationCert {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub v: Vec<ComplexMatrix>,
    pub value: f64,
    pub reconstruction_error: f64,
    /// Set when a factor's condition number exceeds `1e8`.
    pub near_singular: bool,
}

impl FactorizationCert {
    /// Recompute the bound from the stored factors.
    pub fn replay(&self, space: &Space, p: f64) -> Result<f64> {
        Ok(self.a.schatten_norm(2.0 * p)? * space.level_norm(&self.v)? * self.b.schatten_norm(2.0 * p)?)
    }

    pub fn reconstruct(&self) -> Vec<ComplexMatrix> {
        self.v.iter().map(|v| &(&self.a * v) * &self.b).collect()
    }

    fn legs(&self) -> LegFactorization {
        LegFactorization {
            a: vec![self.a.clone()],
            b: vec![self.b.clone()],
            block: None,
            v: self.v.clone(),
            value: self.value,
            reconstruction_error: self.reconstruction_error,
        }
    }
}

fn condition(x: &ComplexMatrix) -> f64 {
    match x.singular_values() {
        Ok(s) => s[0] / s.last().copied().unwrap_or(0.0),
        Err(_) => f64::INFINITY,
    }
}

fn identity_cert(u: &SpElement) -> Result<FactorizationCert> {
    let m = u.m;
    let scale = (m as f64).powf(-1.0 / (2.0 * u.p));
    let id = ComplexMatrix::identity(m).scale_real(scale);
    let v: Vec<ComplexMatrix> = u.coeffs.iter().map(|c| c.scale_real(1.0 / (scale * scale))).collect();
    let value = u.space.level_norm(&u.coeffs)?;
    Ok(FactorizationCert { a: id.clone(), b: id, v, value, reconstruction_error: 0.0, near_singular: false })
}

fn flat_chain(u: &SpElement) -> Chain {
    Chain::legs(vec![Leg::free(u.m, 2.0 * u.p)])
}

/// Lower bound through the dual of `chain`.
pub(crate) fn chain_lower(space: &Space, coeffs: &[ComplexMatrix], chain: &Chain, cert: &LegFactorization, search: &SearchConfig) -> Result<DualBound> {
    match space {
        Space::Concrete(c) => dual::concrete_chain_lower(c, coeffs, chain, cert, search.max_iter),
        Space::Oh(_) => dual::gradient_lower(space, coeffs, chain, cert, search),
    }
}

/// Best factorization bound over `restarts` starts.
pub fn sp_norm_upper(u: &SpElement, search: &SearchConfig) -> Result<FactorizationCert> {
    if u.p.is_infinite() || u.is_zero() {
        return identity_cert(u);
    }
    let f = factorize(&u.space, &u.coeffs, &flat_chain(u), search)?;
    // balance |a| = |b| = |v|^(1/2)
    let t = f.value.powf(0.25);
    let a = f.a[0].scale_real(t);
    let b = f.b[0].scale_real(t);
    let v: Vec<ComplexMatrix> = f.v.iter().map(|x| x.scale_real(1.0 / (t * t))).collect();
    let near_singular = condition(&a) > 1e8 || condition(&b) > 1e8;
    Ok(FactorizationCert { a, b, v, value: f.value, reconstruction_error: f.reconstruction_error, near_singular })
}

/// Lower bound from a norming functional; `cert` seeds the search.
pub fn sp_norm_lower(u: &SpElement, cert: Option<&FactorizationCert>, search: &SearchConfig) -> Result<DualBound> {
    if u.is_zero() {
        return Ok(DualBound { value: 0.0, functional: u.coeffs.clone() });
    }
    if u.p.is_infinite() {
        if let Space::Concrete(c) = &u.space {
            let s = c.embed(&u.coeffs)?.svd()?;
            let x = s.u.block(0, 0, s.u.rows(), 1);
            let y = s.v.block(0, 0, s.v.rows(), 1);
            let functional = c.embed_adjoint(&(&x * &y.adjoint()), u.m, u.m);
            return Ok(DualBound { value: pairing(&functional, &u.coeffs), functional });
        }
    }
    let owned;
    let cert = match cert {
        Some(c) => c,
        None => {
            owned = sp_norm_upper(u, search)?;
            &owned
        }
    };
    match &u.space {
        Space::Concrete(c) => dual::concrete_flat_lower(c, &u.coeffs, u.p, &cert.legs(), search.max_iter),
        Space::Oh(_) => dual::gradient_lower(&u.space, &u.coeffs, &flat_chain(u), &cert.legs(), search),
    }
}

/// Norm bracket on `|u|_{S_p^m[E]}`.
pub fn sp_norm(u: &SpElement, search: &SearchConfig) -> Result<NormBracket> {
    if u.is_zero() {
        return Ok(NormBracket::zero());
    }
    if u.p.is_infinite() {
        return Ok(NormBracket::exact(u.sup_norm()?, "p = inf: norm of M_m(E)"));
    }
    let cert = sp_norm_upper(u, search)?;
    let low = sp_norm_lower(u, Some(&cert), search)?;
    Ok(NormBracket {
        lower: low.value,
        upper: cert.value,
        lower_witness: Some(Witness::Functional { coeffs: low.functional }),
        upper_certificate: format!(
            "factorization u = (a x I) v (b x I), reconstruction error {:.2e}",
            cert.reconstruction_error
        ),
    })
}

/// Element of `M_n(S_p^m[E])`: coefficients are `mn x mn`, row index `k * n + l`
/// with `k` the `S_p^m` index and `l` the matrix-level index.
#[derive(Debug, Clone, PartialEq)]
pub struct SpMatrixElement {
    pub p: f64,
    pub m: usize,
    pub n: usize,
    pub space: Space,
    pub coeffs: Vec<ComplexMatrix>,
}

impl SpMatrixElement {
    pub fn new(p: f64, m: usize, n: usize, space: Space, coeffs: Vec<ComplexMatrix>) -> Result<Self> {
        check_exponent(p)?;
        let (r, c) = check_coeffs(space.dim(), &coeffs)?;
        if (r, c) != (m * n, m * n) {
            return Err(Error::shape(format!("coefficients must be {0}x{0}", m * n)));
        }
        Ok(Self { p, m, n, space, coeffs })
    }

    /// `(I_m (x) a) x (I_m (x) b)` as an element of `S_p^{mn}[E]`.
    pub fn compress(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<SpElement> {
        let ia = ComplexMatrix::identity(self.m).kron(a);
        let ib = ComplexMatrix::identity(self.m).kron(b);
        SpElement::new(self.p, self.space.clone(), self.coeffs.iter().map(|x| &(&ia * x) * &ib).collect())
    }
}

/// Bracket on `|x|_{M_n(S_p^m[E])}`.
///
/// For `p` in `{1, 2, inf}` the upper bound factors `x = 𝔄 V 𝔅` with the
/// blocks of `𝔄`, `𝔅` charged in `C_p`/`R_p` (column, row or `OH`) at level
/// `n`, and the lower bound is a functional along the dual chain. Otherwise the
/// upper bound only uses `a (x) I_n` on the `S_p` leg.
///
/// With `ascents > 0` the lower bound also tries
/// `sup |(I (x) a) x (I (x) b)|_{S_p^{mn}[E]}` over `a`, `b` in the unit ball of
/// `S_{2p}^n`, by alternating closed-form updates against a fixed norming
/// functional.
pub fn sp_matrix_norm(x: &SpMatrixElement, ascents: usize, search: &SearchConfig) -> Result<NormBracket> {
    if x.coeffs.iter().all(|c| c.max_abs() == 0.0) {
        return Ok(NormBracket::zero());
    }
    if x.p.is_infinite() {
        return Ok(NormBracket::exact(x.space.level_norm(&x.coeffs)?, "p = inf: norm of M_mn(E)"));
    }
    if x.n == 1 {
        let u = SpElement::new(x.p, x.space.clone(), x.coeffs.clone())?;
        return sp_norm(&u, search);
    }
    let chain = match BlockSpec::for_exponent(0, x.m, x.p) {
        Some(block) => Chain { legs: vec![Leg::fixed(x.m), Leg::fixed(x.n)], block: Some(block) },
        None => Chain::legs(vec![Leg::free(x.m, 2.0 * x.p), Leg::fixed(x.n)]),
    };
    let up = factorize(&x.space, &x.coeffs, &chain, search)?;
    let mut lower = 0.0;
    let mut witness = None;
    if chain.block.is_some() {
        let low = chain_lower(&x.space, &x.coeffs, &chain, &up, search)?;
        lower = low.value;
        witness = Some(Witness::Functional { coeffs: low.functional });
    }
    if ascents > 0 {
        let (v, a, b) = compression_lower(x, ascents, search)?;
        if v > lower {
            lower = v;
            witness = Some(Witness::Weights { left: a, right: b });
        }
    }
    let how = if chain.block.is_some() { "blocks of 𝔄, 𝔅 in the C_p/R_p families" } else { "(a x I_n) on the S_p leg" };
    Ok(NormBracket {
        lower,
        upper: up.value,
        lower_witness: witness,
        upper_certificate: format!("factorization with {how}, reconstruction error {:.2e}", up.reconstruction_error),
    })
}

fn compression_lower(x: &SpMatrixElement, ascents: usize, search: &SearchConfig) -> Result<(f64, ComplexMatrix, ComplexMatrix)> {
    let t = 2.0 * x.p;
    let n = x.n;
    let inner = SearchConfig { restarts: search.restarts.clamp(1, 4), ..search.clone() };
    let mut best: Option<(f64, ComplexMatrix, ComplexMatrix)> = None;
    for s in 0..ascents {
        let (mut a, mut b) = if s == 0 {
            let id = ComplexMatrix::identity(n).scale_real((n as f64).powf(-1.0 / t));
            (id.clone(), id)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(search.restart_seed(s).wrapping_add(0x5eed));
            let a = ComplexMatrix::random_gaussian(n, n, &mut rng);
            let b = ComplexMatrix::random_gaussian(n, n, &mut rng);
            (a.scale_real(1.0 / a.schatten_norm(t)?), b.scale_real(1.0 / b.schatten_norm(t)?))
        };
        for _round in 0..6 {
            let y = x.compress(&a, &b)?;
            if y.is_zero() {
                break;
            }
            let low = sp_norm_lower(&y, None, &inner)?;
            if best.as_ref().is_none_or(|bst| low.value > bst.0) {
                best = Some((low.value, a.clone(), b.clone()));
            }
            let g = &low.functional;
            let ib = ComplexMatrix::identity(x.m).kron(&b);
            let mut ca = ComplexMatrix::zeros(n, n);
            for (xi, gi) in x.coeffs.iter().zip(g) {
                ca.axpy(C64::new(1.0, 0.0), &(&(xi * &ib) * &gi.adjoint()).partial_trace_left(x.m));
            }
            a = best_in_ball(&ca, t)?;
            let ia = ComplexMatrix::identity(x.m).kron(&a);
            let mut cb = ComplexMatrix::zeros(n, n);
            for (xi, gi) in x.coeffs.iter().zip(g) {
                cb.axpy(C64::new(1.0, 0.0), &(&gi.adjoint() * &(&ia * xi)).partial_trace_left(x.m));
            }
            b = best_in_ball(&cb, t)?;
        }
    }
    Ok(best.unwrap_or((0.0, ComplexMatrix::zeros(n, n), ComplexMatrix::zeros(n, n))))
}

/// Element of `S_{p_outer}^{m_outer}[S_{p_inner}^{m_inner}[E]]`, stored flat with
/// coefficient index `i_outer * m_inner + i_inner`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedElement {
    pub p_outer: f64,
    pub p_inner: f64,
    pub m_outer: usize,
    pub m_inner: usize,
    pub space: Space,
    pub coeffs: Vec<ComplexMatrix>,
}

impl NestedElement {
    pub fn new(p_outer: f64, p_inner: f64, m_outer: usize, m_inner: usize, space: Space, coeffs: Vec<ComplexMatrix>) -> Result<Self> {
        check_exponent(p_outer)?;
        check_exponent(p_inner)?;
        let (r, c) = check_coeffs(space.dim(), &coeffs)?;
        let m = m_outer * m_inner;
        if (r, c) != (m, m) {
            return Err(Error::shape(format!("nested coefficients must be {m}x{m}")));
        }
        Ok(Self { p_outer, p_inner, m_outer, m_inner, space, coeffs })
    }

    /// The inner element at outer position `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Result<SpElement> {
        let mi = self.m_inner;
        SpElement::new(self.p_inner, self.space.clone(), self.coeffs.iter().map(|c| c.block(i * mi, j * mi, mi, mi)).collect())
    }

    /// Outer `S_p` leg with a free factor; the inner `S_q` leg through its
    /// column/row families when `q` is `1`, `2` or `inf`, else a free factor.
    pub fn chain(&self) -> Chain {
        match BlockSpec::for_exponent(1, self.m_inner, self.p_inner) {
            Some(block) => Chain {
                legs: vec![Leg::free(self.m_outer, 2.0 * self.p_outer), Leg::fixed(self.m_inner)],
                block: Some(block),
            },
            None => Chain::legs(vec![Leg::free(self.m_outer, 2.0 * self.p_outer), Leg::free(self.m_inner, 2.0 * self.p_inner)]),
        }
    }

    /// The same tensor read as `S_{p_inner}[S_{p_outer}[E]]` with the legs exchanged.
    pub fn swap_legs(&self) -> NestedElement {
        let (mo, mi) = (self.m_outer, self.m_inner);
        let perm = |idx: usize| (idx % mi) * mo + idx / mi;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let mut out = ComplexMatrix::zeros(mo * mi, mo * mi);
                for r in 0..mo * mi {
                    for s in 0..mo * mi {
                        out[(perm(r), perm(s))] = c[(r, s)];
                    }
                }
                out
            })
            .collect();
        NestedElement {
            p_outer: self.p_inner,
            p_inner: self.p_outer,
            m_outer: mi,
            m_inner: mo,
            space: self.space.clone(),
            coeffs,
        }
    }
}

/// Direction of a [`fubini_reshape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reshape {
    Flatten,
    Nest { m_outer: usize, m_inner: usize },
}

/// Presentations of the same tensor: `(i1, i2), (j1, j2)` in lexicographic order.
pub fn fubini_reshape(flat_or_nested: Either<'_>, direction: Reshape) -> Result<Either<'static>> {
    match (flat_or_nested, direction) {
        (Either::Nested(x), Reshape::Flatten) => {
            if x.p_outer != x.p_inner {
                return Err(Error::Input("flattening needs equal exponents".into()));
            }
            Ok(Either::FlatOwned(SpElement::new(x.p_outer, x.space.clone(), x.coeffs.clone())?))
        }
        (Either::Flat(u), Reshape::Nest { m_outer, m_inner }) => {
            if m_outer * m_inner != u.m {
                return Err(Error::shape(format!("{m_outer} x {m_inner} does not factor {}", u.m)));
            }
            Ok(Either::NestedOwned(NestedElement::new(u.p, u.p, m_outer, m_inner, u.space.clone(), u.coeffs.clone())?))
        }
        _ => Err(Error::Input("reshape direction does not match the input presentation".into())),
    }
}

/// Input or output of [`fubini_reshape`].
#[derive(Debug)]
pub enum Either<'a> {
    Flat(&'a SpElement),
    Nested(&'a NestedElement),
    FlatOwned(SpElement),
    NestedOwned(NestedElement),
}

/// Bracket on the nested norm: factorization along [`NestedElement::chain`]
/// and a functional along its dual.
pub fn nested_norm(x: &NestedElement, search: &SearchConfig) -> Result<NormBracket> {
    if x.coeffs.iter().all(|c| c.max_abs() == 0.0) {
        return Ok(NormBracket::zero());
    }
    let chain = x.chain();
    let up = factorize(&x.space, &x.coeffs, &chain, search)?;
    let low = chain_lower(&x.space, &x.coeffs, &chain, &up, search)?;
    Ok(NormBracket {
        lower: low.value,
        upper: up.value,
        lower_witness: Some(Witness::Functional { coeffs: low.functional }),
        upper_certificate: format!(
            "nested factorization (a1 x I) 𝔄 v 𝔅 (b1 x I), reconstruction error {:.2e}",
            up.reconstruction_error
        ),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FubiniReport {
    pub flat: NormBracket,
    pub nested: NormBracket,
    /// `(max upper - min lower) / max lower` over both brackets.
    pub union_width: f64,
    pub overlap: bool,
}

/// Compare `S_p^{m1 m2}[E]` with `S_p^{m1}[S_p^{m2}[E]]` on the same tensor.
pub fn fubini_check(x: &NestedElement, search: &SearchConfig, tol: f64) -> Result<FubiniReport> {
    if x.p_outer != x.p_inner {
        return Err(Error::Input("Fubini comparison needs equal exponents".into()));
    }
    let flat = sp_norm(&SpElement::new(x.p_outer, x.space.clone(), x.coeffs.clone())?, search)?;
    let nested = nested_norm(x, search)?;
    let lo = flat.lower.min(nested.lower);
    let hi = flat.upper.max(nested.upper);
    let top_lower = flat.lower.max(nested.lower);
    let union_width = if top_lower > 0.0 { (hi - lo) / top_lower } else { 0.0 };
    let overlap = flat.overlaps(&nested, tol);
    Ok(FubiniReport { flat, nested, union_width, overlap })
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    pub p: f64,
    pub q: f64,
    pub source: NormBracket,
    pub target: NormBracket,
    /// `lower(target) <= upper(source) * (1 + tol)`.
    pub contractive: bool,
}

/// Check `S_p[K; S_q[L; E]] -> S_q[L; S_p[K; E]]` on one element, `p <= q`.
/// `source` has the `S_p` leg outside.
pub fn pq_inclusion_check(source: &NestedElement, search: &SearchConfig, tol: f64) -> Result<InclusionReport> {
    let (p, q) = (source.p_outer, source.p_inner);
    if p > q {
        return Err(Error::domain(format!("inclusion needs p <= q, got p = {p}, q = {q}")));
    }
    let src = nested_norm(source, search)?;
    let tgt = nested_norm(&source.swap_legs(), search)?;
    let contractive = tgt.lower <= src.upper * (1.0 + tol);
    Ok(InclusionReport { p, q, source: src, target: tgt, contractive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspace::{full_space, scalar_space};

    fn scalar(p: f64, u: ComplexMatrix) -> SpElement {
        SpElement::new(p, scalar_space(), vec![u]).unwrap()
    }

    #[test]
    fn identity_trace_class() {
        let u = scalar(1.0, ComplexMatrix::identity(2));
        let b = sp_norm(&u, &SearchConfig::new(2, 0)).unwrap();
        assert!((b.upper - 2.0).abs() < 1e-9 && (b.lower - 2.0).abs() < 1e-6, "{b:?}");
    }

    #[test]
    fn scalar_collapse_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = ComplexMatrix::random_gaussian(3, 3, &mut rng);
        for p in [1.0, 1.5, 2.0, 3.0] {
            let b = sp_norm(&scalar(p, u.clone()), &SearchConfig::new(2, 0)).unwrap();
            let exact = u.schatten_norm(p).unwrap();
            assert!(b.lower <= b.upper * (1.0 + 1e-9), "p={p}: {b:?}");
            assert!((b.upper - exact).abs() < 1e-4 * exact && (b.lower - exact).abs() < 1e-4 * exact, "p={p}: {b:?} vs {exact}");
        }
    }

    #[test]
    fn swap_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x = NestedElement::new(1.0, 2.0, 2, 3, full_space(1), vec![ComplexMatrix::random_gaussian(6, 6, &mut rng)]).unwrap();
        assert_eq!(x.swap_legs().swap_legs(), x);
    }
}
