//! Completely bounded norms of linear maps between operator spaces.
//!
//! The level-`n` norm of `id_{M_n} (x) u` is searched by gradient ascent on the
//! log of `|u_n(X)| / |X|`, with the operator norms on both sides smoothed by
//! Schatten surrogates of increasing order. Every reported lower bound is the
//! exact ratio at a stored input.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bracket::{NormBracket, Witness};
use crate::config::SearchConfig;
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64, ZERO};
use crate::opspace::{check_coeffs, MatrixNormFamily, Space};
use crate::optim::{lbfgs, pack, unpack, write_grad};

/// `u : E -> F` as a `dim F x dim E` coordinate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub domain: Space,
    pub codomain: Space,
    pub action: ComplexMatrix,
}

impl LinearMap {
    pub fn new(domain: Space, codomain: Space, action: ComplexMatrix) -> Result<Self> {
        if action.shape() != (codomain.dim(), domain.dim()) {
            return Err(Error::shape(format!(
                "action is {}x{}, expected {}x{}",
                action.rows(),
                action.cols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(Self { domain, codomain, action })
    }

    /// Build from the images of the domain basis, given as ambient matrices of a
    /// concrete codomain.
    pub fn from_values(domain: Space, codomain: Space, values: &[ComplexMatrix]) -> Result<Self> {
        let cf = codomain
            .as_concrete()
            .ok_or_else(|| Error::Unsupported("values as matrices need a concrete codomain".into()))?;
        if values.len() != domain.dim() {
            return Err(Error::shape(format!("{} values for a {}-dimensional domain", values.len(), domain.dim())));
        }
        let mut action = ComplexMatrix::zeros(codomain.dim(), domain.dim());
        for (i, v) in values.iter().enumerate() {
            if v.shape() != (cf.ambient_dim(), cf.ambient_dim()) {
                return Err(Error::shape("value does not live in the codomain's ambient algebra"));
            }
            let c = cf.coordinates(v);
            let residual = (&cf.element(&c) - v).frobenius_norm();
            if residual > 1e-9 * (1.0 + v.frobenius_norm()) {
                return Err(Error::Input(format!("value {i} is not in the codomain (residual {residual:e})")));
            }
            for (j, z) in c.into_iter().enumerate() {
                action[(j, i)] = z;
            }
        }
        Ok(Self { domain, codomain, action })
    }

    pub fn identity(space: Space) -> Self {
        let k = space.dim();
        Self { domain: space.clone(), codomain: space, action: ComplexMatrix::identity(k) }
    }

    /// `u_n(X)`: coefficients of `(id (x) u)(sum X_i (x) e_i)` in the codomain basis.
    pub fn apply(&self, coeffs: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let (r, c) = coeffs.first().map(|x| x.shape()).unwrap_or((0, 0));
        (0..self.codomain.dim())
            .map(|j| {
                let mut y = ComplexMatrix::zeros(r, c);
                for (i, x) in coeffs.iter().enumerate() {
                    let a = self.action[(j, i)];
                    if a != ZERO {
                        y.axpy(a, x);
                    }
                }
                y
            })
            .collect()
    }

    /// Adjoint action on gradients: `G_i = sum_j conj(u_ji) H_j`.
    pub(crate) fn apply_adjoint(&self, grads: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let (r, c) = grads.first().map(|x| x.shape()).unwrap_or((0, 0));
        (0..self.domain.dim())
            .map(|i| {
                let mut g = ComplexMatrix::zeros(r, c);
                for (j, h) in grads.iter().enumerate() {
                    g.axpy(self.action[(j, i)].conj(), h);
                }
                g
            })
            .collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinearMap) -> Result<LinearMap> {
        if inner.codomain.dim() != self.domain.dim() {
            return Err(Error::shape("composition dimension mismatch"));
        }
        Ok(LinearMap {
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
            action: &self.action * &inner.action,
        })
    }

    pub fn scaled(&self, s: C64) -> LinearMap {
        LinearMap { action: self.action.scale(s), ..self.clone() }
    }

    /// Exact ratio `|u_n(X)| / |X|` for a replayed witness.
    pub fn level_ratio(&self, coeffs: &[ComplexMatrix]) -> Result<f64> {
        check_coeffs(self.domain.dim(), coeffs)?;
        let den = self.domain.level_norm(coeffs)?;
        if den == 0.0 {
            return Err(Error::Input("witness has zero norm".into()));
        }
        Ok(self.codomain.level_norm(&self.apply(coeffs))? / den)
    }
}

/// Effort settings for [`cb_norm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbSearch {
    pub max_level: usize,
    pub search: SearchConfig,
}

impl CbSearch {
    pub fn new(max_level: usize, restarts: usize, seed: u64) -> Self {
        Self { max_level, search: SearchConfig::new(restarts, seed) }
    }
}

impl Default for CbSearch {
    fn default() -> Self {
        Self::new(4, 25, 0)
    }
}

const SMOOTHING: [f64; 5] = [8.0, 32.0, 128.0, 512.0, 2048.0];

/// Best ratio found at level `n`, with the input achieving it.
pub fn level_lower(u: &LinearMap, n: usize, search: &SearchConfig) -> Result<(f64, Vec<ComplexMatrix>)> {
    let k = u.domain.dim();
    let runs: Vec<Result<(f64, Vec<ComplexMatrix>)>> = (0..search.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(search.restart_seed(r).wrapping_add((n as u64) << 32));
            let x0: Vec<ComplexMatrix> = (0..k).map(|_| ComplexMatrix::random_gaussian(n, n, &mut rng)).collect();
            ascend(u, x0, search.max_iter)
        })
        .collect();
    let mut best: Option<(f64, Vec<ComplexMatrix>)> = None;
    for run in runs {
        let (v, x) = run?;
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, x));
        }
    }
    Ok(best.expect("at least one restart"))
}

fn ascend(u: &LinearMap, x0: Vec<ComplexMatrix>, max_iter: usize) -> Result<(f64, Vec<ComplexMatrix>)> {
    let k = x0.len();
    let n = x0[0].rows();
    let mut x = x0;
    let mut best = (u.level_ratio(&x).unwrap_or(0.0), x.clone());
    for &r in &SMOOTHING {
        let mut v = Vec::new();
        x.iter().for_each(|m| pack(m, &mut v));
        let res = lbfgs(
            |p, g| {
                let mut off = 0;
                let xs: Vec<ComplexMatrix> = (0..k).map(|_| unpack(p, &mut off, n, n)).collect();
                let Ok((se, ge)) = u.domain.surrogate_with_grad(&xs, r) else { return f64::NAN };
                let Ok((sf, gf)) = u.codomain.surrogate_with_grad(&u.apply(&xs), r) else { return f64::NAN };
                if se <= 0.0 || sf <= 0.0 {
                    return f64::NAN;
                }
                let back = u.apply_adjoint(&gf);
                let mut off = 0;
                for (a, b) in back.iter().zip(&ge) {
                    let mut gi = a.scale_real(-1.0 / sf);
                    gi.axpy(C64::new(1.0 / se, 0.0), b);
                    write_grad(&gi, g, &mut off);
                }
                se.ln() - sf.ln()
            },
            v,
            max_iter,
            1e-10,
        );
        let mut off = 0;
        x = (0..k).map(|_| unpack(&res.x, &mut off, n, n)).collect();
        let nx = u.domain.level_norm(&x)?;
        if nx == 0.0 || !nx.is_finite() {
            break;
        }
        x.iter_mut().for_each(|m| *m = m.scale_real(1.0 / nx));
        let ratio = u.level_ratio(&x)?;
        if ratio > best.0 {
            best = (ratio, x.clone());
        }
    }
    Ok(best)
}

/// Hölder-type bound `sum_i |phi_i| |u(e_i)|` over the coordinate functionals.
fn coordinate_upper(u: &LinearMap) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..u.domain.dim() {
        let functional = match &u.domain {
            Space::Concrete(c) => c.dual_basis()[i].schatten_norm(1.0)?,
            Space::Oh(_) => 1.0,
        };
        let image: Vec<ComplexMatrix> = (0..u.codomain.dim())
            .map(|j| ComplexMatrix::new(1, 1, vec![u.action[(j, i)]]).expect("finite"))
            .collect();
        total += functional * u.codomain.level_norm(&image)?;
    }
    Ok(total)
}

/// Bracket on `|u|_cb`.
///
/// The lower end is the best level ratio over levels `1..=max_level`. When the
/// codomain sits in `M_k` and `max_level >= k`, the amplification stabilizes at
/// level `k` (Smith's lemma), so the search value is reported as exact;
/// otherwise the upper end is the coordinate-functional bound.
pub fn cb_norm(u: &LinearMap, cfg: &CbSearch) -> Result<NormBracket> {
    if cfg.max_level == 0 {
        return Err(Error::Input("max_level must be at least 1".into()));
    }
    let scale = u.action.max_abs();
    if scale == 0.0 {
        return Ok(NormBracket::zero());
    }
    let normalized = u.scaled(C64::new(1.0 / scale, 0.0));
    let mut lower = 0.0;
    let mut witness = Vec::new();
    for n in 1..=cfg.max_level {
        let (v, x) = level_lower(&normalized, n, &cfg.search)?;
        if v > lower {
            lower = v;
            witness = x;
        }
    }
    let stabilized = match &u.codomain {
        Space::Concrete(c) => cfg.max_level >= c.ambient_dim(),
        Space::Oh(_) => false,
    };
    let (upper, cert) = if stabilized {
        let k = u.codomain.as_concrete().map(|c| c.ambient_dim()).unwrap_or(0);
        (lower, format!("codomain embeds in M_{k}; level {k} amplification attains the cb norm"))
    } else {
        (coordinate_upper(&normalized)?.max(lower), "sum of coordinate functional norms times image norms".to_string())
    };
    Ok(NormBracket {
        lower: lower * scale,
        upper: upper * scale,
        lower_witness: Some(Witness::Element { coeffs: witness }),
        upper_certificate: cert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspace::{column_space, diag_space, full_space, oh_space};

    fn transpose_map(d: usize) -> LinearMap {
        let values: Vec<_> = (0..d * d).map(|k| ComplexMatrix::unit(d, d, k % d, k / d)).collect();
        LinearMap::from_values(full_space(d), full_space(d), &values).unwrap()
    }

    #[test]
    fn identity_and_zero() {
        let cfg = CbSearch::new(2, 4, 1);
        let b = cb_norm(&LinearMap::identity(full_space(2)), &cfg).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-9 && (b.upper - 1.0).abs() < 1e-9, "{b:?}");
        let z = LinearMap::new(full_space(2), diag_space(2), ComplexMatrix::zeros(2, 4)).unwrap();
        let b = cb_norm(&z, &cfg).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
    }

    #[test]
    fn transpose_on_m2() {
        let b = cb_norm(&transpose_map(2), &CbSearch::new(2, 8, 3)).unwrap();
        assert!(b.lower >= 2.0 - 1e-3, "{b:?}");
        assert!(b.lower <= 2.0 + 1e-9);
        let Some(Witness::Element { coeffs }) = &b.lower_witness else { panic!() };
        assert!(transpose_map(2).level_ratio(coeffs).unwrap() >= b.lower - 1e-9);
    }

    #[test]
    fn column_functional_dual_norm() {
        let e = column_space(2);
        let w = vec![ComplexMatrix::identity(1), ComplexMatrix::zeros(1, 1)];
        let b = crate::opspace::dual_level_norm(&e, &w, &CbSearch::new(2, 4, 0)).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-9 && (b.upper - 1.0).abs() < 1e-9, "{b:?}");
    }

    #[test]
    fn oh_domain_upper_is_finite() {
        let u = LinearMap::new(oh_space(2), column_space(2), ComplexMatrix::identity(2)).unwrap();
        let b = cb_norm(&u, &CbSearch::new(1, 4, 0)).unwrap();
        assert!(b.upper.is_finite() && b.lower <= b.upper);
        assert!((b.lower - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scale_equivariance() {
        let u = transpose_map(2);
        let cfg = CbSearch::new(2, 4, 5);
        let b1 = cb_norm(&u, &cfg).unwrap();
        let b2 = cb_norm(&u.scaled(C64::new(3.0, 0.0)), &cfg).unwrap();
        assert!((b2.lower - 3.0 * b1.lower).abs() < 1e-12 * b2.lower);
    }
}
