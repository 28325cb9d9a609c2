//! Dual (norming functional) lower bounds.
//!
//! Functionals act by `Re sum_i <G_i, U_i>`. For `E` inside `M_d` a functional
//! is produced as `G = Emb*(W1 W2*) / den` where `den` bounds the norm of
//! `W1 W2*` in the dual of `S_p[M_d]`:
//!
//! * one leg: `den = (|tr_d W1 W1*|_{p'} |tr_d W2 W2*|_{p'})^(1/2)`;
//! * a chain: `W1 = (T (x) I) Z1`, `W2 = (S (x) I) Z2` with `T`, `S` built like
//!   the factorization outer factors at conjugate exponents, and `den` the
//!   product of their costs times `(|tr_d Z1 Z1*| |tr_d Z2 Z2*|)^(1/2)`.
//!
//! For `OH` the functional is the gradient of the factorization bound, and its
//! dual norm is bounded by a factorization at the conjugate exponents.

use crate::config::SearchConfig;
use crate::error::Result;
use crate::matrix::{schatten_with_grad, ComplexMatrix, C64};
use crate::opspace::{ConcreteOperatorSpace, MatrixNormFamily, Space};
use crate::optim::{lbfgs, pack, unpack, write_grad};

use super::factor::{
    col_blocks, factorize, kron_all, left_block_norm, leg_gradient, leg_norm, right_block_norm, row_blocks, BlockSpec, Chain, Leg,
    LegFactorization, CONTINUATION,
};

/// A functional of dual norm at most one and its value on the target.
#[derive(Debug, Clone)]
pub struct DualBound {
    pub value: f64,
    pub functional: Vec<ComplexMatrix>,
}

pub(crate) fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

pub(crate) fn pairing(g: &[ComplexMatrix], u: &[ComplexMatrix]) -> f64 {
    g.iter().zip(u).map(|(a, b)| a.inner(b).re).sum()
}

/// Hermitian square root of `x x*`, the part of a factor its norms see.
fn left_modulus(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    (x * &x.adjoint()).hermitian_part().psd_power(0.5)
}

/// Starting point of a dual ascent.
#[derive(Clone)]
struct Start {
    alpha: Vec<ComplexMatrix>,
    beta: Vec<ComplexMatrix>,
    ba: ComplexMatrix,
    bb: ComplexMatrix,
    z1: ComplexMatrix,
    z2: ComplexMatrix,
}

/// Singular vectors of `mid`, columns weighted by `(sigma / sigma_max)^8`.
fn weighted_svd(mid: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let s = mid.svd()?;
    let top = s.sigma[0].max(1e-300);
    let w: Vec<f64> = s.sigma.iter().map(|&x| (x / top).powi(8)).collect();
    let scale = |m: &ComplexMatrix| ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * w[j]);
    Ok((scale(&s.u), scale(&s.v)))
}

/// Leg weights `|a_l|^(p_l - 1)` against the whitened middle. Exact for one
/// leg and scalar `E`.
fn start_from(space: &ConcreteOperatorSpace, coeffs: &[ComplexMatrix], legs: &[Leg], cert: &LegFactorization) -> Result<Start> {
    let d = space.ambient_dim();
    let ah: Vec<ComplexMatrix> = cert.a.iter().map(left_modulus).collect::<Result<_>>()?;
    let bh: Vec<ComplexMatrix> = cert.b.iter().map(|b| left_modulus(&b.adjoint())).collect::<Result<_>>()?;
    let weight = |h: &ComplexMatrix, leg: &Leg| -> Result<ComplexMatrix> {
        let p = leg.exponent / 2.0;
        if p.is_infinite() || p == 1.0 {
            Ok(ComplexMatrix::identity(h.rows()))
        } else {
            let m = h.psd_power(p - 1.0)?;
            let nm = m.operator_norm();
            Ok(m.scale_real(1.0 / nm))
        }
    };
    let alpha: Vec<ComplexMatrix> = ah.iter().zip(legs).map(|(h, l)| weight(h, l)).collect::<Result<_>>()?;
    let beta: Vec<ComplexMatrix> = bh.iter().zip(legs).map(|(h, l)| weight(h, l)).collect::<Result<_>>()?;
    let (t, s) = cert.outer_factors();
    let ainv = left_modulus(&t)?.inverse()?.kron(&ComplexMatrix::identity(d));
    let binv = left_modulus(&s.adjoint())?.inverse()?.kron(&ComplexMatrix::identity(d));
    let mid = &(&ainv * &space.embed(coeffs)?) * &binv;
    let (z1, z2) = weighted_svd(&mid)?;
    let total = t.rows();
    Ok(Start { alpha, beta, ba: ComplexMatrix::identity(total), bb: ComplexMatrix::identity(total), z1, z2 })
}

/// One-leg dual ascent for concrete `E`.
pub(crate) fn concrete_flat_lower(
    space: &ConcreteOperatorSpace,
    coeffs: &[ComplexMatrix],
    p: f64,
    cert: &LegFactorization,
    max_iter: usize,
) -> Result<DualBound> {
    let m = coeffs[0].rows();
    let d = space.ambient_dim();
    let q = conjugate(p);
    let uhat = space.embed(coeffs)?;
    let leg = [Leg::free(m, 2.0 * p)];
    let st = start_from(space, coeffs, &leg, cert)?;
    let id_d = ComplexMatrix::identity(d);
    let mut w1 = &st.alpha[0].kron(&id_d) * &st.z1;
    let mut w2 = &st.beta[0].kron(&id_d) * &st.z2;
    let k = w1.cols();
    let md = m * d;

    let exact = |w1: &ComplexMatrix, w2: &ComplexMatrix| -> Result<(f64, f64)> {
        let num = w1.inner(&(&uhat * w2)).re;
        let p1 = (w1 * &w1.adjoint()).partial_trace_right(d);
        let p2 = (w2 * &w2.adjoint()).partial_trace_right(d);
        let den = (p1.schatten_norm(q)? * p2.schatten_norm(q)?).sqrt();
        Ok((num, den))
    };
    let mut best = {
        let (n, dn) = exact(&w1, &w2)?;
        (n / dn, w1.clone(), w2.clone())
    };
    let stages: Vec<f64> = if q.is_infinite() { CONTINUATION[..6].to_vec() } else { vec![q] };
    for r in stages {
        let mut x0 = Vec::new();
        pack(&w1, &mut x0);
        pack(&w2, &mut x0);
        let uh_adj = uhat.adjoint();
        let res = lbfgs(
            |x, g| {
                let mut off = 0;
                let a = unpack(x, &mut off, md, k);
                let b = unpack(x, &mut off, md, k);
                let uw2 = &uhat * &b;
                let n = a.inner(&uw2).re;
                if !(n > 0.0) {
                    return f64::NAN;
                }
                let p1 = (&a * &a.adjoint()).partial_trace_right(d).hermitian_part();
                let p2 = (&b * &b.adjoint()).partial_trace_right(d).hermitian_part();
                let (Ok((n1, g1)), Ok((n2, g2))) = (schatten_with_grad(&p1, r), schatten_with_grad(&p2, r)) else {
                    return f64::NAN;
                };
                if !(n1 > 0.0 && n2 > 0.0) {
                    return f64::NAN;
                }
                let mut ga = uw2.scale_real(-1.0 / n);
                ga.axpy(C64::new(1.0 / n1, 0.0), &(&g1.kron(&id_d) * &a));
                let mut gb = (&uh_adj * &a).scale_real(-1.0 / n);
                gb.axpy(C64::new(1.0 / n2, 0.0), &(&g2.kron(&id_d) * &b));
                let mut off = 0;
                write_grad(&ga, g, &mut off);
                write_grad(&gb, g, &mut off);
                -n.ln() + 0.5 * (n1.ln() + n2.ln())
            },
            x0,
            max_iter,
            1e-12,
        );
        let mut off = 0;
        w1 = unpack(&res.x, &mut off, md, k);
        w2 = unpack(&res.x, &mut off, md, k);
        let s1 = w1.frobenius_norm();
        let s2 = w2.frobenius_norm();
        if s1 > 0.0 && s2 > 0.0 {
            w1 = w1.scale_real(1.0 / s1);
            w2 = w2.scale_real(1.0 / s2);
        }
        if let Ok((n, dn)) = exact(&w1, &w2) {
            if dn > 0.0 && n / dn > best.0 {
                best = (n / dn, w1.clone(), w2.clone());
            }
        }
    }
    let den = exact(&best.1, &best.2)?.1;
    finish_concrete(space, coeffs, &best.1, &best.2, den)
}

fn finish_concrete(
    space: &ConcreteOperatorSpace,
    coeffs: &[ComplexMatrix],
    w1: &ComplexMatrix,
    w2: &ComplexMatrix,
    den: f64,
) -> Result<DualBound> {
    let m = coeffs[0].rows();
    let functional: Vec<ComplexMatrix> =
        space.embed_adjoint(&(w1 * &w2.adjoint()), m, m).into_iter().map(|g| g.scale_real(1.0 / den)).collect();
    let value = pairing(&functional, coeffs);
    Ok(DualBound { value, functional })
}

/// The chain a functional must be factored along: conjugate exponents and
/// the block families of the conjugate `S_q'`.
pub(crate) fn dual_chain(chain: &Chain) -> Chain {
    // a fixed leg outside the block is an `S_inf` (matrix level) leg; its dual is `S_1`
    let in_block = |j: usize| chain.block.as_ref().is_some_and(|b| b.leg == j);
    let legs = chain
        .legs
        .iter()
        .enumerate()
        .map(|(j, l)| {
            if l.free {
                Leg::free(l.size, 2.0 * conjugate(l.exponent / 2.0))
            } else if in_block(j) {
                *l
            } else {
                Leg::free(l.size, 2.0)
            }
        })
        .collect();
    let block = chain.block.as_ref().map(|b| {
        BlockSpec::for_exponent(b.leg, chain.legs[b.leg].size, conjugate(b.q)).expect("conjugate of 1, 2, inf has families")
    });
    Chain { legs, block }
}

/// Dual ascent along a chain for concrete `E`.
///
/// `W1 = (A 𝔄 (x) I) Z1`, `W2 = (B 𝔅 (x) I) Z2`, so `W1 W2*` factors through
/// the dual chain with middle `Z1 Z2*` in `M_k(S_1^d)`.
pub(crate) fn concrete_chain_lower(
    space: &ConcreteOperatorSpace,
    coeffs: &[ComplexMatrix],
    chain: &Chain,
    cert: &LegFactorization,
    max_iter: usize,
) -> Result<DualBound> {
    let d = space.ambient_dim();
    let id_d = ComplexMatrix::identity(d);
    let uhat = space.embed(coeffs)?;
    let uh_adj = uhat.adjoint();
    let starts = [start_from(space, coeffs, &chain.legs, cert)?];
    let dual = dual_chain(chain);
    let md = uhat.rows();
    let total = chain.total();
    let k = starts[0].z1.cols();
    let sizes: Vec<usize> = chain.legs.iter().map(|l| l.size).collect();

    let Start { mut alpha, mut beta, mut ba, mut bb, mut z1, mut z2 } = starts[0].clone();
    let outer = |al: &[ComplexMatrix], be: &[ComplexMatrix], ba: &ComplexMatrix, bb: &ComplexMatrix| {
        let (mut t, mut s) = (kron_all(al), kron_all(be));
        if dual.block.is_some() {
            t = &t * ba;
            s = &s * bb;
        }
        (t, s)
    };

    type Parts = (f64, f64, ComplexMatrix, ComplexMatrix);
    let exact = |al: &[ComplexMatrix], be: &[ComplexMatrix], ba: &ComplexMatrix, bb: &ComplexMatrix, z1: &ComplexMatrix, z2: &ComplexMatrix| -> Result<Parts> {
        let (t, s) = outer(al, be, ba, bb);
        let w1 = &t.kron(&id_d) * z1;
        let w2 = &s.kron(&id_d) * z2;
        let num = w1.inner(&(&uhat * &w2)).re;
        let mut den = ((z1 * &z1.adjoint()).partial_trace_right(d).operator_norm()
            * (z2 * &z2.adjoint()).partial_trace_right(d).operator_norm())
        .sqrt();
        for (l, leg) in dual.legs.iter().enumerate() {
            if leg.free {
                den *= al[l].schatten_norm(leg.exponent)? * be[l].schatten_norm(leg.exponent)?;
            }
        }
        if let Some(spec) = &dual.block {
            den *= spec.left.level_norm(&row_blocks(ba, &sizes, spec.leg))?;
            den *= spec.right.level_norm(&col_blocks(&bb.adjoint(), &sizes, spec.leg))?;
        }
        Ok((num, den, w1, w2))
    };
    let mut best: (f64, ComplexMatrix, ComplexMatrix, f64) = (f64::NEG_INFINITY, uhat.clone(), uhat.clone(), 1.0);
    // a full continuation can drift off a good start, so the start also gets a
    // direct polish at high order
    let mut stages = Vec::new();
    for i in 0..starts.len() {
        stages.push((Some(i), 0.0));
        stages.extend(CONTINUATION[..6].iter().map(|&r| (None, r)));
        stages.push((Some(i), 0.0));
        stages.extend(CONTINUATION[4..6].iter().map(|&r| (None, r)));
    }
    for (reset, r) in stages {
        if let Some(i) = reset {
            Start { alpha, beta, ba, bb, z1, z2 } = starts[i].clone();
            if let Ok((n, dn, w1, w2)) = exact(&alpha, &beta, &ba, &bb, &z1, &z2) {
                if dn > 0.0 && n / dn > best.0 {
                    best = (n / dn, w1, w2, dn);
                }
            }
            continue;
        }
        let mut x0 = Vec::new();
        for (l, leg) in dual.legs.iter().enumerate() {
            if leg.free {
                pack(&alpha[l], &mut x0);
                pack(&beta[l], &mut x0);
            }
        }
        if dual.block.is_some() {
            pack(&ba, &mut x0);
            pack(&bb, &mut x0);
        }
        pack(&z1, &mut x0);
        pack(&z2, &mut x0);
        let read = |x: &[f64], al: &mut Vec<ComplexMatrix>, be: &mut Vec<ComplexMatrix>, ba: &mut ComplexMatrix, bb: &mut ComplexMatrix| {
            let mut off = 0;
            for (l, leg) in dual.legs.iter().enumerate() {
                if leg.free {
                    al[l] = unpack(x, &mut off, leg.size, leg.size);
                    be[l] = unpack(x, &mut off, leg.size, leg.size);
                }
            }
            if dual.block.is_some() {
                *ba = unpack(x, &mut off, total, total);
                *bb = unpack(x, &mut off, total, total);
            }
            let a = unpack(x, &mut off, md, k);
            let b = unpack(x, &mut off, md, k);
            (a, b)
        };
        let obj = |x: &[f64], g: &mut [f64]| {
                let (mut al, mut be, mut xa, mut xb) = (alpha.clone(), beta.clone(), ba.clone(), bb.clone());
                let (a, b) = read(x, &mut al, &mut be, &mut xa, &mut xb);
                let (t, s) = outer(&al, &be, &xa, &xb);
                let ti = t.kron(&id_d);
                let si = s.kron(&id_d);
                let w1 = &ti * &a;
                let w2 = &si * &b;
                let uw2 = &uhat * &w2;
                let uw1 = &uh_adj * &w1;
                let n = w1.inner(&uw2).re;
                if !(n > 0.0) {
                    return f64::NAN;
                }
                let q1 = (&a * &a.adjoint()).partial_trace_right(d).hermitian_part();
                let q2 = (&b * &b.adjoint()).partial_trace_right(d).hermitian_part();
                let (Ok((n1, g1)), Ok((n2, g2))) = (schatten_with_grad(&q1, r), schatten_with_grad(&q2, r)) else {
                    return f64::NAN;
                };
                if !(n1 > 0.0 && n2 > 0.0) {
                    return f64::NAN;
                }
                let mut f = -n.ln() + 0.5 * (n1.ln() + n2.ln());
                // gradients with respect to T = A 𝔄 and S = B 𝔅
                let ht = (&uw2 * &a.adjoint()).partial_trace_right(d).scale_real(-1.0 / n);
                let hs = (&uw1 * &b.adjoint()).partial_trace_right(d).scale_real(-1.0 / n);
                let (ha, hb) = if dual.block.is_some() { (&ht * &xa.adjoint(), &hs * &xb.adjoint()) } else { (ht.clone(), hs.clone()) };
                let mut off = 0;
                for (l, leg) in dual.legs.iter().enumerate() {
                    if !leg.free {
                        continue;
                    }
                    for (fac, h) in [(&al, &ha), (&be, &hb)] {
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
                if let Some(spec) = &dual.block {
                    let (Ok((nl, gl)), Ok((nr, gr))) =
                        (left_block_norm(spec, &sizes, &xa, r), right_block_norm(spec, &sizes, &xb.adjoint(), r))
                    else {
                        return f64::NAN;
                    };
                    if !(nl > 0.0 && nr > 0.0) {
                        return f64::NAN;
                    }
                    f += nl.ln() + nr.ln();
                    let mut g_ba = &kron_all(&al).adjoint() * &ht;
                    g_ba.axpy(C64::new(1.0 / nl, 0.0), &gl);
                    let mut g_bb = &kron_all(&be).adjoint() * &hs;
                    g_bb.axpy(C64::new(1.0 / nr, 0.0), &gr.adjoint());
                    write_grad(&g_ba, g, &mut off);
                    write_grad(&g_bb, g, &mut off);
                }
                let mut ga = (&ti.adjoint() * &uw2).scale_real(-1.0 / n);
                ga.axpy(C64::new(1.0 / n1, 0.0), &(&g1.kron(&id_d) * &a));
                let mut gb = (&si.adjoint() * &uw1).scale_real(-1.0 / n);
                gb.axpy(C64::new(1.0 / n2, 0.0), &(&g2.kron(&id_d) * &b));
                write_grad(&ga, g, &mut off);
                write_grad(&gb, g, &mut off);
                f
            };
        let res = lbfgs(obj, x0, max_iter, 1e-12);
        let (a, b) = read(&res.x, &mut alpha, &mut beta, &mut ba, &mut bb);
        z1 = a;
        z2 = b;
        let free = dual.legs.iter().map(|l| l.free);
        let legs = alpha.iter_mut().zip(free.clone()).chain(beta.iter_mut().zip(free)).filter(|(_, f)| *f).map(|(m, _)| m);
        for f in legs.chain([&mut ba, &mut bb]) {
            let n = f.frobenius_norm();
            if n > 0.0 && n.is_finite() {
                *f = f.scale_real(1.0 / n);
            }
        }
        if let Ok((n, dn, w1, w2)) = exact(&alpha, &beta, &ba, &bb, &z1, &z2) {
            if dn > 0.0 && n / dn > best.0 {
                best = (n / dn, w1, w2, dn);
            }
        }
    }
    finish_concrete(space, coeffs, &best.1, &best.2, best.3)
}

/// Gradient witness for a general family (used for `OH`).
///
/// The functional is `T^{-*} grad|V| S^{-*}`; its dual norm is bounded by the
/// factorization bound of its entrywise conjugate along the dual chain.
pub(crate) fn gradient_lower(
    space: &Space,
    coeffs: &[ComplexMatrix],
    chain: &Chain,
    cert: &LegFactorization,
    search: &SearchConfig,
) -> Result<DualBound> {
    let (t, s) = cert.outer_factors();
    let tinv_h = t.inverse()?.adjoint();
    let sinv_h = s.inverse()?.adjoint();
    let dual = dual_chain(chain);
    let trivial = dual.block.is_none() && dual.legs.iter().all(|l| !l.free || l.exponent.is_infinite());
    let mut best: Option<DualBound> = None;
    for r in [f64::INFINITY, 1e3, 32.0] {
        let (_, gv) = space.surrogate_with_grad(&cert.v, r)?;
        let g: Vec<ComplexMatrix> = gv.iter().map(|x| &(&tinv_h * x) * &sinv_h).collect();
        let gc: Vec<ComplexMatrix> = g.iter().map(|x| x.conj_entrywise()).collect();
        let dual_norm = if trivial {
            space.level_norm(&gc)?
        } else {
            factorize(space, &gc, &dual, &SearchConfig { restarts: search.restarts.clamp(1, 4), ..search.clone() })?.value
        };
        if !(dual_norm > 0.0) {
            continue;
        }
        let functional: Vec<ComplexMatrix> = g.iter().map(|x| x.scale_real(1.0 / dual_norm)).collect();
        let value = pairing(&functional, coeffs);
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(DualBound { value, functional });
        }
    }
    Ok(best.unwrap_or_else(|| DualBound { value: 0.0, functional: coeffs.iter().map(|c| ComplexMatrix::zeros(c.rows(), c.cols())).collect() }))
}

/// Maximizer of `Re tr(a c)` over the unit ball of `S_t`.
pub(crate) fn best_in_ball(c: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let s = c.svd()?;
    let s_conj = conjugate(t);
    let norm = crate::matrix::schatten_of_values(&s.sigma, s_conj);
    if norm == 0.0 {
        let n = c.rows();
        return Ok(ComplexMatrix::identity(n).scale_real((n as f64).powf(-1.0 / t)));
    }
    let w: Vec<f64> = if s_conj.is_infinite() {
        let top = s.sigma[0];
        let count = s.sigma.iter().filter(|&&x| x >= top * (1.0 - 1e-12)).count() as f64;
        s.sigma.iter().map(|&x| if x >= top * (1.0 - 1e-12) { count.powf(-1.0 / t) } else { 0.0 }).collect()
    } else {
        s.sigma.iter().map(|&x| (x / norm).powf(s_conj - 1.0)).collect()
    };
    // a = V diag(w) U*
    let a = ComplexMatrix::from_fn(c.cols(), c.rows(), |i, j| {
        (0..w.len()).map(|k| s.v[(i, k)] * w[k] * s.u[(j, k)].conj()).sum()
    });
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ball_maximizer_attains_dual_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = ComplexMatrix::random_gaussian(3, 3, &mut rng);
        for t in [1.0, 2.0, 3.0, f64::INFINITY] {
            let a = best_in_ball(&c, t).unwrap();
            assert!(a.schatten_norm(t).unwrap() <= 1.0 + 1e-12);
            let v = (&a * &c).trace().re;
            let expect = c.schatten_norm(conjugate(t)).unwrap();
            assert!((v - expect).abs() < 1e-10 * expect, "t={t}: {v} vs {expect}");
        }
    }
}

