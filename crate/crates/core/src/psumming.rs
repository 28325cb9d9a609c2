//! Completely 2-summing norms `pi_2^0`.
//!
//! Lower bounds evaluate `I (x) u : S_p^m (x)_min E -> S_p^m[F]` on ascended
//! inputs. For `p = 2` the domain norm is exact: `S_2^m (x)_min E` sits in
//! `M_d(S_2^m) = M_d(OH_{m^2})` when `E` is in `M_d`, and equals the operator
//! norm of the `m^2 x n` coordinate matrix when `E = OH_n`.
//!
//! Upper bounds are finite Pietsch certificates `(a, b)` in the unit ball of
//! `S_4(H~)`, with `pi` the `m_copies`-fold amplification `x -> x (x) I`.
//! The dominating norm `|(a pi(x_ij) b)|_{M_n(S_2)}` only sees the Gram matrix
//! `Gamma_ll' = <K_l', K_l>` of `K_l = a pi(b_l) b`, so it is the `M_n(OH_k)`
//! norm of `Gamma^(1/2)`-mixed coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cbnorm::{cb_norm, CbSearch, LinearMap};
use crate::config::SearchConfig;
use crate::error::{Error, Result};
use crate::matrix::{schatten_with_grad, ComplexMatrix, C64, ONE};
use crate::opspace::{full_space, oh_space, scalar_space, ConcreteOperatorSpace, MatrixNormFamily, OhSpace, Space};
use crate::optim::{lbfgs, pack, unpack, write_grad};
use crate::report::Record;
use crate::schatten::{sp_matrix_norm, sp_norm_lower, SpElement, SpMatrixElement, CONTINUATION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiSearch {
    pub m_max: usize,
    /// Alternations between the norming functional and the input.
    pub rounds: usize,
    pub search: SearchConfig,
}

impl PiSearch {
    pub fn new(m_max: usize, restarts: usize, seed: u64) -> Self {
        Self { m_max, rounds: 4, search: SearchConfig::new(restarts, seed) }
    }
}

impl Default for PiSearch {
    fn default() -> Self {
        Self::new(8, 4, 0)
    }
}

/// `|(I (x) u) x| / |x|` at an input `x = sum U_i (x) e_i` in `S_p^m (x) E`.
#[derive(Debug, Clone, Serialize)]
pub struct PiLower {
    pub value: f64,
    pub m: usize,
    pub witness: Vec<ComplexMatrix>,
}

fn oh_coords(c: &ConcreteOperatorSpace, x: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    let m = x[0].rows();
    let mut out = Vec::with_capacity(m * m);
    for r in 0..m {
        for s in 0..m {
            let mut y = ComplexMatrix::zeros(c.ambient_dim(), c.ambient_dim());
            for (xi, bi) in x.iter().zip(c.basis()) {
                y.axpy(xi[(r, s)], bi);
            }
            out.push(y);
        }
    }
    out
}

fn coordinate_matrix(x: &[ComplexMatrix]) -> ComplexMatrix {
    let m = x[0].rows();
    ComplexMatrix::from_fn(m * m, x.len(), |rs, i| x[i][(rs / m, rs % m)])
}

/// Norm of `x` in `S_2^m (x)_min E` (surrogate order `r`) with its gradient.
fn domain_p2(e: &Space, x: &[ComplexMatrix], r: f64) -> Result<(f64, Vec<ComplexMatrix>)> {
    let m = x[0].rows();
    match e {
        Space::Concrete(c) => {
            let (v, g) = OhSpace::new(m * m)?.surrogate_with_grad(&oh_coords(c, x), r)?;
            let grads = c
                .basis()
                .iter()
                .map(|b| ComplexMatrix::from_fn(m, m, |i, j| b.inner(&g[i * m + j])))
                .collect();
            Ok((v, grads))
        }
        Space::Oh(_) => {
            let (v, g) = schatten_with_grad(&coordinate_matrix(x), r)?;
            let grads = (0..x.len()).map(|i| ComplexMatrix::from_fn(m, m, |a, b| g[(a * m + b, i)])).collect();
            Ok((v, grads))
        }
    }
}

/// An upper bound on `|x|_{S_p^m (x)_min E}`.
fn domain_norm(e: &Space, p: f64, x: &[ComplexMatrix], search: &SearchConfig) -> Result<f64> {
    if p == 2.0 {
        return Ok(domain_p2(e, x, f64::INFINITY)?.0);
    }
    let c = e.as_concrete().ok_or_else(|| Error::Unsupported("S_p (x)_min OH is only available at p = 2".into()))?;
    let m = x[0].rows();
    let d = c.ambient_dim();
    let mut big = ComplexMatrix::zeros(m * d, m * d);
    for (xi, bi) in x.iter().zip(c.basis()) {
        big.axpy(ONE, &xi.kron(bi));
    }
    let el = SpMatrixElement::new(p, m, d, scalar_space(), vec![big])?;
    Ok(sp_matrix_norm(&el, 0, search)?.upper)
}

/// A lower bound on `|y|_{S_p^m[F]}` and a functional `phi` with
/// `Re <phi, y> = value` and dual norm at most 1.
fn target_lower(f: &Space, p: f64, y: &[ComplexMatrix], search: &SearchConfig) -> Result<(f64, Vec<ComplexMatrix>)> {
    let total: f64 = y.iter().map(|v| v.frobenius_norm().powi(2)).sum::<f64>().sqrt();
    if total == 0.0 {
        return Ok((0.0, y.to_vec()));
    }
    if p == 2.0 && matches!(f, Space::Oh(_)) {
        // S_2[OH_j] = OH(I x I x J): a Euclidean norm
        return Ok((total, y.iter().map(|v| v.scale_real(1.0 / total)).collect()));
    }
    let u = SpElement::new(p, f.clone(), y.to_vec())?;
    let low = sp_norm_lower(&u, None, search)?;
    Ok((low.value, low.functional))
}

/// Maximize `Re <psi, x> / |x|` for the smooth `p = 2` domain norm.
fn norming_input(e: &Space, psi: &[ComplexMatrix], x0: &[ComplexMatrix], max_iter: usize) -> Vec<ComplexMatrix> {
    let (k, m) = (x0.len(), x0[0].rows());
    let mut x = x0.to_vec();
    for &r in &CONTINUATION[..6] {
        let mut v0 = Vec::new();
        for xi in &x {
            pack(xi, &mut v0);
        }
        let res = lbfgs(
            |v, out| {
                let mut off = 0;
                let xs: Vec<ComplexMatrix> = (0..k).map(|_| unpack(v, &mut off, m, m)).collect();
                let lin: f64 = psi.iter().zip(&xs).map(|(a, b)| a.inner(b).re).sum();
                if lin <= 0.0 {
                    return f64::INFINITY;
                }
                let Ok((d, g)) = domain_p2(e, &xs, r) else { return f64::INFINITY };
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                let mut off = 0;
                for (gi, pi) in g.iter().zip(psi) {
                    write_grad(&(&gi.scale_real(1.0 / d) - &pi.scale_real(1.0 / lin)), out, &mut off);
                }
                d.ln() - lin.ln()
            },
            v0,
            max_iter,
            1e-12,
        );
        let mut off = 0;
        x = (0..k).map(|_| unpack(&res.x, &mut off, m, m)).collect();
    }
    x
}

fn lower_at(u: &LinearMap, p: f64, m: usize, cfg: &PiSearch, r: usize) -> Result<(f64, Vec<ComplexMatrix>)> {
    let inner = SearchConfig { restarts: 2, ..cfg.search.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.search.restart_seed(r).wrapping_add((m as u64) << 40));
    let k = u.domain.dim();
    let mut x: Vec<ComplexMatrix> = (0..k).map(|_| ComplexMatrix::random_gaussian(m, m, &mut rng)).collect();
    let mut best = (0.0, x.clone());
    for _ in 0..cfg.rounds.max(1) {
        let d = domain_norm(&u.domain, p, &x, &inner)?;
        if d == 0.0 {
            break;
        }
        let (t, phi) = target_lower(&u.codomain, p, &u.apply(&x), &inner)?;
        if t / d > best.0 {
            best = (t / d, x.iter().map(|v| v.scale_real(1.0 / d)).collect());
        }
        if t == 0.0 {
            break;
        }
        // off p = 2 the iterates follow the p = 2 alternation
        let phi = if p == 2.0 { phi } else { target_lower(&u.codomain, 2.0, &u.apply(&x), &inner)?.1 };
        x = norming_input(&u.domain, &u.apply_adjoint(&phi), &x, cfg.search.max_iter);
    }
    Ok(best)
}

/// Best ratio over `m <= m_max`; each `m` is searched independently, so the
/// value never decreases as `m_max` grows.
pub fn pi_p_lower(u: &LinearMap, p: f64, cfg: &PiSearch) -> Result<PiLower> {
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::domain(format!("pi_p needs 1 <= p < inf, got {p}")));
    }
    let mut best = PiLower { value: 0.0, m: 1, witness: Vec::new() };
    if u.action.max_abs() == 0.0 {
        return Ok(best);
    }
    for m in 1..=cfg.m_max.max(1) {
        let runs: Vec<Result<(f64, Vec<ComplexMatrix>)>> =
            (0..cfg.search.restarts.max(1)).into_par_iter().map(|r| lower_at(u, p, m, cfg, r)).collect();
        for run in runs {
            let (v, w) = run?;
            if v > best.value {
                best = PiLower { value: v, m, witness: w };
            }
        }
    }
    Ok(best)
}

/// `‖u‖_HS` of the coordinate matrix.
pub fn hilbert_schmidt(u: &LinearMap) -> f64 {
    u.action.frobenius_norm()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PietschSearch {
    /// Default `min(d^2, dim(E)^4 + 1)`.
    pub m_copies: Option<usize>,
    pub rounds: usize,
    pub pool: usize,
    pub n_max: usize,
    /// Adversarial ascents per level and round.
    pub batch: usize,
    /// Fresh ascents used to replay the final certificate.
    pub replay: usize,
    pub search: SearchConfig,
}

impl PietschSearch {
    pub fn new(restarts: usize, seed: u64) -> Self {
        Self { m_copies: None, rounds: 12, pool: 256, n_max: 3, batch: 6, replay: 32, search: SearchConfig::new(restarts, seed) }
    }
}

impl Default for PietschSearch {
    fn default() -> Self {
        Self::new(2, 0)
    }
}

/// `‖(u(x_ij))‖_{M_n(F)} <= c (1 + slack) ‖(a pi(x_ij) b)‖_{M_n(S_2(H~))}` on
/// every sample tried, with `‖a‖_4 = ‖b‖_4 = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct PietschCertificate {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub m_copies: usize,
    pub c: f64,
    pub slack: f64,
    /// Samples the certificate was checked against.
    pub checked: usize,
}

impl PietschCertificate {
    pub fn upper(&self) -> f64 {
        self.c * (1.0 + self.slack)
    }
}

struct Sample {
    num: f64,
    x: Vec<ComplexMatrix>,
    /// `X_l (x) conj(X_l')`
    kr: Vec<Vec<ComplexMatrix>>,
}

impl Sample {
    fn new(num: f64, x: Vec<ComplexMatrix>) -> Self {
        let kr = x.iter().map(|xl| x.iter().map(|xm| xl.kron(&xm.conj_entrywise())).collect()).collect();
        Self { num, x, kr }
    }
}

struct Dominance<'a> {
    u: &'a LinearMap,
    basis: Vec<ComplexMatrix>,
    oh: OhSpace,
}

impl Dominance<'_> {
    fn amplified(&self, copies: usize) -> Vec<ComplexMatrix> {
        self.basis.iter().map(|b| b.kron(&ComplexMatrix::identity(copies))).collect()
    }

    fn gram(&self, a: &ComplexMatrix, b: &ComplexMatrix, amp: &[ComplexMatrix]) -> (Vec<ComplexMatrix>, ComplexMatrix) {
        let ks: Vec<ComplexMatrix> = amp.iter().map(|bl| &(a * bl) * b).collect();
        let k = ks.len();
        let gamma = ComplexMatrix::from_fn(k, k, |l, lp| ks[lp].inner(&ks[l]));
        (ks, gamma)
    }

    fn mix(root: &ComplexMatrix, x: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let k = x.len();
        (0..k)
            .map(|s| {
                let mut z = ComplexMatrix::zeros(x[0].rows(), x[0].cols());
                for (l, xl) in x.iter().enumerate() {
                    z.axpy(root[(l, s)], xl);
                }
                z
            })
            .collect()
    }

    fn num(&self, x: &[ComplexMatrix]) -> f64 {
        self.u.codomain.level_norm(&self.u.apply(x)).unwrap_or(f64::NAN)
    }

    fn den(&self, root: &ComplexMatrix, x: &[ComplexMatrix]) -> f64 {
        self.oh.level_norm(&Self::mix(root, x)).unwrap_or(f64::NAN)
    }

    /// Ascend `num / den` from `x0` at fixed `Gamma = root root*`.
    fn adversary(&self, root: &ComplexMatrix, x0: Vec<ComplexMatrix>, max_iter: usize) -> (f64, Vec<ComplexMatrix>) {
        let (k, n) = (x0.len(), x0[0].rows());
        let mut x = x0;
        for &r in &CONTINUATION[..5] {
            let mut v0 = Vec::new();
            for xi in &x {
                pack(xi, &mut v0);
            }
            let res = lbfgs(
                |v, out| {
                    let mut off = 0;
                    let xs: Vec<ComplexMatrix> = (0..k).map(|_| unpack(v, &mut off, n, n)).collect();
                    let Ok((nv, ng)) = self.u.codomain.surrogate_with_grad(&self.u.apply(&xs), r) else { return f64::INFINITY };
                    let Ok((dv, dg)) = self.oh.surrogate_with_grad(&Self::mix(root, &xs), r) else { return f64::INFINITY };
                    if nv <= 0.0 || dv <= 0.0 {
                        return f64::INFINITY;
                    }
                    let gn = self.u.apply_adjoint(&ng);
                    let mut off = 0;
                    for l in 0..k {
                        let mut g = gn[l].scale_real(-1.0 / nv);
                        for (s, ds) in dg.iter().enumerate() {
                            g.axpy(C64::new(root[(l, s)].re, -root[(l, s)].im) / dv, ds);
                        }
                        write_grad(&g, out, &mut off);
                    }
                    dv.ln() - nv.ln()
                },
                v0,
                max_iter,
                1e-12,
            );
            let mut off = 0;
            x = (0..k).map(|_| unpack(&res.x, &mut off, n, n)).collect();
        }
        let ratio = self.num(&x) / self.den(root, &x);
        (if ratio.is_finite() { ratio } else { f64::INFINITY }, x)
    }

    /// Smoothed `log max_j num_j / den_j(a / ‖a‖_4, b / ‖b‖_4)` and its gradient.
    fn certificate_objective(
        &self,
        a: &ComplexMatrix,
        b: &ComplexMatrix,
        amp: &[ComplexMatrix],
        pool: &[Sample],
        tau: f64,
        r: f64,
    ) -> Option<(f64, ComplexMatrix, ComplexMatrix)> {
        let (na, ga) = schatten_with_grad(a, 4.0).ok()?;
        let (nb, gb) = schatten_with_grad(b, 4.0).ok()?;
        let (ks, gamma) = self.gram(a, b, amp);
        let k = ks.len();
        // per sample: log num - 1/2 log |S(Gamma)|_r, S = sum Gamma_ll' X_l (x) conj(X_l')
        let mut logs = Vec::with_capacity(pool.len());
        let mut grads = Vec::with_capacity(pool.len());
        for Sample { num, x, kr } in pool {
            let mut s = ComplexMatrix::zeros(x[0].rows().pow(2), x[0].cols().pow(2));
            for l in 0..k {
                for lp in 0..k {
                    s.axpy(gamma[(l, lp)], &kr[l][lp]);
                }
            }
            let (sv, h) = schatten_with_grad(&s, r).ok()?;
            if !(sv > 0.0) {
                return None;
            }
            logs.push(num.ln() - 0.5 * sv.ln());
            grads.push(ComplexMatrix::from_fn(k, k, |l, lp| kr[l][lp].inner(&h).scale(-0.5 / sv)));
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ws: Vec<f64> = logs.iter().map(|l| ((l - top) / tau).exp()).collect();
        let total: f64 = ws.iter().sum();
        let mut g = ComplexMatrix::zeros(k, k);
        for (gj, w) in grads.iter().zip(&ws) {
            g.axpy(C64::new(w / total, 0.0), gj);
        }
        // Gamma_ll' = <K_l', K_l>
        let mut ga_total = ga.scale_real(1.0 / na);
        let mut gb_total = gb.scale_real(1.0 / nb);
        for l in 0..k {
            let mut gk = ComplexMatrix::zeros(ks[0].rows(), ks[0].cols());
            for lp in 0..k {
                gk.axpy(g[(l, lp)], &ks[lp]);
                gk.axpy(g[(lp, l)].conj(), &ks[lp]);
            }
            ga_total.axpy(ONE, &(&gk * &(&amp[l] * b).adjoint()));
            gb_total.axpy(ONE, &(&(a * &amp[l]).adjoint() * &gk));
        }
        Some((top + tau * total.ln() + na.ln() + nb.ln(), ga_total, gb_total))
    }

    fn root(&self, a: &ComplexMatrix, b: &ComplexMatrix, amp: &[ComplexMatrix]) -> Option<ComplexMatrix> {
        let a = a.scale_real(1.0 / a.schatten_norm(4.0).ok()?);
        let b = b.scale_real(1.0 / b.schatten_norm(4.0).ok()?);
        let (_, gamma) = self.gram(&a, &b, amp);
        gamma.hermitian_part().psd_power(0.5).ok()
    }

    fn worst(&self, root: &ComplexMatrix, pool: &[Sample]) -> f64 {
        pool.iter().map(|s| s.num / self.den(root, &s.x)).fold(0.0, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
    }
}

#[derive(PartialEq, PartialOrd)]
struct OrderedRatio(f64);

impl Eq for OrderedRatio {}

impl Ord for OrderedRatio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn support_projection(basis: &[ComplexMatrix], left: bool) -> Result<ComplexMatrix> {
    let d = basis[0].rows();
    let mut s = ComplexMatrix::zeros(d, d);
    for b in basis {
        let term = if left { b * &b.adjoint() } else { &b.adjoint() * b };
        s.axpy(ONE, &term);
    }
    let svd = s.svd()?;
    let top = svd.sigma[0];
    let w: Vec<f64> = svd.sigma.iter().map(|&v| if v > 1e-10 * top { 1.0 } else { 0.0 }).collect();
    Ok(svd.recombine(&w))
}

fn random_sample(k: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<ComplexMatrix> {
    (0..k).map(|_| ComplexMatrix::random_gaussian(n, n, rng)).collect()
}

/// Alternate adversarial sampling and certificate descent; see [`PietschCertificate`].
pub fn pietsch_upper_p2(u: &LinearMap, cfg: &PietschSearch) -> Result<PietschCertificate> {
    let c = u.domain.as_concrete().ok_or_else(|| Error::Unsupported("Pietsch certificates need a concrete domain".into()))?;
    let (d, k) = (c.ambient_dim(), c.dim());
    let copies = cfg.m_copies.unwrap_or((d * d).min(k.pow(4) + 1)).max(1);
    let size = d * copies;
    if u.action.max_abs() == 0.0 {
        let id = ComplexMatrix::identity(size).scale_real((size as f64).powf(-0.25));
        return Ok(PietschCertificate { a: id.clone(), b: id, m_copies: copies, c: 0.0, slack: 0.0, checked: 0 });
    }
    let dom = Dominance { u, basis: c.basis().to_vec(), oh: OhSpace::new(k)? };
    let amp = dom.amplified(copies);
    let pl = support_projection(c.basis(), true)?.kron(&ComplexMatrix::identity(copies));
    let pr = support_projection(c.basis(), false)?.kron(&ComplexMatrix::identity(copies));
    let runs: Vec<Option<PietschCertificate>> = (0..cfg.search.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.search.restart_seed(r).wrapping_add(0x9e37));
            let (mut a, mut b) = (pl.clone(), pr.clone());
            if r > 0 {
                let s = 0.3 / (size as f64).sqrt();
                a = &a + &ComplexMatrix::random_gaussian(size, size, &mut rng).scale_real(s);
                b = &b + &ComplexMatrix::random_gaussian(size, size, &mut rng).scale_real(s);
            }
            let mut pool: Vec<Sample> = Vec::new();
            let mut candidates: Vec<(ComplexMatrix, ComplexMatrix)> = Vec::new();
            for _round in 0..cfg.rounds {
                let root = dom.root(&a, &b, &amp)?;
                for n in 1..=cfg.n_max {
                    for _ in 0..cfg.batch {
                        let (_, x) = dom.adversary(&root, random_sample(k, n, &mut rng), cfg.search.max_iter);
                        let num = dom.num(&x);
                        if num > 0.0 && num.is_finite() {
                            pool.push(Sample::new(num, x));
                        }
                    }
                }
                // keep the hardest samples for the current certificate
                pool.sort_by_cached_key(|s| std::cmp::Reverse(OrderedRatio(s.num / dom.den(&root, &s.x))));
                pool.truncate(cfg.pool);
                for (tau, rr) in [(0.05, 64.0), (0.01, 512.0), (2e-3, 4096.0)] {
                    let mut v0 = Vec::new();
                    pack(&a, &mut v0);
                    pack(&b, &mut v0);
                    let res = lbfgs(
                        |v, out| {
                            let mut off = 0;
                            let aa = unpack(v, &mut off, size, size);
                            let bb = unpack(v, &mut off, size, size);
                            match dom.certificate_objective(&aa, &bb, &amp, &pool, tau, rr) {
                                Some((val, ga, gb)) => {
                                    let mut off = 0;
                                    write_grad(&ga, out, &mut off);
                                    write_grad(&gb, out, &mut off);
                                    val
                                }
                                None => f64::INFINITY,
                            }
                        },
                        v0,
                        cfg.search.max_iter,
                        1e-12,
                    );
                    let mut off = 0;
                    a = unpack(&res.x, &mut off, size, size);
                    b = unpack(&res.x, &mut off, size, size);
                }
                a = a.scale_real(1.0 / a.schatten_norm(4.0).ok()?);
                b = b.scale_real(1.0 / b.schatten_norm(4.0).ok()?);
                candidates.push((a.clone(), b.clone()));
            }
            let (a, b) = candidates
                .into_iter()
                .filter_map(|(a, b)| Some((dom.worst(&dom.root(&a, &b, &amp)?, &pool), a, b)))
                .min_by(|p, q| p.0.total_cmp(&q.0))
                .map(|(_, a, b)| (a, b))?;
            let root = dom.root(&a, &b, &amp)?;
            let c_pool = dom.worst(&root, &pool);
            let mut replayed = 0.0f64;
            for t in 0..cfg.replay {
                let n = 1 + t % cfg.n_max;
                let (v, _) = dom.adversary(&root, random_sample(k, n, &mut rng), cfg.search.max_iter);
                replayed = replayed.max(v);
            }
            let slack = (replayed / c_pool - 1.0).max(0.0);
            Some(PietschCertificate { a, b, m_copies: copies, c: c_pool, slack, checked: pool.len() + cfg.replay })
        })
        .collect();
    runs.into_iter()
        .flatten()
        .filter(|c| c.upper().is_finite())
        .min_by(|p, q| p.upper().total_cmp(&q.upper()))
        .ok_or_else(|| Error::Numerical { what: "every Pietsch certificate was degenerate".into(), residual: f64::INFINITY })
}

/// `‖(u(x_ij))‖ / ‖(a pi(x_ij) b)‖_{M_n(S_2)}` at one input, for replay.
pub fn replay_ratio(u: &LinearMap, cert: &PietschCertificate, x: &[ComplexMatrix]) -> Result<f64> {
    let c = u.domain.as_concrete().ok_or_else(|| Error::Unsupported("Pietsch certificates need a concrete domain".into()))?;
    let n = x[0].rows();
    let mut num_coeffs = Vec::with_capacity(x.len());
    num_coeffs.extend_from_slice(x);
    let num = u.codomain.level_norm(&u.apply(&num_coeffs))?;
    // (a pi(x_ij) b) as n x n blocks of D x D matrices, read in OH coordinates
    let id = ComplexMatrix::identity(cert.m_copies);
    let mut blocks = vec![ComplexMatrix::zeros(cert.a.rows(), cert.b.cols()); n * n];
    for (xl, bl) in x.iter().zip(c.basis()) {
        let k = &(&cert.a * &bl.kron(&id)) * &cert.b;
        for i in 0..n {
            for j in 0..n {
                blocks[i * n + j].axpy(xl[(i, j)], &k);
            }
        }
    }
    let size = cert.a.rows();
    let coords: Vec<ComplexMatrix> = (0..size * cert.b.cols())
        .map(|rc| ComplexMatrix::from_fn(n, n, |i, j| blocks[i * n + j][(rc / cert.b.cols(), rc % cert.b.cols())]))
        .collect();
    let den = OhSpace::new(coords.len())?.level_norm(&coords)?;
    Ok(num / den)
}

/// Upper bound on `pi_2^0(u)` and how it was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct PiUpper {
    pub value: f64,
    pub how: String,
    pub certificate: Option<PietschCertificate>,
}

/// Pietsch certificate for concrete domains. For `OH` domains: the
/// Hilbert-Schmidt norm when the codomain is `OH` too, otherwise
/// `sum_k sigma_k ‖f_k‖_F` over a singular value decomposition of the action.
pub fn pi2_upper(u: &LinearMap, cfg: &PietschSearch) -> Result<PiUpper> {
    match (&u.domain, &u.codomain) {
        (Space::Concrete(_), _) => {
            let cert = pietsch_upper_p2(u, cfg)?;
            Ok(PiUpper { value: cert.upper(), how: format!("Pietsch certificate, {} copies", cert.m_copies), certificate: Some(cert) })
        }
        (Space::Oh(_), Space::Oh(_)) => Ok(PiUpper { value: hilbert_schmidt(u), how: "Hilbert-Schmidt norm (OH to OH)".into(), certificate: None }),
        (Space::Oh(_), f) => {
            let s = u.action.svd()?;
            let mut total = 0.0;
            for (j, sigma) in s.sigma.iter().enumerate() {
                let col: Vec<ComplexMatrix> = (0..f.dim()).map(|i| ComplexMatrix::from_fn(1, 1, |_, _| s.u[(i, j)])).collect();
                total += sigma * f.level_norm(&col)?;
            }
            Ok(PiUpper { value: total, how: "nuclear decomposition through OH coordinates".into(), certificate: None })
        }
    }
}

/// `[pi_p_lower, pi_2 upper]` for the identity of `E` against `sqrt(dim E)`.
pub fn identity_experiment(e: &Space, lower: &PiSearch, upper: &PietschSearch) -> Result<Record> {
    let u = LinearMap::identity(e.clone());
    let n = e.dim();
    let low = pi_p_lower(&u, 2.0, lower)?;
    let up = if n == 1 { PiUpper { value: 1.0, how: "one-dimensional".into(), certificate: None } } else { pi2_upper(&u, upper)? };
    let target = (n as f64).sqrt();
    Ok(Record::new(format!("pi_2^0(I_{}) = sqrt({n})", e.label()), target, low.value, up.value, lower.search.seed))
}

/// `cb` lower bound against the `pi_2^0` upper bound.
pub fn cb_minorization_check(u: &LinearMap, cb: &CbSearch, upper: &PietschSearch) -> Result<Record> {
    let cbb = cb_norm(u, cb)?;
    let up = if u.action.max_abs() == 0.0 { 0.0 } else { pi2_upper(u, upper)?.value };
    let mut rec = Record::new(format!("|u|_cb <= pi_2^0(u) for {} -> {}", u.domain.label(), u.codomain.label()), up, cbb.lower, up, cb.search.seed);
    rec.pass = cbb.lower <= up * (1.0 + 1e-9) + 1e-12;
    Ok(rec)
}

/// `pi_2` bracket of a map between OH spaces against its Hilbert-Schmidt norm.
pub fn hs_coincidence_check(u: &LinearMap, lower: &PiSearch, tol: f64) -> Result<Record> {
    if !matches!((&u.domain, &u.codomain), (Space::Oh(_), Space::Oh(_))) {
        return Err(Error::Unsupported("HS coincidence is stated for maps between OH spaces".into()));
    }
    let hs = hilbert_schmidt(u);
    let low = pi_p_lower(u, 2.0, lower)?;
    let mut rec = Record::new(format!("pi_2^0(u) = |u|_HS on {} -> {}", u.domain.label(), u.codomain.label()), hs, low.value, hs, lower.search.seed);
    rec.pass = low.value >= (1.0 - tol) * hs && low.value <= hs * (1.0 + 1e-9);
    Ok(rec)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionReport {
    pub space: String,
    pub target: f64,
    /// Lower end of `‖P‖_cb` for the projection `P : M_d -> E`.
    pub projection_cb_lower: f64,
    pub projection_cb_upper: f64,
    /// `‖w‖_cb ‖w^-1‖_cb` for `w : E -> OH_n`, as a bracket.
    pub distance_lower: f64,
    pub distance_upper: f64,
    pub note: String,
}

/// Build `w(x) = a pi(x) b` from the identity's certificate, the projection
/// `P = w|_E^-1 Q w` with `Q` the orthogonal projection onto `w(E)`, and the
/// isomorphism `E -> OH_n` given by orthonormal coordinates of `w(E)`.
pub fn extension_and_projection_experiment(e: &Space, upper: &PietschSearch, cb: &CbSearch) -> Result<ProjectionReport> {
    let c = e.as_concrete().ok_or_else(|| Error::Unsupported("the projection experiment needs E inside M_d".into()))?;
    let (d, n) = (c.ambient_dim(), c.dim());
    let target = 1.1 * (n as f64).sqrt();
    let u = LinearMap::identity(e.clone());
    let cert = if n == 1 {
        PietschCertificate { a: ComplexMatrix::identity(d), b: ComplexMatrix::identity(d), m_copies: 1, c: 1.0, slack: 0.0, checked: 0 }
    } else {
        pietsch_upper_p2(&u, upper)?
    };
    let id = ComplexMatrix::identity(cert.m_copies);
    let w = |x: &ComplexMatrix| (&(&cert.a * &x.kron(&id)) * &cert.b).into_data();
    // columns: w(b_l) as vectors in S_2(H~)
    let cols: Vec<Vec<C64>> = c.basis().iter().map(|b| w(b)).collect();
    let len = cols[0].len();
    let wmat = ComplexMatrix::from_fn(len, n, |i, l| cols[l][i]);
    let s = wmat.svd()?;
    if s.sigma.last().copied().unwrap_or(0.0) <= 1e-10 * s.sigma[0] {
        return Ok(ProjectionReport {
            space: e.label(),
            target,
            projection_cb_lower: f64::NAN,
            projection_cb_upper: f64::NAN,
            distance_lower: f64::NAN,
            distance_upper: f64::NAN,
            note: "certificate is singular on E; experiment inconclusive".into(),
        });
    }
    // coordinates of w(e) in the orthonormal basis s.u: (s.u)* wmat = S V*
    let to_oh = &s.u.adjoint() * &wmat;
    let from_oh = to_oh.inverse()?;
    let w_map = LinearMap::new(e.clone(), oh_space(n), to_oh.clone())?;
    let w_inv = LinearMap::new(oh_space(n), e.clone(), from_oh.clone())?;
    // P on M_d: x -> w|_E^-1 (orthogonal coordinates of w(x))
    let values: Vec<ComplexMatrix> = (0..d * d)
        .map(|k| {
            let x = ComplexMatrix::unit(d, d, k / d, k % d);
            let wx = ComplexMatrix::new(len, 1, w(&x)).expect("shape");
            let coords = &from_oh * &(&s.u.adjoint() * &wx);
            c.element(coords.data())
        })
        .collect();
    let p = LinearMap::from_values(full_space(d), e.clone(), &values)?;
    let pb = cb_norm(&p, cb)?;
    let wb = cb_norm(&w_map, cb)?;
    let wib = cb_norm(&w_inv, cb)?;
    Ok(ProjectionReport {
        space: e.label(),
        target,
        projection_cb_lower: pb.lower,
        projection_cb_upper: pb.upper,
        distance_lower: wb.lower * wib.lower,
        distance_upper: wb.upper * wib.upper,
        note: format!("certificate c = {:.4}, slack {:.2e}", cert.c, cert.slack),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspace::diag_space;

    #[test]
    fn domain_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = diag_space(2);
        let x = random_sample(2, 2, &mut rng);
        let (v, g) = domain_p2(&e, &x, 32.0).unwrap();
        let mut dx = random_sample(2, 2, &mut rng);
        for m in dx.iter_mut() {
            *m = m.scale_real(1e-6);
        }
        let xp: Vec<ComplexMatrix> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let (vp, _) = domain_p2(&e, &xp, 32.0).unwrap();
        let lin: f64 = g.iter().zip(&dx).map(|(a, b)| a.inner(b).re).sum();
        assert!((vp - v - lin).abs() < 1e-9, "{} vs {}", vp - v, lin);
    }

    #[test]
    fn gram_form_matches_direct_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = diag_space(2);
        let u = LinearMap::identity(e.clone());
        let c = e.as_concrete().unwrap();
        let dom = Dominance { u: &u, basis: c.basis().to_vec(), oh: OhSpace::new(2).unwrap() };
        let amp = dom.amplified(2);
        let a = ComplexMatrix::random_gaussian(4, 4, &mut rng);
        let b = ComplexMatrix::random_gaussian(4, 4, &mut rng);
        let (a, b) = (a.scale_real(1.0 / a.schatten_norm(4.0).unwrap()), b.scale_real(1.0 / b.schatten_norm(4.0).unwrap()));
        let root = dom.root(&a, &b, &amp).unwrap();
        let x = random_sample(2, 2, &mut rng);
        let cert = PietschCertificate { a, b, m_copies: 2, c: 0.0, slack: 0.0, checked: 0 };
        let direct = replay_ratio(&u, &cert, &x).unwrap();
        let gram = dom.num(&x) / dom.den(&root, &x);
        assert!((direct - gram).abs() < 1e-9 * direct, "{direct} vs {gram}");
    }

    #[test]
    fn zero_map() {
        let u = LinearMap::new(diag_space(2), diag_space(2), ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(pi_p_lower(&u, 2.0, &PiSearch::new(2, 1, 0)).unwrap().value, 0.0);
        assert_eq!(pietsch_upper_p2(&u, &PietschSearch::new(1, 0)).unwrap().c, 0.0);
    }
}
