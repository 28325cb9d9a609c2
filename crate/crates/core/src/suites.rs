//! Named experiment suites. Each check returns one [`Record`] per sample, or
//! a single aggregate record for fuzzed invariants.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cbnorm::{CbSearch, LinearMap};
use crate::config::SearchConfig;
use crate::error::{Error, Result};
use crate::haagerup::{haagerup_norm, s2_oh_isometry_check, theorem1_s2_norm};
use crate::interp::{couples_theorem_check, interp_bracket, CompatibleCouple, CoupleChoice, InterpConfig};
use crate::matrix::{ComplexMatrix, ONE};
use crate::opspace::{column_space, diag_space, full_space, oh_space, row_space, scalar_space, MatrixNormFamily, Space, TensorCoeffs};
use crate::psumming::{cb_minorization_check, hs_coincidence_check, identity_experiment, PiSearch, PietschSearch};
use crate::report::Record;
use crate::schatten::{fubini_check, pq_inclusion_check, sp_norm, NestedElement, SpElement};

pub const SUITES: [&str; 6] = ["duality", "fubini", "theorem1", "pi2-identity", "hs-oh", "endpoints"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Replaces every per-check tolerance when set.
    pub tol: Option<f64>,
    pub max_level: usize,
    pub m_max: usize,
    #[serde(skip)]
    pub timing: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 0, restarts: 4, tol: None, max_level: 3, m_max: 8, timing: false }
    }
}

impl SuiteConfig {
    fn search(&self, salt: u64) -> SearchConfig {
        SearchConfig::new(self.restarts, self.seed ^ salt)
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub suite: String,
    pub seed: u64,
    pub config: SuiteConfig,
    pub tolerances: BTreeMap<String, f64>,
    pub records: Vec<Record>,
    pub pass: bool,
}

struct Timer {
    on: bool,
    start: Instant,
}

impl Timer {
    fn new(on: bool) -> Self {
        Self { on, start: Instant::now() }
    }

    fn stamp(&mut self, rec: &mut Record) {
        if self.on {
            rec.runtime = Some(self.start.elapsed().as_secs_f64());
        }
        self.start = Instant::now();
    }
}

fn gaussian_coeffs(k: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<ComplexMatrix> {
    (0..k).map(|_| ComplexMatrix::random_gaussian(m, m, rng)).collect()
}

fn fmt_p(p: f64) -> String {
    if p.is_infinite() { "inf".into() } else { format!("{p:.4}").trim_end_matches('0').trim_end_matches('.').to_string() }
}

/// `S_p^m[C]` against singular values.
pub fn scalar_collapse(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let ratio = cfg.tol(1e-3);
    tols.insert("scalar_collapse.ratio".into(), ratio);
    let mut rng = cfg.rng(1);
    let search = cfg.search(1);
    let mut timer = Timer::new(cfg.timing);
    let ps = [1.0, 4.0 / 3.0, 2.0, 3.0, 4.0];
    let mut out = Vec::new();
    for i in 0..40 {
        let (p, m) = (ps[i % 5], 1 + i % 4);
        let x = ComplexMatrix::random_gaussian(m, m, &mut rng);
        let exact = x.schatten_norm(p)?;
        let b = sp_norm(&SpElement::new(p, scalar_space(), vec![x])?, &search)?;
        let mut rec = Record::new(format!("S_{}^{m}[C] = S_{}^{m}", fmt_p(p), fmt_p(p)), exact, b.lower, b.upper, cfg.seed);
        rec.pass = b.contains(exact, 1e-9) && b.upper <= b.lower * (1.0 + ratio);
        timer.stamp(&mut rec);
        out.push(rec);
    }
    Ok(out)
}

fn ambient_norm(e: &Space, coeffs: &[ComplexMatrix]) -> Result<f64> {
    let c = e.as_concrete().ok_or_else(|| Error::Unsupported("ambient norm needs a concrete space".into()))?;
    let m = coeffs[0].rows();
    let d = c.ambient_dim();
    let mut big = ComplexMatrix::zeros(m * d, m * d);
    for (x, b) in coeffs.iter().zip(c.basis()) {
        big.axpy(ONE, &x.kron(b));
    }
    Ok(big.operator_norm())
}

/// `S_inf^m[E] = M_m(E)` for `E` inside `M_d`.
pub fn sup_endpoint(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let tol = cfg.tol(1e-10);
    tols.insert("sup_endpoint.abs".into(), tol);
    let mut rng = cfg.rng(2);
    let search = cfg.search(2);
    let mut timer = Timer::new(cfg.timing);
    let spaces = [diag_space(2), full_space(2), column_space(3), row_space(3)];
    let mut out = Vec::new();
    for i in 0..100 {
        let e = &spaces[i % 4];
        let m = 1 + (i / 4) % 3;
        let x = gaussian_coeffs(e.dim(), m, &mut rng);
        let exact = ambient_norm(e, &x)?;
        let b = sp_norm(&SpElement::new(f64::INFINITY, e.clone(), x)?, &search)?;
        let mut rec = Record::new(format!("S_inf^{m}[{}] = M_{m}({})", e.label(), e.label()), exact, b.lower, b.upper, cfg.seed);
        rec.pass = (b.lower - exact).abs() <= tol * exact.max(1.0) && (b.upper - exact).abs() <= tol * exact.max(1.0);
        timer.stamp(&mut rec);
        out.push(rec);
    }
    Ok(out)
}

fn pattern(c: &ComplexMatrix) -> TensorCoeffs {
    (0..c.rows()).map(|i| (0..c.cols()).map(|j| ComplexMatrix::from_fn(1, 1, |_, _| c[(i, j)])).collect()).collect()
}

/// `C_n (x)_h R_n = M_n` and `R_n (x)_h C_n = S_1^n`.
pub fn haagerup_endpoints(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let tol = cfg.tol(1e-2);
    tols.insert("haagerup_endpoints.relative".into(), tol);
    let mut rng = cfg.rng(3);
    let search = cfg.search(3);
    let mut timer = Timer::new(cfg.timing);
    let mut out = Vec::new();
    for i in 0..40 {
        let n = 2 + (i / 2) % 3;
        let c = ComplexMatrix::random_gaussian(n, n, &mut rng);
        let (claim, b, exact) = if i % 2 == 0 {
            (format!("C_{n} (x)_h R_{n} = M_{n}"), haagerup_norm(&column_space(n), &row_space(n), &pattern(&c), &search)?, c.operator_norm())
        } else {
            (format!("R_{n} (x)_h C_{n} = S_1^{n}"), haagerup_norm(&row_space(n), &column_space(n), &pattern(&c), &search)?, c.schatten_norm(1.0)?)
        };
        let mut rec = Record::new(claim, exact, b.lower, b.upper, cfg.seed);
        rec.pass = b.contains(exact, 1e-9) && rec.relative_gap() <= tol;
        timer.stamp(&mut rec);
        out.push(rec);
    }
    Ok(out)
}

/// `S_2[E] = OH (x)_h E (x)_h OH` against the factorization bracket of `S_2^m[E]`.
pub fn theorem1_midpoint(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let tol = cfg.tol(1e-3);
    tols.insert("theorem1.combined_gap".into(), tol);
    let mut rng = cfg.rng(4);
    let search = cfg.search(4);
    let mut timer = Timer::new(cfg.timing);
    let mut out = Vec::new();
    for i in 0..20 {
        let e = if i % 2 == 0 { diag_space(2) } else { full_space(2) };
        let u = SpElement::new(2.0, e.clone(), gaussian_coeffs(e.dim(), 2, &mut rng))?;
        let t = theorem1_s2_norm(&u, &search)?;
        let s = sp_norm(&u, &search)?;
        let lo = t.lower.min(s.lower);
        let hi = t.upper.max(s.upper);
        let gap = (hi - lo) / t.lower.max(s.lower);
        // target: the factorization upper bound of S_2^2[E]
        let mut rec = Record::new(format!("S_2^2[{}] = OH (x)_h {} (x)_h OH", e.label(), e.label()), s.upper, t.lower, t.upper, cfg.seed);
        rec.pass = t.overlaps(&s, 1e-12) && gap <= tol;
        timer.stamp(&mut rec);
        out.push(rec);
    }
    Ok(out)
}

/// Norming functionals reach the factorization bound; lower never exceeds upper.
pub fn duality(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let reach = 1.0 - cfg.tol(0.05);
    tols.insert("duality.reach".into(), reach);
    let mut rng = cfg.rng(5);
    let search = cfg.search(5);
    let mut timer = Timer::new(cfg.timing);
    let mut out = Vec::new();
    for p in [1.0, 2.0, 4.0] {
        for _ in 0..20 {
            let u = SpElement::new(p, diag_space(2), gaussian_coeffs(2, 2, &mut rng))?;
            let b = sp_norm(&u, &search)?;
            let mut rec = Record::new(format!("dual witness reaches S_{}^2[diag:2] bound", fmt_p(p)), b.upper, b.lower, b.upper, cfg.seed);
            rec.pass = b.lower >= reach * b.upper && b.lower <= b.upper * (1.0 + 1e-9);
            timer.stamp(&mut rec);
            out.push(rec);
        }
    }
    let spaces = [diag_space(2), full_space(2), column_space(3), row_space(2), oh_space(2), scalar_space()];
    let light = SearchConfig::new(1, cfg.seed ^ 55);
    let mut violations = 0usize;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let e = &spaces[rng.random_range(0..spaces.len())];
        let m = rng.random_range(1..=3);
        let p = if rng.random_bool(0.1) { f64::INFINITY } else { 1.0 + rng.random::<f64>() * 5.0 };
        let scale = (rng.random::<f64>() * 16.0 - 8.0).exp();
        let mut x = gaussian_coeffs(e.dim(), m, &mut rng);
        if rng.random_bool(0.3) {
            // rank one in every coefficient
            let v = ComplexMatrix::random_gaussian(m, 1, &mut rng);
            let w = ComplexMatrix::random_gaussian(1, m, &mut rng);
            x = x.iter().enumerate().map(|(i, _)| (&v * &w).scale_real((i + 1) as f64)).collect();
        }
        let x = x.iter().map(|c| c.scale_real(scale)).collect();
        let b = sp_norm(&SpElement::new(p, e.clone(), x)?, &light)?;
        worst = worst.max(b.lower / b.upper);
        if !(b.lower <= b.upper * (1.0 + 1e-9)) {
            violations += 1;
        }
    }
    let mut rec = Record::new("weak duality: lower <= upper on 1000 fuzzed elements (violations)", 0.0, violations as f64, violations as f64, cfg.seed);
    rec.pass = violations == 0;
    timer.stamp(&mut rec);
    out.push(rec);
    Ok(out)
}

/// `S_p^{mn}[E] = S_p^m[S_p^n[E]]`, and `p <= q` inclusions are contractive.
pub fn fubini(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let tol = cfg.tol(2e-2);
    tols.insert("fubini.combined_gap".into(), tol);
    let mut rng = cfg.rng(6);
    let search = cfg.search(6);
    let mut timer = Timer::new(cfg.timing);
    let mut out = Vec::new();
    for i in 0..30 {
        let p = if i % 2 == 0 { 1.0 } else { 2.0 };
        let e = if i % 3 == 0 { scalar_space() } else { diag_space(2) };
        let x = NestedElement::new(p, p, 2, 2, e.clone(), gaussian_coeffs(e.dim(), 4, &mut rng))?;
        let r = fubini_check(&x, &search, tol)?;
        let mut rec = Record::new(format!("S_{0}^4[{1}] = S_{0}^2[S_{0}^2[{1}]]", fmt_p(p), e.label()), r.flat.upper, r.nested.lower, r.nested.upper, cfg.seed);
        rec.pass = r.overlap && r.union_width <= tol;
        timer.stamp(&mut rec);
        out.push(rec);
    }
    let light = SearchConfig::new(1, cfg.seed ^ 66);
    let spaces = [scalar_space(), diag_space(2), column_space(2)];
    let mut violations = 0usize;
    for _ in 0..200 {
        let e = &spaces[rng.random_range(0..spaces.len())];
        let p = 1.0 + rng.random::<f64>() * 3.0;
        let q = if rng.random_bool(0.2) { f64::INFINITY } else { p + rng.random::<f64>() * 3.0 };
        let (mo, mi) = (rng.random_range(1..=2), rng.random_range(1..=2));
        let x = NestedElement::new(p, q, mo, mi, e.clone(), gaussian_coeffs(e.dim(), mo * mi, &mut rng))?;
        if !pq_inclusion_check(&x, &light, 1e-6)?.contractive {
            violations += 1;
        }
    }
    let mut rec = Record::new("S_p[S_q] -> S_q[S_p] contractive for p <= q on 200 fuzzed elements (violations)", 0.0, violations as f64, violations as f64, cfg.seed);
    rec.pass = violations == 0;
    timer.stamp(&mut rec);
    out.push(rec);
    Ok(out)
}

/// `S_2 = OH(I x I)` at matrix level 2.
pub fn s2_is_oh(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let (t_scalar, t_oh) = (cfg.tol(5e-3), cfg.tol(1e-2));
    tols.insert("s2_oh.scalar".into(), t_scalar);
    tols.insert("s2_oh.oh2".into(), t_oh);
    let mut timer = Timer::new(cfg.timing);
    let mut out = Vec::new();
    for (space, samples, tol, claim) in [(scalar_space(), 30, t_scalar, "M_2(S_2^2) = M_2(OH_4)"), (oh_space(2), 10, t_oh, "M_2(S_2^2[OH_2]) = M_2(OH_8)")] {
        let r = s2_oh_isometry_check(2, 2, &space, samples, &cfg.search(7), tol)?;
        for s in r.samples {
            let mut rec = Record::new(claim, s.oh, s.lower, s.upper, cfg.seed);
            rec.pass = s.relative_gap <= tol;
            out.push(rec);
        }
        if let Some(last) = out.last_mut() {
            timer.stamp(last);
        }
    }
    Ok(out)
}

/// `(S_inf^d, S_1^d)_{1/2} = S_2^d`, and the scalar couple at `theta = 1/2`.
pub fn interpolation(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let (t_mid, t_couple) = (cfg.tol(0.05), cfg.tol(0.08));
    tols.insert("interp.midpoint".into(), t_mid);
    tols.insert("interp.couples".into(), t_couple);
    let mut rng = cfg.rng(8);
    let icfg = InterpConfig { seed: cfg.seed, ..InterpConfig::default() };
    let mut timer = Timer::new(cfg.timing);
    let mut out = Vec::new();
    for i in 0..20 {
        let d = 1 + i % 3;
        let x = ComplexMatrix::random_gaussian(d, d, &mut rng);
        let (lo, up) = interp_bracket(&CompatibleCouple::schatten(d, f64::INFINITY, 1.0), 0.5, x.data(), &icfg)?;
        let s2 = x.frobenius_norm();
        let mut rec = Record::new(format!("(S_inf^{d}, S_1^{d})_1/2 = S_2^{d}"), s2, lo, up, cfg.seed);
        rec.pass = lo <= up * (1.0 + 1e-12) && lo >= (1.0 - t_mid) * s2 && up <= (1.0 + t_mid) * s2;
        timer.stamp(&mut rec);
        out.push(rec);
    }
    let r = couples_theorem_check(&CoupleChoice::Scalar { d: 2, p0: f64::INFINITY, p1: 1.0 }, 0.5, 5, &icfg, t_couple)?;
    for s in r.samples {
        let mut rec = Record::new("(S_inf^2[C], S_1^2[C])_1/2 = S_2^2[C]", s.direct, s.lower, s.upper, cfg.seed);
        rec.pass = (s.direct - s.lower).max(s.upper - s.direct) <= t_couple * s.direct;
        out.push(rec);
    }
    if let Some(last) = out.last_mut() {
        timer.stamp(last);
    }
    Ok(out)
}

/// Brackets on `pi_2^0(I_E)` against `sqrt(dim E)`.
pub fn identity_brackets(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let (below, above) = (cfg.tol(0.1), cfg.tol(0.15));
    tols.insert("pi2_identity.below".into(), below);
    tols.insert("pi2_identity.above".into(), above);
    let lower = PiSearch::new(cfg.m_max, cfg.restarts.min(2), cfg.seed);
    let upper = PietschSearch::new(cfg.restarts.min(2), cfg.seed);
    let mut timer = Timer::new(cfg.timing);
    let mut out = Vec::new();
    for e in [diag_space(2), column_space(2), row_space(2), oh_space(2), full_space(2)] {
        let mut rec = identity_experiment(&e, &lower, &upper)?;
        rec.pass = rec.lower >= (1.0 - below) * rec.target && rec.upper <= (1.0 + above) * rec.target && rec.lower <= rec.upper * (1.0 + 1e-9);
        timer.stamp(&mut rec);
        out.push(rec);
    }
    Ok(out)
}

/// Maps used for `|u|_cb <= pi_2^0(u)`.
pub fn map_corpus(seed: u64) -> Result<Vec<LinearMap>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0);
    let mut maps = vec![
        LinearMap::identity(diag_space(2)),
        LinearMap::identity(column_space(2)),
        LinearMap::identity(row_space(2)),
        LinearMap::identity(oh_space(2)),
        LinearMap::new(diag_space(2), full_space(2), ComplexMatrix::zeros(4, 2))?,
    ];
    // x -> a x b into S_2^2 read as OH_4
    let a = ComplexMatrix::random_gaussian(2, 2, &mut rng);
    let b = ComplexMatrix::random_gaussian(2, 2, &mut rng);
    let act = ComplexMatrix::from_fn(4, 4, |i, j| (&(&a * &ComplexMatrix::unit(2, 2, j / 2, j % 2)) * &b)[(i / 2, i % 2)]);
    maps.push(LinearMap::new(full_space(2), oh_space(4), act)?);
    for (e, f) in [
        (diag_space(2), full_space(2)),
        (column_space(2), oh_space(3)),
        (row_space(2), column_space(2)),
        (oh_space(2), full_space(2)),
        (oh_space(2), oh_space(3)),
    ] {
        let act = ComplexMatrix::random_gaussian(f.dim(), e.dim(), &mut rng);
        maps.push(LinearMap::new(e, f, act)?);
    }
    Ok(maps)
}

pub fn cb_minorization(cfg: &SuiteConfig, _tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let cb = CbSearch::new(cfg.max_level, cfg.restarts.min(2), cfg.seed);
    let mut upper = PietschSearch::new(cfg.restarts.min(2), cfg.seed);
    upper.rounds = 6;
    upper.batch = 4;
    let mut timer = Timer::new(cfg.timing);
    let mut out = Vec::new();
    for u in map_corpus(cfg.seed)? {
        let mut rec = cb_minorization_check(&u, &cb, &upper)?;
        timer.stamp(&mut rec);
        out.push(rec);
    }
    Ok(out)
}

/// `pi_2^0(u) = |u|_HS` for maps `OH_2 -> OH_3`.
pub fn hs_coincidence(cfg: &SuiteConfig, tols: &mut BTreeMap<String, f64>) -> Result<Vec<Record>> {
    let tol = cfg.tol(0.1);
    tols.insert("hs_oh.relative".into(), tol);
    let mut rng = cfg.rng(10);
    let lower = PiSearch::new(cfg.m_max, cfg.restarts.min(2), cfg.seed);
    let mut timer = Timer::new(cfg.timing);
    let mut out = Vec::new();
    for _ in 0..20 {
        let u = LinearMap::new(oh_space(2), oh_space(3), ComplexMatrix::random_gaussian(3, 2, &mut rng))?;
        let mut rec = hs_coincidence_check(&u, &lower, tol)?;
        timer.stamp(&mut rec);
        out.push(rec);
    }
    Ok(out)
}

type Check = fn(&SuiteConfig, &mut BTreeMap<String, f64>) -> Result<Vec<Record>>;

fn checks(name: &str) -> Result<Vec<Check>> {
    Ok(match name {
        "endpoints" => vec![scalar_collapse, sup_endpoint, haagerup_endpoints],
        "duality" => vec![duality],
        "fubini" => vec![fubini],
        "theorem1" => vec![theorem1_midpoint, s2_is_oh, interpolation],
        "pi2-identity" => vec![identity_brackets, cb_minorization],
        "hs-oh" => vec![hs_coincidence],
        _ => return Err(Error::Input(format!("unknown suite '{name}'; expected one of {}", SUITES.join(", ")))),
    })
}

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Report> {
    let mut tolerances = BTreeMap::new();
    let mut records = Vec::new();
    for check in checks(name)? {
        records.extend(check(cfg, &mut tolerances)?);
    }
    let pass = records.iter().all(|r| r.pass);
    Ok(Report {
        tool: "spnorm".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        suite: name.into(),
        seed: cfg.seed,
        config: cfg.clone(),
        tolerances,
        records,
        pass,
    })
}
