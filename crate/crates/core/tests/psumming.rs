use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spnorm::cbnorm::{cb_norm, CbSearch, LinearMap};
use spnorm::opspace::{column_space, diag_space, full_space, oh_space, scalar_space, MatrixNormFamily, Space};
use spnorm::psumming::*;
use spnorm::ComplexMatrix;

fn light() -> PietschSearch {
    let mut cfg = PietschSearch::new(2, 0);
    cfg.rounds = 6;
    cfg.batch = 4;
    cfg
}

fn random_map(e: Space, f: Space, rng: &mut ChaCha8Rng) -> LinearMap {
    let act = ComplexMatrix::random_gaussian(f.dim(), e.dim(), rng);
    LinearMap::new(e, f, act).unwrap()
}

fn multiplier(a: &ComplexMatrix, b: &ComplexMatrix, f: Space) -> LinearMap {
    let d = a.rows();
    let vals: Vec<ComplexMatrix> = (0..d * d)
        .map(|k| {
            let y = &(a * &ComplexMatrix::unit(d, d, k / d, k % d)) * b;
            ComplexMatrix::new(d * d, 1, y.into_data()).unwrap()
        })
        .collect();
    // values are OH coordinates, one column per basis vector
    let act = ComplexMatrix::from_fn(d * d, d * d, |i, j| vals[j][(i, 0)]);
    LinearMap::new(full_space(d), f, act).unwrap()
}

#[test]
fn trivial_cases() {
    let zero = LinearMap::new(column_space(2), full_space(2), ComplexMatrix::zeros(4, 2)).unwrap();
    assert_eq!(pi_p_lower(&zero, 2.0, &PiSearch::new(3, 1, 0)).unwrap().value, 0.0);
    assert_eq!(pi2_upper(&zero, &light()).unwrap().value, 0.0);
    let one = identity_experiment(&scalar_space(), &PiSearch::new(2, 1, 0), &light()).unwrap();
    assert!((one.lower - 1.0).abs() < 1e-9 && one.upper == 1.0 && one.pass, "{one:?}");
    let ohzero = LinearMap::new(oh_space(2), oh_space(3), ComplexMatrix::zeros(3, 2)).unwrap();
    let r = hs_coincidence_check(&ohzero, &PiSearch::new(2, 1, 0), 0.1).unwrap();
    assert!(r.lower == 0.0 && r.upper == 0.0 && r.pass);
}

#[test]
fn diag_identity_certificate_replays() {
    let u = LinearMap::identity(diag_space(2));
    let cert = pietsch_upper_p2(&u, &light()).unwrap();
    let root2 = 2f64.sqrt();
    assert!(cert.upper() <= 1.1 * root2, "{}", cert.upper());
    assert!((cert.a.schatten_norm(4.0).unwrap() - 1.0).abs() < 1e-9);
    assert!((cert.b.schatten_norm(4.0).unwrap() - 1.0).abs() < 1e-9);
    let low = pi_p_lower(&u, 2.0, &PiSearch::new(3, 2, 0)).unwrap();
    assert!(low.value >= 0.9 * root2 && low.value <= cert.upper() * (1.0 + 1e-9));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in 0..500 {
        let n = 1 + t % 3;
        let mut x: Vec<ComplexMatrix> = (0..2).map(|_| ComplexMatrix::random_gaussian(n, n, &mut rng)).collect();
        if t % 5 == 0 {
            // nearly the norming input of the lower bound
            x = low.witness.iter().map(|w| w + &ComplexMatrix::random_gaussian(w.rows(), w.cols(), &mut rng).scale_real(0.05)).collect();
        }
        let r = replay_ratio(&u, &cert, &x).unwrap();
        assert!(r <= cert.upper() * (1.0 + 1e-9), "sample {t}: {r} > {}", cert.upper());
    }
}

#[test]
fn multiplier_into_s2_is_bounded_by_four_norms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a0 = ComplexMatrix::random_gaussian(2, 2, &mut rng);
    let b0 = ComplexMatrix::random_gaussian(2, 2, &mut rng);
    let bound = a0.schatten_norm(4.0).unwrap() * b0.schatten_norm(4.0).unwrap();
    let u = multiplier(&a0, &b0, oh_space(4));
    let cert = pietsch_upper_p2(&u, &light()).unwrap();
    assert!(cert.c <= bound * (1.0 + cert.slack) * (1.0 + 1e-3), "{} vs {bound}", cert.c);
    let low = pi_p_lower(&u, 2.0, &PiSearch::new(3, 2, 0)).unwrap();
    assert!(low.value <= bound * (1.0 + 1e-6), "{} vs {bound}", low.value);
}

#[test]
fn lower_never_exceeds_upper() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (e, f) in [(diag_space(2), full_space(2)), (column_space(2), oh_space(3)), (oh_space(2), full_space(2))] {
        let u = random_map(e, f, &mut rng);
        let low = pi_p_lower(&u, 2.0, &PiSearch::new(3, 2, 0)).unwrap();
        let up = pi2_upper(&u, &light()).unwrap();
        assert!(low.value <= up.value * (1.0 + 1e-6), "{} > {} ({})", low.value, up.value, up.how);
        let rec = cb_minorization_check(&u, &CbSearch::new(3, 2, 0), &light()).unwrap();
        assert!(rec.pass, "{rec:?}");
    }
}

#[test]
fn composition_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v = random_map(diag_space(2), diag_space(2), &mut rng);
    let u = random_map(diag_space(2), full_space(2), &mut rng);
    let w = random_map(full_space(2), full_space(2), &mut rng);
    let wuv = w.compose(&u.compose(&v).unwrap()).unwrap();
    let cb = CbSearch::new(3, 2, 0);
    let low = pi_p_lower(&wuv, 2.0, &PiSearch::new(3, 2, 0)).unwrap().value;
    let up = cb_norm(&w, &cb).unwrap().upper * pi2_upper(&u, &light()).unwrap().value * cb_norm(&v, &cb).unwrap().upper;
    assert!(low <= up * (1.0 + 1e-6), "{low} > {up}");
}

#[test]
fn lower_is_monotone_in_m_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = random_map(column_space(2), full_space(2), &mut rng);
    let mut last = 0.0;
    for m in 1..=3 {
        let v = pi_p_lower(&u, 2.0, &PiSearch::new(m, 2, 0)).unwrap().value;
        assert!(v >= last, "m_max {m}: {v} < {last}");
        last = v;
    }
}

#[test]
fn hilbert_schmidt_on_oh() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let f = ComplexMatrix::random_gaussian(3, 1, &mut rng);
    let g = ComplexMatrix::random_gaussian(2, 1, &mut rng);
    let rank_one = &f * &g.adjoint();
    let rank_one = rank_one.scale_real(1.0 / rank_one.frobenius_norm());
    let u = LinearMap::new(oh_space(2), oh_space(3), rank_one).unwrap();
    let r = hs_coincidence_check(&u, &PiSearch::new(3, 2, 0), 0.1).unwrap();
    assert!(r.pass && (r.lower - 1.0).abs() < 1e-3, "{r:?}");
    for _ in 0..3 {
        let u = random_map(oh_space(2), oh_space(3), &mut rng);
        let r = hs_coincidence_check(&u, &PiSearch::new(3, 2, rng.random()), 0.1).unwrap();
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn off_two_lower_bounds() {
    let u = LinearMap::identity(diag_space(2));
    for p in [1.0, 4.0] {
        let low = pi_p_lower(&u, p, &PiSearch::new(2, 1, 0)).unwrap();
        assert!(low.value >= 1.0 - 1e-9 && low.value.is_finite(), "p = {p}: {}", low.value);
    }
    assert!(pi_p_lower(&LinearMap::identity(oh_space(2)), 4.0, &PiSearch::new(2, 1, 0)).is_err());
}

#[test]
fn projection_experiment_reports() {
    for e in [scalar_space(), diag_space(2)] {
        let r = extension_and_projection_experiment(&e, &light(), &CbSearch::new(3, 2, 0)).unwrap();
        assert!(r.projection_cb_lower <= r.target, "{r:?}");
        assert!(r.projection_cb_lower >= 1.0 - 1e-9, "{r:?}");
    }
}
