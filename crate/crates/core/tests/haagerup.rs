use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spnorm::config::SearchConfig;
use spnorm::haagerup::{haagerup_norm, haagerup_norm_upper, s2_oh_isometry_check, theorem1_s2_norm};
use spnorm::opspace::{column_space, full_space, min_tensor_norm, oh_space, row_space, scalar_space, TensorCoeffs};
use spnorm::schatten::{sp_norm, SpElement};
use spnorm::ComplexMatrix;

fn pattern(c: &ComplexMatrix) -> TensorCoeffs {
    (0..c.rows()).map(|i| (0..c.cols()).map(|j| ComplexMatrix::from_fn(1, 1, |_, _| c[(i, j)])).collect()).collect()
}

fn random_tensor(k: usize, l: usize, n: usize, rng: &mut ChaCha8Rng) -> TensorCoeffs {
    (0..k).map(|_| (0..l).map(|_| ComplexMatrix::random_gaussian(n, n, rng)).collect()).collect()
}

#[test]
fn endpoint_identities_on_random_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let search = SearchConfig::new(4, 2);
    for n in 2..=4 {
        let c = ComplexMatrix::random_gaussian(n, n, &mut rng);
        let cr = haagerup_norm(&column_space(n), &row_space(n), &pattern(&c), &search).unwrap();
        assert!(cr.contains(c.operator_norm(), 1e-3), "C (x)_h R, n={n}: {cr:?}");
        let rc = haagerup_norm(&row_space(n), &column_space(n), &pattern(&c), &search).unwrap();
        assert!(rc.contains(c.schatten_norm(1.0).unwrap(), 1e-3), "R (x)_h C, n={n}: {rc:?}");
        eprintln!("n={n} cr width {:.2e} rc width {:.2e}", cr.relative_width(), rc.relative_width());
    }
}

#[test]
fn brackets_are_ordered_and_above_min_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let search = SearchConfig::new(4, 0);
    let (e, f) = (full_space(2), full_space(2));
    for n in 1..=2 {
        let x = random_tensor(4, 4, n, &mut rng);
        let b = haagerup_norm(&e, &f, &x, &search).unwrap();
        let min = min_tensor_norm(&e, &f, &x).unwrap();
        assert!(b.lower <= b.upper * (1.0 + 1e-9), "{b:?}");
        assert!(min <= b.upper * (1.0 + 1e-9));
        eprintln!("full2 level {n}: [{:.6}, {:.6}] width {:.2e}", b.lower, b.upper, b.relative_width());
    }
    let x = random_tensor(2, 3, 2, &mut rng);
    let b = haagerup_norm(&oh_space(2), &oh_space(3), &x, &search).unwrap();
    assert!(b.lower <= b.upper * (1.0 + 1e-9), "{b:?}");
    eprintln!("oh level 2: [{:.6}, {:.6}]", b.lower, b.upper);
}

#[test]
fn zero_and_rank_cap() {
    let x: TensorCoeffs = vec![vec![ComplexMatrix::zeros(2, 2); 2]; 2];
    let b = haagerup_norm(&row_space(2), &column_space(2), &x, &SearchConfig::new(2, 0)).unwrap();
    assert_eq!((b.lower, b.upper), (0.0, 0.0));
    let c = ComplexMatrix::identity(3);
    assert!(haagerup_norm_upper(&row_space(3), &column_space(3), &pattern(&c), Some(2), &SearchConfig::new(1, 0)).is_err());
}

#[test]
fn three_fold_oh_norm_matches_schatten_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let search = SearchConfig::new(4, 0);
    let u = SpElement::new(2.0, scalar_space(), vec![ComplexMatrix::random_gaussian(3, 3, &mut rng)]).unwrap();
    let b = theorem1_s2_norm(&u, &search).unwrap();
    assert!(b.contains(u.coeffs[0].frobenius_norm(), 1e-4), "{b:?}");
    let u = SpElement::new(2.0, full_space(2), (0..4).map(|_| ComplexMatrix::random_gaussian(2, 2, &mut rng)).collect()).unwrap();
    let t = theorem1_s2_norm(&u, &search).unwrap();
    let s = sp_norm(&u, &search).unwrap();
    eprintln!("theorem1 {t:?}\nsp {s:?}");
    assert!(t.overlaps(&s, 1e-4));
}

#[test]
fn s2_is_oh_at_matrix_levels() {
    let search = SearchConfig::new(4, 3);
    for k in 1..=2 {
        let r = s2_oh_isometry_check(2, k, &scalar_space(), 2, &search, 5e-3).unwrap();
        eprintln!("scalar k={k} gap {:.2e}", r.max_relative_gap);
        assert!(r.pass, "{r:?}");
    }
    let r = s2_oh_isometry_check(2, 2, &oh_space(2), 1, &search, 5e-3).unwrap();
    eprintln!("oh2 gap {:.2e}", r.max_relative_gap);
    assert!(r.pass, "{r:?}");
}
