use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spnorm::cbnorm::{cb_norm, CbSearch, LinearMap};
use spnorm::opspace::{column_space, full_space, oh_space, row_space, MatrixNormFamily, Space};
use spnorm::ComplexMatrix;

fn random_map(e: Space, f: Space, rng: &mut ChaCha8Rng) -> LinearMap {
    let act = ComplexMatrix::random_gaussian(f.dim(), e.dim(), rng);
    LinearMap::new(e, f, act).unwrap()
}

#[test]
fn transpose_on_two_by_two() {
    let values: Vec<ComplexMatrix> = (0..4).map(|k| ComplexMatrix::unit(2, 2, k % 2, k / 2)).collect();
    let t = LinearMap::from_values(full_space(2), full_space(2), &values).unwrap();
    let b = cb_norm(&t, &CbSearch::new(2, 4, 0)).unwrap();
    assert!((b.lower - 2.0).abs() < 1e-6 && (b.upper - 2.0).abs() < 1e-6, "{b:?}");
    let level1 = cb_norm(&t, &CbSearch::new(1, 4, 0)).unwrap();
    assert!((level1.lower - 1.0).abs() < 1e-6, "{level1:?}");
}

#[test]
fn identity_between_row_and_column() {
    // R_n -> C_n has cb norm sqrt(n)
    let u = LinearMap::new(row_space(3), column_space(3), ComplexMatrix::identity(3)).unwrap();
    let b = cb_norm(&u, &CbSearch::new(3, 4, 0)).unwrap();
    assert!(b.contains(3f64.sqrt(), 1e-4), "{b:?}");
    let id = cb_norm(&LinearMap::identity(oh_space(3)), &CbSearch::new(3, 2, 0)).unwrap();
    assert!((id.lower - 1.0).abs() < 1e-9, "{id:?}");
}

#[test]
fn functoriality() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = CbSearch::new(2, 3, 0);
    for _ in 0..3 {
        let u = random_map(column_space(2), full_space(2), &mut rng);
        let v = random_map(full_space(2), row_space(2), &mut rng);
        let vu = v.compose(&u).unwrap();
        let (bu, bv, bvu) = (cb_norm(&u, &cfg).unwrap(), cb_norm(&v, &cfg).unwrap(), cb_norm(&vu, &cfg).unwrap());
        assert!(bvu.lower <= bu.upper * bv.upper * (1.0 + 1e-9), "{bvu:?} vs {bu:?} {bv:?}");
        assert!(bu.lower <= bu.upper * (1.0 + 1e-9));
        let norm1 = cb_norm(&u, &CbSearch::new(1, 3, 0)).unwrap();
        assert!(norm1.lower <= bu.upper * (1.0 + 1e-9));
    }
}

#[test]
fn level_ratio_never_beats_the_cb_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = random_map(oh_space(2), full_space(2), &mut rng);
    let b = cb_norm(&u, &CbSearch::new(2, 3, 0)).unwrap();
    for n in 1..=2 {
        let x: Vec<ComplexMatrix> = (0..u.domain.dim()).map(|_| ComplexMatrix::random_gaussian(n, n, &mut rng)).collect();
        assert!(u.level_ratio(&x).unwrap() <= b.upper * (1.0 + 1e-9));
    }
}
