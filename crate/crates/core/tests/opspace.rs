use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spnorm::opspace::{column_space, diag_space, direct_sum, full_space, min_tensor_norm, oh_space, row_space, scalar_action, MatrixNormFamily, Space};
use spnorm::{ComplexMatrix, C64};

fn spaces() -> Vec<Space> {
    vec![row_space(3), column_space(3), oh_space(3), full_space(2), diag_space(3)]
}

fn coeffs(k: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<ComplexMatrix> {
    (0..k).map(|_| ComplexMatrix::random_gaussian(n, n, rng)).collect()
}

fn na_norm(m: DMatrix<C64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

fn to_na(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ruan_axioms(which in 0usize..5, n in 1usize..4, k in 1usize..4, seed in any::<u64>()) {
        let e = &spaces()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = coeffs(e.dim(), n, &mut rng);
        let y = coeffs(e.dim(), k, &mut rng);
        let (nx, ny) = (e.level_norm(&x).unwrap(), e.level_norm(&y).unwrap());
        let sum = e.level_norm(&direct_sum(&x, &y)).unwrap();
        prop_assert!((sum - nx.max(ny)).abs() <= 1e-10 * sum);
        let a = ComplexMatrix::random_gaussian(k, n, &mut rng);
        let b = ComplexMatrix::random_gaussian(n, k, &mut rng);
        let axb = e.level_norm(&scalar_action(&a, &x, &b)).unwrap();
        prop_assert!(axb <= a.operator_norm() * nx * b.operator_norm() * (1.0 + 1e-10));
    }

    #[test]
    fn homogeneous_families_match_direct_formulas(n in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = coeffs(3, n, &mut rng);
        let na: Vec<DMatrix<C64>> = x.iter().map(to_na).collect();
        let colsum = na.iter().fold(DMatrix::zeros(n, n), |acc, m| acc + m.adjoint() * m);
        let rowsum = na.iter().fold(DMatrix::zeros(n, n), |acc, m| acc + m * m.adjoint());
        let ohsum = na.iter().fold(DMatrix::zeros(n * n, n * n), |acc, m| acc + m.kronecker(&m.map(|z| z.conj())));
        prop_assert!((column_space(3).level_norm(&x).unwrap() - na_norm(colsum).sqrt()).abs() < 1e-9);
        prop_assert!((row_space(3).level_norm(&x).unwrap() - na_norm(rowsum).sqrt()).abs() < 1e-9);
        prop_assert!((oh_space(3).level_norm(&x).unwrap() - na_norm(ohsum).sqrt()).abs() < 1e-9);
    }
}

#[test]
fn first_level_is_euclidean_for_homogeneous_spaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = coeffs(3, 1, &mut rng);
    let l2 = x.iter().map(|c| c[(0, 0)].norm_sqr()).sum::<f64>().sqrt();
    for e in [row_space(3), column_space(3), oh_space(3)] {
        assert!((e.level_norm(&x).unwrap() - l2).abs() < 1e-12, "{}", e.label());
    }
}

#[test]
fn min_tensor_of_elementary_tensor_is_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (e, f) = (full_space(2), column_space(3));
    let a: Vec<C64> = (0..4).map(|_| C64::new(rand::Rng::random(&mut rng), 0.3)).collect();
    let b: Vec<C64> = (0..3).map(|_| C64::new(0.5, rand::Rng::random(&mut rng))).collect();
    let x: Vec<Vec<ComplexMatrix>> = (0..4).map(|i| (0..3).map(|j| ComplexMatrix::from_fn(1, 1, |_, _| a[i] * b[j])).collect()).collect();
    let one = |v: &[C64]| v.iter().map(|z| ComplexMatrix::from_fn(1, 1, |_, _| *z)).collect::<Vec<_>>();
    let expect = e.level_norm(&one(&a)).unwrap() * f.level_norm(&one(&b)).unwrap();
    assert!((min_tensor_norm(&e, &f, &x).unwrap() - expect).abs() < 1e-10 * expect);
}

#[test]
fn mismatched_coefficients_are_rejected() {
    let x = vec![ComplexMatrix::zeros(2, 2); 2];
    assert!(row_space(3).level_norm(&x).is_err());
}
