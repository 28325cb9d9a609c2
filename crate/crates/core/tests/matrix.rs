use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spnorm::matrix::schatten_with_grad;
use spnorm::{ComplexMatrix, C64};

fn to_na(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn close(a: &DMatrix<C64>, b: &DMatrix<C64>, tol: f64) -> bool {
    (a - b).iter().all(|z| z.norm() <= tol * (1.0 + b.norm()))
}

fn random(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    ComplexMatrix::random_gaussian(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn singular_values_match_nalgebra(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let m = random(rows, cols, seed);
        let ours = m.singular_values().unwrap();
        let mut theirs: Vec<f64> = to_na(&m).singular_values().iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.iter().zip(&theirs) {
            prop_assert!((a - b).abs() <= 1e-10 * theirs[0].max(1.0), "{ours:?} vs {theirs:?}");
        }
        let s = m.svd().unwrap();
        prop_assert!(s.reconstruct().approx_eq(&m, 1e-10));
    }

    #[test]
    fn products_and_inverse_match_nalgebra(n in 1usize..5, seed in any::<u64>()) {
        let a = random(n, n, seed);
        let b = random(n, n + 1, seed ^ 1);
        prop_assert!(close(&to_na(&(&a * &b)), &(to_na(&a) * to_na(&b)), 1e-12));
        prop_assert!(close(&to_na(&a.kron(&b)), &to_na(&a).kronecker(&to_na(&b)), 1e-12));
        let inv = a.inverse().unwrap();
        let theirs = to_na(&a).try_inverse().unwrap();
        prop_assert!(close(&to_na(&inv), &theirs, 1e-8));
    }

    #[test]
    fn schatten_norms_follow_singular_values(n in 1usize..5, seed in any::<u64>(), p in 1.0f64..8.0) {
        let m = random(n, n, seed);
        let sv: Vec<f64> = to_na(&m).singular_values().iter().copied().collect();
        let expect = sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p);
        prop_assert!((m.schatten_norm(p).unwrap() - expect).abs() <= 1e-10 * expect);
        prop_assert!((m.schatten_norm(2.0).unwrap() - m.frobenius_norm()).abs() <= 1e-10 * m.frobenius_norm());
        let top = sv.iter().copied().fold(0.0, f64::max);
        prop_assert!((m.operator_norm() - top).abs() <= 1e-10 * top);
    }

    #[test]
    fn polar_and_square_root(n in 1usize..5, seed in any::<u64>()) {
        let m = random(n, n, seed);
        let (w, h) = m.polar().unwrap();
        prop_assert!((&w * &h).approx_eq(&m, 1e-10));
        prop_assert!((&w.adjoint() * &w).approx_eq(&ComplexMatrix::identity(n), 1e-10));
        let psd = &m.adjoint() * &m;
        let r = psd.psd_power(0.5).unwrap();
        prop_assert!((&r * &r).approx_eq(&psd, 1e-9 * psd.operator_norm().max(1.0)));
    }
}

#[test]
fn schatten_gradient_is_a_derivative() {
    let x = random(3, 4, 7);
    let dx = random(3, 4, 8).scale_real(1e-6);
    for r in [1.5, 2.0, 7.0] {
        let (v, g) = schatten_with_grad(&x, r).unwrap();
        let (vp, _) = schatten_with_grad(&(&x + &dx), r).unwrap();
        assert!((vp - v - g.inner(&dx).re).abs() < 1e-10, "r = {r}");
    }
}

#[test]
fn rank_deficient_and_empty() {
    let v = random(4, 1, 3);
    let m = &v * &v.adjoint();
    let s = m.singular_values().unwrap();
    assert!(s[1..].iter().all(|x| *x < 1e-12 * s[0]));
    assert!(ComplexMatrix::zeros(3, 3).inverse().is_err());
    assert!(ComplexMatrix::zeros(2, 2).schatten_norm(0.5).is_err());
}
