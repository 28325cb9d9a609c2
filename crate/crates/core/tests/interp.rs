use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spnorm::interp::{couples_theorem_check, interp_bracket, interp_upper, CompatibleCouple, CoupleChoice, InterpConfig};
use spnorm::ComplexMatrix;

#[test]
fn midpoint_of_sup_and_trace_is_hilbert_schmidt() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = InterpConfig::default();
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        let c = CompatibleCouple::schatten(d, f64::INFINITY, 1.0);
        for _ in 0..2 {
            let x = ComplexMatrix::random_gaussian(d, d, &mut rng);
            let (lo, up) = interp_bracket(&c, 0.5, x.data(), &cfg).unwrap();
            let s2 = x.frobenius_norm();
            assert!(lo <= up * (1.0 + 1e-12), "[{lo}, {up}]");
            assert!(lo >= 0.95 * s2 && up <= 1.05 * s2, "d={d}: [{lo}, {up}] vs {s2}");
            worst = worst.max((s2 - lo).max(up - s2) / s2);
        }
    }
    eprintln!("worst relative gap {worst:.3e}");
}

#[test]
fn reiteration_between_four_thirds_and_four() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = InterpConfig::default();
    for d in 2..=3 {
        let c = CompatibleCouple::schatten(d, 4.0 / 3.0, 4.0);
        let x = ComplexMatrix::random_gaussian(d, d, &mut rng);
        let (lo, up) = interp_bracket(&c, 0.5, x.data(), &cfg).unwrap();
        let s2 = x.frobenius_norm();
        assert!(lo >= s2 / 1.08 && up <= 1.08 * s2, "[{lo}, {up}] vs {s2}");
    }
}

#[test]
fn upper_never_increases_with_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = CompatibleCouple::schatten(2, f64::INFINITY, 1.0);
    let x = ComplexMatrix::random_gaussian(2, 2, &mut rng);
    let mut last = f64::INFINITY;
    for degree in [0, 1, 2, 3, 5, 8] {
        let cfg = InterpConfig { degree, ..InterpConfig::default() };
        let v = interp_upper(&c, 0.3, x.data(), &cfg).unwrap().value;
        assert!(v <= last, "degree {degree}: {v} > {last}");
        last = v;
    }
}

#[test]
fn scalar_couples_check_and_row_column_midpoint() {
    let cfg = InterpConfig { seed: 9, ..InterpConfig::default() };
    let r = couples_theorem_check(&CoupleChoice::Scalar { d: 2, p0: f64::INFINITY, p1: 1.0 }, 0.5, 3, &cfg, 0.08).unwrap();
    assert!(r.pass, "{r:?}");
    let r = couples_theorem_check(&CoupleChoice::RowColumn { m: 2, n: 2 }, 0.5, 2, &cfg, 0.08).unwrap();
    eprintln!("row/column gap {:.3e}", r.max_relative_gap);
    assert!(r.samples.iter().all(|s| s.lower <= s.direct * (1.0 + 1e-9) && s.direct <= s.upper * (1.0 + 1e-9)), "{r:?}");
    let zero = vec![spnorm::C64::new(0.0, 0.0); 4];
    let c = CompatibleCouple::schatten(2, f64::INFINITY, 1.0);
    assert_eq!(interp_bracket(&c, 0.5, &zero, &cfg).unwrap(), (0.0, 0.0));
}
