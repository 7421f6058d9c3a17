use infogeo::spd::{
    affine_distance, affine_metric, derham_distances_sq, derham_split, random_gl, random_spd, random_symmetric,
    spd_exp, spd_log, SpdMatrix, SpdTangent,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point(seed: u64, n: usize) -> SpdMatrix {
    random_spd(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_congruence_invariant(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_spd(&mut rng, n);
        let y = random_spd(&mut rng, n);
        let g = random_gl(&mut rng, n);
        let d = affine_distance(&x, &y).unwrap();
        let dg = affine_distance(&x.congruence(&g).unwrap(), &y.congruence(&g).unwrap()).unwrap();
        prop_assert!((d - dg).abs() <= 1e-9 * d.max(1.0));
    }

    #[test]
    fn pythagoras_across_the_split(seed in any::<u64>(), n in 1usize..5) {
        let x = point(seed, n);
        let y = point(seed.wrapping_add(1), n);
        let (d1, d2) = derham_distances_sq(&x, &y).unwrap();
        let d = affine_distance(&x, &y).unwrap();
        prop_assert!((d * d - d1 - d2).abs() <= 1e-9 * (d * d).max(1.0));
    }

    #[test]
    fn split_components_are_orthogonal(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_spd(&mut rng, n);
        let u = random_symmetric(&mut rng, n);
        let sp = derham_split(&x, &u).unwrap();
        let cross = affine_metric(&x, &sp.u1, &sp.u2).unwrap();
        let scale = affine_metric(&x, &u, &u).unwrap().max(1.0);
        prop_assert!(cross.abs() <= 1e-10 * scale);
        // u2 carries no trace relative to x
        prop_assert!((x.inverse() * &sp.u2.0).trace().abs() <= 1e-10 * scale.sqrt() * n as f64);
    }

    #[test]
    fn exp_and_log_are_inverse(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_spd(&mut rng, n);
        let u = random_symmetric(&mut rng, n).scale(0.5).congruence(&x.sqrt());
        let y = spd_exp(&x, &u).unwrap();
        let back = spd_log(&x, &y).unwrap();
        prop_assert!(back.sub(&u).frobenius() <= 1e-9 * u.frobenius().max(1.0) * x.matrix().norm());
        let d = affine_distance(&x, &y).unwrap();
        let len = affine_metric(&x, &u, &u).unwrap().sqrt();
        prop_assert!((d - len).abs() <= 1e-9 * len.max(1.0));
    }
}

#[test]
fn metric_at_identity_is_frobenius() {
    let u = SpdTangent(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]));
    let v = affine_metric(&SpdMatrix::identity(2), &u, &u).unwrap();
    assert!((v - 10.0).abs() < 1e-14);
}

#[test]
fn distance_between_scalings() {
    let x = SpdMatrix::identity(3);
    let y = SpdMatrix::from_diagonal(&[2.0, 2.0, 2.0]).unwrap();
    let d = affine_distance(&x, &y).unwrap();
    assert!((d - 3f64.sqrt() * 2f64.ln()).abs() < 1e-14);
    let (d1, d2) = derham_distances_sq(&x, &y).unwrap();
    assert!(d2.abs() < 1e-24 && (d1 - d * d).abs() < 1e-14);
}

#[test]
fn rejects_non_spd() {
    assert!(SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
    assert!(SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
    assert!(SpdMatrix::new(DMatrix::zeros(2, 3)).is_err());
    assert!(affine_distance(&SpdMatrix::identity(2), &SpdMatrix::identity(3)).is_err());
}
