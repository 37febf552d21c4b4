mod common;

use common::{dominant_real_root, random_metzler, to_na};
use posobs::matcore::Matrix;
use posobs::posys::{is_hurwitz_metzler, is_metzler, is_nonnegative_matrix, metzler_shift};
use proptest::prelude::*;
use rand::SeedableRng;

fn metzler(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(-3.0..3.0f64, n * n).prop_map(move |mut d| {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        d[i * n + j] = d[i * n + j].abs();
                    }
                }
            }
            Matrix::new(n, n, d).unwrap()
        })
    })
}

fn any_square(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max).prop_flat_map(|n| prop::collection::vec(-3.0..3.0f64, n * n).prop_map(move |d| Matrix::new(n, n, d).unwrap()))
}

proptest! {
    #[test]
    fn shift_makes_nonnegative(a in metzler(5)) {
        let s = metzler_shift(&a).unwrap();
        let mut shifted = a.clone();
        shifted.axpy(s, &Matrix::identity(a.rows())).unwrap();
        prop_assert!(is_nonnegative_matrix(&shifted, 0.0));
        prop_assert!(s >= 0.0);
    }

    #[test]
    fn metzler_scaling_invariance(a in any_square(5), c in 1e-3..1e3f64) {
        prop_assert_eq!(is_metzler(&a, 0.0).unwrap(), is_metzler(&a.scale(c), 0.0).unwrap());
    }

    #[test]
    fn hurwitz_matches_root_bracketing(a in metzler(4)) {
        let root = dominant_real_root(&to_na(&a)).expect("Metzler matrices have a real dominant eigenvalue");
        prop_assume!(root.abs() > 1e-6);
        let (ok, w) = is_hurwitz_metzler(&a).unwrap();
        prop_assert_eq!(ok, root < 0.0);
        if let Some(v) = w {
            let atv = a.transpose().mul_vec(&v).unwrap();
            prop_assert!(v.iter().all(|x| *x > 0.0));
            prop_assert!(atv.iter().all(|x| (*x + 1.0).abs() < 1e-8));
        }
    }
}

#[test]
fn root_bracketing_agrees_with_complex_spectrum() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for n in 1..=4 {
        for _ in 0..25 {
            let a = random_metzler(&mut rng, n);
            let na = to_na(&a);
            let root = dominant_real_root(&na).unwrap();
            let top = na.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            assert!((root - top).abs() < 1e-6 * top.abs().max(1.0), "{root} vs {top}");
        }
    }
}
