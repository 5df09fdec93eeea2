//! GMRES on small dense systems.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soliton_core::{gmres, Identity, KrylovOptions};

fn random_system(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Nonsymmetric, with eigenvalues spread but away from zero.
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) / (n as f64).sqrt());
    for i in 0..n {
        a[(i, i)] += 2.0 + i as f64 / n as f64;
    }
    let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn terminates_within_dimension(n in 1usize..=32, seed in any::<u64>()) {
        let (a, b) = random_system(n, seed);
        let apply = |x: &[f64], y: &mut [f64]| {
            let v = &a * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        };
        let opts = KrylovOptions { rel_tol: 1e-12, restart: n, max_iters: n, record_history: true };
        let (x, report) = gmres(&apply, &Identity, b.as_slice(), &opts).unwrap();
        prop_assert!(report.converged);
        prop_assert!(report.iterations <= n);
        let exact = a.clone().lu().solve(&b).unwrap();
        let err = (DVector::from_column_slice(&x) - &exact).amax();
        prop_assert!(err <= 1e-9 * exact.amax(), "error {err}");
        // Full GMRES minimizes the residual over a growing space.
        prop_assert!(report.preconditioned_residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn exact_preconditioner_converges_immediately(n in 1usize..=24, seed in any::<u64>()) {
        let (a, b) = random_system(n, seed);
        let inv = a.clone().try_inverse().unwrap();
        let apply = |x: &[f64], y: &mut [f64]| {
            y.copy_from_slice((&a * DVector::from_column_slice(x)).as_slice());
        };
        let precond = |x: &[f64], y: &mut [f64]| {
            y.copy_from_slice((&inv * DVector::from_column_slice(x)).as_slice());
        };
        let opts = KrylovOptions { rel_tol: 1e-10, ..KrylovOptions::default() };
        let (_, report) = gmres(&apply, &precond, b.as_slice(), &opts).unwrap();
        prop_assert!(report.converged && report.iterations <= 2, "{report:?}");
    }
}
