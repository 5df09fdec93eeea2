//! Properties of the Fourier operators on random inputs.

mod common;

use std::f64::consts::PI;

use common::{max_abs, max_abs_diff};
use proptest::prelude::*;
use soliton_core::{power, Field, GreenKernel, Grid, Spectral};

/// A random band-limited field with its exact `-Δ`.
fn trig_polynomial(grid: Grid, modes: &[(i64, i64, f64, f64)]) -> (Field, Field) {
    let len = grid.box_len();
    let two_d = grid.dim() == 2;
    let term = |x: &[f64], &(kx, ky, a, phi): &(i64, i64, f64, f64)| {
        let ky = if two_d { ky } else { 0 };
        let y = if two_d { x[1] } else { 0.0 };
        let arg = 2.0 * PI * (kx as f64 * x[0] + ky as f64 * y) / len + phi;
        let w2 = 4.0 * PI * PI * ((kx * kx + ky * ky) as f64) / (len * len);
        (a * arg.cos(), a * w2 * arg.cos())
    };
    let u = Field::from_fn(grid, |x| modes.iter().map(|m| term(x, m).0).sum());
    let lap = Field::from_fn(grid, |x| modes.iter().map(|m| term(x, m).1).sum());
    (u, lap)
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (
        1usize..=2,
        prop::sample::select(vec![8usize, 12, 16, 24]),
        0.5f64..20.0,
        any::<bool>(),
    )
        .prop_map(|(d, n, len, centered)| Grid::new(d, n, len, centered).unwrap())
}

fn random_field(grid: Grid) -> impl Strategy<Value = Field> {
    prop::collection::vec(-1.0f64..1.0, grid.len()).prop_map(move |v| Field::new(grid, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_exact_below_nyquist(
        grid in grid_strategy(),
        raw in prop::collection::vec((0i64..100, 0i64..100, -1.0f64..1.0, 0.0f64..6.3), 1..5),
    ) {
        // Strictly below n/2 so that cosines are resolved without aliasing.
        let kmax = grid.n() as i64 / 2;
        let modes: Vec<_> = raw
            .iter()
            .map(|&(kx, ky, a, phi)| (kx % kmax - kmax / 2, ky % kmax, a, phi))
            .collect();
        let (u, expected) = trig_polynomial(grid, &modes);
        let got = Spectral::new(grid).laplacian(&u).unwrap();
        let scale = max_abs(expected.values()).max(1.0);
        prop_assert!(max_abs_diff(got.values(), expected.values()) <= 1e-11 * scale);
    }

    #[test]
    fn parseval(f in grid_strategy().prop_flat_map(random_field)) {
        let grid = *f.grid();
        let coeffs = Spectral::new(grid).forward(f.values());
        let spectral_power = grid.box_len().powi(grid.dim() as i32)
            * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
        prop_assert!((spectral_power - power(&f)).abs() <= 1e-12 * power(&f).max(1e-300));
    }

    #[test]
    fn green_operator_inverts_its_constant_part(
        f in grid_strategy().prop_flat_map(random_field),
        kinetic in 0.1f64..2.0,
        l in -10.0f64..10.0,
        lambda in -10.0f64..10.0,
    ) {
        let spectral = Spectral::new(*f.grid());
        let kern = GreenKernel::new(&spectral, kinetic, l, lambda).unwrap();
        let back = kern.apply_inverse(&kern.apply(&f).unwrap()).unwrap();
        prop_assert!(max_abs_diff(back.values(), f.values()) <= 1e-8 * max_abs(f.values()));
    }

    #[test]
    fn green_operator_is_convolution_with_its_kernel(
        f in (1usize..=2, prop::sample::select(vec![6usize, 8, 10]))
            .prop_flat_map(|(d, n)| random_field(Grid::new(d, n, 3.0, true).unwrap())),
        constant in 0.5f64..5.0,
    ) {
        let grid = *f.grid();
        let kern = GreenKernel::new(&Spectral::new(grid), 0.5, constant, 0.0).unwrap();
        let fast = kern.apply(&f).unwrap();
        let g = kern.kernel().values();
        let direct: Vec<f64> = (0..grid.len())
            .map(|a| {
                let ia = grid.multi_index(a);
                (0..grid.len())
                    .map(|b| {
                        let ib = grid.multi_index(b);
                        let diff: Vec<isize> = (0..grid.dim()).map(|k| ia[k] as isize - ib[k] as isize).collect();
                        g[grid.shifted_index(0, &diff)] * f.values()[b]
                    })
                    .sum()
            })
            .collect();
        prop_assert!(max_abs_diff(fast.values(), &direct) <= 1e-12 * max_abs(&direct).max(1e-12));
    }

    #[test]
    fn laplacian_is_symmetric_and_nonnegative(
        (f, g) in grid_strategy().prop_flat_map(|grid| (random_field(grid), random_field(grid))),
    ) {
        let spectral = Spectral::new(*f.grid());
        let lf = spectral.laplacian(&f).unwrap();
        let lg = spectral.laplacian(&g).unwrap();
        let a = soliton_core::inner(&lf, &g).unwrap();
        let b = soliton_core::inner(&f, &lg).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0));
        prop_assert!(soliton_core::inner(&lf, &f).unwrap() >= -1e-9);
    }
}
