//! Newton, bordered Newton, continuation, and Petviashvili on small problems.

mod common;

use common::max_abs;
use soliton_core::{
    gaussian_seed, newton_fixed_norm, newton_solve, newton_solve_observed, petviashvili, power, preset, sweep, Field,
    FieldCapture, Grid, KerrSign, LambdaPath, Model, NewtonOptions, PetviashviliOptions, Seed, Spectral, SweepPlan,
};

/// Kerr focusing lattice on an 8×8 box at the preset's spacing.
fn small_lattice() -> (Model, Grid) {
    let p = preset("kerr-focusing").unwrap();
    (p.model, Grid::new(2, 48, 8.0, true).unwrap())
}

fn free_cubic() -> (Model, Grid) {
    (
        Model::kerr(0.0, KerrSign::Focusing),
        Grid::new(1, 256, 32.0, true).unwrap(),
    )
}

fn even_defect(u: &Field) -> f64 {
    let grid = u.grid();
    (0..grid.len())
        .map(|j| (u.values()[j] - u.values()[grid.reflected_index(j)]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn newton_preserves_reflection_symmetry() {
    let (model, grid) = small_lattice();
    let seed = gaussian_seed(&grid, 0.5, 4.0).unwrap();
    assert!(even_defect(&seed) <= 1e-14 * seed.norm_inf());
    let mut worst = 0.0f64;
    let (u, report) = newton_solve_observed(&model, &grid, 0.0, &seed, &NewtonOptions::default(), &mut |_, u| {
        worst = worst.max(even_defect(u) / u.norm_inf());
    })
    .unwrap();
    assert!(report.converged, "{report:?}");
    assert!(worst <= 1e-10, "iterates lost symmetry: {worst:e}");
    assert!(even_defect(&u) <= 1e-10 * u.norm_inf());
}

#[test]
fn converged_solution_certifies_its_residual() {
    let (model, grid) = small_lattice();
    let opts = NewtonOptions::default();
    let (u, report) = newton_solve(&model, &grid, 0.0, &gaussian_seed(&grid, 0.5, 4.0).unwrap(), &opts).unwrap();
    assert!(report.converged);
    let r = model.residual(&Spectral::new(grid), &u, 0.0).unwrap();
    assert!(max_abs(r.values()) <= opts.res_tol * u.norm_inf().max(1.0));
    assert_eq!(*report.residual_history.last().unwrap(), max_abs(r.values()));
    assert_eq!(report.final_power, power(&u));
    assert!(u.norm_inf() > 0.5, "collapsed to the trivial solution");
}

#[test]
fn sweeps_are_deterministic() {
    let (model, grid) = small_lattice();
    let plan = SweepPlan {
        paths: vec![LambdaPath::stepped(0.0, 1.0, 0.5).unwrap()],
        seed: Seed::Gaussian { sigma: 0.5, power: 4.0 },
        capture: FieldCapture::Endpoints,
        auto_refine: false,
    };
    let a = sweep(&model, &grid, &plan, &NewtonOptions::default()).unwrap();
    let b = sweep(&model, &grid, &plan, &NewtonOptions::default()).unwrap();
    assert!(a.all_completed());
    assert_eq!(a.points, b.points);
    for (x, y) in a.fields.iter().zip(&b.fields) {
        assert!(x
            .field
            .values()
            .iter()
            .zip(y.field.values())
            .all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn fixed_norm_leaves_a_solution_in_place() {
    let (model, grid) = small_lattice();
    let lambda = 0.5;
    let (u, _) = newton_solve(
        &model,
        &grid,
        lambda,
        &gaussian_seed(&grid, 0.5, 4.0).unwrap(),
        &NewtonOptions::default(),
    )
    .unwrap();
    let m = power(&u).sqrt();
    let (v, mu, report) = newton_fixed_norm(&model, &grid, m, &u, lambda, &NewtonOptions::default()).unwrap();
    assert!(report.converged);
    assert!(report.newton_iters <= 1, "{} iterations", report.newton_iters);
    assert!((mu - lambda).abs() <= 1e-10, "λ moved to {mu}");
    assert!((power(&v) - m * m).abs() <= 1e-10 * m * m);
}

#[test]
fn fixed_norm_matches_free_soliton_power() {
    // With c_K = ½ the free cubic soliton has P = 2√(-2λ).
    let (model, grid) = free_cubic();
    let seed = gaussian_seed(&grid, 1.0, 2.0).unwrap();
    for target in [2.0, 3.0, 4.0] {
        let (u, lambda, report) =
            newton_fixed_norm(&model, &grid, f64::sqrt(target), &seed, -1.0, &NewtonOptions::default()).unwrap();
        assert!(report.converged, "P={target}: {report:?}");
        assert!((power(&u) - target).abs() <= 1e-8 * target);
        assert!((lambda + target * target / 8.0).abs() <= 1e-7, "P={target}: λ={lambda}");
    }
}

#[test]
fn petviashvili_fixed_point_has_unit_factor() {
    let (model, grid) = free_cubic();
    let lambda = -1.0;
    let (u, _) = newton_solve(
        &model,
        &grid,
        lambda,
        &gaussian_seed(&grid, 1.0, 2.0).unwrap(),
        &NewtonOptions::default(),
    )
    .unwrap();
    let (v, report) = petviashvili(&model, &grid, lambda, &u, &PetviashviliOptions::default()).unwrap();
    assert!(report.converged, "{report:?}");
    assert!(
        report.iterations <= 2,
        "{} iterations from a fixed point",
        report.iterations
    );
    assert!(
        (report.stabilizing_factors[0] - 1.0).abs() <= 1e-8,
        "M = {}",
        report.stabilizing_factors[0]
    );
    assert!((power(&v) - power(&u)).abs() <= 1e-9 * power(&u));
}

#[test]
fn petviashvili_agrees_with_newton_from_a_rough_seed() {
    let (model, grid) = free_cubic();
    let seed = gaussian_seed(&grid, 1.5, 1.0).unwrap();
    let (a, report) = petviashvili(&model, &grid, -0.5, &seed, &PetviashviliOptions::default()).unwrap();
    assert!(report.converged, "{report:?}");
    assert!(report.stabilizing_factors.iter().all(|&m| m > 0.0));
    let (b, _) = newton_solve(&model, &grid, -0.5, &a, &NewtonOptions::default()).unwrap();
    let diff = a
        .values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff <= 1e-8, "{diff:e}");
    assert!((power(&a) - 2.0).abs() <= 1e-8);
}

#[test]
fn petviashvili_rejects_saturable_models() {
    let p = preset("saturable-focusing").unwrap();
    let grid = Grid::new(2, 16, 4.0, true).unwrap();
    let seed = gaussian_seed(&grid, 0.5, 1.0).unwrap();
    assert!(petviashvili(&p.model, &grid, 14.0, &seed, &PetviashviliOptions::default()).is_err());
}
