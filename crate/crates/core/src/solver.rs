//! Outer nonlinear iterations.
//!
//! * [`newton_solve`]: Newton's method at fixed `λ`. Each step linearizes at
//!   the current iterate, rebuilds the sparsifying preconditioner, and
//!   solves `(c_K(-Δ) + L_u - λ) v = r` with preconditioned GMRES.
//! * [`newton_fixed_norm`]: Newton on the bordered system for prescribed
//!   `‖u‖₂ = m` with `λ` unknown.
//! * [`petviashvili`]: the classical stabilized fixed-point iteration, kept
//!   as a baseline.

use std::time::Instant;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krylov::{gmres, KrylovOptions, KrylovReport};
use crate::model::{LinearizedOperator, Model, ModelKind};
use crate::sparsifier::{Preconditioner, StencilOptions};
use crate::spectral::{inner, power, Field, Grid, Spectral};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Damping {
    None,
    /// Halve the step while the residual grows, at most `max_halvings` times.
    Backtracking {
        max_halvings: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub res_tol: f64,
    pub max_newton: usize,
    pub damping: Damping,
    pub krylov: KrylovOptions,
    pub stencil: StencilOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            res_tol: 1e-8,
            max_newton: 50,
            damping: Damping::Backtracking { max_halvings: 8 },
            krylov: KrylovOptions::default(),
            stencil: StencilOptions::default(),
        }
    }
}

impl NewtonOptions {
    fn validate(&self) -> Result<()> {
        if !(self.res_tol > 0.0 && self.res_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Newton tolerance must be positive, got {}",
                self.res_tol
            )));
        }
        Ok(())
    }
}

/// Why a Newton solve stopped without converging.
#[derive(Clone, Debug, PartialEq)]
pub enum NewtonFailure {
    MaxIterations,
    /// GMRES did not reach its tolerance at this Newton step.
    Krylov {
        step: usize,
    },
    /// The preconditioner could not be built or factorized.
    Preconditioner {
        step: usize,
        message: String,
    },
    /// `⟨u, A⁻¹u⟩` vanished in the bordered elimination (turning point).
    BorderedSingularity {
        step: usize,
    },
    /// The iterate stopped being finite.
    NonFinite {
        step: usize,
    },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    pub newton_iters: usize,
    /// `‖r‖∞` of the seed and of every subsequent iterate.
    pub residual_history: Vec<f64>,
    pub gmres_iters_per_step: Vec<usize>,
    pub converged: bool,
    pub final_power: f64,
    /// `λ` after each step of the bordered iteration; empty at fixed `λ`.
    pub lambda_history: Vec<f64>,
    pub setup_seconds: f64,
    pub failure: Option<NewtonFailure>,
}

impl NewtonReport {
    pub fn mean_gmres_iters(&self) -> f64 {
        if self.gmres_iters_per_step.is_empty() {
            0.0
        } else {
            self.gmres_iters_per_step.iter().sum::<usize>() as f64 / self.gmres_iters_per_step.len() as f64
        }
    }
}

fn converged_residual(r: f64, u: &Field, tol: f64) -> bool {
    r <= tol * u.norm_inf().max(1.0)
}

/// Linearization at one iterate together with its preconditioner.
struct LinearStep {
    op: LinearizedOperator,
    precond: Preconditioner,
}

impl LinearStep {
    fn build(model: &Model, spectral: &Spectral, u: &Field, lambda: f64, stencil: StencilOptions) -> Result<Self> {
        let op = LinearizedOperator::new(model, spectral, u, lambda)?;
        let precond = match Preconditioner::build(&op, stencil) {
            Ok(p) => p,
            Err(Error::SingularPivot { .. }) => {
                let wider = StencilOptions {
                    half_width: stencil.half_width + 1,
                    ..stencil
                };
                log::warn!(
                    "singular sparsified matrix; retrying with half-width {}",
                    wider.half_width
                );
                Preconditioner::build(&op, wider)?
            }
            Err(e) => return Err(e),
        };
        Ok(Self { op, precond })
    }

    fn solve(&self, rhs: &[f64], opts: &KrylovOptions) -> Result<(Vec<f64>, KrylovReport)> {
        let a = |x: &[f64], y: &mut [f64]| self.op.apply_slice(x, y);
        let m = |x: &[f64], y: &mut [f64]| y.copy_from_slice(&self.precond.apply(x));
        gmres(&a, &m, rhs, opts)
    }
}

/// Newton's method at fixed `λ` from `u0`.
pub fn newton_solve(
    model: &Model,
    grid: &Grid,
    lambda: f64,
    u0: &Field,
    opts: &NewtonOptions,
) -> Result<(Field, NewtonReport)> {
    newton_solve_observed(model, grid, lambda, u0, opts, &mut |_, _| {})
}

/// [`newton_solve`] calling `observer(k, u_k)` for the seed and every iterate.
pub fn newton_solve_observed(
    model: &Model,
    grid: &Grid,
    lambda: f64,
    u0: &Field,
    opts: &NewtonOptions,
    observer: &mut dyn FnMut(usize, &Field),
) -> Result<(Field, NewtonReport)> {
    opts.validate()?;
    grid.ensure_matches(u0.grid())?;
    if !u0.is_finite() || !lambda.is_finite() {
        return Err(Error::NonFinite("Newton seed"));
    }
    let spectral = Spectral::new(*grid);
    let mut u = u0.clone();
    let mut report = NewtonReport::default();
    let mut r = model.residual(&spectral, &u, lambda)?;
    let mut rnorm = r.norm_inf();
    report.residual_history.push(rnorm);
    observer(0, &u);

    loop {
        if converged_residual(rnorm, &u, opts.res_tol) {
            report.converged = true;
            break;
        }
        if report.newton_iters >= opts.max_newton {
            report.failure = Some(NewtonFailure::MaxIterations);
            break;
        }
        let step = report.newton_iters + 1;
        let setup = Instant::now();
        let linear = match LinearStep::build(model, &spectral, &u, lambda, opts.stencil) {
            Ok(l) => l,
            Err(e) => {
                report.failure = Some(NewtonFailure::Preconditioner {
                    step,
                    message: e.to_string(),
                });
                break;
            }
        };
        report.setup_seconds += setup.elapsed().as_secs_f64();
        let (v, krylov) = linear.solve(r.values(), &opts.krylov)?;
        report.gmres_iters_per_step.push(krylov.iterations);
        if !krylov.converged {
            report.failure = Some(NewtonFailure::Krylov { step });
            break;
        }
        let v = Field::from_raw(*grid, v);

        let mut t = 1.0;
        let mut trial = u.minus_scaled(t, &v)?;
        let mut trial_r = model.residual(&spectral, &trial, lambda);
        if let Damping::Backtracking { max_halvings } = opts.damping {
            let mut halvings = 0;
            while halvings < max_halvings && trial_r.as_ref().map_or(true, |tr| tr.norm_inf() > rnorm) {
                t *= 0.5;
                halvings += 1;
                trial = u.minus_scaled(t, &v)?;
                trial_r = model.residual(&spectral, &trial, lambda);
            }
            if halvings > 0 {
                log::debug!("Newton step {step}: damped to t = {t}");
            }
        }
        report.newton_iters = step;
        match trial_r {
            Ok(tr) => {
                u = trial;
                r = tr;
                rnorm = r.norm_inf();
                report.residual_history.push(rnorm);
                observer(step, &u);
            }
            Err(_) => {
                report.failure = Some(NewtonFailure::NonFinite { step });
                break;
            }
        }
    }
    report.final_power = power(&u);
    Ok((u, report))
}

/// Newton iteration for `‖u‖₂ = m` with `λ` unknown.
///
/// Each step solves the bordered system
/// `[A  -u; ⟨u,·⟩  0] [v; μ] = [r; κ]`, `κ = (‖u‖₂² - m²)/2`, by block
/// elimination with two preconditioned GMRES solves, then updates
/// `(u, λ) ← (u - v, λ - μ)`.
pub fn newton_fixed_norm(
    model: &Model,
    grid: &Grid,
    m: f64,
    u0: &Field,
    lambda0: f64,
    opts: &NewtonOptions,
) -> Result<(Field, f64, NewtonReport)> {
    opts.validate()?;
    grid.ensure_matches(u0.grid())?;
    if !u0.is_finite() || !lambda0.is_finite() || !m.is_finite() {
        return Err(Error::NonFinite("fixed-norm seed"));
    }
    if power(u0) <= 0.0 {
        return Err(Error::InvalidArgument("fixed-norm seed must be non-zero".into()));
    }
    if m <= 0.0 {
        return Err(Error::InvalidArgument(format!("target norm must be positive, got {m}")));
    }
    let spectral = Spectral::new(*grid);
    let m2 = m * m;
    let norm_scale = m2.max(1.0);
    let merit = |r: &Field, u: &Field| -> f64 {
        (r.norm_inf() / u.norm_inf().max(1.0)).max((power(u) - m2).abs() / norm_scale)
    };

    let mut u = u0.clone();
    let mut lambda = lambda0;
    let mut report = NewtonReport::default();
    let mut r = model.residual(&spectral, &u, lambda)?;
    report.residual_history.push(r.norm_inf());
    report.lambda_history.push(lambda);

    loop {
        let defect = (power(&u) - m2).abs();
        if converged_residual(r.norm_inf(), &u, opts.res_tol) && defect <= opts.res_tol * norm_scale {
            report.converged = true;
            break;
        }
        if report.newton_iters >= opts.max_newton {
            report.failure = Some(NewtonFailure::MaxIterations);
            break;
        }
        let step = report.newton_iters + 1;
        let setup = Instant::now();
        let linear = match LinearStep::build(model, &spectral, &u, lambda, opts.stencil) {
            Ok(l) => l,
            Err(e) => {
                report.failure = Some(NewtonFailure::Preconditioner {
                    step,
                    message: e.to_string(),
                });
                break;
            }
        };
        report.setup_seconds += setup.elapsed().as_secs_f64();
        let (w1, k1) = linear.solve(r.values(), &opts.krylov)?;
        let (w2, k2) = linear.solve(u.values(), &opts.krylov)?;
        report.gmres_iters_per_step.push(k1.iterations + k2.iterations);
        if !(k1.converged && k2.converged) {
            report.failure = Some(NewtonFailure::Krylov { step });
            break;
        }
        let w1 = Field::from_raw(*grid, w1);
        let w2 = Field::from_raw(*grid, w2);
        let uw2 = inner(&u, &w2)?;
        if uw2.abs() <= 1e-12 * power(&u).sqrt() * power(&w2).sqrt() {
            report.failure = Some(NewtonFailure::BorderedSingularity { step });
            break;
        }
        let kappa = 0.5 * (power(&u) - m2);
        let mu = (kappa - inner(&u, &w1)?) / uw2;
        let v = w1.minus_scaled(-mu, &w2)?;

        let current = merit(&r, &u);
        let mut t = 1.0;
        let mut trial = u.minus_scaled(t, &v)?;
        let mut trial_r = model.residual(&spectral, &trial, lambda - t * mu);
        if let Damping::Backtracking { max_halvings } = opts.damping {
            let mut halvings = 0;
            while halvings < max_halvings && trial_r.as_ref().map_or(true, |tr| merit(tr, &trial) > current) {
                t *= 0.5;
                halvings += 1;
                trial = u.minus_scaled(t, &v)?;
                trial_r = model.residual(&spectral, &trial, lambda - t * mu);
            }
        }
        report.newton_iters = step;
        match trial_r {
            Ok(tr) => {
                u = trial;
                lambda -= t * mu;
                r = tr;
                report.residual_history.push(r.norm_inf());
                report.lambda_history.push(lambda);
            }
            Err(_) => {
                report.failure = Some(NewtonFailure::NonFinite { step });
                break;
            }
        }
    }
    report.final_power = power(&u);
    Ok((u, lambda, report))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PetviashviliOptions {
    /// Exponent of the stabilizing factor.
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop when `‖u_{n+1} - u_n‖∞ ≤ tol`.
    pub tol: f64,
    /// Declare divergence once `‖u‖∞` exceeds this.
    pub divergence: f64,
}

impl Default for PetviashviliOptions {
    fn default() -> Self {
        Self {
            gamma: 1.5,
            max_iters: 500,
            tol: 1e-10,
            divergence: 1e8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PetviashviliFailure {
    MaxIterations,
    Diverged,
    /// The stabilizing factor became zero, negative, or undefined.
    NonPositiveFactor,
    /// The iterate collapsed to zero.
    Collapsed,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PetviashviliReport {
    pub iterations: usize,
    pub converged: bool,
    pub increments: Vec<f64>,
    pub stabilizing_factors: Vec<f64>,
    pub failure: Option<PetviashviliFailure>,
}

/// Stabilizing factor `M = Σ_k D_k |û_k|² / Σ_k conj(û_k) F[R(u)]_k`.
pub fn stabilizing_factor(u_hat: &[Complex64], rhs_hat: &[Complex64], denominators: &[f64]) -> f64 {
    let num: f64 = u_hat.iter().zip(denominators).map(|(c, d)| d * c.norm_sqr()).sum();
    let den: f64 = u_hat.iter().zip(rhs_hat).map(|(a, b)| (a.conj() * b).re).sum();
    num / den
}

/// Petviashvili iteration for Kerr models.
///
/// The classical scheme preconditions with the shifted Laplacian only:
/// `c_K(-Δu) + Vu - σu³ = λu` is written as
/// `(c_K(-Δ) - λ) u = σu³ - Vu` and iterated as
/// `û ← M^γ F[σu³ - Vu] / (c_K·4π²|k|²/L² - λ)`. Without a potential and
/// with `λ < 0` this is the textbook method for `-Δu + su = u³`; with a
/// lattice potential, or with `λ` above the bottom of the free spectrum,
/// the denominator no longer reflects the linear operator and the
/// iteration is not expected to converge.
pub fn petviashvili(
    model: &Model,
    grid: &Grid,
    lambda: f64,
    u0: &Field,
    opts: &PetviashviliOptions,
) -> Result<(Field, PetviashviliReport)> {
    let sigma = match model.kind() {
        ModelKind::Kerr { sigma, .. } => sigma.value(),
        _ => {
            return Err(Error::InvalidArgument(
                "the Petviashvili baseline supports Kerr models only".into(),
            ))
        }
    };
    grid.ensure_matches(u0.grid())?;
    if !u0.is_finite() {
        return Err(Error::NonFinite("Petviashvili seed"));
    }
    let spectral = Spectral::new(*grid);
    let potential = model.potential(*grid);
    let denominators: Vec<f64> = spectral
        .laplacian_symbol()
        .iter()
        .map(|s| model.kinetic_factor() * s - lambda)
        .collect();
    let floor = 1e-6 * lambda.abs().max(1.0);
    if denominators.iter().any(|d| d.abs() < floor) {
        return Err(Error::InvalidArgument(format!(
            "Petviashvili denominators vanish at λ = {lambda}"
        )));
    }

    let mut u = u0.values().to_vec();
    let mut report = PetviashviliReport::default();
    let n = u.len();
    loop {
        if report.iterations >= opts.max_iters {
            report.failure = Some(PetviashviliFailure::MaxIterations);
            break;
        }
        let rhs: Vec<f64> = u
            .iter()
            .zip(potential.values())
            .map(|(&x, &v)| sigma * x * x * x - v * x)
            .collect();
        let u_hat = spectral.forward(&u);
        let mut rhs_hat = spectral.forward(&rhs);
        let factor = stabilizing_factor(&u_hat, &rhs_hat, &denominators);
        report.stabilizing_factors.push(factor);
        if power(&Field::from_raw(*grid, u.clone())) == 0.0 {
            report.failure = Some(PetviashviliFailure::Collapsed);
            break;
        }
        if !(factor.is_finite() && factor > 0.0) {
            report.failure = Some(PetviashviliFailure::NonPositiveFactor);
            break;
        }
        let scale = factor.powf(opts.gamma);
        rhs_hat.iter_mut().zip(&denominators).for_each(|(c, d)| *c *= scale / d);
        spectral.inverse_in_place(&mut rhs_hat);
        let next: Vec<f64> = rhs_hat.iter().map(|c| c.re).collect();
        report.iterations += 1;
        let increment = next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        report.increments.push(increment);
        u = next;
        let size = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !size.is_finite() || size > opts.divergence {
            report.failure = Some(PetviashviliFailure::Diverged);
            break;
        }
        if size < 1e-150 {
            report.failure = Some(PetviashviliFailure::Collapsed);
            break;
        }
        if increment <= opts.tol {
            report.converged = true;
            break;
        }
    }
    debug_assert_eq!(u.len(), n);
    let field = Field::new(*grid, u).unwrap_or_else(|_| Field::zeros(*grid));
    Ok((field, report))
}
