//! Newton–Krylov solver for stationary nonlinear Schrödinger solitons.
//!
//! Solves `-c_K Δu + V(x) u + N(x, u) = λ u` on a periodic box with a
//! Fourier pseudospectral discretization. Newton's linear systems are solved
//! with GMRES preconditioned by a sparsified Green's function: a local
//! stencil `Q` annihilates the smooth far field of `G = (c_K(-Δ) + l - λ)⁻¹`,
//! leaving `QG` nearly identical to a sparse matrix `P` that is factorized
//! directly.

pub mod continuation;
pub mod error;
pub mod krylov;
pub mod model;
pub mod presets;
pub mod solver;
pub mod sparse;
pub mod sparsifier;
pub mod spectral;

pub use continuation::{
    gaussian_seed, sweep, sweep_with_progress, CurvePoint, CurveResult, FieldCapture, LambdaPath, PathOutcome,
    SavedField, Seed, SweepPlan,
};
pub use error::{Error, Result};
pub use krylov::{gmres, Identity, KrylovOptions, KrylovReport, LinearOperator};
pub use model::{CustomModel, KerrSign, LinearizedOperator, Model, ModelKind};
pub use presets::{preset, presets, GridSpec, Preset};
pub use solver::{
    newton_fixed_norm, newton_solve, newton_solve_observed, petviashvili, Damping, NewtonFailure, NewtonOptions,
    NewtonReport, PetviashviliFailure, PetviashviliOptions, PetviashviliReport,
};
pub use sparse::{CscMatrix, FactorStats, Ordering, SparseLu};
pub use sparsifier::{PrecondStats, Preconditioner, Stencil, StencilOptions};
pub use spectral::{inner, participation_ratio, power, Field, GreenKernel, Grid, Spectral};
