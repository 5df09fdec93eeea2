//! Command implementations behind the `soliton` binary.
//!
//! Each command resolves an [`Experiment`](config::Experiment) from a preset
//! or a TOML file, runs one of the solvers in `soliton_core`, writes its
//! results under an output directory, and reports a [`Status`] that the
//! binary turns into the process exit code.

pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use soliton_core::{
    gaussian_seed, newton_fixed_norm, newton_solve, petviashvili, power, sweep_with_progress, Field, FieldCapture,
    Grid, LambdaPath, PetviashviliOptions, Seed, SweepPlan,
};

use crate::config::{ConfigFile, Experiment, Needs, SeedSection, SeedSpec};
pub use crate::error::{CliError, CliResult, Status};

/// Where an experiment comes from, plus command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Source {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub seed_field: Option<PathBuf>,
    /// Halve points per axis and box length, keeping the spacing.
    pub half_box: bool,
}

impl Source {
    pub fn resolve(&self, needs: Needs) -> CliResult<Experiment> {
        let mut file = match (&self.preset, &self.config) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either --preset or --config, not both".into())),
            (Some(name), None) => ConfigFile {
                preset: Some(name.clone()),
                ..ConfigFile::default()
            },
            (None, Some(path)) => ConfigFile::load(path)?,
            (None, None) => return Err(CliError::Config("one of --preset or --config is required".into())),
        };
        if let Some(path) = &self.seed_field {
            file.seed = Some(SeedSection {
                sigma: None,
                power: None,
                field: Some(path.clone()),
            });
        }
        let mut exp = file.resolve(needs)?;
        if self.half_box {
            exp.grid = exp.grid.halved();
        }
        Ok(exp)
    }
}

fn initial_field(exp: &Experiment, grid: &Grid) -> CliResult<Field> {
    match &exp.seed {
        SeedSpec::Gaussian { sigma, power } => Ok(gaussian_seed(grid, *sigma, *power)?),
        SeedSpec::File(path) => {
            let (field, meta) = output::read_field(path)?;
            if field.grid() != grid {
                return Err(CliError::Config(format!(
                    "seed field {} lives on a {}-dimensional {}-point grid of box {}, which does not match the experiment",
                    path.display(),
                    meta.d,
                    meta.n,
                    meta.box_len
                )));
            }
            Ok(field)
        }
    }
}

fn status(converged: bool) -> Status {
    if converged {
        Status::Success
    } else {
        Status::NotConverged
    }
}

fn required_lambda(cli: Option<f64>, exp: &Experiment) -> CliResult<f64> {
    cli.or(exp.lambda)
        .ok_or_else(|| CliError::Config("a target λ is required (--lambda or `lambda` in the config)".into()))
}

/// Newton solve at a single `λ`.
pub fn solve(source: &Source, lambda: Option<f64>, out: &Path) -> CliResult<Status> {
    let exp = source.resolve(Needs::Solve)?;
    let lambda = required_lambda(lambda, &exp)?;
    let grid = exp.grid.build()?;
    let seed = initial_field(&exp, &grid)?;
    let (u, report) = newton_solve(&exp.model, &grid, lambda, &seed, &exp.newton)?;
    output::ensure_dir(out)?;
    let path = output::write_field(out, &u, lambda, &exp.model.describe())?;
    println!(
        "lambda={lambda:.16e} power={:.16e} newton_iters={} mean_gmres_iters={:.2} converged={}",
        report.final_power,
        report.newton_iters,
        report.mean_gmres_iters(),
        report.converged
    );
    if let Some(failure) = &report.failure {
        log::warn!("Newton failed: {failure:?}");
    }
    log::info!("wrote {}", path.display());
    Ok(status(report.converged))
}

/// λ-continuation over every path of the experiment.
pub fn sweep(source: &Source, auto_refine: bool, out: &Path) -> CliResult<Status> {
    let exp = source.resolve(Needs::Sweep)?;
    let grid = exp.grid.build()?;
    let paths = exp
        .paths
        .iter()
        .map(|&(a, b)| LambdaPath::stepped(a, b, exp.max_step))
        .collect::<soliton_core::Result<Vec<_>>>()?;
    let plan = SweepPlan {
        paths,
        seed: Seed::Field(initial_field(&exp, &grid)?),
        capture: FieldCapture::Endpoints,
        auto_refine: auto_refine || exp.auto_refine,
    };
    log::info!("sweeping {} on {} points per axis", exp.name, grid.n());
    let result = sweep_with_progress(&exp.model, &grid, &plan, &exp.newton, &mut |p| {
        eprintln!(
            "path {} λ={:+.6} P={:.6} newton={} gmres/step={:.1}{}",
            p.path,
            p.lambda,
            p.power,
            p.newton_iters,
            p.mean_gmres_iters,
            if p.converged { "" } else { " NOT CONVERGED" }
        );
    })?;

    output::ensure_dir(out)?;
    output::write_curve(out, &result.points)?;
    let model = exp.model.describe();
    for saved in &result.fields {
        output::write_field(out, &saved.field, saved.lambda, &model)?;
    }
    for (i, outcome) in result.paths.iter().enumerate() {
        if let Some(why) = &outcome.failure {
            eprintln!("path {i} stopped early: {why}");
        }
    }
    println!(
        "points={} paths_completed={}/{}",
        result.points.len(),
        result.paths.iter().filter(|p| p.completed).count(),
        result.paths.len()
    );
    Ok(status(result.all_completed()))
}

/// Bordered Newton at prescribed power `P = norm²`.
pub fn fixed_norm(source: &Source, norm: f64, lambda0: Option<f64>, out: &Path) -> CliResult<Status> {
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(CliError::Config(format!("--norm must be positive, got {norm}")));
    }
    let exp = source.resolve(Needs::Solve)?;
    let lambda0 = required_lambda(lambda0, &exp)?;
    let grid = exp.grid.build()?;
    let seed = initial_field(&exp, &grid)?;
    let (u, lambda, report) = newton_fixed_norm(&exp.model, &grid, norm, &seed, lambda0, &exp.newton)?;
    output::ensure_dir(out)?;
    output::write_field(out, &u, lambda, &exp.model.describe())?;
    println!(
        "lambda={lambda:.16e} power={:.16e} newton_iters={} converged={}",
        power(&u),
        report.newton_iters,
        report.converged
    );
    if let Some(failure) = &report.failure {
        log::warn!("bordered Newton failed: {failure:?}");
    }
    Ok(status(report.converged))
}

/// The Petviashvili baseline at a single `λ`.
pub fn petviashvili_run(
    source: &Source,
    lambda: Option<f64>,
    opts: PetviashviliOptions,
    out: &Path,
) -> CliResult<Status> {
    let exp = source.resolve(Needs::Solve)?;
    let lambda = required_lambda(lambda, &exp)?;
    let grid = exp.grid.build()?;
    let seed = initial_field(&exp, &grid)?;
    let (u, report) = petviashvili(&exp.model, &grid, lambda, &seed, &opts)?;
    match report.failure {
        Some(failure) => {
            eprintln!(
                "Petviashvili failed after {} iterations: {failure:?}",
                report.iterations
            );
        }
        None => {
            output::ensure_dir(out)?;
            output::write_field(out, &u, lambda, &exp.model.describe())?;
        }
    }
    println!(
        "lambda={lambda:.16e} power={:.16e} iterations={} converged={}",
        power(&u),
        report.iterations,
        report.converged
    );
    Ok(status(report.converged))
}

/// One line per built-in preset.
pub fn preset_listing() -> String {
    soliton_core::presets()
        .iter()
        .map(|p| {
            let paths = p
                .paths
                .iter()
                .map(|(a, b)| format!("{a}→{b}"))
                .collect::<Vec<_>>()
                .join(", ");
            format!(
                "{:<22} {}-D, n={}, L={}, λ: {}  {}\n",
                p.name, p.grid.dim, p.grid.n, p.grid.box_len, paths, p.description
            )
        })
        .collect()
}
