//! Natural-parameter continuation in `λ`.
//!
//! Each path starts from the seed and walks its list of `λ` values, warm
//! starting every Newton solve from the previous converged field. A path
//! stops at its first failure; the remaining paths still run.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::solver::{newton_solve, NewtonOptions};
use crate::spectral::{participation_ratio, power, Field, Grid};

/// Centred Gaussian `c·exp(-|x - x_c|²/(2σ²))` scaled so that the discrete
/// power `h^d Σ u²` equals `target_power`.
pub fn gaussian_seed(grid: &Grid, sigma: f64, target_power: f64) -> Result<Field> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "seed width must be positive, got {sigma}"
        )));
    }
    if !(target_power.is_finite() && target_power > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "seed power must be positive, got {target_power}"
        )));
    }
    let centre = grid.origin() + 0.5 * grid.box_len();
    let unit = Field::from_fn(*grid, |x| {
        let r2: f64 = x.iter().map(|xi| (xi - centre) * (xi - centre)).sum();
        (-r2 / (2.0 * sigma * sigma)).exp()
    });
    let p = power(&unit);
    if p == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "seed width {sigma} is too narrow for mesh spacing {}",
            grid.spacing()
        )));
    }
    Ok(unit.scaled((target_power / p).sqrt()))
}

/// A strictly monotone sequence of `λ` values.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaPath {
    lambdas: Vec<f64>,
}

impl LambdaPath {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("a λ path needs at least one value".into()));
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("λ path"));
        }
        let increasing = lambdas.windows(2).all(|w| w[1] > w[0]);
        let decreasing = lambdas.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::InvalidArgument("λ path must be strictly monotone".into()));
        }
        Ok(Self { lambdas })
    }

    /// Equal steps from `start` to `end` (both included), none longer than
    /// `max_step`.
    pub fn stepped(start: f64, end: f64, max_step: f64) -> Result<Self> {
        if !(max_step.is_finite() && max_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "λ step must be positive, got {max_step}"
            )));
        }
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::NonFinite("λ path endpoints"));
        }
        let span = end - start;
        if span == 0.0 {
            return Self::new(vec![start]);
        }
        let steps = (span.abs() / max_step).ceil().max(1.0) as usize;
        let mut lambdas: Vec<f64> = (0..steps).map(|i| start + span * i as f64 / steps as f64).collect();
        lambdas.push(end);
        Self::new(lambdas)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn start(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn end(&self) -> f64 {
        self.lambdas[self.lambdas.len() - 1]
    }
}

/// Initial guess for the first `λ` of every path.
#[derive(Clone, Debug)]
pub enum Seed {
    Gaussian { sigma: f64, power: f64 },
    Field(Field),
}

impl Seed {
    pub fn realize(&self, grid: &Grid) -> Result<Field> {
        match self {
            Seed::Gaussian { sigma, power } => gaussian_seed(grid, *sigma, *power),
            Seed::Field(f) => {
                grid.ensure_matches(f.grid())?;
                Ok(f.clone())
            }
        }
    }
}

/// Which converged fields a sweep keeps.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum FieldCapture {
    #[default]
    None,
    /// First and last converged field of each path.
    Endpoints,
    /// Fields at these `λ` values (matched to within `1e-12`).
    At(Vec<f64>),
    All,
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub paths: Vec<LambdaPath>,
    pub seed: Seed,
    pub capture: FieldCapture,
    /// Halve the step (up to four times) before giving up on a path.
    pub auto_refine: bool,
}

const MAX_REFINEMENTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub path: usize,
    pub lambda: f64,
    pub power: f64,
    pub newton_iters: usize,
    pub mean_gmres_iters: f64,
    pub converged: bool,
    pub participation_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct SavedField {
    pub path: usize,
    pub lambda: f64,
    pub field: Field,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathOutcome {
    pub completed: bool,
    pub last_converged: Option<f64>,
    /// Description of the failure that stopped the path.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct CurveResult {
    pub points: Vec<CurvePoint>,
    pub fields: Vec<SavedField>,
    pub paths: Vec<PathOutcome>,
}

impl CurveResult {
    pub fn all_completed(&self) -> bool {
        self.paths.iter().all(|p| p.completed)
    }

    /// Converged points of one path, in sweep order.
    pub fn path_points(&self, path: usize) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(move |p| p.path == path && p.converged)
    }
}

pub fn sweep(model: &Model, grid: &Grid, plan: &SweepPlan, opts: &NewtonOptions) -> Result<CurveResult> {
    sweep_with_progress(model, grid, plan, opts, &mut |_| {})
}

/// [`sweep`], calling `progress` after every attempted `λ`.
pub fn sweep_with_progress(
    model: &Model,
    grid: &Grid,
    plan: &SweepPlan,
    opts: &NewtonOptions,
    progress: &mut dyn FnMut(&CurvePoint),
) -> Result<CurveResult> {
    if plan.paths.is_empty() {
        return Err(Error::InvalidArgument("sweep plan has no paths".into()));
    }
    let seed = plan.seed.realize(grid)?;
    let mut result = CurveResult::default();

    for (index, path) in plan.paths.iter().enumerate() {
        let mut current = seed.clone();
        let mut previous: Option<f64> = None;
        let mut outcome = PathOutcome {
            completed: true,
            last_converged: None,
            failure: None,
        };
        let mut first_saved = false;
        let mut last_field: Option<(f64, Field)> = None;

        'targets: for &target in path.lambdas() {
            // intermediate λ values inserted by refinement, ending at target
            let mut pending = vec![target];
            let mut refinements = 0;
            while let Some(&lambda) = pending.last() {
                let (u, report) = newton_solve(model, grid, lambda, &current, opts)?;
                let point = CurvePoint {
                    path: index,
                    lambda,
                    power: report.final_power,
                    newton_iters: report.newton_iters,
                    mean_gmres_iters: report.mean_gmres_iters(),
                    converged: report.converged,
                    participation_ratio: participation_ratio(&u),
                };
                if report.converged {
                    pending.pop();
                    result.points.push(point);
                    progress(&point);
                    let keep = match &plan.capture {
                        FieldCapture::None => false,
                        FieldCapture::Endpoints => !first_saved,
                        FieldCapture::At(list) => list.iter().any(|l| (l - lambda).abs() <= 1e-12),
                        FieldCapture::All => true,
                    };
                    if keep {
                        first_saved = true;
                        result.fields.push(SavedField {
                            path: index,
                            lambda,
                            field: u.clone(),
                        });
                    }
                    last_field = Some((lambda, u.clone()));
                    current = u;
                    previous = Some(lambda);
                    outcome.last_converged = Some(lambda);
                    continue;
                }
                let can_refine = plan.auto_refine && refinements < MAX_REFINEMENTS && previous.is_some();
                if can_refine {
                    let from = previous.unwrap_or(lambda);
                    refinements += 1;
                    log::info!("path {index}: refining step towards λ = {lambda}");
                    pending.push(0.5 * (from + lambda));
                    continue;
                }
                result.points.push(point);
                progress(&point);
                outcome.completed = false;
                outcome.failure = Some(match report.failure {
                    Some(f) => format!("Newton failed at λ = {lambda}: {f:?}"),
                    None => format!("Newton failed at λ = {lambda}"),
                });
                break 'targets;
            }
        }

        if plan.capture == FieldCapture::Endpoints {
            if let Some((lambda, field)) = last_field {
                let already = result.fields.iter().any(|s| s.path == index && s.lambda == lambda);
                if !already {
                    result.fields.push(SavedField {
                        path: index,
                        lambda,
                        field,
                    });
                }
            }
        }
        result.paths.push(outcome);
    }
    Ok(result)
}
