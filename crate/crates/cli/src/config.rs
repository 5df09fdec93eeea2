//! Experiment configuration files.
//!
//! A config is a TOML document that either names a built-in `preset` and
//! overrides parts of it, or spells out every section. Unknown keys are
//! rejected.
//!
//! ```toml
//! preset = "kerr-focusing"
//!
//! [seed]
//! sigma = 0.35
//! power = 4.0
//!
//! [newton]
//! res_tol = 1e-9
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use soliton_core::model::DEFAULT_KINETIC_FACTOR;
use soliton_core::{
    preset, Damping, GridSpec, KerrSign, KrylovOptions, LambdaPath, Model, NewtonOptions, Preset, StencilOptions,
};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    /// Fixed `λ` for single solves.
    pub lambda: Option<f64>,
    pub model: Option<ModelSection>,
    pub grid: Option<GridSection>,
    pub seed: Option<SeedSection>,
    pub paths: Option<Vec<PathSection>>,
    pub continuation: Option<ContinuationSection>,
    pub newton: Option<NewtonSection>,
    pub gmres: Option<GmresSection>,
    pub stencil: Option<StencilSection>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModelKindName {
    Kerr,
    Saturable,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKindName,
    pub v0: f64,
    /// Kerr sign, `+1` or `-1`.
    pub sigma: Option<f64>,
    /// Saturable lattice depth.
    pub a: Option<f64>,
    pub kinetic_factor: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    pub box_len: f64,
    #[serde(default = "default_true")]
    pub centered: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub sigma: Option<f64>,
    pub power: Option<f64>,
    /// Previously dumped `field_<λ>.f64` to start from instead of a Gaussian.
    pub field: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ContinuationSection {
    pub max_step: Option<f64>,
    pub auto_refine: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NewtonSection {
    pub res_tol: Option<f64>,
    pub max_newton: Option<usize>,
    /// `0` disables backtracking.
    pub max_halvings: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GmresSection {
    pub rel_tol: Option<f64>,
    pub restart: Option<usize>,
    pub max_iters: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StencilSection {
    pub half_width: Option<usize>,
    pub annulus_width: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        toml::from_str(text).map_err(|source| CliError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// How the first Newton solve is seeded.
#[derive(Clone, Debug, PartialEq)]
pub enum SeedSpec {
    Gaussian { sigma: f64, power: f64 },
    File(PathBuf),
}

/// A fully resolved experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub name: String,
    pub model: Model,
    pub grid: GridSpec,
    pub seed: SeedSpec,
    pub paths: Vec<(f64, f64)>,
    pub max_step: f64,
    pub auto_refine: bool,
    pub lambda: Option<f64>,
    pub newton: NewtonOptions,
}

/// Which sections a command cannot do without.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Needs {
    /// Model, grid, and seed.
    Solve,
    /// Model, grid, seed, and continuation paths.
    Sweep,
}

fn finite(name: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("`{name}` must be finite, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if finite(name, v)? > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("`{name}` must be positive, got {v}")))
    }
}

fn build_model(section: &ModelSection) -> CliResult<Model> {
    let v0 = finite("model.v0", section.v0)?;
    let kinetic = positive(
        "model.kinetic_factor",
        section.kinetic_factor.unwrap_or(DEFAULT_KINETIC_FACTOR),
    )?;
    let model = match section.kind {
        ModelKindName::Kerr => {
            if section.a.is_some() {
                return Err(CliError::Config("`model.a` applies to saturable models only".into()));
            }
            let sigma = section
                .sigma
                .ok_or_else(|| CliError::Config("Kerr model needs `model.sigma` (+1 or -1)".into()))?;
            let sign = KerrSign::from_value(sigma).map_err(|e| CliError::Config(e.to_string()))?;
            Model::kerr(v0, sign)
        }
        ModelKindName::Saturable => {
            if section.sigma.is_some() {
                return Err(CliError::Config("`model.sigma` applies to Kerr models only".into()));
            }
            let a = section
                .a
                .ok_or_else(|| CliError::Config("saturable model needs `model.a`".into()))?;
            Model::saturable(v0, finite("model.a", a)?)
        }
    };
    Ok(model.with_kinetic_factor(kinetic)?)
}

impl ConfigFile {
    /// Merges the file over its preset (if any) and validates the result.
    pub fn resolve(&self, needs: Needs) -> CliResult<Experiment> {
        let base = match &self.preset {
            Some(name) => Some(preset(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown preset `{name}` (known: {})",
                    soliton_core::presets()
                        .iter()
                        .map(|p| p.name)
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })?),
            None => None,
        };

        let mut missing = Vec::new();
        if base.is_none() {
            if self.model.is_none() {
                missing.push("model");
            }
            if self.grid.is_none() {
                missing.push("grid");
            }
            let seed_given = self
                .seed
                .as_ref()
                .is_some_and(|s| s.field.is_some() || (s.sigma.is_some() && s.power.is_some()));
            if !seed_given {
                missing.push("seed");
            }
            if needs == Needs::Sweep && self.paths.is_none() {
                missing.push("paths");
            }
        }
        if !missing.is_empty() {
            return Err(CliError::Config(format!(
                "missing required keys: {} (or name a built-in `preset`)",
                missing.join(", ")
            )));
        }

        let model = match (&self.model, &base) {
            (Some(section), _) => build_model(section)?,
            (None, Some(p)) => p.model.clone(),
            (None, None) => unreachable!("checked above"),
        };
        let grid = match (&self.grid, &base) {
            (Some(g), _) => GridSpec {
                dim: g.dim,
                n: g.n,
                box_len: g.box_len,
                centered: g.centered,
            },
            (None, Some(p)) => p.grid,
            (None, None) => unreachable!("checked above"),
        };
        grid.build()?;

        let seed = match &self.seed {
            Some(SeedSection { field: Some(path), .. }) => SeedSpec::File(path.clone()),
            section => {
                let sigma = section
                    .as_ref()
                    .and_then(|s| s.sigma)
                    .or(base.as_ref().map(|p| p.seed_sigma))
                    .ok_or_else(|| CliError::Config("missing `seed.sigma`".into()))?;
                let power = section
                    .as_ref()
                    .and_then(|s| s.power)
                    .or(base.as_ref().map(|p| p.seed_power))
                    .ok_or_else(|| CliError::Config("missing `seed.power`".into()))?;
                SeedSpec::Gaussian {
                    sigma: positive("seed.sigma", sigma)?,
                    power: positive("seed.power", power)?,
                }
            }
        };

        let paths: Vec<(f64, f64)> = match (&self.paths, &base) {
            (Some(list), _) => list
                .iter()
                .map(|p| Ok((finite("paths.start", p.start)?, finite("paths.end", p.end)?)))
                .collect::<CliResult<_>>()?,
            (None, Some(p)) => p.paths.clone(),
            (None, None) => Vec::new(),
        };
        let continuation = self.continuation.clone().unwrap_or_default();
        let max_step = positive(
            "continuation.max_step",
            continuation
                .max_step
                .or(base.as_ref().map(|p| p.max_step))
                .unwrap_or(0.25),
        )?;
        if needs == Needs::Sweep {
            if paths.is_empty() {
                return Err(CliError::Config("`paths` must list at least one path".into()));
            }
            for &(a, b) in &paths {
                LambdaPath::stepped(a, b, max_step)?;
            }
        }

        let newton = self.newton_options(base.as_ref().map(Preset::newton_options).unwrap_or_default())?;
        let lambda = self.lambda.map(|l| finite("lambda", l)).transpose()?;
        Ok(Experiment {
            name: base.as_ref().map_or_else(|| model.describe(), |p| p.name.to_string()),
            model,
            grid,
            seed,
            paths,
            max_step,
            auto_refine: continuation.auto_refine.unwrap_or(false),
            lambda,
            newton,
        })
    }

    /// Applies the `[newton]`, `[gmres]` and `[stencil]` overrides to `opts`.
    fn newton_options(&self, mut opts: NewtonOptions) -> CliResult<NewtonOptions> {
        if let Some(n) = &self.newton {
            if let Some(t) = n.res_tol {
                opts.res_tol = positive("newton.res_tol", t)?;
            }
            if let Some(m) = n.max_newton {
                opts.max_newton = m;
            }
            match n.max_halvings {
                Some(0) => opts.damping = Damping::None,
                Some(h) => opts.damping = Damping::Backtracking { max_halvings: h },
                None => {}
            }
        }
        if let Some(g) = &self.gmres {
            let defaults = KrylovOptions::default();
            opts.krylov = KrylovOptions {
                rel_tol: g.rel_tol.unwrap_or(defaults.rel_tol),
                restart: g.restart.unwrap_or(defaults.restart),
                max_iters: g.max_iters.unwrap_or(defaults.max_iters),
                record_history: false,
            };
            if !(opts.krylov.rel_tol > 0.0 && opts.krylov.rel_tol < 1.0) {
                return Err(CliError::Config("`gmres.rel_tol` must lie in (0, 1)".into()));
            }
            if opts.krylov.restart == 0 {
                return Err(CliError::Config("`gmres.restart` must be at least 1".into()));
            }
        }
        if let Some(s) = &self.stencil {
            let defaults = opts.stencil;
            opts.stencil = StencilOptions {
                half_width: s.half_width.unwrap_or(defaults.half_width),
                annulus_width: s.annulus_width.unwrap_or(defaults.annulus_width),
            };
            if opts.stencil.half_width == 0 || opts.stencil.annulus_width == 0 {
                return Err(CliError::Config("stencil widths must be at least 1".into()));
            }
        }
        Ok(opts)
    }
}
