//! Physical models: lattice potential, local nonlinearity, and their
//! linearization.
//!
//! Every model has the form `c_K(-Δu) + V(x)u + N(x, u) = λu`. Coordinates
//! are physical, so the built-in lattices have period 1 along each axis.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid, Spectral};

/// Pointwise function of position.
pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Pointwise function of position and field value.
pub type LocalFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Sign of the Kerr coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KerrSign {
    Focusing,
    Defocusing,
}

impl KerrSign {
    /// Parses `+1` / `-1`.
    pub fn from_value(sigma: f64) -> Result<Self> {
        if sigma == 1.0 {
            Ok(Self::Focusing)
        } else if sigma == -1.0 {
            Ok(Self::Defocusing)
        } else {
            Err(Error::InvalidArgument(format!(
                "Kerr sigma must be +1 or -1, got {sigma}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Focusing => 1.0,
            Self::Defocusing => -1.0,
        }
    }
}

/// User-supplied model pieces.
#[derive(Clone)]
pub struct CustomModel {
    pub name: String,
    /// `V(x)`.
    pub potential: PotentialFn,
    /// `N(x, u)`.
    pub nonlinearity: LocalFn,
    /// `∂N/∂u (x, u)`.
    pub derivative: LocalFn,
}

#[derive(Clone)]
pub enum ModelKind {
    /// `V = (V0/2) Σ_i sin²(π x_i)`, `N = -σu³`.
    Kerr {
        v0: f64,
        sigma: KerrSign,
    },
    /// `V = 0`, `N = V0·u / (1 + A² Π_i cos²(π x_i) + u²)`.
    Saturable {
        v0: f64,
        a: f64,
    },
    Custom(CustomModel),
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kerr { v0, sigma } => f
                .debug_struct("Kerr")
                .field("v0", v0)
                .field("sigma", &sigma.value())
                .finish(),
            Self::Saturable { v0, a } => f.debug_struct("Saturable").field("v0", v0).field("a", a).finish(),
            Self::Custom(c) => f.debug_tuple("Custom").field(&c.name).finish(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    kind: ModelKind,
    kinetic_factor: f64,
}

/// Kinetic factor used by the lattice experiments (`-½Δ`).
pub const DEFAULT_KINETIC_FACTOR: f64 = 0.5;

impl Model {
    pub fn new(kind: ModelKind, kinetic_factor: f64) -> Result<Self> {
        if !(kinetic_factor.is_finite() && kinetic_factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kinetic factor must be positive, got {kinetic_factor}"
            )));
        }
        match &kind {
            ModelKind::Kerr { v0, .. } if !v0.is_finite() => {
                return Err(Error::NonFinite("Kerr V0"));
            }
            ModelKind::Saturable { v0, a } if !(v0.is_finite() && a.is_finite()) => {
                return Err(Error::NonFinite("saturable parameters"));
            }
            _ => {}
        }
        Ok(Self { kind, kinetic_factor })
    }

    pub fn kerr(v0: f64, sigma: KerrSign) -> Self {
        Self::new(ModelKind::Kerr { v0, sigma }, DEFAULT_KINETIC_FACTOR).expect("finite parameters")
    }

    pub fn saturable(v0: f64, a: f64) -> Self {
        Self::new(ModelKind::Saturable { v0, a }, DEFAULT_KINETIC_FACTOR).expect("finite parameters")
    }

    pub fn custom(custom: CustomModel, kinetic_factor: f64) -> Result<Self> {
        Self::new(ModelKind::Custom(custom), kinetic_factor)
    }

    pub fn with_kinetic_factor(mut self, kinetic_factor: f64) -> Result<Self> {
        if !(kinetic_factor.is_finite() && kinetic_factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kinetic factor must be positive, got {kinetic_factor}"
            )));
        }
        self.kinetic_factor = kinetic_factor;
        Ok(self)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn kinetic_factor(&self) -> f64 {
        self.kinetic_factor
    }

    /// Linear potential `V(x)`.
    pub fn potential_at(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Kerr { v0, .. } => 0.5 * v0 * x.iter().map(|xi| (PI * xi).sin().powi(2)).sum::<f64>(),
            ModelKind::Saturable { .. } => 0.0,
            ModelKind::Custom(c) => (c.potential)(x),
        }
    }

    /// `N(x, u)`.
    pub fn nonlinearity_at(&self, x: &[f64], u: f64) -> f64 {
        match &self.kind {
            ModelKind::Kerr { sigma, .. } => -sigma.value() * u * u * u,
            ModelKind::Saturable { v0, a } => v0 * u / (saturable_background(*a, x) + u * u),
            ModelKind::Custom(c) => (c.nonlinearity)(x, u),
        }
    }

    /// `V(x) + ∂N/∂u (x, u)`.
    pub fn linearization_at(&self, x: &[f64], u: f64) -> f64 {
        match &self.kind {
            ModelKind::Kerr { sigma, .. } => self.potential_at(x) - 3.0 * sigma.value() * u * u,
            ModelKind::Saturable { v0, a } => {
                let bg = saturable_background(*a, x);
                let den = bg + u * u;
                v0 * (bg - u * u) / (den * den)
            }
            ModelKind::Custom(c) => (c.potential)(x) + (c.derivative)(x, u),
        }
    }

    /// `V·u + N(x, u)` on the grid.
    pub fn nonlinear_apply(&self, u: &Field) -> Field {
        let grid = *u.grid();
        let values = u
            .values()
            .iter()
            .enumerate()
            .map(|(j, &uj)| {
                let x = grid.coordinates(j);
                let x = &x[..grid.dim()];
                self.potential_at(x) * uj + self.nonlinearity_at(x, uj)
            })
            .collect();
        Field::from_raw(grid, values)
    }

    /// `L_u = V + ∂N/∂u` on the grid.
    pub fn linearization(&self, u: &Field) -> Field {
        let grid = *u.grid();
        let values: Vec<f64> = u
            .values()
            .iter()
            .enumerate()
            .map(|(j, &uj)| {
                let x = grid.coordinates(j);
                self.linearization_at(&x[..grid.dim()], uj)
            })
            .collect();
        Field::from_raw(grid, values)
    }

    /// `V` on the grid.
    pub fn potential(&self, grid: Grid) -> Field {
        Field::from_fn(grid, |x| self.potential_at(x))
    }

    /// Residual `c_K(-Δu) + V·u + N(x,u) - λu`.
    pub fn residual(&self, spectral: &Spectral, u: &Field, lambda: f64) -> Result<Field> {
        if !u.is_finite() {
            return Err(Error::NonFinite("residual input"));
        }
        let lap = spectral.laplacian(u)?;
        let nl = self.nonlinear_apply(u);
        let values = lap
            .values()
            .iter()
            .zip(nl.values())
            .zip(u.values())
            .map(|((l, n), v)| self.kinetic_factor * l + n - lambda * v)
            .collect();
        Field::new(*u.grid(), values).map_err(|_| Error::NonFinite("residual"))
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            ModelKind::Kerr { v0, sigma } => {
                format!("kerr v0={v0} sigma={} c_k={}", sigma.value(), self.kinetic_factor)
            }
            ModelKind::Saturable { v0, a } => {
                format!("saturable v0={v0} a={a} c_k={}", self.kinetic_factor)
            }
            ModelKind::Custom(c) => format!("custom {} c_k={}", c.name, self.kinetic_factor),
        }
    }
}

/// `1 + A² Π_i cos²(π x_i)`; always ≥ 1.
fn saturable_background(a: f64, x: &[f64]) -> f64 {
    1.0 + a * a * x.iter().map(|xi| (PI * xi).cos().powi(2)).product::<f64>()
}

/// `c_K(-Δ) + L_u - λ` linearized at a fixed iterate.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    spectral: Spectral,
    kinetic_factor: f64,
    lambda: f64,
    lu: Field,
    mean: f64,
}

impl LinearizedOperator {
    pub fn new(model: &Model, spectral: &Spectral, u: &Field, lambda: f64) -> Result<Self> {
        spectral.grid().ensure_matches(u.grid())?;
        if !u.is_finite() {
            return Err(Error::NonFinite("linearization point"));
        }
        let lu = model.linearization(u);
        Ok(Self::from_potential(spectral, model.kinetic_factor(), lu, lambda))
    }

    /// Operator with an explicit diagonal `L_u`.
    pub fn from_potential(spectral: &Spectral, kinetic_factor: f64, lu: Field, lambda: f64) -> Self {
        let mean = lu.values().iter().sum::<f64>() / lu.len() as f64;
        Self {
            spectral: spectral.clone(),
            kinetic_factor,
            lambda,
            lu,
            mean,
        }
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn kinetic_factor(&self) -> f64 {
        self.kinetic_factor
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Diagonal values `L_u(x_j)`.
    pub fn potential(&self) -> &Field {
        &self.lu
    }

    /// Arithmetic mean `l` of `L_u`.
    pub fn mean_potential(&self) -> f64 {
        self.mean
    }

    pub fn apply(&self, v: &Field) -> Result<Field> {
        self.spectral.grid().ensure_matches(v.grid())?;
        let mut out = vec![0.0; v.len()];
        self.apply_slice(v.values(), &mut out);
        Ok(Field::from_raw(*v.grid(), out))
    }

    /// [`apply`](Self::apply) on raw grid values, for use as a Krylov operator.
    ///
    /// # Panics
    ///
    /// If either slice does not have the grid's length.
    pub fn apply_slice(&self, v: &[f64], out: &mut [f64]) {
        let n = self.lu.len();
        assert!(
            v.len() == n && out.len() == n,
            "operator applied to a slice of the wrong length"
        );
        let lap = self.spectral.laplacian_slice(v);
        for (((o, l), p), x) in out.iter_mut().zip(&lap).zip(self.lu.values()).zip(v) {
            *o = self.kinetic_factor * l + (p - self.lambda) * x;
        }
    }
}
