//! Periodic-box grids, real grid functions, and the Fourier pseudospectral
//! operators built on them.
//!
//! Transform normalization: the forward transform carries the `1/n^d`
//! factor and the inverse is the plain sum, so a mode with coefficient `c`
//! at wavenumber `k` has real-space values `c·e^{2πi k·j/n}`.
//!
//! Wavenumbers are indexed in FFT order: flat Fourier index `p` along an axis
//! corresponds to `k = p` for `p < n/2` and `k = p - n` otherwise, which
//! enumerates `K = {-n/2, …, n/2-1}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Relative bound on the imaginary part left over after a real-to-real
/// spectral operation.
pub const REALNESS_TOLERANCE: f64 = 1e-10;

/// Uniform periodic grid on a box of side `box_len` in `dim` dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    box_len: f64,
    origin: f64,
}

impl Grid {
    /// Builds a grid with `n` points per side. With `centered` the box is
    /// `[-L/2, L/2)^d`, otherwise `[0, L)^d`.
    pub fn new(dim: usize, n: usize, box_len: f64, centered: bool) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be between 1 and {MAX_DIM}, got {dim}"
            )));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per side must be even and at least 4, got {n}"
            )));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive and finite, got {box_len}"
            )));
        }
        let origin = if centered { -0.5 * box_len } else { 0.0 };
        Ok(Self {
            dim,
            n,
            box_len,
            origin,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    /// Coordinate of index 0 along every axis.
    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn is_centered(&self) -> bool {
        self.origin != 0.0
    }

    /// Mesh spacing `h = L/n`.
    pub fn spacing(&self) -> f64 {
        self.box_len / self.n as f64
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major multi-index of flat index `j`; unused trailing axes are 0.
    pub fn multi_index(&self, j: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rest = j;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Flat index of `j + offset` with periodic wrap-around.
    pub fn shifted_index(&self, j: usize, offset: &[isize]) -> usize {
        let idx = self.multi_index(j);
        let n = self.n as isize;
        let mut flat = 0usize;
        for axis in 0..self.dim {
            let i = (idx[axis] as isize + offset[axis]).rem_euclid(n) as usize;
            flat = flat * self.n + i;
        }
        flat
    }

    /// Physical coordinates `x_j = origin + j·h`; unused trailing axes are 0.
    pub fn coordinates(&self, j: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(j);
        let h = self.spacing();
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.origin + idx[axis] as f64 * h;
        }
        x
    }

    /// Signed wavenumber for FFT-ordered index `p` along one axis.
    pub fn wavenumber(&self, p: usize) -> i64 {
        if p < self.n / 2 {
            p as i64
        } else {
            p as i64 - self.n as i64
        }
    }

    /// Symbol `4π²|k|²/L²` of `-Δ` for every Fourier index, in FFT order.
    pub fn laplacian_symbol(&self) -> Vec<f64> {
        let scale = 4.0 * PI * PI / (self.box_len * self.box_len);
        (0..self.len())
            .map(|p| {
                let idx = self.multi_index(p);
                let k2: i64 = idx[..self.dim]
                    .iter()
                    .map(|&i| {
                        let k = self.wavenumber(i);
                        k * k
                    })
                    .sum();
                scale * k2 as f64
            })
            .collect()
    }

    /// Index of the point `-x_j` on a centered grid (`j → n - j` per axis).
    pub fn reflected_index(&self, j: usize) -> usize {
        let idx = self.multi_index(j);
        let mut out = [0; MAX_DIM];
        for axis in 0..self.dim {
            out[axis] = (self.n - idx[axis]) % self.n;
        }
        self.flat_index(&out)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}^{} points on [{}, {})^{}",
            self.n,
            self.dim,
            self.origin,
            self.origin + self.box_len,
            self.dim
        )
    }
}

/// Real-valued grid function stored row-major over the grid index set.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Wraps `values`, checking length and finiteness.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    /// Samples `f` at every grid point, in flat-index order.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|j| f(&grid.coordinates(j)[..grid.dim()])).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self - factor * other`.
    pub fn minus_scaled(&self, factor: f64, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - factor * b)
                .collect(),
        })
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        self.grid.ensure_matches(&other.grid)
    }
}

impl Grid {
    pub(crate) fn ensure_matches(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }
}

/// Power `∫|u|² dx`, evaluated with the periodic trapezoidal rule.
pub fn power(f: &Field) -> f64 {
    f.grid.cell_volume() * f.values.iter().map(|v| v * v).sum::<f64>()
}

/// Discrete `L²` inner product `h^d Σ_j f_j g_j`.
pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    f.ensure_same_grid(g)?;
    Ok(f.grid.cell_volume() * f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>())
}

/// Participation ratio `P² / ∫u⁴`, a measure of the area a profile occupies.
pub fn participation_ratio(f: &Field) -> f64 {
    let p = power(f);
    let quartic = f.grid.cell_volume() * f.values.iter().map(|v| v.powi(4)).sum::<f64>();
    if quartic == 0.0 {
        0.0
    } else {
        p * p / quartic
    }
}

/// FFT plans for one grid plus the `-Δ` symbol.
///
/// Cheap to clone; clones share the plans.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    laplacian: Arc<[f64]>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
            laplacian: grid.laplacian_symbol().into(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `4π²|k|²/L²` in FFT order.
    pub fn laplacian_symbol(&self) -> &[f64] {
        &self.laplacian
    }

    /// Forward transform `(F f)_k = n^{-d} Σ_j e^{-2πi k·j/n} f_j`.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Inverse transform `(F^{-1} g)_j = Σ_k e^{2πi j·k/n} g_k`, in place.
    pub fn inverse_in_place(&self, coeffs: &mut [Complex64]) {
        self.transform(coeffs, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        let d = self.grid.dim();
        debug_assert_eq!(data.len(), self.grid.len());
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // Last axis is contiguous: one batched call covers every line.
        fft.process_with_scratch(data, &mut scratch);
        let mut lines = Vec::new();
        for axis in (0..d.saturating_sub(1)).rev() {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            lines.resize(block, Complex64::default());
            for base in (0..data.len()).step_by(block) {
                for t in 0..n {
                    for line in 0..stride {
                        lines[line * n + t] = data[base + t * stride + line];
                    }
                }
                fft.process_with_scratch(&mut lines, &mut scratch);
                for t in 0..n {
                    for line in 0..stride {
                        data[base + t * stride + line] = lines[line * n + t];
                    }
                }
            }
        }
    }

    /// Applies the Fourier multiplier `symbol` (FFT order) to a real vector,
    /// returning the real part together with the relative imaginary residue
    /// that was discarded.
    pub fn apply_symbol_with_residue(&self, f: &[f64], symbol: &[f64]) -> (Vec<f64>, f64) {
        let mut coeffs = self.forward(f);
        coeffs.iter_mut().zip(symbol).for_each(|(c, s)| *c *= *s);
        self.inverse_in_place(&mut coeffs);
        let mut re_max = 0.0f64;
        let mut im_max = 0.0f64;
        let out = coeffs
            .iter()
            .map(|c| {
                re_max = re_max.max(c.re.abs());
                im_max = im_max.max(c.im.abs());
                c.re
            })
            .collect();
        let residue = if re_max > 0.0 { im_max / re_max } else { im_max };
        (out, residue)
    }

    pub fn apply_symbol(&self, f: &[f64], symbol: &[f64]) -> Vec<f64> {
        let (out, residue) = self.apply_symbol_with_residue(f, symbol);
        debug_assert!(
            residue <= REALNESS_TOLERANCE,
            "imaginary residue {residue:e} after a real spectral operation"
        );
        out
    }

    /// `-Δf` computed as `F^{-1} diag(4π²|k|²/L²) F f`.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.grid.ensure_matches(f.grid())?;
        let values = self.apply_symbol(f.values(), &self.laplacian);
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    /// `-Δ` on a raw slice already known to live on this grid.
    pub(crate) fn laplacian_slice(&self, f: &[f64]) -> Vec<f64> {
        self.apply_symbol(f, &self.laplacian)
    }
}

/// Inverse of the constant-coefficient operator `c_K(-Δ) + (l - λ + δ)`.
///
/// `G` acts as a periodic convolution: its matrix entries are
/// `G(a, b) = g(a - b)` with `g` stored in [`GreenKernel::kernel`].
#[derive(Clone, Debug)]
pub struct GreenKernel {
    spectral: Spectral,
    kinetic_factor: f64,
    l: f64,
    lambda: f64,
    shift: f64,
    symbol: Vec<f64>,
    kernel: Field,
}

impl GreenKernel {
    /// Builds `G` for mean potential `l` and eigenvalue `lambda`. If some
    /// denominator `c_K·4π²|k|²/L² + l - λ` falls below the singular floor
    /// `1e-6·max(1, |l-λ|)`, a shift `δ` of magnitude `1e-3·(1+|λ|)` carrying
    /// the sign of `l - λ` is added; callers fold `-δ` into their diagonal.
    pub fn new(spectral: &Spectral, kinetic_factor: f64, l: f64, lambda: f64) -> Result<Self> {
        if !(l.is_finite() && lambda.is_finite() && kinetic_factor.is_finite()) {
            return Err(Error::NonFinite("Green kernel parameters"));
        }
        if kinetic_factor <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "kinetic factor must be positive, got {kinetic_factor}"
            )));
        }
        let base = l - lambda;
        let floor = 1e-6 * base.abs().max(1.0);
        let step = 1e-3 * (1.0 + lambda.abs()) * if base < 0.0 { -1.0 } else { 1.0 };
        let lap = spectral.laplacian_symbol();
        let min_denominator = |shift: f64| {
            lap.iter()
                .fold(f64::INFINITY, |m, &s| m.min((kinetic_factor * s + base + shift).abs()))
        };
        let mut shift = 0.0;
        while min_denominator(shift) < floor {
            shift += step;
        }
        if shift != 0.0 {
            log::debug!("Green kernel near-singular at l-λ = {base}; shifted by {shift:e}");
        }
        let symbol: Vec<f64> = lap.iter().map(|&s| 1.0 / (kinetic_factor * s + base + shift)).collect();
        // g(m) = n^{-d} Σ_k symbol(k) e^{2πi k·m/n}
        let mut coeffs: Vec<Complex64> = symbol.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        spectral.inverse_in_place(&mut coeffs);
        let scale = 1.0 / spectral.grid().len() as f64;
        let kernel = Field {
            grid: *spectral.grid(),
            values: coeffs.iter().map(|c| c.re * scale).collect(),
        };
        Ok(Self {
            spectral: spectral.clone(),
            kinetic_factor,
            l,
            lambda,
            shift,
            symbol,
            kernel,
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    pub fn kinetic_factor(&self) -> f64 {
        self.kinetic_factor
    }

    /// Spatial average of the linearized potential this kernel was built for.
    pub fn mean_potential(&self) -> f64 {
        self.l
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Shift `δ` added to the constant part (0 when none was needed).
    pub fn shift_applied(&self) -> f64 {
        self.shift
    }

    /// The constant `l - λ + δ` that `G` inverts alongside `c_K(-Δ)`.
    pub fn constant(&self) -> f64 {
        self.l - self.lambda + self.shift
    }

    /// `1/(c_K·4π²|k|²/L² + l - λ + δ)` in FFT order.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Real-space kernel `g` with `G(a, b) = g(a - b)`.
    pub fn kernel(&self) -> &Field {
        &self.kernel
    }

    /// `g(m)` for a lattice offset `m`, periodically wrapped.
    pub fn kernel_at(&self, offset: &[isize]) -> f64 {
        self.kernel.values[self.grid().shifted_index(0, offset)]
    }

    /// `G r`.
    pub fn apply(&self, r: &Field) -> Result<Field> {
        self.grid().ensure_matches(r.grid())?;
        Ok(Field {
            grid: *self.grid(),
            values: self.apply_slice(r.values()),
        })
    }

    pub(crate) fn apply_slice(&self, r: &[f64]) -> Vec<f64> {
        self.spectral.apply_symbol(r, &self.symbol)
    }

    /// `(c_K(-Δ) + l - λ + δ) w`, the operator `G` inverts.
    pub fn apply_inverse(&self, w: &Field) -> Result<Field> {
        let lap = self.spectral.laplacian(w)?;
        let c = self.constant();
        Ok(Field {
            grid: *self.grid(),
            values: lap
                .values
                .iter()
                .zip(&w.values)
                .map(|(a, b)| self.kinetic_factor * a + c * b)
                .collect(),
        })
    }
}
