//! Periodic 1-D grids, sampled fields, quadrature and finite differences.
//!
//! Everything downstream works on a uniform periodic grid `q_i = -L/2 + i*dq`.
//! Quadrature is the periodic rectangle rule, which coincides with the
//! trapezoid rule on a circle and is spectrally accurate for smooth periodic
//! integrands. Derivatives are central differences (4th order by default).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Smallest grid accepted by [`make_grid`].
pub const MIN_POINTS: usize = 8;

/// A Gaussian must span at least this many grid spacings per standard deviation.
pub const MIN_POINTS_PER_SIGMA: f64 = 4.0;

/// Largest density value tolerated at the domain boundary.
pub const BOUNDARY_TAIL: f64 = 1e-12;

/// Central-difference stencil used by [`differentiate`] and the evolution engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StencilOrder {
    /// Three-point stencil, truncation error O(dq^2).
    #[serde(rename = "2")]
    Second,
    /// Five-point stencil, truncation error O(dq^4).
    #[default]
    #[serde(rename = "4")]
    Fourth,
}

impl StencilOrder {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            2 => Ok(StencilOrder::Second),
            4 => Ok(StencilOrder::Fourth),
            other => Err(invalid("stencil_order", format!("{other} is not 2 or 4"))),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }

    /// Number of neighbours the stencil reaches on each side.
    pub fn half_width(self) -> usize {
        match self {
            StencilOrder::Second => 1,
            StencilOrder::Fourth => 2,
        }
    }
}

/// Uniform periodic grid on `[-L/2, L/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    length: f64,
    points: usize,
    spacing: f64,
    stencil: StencilOrder,
}

/// Builds a grid of `points` samples over a period of `length`.
pub fn make_grid(length: f64, points: usize) -> Result<Grid1D> {
    Grid1D::new(length, points)
}

impl Grid1D {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        if points < MIN_POINTS || !points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "point count must be even and at least {MIN_POINTS}, got {points}"
            )));
        }
        Ok(Self {
            length,
            points,
            spacing: length / points as f64,
            stencil: StencilOrder::Fourth,
        })
    }

    pub fn with_stencil(mut self, stencil: StencilOrder) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn stencil(&self) -> StencilOrder {
        self.stencil
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coordinate(i)).collect()
    }

    /// Fundamental wavenumber 2*pi/L; grid-commensurate waves are multiples of it.
    pub fn fundamental_wavenumber(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Same sampling, ignoring the stencil choice.
    pub fn same_sampling(&self, other: &Grid1D) -> bool {
        self.points == other.points && self.length == other.length
    }

    /// Rectangle-rule quadrature of raw samples.
    pub fn sum(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.spacing
    }

    pub(crate) fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.points as isize) as usize
    }

    pub(crate) fn first_derivative_into(&self, f: &[f64], out: &mut [f64]) {
        stencil_d1(self.stencil, self.spacing, f, out, |a, b| a - b);
    }

    pub(crate) fn second_derivative_into(&self, f: &[f64], out: &mut [f64]) {
        stencil_d2(self.stencil, self.spacing, f, out, |a, b| a - b);
    }

    /// First derivative of a quantity defined modulo `modulus`; every stencil
    /// difference is folded into `(-modulus/2, modulus/2]`.
    pub(crate) fn wrapped_first_derivative_into(&self, f: &[f64], modulus: f64, out: &mut [f64]) {
        stencil_d1(self.stencil, self.spacing, f, out, |a, b| fold(a - b, modulus));
    }

    pub(crate) fn wrapped_second_derivative_into(&self, f: &[f64], modulus: f64, out: &mut [f64]) {
        stencil_d2(self.stencil, self.spacing, f, out, |a, b| fold(a - b, modulus));
    }

    pub(crate) fn first_derivative(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.first_derivative_into(f, &mut out);
        out
    }

    pub(crate) fn second_derivative(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.second_derivative_into(f, &mut out);
        out
    }
}

/// Folds `x` into `(-m/2, m/2]`.
pub(crate) fn fold(x: f64, modulus: f64) -> f64 {
    let r = x - modulus * (x / modulus).round();
    if r <= -0.5 * modulus {
        r + modulus
    } else {
        r
    }
}

#[inline]
fn neighbours(i: usize, n: usize) -> (usize, usize, usize, usize) {
    let ip1 = if i + 1 == n { 0 } else { i + 1 };
    let ip2 = if ip1 + 1 == n { 0 } else { ip1 + 1 };
    let im1 = if i == 0 { n - 1 } else { i - 1 };
    let im2 = if im1 == 0 { n - 1 } else { im1 - 1 };
    (im2, im1, ip1, ip2)
}

fn stencil_d1(
    order: StencilOrder,
    dq: f64,
    f: &[f64],
    out: &mut [f64],
    diff: impl Fn(f64, f64) -> f64,
) {
    let n = f.len();
    match order {
        StencilOrder::Second => {
            let c = 1.0 / (2.0 * dq);
            for i in 0..n {
                let (_, im1, ip1, _) = neighbours(i, n);
                out[i] = c * (diff(f[ip1], f[i]) - diff(f[im1], f[i]));
            }
        }
        StencilOrder::Fourth => {
            let c = 1.0 / (12.0 * dq);
            for i in 0..n {
                let (im2, im1, ip1, ip2) = neighbours(i, n);
                let d1 = diff(f[ip1], f[i]) - diff(f[im1], f[i]);
                let d2 = diff(f[ip2], f[i]) - diff(f[im2], f[i]);
                out[i] = c * (8.0 * d1 - d2);
            }
        }
    }
}

fn stencil_d2(
    order: StencilOrder,
    dq: f64,
    f: &[f64],
    out: &mut [f64],
    diff: impl Fn(f64, f64) -> f64,
) {
    let n = f.len();
    match order {
        StencilOrder::Second => {
            let c = 1.0 / (dq * dq);
            for i in 0..n {
                let (_, im1, ip1, _) = neighbours(i, n);
                out[i] = c * (diff(f[ip1], f[i]) + diff(f[im1], f[i]));
            }
        }
        StencilOrder::Fourth => {
            let c = 1.0 / (12.0 * dq * dq);
            for i in 0..n {
                let (im2, im1, ip1, ip2) = neighbours(i, n);
                let near = diff(f[ip1], f[i]) + diff(f[im1], f[i]);
                let far = diff(f[ip2], f[i]) + diff(f[im2], f[i]);
                out[i] = c * (16.0 * near - far);
            }
        }
    }
}

/// Real samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl SampledField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        check_samples(&grid, &values)?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.coordinates().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn check_samples(grid: &Grid1D, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

/// Periodic rectangle-rule quadrature `sum f_i * dq`.
pub fn integrate(f: &SampledField) -> Result<f64> {
    check_samples(&f.grid, &f.values)?;
    Ok(f.grid.sum(&f.values))
}

/// Periodic central difference using the grid's stencil.
pub fn differentiate(f: &SampledField) -> SampledField {
    SampledField {
        grid: f.grid,
        values: f.grid.first_derivative(&f.values),
    }
}

/// Probability density sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl DensityField {
    /// Validates non-negativity and rescales so the quadrature is exactly one.
    pub fn normalized(grid: Grid1D, mut values: Vec<f64>) -> Result<Self> {
        check_samples(&grid, &values)?;
        if let Some(i) = values.iter().position(|&v| v < 0.0) {
            return Err(invalid(
                "density",
                format!("negative value {:e} at index {i}", values[i]),
            ));
        }
        let total = grid.sum(&values);
        if total <= 0.0 {
            return Err(invalid("density", "total probability is zero"));
        }
        values.iter_mut().for_each(|v| *v /= total);
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.coordinates().into_iter().map(f).collect();
        Self::normalized(grid, values)
    }

    /// Wraps evolved samples without rescaling; normalization is a diagnostic there.
    pub(crate) fn from_evolved(grid: Grid1D, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.grid.sum(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Expectation of `g(q)` under the density.
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> f64 {
        let dq = self.grid.spacing();
        self.values
            .iter()
            .enumerate()
            .map(|(i, p)| p * g(self.grid.coordinate(i)))
            .sum::<f64>()
            * dq
    }

    /// Shifts samples by a whole number of cells (periodically).
    pub fn shifted(&self, cells: isize) -> Self {
        let n = self.values.len();
        let values = (0..n)
            .map(|i| self.values[self.grid.wrap(i as isize - cells)])
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }
}

/// Gaussian density with standard deviation `s`, renormalized on the grid.
pub fn gaussian_density(grid: &Grid1D, center: f64, s: f64) -> Result<DensityField> {
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid("s", format!("width must be positive, got {s}")));
    }
    if !center.is_finite() {
        return Err(invalid("center", "must be finite"));
    }
    let min_width = MIN_POINTS_PER_SIGMA * grid.spacing();
    if s < min_width {
        return Err(Error::Unresolved(format!(
            "width s = {s} is below {MIN_POINTS_PER_SIGMA}*dq = {min_width}"
        )));
    }
    let peak = 1.0 / ((2.0 * PI).sqrt() * s);
    let half = 0.5 * grid.length();
    let tail = [center - (-half), half - center]
        .into_iter()
        .map(|d| peak * (-(d * d) / (2.0 * s * s)).exp())
        .fold(0.0, f64::max);
    if tail >= BOUNDARY_TAIL || center.abs() >= half {
        return Err(Error::BoundaryTruncated { value: tail });
    }
    DensityField::from_fn(*grid, |q| {
        let z = (q - center) / s;
        (-0.5 * z * z).exp()
    })
}

/// Mean and variance of position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

pub fn moments(p: &DensityField) -> Moments {
    let norm = p.norm();
    let mean = p.expectation(|q| q) / norm;
    let variance = p.expectation(|q| (q - mean) * (q - mean)) / norm;
    Moments { mean, variance }
}

/// Hamilton-Jacobi function S sampled on a grid, in action units.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl PhaseField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        check_samples(&grid, &values)?;
        Ok(Self { grid, values })
    }

    pub fn zero(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.coordinates().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    /// `S = p0 * q`. On a periodic grid `p0` should be a multiple of `h/L`.
    pub fn linear(grid: Grid1D, p0: f64) -> Result<Self> {
        Self::from_fn(grid, |q| p0 * q)
    }

    /// `S = alpha * q^2 / 2`.
    pub fn quadratic(grid: Grid1D, alpha: f64) -> Result<Self> {
        Self::from_fn(grid, |q| 0.5 * alpha * q * q)
    }

    pub(crate) fn from_evolved(grid: Grid1D, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `S'` with stencil differences taken modulo `h`, so a linear phase
    /// `p0*q` with `p0*L` a multiple of `h` is smooth across the seam.
    pub fn gradient(&self, h: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        self.grid
            .wrapped_first_derivative_into(&self.values, h, &mut out);
        out
    }

    pub fn shifted(&self, cells: isize) -> Self {
        let n = self.values.len();
        let values = (0..n)
            .map(|i| self.values[self.grid.wrap(i as isize - cells)])
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }
}

/// Physical constants; `h` is always derived from `hbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub hbar: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self { hbar: 1.0 }
    }
}

impl Constants {
    pub fn new(hbar: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(invalid("hbar", format!("must be positive, got {hbar}")));
        }
        Ok(Self { hbar })
    }

    pub fn h(&self) -> f64 {
        2.0 * PI * self.hbar
    }
}

/// Density, phase, mass and time of a statistical ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub(crate) density: DensityField,
    pub(crate) phase: PhaseField,
    pub(crate) mass: f64,
    pub(crate) time: f64,
    pub(crate) constants: Constants,
}

impl EnsembleState {
    pub fn new(
        density: DensityField,
        phase: PhaseField,
        mass: f64,
        constants: Constants,
    ) -> Result<Self> {
        if !density.grid().same_sampling(phase.grid()) {
            return Err(Error::GridMismatch);
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(invalid("mass", format!("must be positive, got {mass}")));
        }
        Constants::new(constants.hbar)?;
        Ok(Self {
            density,
            phase,
            mass,
            time: 0.0,
            constants,
        })
    }

    pub fn at_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn density(&self) -> &DensityField {
        &self.density
    }

    pub fn phase(&self) -> &PhaseField {
        &self.phase
    }

    pub fn grid(&self) -> &Grid1D {
        self.density.grid()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    /// `S'` of the phase field, wrapped modulo `h`.
    pub fn phase_gradient(&self) -> Vec<f64> {
        self.phase.gradient(self.constants.h())
    }

    /// Translates density and phase by a whole number of cells.
    pub fn shifted(&self, cells: isize) -> Self {
        Self {
            density: self.density.shifted(cells),
            phase: self.phase.shifted(cells),
            ..self.clone()
        }
    }
}
