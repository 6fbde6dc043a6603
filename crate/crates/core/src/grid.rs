//! Cell-centred grid geometry, the image container and Riemann-sum quadrature.
//!
//! Cell `(i, j)` (1-based) of a grid with side `m`, mesh `h` and downsample rate
//! `s` sits at `((i - (m+1)/2)·s·h, (j - (m+1)/2)·s·h)`. The row index maps to
//! the first coordinate and the column index to the second, so a rotation by a
//! multiple of 90° permutes cells exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of a square, cell-centred sampling grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    mesh_size: f64,
    side: usize,
    downsample: usize,
}

impl GridSpec {
    pub fn new(mesh_size: f64, side: usize) -> Result<Self> {
        Self::with_downsample(mesh_size, side, 1)
    }

    pub fn with_downsample(mesh_size: f64, side: usize, downsample: usize) -> Result<Self> {
        if !(mesh_size.is_finite() && mesh_size > 0.0) {
            return Err(Error::domain(format!("mesh size must be positive, got {mesh_size}")));
        }
        if side == 0 {
            return Err(Error::domain("grid side must be at least 1"));
        }
        if downsample == 0 {
            return Err(Error::domain("downsample rate must be at least 1"));
        }
        Ok(GridSpec {
            mesh_size,
            side,
            downsample,
        })
    }

    /// Grid of unit physical extent: `h = 1/m`.
    pub fn unit(side: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::domain("grid side must be at least 1"));
        }
        Self::new(1.0 / side as f64, side)
    }

    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn downsample(&self) -> usize {
        self.downsample
    }

    /// Distance between neighbouring cell centres, `s·h`.
    pub fn spacing(&self) -> f64 {
        self.mesh_size * self.downsample as f64
    }

    /// Area of one cell, the Riemann-sum weight.
    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// Coordinate of the 1-based cell `(i, j)`.
    pub fn coord(&self, i: usize, j: usize) -> Result<[f64; 2]> {
        if i == 0 || j == 0 || i > self.side || j > self.side {
            return Err(Error::domain(format!(
                "cell ({i}, {j}) outside 1..={}",
                self.side
            )));
        }
        Ok(self.coord0(i - 1, j - 1))
    }

    /// Coordinate of the 0-based cell `(i, j)`; no bounds check.
    #[inline]
    pub fn coord0(&self, i: usize, j: usize) -> [f64; 2] {
        [self.axis(i), self.axis(j)]
    }

    #[inline]
    pub(crate) fn axis(&self, i: usize) -> f64 {
        let centre = (self.side as f64 + 1.0) / 2.0;
        ((i + 1) as f64 - centre) * self.spacing()
    }

    /// Fractional 0-based index of a coordinate along one axis.
    #[inline]
    pub(crate) fn fractional_index(&self, x: f64) -> f64 {
        x / self.spacing() + (self.side as f64 - 1.0) / 2.0
    }

    /// Radius of the disk inscribed in the hull of cell centres.
    pub fn inscribed_radius(&self) -> f64 {
        (self.side as f64 - 1.0) / 2.0 * self.spacing()
    }

    /// Same physical extent sampled with `side` cells.
    pub fn refined(&self, side: usize) -> Result<Self> {
        let extent = self.side as f64 * self.spacing();
        Self::new(extent / side as f64, side)
    }
}

/// Radius of compact support, used by the discretization bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSpec {
    radius: f64,
}

impl SupportSpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::domain(format!("support radius must be positive, got {radius}")));
        }
        Ok(SupportSpec { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Smooth radial cut-off: 1 up to `0.75·radius`, raised-cosine roll-off to 0 at `radius`.
#[inline]
pub fn support_window(r: f64, radius: f64) -> f64 {
    let inner = 0.75 * radius;
    if r <= inner {
        1.0
    } else if r >= radius {
        0.0
    } else {
        let t = (r - inner) / (radius - inner);
        0.5 * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Square grayscale raster bound to a [`GridSpec`], stored row-major in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Image {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let n = grid.side() * grid.side();
        if values.len() != n {
            return Err(Error::domain(format!(
                "expected {n} values for a {0}x{0} grid, got {1}",
                grid.side(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value at flat index {pos}")));
        }
        Ok(Image { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Image {
            values: vec![0.0; grid.side() * grid.side()],
            grid,
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Image {
            values: vec![value; grid.side() * grid.side()],
            grid,
        }
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let m = grid.side();
        let mut values = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                values.push(f(grid.coord0(i, j)));
            }
        }
        Image { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.side() * grid.side());
        Image { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn side(&self) -> usize {
        self.grid.side()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.side() + j]
    }

    /// Value at 0-based `(i, j)`, or 0 outside the grid.
    #[inline]
    pub fn get_or_zero(&self, i: isize, j: isize) -> f64 {
        let m = self.grid.side() as isize;
        if i < 0 || j < 0 || i >= m || j >= m {
            0.0
        } else {
            self.values[(i * m + j) as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let m = self.grid.side();
        self.values[i * m + j] = v;
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Result<Self> {
        if grid.side() != self.grid.side() {
            return Err(Error::domain("replacement grid must keep the side length"));
        }
        self.grid = grid;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a·self + b·other`, cell by cell.
    pub fn lincomb(&self, a: f64, other: &Image, b: f64) -> Result<Image> {
        if other.side() != self.side() {
            return Err(Error::domain("images differ in size"));
        }
        Ok(Image {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn sum_sq(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for v in &self.values {
            acc.add(v * v);
        }
        acc.value()
    }

    /// Squared Frobenius norm of `self - other`.
    pub fn dist_sq(&self, other: &Image) -> f64 {
        let mut acc = CompensatedSum::default();
        for (x, y) in self.values.iter().zip(&other.values) {
            acc.add((x - y) * (x - y));
        }
        acc.value()
    }

    pub fn mean(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for v in &self.values {
            acc.add(*v);
        }
        acc.value() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let mut acc = CompensatedSum::default();
        for v in &self.values {
            acc.add((v - mu) * (v - mu));
        }
        acc.value() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Array rotation by 90° matching `act(·, rotation(π/2))` on odd grids.
    pub fn rot90(&self) -> Image {
        let m = self.side();
        let mut out = Image::zeros(self.grid);
        // rotation(π/2) maps (x1, x2) to (x2, -x1); output(i, j) = input(A⁻¹ x_ij).
        for i in 0..m {
            for j in 0..m {
                out.set(i, j, self.get(m - 1 - j, i));
            }
        }
        out
    }
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `h²·Σ f(x_ij)`, summed row-major with compensation.
pub fn riemann_integral(f: &Image) -> f64 {
    let acc: CompensatedSum = f.values().iter().copied().collect();
    acc.value() * f.grid().cell_area()
}

/// Axis-aligned or rotated Gaussian profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Angle θ such that the profile equals the axis-aligned one acted on by
    /// `rotation(θ)`.
    pub rotation: f64,
    pub center: [f64; 2],
    pub amplitude: f64,
}

impl Gaussian {
    pub fn isotropic(sigma: f64) -> Self {
        Self::anisotropic(sigma, sigma, 0.0)
    }

    pub fn anisotropic(sigma_x: f64, sigma_y: f64, rotation: f64) -> Self {
        Gaussian {
            sigma_x,
            sigma_y,
            rotation,
            center: [0.0, 0.0],
            amplitude: 1.0,
        }
    }

    pub fn centered_at(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let (s, c) = self.rotation.sin_cos();
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let u = c * dx - s * dy;
        let v = s * dx + c * dy;
        self.amplitude
            * (-(u * u) / (2.0 * self.sigma_x * self.sigma_x)
                - (v * v) / (2.0 * self.sigma_y * self.sigma_y))
                .exp()
    }
}

/// Analytic test functions for the bench suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analytic {
    Gaussian(Gaussian),
    Constant(f64),
    /// Smooth bump `exp(1 - 1/(1 - (r/width)²))` with peak 1, zero beyond `width`.
    Bump { width: f64, center: [f64; 2] },
    /// `cos(2π·frequency·‖x‖)`.
    RadialCosine { frequency: f64 },
    Sum(Vec<Analytic>),
}

impl Analytic {
    pub fn gaussian(sigma_x: f64, sigma_y: f64, rotation: f64) -> Self {
        Analytic::Gaussian(Gaussian::anisotropic(sigma_x, sigma_y, rotation))
    }

    fn validate(&self) -> Result<()> {
        match self {
            Analytic::Gaussian(g) => {
                if !(g.sigma_x > 0.0 && g.sigma_y > 0.0) {
                    return Err(Error::domain(format!(
                        "gaussian widths must be positive, got ({}, {})",
                        g.sigma_x, g.sigma_y
                    )));
                }
            }
            Analytic::Bump { width, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::domain(format!("bump width must be positive, got {width}")));
                }
            }
            Analytic::Sum(parts) => {
                for p in parts {
                    p.validate()?;
                }
            }
            Analytic::Constant(_) | Analytic::RadialCosine { .. } => {}
        }
        Ok(())
    }

    /// Value of the unwindowed function.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            Analytic::Gaussian(g) => g.eval(x),
            Analytic::Constant(c) => *c,
            Analytic::Bump { width, center } => {
                let r2 = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (width * width);
                if r2 >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
            Analytic::RadialCosine { frequency } => {
                (2.0 * std::f64::consts::PI * frequency * x[0].hypot(x[1])).cos()
            }
            Analytic::Sum(parts) => parts.iter().map(|p| p.eval(x)).sum(),
        }
    }
}

/// Samples `spec` on `grid`, windowed to the disk inscribed in the cell-centre hull.
///
/// Constants are returned unwindowed.
pub fn sample_function(spec: &Analytic, grid: &GridSpec) -> Result<Image> {
    if let Analytic::Constant(c) = spec {
        return Ok(Image::constant(*grid, *c));
    }
    let support = SupportSpec::new(grid.inscribed_radius().max(f64::MIN_POSITIVE))?;
    sample_function_with_support(spec, grid, support)
}

/// Samples `spec` multiplied by [`support_window`] of the given radius.
pub fn sample_function_with_support(
    spec: &Analytic,
    grid: &GridSpec,
    support: SupportSpec,
) -> Result<Image> {
    spec.validate()?;
    let radius = support.radius();
    Ok(Image::from_fn(*grid, |x| {
        let w = support_window(x[0].hypot(x[1]), radius);
        if w == 0.0 {
            0.0
        } else {
            w * spec.eval(x)
        }
    }))
}
