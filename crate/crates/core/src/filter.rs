//! Masked 2D Fourier filter bases and filters steered by arbitrary transforms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::Transform;

/// Frequency cutoff used when enumerating basis modes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cutoff {
    /// `‖(u, v)‖ ≤ (p − 1)/2`.
    #[default]
    Conservative,
    /// `‖(u, v)‖ < p/2`, the largest set that stays alias-free under rotation.
    Nyquist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub u: i32,
    pub v: i32,
    pub sine: bool,
}

/// Smooth radial mask: 1 up to `0.75·radius`, raised-cosine roll-off to 0 at `radius`.
#[inline]
pub fn radial_mask(r: f64, radius: f64) -> f64 {
    let start = 0.75 * radius;
    if r <= start {
        1.0
    } else if r >= radius {
        0.0
    } else {
        0.5 * (1.0 + (PI * (r - start) / (radius - start)).cos())
    }
}

/// Fourier modes `cos/sin(2π(u·x₁ + v·x₂)/L)` times [`radial_mask`] of radius `L/2`.
///
/// `L` is the physical extent of the original `p`-cell filter; resampled bases
/// keep `L` and the modes while changing the cell size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBasis {
    size: usize,
    mesh: f64,
    extent: f64,
    cutoff: Cutoff,
    modes: Vec<Mode>,
}

/// Basis with the conservative cutoff.
pub fn make_basis(p: usize, mesh: f64) -> Result<FilterBasis> {
    FilterBasis::new(p, mesh, Cutoff::Conservative)
}

impl FilterBasis {
    pub fn new(p: usize, mesh: f64, cutoff: Cutoff) -> Result<Self> {
        if p < 3 || p % 2 == 0 {
            return Err(Error::domain(format!("filter size must be odd and at least 3, got {p}")));
        }
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::domain(format!("filter mesh must be positive, got {mesh}")));
        }
        let c = ((p - 1) / 2) as i32;
        let admits = |u: i32, v: i32| {
            let n2 = (u * u + v * v) as f64;
            match cutoff {
                Cutoff::Conservative => n2 <= (c * c) as f64,
                Cutoff::Nyquist => 4.0 * n2 < (p * p) as f64,
            }
        };
        let mut modes = vec![Mode {
            u: 0,
            v: 0,
            sine: false,
        }];
        for u in 0..=c {
            for v in -c..=c {
                // One representative per {(u, v), (−u, −v)} pair.
                if (u == 0 && v <= 0) || !admits(u, v) {
                    continue;
                }
                modes.push(Mode { u, v, sine: false });
                modes.push(Mode { u, v, sine: true });
            }
        }
        Ok(FilterBasis {
            size: p,
            mesh,
            extent: p as f64 * mesh,
            cutoff,
            modes,
        })
    }

    /// Same continuous functions sampled with cell size `mesh`; the size grows
    /// to the smallest odd count covering the mask disk.
    pub fn resampled(&self, mesh: f64) -> Result<Self> {
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::domain(format!("filter mesh must be positive, got {mesh}")));
        }
        let half = covering_half_width(self.extent / 2.0, mesh);
        Ok(FilterBasis {
            size: 2 * half + 1,
            mesh,
            ..self.clone()
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Physical side `L` of the original filter window.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn radius(&self) -> f64 {
        self.extent / 2.0
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn count(&self) -> usize {
        self.modes.len()
    }

    /// Value of basis function `k` at physical point `x`.
    pub fn eval(&self, k: usize, x: [f64; 2]) -> f64 {
        let m = radial_mask(x[0].hypot(x[1]), self.radius());
        if m == 0.0 {
            return 0.0;
        }
        m * self.trig(&self.modes[k], x)
    }

    #[inline]
    fn trig(&self, mode: &Mode, x: [f64; 2]) -> f64 {
        let phase = 2.0 * PI * (mode.u as f64 * x[0] + mode.v as f64 * x[1]) / self.extent;
        if mode.sine {
            phase.sin()
        } else {
            phase.cos()
        }
    }

    /// All basis values at `x`, written into `out`.
    fn eval_all(&self, x: [f64; 2], out: &mut [f64]) {
        let m = radial_mask(x[0].hypot(x[1]), self.radius());
        for (o, mode) in out.iter_mut().zip(&self.modes) {
            *o = if m == 0.0 { 0.0 } else { m * self.trig(mode, x) };
        }
    }

    /// Basis functions sampled at the pulled-back cell centres `A⁻¹·t_uv` of a
    /// `(2·half + 1)²` filter grid; shape `count × cells`.
    pub fn sample(&self, a: &Transform, half: usize) -> Vec<Vec<f64>> {
        let n = 2 * half + 1;
        let inv = a.inverse();
        let k = self.count();
        let mut out = vec![vec![0.0; n * n]; k];
        let mut buf = vec![0.0; k];
        for r in 0..n {
            for c in 0..n {
                let t = [
                    (r as f64 - half as f64) * self.mesh,
                    (c as f64 - half as f64) * self.mesh,
                ];
                let x = if a.is_identity() { t } else { inv.apply(t) };
                self.eval_all(x, &mut buf);
                for (row, &v) in out.iter_mut().zip(&buf) {
                    row[r * n + c] = v;
                }
            }
        }
        out
    }

    /// Basis functions pulled back by `A` and paired with the bilinear hat
    /// function of every cell of a `(2·half + 1)²` filter grid, integrated
    /// with `sub × sub` midpoint samples per cell.
    ///
    /// Correlating an image with the result equals correlating its bilinear
    /// interpolant with the continuous pulled-back function, so constant and
    /// linear parts of the image are handled exactly.
    pub fn sample_tent(&self, a: &Transform, half: usize, sub: usize) -> Vec<Vec<f64>> {
        let n = 2 * half + 1;
        let inv = a.inverse();
        let k = self.count();
        let mut out = vec![vec![0.0; n * n]; k];
        let mut buf = vec![0.0; k];
        let weight = 1.0 / (sub * sub) as f64;
        // Samples cover the cells whose hats stay inside the output grid.
        let inner = half as isize - 1;
        let fine = |cell: isize, s: usize| (cell as f64 - 0.5 + (s as f64 + 0.5) / sub as f64) * self.mesh;
        for r in -inner..=inner {
            for c in -inner..=inner {
                for sa in 0..sub {
                    for sb in 0..sub {
                        let y = [fine(r, sa), fine(c, sb)];
                        self.eval_all(inv.apply(y), &mut buf);
                        if buf.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        let fr = y[0] / self.mesh;
                        let fc = y[1] / self.mesh;
                        let (r0, c0) = (fr.floor(), fc.floor());
                        let (tr, tc) = (fr - r0, fc - c0);
                        let r0 = (r0 as isize + half as isize) as usize;
                        let c0 = (c0 as isize + half as isize) as usize;
                        for (dr, wr) in [(0, 1.0 - tr), (1, tr)] {
                            for (dc, wc) in [(0, 1.0 - tc), (1, tc)] {
                                let w = weight * wr * wc;
                                let q = (r0 + dr) * n + c0 + dc;
                                for (row, &v) in out.iter_mut().zip(&buf) {
                                    row[q] += w * v;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Upper bound on the Hessian operator norm of basis function `k`.
    pub fn second_derivative_bound(&self, k: usize) -> f64 {
        let mode = &self.modes[k];
        let omega = 2.0 * PI * ((mode.u * mode.u + mode.v * mode.v) as f64).sqrt() / self.extent;
        let r = self.radius();
        let dmask = 2.0 * PI / r;
        let d2mask = 8.0 * PI * PI / (r * r);
        omega * omega + 2.0 * omega * dmask + d2mask
    }

    /// Half-width of a filter grid that contains the support of `φ(A⁻¹·)`.
    pub fn covering_half_width(&self, a: &Transform) -> usize {
        covering_half_width(a.operator_norm() * self.radius(), self.mesh)
    }
}

/// Filters steered by `a` in the bilinear-interpolant sense of
/// [`FilterBasis::sample_tent`].
pub fn eval_filters_tent(
    coeffs: &[FilterCoeffs],
    basis: &FilterBasis,
    a: &Transform,
    sub: usize,
) -> Result<Vec<Kernel>> {
    for c in coeffs {
        check_len(c, basis)?;
    }
    if sub == 0 {
        return Err(Error::domain("tent sampling needs at least one sample per axis"));
    }
    // Sample cells reach half a diagonal beyond their centres; hats one cell further.
    let radius = a.operator_norm() * basis.radius() + 0.5 * std::f64::consts::SQRT_2 * basis.mesh();
    let half = covering_half_width(radius, basis.mesh()) + 1;
    let sampled = basis.sample_tent(a, half, sub);
    Ok(coeffs
        .iter()
        .map(|c| combine(c, &sampled, 2 * half + 1, basis.mesh()))
        .collect())
}

/// Largest `c` with `c·mesh < radius`.
fn covering_half_width(radius: f64, mesh: f64) -> usize {
    let ratio = radius / mesh;
    let c = (ratio - 1e-9).ceil() - 1.0;
    c.max(0.0) as usize
}

/// The coefficients `v_k` of one filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilterCoeffs(Vec<f64>);

impl FilterCoeffs {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("filter coefficients must be finite"));
        }
        Ok(FilterCoeffs(values))
    }

    /// Indicator of basis function `k`.
    pub fn one_hot(count: usize, k: usize) -> Self {
        let mut v = vec![0.0; count];
        v[k] = 1.0;
        FilterCoeffs(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Odd-sided square filter on a cell grid, row-major, centre at `(half, half)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    size: usize,
    spacing: f64,
    values: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if size % 2 == 0 {
            return Err(Error::domain(format!("kernel size must be odd, got {size}")));
        }
        if values.len() != size * size {
            return Err(Error::domain(format!(
                "kernel of size {size} needs {} values, got {}",
                size * size,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("kernel values must be finite"));
        }
        Ok(Kernel {
            size,
            spacing,
            values,
        })
    }

    /// Unit impulse of the given size.
    pub fn delta(size: usize, spacing: f64) -> Result<Self> {
        let mut values = vec![0.0; size * size];
        values[size * size / 2] = 1.0;
        Kernel::new(size, spacing, values)
    }

    /// Builds a kernel from nested rows.
    pub fn from_rows(rows: &[&[f64]], spacing: f64) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::domain("kernel rows must form a square"));
        }
        Kernel::new(size, spacing, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn half(&self) -> usize {
        self.size / 2
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.size + c]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Array rotation matching `rotation(π/2)` applied to the filter grid.
    pub fn rot90(&self) -> Kernel {
        let n = self.size;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = self.values[(n - 1 - j) * n + i];
            }
        }
        Kernel {
            size: n,
            spacing: self.spacing,
            values,
        }
    }

    /// Same kernel padded with zeros to half-width `half`.
    pub fn padded(&self, half: usize) -> Kernel {
        let old = self.half();
        if half <= old {
            return self.clone();
        }
        let n = 2 * half + 1;
        let off = half - old;
        let mut values = vec![0.0; n * n];
        for i in 0..self.size {
            for j in 0..self.size {
                values[(i + off) * n + j + off] = self.get(i, j);
            }
        }
        Kernel {
            size: n,
            spacing: self.spacing,
            values,
        }
    }

    /// Non-zero taps as `(row offset, column offset, weight)` relative to the centre.
    pub fn taps(&self) -> Vec<(isize, isize, f64)> {
        let h = self.half() as isize;
        let n = self.size;
        (0..n * n)
            .filter(|&k| self.values[k] != 0.0)
            .map(|k| ((k / n) as isize - h, (k % n) as isize - h, self.values[k]))
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Kernel) -> f64 {
        let h = self.half().max(other.half());
        let a = self.padded(h);
        let b = other.padded(h);
        a.values
            .iter()
            .zip(&b.values)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

fn combine(coeffs: &FilterCoeffs, sampled: &[Vec<f64>], size: usize, spacing: f64) -> Kernel {
    let mut values = vec![0.0; size * size];
    for (&c, row) in coeffs.values().iter().zip(sampled) {
        if c == 0.0 {
            continue;
        }
        for (v, b) in values.iter_mut().zip(row) {
            *v += c * b;
        }
    }
    Kernel {
        size,
        spacing,
        values,
    }
}

fn check_len(coeffs: &FilterCoeffs, basis: &FilterBasis) -> Result<()> {
    if coeffs.len() != basis.count() {
        return Err(Error::domain(format!(
            "expected {} filter coefficients, got {}",
            basis.count(),
            coeffs.len()
        )));
    }
    Ok(())
}

/// `filter[u, v] = Σ_k v_k·φ_k(A⁻¹·t_uv)` on the basis's `p × p` grid.
pub fn eval_filter(coeffs: &FilterCoeffs, basis: &FilterBasis, a: &Transform) -> Result<Kernel> {
    check_len(coeffs, basis)?;
    let half = basis.size() / 2;
    let sampled = basis.sample(a, half);
    Ok(combine(coeffs, &sampled, basis.size(), basis.mesh()))
}

/// Like [`eval_filter`], on a grid just large enough for the support of `φ(A⁻¹·)`.
pub fn eval_filter_covering(
    coeffs: &FilterCoeffs,
    basis: &FilterBasis,
    a: &Transform,
) -> Result<Kernel> {
    eval_filters_covering(std::slice::from_ref(coeffs), basis, a).map(|mut v| v.remove(0))
}

/// Several filters steered by the same transform, sharing one basis sampling.
pub fn eval_filters_covering(
    coeffs: &[FilterCoeffs],
    basis: &FilterBasis,
    a: &Transform,
) -> Result<Vec<Kernel>> {
    for c in coeffs {
        check_len(c, basis)?;
    }
    let half = basis.covering_half_width(a);
    let sampled = basis.sample(a, half);
    Ok(coeffs
        .iter()
        .map(|c| combine(c, &sampled, 2 * half + 1, basis.mesh()))
        .collect())
}
