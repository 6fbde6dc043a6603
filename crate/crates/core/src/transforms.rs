//! Rotation, affine and conjugated group-element matrices, and their pull-back
//! action on images.

use std::f64::consts::PI;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Image;

const MIN_ABS_DET: f64 = 1e-9;

/// Offsets closer than this to an integer cell index are snapped onto it, so
/// grid-exact transforms permute cells without interpolation noise.
const SNAP: f64 = 1e-9;

/// Invertible 2×2 real matrix acting on coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    m: [[f64; 2]; 2],
}

impl Transform {
    pub fn new(m: [[f64; 2]; 2]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("transform entries must be finite"));
        }
        let t = Transform { m };
        if t.det().abs() < MIN_ABS_DET {
            return Err(Error::domain(format!(
                "transform is near-singular (det = {:e})",
                t.det()
            )));
        }
        Ok(t)
    }

    pub fn identity() -> Self {
        Transform {
            m: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.m
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Transform {
        let d = self.det();
        Transform {
            m: [
                [self.m[1][1] / d, -self.m[0][1] / d],
                [-self.m[1][0] / d, self.m[0][0] / d],
            ],
        }
    }

    #[inline]
    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * x[0] + self.m[0][1] * x[1],
            self.m[1][0] * x[0] + self.m[1][1] * x[1],
        ]
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let [[a, b], [c, d]] = self.m;
        let s = a * a + b * b + c * c + d * d;
        let det = self.det();
        let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
        ((s + disc) / 2.0).sqrt()
    }

    /// Maximum absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Transform) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn is_identity(&self) -> bool {
        self.m == [[1.0, 0.0], [0.0, 1.0]]
    }
}

impl Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        let a = self.m;
        let b = rhs.m;
        Transform {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
        }
    }
}

/// `[[cos θ, sin θ], [−sin θ, cos θ]]`.
pub fn rotation(theta: f64) -> Transform {
    let (s, c) = theta.sin_cos();
    Transform {
        m: [[c, s], [-s, c]],
    }
}

/// Sample-adaptive parameters `w = [α, s_x, s_y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct AffineParams {
    alpha: f64,
    sx: f64,
    sy: f64,
}

impl AffineParams {
    pub fn new(alpha: f64, sx: f64, sy: f64) -> Result<Self> {
        if !(alpha.is_finite() && sx.is_finite() && sy.is_finite()) {
            return Err(Error::domain("affine parameters must be finite"));
        }
        if sx <= 0.0 || sy <= 0.0 {
            return Err(Error::domain(format!(
                "affine scales must be positive, got ({sx}, {sy})"
            )));
        }
        Ok(AffineParams { alpha, sx, sy })
    }

    /// `[0, 1, 1]`.
    pub fn identity() -> Self {
        AffineParams {
            alpha: 0.0,
            sx: 1.0,
            sy: 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sx(&self) -> f64 {
        self.sx
    }

    pub fn sy(&self) -> f64 {
        self.sy
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.alpha, self.sx, self.sy]
    }
}

impl From<AffineParams> for [f64; 3] {
    fn from(w: AffineParams) -> Self {
        w.to_array()
    }
}

impl TryFrom<[f64; 3]> for AffineParams {
    type Error = Error;

    fn try_from(w: [f64; 3]) -> Result<Self> {
        AffineParams::new(w[0], w[1], w[2])
    }
}

/// `D_w = rotation(α)·diag(s_x, s_y)`.
pub fn affine(w: &AffineParams) -> Result<Transform> {
    let w = AffineParams::new(w.alpha, w.sx, w.sy)?;
    let (s, c) = w.alpha.sin_cos();
    Transform::new([[w.sx * c, w.sy * s], [-w.sx * s, w.sy * c]])
}

/// Cyclic rotation group of order `T` conjugated by `D_w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupFamily {
    order: usize,
    params: AffineParams,
}

impl GroupFamily {
    pub fn new(order: usize, params: AffineParams) -> Result<Self> {
        if order == 0 {
            return Err(Error::domain("group order must be at least 1"));
        }
        Ok(GroupFamily { order, params })
    }

    /// Plain rotations, `w = [0, 1, 1]`.
    pub fn strict(order: usize) -> Result<Self> {
        Self::new(order, AffineParams::identity())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn params(&self) -> &AffineParams {
        &self.params
    }

    pub fn angle(&self, t: usize) -> f64 {
        2.0 * PI * t as f64 / self.order as f64
    }

    pub fn element(&self, t: usize) -> Result<Transform> {
        group_element(self, t)
    }

    pub fn elements(&self) -> Vec<Transform> {
        (0..self.order)
            .map(|t| group_element(self, t).expect("index in range"))
            .collect()
    }
}

/// `D_w·rotation(2πt/T)·D_w⁻¹`; exactly the identity for `t = 0`.
pub fn group_element(family: &GroupFamily, t: usize) -> Result<Transform> {
    if t >= family.order {
        return Err(Error::domain(format!(
            "group index {t} outside 0..{}",
            family.order
        )));
    }
    if t == 0 {
        return Ok(Transform::identity());
    }
    let d = affine(&family.params)?;
    Ok(d * rotation(family.angle(t)) * d.inverse())
}

/// Interpolation used to evaluate an image between cell centres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Bicubic,
}

#[inline]
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r
    } else {
        x
    }
}

/// Bilinear value at fractional 0-based index `(fi, fj)`; 0 outside the hull.
#[inline]
pub(crate) fn sample_bilinear(img: &Image, fi: f64, fj: f64) -> f64 {
    let m = img.side();
    let (fi, fj) = (snap(fi), snap(fj));
    let hi = (m - 1) as f64;
    if !(fi >= 0.0 && fj >= 0.0 && fi <= hi && fj <= hi) {
        return 0.0;
    }
    let i0 = (fi.floor() as usize).min(m.saturating_sub(2));
    let j0 = (fj.floor() as usize).min(m.saturating_sub(2));
    let ti = fi - i0 as f64;
    let tj = fj - j0 as f64;
    if m == 1 {
        return img.get(0, 0);
    }
    let v00 = img.get(i0, j0);
    if ti == 0.0 && tj == 0.0 {
        return v00;
    }
    let v01 = img.get(i0, j0 + 1);
    let v10 = img.get(i0 + 1, j0);
    let v11 = img.get(i0 + 1, j0 + 1);
    if ti == 0.0 {
        return v00 + tj * (v01 - v00);
    }
    if tj == 0.0 {
        return v00 + ti * (v10 - v00);
    }
    (1.0 - ti) * ((1.0 - tj) * v00 + tj * v01) + ti * ((1.0 - tj) * v10 + tj * v11)
}

#[inline]
fn keys_weights(t: f64) -> [f64; 4] {
    // Catmull-Rom (a = -0.5) weights for offsets -1, 0, 1, 2.
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

#[inline]
fn sample_bicubic(img: &Image, fi: f64, fj: f64) -> f64 {
    let m = img.side();
    let (fi, fj) = (snap(fi), snap(fj));
    let hi = (m - 1) as f64;
    if !(fi >= 0.0 && fj >= 0.0 && fi <= hi && fj <= hi) {
        return 0.0;
    }
    let i0 = fi.floor();
    let j0 = fj.floor();
    let (ti, tj) = (fi - i0, fj - j0);
    if ti == 0.0 && tj == 0.0 {
        return img.get(i0 as usize, j0 as usize);
    }
    let wi = keys_weights(ti);
    let wj = keys_weights(tj);
    let (i0, j0) = (i0 as isize, j0 as isize);
    let mut acc = 0.0;
    for (a, wa) in wi.iter().enumerate() {
        let mut row = 0.0;
        for (b, wb) in wj.iter().enumerate() {
            row += wb * img.get_or_zero(i0 + a as isize - 1, j0 + b as isize - 1);
        }
        acc += wa * row;
    }
    acc
}

/// Pull-back action `output(x_ij) = input(A⁻¹·x_ij)` on the image's own grid.
pub fn act(image: &Image, a: &Transform, method: Interpolation) -> Result<Image> {
    if a.det().abs() < MIN_ABS_DET {
        return Err(Error::domain("cannot act with a near-singular transform"));
    }
    if a.is_identity() {
        return Ok(image.clone());
    }
    let inv = a.inverse();
    let grid = *image.grid();
    let m = grid.side();
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let p = inv.apply(grid.coord0(i, j));
            let fi = grid.fractional_index(p[0]);
            let fj = grid.fractional_index(p[1]);
            out.push(match method {
                Interpolation::Bilinear => sample_bilinear(image, fi, fj),
                Interpolation::Bicubic => sample_bicubic(image, fi, fj),
            });
        }
    }
    Ok(Image::from_raw(grid, out))
}
