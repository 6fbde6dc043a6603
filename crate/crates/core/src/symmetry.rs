//! Regularizer feature responses under steered kernels and the dataset-level
//! symmetry metric.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{fit_corpus, FitConfig};
use crate::conv::correlate_row;
use crate::error::{Error, Result};
use crate::filter::{eval_filters_tent, Cutoff, FilterBasis, FilterCoeffs, Kernel};
use crate::grid::Image;
use crate::linalg::solve_spd;
use crate::transforms::{AffineParams, GroupFamily, Transform};

/// Classical stencil families used as regularizer features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    Tv,
    Tv2,
    Sobel,
    Laplacian,
    Prewitt,
}

impl Regularizer {
    pub const ALL: [Regularizer; 5] = [
        Regularizer::Tv,
        Regularizer::Tv2,
        Regularizer::Sobel,
        Regularizer::Laplacian,
        Regularizer::Prewitt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::Tv => "tv",
            Regularizer::Tv2 => "tv2",
            Regularizer::Sobel => "sobel",
            Regularizer::Laplacian => "laplacian",
            Regularizer::Prewitt => "prewitt",
        }
    }

    /// 3×3 stencils (row index along the first coordinate) and the weight of
    /// each squared response in the per-pixel magnitude.
    fn stencils(&self) -> Vec<([[f64; 3]; 3], f64)> {
        match self {
            Regularizer::Tv => vec![
                ([[0.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 1.0, 0.0]], 1.0),
                ([[0.0, 0.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, 0.0]], 1.0),
            ],
            // Hessian entries; the mixed difference appears twice in the Frobenius norm.
            Regularizer::Tv2 => vec![
                ([[0.0, 1.0, 0.0], [0.0, -2.0, 0.0], [0.0, 1.0, 0.0]], 1.0),
                ([[0.0, 0.0, 0.0], [0.0, 1.0, -1.0], [0.0, -1.0, 1.0]], 2.0),
                ([[0.0, 0.0, 0.0], [1.0, -2.0, 1.0], [0.0, 0.0, 0.0]], 1.0),
            ],
            Regularizer::Sobel => vec![
                ([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]], 1.0),
                ([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]], 1.0),
            ],
            Regularizer::Laplacian => {
                vec![([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]], 1.0)]
            }
            Regularizer::Prewitt => vec![
                ([[-1.0, -1.0, -1.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]], 1.0),
                ([[-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]], 1.0),
            ],
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regularizer::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown regularizer '{s}'")))
    }
}

/// How per-stencil responses combine into one value per pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// `√(Σ_i w_i r_i²)`, invariant under rotating the whole stencil set.
    #[default]
    Magnitude,
    /// `Σ_i w_i |r_i|`, sensitive to the stencil orientation.
    Directional,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnitude" => Ok(Aggregation::Magnitude),
            "directional" => Ok(Aggregation::Directional),
            _ => Err(Error::Usage(format!("unknown aggregation '{s}'"))),
        }
    }
}

const STENCIL_SIZE: usize = 3;
const MAX_PROJECTION_RESIDUAL: f64 = 0.05;
/// Midpoint samples per axis and cell when splatting steered kernels.
const CELL_SAMPLES: usize = 8;

/// A regularizer's stencils expressed in a steerable basis on the pixel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizerSpec {
    name: Regularizer,
    basis: FilterBasis,
    coeffs: Vec<FilterCoeffs>,
    weights: Vec<f64>,
    residuals: Vec<f64>,
    aggregation: Aggregation,
    cell_samples: usize,
}

impl RegularizerSpec {
    /// Projects the stencils onto a 3×3 basis with one cell as the unit length.
    ///
    /// The conservative cutoff cannot represent 3×3 stencils within tolerance,
    /// so the cutoff is raised to the rotation-safe maximum when needed.
    pub fn new(name: Regularizer) -> Result<Self> {
        let mut last = None;
        for cutoff in [Cutoff::Conservative, Cutoff::Nyquist] {
            let basis = FilterBasis::new(STENCIL_SIZE, 1.0, cutoff)?;
            let spec = Self::project(name, basis)?;
            if spec.residuals.iter().all(|&r| r <= MAX_PROJECTION_RESIDUAL) {
                return Ok(spec);
            }
            last = Some(spec);
        }
        let spec = last.expect("at least one cutoff tried");
        Err(Error::domain(format!(
            "{name} stencils not representable: residuals {:?}",
            spec.residuals
        )))
    }

    fn project(name: Regularizer, basis: FilterBasis) -> Result<Self> {
        let sampled = basis.sample(&Transform::identity(), STENCIL_SIZE / 2);
        let k = basis.count();
        let gram: Vec<Vec<f64>> = (0..k)
            .map(|p| {
                (0..k)
                    .map(|q| sampled[p].iter().zip(&sampled[q]).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        let mut coeffs = Vec::new();
        let mut weights = Vec::new();
        let mut residuals = Vec::new();
        for (stencil, weight) in name.stencils() {
            let target: Vec<f64> = stencil.iter().flatten().copied().collect();
            let rhs: Vec<f64> = sampled
                .iter()
                .map(|b| b.iter().zip(&target).map(|(x, y)| x * y).sum())
                .collect();
            let c = solve_spd(&gram, &rhs)?;
            let mut err = 0.0;
            for (cell, t) in target.iter().enumerate() {
                let fit: f64 = c.iter().zip(&sampled).map(|(ci, b)| ci * b[cell]).sum();
                err += (fit - t) * (fit - t);
            }
            let norm: f64 = target.iter().map(|t| t * t).sum();
            residuals.push((err / norm).sqrt());
            coeffs.push(FilterCoeffs::new(c)?);
            weights.push(weight);
        }
        Ok(RegularizerSpec {
            name,
            basis,
            coeffs,
            weights,
            residuals,
            aggregation: Aggregation::default(),
            cell_samples: CELL_SAMPLES,
        })
    }

    pub fn name(&self) -> Regularizer {
        self.name
    }

    pub fn with_aggregation(mut self, aggregation: Aggregation) -> Self {
        self.aggregation = aggregation;
        self
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    /// Midpoint samples per axis and cell used when splatting steered kernels.
    pub fn with_cell_samples(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("cell samples must be at least 1"));
        }
        self.cell_samples = n;
        Ok(self)
    }

    pub fn basis(&self) -> &FilterBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[FilterCoeffs] {
        &self.coeffs
    }

    /// Relative least-squares residual of each stencil projection.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Pixels within this distance of the border are excluded from responses.
    pub fn border(&self) -> usize {
        STENCIL_SIZE
    }

    /// Stencils steered by `a` through bilinear splatting, each with its DC
    /// component removed so that constants give no response.
    ///
    /// Point samples of the steered 3×3 interpolant alias badly at oblique
    /// angles. Splatting makes the response equal to that of the bilinearly
    /// warped image.
    pub fn steered_kernels(&self, a: &Transform) -> Result<Vec<Kernel>> {
        let mut all = self.coeffs.clone();
        all.push(FilterCoeffs::one_hot(self.basis.count(), 0));
        let mut kernels = eval_filters_tent(&all, &self.basis, a, self.cell_samples)?;
        let dc = kernels.pop().expect("dc kernel present");
        let dc_sum = dc.sum();
        kernels
            .into_iter()
            .map(|k| {
                let s = k.sum() / dc_sum;
                let values = k.values().iter().zip(dc.values()).map(|(v, d)| v - s * d).collect();
                Kernel::new(k.size(), k.spacing(), values)
            })
            .collect()
    }
}

/// Mean over interior pixels of the per-pixel response magnitude with every
/// stencil steered by `a`.
pub fn feature_response(image: &Image, reg: &RegularizerSpec, a: &Transform) -> Result<f64> {
    let kernels = reg.steered_kernels(a)?;
    response_with_kernels(image, reg, &kernels)
}

fn response_with_kernels(image: &Image, reg: &RegularizerSpec, kernels: &[Kernel]) -> Result<f64> {
    let m = image.side();
    let b = reg.border();
    if m <= 2 * b {
        return Err(Error::domain(format!(
            "image side {m} leaves no interior beyond a border of {b}"
        )));
    }
    let (lo, hi) = (b, m - b);
    let n = hi - lo;
    let taps: Vec<_> = kernels.iter().map(Kernel::taps).collect();
    let mut row = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut total = 0.0;
    for i in lo..hi {
        acc.fill(0.0);
        for (t, &w) in taps.iter().zip(&reg.weights) {
            row.fill(0.0);
            correlate_row(image.values(), m, t, i, lo, hi, &mut row);
            match reg.aggregation {
                Aggregation::Magnitude => acc.iter_mut().zip(&row).for_each(|(a, v)| *a += w * v * v),
                Aggregation::Directional => acc.iter_mut().zip(&row).for_each(|(a, v)| *a += w * v.abs()),
            }
        }
        total += match reg.aggregation {
            Aggregation::Magnitude => acc.iter().map(|v| v.sqrt()).sum::<f64>(),
            Aggregation::Directional => acc.iter().sum::<f64>(),
        };
    }
    Ok(total / (n * n) as f64)
}

/// Responses for every element of `family`, index-ordered.
pub fn response_curve(image: &Image, reg: &RegularizerSpec, family: &GroupFamily) -> Result<Vec<f64>> {
    (0..family.order())
        .into_par_iter()
        .map(|t| feature_response(image, reg, &family.element(t)?))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SampleStrict,
    DatasetStrict,
    DatasetAdaptive,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SampleStrict => "sample-strict",
            Scenario::DatasetStrict => "dataset-strict",
            Scenario::DatasetAdaptive => "dataset-adaptive",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" | "sample-strict" => Ok(Scenario::SampleStrict),
            "dataset" | "dataset-strict" => Ok(Scenario::DatasetStrict),
            "adaptive" | "dataset-adaptive" => Ok(Scenario::DatasetAdaptive),
            _ => Err(Error::Usage(format!("unknown scenario '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub scenario: Scenario,
    pub regularizer: Regularizer,
    pub angles: usize,
    pub images: usize,
    pub base_mean: f64,
    pub per_angle_deviation: Vec<f64>,
    pub epsilon: f64,
}

fn check_dataset(dataset: &[Image]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::domain("dataset is empty"));
    }
    Ok(())
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// Per-image response curves, index-ordered.
fn curves(dataset: &[Image], reg: &RegularizerSpec, families: &[GroupFamily]) -> Result<Vec<Vec<f64>>> {
    dataset
        .par_iter()
        .zip(families)
        .enumerate()
        .map(|(n, (img, fam))| response_curve(img, reg, fam).map_err(|e| e.for_item(format!("image {n}"))))
        .collect()
}

fn report_from_curves(
    curves: &[Vec<f64>],
    reg: &RegularizerSpec,
    scenario: Scenario,
    angles: usize,
) -> SymmetryReport {
    let n = curves.len();
    let base_mean = mean(curves.iter().map(|c| c[0]), n);
    let per_angle_deviation: Vec<f64> = (0..angles)
        .map(|t| (base_mean - mean(curves.iter().map(|c| c[t]), n)).abs())
        .collect();
    let epsilon = per_angle_deviation.iter().copied().fold(0.0, f64::max);
    SymmetryReport {
        scenario,
        regularizer: reg.name(),
        angles,
        images: n,
        base_mean,
        per_angle_deviation,
        epsilon,
    }
}

/// `ε_G = max_t |mean_n R[r_n] − mean_n R[π_{A_n^t} r_n]|`.
pub fn epsilon_metric(
    dataset: &[Image],
    reg: &RegularizerSpec,
    families: &[GroupFamily],
) -> Result<SymmetryReport> {
    check_dataset(dataset)?;
    if families.len() != dataset.len() {
        return Err(Error::domain(format!(
            "{} families for {} images",
            families.len(),
            dataset.len()
        )));
    }
    let order = families[0].order();
    if families.iter().any(|f| f.order() != order) {
        return Err(Error::domain("all group families must share one order"));
    }
    let c = curves(dataset, reg, families)?;
    Ok(report_from_curves(&c, reg, Scenario::DatasetStrict, order))
}

/// Runs one of the three scenarios. Adaptive runs use `weights` when given and
/// fit them with default settings otherwise.
pub fn run_scenario(
    dataset: &[Image],
    reg: &RegularizerSpec,
    scenario: Scenario,
    angles: usize,
    weights: Option<&[AffineParams]>,
) -> Result<SymmetryReport> {
    check_dataset(dataset)?;
    let strict = GroupFamily::strict(angles)?;
    match scenario {
        Scenario::DatasetStrict => {
            let fams = vec![strict; dataset.len()];
            let mut r = epsilon_metric(dataset, reg, &fams)?;
            r.scenario = scenario;
            Ok(r)
        }
        Scenario::SampleStrict => {
            let fams = vec![strict; dataset.len()];
            let c = curves(dataset, reg, &fams)?;
            let singles: Vec<SymmetryReport> = c
                .iter()
                .map(|one| report_from_curves(std::slice::from_ref(one), reg, scenario, angles))
                .collect();
            let n = singles.len();
            let per_angle_deviation = (0..angles)
                .map(|t| mean(singles.iter().map(|s| s.per_angle_deviation[t]), n))
                .collect();
            Ok(SymmetryReport {
                scenario,
                regularizer: reg.name(),
                angles,
                images: n,
                base_mean: mean(singles.iter().map(|s| s.base_mean), n),
                per_angle_deviation,
                epsilon: mean(singles.iter().map(|s| s.epsilon), n),
            })
        }
        Scenario::DatasetAdaptive => {
            let fitted;
            let w = match weights {
                Some(w) => w,
                None => {
                    let config = FitConfig {
                        angles,
                        ..FitConfig::default()
                    };
                    fitted = fit_corpus(dataset, reg, &config)?
                        .into_iter()
                        .map(|r| r.w)
                        .collect::<Vec<_>>();
                    &fitted
                }
            };
            if w.len() != dataset.len() {
                return Err(Error::domain(format!(
                    "{} weight entries for {} images",
                    w.len(),
                    dataset.len()
                )));
            }
            let fams = w
                .iter()
                .map(|p| GroupFamily::new(angles, *p))
                .collect::<Result<Vec<_>>>()?;
            let mut r = epsilon_metric(dataset, reg, &fams)?;
            r.scenario = scenario;
            Ok(r)
        }
    }
}
