//! Per-image fitting of the affine parameters `w = [α, s_x, s_y]` by
//! minimizing the variance of feature responses across the group.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::symmetry::{response_curve, RegularizerSpec};
use crate::transforms::{AffineParams, GroupFamily};

const MAX_HALVINGS: usize = 20;
const FLAT_OBJECTIVE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub angles: usize,
    pub max_iters: usize,
    pub step: f64,
    pub grad_eps: f64,
    pub tol: f64,
    pub scale_bounds: [f64; 2],
    /// Also start from the most anisotropic scales, `[α, s_max, s_min]` and
    /// `[α, s_min, s_max]` for `α ∈ {0, π/8, π/4, 3π/8}`, and keep the best result.
    pub multi_start: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            angles: 32,
            max_iters: 200,
            step: 0.05,
            grad_eps: 1e-3,
            tol: 1e-8,
            scale_bounds: [0.5, 2.0],
            multi_start: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.scale_bounds;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return Err(Error::domain(format!(
                "scale bounds must satisfy 0 < min ≤ 1 ≤ max, got [{lo}, {hi}]"
            )));
        }
        if !(self.step > 0.0 && self.grad_eps > 0.0 && self.tol > 0.0) {
            return Err(Error::domain("step, grad_eps and tol must be positive"));
        }
        if self.angles == 0 || self.max_iters == 0 {
            return Err(Error::domain("angles and max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub w: AffineParams,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Accepted objective values, starting with the initial one.
    pub trace: Vec<f64>,
}

/// Population variance over the group of the feature responses.
pub fn variance_objective(image: &Image, w: &AffineParams, reg: &RegularizerSpec, angles: usize) -> Result<f64> {
    let family = GroupFamily::new(angles, *w)?;
    let r = response_curve(image, reg, &family)?;
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    Ok(r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Search coordinates `θ = [α, ln s_x, ln s_y]`.
#[derive(Clone, Copy)]
struct Theta([f64; 3]);

impl Theta {
    fn params(&self) -> Result<AffineParams> {
        AffineParams::new(self.0[0], self.0[1].exp(), self.0[2].exp())
    }

    fn project(mut self, bounds: [f64; 2]) -> Theta {
        let (lo, hi) = (bounds[0].ln(), bounds[1].ln());
        for v in &mut self.0[1..] {
            *v = v.clamp(lo, hi);
        }
        self
    }
}

struct Objective<'a> {
    image: &'a Image,
    reg: &'a RegularizerSpec,
    angles: usize,
}

impl Objective<'_> {
    fn eval(&self, th: Theta) -> Result<f64> {
        let f = variance_objective(self.image, &th.params()?, self.reg, self.angles)?;
        if !f.is_finite() {
            return Err(Error::NonFinite(format!(
                "variance objective at w = {:?}",
                th.params()?.to_array()
            )));
        }
        Ok(f)
    }
}

fn descend(obj: &Objective, start: Theta, config: &FitConfig) -> Result<FitResult> {
    let mut th = start.project(config.scale_bounds);
    let mut f = obj.eval(th)?;
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut step = config.step;
    while iterations < config.max_iters {
        iterations += 1;
        if f <= FLAT_OBJECTIVE {
            converged = true;
            break;
        }
        let mut g = [0.0; 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let mut up = th;
            let mut down = th;
            up.0[i] += config.grad_eps;
            down.0[i] -= config.grad_eps;
            *gi = (obj.eval(up)? - obj.eval(down)?) / (2.0 * config.grad_eps);
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            converged = true;
            break;
        }
        // Unit-length steps in θ; the raw gradient scale depends on image contrast.
        // The step carries over between iterations and doubles back towards
        // `config.step` after an immediate acceptance.
        let mut accepted = None;
        for halving in 0..=MAX_HALVINGS {
            let mut cand = th;
            for (c, gi) in cand.0.iter_mut().zip(&g) {
                *c -= step * gi / norm;
            }
            let cand = cand.project(config.scale_bounds);
            let fc = obj.eval(cand)?;
            if fc < f {
                accepted = Some((cand, fc));
                if halving == 0 {
                    step = (2.0 * step).min(config.step);
                }
                break;
            }
            step /= 2.0;
        }
        let Some((cand, fc)) = accepted else {
            converged = true;
            break;
        };
        let rel = (f - fc) / f;
        th = cand;
        f = fc;
        trace.push(f);
        if rel <= config.tol {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        w: th.params()?,
        objective_initial: trace[0],
        objective_final: f,
        iterations,
        converged,
        trace,
    })
}

/// Projected descent from `w = [0, 1, 1]` with central-difference gradients.
pub fn fit_w(image: &Image, reg: &RegularizerSpec, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let obj = Objective {
        image,
        reg,
        angles: config.angles,
    };
    let mut best = descend(&obj, Theta([0.0, 0.0, 0.0]), config)?;
    if config.multi_start {
        let (lo, hi) = (config.scale_bounds[0].ln(), config.scale_bounds[1].ln());
        for alpha in [0.0, PI / 8.0, PI / 4.0, 3.0 * PI / 8.0] {
            for scales in [[hi, lo], [lo, hi]] {
                let r = descend(&obj, Theta([alpha, scales[0], scales[1]]), config)?;
                // Starts are visited in increasing α, so ties keep the smaller one.
                if r.objective_final < best.objective_final {
                    best = r;
                }
            }
        }
    }
    Ok(best)
}

/// Independent fits for every image, index-ordered.
pub fn fit_corpus(dataset: &[Image], reg: &RegularizerSpec, config: &FitConfig) -> Result<Vec<FitResult>> {
    if dataset.is_empty() {
        return Err(Error::domain("dataset is empty"));
    }
    dataset
        .par_iter()
        .enumerate()
        .map(|(n, img)| fit_w(img, reg, config).map_err(|e| e.for_item(format!("image {n}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_function, Analytic, Gaussian, GridSpec};
    use crate::symmetry::{Aggregation, Regularizer};

    fn gaussian(m: usize, sx: f64, sy: f64, phi: f64) -> Image {
        let grid = GridSpec::new(0.25, m).unwrap();
        sample_function(&Analytic::Gaussian(Gaussian::anisotropic(sx, sy, phi)), &grid).unwrap()
    }

    #[test]
    fn constant_image_stays_at_identity() {
        let img = Image::constant(GridSpec::new(0.1, 20).unwrap(), 0.3);
        let reg = RegularizerSpec::new(Regularizer::Tv).unwrap();
        let r = fit_w(&img, &reg, &FitConfig::default()).unwrap();
        assert_eq!(r.w, AffineParams::identity());
        assert!(r.objective_final <= FLAT_OBJECTIVE);
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn isotropic_gaussian_objective_small() {
        let img = gaussian(81, 3.0, 3.0, 0.0);
        let reg = RegularizerSpec::new(Regularizer::Tv).unwrap();
        let base = crate::symmetry::feature_response(&img, &reg, &crate::transforms::Transform::identity()).unwrap();
        let v = variance_objective(&img, &AffineParams::identity(), &reg, 32).unwrap();
        assert!(v <= (0.02 * base).powi(2));
    }

    #[test]
    fn matching_affine_lowers_objective() {
        // Magnitude responses of a Gaussian are flat under plain rotations as
        // well, so the comparison needs direction-sensitive aggregation.
        let img = gaussian(96, 2.0, 1.0, 0.0);
        let reg = RegularizerSpec::new(Regularizer::Tv)
            .unwrap()
            .with_aggregation(Aggregation::Directional);
        let at_id = variance_objective(&img, &AffineParams::identity(), &reg, 32).unwrap();
        let at_w = variance_objective(&img, &AffineParams::new(0.0, 2.0, 1.0).unwrap(), &reg, 32).unwrap();
        assert!(at_w < at_id, "{at_w} vs {at_id}");
    }

    #[test]
    fn descent_is_monotone_and_bounded() {
        let img = gaussian(48, 2.4, 1.2, 0.2);
        let reg = RegularizerSpec::new(Regularizer::Tv).unwrap();
        let config = FitConfig {
            angles: 16,
            max_iters: 15,
            ..FitConfig::default()
        };
        let r = fit_w(&img, &reg, &config).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.objective_final <= r.objective_initial);
        assert!(r.iterations <= config.max_iters);
        for s in [r.w.sx(), r.w.sy()] {
            assert!((0.5..=2.0).contains(&s));
        }
        let again = fit_w(&img, &reg, &config).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn corpus_matches_single_fits() {
        let reg = RegularizerSpec::new(Regularizer::Laplacian).unwrap();
        let config = FitConfig {
            angles: 8,
            max_iters: 3,
            ..FitConfig::default()
        };
        let data = vec![gaussian(32, 2.0, 1.0, 0.0), Image::constant(GridSpec::new(0.25, 32).unwrap(), 0.5)];
        let all = fit_corpus(&data, &reg, &config).unwrap();
        assert_eq!(all[0], fit_w(&data[0], &reg, &config).unwrap());
        assert_eq!(all[1].w, AffineParams::identity());
        assert!(fit_corpus(&[], &reg, &config).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = FitConfig {
            scale_bounds: [1.2, 2.0],
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FitConfig {
            step: 0.0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
