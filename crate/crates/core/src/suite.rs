//! Named bench suites with fixed, seeded inputs. Each suite returns one or
//! more [`BenchResult`]s; `all` runs them in [`SUITES`] order.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::adaptive::{fit_corpus, fit_w, variance_objective, FitConfig};
use crate::bench::{
    bench_norm_preservation, bench_quadrature, bench_reg_discretization, bench_restoration_equivariance,
    fit_filter, loglog_slope, random_image, reynolds_average, smooth_random_image, synthetic_scene, BenchResult,
    BlurKernel, RestorationConfig, Rule, MIN_SLOPE,
};
use crate::conv::{correlate, equivariance_error, LayerSpec, Pipeline};
use crate::error::{Error, Result};
use crate::filter::{Cutoff, FilterBasis, FilterCoeffs, Kernel};
use crate::grid::{sample_function, Analytic, Gaussian, GridSpec, Image};
use crate::symmetry::{run_scenario, Aggregation, Regularizer, RegularizerSpec, Scenario, SymmetryReport};
use crate::transforms::{act, affine, rotation, AffineParams, GroupFamily, Interpolation, Transform};

pub const SUITES: [&str; 8] = [
    "quadrature",
    "reg_discretization",
    "filter_fit",
    "norm_preservation",
    "reynolds",
    "layer_equivariance",
    "restoration",
    "adaptive_recovery",
];

const H_SWEEP: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

/// Runs one suite by name, or every suite for `"all"`.
pub fn run_suite(name: &str) -> Result<Vec<BenchResult>> {
    match name {
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s)?);
            }
            Ok(out)
        }
        "quadrature" => Ok(vec![bench_quadrature(&H_SWEEP)?]),
        "reg_discretization" => Ok(vec![bench_reg_discretization(&H_SWEEP)?]),
        "filter_fit" => Ok(vec![bench_filter_fit()?]),
        "norm_preservation" => Ok(vec![norm_preservation_suite()?]),
        "reynolds" => Ok(vec![bench_reynolds(50)?]),
        "layer_equivariance" => bench_layer_equivariance(),
        "restoration" => Ok(vec![restoration_suite()?]),
        "adaptive_recovery" => Ok(vec![bench_adaptive_recovery()?]),
        _ => Err(Error::Usage(format!(
            "unknown suite '{name}', expected one of {} or all",
            SUITES.join(", ")
        ))),
    }
}

fn rel_dist(a: &Image, b: &Image) -> f64 {
    (a.dist_sq(b) / b.sum_sq().max(f64::MIN_POSITIVE)).sqrt()
}

/// Recovery of a random 3×3 kernel and the quarter-turn commutation of the fit.
pub fn bench_filter_fit() -> Result<BenchResult> {
    let reference = smooth_random_image(32, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let k0 = Kernel::new(
        3,
        reference.grid().spacing(),
        (0..9).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;
    let recovered = fit_filter(&correlate(&reference, &k0), &reference, 3)?;

    let r = smooth_random_image(25, 3)?;
    let d = correlate(&r, &k0).lincomb(1.0, &random_image(*r.grid(), 4), 0.01)?;
    let q = rotation(PI / 2.0);
    let k = fit_filter(&d, &r, 3)?;
    let rotated = fit_filter(
        &act(&d, &q, Interpolation::Bilinear)?,
        &act(&r, &q, Interpolation::Bilinear)?,
        3,
    )?;
    let params = BTreeMap::from([
        ("p".into(), json!(3)),
        ("m".into(), json!([32, 25])),
        ("layout".into(), json!("recovery max abs error, quarter-turn commutation max abs error")),
    ]);
    Ok(BenchResult::new(
        "filter_fit",
        params,
        vec![
            (recovered.max_abs_diff(&k0), Rule::Le, 1e-8),
            (rotated.max_abs_diff(&k.rot90()), Rule::Le, 1e-10),
        ],
    ))
}

fn norm_preservation_suite() -> Result<BenchResult> {
    let mut images = Vec::new();
    for (seed, m) in [(11, 128), (12, 128), (13, 129)] {
        images.push(sample_function(&synthetic_scene(seed, 3), &GridSpec::unit(m)?)?);
    }
    let transforms = vec![
        Transform::identity(),
        rotation(PI / 2.0),
        rotation(PI),
        rotation(1.5 * PI),
        rotation(PI / 8.0),
        rotation(PI / 5.0),
        affine(&AffineParams::new(0.3, 1.25, 0.8)?)?,
        Transform::new([[1.0, 0.3], [0.0, 1.0]])?,
    ];
    bench_norm_preservation(&images, &transforms)
}

/// Seeded operator that is neither linear nor rotation equivariant:
/// `x ↦ mask·x + c·(x shifted one cell along the first axis)²`.
fn random_operator(grid: GridSpec, seed: u64) -> impl Fn(&Image) -> Result<Image> {
    let mask = random_image(grid, seed);
    let c = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed).random_range(0.5..2.0);
    move |x: &Image| {
        let mut out = Image::zeros(*x.grid());
        for i in 0..x.side() {
            for j in 0..x.side() {
                let s = x.get_or_zero(i as isize + 1, j as isize);
                out.set(i, j, mask.get(i, j) * x.get(i, j) + c * s * s);
            }
        }
        Ok(out)
    }
}

/// Reynolds-averaged random operators under the quarter-turn group: worst
/// relative equivariance error of each trial.
pub fn bench_reynolds(trials: usize) -> Result<BenchResult> {
    let grid = GridSpec::unit(24)?;
    let family = GroupFamily::strict(4)?;
    let mut entries = Vec::with_capacity(trials);
    for n in 0..trials as u64 {
        let avg = reynolds_average(random_operator(grid, 100 + n), &family);
        let x = random_image(grid, 1000 + n);
        let base = avg(&x)?;
        let mut worst: f64 = 0.0;
        for t in 1..family.order() {
            let a = family.element(t)?;
            let lhs = avg(&act(&x, &a, Interpolation::Bilinear)?)?;
            let rhs = act(&base, &a, Interpolation::Bilinear)?;
            worst = worst.max(rel_dist(&lhs, &rhs));
        }
        entries.push((worst, Rule::Le, 1e-12));
    }
    let params = BTreeMap::from([
        ("trials".into(), json!(trials)),
        ("m".into(), json!(24)),
        ("T".into(), json!(4)),
    ]);
    Ok(BenchResult::new("reynolds", params, entries))
}

fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Result<FilterCoeffs> {
    FilterCoeffs::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn random_pipeline(basis: &FilterBasis, family: GroupFamily, seed: u64) -> Result<Pipeline> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = basis.count();
    let lift = LayerSpec::single(basis.clone(), family, random_coeffs(&mut rng, n)?)?;
    let hidden = (0..family.order())
        .map(|_| random_coeffs(&mut rng, n))
        .collect::<Result<Vec<_>>>()?;
    let hidden = vec![LayerSpec::new(basis.clone(), family, hidden)?];
    let project = LayerSpec::single(basis.clone(), family, random_coeffs(&mut rng, n)?)?;
    Ok(Pipeline { lift, hidden, project })
}

/// Band-limited test input on the unit domain.
fn smooth_input(m: usize) -> Result<Image> {
    let g = Gaussian::anisotropic(0.08, 0.05, 0.3).centered_at([0.04, -0.03]);
    sample_function(&Analytic::Gaussian(g), &GridSpec::unit(m)?)
}

/// Lift, group and projection layers: exact under quarter turns on odd
/// grids, and converging in the mesh size for eighth turns.
pub fn bench_layer_equivariance() -> Result<Vec<BenchResult>> {
    let p4 = GroupFamily::strict(4)?;
    let mut exact = Vec::new();
    for (m, seed) in [(33, 1), (45, 2)] {
        let grid = GridSpec::unit(m)?;
        let basis = FilterBasis::new(5, grid.spacing(), Cutoff::Nyquist)?;
        let pipe = random_pipeline(&basis, p4, seed)?;
        let x = random_image(grid, 50 + seed);
        let base = pipe.apply(&x)?;
        for t in 1..4 {
            let a = p4.element(t)?;
            let lhs = pipe.apply(&act(&x, &a, Interpolation::Bilinear)?)?;
            let rhs = act(&base, &a, Interpolation::Bilinear)?;
            exact.push((rel_dist(&lhs, &rhs), Rule::Le, 1e-12));
        }
    }
    let exact = BenchResult::new(
        "layer_equivariance_p4",
        BTreeMap::from([("m".into(), json!([33, 45])), ("T".into(), json!(4))]),
        exact,
    );

    // One continuous filter set: 5 cells wide at m = 32, resampled finer.
    let p8 = GroupFamily::strict(8)?;
    let sizes = [32usize, 64, 128, 256];
    let coarse = FilterBasis::new(5, 1.0 / 32.0, Cutoff::Conservative)?;
    let mut h = Vec::new();
    let mut errors = Vec::new();
    for &m in &sizes {
        let grid = GridSpec::unit(m)?;
        let basis = coarse.resampled(grid.spacing())?;
        let pipe = random_pipeline(&basis, p8, 7)?;
        let table = equivariance_error(|x| pipe.apply(x), &smooth_input(m)?, &p8)?;
        h.push(grid.spacing());
        errors.push(table.max);
    }
    let slope = loglog_slope(&h, &errors);
    let scaling = BenchResult::new(
        "layer_equivariance_p8",
        BTreeMap::from([
            ("m".into(), json!(sizes)),
            ("T".into(), json!(8)),
            ("max_error".into(), json!(errors)),
        ]),
        vec![(slope, Rule::Ge, MIN_SLOPE)],
    );
    Ok(vec![exact, scaling])
}

/// Restoration settings of the `restoration` suite.
pub fn restoration_suite_config() -> RestorationConfig {
    RestorationConfig {
        kernel: BlurKernel::Gaussian { sigma: 0.01 },
        lambda: 0.05,
        ..RestorationConfig::default()
    }
}

fn restoration_suite() -> Result<BenchResult> {
    let scenes: Vec<Analytic> = (1..=5).map(|s| synthetic_scene(s, 3)).collect();
    bench_restoration_equivariance(&scenes, &[32, 64, 128], &restoration_suite_config(), 8)
}

/// Major-axis angle in `[0, π)` and axis ratio `≥ 1` of `D_w`.
pub fn principal_axes(w: &AffineParams) -> (f64, f64) {
    let (angle, ratio) = if w.sx() >= w.sy() {
        (w.alpha(), w.sx() / w.sy())
    } else {
        (w.alpha() + PI / 2.0, w.sy() / w.sx())
    };
    (angle.rem_euclid(PI), ratio)
}

/// Distance between two axis directions, modulo `π`.
pub fn axis_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Oracle grid resolution: `π/12` in angle, both test axes on the grid.
const ORACLE_STEPS: usize = 6;

/// Settings of the `adaptive_recovery` suite.
pub fn recovery_setup() -> Result<(GridSpec, RegularizerSpec, FitConfig)> {
    let spec = RegularizerSpec::new(Regularizer::Tv)?.with_aggregation(Aggregation::Directional);
    let config = FitConfig {
        multi_start: true,
        ..FitConfig::default()
    };
    Ok((GridSpec::new(0.25, 64)?, spec, config))
}

/// Grid-search minimizer of the variance objective over `α ∈ [0, π/2)` and
/// axis ratios `s_x/s_y ∈ [1/4, 4]` at unit determinant.
pub fn grid_oracle(
    image: &Image,
    spec: &RegularizerSpec,
    angles: usize,
    steps: usize,
) -> Result<(AffineParams, f64)> {
    let mut best = (AffineParams::identity(), f64::INFINITY);
    for i in 0..steps {
        let alpha = 0.5 * PI * i as f64 / steps as f64;
        for j in 0..=2 * steps {
            let ratio = 4f64.powf(j as f64 / steps as f64 - 1.0);
            let w = AffineParams::new(alpha, ratio.sqrt(), 1.0 / ratio.sqrt())?;
            let v = variance_objective(image, &w, spec, angles)?;
            if v < best.1 {
                best = (w, v);
            }
        }
    }
    Ok(best)
}

/// Fits on ratio-2 Gaussians, axis aligned and rotated by `π/6`, checked
/// against the known axes and against [`grid_oracle`].
pub fn bench_adaptive_recovery() -> Result<BenchResult> {
    let (grid, spec, config) = recovery_setup()?;
    let mut entries = Vec::new();
    let mut fitted = Vec::new();
    for phi in [0.0, PI / 6.0] {
        let img = sample_function(&Analytic::gaussian(2.0, 1.0, phi), &grid)?;
        let fit = fit_w(&img, &spec, &config)?;
        let (angle, ratio) = principal_axes(&fit.w);
        let (oracle_w, oracle_v) = grid_oracle(&img, &spec, config.angles, ORACLE_STEPS)?;
        let (oracle_angle, oracle_ratio) = principal_axes(&oracle_w);
        entries.push((ratio, Rule::Ge, 1.6));
        entries.push((ratio, Rule::Le, 2.4));
        entries.push((axis_distance(angle, phi), Rule::Le, PI / 12.0));
        entries.push((axis_distance(angle, oracle_angle), Rule::Le, PI / 12.0));
        entries.push(((ratio / oracle_ratio).ln().abs(), Rule::Le, 1.25f64.ln()));
        entries.push((fit.objective_final, Rule::Le, oracle_v));
        fitted.push(json!({
            "phi": phi,
            "w": fit.w,
            "oracle_w": oracle_w,
            "objective_final": fit.objective_final,
            "oracle_objective": oracle_v,
        }));
    }
    let params = BTreeMap::from([
        ("m".into(), json!(grid.side())),
        ("h".into(), json!(grid.mesh_size())),
        ("sigma".into(), json!([2.0, 1.0])),
        ("aggregation".into(), json!(spec.aggregation())),
        ("fit".into(), serde_json::to_value(&config)?),
        ("oracle_steps".into(), json!(ORACLE_STEPS)),
        ("fits".into(), json!(fitted)),
        (
            "layout".into(),
            json!("per angle: ratio >= 1.6, ratio <= 2.4, axis error, axis error vs oracle, |ln ratio/oracle ratio|, objective vs oracle"),
        ),
    ]);
    Ok(BenchResult::new("adaptive_recovery", params, entries))
}

/// Strict and adaptive symmetry errors of a corpus for every regularizer,
/// with the ordering `sample ≥ dataset ≥ adaptive` and the adaptive gain
/// `adaptive ≤ gain·dataset` as bench entries.
pub fn bench_corpus_ordering(
    dataset: &[Image],
    aggregation: Aggregation,
    fit: &FitConfig,
    gain: f64,
) -> Result<(Vec<SymmetryReport>, BenchResult)> {
    let mut reports = Vec::new();
    let mut entries = Vec::new();
    for reg in Regularizer::ALL {
        let spec = RegularizerSpec::new(reg)?.with_aggregation(aggregation);
        let sample = run_scenario(dataset, &spec, Scenario::SampleStrict, fit.angles, None)?;
        let strict = run_scenario(dataset, &spec, Scenario::DatasetStrict, fit.angles, None)?;
        let w: Vec<AffineParams> = fit_corpus(dataset, &spec, fit)?.into_iter().map(|f| f.w).collect();
        let adaptive = run_scenario(dataset, &spec, Scenario::DatasetAdaptive, fit.angles, Some(&w))?;
        entries.push((sample.epsilon, Rule::Ge, strict.epsilon));
        entries.push((strict.epsilon, Rule::Ge, adaptive.epsilon));
        entries.push((adaptive.epsilon, Rule::Le, gain * strict.epsilon));
        reports.extend([sample, strict, adaptive]);
    }
    let params = BTreeMap::from([
        ("images".into(), json!(dataset.len())),
        ("m".into(), json!(dataset.first().map(|i| i.side()))),
        ("aggregation".into(), json!(aggregation)),
        ("fit".into(), serde_json::to_value(fit)?),
        ("gain".into(), json!(gain)),
        (
            "layout".into(),
            json!("per regularizer in tv, tv2, sobel, laplacian, prewitt order: sample >= dataset, dataset >= adaptive, adaptive <= gain * dataset"),
        ),
    ]);
    Ok((reports, BenchResult::new("corpus_ordering", params, entries)))
}
