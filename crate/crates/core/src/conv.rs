//! Lifting, group and projection correlations over a conjugated rotation group.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{eval_filter_covering, FilterBasis, FilterCoeffs, Kernel};
use crate::grid::{GridSpec, Image};
use crate::transforms::{act, GroupFamily, Interpolation, Transform};

/// Adds row `i` of the zero-padded cross-correlation
/// `out(i, j) = Σ k(a, b)·img(i + a, j + b)` for columns `lo..hi` into `dst`,
/// with tap offsets relative to the kernel centre.
#[inline]
pub(crate) fn correlate_row(
    img: &[f64],
    m: usize,
    taps: &[(isize, isize, f64)],
    i: usize,
    lo: usize,
    hi: usize,
    dst: &mut [f64],
) {
    for &(dr, dc, w) in taps {
        let si = i as isize + dr;
        if si < 0 || si >= m as isize {
            continue;
        }
        let src = &img[si as usize * m..(si as usize + 1) * m];
        // Columns j with 0 ≤ j + dc < m.
        let j0 = (lo as isize).max(-dc) as usize;
        let j1 = (hi as isize).min(m as isize - dc).max(j0 as isize) as usize;
        let s = &src[(j0 as isize + dc) as usize..(j1 as isize + dc) as usize];
        for (d, v) in dst[j0 - lo..j1 - lo].iter_mut().zip(s) {
            *d += w * v;
        }
    }
}

/// The correlation of [`correlate_row`] on rows and columns `lo..hi`, as a
/// `(hi − lo)²` row-major buffer.
pub(crate) fn correlate_region(
    img: &[f64],
    m: usize,
    kernel: &Kernel,
    lo: usize,
    hi: usize,
) -> Vec<f64> {
    let n = hi - lo;
    let taps = kernel.taps();
    let mut out = vec![0.0; n * n];
    for (oi, dst) in out.chunks_exact_mut(n.max(1)).enumerate() {
        correlate_row(img, m, &taps, lo + oi, lo, hi, dst);
    }
    out
}

/// Full-frame zero-padded cross-correlation, unscaled.
pub fn correlate(image: &Image, kernel: &Kernel) -> Image {
    let m = image.side();
    Image::from_raw(*image.grid(), correlate_region(image.values(), m, kernel, 0, m))
}

/// Group-indexed stack of `T` spatial slices on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    grid: GridSpec,
    order: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(grid: GridSpec, order: usize, values: Vec<f64>) -> Result<Self> {
        let m = grid.side();
        if order == 0 || values.len() != order * m * m {
            return Err(Error::domain(format!(
                "feature map needs {order}×{m}×{m} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("feature values must be finite"));
        }
        Ok(FeatureMap { grid, order, values })
    }

    pub fn zeros(grid: GridSpec, order: usize) -> Self {
        let m = grid.side();
        FeatureMap {
            grid,
            order,
            values: vec![0.0; order * m * m],
        }
    }

    pub fn from_slices(slices: Vec<Image>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::domain("feature map needs at least one slice"))?;
        let grid = *first.grid();
        if slices.iter().any(|s| *s.grid() != grid) {
            return Err(Error::domain("feature slices must share one grid"));
        }
        let order = slices.len();
        let values = slices.into_iter().flat_map(Image::into_values).collect();
        Ok(FeatureMap { grid, order, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.grid.side() * self.grid.side();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn slice_image(&self, t: usize) -> Image {
        Image::from_raw(self.grid, self.slice(t).to_vec())
    }

    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn dist_sq(&self, other: &FeatureMap) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Filters of one layer: a single coefficient set for lifting and projection
/// layers, one per group offset for group layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub basis: FilterBasis,
    pub family: GroupFamily,
    pub coeffs: Vec<FilterCoeffs>,
}

impl LayerSpec {
    pub fn new(basis: FilterBasis, family: GroupFamily, coeffs: Vec<FilterCoeffs>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::domain("layer needs at least one coefficient set"));
        }
        if let Some(c) = coeffs.iter().find(|c| c.len() != basis.count()) {
            return Err(Error::domain(format!(
                "expected {} coefficients per filter, got {}",
                basis.count(),
                c.len()
            )));
        }
        Ok(LayerSpec {
            basis,
            family,
            coeffs,
        })
    }

    /// Lifting or projection layer with one filter.
    pub fn single(basis: FilterBasis, family: GroupFamily, coeffs: FilterCoeffs) -> Result<Self> {
        Self::new(basis, family, vec![coeffs])
    }

    fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        let h = grid.spacing();
        if (self.basis.mesh() - h).abs() > 1e-12 * h {
            return Err(Error::domain(format!(
                "filter mesh {} does not match grid spacing {h}",
                self.basis.mesh()
            )));
        }
        Ok(())
    }

    fn check_order(&self, features: &FeatureMap) -> Result<()> {
        if features.order() != self.family.order() {
            return Err(Error::domain(format!(
                "feature order {} does not match group order {}",
                features.order(),
                self.family.order()
            )));
        }
        self.check_grid(features.grid())
    }

    fn steered(&self, k: usize, t: usize) -> Result<Kernel> {
        let a = self.family.element(t)?;
        eval_filter_covering(&self.coeffs[k], &self.basis, &a)
    }
}

fn scaled(mut v: Vec<f64>, s: f64) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Input layer: slice `t` is `h²·(image ⋆ φ(A_t⁻¹·))`.
pub fn lift_conv(image: &Image, layer: &LayerSpec) -> Result<FeatureMap> {
    layer.check_grid(image.grid())?;
    let m = image.side();
    let area = image.grid().cell_area();
    let slices = (0..layer.family.order())
        .into_par_iter()
        .map(|t| {
            let k = layer.steered(0, t)?;
            Ok(scaled(correlate_region(image.values(), m, &k, 0, m), area))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMap {
        grid: *image.grid(),
        order: layer.family.order(),
        values: slices.concat(),
    })
}

/// Intermediate layer: `out_t = h²·Σ_{t′} F_{(t+t′) mod T} ⋆ φ_{t′}(A_t⁻¹·)`.
pub fn group_conv(features: &FeatureMap, layer: &LayerSpec) -> Result<FeatureMap> {
    layer.check_order(features)?;
    let order = features.order();
    if layer.coeffs.len() != order {
        return Err(Error::domain(format!(
            "group layer needs {order} coefficient sets, got {}",
            layer.coeffs.len()
        )));
    }
    let m = features.grid().side();
    let area = features.grid().cell_area();
    let slices = (0..order)
        .into_par_iter()
        .map(|t| {
            let mut acc = vec![0.0; m * m];
            for tp in 0..order {
                let k = layer.steered(tp, t)?;
                let part = correlate_region(features.slice((t + tp) % order), m, &k, 0, m);
                acc.iter_mut().zip(&part).for_each(|(a, p)| *a += p);
            }
            Ok(scaled(acc, area))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMap {
        grid: *features.grid(),
        order,
        values: slices.concat(),
    })
}

/// Output layer: `out = (1/T)·Σ_t h²·F_t ⋆ φ(A_t⁻¹·)`.
pub fn project_conv(features: &FeatureMap, layer: &LayerSpec) -> Result<Image> {
    layer.check_order(features)?;
    let order = features.order();
    let m = features.grid().side();
    let parts = (0..order)
        .into_par_iter()
        .map(|t| {
            let k = layer.steered(0, t)?;
            Ok(correlate_region(features.slice(t), m, &k, 0, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = vec![0.0; m * m];
    for part in &parts {
        acc.iter_mut().zip(part).for_each(|(a, p)| *a += p);
    }
    let s = features.grid().cell_area() / order as f64;
    Ok(Image::from_raw(*features.grid(), scaled(acc, s)))
}

/// Group action on lifted maps: slice `t` of the output is slice `(t − a) mod T`
/// warped by `A_a`.
pub fn lifted_act(features: &FeatureMap, a_index: usize, family: &GroupFamily) -> Result<FeatureMap> {
    lifted_act_with(features, a_index, family, Interpolation::Bilinear)
}

pub fn lifted_act_with(
    features: &FeatureMap,
    a_index: usize,
    family: &GroupFamily,
    method: Interpolation,
) -> Result<FeatureMap> {
    let order = features.order();
    if order != family.order() {
        return Err(Error::domain(format!(
            "feature order {order} does not match group order {}",
            family.order()
        )));
    }
    let a = family.element(a_index)?;
    if a_index == 0 {
        return Ok(features.clone());
    }
    let slices = (0..order)
        .into_par_iter()
        .map(|t| act(&features.slice_image((t + order - a_index) % order), &a, method))
        .collect::<Result<Vec<_>>>()?;
    FeatureMap::from_slices(slices)
}

/// Lift, any number of group layers, then project.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub lift: LayerSpec,
    pub hidden: Vec<LayerSpec>,
    pub project: LayerSpec,
}

impl Pipeline {
    pub fn apply(&self, image: &Image) -> Result<Image> {
        let mut f = lift_conv(image, &self.lift)?;
        for layer in &self.hidden {
            f = group_conv(&f, layer)?;
        }
        project_conv(&f, &self.project)
    }
}

/// Per-element squared equivariance errors and their maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceTable {
    pub per_element: Vec<f64>,
    pub max: f64,
}

/// `e_t = ‖Ψ(act(x, A_t)) − act(Ψ(x), A_t)‖_F² / m²` for every group element.
pub fn equivariance_error<F>(pipeline: F, image: &Image, family: &GroupFamily) -> Result<EquivarianceTable>
where
    F: Fn(&Image) -> Result<Image>,
{
    equivariance_error_with(pipeline, image, family, Interpolation::Bilinear)
}

pub fn equivariance_error_with<F>(
    pipeline: F,
    image: &Image,
    family: &GroupFamily,
    method: Interpolation,
) -> Result<EquivarianceTable>
where
    F: Fn(&Image) -> Result<Image>,
{
    let m2 = (image.side() * image.side()) as f64;
    let base = pipeline(image)?;
    let mut per_element = Vec::with_capacity(family.order());
    for t in 0..family.order() {
        let a: Transform = family.element(t)?;
        let lhs = pipeline(&act(image, &a, method)?)?;
        let rhs = act(&base, &a, method)?;
        per_element.push(lhs.dist_sq(&rhs) / m2);
    }
    let max = per_element.iter().copied().fold(0.0, f64::max);
    Ok(EquivarianceTable { per_element, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{Cutoff, FilterBasis};
    use crate::grid::{sample_function, Analytic, Gaussian};
    use crate::transforms::{rotation, AffineParams};
    use proptest::prelude::*;

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
        fn vec(&mut self, n: usize) -> Vec<f64> {
            (0..n).map(|_| self.next()).collect()
        }
    }

    fn setup(m: usize, order: usize, seed: u64) -> (Image, FilterBasis, GroupFamily, Lcg) {
        let grid = GridSpec::new(0.1, m).unwrap();
        let mut rng = Lcg(seed);
        let img = Image::new(grid, rng.vec(m * m)).unwrap();
        let basis = FilterBasis::new(5, 0.1, Cutoff::Nyquist).unwrap();
        (img, basis, GroupFamily::strict(order).unwrap(), rng)
    }

    fn coeffs(rng: &mut Lcg, n: usize) -> FilterCoeffs {
        FilterCoeffs::new(rng.vec(n)).unwrap()
    }

    fn rel(a: &Image, b: &Image) -> f64 {
        (a.dist_sq(b) / b.sum_sq().max(f64::MIN_POSITIVE)).sqrt()
    }

    #[test]
    fn correlate_matches_nested_loops() {
        let (img, basis, _, mut rng) = setup(13, 1, 1);
        let k = crate::filter::eval_filter(&coeffs(&mut rng, basis.count()), &basis, &rotation(0.3)).unwrap();
        let out = correlate(&img, &k);
        let m = 13isize;
        let h = k.half() as isize;
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for a in -h..=h {
                    for b in -h..=h {
                        s += k.get((a + h) as usize, (b + h) as usize) * img.get_or_zero(i + a, j + b);
                    }
                }
                assert!((out.get(i as usize, j as usize) - s).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lift_t1_is_plain_correlation() {
        let (img, basis, fam, mut rng) = setup(15, 1, 2);
        let c = coeffs(&mut rng, basis.count());
        let layer = LayerSpec::single(basis.clone(), fam, c.clone()).unwrap();
        let f = lift_conv(&img, &layer).unwrap();
        let k = crate::filter::eval_filter(&c, &basis, &Transform::identity()).unwrap();
        let direct = correlate(&img, &k).map(|v| v * 0.01);
        let diff = f.slice(0).iter().zip(direct.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-12);
    }

    #[test]
    fn zero_sum_filter_kills_constants() {
        let grid = GridSpec::new(0.1, 21).unwrap();
        let img = Image::constant(grid, 3.0);
        let basis = FilterBasis::new(5, 0.1, Cutoff::Nyquist).unwrap();
        let mut rng = Lcg(9);
        let mut v = rng.vec(basis.count());
        v[0] = 0.0;
        // The sampled non-DC modes are not exactly zero-sum; remove the residual
        // with the DC mode so the identity-steered filter sums to zero.
        let probe = FilterCoeffs::new(v.clone()).unwrap();
        let k = crate::filter::eval_filter(&probe, &basis, &Transform::identity()).unwrap();
        let dc = crate::filter::eval_filter(&FilterCoeffs::one_hot(basis.count(), 0), &basis, &Transform::identity()).unwrap();
        v[0] = -k.sum() / dc.sum();
        let fam = GroupFamily::strict(4).unwrap();
        let layer = LayerSpec::single(basis, fam, FilterCoeffs::new(v).unwrap()).unwrap();
        let f = lift_conv(&img, &layer).unwrap();
        for t in 0..4 {
            let s = f.slice_image(t);
            for i in 3..18 {
                for j in 3..18 {
                    assert!(s.get(i, j).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let grid = GridSpec::new(0.1, 11).unwrap();
        let basis = FilterBasis::new(3, 0.1, Cutoff::Nyquist).unwrap();
        let fam = GroupFamily::strict(4).unwrap();
        let mut rng = Lcg(4);
        let lift = LayerSpec::single(basis.clone(), fam, coeffs(&mut rng, basis.count())).unwrap();
        let f = lift_conv(&Image::zeros(grid), &lift).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        let hidden = LayerSpec::new(basis.clone(), fam, (0..4).map(|_| coeffs(&mut rng, basis.count())).collect()).unwrap();
        let g = group_conv(&FeatureMap::zeros(grid, 4), &hidden).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        let p = project_conv(&FeatureMap::zeros(grid, 4), &lift).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lift_equivariant_at_quarter_turns() {
        let (img, basis, fam, mut rng) = setup(17, 4, 5);
        let layer = LayerSpec::single(basis.clone(), fam, coeffs(&mut rng, basis.count())).unwrap();
        let r90 = fam.element(1).unwrap();
        let lhs = lift_conv(&act(&img, &r90, Interpolation::Bilinear).unwrap(), &layer).unwrap();
        let rhs = lifted_act(&lift_conv(&img, &layer).unwrap(), 1, &fam).unwrap();
        assert!((lhs.dist_sq(&rhs) / rhs.sum_sq()).sqrt() <= 1e-12);
    }

    #[test]
    fn group_conv_equivariant_at_quarter_turns() {
        let (_, basis, fam, mut rng) = setup(17, 4, 6);
        let grid = GridSpec::new(0.1, 17).unwrap();
        let f = FeatureMap::new(grid, 4, rng.vec(4 * 17 * 17)).unwrap();
        let layer = LayerSpec::new(basis.clone(), fam, (0..4).map(|_| coeffs(&mut rng, basis.count())).collect()).unwrap();
        let lhs = group_conv(&lifted_act(&f, 1, &fam).unwrap(), &layer).unwrap();
        let rhs = lifted_act(&group_conv(&f, &layer).unwrap(), 1, &fam).unwrap();
        assert!((lhs.dist_sq(&rhs) / rhs.sum_sq()).sqrt() <= 1e-12);
    }

    #[test]
    fn group_conv_t1_is_plain_correlation() {
        let (img, basis, fam, mut rng) = setup(13, 1, 7);
        let c = coeffs(&mut rng, basis.count());
        let layer = LayerSpec::single(basis, fam, c).unwrap();
        let f = FeatureMap::from_slices(vec![img.clone()]).unwrap();
        let g = group_conv(&f, &layer).unwrap();
        let l = lift_conv(&img, &layer).unwrap();
        assert_eq!(g, l);
    }

    #[test]
    fn project_delta_recovers_slice() {
        let grid = GridSpec::new(0.1, 9).unwrap();
        let mut rng = Lcg(8);
        let slice = Image::new(grid, rng.vec(81)).unwrap();
        let basis = FilterBasis::new(3, 0.1, Cutoff::Nyquist).unwrap();
        // Coefficients reproducing the centre impulse on the 3×3 grid.
        let sampled = basis.sample(&Transform::identity(), 1);
        let k = basis.count();
        let mut a = vec![vec![0.0; k]; k];
        let mut rhs = vec![0.0; k];
        for p in 0..k {
            for q in 0..k {
                a[p][q] = (0..9).map(|c| sampled[p][c] * sampled[q][c]).sum();
            }
            rhs[p] = sampled[p][4];
        }
        let c = crate::linalg::solve_spd(&a, &rhs).unwrap();
        let layer = LayerSpec::single(basis, GroupFamily::strict(1).unwrap(), FilterCoeffs::new(c).unwrap()).unwrap();
        let out = project_conv(&FeatureMap::from_slices(vec![slice.clone()]).unwrap(), &layer).unwrap();
        let back = out.map(|v| v / grid.cell_area());
        assert!(rel(&back, &slice) <= 1e-10);
    }

    #[test]
    fn pipeline_exact_for_p4() {
        let (img, basis, fam, mut rng) = setup(19, 4, 10);
        let pipe = Pipeline {
            lift: LayerSpec::single(basis.clone(), fam, coeffs(&mut rng, basis.count())).unwrap(),
            hidden: vec![LayerSpec::new(basis.clone(), fam, (0..4).map(|_| coeffs(&mut rng, basis.count())).collect()).unwrap()],
            project: LayerSpec::single(basis.clone(), fam, coeffs(&mut rng, basis.count())).unwrap(),
        };
        let table = equivariance_error(|x| pipe.apply(x), &img, &fam).unwrap();
        assert!(table.max <= 1e-24, "{:?}", table);
        let r90 = fam.element(1).unwrap();
        let lhs = pipe.apply(&act(&img, &r90, Interpolation::Bilinear).unwrap()).unwrap();
        let rhs = act(&pipe.apply(&img).unwrap(), &r90, Interpolation::Bilinear).unwrap();
        assert!(rel(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn identity_pipeline_error_is_round_trip_noise() {
        let grid = GridSpec::unit(128).unwrap();
        let img = sample_function(
            &Analytic::Gaussian(Gaussian::anisotropic(0.08, 0.05, 0.3).centered_at([0.04, 0.0])),
            &grid,
        )
        .unwrap();
        let fam = GroupFamily::strict(8).unwrap();
        let table = equivariance_error(|x| Ok(x.clone()), &img, &fam).unwrap();
        assert!(table.max <= 1e-4);
        assert_eq!(table.per_element[0], 0.0);
    }

    #[test]
    fn mismatched_orders_rejected() {
        let grid = GridSpec::new(0.1, 9).unwrap();
        let basis = FilterBasis::new(3, 0.1, Cutoff::Nyquist).unwrap();
        let layer = LayerSpec::single(basis.clone(), GroupFamily::strict(4).unwrap(), FilterCoeffs::one_hot(9, 0)).unwrap();
        assert!(group_conv(&FeatureMap::zeros(grid, 3), &layer).is_err());
        assert!(project_conv(&FeatureMap::zeros(grid, 3), &layer).is_err());
        assert!(lifted_act(&FeatureMap::zeros(grid, 3), 1, &GroupFamily::strict(4).unwrap()).is_err());
        let wrong_mesh = GridSpec::new(0.2, 9).unwrap();
        assert!(lift_conv(&Image::zeros(wrong_mesh), &layer).is_err());
    }

    #[test]
    fn lifted_act_slice_structure() {
        let grid = GridSpec::new(0.1, 15).unwrap();
        let mut rng = Lcg(12);
        let f = FeatureMap::new(grid, 6, rng.vec(6 * 225)).unwrap();
        let fam = GroupFamily::new(6, AffineParams::new(0.2, 1.3, 0.8).unwrap()).unwrap();
        let g = lifted_act(&f, 2, &fam).unwrap();
        let a = fam.element(2).unwrap();
        for t in 0..6 {
            let expect = act(&f.slice_image((t + 4) % 6), &a, Interpolation::Bilinear).unwrap();
            assert_eq!(g.slice_image(t), expect);
        }
        assert_eq!(lifted_act(&f, 0, &fam).unwrap(), f);
    }

    #[test]
    fn lifted_act_composes() {
        let grid = GridSpec::new(0.1, 15).unwrap();
        let mut rng = Lcg(13);
        let f = FeatureMap::new(grid, 4, rng.vec(4 * 225)).unwrap();
        let fam = GroupFamily::strict(4).unwrap();
        for (a, b) in [(1, 2), (3, 3), (2, 1)] {
            let twice = lifted_act(&lifted_act(&f, a, &fam).unwrap(), b, &fam).unwrap();
            let once = lifted_act(&f, (a + b) % 4, &fam).unwrap();
            assert!((twice.dist_sq(&once) / once.sum_sq()).sqrt() <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn pipeline_is_linear(seed in 0u64..10_000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let (x, basis, fam, mut rng) = setup(13, 4, seed);
            let y = Image::new(*x.grid(), rng.vec(169)).unwrap();
            let pipe = Pipeline {
                lift: LayerSpec::single(basis.clone(), fam, coeffs(&mut rng, basis.count())).unwrap(),
                hidden: vec![],
                project: LayerSpec::single(basis.clone(), fam, coeffs(&mut rng, basis.count())).unwrap(),
            };
            let mix = x.lincomb(a, &y, b).unwrap();
            let lhs = pipe.apply(&mix).unwrap();
            let rhs = pipe.apply(&x).unwrap().lincomb(a, &pipe.apply(&y).unwrap(), b).unwrap();
            prop_assert!(rel(&lhs, &rhs) <= 1e-10);
        }

        #[test]
        fn p4_layers_exact_on_random_inputs(seed in 0u64..10_000, t in 1usize..4) {
            let (img, basis, fam, mut rng) = setup(11, 4, seed);
            let pipe = Pipeline {
                lift: LayerSpec::single(basis.clone(), fam, coeffs(&mut rng, basis.count())).unwrap(),
                hidden: vec![],
                project: LayerSpec::single(basis.clone(), fam, coeffs(&mut rng, basis.count())).unwrap(),
            };
            let a = fam.element(t).unwrap();
            let lhs = pipe.apply(&act(&img, &a, Interpolation::Bilinear).unwrap()).unwrap();
            let rhs = act(&pipe.apply(&img).unwrap(), &a, Interpolation::Bilinear).unwrap();
            prop_assert!(rel(&lhs, &rhs) <= 1e-12);
        }
    }
}
