//! High-frequency uncertainty: per-location k-space sample variance of a
//! posterior ensemble, its unit-norm signature, and the unacquired-error
//! estimator built on it.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Shape;
use crate::mask::SamplingMask;
use crate::rng::rng_from_seed;
use crate::samplers::SampleEnsemble;
use crate::transforms::{dft2_unitary, idft1_unitary};

/// Nonnegative value per k-space cell, in squared coefficient magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyMap {
    shape: Shape,
    values: Vec<f64>,
}

impl UncertaintyMap {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::invalid(format!(
                "uncertainty map {shape} needs {} values, got {}",
                shape.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "uncertainty value {} at index {i} is not finite and nonnegative",
                values[i]
            )));
        }
        Ok(UncertaintyMap { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        UncertaintyMap {
            shape,
            values: vec![0.0; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        UncertaintyMap::new(self.shape, self.values.iter().map(|v| v * factor).collect())
    }
}

/// Unit-L2 uncertainty signature.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedUncertainty(UncertaintyMap);

impl NormalizedUncertainty {
    pub fn as_map(&self) -> &UncertaintyMap {
        &self.0
    }

    pub fn shape(&self) -> Shape {
        self.0.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.0.values
    }

    pub fn into_map(self) -> UncertaintyMap {
        self.0
    }
}

/// Unbiased per-cell variance of the ensemble's k-space coefficients,
/// `1/(S-1) sum_s |k_s - mean|^2`.
pub fn kspace_sample_variance(ens: &SampleEnsemble) -> Result<UncertaintyMap> {
    let s = ens.samples.len();
    if s < 2 {
        return Err(Error::invalid(format!(
            "sample variance needs at least 2 samples, got {s}"
        )));
    }
    let shape = ens.samples[0].shape();
    for img in &ens.samples {
        shape.ensure_eq(img.shape())?;
    }
    let spectra: Vec<Vec<Complex64>> = ens
        .samples
        .par_iter()
        .map(|img| dft2_unitary(img).into_coeffs())
        .collect();
    // shifted by the first sample, so identical samples give exactly zero
    let pivot = spectra[0].clone();
    let mut mean = vec![Complex64::new(0.0, 0.0); shape.len()];
    for spec in &spectra {
        for ((m, c), p) in mean.iter_mut().zip(spec).zip(&pivot) {
            *m += c - p;
        }
    }
    for m in mean.iter_mut() {
        *m /= s as f64;
    }
    let mut var = vec![0.0; shape.len()];
    for spec in &spectra {
        for (((v, c), m), p) in var.iter_mut().zip(spec).zip(&mean).zip(&pivot) {
            *v += (c - p - m).norm_sqr();
        }
    }
    for v in var.iter_mut() {
        *v /= (s - 1) as f64;
    }
    UncertaintyMap::new(shape, var)
}

/// `u = v / ||v||_2`. A zero map means the ensemble carried no spread.
pub fn normalize_uncertainty(v: &UncertaintyMap) -> Result<NormalizedUncertainty> {
    let norm = v.l2_norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateUncertainty);
    }
    let values = v.values.iter().map(|x| x / norm).collect();
    Ok(NormalizedUncertainty(UncertaintyMap {
        shape: v.shape,
        values,
    }))
}

/// Sum of the uncertainty over cells the mask leaves unacquired.
///
/// With a posterior-sample variance map this estimates the expected squared
/// error on the unacquired coefficients. It upper-bounds the full
/// reconstruction error only when the error on acquired coefficients is
/// negligible next to the unacquired one and the posterior and reconstructor
/// are both well fit; neither condition is checked here.
pub fn estimate_unacquired_mse(v: &UncertaintyMap, m: &SamplingMask) -> Result<f64> {
    m.ensure_shape(v.shape)?;
    let cells = m.cells();
    Ok(v
        .values
        .iter()
        .zip(cells)
        .filter(|(_, on)| !on)
        .map(|(x, _)| x)
        .sum())
}

/// Energy of a k-space map in the two axis wedges: `vertical` sums cells with
/// `|ky| > |kx|`, `horizontal` those with `|kx| > |ky|`, both with frequencies
/// in cycles per pixel. Diagonal cells and DC count toward neither.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AxisBands {
    pub vertical: f64,
    pub horizontal: f64,
}

impl AxisBands {
    pub fn of(shape: Shape, values: &[f64]) -> Self {
        let mut bands = AxisBands {
            vertical: 0.0,
            horizontal: 0.0,
        };
        for (i, &v) in values.iter().enumerate() {
            let (ky, kx) = shape.frequency(i);
            let fy = (ky as f64 / shape.height as f64).abs();
            let fx = (kx as f64 / shape.width as f64).abs();
            if fy > fx {
                bands.vertical += v;
            } else if fx > fy {
                bands.horizontal += v;
            }
        }
        bands
    }

    /// `vertical / horizontal`.
    pub fn ratio(&self) -> f64 {
        self.vertical / self.horizontal
    }
}

/// Outcome of comparing the k-space variance of a random image with the
/// inverse transform of its per-pixel variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonCommutationReport {
    /// Variance of the selected inverse-DFT component.
    pub lhs: f64,
    /// Modulus of the selected component of the inverse DFT of the per-pixel
    /// variance vector.
    pub rhs: f64,
    pub distinct: bool,
}

/// Component inspected by the check: the second one, or the only one for
/// length 1.
fn probe_index(length: usize) -> usize {
    usize::from(length > 1)
}

/// Closed-form values for an identity-covariance input: the component
/// variance is `(F^H F)_ii` and the transformed variance vector is
/// `f_i^H 1`.
pub fn non_commutation_analytic(length: usize) -> Result<NonCommutationReport> {
    if length == 0 {
        return Err(Error::invalid("length must be positive"));
    }
    let i = probe_index(length);
    let n = length as f64;
    let column = |l: usize| {
        let phase = -2.0 * std::f64::consts::PI * ((l * i) % length) as f64 / n;
        Complex64::from_polar(1.0 / n.sqrt(), phase)
    };
    let lhs: f64 = (0..length).map(|l| column(l).norm_sqr()).sum();
    let rhs = (0..length)
        .map(|l| column(l).conj())
        .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
        .norm();
    Ok(NonCommutationReport {
        lhs,
        rhs,
        distinct: length > 1 && (lhs - rhs).abs() > 0.5,
    })
}

/// Monte-Carlo version: draws `trials` standard normal real vectors, then
/// estimates the variance of component `i` of `F^H x` and the inverse DFT of
/// the per-component sample variances.
pub fn theorem_s1_check(length: usize, trials: usize, seed: u64) -> Result<NonCommutationReport> {
    if length == 0 {
        return Err(Error::invalid("length must be positive"));
    }
    if trials < 2 {
        return Err(Error::invalid("need at least 2 trials"));
    }
    let i = probe_index(length);
    let mut rng = rng_from_seed(seed);
    let mut x_sum = vec![0.0; length];
    let mut x_sq = vec![0.0; length];
    let mut y_sum = Complex64::new(0.0, 0.0);
    let mut y_sq = 0.0;
    for _ in 0..trials {
        let x: Vec<Complex64> = (0..length)
            .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0))
            .collect();
        let y = idft1_unitary(&x)[i];
        y_sum += y;
        y_sq += y.norm_sqr();
        for l in 0..length {
            x_sum[l] += x[l].re;
            x_sq[l] += x[l].re * x[l].re;
        }
    }
    let t = trials as f64;
    let lhs = (y_sq - y_sum.norm_sqr() / t) / (t - 1.0);
    let pixel_var: Vec<Complex64> = (0..length)
        .map(|l| Complex64::new((x_sq[l] - x_sum[l] * x_sum[l] / t) / (t - 1.0), 0.0))
        .collect();
    let rhs = idft1_unitary(&pixel_var)[i].norm();
    let tol = 6.0 / t.sqrt();
    Ok(NonCommutationReport {
        lhs,
        rhs,
        distinct: length > 1 && (lhs - rhs).abs() > tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ImageGrid;
    use crate::mask::MaskKind;
    use crate::samplers::SamplerSpec;

    fn ensemble(samples: Vec<ImageGrid>) -> SampleEnsemble {
        let shape = samples[0].shape();
        SampleEnsemble {
            samples,
            source_mask: SamplingMask::empty(shape, MaskKind::Point2d),
            sampler: SamplerSpec::gaussian_spectral(1.0, 1.0, 1.0, 0),
        }
    }

    #[test]
    fn identical_samples_have_zero_variance() {
        let img = ImageGrid::from_fn(Shape::new(4, 4), |r, c| (r * 4 + c) as f64 / 16.0);
        let v = kspace_sample_variance(&ensemble(vec![img.clone(), img.clone(), img])).unwrap();
        assert!(v.values().iter().all(|&x| x < 1e-30));
    }

    #[test]
    fn two_point_variance() {
        // Samples differing by a pure DC offset d differ by d*sqrt(L) at DC.
        let s = Shape::new(4, 4);
        let a = ImageGrid::zeros(s);
        let b = ImageGrid::from_fn(s, |_, _| 0.5);
        let v = kspace_sample_variance(&ensemble(vec![a, b])).unwrap();
        let dc = s.index(2, 2);
        let d: f64 = 0.5 * 4.0;
        assert!((v.values()[dc] - d * d / 2.0).abs() < 1e-12);
        let rest: f64 = v.values().iter().enumerate().filter(|(i, _)| *i != dc).map(|(_, x)| x).sum();
        assert!(rest < 1e-24);
    }

    #[test]
    fn variance_needs_two_samples() {
        let img = ImageGrid::zeros(Shape::new(2, 2));
        assert!(kspace_sample_variance(&ensemble(vec![img])).is_err());
    }

    #[test]
    fn variance_ignores_sample_order() {
        let s = Shape::new(4, 4);
        let imgs: Vec<ImageGrid> = (0..4)
            .map(|k| ImageGrid::from_fn(s, |r, c| ((r * 7 + c * 3 + k * 5) % 11) as f64 / 11.0))
            .collect();
        let fwd = kspace_sample_variance(&ensemble(imgs.clone())).unwrap();
        let rev = kspace_sample_variance(&ensemble(imgs.into_iter().rev().collect())).unwrap();
        for (a, b) in fwd.values().iter().zip(rev.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_three_four_five() {
        let v = UncertaintyMap::new(Shape::new(1, 4), vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        let u = normalize_uncertainty(&v).unwrap();
        assert_eq!(u.values(), &[0.6, 0.8, 0.0, 0.0]);
        let uu = normalize_uncertainty(u.as_map()).unwrap();
        for (a, b) in u.values().iter().zip(uu.values()) {
            assert!((a - b).abs() <= 1e-15);
        }
        let scaled = normalize_uncertainty(&v.scaled(1234.5).unwrap()).unwrap();
        for (a, b) in u.values().iter().zip(scaled.values()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn normalize_rejects_zero_map() {
        let v = UncertaintyMap::zeros(Shape::new(2, 2));
        assert!(matches!(normalize_uncertainty(&v), Err(Error::DegenerateUncertainty)));
    }

    #[test]
    fn unacquired_estimate_extremes() {
        let s = Shape::new(2, 3);
        let v = UncertaintyMap::new(s, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let full = SamplingMask::full(s, MaskKind::Point2d);
        let empty = SamplingMask::empty(s, MaskKind::Point2d);
        assert_eq!(estimate_unacquired_mse(&v, &full).unwrap(), 0.0);
        assert_eq!(estimate_unacquired_mse(&v, &empty).unwrap(), 21.0);
        let line = SamplingMask::new(s, MaskKind::Line1d, vec![1]).unwrap();
        assert_eq!(estimate_unacquired_mse(&v, &line).unwrap(), 14.0);
        let wrong = SamplingMask::empty(Shape::new(3, 2), MaskKind::Point2d);
        assert!(estimate_unacquired_mse(&v, &wrong).is_err());
    }

    #[test]
    fn non_commutation_closed_form() {
        let r = non_commutation_analytic(4).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-15);
        assert!(r.rhs.abs() < 1e-15);
        assert!(r.distinct);
        let one = non_commutation_analytic(1).unwrap();
        assert_eq!(one.lhs, one.rhs);
        assert!(!one.distinct);
    }

    #[test]
    fn non_commutation_monte_carlo() {
        let r = theorem_s1_check(4, 100_000, 42).unwrap();
        assert!((r.lhs - 1.0).abs() < 0.05, "lhs {}", r.lhs);
        assert!(r.rhs < 0.05, "rhs {}", r.rhs);
        assert!(r.distinct);
        let one = theorem_s1_check(1, 1000, 1).unwrap();
        assert!((one.lhs - one.rhs).abs() < 1e-12);
        assert!(!one.distinct);
        assert!(theorem_s1_check(0, 10, 1).is_err());
    }
}
