//! Posterior samplers: given low-frequency k-space data, draw full-resolution
//! images that agree with it.
//!
//! Two samplers are provided. `gaussian_spectral` has a closed-form
//! posterior variance and serves as the oracle for the estimator tests.
//! `jitter_ensemble` is a heuristic that derives its spread from the
//! observed image, so it produces image-dependent uncertainty on arbitrary
//! inputs.
//!
//! Samples are real images. For a real image, acquiring a coefficient also
//! fixes its conjugate mirror, so every sample agrees with the data on the
//! mask and on its mirror, and the posterior variance is zero on both.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, KGrid, Shape};
use crate::mask::SamplingMask;
use crate::rng::{derive_seed, rng_from_seed};
use crate::transforms::{
    apply_mask, conjugate_fill, determined_cells, fft2_centered, idft2_unitary, ifft2_centered,
};
use crate::uncertainty::UncertaintyMap;

/// Side length of the local-energy window of the jitter sampler.
pub const LOCAL_ENERGY_WINDOW: usize = 7;

/// Exponent sharpening the jitter sampler's angular weighting.
const ANGULAR_SHARPNESS: i32 = 8;

/// Angular weight floor, so no direction is ruled out entirely.
const ANGULAR_FLOOR: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerVariant {
    GaussianSpectral,
    JitterEnsemble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub variant: SamplerVariant,
    /// Radial decay exponent of the prior power.
    pub alpha: f64,
    /// Prior power scale.
    pub amplitude: f64,
    /// Spread multiplier; 0 collapses every draw to the posterior mean.
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SamplerSpec {
    pub fn gaussian_spectral(alpha: f64, amplitude: f64, temperature: f64, seed: u64) -> Self {
        SamplerSpec {
            variant: SamplerVariant::GaussianSpectral,
            alpha,
            amplitude,
            temperature,
            seed,
        }
    }

    pub fn jitter_ensemble(alpha: f64, amplitude: f64, temperature: f64, seed: u64) -> Self {
        SamplerSpec {
            variant: SamplerVariant::JitterEnsemble,
            alpha,
            amplitude,
            temperature,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SamplerSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid(format!(
                "amplitude must be > 0, got {}",
                self.amplitude
            )));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Prior power at a cell: `temperature^2 * amplitude / (1 + |f|)^(2 alpha)`
    /// with `|f|` the radial frequency in grid units.
    pub fn prior_power(&self, shape: Shape, index: usize) -> f64 {
        let f = shape.radial_frequency(index);
        self.temperature * self.temperature * self.amplitude / (1.0 + f).powf(2.0 * self.alpha)
    }
}

#[derive(Clone, Debug)]
pub struct SampleEnsemble {
    pub samples: Vec<ImageGrid>,
    pub source_mask: SamplingMask,
    pub sampler: SamplerSpec,
}

/// Draws `count` samples with the sampler named by `spec.variant`.
pub fn sample(lf_k: &KGrid, m0: &SamplingMask, spec: &SamplerSpec, count: usize) -> Result<SampleEnsemble> {
    match spec.variant {
        SamplerVariant::GaussianSpectral => gaussian_spectral_sample(lf_k, m0, spec, count),
        SamplerVariant::JitterEnsemble => jitter_ensemble_sample(lf_k, m0, spec, count),
    }
}

fn check_inputs(
    lf_k: &KGrid,
    m0: &SamplingMask,
    spec: &SamplerSpec,
    count: usize,
    expected: SamplerVariant,
) -> Result<()> {
    if spec.variant != expected {
        return Err(Error::invalid(format!(
            "sampler spec variant {:?} used with the {:?} sampler",
            spec.variant, expected
        )));
    }
    spec.validate()?;
    if count < 1 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    m0.ensure_shape(lf_k.shape())
}

/// Posterior mean for a real image: the acquired data, its conjugate mirror,
/// zeros elsewhere.
fn posterior_mean(lf_k: &KGrid, m0: &SamplingMask) -> Result<KGrid> {
    conjugate_fill(&apply_mask(lf_k, m0)?, m0)
}

/// Gaussian prior on the unacquired coefficients with radially decaying power.
///
/// Unacquired cells are drawn as circular complex Gaussians with variance
/// [`SamplerSpec::prior_power`]; each conjugate pair shares one draw and
/// self-conjugate cells are drawn real with the same variance, so samples are
/// real images.
pub fn gaussian_spectral_sample(
    lf_k: &KGrid,
    m0: &SamplingMask,
    spec: &SamplerSpec,
    count: usize,
) -> Result<SampleEnsemble> {
    check_inputs(lf_k, m0, spec, count, SamplerVariant::GaussianSpectral)?;
    let shape = lf_k.shape();
    let mean = posterior_mean(lf_k, m0)?;
    let known = determined_cells(m0);
    let sigma: Vec<f64> = (0..shape.len())
        .map(|i| spec.prior_power(shape, i).sqrt())
        .collect();

    let samples = (0..count)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_from_seed(derive_seed(spec.seed, s as u64));
            let mut coeffs = mean.coeffs().to_vec();
            for i in 0..shape.len() {
                let j = shape.mirror(i);
                if known[i] || j < i {
                    continue;
                }
                let a: f64 = rng.sample(StandardNormal);
                if j == i {
                    coeffs[i] = Complex64::new(sigma[i] * a, 0.0);
                } else {
                    let b: f64 = rng.sample(StandardNormal);
                    let z = Complex64::new(a, b) * (sigma[i] / std::f64::consts::SQRT_2);
                    coeffs[i] = z;
                    coeffs[j] = z.conj();
                }
            }
            let k = KGrid::new(shape, coeffs).expect("finite draws");
            idft2_unitary(&k).image
        })
        .collect();

    Ok(SampleEnsemble {
        samples,
        source_mask: m0.clone(),
        sampler: spec.clone(),
    })
}

/// Closed-form posterior variance of [`gaussian_spectral_sample`]: zero on the
/// acquired cells and their mirrors, the prior power elsewhere.
pub fn analytic_posterior_variance(m0: &SamplingMask, spec: &SamplerSpec) -> Result<UncertaintyMap> {
    if spec.variant != SamplerVariant::GaussianSpectral {
        return Err(Error::invalid(
            "the jitter ensemble has no closed-form posterior variance",
        ));
    }
    spec.validate()?;
    let shape = m0.shape();
    let known = determined_cells(m0);
    let values = (0..shape.len())
        .map(|i| if known[i] { 0.0 } else { spec.prior_power(shape, i) })
        .collect();
    UncertaintyMap::new(shape, values)
}

/// Moving RMS over a `window x window` neighbourhood, truncated at the borders.
pub fn local_rms(img: &ImageGrid, window: usize) -> ImageGrid {
    let shape = img.shape();
    let half = window / 2;
    ImageGrid::from_fn(shape, |r, c| {
        let r0 = r.saturating_sub(half);
        let r1 = (r + half + 1).min(shape.height);
        let c0 = c.saturating_sub(half);
        let c1 = (c + half + 1).min(shape.width);
        let mut acc = 0.0;
        for rr in r0..r1 {
            for cc in c0..c1 {
                let p = img.get(rr, cc);
                acc += p * p;
            }
        }
        (acc / ((r1 - r0) * (c1 - c0)) as f64).sqrt()
    })
}

/// Trace-normalized spectral orientation tensor `sum |k|^2 u u^T / trace` over
/// the known non-DC cells, with `u` the unit frequency direction in cycles per
/// pixel. Returned as `[[yy, yx], [yx, xx]]`.
fn orientation_tensor(k: &KGrid, known: &[bool]) -> [[f64; 2]; 2] {
    let shape = k.shape();
    let mut t = [[0.0; 2]; 2];
    for (i, c) in k.coeffs().iter().enumerate() {
        let (ky, kx) = shape.frequency(i);
        if !known[i] || (ky == 0 && kx == 0) {
            continue;
        }
        let fy = ky as f64 / shape.height as f64;
        let fx = kx as f64 / shape.width as f64;
        let n2 = fy * fy + fx * fx;
        let e = c.norm_sqr();
        t[0][0] += e * fy * fy / n2;
        t[0][1] += e * fy * fx / n2;
        t[1][1] += e * fx * fx / n2;
    }
    t[1][0] = t[0][1];
    let trace = t[0][0] + t[1][1];
    if trace > 0.0 {
        for row in t.iter_mut() {
            for v in row.iter_mut() {
                *v /= trace;
            }
        }
        t
    } else {
        [[0.5, 0.0], [0.0, 0.5]]
    }
}

/// Per-cell power of the jitter sampler's colored noise before envelope
/// scaling: the radial prior times an angular weight that follows the
/// orientation of the observed spectrum.
pub fn jitter_noise_power(lf_k: &KGrid, m0: &SamplingMask, spec: &SamplerSpec) -> Result<Vec<f64>> {
    let shape = lf_k.shape();
    let mean = posterior_mean(lf_k, m0)?;
    let known = determined_cells(m0);
    let t = orientation_tensor(&mean, &known);
    let half_trace = (t[0][0] + t[1][1]) / 2.0;
    let gap = (((t[0][0] - t[1][1]) / 2.0).powi(2) + t[0][1] * t[0][1]).sqrt();
    let lambda_max = half_trace + gap;
    Ok((0..shape.len())
        .map(|i| {
            let (ky, kx) = shape.frequency(i);
            let angular = if ky == 0 && kx == 0 {
                1.0
            } else {
                let fy = ky as f64 / shape.height as f64;
                let fx = kx as f64 / shape.width as f64;
                let n2 = fy * fy + fx * fx;
                let q = (t[0][0] * fy * fy + 2.0 * t[0][1] * fy * fx + t[1][1] * fx * fx) / n2;
                ANGULAR_FLOOR + (q / lambda_max).clamp(0.0, 1.0).powi(ANGULAR_SHARPNESS)
            };
            spec.prior_power(shape, i) * angular
        })
        .collect())
}

/// Heuristic image-adaptive sampler.
///
/// Each sample is the conjugate-filled zero-fill image plus a perturbation:
/// white Gaussian noise is colored with [`jitter_noise_power`], scaled
/// pointwise by the RMS-normalized local energy of the zero-fill image over a
/// [`LOCAL_ENERGY_WINDOW`]-square window, and high-passed by zeroing the
/// acquired cells and their mirrors. Data consistency on the mask is exact.
pub fn jitter_ensemble_sample(
    lf_k: &KGrid,
    m0: &SamplingMask,
    spec: &SamplerSpec,
    count: usize,
) -> Result<SampleEnsemble> {
    check_inputs(lf_k, m0, spec, count, SamplerVariant::JitterEnsemble)?;
    let shape = lf_k.shape();
    let mean = posterior_mean(lf_k, m0)?;
    let base = idft2_unitary(&mean).image;
    let known = determined_cells(m0);

    let rms = local_rms(&base, LOCAL_ENERGY_WINDOW);
    let mean_sq = rms.energy() / shape.len() as f64;
    let envelope: Vec<f64> = if mean_sq > 0.0 {
        rms.pixels().iter().map(|e| e / mean_sq.sqrt()).collect()
    } else {
        vec![1.0; shape.len()]
    };
    let amplitude: Vec<f64> = jitter_noise_power(lf_k, m0, spec)?
        .into_iter()
        .map(f64::sqrt)
        .collect();

    let samples = (0..count)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_from_seed(derive_seed(spec.seed, s as u64));
            let white: Vec<Complex64> = (0..shape.len())
                .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
                .collect();
            let mut spectrum = fft2_centered(shape, &white);
            for (c, a) in spectrum.iter_mut().zip(&amplitude) {
                *c *= a;
            }
            let colored = ifft2_centered(shape, &spectrum);
            let scaled: Vec<Complex64> = colored
                .iter()
                .zip(&envelope)
                .map(|(v, e)| Complex64::new(v.re * e, 0.0))
                .collect();
            let mut perturbation = fft2_centered(shape, &scaled);
            for (c, &k) in perturbation.iter_mut().zip(&known) {
                if k {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
            let coeffs: Vec<Complex64> = mean
                .coeffs()
                .iter()
                .zip(&perturbation)
                .map(|(a, b)| a + b)
                .collect();
            let k = KGrid::new(shape, coeffs).expect("finite draws");
            idft2_unitary(&k).image
        })
        .collect();

    Ok(SampleEnsemble {
        samples,
        source_mask: m0.clone(),
        sampler: spec.clone(),
    })
}
