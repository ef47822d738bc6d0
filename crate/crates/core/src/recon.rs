//! Reconstructors `h(k; M, theta)`: zero filling and l1-Haar FISTA.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, KGrid, Shape};
use crate::mask::SamplingMask;
use crate::metrics::ssim_loss;
use crate::transforms::{apply_mask, check_consistent, fft2_centered, ifft2_centered, zero_fill_recon};
use crate::wavelet::{check_levels, haar_forward, haar_inverse};

pub const DEFAULT_ITERS: usize = 100;
pub const DEFAULT_WAVELET_LEVELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconVariant {
    ZeroFill,
    Fista,
}

fn default_iters() -> usize {
    DEFAULT_ITERS
}

fn default_levels() -> usize {
    DEFAULT_WAVELET_LEVELS
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconParams {
    pub variant: ReconVariant,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_levels")]
    pub wavelet_levels: usize,
}

impl ReconParams {
    pub fn zero_fill() -> Self {
        ReconParams {
            variant: ReconVariant::ZeroFill,
            lambda: 0.0,
            iters: DEFAULT_ITERS,
            wavelet_levels: DEFAULT_WAVELET_LEVELS,
        }
    }

    pub fn fista(lambda: f64) -> Self {
        ReconParams {
            variant: ReconVariant::Fista,
            lambda,
            iters: DEFAULT_ITERS,
            wavelet_levels: DEFAULT_WAVELET_LEVELS,
        }
    }

    pub fn with_iters(self, iters: usize) -> Self {
        ReconParams { iters, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.iters == 0 {
            return Err(Error::invalid("iters must be at least 1"));
        }
        Ok(())
    }
}

/// FISTA lambdas of the default tuning grid: 13 points, geometric, 1e-4 to 1e-1.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / 12.0)).collect()
}

pub fn default_grid() -> Vec<ReconParams> {
    default_lambda_grid().into_iter().map(ReconParams::fista).collect()
}

/// `h(masked_k; m, theta)`.
pub fn reconstruct(masked_k: &KGrid, m: &SamplingMask, theta: &ReconParams) -> Result<ImageGrid> {
    theta.validate()?;
    match theta.variant {
        ReconVariant::ZeroFill => zero_fill_recon(masked_k, m),
        ReconVariant::Fista => Ok(fista(masked_k, m, theta)?.image),
    }
}

/// FISTA output with the objective after every iteration.
#[derive(Clone, Debug)]
pub struct FistaRun {
    pub image: ImageGrid,
    pub objective_trace: Vec<f64>,
}

struct Problem<'a> {
    shape: Shape,
    cells: Vec<bool>,
    data: &'a [Complex64],
    lambda: f64,
    levels: usize,
}

impl Problem<'_> {
    fn residual(&self, x: &[f64]) -> Vec<Complex64> {
        let spatial: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut k = fft2_centered(self.shape, &spatial);
        for ((v, &on), d) in k.iter_mut().zip(&self.cells).zip(self.data) {
            *v = if on { *v - d } else { Complex64::new(0.0, 0.0) };
        }
        k
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let fidelity: f64 = self.residual(x).iter().map(|c| c.norm_sqr()).sum::<f64>() / 2.0;
        if self.lambda == 0.0 {
            return fidelity;
        }
        let mut w = x.to_vec();
        haar_forward(&mut w, self.shape, self.levels);
        fidelity + self.lambda * w.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        ifft2_centered(self.shape, &self.residual(x))
            .into_iter()
            .map(|v| v.re)
            .collect()
    }

    fn prox(&self, mut v: Vec<f64>) -> Vec<f64> {
        if self.lambda == 0.0 {
            return v;
        }
        haar_forward(&mut v, self.shape, self.levels);
        for c in v.iter_mut() {
            *c = c.signum() * (c.abs() - self.lambda).max(0.0);
        }
        haar_inverse(&mut v, self.shape, self.levels);
        v
    }
}

/// Monotone FISTA for `lambda ||Psi x||_1 + 1/2 ||M F x - masked_k||^2` over
/// real images, `Psi` the orthonormal Haar transform. The step is 1 since
/// `M F` has operator norm at most 1. Starts from the zero-filled image.
pub fn fista(masked_k: &KGrid, m: &SamplingMask, theta: &ReconParams) -> Result<FistaRun> {
    theta.validate()?;
    check_consistent(masked_k, m)?;
    let shape = masked_k.shape();
    check_levels(shape, theta.wavelet_levels)?;
    let problem = Problem {
        shape,
        cells: m.cells(),
        data: masked_k.coeffs(),
        lambda: theta.lambda,
        levels: theta.wavelet_levels,
    };

    let mut x: Vec<f64> = ifft2_centered(shape, masked_k.coeffs())
        .into_iter()
        .map(|v| v.re)
        .collect();
    let mut fx = problem.objective(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut trace = Vec::with_capacity(theta.iters);
    for _ in 0..theta.iters {
        let g = problem.gradient(&y);
        let z = problem.prox(y.iter().zip(&g).map(|(a, b)| a - b).collect());
        let fz = problem.objective(&z);
        let (x_next, f_next) = if fz <= fx { (z.clone(), fz) } else { (x.clone(), fx) };
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let a = t / t_next;
        let b = (t - 1.0) / t_next;
        y = (0..x.len())
            .map(|i| x_next[i] + a * (z[i] - x_next[i]) + b * (x_next[i] - x[i]))
            .collect();
        x = x_next;
        fx = f_next;
        t = t_next;
        trace.push(fx);
    }
    Ok(FistaRun {
        image: ImageGrid::new(shape, x)?,
        objective_trace: trace,
    })
}

/// Mean `1 - SSIM` of `theta` on `m` over a training set of full k-space
/// grids and their ground-truth images.
pub fn empirical_risk(
    training_k: &[KGrid],
    training_img: &[ImageGrid],
    m: &SamplingMask,
    theta: &ReconParams,
) -> Result<f64> {
    if training_k.is_empty() || training_k.len() != training_img.len() {
        return Err(Error::invalid(format!(
            "training set needs matching nonempty k-space and image lists ({} vs {})",
            training_k.len(),
            training_img.len()
        )));
    }
    let losses = training_k
        .par_iter()
        .zip(training_img.par_iter())
        .map(|(k, img)| {
            let rec = reconstruct(&apply_mask(k, m)?, m, theta)?;
            ssim_loss(img, &rec)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Picks the candidate with the lowest empirical risk on `m`; ties go to the
/// earliest candidate.
pub fn tune_theta(
    training_k: &[KGrid],
    training_img: &[ImageGrid],
    m: &SamplingMask,
    grid: &[ReconParams],
) -> Result<(ReconParams, f64)> {
    if grid.is_empty() {
        return Err(Error::invalid("tuning grid is empty"));
    }
    let risks = grid
        .par_iter()
        .map(|theta| empirical_risk(training_k, training_img, m, theta))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, r) in risks.iter().enumerate() {
        if *r < risks[best] {
            best = i;
        }
    }
    Ok((grid[best], risks[best]))
}

/// Like [`tune_theta`], but every training item comes with its own mask.
pub fn tune_theta_per_item(
    training_k: &[KGrid],
    training_img: &[ImageGrid],
    masks: &[SamplingMask],
    grid: &[ReconParams],
) -> Result<(ReconParams, f64)> {
    if grid.is_empty() {
        return Err(Error::invalid("tuning grid is empty"));
    }
    if training_k.is_empty() || training_k.len() != training_img.len() || training_k.len() != masks.len() {
        return Err(Error::invalid(format!(
            "need matching nonempty k-space, image and mask lists ({}, {}, {})",
            training_k.len(),
            training_img.len(),
            masks.len()
        )));
    }
    let risks = grid
        .par_iter()
        .map(|theta| {
            let losses = training_k
                .par_iter()
                .zip(training_img.par_iter())
                .zip(masks.par_iter())
                .map(|((k, img), m)| ssim_loss(img, &reconstruct(&apply_mask(k, m)?, m, theta)?))
                .collect::<Result<Vec<f64>>>()?;
            Ok(losses.iter().sum::<f64>() / losses.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, r) in risks.iter().enumerate() {
        if *r < risks[best] {
            best = i;
        }
    }
    Ok((grid[best], risks[best]))
}
