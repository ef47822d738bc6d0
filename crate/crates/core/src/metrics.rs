//! Image quality metrics. The data range (`MAX`) is always the maximum pixel
//! of the reference image, following the fastMRI evaluation code.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// SSIM window side length.
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn data_range(reference: &ImageGrid) -> Result<f64> {
    let max = reference.max();
    if max <= 0.0 {
        return Err(Error::invalid(format!(
            "reference maximum is {max}; PSNR/SSIM need a positive data range"
        )));
    }
    Ok(max)
}

/// `20 log10(MAX) - 10 log10(MSE)` in dB; `+inf` for identical images.
pub fn psnr(reference: &ImageGrid, test: &ImageGrid) -> Result<f64> {
    let mse = reference.mse(test)?;
    let max = data_range(reference)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * max.log10() - 10.0 * mse.log10())
}

/// Mean SSIM over all fully contained 7x7 uniform windows, with
/// `c1 = (0.01 MAX)^2`, `c2 = (0.03 MAX)^2` and unbiased window
/// (co)variances.
pub fn ssim(reference: &ImageGrid, test: &ImageGrid) -> Result<f64> {
    let shape = reference.shape();
    shape.ensure_eq(test.shape())?;
    if shape.height < SSIM_WINDOW || shape.width < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {shape}"
        )));
    }
    let max = data_range(reference)?;
    let c1 = (SSIM_K1 * max).powi(2);
    let c2 = (SSIM_K2 * max).powi(2);

    let x = reference.pixels();
    let y = test.pixels();
    let w = shape.width;
    let iw = w + 1;
    // Second moments are accumulated on globally centered data to limit
    // cancellation; (co)variances are shift invariant.
    let cx = x.iter().sum::<f64>() / x.len() as f64;
    let cy = y.iter().sum::<f64>() / y.len() as f64;
    let mut tables = vec![[0.0f64; 7]; (shape.height + 1) * iw];
    for r in 0..shape.height {
        let mut row = [0.0f64; 7];
        for c in 0..w {
            let a = x[r * w + c];
            let b = y[r * w + c];
            let (da, db) = (a - cx, b - cy);
            let vals = [a, b, da * da, db * db, da * db, da, db];
            for t in 0..7 {
                row[t] += vals[t];
                tables[(r + 1) * iw + c + 1][t] = tables[r * iw + c + 1][t] + row[t];
            }
        }
    }
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let cov_norm = n / (n - 1.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=shape.height - SSIM_WINDOW {
        for c in 0..=w - SSIM_WINDOW {
            let (r1, c1_) = (r + SSIM_WINDOW, c + SSIM_WINDOW);
            let mut s = [0.0; 7];
            for (t, v) in s.iter_mut().enumerate() {
                *v = (tables[r1 * iw + c1_][t] - tables[r * iw + c1_][t] - tables[r1 * iw + c][t]
                    + tables[r * iw + c][t])
                    / n;
            }
            let (mx, my) = (s[0], s[1]);
            let (dx, dy) = (s[5], s[6]);
            let vx = cov_norm * (s[2] - dx * dx);
            let vy = cov_norm * (s[3] - dy * dy);
            let vxy = cov_norm * (s[4] - dx * dy);
            total += ((2.0 * mx * my + c1) * (2.0 * vxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Reconstruction loss used throughout: `1 - SSIM`.
pub fn ssim_loss(reference: &ImageGrid, test: &ImageGrid) -> Result<f64> {
    Ok(1.0 - ssim(reference, test)?)
}

/// Mean of the lowest `fraction` of values (at least one value).
pub fn lower_tail_mean(values: &[f64], fraction: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len());
    sorted[..k].iter().sum::<f64>() / k as f64
}
