//! Measurement model: unitary 2-D DFT in centered layout, masking and
//! zero-filled reconstruction.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, KGrid, Shape};
use crate::mask::SamplingMask;

/// Imaginary residual above which reconstructions log a warning.
pub const IMAG_WARN_THRESHOLD: f64 = 1e-6;

/// Tolerance on unacquired coefficients for masked-data consistency checks.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// Planned row/column transforms for one grid shape.
struct Plans {
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<Shape, Arc<Plans>>> = RefCell::new(HashMap::new());
}

fn plans(shape: Shape) -> Arc<Plans> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry(shape)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Plans {
                    row_fwd: planner.plan_fft_forward(shape.width),
                    row_inv: planner.plan_fft_inverse(shape.width),
                    col_fwd: planner.plan_fft_forward(shape.height),
                    col_inv: planner.plan_fft_inverse(shape.height),
                })
            })
            .clone()
    })
}

fn centered_of(standard: usize, n: usize) -> usize {
    (standard + n / 2) % n
}

fn standard_of(centered: usize, n: usize) -> usize {
    (centered + n - n / 2) % n
}

fn fft2_in_place(shape: Shape, data: &mut [Complex64], inverse: bool) {
    let p = plans(shape);
    let (rows, cols) = if inverse {
        (&p.row_inv, &p.col_inv)
    } else {
        (&p.row_fwd, &p.col_fwd)
    };
    rows.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); shape.height];
    for c in 0..shape.width {
        for r in 0..shape.height {
            column[r] = data[r * shape.width + c];
        }
        cols.process(&mut column);
        for r in 0..shape.height {
            data[r * shape.width + c] = column[r];
        }
    }
    let scale = 1.0 / (shape.len() as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Unitary forward DFT of a complex spatial buffer, returned centered.
pub fn fft2_centered(shape: Shape, spatial: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spatial.to_vec();
    fft2_in_place(shape, &mut buf, false);
    let mut out = vec![Complex64::new(0.0, 0.0); shape.len()];
    for r in 0..shape.height {
        let cr = centered_of(r, shape.height);
        for c in 0..shape.width {
            out[shape.index(cr, centered_of(c, shape.width))] = buf[shape.index(r, c)];
        }
    }
    out
}

/// Unitary inverse DFT of a centered k-space buffer.
pub fn ifft2_centered(shape: Shape, centered: &[Complex64]) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); shape.len()];
    for r in 0..shape.height {
        let sr = standard_of(r, shape.height);
        for c in 0..shape.width {
            buf[shape.index(sr, standard_of(c, shape.width))] = centered[shape.index(r, c)];
        }
    }
    fft2_in_place(shape, &mut buf, true);
    buf
}

/// Forward unitary DFT of a real image. The result is flagged as coming from
/// a real image and is conjugate-symmetric.
pub fn dft2_unitary(img: &ImageGrid) -> KGrid {
    let spatial: Vec<Complex64> = img
        .pixels()
        .iter()
        .map(|&p| Complex64::new(p, 0.0))
        .collect();
    let coeffs = fft2_centered(img.shape(), &spatial);
    KGrid::new(img.shape(), coeffs)
        .expect("transform of a valid image is a valid grid")
        .with_real_flag(true)
}

/// Result of an inverse transform: the real part plus the largest discarded
/// imaginary magnitude.
#[derive(Clone, Debug)]
pub struct InverseDft {
    pub image: ImageGrid,
    pub imag_residual: f64,
}

/// Inverse unitary DFT keeping the real part.
pub fn idft2_unitary(k: &KGrid) -> InverseDft {
    let spatial = ifft2_centered(k.shape(), k.coeffs());
    let imag_residual = spatial.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if imag_residual > IMAG_WARN_THRESHOLD {
        log::warn!("inverse DFT discarded imaginary residual {imag_residual:.3e}");
    }
    let pixels = spatial.into_iter().map(|v| v.re).collect();
    InverseDft {
        image: ImageGrid::new(k.shape(), pixels).expect("finite input gives finite output"),
        imag_residual,
    }
}

/// Keeps coefficients on the acquired set and zeroes the rest.
pub fn apply_mask(k: &KGrid, m: &SamplingMask) -> Result<KGrid> {
    m.ensure_shape(k.shape())?;
    let cells = m.cells();
    let coeffs = k
        .coeffs()
        .iter()
        .zip(&cells)
        .map(|(&c, &on)| if on { c } else { Complex64::new(0.0, 0.0) })
        .collect();
    let full = m.budget() == k.shape().len();
    Ok(KGrid::new(k.shape(), coeffs)?.with_real_flag(full && k.from_real_image()))
}

/// Checks that `masked_k` vanishes outside the acquired set.
pub fn check_consistent(masked_k: &KGrid, m: &SamplingMask) -> Result<()> {
    m.ensure_shape(masked_k.shape())?;
    let cells = m.cells();
    for (i, (c, &on)) in masked_k.coeffs().iter().zip(&cells).enumerate() {
        if !on && c.norm() > CONSISTENCY_TOL {
            return Err(Error::InconsistentMaskedData {
                index: i,
                magnitude: c.norm(),
            });
        }
    }
    Ok(())
}

/// Zero-filled reconstruction: inverse DFT of the masked data, real part.
pub fn zero_fill_recon(masked_k: &KGrid, m: &SamplingMask) -> Result<ImageGrid> {
    check_consistent(masked_k, m)?;
    Ok(idft2_unitary(masked_k).image)
}

/// Completes masked data of a real image using conjugate symmetry: every
/// unacquired cell whose mirror is acquired receives the conjugate of the
/// mirror coefficient. The inverse transform of the result is exactly real.
pub fn conjugate_fill(masked_k: &KGrid, m: &SamplingMask) -> Result<KGrid> {
    check_consistent(masked_k, m)?;
    let shape = masked_k.shape();
    let cells = m.cells();
    let src = masked_k.coeffs();
    let coeffs = (0..shape.len())
        .map(|i| {
            let j = shape.mirror(i);
            if cells[i] {
                src[i]
            } else if cells[j] {
                src[j].conj()
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    KGrid::new(shape, coeffs)
}

/// Cells determined by the acquired set for a real image: the set itself and
/// its conjugate mirror.
pub fn determined_cells(m: &SamplingMask) -> Vec<bool> {
    let shape = m.shape();
    let cells = m.cells();
    (0..shape.len())
        .map(|i| cells[i] || cells[shape.mirror(i)])
        .collect()
}

/// Unitary 1-D DFT by direct summation, `X_f = L^{-1/2} sum_t x_t e^{-2 pi i f t / L}`.
pub fn dft1_unitary(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|f| {
            x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| {
                let phase = -2.0 * std::f64::consts::PI * ((f * t) % n) as f64 / n as f64;
                acc + v * Complex64::from_polar(1.0, phase)
            }) * scale
        })
        .collect()
}

/// Inverse of [`dft1_unitary`].
pub fn idft1_unitary(x: &[Complex64]) -> Vec<Complex64> {
    let conj: Vec<Complex64> = x.iter().map(|v| v.conj()).collect();
    dft1_unitary(&conj).into_iter().map(|v| v.conj()).collect()
}
