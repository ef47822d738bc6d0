//! Orthonormal 2-D Haar transform (Mallat layout, in place).

use crate::error::{Error, Result};
use crate::grid::Shape;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn check_levels(shape: Shape, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::invalid("wavelet levels must be at least 1"));
    }
    let block = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| Error::invalid("too many wavelet levels"))?;
    if shape.height % block != 0 || shape.width % block != 0 {
        return Err(Error::invalid(format!(
            "{levels} Haar levels need both sides of {shape} divisible by {block}"
        )));
    }
    Ok(())
}

fn forward_1d(buf: &mut [f64], scratch: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (a, b) = (buf[2 * i], buf[2 * i + 1]);
        scratch[i] = (a + b) * INV_SQRT2;
        scratch[half + i] = (a - b) * INV_SQRT2;
    }
    buf.copy_from_slice(&scratch[..buf.len()]);
}

fn inverse_1d(buf: &mut [f64], scratch: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (s, d) = (buf[i], buf[half + i]);
        scratch[2 * i] = (s + d) * INV_SQRT2;
        scratch[2 * i + 1] = (s - d) * INV_SQRT2;
    }
    buf.copy_from_slice(&scratch[..buf.len()]);
}

/// Applies one separable step to the top-left `h x w` block.
fn step(data: &mut [f64], shape: Shape, h: usize, w: usize, inverse: bool) {
    let f = if inverse { inverse_1d } else { forward_1d };
    let mut scratch = vec![0.0; h.max(w)];
    let mut col = vec![0.0; h];
    let rows = |data: &mut [f64], scratch: &mut [f64]| {
        for r in 0..h {
            let start = r * shape.width;
            f(&mut data[start..start + w], scratch);
        }
    };
    let mut cols = |data: &mut [f64], scratch: &mut [f64]| {
        for c in 0..w {
            for r in 0..h {
                col[r] = data[r * shape.width + c];
            }
            f(&mut col, scratch);
            for r in 0..h {
                data[r * shape.width + c] = col[r];
            }
        }
    };
    if inverse {
        cols(data, &mut scratch);
        rows(data, &mut scratch);
    } else {
        rows(data, &mut scratch);
        cols(data, &mut scratch);
    }
}

pub fn haar_forward(data: &mut [f64], shape: Shape, levels: usize) {
    let (mut h, mut w) = (shape.height, shape.width);
    for _ in 0..levels {
        step(data, shape, h, w, false);
        h /= 2;
        w /= 2;
    }
}

pub fn haar_inverse(data: &mut [f64], shape: Shape, levels: usize) {
    for l in (0..levels).rev() {
        step(data, shape, shape.height >> l, shape.width >> l, true);
    }
}
