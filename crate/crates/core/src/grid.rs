//! Image-domain and k-space grids.
//!
//! k-space is stored row-major in *centered* layout: the DC coefficient of an
//! `H x W` grid sits at `(H / 2, W / 2)` and cell `(r, c)` carries the signed
//! frequency `(r - H / 2, c - W / 2)`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize) -> Self {
        Shape { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    /// Signed frequency `(ky, kx)` of a centered-layout cell.
    pub fn frequency(&self, index: usize) -> (isize, isize) {
        let (r, c) = self.row_col(index);
        (
            r as isize - (self.height / 2) as isize,
            c as isize - (self.width / 2) as isize,
        )
    }

    /// Cell holding the frequency `-f` of cell `index` (aliased modulo the grid).
    pub fn mirror(&self, index: usize) -> usize {
        let (r, c) = self.row_col(index);
        self.index(
            mirror_axis(r, self.height),
            mirror_axis(c, self.width),
        )
    }

    /// Radius of the cell's frequency in grid units, `sqrt(ky^2 + kx^2)`.
    pub fn radial_frequency(&self, index: usize) -> f64 {
        let (ky, kx) = self.frequency(index);
        ((ky * ky + kx * kx) as f64).sqrt()
    }

    /// Per-axis normalized radius in `[0, 1]`: each axis is scaled by its
    /// half-extent and the result by `1/sqrt(2)`, so only the Nyquist corner
    /// reaches 1.
    pub fn normalized_radius(&self, index: usize) -> f64 {
        let (ky, kx) = self.frequency(index);
        let ny = ky as f64 / (self.height as f64 / 2.0).max(0.5);
        let nx = kx as f64 / (self.width as f64 / 2.0).max(0.5);
        ((ny * ny + nx * nx) / 2.0).sqrt().min(1.0)
    }

    pub fn ensure_eq(&self, other: Shape) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: *self,
                actual: other,
            })
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// Centered index of `-f` along one axis of length `n`.
fn mirror_axis(i: usize, n: usize) -> usize {
    let half = n / 2;
    let standard = (i + n - half) % n;
    ((n - standard) % n + half) % n
}

/// Real-valued image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    shape: Shape,
    pixels: Vec<f64>,
}

impl ImageGrid {
    pub fn new(shape: Shape, pixels: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid("image must have at least one pixel"));
        }
        if pixels.len() != shape.len() {
            return Err(Error::invalid(format!(
                "image {shape} needs {} pixels, got {}",
                shape.len(),
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("non-finite pixel at index {i}")));
        }
        Ok(ImageGrid { shape, pixels })
    }

    pub fn zeros(shape: Shape) -> Self {
        ImageGrid {
            shape,
            pixels: vec![0.0; shape.len()],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(shape.len());
        for r in 0..shape.height {
            for c in 0..shape.width {
                pixels.push(f(r, c));
            }
        }
        ImageGrid { shape, pixels }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[self.shape.index(row, col)]
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn energy(&self) -> f64 {
        self.pixels.iter().map(|p| p * p).sum()
    }

    pub fn mse(&self, other: &ImageGrid) -> Result<f64> {
        self.shape.ensure_eq(other.shape)?;
        let sum: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.pixels.len() as f64)
    }
}

/// Complex k-space grid in centered layout.
#[derive(Clone, Debug, PartialEq)]
pub struct KGrid {
    shape: Shape,
    coeffs: Vec<Complex64>,
    from_real_image: bool,
}

impl KGrid {
    pub fn new(shape: Shape, coeffs: Vec<Complex64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid("k-space grid must have at least one cell"));
        }
        if coeffs.len() != shape.len() {
            return Err(Error::invalid(format!(
                "k-space {shape} needs {} coefficients, got {}",
                shape.len(),
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid(format!("non-finite coefficient at index {i}")));
        }
        Ok(KGrid {
            shape,
            coeffs,
            from_real_image: false,
        })
    }

    pub fn zeros(shape: Shape) -> Self {
        KGrid {
            shape,
            coeffs: vec![Complex64::new(0.0, 0.0); shape.len()],
            from_real_image: false,
        }
    }

    pub(crate) fn with_real_flag(mut self, flag: bool) -> Self {
        self.from_real_image = flag;
        self
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        self.from_real_image = false;
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// True when the grid was produced by transforming a real image and has
    /// not been modified since.
    pub fn from_real_image(&self) -> bool {
        self.from_real_image
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest `|k(-f) - conj(k(f))|` over the grid.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        (0..self.shape.len())
            .map(|i| (self.coeffs[self.shape.mirror(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }
}
