use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Shape;

/// Whether a mask picks individual k-space cells or whole columns
/// (phase-encode lines).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Point2d,
    Line1d,
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskKind::Point2d => "point2d",
            MaskKind::Line1d => "line1d",
        })
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point2d" => Ok(MaskKind::Point2d),
            "line1d" => Ok(MaskKind::Line1d),
            other => Err(Error::invalid(format!("unknown mask kind `{other}`"))),
        }
    }
}

/// Binary sampling pattern over a centered k-space grid.
///
/// `acquired` holds cell indices for [`MaskKind::Point2d`] and column indices
/// for [`MaskKind::Line1d`]; it is always sorted and duplicate-free.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SamplingMask {
    shape: Shape,
    kind: MaskKind,
    acquired: Vec<usize>,
}

impl SamplingMask {
    pub fn new(shape: Shape, kind: MaskKind, mut acquired: Vec<usize>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid("mask shape must be nonempty"));
        }
        let bound = match kind {
            MaskKind::Point2d => shape.len(),
            MaskKind::Line1d => shape.width,
        };
        if let Some(&bad) = acquired.iter().find(|&&i| i >= bound) {
            return Err(Error::invalid(format!(
                "mask index {bad} out of bounds for {kind} mask on {shape}"
            )));
        }
        acquired.sort_unstable();
        acquired.dedup();
        Ok(SamplingMask {
            shape,
            kind,
            acquired,
        })
    }

    pub fn empty(shape: Shape, kind: MaskKind) -> Self {
        SamplingMask {
            shape,
            kind,
            acquired: Vec::new(),
        }
    }

    pub fn full(shape: Shape, kind: MaskKind) -> Self {
        let n = match kind {
            MaskKind::Point2d => shape.len(),
            MaskKind::Line1d => shape.width,
        };
        SamplingMask {
            shape,
            kind,
            acquired: (0..n).collect(),
        }
    }

    /// Builds a point mask from a per-cell boolean grid.
    pub fn from_cells(shape: Shape, cells: &[bool]) -> Result<Self> {
        if cells.len() != shape.len() {
            return Err(Error::invalid("cell grid does not match shape"));
        }
        let acquired = cells
            .iter()
            .enumerate()
            .filter_map(|(i, &on)| on.then_some(i))
            .collect();
        SamplingMask::new(shape, MaskKind::Point2d, acquired)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    /// Sorted acquired indices (cells or columns, depending on kind).
    pub fn acquired(&self) -> &[usize] {
        &self.acquired
    }

    /// Number of acquired cells.
    pub fn budget(&self) -> usize {
        match self.kind {
            MaskKind::Point2d => self.acquired.len(),
            MaskKind::Line1d => self.acquired.len() * self.shape.height,
        }
    }

    pub fn acceleration(&self) -> f64 {
        self.shape.len() as f64 / self.budget() as f64
    }

    pub fn contains_cell(&self, cell: usize) -> bool {
        match self.kind {
            MaskKind::Point2d => self.acquired.binary_search(&cell).is_ok(),
            MaskKind::Line1d => self
                .acquired
                .binary_search(&(cell % self.shape.width))
                .is_ok(),
        }
    }

    /// Per-cell membership, row-major.
    pub fn cells(&self) -> Vec<bool> {
        let mut out = vec![false; self.shape.len()];
        match self.kind {
            MaskKind::Point2d => {
                for &i in &self.acquired {
                    out[i] = true;
                }
            }
            MaskKind::Line1d => {
                for r in 0..self.shape.height {
                    for &c in &self.acquired {
                        out[self.shape.index(r, c)] = true;
                    }
                }
            }
        }
        out
    }

    /// Sorted acquired cell indices.
    pub fn cell_indices(&self) -> Vec<usize> {
        self.cells()
            .into_iter()
            .enumerate()
            .filter_map(|(i, on)| on.then_some(i))
            .collect()
    }

    /// True when every cell of `other` is also acquired here.
    pub fn contains_mask(&self, other: &SamplingMask) -> bool {
        self.shape == other.shape
            && other
                .cell_indices()
                .into_iter()
                .all(|c| self.contains_cell(c))
    }

    /// True when the acquired set is closed under `f -> -f`.
    pub fn is_conjugate_symmetric(&self) -> bool {
        let cells = self.cells();
        (0..self.shape.len()).all(|i| cells[i] == cells[self.shape.mirror(i)])
    }

    pub fn ensure_shape(&self, shape: Shape) -> Result<()> {
        self.shape.ensure_eq(shape)
    }
}
