//! Sampling-mask constructors.
//!
//! Every constructor starts from an initial low-frequency mask `m0` and
//! returns a superset of it with exactly the requested cell budget. For line
//! masks, per-cell weights collapse to per-column weights by summation and
//! budgets must be whole multiples of the grid height. Ties are broken by
//! ascending index everywhere.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Shape;
use crate::mask::{MaskKind, SamplingMask};
use crate::rng::rng_from_seed;
use crate::uncertainty::UncertaintyMap;

/// Default variable-density decay exponent.
pub const DEFAULT_VD_EXPONENT: f64 = 1.5;

/// Centered low-frequency mask: an `extent x extent` block for point masks,
/// `extent` central columns for line masks.
pub fn lowfreq_mask(shape: Shape, kind: MaskKind, extent: usize) -> Result<SamplingMask> {
    match kind {
        MaskKind::Point2d => {
            if extent > shape.height.min(shape.width) {
                return Err(Error::invalid(format!(
                    "low-frequency extent {extent} exceeds grid {shape}"
                )));
            }
            let r0 = shape.height / 2 - extent / 2;
            let c0 = shape.width / 2 - extent / 2;
            let cells = (r0..r0 + extent)
                .flat_map(|r| (c0..c0 + extent).map(move |c| shape.index(r, c)))
                .collect();
            SamplingMask::new(shape, kind, cells)
        }
        MaskKind::Line1d => {
            if extent > shape.width {
                return Err(Error::invalid(format!(
                    "{extent} autocalibration lines exceed width {}",
                    shape.width
                )));
            }
            let c0 = shape.width / 2 - extent / 2;
            SamplingMask::new(shape, kind, (c0..c0 + extent).collect())
        }
    }
}

/// Cell budget for an acceleration rate, rounded to whole lines for line
/// masks.
pub fn budget_for_acceleration(shape: Shape, kind: MaskKind, accel: f64) -> Result<usize> {
    if !(accel >= 1.0 && accel.is_finite()) {
        return Err(Error::invalid(format!("acceleration must be >= 1, got {accel}")));
    }
    Ok(match kind {
        MaskKind::Point2d => (shape.len() as f64 / accel).round() as usize,
        MaskKind::Line1d => (shape.width as f64 / accel).round() as usize * shape.height,
    })
}

/// Number of additional mask units (cells or lines) to pick.
fn extra_units(m0: &SamplingMask, total_budget: usize) -> Result<usize> {
    let shape = m0.shape();
    if total_budget > shape.len() {
        return Err(Error::invalid(format!(
            "budget {total_budget} exceeds the {} cells of {shape}",
            shape.len()
        )));
    }
    if total_budget < m0.budget() {
        return Err(Error::invalid(format!(
            "budget {total_budget} is smaller than the initial mask ({})",
            m0.budget()
        )));
    }
    let extra = total_budget - m0.budget();
    match m0.kind() {
        MaskKind::Point2d => Ok(extra),
        MaskKind::Line1d => {
            if extra % shape.height != 0 {
                return Err(Error::invalid(format!(
                    "line budget {total_budget} is not a multiple of height {}",
                    shape.height
                )));
            }
            Ok(extra / shape.height)
        }
    }
}

/// Weights per selectable unit: cells, or column sums for line masks.
fn unit_weights(values: &[f64], shape: Shape, kind: MaskKind) -> Vec<f64> {
    match kind {
        MaskKind::Point2d => values.to_vec(),
        MaskKind::Line1d => (0..shape.width)
            .map(|c| (0..shape.height).map(|r| values[shape.index(r, c)]).sum())
            .collect(),
    }
}

fn with_extra(m0: &SamplingMask, extra: impl IntoIterator<Item = usize>) -> Result<SamplingMask> {
    let mut acquired = m0.acquired().to_vec();
    acquired.extend(extra);
    SamplingMask::new(m0.shape(), m0.kind(), acquired)
}

/// `m0` plus the highest-weight units outside it.
pub fn sorted_mask(v: &UncertaintyMap, m0: &SamplingMask, total_budget: usize) -> Result<SamplingMask> {
    m0.ensure_shape(v.shape())?;
    let n = extra_units(m0, total_budget)?;
    let weights = unit_weights(v.values(), m0.shape(), m0.kind());
    let mut candidates: Vec<usize> = (0..weights.len())
        .filter(|i| m0.acquired().binary_search(i).is_err())
        .collect();
    // stable sort keeps ascending index among equal weights
    candidates.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    with_extra(m0, candidates.into_iter().take(n))
}

/// Weighted sampling without replacement over the units outside `m0`, with
/// inclusion driven by weight.
///
/// Uses exponential keys: every positive-weight unit gets
/// `key = -ln(U) / w` with `U` uniform on `(0, 1]`, and the `n` smallest keys
/// win. This is equivalent to drawing units one at a time with probability
/// proportional to weight among those not yet drawn.
pub fn rejection_sample_mask(
    weights: &UncertaintyMap,
    m0: &SamplingMask,
    total_budget: usize,
    seed: u64,
) -> Result<SamplingMask> {
    m0.ensure_shape(weights.shape())?;
    let n = extra_units(m0, total_budget)?;
    let w = unit_weights(weights.values(), m0.shape(), m0.kind());
    let picked = weighted_without_replacement(&w, m0.acquired(), n, seed)?;
    with_extra(m0, picked)
}

fn weighted_without_replacement(
    weights: &[f64],
    excluded: &[usize],
    n: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        // one draw per unit keeps the stream aligned with the index
        let u = 1.0 - rng.random::<f64>();
        if w > 0.0 && excluded.binary_search(&i).is_err() {
            keyed.push((-u.ln() / w, i));
        }
    }
    if keyed.len() < n {
        return Err(Error::InsufficientSupport {
            needed: n,
            available: keyed.len(),
        });
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().take(n).map(|(_, i)| i).collect())
}

/// Variable-density weights `(1 - d)^a_f`, with `d` the normalized distance
/// from the k-space center (per-axis normalized radius for point masks,
/// column offset over half the width for line masks).
pub fn vd_weights(shape: Shape, kind: MaskKind, a_f: f64) -> Vec<f64> {
    match kind {
        MaskKind::Point2d => (0..shape.len())
            .map(|i| (1.0 - shape.normalized_radius(i)).powf(a_f))
            .collect(),
        MaskKind::Line1d => {
            let half = (shape.width as f64 / 2.0).max(0.5);
            (0..shape.width)
                .map(|c| {
                    let d = ((c as f64 - (shape.width / 2) as f64).abs() / half).min(1.0);
                    (1.0 - d).powf(a_f)
                })
                .collect()
        }
    }
}

fn check_kind(shape: Shape, kind: MaskKind, m0: &SamplingMask) -> Result<()> {
    m0.ensure_shape(shape)?;
    if m0.kind() != kind {
        return Err(Error::invalid(format!(
            "initial mask is {} but a {kind} mask was requested",
            m0.kind()
        )));
    }
    Ok(())
}

/// Variable-density random mask.
pub fn vd_mask(
    shape: Shape,
    kind: MaskKind,
    m0: &SamplingMask,
    total_budget: usize,
    a_f: f64,
    seed: u64,
) -> Result<SamplingMask> {
    check_kind(shape, kind, m0)?;
    let n = extra_units(m0, total_budget)?;
    let picked = weighted_without_replacement(&vd_weights(shape, kind, a_f), m0.acquired(), n, seed)?;
    with_extra(m0, picked)
}

/// Uniformly random mask.
pub fn random_mask(
    shape: Shape,
    kind: MaskKind,
    m0: &SamplingMask,
    total_budget: usize,
    seed: u64,
) -> Result<SamplingMask> {
    check_kind(shape, kind, m0)?;
    let n = extra_units(m0, total_budget)?;
    let units = match kind {
        MaskKind::Point2d => shape.len(),
        MaskKind::Line1d => shape.width,
    };
    let picked = weighted_without_replacement(&vec![1.0; units], m0.acquired(), n, seed)?;
    with_extra(m0, picked)
}

/// Autocalibration lines plus equally spaced lines: of the columns outside
/// `m0`, every `stride`-th starting at the first, with
/// `stride = floor(available / needed)`.
pub fn equispaced_mask(shape: Shape, m0: &SamplingMask, total_budget: usize) -> Result<SamplingMask> {
    m0.ensure_shape(shape)?;
    if m0.kind() != MaskKind::Line1d {
        return Err(Error::invalid("equispaced masks are line masks only"));
    }
    let needed = extra_units(m0, total_budget)?;
    if needed == 0 {
        return Ok(m0.clone());
    }
    let available: Vec<usize> = (0..shape.width)
        .filter(|c| m0.acquired().binary_search(c).is_err())
        .collect();
    let stride = available.len() / needed;
    with_extra(m0, (0..needed).map(|k| available[k * stride]))
}
