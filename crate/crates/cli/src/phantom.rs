//! Synthetic image populations.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use adaptive_cs::io::encode_pgm;
use adaptive_cs::rng::{derive_seed, rng_from_seed, stage_seed};
use adaptive_cs::wavelet::haar_inverse;
use adaptive_cs::{ImageGrid, Shape};
use anyhow::{bail, Context, Result};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    /// Bands that vary from row to row.
    StripesH,
    /// Bands that vary from column to column.
    StripesV,
    HaarSparse,
    SmoothBlobs,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 4] = [
        PhantomKind::StripesH,
        PhantomKind::StripesV,
        PhantomKind::HaarSparse,
        PhantomKind::SmoothBlobs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::StripesH => "stripes_h",
            PhantomKind::StripesV => "stripes_v",
            PhantomKind::HaarSparse => "haar_sparse",
            PhantomKind::SmoothBlobs => "smooth_blobs",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        PhantomKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .with_context(|| format!("unknown phantom kind {s:?} (expected stripes_h, stripes_v, haar_sparse or smooth_blobs)"))
    }
}

/// One image of a kind; `seed` fixes everything about it.
pub fn phantom_image(kind: PhantomKind, shape: Shape, seed: u64) -> ImageGrid {
    match kind {
        PhantomKind::StripesH => stripes(shape, true, seed),
        PhantomKind::StripesV => stripes(shape, false, seed),
        PhantomKind::HaarSparse => haar_sparse(shape, seed),
        PhantomKind::SmoothBlobs => smooth_blobs(shape, seed),
    }
}

fn stripes(shape: Shape, along_rows: bool, seed: u64) -> ImageGrid {
    let mut rng = rng_from_seed(seed);
    let span = if along_rows { shape.height } else { shape.width } as f64;
    let period = rng.random_range(0.25..=0.5) * span;
    let phase = rng.random_range(0.0..period);
    let sharpness = rng.random_range(2.0..4.0);
    let (lo, hi) = (rng.random_range(0.1..0.3), rng.random_range(0.6..0.9));
    // faint isotropic shading so the stripes are not the only content
    let (cy, cx) = (rng.random_range(0.3..0.7) * shape.height as f64, rng.random_range(0.3..0.7) * shape.width as f64);
    let sigma = 0.3 * shape.height.min(shape.width) as f64;
    ImageGrid::from_fn(shape, |r, c| {
        let t = if along_rows { r } else { c } as f64;
        let wave = (2.0 * PI * (t + phase) / period).sin();
        let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
        let shade = 0.06 * (-d2 / (2.0 * sigma * sigma)).exp();
        (lo + (hi - lo) * (0.5 + 0.5 * (sharpness * wave).tanh()) + shade).min(1.0)
    })
}

fn smooth_blobs(shape: Shape, seed: u64) -> ImageGrid {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(3..=6);
    let size = shape.height.min(shape.width) as f64;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.15..0.85) * shape.height as f64,
                rng.random_range(0.15..0.85) * shape.width as f64,
                rng.random_range(0.06..0.18) * size,
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    let raw = ImageGrid::from_fn(shape, |r, c| {
        blobs
            .iter()
            .map(|&(y, x, s, a)| a * (-((r as f64 - y).powi(2) + (c as f64 - x).powi(2)) / (2.0 * s * s)).exp())
            .sum::<f64>()
    });
    let max = raw.pixels().iter().cloned().fold(0.0, f64::max);
    ImageGrid::from_fn(shape, |r, c| 0.1 + 0.85 * raw.get(r, c) / max)
}

/// Piecewise-constant image with 32 nonzero Haar coefficients: 16 coarse
/// blocks, each possibly carrying some detail, all kept nonnegative.
fn haar_sparse(shape: Shape, seed: u64) -> ImageGrid {
    let mut rng = rng_from_seed(seed);
    let levels = (0..=3)
        .rev()
        .find(|&l| shape.height % (1 << l) == 0 && shape.width % (1 << l) == 0)
        .unwrap_or(0);
    let (bh, bw) = (shape.height >> levels, shape.width >> levels);
    let blocks = bh * bw;
    let active = sample(&mut rng, blocks, blocks.min(16)).into_vec();
    let mut coeffs = vec![0.0; shape.len()];
    let mut slots = Vec::new();
    for &b in &active {
        let (r, c) = (b / bw, b % bw);
        let approx = rng.random_range(1.0..4.0);
        coeffs[r * shape.width + c] = approx;
        if levels > 0 {
            for (dr, dc) in [(0, bw), (bh, 0), (bh, bw)] {
                slots.push((r * shape.width + c, (r + dr) * shape.width + c + dc));
            }
        }
    }
    let details = slots.len().min(16);
    for s in sample(&mut rng, slots.len(), details) {
        let (parent, slot) = slots[s];
        // a third of the parent keeps every pixel of the block nonnegative
        let bound = coeffs[parent] / 3.0;
        coeffs[slot] = rng.random_range(-bound..bound);
    }
    haar_inverse(&mut coeffs, shape, levels);
    let max = coeffs.iter().cloned().fold(0.0, f64::max);
    ImageGrid::new(shape, coeffs.iter().map(|v| (v / max).clamp(0.0, 1.0)).collect()).expect("finite pixels")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub kind: PhantomKind,
    pub index: usize,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
}

/// Writes `count` images named `<kind>_<index>.pgm` and merges them into the
/// directory's manifest, so several kinds can share one directory.
pub fn generate_phantoms(kind: PhantomKind, count: usize, shape: Shape, seed: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    if count == 0 {
        bail!("phantom count must be at least 1");
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest_path = dir.join(MANIFEST);
    let mut entries: BTreeMap<String, ManifestEntry> = if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
        let list: Vec<ManifestEntry> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;
        list.into_iter().map(|e| (e.file.clone(), e)).collect()
    } else {
        BTreeMap::new()
    };

    let base = stage_seed(seed, kind.name());
    let mut paths = Vec::with_capacity(count);
    for index in 0..count {
        let file = format!("{}_{index:04}.pgm", kind.name());
        let path = dir.join(&file);
        let image_seed = derive_seed(base, index as u64);
        let img = phantom_image(kind, shape, image_seed);
        fs::write(&path, encode_pgm(&img)).with_context(|| format!("writing {}", path.display()))?;
        entries.insert(
            file.clone(),
            ManifestEntry {
                file,
                kind,
                index,
                seed: image_seed,
                height: shape.height,
                width: shape.width,
            },
        );
        paths.push(path);
    }
    let list: Vec<&ManifestEntry> = entries.values().collect();
    fs::write(&manifest_path, serde_json::to_string_pretty(&list)? + "\n")
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(paths)
}
