//! Directories of PGM images as k-space datasets.

use std::fs;
use std::path::{Path, PathBuf};

use adaptive_cs::io::decode_pgm;
use adaptive_cs::transforms::dft2_unitary;
use adaptive_cs::{ImageGrid, KGrid};
use anyhow::{bail, Context, Result};

#[derive(Clone, Debug)]
pub struct Item {
    /// File name within the dataset directory.
    pub name: String,
    pub image: ImageGrid,
    pub k: KGrid,
}

/// Every `*.pgm` in `dir`, sorted by file name.
pub fn pgm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading dataset directory {}", dir.display()))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.with_context(|| format!("listing {}", dir.display()))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn ingest_dataset(dir: &Path) -> Result<Vec<Item>> {
    let files = pgm_files(dir)?;
    if files.is_empty() {
        bail!("dataset directory {} has no .pgm files", dir.display());
    }
    let mut items = Vec::with_capacity(files.len());
    for path in files {
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let image = decode_pgm(&bytes).with_context(|| format!("decoding {}", path.display()))?;
        if let Some(first) = items.first().map(|i: &Item| i.image.shape()) {
            if image.shape() != first {
                bail!("{} is {}, the rest of the dataset is {first}", path.display(), image.shape());
            }
        }
        let k = dft2_unitary(&image);
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        items.push(Item { name, image, k });
    }
    Ok(items)
}
