use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_mask, read_umap, write_mask, write_umap};
use crate::mask::SamplingMask;
use crate::recon::ReconParams;
use crate::samplers::SamplerSpec;
use crate::uncertainty::UncertaintyMap;

#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub mask: SamplingMask,
    pub theta: ReconParams,
    pub centroid: UncertaintyMap,
    /// Training points assigned to this centroid.
    pub members: usize,
    /// Set when no point was assigned and `theta` was tuned on everything.
    pub tuned_on_full_set: bool,
    pub training_risk: f64,
}

/// The trained artifact: `J` (mask, reconstructor, centroid) triples plus
/// what inference needs to recompute an input's signature.
#[derive(Clone, Debug, PartialEq)]
pub struct PairBank {
    pairs: Vec<Pair>,
    m0: SamplingMask,
    sampler: SamplerSpec,
    samples: usize,
    total_budget: usize,
}

#[derive(Serialize, Deserialize)]
struct PairEntry {
    mask: String,
    centroid: String,
    theta: ReconParams,
    members: usize,
    tuned_on_full_set: bool,
    training_risk: f64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    j: usize,
    m0: String,
    sampler: SamplerSpec,
    samples: usize,
    total_budget: usize,
    pairs: Vec<PairEntry>,
}

impl PairBank {
    pub fn new(
        pairs: Vec<Pair>,
        m0: SamplingMask,
        sampler: SamplerSpec,
        samples: usize,
        total_budget: usize,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("a bank needs at least one pair"));
        }
        let shape = m0.shape();
        for (j, p) in pairs.iter().enumerate() {
            let ctx = |e: Error| e.context(format!("pair {j}"));
            p.mask.ensure_shape(shape).map_err(ctx)?;
            shape.ensure_eq(p.centroid.shape()).map_err(ctx)?;
            if p.mask.kind() != m0.kind() {
                return Err(ctx(Error::invalid("mask kind differs from the initial mask")));
            }
            if p.mask.budget() != total_budget {
                return Err(ctx(Error::invalid(format!(
                    "mask budget {} differs from the bank budget {total_budget}",
                    p.mask.budget()
                ))));
            }
            if !p.mask.contains_mask(&m0) {
                return Err(ctx(Error::invalid("mask does not contain the initial mask")));
            }
            p.theta.validate().map_err(ctx)?;
        }
        Ok(PairBank {
            pairs,
            m0,
            sampler,
            samples,
            total_budget,
        })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn centroids(&self) -> Vec<&UncertaintyMap> {
        self.pairs.iter().map(|p| &p.centroid).collect()
    }

    pub fn m0(&self) -> &SamplingMask {
        &self.m0
    }

    pub fn sampler(&self) -> &SamplerSpec {
        &self.sampler
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn total_budget(&self) -> usize {
        self.total_budget
    }

    /// Writes `manifest.json`, `m0.txt`, `mask_<j>.txt` and
    /// `centroid_<j>.umap` into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).context(dir.display().to_string()))?;
        write_mask(&dir.join("m0.txt"), &self.m0)?;
        let mut entries = Vec::with_capacity(self.pairs.len());
        for (j, p) in self.pairs.iter().enumerate() {
            let mask = format!("mask_{j}.txt");
            let centroid = format!("centroid_{j}.umap");
            write_mask(&dir.join(&mask), &p.mask)?;
            write_umap(&dir.join(&centroid), &p.centroid)?;
            entries.push(PairEntry {
                mask,
                centroid,
                theta: p.theta,
                members: p.members,
                tuned_on_full_set: p.tuned_on_full_set,
                training_risk: p.training_risk,
            });
        }
        let manifest = Manifest {
            j: self.pairs.len(),
            m0: "m0.txt".into(),
            sampler: self.sampler.clone(),
            samples: self.samples,
            total_budget: self.total_budget,
            pairs: entries,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .map_err(|e| Error::from(e).context(path.display().to_string()))
    }

    /// Reads a bank written by [`PairBank::save`]. Centroids are stored as
    /// `f32`, so a loaded bank matches the saved one to single precision.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        if manifest.j != manifest.pairs.len() {
            return Err(Error::invalid(format!(
                "manifest declares {} pairs but lists {}",
                manifest.j,
                manifest.pairs.len()
            ))
            .context(path.display().to_string()));
        }
        let m0 = read_mask(&dir.join(&manifest.m0))?;
        let pairs = manifest
            .pairs
            .into_iter()
            .map(|e| {
                Ok(Pair {
                    mask: read_mask(&dir.join(&e.mask))?,
                    centroid: read_umap(&dir.join(&e.centroid))?,
                    theta: e.theta,
                    members: e.members,
                    tuned_on_full_set: e.tuned_on_full_set,
                    training_risk: e.training_risk,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PairBank::new(pairs, m0, manifest.sampler, manifest.samples, manifest.total_budget)
    }
}
