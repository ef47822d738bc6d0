//! Training and inference of adaptive (mask, reconstructor) banks.

mod bank;
pub mod hypothesis;
pub mod multislice;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bank::{Pair, PairBank};

use crate::clustering::{kmeans_pp, DEFAULT_MAX_ITERS};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, KGrid};
use crate::mask::SamplingMask;
use crate::maskgen::{rejection_sample_mask, sorted_mask};
use crate::recon::{reconstruct, tune_theta, ReconParams};
use crate::rng::{derive_seed, stage_seed};
use crate::samplers::{sample, SamplerSpec};
use crate::transforms::{apply_mask, idft2_unitary};
use crate::uncertainty::{kspace_sample_variance, normalize_uncertainty, NormalizedUncertainty, UncertaintyMap};

/// How a centroid is turned into a mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskStrategy {
    #[default]
    RejectionSampling,
    Sorted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub m0: SamplingMask,
    pub sampler: SamplerSpec,
    /// Posterior samples per data point.
    pub samples: usize,
    /// Number of pairs `J`.
    pub clusters: usize,
    pub total_budget: usize,
    pub recon_grid: Vec<ReconParams>,
    pub mask_strategy: MaskStrategy,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 posterior samples per point, got {}",
                self.samples
            )));
        }
        if self.clusters < 1 {
            return Err(Error::invalid("need at least one cluster"));
        }
        if self.recon_grid.is_empty() {
            return Err(Error::invalid("reconstruction grid is empty"));
        }
        self.sampler.validate()
    }
}

/// Ground-truth image of a full k-space grid.
pub fn image_of(k: &KGrid) -> ImageGrid {
    idft2_unitary(k).image
}

/// Normalized k-space uncertainty of one input, from `samples` posterior
/// draws conditioned on its `m0` data.
pub fn uncertainty_signature(
    full_k: &KGrid,
    m0: &SamplingMask,
    sampler: &SamplerSpec,
    samples: usize,
    seed: u64,
) -> Result<NormalizedUncertainty> {
    let lf = apply_mask(full_k, m0)?;
    let ens = sample(&lf, m0, &sampler.with_seed(seed), samples)?;
    normalize_uncertainty(&kspace_sample_variance(&ens)?)
}

/// Signatures of a whole set; point `i` uses `derive_seed(seed, i)`.
pub fn signatures(
    data: &[KGrid],
    m0: &SamplingMask,
    sampler: &SamplerSpec,
    samples: usize,
    seed: u64,
) -> Result<Vec<NormalizedUncertainty>> {
    data.par_iter()
        .enumerate()
        .map(|(i, k)| {
            uncertainty_signature(k, m0, sampler, samples, derive_seed(seed, i as u64))
                .map_err(|e| e.context(format!("data point {i}")))
        })
        .collect()
}

/// Builds a bank from training k-space: signatures, k-means++, one mask per
/// centroid and a reconstructor tuned on the points of that centroid.
pub fn train_adaptive(training_k: &[KGrid], cfg: &TrainConfig, seed: u64) -> Result<PairBank> {
    cfg.validate()?;
    if training_k.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let sigs = signatures(
        training_k,
        &cfg.m0,
        &cfg.sampler,
        cfg.samples,
        stage_seed(seed, "signatures"),
    )?;
    train_from_signatures(training_k, &sigs, cfg, seed)
}

/// The part of [`train_adaptive`] after the signatures are known.
pub fn train_from_signatures(
    training_k: &[KGrid],
    sigs: &[NormalizedUncertainty],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<PairBank> {
    cfg.validate()?;
    if training_k.is_empty() || training_k.len() != sigs.len() {
        return Err(Error::invalid(format!(
            "need one signature per training point ({} points, {} signatures)",
            training_k.len(),
            sigs.len()
        )));
    }
    let shape = cfg.m0.shape();
    for k in training_k {
        shape.ensure_eq(k.shape())?;
    }
    let images: Vec<ImageGrid> = training_k.par_iter().map(image_of).collect();
    let set = kmeans_pp(sigs, cfg.clusters, stage_seed(seed, "kmeans"), DEFAULT_MAX_ITERS)?;
    let mask_seed = stage_seed(seed, "masks");

    let mut pairs = Vec::with_capacity(set.len());
    for (j, centroid) in set.centroids.iter().enumerate() {
        let mask = match cfg.mask_strategy {
            MaskStrategy::RejectionSampling => {
                rejection_sample_mask(centroid, &cfg.m0, cfg.total_budget, derive_seed(mask_seed, j as u64))
            }
            MaskStrategy::Sorted => sorted_mask(centroid, &cfg.m0, cfg.total_budget),
        }
        .map_err(|e| e.context(format!("mask for centroid {j}")))?;

        let members: Vec<usize> = (0..training_k.len()).filter(|&i| set.assignment[i] == j).collect();
        let fallback = members.is_empty();
        if fallback {
            log::warn!("centroid {j} has no assigned points; tuning on the full training set");
        }
        let (ks, imgs): (Vec<KGrid>, Vec<ImageGrid>) = if fallback {
            (training_k.to_vec(), images.clone())
        } else {
            members
                .iter()
                .map(|&i| (training_k[i].clone(), images[i].clone()))
                .unzip()
        };
        let (theta, risk) = tune_theta(&ks, &imgs, &mask, &cfg.recon_grid)?;
        pairs.push(Pair {
            mask,
            theta,
            centroid: centroid.clone(),
            members: members.len(),
            tuned_on_full_set: fallback,
            training_risk: risk,
        });
    }
    PairBank::new(pairs, cfg.m0.clone(), cfg.sampler.clone(), cfg.samples, cfg.total_budget)
}

/// Index of the centroid nearest to `u`; ties go to the lowest index.
pub fn select_index(u: &NormalizedUncertainty, bank: &PairBank) -> Result<usize> {
    nearest_centroid(u.values(), u.shape(), bank.centroids())
}

fn nearest_centroid(u: &[f64], shape: crate::grid::Shape, centroids: Vec<&UncertaintyMap>) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.into_iter().enumerate() {
        shape.ensure_eq(c.shape())?;
        let d: f64 = u.iter().zip(c.values()).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (j, d);
        }
    }
    Ok(best.0)
}

#[derive(Clone, Debug)]
pub struct Inference {
    pub image: ImageGrid,
    pub chosen: usize,
    pub u: NormalizedUncertainty,
}

/// Scans `m0`, estimates the input's uncertainty, picks the nearest pair and
/// reconstructs from the data that pair's mask acquires.
pub fn infer_adaptive(full_k: &KGrid, bank: &PairBank, seed: u64) -> Result<Inference> {
    bank.m0().ensure_shape(full_k.shape())?;
    let lf = apply_mask(full_k, bank.m0())?;
    let u = uncertainty_signature(&lf, bank.m0(), bank.sampler(), bank.samples(), seed)
        .map_err(|e| e.context("estimating input uncertainty"))?;
    let chosen = select_index(&u, bank)?;
    let pair = &bank.pairs()[chosen];
    let acquired = apply_mask(full_k, &pair.mask)?;
    let image = reconstruct(&acquired, &pair.mask, &pair.theta)?;
    Ok(Inference { image, chosen, u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use crate::mask::MaskKind;
    use crate::maskgen::lowfreq_mask;
    use crate::transforms::dft2_unitary;

    fn stripes(shape: Shape, horizontal: bool, phase: usize) -> KGrid {
        dft2_unitary(&ImageGrid::from_fn(shape, |r, c| {
            let t = if horizontal { r } else { c };
            if ((t + phase) / 4) % 2 == 0 { 0.8 } else { 0.2 }
        }))
    }

    fn config(shape: Shape, j: usize) -> TrainConfig {
        TrainConfig {
            m0: lowfreq_mask(shape, MaskKind::Point2d, 4).unwrap(),
            sampler: SamplerSpec::jitter_ensemble(1.0, 1.0, 1.0, 0),
            samples: 8,
            clusters: j,
            total_budget: shape.len() / 4,
            recon_grid: vec![ReconParams::zero_fill()],
            mask_strategy: MaskStrategy::RejectionSampling,
        }
    }

    fn dataset(shape: Shape) -> Vec<KGrid> {
        (0..6).map(|i| stripes(shape, i % 2 == 0, i)).collect()
    }

    #[test]
    fn bank_respects_budget_and_m0() {
        let shape = Shape::new(16, 16);
        let cfg = config(shape, 2);
        let bank = train_adaptive(&dataset(shape), &cfg, 3).unwrap();
        assert_eq!(bank.len(), 2);
        for p in bank.pairs() {
            assert_eq!(p.mask.budget(), cfg.total_budget);
            assert!(p.mask.contains_mask(&cfg.m0));
        }
    }

    #[test]
    fn single_cluster_centroid_is_mean_signature() {
        let shape = Shape::new(16, 16);
        let cfg = config(shape, 1);
        let data = dataset(shape);
        let sigs = signatures(&data, &cfg.m0, &cfg.sampler, cfg.samples, 5).unwrap();
        let bank = train_from_signatures(&data, &sigs, &cfg, 5).unwrap();
        let c = bank.pairs()[0].centroid.values();
        for d in 0..shape.len() {
            let mean = sigs.iter().map(|s| s.values()[d]).sum::<f64>() / sigs.len() as f64;
            assert!((c[d] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let shape = Shape::new(16, 16);
        let cfg = config(shape, 2);
        let a = train_adaptive(&dataset(shape), &cfg, 9).unwrap();
        let b = train_adaptive(&dataset(shape), &cfg, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inference_matches_direct_reconstruction() {
        let shape = Shape::new(16, 16);
        let cfg = config(shape, 2);
        let data = dataset(shape);
        let bank = train_adaptive(&data, &cfg, 1).unwrap();
        let out = infer_adaptive(&data[1], &bank, 77).unwrap();
        let pair = &bank.pairs()[out.chosen];
        let direct = reconstruct(&apply_mask(&data[1], &pair.mask).unwrap(), &pair.mask, &pair.theta).unwrap();
        assert_eq!(out.image, direct);
    }

    #[test]
    fn zero_temperature_inference_is_degenerate() {
        let shape = Shape::new(16, 16);
        let mut cfg = config(shape, 1);
        let data = dataset(shape);
        let bank = train_adaptive(&data, &cfg, 1).unwrap();
        cfg.sampler.temperature = 0.0;
        let cold = PairBank::new(
            bank.pairs().to_vec(),
            cfg.m0.clone(),
            cfg.sampler.clone(),
            cfg.samples,
            cfg.total_budget,
        )
        .unwrap();
        let err = infer_adaptive(&data[0], &cold, 1).unwrap_err();
        assert!(matches!(&err, Error::Context { source, .. } if matches!(**source, Error::DegenerateUncertainty)));
    }

    #[test]
    fn selection_ties_and_exact_hits() {
        let shape = Shape::new(16, 16);
        let cfg = config(shape, 1);
        let bank = train_adaptive(&dataset(shape), &cfg, 2).unwrap();
        let u = uncertainty_signature(&dataset(shape)[0], &cfg.m0, &cfg.sampler, 8, 4).unwrap();
        assert_eq!(select_index(&u, &bank).unwrap(), 0);

        let s = Shape::new(1, 2);
        let c = |a: f64, b: f64| UncertaintyMap::new(s, vec![a, b]).unwrap();
        let (c0, c1, c2) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
        assert_eq!(nearest_centroid(&[0.0, 1.0], s, vec![&c0, &c1, &c2]).unwrap(), 2);
        assert_eq!(nearest_centroid(&[0.5, 0.5], s, vec![&c1, &c2]).unwrap(), 0);
    }
}
