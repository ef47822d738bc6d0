//! Train/evaluate runs over a dataset, reported as CSV.

use std::fs;
use std::path::Path;
use std::time::Instant;

use adaptive_cs::maskgen::{budget_for_acceleration, equispaced_mask, random_mask, sorted_mask, vd_mask};
use adaptive_cs::metrics::{lower_tail_mean, psnr, ssim};
use adaptive_cs::pipeline::{select_index, signatures, train_from_signatures, MaskStrategy, PairBank, TrainConfig};
use adaptive_cs::recon::{reconstruct, tune_theta, tune_theta_per_item};
use adaptive_cs::rng::{derive_seed, rng_from_seed, stage_seed};
use adaptive_cs::transforms::apply_mask;
use adaptive_cs::uncertainty::NormalizedUncertainty;
use adaptive_cs::{ImageGrid, KGrid, ReconParams, SamplingMask};
use anyhow::{bail, ensure, Context, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Method};
use crate::dataset::{ingest_dataset, pgm_files, Item};
use crate::phantom::generate_phantoms;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub dataset_id: String,
    pub method: String,
    pub accel: f64,
    #[serde(rename = "J")]
    pub j: usize,
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    pub ssim_p5: f64,
    pub ssim_p10: f64,
    /// Wall time in milliseconds, or `NA` unless runtimes are recorded.
    pub runtime_ms: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageRow {
    pub dataset_id: String,
    pub method: String,
    pub accel: f64,
    #[serde(rename = "J")]
    pub j: usize,
    pub file: String,
    pub psnr: f64,
    pub ssim: f64,
    /// Pair index for bank-based methods.
    pub pair: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Split {
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct TrainedBank {
    pub method: Method,
    pub accel: f64,
    pub j: usize,
    pub bank: PairBank,
}

impl TrainedBank {
    pub fn label(&self) -> String {
        format!("{}_accel{}_J{}", self.method, self.accel, self.j)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub per_image: Vec<ImageRow>,
    pub banks: Vec<TrainedBank>,
    pub split: Split,
}

/// Train/validation partition: a seeded shuffle of the filename-sorted
/// items, each side returned in filename order.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = (n as f64 * train_fraction).round() as usize;
    ensure!(
        n_train >= 1 && n_train < n,
        "{n} items cannot be split {train_fraction} / {} with both sides nonempty",
        1.0 - train_fraction
    );
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(stage_seed(seed, "split")));
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// A uniformly random cyclic permutation, so no index maps to itself.
pub fn derangement(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..i);
        p.swap(i, j);
    }
    p
}

/// Fills `dataset_dir` from the config's `generate` list if it has no images.
pub fn prepare_dataset(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.generate.is_empty() {
        return Ok(());
    }
    if cfg.dataset_dir.is_dir() && !pgm_files(&cfg.dataset_dir)?.is_empty() {
        return Ok(());
    }
    for g in &cfg.generate {
        generate_phantoms(g.kind, g.n, cfg.shape(), g.seed, &cfg.dataset_dir)?;
    }
    Ok(())
}

struct Subset {
    k: Vec<KGrid>,
    images: Vec<ImageGrid>,
    names: Vec<String>,
}

impl Subset {
    fn of(items: &[Item], idx: &[usize]) -> Self {
        Subset {
            k: idx.iter().map(|&i| items[i].k.clone()).collect(),
            images: idx.iter().map(|&i| items[i].image.clone()).collect(),
            names: idx.iter().map(|&i| items[i].name.clone()).collect(),
        }
    }
}

struct Scored {
    psnr: Vec<f64>,
    ssim: Vec<f64>,
    pairs: Vec<Option<usize>>,
}

/// Reconstructs every validation item with its own mask and parameters.
fn score(val: &Subset, plan: &[(SamplingMask, ReconParams, Option<usize>)]) -> Result<Scored> {
    let results = val
        .k
        .par_iter()
        .zip(val.images.par_iter())
        .zip(plan.par_iter())
        .map(|((k, img), (m, theta, _))| {
            let rec = reconstruct(&apply_mask(k, m)?, m, theta)?;
            Ok((psnr(img, &rec)?, ssim(img, &rec)?))
        })
        .collect::<adaptive_cs::Result<Vec<(f64, f64)>>>()?;
    let (psnr, ssim) = results.into_iter().unzip();
    Ok(Scored {
        psnr,
        ssim,
        pairs: plan.iter().map(|p| p.2).collect(),
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    train: Subset,
    val: Subset,
    m0: SamplingMask,
    grid: Vec<ReconParams>,
    train_sigs: Option<Vec<NormalizedUncertainty>>,
    val_sigs: Option<Vec<NormalizedUncertainty>>,
}

impl Run<'_> {
    fn train_sigs(&mut self) -> Result<&[NormalizedUncertainty]> {
        if self.train_sigs.is_none() {
            let cfg = self.cfg;
            let seed = stage_seed(cfg.seed, "signatures");
            self.train_sigs = Some(
                signatures(&self.train.k, &self.m0, &cfg.sampler, cfg.samples, seed)
                    .context("training signatures")?,
            );
        }
        Ok(self.train_sigs.as_deref().unwrap_or_default())
    }

    fn val_sigs(&mut self) -> Result<&[NormalizedUncertainty]> {
        if self.val_sigs.is_none() {
            let cfg = self.cfg;
            let seed = validation_seed(cfg.seed);
            self.val_sigs = Some(
                signatures(&self.val.k, &self.m0, &cfg.sampler, cfg.samples, seed)
                    .context("validation signatures")?,
            );
        }
        Ok(self.val_sigs.as_deref().unwrap_or_default())
    }

    fn single_mask(&self, mask: SamplingMask) -> Result<Vec<(SamplingMask, ReconParams, Option<usize>)>> {
        let (theta, _) = tune_theta(&self.train.k, &self.train.images, &mask, &self.grid)?;
        Ok(vec![(mask, theta, None); self.val.k.len()])
    }

    fn sorted_plans(&mut self, budget: usize, deranged: bool) -> Result<Vec<(SamplingMask, ReconParams, Option<usize>)>> {
        let m0 = self.m0.clone();
        let theta = if self.grid.len() == 1 {
            self.grid[0]
        } else {
            let masks = self
                .train_sigs()?
                .iter()
                .map(|u| sorted_mask(u.as_map(), &m0, budget))
                .collect::<adaptive_cs::Result<Vec<_>>>()?;
            tune_theta_per_item(&self.train.k, &self.train.images, &masks, &self.grid)?.0
        };
        let mut masks = self
            .val_sigs()?
            .iter()
            .map(|u| sorted_mask(u.as_map(), &m0, budget))
            .collect::<adaptive_cs::Result<Vec<_>>>()?;
        if deranged {
            ensure!(masks.len() >= 2, "sorted-another needs at least 2 validation items");
            let p = derangement(masks.len(), stage_seed(self.cfg.seed, "derangement"));
            masks = p.iter().map(|&i| masks[i].clone()).collect();
        }
        Ok(masks.into_iter().map(|m| (m, theta, None)).collect())
    }

    fn bank(&mut self, strategy: MaskStrategy, j: usize, budget: usize) -> Result<PairBank> {
        let cfg = self.cfg;
        let tc = TrainConfig {
            m0: self.m0.clone(),
            sampler: cfg.sampler.clone(),
            samples: cfg.samples,
            clusters: j,
            total_budget: budget,
            recon_grid: self.grid.clone(),
            mask_strategy: strategy,
        };
        let sigs = self.train_sigs()?.to_vec();
        Ok(train_from_signatures(&self.train.k, &sigs, &tc, cfg.seed)?)
    }

    fn bank_plans(&mut self, bank: &PairBank) -> Result<Vec<(SamplingMask, ReconParams, Option<usize>)>> {
        self.val_sigs()?
            .iter()
            .map(|u| {
                let j = select_index(u, bank)?;
                let p = &bank.pairs()[j];
                Ok((p.mask.clone(), p.theta, Some(j)))
            })
            .collect()
    }
}

/// Validation item `i` draws its posterior samples from
/// `derive_seed(validation_seed(seed), i)`.
pub fn validation_seed(seed: u64) -> u64 {
    stage_seed(seed, "validation")
}

/// Runs every method at every acceleration and cluster count on the
/// held-out split. Rows come out ordered by acceleration, then method in
/// config order, then `J`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    prepare_dataset(cfg)?;
    let items = ingest_dataset(&cfg.dataset_dir)?;
    let shape = cfg.shape();
    ensure!(
        items[0].image.shape() == shape,
        "dataset images are {}, config says {shape}",
        items[0].image.shape()
    );
    let (train_idx, val_idx) = split_indices(items.len(), cfg.split[0], cfg.seed)?;
    let mut ctx = Run {
        cfg,
        train: Subset::of(&items, &train_idx),
        val: Subset::of(&items, &val_idx),
        m0: cfg.m0()?,
        grid: cfg.recon.grid(),
        train_sigs: None,
        val_sigs: None,
    };
    let dataset_id = cfg.dataset_id();
    let mut out = ExperimentOutput {
        rows: Vec::new(),
        per_image: Vec::new(),
        banks: Vec::new(),
        split: Split {
            train: ctx.train.names.clone(),
            validation: ctx.val.names.clone(),
        },
    };

    for (ai, &accel) in cfg.accel.iter().enumerate() {
        let budget = budget_for_acceleration(shape, cfg.kind, accel)?;
        let method_seed = |m: Method| derive_seed(stage_seed(cfg.seed, m.name()), ai as u64);
        for &method in &cfg.methods {
            let runs: Vec<(Vec<usize>, Scored, f64)> = if method.uses_clusters() {
                let mut runs = Vec::new();
                for &j in &cfg.clusters {
                    let start = Instant::now();
                    let strategy = match method {
                        Method::CentroidSorted => MaskStrategy::Sorted,
                        _ => cfg.mask_strategy,
                    };
                    let bank = ctx
                        .bank(strategy, j, budget)
                        .with_context(|| format!("training {method} at {accel}x with J={j}"))?;
                    let plan = ctx.bank_plans(&bank)?;
                    let scored = score(&ctx.val, &plan)?;
                    out.banks.push(TrainedBank { method, accel, j, bank });
                    runs.push((vec![j], scored, start.elapsed().as_secs_f64() * 1e3));
                }
                runs
            } else {
                let start = Instant::now();
                let plan = match method {
                    Method::Random => ctx.single_mask(random_mask(shape, cfg.kind, &ctx.m0, budget, method_seed(method))?)?,
                    Method::Vd => ctx.single_mask(vd_mask(
                        shape,
                        cfg.kind,
                        &ctx.m0,
                        budget,
                        cfg.vd_exponent,
                        method_seed(method),
                    )?)?,
                    Method::Equispaced => ctx.single_mask(equispaced_mask(shape, &ctx.m0, budget)?)?,
                    Method::SortedSelf => ctx.sorted_plans(budget, false)?,
                    Method::SortedAnother => ctx.sorted_plans(budget, true)?,
                    Method::CentroidSorted | Method::Adaptive => unreachable!(),
                };
                let scored = score(&ctx.val, &plan).with_context(|| format!("evaluating {method} at {accel}x"))?;
                vec![(cfg.clusters.clone(), scored, start.elapsed().as_secs_f64() * 1e3)]
            };

            for (js, scored, ms) in runs {
                for j in js {
                    out.rows.push(ResultRow {
                        dataset_id: dataset_id.clone(),
                        method: method.name().into(),
                        accel,
                        j,
                        psnr_mean: mean(&scored.psnr),
                        ssim_mean: mean(&scored.ssim),
                        ssim_p5: lower_tail_mean(&scored.ssim, 0.05),
                        ssim_p10: lower_tail_mean(&scored.ssim, 0.10),
                        runtime_ms: if cfg.record_runtime { format!("{ms:.1}") } else { "NA".into() },
                        seed: cfg.seed,
                    });
                    for (i, name) in ctx.val.names.iter().enumerate() {
                        out.per_image.push(ImageRow {
                            dataset_id: dataset_id.clone(),
                            method: method.name().into(),
                            accel,
                            j,
                            file: name.clone(),
                            psnr: scored.psnr[i],
                            ssim: scored.ssim[i],
                            pair: scored.pairs[i],
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Trains one adaptive bank per acceleration and cluster count on the
/// training split.
pub fn train_banks(cfg: &ExperimentConfig) -> Result<(Vec<TrainedBank>, Split)> {
    prepare_dataset(cfg)?;
    let items = ingest_dataset(&cfg.dataset_dir)?;
    let (train_idx, val_idx) = split_indices(items.len(), cfg.split[0], cfg.seed)?;
    let mut ctx = Run {
        cfg,
        train: Subset::of(&items, &train_idx),
        val: Subset::of(&items, &val_idx),
        m0: cfg.m0()?,
        grid: cfg.recon.grid(),
        train_sigs: None,
        val_sigs: None,
    };
    let mut banks = Vec::new();
    for &accel in &cfg.accel {
        let budget = budget_for_acceleration(cfg.shape(), cfg.kind, accel)?;
        for &j in &cfg.clusters {
            let bank = ctx.bank(cfg.mask_strategy, j, budget)?;
            banks.push(TrainedBank {
                method: Method::Adaptive,
                accel,
                j,
                bank,
            });
        }
    }
    let split = Split {
        train: ctx.train.names.clone(),
        validation: ctx.val.names.clone(),
    };
    Ok((banks, split))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes `results.csv` at `results`, and next to it `per_image.csv`,
/// `split.json` and one directory per bank under `banks/`.
pub fn write_outputs(out: &ExperimentOutput, results: &Path) -> Result<()> {
    let dir = results.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if out.rows.is_empty() {
        bail!("experiment produced no rows");
    }
    write_csv(results, &out.rows)?;
    write_csv(&dir.join("per_image.csv"), &out.per_image)?;
    fs::write(dir.join("split.json"), serde_json::to_string_pretty(&out.split)? + "\n")?;
    for b in &out.banks {
        b.bank.save(&dir.join("banks").join(b.label()))?;
    }
    Ok(())
}
