use adaptive_cs::maskgen::{budget_for_acceleration, lowfreq_mask};
use adaptive_cs::pipeline::{infer_adaptive, train_adaptive, MaskStrategy, PairBank, TrainConfig};
use adaptive_cs::rng::rng_from_seed;
use adaptive_cs::transforms::dft2_unitary;
use adaptive_cs::uncertainty::AxisBands;
use adaptive_cs::{ImageGrid, KGrid, MaskKind, ReconParams, SamplerSpec, SamplingMask, Shape};
use rand::Rng;

const SHAPE: Shape = Shape { height: 64, width: 64 };

/// Stripes varying along rows (`horizontal`) or columns, period 16 to 32.
fn stripes(horizontal: bool, seed: u64) -> KGrid {
    let mut rng = rng_from_seed(seed);
    let period = rng.random_range(16..=32) as f64;
    let phase = rng.random_range(0.0..period);
    let (lo, hi) = (rng.random_range(0.1..0.3), rng.random_range(0.6..0.9));
    dft2_unitary(&ImageGrid::from_fn(SHAPE, |r, c| {
        let t = if horizontal { r } else { c } as f64;
        let wave = (2.0 * std::f64::consts::PI * (t + phase) / period).sin();
        lo + (hi - lo) * (0.5 + 0.5 * (3.0 * wave).tanh())
    }))
}

fn dataset(n: usize, seed: u64) -> (Vec<KGrid>, Vec<bool>) {
    (0..n)
        .map(|i| {
            let horizontal = i % 2 == 0;
            (stripes(horizontal, seed + i as u64), horizontal)
        })
        .unzip()
}

fn bands(shape: Shape, values: &[f64]) -> AxisBands {
    AxisBands::of(shape, values)
}

fn extra_cells(mask: &SamplingMask, m0: &SamplingMask) -> Vec<f64> {
    let cells = mask.cells();
    (0..SHAPE.len())
        .map(|i| if cells[i] && !m0.contains_cell(i) { 1.0 } else { 0.0 })
        .collect()
}

fn train(seed: u64) -> (PairBank, TrainConfig) {
    let m0 = lowfreq_mask(SHAPE, MaskKind::Point2d, 8).unwrap();
    let cfg = TrainConfig {
        total_budget: budget_for_acceleration(SHAPE, MaskKind::Point2d, 8.0).unwrap(),
        m0,
        sampler: SamplerSpec::jitter_ensemble(1.0, 1.0, 1.0, 0),
        samples: 16,
        clusters: 2,
        recon_grid: vec![ReconParams::zero_fill()],
        mask_strategy: MaskStrategy::RejectionSampling,
    };
    let (train_k, _) = dataset(24, seed);
    (train_adaptive(&train_k, &cfg, seed).unwrap(), cfg)
}

#[test]
fn two_populations_get_axis_matched_pairs() {
    let (bank, cfg) = train(10);
    let dominant: Vec<bool> = bank
        .pairs()
        .iter()
        .map(|p| bands(SHAPE, p.centroid.values()).ratio() > 1.0)
        .collect();
    assert_ne!(dominant[0], dominant[1], "centroids are not axis-opposed");

    for (p, &vertical) in bank.pairs().iter().zip(&dominant) {
        let b = bands(SHAPE, &extra_cells(&p.mask, &cfg.m0));
        let extra = (p.mask.budget() - cfg.m0.budget()) as f64;
        let along = if vertical { b.vertical } else { b.horizontal };
        assert!(along / extra >= 0.6, "only {:.2} of the extra budget on the dominant axis", along / extra);
    }

    // horizontal stripes vary along rows and need vertical frequencies
    let (held_out, horizontal) = dataset(40, 10_000);
    let mut matched = 0;
    for (i, (k, h)) in held_out.iter().zip(&horizontal).enumerate() {
        let out = infer_adaptive(k, &bank, 500 + i as u64).unwrap();
        matched += usize::from(dominant[out.chosen] == *h);
    }
    assert!(matched * 10 >= held_out.len() * 9, "{matched}/{} routed to the matched pair", held_out.len());
}

#[test]
fn bank_is_bitwise_reproducible_and_persists() {
    let (a, _) = train(3);
    let (b, _) = train(3);
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    a.save(dir.path()).unwrap();
    let loaded = PairBank::load(dir.path()).unwrap();
    for (x, y) in loaded.pairs().iter().zip(a.pairs()) {
        assert_eq!(x.mask, y.mask);
        assert_eq!(x.theta, y.theta);
        for (u, v) in x.centroid.values().iter().zip(y.centroid.values()) {
            assert!((u - v).abs() <= 1e-6 * v.abs().max(1e-30));
        }
    }
}
