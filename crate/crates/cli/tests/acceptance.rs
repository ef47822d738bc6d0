//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use adaptive_cs::maskgen::{lowfreq_mask, sorted_mask};
use adaptive_cs::metrics::ssim;
use adaptive_cs::pipeline::hypothesis::{hypothesis_risk_compare, ToyHypothesisInstance, ToyLoss};
use adaptive_cs::rng::{derive_seed, rng_from_seed};
use adaptive_cs::samplers::{analytic_posterior_variance, sample};
use adaptive_cs::transforms::{apply_mask, conjugate_fill, dft2_unitary, idft2_unitary, zero_fill_recon};
use adaptive_cs::uncertainty::{
    estimate_unacquired_mse, kspace_sample_variance, non_commutation_analytic, theorem_s1_check, AxisBands,
};
use adaptive_cs::{ImageGrid, MaskKind, SamplerSpec, SamplingMask, Shape, UncertaintyMap};
use adaptive_cs_cli::config::ExperimentConfig;
use adaptive_cs_cli::experiment::{run_experiment, ExperimentOutput, ResultRow};
use adaptive_cs_cli::phantom::{generate_phantoms, PhantomKind};
use rand::Rng;
use rayon::prelude::*;

const SHAPE64: Shape = Shape { height: 64, width: 64 };

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_image(shape: Shape, seed: u64) -> ImageGrid {
    let mut rng = rng_from_seed(seed);
    ImageGrid::from_fn(shape, |_, _| rng.random::<f64>())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for s in 0..200 {
        let img = random_image(SHAPE64, derive_seed(100, s));
        let k = dft2_unitary(&img);
        worst = worst.max((k.energy() - img.energy()).abs() / img.energy());
        let back = idft2_unitary(&k).image;
        let diff: f64 = back.pixels().iter().zip(img.pixels()).map(|(a, b)| (a - b) * (a - b)).sum();
        worst = worst.max((diff / img.energy()).sqrt());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-10 && secs < 5.0,
        format!("max relative error {worst:.2e} over 200 images, {secs:.2} s"),
    )
}

/// Zero filling keeps the real part, which is exact when the mask is closed
/// under the conjugate mirror; the masks here are drawn that way.
fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = rng_from_seed(200);
    for s in 0..100 {
        let shape = Shape::new(rng.random_range(4..=48), rng.random_range(4..=48));
        let img = random_image(shape, derive_seed(201, s));
        let draw: Vec<bool> = (0..shape.len()).map(|_| rng.random_bool(0.5)).collect();
        let cells: Vec<bool> = (0..shape.len()).map(|i| draw[i] && draw[shape.mirror(i)]).collect();
        let m = SamplingMask::from_cells(shape, &cells).unwrap();
        let k = dft2_unitary(&img);
        let rec = zero_fill_recon(&apply_mask(&k, &m).unwrap(), &m).unwrap();
        let mse: f64 = rec.pixels().iter().zip(img.pixels()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            / shape.len() as f64;
        let expected: f64 = (0..shape.len())
            .filter(|&i| !cells[i])
            .map(|i| k.coeffs()[i].norm_sqr())
            .sum::<f64>()
            / shape.len() as f64;
        worst = worst.max((mse - expected).abs());
    }
    outcome(worst < 1e-10, format!("max |MSE - unacquired energy / L| {worst:.2e} over 100 pairs"))
}

/// All completions of `m0` to `budget`; the winner has the largest expected
/// PSNR, PSNRs within 1e-9 dB count as ties and go to the lexicographically
/// smallest added set.
fn exhaustive_argmax(v: &UncertaintyMap, m0: &SamplingMask, budget: usize) -> Vec<usize> {
    let shape = v.shape();
    let free: Vec<usize> = (0..shape.len()).filter(|&i| !m0.contains_cell(i)).collect();
    let n = budget - m0.budget();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for bits in 0u32..(1 << free.len()) {
        if bits.count_ones() as usize != n {
            continue;
        }
        let set: Vec<usize> = (0..free.len()).filter(|b| bits >> b & 1 == 1).map(|b| free[b]).collect();
        let acquired: Vec<bool> = (0..shape.len()).map(|i| m0.contains_cell(i) || set.contains(&i)).collect();
        let mse = (0..shape.len()).filter(|&i| !acquired[i]).map(|i| v.values()[i]).sum::<f64>() / shape.len() as f64;
        let psnr = -10.0 * mse.log10();
        let better = match &best {
            None => true,
            Some((p, s)) => {
                if (psnr - p).abs() <= 1e-9 || psnr == *p {
                    set < *s
                } else {
                    psnr > *p
                }
            }
        };
        if better {
            best = Some((psnr, set));
        }
    }
    best.unwrap().1
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let shape = Shape::new(4, 4);
    let m0 = lowfreq_mask(shape, MaskKind::Point2d, 2).unwrap();
    let mut rng = rng_from_seed(300);
    let mut matched = 0;
    for _ in 0..20 {
        let spec = SamplerSpec::gaussian_spectral(
            rng.random_range(0.25..3.0),
            rng.random_range(0.1..10.0),
            rng.random_range(0.2..2.0),
            0,
        );
        let budget = rng.random_range(m0.budget() + 1..shape.len());
        let v = analytic_posterior_variance(&m0, &spec).unwrap();
        let got: Vec<usize> = sorted_mask(&v, &m0, budget)
            .unwrap()
            .acquired()
            .iter()
            .copied()
            .filter(|&c| !m0.contains_cell(c))
            .collect();
        if got == exhaustive_argmax(&v, &m0, budget) {
            matched += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(matched == 20 && secs < 60.0, format!("{matched}/20 exact argmax matches, {secs:.2} s"))
}

fn criterion_4() -> Outcome {
    let a = non_commutation_analytic(4).unwrap();
    let mc = theorem_s1_check(4, 100_000, 400).unwrap();
    let passed = (a.lhs - 1.0).abs() < 1e-12 && a.rhs.abs() < 1e-12 && (mc.lhs - 1.0).abs() <= 0.05 && mc.rhs <= 0.05;
    outcome(
        passed,
        format!("analytic lhs {:.3} rhs {:.1e}; Monte Carlo lhs {:.4} rhs {:.4}", a.lhs, a.rhs, mc.lhs, mc.rhs),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let results: Vec<_> = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let loss = if s % 2 == 0 { ToyLoss::SquaredError } else { ToyLoss::Ssim };
            let inst = ToyHypothesisInstance::random(4, 4, 3, 4, 2, loss, derive_seed(500, s)).unwrap();
            // one shared pair: the best mean over data of a single table column
            let table = inst.loss_table().unwrap();
            let mut h1 = f64::INFINITY;
            for m in 0..inst.masks().len() {
                for t in 0..inst.thetas().len() {
                    let r = table.iter().map(|row| row[m][t]).sum::<f64>() / table.len() as f64;
                    h1 = h1.min(r);
                }
            }
            (hypothesis_risk_compare(&inst).unwrap(), h1)
        })
        .collect();
    let tol = 1e-12;
    let h1_agrees = results.iter().all(|(r, h1)| (r.inf_h1 - h1).abs() < 1e-12);
    let le1 = results.iter().filter(|(r, _)| r.inf_h15 <= r.inf_h1 + tol).count();
    let le2 = results.iter().filter(|(r, _)| r.inf_h15 <= r.inf_h2 + tol).count();
    let s1 = results.iter().filter(|(r, _)| r.inf_h15 < r.inf_h1 - tol).count();
    let s2 = results.iter().filter(|(r, _)| r.inf_h15 < r.inf_h2 - tol).count();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        h1_agrees && le1 == 100 && le2 == 100 && s1 > 0 && s2 > 0 && secs < 120.0,
        format!("h15<=h1 {le1}/100 (strict {s1}), h15<=h2 {le2}/100 (strict {s2}), {secs:.1} s"),
    )
}

fn criterion_6() -> Outcome {
    let shape = Shape::new(16, 16);
    let m0 = lowfreq_mask(shape, MaskKind::Point2d, 4).unwrap();
    let spec = SamplerSpec::gaussian_spectral(1.2, 2.0, 1.0, 600);
    let img = ImageGrid::from_fn(shape, |r, c| 0.5 + 0.3 * ((r * c) as f64 * 0.05).cos());
    let lf = apply_mask(&dft2_unitary(&img), &m0).unwrap();
    let v = kspace_sample_variance(&sample(&lf, &m0, &spec, 4096).unwrap()).unwrap();
    let estimate = estimate_unacquired_mse(&v, &m0).unwrap();
    let analytic = estimate_unacquired_mse(&analytic_posterior_variance(&m0, &spec).unwrap(), &m0).unwrap();
    // reference images drawn from the same posterior, reconstructed by its mean
    let mean = idft2_unitary(&conjugate_fill(&lf, &m0).unwrap()).image;
    let truths = sample(&lf, &m0, &spec.with_seed(601), 4096).unwrap();
    let sse = truths
        .samples
        .iter()
        .map(|t| t.pixels().iter().zip(mean.pixels()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum::<f64>()
        / truths.samples.len() as f64;
    let ra = (estimate - analytic).abs() / analytic;
    let rm = (estimate - sse).abs() / sse;
    outcome(
        ra < 0.05 && rm < 0.10,
        format!("estimate {estimate:.4}, analytic {analytic:.4} ({:.2}%), Monte Carlo {sse:.4} ({:.2}%)", 100.0 * ra, 100.0 * rm),
    )
}

fn mixed_population(dir: &Path) {
    generate_phantoms(PhantomKind::StripesH, 22, SHAPE64, 1, dir).unwrap();
    generate_phantoms(PhantomKind::StripesV, 21, SHAPE64, 2, dir).unwrap();
    generate_phantoms(PhantomKind::SmoothBlobs, 21, SHAPE64, 3, dir).unwrap();
}

fn stripe_population(dir: &Path) {
    generate_phantoms(PhantomKind::StripesH, 32, SHAPE64, 11, dir).unwrap();
    generate_phantoms(PhantomKind::StripesV, 32, SHAPE64, 12, dir).unwrap();
}

fn config(dir: &Path, methods: &str, clusters: &str, recon: &str, seed: u64) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "dataset_dir": {dir:?},
            "shape": "64x64",
            "kind": "point2d",
            "accel": [8],
            "methods": {methods},
            "J": {clusters},
            "S": 16,
            "sampler": {{"variant": "jitter_ensemble", "alpha": 1.0, "amplitude": 1.0, "temperature": 1.0}},
            "recon": {{"variant": "{recon}"}},
            "seed": {seed}
        }}"#,
        dir = dir.to_string_lossy()
    );
    ExperimentConfig::parse(&text).unwrap()
}

fn row<'a>(out: &'a ExperimentOutput, method: &str, j: usize) -> &'a ResultRow {
    out.rows.iter().find(|r| r.method == method && r.j == j).unwrap()
}

fn criterion_7(mixed: &Path) -> Outcome {
    let start = Instant::now();
    let out = run_experiment(&config(mixed, r#"["sorted-self", "sorted-another", "vd"]"#, "[1]", "zero_fill", 7)).unwrap();
    let (s, a, v) = (
        row(&out, "sorted-self", 1).psnr_mean,
        row(&out, "sorted-another", 1).psnr_mean,
        row(&out, "vd", 1).psnr_mean,
    );
    let secs = start.elapsed().as_secs_f64();
    outcome(
        s - a >= 0.2 && a - v >= 0.2 && secs < 600.0,
        format!("PSNR sorted-self {s:.2} > sorted-another {a:.2} > vd {v:.2} dB, {secs:.1} s"),
    )
}

fn criterion_8(stripes: &Path) -> Outcome {
    let out = run_experiment(&config(
        stripes,
        r#"["random", "vd", "centroid-sorted", "adaptive"]"#,
        "[1, 2]",
        "fista",
        5,
    ))
    .unwrap();
    let bank = &out.banks.iter().find(|b| b.method.name() == "adaptive" && b.j == 2).unwrap().bank;
    // horizontal stripes change from row to row, so their energy sits on the
    // vertical frequency axis
    let vertical_pair: Vec<bool> = bank
        .pairs()
        .iter()
        .map(|p| AxisBands::of(SHAPE64, p.centroid.values()).ratio() > 1.0)
        .collect();
    let routed: Vec<_> = out.per_image.iter().filter(|r| r.method == "adaptive" && r.j == 2).collect();
    let matched = routed
        .iter()
        .filter(|r| vertical_pair[r.pair.unwrap()] == r.file.starts_with("stripes_h"))
        .count();
    let share = matched as f64 / routed.len() as f64;
    let adaptive = row(&out, "adaptive", 2).ssim_mean;
    let best_single = ["random", "vd"]
        .iter()
        .map(|m| row(&out, m, 1).ssim_mean)
        .chain([row(&out, "centroid-sorted", 1).ssim_mean])
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        share >= 0.9 && adaptive >= best_single,
        format!(
            "routed {matched}/{} ({:.0}%) to the axis-matched pair; SSIM adaptive {adaptive:.4} vs best single mask {best_single:.4}",
            routed.len(),
            100.0 * share
        ),
    )
}

/// Averages over replicate seeds: each seed redraws the split, the
/// signatures and the rejection-sampled masks.
fn criterion_9(mixed: &Path) -> Outcome {
    let seeds = 1..=8u64;
    let n = seeds.clone().count() as f64;
    let mut mean = [0.0; 3];
    let mut worst = [0.0; 3];
    for seed in seeds {
        let out = run_experiment(&config(mixed, r#"["adaptive"]"#, "[1, 2, 3]", "fista", seed)).unwrap();
        for j in 1..=3 {
            let r = row(&out, "adaptive", j);
            mean[j - 1] += r.ssim_mean / n;
            worst[j - 1] += r.ssim_p10 / n;
        }
    }
    let passed = mean[1] >= mean[0] && (mean[2] - mean[1]).abs() < 0.005 && worst[1] >= worst[0] && worst[2] >= worst[1];
    outcome(
        passed,
        format!(
            "mean SSIM J1 {:.4} J2 {:.4} J3 {:.4}; worst-10% J1 {:.4} J2 {:.4} J3 {:.4} (8 seeds)",
            mean[0], mean[1], mean[2], worst[0], worst[1], worst[2]
        ),
    )
}

fn criterion_10(mixed: &Path, scratch: &Path) -> Outcome {
    let cfg = scratch.join("determinism.json");
    fs::write(
        &cfg,
        format!(
            r#"{{
                "dataset_dir": {:?},
                "shape": "64x64",
                "kind": "point2d",
                "accel": [4, 8],
                "methods": ["random", "vd", "sorted-self", "sorted-another", "centroid-sorted", "adaptive"],
                "J": [1, 2],
                "S": 8,
                "sampler": {{"variant": "jitter_ensemble", "alpha": 1.0, "amplitude": 1.0, "temperature": 1.0}},
                "recon": {{"variant": "zero_fill"}},
                "seed": 10
            }}"#,
            mixed.to_string_lossy()
        ),
    )
    .unwrap();
    let run = |name: &str| {
        let out = scratch.join(name).join("results.csv");
        let status = Command::new(env!("CARGO_BIN_EXE_adaptive-cs"))
            .args(["eval", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "eval exited with {status}");
        fs::read(out).unwrap()
    };
    let (a, b) = (run("first"), run("second"));
    outcome(a == b && !a.is_empty(), format!("two eval runs, {} and {} bytes, identical: {}", a.len(), b.len(), a == b))
}

/// Mean SSIM by direct summation over every 7x7 window.
fn direct_ssim(x: &ImageGrid, y: &ImageGrid) -> f64 {
    let s = x.shape();
    let max = x.pixels().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (c1, c2) = ((0.01 * max).powi(2), (0.03 * max).powi(2));
    let (mut total, mut count) = (0.0, 0.0);
    for r0 in 0..=s.height - 7 {
        for c0 in 0..=s.width - 7 {
            let mut a = Vec::with_capacity(49);
            let mut b = Vec::with_capacity(49);
            for r in r0..r0 + 7 {
                for c in c0..c0 + 7 {
                    a.push(x.get(r, c));
                    b.push(y.get(r, c));
                }
            }
            let ma = a.iter().sum::<f64>() / 49.0;
            let mb = b.iter().sum::<f64>() / 49.0;
            let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / 48.0;
            let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / 48.0;
            let cov = a.iter().zip(&b).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / 48.0;
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    total / count
}

fn criterion_11() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut self_err: f64 = 0.0;
    for s in 0..20 {
        let x = random_image(Shape::new(32, 32), derive_seed(1100, s));
        let mut rng = rng_from_seed(derive_seed(1101, s));
        let y = ImageGrid::from_fn(x.shape(), |r, c| (x.get(r, c) + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0));
        worst = worst.max((ssim(&x, &y).unwrap() - direct_ssim(&x, &y)).abs());
        self_err = self_err.max((ssim(&x, &x).unwrap() - 1.0).abs());
    }
    outcome(
        worst < 1e-8 && self_err < 1e-12,
        format!("max deviation from direct summation {worst:.2e}; |ssim(x,x) - 1| {self_err:.1e}"),
    )
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let mixed = scratch.path().join("mixed");
    let stripes = scratch.path().join("stripes");
    mixed_population(&mixed);
    stripe_population(&stripes);

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("Parseval and round trip", Box::new(criterion_1)),
        ("zero-fill MSE identity", Box::new(criterion_2)),
        ("sorted mask is the exhaustive optimum", Box::new(criterion_3)),
        ("variance does not commute with the DFT", Box::new(criterion_4)),
        ("adaptive class dominates both baselines", Box::new(criterion_5)),
        ("uncertainty estimator consistency", Box::new(criterion_6)),
        ("sorted-self > sorted-another > vd", Box::new(|| criterion_7(&mixed))),
        ("adaptive selection on two stripe populations", Box::new(|| criterion_8(&stripes))),
        ("J trade-off on the mixed population", Box::new(|| criterion_9(&mixed))),
        ("eval determinism", Box::new(|| criterion_10(&mixed, scratch.path()))),
        ("SSIM against direct summation", Box::new(criterion_11)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag}  {name}: {}", i + 1, o.detail);
        std::io::stdout().flush().unwrap();
        if !o.passed {
            failed.push(i + 1);
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
