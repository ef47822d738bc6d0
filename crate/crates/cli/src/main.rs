use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_cs::io::{read_kgrid, read_pgm, write_kgrid, write_mask, write_pgm};
use adaptive_cs::maskgen::{budget_for_acceleration, equispaced_mask, lowfreq_mask, random_mask, vd_mask};
use adaptive_cs::metrics::{psnr, ssim};
use adaptive_cs::pipeline::{image_of, infer_adaptive, PairBank};
use adaptive_cs::transforms::dft2_unitary;
use adaptive_cs::MaskKind;
use adaptive_cs_cli::config::{default_lf_extent, ExperimentConfig, ShapeArg};
use adaptive_cs_cli::experiment::{run_experiment, train_banks, write_outputs};
use adaptive_cs_cli::phantom::{generate_phantoms, PhantomKind};
use adaptive_cs_cli::verify::{run_suite, Suite};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "adaptive-cs", version, about = "Uncertainty-driven adaptive k-space sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskGen {
    Random,
    Vd,
    Equispaced,
    Lowfreq,
}

#[derive(Subcommand)]
enum Command {
    /// Train adaptive banks for every acceleration and J in a config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct one fully sampled k-space file with a trained bank.
    Infer {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CSV file that gets one row appended.
        #[arg(long)]
        row: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment config and write results.csv plus artifacts.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a baseline mask in text form.
    Masks {
        #[arg(long, value_enum)]
        kind: MaskGen,
        #[arg(long)]
        accel: f64,
        #[arg(long)]
        shape: ShapeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// point2d or line1d; equispaced masks are always line1d.
        #[arg(long)]
        mask_kind: Option<MaskKind>,
        #[arg(long)]
        lf_extent: Option<usize>,
        #[arg(long, default_value_t = 1.5)]
        vd_exponent: f64,
    },
    /// Synthesize a phantom dataset.
    Phantom {
        #[arg(long)]
        kind: PhantomKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        shape: ShapeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a PGM image to a k-space file.
    Kspace {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run self checks and print JSON verdicts.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
}

#[derive(Serialize)]
struct InferRow<'a> {
    input: &'a str,
    output: &'a str,
    pair: usize,
    psnr: f64,
    ssim: f64,
    seed: u64,
}

fn append_row(path: &Path, row: &InferRow) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (banks, split) = train_banks(&cfg)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            fs::write(out.join("split.json"), serde_json::to_string_pretty(&split)? + "\n")?;
            for b in &banks {
                let dir = out.join(format!("accel{}_J{}", b.accel, b.j));
                b.bank.save(&dir)?;
                println!("{}", dir.display());
            }
        }
        Command::Infer {
            bank,
            input,
            out,
            row,
            seed,
        } => {
            let bank = PairBank::load(&bank)?;
            let k = read_kgrid(&input)?;
            let res = infer_adaptive(&k, &bank, seed)?;
            write_pgm(&out, &res.image)?;
            let truth = image_of(&k);
            let r = InferRow {
                input: &input.to_string_lossy(),
                output: &out.to_string_lossy(),
                pair: res.chosen,
                psnr: psnr(&truth, &res.image)?,
                ssim: ssim(&truth, &res.image)?,
                seed,
            };
            if let Some(path) = row {
                append_row(&path, &r)?;
            }
            println!("pair {} psnr {:.3} ssim {:.4}", r.pair, r.psnr, r.ssim);
        }
        Command::Eval { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let res = run_experiment(&cfg)?;
            write_outputs(&res, &out)?;
            println!("{} rows -> {}", res.rows.len(), out.display());
        }
        Command::Masks {
            kind,
            accel,
            shape,
            seed,
            out,
            mask_kind,
            lf_extent,
            vd_exponent,
        } => {
            let shape = shape.0;
            let mk = match kind {
                MaskGen::Equispaced => MaskKind::Line1d,
                _ => mask_kind.unwrap_or(MaskKind::Point2d),
            };
            let m0 = lowfreq_mask(shape, mk, lf_extent.unwrap_or_else(|| default_lf_extent(shape, mk)))?;
            let budget = budget_for_acceleration(shape, mk, accel)?;
            let mask = match kind {
                MaskGen::Random => random_mask(shape, mk, &m0, budget, seed)?,
                MaskGen::Vd => vd_mask(shape, mk, &m0, budget, vd_exponent, seed)?,
                MaskGen::Equispaced => equispaced_mask(shape, &m0, budget)?,
                MaskGen::Lowfreq => m0,
            };
            write_mask(&out, &mask)?;
        }
        Command::Phantom {
            kind,
            n,
            shape,
            seed,
            out,
        } => {
            let files = generate_phantoms(kind, n, shape.0, seed, &out)?;
            println!("{} images -> {}", files.len(), out.display());
        }
        Command::Kspace { input, out } => {
            write_kgrid(&out, &dft2_unitary(&read_pgm(&input)?))?;
        }
        Command::Verify { suite } => {
            let report = run_suite(suite)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,adaptive_cs::transforms=error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
