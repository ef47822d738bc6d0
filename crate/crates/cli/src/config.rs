//! Experiment configuration files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use adaptive_cs::maskgen::lowfreq_mask;
use adaptive_cs::pipeline::MaskStrategy;
use adaptive_cs::recon::{default_lambda_grid, DEFAULT_ITERS, DEFAULT_WAVELET_LEVELS};
use adaptive_cs::{MaskKind, ReconParams, ReconVariant, SamplerSpec, SamplingMask, Shape};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::phantom::PhantomKind;

/// A rejected configuration; `field` is a JSON path such as `recon.lambdas[2]`.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path}: at `{field}`: {message}")]
    Field { path: PathBuf, field: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Random,
    Vd,
    Equispaced,
    SortedSelf,
    SortedAnother,
    CentroidSorted,
    Adaptive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Vd => "vd",
            Method::Equispaced => "equispaced",
            Method::SortedSelf => "sorted-self",
            Method::SortedAnother => "sorted-another",
            Method::CentroidSorted => "centroid-sorted",
            Method::Adaptive => "adaptive",
        }
    }

    /// Methods whose output depends on the number of pairs.
    pub fn uses_clusters(self) -> bool {
        matches!(self, Method::CentroidSorted | Method::Adaptive)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `HxW`, e.g. `64x64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShapeArg(pub Shape);

impl FromStr for ShapeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("expected positive sizes in HxW, got {s:?}"))
        };
        Ok(ShapeArg(Shape::new(parse(h)?, parse(w)?)))
    }
}

impl fmt::Display for ShapeArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0.height, self.0.width)
    }
}

impl<'de> Deserialize<'de> for ShapeArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for ShapeArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn default_iters() -> usize {
    DEFAULT_ITERS
}

fn default_levels() -> usize {
    DEFAULT_WAVELET_LEVELS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    pub variant: ReconVariant,
    /// Candidate FISTA regularization weights; a logarithmic default grid if
    /// absent.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_levels")]
    pub wavelet_levels: usize,
}

impl ReconConfig {
    /// Candidate reconstructor parameters to tune over.
    pub fn grid(&self) -> Vec<ReconParams> {
        match self.variant {
            ReconVariant::ZeroFill => vec![ReconParams::zero_fill()],
            ReconVariant::Fista => self
                .lambdas
                .clone()
                .unwrap_or_else(default_lambda_grid)
                .into_iter()
                .map(|l| ReconParams {
                    iters: self.iters,
                    wavelet_levels: self.wavelet_levels,
                    ..ReconParams::fista(l)
                })
                .collect(),
        }
    }
}

/// Phantoms to synthesize into `dataset_dir` when it holds no images yet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub kind: PhantomKind,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_split() -> [f64; 2] {
    [0.75, 0.25]
}

fn default_vd_exponent() -> f64 {
    1.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Relative paths are taken from the config file's directory.
    pub dataset_dir: PathBuf,
    #[serde(default)]
    pub dataset_id: Option<String>,
    #[serde(default)]
    pub generate: Vec<GenerateSpec>,
    pub shape: ShapeArg,
    pub kind: MaskKind,
    /// Side of the low-frequency block (point masks) or number of
    /// autocalibration lines (line masks).
    #[serde(default)]
    pub lf_extent: Option<usize>,
    pub accel: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(rename = "J", alias = "j")]
    pub clusters: Vec<usize>,
    #[serde(rename = "S", alias = "s")]
    pub samples: usize,
    pub sampler: SamplerSpec,
    pub recon: ReconConfig,
    pub seed: u64,
    /// Train and validation fractions.
    #[serde(default = "default_split")]
    pub split: [f64; 2],
    #[serde(default)]
    pub record_runtime: bool,
    #[serde(default = "default_vd_exponent")]
    pub vd_exponent: f64,
    /// How `adaptive` turns centroids into masks.
    #[serde(default)]
    pub mask_strategy: MaskStrategy,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|(field, message)| ConfigError::Field {
            path: path.to_path_buf(),
            field,
            message,
        })?;
        if cfg.dataset_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.dataset_dir = parent.join(&cfg.dataset_dir);
            }
        }
        Ok(cfg)
    }

    /// Parses and validates; errors carry the offending field's path.
    pub fn parse(text: &str) -> Result<Self, (String, String)> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path.is_empty() || path == "." { "(root)".to_string() } else { path };
            (field, e.into_inner().to_string())
        })?;
        cfg.validate().map_err(|(f, m)| (f.to_string(), m))?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.methods.is_empty() {
            return Err(("methods", "must list at least one method".into()));
        }
        if self.accel.is_empty() {
            return Err(("accel", "must list at least one acceleration".into()));
        }
        if let Some(a) = self.accel.iter().find(|a| !(**a >= 1.0 && a.is_finite())) {
            return Err(("accel", format!("accelerations must be >= 1, got {a}")));
        }
        if self.clusters.is_empty() {
            return Err(("J", "must list at least one cluster count".into()));
        }
        if self.clusters.contains(&0) {
            return Err(("J", "cluster counts must be positive".into()));
        }
        if self.samples < 2 {
            return Err(("S", format!("need at least 2 samples, got {}", self.samples)));
        }
        self.sampler.validate().map_err(|e| ("sampler", e.to_string()))?;
        if self.recon.variant == ReconVariant::ZeroFill && self.recon.lambdas.is_some() {
            return Err(("recon.lambdas", "only applies to fista".into()));
        }
        if self.recon.variant == ReconVariant::Fista {
            adaptive_cs::wavelet::check_levels(self.shape(), self.recon.wavelet_levels)
                .map_err(|e| ("recon.wavelet_levels", e.to_string()))?;
        }
        for p in self.recon.grid() {
            p.validate().map_err(|e| ("recon", e.to_string()))?;
        }
        if self.recon.grid().is_empty() {
            return Err(("recon.lambdas", "must not be empty".into()));
        }
        let [train, val] = self.split;
        if !(train > 0.0 && val > 0.0 && (train + val - 1.0).abs() < 1e-9) {
            return Err(("split", format!("fractions must be positive and sum to 1, got [{train}, {val}]")));
        }
        if !(self.vd_exponent > 0.0 && self.vd_exponent.is_finite()) {
            return Err(("vd_exponent", format!("must be > 0, got {}", self.vd_exponent)));
        }
        if self.methods.contains(&Method::Equispaced) && self.kind != MaskKind::Line1d {
            return Err(("methods", "equispaced needs kind line1d".into()));
        }
        if let Some(g) = self.generate.iter().find(|g| g.n == 0) {
            return Err(("generate", format!("{} count must be at least 1", g.kind)));
        }
        self.m0().map_err(|e| ("lf_extent", e.to_string()))?;
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        self.shape.0
    }

    pub fn lf_extent(&self) -> usize {
        self.lf_extent.unwrap_or_else(|| default_lf_extent(self.shape(), self.kind))
    }

    pub fn m0(&self) -> adaptive_cs::Result<SamplingMask> {
        lowfreq_mask(self.shape(), self.kind, self.lf_extent())
    }

    pub fn dataset_id(&self) -> String {
        self.dataset_id.clone().unwrap_or_else(|| {
            self.dataset_dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }
}

/// An eighth of the shorter side for point masks, a sixteenth of the width
/// for line masks; never below 2.
pub fn default_lf_extent(shape: Shape, kind: MaskKind) -> usize {
    match kind {
        MaskKind::Point2d => (shape.height.min(shape.width) / 8).max(2),
        MaskKind::Line1d => (shape.width / 16).max(2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "dataset_dir": "data",
        "shape": "32x32",
        "kind": "point2d",
        "accel": [4],
        "methods": ["vd", "adaptive"],
        "J": [1, 2],
        "S": 8,
        "sampler": {"variant": "jitter_ensemble", "alpha": 1.0, "amplitude": 1.0, "temperature": 1.0},
        "recon": {"variant": "zero_fill"},
        "seed": 3
    }"#;

    fn with(field: &str, value: &str) -> String {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        let mut target = &mut v;
        let parts: Vec<&str> = field.split('.').collect();
        for p in &parts[..parts.len() - 1] {
            target = target.get_mut(*p).unwrap();
        }
        target[parts[parts.len() - 1]] = serde_json::from_str(value).unwrap();
        v.to_string()
    }

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(cfg.split, [0.75, 0.25]);
        assert_eq!(cfg.lf_extent(), 4);
        assert_eq!(cfg.clusters, vec![1, 2]);
        assert_eq!(cfg.recon.grid(), vec![ReconParams::zero_fill()]);
        assert_eq!(cfg.mask_strategy, MaskStrategy::RejectionSampling);
    }

    #[test]
    fn errors_name_the_field() {
        let field = |text: String| ExperimentConfig::parse(&text).unwrap_err().0;
        assert_eq!(field(with("methods", "[]")), "methods");
        assert_eq!(field(with("methods", r#"["vd", "bogus"]"#)), "methods[1]");
        assert_eq!(field(with("sampler.alpha", r#""one""#)), "sampler.alpha");
        assert_eq!(field(with("shape", r#""64""#)), "shape");
        assert_eq!(field(with("recon", r#"{"variant": "fista", "lambdas": [0.1, "x"]}"#)), "recon.lambdas[1]");
        assert_eq!(field(with("split", "[0.5, 0.2]")), "split");
        assert_eq!(field(with("methods", r#"["equispaced"]"#)), "methods");
        assert_eq!(field(with("extra", "1")), "extra");
    }

    #[test]
    fn fista_grid_uses_settings() {
        let cfg = ExperimentConfig::parse(&with("recon", r#"{"variant": "fista", "lambdas": [0.01, 0.1], "iters": 7}"#)).unwrap();
        let grid = cfg.recon.grid();
        assert_eq!(grid.len(), 2);
        assert!(grid.iter().all(|p| p.iters == 7 && p.wavelet_levels == DEFAULT_WAVELET_LEVELS));
    }

    #[test]
    fn shapes_parse() {
        assert_eq!("64x48".parse::<ShapeArg>().unwrap().0, Shape::new(64, 48));
        assert!("64".parse::<ShapeArg>().is_err());
        assert!("0x4".parse::<ShapeArg>().is_err());
    }
}
