//! On-disk formats.
//!
//! * k-space: `KGRD`, `u32` height, `u32` width (little-endian), then
//!   `height * width` pairs of little-endian `f32` (real, imaginary),
//!   row-major, centered layout.
//! * uncertainty maps: the same layout under the magic `UMAP`, imaginary
//!   parts zero.
//! * masks: text, `MASK <H> <W> <point2d|line1d>` followed by `H` rows of
//!   `W` characters `0`/`1` (a single row for line masks).
//! * images: binary PGM (`P5`), written 16-bit with `[0, 1]` mapped linearly
//!   onto `0..=65535`.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, KGrid, Shape};
use crate::mask::{MaskKind, SamplingMask};
use crate::uncertainty::UncertaintyMap;

pub const KGRID_MAGIC: &[u8; 4] = b"KGRD";
pub const UMAP_MAGIC: &[u8; 4] = b"UMAP";

fn encode_complex(magic: &[u8; 4], shape: Shape, values: impl Iterator<Item = (f64, f64)>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + shape.len() * 8);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(shape.height as u32).to_le_bytes());
    out.extend_from_slice(&(shape.width as u32).to_le_bytes());
    for (re, im) in values {
        out.extend_from_slice(&(re as f32).to_le_bytes());
        out.extend_from_slice(&(im as f32).to_le_bytes());
    }
    out
}

fn decode_complex(
    format: &'static str,
    magic: &[u8; 4],
    bytes: &[u8],
) -> Result<(Shape, Vec<(f64, f64)>)> {
    let err = |offset: usize, message: &str| Error::Format {
        format,
        offset,
        message: message.to_string(),
    };
    if bytes.len() < 12 {
        return Err(err(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != magic {
        return Err(err(0, "bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let shape = Shape::new(u32_at(4), u32_at(8));
    if shape.is_empty() {
        return Err(err(4, "zero-sized grid"));
    }
    let expected = 12 + shape.len() * 8;
    if bytes.len() != expected {
        return Err(err(
            bytes.len().min(expected),
            &format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let values = (0..shape.len())
        .map(|i| (f32_at(12 + 8 * i), f32_at(16 + 8 * i)))
        .collect();
    Ok((shape, values))
}

pub fn encode_kgrid(k: &KGrid) -> Vec<u8> {
    encode_complex(KGRID_MAGIC, k.shape(), k.coeffs().iter().map(|c| (c.re, c.im)))
}

pub fn decode_kgrid(bytes: &[u8]) -> Result<KGrid> {
    let (shape, values) = decode_complex("kgrid", KGRID_MAGIC, bytes)?;
    KGrid::new(shape, values.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

pub fn encode_umap(v: &UncertaintyMap) -> Vec<u8> {
    encode_complex(UMAP_MAGIC, v.shape(), v.values().iter().map(|&x| (x, 0.0)))
}

pub fn decode_umap(bytes: &[u8]) -> Result<UncertaintyMap> {
    let (shape, values) = decode_complex("umap", UMAP_MAGIC, bytes)?;
    UncertaintyMap::new(shape, values.into_iter().map(|(re, _)| re).collect())
}

pub fn mask_to_text(m: &SamplingMask) -> String {
    let shape = m.shape();
    let mut out = format!("MASK {} {} {}\n", shape.height, shape.width, m.kind());
    match m.kind() {
        MaskKind::Point2d => {
            let cells = m.cells();
            for r in 0..shape.height {
                out.extend((0..shape.width).map(|c| if cells[shape.index(r, c)] { '1' } else { '0' }));
                out.push('\n');
            }
        }
        MaskKind::Line1d => {
            out.extend((0..shape.width).map(|c| if m.acquired().binary_search(&c).is_ok() { '1' } else { '0' }));
            out.push('\n');
        }
    }
    out
}

pub fn mask_from_text(text: &str) -> Result<SamplingMask> {
    let err = |offset: usize, message: String| Error::Format {
        format: "mask",
        offset,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(0, "empty mask file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "MASK" {
        return Err(err(0, format!("bad header `{header}`")));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| err(0, format!("bad dimension `{s}`")));
    let shape = Shape::new(parse(fields[1])?, parse(fields[2])?);
    let kind: MaskKind = fields[3].parse().map_err(|_| err(0, format!("bad kind `{}`", fields[3])))?;
    let rows = match kind {
        MaskKind::Point2d => shape.height,
        MaskKind::Line1d => 1,
    };
    let mut offset = header.len() + 1;
    let mut acquired = Vec::new();
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| err(offset, format!("missing row {r}")))?
            .trim_end_matches('\r');
        if line.len() != shape.width {
            return Err(err(offset, format!("row {r} has {} characters, expected {}", line.len(), shape.width)));
        }
        for (c, ch) in line.chars().enumerate() {
            match ch {
                '1' => acquired.push(match kind {
                    MaskKind::Point2d => shape.index(r, c),
                    MaskKind::Line1d => c,
                }),
                '0' => {}
                other => return Err(err(offset + c, format!("unexpected character `{other}`"))),
            }
        }
        offset += line.len() + 1;
    }
    SamplingMask::new(shape, kind, acquired)
}

/// 16-bit binary PGM; pixels are clamped to `[0, 1]` first.
pub fn encode_pgm(img: &ImageGrid) -> Vec<u8> {
    let shape = img.shape();
    let mut out = format!("P5\n{} {}\n65535\n", shape.width, shape.height).into_bytes();
    for &p in img.pixels() {
        let v = (p.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Parses 8- or 16-bit binary PGM, normalizing by the declared maximum.
pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let err = |offset: usize, message: String| Error::Format {
        format: "pgm",
        offset,
        message,
    };
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<(usize, String)> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(err(start, "unexpected end of header".into()));
        }
        Ok((start, String::from_utf8_lossy(&bytes[start..*pos]).into_owned()))
    };
    let (_, magic) = token(&mut pos)?;
    if magic != "P5" {
        return Err(err(0, format!("expected P5, found `{magic}`")));
    }
    let number = |pos: &mut usize| -> Result<usize> {
        let (at, t) = token(pos)?;
        t.parse::<usize>().map_err(|_| err(at, format!("bad header number `{t}`")))
    };
    let width = number(&mut pos)?;
    let height = number(&mut pos)?;
    let maxval_at = pos;
    let maxval = number(&mut pos)?;
    if maxval == 0 || maxval > 65535 {
        return Err(err(maxval_at, format!("maxval {maxval} out of range")));
    }
    if width == 0 || height == 0 {
        return Err(err(3, "zero-sized image".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bpp;
    if bytes.len() < pos + need {
        return Err(err(
            bytes.len(),
            format!("truncated raster: need {need} bytes after offset {pos}, have {}", bytes.len().saturating_sub(pos)),
        ));
    }
    let raster = &bytes[pos..pos + need];
    let pixels = (0..width * height)
        .map(|i| {
            let v = if bpp == 1 {
                raster[i] as f64
            } else {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as f64
            };
            v / maxval as f64
        })
        .collect();
    ImageGrid::new(Shape::new(height, width), pixels)
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.context(path.display().to_string()))
}

pub fn read_kgrid(path: &Path) -> Result<KGrid> {
    with_path(path, fs::read(path).map_err(Error::from).and_then(|b| decode_kgrid(&b)))
}

pub fn write_kgrid(path: &Path, k: &KGrid) -> Result<()> {
    with_path(path, fs::write(path, encode_kgrid(k)).map_err(Error::from))
}

pub fn read_umap(path: &Path) -> Result<UncertaintyMap> {
    with_path(path, fs::read(path).map_err(Error::from).and_then(|b| decode_umap(&b)))
}

pub fn write_umap(path: &Path, v: &UncertaintyMap) -> Result<()> {
    with_path(path, fs::write(path, encode_umap(v)).map_err(Error::from))
}

pub fn read_mask(path: &Path) -> Result<SamplingMask> {
    with_path(
        path,
        fs::read_to_string(path).map_err(Error::from).and_then(|t| mask_from_text(&t)),
    )
}

pub fn write_mask(path: &Path, m: &SamplingMask) -> Result<()> {
    with_path(path, fs::write(path, mask_to_text(m)).map_err(Error::from))
}

pub fn read_pgm(path: &Path) -> Result<ImageGrid> {
    with_path(path, fs::read(path).map_err(Error::from).and_then(|b| decode_pgm(&b)))
}

pub fn write_pgm(path: &Path, img: &ImageGrid) -> Result<()> {
    with_path(path, fs::write(path, encode_pgm(img)).map_err(Error::from))
}
