//! Split files and the JSON manifest.
//!
//! Each split is one file: the magic `GRIDSP01`, then `k`, `p` and the sample
//! count as little-endian `u64`, then fixed-size sample records of
//! image (`f32` LE, interleaved RGB), true weights (`f64` LE), true mask
//! (one byte per cell) and optimal cost (`f64` LE).

use std::fs;
use std::path::Path;

use bbsp_core::data::{gen_sample, sample_seed, Sample, Terrain, TerrainPalette};
use bbsp_core::grid::{PathMask, WeightGrid};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GRIDSP01";
pub const HEADER_LEN: usize = 32;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
pub const SPLITS: [&str; 3] = ["train", "val", "test"];
/// Upper bound on `k` and `p` accepted from a header.
const MAX_SIDE: u64 = 1 << 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub id: u8,
    pub cost: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub name: String,
    pub file: String,
    pub count: u64,
    /// Index of the split's first sample in the dataset-wide seed stream.
    pub first_index: u64,
    /// Byte offset of the first sample record.
    pub offset: u64,
    pub stride: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub k: usize,
    pub p: usize,
    pub palette: Vec<PaletteEntry>,
    pub splits: Vec<SplitInfo>,
}

impl Manifest {
    pub fn palette(&self) -> Result<TerrainPalette> {
        let terrains = self
            .palette
            .iter()
            .map(|t| Terrain {
                id: t.id,
                cost: t.cost,
                color: t.color,
            })
            .collect();
        Ok(TerrainPalette::new(terrains)?)
    }

    pub fn split(&self, name: &str) -> Option<&SplitInfo> {
        self.splits.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    /// Samples per split, in manifest order.
    pub samples: Vec<Vec<Sample>>,
}

impl Dataset {
    pub fn split(&self, name: &str) -> Option<&[Sample]> {
        let i = self.manifest.splits.iter().position(|s| s.name == name)?;
        Some(&self.samples[i])
    }
}

pub fn sample_stride(k: usize, p: usize) -> usize {
    let cells = k * k;
    let side = k * p;
    side * side * 3 * 4 + cells * 8 + cells + 8
}

/// Generates the train/val/test splits; sample `i` of the whole dataset is
/// drawn from `sample_seed(seed, i)`.
pub fn generate(
    seed: u64,
    k: usize,
    p: usize,
    palette: &TerrainPalette,
    counts: [u64; 3],
) -> Result<Dataset> {
    let stride = sample_stride(k, p) as u64;
    let mut splits = Vec::new();
    let mut samples = Vec::new();
    let mut next = 0u64;
    for (name, &count) in SPLITS.iter().zip(&counts) {
        let split: Vec<Sample> = (next..next + count)
            .map(|i| gen_sample(sample_seed(seed, i), k, p, palette))
            .collect::<std::result::Result<_, _>>()?;
        splits.push(SplitInfo {
            name: name.to_string(),
            file: format!("{name}.bin"),
            count,
            first_index: next,
            offset: HEADER_LEN as u64,
            stride,
        });
        samples.push(split);
        next += count;
    }
    let palette = palette
        .terrains()
        .iter()
        .map(|t| PaletteEntry {
            id: t.id,
            cost: t.cost,
            color: t.color,
        })
        .collect();
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed,
        k,
        p,
        palette,
        splits,
    };
    Ok(Dataset { manifest, samples })
}

/// Regenerates a dataset from its manifest's seed, shape, palette and counts.
pub fn regenerate(manifest: &Manifest) -> Result<Dataset> {
    let count = |name| manifest.split(name).map_or(0, |s| s.count);
    generate(
        manifest.seed,
        manifest.k,
        manifest.p,
        &manifest.palette()?,
        SPLITS.map(count),
    )
}

pub fn encode_split(k: usize, p: usize, samples: &[Sample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + samples.len() * sample_stride(k, p));
    out.extend_from_slice(MAGIC);
    for v in [k as u64, p as u64, samples.len() as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in samples {
        for v in &s.image {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in s.true_weights.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend(s.true_mask.as_slice().iter().map(|&b| u8::from(b)));
        out.extend_from_slice(&s.optimal_cost.to_le_bytes());
    }
    out
}

/// Parses a split file; `path` only labels errors.
pub fn decode_split(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<Sample>)> {
    let err = |record: &str, reason: String| Error::format(path, record, reason);
    if bytes.len() < HEADER_LEN {
        return Err(err(
            "header",
            format!("{} bytes, header needs {HEADER_LEN}", bytes.len()),
        ));
    }
    if &bytes[..8] != MAGIC {
        return Err(err(
            "header",
            format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..8])),
        ));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
    let (k, p, count) = (word(0), word(1), word(2));
    if !(2..=MAX_SIDE).contains(&k) || !(1..=MAX_SIDE).contains(&p) {
        return Err(err(
            "header",
            format!("implausible grid shape k = {k}, p = {p}"),
        ));
    }
    let (k, p) = (k as usize, p as usize);
    let stride = sample_stride(k, p);
    let body = bytes.len() - HEADER_LEN;
    let expected = count
        .checked_mul(stride as u64)
        .filter(|&n| n == body as u64);
    if expected.is_none() {
        let complete = body / stride;
        return Err(if (complete as u64) < count {
            err(&format!("sample {complete}"), format!("truncated: header declares {count} samples of {stride} bytes, file holds {body} bytes"))
        } else {
            err(
                "trailer",
                format!(
                    "{} bytes after the last of {count} samples",
                    body as u64 - count * stride as u64
                ),
            )
        });
    }

    let side = k * p;
    let cells = k * k;
    let mut samples = Vec::with_capacity(count as usize);
    for (i, rec) in bytes[HEADER_LEN..].chunks_exact(stride).enumerate() {
        let record = format!("sample {i}");
        let (img, rest) = rec.split_at(side * side * 3 * 4);
        let (wts, rest) = rest.split_at(cells * 8);
        let (mask, cost) = rest.split_at(cells);
        let image: Vec<f32> = img
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if image.iter().any(|v| !v.is_finite()) {
            return Err(err(&record, "non-finite pixel".into()));
        }
        let weights = wts
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let true_weights = WeightGrid::new(k, weights).map_err(|e| err(&record, e.to_string()))?;
        if let Some(b) = mask.iter().find(|&&b| b > 1) {
            return Err(err(&record, format!("mask byte {b} is neither 0 nor 1")));
        }
        let true_mask = PathMask::from_bools(k, mask.iter().map(|&b| b == 1).collect())?;
        let optimal_cost = f64::from_le_bytes(cost.try_into().unwrap());
        if !optimal_cost.is_finite() {
            return Err(err(&record, "non-finite optimal cost".into()));
        }
        samples.push(Sample {
            image,
            true_weights,
            true_mask,
            optimal_cost,
        });
    }
    Ok((k, p, samples))
}

pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let m = &dataset.manifest;
    for (info, samples) in m.splits.iter().zip(&dataset.samples) {
        let path = dir.join(&info.file);
        fs::write(&path, encode_split(m.k, m.p, samples)).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(m).map_err(|source| Error::Manifest {
        path: path.clone(),
        source,
    })?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|source| Error::Manifest {
        path: path.clone(),
        source,
    })?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::format(
            &path,
            "version",
            format!("unsupported manifest version {}", m.version),
        ));
    }
    Ok(m)
}

/// Reads one split named in the manifest, checking it against the manifest.
pub fn read_split(dir: &Path, manifest: &Manifest, name: &str) -> Result<Vec<Sample>> {
    let info = manifest.split(name).ok_or_else(|| {
        Error::format(
            dir.join(MANIFEST_FILE),
            "splits",
            format!("no split named {name:?}"),
        )
    })?;
    let path = dir.join(&info.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let (k, p, samples) = decode_split(&bytes, &path)?;
    if (k, p, samples.len() as u64) != (manifest.k, manifest.p, info.count) {
        return Err(Error::format(
            &path,
            "header",
            format!(
                "k = {k}, p = {p}, {} samples; manifest says k = {}, p = {}, {} samples",
                samples.len(),
                manifest.k,
                manifest.p,
                info.count
            ),
        ));
    }
    Ok(samples)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let samples = manifest
        .splits
        .iter()
        .map(|s| read_split(dir, &manifest, &s.name))
        .collect::<Result<_>>()?;
    Ok(Dataset { manifest, samples })
}
